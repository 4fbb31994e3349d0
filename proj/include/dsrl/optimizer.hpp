#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dsrl/errors.hpp"

namespace dsrl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Minimizes: params -= lr * m_hat / (sqrt(v_hat) + eps).
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, T(0)), v_(size, T(0)) {}

  void step(std::span<T> params, std::span<const T> grad, double learning_rate) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw InvalidArgument("optimizer size mismatch");
    ++steps_;
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, static_cast<double>(steps_)));
    const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, static_cast<double>(steps_)));
    const T lr = static_cast<T>(learning_rate);
    const T eps = static_cast<T>(config_.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (T(1) - b1) * grad[i];
      v_[i] = b2 * v_[i] + (T(1) - b2) * grad[i] * grad[i];
      const T m_hat = m_[i] / c1;
      const T v_hat = v_[i] / c2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }

  // Zeroes both moment vectors and the step counter.
  void reset() {
    std::fill(m_.begin(), m_.end(), T(0));
    std::fill(v_.begin(), v_.end(), T(0));
    steps_ = 0;
  }

  const AdamConfig& config() const noexcept { return config_; }
  std::span<const T> first_moment() const noexcept { return m_; }
  std::span<const T> second_moment() const noexcept { return v_; }
  std::uint64_t steps() const noexcept { return steps_; }

  void restore(std::vector<T> m, std::vector<T> v, std::uint64_t steps) {
    if (m.size() != m_.size() || v.size() != v_.size())
      throw InvalidArgument("optimizer state size mismatch");
    m_ = std::move(m);
    v_ = std::move(v);
    steps_ = steps;
  }

 private:
  AdamConfig config_;
  std::vector<T> m_;
  std::vector<T> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace dsrl
