#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dsrl/task.hpp"

namespace dsrl {

// Shape of the decoder-only transformer policy.
struct Architecture {
  std::uint32_t layers = 2;
  std::uint32_t width = 32;
  std::uint32_t heads = 2;
  std::uint32_t ffn_width = 64;
  std::uint32_t max_context = 64;
  std::uint32_t vocab_size = 20;

  std::size_t parameter_count() const;
  void validate() const;

  // One block, width 4, context 12: 408 parameters. Used by gradient checks.
  static Architecture micro();

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Offsets of each tensor inside the flat parameter vector. Flattening order:
//   token_embedding [vocab x width], position_embedding [context x width],
//   per block: ln1 gain, ln1 bias, qkv weight [width x 3 width], qkv bias,
//              attn_out weight [width x width], attn_out bias, ln2 gain, ln2 bias,
//              fc weight [width x ffn], fc bias, proj weight [ffn x width], proj bias,
//   final gain, final bias, head weight [width x vocab], head bias.
// Matrices are row-major with the input dimension first.
struct ParamLayout {
  struct Block {
    std::size_t ln1_gain, ln1_bias;
    std::size_t qkv_weight, qkv_bias;
    std::size_t attn_out_weight, attn_out_bias;
    std::size_t ln2_gain, ln2_bias;
    std::size_t fc_weight, fc_bias;
    std::size_t proj_weight, proj_bias;

    friend bool operator==(const Block&, const Block&) = default;
  };

  std::size_t token_embedding = 0;
  std::size_t position_embedding = 0;
  std::vector<Block> blocks;
  std::size_t final_gain = 0, final_bias = 0;
  std::size_t head_weight = 0, head_bias = 0;
  std::size_t total = 0;

  ParamLayout() = default;
  explicit ParamLayout(const Architecture& arch);

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

template <typename T>
class PolicyParams {
 public:
  PolicyParams() = default;
  // All-zero parameters.
  explicit PolicyParams(const Architecture& arch);
  PolicyParams(const Architecture& arch, std::vector<T> flat);

  // Weights ~ N(0, stddev^2), biases zero, layer-norm gains one.
  static PolicyParams initialized(const Architecture& arch, std::uint64_t seed,
                                  double stddev = 0.02);

  const Architecture& arch() const noexcept { return arch_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  std::size_t size() const noexcept { return flat_.size(); }
  std::span<T> flat() noexcept { return flat_; }
  std::span<const T> flat() const noexcept { return flat_; }
  std::vector<T> to_flat() const { return flat_; }

  template <typename U>
  PolicyParams<U> cast() const {
    return PolicyParams<U>(arch_, std::vector<U>(flat_.begin(), flat_.end()));
  }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  Architecture arch_;
  ParamLayout layout_;
  std::vector<T> flat_;
};

// Incremental causal forward pass that keeps every activation needed for an
// exact backward pass. Appending tokens one at a time doubles as the sampling
// decoder, so sampled and rescored log-probabilities share one code path.
// The referenced parameters must outlive the decoder.
template <typename T>
class Decoder {
 public:
  // capacity 0 means the architecture's max_context.
  explicit Decoder(const PolicyParams<T>& params, std::size_t capacity = 0);

  void append(Token token);
  std::size_t length() const noexcept { return length_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::span<const T> logits(std::size_t position) const;

  // Accumulates d(sum_pos <dlogits[pos], logits[pos]>)/d(params) into grad.
  // dlogits covers length() rows of vocab_size entries each.
  void backward(std::span<const T> dlogits, std::span<T> grad) const;

 private:
  struct BlockActs {
    std::vector<T> xhat1, rstd1, ln1_out, qkv, probs, attn, mid, xhat2, rstd2, ln2_out, fc_pre,
        fc_act;
  };

  const PolicyParams<T>* params_;
  std::size_t capacity_;
  std::size_t length_ = 0;
  std::vector<Token> tokens_;
  std::vector<std::vector<T>> stream_;  // residual stream entering each block, plus final
  std::vector<BlockActs> blocks_;
  std::vector<T> xhat_f_, rstd_f_, final_out_, logits_;
};

}  // namespace dsrl
