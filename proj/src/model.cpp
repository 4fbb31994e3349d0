#include "dsrl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dsrl/errors.hpp"
#include "dsrl/rng.hpp"

namespace dsrl {

namespace {

constexpr double kLayerNormEps = 1e-5;

// out[j] = bias[j] + sum_k in[k] * w[k * n_out + j]
template <typename T>
void linear_row(const T* in, const T* w, const T* bias, T* out, std::size_t n_in,
                std::size_t n_out) {
  std::copy(bias, bias + n_out, out);
  for (std::size_t k = 0; k < n_in; ++k) {
    const T x = in[k];
    const T* row = w + k * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += x * row[j];
  }
}

// Backward of linear_row for one row: accumulates dw, dbias and din.
template <typename T>
void linear_row_backward(const T* in, const T* dout, const T* w, T* dw, T* dbias, T* din,
                         std::size_t n_in, std::size_t n_out) {
  for (std::size_t j = 0; j < n_out; ++j) dbias[j] += dout[j];
  for (std::size_t k = 0; k < n_in; ++k) {
    const T x = in[k];
    const T* row = w + k * n_out;
    T* drow = dw + k * n_out;
    T acc = 0;
    for (std::size_t j = 0; j < n_out; ++j) {
      drow[j] += x * dout[j];
      acc += dout[j] * row[j];
    }
    din[k] += acc;
  }
}

template <typename T>
void layer_norm_row(const T* x, const T* gain, const T* bias, T* xhat, T* rstd, T* out,
                    std::size_t n) {
  T mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<T>(n);
  T var = 0;
  for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<T>(n);
  const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
  *rstd = r;
  for (std::size_t i = 0; i < n; ++i) {
    xhat[i] = (x[i] - mean) * r;
    out[i] = xhat[i] * gain[i] + bias[i];
  }
}

// din += layer-norm backward; dgain/dbias accumulated.
template <typename T>
void layer_norm_row_backward(const T* xhat, T rstd, const T* gain, const T* dout, T* dgain,
                             T* dbias, T* din, std::size_t n) {
  T mean_d = 0;
  T mean_dx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T dxhat = dout[i] * gain[i];
    dgain[i] += dout[i] * xhat[i];
    dbias[i] += dout[i];
    mean_d += dxhat;
    mean_dx += dxhat * xhat[i];
  }
  mean_d /= static_cast<T>(n);
  mean_dx /= static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T dxhat = dout[i] * gain[i];
    din[i] += rstd * (dxhat - mean_d - xhat[i] * mean_dx);
  }
}

template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = static_cast<T>(0.044715);

template <typename T>
T gelu(T u) {
  return T(0.5) * u * (T(1) + std::tanh(kGeluC<T> * (u + kGeluA<T> * u * u * u)));
}

template <typename T>
T gelu_grad(T u) {
  const T th = std::tanh(kGeluC<T> * (u + kGeluA<T> * u * u * u));
  return T(0.5) * (T(1) + th) +
         T(0.5) * u * (T(1) - th * th) * kGeluC<T> * (T(1) + T(3) * kGeluA<T> * u * u);
}

}  // namespace

// ---------------------------------------------------------------------------
// Architecture / layout

std::size_t Architecture::parameter_count() const { return ParamLayout(*this).total; }

void Architecture::validate() const {
  if (layers == 0 || width == 0 || heads == 0 || ffn_width == 0 || max_context == 0 ||
      vocab_size == 0)
    throw InvalidArgument("architecture dimensions must be positive");
  if (width % heads != 0) throw InvalidArgument("width must be divisible by heads");
}

Architecture Architecture::micro() {
  Architecture a;
  a.layers = 1;
  a.width = 4;
  a.heads = 2;
  a.ffn_width = 8;
  a.max_context = 12;
  a.vocab_size = 20;
  return a;
}

ParamLayout::ParamLayout(const Architecture& arch) {
  arch.validate();
  const std::size_t d = arch.width;
  const std::size_t f = arch.ffn_width;
  std::size_t off = 0;
  auto take = [&off](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  token_embedding = take(arch.vocab_size * d);
  position_embedding = take(arch.max_context * d);
  blocks.resize(arch.layers);
  for (auto& b : blocks) {
    b.ln1_gain = take(d);
    b.ln1_bias = take(d);
    b.qkv_weight = take(d * 3 * d);
    b.qkv_bias = take(3 * d);
    b.attn_out_weight = take(d * d);
    b.attn_out_bias = take(d);
    b.ln2_gain = take(d);
    b.ln2_bias = take(d);
    b.fc_weight = take(d * f);
    b.fc_bias = take(f);
    b.proj_weight = take(f * d);
    b.proj_bias = take(d);
  }
  final_gain = take(d);
  final_bias = take(d);
  head_weight = take(d * arch.vocab_size);
  head_bias = take(arch.vocab_size);
  total = off;
}

// ---------------------------------------------------------------------------
// PolicyParams

template <typename T>
PolicyParams<T>::PolicyParams(const Architecture& arch)
    : arch_(arch), layout_(arch), flat_(layout_.total, T(0)) {}

template <typename T>
PolicyParams<T>::PolicyParams(const Architecture& arch, std::vector<T> flat)
    : arch_(arch), layout_(arch), flat_(std::move(flat)) {
  if (flat_.size() != layout_.total)
    throw InvalidArgument("flat parameter vector has " + std::to_string(flat_.size()) +
                          " entries, architecture needs " + std::to_string(layout_.total));
}

template <typename T>
PolicyParams<T> PolicyParams<T>::initialized(const Architecture& arch, std::uint64_t seed,
                                             double stddev) {
  PolicyParams p(arch);
  const auto& L = p.layout_;
  const std::size_t d = arch.width;
  const std::size_t f = arch.ffn_width;
  std::uint64_t counter = 0;
  auto fill_normal = [&](std::size_t at, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      p.flat_[at + i] = static_cast<T>(stddev * rng::normal(seed, counter++));
  };
  auto fill_ones = [&](std::size_t at, std::size_t n) {
    std::fill_n(p.flat_.begin() + static_cast<std::ptrdiff_t>(at), n, T(1));
  };
  fill_normal(L.token_embedding, arch.vocab_size * d);
  fill_normal(L.position_embedding, arch.max_context * d);
  for (const auto& b : L.blocks) {
    fill_ones(b.ln1_gain, d);
    fill_normal(b.qkv_weight, d * 3 * d);
    fill_normal(b.attn_out_weight, d * d);
    fill_ones(b.ln2_gain, d);
    fill_normal(b.fc_weight, d * f);
    fill_normal(b.proj_weight, f * d);
  }
  fill_ones(L.final_gain, d);
  fill_normal(L.head_weight, d * arch.vocab_size);
  return p;
}

// ---------------------------------------------------------------------------
// Decoder

template <typename T>
Decoder<T>::Decoder(const PolicyParams<T>& params, std::size_t capacity)
    : params_(&params),
      capacity_(capacity == 0 ? params.arch().max_context
                              : std::min<std::size_t>(capacity, params.arch().max_context)) {
  const auto& a = params.arch();
  const std::size_t C = capacity_;
  const std::size_t d = a.width;
  tokens_.reserve(C);
  stream_.assign(a.layers + 1, std::vector<T>(C * d));
  blocks_.resize(a.layers);
  for (auto& b : blocks_) {
    b.xhat1.resize(C * d);
    b.rstd1.resize(C);
    b.ln1_out.resize(C * d);
    b.qkv.resize(C * 3 * d);
    b.probs.assign(a.heads * C * C, T(0));
    b.attn.resize(C * d);
    b.mid.resize(C * d);
    b.xhat2.resize(C * d);
    b.rstd2.resize(C);
    b.ln2_out.resize(C * d);
    b.fc_pre.resize(C * a.ffn_width);
    b.fc_act.resize(C * a.ffn_width);
  }
  xhat_f_.resize(C * d);
  rstd_f_.resize(C);
  final_out_.resize(C * d);
  logits_.resize(C * a.vocab_size);
}

template <typename T>
std::span<const T> Decoder<T>::logits(std::size_t position) const {
  if (position >= length_) throw InvalidArgument("logits requested past decoded length");
  const std::size_t V = params_->arch().vocab_size;
  return std::span<const T>(logits_).subspan(position * V, V);
}

template <typename T>
void Decoder<T>::append(Token token) {
  const auto& a = params_->arch();
  if (length_ >= capacity_)
    throw InvalidArgument("context exceeds maximum length " + std::to_string(capacity_));
  if (token < 0 || static_cast<std::uint32_t>(token) >= a.vocab_size)
    throw InvalidArgument("token id " + std::to_string(token) + " outside vocabulary");

  const T* P = params_->flat().data();
  const auto& L = params_->layout();
  const std::size_t d = a.width;
  const std::size_t H = a.heads;
  const std::size_t hd = d / H;
  const std::size_t f = a.ffn_width;
  const std::size_t C = capacity_;
  const std::size_t t = length_;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  tokens_.push_back(token);
  T* x0 = stream_[0].data() + t * d;
  const T* te = P + L.token_embedding + static_cast<std::size_t>(token) * d;
  const T* pe = P + L.position_embedding + t * d;
  for (std::size_t i = 0; i < d; ++i) x0[i] = te[i] + pe[i];

  std::vector<T> scores(t + 1);
  for (std::size_t l = 0; l < a.layers; ++l) {
    const auto& W = L.blocks[l];
    auto& B = blocks_[l];
    const T* x = stream_[l].data() + t * d;

    layer_norm_row(x, P + W.ln1_gain, P + W.ln1_bias, &B.xhat1[t * d], &B.rstd1[t],
                   &B.ln1_out[t * d], d);
    linear_row(&B.ln1_out[t * d], P + W.qkv_weight, P + W.qkv_bias, &B.qkv[t * 3 * d], d, 3 * d);

    T* attn = &B.attn[t * d];
    for (std::size_t h = 0; h < H; ++h) {
      const T* q = &B.qkv[t * 3 * d + h * hd];
      T max_s = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j <= t; ++j) {
        const T* k = &B.qkv[j * 3 * d + d + h * hd];
        T s = 0;
        for (std::size_t i = 0; i < hd; ++i) s += q[i] * k[i];
        scores[j] = s * scale;
        max_s = std::max(max_s, scores[j]);
      }
      T denom = 0;
      for (std::size_t j = 0; j <= t; ++j) {
        scores[j] = std::exp(scores[j] - max_s);
        denom += scores[j];
      }
      T* prow = &B.probs[(h * C + t) * C];
      T* out = attn + h * hd;
      std::fill(out, out + hd, T(0));
      for (std::size_t j = 0; j <= t; ++j) {
        prow[j] = scores[j] / denom;
        const T* v = &B.qkv[j * 3 * d + 2 * d + h * hd];
        for (std::size_t i = 0; i < hd; ++i) out[i] += prow[j] * v[i];
      }
    }

    T* mid = &B.mid[t * d];
    linear_row(attn, P + W.attn_out_weight, P + W.attn_out_bias, mid, d, d);
    for (std::size_t i = 0; i < d; ++i) mid[i] += x[i];

    layer_norm_row(mid, P + W.ln2_gain, P + W.ln2_bias, &B.xhat2[t * d], &B.rstd2[t],
                   &B.ln2_out[t * d], d);
    linear_row(&B.ln2_out[t * d], P + W.fc_weight, P + W.fc_bias, &B.fc_pre[t * f], d, f);
    for (std::size_t i = 0; i < f; ++i) B.fc_act[t * f + i] = gelu(B.fc_pre[t * f + i]);

    T* next = stream_[l + 1].data() + t * d;
    linear_row(&B.fc_act[t * f], P + W.proj_weight, P + W.proj_bias, next, f, d);
    for (std::size_t i = 0; i < d; ++i) next[i] += mid[i];
  }

  const T* xl = stream_[a.layers].data() + t * d;
  layer_norm_row(xl, P + L.final_gain, P + L.final_bias, &xhat_f_[t * d], &rstd_f_[t],
                 &final_out_[t * d], d);
  linear_row(&final_out_[t * d], P + L.head_weight, P + L.head_bias,
             &logits_[t * a.vocab_size], d, a.vocab_size);
  ++length_;
}

template <typename T>
void Decoder<T>::backward(std::span<const T> dlogits, std::span<T> grad) const {
  const auto& a = params_->arch();
  const std::size_t V = a.vocab_size;
  if (dlogits.size() != length_ * V) throw InvalidArgument("dlogits size mismatch");
  if (grad.size() != params_->size()) throw InvalidArgument("gradient size mismatch");

  const T* P = params_->flat().data();
  T* G = grad.data();
  const auto& L = params_->layout();
  const std::size_t d = a.width;
  const std::size_t H = a.heads;
  const std::size_t hd = d / H;
  const std::size_t f = a.ffn_width;
  const std::size_t C = capacity_;
  const std::size_t n = length_;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  // Gradient w.r.t. the residual stream, all rows.
  std::vector<T> dx(n * d, T(0));
  {
    std::vector<T> dout(d);
    for (std::size_t t = 0; t < n; ++t) {
      std::fill(dout.begin(), dout.end(), T(0));
      linear_row_backward(&final_out_[t * d], &dlogits[t * V], P + L.head_weight,
                          G + L.head_weight, G + L.head_bias, dout.data(), d, V);
      layer_norm_row_backward(&xhat_f_[t * d], rstd_f_[t], P + L.final_gain, dout.data(),
                              G + L.final_gain, G + L.final_bias, &dx[t * d], d);
    }
  }

  std::vector<T> dmid(n * d), dact(f), dpre(f), dln(d), dattn(n * d), dqkv(n * 3 * d), dprob(n);
  for (std::size_t l = a.layers; l-- > 0;) {
    const auto& W = L.blocks[l];
    const auto& B = blocks_[l];

    // next = mid + proj(gelu(fc(ln2(mid))))
    dmid = dx;
    for (std::size_t t = 0; t < n; ++t) {
      std::fill(dact.begin(), dact.end(), T(0));
      linear_row_backward(&B.fc_act[t * f], &dx[t * d], P + W.proj_weight, G + W.proj_weight,
                          G + W.proj_bias, dact.data(), f, d);
      for (std::size_t i = 0; i < f; ++i) dpre[i] = dact[i] * gelu_grad(B.fc_pre[t * f + i]);
      std::fill(dln.begin(), dln.end(), T(0));
      linear_row_backward(&B.ln2_out[t * d], dpre.data(), P + W.fc_weight, G + W.fc_weight,
                          G + W.fc_bias, dln.data(), d, f);
      layer_norm_row_backward(&B.xhat2[t * d], B.rstd2[t], P + W.ln2_gain, dln.data(),
                              G + W.ln2_gain, G + W.ln2_bias, &dmid[t * d], d);
    }

    // mid = x + attn_out(attn(ln1(x)))
    dx = dmid;
    std::fill(dattn.begin(), dattn.end(), T(0));
    for (std::size_t t = 0; t < n; ++t)
      linear_row_backward(&B.attn[t * d], &dmid[t * d], P + W.attn_out_weight,
                          G + W.attn_out_weight, G + W.attn_out_bias, &dattn[t * d], d, d);

    std::fill(dqkv.begin(), dqkv.end(), T(0));
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < n; ++t) {
        const T* prow = &B.probs[(h * C + t) * C];
        const T* dout = &dattn[t * d + h * hd];
        T weighted = 0;
        for (std::size_t j = 0; j <= t; ++j) {
          const T* v = &B.qkv[j * 3 * d + 2 * d + h * hd];
          T* dv = &dqkv[j * 3 * d + 2 * d + h * hd];
          T dp = 0;
          for (std::size_t i = 0; i < hd; ++i) {
            dp += dout[i] * v[i];
            dv[i] += prow[j] * dout[i];
          }
          dprob[j] = dp;
          weighted += prow[j] * dp;
        }
        const T* q = &B.qkv[t * 3 * d + h * hd];
        T* dq = &dqkv[t * 3 * d + h * hd];
        for (std::size_t j = 0; j <= t; ++j) {
          const T ds = prow[j] * (dprob[j] - weighted) * scale;
          const T* k = &B.qkv[j * 3 * d + d + h * hd];
          T* dk = &dqkv[j * 3 * d + d + h * hd];
          for (std::size_t i = 0; i < hd; ++i) {
            dq[i] += ds * k[i];
            dk[i] += ds * q[i];
          }
        }
      }
    }

    for (std::size_t t = 0; t < n; ++t) {
      std::fill(dln.begin(), dln.end(), T(0));
      linear_row_backward(&B.ln1_out[t * d], &dqkv[t * 3 * d], P + W.qkv_weight,
                          G + W.qkv_weight, G + W.qkv_bias, dln.data(), d, 3 * d);
      layer_norm_row_backward(&B.xhat1[t * d], B.rstd1[t], P + W.ln1_gain, dln.data(),
                              G + W.ln1_gain, G + W.ln1_bias, &dx[t * d], d);
    }
  }

  for (std::size_t t = 0; t < n; ++t) {
    T* te = G + L.token_embedding + static_cast<std::size_t>(tokens_[t]) * d;
    T* pe = G + L.position_embedding + t * d;
    for (std::size_t i = 0; i < d; ++i) {
      te[i] += dx[t * d + i];
      pe[i] += dx[t * d + i];
    }
  }
}

template class PolicyParams<float>;
template class PolicyParams<double>;
template class Decoder<float>;
template class Decoder<double>;

}  // namespace dsrl
