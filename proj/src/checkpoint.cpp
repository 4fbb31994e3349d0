#include "dsrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dsrl/errors.hpp"

namespace dsrl {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'R', 'L'};
constexpr char kOptimizerTag[4] = {'O', 'P', 'T', '1'};

class Writer {
 public:
  void raw(const char (&tag)[4]) {
    for (char c : tag) out_.push_back(static_cast<std::byte>(c));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
  }
  void f32s(std::span<const float> values) {
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::vector<std::byte> take() && { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  bool tag_is(const char (&tag)[4]) {
    need(4, "section tag");
    const bool ok = std::memcmp(bytes_.data() + pos_, tag, 4) == 0;
    if (ok) pos_ += 4;
    return ok;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::vector<float> f32s(std::size_t count, const char* what) {
    if (count > remaining() / 4) throw truncated(what);
    std::vector<float> out(count);
    for (auto& f : out) f = std::bit_cast<float>(u32(what));
    return out;
  }

 private:
  static CheckpointError truncated(const char* what) {
    return CheckpointError(CheckpointError::Kind::truncated,
                           std::string("truncated checkpoint while reading ") + what);
  }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw truncated(what);
  }

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_checkpoint(const PolicyParams<float>& params,
                                         const OptimizerState* optimizer) {
  const auto& a = params.arch();
  Writer w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(a.layers);
  w.u32(a.width);
  w.u32(a.heads);
  w.u32(a.ffn_width);
  w.u32(a.max_context);
  w.u32(a.vocab_size);
  w.u32(static_cast<std::uint32_t>(params.size()));
  w.f32s(params.flat());
  if (optimizer != nullptr) {
    if (optimizer->first_moment.size() != params.size() ||
        optimizer->second_moment.size() != params.size())
      throw InvalidArgument("optimizer state does not match parameter count");
    w.raw(kOptimizerTag);
    w.u64(optimizer->optimizer_step);
    w.u64(optimizer->train_step);
    w.f32s(optimizer->first_moment);
    w.f32s(optimizer->second_moment);
  }
  return std::move(w).take();
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes, const Architecture* expected) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::Kind::bad_magic, "bad magic: not a DSRL checkpoint");
  r.tag_is(kMagic);
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::version_mismatch,
                          "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  Architecture arch;
  arch.layers = r.u32("architecture");
  arch.width = r.u32("architecture");
  arch.heads = r.u32("architecture");
  arch.ffn_width = r.u32("architecture");
  arch.max_context = r.u32("architecture");
  arch.vocab_size = r.u32("architecture");
  const std::uint32_t count = r.u32("parameter count");
  try {
    if (arch.parameter_count() != count)
      throw CheckpointError(CheckpointError::Kind::architecture_mismatch,
                            "stored parameter count disagrees with stored architecture");
  } catch (const InvalidArgument& e) {
    throw CheckpointError(CheckpointError::Kind::architecture_mismatch,
                          std::string("invalid stored architecture: ") + e.what());
  }
  if (expected != nullptr && !(*expected == arch))
    throw CheckpointError(
        CheckpointError::Kind::architecture_mismatch,
        "architecture mismatch: checkpoint has " + std::to_string(arch.layers) + " layers, width " +
            std::to_string(arch.width) + "; expected " + std::to_string(expected->layers) +
            " layers, width " + std::to_string(expected->width));

  Checkpoint ck{PolicyParams<float>(arch, r.f32s(count, "parameters")), std::nullopt};
  if (r.at_end()) return ck;

  if (!r.tag_is(kOptimizerTag))
    throw CheckpointError(CheckpointError::Kind::truncated,
                          "unexpected trailing bytes after parameters");
  OptimizerState opt;
  opt.optimizer_step = r.u64("optimizer step");
  opt.train_step = r.u64("train step");
  opt.first_moment = r.f32s(count, "first moment");
  opt.second_moment = r.f32s(count, "second moment");
  if (!r.at_end())
    throw CheckpointError(CheckpointError::Kind::truncated,
                          "unexpected trailing bytes after optimizer section");
  ck.optimizer = std::move(opt);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams<float>& params,
                     const OptimizerState* optimizer) {
  const auto bytes = encode_checkpoint(params, optimizer);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw CheckpointError(CheckpointError::Kind::io, "cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out)
      throw CheckpointError(CheckpointError::Kind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw CheckpointError(CheckpointError::Kind::io,
                          "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::as_bytes(std::span<const char>(raw)), expected);
}

}  // namespace dsrl
