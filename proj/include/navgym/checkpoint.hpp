#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "navgym/acnet.hpp"

namespace navgym {

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t episodes = 0;
  std::uint64_t updates = 0;
};

struct Checkpoint {
  NetParams<float> params;
  OptState opt;
  CheckpointMeta meta;
  std::vector<std::string> warnings;
};

// Little-endian layout:
//   "NAVG" | u32 version | u64 config_hash | u64 episodes | u64 updates
//   | 11 x i32 shape | u64 n | n x f32 params (ParamLayout order)
//   | f64 lr | f64 decay | f64 eps | u64 opt steps | n x f32 accumulators
//   | u64 FNV-1a of all preceding bytes
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) v = byteswap_value(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void raw(std::string_view s) { buf_.append(s); }
  std::string& str() { return buf_; }

  template <class T>
  static T byteswap_value(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : d_(data) {}
  template <class T>
  T get(const char* field) {
    if (pos_ + sizeof(T) > d_.size())
      throw CheckpointError(std::string("checkpoint truncated while reading ") + field + " (offset " +
                            std::to_string(pos_) + ", size " + std::to_string(d_.size()) + ")");
    T v;
    std::memcpy(&v, d_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) v = Writer::byteswap_value(v);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return d_.size() - pos_; }

 private:
  std::string_view d_;
  std::size_t pos_ = 0;
};

}  // namespace ckpt_detail

inline std::string save_checkpoint(const NetParams<float>& params, const OptState& opt, const CheckpointMeta& meta) {
  ckpt_detail::Writer w;
  w.raw("NAVG");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(meta.config_hash);
  w.put<std::uint64_t>(meta.episodes);
  w.put<std::uint64_t>(meta.updates);
  const auto& s = params.shape;
  for (int v : {s.beams, s.history, s.bearing_bins, s.conv1_kernel, s.conv1_stride, s.conv1_channels, s.conv2_kernel,
                s.conv2_stride, s.conv2_channels, s.hidden, s.actions})
    w.put<std::int32_t>(v);
  w.put<std::uint64_t>(params.values.size());
  for (float v : params.values) w.put<float>(v);
  w.put<double>(opt.learning_rate);
  w.put<double>(opt.decay);
  w.put<double>(opt.epsilon);
  w.put<std::uint64_t>(opt.steps);
  if (opt.accum.size() != params.values.size()) throw CheckpointError("optimizer state size does not match parameters");
  for (float v : opt.accum) w.put<float>(v);
  const std::uint64_t sum = fnv1a64(w.str());
  w.put<std::uint64_t>(sum);
  return std::move(w.str());
}

/// Parses a checkpoint. A config-hash mismatch is reported in `warnings`,
/// corruption of any kind throws CheckpointError.
inline Checkpoint load_checkpoint(std::string_view data, std::optional<std::uint64_t> expected_config_hash = {}) {
  if (data.size() < 4 || data.substr(0, 4) != "NAVG") throw CheckpointError("not a checkpoint (bad magic bytes)");
  if (data.size() < 12) throw CheckpointError("checkpoint truncated in header");
  ckpt_detail::Reader r(data.substr(4));
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.meta.config_hash = r.get<std::uint64_t>("config hash");
  ck.meta.episodes = r.get<std::uint64_t>("episode count");
  ck.meta.updates = r.get<std::uint64_t>("update count");
  NetShape s;
  int* fields[] = {&s.beams, &s.history, &s.bearing_bins, &s.conv1_kernel, &s.conv1_stride, &s.conv1_channels,
                   &s.conv2_kernel, &s.conv2_stride, &s.conv2_channels, &s.hidden, &s.actions};
  for (int* f : fields) *f = r.get<std::int32_t>("network shape");
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint network shape invalid: ") + e.what());
  }
  const auto n = r.get<std::uint64_t>("parameter count");
  const ParamLayout layout(s);
  if (n != layout.total)
    throw CheckpointError("checkpoint parameter count " + std::to_string(n) + " does not match its shape (" +
                          std::to_string(layout.total) + ")");
  // params + accumulators + trailing scalars + checksum
  const std::size_t need = 2 * n * sizeof(float) + 3 * sizeof(double) + 2 * sizeof(std::uint64_t);
  if (r.remaining() != need)
    throw CheckpointError("checkpoint size mismatch: expected " + std::to_string(need) + " payload bytes, found " +
                          std::to_string(r.remaining()));
  ck.params = NetParams<float>(s);
  for (auto& v : ck.params.values) v = r.get<float>("parameters");
  ck.opt.learning_rate = r.get<double>("learning rate");
  ck.opt.decay = r.get<double>("decay");
  ck.opt.epsilon = r.get<double>("epsilon");
  ck.opt.steps = r.get<std::uint64_t>("optimizer steps");
  ck.opt.accum.resize(n);
  for (auto& v : ck.opt.accum) v = r.get<float>("optimizer state");
  const std::size_t body = 4 + r.pos();
  const auto stored = r.get<std::uint64_t>("checksum");
  if (stored != fnv1a64(data.substr(0, body))) throw CheckpointError("checkpoint checksum mismatch (file corrupt)");
  for (float v : ck.params.values)
    if (!std::isfinite(v)) throw CheckpointError("checkpoint contains non-finite parameters");
  if (expected_config_hash && *expected_config_hash != ck.meta.config_hash) {
    std::ostringstream msg;
    msg << "checkpoint config hash " << std::hex << ck.meta.config_hash << " differs from current config "
        << *expected_config_hash;
    ck.warnings.push_back(msg.str());
  }
  return ck;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace navgym
