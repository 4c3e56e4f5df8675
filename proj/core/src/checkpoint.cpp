#include "spsn/checkpoint.hpp"

#include <cstring>

#include "spsn/detail/byte_io.hpp"

namespace spsn {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

template <typename Real>
void write_tensor(ByteWriter& w, const std::string& name, const Tensor<Real>& t) {
  w.string(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u64(d);
  for (Real v : t.data()) {
    if constexpr (sizeof(Real) == 4) {
      w.f32(v);
    } else {
      w.f64(v);
    }
  }
}

template <typename Real>
Tensor<Real> read_tensor(ByteReader& r, const std::string& expected_name, const Shape& expected) {
  const auto name = r.string();
  if (name != expected_name) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "checkpoint: expected tensor '" + expected_name + "', found '" + name + "'");
  }
  const auto rank = r.u32();
  Shape shape;
  for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(r.u64()));
  if (shape != expected) {
    throw DataError(DataErrorKind::ShapeMismatch, "checkpoint: tensor '" + name + "' has shape " +
                                                      shape_string(shape) + ", expected " +
                                                      shape_string(expected));
  }
  Tensor<Real> t(shape);
  for (auto& v : t.data()) {
    if constexpr (sizeof(Real) == 4) {
      v = r.f32();
    } else {
      v = r.f64();
    }
  }
  return t;
}

// Verifies magic, version and CRC; returns the body without the footer.
std::span<const std::uint8_t> checked_body(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw DataError(DataErrorKind::MagicMismatch, "checkpoint: bad magic (expected SPCK)");
  }
  ByteReader header(bytes.subspan(4), "checkpoint");
  const auto version = header.u16();
  if (version != kCheckpointVersion) {
    throw DataError(DataErrorKind::VersionMismatch,
                    "checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < 4 + 2 + 1 + 4) {
    throw DataError(DataErrorKind::Truncated, "checkpoint: unexpected end of file");
  }
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader footer(bytes.last(4), "checkpoint");
  if (footer.u32() != detail::crc32(body)) {
    throw DataError(DataErrorKind::ChecksumMismatch, "checkpoint: CRC-32 mismatch");
  }
  return body;
}

Precision precision_from_width(std::uint8_t width) {
  if (width == 4) return Precision::F32;
  if (width == 8) return Precision::F64;
  throw DataError(DataErrorKind::InvariantViolation,
                  "checkpoint: invalid real width " + std::to_string(width));
}

}  // namespace

template <typename Real>
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<Real>& ckpt) {
  const auto params = ckpt.network.parameters();
  const auto names = ckpt.network.parameter_names();
  if (ckpt.optimizer.m.size() != params.size() || ckpt.optimizer.u_inf.size() != params.size()) {
    throw DataError(DataErrorKind::ShapeMismatch, "checkpoint: optimizer state does not match");
  }
  ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(sizeof(Real)));
  w.string(to_json(ckpt.config));
  w.u64(ckpt.config.seed);
  w.u64(ckpt.epochs_completed);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) write_tensor(w, names[k], *params[k]);
  const auto& opt = ckpt.optimizer;
  w.u64(opt.step);
  w.f64(opt.config.lr);
  w.f64(opt.config.beta1);
  w.f64(opt.config.beta2);
  w.f64(opt.config.eps);
  for (std::size_t k = 0; k < params.size(); ++k) write_tensor(w, names[k] + ".m", opt.m[k]);
  for (std::size_t k = 0; k < params.size(); ++k) {
    write_tensor(w, names[k] + ".u_inf", opt.u_inf[k]);
  }
  w.u32(detail::crc32(w.buffer()));
  return std::move(w).take();
}

template <typename Real>
Checkpoint<Real> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  const auto body = checked_body(bytes);
  ByteReader r(body.subspan(6), "checkpoint");
  const auto precision = precision_from_width(r.u8());
  if (precision_from_width(sizeof(Real)) != precision) {
    throw DataError(DataErrorKind::InvariantViolation,
                    "checkpoint: stored precision is " + std::string(to_string(precision)));
  }
  Checkpoint<Real> ckpt;
  try {
    ckpt.config = run_config_from_json(r.string());
    ckpt.config.validate();
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::InvariantViolation,
                    std::string("checkpoint: embedded config invalid: ") + e.what());
  }
  if (r.u64() != ckpt.config.seed) {
    throw DataError(DataErrorKind::InvariantViolation, "checkpoint: seed disagrees with config");
  }
  ckpt.epochs_completed = r.u64();

  Rng unused(0);
  ckpt.network = build_network<Real>(ckpt.config.network, unused);
  auto params = ckpt.network.parameters();
  const auto names = ckpt.network.parameter_names();
  if (r.u32() != params.size()) {
    throw DataError(DataErrorKind::ShapeMismatch, "checkpoint: parameter count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    *params[k] = read_tensor<Real>(r, names[k], params[k]->shape());
  }
  auto& opt = ckpt.optimizer;
  opt.step = r.u64();
  opt.config.lr = r.f64();
  opt.config.beta1 = r.f64();
  opt.config.beta2 = r.f64();
  opt.config.eps = r.f64();
  for (std::size_t k = 0; k < params.size(); ++k) {
    opt.m.push_back(read_tensor<Real>(r, names[k] + ".m", params[k]->shape()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    opt.u_inf.push_back(read_tensor<Real>(r, names[k] + ".u_inf", params[k]->shape()));
  }
  if (r.remaining() != 0) {
    throw DataError(DataErrorKind::InvariantViolation, "checkpoint: trailing bytes");
  }
  return ckpt;
}

template <typename Real>
void save_checkpoint(const Checkpoint<Real>& ckpt, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<Real>(detail::read_file(path));
}

Precision checkpoint_precision(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  checked_body(bytes);
  ByteReader r(std::span<const std::uint8_t>(bytes).subspan(6), "checkpoint");
  return precision_from_width(r.u8());
}

#define SPSN_INSTANTIATE(Real)                                                                 \
  template std::vector<std::uint8_t> encode_checkpoint<Real>(const Checkpoint<Real>&);       \
  template Checkpoint<Real> decode_checkpoint<Real>(std::span<const std::uint8_t>);          \
  template void save_checkpoint<Real>(const Checkpoint<Real>&, const std::filesystem::path&); \
  template Checkpoint<Real> load_checkpoint<Real>(const std::filesystem::path&);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
