#pragma once

// Shared domain types: norm maps, similarity scores, error codes, seeding, and
// the little-endian helpers used by every binary file format in the project.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace normpuf {

enum class Errc {
  constant_input,
  length_mismatch,
  dimension_mismatch,
  invalid_param,
  alignment_failed,
  rank_deficient_lights,
  not_aligned,
  duplicate_id,
  storage_failure,
  unknown_id,
  empty_store,
  invalid_strength,
  insufficient_data,
  degenerate_simplex,
  invalid_query,
  infeasible_estimate,
  format_error,
};

inline constexpr std::string_view to_string(Errc c) noexcept {
  switch (c) {
    case Errc::constant_input: return "ConstantInput";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::invalid_param: return "InvalidParam";
    case Errc::alignment_failed: return "AlignmentFailed";
    case Errc::rank_deficient_lights: return "RankDeficientLights";
    case Errc::not_aligned: return "NotAligned";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::storage_failure: return "StorageFailure";
    case Errc::unknown_id: return "UnknownId";
    case Errc::empty_store: return "EmptyStore";
    case Errc::invalid_strength: return "InvalidStrength";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::degenerate_simplex: return "DegenerateSimplex";
    case Errc::invalid_query: return "InvalidQuery";
    case Errc::infeasible_estimate: return "InfeasibleEstimate";
    case Errc::format_error: return "FormatError";
  }
  return "Unknown";
}

/// Domain error. Every failure the library reports carries one of the codes
/// above so callers (and the CLI's exit-code mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double dot(const Vec3& o) const noexcept { return x * o.x + y * o.y + z * o.z; }
  double norm() const noexcept { return std::sqrt(dot(*this)); }
  Vec3 normalized() const noexcept {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
  friend Vec3 operator*(double s, const Vec3& v) noexcept { return {s * v.x, s * v.y, s * v.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) noexcept { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

enum class Axis { x, y };

inline constexpr std::string_view to_string(Axis a) noexcept { return a == Axis::x ? "x" : "y"; }

// ---------------------------------------------------------------------------
// NormMap

/// Projected surface-normal field: per pixel the (x, y) components of a unit
/// normal, row-major. The feature every template, query and forgery shares.
class NormMap {
 public:
  /// Tolerance on nx²+ny² ≤ 1; covers float32 round-trips of unit-length pairs.
  static constexpr double kDiskSlack = 1e-6;

  NormMap() = default;

  NormMap(int width, int height, std::vector<double> nx, std::vector<double> ny)
      : width_(width), height_(height), nx_(std::move(nx)), ny_(std::move(ny)) {
    if (width_ <= 0 || height_ <= 0)
      throw Error(Errc::invalid_param, "norm map dimensions must be positive");
    const auto n = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    if (nx_.size() != n || ny_.size() != n)
      throw Error(Errc::dimension_mismatch, "norm map field size does not match width*height");
    for (std::size_t i = 0; i < n; ++i) {
      const double r2 = nx_[i] * nx_[i] + ny_[i] * ny_[i];
      if (!std::isfinite(r2) || r2 > 1.0 + kDiskSlack)
        throw Error(Errc::invalid_param, "norm map pixel outside the unit disk");
    }
  }

  static NormMap zeros(int width, int height) {
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    return NormMap(width, height, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return nx_.size(); }
  bool empty() const noexcept { return nx_.empty(); }

  std::span<const double> nx() const noexcept { return nx_; }
  std::span<const double> ny() const noexcept { return ny_; }
  std::span<const double> component(Axis a) const noexcept { return a == Axis::x ? nx() : ny(); }

  double nx_at(int col, int row) const { return nx_[index(col, row)]; }
  double ny_at(int col, int row) const { return ny_[index(col, row)]; }
  /// z reconstructed from the projection.
  double nz_at(int col, int row) const {
    const auto i = index(col, row);
    return std::sqrt(std::max(0.0, 1.0 - nx_[i] * nx_[i] - ny_[i] * ny_[i]));
  }

  bool same_shape(const NormMap& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

  /// Copy with every value rounded through float32, i.e. what survives a
  /// .nmap round-trip.
  NormMap float_rounded() const {
    auto round = [](std::vector<double> v) {
      for (auto& e : v) e = static_cast<double>(static_cast<float>(e));
      return v;
    };
    return NormMap(width_, height_, round(nx_), round(ny_));
  }

  NormMap negated() const {
    auto neg = [](std::vector<double> v) {
      for (auto& e : v) e = -e;
      return v;
    };
    return NormMap(width_, height_, neg(nx_), neg(ny_));
  }

  friend bool operator==(const NormMap&, const NormMap&) = default;

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> nx_;
  std::vector<double> ny_;
};

// ---------------------------------------------------------------------------
// Similarity

struct SimilarityScore {
  double corr_x = 0.0;
  double corr_y = 0.0;

  double min() const noexcept { return std::min(corr_x, corr_y); }
  double component(Axis a) const noexcept { return a == Axis::x ? corr_x : corr_y; }
  friend bool operator==(const SimilarityScore&, const SimilarityScore&) = default;
};

/// Pearson correlation, two-pass for accuracy.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::length_mismatch, "pearson inputs differ in length");
  if (a.size() < 2) throw Error(Errc::length_mismatch, "pearson needs at least two samples");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(Errc::constant_input, "pearson input has zero variance");
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

inline SimilarityScore score(const NormMap& query, const NormMap& reference) {
  if (!query.same_shape(reference)) throw Error(Errc::dimension_mismatch, "score: norm maps differ in shape");
  return {pearson(query.nx(), reference.nx()), pearson(query.ny(), reference.ny())};
}

/// ℓ₂ distance over the concatenated (nx, ny) feature. Metric only; the
/// decision rule is always the correlation threshold.
inline double l2_distance(const NormMap& a, const NormMap& b) {
  if (!a.same_shape(b)) throw Error(Errc::dimension_mismatch, "l2_distance: norm maps differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dx = a.nx()[i] - b.nx()[i];
    const double dy = a.ny()[i] - b.ny()[i];
    s += dx * dx + dy * dy;
  }
  return std::sqrt(s);
}

/// Decision rule: accept iff both axis correlations clear τ.
inline bool accepts(const SimilarityScore& s, double threshold) noexcept { return s.min() >= threshold; }

// ---------------------------------------------------------------------------
// Run configuration

inline constexpr double kFullScale = 65535.0;

struct RunConfig {
  std::uint64_t seed = 0;
  int patch_size = 200;
  double threshold = 0.3;
  int capture_count = 4;
  /// ≈1.5% of the 16-bit full scale.
  double noise_sigma = 983.0;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::invalid_param, "threshold must lie in (0,1)");
    if (capture_count < 3) throw Error(Errc::invalid_param, "capture_count must be at least 3");
    if (patch_size < 16) throw Error(Errc::invalid_param, "patch_size must be at least 16");
    if (!(noise_sigma >= 0.0)) throw Error(Errc::invalid_param, "noise_sigma must be non-negative");
  }
};

// ---------------------------------------------------------------------------
// Seeding

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed from a run seed and any number of labels (strength bits, trial
/// index, ...). Order-sensitive; independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = splitmix64(base);
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t seed_bits(double v) noexcept { return std::bit_cast<std::uint64_t>(v); }

// ---------------------------------------------------------------------------
// Little-endian binary helpers

namespace io {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& os, double v) { put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

inline void put_f32s(std::ostream& os, std::span<const double> v) {
  for (double e : v) put_f32(os, e);
}

inline void put_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

inline void read_exact(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw Error(Errc::format_error, "unexpected end of file");
}

inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  read_exact(is, b, 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  read_exact(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f32(std::istream& is) { return static_cast<double>(std::bit_cast<float>(get_u32(is))); }

inline std::vector<double> get_f32s(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& e : v) e = get_f32(is);
  return v;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::array<char, 8> buf{};
  read_exact(is, buf.data(), magic.size());
  if (std::string_view(buf.data(), magic.size()) != magic)
    throw Error(Errc::format_error, "bad magic, expected " + std::string(magic));
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::storage_failure, "cannot open for writing: " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error(Errc::storage_failure, "cannot open for reading: " + p.string());
  return is;
}

}  // namespace io

// ---------------------------------------------------------------------------
// .nmap: "NMAP", u16 version=1, u32 width, u32 height, f32 nx[w*h], f32 ny[w*h]

inline constexpr std::uint16_t kNmapVersion = 1;

inline void write_nmap(std::ostream& os, const NormMap& m) {
  io::put_magic(os, "NMAP");
  io::put_u16(os, kNmapVersion);
  io::put_u32(os, static_cast<std::uint32_t>(m.width()));
  io::put_u32(os, static_cast<std::uint32_t>(m.height()));
  io::put_f32s(os, m.nx());
  io::put_f32s(os, m.ny());
  if (!os) throw Error(Errc::storage_failure, "write_nmap failed");
}

inline NormMap read_nmap(std::istream& is) {
  io::expect_magic(is, "NMAP");
  if (io::get_u16(is) != kNmapVersion) throw Error(Errc::format_error, "unsupported .nmap version");
  const auto w = io::get_u32(is);
  const auto h = io::get_u32(is);
  if (w == 0 || h == 0 || w > (1u << 15) || h > (1u << 15)) throw Error(Errc::format_error, "implausible .nmap dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto nx = io::get_f32s(is, n);
  auto ny = io::get_f32s(is, n);
  return NormMap(static_cast<int>(w), static_cast<int>(h), std::move(nx), std::move(ny));
}

inline void save_nmap(const std::filesystem::path& p, const NormMap& m) {
  auto os = io::open_out(p);
  write_nmap(os, m);
}

inline NormMap load_nmap(const std::filesystem::path& p) {
  auto is = io::open_in(p);
  return read_nmap(is);
}

}  // namespace normpuf
