#pragma once

// Synthetic paper microstructure: spatially correlated slope fields turned
// into unit normals, plus an albedo texture.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "normpuf/core.hpp"

namespace normpuf {

namespace field {

/// Periodic separable Gaussian blur with standard deviation `sigma` pixels.
inline std::vector<double> gaussian_blur(std::span<const double> in, int w, int h, double sigma) {
  if (sigma <= 0.0) return {in.begin(), in.end()};
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    ksum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= ksum;

  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  std::vector<double> tmp(in.size()), out(in.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * in[r * w + wrap(c + k, w)];
      tmp[r * w + c] = s;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * tmp[wrap(r + k, h) * w + c];
      out[r * w + c] = s;
    }
  return out;
}

inline void standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double e : v) mean += e;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double e : v) var += (e - mean) * (e - mean);
  var /= static_cast<double>(v.size());
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (auto& e : v) e = (e - mean) * inv;
}

/// Zero-mean, unit-variance periodic random field whose autocorrelation is
/// exp(-lag²/(2·length²)): white noise blurred with σ = length/√2.
inline std::vector<double> correlated(Rng& rng, int w, int h, double length) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> white(static_cast<std::size_t>(w) * h);
  for (auto& e : white) e = normal(rng);
  auto f = gaussian_blur(white, w, h, length / std::numbers::sqrt2);
  standardize(f);
  return f;
}

/// Periodic bilinear sample of a w×h field at fractional coordinates.
inline double sample_bilinear(std::span<const double> f, int w, int h, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double tx = x - fx, ty = y - fy;
  auto wrap = [](long i, long n) { return static_cast<std::size_t>(((i % n) + n) % n); };
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  auto at = [&](long c, long r) { return f[wrap(r, h) * static_cast<std::size_t>(w) + wrap(c, w)]; };
  return (1 - tx) * (1 - ty) * at(x0, y0) + tx * (1 - ty) * at(x0 + 1, y0) + (1 - tx) * ty * at(x0, y0 + 1) +
         tx * ty * at(x0 + 1, y0 + 1);
}

}  // namespace field

// ---------------------------------------------------------------------------

struct SurfaceParams {
  int size = 200;
  /// Autocorrelation length of the slope field, pixels.
  double correlation_length = 1.0;
  /// Standard deviation of each slope component.
  double roughness = 0.08;
  double albedo_mean = 0.75;
  /// Relative standard deviation of the albedo texture.
  double albedo_contrast = 0.15;
  double albedo_length = 1.5;

  void validate() const {
    if (size < 16) throw Error(Errc::invalid_param, "patch size must be at least 16");
    if (!(correlation_length >= 1.0)) throw Error(Errc::invalid_param, "correlation_length must be >= 1 pixel");
    if (!(roughness > 0.0 && roughness <= 0.5)) throw Error(Errc::invalid_param, "roughness must lie in (0, 0.5]");
    if (!(albedo_mean > 0.0 && albedo_mean <= 1.0)) throw Error(Errc::invalid_param, "albedo_mean must lie in (0,1]");
    if (!(albedo_contrast >= 0.0)) throw Error(Errc::invalid_param, "albedo_contrast must be non-negative");
  }
};

class SurfacePatch {
 public:
  static constexpr double kMinAlbedo = 0.01;

  SurfacePatch() = default;

  SurfacePatch(int width, int height, std::vector<Vec3> normals, std::vector<double> albedo,
               double correlation_length = 0.0, double roughness = 0.0)
      : width_(width),
        height_(height),
        normals_(std::move(normals)),
        albedo_(std::move(albedo)),
        correlation_length_(correlation_length),
        roughness_(roughness) {
    const auto n = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    if (width_ <= 0 || height_ <= 0 || normals_.size() != n || albedo_.size() != n)
      throw Error(Errc::dimension_mismatch, "surface patch fields do not match dimensions");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(normals_[i].z > 0.0) || std::abs(normals_[i].norm() - 1.0) > 1e-9)
        throw Error(Errc::invalid_param, "surface normal not unit length with positive z");
      if (!(albedo_[i] > 0.0)) throw Error(Errc::invalid_param, "albedo must be strictly positive");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return normals_.size(); }
  std::span<const Vec3> normals() const noexcept { return normals_; }
  std::span<const double> albedo() const noexcept { return albedo_; }
  double correlation_length() const noexcept { return correlation_length_; }
  double roughness() const noexcept { return roughness_; }

  const Vec3& normal(int col, int row) const { return normals_[static_cast<std::size_t>(row) * width_ + col]; }

  friend bool operator==(const SurfacePatch&, const SurfacePatch&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Vec3> normals_;
  std::vector<double> albedo_;
  double correlation_length_ = 0.0;
  double roughness_ = 0.0;
};

inline Vec3 normal_from_slopes(double sx, double sy) noexcept { return Vec3{-sx, -sy, 1.0}.normalized(); }

namespace detail {

inline std::vector<double> make_albedo(Rng& rng, int w, int h, const SurfaceParams& p) {
  auto tex = field::correlated(rng, w, h, p.albedo_length);
  for (auto& a : tex)
    a = std::clamp(p.albedo_mean * (1.0 + p.albedo_contrast * a), SurfacePatch::kMinAlbedo, 1.0);
  return tex;
}

inline SurfacePatch assemble(int w, int h, std::vector<double> sx, std::vector<double> sy, std::vector<double> albedo,
                             const SurfaceParams& p) {
  std::vector<Vec3> normals(sx.size());
  for (std::size_t i = 0; i < sx.size(); ++i) normals[i] = normal_from_slopes(sx[i], sy[i]);
  return SurfacePatch(w, h, std::move(normals), std::move(albedo), p.correlation_length, p.roughness);
}

}  // namespace detail

/// Independent microstructure patch. Same seed, same parameters → bit-identical.
inline SurfacePatch generate_patch(std::uint64_t seed, const SurfaceParams& params = {}) {
  params.validate();
  const int n = params.size;
  Rng rng(derive_seed(seed, {0x5355524641434555ULL}));
  auto sx = field::correlated(rng, n, n, params.correlation_length);
  auto sy = field::correlated(rng, n, n, params.correlation_length);
  for (auto& v : sx) v *= params.roughness;
  for (auto& v : sy) v *= params.roughness;
  auto albedo = detail::make_albedo(rng, n, n, params);
  return detail::assemble(n, n, std::move(sx), std::move(sy), std::move(albedo), params);
}

/// Patch whose every normal equals `normal` (z > 0), constant albedo.
inline SurfacePatch uniform_patch(int size, Vec3 normal, double albedo = 0.75) {
  const auto n = static_cast<std::size_t>(size) * size;
  return SurfacePatch(size, size, std::vector<Vec3>(n, normal.normalized()), std::vector<double>(n, albedo));
}

// ---------------------------------------------------------------------------
// Paper stock

/// Sheets cut from one paper grade share forming-fabric and felt imprints on
/// top of their individual fibre network. A stock holds `pattern_count` fixed
/// texture patterns; each sheet mixes them with its own random unit-norm
/// coefficient vector and adds independent microstructure. `shared_fraction`
/// is the share of slope variance carried by the common texture.
struct StockParams {
  std::uint64_t seed = 7;
  int pattern_count = 6;
  double shared_fraction = 0.35;
  double pattern_length = 1.5;

  void validate() const {
    if (pattern_count < 0) throw Error(Errc::invalid_param, "pattern_count must be non-negative");
    if (!(shared_fraction >= 0.0 && shared_fraction < 1.0))
      throw Error(Errc::invalid_param, "shared_fraction must lie in [0,1)");
    if (!(pattern_length >= 1.0)) throw Error(Errc::invalid_param, "pattern_length must be >= 1 pixel");
  }
};

class PaperStock {
 public:
  PaperStock(const StockParams& stock, const SurfaceParams& surface = {}) : stock_(stock), surface_(surface) {
    stock_.validate();
    surface_.validate();
    const int n = surface_.size;
    Rng rng(derive_seed(stock_.seed, {0x53544f434bULL}));
    for (int j = 0; j < stock_.pattern_count; ++j) {
      patterns_x_.push_back(field::correlated(rng, n, n, stock_.pattern_length));
      patterns_y_.push_back(field::correlated(rng, n, n, stock_.pattern_length));
    }
  }

  const StockParams& stock() const noexcept { return stock_; }
  const SurfaceParams& surface() const noexcept { return surface_; }

  SurfacePatch sheet(std::uint64_t sheet_seed) const {
    const int n = surface_.size;
    Rng rng(derive_seed(sheet_seed, {0x5348454554ULL, stock_.seed}));
    auto sx = field::correlated(rng, n, n, surface_.correlation_length);
    auto sy = field::correlated(rng, n, n, surface_.correlation_length);
    if (stock_.pattern_count > 0 && stock_.shared_fraction > 0.0) {
      const double own = std::sqrt(1.0 - stock_.shared_fraction);
      const double common = std::sqrt(stock_.shared_fraction);
      auto mix = [&](std::vector<double>& s, const std::vector<std::vector<double>>& pats) {
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> coef(pats.size());
        double norm = 0.0;
        for (auto& c : coef) {
          c = normal(rng);
          norm += c * c;
        }
        norm = std::sqrt(norm);
        std::vector<double> shared(s.size(), 0.0);
        for (std::size_t j = 0; j < pats.size(); ++j)
          for (std::size_t i = 0; i < s.size(); ++i) shared[i] += coef[j] / norm * pats[j][i];
        field::standardize(shared);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = own * s[i] + common * shared[i];
      };
      mix(sx, patterns_x_);
      mix(sy, patterns_y_);
    }
    for (auto& v : sx) v *= surface_.roughness;
    for (auto& v : sy) v *= surface_.roughness;
    auto albedo = detail::make_albedo(rng, n, n, surface_);
    return detail::assemble(n, n, std::move(sx), std::move(sy), std::move(albedo), surface_);
  }

 private:
  StockParams stock_;
  SurfaceParams surface_;
  std::vector<std::vector<double>> patterns_x_;
  std::vector<std::vector<double>> patterns_y_;
};

// ---------------------------------------------------------------------------

inline NormMap true_norm_map(const SurfacePatch& patch) {
  std::vector<double> nx(patch.size()), ny(patch.size());
  for (std::size_t i = 0; i < patch.size(); ++i) {
    nx[i] = patch.normals()[i].x;
    ny[i] = patch.normals()[i].y;
  }
  return NormMap(patch.width(), patch.height(), std::move(nx), std::move(ny));
}

// .patch: "PTCH", u16 version=1, u32 width, u32 height, f32 correlation_length,
// f32 roughness, f32 nx/ny/nz planes, f32 albedo plane.

inline constexpr std::uint16_t kPatchVersion = 1;

inline void write_patch(std::ostream& os, const SurfacePatch& p) {
  io::put_magic(os, "PTCH");
  io::put_u16(os, kPatchVersion);
  io::put_u32(os, static_cast<std::uint32_t>(p.width()));
  io::put_u32(os, static_cast<std::uint32_t>(p.height()));
  io::put_f32(os, p.correlation_length());
  io::put_f32(os, p.roughness());
  for (const auto& n : p.normals()) io::put_f32(os, n.x);
  for (const auto& n : p.normals()) io::put_f32(os, n.y);
  for (const auto& n : p.normals()) io::put_f32(os, n.z);
  io::put_f32s(os, p.albedo());
  if (!os) throw Error(Errc::storage_failure, "write_patch failed");
}

/// Normals are renormalized in double precision after the float32 load.
inline SurfacePatch read_patch(std::istream& is) {
  io::expect_magic(is, "PTCH");
  if (io::get_u16(is) != kPatchVersion) throw Error(Errc::format_error, "unsupported .patch version");
  const auto w = io::get_u32(is);
  const auto h = io::get_u32(is);
  if (w == 0 || h == 0 || w > (1u << 15) || h > (1u << 15)) throw Error(Errc::format_error, "implausible .patch dimensions");
  const double corr = io::get_f32(is);
  const double rough = io::get_f32(is);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto x = io::get_f32s(is, n);
  auto y = io::get_f32s(is, n);
  auto z = io::get_f32s(is, n);
  auto albedo = io::get_f32s(is, n);
  std::vector<Vec3> normals(n);
  for (std::size_t i = 0; i < n; ++i) normals[i] = Vec3{x[i], y[i], z[i]}.normalized();
  return SurfacePatch(static_cast<int>(w), static_cast<int>(h), std::move(normals), std::move(albedo), corr, rough);
}

inline void save_patch(const std::filesystem::path& path, const SurfacePatch& p) {
  auto os = io::open_out(path);
  write_patch(os, p);
}

inline SurfacePatch load_patch(const std::filesystem::path& path) {
  auto is = io::open_in(path);
  return read_patch(is);
}

}  // namespace normpuf
