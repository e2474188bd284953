#pragma once

// Linear latent codec for norm maps: PCA fitted on an adversary-held
// population, with forward (encode) and inverse (decode) maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "normpuf/core.hpp"

namespace normpuf {

/// Which part of a norm map a codec models.
enum class CodecLayout : std::uint32_t { x = 0, y = 1, joint = 2 };

inline constexpr std::string_view to_string(CodecLayout l) noexcept {
  switch (l) {
    case CodecLayout::x: return "x";
    case CodecLayout::y: return "y";
    case CodecLayout::joint: return "joint";
  }
  return "?";
}

inline constexpr CodecLayout layout_for(Axis a) noexcept { return a == Axis::x ? CodecLayout::x : CodecLayout::y; }

/// Largest per-component magnitude a component codec may decode to; keeps
/// nx² + ny² ≤ 1 whatever the other component holds.
inline constexpr double kComponentLimit = std::numbers::sqrt2 / 2.0;

class LatentCodec {
 public:
  LatentCodec() = default;

  LatentCodec(int width, int height, CodecLayout layout, Eigen::VectorXd mean, Eigen::MatrixXd basis,
              Eigen::VectorXd explained_variance, double total_variance)
      : width_(width),
        height_(height),
        layout_(layout),
        mean_(std::move(mean)),
        basis_(std::move(basis)),
        variance_(std::move(explained_variance)),
        total_variance_(total_variance) {
    const auto n = static_cast<Eigen::Index>(width_) * height_;
    const Eigen::Index d = layout_ == CodecLayout::joint ? 2 * n : n;
    if (mean_.size() != d || basis_.cols() != d || variance_.size() != basis_.rows())
      throw Error(Errc::dimension_mismatch, "codec arrays do not match the declared layout");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  CodecLayout layout() const noexcept { return layout_; }
  std::size_t d() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  std::size_t m() const noexcept { return static_cast<std::size_t>(basis_.rows()); }

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  /// m×d, orthonormal rows.
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  /// Holdout variance along each retained axis, non-increasing.
  const Eigen::VectorXd& explained_variance() const noexcept { return variance_; }
  /// Total holdout variance (all axes, retained or not).
  double total_variance() const noexcept { return total_variance_; }

  /// Share of total variance captured by the first `k` axes.
  double explained_fraction(std::size_t k) const {
    k = std::min(k, m());
    return total_variance_ > 0.0 ? variance_.head(static_cast<Eigen::Index>(k)).sum() / total_variance_ : 0.0;
  }

  /// Feature vector of `map` in this codec's layout.
  Eigen::VectorXd features(const NormMap& map) const {
    check_shape(map);
    const auto n = static_cast<Eigen::Index>(map.size());
    Eigen::VectorXd v(static_cast<Eigen::Index>(d()));
    auto copy = [&](std::span<const double> src, Eigen::Index off) {
      for (Eigen::Index i = 0; i < n; ++i) v[off + i] = src[static_cast<std::size_t>(i)];
    };
    switch (layout_) {
      case CodecLayout::x: copy(map.nx(), 0); break;
      case CodecLayout::y: copy(map.ny(), 0); break;
      case CodecLayout::joint:
        copy(map.nx(), 0);
        copy(map.ny(), n);
        break;
    }
    return v;
  }

  /// z = B(x − μ).
  Eigen::VectorXd encode(const NormMap& map) const { return basis_ * (features(map) - mean_); }

  /// μ + Bᵀz without any clamping.
  Eigen::VectorXd decode_raw(const Eigen::VectorXd& z) const {
    if (z.size() != basis_.rows()) throw Error(Errc::dimension_mismatch, "latent vector has wrong length");
    return mean_ + basis_.transpose() * z;
  }

  /// Decoded map. A component codec writes its component into a copy of
  /// `base` (zeros when empty), clamped to ±1/√2; a joint codec projects
  /// each pixel radially back onto the unit disk when needed.
  NormMap decode(const Eigen::VectorXd& z, const NormMap& base = {}) const {
    const auto x = decode_raw(z);
    const auto n = static_cast<std::size_t>(width_) * height_;
    if (layout_ == CodecLayout::joint) {
      std::vector<double> nx(n), ny(n);
      for (std::size_t i = 0; i < n; ++i) {
        double a = x[static_cast<Eigen::Index>(i)], b = x[static_cast<Eigen::Index>(n + i)];
        const double r = std::hypot(a, b);
        if (r > 1.0) {
          a /= r;
          b /= r;
        }
        nx[i] = a;
        ny[i] = b;
      }
      return NormMap(width_, height_, std::move(nx), std::move(ny));
    }
    std::vector<double> comp(n);
    for (std::size_t i = 0; i < n; ++i)
      comp[i] = std::clamp(x[static_cast<Eigen::Index>(i)], -kComponentLimit, kComponentLimit);
    std::vector<double> other(n, 0.0);
    if (!base.empty()) {
      check_shape(base);
      const auto src = layout_ == CodecLayout::x ? base.ny() : base.nx();
      for (std::size_t i = 0; i < n; ++i) other[i] = std::clamp(src[i], -kComponentLimit, kComponentLimit);
    }
    return layout_ == CodecLayout::x ? NormMap(width_, height_, std::move(comp), std::move(other))
                                     : NormMap(width_, height_, std::move(other), std::move(comp));
  }

  /// Projection of `map` onto the codec's affine span.
  NormMap reconstruct(const NormMap& map) const { return decode(encode(map), map); }

 private:
  void check_shape(const NormMap& map) const {
    if (map.width() != width_ || map.height() != height_)
      throw Error(Errc::dimension_mismatch, "norm map shape differs from codec");
  }

  int width_ = 0;
  int height_ = 0;
  CodecLayout layout_ = CodecLayout::x;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd variance_;
  double total_variance_ = 0.0;
};

namespace detail {

/// Modified Gram–Schmidt over the rows, in place.
inline void orthonormalize_rows(Eigen::MatrixXd& b) {
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) b.row(i) -= b.row(i).dot(b.row(j)) * b.row(j);
    const double nrm = b.row(i).norm();
    if (!(nrm > 0.0)) throw Error(Errc::format_error, "codec basis rows are linearly dependent");
    b.row(i) /= nrm;
  }
}

/// Flip each row so its largest-magnitude entry is positive.
inline void fix_signs(Eigen::MatrixXd& b) {
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    Eigen::Index arg = 0;
    b.row(i).cwiseAbs().maxCoeff(&arg);
    if (b(i, arg) < 0.0) b.row(i) *= -1.0;
  }
}

}  // namespace detail

/// Principal axes of the centred samples (columns of `x`, d×N) through the
/// N×N Gram matrix. Keeps the smallest m whose cumulative variance reaches
/// `variance_target`.
inline LatentCodec fit_matrix(const Eigen::MatrixXd& x, int width, int height, CodecLayout layout,
                              double variance_target) {
  if (!(variance_target > 0.0 && variance_target <= 1.0))
    throw Error(Errc::invalid_param, "variance_target must lie in (0,1]");
  const Eigen::Index n = x.cols();
  if (n < 2) throw Error(Errc::insufficient_data, "PCA needs at least two samples");
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::MatrixXd xc = x.colwise() - mean;
  const Eigen::MatrixXd gram = xc.transpose() * xc;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw Error(Errc::insufficient_data, "Gram eigendecomposition failed");
  // Eigen returns ascending order.
  const Eigen::VectorXd lam = eig.eigenvalues().reverse();
  const Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();
  const double total = std::max(0.0, gram.trace());
  if (!(total > 0.0)) throw Error(Errc::insufficient_data, "holdout samples are all identical");

  // Centring removes one degree of freedom; eigenvalues at round-off level
  // carry no direction.
  const double floor = 1e-12 * lam[0];
  Eigen::Index rank = 0;
  while (rank < std::min<Eigen::Index>(n - 1, x.rows()) && lam[rank] > floor) ++rank;

  Eigen::Index m = 0;
  double acc = 0.0;
  const double goal = variance_target * total * (1.0 - 1e-12);
  while (m < rank && acc < goal) acc += lam[m++];

  Eigen::MatrixXd basis(m, x.rows());
  for (Eigen::Index i = 0; i < m; ++i) basis.row(i) = (xc * u.col(i)).transpose() / std::sqrt(lam[i]);
  detail::orthonormalize_rows(basis);
  detail::fix_signs(basis);

  const double denom = static_cast<double>(n - 1);
  return LatentCodec(width, height, layout, mean, std::move(basis), lam.head(m) / denom, total / denom);
}

inline LatentCodec fit(std::span<const NormMap> holdout, double variance_target, CodecLayout layout) {
  if (holdout.size() < 2) throw Error(Errc::insufficient_data, "PCA needs at least two holdout maps");
  const int w = holdout[0].width(), h = holdout[0].height();
  for (const auto& m : holdout)
    if (m.width() != w || m.height() != h) throw Error(Errc::dimension_mismatch, "holdout maps differ in shape");
  const Eigen::Index n = static_cast<Eigen::Index>(w) * h;
  const Eigen::Index d = layout == CodecLayout::joint ? 2 * n : n;
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(holdout.size()));
  for (std::size_t j = 0; j < holdout.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const auto& mp = holdout[j];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      switch (layout) {
        case CodecLayout::x: x(i, col) = mp.nx()[k]; break;
        case CodecLayout::y: x(i, col) = mp.ny()[k]; break;
        case CodecLayout::joint:
          x(i, col) = mp.nx()[k];
          x(n + i, col) = mp.ny()[k];
          break;
      }
    }
  }
  return fit_matrix(x, w, h, layout, variance_target);
}

/// One codec per component: the default mode for per-component attacks.
struct ComponentCodecs {
  LatentCodec x;
  LatentCodec y;

  const LatentCodec& operator[](Axis a) const noexcept { return a == Axis::x ? x : y; }
};

inline ComponentCodecs fit_components(std::span<const NormMap> holdout, double variance_target) {
  return {fit(holdout, variance_target, CodecLayout::x), fit(holdout, variance_target, CodecLayout::y)};
}

// ---------------------------------------------------------------------------
// .lpc: "LPC1", u32 d, u32 m, u32 width, u32 height, u32 layout,
// f32 mean[d], f32 basis[m][d], f32 variance[m], f32 total_variance

inline void write_lpc(std::ostream& os, const LatentCodec& c) {
  io::put_magic(os, "LPC1");
  io::put_u32(os, static_cast<std::uint32_t>(c.d()));
  io::put_u32(os, static_cast<std::uint32_t>(c.m()));
  io::put_u32(os, static_cast<std::uint32_t>(c.width()));
  io::put_u32(os, static_cast<std::uint32_t>(c.height()));
  io::put_u32(os, static_cast<std::uint32_t>(c.layout()));
  for (Eigen::Index i = 0; i < c.mean().size(); ++i) io::put_f32(os, c.mean()[i]);
  for (Eigen::Index r = 0; r < c.basis().rows(); ++r)
    for (Eigen::Index k = 0; k < c.basis().cols(); ++k) io::put_f32(os, c.basis()(r, k));
  for (Eigen::Index i = 0; i < c.explained_variance().size(); ++i) io::put_f32(os, c.explained_variance()[i]);
  io::put_f32(os, c.total_variance());
  if (!os) throw Error(Errc::storage_failure, "write_lpc failed");
}

/// Basis rows come back from float32 orthonormal only to ~1e-7, so they are
/// re-orthonormalized in double precision.
inline LatentCodec read_lpc(std::istream& is) {
  io::expect_magic(is, "LPC1");
  const auto d = io::get_u32(is);
  const auto m = io::get_u32(is);
  const auto w = io::get_u32(is);
  const auto h = io::get_u32(is);
  const auto layout = io::get_u32(is);
  if (layout > 2) throw Error(Errc::format_error, "unknown codec layout");
  if (w == 0 || h == 0 || w > (1u << 15) || h > (1u << 15) || m > d)
    throw Error(Errc::format_error, "implausible codec header");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (d != (layout == 2 ? 2 * n : n)) throw Error(Errc::format_error, "codec dimension does not match layout");
  Eigen::VectorXd mean(d);
  for (std::uint32_t i = 0; i < d; ++i) mean[i] = io::get_f32(is);
  Eigen::MatrixXd basis(m, d);
  for (std::uint32_t r = 0; r < m; ++r)
    for (std::uint32_t k = 0; k < d; ++k) basis(r, k) = io::get_f32(is);
  Eigen::VectorXd var(m);
  for (std::uint32_t i = 0; i < m; ++i) var[i] = io::get_f32(is);
  const double total = io::get_f32(is);
  detail::orthonormalize_rows(basis);
  return LatentCodec(static_cast<int>(w), static_cast<int>(h), static_cast<CodecLayout>(layout), std::move(mean),
                     std::move(basis), std::move(var), total);
}

inline void save_lpc(const std::filesystem::path& p, const LatentCodec& c) {
  auto os = io::open_out(p);
  write_lpc(os, c);
}

inline LatentCodec load_lpc(const std::filesystem::path& p) {
  auto is = io::open_in(p);
  return read_lpc(is);
}

}  // namespace normpuf
