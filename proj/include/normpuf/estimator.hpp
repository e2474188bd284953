#pragma once

// Per-pixel least-squares photometric normal recovery under the diffuse model.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "normpuf/core.hpp"
#include "normpuf/optics.hpp"

namespace normpuf {

struct Estimate {
  NormMap map;
  /// 1 where fewer than three usable equations remained and the pixel fell
  /// back to (0, 0).
  std::vector<std::uint8_t> flagged;
  std::size_t flagged_count = 0;
  /// RMS residual of the per-pixel fits over solved pixels, gray levels.
  double residual_rms = 0.0;
};

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline double det3(const Mat3& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

inline Mat3 inverse3(const Mat3& a, double det) {
  Mat3 inv{};
  inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return inv;
}

/// Gram matrix LᵀL restricted to the rows selected by `use`.
inline Mat3 gram(const std::vector<Vec3>& lights, const std::vector<bool>& use) {
  Mat3 g{};
  for (std::size_t k = 0; k < lights.size(); ++k) {
    if (!use[k]) continue;
    const std::array<double, 3> l{lights[k].x, lights[k].y, lights[k].z};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g[i][j] += l[i] * l[j];
  }
  return g;
}

/// det(LᵀL) relative to its scale; near zero means the rows do not span 3D.
inline bool well_conditioned(const Mat3& g, double det) {
  const double tr = g[0][0] + g[1][1] + g[2][2];
  return tr > 0.0 && std::abs(det) > 1e-10 * tr * tr * tr;
}

}  // namespace detail

/// Recovers the projected normal field from an aligned capture. Solves
/// min_b Σ_k (I_k − l_k·b)² per pixel with a 3×3 normal-equation inverse
/// factored once for the full light set; pixels with clipped samples are
/// re-solved from the remaining equations.
inline Estimate estimate_norm_map(const CaptureSet& capture) {
  if (!capture.aligned) throw Error(Errc::not_aligned, "capture carries unresolved misalignment; run align first");
  const auto& L = capture.lights.directions;
  const std::size_t k = L.size();
  if (k < 3 || capture.images.size() != k) throw Error(Errc::rank_deficient_lights, "need at least 3 lit images");
  const int w = capture.width(), h = capture.height();
  for (const auto& img : capture.images)
    if (img.width != w || img.height != h) throw Error(Errc::dimension_mismatch, "capture images differ in size");

  const std::vector<bool> all(k, true);
  const auto g = detail::gram(L, all);
  const double det = detail::det3(g);
  if (!detail::well_conditioned(g, det)) throw Error(Errc::rank_deficient_lights, "light directions do not span 3D");
  const auto ginv = detail::inverse3(g, det);

  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> nx(n, 0.0), ny(n, 0.0);
  Estimate est;
  est.flagged.assign(n, 0);
  double resid = 0.0;
  std::size_t resid_count = 0;

  std::vector<bool> use(k);
  for (std::size_t p = 0; p < n; ++p) {
    bool clipped = false;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = capture.images[j].pixels[p];
      use[j] = v > 0.0 && v < kFullScale;
      clipped |= !use[j];
    }

    std::array<double, 3> rhs{};
    std::size_t used = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!use[j]) continue;
      const double v = capture.images[j].pixels[p];
      rhs[0] += L[j].x * v;
      rhs[1] += L[j].y * v;
      rhs[2] += L[j].z * v;
      ++used;
    }

    detail::Mat3 inv = ginv;
    bool solvable = true;
    if (clipped) {
      if (used < 3) {
        solvable = false;
      } else {
        const auto gs = detail::gram(L, use);
        const double ds = detail::det3(gs);
        solvable = detail::well_conditioned(gs, ds);
        if (solvable) inv = detail::inverse3(gs, ds);
      }
    }

    std::array<double, 3> b{};
    if (solvable) {
      for (int i = 0; i < 3; ++i) b[i] = inv[i][0] * rhs[0] + inv[i][1] * rhs[1] + inv[i][2] * rhs[2];
    }
    const double bn = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    if (!solvable || !(bn > 0.0)) {
      est.flagged[p] = 1;
      ++est.flagged_count;
      continue;
    }
    nx[p] = b[0] / bn;
    ny[p] = b[1] / bn;
    for (std::size_t j = 0; j < k; ++j) {
      if (!use[j]) continue;
      const double r = capture.images[j].pixels[p] - (L[j].x * b[0] + L[j].y * b[1] + L[j].z * b[2]);
      resid += r * r;
      ++resid_count;
    }
  }
  est.residual_rms = resid_count ? std::sqrt(resid / static_cast<double>(resid_count)) : 0.0;
  est.map = NormMap(w, h, std::move(nx), std::move(ny));
  return est;
}

/// Client-side feature extraction: align, then estimate.
inline NormMap extract_feature(const CaptureSet& raw) { return estimate_norm_map(align(raw)).map; }

}  // namespace normpuf
