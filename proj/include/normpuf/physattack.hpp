#pragma once

// Physical denial-of-service attacks applied to the ground-truth surface
// before an honest re-capture: scratching, sticker patching, pen scribbling,
// and crumpling (random or folded, then ironed).

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "normpuf/core.hpp"
#include "normpuf/pipeline.hpp"
#include "normpuf/surfacegen.hpp"

namespace normpuf {

enum class AttackKind { scratch, patch, scribble, crumple_random, crumple_fold };

inline constexpr std::string_view to_string(AttackKind k) noexcept {
  switch (k) {
    case AttackKind::scratch: return "scratch";
    case AttackKind::patch: return "patch";
    case AttackKind::scribble: return "scribble";
    case AttackKind::crumple_random: return "crumple_random";
    case AttackKind::crumple_fold: return "crumple_fold";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  for (auto k : {AttackKind::scratch, AttackKind::patch, AttackKind::scribble, AttackKind::crumple_random,
                 AttackKind::crumple_fold})
    if (to_string(k) == s) return k;
  throw Error(Errc::invalid_param, "unknown attack kind: " + std::string(s));
}

inline constexpr bool is_area_attack(AttackKind k) noexcept {
  return k == AttackKind::scratch || k == AttackKind::patch || k == AttackKind::scribble;
}

inline constexpr std::array<double, 5> kAttackStrengths{0.05, 0.10, 0.25, 0.50, 0.75};

struct AttackSpec {
  AttackKind kind = AttackKind::scratch;
  /// Fraction of the surface to damage; ignored by the crumple attacks.
  double strength = 0.25;
  std::uint64_t seed = 0;
};

/// Geometry and material knobs. Groove slope, sticker texture and ink albedo
/// set how much spurious variance a damaged pixel adds to the estimated map,
/// and so how fast the matched score falls with coverage. The remaining
/// values are plain guesses.
struct PhysAttackParams {
  // strokes (scratch and scribble share the random-walk generator)
  int stroke_steps = 60;
  double max_turn_deg = 20.0;

  int scratch_width_min = 2;
  int scratch_width_max = 4;
  double scratch_roughness_factor = 2.0;
  double scratch_albedo_factor = 0.9;
  /// Slope of the groove walls cut by the key, across the stroke.
  double scratch_groove_slope = 0.3;

  int sticker_side_min = 12;
  int sticker_side_max = 60;
  double sticker_albedo = 0.9;
  /// Slope std of the sticker face. Sticker paper carries its own fine
  /// texture, independent of the sheet beneath.
  double sticker_jitter = 0.25;

  int pen_width_min = 2;
  int pen_width_max = 3;
  /// Ink optical density, expressed as the residual albedo under ink.
  double ink_albedo = 0.02;
  int ink_smoothing_radius = 1;

  /// RMS displacement of the crumple warp before ironing, pixels.
  double warp_amplitude = 10.0;
  double warp_length = 30.0;
  double crease_slope = 0.15;
  double crease_length = 12.0;
  /// Share of the warp amplitude removed by ironing.
  double ironing = 0.7;
  /// Half-width of each fold crease band, pixels.
  double fold_band = 5.0;
  double fold_slope = 0.4;
};

struct AttackResult {
  SurfacePatch patch;
  AttackSpec spec;
  /// Fraction of pixels whose surface was modified.
  double achieved_coverage = 0.0;
  std::vector<std::uint8_t> mask;
};

namespace detail {

struct Canvas {
  int w;
  int h;
  std::vector<std::uint8_t>& mask;
  std::vector<std::size_t>& order;
  std::size_t quota;

  bool full() const { return order.size() >= quota; }

  void paint(int col, int row) {
    if (full()) return;
    const auto i = static_cast<std::size_t>(((row % h) + h) % h) * w + static_cast<std::size_t>(((col % w) + w) % w);
    if (mask[i]) return;
    mask[i] = 1;
    order.push_back(i);
  }
};

/// Random-walk strokes with unit step and bounded turning, painted with a
/// square brush, until exactly `quota` pixels are covered.
inline void paint_strokes(Canvas& cv, Rng& rng, int width_min, int width_max, const PhysAttackParams& p,
                          std::vector<double>* heading_out = nullptr) {
  std::uniform_real_distribution<double> ux(0.0, cv.w), uy(0.0, cv.h), uth(0.0, 2.0 * std::numbers::pi);
  const double turn = p.max_turn_deg * std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> dturn(-turn, turn);
  std::uniform_int_distribution<int> uwidth(width_min, width_max);
  while (!cv.full()) {
    double x = ux(rng), y = uy(rng), th = uth(rng);
    const int bw = uwidth(rng);
    const int lo = -(bw - 1) / 2, hi = bw / 2;
    for (int s = 0; s < p.stroke_steps && !cv.full(); ++s) {
      th += dturn(rng);
      x += std::cos(th);
      y += std::sin(th);
      const int cx = static_cast<int>(std::lround(x)), cy = static_cast<int>(std::lround(y));
      for (int dy = lo; dy <= hi; ++dy)
        for (int dx = lo; dx <= hi; ++dx) {
          const std::size_t before = cv.order.size();
          cv.paint(cx + dx, cy + dy);
          if (heading_out && cv.order.size() > before) {
            // signed offset across the stroke, used for groove profiles
            const double across = -std::sin(th) * dx + std::cos(th) * dy;
            (*heading_out)[cv.order.back()] = across >= 0 ? th + std::numbers::pi / 2 : th - std::numbers::pi / 2;
          }
        }
    }
  }
}

inline void paint_rectangles(Canvas& cv, Rng& rng, const PhysAttackParams& p) {
  std::uniform_int_distribution<int> side(p.sticker_side_min, p.sticker_side_max);
  std::uniform_int_distribution<int> ux(0, cv.w - 1), uy(0, cv.h - 1);
  while (!cv.full()) {
    const int rw = side(rng), rh = side(rng);
    const int x0 = ux(rng), y0 = uy(rng);
    for (int r = 0; r < rh && !cv.full(); ++r)
      for (int c = 0; c < rw && !cv.full(); ++c) cv.paint(x0 + c, y0 + r);
  }
}

inline std::vector<double> slopes_x(const SurfacePatch& s) {
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = -s.normals()[i].x / s.normals()[i].z;
  return v;
}

inline std::vector<double> slopes_y(const SurfacePatch& s) {
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = -s.normals()[i].y / s.normals()[i].z;
  return v;
}

inline double base_roughness(const SurfacePatch& s) { return s.roughness() > 0.0 ? s.roughness() : 0.08; }

/// Smooth displacement warp of slopes and albedo; returns the warped fields.
inline void warp(const SurfacePatch& src, Rng& rng, double amplitude, double length, std::vector<double>& sx,
                 std::vector<double>& sy, std::vector<double>& albedo) {
  const int w = src.width(), h = src.height();
  const auto u = field::correlated(rng, w, h, length);
  const auto v = field::correlated(rng, w, h, length);
  const auto ox = slopes_x(src), oy = slopes_y(src);
  const auto oa = std::vector<double>(src.albedo().begin(), src.albedo().end());
  sx.resize(src.size());
  sy.resize(src.size());
  albedo.resize(src.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double x = c + amplitude * u[i], y = r + amplitude * v[i];
      sx[i] = field::sample_bilinear(ox, w, h, x, y);
      sy[i] = field::sample_bilinear(oy, w, h, x, y);
      albedo[i] = field::sample_bilinear(oa, w, h, x, y);
    }
}

}  // namespace detail

inline AttackResult apply_attack(const SurfacePatch& patch, const AttackSpec& spec, const PhysAttackParams& p = {}) {
  if (is_area_attack(spec.kind) && !(spec.strength > 0.0 && spec.strength < 1.0))
    throw Error(Errc::invalid_strength, "area attack strength must lie in (0,1)");

  const int w = patch.width(), h = patch.height();
  const std::size_t n = patch.size();
  Rng rng(derive_seed(spec.seed, {0x50485953ULL, static_cast<std::uint64_t>(spec.kind)}));

  std::vector<Vec3> normals(patch.normals().begin(), patch.normals().end());
  std::vector<double> albedo(patch.albedo().begin(), patch.albedo().end());
  std::vector<std::uint8_t> mask(n, 0);
  std::vector<std::size_t> order;
  const double rough = detail::base_roughness(patch);

  if (is_area_attack(spec.kind)) {
    detail::Canvas cv{w, h, mask, order, static_cast<std::size_t>(std::llround(spec.strength * static_cast<double>(n)))};
    std::normal_distribution<double> normal(0.0, 1.0);
    switch (spec.kind) {
      case AttackKind::scratch: {
        std::vector<double> groove_dir(n, 0.0);
        detail::paint_strokes(cv, rng, p.scratch_width_min, p.scratch_width_max, p, &groove_dir);
        const double s = p.scratch_roughness_factor * rough;
        for (auto i : order) {
          double sx = s * normal(rng), sy = s * normal(rng);
          sx += p.scratch_groove_slope * std::cos(groove_dir[i]);
          sy += p.scratch_groove_slope * std::sin(groove_dir[i]);
          normals[i] = normal_from_slopes(sx, sy);
          albedo[i] = std::max(SurfacePatch::kMinAlbedo, albedo[i] * p.scratch_albedo_factor);
        }
        break;
      }
      case AttackKind::patch: {
        detail::paint_rectangles(cv, rng, p);
        for (auto i : order) {
          normals[i] = normal_from_slopes(p.sticker_jitter * normal(rng), p.sticker_jitter * normal(rng));
          albedo[i] = p.sticker_albedo;
        }
        break;
      }
      case AttackKind::scribble: {
        detail::paint_strokes(cv, rng, p.pen_width_min, p.pen_width_max, p);
        const int rad = p.ink_smoothing_radius;
        for (auto i : order) {
          const int r0 = static_cast<int>(i / w), c0 = static_cast<int>(i % w);
          Vec3 acc{};
          for (int dr = -rad; dr <= rad; ++dr)
            for (int dc = -rad; dc <= rad; ++dc) {
              const auto& nn = patch.normal(((c0 + dc) % w + w) % w, ((r0 + dr) % h + h) % h);
              acc = Vec3{acc.x + nn.x, acc.y + nn.y, acc.z + nn.z};
            }
          normals[i] = acc.normalized();
          albedo[i] = std::max(SurfacePatch::kMinAlbedo, p.ink_albedo);
        }
        break;
      }
      default: break;
    }
  } else {
    std::vector<double> sx, sy;
    const double residual = (1.0 - p.ironing) * p.warp_amplitude;
    detail::warp(patch, rng, residual, p.warp_length, sx, sy, albedo);
    if (spec.kind == AttackKind::crumple_random) {
      const auto cx = field::correlated(rng, w, h, p.crease_length);
      const auto cy = field::correlated(rng, w, h, p.crease_length);
      for (std::size_t i = 0; i < n; ++i) {
        sx[i] += p.crease_slope * cx[i];
        sy[i] += p.crease_slope * cy[i];
      }
    } else {
      // one fold along each axis through a random interior point
      std::uniform_real_distribution<double> ux(0.25 * w, 0.75 * w), uy(0.25 * h, 0.75 * h);
      const double x0 = ux(rng), y0 = uy(rng);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const std::size_t i = static_cast<std::size_t>(r) * w + c;
          const double dx = c - x0, dy = r - y0;
          if (std::abs(dx) <= p.fold_band) {
            sx[i] += (dx >= 0 ? 1.0 : -1.0) * p.fold_slope * (1.0 - std::abs(dx) / (p.fold_band + 1.0)) +
                     0.5 * p.fold_slope * normal(rng);
          }
          if (std::abs(dy) <= p.fold_band) {
            sy[i] += (dy >= 0 ? 1.0 : -1.0) * p.fold_slope * (1.0 - std::abs(dy) / (p.fold_band + 1.0)) +
                     0.5 * p.fold_slope * normal(rng);
          }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
      normals[i] = normal_from_slopes(sx[i], sy[i]);
      albedo[i] = std::max(SurfacePatch::kMinAlbedo, albedo[i]);
    }
    for (std::size_t i = 0; i < n; ++i) mask[i] = normals[i] == patch.normals()[i] ? 0 : 1;
  }

  std::size_t touched = 0;
  for (auto m : mask) touched += m;
  AttackResult out{SurfacePatch(w, h, std::move(normals), std::move(albedo), patch.correlation_length(), patch.roughness()),
                   spec, static_cast<double>(touched) / static_cast<double>(n), std::move(mask)};
  return out;
}

// ---------------------------------------------------------------------------
// Degradation sweep

struct SweepRow {
  AttackKind kind = AttackKind::scratch;
  /// 0 marks the no-attack baseline row.
  double strength = 0.0;
  std::size_t trials = 0;
  /// Trials whose re-capture could not be aligned.
  std::size_t failures = 0;
  /// Over trials that aligned; NaN when none did.
  double mean_x = 0.0, std_x = 0.0;
  double mean_y = 0.0, std_y = 0.0;
  double mean_coverage = 0.0;
  std::vector<SimilarityScore> scores;
};

struct SweepSetup {
  Protocol query = Protocol::mobile(4, 983.0);
  PhysAttackParams params{};
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) {
    mean = sd = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  for (double e : v) mean += e;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  for (double e : v) sd += (e - mean) * (e - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// For each strength and trial: damage a fresh copy of `patch`, re-capture it
/// with the query protocol, extract, and score against `enrolled`.
inline std::vector<SweepRow> degradation_sweep(const SurfacePatch& patch, const NormMap& enrolled, AttackKind kind,
                                               std::span<const double> strengths, int trials,
                                               const SweepSetup& setup = {}) {
  if (trials < 1) throw Error(Errc::invalid_param, "trials must be positive");
  struct Trial {
    bool failed = false;
    SimilarityScore s{};
    double coverage = 0.0;
  };
  std::vector<SweepRow> rows;
  for (double strength : strengths) {
    const bool baseline = is_area_attack(kind) && strength == 0.0;
    auto run = [&](std::size_t t) -> Trial {
      const auto trial_seed = derive_seed(setup.seed, {static_cast<std::uint64_t>(kind), seed_bits(strength), t});
      Trial out;
      SurfacePatch damaged = patch;
      if (!baseline) {
        auto res = apply_attack(patch, {kind, strength, derive_seed(trial_seed, {1})}, setup.params);
        out.coverage = res.achieved_coverage;
        damaged = std::move(res.patch);
      }
      try {
        out.s = score(acquire(damaged, setup.query, derive_seed(trial_seed, {2})), enrolled);
      } catch (const Error& e) {
        if (e.code() != Errc::alignment_failed) throw;
        out.failed = true;
      }
      return out;
    };
    const auto results = parallel_map<Trial>(static_cast<std::size_t>(trials), run, setup.threads);

    SweepRow row;
    row.kind = kind;
    row.strength = baseline ? 0.0 : strength;
    row.trials = static_cast<std::size_t>(trials);
    std::vector<double> xs, ys, cov;
    for (const auto& r : results) {
      cov.push_back(r.coverage);
      if (r.failed) {
        ++row.failures;
        continue;
      }
      xs.push_back(r.s.corr_x);
      ys.push_back(r.s.corr_y);
      row.scores.push_back(r.s);
    }
    double dummy = 0.0;
    detail::mean_std(xs, row.mean_x, row.std_x);
    detail::mean_std(ys, row.mean_y, row.std_y);
    detail::mean_std(cov, row.mean_coverage, dummy);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace normpuf
