#pragma once

// Reporting: chance-collision probability in log space with a Monte-Carlo
// check, matched/unmatched histograms, and the CSV writers shared by the CLI.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "normpuf/core.hpp"
#include "normpuf/digattack.hpp"
#include "normpuf/physattack.hpp"
#include "normpuf/pipeline.hpp"

namespace normpuf {

// ---------------------------------------------------------------------------
// Collision probability

struct CollisionQuery {
  std::uint64_t d = 1;
  double eps = 0.3;
  double radius = 1.0;

  void validate() const {
    if (d < 1) throw Error(Errc::invalid_query, "d must be at least 1");
    if (!(eps > 0.0 && eps <= radius) || !std::isfinite(radius))
      throw Error(Errc::invalid_query, "need 0 < eps <= R");
  }
};

/// log₁₀ of the chance that a uniform draw from the d-ball of radius R lands
/// within ε of a fixed point: d·(log₁₀ε − log₁₀R).
inline double collision_log10_probability(const CollisionQuery& q) {
  q.validate();
  return static_cast<double>(q.d) * (std::log10(q.eps) - std::log10(q.radius));
}

/// Splits a log₁₀ value into mantissa · 10^exponent with 1 ≤ mantissa < 10.
struct Scientific {
  double mantissa;
  long long exponent;
};

inline Scientific to_scientific(double log10_value) {
  const double e = std::floor(log10_value);
  return {std::pow(10.0, log10_value - e), static_cast<long long>(e)};
}

struct MonteCarloEstimate {
  double p = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  /// Binomial standard error of `p` at the analytic value.
  double sigma = 0.0;
};

inline constexpr std::uint64_t kMonteCarloShards = 16;

/// Uniform samples in the R-ball (Gaussian direction, radius R·U^{1/d}),
/// counted when within ε of the centre. The reference sits at the centre so
/// its ε-ball is always contained. Shards have their own seeds, so the
/// result is independent of the thread count.
inline MonteCarloEstimate collision_monte_carlo(std::uint64_t d, double eps, double radius, std::uint64_t samples,
                                                std::uint64_t seed, unsigned threads = 0) {
  const CollisionQuery q{d, eps, radius};
  q.validate();
  if (d > 12) throw Error(Errc::invalid_query, "Monte-Carlo check supports d <= 12");
  const double p_true = std::pow(eps / radius, static_cast<double>(d));
  if (static_cast<double>(samples) * p_true < 10.0)
    throw Error(Errc::infeasible_estimate, "fewer than 10 expected hits; raise samples");

  const auto hits = parallel_map<std::uint64_t>(
      kMonteCarloShards,
      [&](std::size_t shard) {
        const std::uint64_t n = samples / kMonteCarloShards + (shard < samples % kMonteCarloShards ? 1 : 0);
        Rng rng(derive_seed(seed, {0x4d43ULL, shard}));
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        std::vector<double> v(d);
        const std::vector<double> ref(d, 0.0);
        std::uint64_t h = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (auto& e : v) {
            e = nd(rng);
            s += e * e;
          }
          const double r = radius * std::pow(ud(rng), 1.0 / static_cast<double>(d)) / std::sqrt(s);
          double dist2 = 0.0;
          for (std::size_t k = 0; k < d; ++k) dist2 += (r * v[k] - ref[k]) * (r * v[k] - ref[k]);
          h += dist2 <= eps * eps ? 1 : 0;
        }
        return h;
      },
      threads);
  MonteCarloEstimate est;
  est.samples = samples;
  for (auto h : hits) est.hits += h;
  est.p = static_cast<double>(est.hits) / static_cast<double>(samples);
  est.sigma = std::sqrt(p_true * (1.0 - p_true) / static_cast<double>(samples));
  return est;
}

// ---------------------------------------------------------------------------
// Histograms

struct HistogramReport {
  std::vector<double> edges;
  std::vector<std::size_t> matched;
  std::vector<std::size_t> unmatched;
  /// min(matched) − max(unmatched); positive means perfectly separable.
  double gap = 0.0;
  /// Samples on the wrong side of the other class's extreme.
  std::size_t overlap = 0;
};

/// Bins both samples over [−1, 1] (the closing edge is inclusive).
inline HistogramReport histogram_report(std::span<const double> matched, std::span<const double> unmatched,
                                        int bins) {
  if (matched.empty() || unmatched.empty()) throw Error(Errc::insufficient_data, "histogram needs both classes");
  if (bins < 1) throw Error(Errc::invalid_param, "bins must be positive");
  HistogramReport r;
  for (int i = 0; i <= bins; ++i) r.edges.push_back(-1.0 + 2.0 * i / bins);
  auto bin_of = [&](double v) {
    const int b = static_cast<int>(std::floor((std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * bins));
    return static_cast<std::size_t>(std::min(b, bins - 1));
  };
  r.matched.assign(static_cast<std::size_t>(bins), 0);
  r.unmatched.assign(static_cast<std::size_t>(bins), 0);
  for (double v : matched) ++r.matched[bin_of(v)];
  for (double v : unmatched) ++r.unmatched[bin_of(v)];
  const double lo_m = *std::min_element(matched.begin(), matched.end());
  const double hi_u = *std::max_element(unmatched.begin(), unmatched.end());
  r.gap = lo_m - hi_u;
  if (r.gap <= 0.0) {
    for (double v : matched) r.overlap += v <= hi_u;
    for (double v : unmatched) r.overlap += v >= lo_m;
  }
  return r;
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

/// Ten significant digits; identical bits always print identically.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void histogram(std::ostream& os, const HistogramReport& r) {
  os << "bin_lo,bin_hi,matched,unmatched\n";
  for (std::size_t i = 0; i < r.matched.size(); ++i)
    os << num(r.edges[i]) << ',' << num(r.edges[i + 1]) << ',' << r.matched[i] << ',' << r.unmatched[i] << '\n';
  os << "# gap=" << num(r.gap) << " overlap=" << r.overlap << '\n';
}

/// Columns follow the physical-attack table: attack, strength (%), x mean
/// (std), y mean (std), plus trial accounting.
inline void sweep(std::ostream& os, std::span<const SweepRow> rows) {
  os << "attack,strength_pct,x_corr_mean,x_corr_std,y_corr_mean,y_corr_std,trials,alignment_failures,coverage\n";
  for (const auto& r : rows) {
    os << to_string(r.kind) << ',';
    if (is_area_attack(r.kind))
      os << num(100.0 * r.strength);
    else
      os << "NA";
    os << ',' << num(r.mean_x) << ',' << num(r.std_x) << ',' << num(r.mean_y) << ',' << num(r.std_y) << ','
       << r.trials << ',' << r.failures << ',' << num(r.mean_coverage) << '\n';
  }
}

inline void trace(std::ostream& os, const AttackTrace& t) {
  os << "eval_index,rho_best\n";
  for (std::size_t i = 0; i < t.rho_trajectory.size(); ++i) os << i + 1 << ',' << num(t.rho_trajectory[i]) << '\n';
}

inline void success_table(std::ostream& os, std::span<const MethodSummary> rows) {
  os << "method,runs,successes,success_rate,median_evals,median_evals_success\n";
  for (const auto& r : rows)
    os << to_string(r.method) << ',' << r.runs << ',' << r.successes << ',' << num(r.success_rate) << ','
       << num(r.median_evals) << ',' << num(r.median_evals_success) << '\n';
}

}  // namespace csv

}  // namespace normpuf
