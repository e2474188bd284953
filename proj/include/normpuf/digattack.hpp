#pragma once

// Score-driven forgery: hill climbing in feature space, hill climbing in a
// learned latent space, and black-box optimizers over the latent space. Every
// attack sees the verifier only through a scalar oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "normpuf/authstore.hpp"
#include "normpuf/core.hpp"
#include "normpuf/latent.hpp"
#include "normpuf/optim.hpp"
#include "normpuf/pipeline.hpp"
#include "normpuf/surfacegen.hpp"

namespace normpuf {

enum class Method { baseline, latent_greedy, nelder_mead, powell, conjugate_gradient };

inline constexpr std::array<Method, 5> kAllMethods{Method::baseline, Method::latent_greedy, Method::nelder_mead,
                                                   Method::powell, Method::conjugate_gradient};

inline constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::latent_greedy: return "latent_greedy";
    case Method::nelder_mead: return "nelder_mead";
    case Method::powell: return "powell";
    case Method::conjugate_gradient: return "conjugate_gradient";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (auto m : kAllMethods)
    if (to_string(m) == s) return m;
  throw Error(Errc::invalid_param, "unknown attack method: " + std::string(s));
}

inline constexpr bool uses_codec(Method m) noexcept { return m != Method::baseline; }

/// The attacker's only view of the verifier: a map in, one score out.
using ScoreOracle = std::function<double(const NormMap&)>;

/// One component of the similarity score that `store.verify(map, id)` leaks.
/// Each call is one logged query.
inline ScoreOracle store_oracle(const TemplateStore& store, std::string id, Axis axis) {
  return [&store, id = std::move(id), axis](const NormMap& m) { return store.verify(m, id).score.component(axis); };
}

struct GreedyParams {
  /// Half-range of the uniform perturbation, in feature (or latent) units.
  double delta = 0.16;
  double subset_fraction = 0.02;
  /// Perturbation steps after the initial query.
  std::size_t max_iterations = 9999;

  void validate() const {
    if (!(delta > 0.0)) throw Error(Errc::invalid_param, "delta must be positive");
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
      throw Error(Errc::invalid_param, "subset_fraction must lie in (0,1]");
    if (max_iterations < 1) throw Error(Errc::invalid_param, "max_iterations must be at least 1");
  }
};

struct AttackTrace {
  std::string target_id;
  Method method = Method::baseline;
  Axis axis = Axis::x;
  /// Perturbation steps (greedy) or optimizer evaluations after the first.
  std::size_t iterations = 0;
  std::size_t function_evals = 0;
  std::size_t budget = 0;
  /// Best score so far after each oracle evaluation.
  std::vector<double> rho_trajectory;
  bool success = false;
  NormMap forged;
  /// Final latent point for latent-space methods.
  std::optional<Eigen::VectorXd> latent;

  double best_rho() const { return rho_trajectory.empty() ? -1.0 : rho_trajectory.back(); }
  /// Evaluations spent to first reach `tau`, if ever.
  std::optional<std::size_t> evals_to(double tau) const {
    for (std::size_t i = 0; i < rho_trajectory.size(); ++i)
      if (rho_trajectory[i] >= tau) return i + 1;
    return std::nullopt;
  }
};

namespace detail {

inline std::size_t subset_size(double fraction, std::size_t dims) {
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dims))), 1,
                                 dims);
}

/// Uniform random k-subset of [0, n) by partial Fisher–Yates over a
/// persistent permutation.
class SubsetSampler {
 public:
  explicit SubsetSampler(std::size_t n) : perm_(n) {
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  }
  std::span<const std::size_t> draw(Rng& rng, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> u(i, perm_.size() - 1);
      std::swap(perm_[i], perm_[u(rng)]);
    }
    return {perm_.data(), k};
  }

 private:
  std::vector<std::size_t> perm_;
};

inline NormMap with_component(const NormMap& base, Axis axis, std::vector<double> comp) {
  std::vector<double> other(base.component(axis == Axis::x ? Axis::y : Axis::x).begin(),
                            base.component(axis == Axis::x ? Axis::y : Axis::x).end());
  return axis == Axis::x ? NormMap(base.width(), base.height(), std::move(comp), std::move(other))
                         : NormMap(base.width(), base.height(), std::move(other), std::move(comp));
}

}  // namespace detail

/// Hill climbing directly on one component of the map: perturb a random
/// subset of pixels by U[−δ, δ], keep the change iff the score did not drop.
/// Values are kept inside ±1/√2 so the other component never has to move.
inline AttackTrace baseline_greedy(const ScoreOracle& oracle, const NormMap& m0, const GreedyParams& params,
                                   double tau, std::uint64_t seed, Axis axis = Axis::x) {
  params.validate();
  AttackTrace tr;
  tr.method = Method::baseline;
  tr.axis = axis;
  tr.budget = params.max_iterations + 1;
  Rng rng(derive_seed(seed, {0x42475245ULL, static_cast<std::uint64_t>(axis)}));

  std::vector<double> cur(m0.component(axis).begin(), m0.component(axis).end());
  for (auto& v : cur) v = std::clamp(v, -kComponentLimit, kComponentLimit);
  NormMap base = detail::with_component(m0, axis, cur);
  double rho = oracle(base);
  tr.function_evals = 1;
  tr.rho_trajectory.push_back(rho);

  const std::size_t k = detail::subset_size(params.subset_fraction, cur.size());
  detail::SubsetSampler sampler(cur.size());
  std::uniform_real_distribution<double> noise(-params.delta, params.delta);
  std::vector<double> saved(k);
  while (rho < tau && tr.iterations < params.max_iterations) {
    const auto idx = sampler.draw(rng, k);
    for (std::size_t j = 0; j < k; ++j) {
      saved[j] = cur[idx[j]];
      cur[idx[j]] = std::clamp(cur[idx[j]] + noise(rng), -kComponentLimit, kComponentLimit);
    }
    NormMap cand = detail::with_component(base, axis, cur);
    const double r = oracle(cand);
    ++tr.iterations;
    ++tr.function_evals;
    if (r >= rho) {
      rho = r;
    } else {
      for (std::size_t j = 0; j < k; ++j) cur[idx[j]] = saved[j];
    }
    tr.rho_trajectory.push_back(rho);
  }
  tr.success = rho >= tau;
  tr.forged = detail::with_component(base, axis, std::move(cur));
  return tr;
}

/// The same accept rule, run over latent coordinates; each query decodes the
/// candidate into `base` before it reaches the oracle.
inline AttackTrace latent_greedy(const ScoreOracle& oracle, const LatentCodec& codec, const Eigen::VectorXd& z0,
                                 const GreedyParams& params, double tau, std::uint64_t seed,
                                 const NormMap& base = {}) {
  params.validate();
  if (z0.size() != static_cast<Eigen::Index>(codec.m())) throw Error(Errc::dimension_mismatch, "z0 length != m");
  AttackTrace tr;
  tr.method = Method::latent_greedy;
  tr.axis = codec.layout() == CodecLayout::y ? Axis::y : Axis::x;
  tr.budget = params.max_iterations + 1;
  Rng rng(derive_seed(seed, {0x4c475245ULL, static_cast<std::uint64_t>(codec.layout())}));

  Eigen::VectorXd z = z0;
  double rho = oracle(codec.decode(z, base));
  tr.function_evals = 1;
  tr.rho_trajectory.push_back(rho);

  const std::size_t k = detail::subset_size(params.subset_fraction, codec.m());
  detail::SubsetSampler sampler(codec.m());
  std::uniform_real_distribution<double> noise(-params.delta, params.delta);
  while (rho < tau && tr.iterations < params.max_iterations) {
    Eigen::VectorXd cand = z;
    for (auto i : sampler.draw(rng, k)) cand[static_cast<Eigen::Index>(i)] += noise(rng);
    const double r = oracle(codec.decode(cand, base));
    ++tr.iterations;
    ++tr.function_evals;
    if (r >= rho) {
      rho = r;
      z = std::move(cand);
    }
    tr.rho_trajectory.push_back(rho);
  }
  tr.success = rho >= tau;
  tr.forged = codec.decode(z, base);
  tr.latent = std::move(z);
  return tr;
}

/// Minimizes −oracle(decode(z)) with one of the black-box optimizers, stopping
/// as soon as the score reaches τ. Every objective call counts against
/// `budget`. Steps and finite-difference scales follow √(explained variance).
inline AttackTrace blackbox_attack(const ScoreOracle& oracle, const LatentCodec& codec, const Eigen::VectorXd& z0,
                                   Method method, double tau, std::size_t budget, std::uint64_t seed,
                                   const NormMap& base = {}) {
  if (method == Method::baseline || method == Method::latent_greedy)
    throw Error(Errc::invalid_param, "blackbox_attack needs an optimizer method");
  if (z0.size() != static_cast<Eigen::Index>(codec.m())) throw Error(Errc::dimension_mismatch, "z0 length != m");
  AttackTrace tr;
  tr.method = method;
  tr.axis = codec.layout() == CodecLayout::y ? Axis::y : Axis::x;
  tr.budget = budget;
  if (budget == 0) {
    tr.forged = codec.decode(z0, base);
    tr.latent = z0;
    return tr;
  }

  const optim::Objective f = [&](const optim::Vector& z) { return -oracle(codec.decode(z, base)); };
  optim::Options opt;
  opt.max_evals = budget;
  opt.stop_below = -tau;
  const Eigen::VectorXd scale = codec.explained_variance().cwiseSqrt().cwiseMax(1e-12);

  optim::Result res;
  switch (method) {
    case Method::nelder_mead: res = optim::nelder_mead(f, z0, scale, opt, seed); break;
    case Method::powell: res = optim::powell(f, z0, scale, opt); break;
    case Method::conjugate_gradient: res = optim::conjugate_gradient(f, z0, scale, opt); break;
    default: break;
  }
  tr.function_evals = res.evals;
  tr.iterations = res.evals > 0 ? res.evals - 1 : 0;
  tr.rho_trajectory.reserve(res.best_trajectory.size());
  for (double v : res.best_trajectory) tr.rho_trajectory.push_back(-v);
  tr.success = tr.best_rho() >= tau;
  tr.forged = codec.decode(res.x, base);
  tr.latent = res.x;
  return tr;
}

// ---------------------------------------------------------------------------
// Two-component forgery

struct ForgeSetup {
  /// Required for every method except the baseline.
  const ComponentCodecs* codecs = nullptr;
  /// Per-component std of the adversary's holdout maps; sizes the baseline
  /// start map and the default δ.
  double holdout_std = 0.08;
  GreedyParams baseline{};
  GreedyParams latent{};
  /// Evaluation budget for each component run.
  std::size_t budget = 10000;
};

/// Default greedy parameters: δ = 2 × holdout per-dimension std, 2% of the
/// dimensions per step. In latent space the per-dimension std is the RMS of
/// √(explained variance).
inline GreedyParams default_baseline_params(double holdout_std, std::size_t budget) {
  return {2.0 * holdout_std, 0.02, budget > 0 ? budget - 1 : 0};
}

inline GreedyParams default_latent_params(const LatentCodec& codec, std::size_t budget) {
  const double rms = std::sqrt(codec.explained_variance().mean());
  return {2.0 * rms, 0.02, budget > 0 ? budget - 1 : 0};
}

inline ForgeSetup make_forge_setup(const ComponentCodecs* codecs, double holdout_std, std::size_t budget) {
  ForgeSetup s;
  s.codecs = codecs;
  s.holdout_std = holdout_std;
  s.budget = budget;
  s.baseline = default_baseline_params(holdout_std, budget);
  if (codecs) s.latent = default_latent_params(codecs->x, budget);
  return s;
}

/// Random start for the baseline: i.i.d. normal pixels with the holdout std.
inline NormMap random_start(int width, int height, double sd, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x4d30ULL}));
  std::normal_distribution<double> nd(0.0, sd);
  const auto n = static_cast<std::size_t>(width) * height;
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = std::clamp(nd(rng), -kComponentLimit, kComponentLimit);
  for (auto& v : y) v = std::clamp(nd(rng), -kComponentLimit, kComponentLimit);
  return NormMap(width, height, std::move(x), std::move(y));
}

/// Attack of one component of `target_id`, starting from `start`.
inline AttackTrace attack_component(const TemplateStore& store, const std::string& target_id, Method method, Axis axis,
                                    const NormMap& start, const ForgeSetup& setup, std::uint64_t seed) {
  const auto oracle = store_oracle(store, target_id, axis);
  const double tau = store.threshold();
  AttackTrace tr;
  if (method == Method::baseline) {
    auto p = setup.baseline;
    p.max_iterations = setup.budget > 0 ? setup.budget - 1 : 0;
    if (setup.budget == 0) {
      tr.method = method;
      tr.axis = axis;
      tr.forged = start;
    } else {
      tr = baseline_greedy(oracle, start, p, tau, seed, axis);
    }
  } else {
    if (!setup.codecs) throw Error(Errc::invalid_param, "latent-space methods need fitted codecs");
    const auto& codec = (*setup.codecs)[axis];
    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(codec.m()));
    if (method == Method::latent_greedy) {
      auto p = setup.latent;
      p.max_iterations = setup.budget > 0 ? setup.budget - 1 : 0;
      if (setup.budget == 0) {
        tr.method = method;
        tr.axis = axis;
        tr.forged = codec.decode(z0, start);
      } else {
        tr = latent_greedy(oracle, codec, z0, p, tau, seed, start);
      }
    } else {
      tr = blackbox_attack(oracle, codec, z0, method, tau, setup.budget, seed, start);
    }
  }
  tr.target_id = target_id;
  tr.budget = setup.budget;
  return tr;
}

struct ForgeryResult {
  AttackTrace x;
  AttackTrace y;
  NormMap forged;
  bool success = false;
  std::size_t function_evals = 0;
};

/// Attacks corr_x, then corr_y starting from the x-forged map. The y run
/// never touches nx, so the combined map scores exactly (ρ_x, ρ_y).
inline ForgeryResult forge(const TemplateStore& store, const std::string& target_id, Method method,
                           const ForgeSetup& setup, std::uint64_t seed) {
  const auto rec = store.record(target_id);
  NormMap start;
  if (method == Method::baseline) {
    start = random_start(rec.templ.width(), rec.templ.height(), setup.holdout_std, derive_seed(seed, {0}));
  } else {
    if (!setup.codecs) throw Error(Errc::invalid_param, "latent-space methods need fitted codecs");
    const auto& cy = setup.codecs->y;
    start = cy.decode(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cy.m())));
  }
  ForgeryResult out;
  out.x = attack_component(store, target_id, method, Axis::x, start, setup, derive_seed(seed, {1}));
  out.y = attack_component(store, target_id, method, Axis::y, out.x.forged, setup, derive_seed(seed, {2}));
  out.forged = out.y.forged;
  out.success = out.x.success && out.y.success;
  out.function_evals = out.x.function_evals + out.y.function_evals;
  return out;
}

// ---------------------------------------------------------------------------
// Success-rate table

struct RunRecord {
  Method method = Method::baseline;
  std::string target_id;
  int trial = 0;
  std::size_t function_evals = 0;
  bool success = false;
  double best_rho = 0.0;
  /// Query-log growth of the run's private store snapshot.
  std::size_t queries_logged = 0;
  AttackTrace trace;
};

struct MethodSummary {
  Method method = Method::baseline;
  std::size_t runs = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  /// Median evaluations over successful runs; NaN when there are none.
  double median_evals_success = std::numeric_limits<double>::quiet_NaN();
  /// Median over all runs with failures counted at the budget.
  double median_evals = std::numeric_limits<double>::quiet_NaN();
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Summary of the runs of one method, counting successes reached within
/// `budget` evaluations (which may be smaller than the runs' own budget).
inline MethodSummary summarize(std::span<const RunRecord> runs, Method method, std::size_t budget, double tau) {
  MethodSummary s;
  s.method = method;
  std::vector<double> ok, all;
  for (const auto& r : runs) {
    if (r.method != method) continue;
    ++s.runs;
    const auto hit = r.trace.evals_to(tau);
    if (hit && *hit <= budget) {
      ++s.successes;
      ok.push_back(static_cast<double>(*hit));
      all.push_back(static_cast<double>(*hit));
    } else {
      all.push_back(static_cast<double>(budget));
    }
  }
  s.success_rate = s.runs ? static_cast<double>(s.successes) / static_cast<double>(s.runs) : 0.0;
  s.median_evals_success = median(ok);
  s.median_evals = median(all);
  return s;
}

/// Runs every method × target × trial on one component (corr_x by default),
/// each against its own snapshot of the store so query logs stay separate.
inline std::vector<RunRecord> attack_runs(const TemplateStore& store, std::span<const std::string> targets,
                                          std::span<const Method> methods, const ForgeSetup& setup, int trials,
                                          std::uint64_t seed, Axis axis = Axis::x, unsigned threads = 0) {
  struct Job {
    Method method;
    std::size_t target;
    int trial;
  };
  std::vector<Job> jobs;
  for (auto m : methods)
    for (std::size_t t = 0; t < targets.size(); ++t)
      for (int k = 0; k < trials; ++k) jobs.push_back({m, t, k});

  const auto rec0 = store.record(targets.front());
  return parallel_map<RunRecord>(
      jobs.size(),
      [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto run_seed = derive_seed(seed, {static_cast<std::uint64_t>(job.method), job.target,
                                                 static_cast<std::uint64_t>(job.trial)});
        auto snap = store.snapshot();
        NormMap start;
        if (job.method == Method::baseline) {
          start = random_start(rec0.templ.width(), rec0.templ.height(), setup.holdout_std, derive_seed(run_seed, {0}));
        } else {
          if (!setup.codecs) throw Error(Errc::invalid_param, "latent-space methods need fitted codecs");
          const auto& other = (*setup.codecs)[axis == Axis::x ? Axis::y : Axis::x];
          start = other.decode(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(other.m())));
        }
        RunRecord r;
        r.method = job.method;
        r.target_id = targets[job.target];
        r.trial = job.trial;
        try {
          r.trace = attack_component(*snap, r.target_id, job.method, axis, start, setup, derive_seed(run_seed, {1}));
        } catch (const Error& e) {
          if (e.code() != Errc::degenerate_simplex) throw;
          r.trace.method = job.method;
          r.trace.target_id = r.target_id;
        }
        r.function_evals = r.trace.function_evals;
        r.success = r.trace.success;
        r.best_rho = r.trace.best_rho();
        r.queries_logged = snap->query_count();
        return r;
      },
      threads);
}

inline std::vector<MethodSummary> success_rate_table(const TemplateStore& store, std::span<const std::string> targets,
                                                     std::span<const Method> methods, const ForgeSetup& setup,
                                                     int trials, std::uint64_t seed, unsigned threads = 0) {
  std::vector<MethodSummary> table;
  if (targets.empty() || trials <= 0) {
    for (auto m : methods) table.push_back({m, 0, 0, 0.0});
    return table;
  }
  const auto runs = attack_runs(store, targets, methods, setup, trials, seed, Axis::x, threads);
  for (auto m : methods) table.push_back(summarize(runs, m, setup.budget, store.threshold()));
  return table;
}

// ---------------------------------------------------------------------------
// Experimental setting

/// The adversary's world: a paper stock, a holdout of scans from sheets the
/// adversary owns, and a verifier store with enrolled target sheets cut from
/// the same stock.
struct ScenarioParams {
  StockParams stock{};
  SurfaceParams surface{};
  std::size_t holdout_sheets = 14;
  std::size_t scans_per_sheet = 3;
  std::size_t targets = 4;
  double variance_target = 0.99;
  double noise_sigma = 983.0;
  double threshold = 0.3;
  std::uint64_t seed = 0;
};

struct Scenario {
  std::vector<NormMap> holdout;
  ComponentCodecs codecs;
  std::unique_ptr<TemplateStore> store;
  std::vector<std::string> target_ids;
  double holdout_std = 0.0;
};

inline Scenario make_scenario(const ScenarioParams& p, unsigned threads = 0) {
  const PaperStock stock(p.stock, p.surface);
  Scenario sc;
  const auto holdout_seed = derive_seed(p.seed, {0x484f4c44ULL});
  const auto target_seed = derive_seed(p.seed, {0x54475453ULL});
  const auto scans = p.scans_per_sheet;
  sc.holdout = parallel_map<NormMap>(
      p.holdout_sheets * scans,
      [&](std::size_t i) {
        const auto sheet = stock.sheet(derive_seed(holdout_seed, {i / scans}));
        return acquire(sheet, Protocol::mobile(4, p.noise_sigma), derive_seed(holdout_seed, {i / scans, i % scans, 1}));
      },
      threads);
  sc.codecs = fit_components(sc.holdout, p.variance_target);

  double s = 0.0, s2 = 0.0;
  std::size_t cnt = 0;
  for (const auto& m : sc.holdout)
    for (auto a : {Axis::x, Axis::y})
      for (double v : m.component(a)) {
        s += v;
        s2 += v * v;
        ++cnt;
      }
  const double mean = s / static_cast<double>(cnt);
  sc.holdout_std = std::sqrt(std::max(0.0, s2 / static_cast<double>(cnt) - mean * mean));

  sc.store = std::make_unique<TemplateStore>(StoreConfig{p.threshold});
  const auto templs = parallel_map<NormMap>(
      p.targets,
      [&](std::size_t i) {
        const auto sheet = stock.sheet(derive_seed(target_seed, {i}));
        return acquire(sheet, Protocol::scanner(p.noise_sigma), derive_seed(target_seed, {i, 1}));
      },
      threads);
  for (std::size_t i = 0; i < p.targets; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "target-%02zu", i);
    sc.store->enroll(id, templs[i], SourceTag::scanner);
    sc.target_ids.emplace_back(id);
  }
  return sc;
}

}  // namespace normpuf
