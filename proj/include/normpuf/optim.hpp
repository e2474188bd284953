#pragma once

// Derivative-free local minimizers on a counted, budgeted objective:
// Nelder–Mead, Powell's direction set, and Polak–Ribière conjugate gradient
// on a central-difference gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "normpuf/core.hpp"

namespace normpuf::optim {

using Vector = Eigen::VectorXd;
using Objective = std::function<double(const Vector&)>;

struct Options {
  /// Hard cap on objective evaluations.
  std::size_t max_evals = 10000;
  /// Stop as soon as an evaluation reaches f ≤ stop_below.
  std::optional<double> stop_below;
  /// Convergence tolerance on simplex / line-search function spread.
  double ftol = 1e-14;
};

enum class StopReason { target_reached, budget_exhausted, converged };

struct Result {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
  StopReason reason = StopReason::converged;
  /// Nelder–Mead only: number of jittered restarts after a collapsed simplex.
  int restarts = 0;
  /// Best-so-far f after each evaluation.
  std::vector<double> best_trajectory;
};

/// Wraps the user objective: counts calls, keeps the incumbent, and unwinds
/// the optimizer through `Stop` once the target or the budget is hit.
class Counted {
 public:
  struct Stop {
    StopReason reason;
  };

  Counted(const Objective& f, const Options& opt) : f_(f), opt_(opt) {}

  double operator()(const Vector& x) {
    if (evals_ >= opt_.max_evals) throw Stop{StopReason::budget_exhausted};
    const double v = f_(x);
    ++evals_;
    if (v < best_f_) {
      best_f_ = v;
      best_x_ = x;
    }
    trajectory_.push_back(best_f_);
    if (opt_.stop_below && v <= *opt_.stop_below) throw Stop{StopReason::target_reached};
    return v;
  }

  std::size_t evals() const noexcept { return evals_; }
  std::size_t remaining() const noexcept { return opt_.max_evals - evals_; }

  Result finish(StopReason reason, int restarts = 0) {
    Result r;
    r.x = best_x_;
    r.f = best_f_;
    r.evals = evals_;
    r.reason = reason;
    r.restarts = restarts;
    r.best_trajectory = std::move(trajectory_);
    return r;
  }

 private:
  const Objective& f_;
  Options opt_;
  std::size_t evals_ = 0;
  double best_f_ = std::numeric_limits<double>::infinity();
  Vector best_x_;
  std::vector<double> trajectory_;
};

// ---------------------------------------------------------------------------
// Nelder–Mead

namespace detail {

/// Volume proxy: smallest singular value of the edge matrix relative to the
/// largest. Zero means the vertices lie in a lower-dimensional affine set.
inline double simplex_conditioning(const std::vector<Vector>& s) {
  const auto m = s[0].size();
  Eigen::MatrixXd e(m, m);
  for (Eigen::Index j = 0; j < m; ++j) e.col(j) = s[static_cast<std::size_t>(j) + 1] - s[0];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& sv = svd.singularValues();
  return sv[0] > 0.0 ? sv[m - 1] / sv[0] : 0.0;
}

}  // namespace detail

/// Standard simplex with reflection 1, expansion 2, contraction ½, shrink ½.
/// `steps[i]` is the initial edge along axis i. A simplex that collapses is
/// rebuilt once around the incumbent with jittered steps; a second collapse
/// ends the run with Errc::degenerate_simplex.
inline Result nelder_mead(const Objective& fn, const Vector& x0, const Vector& steps, const Options& opt = {},
                          std::uint64_t seed = 0) {
  const auto m = x0.size();
  if (m < 1 || steps.size() != m) throw Error(Errc::invalid_param, "nelder_mead: bad dimensions");
  Counted f(fn, opt);
  Rng rng(derive_seed(seed, {0x4e4dULL}));
  int restarts = 0;

  try {
    auto build = [&](const Vector& center, double jitter) {
      std::vector<Vector> s{center};
      std::uniform_real_distribution<double> u(1.0 - jitter, 1.0 + jitter);
      for (Eigen::Index i = 0; i < m; ++i) {
        Vector v = center;
        v[i] += steps[i] * (jitter > 0.0 ? u(rng) : 1.0);
        s.push_back(std::move(v));
      }
      return s;
    };

    std::vector<Vector> s = build(x0, 0.0);
    std::vector<double> fs;
    for (const auto& v : s) fs.push_back(f(v));
    std::vector<std::size_t> order(s.size());
    const double initial_scale = steps.cwiseAbs().maxCoeff();

    for (;;) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
      {
        std::vector<Vector> s2;
        std::vector<double> f2;
        for (auto i : order) {
          s2.push_back(s[i]);
          f2.push_back(fs[i]);
        }
        s = std::move(s2);
        fs = std::move(f2);
      }
      const double spread = std::abs(fs.back() - fs.front());
      if (spread <= opt.ftol * (std::abs(fs.front()) + opt.ftol)) {
        const double size = (s.back() - s.front()).cwiseAbs().maxCoeff();
        if (size <= 1e-10 * initial_scale) return f.finish(StopReason::converged, restarts);
      }
      if (detail::simplex_conditioning(s) < 1e-12) {
        if (restarts >= 1) throw Error(Errc::degenerate_simplex, "simplex collapsed after restart");
        ++restarts;
        s = build(s.front(), 0.25);
        fs.assign(s.size(), 0.0);
        for (std::size_t i = 0; i < s.size(); ++i) fs[i] = f(s[i]);
        continue;
      }

      Vector centroid = Vector::Zero(m);
      for (std::size_t i = 0; i + 1 < s.size(); ++i) centroid += s[i];
      centroid /= static_cast<double>(m);
      const Vector& worst = s.back();

      const Vector xr = centroid + (centroid - worst);
      const double fr = f(xr);
      if (fr < fs.front()) {
        const Vector xe = centroid + 2.0 * (centroid - worst);
        const double fe = f(xe);
        if (fe < fr) {
          s.back() = xe;
          fs.back() = fe;
        } else {
          s.back() = xr;
          fs.back() = fr;
        }
        continue;
      }
      if (fr < fs[fs.size() - 2]) {
        s.back() = xr;
        fs.back() = fr;
        continue;
      }
      // contraction: outside if the reflection improved on the worst point
      const bool outside = fr < fs.back();
      const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (worst - centroid));
      const double fc = f(xc);
      if (fc < (outside ? fr : fs.back())) {
        s.back() = xc;
        fs.back() = fc;
        continue;
      }
      for (std::size_t i = 1; i < s.size(); ++i) {
        s[i] = s[0] + 0.5 * (s[i] - s[0]);
        fs[i] = f(s[i]);
      }
    }
  } catch (const Counted::Stop& stop) {
    return f.finish(stop.reason, restarts);
  }
}

// ---------------------------------------------------------------------------
// Line search shared by Powell and CG

namespace detail {

inline constexpr double kGolden = 0.3819660112501051;  // 2 − φ

struct LineMin {
  double t = 0.0;
  double f = 0.0;
};

/// Minimizes g(t) = f(x + t·d) starting from t = 0 (value f0): brackets by
/// stepping ±`step` and growing by φ, then golden-section search until the
/// bracket is narrower than `tol`.
template <class F>
LineMin golden_line_search(F&& g, double f0, double step, double tol, int max_grow = 40) {
  constexpr double phi = 1.618033988749895;
  double a = 0.0, fa = f0;
  double b = step, fb = g(b);
  if (fb > fa) {
    // try the other direction before shrinking
    const double bn = -step, fbn = g(bn);
    if (fbn < fa) {
      b = bn;
      fb = fbn;
    } else {
      // minimum lies inside (−step, step)
      double lo = -step, hi = step;
      double x1 = lo + kGolden * (hi - lo), x2 = hi - kGolden * (hi - lo);
      double f1 = g(x1), f2 = g(x2);
      while (std::abs(hi - lo) > tol) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = lo + kGolden * (hi - lo);
          f1 = g(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = hi - kGolden * (hi - lo);
          f2 = g(x2);
        }
      }
      LineMin best{0.0, f0};
      if (f1 < best.f) best = {x1, f1};
      if (f2 < best.f) best = {x2, f2};
      return best;
    }
  }
  // b is downhill from a; grow until the function turns up.
  double c = b + phi * (b - a), fc = g(c);
  for (int i = 0; i < max_grow && fc < fb; ++i) {
    a = b;
    fa = fb;
    b = c;
    fb = fc;
    c = b + phi * (b - a);
    fc = g(c);
  }
  if (fc < fb) return {c, fc};
  double lo = std::min(a, c), hi = std::max(a, c);
  double x1 = lo + kGolden * (hi - lo), x2 = hi - kGolden * (hi - lo);
  double f1 = g(x1), f2 = g(x2);
  while (std::abs(hi - lo) > tol) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = lo + kGolden * (hi - lo);
      f1 = g(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = hi - kGolden * (hi - lo);
      f2 = g(x2);
    }
  }
  LineMin best{b, fb};
  if (f1 < best.f) best = {x1, f1};
  if (f2 < best.f) best = {x2, f2};
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Powell

/// Direction set starting from the scaled coordinate axes. After each sweep
/// the direction of largest decrease is replaced by the net displacement,
/// unless Powell's test says that would lose conjugacy.
inline Result powell(const Objective& fn, const Vector& x0, const Vector& steps, const Options& opt = {},
                     double line_tol = 1e-5) {
  const auto m = x0.size();
  if (m < 1 || steps.size() != m) throw Error(Errc::invalid_param, "powell: bad dimensions");
  Counted f(fn, opt);
  try {
    std::vector<Vector> dirs;
    for (Eigen::Index i = 0; i < m; ++i) {
      Vector d = Vector::Zero(m);
      d[i] = steps[i];
      dirs.push_back(d);
    }
    Vector x = x0;
    double fx = f(x);
    for (;;) {
      const Vector x_start = x;
      const double f_start = fx;
      double big_drop = 0.0;
      std::size_t big_i = 0;
      for (std::size_t i = 0; i < dirs.size(); ++i) {
        const Vector& d = dirs[i];
        auto g = [&](double t) { return f(x + t * d); };
        const auto lm = detail::golden_line_search(g, fx, 1.0, line_tol);
        if (lm.f < fx) {
          if (fx - lm.f > big_drop) {
            big_drop = fx - lm.f;
            big_i = i;
          }
          x += lm.t * d;
          fx = lm.f;
        }
      }
      if (std::abs(f_start - fx) <= opt.ftol * (std::abs(f_start) + std::abs(fx)) + 1e-300)
        return f.finish(StopReason::converged);

      const Vector disp = x - x_start;
      const double fe = f(x + disp);
      if (fe < f_start) {
        const double t1 = f_start - fx - big_drop;
        const double t2 = f_start - fe;
        const double lhs = 2.0 * (f_start - 2.0 * fx + fe) * t1 * t1;
        const double rhs = big_drop * t2 * t2;
        if (lhs < rhs) {
          auto g = [&](double t) { return f(x + t * disp); };
          const auto lm = detail::golden_line_search(g, fx, 1.0, line_tol);
          if (lm.f < fx) {
            x += lm.t * disp;
            fx = lm.f;
          }
          dirs[big_i] = dirs.back();
          dirs.back() = disp;
        }
      }
    }
  } catch (const Counted::Stop& stop) {
    return f.finish(stop.reason);
  }
}

// ---------------------------------------------------------------------------
// Conjugate gradient

/// Polak–Ribière (clipped at zero) on a central-difference gradient with
/// per-axis step h_i = fd_scale·scale_i. Each gradient costs 2m evaluations.
/// The line search starts from the previous step length (first time: a move
/// of about one scale unit), backtracks with safeguarded quadratic
/// interpolation until the Armijo condition holds, and otherwise takes one
/// interpolated step toward the parabola's minimum.
inline Result conjugate_gradient(const Objective& fn, const Vector& x0, const Vector& scales, const Options& opt = {},
                                 double fd_scale = 1e-3) {
  const auto m = x0.size();
  if (m < 1 || scales.size() != m) throw Error(Errc::invalid_param, "conjugate_gradient: bad dimensions");
  Counted f(fn, opt);
  try {
    auto gradient = [&](const Vector& x) {
      Vector g(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double h = fd_scale * scales[i];
        Vector a = x, b = x;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2.0 * h);
      }
      return g;
    };
    Vector x = x0;
    double fx = f(x);
    Vector g = gradient(x);
    Vector d = -g;
    double alpha0 = 0.0;
    for (int it = 0;; ++it) {
      double dnorm = d.cwiseQuotient(scales).norm();
      if (!(dnorm > 0.0)) return f.finish(StopReason::converged);
      double slope = g.dot(d);
      if (slope >= 0.0) {
        d = -g;
        dnorm = d.cwiseQuotient(scales).norm();
        slope = g.dot(d);
        if (!(dnorm > 0.0) || slope >= 0.0) return f.finish(StopReason::converged);
      }
      double alpha = alpha0 > 0.0 ? alpha0 : 1.0 / dnorm;
      constexpr double c1 = 1e-4;
      double fa = f(x + alpha * d);
      // Curvature of the parabola through (0, fx) with slope `slope` and (t, ft).
      auto curvature = [&](double t, double ft) { return (ft - fx - slope * t) / (t * t); };
      if (fa <= fx + c1 * alpha * slope) {
        // Expand while the parabola opens downward and the decrease continues.
        for (int k = 0; k < 30 && curvature(alpha, fa) <= 0.0; ++k) {
          const double f2 = f(x + 2.0 * alpha * d);
          if (!(f2 < fa)) break;
          alpha *= 2.0;
          fa = f2;
        }
        const double q = curvature(alpha, fa);
        if (q > 0.0) {
          const double t = std::min(-slope / (2.0 * q), 4.0 * alpha);
          if (std::abs(t - alpha) > 1e-3 * alpha) {
            const double ft = f(x + t * d);
            if (ft < fa) {
              alpha = t;
              fa = ft;
            }
          }
        }
      } else {
        int k = 0;
        while (fa > fx + c1 * alpha * slope && k++ < 50) {
          const double q = curvature(alpha, fa);
          const double t = q > 0.0 ? -slope / (2.0 * q) : 0.5 * alpha;
          alpha = std::clamp(t, 0.1 * alpha, 0.5 * alpha);
          fa = f(x + alpha * d);
        }
        if (fa >= fx) return f.finish(StopReason::converged);
      }
      const double f_prev = fx;
      x += alpha * d;
      fx = fa;
      alpha0 = alpha;
      if (std::abs(f_prev - fx) <= opt.ftol * (std::abs(f_prev) + std::abs(fx)) + 1e-300)
        return f.finish(StopReason::converged);
      const Vector g_new = gradient(x);
      const double beta = std::max(0.0, g_new.dot(g_new - g) / g.dot(g));
      d = -g_new + beta * d;
      g = g_new;
    }
  } catch (const Counted::Stop& stop) {
    return f.finish(stop.reason);
  }
}

}  // namespace normpuf::optim
