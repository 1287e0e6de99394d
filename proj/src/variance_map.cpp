#include "dpoly/variance_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dpoly {

void MapParams::validate() const {
  if (b < 2) throw ValidationError("variance_map: b must be >= 2, got " + std::to_string(b));
}

void ScalingSchedule::validate() const {
  if (b < 2) throw ValidationError("schedule: b must be >= 2, got " + std::to_string(b));
  if (m < 1) throw ValidationError("schedule: m must be >= 1, got " + std::to_string(m));
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("schedule: eps must be finite and >= 0, got " + fmt17(epsilon));
  }
  if (!std::isfinite(tau)) throw ValidationError("schedule: tau must be finite");
}

double kappa(int b) {
  MapParams{b}.validate();
  return std::sqrt(2.0 / (b - 1));
}

double eta(int b) {
  MapParams{b}.validate();
  return (b + 1) / (3.0 * (b - 1));
}

double upsilon(int b, double epsilon) {
  double e = eta(b);
  if (!(epsilon < e)) {
    throw ValidationError("upsilon: eps must be < eta(b) = " + fmt17(e) + ", got " +
                          fmt17(epsilon));
  }
  double k = kappa(b);
  return k * k / (e - epsilon);
}

double ell(double x) {
  if (!(x > 0.0)) throw ValidationError("ell: x must be > 0, got " + fmt17(x));
  double u = std::log1p(x);
  return u - std::log(u);
}

double ell_m(double x, int m) {
  if (m < 0) throw ValidationError("ell_m: m must be >= 0, got " + std::to_string(m));
  for (int i = 1; i <= m; ++i) {
    if (!(x > 0.0)) {
      throw ValidationError("ell_m: argument of composition " + std::to_string(i) +
                            " is non-positive: " + fmt17(x));
    }
    double u = std::log1p(x);
    x = u - std::log(u);
  }
  return x;
}

double beta_schedule(const ScalingSchedule& s, std::int64_t n) {
  s.validate();
  if (n < 1) throw ValidationError("schedule: n must be >= 1, got " + std::to_string(n));
  double kb = kappa(s.b);
  double eb = eta(s.b);
  double nd = static_cast<double>(n);
  double sum = 0.0;        // sum_{k=1}^{m-1} ell^k(n)
  double ellk = nd;        // ell^k(n), starting at k = 0
  for (int k = 1; k <= s.m; ++k) {
    ellk = ell(ellk);
    if (k < s.m) sum += ellk;
  }
  double correction = eb * sum + s.epsilon * ellk;
  return kb / std::sqrt(nd) - s.tau * kb * kb / (2.0 * nd) +
         kb / (2.0 * nd * std::sqrt(nd)) * correction;
}

namespace {

// ((1+x)^b - 1)/b without cancellation near x = 0 and without intermediate
// overflow until the result itself overflows
inline double map_eval(int b, double x) {
  return std::expm1(b * std::log1p(x)) / b;
}

inline void check_nonnegative(double x, const char* op) {
  if (!(x >= 0.0)) throw ValidationError(std::string(op) + ": x must be >= 0, got " + fmt17(x));
}

inline double clamp_cap(double v) {
  if (!(v < kDivergenceCap)) return kDivergenceCap;  // catches inf and nan-free overflow
  return v;
}

}  // namespace

double var_map(const MapParams& p, double x) {
  p.validate();
  check_nonnegative(x, "var_map");
  return map_eval(p.b, x);
}

double var_map_hat(const MapParams& p, double x) {
  p.validate();
  check_nonnegative(x, "var_map_hat");
  return x + 0.5 * (p.b - 1) * x * x;
}

double var_map_tilde(const MapParams& p, double x) {
  p.validate();
  check_nonnegative(x, "var_map_tilde");
  return x + 0.5 * (p.b - 1) * x * x +
         (static_cast<double>(p.b - 1) * (p.b - 2) / 6.0) * x * x * x;
}

MapTrajectory iterate_map(const MapParams& p, double x0, std::int64_t k) {
  p.validate();
  check_nonnegative(x0, "iterate_map");
  if (k < 0) throw ValidationError("iterate_map: k must be >= 0, got " + std::to_string(k));
  MapTrajectory t;
  t.values.reserve(static_cast<std::size_t>(k) + 1);
  double x = x0;
  for (std::int64_t i = 0; i <= k; ++i) {
    if (t.diverged_at < 0 && !(x < kDivergenceCap)) t.diverged_at = i;
    if (t.diverged_at >= 0) {
      t.values.push_back(kDivergenceCap);
      continue;
    }
    t.values.push_back(x);
    if (i < k) x = map_eval(p.b, x);
  }
  return t;
}

MapIterate iterate_map_final(const MapParams& p, double x0, std::int64_t k) {
  p.validate();
  check_nonnegative(x0, "iterate_map_final");
  if (k < 0) throw ValidationError("iterate_map_final: k must be >= 0, got " + std::to_string(k));
  double x = x0;
  for (std::int64_t i = 0; i < k; ++i) {
    if (!(x < kDivergenceCap)) return {kDivergenceCap, i};
    x = map_eval(p.b, x);
  }
  if (!(x < kDivergenceCap)) return {kDivergenceCap, k};
  return {x, -1};
}

double map_derivative_product(const MapParams& p, double x0, std::int64_t j) {
  p.validate();
  check_nonnegative(x0, "map_derivative_product");
  if (j < 0) throw ValidationError("map_derivative_product: j must be >= 0");
  double log_sum = 0.0;
  double x = x0;
  for (std::int64_t i = 0; i < j; ++i) {
    log_sum += (p.b - 1) * std::log1p(x);
    x = map_eval(p.b, x);
  }
  return std::exp(log_sum);
}

std::vector<MapDerivativeSample> iterate_log_derivative(const MapParams& p, double x0,
                                                        std::vector<std::int64_t> steps) {
  p.validate();
  check_nonnegative(x0, "iterate_log_derivative");
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  if (!steps.empty() && steps.front() < 0) {
    throw ValidationError("iterate_log_derivative: steps must be >= 0");
  }
  std::vector<MapDerivativeSample> out;
  out.reserve(steps.size());
  double x = x0;
  double log_sum = 0.0;
  std::int64_t i = 0;
  for (std::int64_t target : steps) {
    for (; i < target; ++i) {
      log_sum += (p.b - 1) * std::log1p(x);
      x = map_eval(p.b, x);
    }
    out.push_back({target, x, log_sum});
  }
  return out;
}

namespace {

MomentState make_state(std::int64_t level, double rho2, double rho3, double rho4) {
  MomentState st;
  st.level = level;
  st.rho2 = rho2;
  st.rho3 = rho3;
  st.rho4 = rho4;
  st.mu = {1.0, 1.0 + rho2, 1.0 + 3.0 * rho2 + rho3, 1.0 + 6.0 * rho2 + 4.0 * rho3 + rho4};
  return st;
}

}  // namespace

MomentTrajectory moment_recursion_central(const MapParams& p, double rho2, double rho3,
                                          double rho4, std::int64_t k) {
  p.validate();
  if (k < 0) throw ValidationError("moment_recursion: k must be >= 0, got " + std::to_string(k));
  if (!(rho2 >= 0.0)) {
    throw ValidationError("moment_recursion: rho2 must be >= 0, got " + fmt17(rho2));
  }
  if (!(rho4 >= rho2 * rho2)) {
    throw ValidationError("moment_recursion: rho4 must be >= rho2^2 (got rho4 = " + fmt17(rho4) +
                          ", rho2 = " + fmt17(rho2) + ")");
  }
  if (!std::isfinite(rho3)) throw ValidationError("moment_recursion: rho3 must be finite");
  // Channels saturate independently.  The second-moment channel advances by
  // exactly the same expression as iterate_map, so the two trajectories stay
  // bit-identical through saturation.  Higher channels explode earlier; once
  // one pins at the cap it is frozen there while the lower ones continue.
  bool sat2 = false, sat3 = false, sat4 = false;
  const double bd = static_cast<double>(p.b);
  MomentTrajectory t;
  t.levels.reserve(static_cast<std::size_t>(k) + 1);
  for (std::int64_t lvl = 0; lvl <= k; ++lvl) {
    if (!sat2 && !(rho2 < kDivergenceCap)) sat2 = true;
    if (!sat3 && !(std::fabs(rho3) < kDivergenceCap)) sat3 = true;
    if (!sat4 && !(rho4 < kDivergenceCap)) sat4 = true;
    if (sat2) rho2 = kDivergenceCap;
    if (sat3) rho3 = std::signbit(rho3) ? -kDivergenceCap : kDivergenceCap;
    if (sat4) rho4 = kDivergenceCap;
    if ((sat2 || sat3 || sat4) && t.diverged_at < 0) t.diverged_at = lvl;
    t.levels.push_back(make_state(lvl, rho2, rho3, rho4));
    if (lvl == k) break;
    if (sat2 && sat3 && sat4) continue;

    // g_r = E[(1+R)^r] in terms of central moments; the branch product has
    // raw moments g_r^b, so its central moments are the alternating sums c_r
    // below; averaging b branches rescales them by b^{1-r}, and order four
    // picks up the 3 c2^2 term from pairs of distinct branches
    double g2m1 = sat2 ? kDivergenceCap : std::expm1(bd * std::log1p(rho2));
    double g3m1 = std::expm1(bd * std::log1p(3.0 * rho2 + rho3));
    double g4m1 = std::expm1(bd * std::log1p(6.0 * rho2 + 4.0 * rho3 + rho4));
    double g2c = std::min(g2m1, kDivergenceCap);
    double g3c = std::min(g3m1, kDivergenceCap);
    double g4c = std::min(g4m1, kDivergenceCap);
    if (!sat2) rho2 = g2m1 / bd;
    if (!sat3) rho3 = (g3c - 3.0 * g2c) / (bd * bd);
    if (!sat4) {
      double c2 = g2c;
      rho4 = (g4c - 4.0 * g3c + 6.0 * g2c) / (bd * bd * bd) +
             3.0 * (bd - 1.0) * c2 * c2 / (bd * bd * bd);
    }
  }
  return t;
}

MomentTrajectory moment_recursion(const MapParams& p, const std::array<double, 4>& mu,
                                  std::int64_t k) {
  if (mu[0] != 1.0) {
    throw ValidationError("moment_recursion: mu_1 must be 1, got " + fmt17(mu[0]));
  }
  if (!(mu[1] >= 1.0)) {
    throw ValidationError("moment_recursion: mu_2 must be >= 1, got " + fmt17(mu[1]));
  }
  if (!(mu[3] >= mu[1] * mu[1])) {
    throw ValidationError("moment_recursion: mu_4 must be >= mu_2^2");
  }
  double rho2 = mu[1] - 1.0;
  double rho3 = mu[2] - 3.0 * mu[1] + 2.0;
  double rho4 = mu[3] - 4.0 * mu[2] + 6.0 * mu[1] - 3.0;
  return moment_recursion_central(p, rho2, rho3, rho4, k);
}

std::vector<double> pool_variance_se(const MapParams& p, double rho2, double rho3, double rho4,
                                     std::int64_t k, std::int64_t size) {
  if (size < 2) {
    throw ValidationError("pool_variance_se: size must be >= 2, got " + std::to_string(size));
  }
  MomentTrajectory t = moment_recursion_central(p, rho2, rho3, rho4, k);
  double n = static_cast<double>(size);
  std::vector<double> se;
  se.reserve(t.levels.size());
  double svv = 0.0;
  for (const MomentState& st : t.levels) {
    if (st.level == 0) {
      svv = std::max(0.0, st.rho4 - st.rho2 * st.rho2) / n;
    } else {
      const MomentState& prev = t.levels[static_cast<std::size_t>(st.level - 1)];
      double dv = std::pow(1.0 + prev.rho2, p.b - 1);
      // var of (variance estimate - 2 rho2 * mean estimate), the residual
      // once the generation is rescaled to unit sample mean
      double fresh = st.rho4 - st.rho2 * st.rho2 - 4.0 * st.rho2 * st.rho3 +
                     4.0 * st.rho2 * st.rho2 * st.rho2;
      svv = dv * dv * svv + std::max(0.0, fresh) / n;
    }
    se.push_back(std::sqrt(svv));
  }
  return se;
}

std::int64_t gamma_level(int b, double beta, double tau, std::int64_t N) {
  double kb = kappa(b);
  double eb = eta(b);
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ValidationError("gamma_level: beta must be finite and > 0, got " + fmt17(beta));
  }
  if (!std::isfinite(tau)) throw ValidationError("gamma_level: tau must be finite");
  if (N < 1) throw ValidationError("gamma_level: N must be >= 1, got " + std::to_string(N));
  double x = 1.0 / (beta * beta);
  double sum = 0.0;
  for (std::int64_t j = 1; j <= N; ++j) {
    x = ell(x);
    sum += x;
  }
  double value = kb * kb / (beta * beta) - tau * kb * kb / beta + eb * sum;
  if (!(std::fabs(value) < 9e18)) {
    throw ComputeError("gamma_level: depth " + fmt17(value) + " does not fit an integer");
  }
  return static_cast<std::int64_t>(std::ceil(value));
}

double percolation_pc(int b, int s) {
  if (b < 2) throw ValidationError("percolation_pc: b must be >= 2, got " + std::to_string(b));
  if (s < 2) throw ValidationError("percolation_pc: s must be >= 2, got " + std::to_string(s));
  // g(p) = 1 - (1 - p^s)^b - p is negative on (0, pc), positive on (pc, 1)
  auto g = [&](double p) {
    return -std::expm1(b * std::log1p(-std::pow(p, s))) - p;
  };
  double lo = 0.5 / b;                                      // g(lo) < 0: 1-(1-u)^b <= b u
  double hi = 1.0 - std::pow(0.5 / std::pow(static_cast<double>(s), b), 1.0 / (b - 1));
  if (!(g(lo) < 0.0) || !(g(hi) > 0.0)) {
    throw ComputeError("percolation_pc: bracket failed for b = " + std::to_string(b) +
                       ", s = " + std::to_string(s));
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval at machine resolution
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  double p = 0.5 * (lo + hi);
  if (std::fabs(g(p)) > 1e-12) {
    throw ComputeError("percolation_pc: residual " + fmt17(std::fabs(g(p))) +
                       " above tolerance after bisection");
  }
  return p;
}

LimitPrediction predicted_limit(const ScalingSchedule& s) {
  s.validate();
  double eb = eta(s.b);
  // treat eps within relative 1e-12 of eta as exactly critical
  if (std::fabs(s.epsilon - eb) <= 1e-12 * std::max(1.0, eb)) {
    return {s.m + 1, upsilon(s.b, 0.0)};
  }
  if (s.epsilon > eb) {
    throw ValidationError("predicted_limit: eps = " + fmt17(s.epsilon) + " exceeds eta(b) = " +
                          fmt17(eb) + "; variance diverges and no Gaussian limit exists");
  }
  return {s.m, upsilon(s.b, s.epsilon)};
}

}  // namespace dpoly
