#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dpoly/common.hpp"

namespace dpoly {

// Parameters of the variance map M(x) = ((1+x)^b - 1)/b.
struct MapParams {
  int b = 2;

  void validate() const;
};

// Inverse-temperature schedule beta_n = kappa/sqrt(n) - tau kappa^2/(2n)
//   + (kappa/(2 n^{3/2})) (eta * sum_{k=1}^{m-1} ell^k(n) + epsilon * ell^m(n)).
struct ScalingSchedule {
  int b = 2;
  int m = 1;
  double epsilon = 0.0;
  double tau = 0.0;

  void validate() const;
};

double kappa(int b);    // (2/(b-1))^{1/2}
double eta(int b);      // (b+1)/(3(b-1))
double upsilon(int b, double epsilon);  // kappa^2/(eta - epsilon), epsilon < eta

// ell(x) = log(1+x) - log log(1+x) for x > 0, and its m-fold composition.
// ell(x) >= 1 for every x > 0, so compositions never leave the domain.
double ell(double x);
double ell_m(double x, int m);

double beta_schedule(const ScalingSchedule& s, std::int64_t n);

double var_map(const MapParams& p, double x);
double var_map_hat(const MapParams& p, double x);    // x + ((b-1)/2) x^2
double var_map_tilde(const MapParams& p, double x);  // hat + ((b-1)(b-2)/6) x^3

// Full iterate sequence [x0, M(x0), ..., M^k(x0)].  Once an iterate exceeds
// the divergence cap, the remaining entries are pinned to the cap and
// diverged_at records the first saturated index; -1 means never.
struct MapTrajectory {
  std::vector<double> values;
  std::int64_t diverged_at = -1;
};
MapTrajectory iterate_map(const MapParams& p, double x0, std::int64_t k);

// Last iterate only, for long runs where the trajectory is not needed.
struct MapIterate {
  double value = 0.0;
  std::int64_t diverged_at = -1;
};
MapIterate iterate_map_final(const MapParams& p, double x0, std::int64_t k);

// prod_{i=0}^{j-1} M'(M^i(x0)) with M'(x) = (1+x)^{b-1}; the chain-rule
// derivative of M^j at x0.
double map_derivative_product(const MapParams& p, double x0, std::int64_t j);

// Single pass over a long iterate run recording, at each requested step k,
// the iterate x_k and the running sum S_k = sum_{i<k} log M'(x_i).  The
// derivative of M^{j-k} at x_k is then exp(S_j - S_k) for k <= j.
struct MapDerivativeSample {
  std::int64_t k = 0;
  double x = 0.0;
  double log_deriv_sum = 0.0;
};
std::vector<MapDerivativeSample> iterate_log_derivative(const MapParams& p, double x0,
                                                        std::vector<std::int64_t> steps);

// Deterministic raw and central moments of W_k up to order four, advanced
// level by level through the b-branch, b-segment recursion
// W' = (1/b) sum_i prod_j W_ij.
struct MomentState {
  std::int64_t level = 0;
  std::array<double, 4> mu{1.0, 1.0, 1.0, 1.0};  // raw moments of W_k
  double rho2 = 0.0;                             // central moments of W_k
  double rho3 = 0.0;
  double rho4 = 0.0;
};
// diverged_at is the first level at which any channel saturated at the
// divergence cap; -1 means never.  A saturated channel is pinned at the cap
// while lower-order channels keep advancing, so the rho2 column matches
// iterate_map bit for bit at every level.
struct MomentTrajectory {
  std::vector<MomentState> levels;
  std::int64_t diverged_at = -1;
};

// Raw-moment entry point; mu = (mu_1, .., mu_4) of W_0 with mu_1 = 1.
MomentTrajectory moment_recursion(const MapParams& p, const std::array<double, 4>& mu,
                                  std::int64_t k);
// Cancellation-free entry point seeded with central moments of W_0 - 1,
// e.g. from w0_central_moments.
MomentTrajectory moment_recursion_central(const MapParams& p, double rho2, double rho3,
                                          double rho4, std::int64_t k);

// First-order standard errors of a size-N sample pool's variance estimate
// at levels 0..k, seeded like moment_recursion_central.  Each level carries
// the sampling noise of its own centered moments plus the parent
// generation's error propagated through the map derivative; the cross term
// accounts for the pool's unit-mean rescaling.
std::vector<double> pool_variance_se(const MapParams& p, double rho2, double rho3, double rho4,
                                     std::int64_t k, std::int64_t size);

// Depth ceil(kappa^2/beta^2 - tau kappa^2/beta + eta sum_{j=1}^N ell^j(1/beta^2)).
std::int64_t gamma_level(int b, double beta, double tau, std::int64_t N);

// Unique fixed point in (0,1) of p -> 1 - (1 - p^s)^b, |residual| <= 1e-12.
double percolation_pc(int b, int s);

// Gaussian-limit prediction for a schedule: scale exponent m* and variance v
// such that sqrt(ell^{m*}(n)) (W_n - 1) has limiting variance v.  At the
// critical epsilon = eta the schedule is rerouted to (m+1, 0) first.
struct LimitPrediction {
  int m_star = 1;
  double variance = 0.0;
};
LimitPrediction predicted_limit(const ScalingSchedule& s);

}  // namespace dpoly
