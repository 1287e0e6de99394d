#pragma once

#include <array>
#include <random>
#include <string>

#include "dpoly/common.hpp"

namespace dpoly {

// Edge-disorder law with mean 0, variance 1, and finite exponential moments.
// TwoPoint(p) takes sqrt((1-p)/p) with probability p and -sqrt(p/(1-p))
// otherwise; it is the skewed member of the family.
struct DisorderModel {
  enum class Kind { Gaussian, Rademacher, TwoPoint };

  Kind kind = Kind::Gaussian;
  double p = 0.5;  // TwoPoint only

  void validate() const;

  // Accepts "gaussian", "rademacher", "twopoint:p=<real>".
  static DisorderModel parse(const std::string& text);
  std::string name() const;
};

// lambda(beta) = log E[exp(beta * omega)], evaluated in closed form.
double log_mgf(const DisorderModel& m, double beta);

// exp(beta * omega - lambda(beta)); expectation 1 over omega.
double normalized_weight(const DisorderModel& m, double beta, double omega);

// Variance of the normalized weight: exp(lambda(2 beta) - 2 lambda(beta)) - 1.
double rho0(const DisorderModel& m, double beta);

// tau = E[omega^3].
double third_moment(const DisorderModel& m);

// E[(normalized weight)^r] = exp(lambda(r beta) - r lambda(beta)).
double w0_raw_moment(const DisorderModel& m, double beta, int r);

// Central moments of the normalized weight minus one, orders 2..4, computed
// without cancellation.  Seeds the level-0 state of the moment recursion.
std::array<double, 3> w0_central_moments(const DisorderModel& m, double beta);

double sample(const DisorderModel& m, std::mt19937_64& rng);

}  // namespace dpoly
