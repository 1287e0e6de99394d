#include "dpoly/disorder.hpp"

#include <cmath>

namespace dpoly {

void DisorderModel::validate() const {
  if (kind == Kind::TwoPoint && !(p > 0.0 && p < 1.0)) {
    throw ValidationError("disorder: twopoint p must lie in (0,1), got " + std::to_string(p));
  }
}

DisorderModel DisorderModel::parse(const std::string& text) {
  if (text == "gaussian") return {Kind::Gaussian, 0.5};
  if (text == "rademacher") return {Kind::Rademacher, 0.5};
  const std::string prefix = "twopoint:p=";
  if (text.rfind(prefix, 0) == 0) {
    double p;
    try {
      std::size_t used = 0;
      p = std::stod(text.substr(prefix.size()), &used);
      if (used != text.size() - prefix.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ValidationError("disorder: cannot parse p in '" + text + "'");
    }
    DisorderModel m{Kind::TwoPoint, p};
    m.validate();
    return m;
  }
  throw ValidationError("disorder: unknown model '" + text +
                        "' (expected gaussian, rademacher, or twopoint:p=<real>)");
}

std::string DisorderModel::name() const {
  switch (kind) {
    case Kind::Gaussian: return "gaussian";
    case Kind::Rademacher: return "rademacher";
    case Kind::TwoPoint: return "twopoint:p=" + fmt17(p);
  }
  return "?";
}

namespace {

// log(cosh x) without overflow for large |x|
double log_cosh(double x) {
  double a = std::fabs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

// log(p e^x + q e^y) with max factored out
double log_mix(double p, double x, double q, double y) {
  double hi = std::max(x, y);
  return hi + std::log(p * std::exp(x - hi) + q * std::exp(y - hi));
}

}  // namespace

double log_mgf(const DisorderModel& m, double beta) {
  m.validate();
  if (!std::isfinite(beta)) throw ValidationError("disorder: beta must be finite");
  if (beta == 0.0) return 0.0;
  switch (m.kind) {
    case DisorderModel::Kind::Gaussian:
      return 0.5 * beta * beta;
    case DisorderModel::Kind::Rademacher:
      return log_cosh(beta);
    case DisorderModel::Kind::TwoPoint: {
      double a = std::sqrt((1.0 - m.p) / m.p);
      double abar = -std::sqrt(m.p / (1.0 - m.p));
      return log_mix(m.p, beta * a, 1.0 - m.p, beta * abar);
    }
  }
  return 0.0;
}

double normalized_weight(const DisorderModel& m, double beta, double omega) {
  return std::exp(beta * omega - log_mgf(m, beta));
}

double rho0(const DisorderModel& m, double beta) {
  return std::expm1(log_mgf(m, 2.0 * beta) - 2.0 * log_mgf(m, beta));
}

double third_moment(const DisorderModel& m) {
  m.validate();
  switch (m.kind) {
    case DisorderModel::Kind::Gaussian:
    case DisorderModel::Kind::Rademacher:
      return 0.0;
    case DisorderModel::Kind::TwoPoint:
      return (1.0 - 2.0 * m.p) / std::sqrt(m.p * (1.0 - m.p));
  }
  return 0.0;
}

double w0_raw_moment(const DisorderModel& m, double beta, int r) {
  if (r < 1) throw ValidationError("disorder: moment order must be >= 1, got " + std::to_string(r));
  if (r == 1) return 1.0;
  return std::exp(log_mgf(m, r * beta) - r * log_mgf(m, beta));
}

std::array<double, 3> w0_central_moments(const DisorderModel& m, double beta) {
  // e_r = E[w^r] - 1 via expm1, so small-beta values keep full precision
  double l1 = log_mgf(m, beta);
  double e2 = std::expm1(log_mgf(m, 2.0 * beta) - 2.0 * l1);
  double e3 = std::expm1(log_mgf(m, 3.0 * beta) - 3.0 * l1);
  double e4 = std::expm1(log_mgf(m, 4.0 * beta) - 4.0 * l1);
  double rho2 = e2;
  double rho3 = e3 - 3.0 * e2;
  double rho4 = e4 - 4.0 * e3 + 6.0 * e2;
  return {rho2, rho3, rho4};
}

double sample(const DisorderModel& m, std::mt19937_64& rng) {
  m.validate();
  switch (m.kind) {
    case DisorderModel::Kind::Gaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      return normal(rng);
    }
    case DisorderModel::Kind::Rademacher: {
      return (rng() >> 63) ? 1.0 : -1.0;
    }
    case DisorderModel::Kind::TwoPoint: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      return unif(rng) < m.p ? std::sqrt((1.0 - m.p) / m.p) : -std::sqrt(m.p / (1.0 - m.p));
    }
  }
  return 0.0;
}

}  // namespace dpoly
