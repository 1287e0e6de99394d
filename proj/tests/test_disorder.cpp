#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "dpoly/disorder.hpp"

using namespace dpoly;

namespace {

const DisorderModel kGauss = DisorderModel::parse("gaussian");
const DisorderModel kRade = DisorderModel::parse("rademacher");
const DisorderModel kSkew = DisorderModel::parse("twopoint:p=0.2");

}  // namespace

TEST_CASE("model names parse and round-trip") {
  CHECK(kGauss.kind == DisorderModel::Kind::Gaussian);
  CHECK(kRade.kind == DisorderModel::Kind::Rademacher);
  CHECK(kSkew.kind == DisorderModel::Kind::TwoPoint);
  CHECK(kSkew.p == 0.2);

  CHECK(kGauss.name() == "gaussian");
  CHECK(kRade.name() == "rademacher");
  CHECK(DisorderModel::parse(kSkew.name()).p == kSkew.p);

  CHECK_THROWS_AS(DisorderModel::parse("poisson"), ValidationError);
  CHECK_THROWS_AS(DisorderModel::parse("twopoint:p=0.2x"), ValidationError);
  CHECK_THROWS_AS(DisorderModel::parse("twopoint:p="), ValidationError);
  CHECK_THROWS_AS(DisorderModel::parse("twopoint:p=1.5"), ValidationError);
  CHECK_THROWS_AS(DisorderModel::parse("twopoint:p=0"), ValidationError);
  CHECK_THROWS_AS(DisorderModel::parse(""), ValidationError);
}

TEST_CASE("log moment generating functions match closed forms") {
  CHECK(log_mgf(kGauss, 1.0) == 0.5);
  CHECK(log_mgf(kGauss, 0.5) == 0.125);
  CHECK(log_mgf(kRade, 0.5) == doctest::Approx(0.12011450695827752).epsilon(1e-14));
  CHECK(log_mgf(kSkew, 0.5) == doctest::Approx(0.15417667275995305).epsilon(1e-14));

  SUBCASE("zero temperature is exactly zero") {
    CHECK(log_mgf(kGauss, 0.0) == 0.0);
    CHECK(log_mgf(kRade, 0.0) == 0.0);
    CHECK(log_mgf(kSkew, 0.0) == 0.0);
  }

  SUBCASE("large arguments stay finite") {
    // cosh saturates at e^|x|/2
    CHECK(log_mgf(kRade, 50.0) == doctest::Approx(50.0 - std::log(2.0)).epsilon(1e-14));
    CHECK(log_mgf(kRade, -700.0) == doctest::Approx(700.0 - std::log(2.0)).epsilon(1e-14));
    CHECK(std::isfinite(log_mgf(kGauss, 1e4)));
  }

  SUBCASE("non-finite temperatures are rejected") {
    CHECK_THROWS_AS(log_mgf(kGauss, std::numeric_limits<double>::infinity()), ValidationError);
    CHECK_THROWS_AS(log_mgf(kRade, std::nan("")), ValidationError);
  }
}

TEST_CASE("log mgf is convex and nonnegative") {
  const double h = 1e-3;
  for (const auto& m : {kGauss, kRade, kSkew, DisorderModel::parse("twopoint:p=0.7")}) {
    for (double beta = -3.0; beta <= 3.0; beta += 0.25) {
      double mid = log_mgf(m, beta);
      CHECK(mid >= -1e-15);
      double second = (log_mgf(m, beta + h) - 2.0 * mid + log_mgf(m, beta - h)) / (h * h);
      CHECK(second >= -1e-9);
    }
  }
}

TEST_CASE("normalized weights are tilted leaf factors") {
  CHECK(normalized_weight(kGauss, 0.0, 3.7) == 1.0);
  CHECK(normalized_weight(kRade, 0.0, -1.0) == 1.0);
  CHECK(normalized_weight(kGauss, 1.0, 0.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(normalized_weight(kRade, 0.5, 1.0) ==
        doctest::Approx(1.4621171572600098).epsilon(1e-14));
}

TEST_CASE("normalized weights have unit mean under sampling") {
  for (const auto& m : {kGauss, kRade, kSkew}) {
    std::mt19937_64 rng(2024);
    const std::int64_t n = 1000000;
    double beta = 0.5;
    long double sum = 0.0L;
    for (std::int64_t i = 0; i < n; ++i) {
      sum += normalized_weight(m, beta, sample(m, rng));
    }
    double mean = static_cast<double>(sum / n);
    double se = std::sqrt(rho0(m, beta) / n);
    CHECK(std::fabs(mean - 1.0) <= 4.0 * se);
  }
}

TEST_CASE("weight variance rho0 matches the mgf identity") {
  CHECK(rho0(kGauss, 0.5) == doctest::Approx(0.28402541668774148).epsilon(1e-14));
  CHECK(rho0(kRade, 0.5) == doctest::Approx(0.21355226703407259).epsilon(1e-14));
  CHECK(rho0(kGauss, 0.0) == 0.0);
  CHECK(rho0(kRade, 0.0) == 0.0);

  for (const auto& m : {kGauss, kRade, kSkew}) {
    for (double beta : {0.1, 0.5, 1.0}) {
      CHECK(w0_raw_moment(m, beta, 2) - 1.0 ==
            doctest::Approx(rho0(m, beta)).epsilon(1e-14));
    }
  }
}

TEST_CASE("raw moments of the leaf weight") {
  CHECK(w0_raw_moment(kGauss, 0.7, 1) == 1.0);
  CHECK(w0_raw_moment(kRade, 0.3, 1) == 1.0);
  CHECK(w0_raw_moment(kGauss, 0.5, 2) == doctest::Approx(std::exp(0.25)).epsilon(1e-14));
  CHECK(w0_raw_moment(kGauss, 0.5, 4) == doctest::Approx(4.4816890703380648).epsilon(1e-14));
  CHECK_THROWS_AS(w0_raw_moment(kGauss, 0.5, 0), ValidationError);
}

TEST_CASE("central moments of the leaf weight avoid cancellation") {
  auto c = w0_central_moments(kGauss, 0.5);
  CHECK(c[0] == doctest::Approx(0.28402541668774148).epsilon(1e-13));
  CHECK(c[1] == doctest::Approx(0.26492376654945022).epsilon(1e-13));
  CHECK(c[2] == doctest::Approx(0.71784150401381505).epsilon(1e-13));

  SUBCASE("agrees with the alternating raw-moment sums away from zero") {
    for (const auto& m : {kGauss, kRade, kSkew}) {
      double beta = 0.6;
      double m2 = w0_raw_moment(m, beta, 2);
      double m3 = w0_raw_moment(m, beta, 3);
      double m4 = w0_raw_moment(m, beta, 4);
      auto cm = w0_central_moments(m, beta);
      CHECK(cm[0] == doctest::Approx(m2 - 1.0).epsilon(1e-10));
      CHECK(cm[1] == doctest::Approx(m3 - 3.0 * m2 + 2.0).epsilon(1e-10));
      CHECK(cm[2] == doctest::Approx(m4 - 4.0 * m3 + 6.0 * m2 - 3.0).epsilon(1e-10));
    }
  }

  SUBCASE("second central moment is rho0 exactly") {
    for (double beta : {0.1, 0.5, 1.2}) {
      CHECK(w0_central_moments(kGauss, beta)[0] == rho0(kGauss, beta));
      CHECK(w0_central_moments(kSkew, beta)[0] == rho0(kSkew, beta));
    }
  }
}

TEST_CASE("third disorder moment picks out the skew") {
  CHECK(third_moment(kGauss) == 0.0);
  CHECK(third_moment(kRade) == 0.0);
  CHECK(third_moment(kSkew) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(third_moment(DisorderModel::parse("twopoint:p=0.5")) == 0.0);
}

TEST_CASE("samples land on the support") {
  SUBCASE("rademacher is a fair sign") {
    std::mt19937_64 rng(5);
    std::set<double> seen;
    long double sum = 0.0L;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      double x = sample(kRade, rng);
      CHECK((x == 1.0 || x == -1.0));
      seen.insert(x);
      sum += x;
    }
    CHECK(seen.size() == 2);
    CHECK(std::fabs(static_cast<double>(sum / n)) <= 4.0 / std::sqrt(n));
  }

  SUBCASE("two-point masses sit at the standardizing values") {
    std::mt19937_64 rng(6);
    const int n = 100000;
    int high = 0;
    for (int i = 0; i < n; ++i) {
      double x = sample(kSkew, rng);
      CHECK((x == 2.0 || x == -0.5));
      if (x == 2.0) ++high;
    }
    double freq = static_cast<double>(high) / n;
    CHECK(std::fabs(freq - 0.2) <= 4.0 * std::sqrt(0.16 / n));
  }

  SUBCASE("gaussian sampling is standardized") {
    std::mt19937_64 rng(7);
    const std::int64_t n = 1000000;
    long double s1 = 0.0L, s2 = 0.0L, s3 = 0.0L;
    for (std::int64_t i = 0; i < n; ++i) {
      long double x = sample(kGauss, rng);
      s1 += x;
      s2 += x * x;
      s3 += x * x * x;
    }
    double mean = static_cast<double>(s1 / n);
    double var = static_cast<double>(s2 / n) - mean * mean;
    double skew = static_cast<double>(s3 / n) - 3.0 * mean * var - mean * mean * mean;
    CHECK(std::fabs(mean) <= 4.0 / std::sqrt(n));
    CHECK(std::fabs(var - 1.0) <= 4.0 * std::sqrt(2.0 / n));
    CHECK(std::fabs(skew) <= 4.0 * std::sqrt(15.0 / n));
  }
}
