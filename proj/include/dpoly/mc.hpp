#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dpoly/disorder.hpp"
#include "dpoly/lattice.hpp"
#include "dpoly/rng.hpp"

namespace dpoly {

// Population of W_k samples evolved through the hierarchical recursion
// W' = (1/b) sum_{i=1}^{b} prod_{j=1}^{s} W_ij.
struct SamplePool {
  int b = 2;
  int s = 2;
  std::int64_t level = 0;
  double beta = 0.0;
  // sum over levels j <= level of s^-j log c_j, where c_j is the sample mean
  // divided out of generation j; converts pool log-values back to W_k units
  double log_shift = 0.0;
  std::vector<double> values;
};

// Level-0 pool of i.i.d. normalized weights.  threads = 0 picks the hardware
// count; the result is identical for every thread count.
SamplePool init_pool(const DisorderModel& model, double beta, std::int64_t size,
                     const RngSpec& rng, int b = 2, int s = 2, int threads = 0);

// One recursion level: every offspring combines b*s uniform draws (with
// replacement) from the previous generation.  Products switch to log space
// when any factor leaves [1e-6, 1e6]; the outer sum then uses log-sum-exp.
// The finished generation is rescaled to unit sample mean and the factor
// folded into log_shift; without this the pool mean's relative error
// doubles per level and any finite pool collapses near level log2(size)/2.
SamplePool advance_pool(const SamplePool& pool, const RngSpec& rng, int threads = 0);

// One exact draw of W_n: the recursion evaluated with fresh leaf weights.
double exact_sample_W(const LatticeParams& params, const DisorderModel& model, double beta,
                      std::mt19937_64& rng);

struct PartitionValue {
  double Z = 0.0;
  double W = 0.0;
};

// Z_n by direct summation over all directed paths, W_n = Z_n e^{-s^n lambda}.
// omega holds one disorder value per edge in edge_index order.
PartitionValue enumeration_partition(const LatticeParams& params, const DisorderModel& model,
                                     double beta, const std::vector<double>& omega,
                                     std::int64_t cap = kDefaultEnumerationCap);

// The same quantities through the subgraph recursion
// W(g) = (1/b) sum_i prod_j W(g x (i,j)) on one fixed edge assignment.
// Kept as an independent code path from enumeration_partition; the two are
// cross-checked against each other in tests.
PartitionValue recursive_partition(const LatticeParams& params, const DisorderModel& model,
                                   double beta, const std::vector<double>& omega);

struct FluctuationStats {
  std::int64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
  double se_skewness = 0.0;
  double se_excess_kurtosis = 0.0;
  double ks_statistic_vs_normal = 0.0;  // against N(0, sample variance)
};

// Moments and KS distance of {scale * (w - 1) : w in pool}.
FluctuationStats fluct_stats(const SamplePool& pool, double scale);

// Mean, unbiased variance, and central sample moments of the raw pool
// values.  m2..m4 estimate rho_{k,2..4} since E[W_k] = 1.
struct PoolSummary {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double m2 = 0.0;        // central moments about the sample mean
  double m3 = 0.0;
  double m4 = 0.0;
};
PoolSummary pool_summary(const SamplePool& pool);

struct FreeEnergyGap {
  double lambda = 0.0;
  double p_hat = 0.0;
  double gap = 0.0;
  double se = 0.0;
};

// gap = lambda(beta) - p_hat_k, with p_hat_k read off the pool as
// (mean of log w)/s^k + log_shift at its current level k.  Requires b = s.
FreeEnergyGap gap_from_pool(const SamplePool& pool, const DisorderModel& model);

// Runs a fresh pool out to level n and reports the gap there.
FreeEnergyGap free_energy_gap(const LatticeParams& params, const DisorderModel& model,
                              double beta, std::int64_t pool_size, const RngSpec& rng,
                              int threads = 0);

}  // namespace dpoly
