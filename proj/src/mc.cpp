#include "dpoly/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace dpoly {

namespace {

constexpr double kDirectLo = 1e-6;
constexpr double kDirectHi = 1e6;

// (1/b) sum_{i<b} prod_{j<s} w[i*s+j], switching to log space when any
// factor leaves the direct-product window
double combine_offspring(const double* w, int b, int s) {
  bool direct = true;
  for (int i = 0; i < b * s; ++i) {
    if (!(w[i] >= kDirectLo && w[i] <= kDirectHi)) {
      direct = false;
      break;
    }
  }
  if (direct) {
    double sum = 0.0;
    for (int i = 0; i < b; ++i) {
      double prod = 1.0;
      for (int j = 0; j < s; ++j) prod *= w[i * s + j];
      sum += prod;
    }
    return sum / b;
  }
  double lmax = -std::numeric_limits<double>::infinity();
  double logs[64];
  std::vector<double> logs_heap;
  double* lp = logs;
  if (b > 64) {
    logs_heap.resize(static_cast<std::size_t>(b));
    lp = logs_heap.data();
  }
  for (int i = 0; i < b; ++i) {
    double l = 0.0;
    for (int j = 0; j < s; ++j) l += std::log(w[i * s + j]);
    lp[i] = l;
    lmax = std::max(lmax, l);
  }
  // every branch product underflowed to zero
  if (lmax == -std::numeric_limits<double>::infinity()) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < b; ++i) acc += std::exp(lp[i] - lmax);
  return std::exp(lmax + std::log(acc) - std::log(static_cast<double>(b)));
}

// Runs per_block(block_index) over ceil(count/kPoolBlockSize) blocks,
// optionally across threads.  Blocks own disjoint output ranges, so the
// result never depends on scheduling.
template <typename F>
void run_blocks(std::int64_t count, int threads, F&& per_block) {
  std::int64_t nblocks = (count + kPoolBlockSize - 1) / kPoolBlockSize;
  if (nblocks <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = static_cast<int>(std::min<std::int64_t>(workers, nblocks));
  if (workers == 1) {
    for (std::int64_t blk = 0; blk < nblocks; ++blk) per_block(blk);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::int64_t blk = next.fetch_add(1);
        if (blk >= nblocks) break;
        per_block(blk);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

SamplePool init_pool(const DisorderModel& model, double beta, std::int64_t size,
                     const RngSpec& rng, int b, int s, int threads) {
  model.validate();
  if (size < 10) throw ValidationError("pool: size must be >= 10, got " + std::to_string(size));
  if (b < 2 || s < 2) throw ValidationError("pool: b and s must be >= 2");
  if (!std::isfinite(beta)) throw ValidationError("pool: beta must be finite");
  SamplePool pool;
  pool.b = b;
  pool.s = s;
  pool.level = 0;
  pool.beta = beta;
  pool.values.resize(static_cast<std::size_t>(size));
  double* out = pool.values.data();
  run_blocks(size, threads, [&](std::int64_t blk) {
    auto eng = substream({rng.seed, 0, static_cast<std::uint64_t>(blk)});
    std::int64_t lo = blk * kPoolBlockSize;
    std::int64_t hi = std::min(size, lo + kPoolBlockSize);
    for (std::int64_t i = lo; i < hi; ++i) {
      out[i] = normalized_weight(model, beta, sample(model, eng));
    }
  });
  return pool;
}

SamplePool advance_pool(const SamplePool& pool, const RngSpec& rng, int threads) {
  if (pool.values.empty()) throw ValidationError("pool: cannot advance an empty pool");
  std::int64_t size = static_cast<std::int64_t>(pool.values.size());
  SamplePool next;
  next.b = pool.b;
  next.s = pool.s;
  next.level = pool.level + 1;
  next.beta = pool.beta;
  next.values.resize(pool.values.size());
  const double* prev = pool.values.data();
  double* out = next.values.data();
  const int b = pool.b, s = pool.s;
  run_blocks(size, threads, [&](std::int64_t blk) {
    auto eng = substream({rng.seed, static_cast<std::uint64_t>(next.level),
                          static_cast<std::uint64_t>(blk)});
    std::uniform_int_distribution<std::int64_t> pick(0, size - 1);
    std::vector<double> draw(static_cast<std::size_t>(b) * s);
    std::int64_t lo = blk * kPoolBlockSize;
    std::int64_t hi = std::min(size, lo + kPoolBlockSize);
    for (std::int64_t i = lo; i < hi; ++i) {
      for (auto& d : draw) d = prev[pick(eng)];
      out[i] = combine_offspring(draw.data(), b, s);
    }
  });
  long double total = 0.0L;
  for (double w : next.values) total += w;
  double mean = static_cast<double>(total / size);
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw ComputeError("pool: generation mean left (0, inf) at level " +
                       std::to_string(next.level) + "; beta too large for this depth");
  }
  double inv = 1.0 / mean;
  for (double& w : next.values) w *= inv;
  next.log_shift = pool.log_shift + std::log(mean) * std::pow(static_cast<double>(pool.s),
                                                              -static_cast<double>(next.level));
  return next;
}

namespace {

double sample_w_rec(int depth, const LatticeParams& p, const DisorderModel& model, double beta,
                    std::mt19937_64& rng) {
  if (depth == 0) return normalized_weight(model, beta, sample(model, rng));
  std::vector<double> buf(static_cast<std::size_t>(p.b) * p.s);
  for (auto& v : buf) v = sample_w_rec(depth - 1, p, model, beta, rng);
  return combine_offspring(buf.data(), p.b, p.s);
}

}  // namespace

double exact_sample_W(const LatticeParams& params, const DisorderModel& model, double beta,
                      std::mt19937_64& rng) {
  params.validate();
  model.validate();
  if (!std::isfinite(beta)) throw ValidationError("exact_sample_W: beta must be finite");
  if (edge_count(params) > BigInt(100'000'000)) {
    throw ComputeError("exact_sample_W: depth " + std::to_string(params.n) + " has " +
                       edge_count(params).str() + " edges, over the 10^8 limit");
  }
  return sample_w_rec(params.n, params, model, beta, rng);
}

PartitionValue enumeration_partition(const LatticeParams& params, const DisorderModel& model,
                                     double beta, const std::vector<double>& omega,
                                     std::int64_t cap) {
  params.validate();
  model.validate();
  BigInt edges = edge_count(params);
  if (BigInt(static_cast<std::int64_t>(omega.size())) != edges) {
    throw ValidationError("oracle: got " + std::to_string(omega.size()) +
                          " edge values, lattice has " + edges.str());
  }
  PathEnumerator en(params, cap);  // rejects over-cap path counts
  DirectedPath path;
  double lmax = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  std::int64_t count = 0;
  while (en.next(path)) {
    double h = 0.0;
    for (const EdgeId& e : path_edges(path, params)) {
      h += omega[static_cast<std::size_t>(edge_index(e, params))];
    }
    double l = beta * h;
    if (l > lmax) {
      acc = acc * std::exp(lmax - l) + 1.0;
      lmax = l;
    } else {
      acc += std::exp(l - lmax);
    }
    ++count;
  }
  double log_z = lmax + std::log(acc) - std::log(static_cast<double>(count));
  double edges_per_path = std::pow(static_cast<double>(params.s), params.n);
  return {std::exp(log_z), std::exp(log_z - edges_per_path * log_mgf(model, beta))};
}

namespace {

double partition_rec(int depth, std::int64_t prefix, const LatticeParams& p,
                     const std::vector<double>& omega, double beta, double lmgf) {
  if (depth == 0) {
    return std::exp(beta * omega[static_cast<std::size_t>(prefix)] - lmgf);
  }
  std::vector<double> buf(static_cast<std::size_t>(p.b) * p.s);
  for (int i = 0; i < p.b; ++i) {
    for (int j = 0; j < p.s; ++j) {
      std::int64_t child = prefix * (static_cast<std::int64_t>(p.b) * p.s) +
                           static_cast<std::int64_t>(i) * p.s + j;
      buf[static_cast<std::size_t>(i) * p.s + j] = partition_rec(depth - 1, child, p, omega,
                                                                 beta, lmgf);
    }
  }
  return combine_offspring(buf.data(), p.b, p.s);
}

}  // namespace

PartitionValue recursive_partition(const LatticeParams& params, const DisorderModel& model,
                                   double beta, const std::vector<double>& omega) {
  params.validate();
  model.validate();
  BigInt edges = edge_count(params);
  if (BigInt(static_cast<std::int64_t>(omega.size())) != edges) {
    throw ValidationError("oracle: got " + std::to_string(omega.size()) +
                          " edge values, lattice has " + edges.str());
  }
  double lmgf = log_mgf(model, beta);
  double w = partition_rec(params.n, 0, params, omega, beta, lmgf);
  double edges_per_path = std::pow(static_cast<double>(params.s), params.n);
  return {w * std::exp(edges_per_path * lmgf), w};
}

PoolSummary pool_summary(const SamplePool& pool) {
  const auto& v = pool.values;
  std::int64_t n = static_cast<std::int64_t>(v.size());
  if (n < 2) throw ValidationError("pool: summary needs at least 2 samples");
  long double sum = 0.0L;
  for (double w : v) sum += w;
  long double mean = sum / n;
  long double s2 = 0.0L, s3 = 0.0L, s4 = 0.0L;
  for (double w : v) {
    long double d = w - mean;
    long double d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  PoolSummary out;
  out.mean = static_cast<double>(mean);
  out.variance = static_cast<double>(s2 / (n - 1));
  out.m2 = static_cast<double>(s2 / n);
  out.m3 = static_cast<double>(s3 / n);
  out.m4 = static_cast<double>(s4 / n);
  return out;
}

FluctuationStats fluct_stats(const SamplePool& pool, double scale) {
  const auto& v = pool.values;
  std::int64_t n = static_cast<std::int64_t>(v.size());
  if (n < 1000) {
    throw ValidationError("fluct_stats: need at least 1000 samples, got " + std::to_string(n));
  }
  std::vector<double> x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) x[i] = scale * (v[i] - 1.0);
  long double sum = 0.0L;
  for (double t : x) sum += t;
  long double mean = sum / n;
  long double s2 = 0.0L, s3 = 0.0L, s4 = 0.0L;
  for (double t : x) {
    long double d = t - mean;
    long double d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  double m2 = static_cast<double>(s2 / n);
  double m3 = static_cast<double>(s3 / n);
  double m4 = static_cast<double>(s4 / n);
  FluctuationStats st;
  st.count = n;
  st.mean = static_cast<double>(mean);
  st.variance = static_cast<double>(s2 / (n - 1));
  st.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  st.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  st.se_mean = std::sqrt(st.variance / n);
  st.se_variance = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  st.se_skewness = std::sqrt(6.0 / n);
  st.se_excess_kurtosis = std::sqrt(24.0 / n);
  if (m2 > 0.0) {
    std::sort(x.begin(), x.end());
    double sigma = std::sqrt(st.variance);
    double d_max = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double cdf = 0.5 * std::erfc(-x[static_cast<std::size_t>(i)] / (sigma * std::sqrt(2.0)));
      double above = (i + 1.0) / n - cdf;
      double below = cdf - static_cast<double>(i) / n;
      d_max = std::max({d_max, above, below});
    }
    st.ks_statistic_vs_normal = d_max;
  }
  return st;
}

FreeEnergyGap gap_from_pool(const SamplePool& pool, const DisorderModel& model) {
  if (pool.b != pool.s) {
    throw ValidationError("free_energy_gap: requires b = s, got b = " + std::to_string(pool.b) +
                          ", s = " + std::to_string(pool.s));
  }
  if (pool.values.size() < 2) throw ValidationError("free_energy_gap: pool too small");
  long double sum = 0.0L, sum2 = 0.0L;
  for (double w : pool.values) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ComputeError("free_energy_gap: pool sample left (0, inf) at level " +
                         std::to_string(pool.level) + "; beta too large for this depth");
    }
    double l = std::log(w);
    sum += l;
    sum2 += static_cast<long double>(l) * l;
  }
  std::int64_t p = static_cast<std::int64_t>(pool.values.size());
  long double mean = sum / p;
  long double var = (sum2 - static_cast<long double>(p) * mean * mean) / (p - 1);
  double sn = std::pow(static_cast<double>(pool.s), static_cast<double>(pool.level));
  double logw = static_cast<double>(mean) / sn + pool.log_shift;
  FreeEnergyGap out;
  out.lambda = log_mgf(model, pool.beta);
  out.p_hat = out.lambda + logw;
  out.gap = 0.0 - logw;
  out.se = std::sqrt(std::max(0.0L, var) / p) / sn;
  return out;
}

FreeEnergyGap free_energy_gap(const LatticeParams& params, const DisorderModel& model,
                              double beta, std::int64_t pool_size, const RngSpec& rng,
                              int threads) {
  params.validate();
  if (params.b != params.s) {
    throw ValidationError("free_energy_gap: requires b = s, got b = " + std::to_string(params.b) +
                          ", s = " + std::to_string(params.s));
  }
  if (params.n < 1) throw ValidationError("free_energy_gap: n must be >= 1");
  SamplePool pool = init_pool(model, beta, pool_size, rng, params.b, params.s, threads);
  for (int k = 0; k < params.n; ++k) pool = advance_pool(pool, rng, threads);
  return gap_from_pool(pool, model);
}

}  // namespace dpoly
