#include "dpoly/lattice.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dpoly {

void LatticeParams::validate() const {
  if (b < 2) throw ValidationError("lattice: b must be >= 2, got " + std::to_string(b));
  if (s < 2) throw ValidationError("lattice: s must be >= 2, got " + std::to_string(s));
  if (n < 0) throw ValidationError("lattice: n must be >= 0, got " + std::to_string(n));
}

BigInt edge_count(const LatticeParams& p) {
  p.validate();
  return boost::multiprecision::pow(BigInt(p.b) * p.s, static_cast<unsigned>(p.n));
}

BigInt path_count(const LatticeParams& p) {
  p.validate();
  BigInt exponent = (boost::multiprecision::pow(BigInt(p.s), static_cast<unsigned>(p.n)) - 1) / (p.s - 1);
  if (exponent > 1'000'000'000) {
    throw ComputeError("lattice: path count exponent " + exponent.str() +
                       " too large to materialize");
  }
  return boost::multiprecision::pow(BigInt(p.b), static_cast<unsigned>(exponent));
}

double log10_path_count(const LatticeParams& p) {
  p.validate();
  // (s^n - 1)/(s - 1) * log10(b); the exponent fits a double far beyond any
  // enumerable size
  double exponent = (std::pow(static_cast<double>(p.s), p.n) - 1.0) / (p.s - 1);
  return exponent * std::log10(static_cast<double>(p.b));
}

std::int64_t choice_slot_count(const LatticeParams& p) {
  p.validate();
  std::int64_t slots = 0;
  for (int k = 0; k < p.n; ++k) {
    if (slots > (std::numeric_limits<std::int64_t>::max() - 1) / p.s) {
      throw ComputeError("lattice: choice slot count overflows at depth " + std::to_string(p.n));
    }
    slots = 1 + static_cast<std::int64_t>(p.s) * slots;
  }
  return slots;
}

PathEnumerator::PathEnumerator(const LatticeParams& p, std::int64_t cap) : params_(p) {
  p.validate();
  BigInt total = path_count(p);
  if (total > cap) {
    throw ComputeError("lattice: enumeration cap " + std::to_string(cap) +
                       " exceeded: " + total.str() + " paths");
  }
  slots_ = choice_slot_count(p);
  current_.assign(static_cast<std::size_t>(slots_), 1);
}

bool PathEnumerator::next(DirectedPath& out) {
  if (done_) return false;
  if (!started_) {
    started_ = true;
    out.choices = current_;
    return true;
  }
  // mixed-radix increment, base b per slot, last slot least significant
  for (std::int64_t i = slots_ - 1; i >= 0; --i) {
    if (current_[static_cast<std::size_t>(i)] < params_.b) {
      ++current_[static_cast<std::size_t>(i)];
      out.choices = current_;
      return true;
    }
    current_[static_cast<std::size_t>(i)] = 1;
  }
  done_ = true;
  return false;
}

namespace {

// Preorder walk: emit the s^depth edges under the slot at `pos`, each
// prefixed by the (branch, segment) pairs accumulated so far.
void collect_edges(const std::vector<int>& choices, const LatticeParams& p, int depth,
                   std::size_t& pos, std::vector<std::pair<int, int>>& prefix,
                   std::vector<EdgeId>& out) {
  if (depth == 0) {
    out.push_back(EdgeId{prefix});
    return;
  }
  int branch = choices[pos++];
  for (int j = 1; j <= p.s; ++j) {
    prefix.emplace_back(branch, j);
    collect_edges(choices, p, depth - 1, pos, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<EdgeId> path_edges(const DirectedPath& path, const LatticeParams& p) {
  p.validate();
  std::int64_t slots = choice_slot_count(p);
  if (static_cast<std::int64_t>(path.choices.size()) != slots) {
    throw ValidationError("lattice: path has " + std::to_string(path.choices.size()) +
                          " choice slots, depth " + std::to_string(p.n) + " needs " +
                          std::to_string(slots));
  }
  for (int c : path.choices) {
    if (c < 1 || c > p.b) {
      throw ValidationError("lattice: path choice " + std::to_string(c) + " outside [1, " +
                            std::to_string(p.b) + "]");
    }
  }
  std::vector<EdgeId> out;
  out.reserve(static_cast<std::size_t>(std::llround(std::pow(p.s, p.n))));
  std::size_t pos = 0;
  std::vector<std::pair<int, int>> prefix;
  prefix.reserve(static_cast<std::size_t>(p.n));
  collect_edges(path.choices, p, p.n, pos, prefix, out);
  return out;
}

double expected_shared_edges(const LatticeParams& p) {
  p.validate();
  double e = 1.0;
  for (int k = 0; k < p.n; ++k) e *= static_cast<double>(p.s) / p.b;
  return e;
}

DirectedPath sample_path(const LatticeParams& p, std::mt19937_64& rng) {
  std::int64_t slots = choice_slot_count(p);
  std::uniform_int_distribution<int> branch(1, p.b);
  DirectedPath path;
  path.choices.resize(static_cast<std::size_t>(slots));
  for (auto& c : path.choices) c = branch(rng);
  return path;
}

std::int64_t edge_index(const EdgeId& e, const LatticeParams& p) {
  p.validate();
  if (static_cast<int>(e.address.size()) != p.n) {
    throw ValidationError("lattice: edge address length " + std::to_string(e.address.size()) +
                          " does not match depth " + std::to_string(p.n));
  }
  std::int64_t idx = 0;
  for (const auto& [i, j] : e.address) {
    if (i < 1 || i > p.b || j < 1 || j > p.s) {
      throw ValidationError("lattice: edge address pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range");
    }
    idx = idx * (static_cast<std::int64_t>(p.b) * p.s) +
          (static_cast<std::int64_t>(i - 1) * p.s + (j - 1));
  }
  return idx;
}

EdgeId edge_from_index(std::int64_t index, const LatticeParams& p) {
  p.validate();
  BigInt total = edge_count(p);
  if (index < 0 || BigInt(index) >= total) {
    throw ValidationError("lattice: edge index " + std::to_string(index) + " outside [0, " +
                          total.str() + ")");
  }
  EdgeId e;
  e.address.resize(static_cast<std::size_t>(p.n));
  std::int64_t base = static_cast<std::int64_t>(p.b) * p.s;
  for (int k = p.n - 1; k >= 0; --k) {
    std::int64_t digit = index % base;
    index /= base;
    e.address[static_cast<std::size_t>(k)] = {static_cast<int>(digit / p.s) + 1,
                                              static_cast<int>(digit % p.s) + 1};
  }
  return e;
}

}  // namespace dpoly
