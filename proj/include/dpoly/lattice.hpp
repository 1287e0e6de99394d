#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "dpoly/common.hpp"

namespace dpoly {

using BigInt = boost::multiprecision::cpp_int;

// Recursive diamond graph D_n: starting from a single edge, every edge is
// repeatedly replaced by b parallel branches of s edges in series, n times.
struct LatticeParams {
  int b = 2;  // branches per replacement
  int s = 2;  // segments per branch
  int n = 0;  // recursion depth

  void validate() const;
};

// An edge of D_n is addressed by the replacement choices that produced it:
// one (branch, segment) pair per level, outermost first.
struct EdgeId {
  std::vector<std::pair<int, int>> address;  // 1-based pairs (i_k, j_k)

  bool operator==(const EdgeId& o) const { return address == o.address; }
};

// A directed path commits to one branch per replacement it traverses.  The
// choices form a tree: one branch index at the root, then s subtrees (one per
// segment of the chosen branch), down to depth n.  The tree is stored
// flattened in preorder: root choice first, then the slots of subtree 1,
// then subtree 2, and so on.  A depth-n path has (s^n - 1)/(s - 1) slots.
struct DirectedPath {
  std::vector<int> choices;  // 1-based branch indices, preorder
};

BigInt edge_count(const LatticeParams& p);
BigInt path_count(const LatticeParams& p);
double log10_path_count(const LatticeParams& p);

// Number of choice slots in a depth-n path: (s^n - 1)/(s - 1).
std::int64_t choice_slot_count(const LatticeParams& p);

inline constexpr std::int64_t kDefaultEnumerationCap = 10'000'000;

// Single-consumer stream over all directed paths of D_n, in mixed-radix
// order on the choice slots.  Throws ComputeError if path_count exceeds the
// cap before the first item is produced.
class PathEnumerator {
 public:
  PathEnumerator(const LatticeParams& p, std::int64_t cap = kDefaultEnumerationCap);

  // Writes the next path into `out`; returns false when exhausted.
  bool next(DirectedPath& out);

 private:
  LatticeParams params_;
  std::int64_t slots_;
  std::vector<int> current_;
  bool done_ = false;
  bool started_ = false;
};

// The s^n edges visited by a path, outermost choices first in each address.
std::vector<EdgeId> path_edges(const DirectedPath& path, const LatticeParams& p);

// Expected number of edges shared by two independent uniform paths.  Exact
// level recursion: E_n = (s/b) E_{n-1}, E_0 = 1.
double expected_shared_edges(const LatticeParams& p);

// Uniform draw over all directed paths.
DirectedPath sample_path(const LatticeParams& p, std::mt19937_64& rng);

// Canonical dense indexing of the (bs)^n edges, mixed radix over the address
// pairs (outermost most significant).  Inverse of edge_from_index.
std::int64_t edge_index(const EdgeId& e, const LatticeParams& p);
EdgeId edge_from_index(std::int64_t index, const LatticeParams& p);

}  // namespace dpoly
