#pragma once

// Primal network simplex for integer min-cost flow with arc lower bounds.
//
// The spanning tree is kept strongly feasible (Cunningham's leaving-arc rule),
// which rules out cycling under degenerate pivots. Entering arcs come from a
// block search over reduced costs. Tree structure is rebuilt by BFS from the
// artificial root after every basis change; fine for the few-thousand-node
// networks the clustering step builds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pme {

class NetworkSimplex {
 public:
  using Int = std::int64_t;

  enum class Status { kOptimal, kInfeasible };

  explicit NetworkSimplex(int num_nodes) : num_nodes_(num_nodes), supply_(num_nodes, 0) {}

  int add_arc(int from, int to, Int lower, Int upper, Int cost) {
    if (from < 0 || from >= num_nodes_ || to < 0 || to >= num_nodes_)
      throw std::out_of_range("arc endpoint out of range");
    if (lower < 0 || upper < lower) throw std::invalid_argument("arc bounds must satisfy 0 <= lower <= upper");
    src_.push_back(from);
    tgt_.push_back(to);
    lower_.push_back(lower);
    cap_.push_back(upper - lower);
    cost_.push_back(cost);
    return static_cast<int>(src_.size()) - 1;
  }

  /// Positive supply = source, negative = demand. Supplies must sum to zero.
  void set_supply(int node, Int supply) { supply_.at(node) = supply; }

  int num_nodes() const { return num_nodes_; }
  int num_arcs() const { return static_cast<int>(src_.size()); }

  Status run();

  Int flow(int arc) const { return flow_.at(arc) + lower_.at(arc); }
  Int total_cost() const {
    Int total = 0;
    for (int a = 0; a < num_arcs(); ++a) total += flow(a) * cost_[a];
    return total;
  }
  Int potential(int node) const { return pi_.at(node); }
  int pivots() const { return pivots_; }

 private:
  enum State : signed char { kLower = 0, kTree = 1, kUpper = 2 };

  Int reduced_cost(int a) const { return cost_[a] + pi_[src_[a]] - pi_[tgt_[a]]; }
  bool find_entering(int& entering);
  void pivot(int entering);
  void rebuild_tree();

  int num_nodes_;
  std::vector<Int> supply_;
  std::vector<int> src_, tgt_;
  std::vector<Int> lower_, cap_, cost_;

  // Working state; artificial arcs follow the real ones.
  std::vector<Int> flow_;
  std::vector<State> state_;
  std::vector<Int> pi_;
  std::vector<int> parent_, pred_, depth_;
  std::vector<std::vector<int>> tree_adj_;
  int root_ = 0;
  int next_arc_ = 0;
  int block_size_ = 1;
  int pivots_ = 0;
};

inline NetworkSimplex::Status NetworkSimplex::run() {
  const int m = num_arcs();
  const int n = num_nodes_;
  root_ = n;
  pivots_ = 0;

  // Shift lower bounds into supplies.
  std::vector<Int> b = supply_;
  Int sum = 0;
  for (int a = 0; a < m; ++a) {
    b[src_[a]] -= lower_[a];
    b[tgt_[a]] += lower_[a];
  }
  for (Int v : b) sum += v;
  if (sum != 0) return Status::kInfeasible;

  Int max_cost = 0;
  for (int a = 0; a < m; ++a) max_cost = std::max(max_cost, cost_[a] < 0 ? -cost_[a] : cost_[a]);
  const Int art_cost = (max_cost + 1) * static_cast<Int>(n + 1);
  const Int inf_cap = std::numeric_limits<Int>::max() / 4;

  // Artificial arcs form the initial strongly feasible tree.
  src_.resize(m + n);
  tgt_.resize(m + n);
  lower_.resize(m + n, 0);
  cap_.resize(m + n);
  cost_.resize(m + n);
  flow_.assign(m + n, 0);
  state_.assign(m + n, kLower);
  tree_adj_.assign(n + 1, {});
  for (int v = 0; v < n; ++v) {
    const int a = m + v;
    if (b[v] >= 0) {
      src_[a] = v;
      tgt_[a] = root_;
      flow_[a] = b[v];
    } else {
      src_[a] = root_;
      tgt_[a] = v;
      flow_[a] = -b[v];
    }
    cap_[a] = inf_cap;
    cost_[a] = art_cost;
    state_[a] = kTree;
    tree_adj_[v].push_back(a);
    tree_adj_[root_].push_back(a);
  }
  rebuild_tree();

  const int total_arcs = m + n;
  block_size_ = std::max(10, static_cast<int>(std::sqrt(static_cast<double>(total_arcs))));
  next_arc_ = 0;

  int entering = -1;
  while (find_entering(entering)) {
    pivot(entering);
    ++pivots_;
  }

  bool feasible = true;
  for (int v = 0; v < n; ++v)
    if (flow_[m + v] != 0) feasible = false;

  // Drop the artificial arcs so the public view only sees real arcs.
  src_.resize(m);
  tgt_.resize(m);
  lower_.resize(m);
  cap_.resize(m);
  cost_.resize(m);
  flow_.resize(m);
  state_.resize(m);
  pi_.resize(n);
  return feasible ? Status::kOptimal : Status::kInfeasible;
}

inline bool NetworkSimplex::find_entering(int& entering) {
  const int total = static_cast<int>(src_.size());
  Int best_violation = 0;
  int best = -1;
  int scanned_in_block = 0;
  for (int i = 0; i < total; ++i) {
    const int a = (next_arc_ + i) % total;
    if (state_[a] != kTree) {
      const Int rc = reduced_cost(a);
      const Int violation = state_[a] == kLower ? -rc : rc;
      if (violation > best_violation) {
        best_violation = violation;
        best = a;
      }
    }
    if (++scanned_in_block == block_size_) {
      if (best >= 0) {
        next_arc_ = (a + 1) % total;
        entering = best;
        return true;
      }
      scanned_in_block = 0;
    }
  }
  if (best >= 0) {
    next_arc_ = (best + 1) % total;
    entering = best;
    return true;
  }
  return false;
}

inline void NetworkSimplex::pivot(int entering) {
  const int e = entering;
  // Circulation direction: first -> second along the entering arc, then back
  // through the tree.
  const bool increase = state_[e] == kLower;
  const int first = increase ? src_[e] : tgt_[e];
  const int second = increase ? tgt_[e] : src_[e];

  // Find the apex of the cycle.
  int u = first, v = second;
  while (u != v) {
    if (depth_[u] >= depth_[v]) u = parent_[u];
    else v = parent_[v];
  }
  const int apex = u;

  // Cycle order from the apex: down to `first`, the entering arc, then up from
  // `second`. Leaving arc = last blocking arc in that order.
  std::vector<int> down_nodes;
  for (int w = first; w != apex; w = parent_[w]) down_nodes.push_back(w);
  std::reverse(down_nodes.begin(), down_nodes.end());

  Int delta = std::numeric_limits<Int>::max();
  int leaving = -1;
  auto consider = [&](Int residual, int arc) {
    if (residual <= delta) {
      delta = residual;
      leaving = arc;
    }
  };
  for (int w : down_nodes) {
    const int a = pred_[w];
    const bool forward = src_[a] == parent_[w];
    consider(forward ? cap_[a] - flow_[a] : flow_[a], a);
  }
  consider(increase ? cap_[e] - flow_[e] : flow_[e], e);
  for (int w = second; w != apex; w = parent_[w]) {
    const int a = pred_[w];
    const bool forward = src_[a] == w;
    consider(forward ? cap_[a] - flow_[a] : flow_[a], a);
  }

  if (delta > 0) {
    for (int w : down_nodes) {
      const int a = pred_[w];
      flow_[a] += src_[a] == parent_[w] ? delta : -delta;
    }
    flow_[e] += increase ? delta : -delta;
    for (int w = second; w != apex; w = parent_[w]) {
      const int a = pred_[w];
      flow_[a] += src_[a] == w ? delta : -delta;
    }
  }

  if (leaving == e) {
    state_[e] = increase ? kUpper : kLower;
    return;
  }
  state_[leaving] = flow_[leaving] == 0 ? kLower : kUpper;
  state_[e] = kTree;
  auto erase_from = [&](int node, int arc) {
    auto& adj = tree_adj_[node];
    auto it = std::find(adj.begin(), adj.end(), arc);
    *it = adj.back();
    adj.pop_back();
  };
  erase_from(src_[leaving], leaving);
  erase_from(tgt_[leaving], leaving);
  tree_adj_[src_[e]].push_back(e);
  tree_adj_[tgt_[e]].push_back(e);
  rebuild_tree();
}

inline void NetworkSimplex::rebuild_tree() {
  const int total_nodes = num_nodes_ + 1;
  parent_.assign(total_nodes, -1);
  pred_.assign(total_nodes, -1);
  depth_.assign(total_nodes, 0);
  pi_.assign(total_nodes, 0);
  std::vector<int> queue;
  queue.reserve(total_nodes);
  queue.push_back(root_);
  std::vector<char> seen(total_nodes, 0);
  seen[root_] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int p = queue[head];
    for (int a : tree_adj_[p]) {
      const int c = src_[a] == p ? tgt_[a] : src_[a];
      if (seen[c]) continue;
      seen[c] = 1;
      parent_[c] = p;
      pred_[c] = a;
      depth_[c] = depth_[p] + 1;
      // reduced cost of a tree arc is zero: cost + pi[src] - pi[tgt] = 0
      pi_[c] = src_[a] == p ? pi_[p] + cost_[a] : pi_[p] - cost_[a];
      queue.push_back(c);
    }
  }
}

}  // namespace pme
