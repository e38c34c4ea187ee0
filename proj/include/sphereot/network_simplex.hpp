#pragma once

// Primal network simplex for the balanced transportation problem on a
// complete bipartite graph. Arcs are implicit (arc e = i*M + j runs from
// source i to target j); the spanning tree is stored with the
// parent/thread/successor-count representation and kept strongly feasible,
// which rules out cycling on the heavily degenerate transport polytope.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sphereot/errors.hpp"

namespace sphereot::detail {

class TransportSimplex {
 public:
  struct Result {
    /// Flow on every real arc, row-major N x M; zero off the final tree.
    std::vector<double> flow;
    /// Node potentials: reduced cost of arc (i, j) is cost + pi[i] - pi[N+j].
    std::vector<double> pi;
    std::size_t pivots = 0;
  };

  /// `cost` is row-major N x M. Supplies and demands must have equal sums up
  /// to rounding; the last demand absorbs the residual.
  TransportSimplex(std::span<const double> cost, std::span<const double> supply, std::span<const double> demand)
      : n_src_(static_cast<int>(supply.size())),
        n_dst_(static_cast<int>(demand.size())),
        node_num_(n_src_ + n_dst_),
        arc_num_(static_cast<std::int64_t>(n_src_) * n_dst_),
        root_(node_num_),
        cost_(cost) {
    if (cost.size() != static_cast<std::size_t>(arc_num_)) throw SolverError("cost matrix has wrong size");
    supply_.resize(static_cast<std::size_t>(node_num_) + 1);
    for (int i = 0; i < n_src_; ++i) supply_[i] = supply[i];
    for (int j = 0; j < n_dst_; ++j) supply_[n_src_ + j] = -demand[j];
    double s = 0.0;
    for (int u = 0; u < node_num_; ++u) s += supply_[u];
    supply_[node_num_ - 1] -= s;
  }

  Result run() {
    init();
    std::size_t pivots = 0;
    // The first pass may leave O(eps) drift in the potentials; rebuilding
    // them from the tree and pricing again certifies the final basis.
    for (int pass = 0; pass < 4; ++pass) {
      bool pivoted = false;
      while (find_entering_arc()) {
        pivoted = true;
        find_join_node();
        if (!find_leaving_arc()) throw SolverError("transport problem is unbounded");
        change_flow();
        update_tree_structure();
        update_potential();
        ++pivots;
      }
      recompute_potentials();
      if (!pivoted) break;
    }
    for (int u = 0; u < node_num_; ++u) {
      const std::int64_t e = arc_num_ + u;
      if (flow_[e] > kArtificialTolerance)
        throw SolverError("transport problem is infeasible (unbalanced marginals)");
    }
    Result r;
    r.flow.assign(flow_.begin(), flow_.begin() + arc_num_);
    r.pi.assign(pi_.begin(), pi_.begin() + node_num_);
    r.pivots = pivots;
    return r;
  }

 private:
  static constexpr int kStateLower = 1;
  static constexpr int kStateTree = 0;
  static constexpr int kDirUp = 1;
  static constexpr int kDirDown = -1;
  static constexpr double kArtificialTolerance = 1e-12;

  int source(std::int64_t e) const {
    return e < arc_num_ ? static_cast<int>(e / n_dst_) : art_source_[e - arc_num_];
  }
  int target(std::int64_t e) const {
    return e < arc_num_ ? n_src_ + static_cast<int>(e % n_dst_) : art_target_[e - arc_num_];
  }
  double cost(std::int64_t e) const { return e < arc_num_ ? cost_[e] : art_cost_[e - arc_num_]; }

  void init() {
    const std::size_t all = static_cast<std::size_t>(arc_num_ + node_num_);
    const std::size_t nodes = static_cast<std::size_t>(node_num_) + 1;
    flow_.assign(all, 0.0);
    state_.assign(all, static_cast<std::int8_t>(kStateLower));
    pi_.assign(nodes, 0.0);
    parent_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    thread_.assign(nodes, 0);
    rev_thread_.assign(nodes, 0);
    succ_num_.assign(nodes, 0);
    last_succ_.assign(nodes, 0);
    pred_dir_.assign(nodes, kDirUp);
    art_source_.assign(static_cast<std::size_t>(node_num_), 0);
    art_target_.assign(static_cast<std::size_t>(node_num_), 0);
    art_cost_.assign(static_cast<std::size_t>(node_num_), 0.0);

    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
    const double art_cost = (max_cost + 1.0) * (node_num_ + 1);

    block_size_ = std::max<std::int64_t>(10, static_cast<std::int64_t>(std::ceil(std::sqrt(double(arc_num_)))));
    next_arc_ = 0;
    // Reduced costs are computed from potentials of size up to art_cost; the
    // pricing threshold sits above their rounding noise.
    epsilon_ = std::max(1e-13 * std::max(1.0, max_cost), 16.0 * std::numeric_limits<double>::epsilon() * art_cost);

    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;
    pi_[root_] = 0.0;
    for (int u = 0; u < node_num_; ++u) {
      const std::int64_t e = arc_num_ + u;
      parent_[u] = root_;
      pred_[u] = e;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      state_[e] = kStateTree;
      if (supply_[u] >= 0.0) {
        pred_dir_[u] = kDirUp;
        pi_[u] = 0.0;
        art_source_[u] = u;
        art_target_[u] = root_;
        flow_[e] = supply_[u];
        art_cost_[u] = 0.0;
      } else {
        pred_dir_[u] = kDirDown;
        pi_[u] = art_cost;
        art_source_[u] = root_;
        art_target_[u] = u;
        flow_[e] = -supply_[u];
        art_cost_[u] = art_cost;
      }
    }
  }

  // Block search pricing over the real arcs.
  bool find_entering_arc() {
    double min = -epsilon_;
    std::int64_t cnt = block_size_;
    std::int64_t e = next_arc_;
    bool found = false;
    for (std::int64_t k = 0; k < arc_num_; ++k) {
      if (state_[e] == kStateLower) {
        const int i = static_cast<int>(e / n_dst_);
        const int j = n_src_ + static_cast<int>(e % n_dst_);
        const double c = cost_[e] + pi_[i] - pi_[j];
        if (c < min) {
          min = c;
          in_arc_ = e;
          found = true;
        }
      }
      if (++e == arc_num_) e = 0;
      if (--cnt == 0) {
        if (found) break;
        cnt = block_size_;
      }
    }
    next_arc_ = e;
    return found;
  }

  void find_join_node() {
    int u = source(in_arc_), v = target(in_arc_);
    while (u != v) {
      if (succ_num_[u] < succ_num_[v])
        u = parent_[u];
      else
        v = parent_[v];
    }
    join_ = u;
  }

  // Leaving arc by the strongly feasible tree rule: the last blocking arc in
  // the direction of the cycle orientation.
  bool find_leaving_arc() {
    const int first = source(in_arc_);
    const int second = target(in_arc_);
    constexpr double inf = std::numeric_limits<double>::infinity();
    delta_ = inf;
    int result = 0;
    for (int u = first; u != join_; u = parent_[u]) {
      if (pred_dir_[u] != kDirUp) continue;
      const double d = flow_[pred_[u]];
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second; u != join_; u = parent_[u]) {
      if (pred_dir_[u] != kDirDown) continue;
      const double d = flow_[pred_[u]];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
    return result != 0;
  }

  void change_flow() {
    if (delta_ > 0.0) {
      const double val = delta_;
      flow_[in_arc_] += val;
      for (int u = source(in_arc_); u != join_; u = parent_[u]) {
        double& f = flow_[pred_[u]];
        f -= pred_dir_[u] * val;
        if (f < 0.0) f = 0.0;
      }
      for (int u = target(in_arc_); u != join_; u = parent_[u]) {
        double& f = flow_[pred_[u]];
        f += pred_dir_[u] * val;
        if (f < 0.0) f = 0.0;
      }
    }
    state_[in_arc_] = kStateTree;
    const std::int64_t out = pred_[u_out_];
    flow_[out] = 0.0;
    state_[out] = kStateLower;
  }

  void update_tree_structure() {
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kDirUp : kDirDown;
      if (thread_[v_in_] != u_out_) {
        int after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      const int thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

      // Re-hang the stem (u_in .. u_out) under v_in, reversing parent links.
      int stem = u_in_;
      int par_stem = v_in_;
      int next_stem = 0;
      int last = last_succ_[u_in_];
      int before = 0;
      int after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);

        before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;

        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;

        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }
      for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

      int tmp_sc = 0;
      const int tmp_ls = last_succ_[u_out_];
      for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = -pred_dir_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kDirUp : kDirDown;
      succ_num_[u_in_] = old_succ_num;
    }

    const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const int last_succ_out = last_succ_[u_out_];
    for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_out;

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = old_rev_thread;
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = last_succ_out;
    }

    for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost(in_arc_);
    const int end = thread_[last_succ_[u_in_]];
    for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  // Potentials from scratch along the thread order (parents precede children).
  void recompute_potentials() {
    pi_[root_] = 0.0;
    for (int u = thread_[root_]; u != root_; u = thread_[u]) {
      const int p = parent_[u];
      pi_[u] = pi_[p] - pred_dir_[u] * cost(pred_[u]);
    }
  }

  int n_src_;
  int n_dst_;
  int node_num_;
  std::int64_t arc_num_;
  int root_;
  std::span<const double> cost_;
  std::vector<double> supply_;

  std::vector<double> flow_;
  std::vector<std::int8_t> state_;
  std::vector<double> pi_;
  std::vector<int> parent_;
  std::vector<std::int64_t> pred_;
  std::vector<int> thread_;
  std::vector<int> rev_thread_;
  std::vector<int> succ_num_;
  std::vector<int> last_succ_;
  std::vector<int> pred_dir_;
  std::vector<int> dirty_revs_;
  std::vector<int> art_source_;
  std::vector<int> art_target_;
  std::vector<double> art_cost_;

  std::int64_t block_size_ = 0;
  std::int64_t next_arc_ = 0;
  double epsilon_ = 0.0;

  std::int64_t in_arc_ = 0;
  int join_ = 0;
  int u_in_ = 0;
  int v_in_ = 0;
  int u_out_ = 0;
  int v_out_ = 0;
  double delta_ = 0.0;
};

}  // namespace sphereot::detail
