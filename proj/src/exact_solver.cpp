#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include "feedforge/error.hpp"
#include "feedforge/synth.hpp"
#include "steiner_graph.hpp"

namespace feedforge {

namespace detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t arc_into(const WeightedGraph& g, std::size_t e, std::size_t head) {
  return g.edges[e].v == head ? 2 * e : 2 * e + 1;
}

}  // namespace

DualAscent dual_ascent(const WeightedGraph& g, std::size_t root, const std::vector<std::size_t>& terminals, Mask mask) {
  DualAscent out;
  out.reduced.assign(2 * g.edges.size(), kInf);
  double max_cost = 0.0;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& ed = g.edges[e];
    if (ed.u == ed.v || !mask.edge(e) || !mask.node(ed.u) || !mask.node(ed.v)) continue;
    out.reduced[2 * e] = out.reduced[2 * e + 1] = ed.cost;
    max_cost = std::max(max_cost, ed.cost);
  }
  const double eps = 1e-13 * std::max(1.0, max_cost);
  auto& rc = out.reduced;

  using Item = std::pair<std::size_t, std::size_t>;  // (component size, terminal)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (std::size_t t : terminals)
    if (t != root) queue.emplace(1, t);

  std::vector<unsigned> stamp(g.n, 0);
  unsigned round = 0;
  std::vector<std::size_t> component;
  std::vector<std::size_t> cut;
  while (!queue.empty()) {
    auto [size, t] = queue.top();
    queue.pop();
    ++round;
    component.assign(1, t);
    stamp[t] = round;
    bool reaches_root = t == root;
    for (std::size_t i = 0; i < component.size() && !reaches_root; ++i) {
      const std::size_t v = component[i];
      for (auto [w, e] : g.adj[v]) {
        if (stamp[w] == round) continue;
        if (rc[arc_into(g, e, v)] != 0.0) continue;
        stamp[w] = round;
        component.push_back(w);
        if (w == root) {
          reaches_root = true;
          break;
        }
      }
    }
    if (reaches_root) continue;
    if (component.size() > size && !queue.empty() && queue.top().first < component.size()) {
      queue.emplace(component.size(), t);
      continue;
    }
    double delta = kInf;
    cut.clear();
    for (std::size_t v : component) {
      for (auto [w, e] : g.adj[v]) {
        if (stamp[w] == round) continue;
        const std::size_t a = arc_into(g, e, v);
        if (rc[a] == kInf) continue;
        cut.push_back(a);
        delta = std::min(delta, rc[a]);
      }
    }
    if (delta == kInf) {
      out.feasible = false;
      out.lower_bound = kInf;
      return out;
    }
    out.lower_bound += delta;
    for (std::size_t a : cut) {
      const double left = rc[a] - delta;
      rc[a] = left <= eps ? 0.0 : left;
    }
    queue.emplace(component.size(), t);
  }
  return out;
}

}  // namespace detail

namespace {

using detail::EdgeSet;
using detail::Mask;
using detail::WeightedGraph;

constexpr double kInf = std::numeric_limits<double>::infinity();

double tolerance(double x) { return 1e-9 * std::max(1.0, std::abs(x)); }

enum : signed char { kDead = -1, kFree = 0, kTerminal = 1 };

struct Subproblem {
  std::vector<signed char> status;  // per node
  std::vector<char> edge_alive;
  double lower_bound = 0.0;
};

class BranchAndBound {
 public:
  BranchAndBound(const WeightedGraph& g, std::size_t root, std::vector<char> is_required)
      : g_(g), root_(root), is_required_(std::move(is_required)) {}

  void seed(EdgeSet incumbent) {
    best_ = std::move(incumbent);
    best_cost_ = detail::cost_of(g_, best_);
  }

  /// Runs until the search space is exhausted or the deadline passes.
  /// Returns the smallest lower bound among unexplored subproblems (best cost when finished).
  double run(std::chrono::steady_clock::time_point deadline) {
    Subproblem top;
    top.status.assign(g_.n, kFree);
    for (std::size_t v = 0; v < g_.n; ++v)
      if (is_required_[v]) top.status[v] = kTerminal;
    top.edge_alive.assign(g_.edges.size(), 1);
    for (std::size_t e = 0; e < g_.edges.size(); ++e)
      if (g_.edges[e].u == g_.edges[e].v) top.edge_alive[e] = 0;
    top.lower_bound = detail::dual_ascent(g_, root_, terminals_of(top)).lower_bound;
    std::vector<Subproblem> stack;
    stack.push_back(std::move(top));

    while (!stack.empty()) {
      if (std::chrono::steady_clock::now() > deadline) {
        double open = kInf;
        for (const auto& s : stack) open = std::min(open, s.lower_bound);
        finished_ = false;
        return std::min(open, best_cost_);
      }
      Subproblem node = std::move(stack.back());
      stack.pop_back();
      if (node.lower_bound > best_cost_ + tolerance(best_cost_)) continue;
      ++nodes_;
      expand(std::move(node), stack);
    }
    finished_ = true;
    return best_cost_;
  }

  const EdgeSet& best() const { return best_; }
  double best_cost() const { return best_cost_; }
  bool finished() const { return finished_; }
  std::size_t nodes() const { return nodes_; }

 private:
  void offer(EdgeSet edges) {
    const double cost = detail::cost_of(g_, edges);
    const double tol = tolerance(best_cost_);
    if (cost < best_cost_ - tol || (std::abs(cost - best_cost_) <= tol && detail::lex_less(edges, best_))) {
      best_ = std::move(edges);
      best_cost_ = cost;
    }
  }

  std::vector<std::size_t> terminals_of(const Subproblem& s) const {
    std::vector<std::size_t> t;
    for (std::size_t v = 0; v < g_.n; ++v)
      if (s.status[v] == kTerminal) t.push_back(v);
    return t;
  }

  void kill_node(Subproblem& s, std::size_t v) const {
    s.status[v] = kDead;
    for (auto [w, e] : g_.adj[v]) s.edge_alive[e] = 0;
  }

  /// Drops free nodes of live degree <= 1; false if a terminal got cut off.
  bool reduce_degrees(Subproblem& s) const {
    std::vector<std::size_t> degree(g_.n, 0);
    for (std::size_t e = 0; e < g_.edges.size(); ++e) {
      if (!s.edge_alive[e]) continue;
      ++degree[g_.edges[e].u];
      ++degree[g_.edges[e].v];
    }
    std::vector<std::size_t> work;
    for (std::size_t v = 0; v < g_.n; ++v)
      if (s.status[v] == kFree && degree[v] <= 1) work.push_back(v);
    while (!work.empty()) {
      const std::size_t v = work.back();
      work.pop_back();
      if (s.status[v] != kFree) continue;
      for (auto [w, e] : g_.adj[v]) {
        if (!s.edge_alive[e]) continue;
        if (--degree[w] <= 1 && s.status[w] == kFree) work.push_back(w);
      }
      kill_node(s, v);
    }
    std::size_t terminals = 0;
    for (std::size_t v = 0; v < g_.n; ++v) terminals += s.status[v] == kTerminal;
    if (terminals <= 1) return true;
    for (std::size_t v = 0; v < g_.n; ++v)
      if (s.status[v] == kTerminal && degree[v] == 0) return false;
    return true;
  }

  /// Shortest reduced-cost distances from the root and to the nearest non-root terminal.
  void reduced_distances(const Subproblem& s, const std::vector<double>& rc, std::vector<double>& from_root,
                         std::vector<double>& to_terminal) const {
    using Item = std::pair<double, std::size_t>;
    auto run = [&](std::vector<double>& dist, bool forward) {
      std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
      for (std::size_t v = 0; v < g_.n; ++v) {
        if (dist[v] == 0.0) q.emplace(0.0, v);
      }
      while (!q.empty()) {
        auto [d, v] = q.top();
        q.pop();
        if (d > dist[v]) continue;
        for (auto [w, e] : g_.adj[v]) {
          if (!s.edge_alive[e]) continue;
          // forward: arc v->w; backward: arc w->v
          const std::size_t a = forward ? (g_.edges[e].u == v ? 2 * e : 2 * e + 1) : (g_.edges[e].v == v ? 2 * e : 2 * e + 1);
          const double nd = d + rc[a];
          if (nd < dist[w]) {
            dist[w] = nd;
            q.emplace(nd, w);
          }
        }
      }
    };
    from_root.assign(g_.n, kInf);
    from_root[root_] = 0.0;
    run(from_root, true);
    to_terminal.assign(g_.n, kInf);
    for (std::size_t v = 0; v < g_.n; ++v)
      if (s.status[v] == kTerminal && v != root_) to_terminal[v] = 0.0;
    run(to_terminal, false);
  }

  bool live_graph_is_tree(const Subproblem& s) const {
    std::size_t nodes = 0, edges = 0;
    for (std::size_t v = 0; v < g_.n; ++v) nodes += s.status[v] != kDead;
    for (std::size_t e = 0; e < g_.edges.size(); ++e) edges += s.edge_alive[e] != 0;
    if (edges + 1 != nodes) return false;
    std::vector<char> seen(g_.n, 0);
    std::vector<std::size_t> stack{root_};
    seen[root_] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (auto [w, e] : g_.adj[v]) {
        if (!s.edge_alive[e] || seen[w]) continue;
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
    return reached == nodes;
  }

  void expand(Subproblem node, std::vector<Subproblem>& stack) {
    std::vector<double> from_root, to_terminal;
    std::vector<char> node_alive(g_.n);
    for (int pass = 0; pass < 8; ++pass) {
      if (!reduce_degrees(node)) return;
      for (std::size_t v = 0; v < g_.n; ++v) node_alive[v] = node.status[v] != kDead;
      const Mask mask{&node_alive, &node.edge_alive};
      const auto terminals = terminals_of(node);
      const auto da = detail::dual_ascent(g_, root_, terminals, mask);
      if (!da.feasible) return;
      node.lower_bound = std::max(node.lower_bound, da.lower_bound);
      const double cutoff = best_cost_ + tolerance(best_cost_);
      if (node.lower_bound > cutoff) return;

      reduced_distances(node, da.reduced, from_root, to_terminal);
      bool changed = false;
      for (std::size_t v = 0; v < g_.n; ++v) {
        if (node.status[v] != kFree) continue;
        if (da.lower_bound + from_root[v] + to_terminal[v] > cutoff) {
          kill_node(node, v);
          changed = true;
        }
      }
      for (std::size_t e = 0; e < g_.edges.size(); ++e) {
        if (!node.edge_alive[e]) continue;
        const std::size_t u = g_.edges[e].u, v = g_.edges[e].v;
        const double via_uv = from_root[u] + da.reduced[2 * e] + to_terminal[v];
        const double via_vu = from_root[v] + da.reduced[2 * e + 1] + to_terminal[u];
        if (da.lower_bound + std::min(via_uv, via_vu) > cutoff) {
          node.edge_alive[e] = 0;
          changed = true;
        }
      }
      if (!changed) break;
    }
    if (!reduce_degrees(node)) return;
    for (std::size_t v = 0; v < g_.n; ++v) node_alive[v] = node.status[v] != kDead;
    const Mask mask{&node_alive, &node.edge_alive};
    const auto terminals = terminals_of(node);

    // Incumbent from this subproblem.
    std::vector<char> forced(g_.n, 0);
    for (std::size_t t : terminals) forced[t] = 1;
    EdgeSet local;
    if (auto tree = detail::path_join(g_, root_, terminals, mask)) {
      local = *tree;
      offer(detail::polish(g_, *tree, is_required_, root_));
    } else {
      return;
    }
    if (node.lower_bound > best_cost_ + tolerance(best_cost_)) return;

    std::vector<std::size_t> free_nodes;
    for (std::size_t v = 0; v < g_.n; ++v)
      if (node.status[v] == kFree) free_nodes.push_back(v);
    if (free_nodes.empty()) {
      auto mst = detail::induced_mst(g_, forced, mask);
      if (mst.size() + 1 == terminals.size()) offer(detail::prune_leaves(g_, std::move(mst), is_required_));
      return;
    }
    if (live_graph_is_tree(node)) {
      EdgeSet all;
      for (std::size_t e = 0; e < g_.edges.size(); ++e)
        if (node.edge_alive[e]) all.push_back(e);
      offer(detail::prune_leaves(g_, std::move(all), is_required_));
      return;
    }

    // Branch on the busiest free node of the local tree, else the most promising free node.
    std::vector<std::size_t> degree(g_.n, 0);
    for (std::size_t e : local) {
      ++degree[g_.edges[e].u];
      ++degree[g_.edges[e].v];
    }
    auto score = [&](std::size_t v) { return from_root[v] + to_terminal[v]; };
    std::size_t pick = free_nodes.front();
    for (std::size_t v : free_nodes) {
      if (degree[v] > degree[pick] || (degree[v] == degree[pick] && score(v) < score(pick))) pick = v;
    }

    Subproblem excluded = node;
    kill_node(excluded, pick);
    Subproblem included = std::move(node);
    included.status[pick] = kTerminal;
    stack.push_back(std::move(excluded));
    stack.push_back(std::move(included));
  }

  const WeightedGraph& g_;
  std::size_t root_;
  std::vector<char> is_required_;
  EdgeSet best_;
  double best_cost_ = kInf;
  bool finished_ = false;
  std::size_t nodes_ = 0;
};

}  // namespace

SynthesisSolution solve_exact(const SynthesisProblem& problem, const ExactOptions& options) {
  problem.validate();
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(options.time_limit_s));
  const auto g = WeightedGraph::from_problem(problem);
  const auto terminals = problem.terminal_indices();
  const std::size_t root = problem.graph.index_of(problem.source);
  if (terminals.size() == 1) {
    SynthesisSolution s = solution_from_tree(problem, {});
    s.proven_optimal = true;
    return s;
  }
  std::vector<char> is_required(g.n, 0);
  for (std::size_t t : terminals) is_required[t] = 1;

  const SynthesisSolution start = solve_heuristic(problem);
  BranchAndBound bb(g, root, is_required);
  bb.seed(start.selected_edges());
  const double bound = bb.run(deadline);

  SynthesisSolution s = solution_from_tree(problem, bb.best());
  s.proven_optimal = bb.finished();
  s.gap = s.proven_optimal || s.objective <= 0.0 ? 0.0 : std::max(0.0, (s.objective - bound) / s.objective);
  return s;
}

}  // namespace feedforge
