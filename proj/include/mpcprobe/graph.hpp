#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "mpcprobe/corpus.hpp"
#include "mpcprobe/error.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

enum class MetricScope { kContextOnly, kFull };

inline std::string_view to_string(MetricScope s) { return s == MetricScope::kFull ? "full" : "context-only"; }

inline MetricScope parse_metric_scope(std::string_view s) {
  if (s == "full") return MetricScope::kFull;
  if (s == "context-only" || s == "context") return MetricScope::kContextOnly;
  throw Error(Errc::kInvalidConfig, "unknown metric scope '" + std::string(s) + "'");
}

/// Who-talked-with-whom, ignoring direction and message counts.
class UndirectedGraph {
 public:
  using Edge = std::pair<UserId, UserId>;  // first < second

  void add_node(const UserId& u) { nodes_.insert(u); }

  void add_edge(const UserId& a, const UserId& b) {
    if (a == b) return;
    add_node(a);
    add_node(b);
    edges_.insert(a < b ? Edge{a, b} : Edge{b, a});
    adjacency_[a].insert(b);
    adjacency_[b].insert(a);
  }

  const std::set<UserId>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }
  bool contains(const UserId& u) const { return nodes_.count(u) != 0; }

  const std::set<UserId>& neighbors(const UserId& u) const {
    static const std::set<UserId> kEmpty;
    require(u);
    auto it = adjacency_.find(u);
    return it == adjacency_.end() ? kEmpty : it->second;
  }

  void require(const UserId& u) const {
    if (!contains(u)) throw Error(Errc::kUnknownNode, "node '" + u.value + "' not in graph");
  }

  bool operator==(const UndirectedGraph& o) const { return nodes_ == o.nodes_ && edges_ == o.edges_; }

 private:
  std::set<UserId> nodes_;
  std::set<Edge> edges_;
  std::map<UserId, std::set<UserId>> adjacency_;
};

/// Speaker -> addressee edges weighted by message count.
class DirectedWeightedGraph {
 public:
  using Edge = std::pair<UserId, UserId>;

  void add_node(const UserId& u) { nodes_.insert(u); }

  void add_message(const UserId& speaker, const UserId& addressee) {
    if (speaker == addressee) return;
    add_node(speaker);
    add_node(addressee);
    ++weights_[{speaker, addressee}];
  }

  const std::set<UserId>& nodes() const { return nodes_; }
  const std::map<Edge, std::int64_t>& edges() const { return weights_; }
  bool contains(const UserId& u) const { return nodes_.count(u) != 0; }

  std::int64_t weight(const UserId& s, const UserId& a) const {
    auto it = weights_.find({s, a});
    return it == weights_.end() ? 0 : it->second;
  }

  void require(const UserId& u) const {
    if (!contains(u)) throw Error(Errc::kUnknownNode, "node '" + u.value + "' not in graph");
  }

 private:
  std::set<UserId> nodes_;
  std::map<Edge, std::int64_t> weights_;
};

struct InteractionGraphs {
  UndirectedGraph undirected;
  DirectedWeightedGraph directed;
};

/// Self-addressed turns add their speaker as a node but contribute no edge.
inline InteractionGraphs build_graphs(const Conversation& conv, MetricScope scope) {
  InteractionGraphs g;
  std::size_t count = conv.turns.size();
  if (scope == MetricScope::kContextOnly && count > 0) --count;
  for (std::size_t i = 0; i < count; ++i) {
    const Turn& t = conv.turns[i];
    g.undirected.add_node(t.speaker);
    g.undirected.add_node(t.addressee);
    g.directed.add_node(t.speaker);
    g.directed.add_node(t.addressee);
    g.undirected.add_edge(t.speaker, t.addressee);
    g.directed.add_message(t.speaker, t.addressee);
  }
  return g;
}

/// Number of distinct users `u` has interacted with.
inline std::int64_t degree_centrality(const UndirectedGraph& g, const UserId& u) {
  return static_cast<std::int64_t>(g.neighbors(u).size());
}

inline std::int64_t out_degree(const DirectedWeightedGraph& g, const UserId& u) {
  g.require(u);
  std::int64_t n = 0;
  for (auto it = g.edges().lower_bound({u, UserId()}); it != g.edges().end() && it->first.first == u; ++it) ++n;
  return n;
}

inline std::int64_t weighted_out_degree(const DirectedWeightedGraph& g, const UserId& u) {
  g.require(u);
  std::int64_t w = 0;
  for (auto it = g.edges().lower_bound({u, UserId()}); it != g.edges().end() && it->first.first == u; ++it) {
    w += it->second;
  }
  return w;
}

/// Mean messages per distinct recipient; 0 for a node that never spoke to anyone.
inline Ratio average_outgoing_weight(const DirectedWeightedGraph& g, const UserId& u) {
  const auto out = out_degree(g, u);
  if (out == 0) return {0, 1};
  return make_ratio(weighted_out_degree(g, u), out);
}

inline bool is_connected(const UndirectedGraph& g) {
  if (g.nodes().empty()) throw Error(Errc::kEmptyGraph, "connectivity of an empty graph is undefined");
  std::set<UserId> seen{*g.nodes().begin()};
  std::deque<UserId> queue{*g.nodes().begin()};
  while (!queue.empty()) {
    UserId u = queue.front();
    queue.pop_front();
    for (const auto& v : g.neighbors(u)) {
      if (seen.insert(v).second) queue.push_back(v);
    }
  }
  return seen.size() == g.nodes().size();
}

inline double closeness_centrality(const UndirectedGraph& g, const UserId& u) {
  g.require(u);
  std::map<UserId, int> dist{{u, 0}};
  std::deque<UserId> queue{u};
  while (!queue.empty()) {
    UserId x = queue.front();
    queue.pop_front();
    for (const auto& v : g.neighbors(x)) {
      if (dist.emplace(v, dist[x] + 1).second) queue.push_back(v);
    }
  }
  if (dist.size() != g.nodes().size()) {
    throw Error(Errc::kDisconnectedGraph, "closeness undefined: graph is disconnected");
  }
  if (g.nodes().size() == 1) return 0.0;
  long total = 0;
  for (const auto& [_, d] : dist) total += d;
  return static_cast<double>(g.nodes().size() - 1) / static_cast<double>(total);
}

inline double clustering_coefficient(const UndirectedGraph& g, const UserId& u) {
  const auto& nb = g.neighbors(u);
  if (nb.size() < 2) return 0.0;
  std::size_t links = 0;
  for (auto a = nb.begin(); a != nb.end(); ++a) {
    for (auto b = std::next(a); b != nb.end(); ++b) {
      if (g.edges().count({*a, *b})) ++links;
    }
  }
  const double possible = static_cast<double>(nb.size() * (nb.size() - 1) / 2);
  return static_cast<double>(links) / possible;
}

struct AuxiliaryMetrics {
  double closeness = 0;
  double clustering = 0;
};

inline AuxiliaryMetrics auxiliary_metrics(const UndirectedGraph& g, const UserId& u) {
  return {closeness_centrality(g, u), clustering_coefficient(g, u)};
}

struct NodeMetrics {
  std::int64_t degree = 0;
  std::int64_t out_degree = 0;
  std::int64_t weighted_out_degree = 0;
  Ratio avg_outgoing_weight;
  std::optional<double> closeness;
  std::optional<double> clustering;

  std::int64_t avg_outgoing_weight_rounded() const { return round_half_up(avg_outgoing_weight); }

  bool operator==(const NodeMetrics&) const = default;
};

/// All metrics of `u`. Closeness is left empty when the graph is disconnected.
inline NodeMetrics node_metrics(const InteractionGraphs& g, const UserId& u) {
  NodeMetrics m;
  m.degree = degree_centrality(g.undirected, u);
  m.out_degree = out_degree(g.directed, u);
  m.weighted_out_degree = weighted_out_degree(g.directed, u);
  m.avg_outgoing_weight = average_outgoing_weight(g.directed, u);
  m.clustering = clustering_coefficient(g.undirected, u);
  if (is_connected(g.undirected)) m.closeness = closeness_centrality(g.undirected, u);
  return m;
}

inline std::string to_edge_list(const UndirectedGraph& g) {
  std::string out;
  for (const auto& [a, b] : g.edges()) out += a.value + " " + b.value + "\n";
  return out;
}

inline std::string to_edge_list(const DirectedWeightedGraph& g) {
  std::string out;
  for (const auto& [e, w] : g.edges()) out += e.first.value + " " + e.second.value + " " + std::to_string(w) + "\n";
  return out;
}

}  // namespace mpcprobe
