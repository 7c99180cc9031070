// Copyright 2026 The topicnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// User reply networks and per-(video, topic) engagement.
//
// Every comment yields one commenter-on edge: a reply points at the author
// of its immediate parent, a top-level comment points at the video. Video
// edges and self-replies are dropped when the simple undirected user graph
// is built.

#ifndef TOPICNET_NETWORK_HPP_
#define TOPICNET_NETWORK_HPP_

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "topicnet/annotation.hpp"
#include "topicnet/corpus.hpp"
#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"
#include "topicnet/topics.hpp"

namespace topicnet {

inline constexpr std::string_view kVideoTarget = "VIDEO";

struct ReplyEdge {
  std::string source_author;
  std::optional<std::string> target;  // nullopt: the video itself
  std::string video_id;

  bool targets_video() const { return !target.has_value(); }
  bool operator==(const ReplyEdge&) const = default;
};

struct Edgelist {
  std::vector<ReplyEdge> edges;                 // corpus comment order
  std::vector<std::string> unresolved_parents;  // comment ids whose parent is missing
};

// `parents` resolves reply targets; defaults to `corpus` itself. Pass the
// full corpus when `corpus` is a sample.
inline Edgelist build_edgelist(const Corpus& corpus, const Corpus* parents = nullptr) {
  const Corpus& lookup = parents ? *parents : corpus;
  Edgelist out;
  out.edges.reserve(corpus.size());
  for (const auto& c : corpus.comments()) {
    if (!c.parent_comment_id) {
      out.edges.push_back({c.author_id, std::nullopt, c.video_id});
      continue;
    }
    const Comment* parent = lookup.find_comment(*c.parent_comment_id);
    if (parent == nullptr) {
      out.unresolved_parents.push_back(c.comment_id);
      continue;
    }
    out.edges.push_back({c.author_id, parent->author_id, c.video_id});
  }
  return out;
}

// Delimited export {source, target, video_id}; top-level targets read VIDEO.
inline std::string edgelist_tsv(const std::vector<ReplyEdge>& edges) {
  detail::TsvWriter w({"source", "target", "video_id"});
  for (const auto& e : edges) {
    w.row({e.source_author, e.target ? *e.target : std::string(kVideoTarget), e.video_id});
  }
  return w.str();
}

// Simple undirected graph over users.
class UserGraph {
 public:
  using NodeId = std::size_t;
  using EdgeKey = std::pair<NodeId, NodeId>;  // first < second

  const std::set<std::string>& video_ids() const { return video_ids_; }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::set<EdgeKey>& edges() const { return edges_; }
  const std::map<EdgeKey, std::size_t>& multiplicity() const { return multiplicity_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  // Users who only posted top-level comments or self-replies in scope.
  std::size_t isolated_excluded() const { return isolated_excluded_; }
  std::size_t video_edges_dropped() const { return video_edges_dropped_; }
  std::size_t self_loops_dropped() const { return self_loops_dropped_; }

  std::optional<NodeId> find(const std::string& author) const {
    auto it = index_.find(author);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& author) const { return index_.contains(author); }
  std::size_t degree(NodeId n) const { return adjacency_.at(n).size(); }
  const std::vector<NodeId>& neighbors(NodeId n) const { return adjacency_.at(n); }

  friend UserGraph build_graph(const std::vector<ReplyEdge>&, const std::set<std::string>&);

 private:
  std::set<std::string> video_ids_;
  std::vector<std::string> nodes_;  // sorted
  std::unordered_map<std::string, NodeId> index_;
  std::set<EdgeKey> edges_;
  std::map<EdgeKey, std::size_t> multiplicity_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t isolated_excluded_ = 0;
  std::size_t video_edges_dropped_ = 0;
  std::size_t self_loops_dropped_ = 0;
};

inline UserGraph build_graph(const std::vector<ReplyEdge>& edges,
                             const std::set<std::string>& scope) {
  if (scope.empty()) throw UsageError("graph scope has no videos");
  UserGraph g;
  g.video_ids_ = scope;
  std::set<std::string> authors, endpoints;
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& e : edges) {
    if (!scope.contains(e.video_id)) continue;
    authors.insert(e.source_author);
    if (e.targets_video()) {
      ++g.video_edges_dropped_;
      continue;
    }
    if (*e.target == e.source_author) {
      ++g.self_loops_dropped_;
      continue;
    }
    endpoints.insert(e.source_author);
    endpoints.insert(*e.target);
    kept.emplace_back(e.source_author, *e.target);
  }
  g.nodes_.assign(endpoints.begin(), endpoints.end());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) g.index_.emplace(g.nodes_[i], i);
  g.adjacency_.resize(g.nodes_.size());
  for (const auto& [a, b] : kept) {
    auto ia = g.index_.at(a), ib = g.index_.at(b);
    UserGraph::EdgeKey key{std::min(ia, ib), std::max(ia, ib)};
    if (g.edges_.insert(key).second) {
      g.adjacency_[ia].push_back(ib);
      g.adjacency_[ib].push_back(ia);
    }
    ++g.multiplicity_[key];
  }
  for (auto& adj : g.adjacency_) std::sort(adj.begin(), adj.end());
  for (const auto& a : authors) {
    if (!endpoints.contains(a)) ++g.isolated_excluded_;
  }
  return g;
}

struct DegreeSummary {
  std::size_t node_count = 0;     // topic nodes present in the graph
  std::size_t outside_count = 0;  // topic users absent from the graph
  double avg_degree = 0.0;
  double normalized_avg_degree = 0.0;
  bool empty = false;       // no topic node in the graph
  bool degenerate = false;  // graph has < 2 nodes; normalization undefined
};

// Mean simple degree of the topic's users in the full graph, divided by
// (|nodes| - 1).
inline DegreeSummary normalized_avg_degree(const UserGraph& graph,
                                           const std::set<std::string>& topic_nodes) {
  DegreeSummary s;
  std::size_t degree_sum = 0;
  for (const auto& author : topic_nodes) {
    if (auto id = graph.find(author)) {
      ++s.node_count;
      degree_sum += graph.degree(*id);
    } else {
      ++s.outside_count;
    }
  }
  s.empty = s.node_count == 0;
  s.degenerate = graph.node_count() < 2;
  if (s.empty) return s;
  s.avg_degree = static_cast<double>(degree_sum) / static_cast<double>(s.node_count);
  if (!s.degenerate) {
    s.normalized_avg_degree = s.avg_degree / static_cast<double>(graph.node_count() - 1);
  }
  return s;
}

struct EngagementRow {
  std::string video_id;
  Stance stance = Stance::kChange;
  std::string topic;
  std::size_t node_count = 0;
  double avg_degree = 0.0;
  double normalized_avg_degree = 0.0;

  bool operator==(const EngagementRow&) const = default;
};

struct EngagementTable {
  std::vector<EngagementRow> rows;
  std::size_t empty_cells = 0;       // (video, topic) with no topic node in the graph
  std::size_t degenerate_cells = 0;  // video graph with < 2 nodes
  std::size_t outside_users = 0;     // topic users not in their video graph
  std::map<std::pair<Stance, std::string>, std::size_t> topic_node_totals;
};

// Rows in corpus video order, then topic-set order. Topic node set of a
// cell = authors with at least one comment on that video carrying the topic.
inline EngagementTable engagement_table(const Corpus& corpus,
                                        const std::map<std::string, UserGraph>& graphs,
                                        const FinalAnnotation& final, const TopicSet& topics) {
  std::map<std::string, std::map<std::string, std::set<std::string>>> members;  // video->topic->users
  for (const auto& [comment_id, label] : final.labels) {
    if (label == kNoise) continue;
    const Comment* c = corpus.find_comment(comment_id);
    if (c == nullptr) {
      throw DataError(fmt::format("annotated comment '{}' is not in the corpus", comment_id));
    }
    members[c->video_id][label].insert(c->author_id);
  }
  EngagementTable table;
  for (const auto& v : corpus.videos()) {
    auto g = graphs.find(v.video_id);
    for (const auto& t : topics.topics) {
      const auto& users = members[v.video_id][t.label];
      if (users.empty()) {
        ++table.empty_cells;
        continue;
      }
      if (g == graphs.end()) {
        ++table.degenerate_cells;
        continue;
      }
      auto s = normalized_avg_degree(g->second, users);
      table.outside_users += s.outside_count;
      if (s.empty) {
        ++table.empty_cells;
        continue;
      }
      if (s.degenerate) {
        ++table.degenerate_cells;
        continue;
      }
      table.rows.push_back({v.video_id, v.stance, t.label, s.node_count, s.avg_degree,
                            s.normalized_avg_degree});
      table.topic_node_totals[{v.stance, t.label}] += s.node_count;
    }
  }
  return table;
}

// One graph per video, each over the full corpus reply structure.
inline std::map<std::string, UserGraph> per_video_graphs(const Corpus& corpus,
                                                         const std::vector<ReplyEdge>& edges) {
  std::map<std::string, UserGraph> graphs;
  for (const auto& v : corpus.videos()) graphs.emplace(v.video_id, build_graph(edges, {v.video_id}));
  return graphs;
}

inline UserGraph stance_graph(const Corpus& corpus, const std::vector<ReplyEdge>& edges,
                              Stance stance) {
  std::set<std::string> scope;
  for (const auto& v : corpus.videos()) {
    if (v.stance == stance) scope.insert(v.video_id);
  }
  return build_graph(edges, scope);
}

inline std::string engagement_tsv(const std::vector<EngagementRow>& rows) {
  detail::TsvWriter w({"video_id", "stance", "topic", "node_count", "avg_degree",
                       "normalized_avg_degree"});
  for (const auto& r : rows) {
    w.row({r.video_id, std::string(to_string(r.stance)), r.topic, std::to_string(r.node_count),
           detail::format_real(r.avg_degree), detail::format_real(r.normalized_avg_degree)});
  }
  return w.str();
}

inline std::vector<EngagementRow> parse_engagement(std::string_view text) {
  auto t = detail::parse_tsv(text);
  const auto c_video = t.column("video_id"), c_stance = t.column("stance"),
             c_topic = t.column("topic"), c_nodes = t.column("node_count"),
             c_avg = t.column("avg_degree"), c_norm = t.column("normalized_avg_degree");
  std::vector<EngagementRow> rows;
  for (const auto& f : t.rows) {
    EngagementRow r;
    r.video_id = f[c_video];
    r.stance = parse_stance(f[c_stance]);
    r.topic = f[c_topic];
    r.node_count = static_cast<std::size_t>(detail::parse_double(f[c_nodes], "node_count"));
    r.avg_degree = detail::parse_double(f[c_avg], "avg_degree");
    r.normalized_avg_degree = detail::parse_double(f[c_norm], "normalized_avg_degree");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace topicnet

#endif  // TOPICNET_NETWORK_HPP_
