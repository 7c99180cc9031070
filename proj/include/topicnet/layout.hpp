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

// Fruchterman-Reingold force-directed layout and SVG rendering of user
// graphs with a highlighted node subset.

#ifndef TOPICNET_LAYOUT_HPP_
#define TOPICNET_LAYOUT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "topicnet/detail/hash.hpp"
#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"
#include "topicnet/network.hpp"

namespace topicnet {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

// Axis-aligned drawing area [0, width] x [0, height].
struct Frame {
  double width = 1000.0;
  double height = 1000.0;

  bool contains(const Point& p) const {
    return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
  }
};

struct LayoutResult {
  std::vector<Point> positions;  // indexed like UserGraph::nodes()
  Frame frame;
  std::uint64_t seed = 0;
  int iterations = 0;
};

struct LayoutOptions {
  int iterations = 500;
  std::uint64_t seed = 0;
  Frame frame;
  double ideal_length_scale = 1.0;  // C in k = C * sqrt(area / n)
};

// Initial placement is uniform in the frame, keyed by (seed, node id), so it
// does not depend on node numbering. Then each iteration applies k^2/d
// repulsion between all pairs and d^2/k attraction along edges, caps the
// step at a temperature cooling linearly from width/10 to zero, and clamps
// to the frame.
inline LayoutResult fr_layout(const UserGraph& graph, const LayoutOptions& opt = {}) {
  const auto n = graph.node_count();
  if (n == 0) throw DataError("cannot lay out an empty graph");
  if (opt.iterations < 0) throw UsageError("layout iterations must be non-negative");
  if (!(opt.frame.width > 0.0 && opt.frame.height > 0.0)) {
    throw UsageError("layout frame must have positive size");
  }
  LayoutResult out{std::vector<Point>(n), opt.frame, opt.seed, opt.iterations};
  const double w = opt.frame.width, h = opt.frame.height;
  if (n == 1) {
    out.positions[0] = {w / 2.0, h / 2.0};
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    detail::CounterRng rng(detail::combine({opt.seed, detail::fnv1a(graph.nodes()[i])}));
    out.positions[i] = {rng.uniform() * w, rng.uniform() * h};
  }

  auto& pos = out.positions;
  const double k = opt.ideal_length_scale * std::sqrt(w * h / static_cast<double>(n));
  const double k2 = k * k;
  const double min_dist = 1e-6 * k;
  const double t0 = w / 10.0;
  std::vector<Point> disp(n);
  for (int it = 0; it < opt.iterations; ++it) {
    std::fill(disp.begin(), disp.end(), Point{});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double dx = pos[i].x - pos[j].x, dy = pos[i].y - pos[j].y;
        double d = std::hypot(dx, dy);
        if (d < min_dist) {
          // Coincident nodes: push apart along a fixed, pair-specific direction.
          double angle = 2.0 * M_PI * detail::unit_interval(detail::combine({opt.seed, i, j}));
          dx = std::cos(angle) * min_dist;
          dy = std::sin(angle) * min_dist;
          d = min_dist;
        }
        double f = k2 / d;
        disp[i].x += dx / d * f;
        disp[i].y += dy / d * f;
        disp[j].x -= dx / d * f;
        disp[j].y -= dy / d * f;
      }
    }
    for (const auto& [a, b] : graph.edges()) {
      double dx = pos[a].x - pos[b].x, dy = pos[a].y - pos[b].y;
      double d = std::hypot(dx, dy);
      if (d < min_dist) continue;
      double f = d * d / k;
      disp[a].x -= dx / d * f;
      disp[a].y -= dy / d * f;
      disp[b].x += dx / d * f;
      disp[b].y += dy / d * f;
    }
    const double temperature =
        t0 * (1.0 - static_cast<double>(it) / static_cast<double>(opt.iterations));
    for (std::size_t i = 0; i < n; ++i) {
      double len = std::hypot(disp[i].x, disp[i].y);
      if (len > 0.0) {
        double step = std::min(len, temperature);
        pos[i].x += disp[i].x / len * step;
        pos[i].y += disp[i].y / len * step;
      }
      pos[i].x = std::clamp(pos[i].x, 0.0, w);
      pos[i].y = std::clamp(pos[i].y, 0.0, h);
    }
  }
  return out;
}

inline constexpr std::string_view kHighlightColor = "blue";
inline constexpr std::string_view kBaseColor = "salmon";

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// One <line> per edge, then one <circle> per node; highlighted users are
// blue and everyone else salmon.
inline std::string network_svg(const UserGraph& graph, const LayoutResult& layout,
                               const std::set<std::string>& highlight) {
  if (layout.positions.size() != graph.node_count()) {
    throw DataError("layout does not cover every node of the graph");
  }
  const double margin = 10.0;
  const double radius = std::clamp(300.0 / std::sqrt(static_cast<double>(
                                                std::max<std::size_t>(graph.node_count(), 1))),
                                   2.0, 12.0);
  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
      "viewBox=\"{2:.0f} {2:.0f} {0:.0f} {1:.0f}\">\n"
      "<rect x=\"{2:.0f}\" y=\"{2:.0f}\" width=\"{0:.0f}\" height=\"{1:.0f}\" fill=\"white\"/>\n"
      "<g stroke=\"#9a9a9a\" stroke-width=\"0.8\">\n",
      layout.frame.width + 2 * margin, layout.frame.height + 2 * margin, -margin);
  const auto& p = layout.positions;
  for (const auto& [a, b] : graph.edges()) {
    svg += fmt::format("<line x1=\"{:.3f}\" y1=\"{:.3f}\" x2=\"{:.3f}\" y2=\"{:.3f}\"/>\n", p[a].x,
                       p[a].y, p[b].x, p[b].y);
  }
  svg += "</g>\n<g stroke=\"#333333\" stroke-width=\"0.5\">\n";
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto& id = graph.nodes()[i];
    svg += fmt::format(
        "<circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"{:.2f}\" fill=\"{}\"><title>{}</title></circle>\n",
        p[i].x, p[i].y, radius, highlight.contains(id) ? kHighlightColor : kBaseColor,
        detail::xml_escape(id));
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

inline void export_network_svg(const UserGraph& graph, const LayoutResult& layout,
                               const std::set<std::string>& highlight,
                               const std::filesystem::path& path) {
  detail::write_file_atomic(path, network_svg(graph, layout, highlight));
}

// "video-id_topic.svg" with anything outside [A-Za-z0-9._-] mapped to '-'.
inline std::string plot_file_name(std::string_view video_id, std::string_view topic) {
  auto clean = [](std::string_view s) {
    std::string out;
    for (char c : s) {
      bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
      out += ok ? c : '-';
    }
    return out;
  };
  return fmt::format("{}_{}.svg", clean(video_id), clean(topic));
}

}  // namespace topicnet

#endif  // TOPICNET_LAYOUT_HPP_
