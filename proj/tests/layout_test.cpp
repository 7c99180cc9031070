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

#include "topicnet/layout.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <gtest/gtest.h>

#include "test_util.hpp"

namespace topicnet {
namespace {

UserGraph path_graph(int n) {
  std::vector<ReplyEdge> edges;
  for (int i = 1; i < n; ++i) {
    edges.push_back({"p" + std::to_string(i), "p" + std::to_string(i - 1), "v"});
  }
  return build_graph(edges, {"v"});
}

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Initial placement is keyed by node id, not by node numbering.
TEST(Layout, InitialPlacementKeyedById) {
  auto small = fr_layout(path_graph(3), {.iterations = 0, .seed = 9});
  auto large = fr_layout(path_graph(6), {.iterations = 0, .seed = 9});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(small.positions[i], large.positions[i]);
}

TEST(Layout, DeterministicForSeed) {
  auto g = path_graph(8);
  auto a = fr_layout(g, {.iterations = 200, .seed = 5});
  auto b = fr_layout(g, {.iterations = 200, .seed = 5});
  EXPECT_EQ(a.positions, b.positions);
  auto c = fr_layout(g, {.iterations = 200, .seed = 6});
  EXPECT_NE(a.positions, c.positions);
}

TEST(Layout, StaysInsideFrame) {
  auto g = path_graph(30);
  Frame f{400.0, 250.0};
  auto r = fr_layout(g, {.iterations = 300, .seed = 1, .frame = f});
  for (const auto& p : r.positions) EXPECT_TRUE(f.contains(p)) << p.x << "," << p.y;
}

TEST(Layout, PathEndsFartherThanNeighbours) {
  auto g = path_graph(3);
  auto r = fr_layout(g, {.iterations = 500, .seed = 3});
  const auto& p = r.positions;  // nodes sorted: p0, p1, p2
  EXPECT_GT(dist(p[0], p[2]), dist(p[0], p[1]));
  EXPECT_GT(dist(p[0], p[2]), dist(p[1], p[2]));
}

TEST(Layout, BadOptionsRejected) {
  auto g = path_graph(3);
  EXPECT_THROW(fr_layout(g, {.iterations = -1}), UsageError);
  EXPECT_THROW(fr_layout(g, {.frame = {0.0, 10.0}}), UsageError);
  auto empty = build_graph({{"a", std::nullopt, "v"}}, {"v"});
  EXPECT_THROW(fr_layout(empty), DataError);
}

TEST(Svg, ParsesWithExpectedElementsAndColours) {
  auto g = path_graph(5);
  auto r = fr_layout(g, {.iterations = 50});
  auto svg = network_svg(g, r, {"p1", "p3"});
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  ASSERT_NO_THROW(boost::property_tree::read_xml(in, tree));
  std::size_t lines = 0, circles = 0;
  std::map<std::string, std::string> fill;
  for (const auto& [tag, group] : tree.get_child("svg")) {
    if (tag != "g") continue;
    for (const auto& [child_tag, child] : group) {
      if (child_tag == "line") ++lines;
      if (child_tag == "circle") {
        ++circles;
        fill[child.get<std::string>("title")] = child.get<std::string>("<xmlattr>.fill");
      }
    }
  }
  EXPECT_EQ(lines, g.edge_count());
  EXPECT_EQ(circles, g.node_count());
  EXPECT_EQ(fill.at("p1"), kHighlightColor);
  EXPECT_EQ(fill.at("p3"), kHighlightColor);
  EXPECT_EQ(fill.at("p0"), kBaseColor);
}

TEST(Svg, EscapesIdsAndWritesFile) {
  auto g = build_graph({{"<a&b>", "c\"d", "v"}}, {"v"});
  auto r = fr_layout(g, {.iterations = 10});
  auto svg = network_svg(g, r, {});
  EXPECT_NE(svg.find("&lt;a&amp;b&gt;"), std::string::npos);
  auto path = testing::scratch_dir() / "sub" / "plot.svg";
  export_network_svg(g, r, {}, path);
  EXPECT_EQ(detail::read_file(path), svg);
}

TEST(Svg, LayoutMustMatchGraph) {
  auto g = path_graph(4);
  auto r = fr_layout(path_graph(3));
  EXPECT_THROW(network_svg(g, r, {}), DataError);
}

TEST(Svg, PlotFileName) {
  EXPECT_EQ(plot_file_name("vid_01", "climate skepticism"), "vid_01_climate-skepticism.svg");
  EXPECT_EQ(plot_file_name("a/b", "x:y"), "a-b_x-y.svg");
}

}  // namespace
}  // namespace topicnet
