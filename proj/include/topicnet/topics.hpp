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

// Topic labels, topic sets and the structured-block parser shared by the
// discovery and labeling steps.

#ifndef TOPICNET_TOPICS_HPP_
#define TOPICNET_TOPICS_HPP_

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"

namespace topicnet {

inline constexpr std::string_view kOutlier = "OUTLIER";
inline constexpr std::string_view kNoise = "NOISE";

namespace detail {

// Characters trimmed from both ends of a label: whitespace, markdown
// emphasis, quotes and sentence punctuation.
inline std::size_t edge_junk_length(std::string_view s, bool from_front) {
  static constexpr std::array<std::string_view, 6> kMultiByte = {
      "\xe2\x80\x9c", "\xe2\x80\x9d", "\xe2\x80\x98", "\xe2\x80\x99",  // curly quotes
      "\xe2\x80\x94", "\xe2\x80\x93"};                                // dashes
  if (s.empty()) return 0;
  for (auto m : kMultiByte) {
    if (from_front ? s.starts_with(m) : s.ends_with(m)) return m.size();
  }
  char c = from_front ? s.front() : s.back();
  if (std::isspace(static_cast<unsigned char>(c)) ||
      std::string_view("*`\"'.,;:!?_-#>").find(c) != std::string_view::npos) {
    return 1;
  }
  return 0;
}

}  // namespace detail

// Lowercases, strips edge punctuation/markup and collapses whitespace.
// normalize_label(normalize_label(s)) == normalize_label(s).
inline std::string normalize_label(std::string_view raw) {
  std::string_view s = raw;
  while (auto n = detail::edge_junk_length(s, true)) s.remove_prefix(n);
  while (auto n = detail::edge_junk_length(s, false)) s.remove_suffix(n);
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

struct Topic {
  std::string label;
  std::string rationale;

  bool operator==(const Topic&) const = default;
};

struct TopicSet {
  std::vector<Topic> topics;
  std::vector<std::string> source_sample_ids;

  bool contains(std::string_view label) const {
    return std::any_of(topics.begin(), topics.end(),
                       [&](const Topic& t) { return t.label == label; });
  }

  const Topic& at(std::string_view label) const {
    for (const auto& t : topics) {
      if (t.label == label) return t;
    }
    throw DataError(fmt::format("topic '{}' is not in the topic set", label));
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& t : topics) out.push_back(t.label);
    return out;
  }

  void validate(std::size_t max_topics) const {
    if (topics.empty()) throw DataError("topic set is empty");
    if (topics.size() > max_topics) {
      throw DataError(fmt::format("topic set has {} topics, more than the maximum {}",
                                  topics.size(), max_topics));
    }
    std::set<std::string> seen;
    for (const auto& t : topics) {
      if (t.label.empty()) throw DataError("topic with empty label");
      if (t.rationale.empty()) {
        throw DataError(fmt::format("topic '{}' has no rationale", t.label));
      }
      if (t.label == normalize_label(kOutlier) || t.label == normalize_label(kNoise)) {
        throw DataError(fmt::format("'{}' is reserved and cannot be a topic", t.label));
      }
      if (!seen.insert(t.label).second) {
        throw DataError(fmt::format("duplicate topic label '{}'", t.label));
      }
    }
  }
};

namespace detail {

// Lines inside the first ``` fence, or every line when there is no fence.
inline std::vector<std::string> structured_block_lines(std::string_view content) {
  auto all = lines(content);
  std::vector<std::string> block;
  bool in_fence = false, saw_fence = false;
  for (const auto& l : all) {
    if (trim(l).starts_with("```")) {
      if (in_fence) return block;
      in_fence = saw_fence = true;
      continue;
    }
    if (in_fence) block.push_back(l);
  }
  return saw_fence ? block : all;
}

inline std::string_view strip_list_marker(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  if (s.starts_with("- ") || s.starts_with("* ") || s.starts_with("+ ")) {
    s.remove_prefix(2);
  } else if (s.starts_with("\xe2\x80\xa2")) {  // bullet
    s.remove_prefix(3);
  } else {
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) s.remove_prefix(i + 1);
  }
  return s;
}

// Splits "label <sep> rationale" at the earliest separator. Recognized
// separators are an em dash, an en dash, or a hyphen with spaces around it.
inline std::optional<std::pair<std::string, std::string>> split_entry(std::string_view line) {
  static constexpr std::array<std::string_view, 3> kSeparators = {
      "\xe2\x80\x94", "\xe2\x80\x93", " - "};
  std::size_t best = std::string_view::npos, width = 0;
  for (auto sep : kSeparators) {
    auto pos = line.find(sep);
    if (pos != std::string_view::npos && pos < best) {
      best = pos;
      width = sep.size();
    }
  }
  if (best == std::string_view::npos) return std::nullopt;
  return std::pair{std::string(line.substr(0, best)),
                   std::string(line.substr(best + width))};
}

inline std::string clean_rationale(std::string_view s) {
  std::string r = trim(s);
  while (r.starts_with("**")) r = trim(std::string_view(r).substr(2));
  while (r.ends_with("**")) r = trim(std::string_view(r).substr(0, r.size() - 2));
  return r;
}

}  // namespace detail

// Extracts (label, rationale) entries from a discovery response. Lines that
// carry no separator are treated as prose and skipped. Duplicates are kept;
// callers decide how to merge them.
inline std::vector<Topic> parse_topic_list(std::string_view content) {
  std::vector<Topic> out;
  for (const auto& line : detail::structured_block_lines(content)) {
    auto entry = detail::split_entry(detail::strip_list_marker(line));
    if (!entry) continue;
    Topic t{normalize_label(entry->first), detail::clean_rationale(entry->second)};
    if (t.label.empty() || t.rationale.empty()) continue;
    out.push_back(std::move(t));
  }
  if (out.empty()) throw SchemaError("no recognizable topic block in response");
  return out;
}

// Line-delimited {label, rationale}, in topic order.
inline std::string topic_set_jsonl(const TopicSet& set) {
  std::string out;
  for (const auto& t : set.topics) {
    out += nlohmann::ordered_json{{"label", t.label}, {"rationale", t.rationale}}.dump();
    out += '\n';
  }
  return out;
}

inline TopicSet parse_topic_set(std::string_view text) {
  TopicSet set;
  std::size_t line_no = 0;
  for (const auto& l : detail::lines(text)) {
    ++line_no;
    if (detail::trim(l).empty()) continue;
    try {
      auto j = nlohmann::json::parse(l);
      set.topics.push_back({normalize_label(j.at("label").get<std::string>()),
                            j.at("rationale").get<std::string>()});
    } catch (const std::exception& e) {
      throw DataError(fmt::format("topic file line {}: {}", line_no, e.what()));
    }
  }
  return set;
}

}  // namespace topicnet

#endif  // TOPICNET_TOPICS_HPP_
