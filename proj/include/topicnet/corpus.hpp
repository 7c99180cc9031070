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

// Threaded comment corpus: loading, validation and seeded sampling.
//
// A corpus file is line-delimited JSON. Each line is one record:
//
//   {"record":"video","video_id":"v1","stance":"change","title":"..."}
//   {"comment_id":"c1","video_id":"v1","author_id":"u1","text":"...",
//    "parent_comment_id":"c0","timestamp":"2023-04-01T12:00:00Z"}
//
// Records without a "record" field are comments. An optional
// {"record":"provenance","note":"..."} line carries a free-text source note.

#ifndef TOPICNET_CORPUS_HPP_
#define TOPICNET_CORPUS_HPP_

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "topicnet/detail/hash.hpp"
#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"

namespace topicnet {

enum class Stance { kChange, kHoax };

inline std::string_view to_string(Stance s) {
  return s == Stance::kChange ? "change" : "hoax";
}

inline Stance parse_stance(std::string_view s) {
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "change") return Stance::kChange;
  if (lower == "hoax") return Stance::kHoax;
  throw DataError(fmt::format("unknown stance '{}' (expected change|hoax)", s));
}

struct Video {
  std::string video_id;
  Stance stance = Stance::kChange;
  std::optional<std::string> title;

  bool operator==(const Video&) const = default;
};

struct Comment {
  std::string comment_id;
  std::string video_id;
  std::string author_id;
  std::optional<std::string> parent_comment_id;
  std::string text;
  std::optional<std::string> timestamp;  // ISO-8601 UTC, e.g. 2023-04-01T12:00:00Z

  bool is_reply() const { return parent_comment_id.has_value(); }
  bool operator==(const Comment&) const = default;
};

// Sampling unit: one stratum per (stance, video) pair.
struct StratumKey {
  Stance stance = Stance::kChange;
  std::string video_id;

  auto operator<=>(const StratumKey&) const = default;

  std::uint64_t hash() const {
    return detail::fnv1a(video_id, detail::fnv1a(to_string(stance)) ^ 0x1f);
  }
};

struct CorpusOptions {
  // Samples keep parent_comment_id on replies whose parent was not drawn.
  bool allow_external_parents = false;
};

// Immutable, validated collection of videos and comments.
class Corpus {
 public:
  Corpus() = default;

  // Validates every invariant; throws DataError naming the offending id.
  Corpus(std::vector<Video> videos, std::vector<Comment> comments,
         std::string provenance = {}, CorpusOptions options = {})
      : videos_(std::move(videos)),
        comments_(std::move(comments)),
        provenance_(std::move(provenance)),
        options_(options) {
    index_and_validate();
  }

  const std::vector<Video>& videos() const { return videos_; }
  const std::vector<Comment>& comments() const { return comments_; }
  const std::string& provenance() const { return provenance_; }
  const CorpusOptions& options() const { return options_; }
  std::size_t size() const { return comments_.size(); }
  bool empty() const { return comments_.empty(); }

  const Video& video(std::string_view id) const {
    auto it = video_index_.find(std::string(id));
    if (it == video_index_.end()) {
      throw DataError(fmt::format("unknown video_id '{}'", id));
    }
    return videos_[it->second];
  }

  const Comment* find_comment(std::string_view id) const {
    auto it = comment_index_.find(std::string(id));
    return it == comment_index_.end() ? nullptr : &comments_[it->second];
  }

  StratumKey stratum_of(const Comment& c) const {
    return {video(c.video_id).stance, c.video_id};
  }

 private:
  void index_and_validate() {
    for (std::size_t i = 0; i < videos_.size(); ++i) {
      if (videos_[i].video_id.empty()) throw DataError("video with empty video_id");
      if (!video_index_.emplace(videos_[i].video_id, i).second) {
        throw DataError(fmt::format("duplicate video_id '{}'", videos_[i].video_id));
      }
    }
    for (std::size_t i = 0; i < comments_.size(); ++i) {
      const auto& c = comments_[i];
      if (c.comment_id.empty()) throw DataError("comment with empty comment_id");
      if (!video_index_.contains(c.video_id)) {
        throw DataError(fmt::format("comment '{}' references unknown video_id '{}'",
                                    c.comment_id, c.video_id));
      }
      if (!comment_index_.emplace(c.comment_id, i).second) {
        throw DataError(fmt::format("duplicate comment_id '{}'", c.comment_id));
      }
    }
    for (const auto& c : comments_) {
      if (!c.parent_comment_id) continue;
      const Comment* parent = find_comment(*c.parent_comment_id);
      if (parent == nullptr) {
        if (options_.allow_external_parents) continue;
        throw DataError(fmt::format("comment '{}' has unknown parent '{}'",
                                    c.comment_id, *c.parent_comment_id));
      }
      if (parent->video_id != c.video_id) {
        throw DataError(fmt::format(
            "comment '{}' replies to '{}' on a different video", c.comment_id,
            parent->comment_id));
      }
    }
    check_acyclic();
  }

  void check_acyclic() const {
    // 0 = unvisited, 1 = on current chain, 2 = known to terminate.
    std::vector<unsigned char> state(comments_.size(), 0);
    std::vector<std::size_t> chain;
    for (std::size_t start = 0; start < comments_.size(); ++start) {
      std::size_t cur = start;
      chain.clear();
      while (state[cur] == 0) {
        state[cur] = 1;
        chain.push_back(cur);
        const auto& parent = comments_[cur].parent_comment_id;
        if (!parent) break;
        auto it = comment_index_.find(*parent);
        if (it == comment_index_.end()) break;
        cur = it->second;
        if (state[cur] == 1) {
          throw DataError(fmt::format("reply cycle through comment '{}'",
                                      comments_[cur].comment_id));
        }
      }
      for (auto i : chain) state[i] = 2;
    }
  }

  std::vector<Video> videos_;
  std::vector<Comment> comments_;
  std::string provenance_;
  CorpusOptions options_;
  std::unordered_map<std::string, std::size_t> video_index_;
  std::unordered_map<std::string, std::size_t> comment_index_;
};

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& j,
                                                  const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw std::invalid_argument(fmt::format("'{}' must be a string", key));
  return it->get<std::string>();
}

inline std::string required_string(const nlohmann::json& j, const char* key) {
  auto v = optional_string(j, key);
  if (!v) throw std::invalid_argument(fmt::format("missing field '{}'", key));
  return *v;
}

inline bool looks_like_utc_timestamp(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.fff]Z
  if (s.size() < 20 || s.back() != 'Z') return false;
  const std::string_view pattern = "dddd-dd-ddTdd:dd:dd";
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    bool digit = std::isdigit(static_cast<unsigned char>(s[i])) != 0;
    if (pattern[i] == 'd' ? !digit : s[i] != pattern[i]) return false;
  }
  return true;
}

}  // namespace detail

// Parses a line-delimited corpus. Errors cite the 1-based line number for
// malformed records; referential errors name the offending id.
inline Corpus parse_corpus(std::string_view text, CorpusOptions options = {}) {
  std::vector<Video> videos;
  std::vector<Comment> comments;
  std::string provenance;
  std::unordered_map<std::string, std::size_t> comment_line;
  std::size_t line_no = 0;
  for (const auto& raw : detail::lines(text)) {
    ++line_no;
    if (detail::trim(raw).empty()) continue;
    try {
      auto j = nlohmann::json::parse(raw);
      if (!j.is_object()) throw std::invalid_argument("record is not an object");
      std::string kind = j.value("record", std::string("comment"));
      if (kind == "video") {
        Video v;
        v.video_id = detail::required_string(j, "video_id");
        v.stance = parse_stance(detail::required_string(j, "stance"));
        v.title = detail::optional_string(j, "title");
        videos.push_back(std::move(v));
      } else if (kind == "comment") {
        Comment c;
        c.comment_id = detail::required_string(j, "comment_id");
        c.video_id = detail::required_string(j, "video_id");
        c.author_id = detail::required_string(j, "author_id");
        if (c.author_id.empty()) throw std::invalid_argument("empty author_id");
        c.parent_comment_id = detail::optional_string(j, "parent_comment_id");
        c.text = detail::required_string(j, "text");
        c.timestamp = detail::optional_string(j, "timestamp");
        if (c.timestamp && !detail::looks_like_utc_timestamp(*c.timestamp)) {
          throw std::invalid_argument(
              fmt::format("timestamp '{}' is not ISO-8601 UTC", *c.timestamp));
        }
        if (!comment_line.emplace(c.comment_id, line_no).second) {
          throw DataError(fmt::format("line {}: duplicate comment_id '{}'",
                                      line_no, c.comment_id));
        }
        comments.push_back(std::move(c));
      } else if (kind == "provenance") {
        provenance = detail::required_string(j, "note");
      } else {
        throw std::invalid_argument(fmt::format("unknown record kind '{}'", kind));
      }
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(fmt::format("line {}: malformed record: {}", line_no, e.what()));
    }
  }
  return Corpus(std::move(videos), std::move(comments), std::move(provenance),
                options);
}

inline Corpus load_corpus(const std::filesystem::path& path,
                          CorpusOptions options = {}) {
  if (!std::filesystem::exists(path)) {
    throw DataError(fmt::format("corpus file '{}' does not exist", path.string()));
  }
  return parse_corpus(detail::read_file(path), options);
}

inline std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  auto emit = [&out](const nlohmann::ordered_json& j) {
    out += j.dump();
    out += '\n';
  };
  if (!corpus.provenance().empty()) {
    emit({{"record", "provenance"}, {"note", corpus.provenance()}});
  }
  for (const auto& v : corpus.videos()) {
    nlohmann::ordered_json j{{"record", "video"},
                             {"video_id", v.video_id},
                             {"stance", std::string(to_string(v.stance))}};
    if (v.title) j["title"] = *v.title;
    emit(j);
  }
  for (const auto& c : corpus.comments()) {
    nlohmann::ordered_json j{{"comment_id", c.comment_id},
                             {"video_id", c.video_id},
                             {"author_id", c.author_id}};
    if (c.parent_comment_id) j["parent_comment_id"] = *c.parent_comment_id;
    j["text"] = c.text;
    if (c.timestamp) j["timestamp"] = *c.timestamp;
    emit(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
  std::map<StratumKey, std::size_t> per_stratum;  // includes empty videos
  std::size_t change_total = 0;
  std::size_t hoax_total = 0;

  std::size_t total() const { return change_total + hoax_total; }
  std::size_t stance_total(Stance s) const {
    return s == Stance::kChange ? change_total : hoax_total;
  }
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  for (const auto& v : corpus.videos()) stats.per_stratum[{v.stance, v.video_id}] = 0;
  for (const auto& c : corpus.comments()) {
    auto key = corpus.stratum_of(c);
    ++stats.per_stratum[key];
    (key.stance == Stance::kChange ? stats.change_total : stats.hoax_total)++;
  }
  return stats;
}

// level = video | stance | corpus
inline std::string stats_tsv(const CorpusStats& stats) {
  detail::TsvWriter w({"level", "stance", "video_id", "comments"});
  for (const auto& [key, n] : stats.per_stratum) {
    w.row({"video", std::string(to_string(key.stance)), key.video_id,
           std::to_string(n)});
  }
  w.row({"stance", "change", "", std::to_string(stats.change_total)});
  w.row({"stance", "hoax", "", std::to_string(stats.hoax_total)});
  w.row({"corpus", "", "", std::to_string(stats.total())});
  return w.str();
}

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

// Sort key for a comment inside its stratum. Depends only on the seed, the
// stratum and the comment id, never on input order.
inline std::uint64_t sample_priority(std::uint64_t seed, const StratumKey& key,
                                     std::string_view comment_id) {
  return combine({seed, key.hash(), fnv1a(comment_id)});
}

// Comment indices grouped by stratum, each group sorted by priority.
inline std::map<StratumKey, std::vector<std::size_t>> ranked_strata(
    const Corpus& corpus, std::uint64_t seed) {
  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.comments().size(); ++i) {
    strata[corpus.stratum_of(corpus.comments()[i])].push_back(i);
  }
  for (auto& [key, members] : strata) {
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    ranked.reserve(members.size());
    for (auto i : members) {
      ranked.emplace_back(sample_priority(seed, key, corpus.comments()[i].comment_id), i);
    }
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return corpus.comments()[a.second].comment_id <
             corpus.comments()[b.second].comment_id;
    });
    for (std::size_t r = 0; r < ranked.size(); ++r) members[r] = ranked[r].second;
  }
  return strata;
}

}  // namespace detail

// round-half-up(fraction * size), at least 1 for a non-empty stratum.
inline std::size_t stratum_quota(double fraction, std::size_t size) {
  if (size == 0) return 0;
  // The epsilon keeps exact halves such as 0.1 * 45 from rounding down
  // through representation error.
  auto k = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(size) + 0.5 + 1e-9));
  return std::clamp<std::size_t>(k, 1, size);
}

inline Corpus stratified_sample(const Corpus& corpus, double fraction,
                                std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw UsageError(fmt::format("sample fraction {} is outside (0, 1]", fraction));
  }
  if (corpus.empty()) throw DataError("cannot sample an empty corpus");
  std::vector<bool> keep(corpus.size(), false);
  for (const auto& [key, members] : detail::ranked_strata(corpus, seed)) {
    auto k = stratum_quota(fraction, members.size());
    for (std::size_t r = 0; r < k; ++r) keep[members[r]] = true;
  }
  std::vector<Comment> chosen;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (keep[i]) chosen.push_back(corpus.comments()[i]);
  }
  std::string note = fmt::format("stratified sample fraction={} seed={}",
                                 detail::format_real(fraction), seed);
  if (!corpus.provenance().empty()) note = corpus.provenance() + "; " + note;
  return Corpus(corpus.videos(), std::move(chosen), std::move(note),
                {.allow_external_parents = true});
}

// Even allocation of n_total across strata. Strata too small for their
// share give everything they have and the remainder is re-divided among the
// rest; the final fractional seats go by largest remainder, ties broken by a
// seeded stratum order.
inline std::map<StratumKey, std::size_t> balanced_allocation(
    const std::map<StratumKey, std::size_t>& available, std::size_t n_total,
    std::uint64_t seed) {
  std::map<StratumKey, std::size_t> alloc;
  std::vector<StratumKey> open;
  std::size_t capacity = 0;
  for (const auto& [key, n] : available) {
    alloc[key] = 0;
    capacity += n;
    if (n > 0) open.push_back(key);
  }
  if (n_total > capacity) {
    throw DataError(fmt::format("requested {} comments but only {} are available",
                                n_total, capacity));
  }
  std::size_t remaining = n_total;
  // Water-filling: saturate strata whose availability is below the share.
  while (!open.empty()) {
    double share = static_cast<double>(remaining) / static_cast<double>(open.size());
    std::vector<StratumKey> still_open;
    bool saturated = false;
    for (const auto& key : open) {
      if (static_cast<double>(available.at(key)) <= share) {
        alloc[key] = available.at(key);
        remaining -= available.at(key);
        saturated = true;
      } else {
        still_open.push_back(key);
      }
    }
    open = std::move(still_open);
    if (!saturated) break;
  }
  if (open.empty()) return alloc;
  std::size_t base = remaining / open.size();
  std::size_t extra = remaining % open.size();
  // Remainders are equal across open strata, so the seeded order decides.
  std::sort(open.begin(), open.end(), [seed](const StratumKey& a, const StratumKey& b) {
    auto ha = detail::combine({seed, a.hash()});
    auto hb = detail::combine({seed, b.hash()});
    return ha != hb ? ha < hb : a < b;
  });
  for (std::size_t i = 0; i < open.size(); ++i) {
    alloc[open[i]] = base + (i < extra ? 1 : 0);
  }
  return alloc;
}

// Ordered by stratum, then by seeded priority within the stratum.
inline std::vector<Comment> balanced_sample(const Corpus& corpus,
                                            std::size_t n_total,
                                            std::uint64_t seed) {
  if (n_total == 0) throw UsageError("balanced sample size must be positive");
  if (n_total > corpus.size()) {
    throw DataError(fmt::format("balanced sample of {} exceeds corpus size {}",
                                n_total, corpus.size()));
  }
  auto strata = detail::ranked_strata(corpus, seed);
  std::map<StratumKey, std::size_t> available;
  for (const auto& [key, members] : strata) available[key] = members.size();
  auto alloc = balanced_allocation(available, n_total, seed);
  std::vector<Comment> out;
  out.reserve(n_total);
  for (const auto& [key, members] : strata) {
    for (std::size_t r = 0; r < alloc[key]; ++r) {
      out.push_back(corpus.comments()[members[r]]);
    }
  }
  return out;
}

}  // namespace topicnet

#endif  // TOPICNET_CORPUS_HPP_
