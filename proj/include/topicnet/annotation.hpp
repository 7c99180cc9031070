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

// Two-step topic annotation: discovery of a closed topic set with
// rationales, then per-comment labeling against it, repeated over runs and
// consolidated by majority vote.

#ifndef TOPICNET_ANNOTATION_HPP_
#define TOPICNET_ANNOTATION_HPP_

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "topicnet/corpus.hpp"
#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"
#include "topicnet/prompt.hpp"
#include "topicnet/provider.hpp"
#include "topicnet/topics.hpp"

namespace topicnet {

// Thread-safe warning sink. Warnings are also echoed to stderr when `echo`.
class Diagnostics {
 public:
  explicit Diagnostics(bool echo = false) : echo_(echo) {}

  void warn(std::string message) {
    std::lock_guard lock(mu_);
    if (echo_) std::cerr << "warning: " << message << '\n';
    warnings_.push_back(std::move(message));
  }

  std::vector<std::string> warnings() const {
    std::lock_guard lock(mu_);
    return warnings_;
  }

 private:
  bool echo_;
  mutable std::mutex mu_;
  std::vector<std::string> warnings_;
};

struct RequestSettings {
  std::string model_name = "gpt-4o-mini";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  RetryPolicy retry;
  Sleeper sleep = real_sleep;
};

namespace detail {

inline CompletionRequest make_request(const RequestSettings& s, RenderedPrompt prompt) {
  return {s.model_name, std::move(prompt.system_message), std::move(prompt.user_message),
          s.temperature, s.max_output_tokens};
}

inline void forward_warnings(const RenderedPrompt& p, Diagnostics* diag) {
  if (diag == nullptr) return;
  for (const auto& w : p.warnings) diag->warn(w);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Step 1: discovery

// Merges duplicate labels (first rationale wins, with a warning) and
// enforces the topic cap.
inline TopicSet assemble_topic_set(std::vector<Topic> parsed, std::size_t max_topics,
                                   Diagnostics* diag = nullptr) {
  TopicSet set;
  for (auto& t : parsed) {
    if (set.contains(t.label)) {
      if (diag) diag->warn(fmt::format("duplicate topic '{}' merged; first rationale kept", t.label));
      continue;
    }
    set.topics.push_back(std::move(t));
  }
  if (set.topics.empty()) throw SchemaError("no topics extracted from discovery response");
  if (set.topics.size() > max_topics) {
    throw SchemaError(fmt::format(
        "discovery returned {} topics, more than max_topics={}; re-run discovery",
        set.topics.size(), max_topics));
  }
  set.validate(max_topics);
  return set;
}

inline TopicSet discover_topics(const std::vector<Comment>& sample, Provider& provider,
                                const PromptTemplate& tmpl, std::size_t max_topics,
                                const RequestSettings& settings = {},
                                Diagnostics* diag = nullptr) {
  if (tmpl.step() != PromptStep::kDiscover) {
    throw UsageError("discover_topics needs a Discover template");
  }
  if (sample.empty()) throw DataError("discovery sample is empty");
  auto prompt = render_prompt(tmpl, {{"comments", format_comment_list(sample)},
                                     {"count", std::to_string(sample.size())},
                                     {"max_topics", std::to_string(max_topics)}});
  detail::forward_warnings(prompt, diag);
  auto request = detail::make_request(settings, std::move(prompt));
  // One extra attempt when the reply has no parseable block.
  for (int attempt = 0;; ++attempt) {
    auto response = complete(provider, request, settings.retry, settings.sleep);
    try {
      auto set = assemble_topic_set(parse_topic_list(response.content), max_topics, diag);
      for (const auto& c : sample) set.source_sample_ids.push_back(c.comment_id);
      return set;
    } catch (const SchemaError& e) {
      if (attempt >= 1) {
        throw SchemaError(fmt::format("unparseable topic list after retry: {}", e.what()));
      }
      if (diag) diag->warn(fmt::format("discovery response rejected ({}); retrying", e.what()));
    }
  }
}

// ---------------------------------------------------------------------------
// Step 2: labeling

struct AnnotationRun {
  int run_id = 0;
  std::map<std::string, std::string> labels;          // comment_id -> topic | OUTLIER
  std::map<std::string, std::string> raw_rationales;  // when the model gave one
  std::map<std::string, std::string> off_list;        // comment_id -> raw off-list answer

  bool operator==(const AnnotationRun&) const = default;
};

struct LabelDecision {
  std::string label;  // topic label or OUTLIER
  std::optional<std::string> rationale;
  std::string raw;     // first line of the answer, before normalization
  bool off_list = false;
};

// Reads a labeling answer: first line of the fenced block (or the content),
// optional "— rationale" suffix, normalized and checked against the topics.
inline LabelDecision interpret_label_response(std::string_view content, const TopicSet& topics) {
  LabelDecision d;
  for (const auto& line : detail::structured_block_lines(content)) {
    if (!detail::trim(line).empty()) {
      d.raw = detail::trim(line);
      break;
    }
  }
  std::string label_part = d.raw;
  if (auto entry = detail::split_entry(detail::strip_list_marker(d.raw))) {
    label_part = entry->first;
    auto r = detail::clean_rationale(entry->second);
    if (!r.empty()) d.rationale = r;
  }
  auto norm = normalize_label(label_part);
  if (norm == normalize_label(kOutlier)) {
    d.label = std::string(kOutlier);
  } else if (topics.contains(norm)) {
    d.label = norm;
  } else {
    d.label = std::string(kOutlier);
    d.off_list = true;
  }
  return d;
}

struct CheckpointRecord {
  int run_id = 0;
  std::string comment_id;
  std::string label;
  std::string raw;
  std::optional<std::string> rationale;
};

inline std::string checkpoint_line(const CheckpointRecord& r) {
  nlohmann::ordered_json j{{"run_id", r.run_id},
                           {"comment_id", r.comment_id},
                           {"label", r.label},
                           {"raw", r.raw}};
  if (r.rationale) j["rationale"] = *r.rationale;
  return j.dump() + "\n";
}

// Reads every well-formed record. A torn final line from an interrupted
// write is skipped.
inline std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path) {
  std::vector<CheckpointRecord> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& l : detail::lines(detail::read_file(path))) {
    auto j = nlohmann::json::parse(l, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    try {
      CheckpointRecord r;
      r.run_id = j.at("run_id").get<int>();
      r.comment_id = j.at("comment_id").get<std::string>();
      r.label = j.at("label").get<std::string>();
      r.raw = j.value("raw", std::string());
      if (j.contains("rationale")) r.rationale = j["rationale"].get<std::string>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception&) {
      continue;
    }
  }
  return out;
}

// Rewrites a checkpoint deduplicated by (run_id, comment_id) and sorted, so
// its bytes no longer depend on request completion order.
inline void compact_checkpoint(const std::filesystem::path& path) {
  std::map<std::pair<int, std::string>, CheckpointRecord> unique;
  for (auto& r : read_checkpoint(path)) unique.try_emplace({r.run_id, r.comment_id}, std::move(r));
  std::string out;
  for (const auto& [key, r] : unique) out += checkpoint_line(r);
  detail::write_file_atomic(path, out);
}

struct AnnotateOptions {
  int run_id = 1;
  std::size_t concurrency_limit = 4;
  std::optional<std::filesystem::path> checkpoint;
  RequestSettings request;
  Diagnostics* diagnostics = nullptr;
};

inline void record_decision(AnnotationRun& run, const std::string& id, const std::string& label,
                            const std::string& raw, const std::optional<std::string>& rationale,
                            bool off_list) {
  run.labels[id] = label;
  if (rationale) run.raw_rationales[id] = *rationale;
  if (off_list) run.off_list[id] = raw;
}

// Labels every comment of `subset` exactly once. Up to concurrency_limit
// requests are in flight; results merge by comment_id so completion order
// never matters. With a checkpoint, finished labels are appended as they
// arrive and a rerun skips them.
inline AnnotationRun annotate_run(const std::vector<Comment>& subset, const TopicSet& topics,
                                  Provider& provider, const PromptTemplate& tmpl,
                                  const AnnotateOptions& options) {
  if (tmpl.step() != PromptStep::kLabel) throw UsageError("annotate_run needs a Label template");
  topics.validate(std::max<std::size_t>(topics.topics.size(), 1));
  AnnotationRun run;
  run.run_id = options.run_id;

  std::set<std::string> wanted;
  for (const auto& c : subset) {
    if (!wanted.insert(c.comment_id).second) {
      throw DataError(fmt::format("comment '{}' appears twice in the annotation subset",
                                  c.comment_id));
    }
  }
  if (options.checkpoint) {
    for (const auto& r : read_checkpoint(*options.checkpoint)) {
      if (r.run_id != options.run_id || !wanted.contains(r.comment_id)) continue;
      if (run.labels.contains(r.comment_id)) continue;
      if (r.label != kOutlier && !topics.contains(r.label)) continue;  // stale topic set
      bool off_list = r.label == kOutlier && normalize_label(r.raw) != normalize_label(kOutlier);
      record_decision(run, r.comment_id, r.label, r.raw, r.rationale, off_list);
    }
  }
  std::vector<const Comment*> pending;
  for (const auto& c : subset) {
    if (!run.labels.contains(c.comment_id)) pending.push_back(&c);
  }
  if (pending.empty()) return run;

  const auto topic_list = format_topic_list(topics);
  std::ofstream checkpoint_out;
  if (options.checkpoint) {
    if (options.checkpoint->has_parent_path()) {
      std::filesystem::create_directories(options.checkpoint->parent_path());
    }
    // Terminate a torn last line so appended records stay parseable.
    bool torn = false;
    if (std::filesystem::exists(*options.checkpoint)) {
      auto existing = detail::read_file(*options.checkpoint);
      torn = !existing.empty() && existing.back() != '\n';
    }
    checkpoint_out.open(*options.checkpoint, std::ios::app | std::ios::binary);
    if (!checkpoint_out) {
      throw DataError(fmt::format("cannot open checkpoint '{}'", options.checkpoint->string()));
    }
    if (torn) checkpoint_out << '\n';
  }

  std::mutex mu;  // guards run, checkpoint_out, failure
  std::exception_ptr failure;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    while (!stop.load()) {
      auto i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const Comment& c = *pending[i];
      try {
        auto prompt = render_prompt(tmpl, {{"topics", topic_list}, {"comment", c.text}});
        auto response = complete(provider, detail::make_request(options.request, std::move(prompt)),
                                 options.request.retry, options.request.sleep);
        auto d = interpret_label_response(response.content, topics);
        if (d.off_list && options.diagnostics) {
          options.diagnostics->warn(fmt::format("run {}: comment '{}' got off-list label '{}'",
                                                options.run_id, c.comment_id, d.raw));
        }
        std::lock_guard lock(mu);
        if (checkpoint_out.is_open()) {
          checkpoint_out << checkpoint_line({options.run_id, c.comment_id, d.label, d.raw,
                                             d.rationale});
          checkpoint_out.flush();
        }
        record_decision(run, c.comment_id, d.label, d.raw, d.rationale, d.off_list);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        stop.store(true);
        return;
      }
    }
  };

  const auto n_workers = std::clamp<std::size_t>(options.concurrency_limit, 1, pending.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return run;
}

// Final per-run file: one {run_id, comment_id, label, rationale?} per line,
// sorted by comment_id.
inline std::string run_jsonl(const AnnotationRun& run) {
  std::string out;
  for (const auto& [id, label] : run.labels) {
    nlohmann::ordered_json j{{"run_id", run.run_id}, {"comment_id", id}, {"label", label}};
    if (auto it = run.raw_rationales.find(id); it != run.raw_rationales.end()) {
      j["rationale"] = it->second;
    }
    if (auto it = run.off_list.find(id); it != run.off_list.end()) j["off_list"] = it->second;
    out += j.dump() + "\n";
  }
  return out;
}

inline AnnotationRun parse_run(std::string_view text) {
  AnnotationRun run;
  bool first = true;
  std::size_t line_no = 0;
  for (const auto& l : detail::lines(text)) {
    ++line_no;
    try {
      auto j = nlohmann::json::parse(l);
      int id = j.at("run_id").get<int>();
      if (first) run.run_id = id;
      if (id != run.run_id) throw DataError("mixed run ids in one run file");
      first = false;
      auto cid = j.at("comment_id").get<std::string>();
      run.labels[cid] = j.at("label").get<std::string>();
      if (j.contains("rationale")) run.raw_rationales[cid] = j["rationale"].get<std::string>();
      if (j.contains("off_list")) run.off_list[cid] = j["off_list"].get<std::string>();
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(fmt::format("run file line {}: {}", line_no, e.what()));
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Consolidation

struct FinalAnnotation {
  std::map<std::string, std::string> labels;  // comment_id -> topic | NOISE
  std::vector<std::pair<std::string, std::string>> resolution_log;  // (comment_id, reason)

  std::size_t count(std::string_view label) const {
    return static_cast<std::size_t>(std::count_if(
        labels.begin(), labels.end(), [&](const auto& kv) { return kv.second == label; }));
  }
};

// Majority label per comment; ties go to the label of the lowest run_id
// among the tied ones. Remaining OUTLIERs take the supplied resolution, or
// become NOISE.
inline FinalAnnotation consolidate_runs(std::vector<AnnotationRun> runs,
                                        const std::map<std::string, std::string>& resolutions = {}) {
  if (runs.empty()) throw DataError("no annotation runs to consolidate");
  std::sort(runs.begin(), runs.end(),
            [](const auto& a, const auto& b) { return a.run_id < b.run_id; });
  for (const auto& r : runs) {
    if (r.labels.size() != runs.front().labels.size() ||
        !std::equal(r.labels.begin(), r.labels.end(), runs.front().labels.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; })) {
      throw DataError(fmt::format("runs {} and {} cover different comment sets",
                                  runs.front().run_id, r.run_id));
    }
  }
  FinalAnnotation out;
  for (const auto& [id, unused] : runs.front().labels) {
    std::map<std::string, std::size_t> votes;
    for (const auto& r : runs) ++votes[r.labels.at(id)];
    std::size_t best = 0;
    for (const auto& [label, n] : votes) best = std::max(best, n);
    std::string winner;
    for (const auto& r : runs) {
      if (votes[r.labels.at(id)] == best) {
        winner = r.labels.at(id);
        break;
      }
    }
    if (winner == kOutlier) {
      if (auto it = resolutions.find(id); it != resolutions.end()) {
        std::string resolved = normalize_label(it->second);
        if (resolved == normalize_label(kNoise)) {
          out.resolution_log.emplace_back(id, "outlier reviewed: noise");
          winner = std::string(kNoise);
        } else {
          out.resolution_log.emplace_back(id, fmt::format("outlier resolved to '{}'", resolved));
          winner = resolved;
        }
      } else {
        out.resolution_log.emplace_back(id, "unresolved outlier labeled noise");
        winner = std::string(kNoise);
      }
    }
    out.labels[id] = winner;
  }
  return out;
}

// Resolution file: line-delimited {comment_id, label}.
inline std::map<std::string, std::string> parse_resolutions(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  for (const auto& l : detail::lines(text)) {
    ++line_no;
    if (detail::trim(l).empty()) continue;
    try {
      auto j = nlohmann::json::parse(l);
      out[j.at("comment_id").get<std::string>()] = j.at("label").get<std::string>();
    } catch (const std::exception& e) {
      throw DataError(fmt::format("resolution file line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

inline std::string final_annotation_jsonl(const FinalAnnotation& final) {
  std::string out;
  for (const auto& [id, label] : final.labels) {
    out += nlohmann::ordered_json{{"comment_id", id}, {"label", label}}.dump() + "\n";
  }
  return out;
}

inline FinalAnnotation parse_final_annotation(std::string_view text) {
  FinalAnnotation f;
  std::size_t line_no = 0;
  for (const auto& l : detail::lines(text)) {
    ++line_no;
    try {
      auto j = nlohmann::json::parse(l);
      f.labels[j.at("comment_id").get<std::string>()] = j.at("label").get<std::string>();
    } catch (const std::exception& e) {
      throw DataError(fmt::format("final annotation line {}: {}", line_no, e.what()));
    }
  }
  return f;
}

struct DistributionRow {
  std::string topic;
  std::string rationale;
  std::size_t count = 0;
};

struct TopicDistribution {
  std::vector<DistributionRow> rows;  // topics, count descending
  std::size_t noise = 0;

  std::size_t total() const {
    std::size_t n = noise;
    for (const auto& r : rows) n += r.count;
    return n;
  }
};

// Every topic appears, including zero counts; ties keep topic-set order.
inline TopicDistribution topic_distribution(const FinalAnnotation& final, const TopicSet& topics) {
  TopicDistribution d;
  std::map<std::string, std::size_t> counts;
  for (const auto& [id, label] : final.labels) {
    if (label == kNoise) {
      ++d.noise;
    } else if (topics.contains(label)) {
      ++counts[label];
    } else {
      throw DataError(fmt::format("comment '{}' carries label '{}' outside the topic set", id, label));
    }
  }
  for (const auto& t : topics.topics) d.rows.push_back({t.label, t.rationale, counts[t.label]});
  std::stable_sort(d.rows.begin(), d.rows.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  return d;
}

inline std::string distribution_tsv(const TopicDistribution& d) {
  detail::TsvWriter w({"Topic", "Rationale", "Count"});
  for (const auto& r : d.rows) w.row({r.topic, r.rationale, std::to_string(r.count)});
  w.row({"noise", "Comments that could not be assigned to any topic.", std::to_string(d.noise)});
  return w.str();
}

}  // namespace topicnet

#endif  // TOPICNET_ANNOTATION_HPP_
