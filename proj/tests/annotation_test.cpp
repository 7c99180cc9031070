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

#include "topicnet/annotation.hpp"

#include <atomic>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "topicnet/detail/io.hpp"

namespace topicnet {
namespace {

using testing::data_path;
using testing::expect_throw_with;
using testing::scratch_dir;

RequestSettings no_sleep() {
  RequestSettings s;
  s.sleep = [](std::chrono::milliseconds) {};
  return s;
}

TopicSet reference_set() {
  TopicSet s;
  s.topics = reference_topics();
  return s;
}

std::vector<Comment> fixture_comments() { return load_corpus(data_path("corpus200.jsonl")).comments(); }

// Answers every request with a fixed string.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<std::string> answers) : answers_(std::move(answers)) {}
  std::string id() const override { return "scripted"; }
  CompletionResponse send(const CompletionRequest&) override {
    auto i = calls_.fetch_add(1);
    return {answers_[std::min(i, answers_.size() - 1)], id()};
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<std::string> answers_;
  std::atomic<std::size_t> calls_{0};
};

// Delegates to a mock, but fails permanently after `budget` calls.
class CrashingProvider : public Provider {
 public:
  explicit CrashingProvider(std::size_t budget) : budget_(budget) {}
  std::string id() const override { return "crashing"; }
  CompletionResponse send(const CompletionRequest& r) override {
    if (calls_.fetch_add(1) >= budget_) throw ProviderError("connection lost");
    return inner_.send(r);
  }

 private:
  MockProvider inner_;
  std::size_t budget_;
  std::atomic<std::size_t> calls_{0};
};

// --- prompts ---------------------------------------------------------------

TEST(Prompt, MissingVariableIsNamed) {
  expect_throw_with<UsageError>(
      [] { render_prompt(default_label_template(), {{"comment", "x"}}); }, "topics");
}

TEST(Prompt, LabelPromptListsEveryTopic) {
  auto set = reference_set();
  auto p = render_prompt(default_label_template(),
                         {{"topics", format_topic_list(set)}, {"comment", "hi"}});
  for (const auto& t : set.topics) {
    EXPECT_NE(p.user_message.find(t.label), std::string::npos) << t.label;
  }
  EXPECT_NE(p.user_message.find("<<<\nhi\n>>>"), std::string::npos);
  EXPECT_TRUE(p.warnings.empty());
}

TEST(Prompt, UnusedVariableWarns) {
  auto p = render_prompt(default_label_template(),
                         {{"topics", "t"}, {"comment", "c"}, {"extra", "e"}});
  ASSERT_EQ(p.warnings.size(), 1u);
  EXPECT_NE(p.warnings[0].find("extra"), std::string::npos);
}

TEST(Prompt, UndeclaredPlaceholderRejected) {
  expect_throw_with<UsageError>(
      [] { PromptTemplate(PromptStep::kLabel, "sys {oops}", "user", {"comment"}); }, "oops");
}

TEST(Prompt, TemplateFileSections) {
  auto t = parse_template("[system]\nBe brief.\n\n[user]\nTopics:\n{topics}\n<<<\n{comment}\n>>>\n",
                          PromptStep::kLabel);
  EXPECT_EQ(t.system_text(), "Be brief.");
  EXPECT_EQ(t.user_text(), "Topics:\n{topics}\n<<<\n{comment}\n>>>");
  expect_throw_with<UsageError>([] { parse_template("[system]\nx\n", PromptStep::kLabel); },
                                "both");
  expect_throw_with<UsageError>(
      [] { parse_template("hello\n[system]\nx\n[user]\ny\n", PromptStep::kLabel); }, "before");
  expect_throw_with<UsageError>(
      [] { parse_template("[system]\n{max_topics}\n[user]\ny\n", PromptStep::kLabel); },
      "max_topics");
}

// --- topic lists -----------------------------------------------------------

TEST(TopicList, ParsesDashSeparatedEntries) {
  auto topics = parse_topic_list(
      "Sure! Here they are:\n```\n"
      "climate skepticism \xe2\x80\x94 Comments expressing doubt or denial.\n"
      "2. **Natural Cycles** - Perspectives on natural cycles.\n"
      "```\nLet me know if you need more.");
  ASSERT_EQ(topics.size(), 2u);
  EXPECT_EQ(topics[0].label, "climate skepticism");
  EXPECT_EQ(topics[0].rationale, "Comments expressing doubt or denial.");
  EXPECT_EQ(topics[1].label, "natural cycles");
}

TEST(TopicList, NoBlockIsSchemaError) {
  EXPECT_THROW(parse_topic_list(""), SchemaError);
  EXPECT_THROW(parse_topic_list("I could not find any topics."), SchemaError);
}

TEST(TopicList, NormalizationIsIdempotent) {
  for (const char* s : {"  **Media Portrayal.**  ", "\xe2\x80\x9cGovernment   Policy\xe2\x80\x9d",
                        "OUTLIER", "- climate solutions;", "", "...", "A  b\tC"}) {
    auto once = normalize_label(s);
    EXPECT_EQ(normalize_label(once), once) << s;
  }
  EXPECT_EQ(normalize_label("  **Media Portrayal.**  "), "media portrayal");
}

TEST(TopicList, JsonlRoundTrip) {
  auto set = reference_set();
  EXPECT_EQ(parse_topic_set(topic_set_jsonl(set)).topics, set.topics);
}

// --- discovery -------------------------------------------------------------

TEST(Discover, MockYieldsTenTopics) {
  MockProvider mock;
  auto comments = fixture_comments();
  auto set = discover_topics(comments, mock, default_discover_template(), 15, no_sleep());
  EXPECT_EQ(set.topics, reference_topics());
  EXPECT_EQ(set.source_sample_ids.size(), comments.size());
  EXPECT_EQ(mock.calls(), 1u);
}

TEST(Discover, DuplicatesMergedWithWarning) {
  ScriptedProvider p({"```\nalpha \xe2\x80\x94 first\nbeta \xe2\x80\x94 b\nAlpha \xe2\x80\x94 second\n```"});
  Diagnostics diag;
  auto set = discover_topics(fixture_comments(), p, default_discover_template(), 15, no_sleep(),
                             &diag);
  ASSERT_EQ(set.topics.size(), 2u);
  EXPECT_EQ(set.at("alpha").rationale, "first");
  ASSERT_EQ(diag.warnings().size(), 1u);
  EXPECT_NE(diag.warnings()[0].find("alpha"), std::string::npos);
}

TEST(Discover, TooManyTopicsIsSchemaError) {
  std::string block = "```\n";
  for (int i = 0; i < 20; ++i) block += fmt::format("topic {} \xe2\x80\x94 rationale {}\n", i, i);
  block += "```";
  ScriptedProvider p({block});
  expect_throw_with<SchemaError>(
      [&] { discover_topics(fixture_comments(), p, default_discover_template(), 15, no_sleep()); },
      "max_topics=15");
}

TEST(Discover, UnparseableReplyRetriedOnce) {
  ScriptedProvider p({"no idea", "```\nalpha \xe2\x80\x94 a\n```"});
  auto set = discover_topics(fixture_comments(), p, default_discover_template(), 15, no_sleep());
  EXPECT_EQ(set.labels(), std::vector<std::string>{"alpha"});
  ScriptedProvider never({"no idea"});
  EXPECT_THROW(discover_topics(fixture_comments(), never, default_discover_template(), 15,
                               no_sleep()),
               SchemaError);
  EXPECT_EQ(never.calls(), 2u);
}

// --- labeling --------------------------------------------------------------

TEST(Label, InterpretNormalizesPunctuation) {
  auto set = reference_set();
  auto d = interpret_label_response("```\nMedia portrayal.\n```", set);
  EXPECT_EQ(d.label, "media portrayal");
  EXPECT_FALSE(d.off_list);
  d = interpret_label_response("natural cycles \xe2\x80\x94 Mentions ice ages.", set);
  EXPECT_EQ(d.label, "natural cycles");
  EXPECT_EQ(d.rationale.value_or(""), "Mentions ice ages.");
}

TEST(Label, OffListBecomesOutlierKeepingRaw) {
  auto d = interpret_label_response("```\nSpace Weather\n```", reference_set());
  EXPECT_EQ(d.label, kOutlier);
  EXPECT_TRUE(d.off_list);
  EXPECT_EQ(d.raw, "Space Weather");
  d = interpret_label_response("OUTLIER", reference_set());
  EXPECT_EQ(d.label, kOutlier);
  EXPECT_FALSE(d.off_list);
}

TEST(Label, OffListRecordedAndWarned) {
  MockConfig cfg;
  cfg.off_list_rate = 1.0;
  MockProvider mock(cfg);
  auto comments = fixture_comments();
  comments.resize(5);
  Diagnostics diag;
  AnnotateOptions opt;
  opt.request = no_sleep();
  opt.diagnostics = &diag;
  auto run = annotate_run(comments, reference_set(), mock, default_label_template(), opt);
  for (const auto& c : comments) {
    EXPECT_EQ(run.labels.at(c.comment_id), kOutlier);
    EXPECT_EQ(run.off_list.at(c.comment_id), "space weather");
  }
  EXPECT_EQ(diag.warnings().size(), 5u);
}

TEST(Label, EveryCommentLabeledOnceAndDeterministic) {
  auto comments = fixture_comments();
  auto set = reference_set();
  AnnotateOptions opt;
  opt.request = no_sleep();
  MockProvider a, b;
  opt.concurrency_limit = 1;
  auto serial = annotate_run(comments, set, a, default_label_template(), opt);
  opt.concurrency_limit = 8;
  auto parallel = annotate_run(comments, set, b, default_label_template(), opt);
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial.labels.size(), comments.size());
  EXPECT_EQ(a.calls(), comments.size());
  for (const auto& [id, label] : serial.labels) EXPECT_TRUE(set.contains(label)) << id;
  EXPECT_EQ(run_jsonl(serial), run_jsonl(parallel));
  EXPECT_EQ(parse_run(run_jsonl(serial)), serial);
}

TEST(Label, DuplicateCommentRejected) {
  auto comments = fixture_comments();
  comments.resize(2);
  comments[1] = comments[0];
  MockProvider mock;
  AnnotateOptions opt;
  EXPECT_THROW(annotate_run(comments, reference_set(), mock, default_label_template(), opt),
               DataError);
}

TEST(Label, CheckpointResumeMatchesUninterruptedRun) {
  auto dir = scratch_dir();
  auto comments = fixture_comments();
  auto set = reference_set();
  AnnotateOptions opt;
  opt.request = no_sleep();
  opt.concurrency_limit = 3;
  opt.checkpoint = dir / "checkpoint.jsonl";

  CrashingProvider crashing(70);
  EXPECT_THROW(annotate_run(comments, set, crashing, default_label_template(), opt),
               ProviderError);
  const auto saved = read_checkpoint(*opt.checkpoint).size();
  EXPECT_GE(saved, 1u);
  EXPECT_LE(saved, 70u);

  // Simulate a torn final write.
  {
    std::ofstream f(*opt.checkpoint, std::ios::app);
    f << "{\"run_id\":1,\"comment_";
  }
  MockProvider resumed_mock;
  auto resumed = annotate_run(comments, set, resumed_mock, default_label_template(), opt);
  EXPECT_EQ(resumed_mock.calls(), comments.size() - saved);

  MockProvider fresh_mock;
  AnnotateOptions plain = opt;
  plain.checkpoint.reset();
  EXPECT_EQ(resumed, annotate_run(comments, set, fresh_mock, default_label_template(), plain));

  // A completed checkpoint makes the rerun free.
  MockProvider idle;
  annotate_run(comments, set, idle, default_label_template(), opt);
  EXPECT_EQ(idle.calls(), 0u);
}

TEST(Label, CompactedCheckpointIsSortedAndUnique) {
  auto dir = scratch_dir();
  auto path = dir / "c.jsonl";
  detail::write_file_atomic(path, checkpoint_line({2, "b", "x", "x", {}}) +
                                      checkpoint_line({1, "z", "y", "y", {}}) +
                                      checkpoint_line({2, "b", "w", "w", {}}) +
                                      checkpoint_line({1, "a", "y", "y", "why"}));
  compact_checkpoint(path);
  auto recs = read_checkpoint(path);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].comment_id, "a");
  EXPECT_EQ(recs[0].rationale.value_or(""), "why");
  EXPECT_EQ(recs[1].comment_id, "z");
  EXPECT_EQ(recs[2].label, "x");
}

// --- consolidation ---------------------------------------------------------

AnnotationRun make_run(int id, std::map<std::string, std::string> labels) {
  AnnotationRun r;
  r.run_id = id;
  r.labels = std::move(labels);
  return r;
}

TEST(Consolidate, MajorityAndTies) {
  auto f = consolidate_runs({make_run(1, {{"c1", "a"}, {"c2", "a"}, {"c3", "b"}}),
                             make_run(2, {{"c1", "a"}, {"c2", "b"}, {"c3", "c"}}),
                             make_run(3, {{"c1", "a"}, {"c2", "a"}, {"c3", "a"}})});
  EXPECT_EQ(f.labels.at("c1"), "a");
  EXPECT_EQ(f.labels.at("c2"), "a");
  EXPECT_EQ(f.labels.at("c3"), "b");  // three-way tie: lowest run wins
  EXPECT_TRUE(f.resolution_log.empty());
}

TEST(Consolidate, TieOrderIndependentOfInputOrder) {
  auto f = consolidate_runs({make_run(2, {{"c", "y"}}), make_run(1, {{"c", "x"}})});
  EXPECT_EQ(f.labels.at("c"), "x");
}

TEST(Consolidate, OutliersBecomeNoiseOrResolution) {
  std::string o(kOutlier);
  auto runs = std::vector{make_run(1, {{"c1", o}, {"c2", o}}), make_run(2, {{"c1", o}, {"c2", o}}),
                          make_run(3, {{"c1", o}, {"c2", "a"}})};
  auto f = consolidate_runs(runs);
  EXPECT_EQ(f.labels.at("c1"), kNoise);
  EXPECT_EQ(f.labels.at("c2"), kNoise);
  EXPECT_EQ(f.resolution_log.size(), 2u);
  auto r = consolidate_runs(runs, parse_resolutions("{\"comment_id\":\"c1\",\"label\":\"A\"}\n"));
  EXPECT_EQ(r.labels.at("c1"), "a");
  EXPECT_EQ(r.labels.at("c2"), kNoise);
}

TEST(Consolidate, MismatchedRunsRejected) {
  EXPECT_THROW(consolidate_runs({make_run(1, {{"c1", "a"}}), make_run(2, {{"c2", "a"}})}),
               DataError);
  EXPECT_THROW(consolidate_runs({}), DataError);
}

// --- distribution ----------------------------------------------------------

TEST(Distribution, CountsSortedAndConserved) {
  TopicSet set;
  set.topics = {{"a", "ra"}, {"b", "rb"}, {"c", "rc"}};
  FinalAnnotation f;
  f.labels = {{"1", "b"}, {"2", "a"}, {"3", "b"}, {"4", "b"}, {"5", std::string(kNoise)}};
  auto d = topic_distribution(f, set);
  ASSERT_EQ(d.rows.size(), 3u);
  EXPECT_EQ(d.rows[0].topic, "b");
  EXPECT_EQ(d.rows[0].count, 3u);
  EXPECT_EQ(d.rows[1].topic, "a");
  EXPECT_EQ(d.rows[2].count, 0u);
  EXPECT_EQ(d.noise, 1u);
  EXPECT_EQ(d.total(), f.labels.size());
  auto tsv = distribution_tsv(d);
  EXPECT_TRUE(tsv.starts_with("Topic\tRationale\tCount\nb\trb\t3\n")) << tsv;
}

TEST(Distribution, ConservationOverMockRun) {
  auto comments = fixture_comments();
  AnnotateOptions opt;
  opt.request = no_sleep();
  MockConfig cfg;
  cfg.outlier_rate = 0.2;
  std::vector<AnnotationRun> runs;
  for (int k = 1; k <= 3; ++k) {
    cfg.run_salt = static_cast<std::uint64_t>(k);
    MockProvider mock(cfg);
    opt.run_id = k;
    runs.push_back(annotate_run(comments, reference_set(), mock, default_label_template(), opt));
  }
  auto f = consolidate_runs(runs);
  auto d = topic_distribution(f, reference_set());
  EXPECT_EQ(d.total(), comments.size());
  EXPECT_GT(d.noise, 0u);
  EXPECT_EQ(parse_final_annotation(final_annotation_jsonl(f)).labels, f.labels);
}

TEST(Distribution, UnknownLabelRejected) {
  FinalAnnotation f;
  f.labels = {{"1", "zzz"}};
  EXPECT_THROW(topic_distribution(f, reference_set()), DataError);
}

}  // namespace
}  // namespace topicnet
