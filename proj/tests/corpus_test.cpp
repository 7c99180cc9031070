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

#include "topicnet/corpus.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace topicnet {
namespace {

using testing::data_path;
using testing::expect_throw_with;

constexpr const char* kTiny =
    R"({"record":"video","video_id":"v1","stance":"change"}
{"record":"video","video_id":"v2","stance":"hoax","title":"Hoax?"}
{"comment_id":"a","video_id":"v1","author_id":"u1","text":"first"}
{"comment_id":"b","video_id":"v1","author_id":"u2","text":"reply","parent_comment_id":"a"}
{"comment_id":"c","video_id":"v2","author_id":"u3","text":"other","timestamp":"2023-01-02T03:04:05Z"}
)";

std::set<std::string> ids_of(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& x : c.comments()) out.insert(x.comment_id);
  return out;
}

std::map<std::string, std::size_t> per_video(const Corpus& c) {
  std::map<std::string, std::size_t> out;
  for (const auto& x : c.comments()) ++out[x.video_id];
  return out;
}

TEST(ParseCorpus, MinimalCorpusResolvesReply) {
  auto c = parse_corpus(kTiny);
  ASSERT_EQ(c.size(), 3u);
  ASSERT_EQ(c.videos().size(), 2u);
  const Comment* b = c.find_comment("b");
  ASSERT_NE(b, nullptr);
  ASSERT_TRUE(b->parent_comment_id);
  EXPECT_EQ(c.find_comment(*b->parent_comment_id)->author_id, "u1");
  EXPECT_EQ(c.video("v2").title, "Hoax?");
  EXPECT_EQ(c.video("v2").stance, Stance::kHoax);
}

TEST(ParseCorpus, UnknownVideoIsNamed) {
  expect_throw_with<DataError>(
      [] {
        parse_corpus(R"({"record":"video","video_id":"v1","stance":"change"}
{"comment_id":"a","video_id":"ghost","author_id":"u1","text":"x"})");
      },
      "ghost");
}

TEST(ParseCorpus, MalformedLineCitesLineNumber) {
  std::string text;
  text += R"({"record":"video","video_id":"v1","stance":"change"})" "\n";
  for (int i = 0; i < 5; ++i) {
    text += fmt::format(R"({{"comment_id":"c{}","video_id":"v1","author_id":"u","text":"t"}})", i);
    text += "\n";
  }
  text += "{not json\n";  // line 7
  expect_throw_with<DataError>([&] { parse_corpus(text); }, "line 7");
}

TEST(ParseCorpus, RejectsStructuralErrors) {
  const std::string video = R"({"record":"video","video_id":"v1","stance":"change"})" "\n";
  const std::string video2 = R"({"record":"video","video_id":"v2","stance":"hoax"})" "\n";
  expect_throw_with<DataError>(
      [&] {
        parse_corpus(video + R"({"comment_id":"a","video_id":"v1","author_id":"u","text":"t"}
{"comment_id":"a","video_id":"v1","author_id":"u","text":"t"})");
      },
      "duplicate comment_id");
  expect_throw_with<DataError>(
      [&] {
        parse_corpus(video + R"({"comment_id":"a","video_id":"v1","author_id":"u","text":"t","parent_comment_id":"zz"})");
      },
      "zz");
  expect_throw_with<DataError>(
      [&] {
        parse_corpus(video + R"({"comment_id":"a","video_id":"v1","author_id":"u","text":"t","parent_comment_id":"b"}
{"comment_id":"b","video_id":"v1","author_id":"u","text":"t","parent_comment_id":"a"})");
      },
      "cycle");
  expect_throw_with<DataError>(
      [&] {
        parse_corpus(video + video2 + R"({"comment_id":"a","video_id":"v1","author_id":"u","text":"t"}
{"comment_id":"b","video_id":"v2","author_id":"u","text":"t","parent_comment_id":"a"})");
      },
      "different video");
  expect_throw_with<DataError>(
      [&] {
        parse_corpus(video + R"({"comment_id":"a","video_id":"v1","author_id":"u","text":"t","timestamp":"yesterday"})");
      },
      "line 2");
  expect_throw_with<DataError>(
      [&] { parse_corpus(R"({"record":"video","video_id":"v1","stance":"sideways"})"); }, "sideways");
}

TEST(LoadCorpus, MissingFileNamesPath) {
  expect_throw_with<DataError>([] { load_corpus("/nonexistent/dir/corpus.jsonl"); },
                               "/nonexistent/dir/corpus.jsonl");
}

TEST(ParseCorpus, SerializeRoundTrip) {
  for (const char* name : {"corpus200.jsonl", "thread12.jsonl", "strata.jsonl"}) {
    auto c = load_corpus(data_path(name));
    auto again = parse_corpus(serialize_corpus(c));
    EXPECT_EQ(again.videos(), c.videos()) << name;
    EXPECT_EQ(again.comments(), c.comments()) << name;
    EXPECT_EQ(again.provenance(), c.provenance()) << name;
    EXPECT_EQ(serialize_corpus(again), serialize_corpus(c)) << name;
  }
}

// The fixture generator fixes 60/40 comments on the change videos and 55/45
// on the hoax videos.
TEST(CorpusStats, FixtureMatchesHandTally) {
  auto c = load_corpus(data_path("corpus200.jsonl"));
  auto s = corpus_stats(c);
  EXPECT_EQ(s.change_total, 100u);
  EXPECT_EQ(s.hoax_total, 100u);
  EXPECT_EQ(s.total(), 200u);
  EXPECT_EQ((s.per_stratum.at({Stance::kChange, "vc1"})), 60u);
  EXPECT_EQ((s.per_stratum.at({Stance::kChange, "vc2"})), 40u);
  EXPECT_EQ((s.per_stratum.at({Stance::kHoax, "vh1"})), 55u);
  EXPECT_EQ((s.per_stratum.at({Stance::kHoax, "vh2"})), 45u);
  const auto tsv = stats_tsv(s);
  EXPECT_NE(tsv.find("video\tchange\tvc1\t60\n"), std::string::npos);
  EXPECT_NE(tsv.find("corpus\t\t\t200\n"), std::string::npos);
}

TEST(CorpusStats, EmptyCorpusIsAllZero) {
  auto c = parse_corpus(R"({"record":"video","video_id":"v1","stance":"change"})");
  auto s = corpus_stats(c);
  EXPECT_EQ(s.total(), 0u);
  EXPECT_EQ((s.per_stratum.at({Stance::kChange, "v1"})), 0u);
}

TEST(StratifiedSample, FullFractionIsIdentity) {
  auto c = load_corpus(data_path("corpus200.jsonl"));
  auto s = stratified_sample(c, 1.0, 3);
  EXPECT_EQ(s.comments(), c.comments());
}

TEST(StratifiedSample, RoundHalfUpWithFloorOne) {
  auto c = load_corpus(data_path("strata.jsonl"));
  auto s = stratified_sample(c, 0.1, 42);
  auto sizes = per_video(s);
  EXPECT_EQ(sizes["s1"], 4u);   // 3.7
  EXPECT_EQ(sizes["s2"], 5u);   // 5.0
  EXPECT_EQ(sizes["s3"], 1u);   // 0.3, floor of one
  EXPECT_EQ(sizes["s4"], 1u);   // 1.0
}

TEST(StratifiedSample, HundredAtTenPercentIsTenAndRepeatable) {
  std::string text = R"({"record":"video","video_id":"v","stance":"hoax"})" "\n";
  for (int i = 0; i < 100; ++i) {
    text += fmt::format(R"({{"comment_id":"k{}","video_id":"v","author_id":"u","text":"t"}})", i) + "\n";
  }
  auto c = parse_corpus(text);
  auto a = stratified_sample(c, 0.1, 99), b = stratified_sample(c, 0.1, 99);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(ids_of(a), ids_of(b));
  EXPECT_NE(ids_of(a), ids_of(stratified_sample(c, 0.1, 100)));
}

// Exact half: 0.1 * 45 = 4.5 rounds up to 5 even though the product is
// slightly below 4.5 in binary.
TEST(StratifiedSample, ExactHalvesRoundUp) {
  EXPECT_EQ(stratum_quota(0.1, 45), 5u);
  EXPECT_EQ(stratum_quota(0.5, 3), 2u);
  EXPECT_EQ(stratum_quota(0.1, 44), 4u);
  EXPECT_EQ(stratum_quota(0.01, 3), 1u);
  EXPECT_EQ(stratum_quota(0.3, 0), 0u);
}

TEST(StratifiedSample, ExactnessAndOrderIndependenceProperty) {
  auto c = load_corpus(data_path("corpus200.jsonl"));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> frac(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double f = frac(rng);
    const auto seed = rng();
    auto s = stratified_sample(c, f, seed);
    auto sizes = per_video(s);
    for (const auto& [video, n] : per_video(c)) {
      auto expect = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(f * n + 0.5 + 1e-9)));
      EXPECT_EQ(sizes[video], std::min(expect, n)) << "f=" << f << " video " << video;
    }
    // Shuffling the input does not change membership.
    auto comments = c.comments();
    std::shuffle(comments.begin(), comments.end(), rng);
    Corpus shuffled(c.videos(), comments);
    EXPECT_EQ(ids_of(stratified_sample(shuffled, f, seed)), ids_of(s));
  }
}

TEST(StratifiedSample, RepliesKeepExternalParents) {
  auto c = load_corpus(data_path("corpus200.jsonl"));
  auto s = stratified_sample(c, 0.1, 1);
  std::size_t external = 0;
  for (const auto& x : s.comments()) {
    if (x.parent_comment_id && s.find_comment(*x.parent_comment_id) == nullptr) ++external;
  }
  EXPECT_GT(external, 0u);
  // Round-trips with external parents allowed.
  auto again = parse_corpus(serialize_corpus(s), {.allow_external_parents = true});
  EXPECT_EQ(again.comments(), s.comments());
}

TEST(StratifiedSample, Errors) {
  auto c = load_corpus(data_path("strata.jsonl"));
  EXPECT_THROW(stratified_sample(c, 0.0, 1), UsageError);
  EXPECT_THROW(stratified_sample(c, 1.5, 1), UsageError);
  auto empty = parse_corpus(R"({"record":"video","video_id":"v1","stance":"change"})");
  EXPECT_THROW(stratified_sample(empty, 0.5, 1), DataError);
}

std::string equal_strata(int strata, int per) {
  std::string text;
  for (int s = 0; s < strata; ++s) {
    text += fmt::format(R"({{"record":"video","video_id":"v{}","stance":"{}"}})", s,
                        s % 2 ? "hoax" : "change") + "\n";
  }
  for (int s = 0; s < strata; ++s) {
    for (int i = 0; i < per; ++i) {
      text += fmt::format(R"({{"comment_id":"v{}-{}","video_id":"v{}","author_id":"u","text":"t"}})",
                          s, i, s) + "\n";
    }
  }
  return text;
}

TEST(BalancedSample, EvenSplit) {
  auto c = parse_corpus(equal_strata(4, 5));
  auto s = balanced_sample(c, 4, 9);
  std::map<std::string, int> n;
  for (const auto& x : s) ++n[x.video_id];
  EXPECT_EQ(n.size(), 4u);
  for (const auto& [v, k] : n) EXPECT_EQ(k, 1) << v;
}

TEST(BalancedSample, FiveHundredOverThirtyStrata) {
  auto c = parse_corpus(equal_strata(30, 40));
  auto s = balanced_sample(c, 500, 17);
  ASSERT_EQ(s.size(), 500u);
  std::map<std::string, int> n;
  for (const auto& x : s) ++n[x.video_id];
  int sixteen = 0, seventeen = 0;
  for (const auto& [v, k] : n) {
    EXPECT_TRUE(k == 16 || k == 17) << v << " got " << k;
    (k == 16 ? sixteen : seventeen)++;
  }
  // 500 = 30 * 16 + 20
  EXPECT_EQ(seventeen, 20);
  EXPECT_EQ(sixteen, 10);
}

TEST(BalancedSample, SmallStratumGivesAllAndRestIsReapportioned) {
  auto c = load_corpus(data_path("strata.jsonl"));  // 37, 50, 3, 10
  auto s = balanced_sample(c, 20, 2);
  std::map<std::string, int> n;
  for (const auto& x : s) ++n[x.video_id];
  EXPECT_EQ(n["s3"], 3);
  EXPECT_EQ(n["s1"] + n["s2"] + n["s4"], 17);
  for (const char* v : {"s1", "s2", "s4"}) EXPECT_TRUE(n[v] == 5 || n[v] == 6) << v;
  // Deterministic.
  EXPECT_EQ(balanced_sample(c, 20, 2), s);
  EXPECT_THROW(balanced_sample(c, 101, 2), DataError);
}

}  // namespace
}  // namespace topicnet
