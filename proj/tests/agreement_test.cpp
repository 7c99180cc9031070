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

#include "topicnet/agreement.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace topicnet {
namespace {

LabelVector vec(std::vector<std::string> labels) {
  LabelVector v;
  for (std::size_t i = 0; i < labels.size(); ++i) v.ids.push_back("i" + std::to_string(i));
  v.labels = std::move(labels);
  return v;
}

// Confusion-matrix evaluation of (p_o - p_e) / (1 - p_e).
double kappa_oracle(const std::vector<int>& a, const std::vector<int>& b, int k) {
  std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) m[a[i]][b[i]] += 1.0;
  const double n = static_cast<double>(a.size());
  double po = 0.0, pe = 0.0;
  for (int i = 0; i < k; ++i) {
    po += m[i][i] / n;
    double row = 0.0, col = 0.0;
    for (int j = 0; j < k; ++j) {
      row += m[i][j];
      col += m[j][i];
    }
    pe += (row / n) * (col / n);
  }
  return (po - pe) / (1.0 - pe);
}

TEST(CohensKappa, IdenticalVectorsGiveOne) {
  auto r = cohens_kappa(vec({"A", "B", "C", "A"}), vec({"A", "B", "C", "A"}));
  EXPECT_NEAR(r.kappa, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.observed, 1.0);
  EXPECT_FALSE(r.degenerate);
}

TEST(CohensKappa, BalancedDisagreementGivesZero) {
  auto r = cohens_kappa(vec({"A", "A", "B", "B"}), vec({"A", "B", "A", "B"}));
  EXPECT_NEAR(r.observed, 0.5, 1e-12);
  EXPECT_NEAR(r.expected, 0.5, 1e-12);
  EXPECT_NEAR(r.kappa, 0.0, 1e-12);
  EXPECT_EQ(r.n_items, 4u);
}

TEST(CohensKappa, SystematicDisagreement) {
  auto r = cohens_kappa(vec({"A", "A", "A", "B"}), vec({"B", "B", "B", "A"}));
  EXPECT_NEAR(r.observed, 0.0, 1e-12);
  EXPECT_NEAR(r.expected, 0.375, 1e-12);
  EXPECT_NEAR(r.kappa, -0.6, 1e-12);
}

TEST(CohensKappa, ConstantEqualRatersAreDegenerate) {
  auto r = cohens_kappa(vec({"A", "A", "A"}), vec({"A", "A", "A"}));
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.kappa, 1.0);
  EXPECT_EQ(r.expected, 1.0);
}

TEST(CohensKappa, Errors) {
  EXPECT_THROW(cohens_kappa(vec({"A"}), vec({"A", "B"})), DataError);
  EXPECT_THROW(cohens_kappa(vec({}), vec({})), DataError);
  auto a = vec({"A", "B"}), b = vec({"A", "B"});
  std::swap(b.ids[0], b.ids[1]);
  EXPECT_THROW(cohens_kappa(a, b), DataError);
}

// 1000 random cases: agreement with the oracle, symmetry, renaming and
// paired-permutation invariance, upper bound.
TEST(CohensKappa, RandomizedProperties) {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 6);
    const int n = 2 + static_cast<int>(rng() % 60);
    std::vector<int> a(n), b(n);
    const double agree_rate = std::uniform_real_distribution<double>(0, 1)(rng);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng() % k);
      b[i] = std::uniform_real_distribution<double>(0, 1)(rng) < agree_rate ? a[i]
                                                                          : static_cast<int>(rng() % k);
    }
    std::vector<std::string> names(k);
    for (int j = 0; j < k; ++j) names[j] = "topic" + std::to_string(j);
    auto to_vec = [&](const std::vector<int>& x, const std::vector<std::string>& alphabet) {
      std::vector<std::string> out;
      for (int v : x) out.push_back(alphabet[v]);
      return vec(out);
    };
    const auto r = cohens_kappa(to_vec(a, names), to_vec(b, names));
    if (r.degenerate) continue;
    EXPECT_NEAR(r.kappa, kappa_oracle(a, b, k), 1e-12);
    EXPECT_LE(r.kappa, 1.0 + 1e-15);
    EXPECT_EQ(r.kappa == 1.0, a == b);
    EXPECT_NEAR(cohens_kappa(to_vec(b, names), to_vec(a, names)).kappa, r.kappa, 1e-12);

    // Renaming through a random bijection.
    auto renamed = names;
    std::shuffle(renamed.begin(), renamed.end(), rng);
    for (auto& s : renamed) s = "x-" + s;
    EXPECT_NEAR(cohens_kappa(to_vec(a, renamed), to_vec(b, renamed)).kappa, r.kappa, 1e-12);

    // Paired permutation of items.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> pa(n), pb(n);
    for (int i = 0; i < n; ++i) {
      pa[i] = a[perm[i]];
      pb[i] = b[perm[i]];
    }
    EXPECT_NEAR(cohens_kappa(to_vec(pa, names), to_vec(pb, names)).kappa, r.kappa, 1e-12);
  }
}

AnnotationRun run(int id, std::vector<std::string> labels) {
  AnnotationRun r;
  r.run_id = id;
  for (std::size_t i = 0; i < labels.size(); ++i) r.labels["c" + std::to_string(i)] = labels[i];
  return r;
}

TEST(MeanPairwiseKappa, ThreeIdenticalRuns) {
  std::vector<AnnotationRun> runs{run(1, {"a", "b", "c"}), run(2, {"a", "b", "c"}),
                                  run(3, {"a", "b", "c"})};
  EXPECT_DOUBLE_EQ(mean_pairwise_kappa(runs), 1.0);
  EXPECT_EQ(pairwise_kappas(runs).size(), 3u);
}

TEST(MeanPairwiseKappa, UnweightedMeanOfPairs) {
  // (1,2) identical -> 1; the crossed A/B pattern against either -> 0.
  std::vector<AnnotationRun> runs{run(1, {"A", "A", "B", "B"}), run(2, {"A", "A", "B", "B"}),
                                  run(3, {"A", "B", "A", "B"})};
  auto pairs = pairwise_kappas(runs);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_NEAR(pairs[0].result.kappa, 1.0, 1e-12);
  EXPECT_NEAR(pairs[1].result.kappa, 0.0, 1e-12);
  EXPECT_NEAR(pairs[2].result.kappa, 0.0, 1e-12);
  EXPECT_NEAR(mean_kappa(pairs), 1.0 / 3.0, 1e-12);

  std::vector<PairwiseKappa> manual(3);
  manual[0].result.kappa = 1.0;
  manual[1].result.kappa = 0.5;
  manual[2].result.kappa = 0.0;
  EXPECT_DOUBLE_EQ(mean_kappa(manual), 0.5);
}

TEST(MeanPairwiseKappa, NeedsTwoRunsOverTheSameComments) {
  EXPECT_THROW(mean_pairwise_kappa({run(1, {"a"})}), DataError);
  EXPECT_THROW(mean_pairwise_kappa({run(1, {"a", "b"}), run(2, {"a"})}), DataError);
}

TEST(KappaTsv, RowsAndMean) {
  std::vector<AnnotationRun> runs{run(1, {"A", "A", "B", "B"}), run(2, {"A", "B", "A", "B"})};
  EXPECT_EQ(kappa_tsv(pairwise_kappas(runs)),
            "pair\tkappa\tp_o\tp_e\tn\n1-2\t0\t0.5\t0.5\t4\nmean\t0\t\t\t\n");
}

}  // namespace
}  // namespace topicnet
