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

// Cohen's kappa between annotation runs.

#ifndef TOPICNET_AGREEMENT_HPP_
#define TOPICNET_AGREEMENT_HPP_

#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "topicnet/annotation.hpp"
#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"

namespace topicnet {

// Labels aligned to a shared, ordered item index.
struct LabelVector {
  std::vector<std::string> ids;
  std::vector<std::string> labels;

  static LabelVector from_run(const AnnotationRun& run) {
    LabelVector v;
    for (const auto& [id, label] : run.labels) {
      v.ids.push_back(id);
      v.labels.push_back(label);
    }
    return v;
  }
};

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  std::size_t n_items = 0;
  bool degenerate = false;  // p_e == 1: both raters constant and equal
};

inline KappaResult cohens_kappa(const LabelVector& a, const LabelVector& b) {
  if (a.labels.size() != b.labels.size()) {
    throw DataError(fmt::format("kappa: label vectors differ in length ({} vs {})",
                                a.labels.size(), b.labels.size()));
  }
  if (a.labels.empty()) throw DataError("kappa: label vectors are empty");
  if (a.ids.size() != a.labels.size() || b.ids.size() != b.labels.size()) {
    throw DataError("kappa: id index does not match label count");
  }
  if (a.ids != b.ids) throw DataError("kappa: item ids are not aligned");

  const auto n = a.labels.size();
  std::map<std::string, std::size_t> margin_a, margin_b;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ++margin_a[a.labels[i]];
    ++margin_b[b.labels[i]];
    if (a.labels[i] == b.labels[i]) ++agree;
  }
  const double dn = static_cast<double>(n);
  KappaResult r;
  r.n_items = n;
  r.observed = static_cast<double>(agree) / dn;
  // Integer accumulation keeps p_e exact up to the final division.
  unsigned long long chance = 0;
  for (const auto& [label, count] : margin_a) {
    auto it = margin_b.find(label);
    if (it != margin_b.end()) chance += static_cast<unsigned long long>(count) * it->second;
  }
  r.expected = static_cast<double>(chance) / (dn * dn);
  if (chance == static_cast<unsigned long long>(n) * n) {
    r.degenerate = true;
    r.kappa = 1.0;
    return r;
  }
  // (p_o - p_e) / (1 - p_e) on integer counts: (n*agree - chance) / (n^2 - chance).
  const double num = dn * static_cast<double>(agree) - static_cast<double>(chance);
  const double den = dn * dn - static_cast<double>(chance);
  r.kappa = num / den;
  return r;
}

struct PairwiseKappa {
  int run_a = 0;
  int run_b = 0;
  KappaResult result;
};

inline std::vector<PairwiseKappa> pairwise_kappas(const std::vector<AnnotationRun>& runs) {
  if (runs.size() < 2) {
    throw DataError(fmt::format("agreement needs at least 2 runs, got {}", runs.size()));
  }
  std::vector<LabelVector> vectors;
  for (const auto& r : runs) vectors.push_back(LabelVector::from_run(r));
  std::vector<PairwiseKappa> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      if (vectors[i].ids != vectors[j].ids) {
        throw DataError(fmt::format("runs {} and {} cover different comment sets",
                                    runs[i].run_id, runs[j].run_id));
      }
      out.push_back({runs[i].run_id, runs[j].run_id, cohens_kappa(vectors[i], vectors[j])});
    }
  }
  return out;
}

inline double mean_kappa(const std::vector<PairwiseKappa>& pairs) {
  if (pairs.empty()) throw DataError("no kappa pairs to average");
  double sum = 0.0;
  for (const auto& p : pairs) sum += p.result.kappa;
  return sum / static_cast<double>(pairs.size());
}

// Unweighted mean over all unordered run pairs.
inline double mean_pairwise_kappa(const std::vector<AnnotationRun>& runs) {
  return mean_kappa(pairwise_kappas(runs));
}

// Report rows {pair, kappa, p_o, p_e, n} followed by the mean.
inline std::string kappa_tsv(const std::vector<PairwiseKappa>& pairs) {
  detail::TsvWriter w({"pair", "kappa", "p_o", "p_e", "n"});
  for (const auto& p : pairs) {
    w.row({fmt::format("{}-{}", p.run_a, p.run_b), detail::format_real(p.result.kappa),
           detail::format_real(p.result.observed), detail::format_real(p.result.expected),
           std::to_string(p.result.n_items)});
  }
  w.row({"mean", detail::format_real(mean_kappa(pairs)), "", "", ""});
  return w.str();
}

}  // namespace topicnet

#endif  // TOPICNET_AGREEMENT_HPP_
