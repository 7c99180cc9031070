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

// End-to-end pipeline: ingest, sample, discover, annotate, agreement,
// network, fit, report. Every stage reads its inputs from and writes its
// outputs to one output directory, so stages can run one at a time or all
// together; manifest.json records a content digest for every artifact.
//
//   outdir/
//     manifest.json
//     stats.tsv
//     sample.jsonl
//     discovery_ids.txt  topics.jsonl
//     runs/run-<k>.jsonl  runs/checkpoint.jsonl
//     final_annotation.jsonl  topic_distribution.tsv
//     kappa.tsv
//     edgelists/<video>.tsv
//     engagement.tsv
//     fit/{coefficients.tsv, coefficients.txt, fit.json, residual_quantiles.tsv}
//     plots/<video>_<topic>.svg
//     report.txt

#ifndef TOPICNET_PIPELINE_HPP_
#define TOPICNET_PIPELINE_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "topicnet/agreement.hpp"
#include "topicnet/annotation.hpp"
#include "topicnet/corpus.hpp"
#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"
#include "topicnet/http_provider.hpp"
#include "topicnet/layout.hpp"
#include "topicnet/mixed_model.hpp"
#include "topicnet/network.hpp"
#include "topicnet/prompt.hpp"
#include "topicnet/provider.hpp"
#include "topicnet/topics.hpp"

#ifndef TOPICNET_VERSION
#define TOPICNET_VERSION "0.0.0"
#endif

namespace topicnet {

namespace fs = std::filesystem;

struct PipelineConfig {
  std::string corpus;
  std::string out = "out";
  double fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t discovery_size = 500;
  std::size_t max_topics = 15;
  int runs = 3;
  std::size_t concurrency = 4;
  std::string reference_topic = "climate change misinformation";
  std::string reference_stance = "hoax";
  std::string resolutions;  // optional OUTLIER resolution file
  std::string discover_template;  // optional prompt template files
  std::string label_template;

  // Mock block.
  bool mock = false;
  std::uint64_t mock_seed = 0;
  double mock_outlier_rate = 0.0;
  double mock_off_list_rate = 0.0;

  // Provider block.
  std::string endpoint;
  std::string model = "gpt-4o-mini";
  std::string credential_env;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int max_retries = 4;
  int retry_base_ms = 500;

  int layout_iterations = 500;
  bool plots = true;
  bool record_timings = false;

  void validate() const {
    if (mock == !endpoint.empty()) {
      throw UsageError(mock ? "config has both a mock block and a provider endpoint"
                            : "config needs either mock = true or a provider endpoint");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      throw UsageError(fmt::format("fraction {} is outside (0, 1]", fraction));
    }
    if (runs < 1) throw UsageError(fmt::format("runs must be at least 1, got {}", runs));
    if (discovery_size == 0) throw UsageError("discovery-size must be positive");
    if (max_topics == 0) throw UsageError("max-topics must be positive");
    if (concurrency == 0) throw UsageError("concurrency must be positive");
    if (layout_iterations < 0) throw UsageError("layout-iterations must be non-negative");
    for (double r : {mock_outlier_rate, mock_off_list_rate}) {
      if (!(r >= 0.0 && r <= 1.0)) throw UsageError("mock injection rates must lie in [0, 1]");
    }
    if (mock_outlier_rate + mock_off_list_rate > 1.0) {
      throw UsageError("mock injection rates sum to more than 1");
    }
    if (reference_stance != "change" && reference_stance != "hoax") {
      throw UsageError(fmt::format("reference-stance must be change or hoax, got '{}'",
                                   reference_stance));
    }
    if (normalize_label(reference_topic).empty()) throw UsageError("reference-topic is empty");
  }

  // Everything that determines the outputs. The output directory itself is
  // left out so that identical runs into different directories match.
  nlohmann::ordered_json snapshot() const {
    nlohmann::ordered_json j;
    j["corpus"] = corpus;
    j["fraction"] = fraction;
    j["seed"] = seed;
    j["discovery_size"] = discovery_size;
    j["max_topics"] = max_topics;
    j["runs"] = runs;
    j["concurrency"] = concurrency;
    j["reference_topic"] = reference_topic;
    j["reference_stance"] = reference_stance;
    j["resolutions"] = resolutions;
    j["discover_template"] = discover_template;
    j["label_template"] = label_template;
    if (mock) {
      j["mock"] = {{"seed", mock_seed},
                   {"outlier_rate", mock_outlier_rate},
                   {"off_list_rate", mock_off_list_rate}};
    } else {
      j["provider"] = {{"endpoint", endpoint},
                       {"model", model},
                       {"credential_env", credential_env},
                       {"temperature", temperature},
                       {"max_output_tokens", max_output_tokens},
                       {"max_retries", max_retries},
                       {"retry_base_ms", retry_base_ms}};
    }
    j["layout_iterations"] = layout_iterations;
    j["plots"] = plots;
    return j;
  }
};

// Builds the provider for one annotation run (run 0 is discovery).
using ProviderFactory = std::function<std::unique_ptr<Provider>(const PipelineConfig&, int run)>;

inline std::unique_ptr<Provider> default_provider(const PipelineConfig& cfg, int run) {
  if (cfg.mock) {
    MockConfig m;
    m.seed = cfg.mock_seed;
    m.outlier_rate = cfg.mock_outlier_rate;
    m.off_list_rate = cfg.mock_off_list_rate;
    m.run_salt = static_cast<std::uint64_t>(run);
    return std::make_unique<MockProvider>(std::move(m));
  }
  return std::make_unique<HttpProvider>(HttpProviderConfig{cfg.endpoint, cfg.credential_env});
}

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream& out = std::cout,
                    ProviderFactory factory = default_provider)
      : cfg_(std::move(config)),
        root_(cfg_.out),
        out_(out),
        factory_(std::move(factory)),
        diag_(/*echo=*/true) {
    cfg_.validate();
    cfg_.reference_topic = normalize_label(cfg_.reference_topic);
    load_manifest();
  }

  const PipelineConfig& config() const { return cfg_; }
  const std::string& current_stage() const { return stage_; }
  const nlohmann::ordered_json& manifest() const { return manifest_; }
  Diagnostics& diagnostics() { return diag_; }

  void ingest() {
    Stage s(*this, "ingest");
    const auto corpus = load_input_corpus();
    const auto stats = corpus_stats(corpus);
    emit("stats.tsv", stats_tsv(stats));
    out_ << fmt::format("corpus: {} videos, {} comments (change {}, hoax {})\n",
                        corpus.videos().size(), stats.total(), stats.change_total,
                        stats.hoax_total);
    for (const auto& [key, n] : stats.per_stratum) {
      out_ << fmt::format("  {}\t{}\t{}\n", to_string(key.stance), key.video_id, n);
    }
  }

  void sample() {
    Stage s(*this, "sample");
    const auto corpus = load_input_corpus();
    const auto sample = stratified_sample(corpus, cfg_.fraction, cfg_.seed);
    emit("sample.jsonl", serialize_corpus(sample));
    out_ << fmt::format("sample: {} of {} comments\n", sample.size(), corpus.size());
  }

  void discover() {
    Stage s(*this, "discover");
    const auto sample = load_sample();
    auto n = cfg_.discovery_size;
    if (n > sample.size()) {
      notice(fmt::format("discovery size {} exceeds the sample ({}); using the whole sample", n,
                         sample.size()));
      n = sample.size();
    }
    const auto chosen = balanced_sample(sample, n, cfg_.seed);
    auto provider = factory_(cfg_, 0);
    auto topics = discover_topics(chosen, *provider, load_template(PromptStep::kDiscover),
                                  cfg_.max_topics, request_settings(), &diag_);
    std::string ids;
    for (const auto& id : topics.source_sample_ids) ids += id + '\n';
    emit("discovery_ids.txt", ids);
    emit("topics.jsonl", topic_set_jsonl(topics));
    out_ << fmt::format("discover: {} topics from {} comments\n", topics.topics.size(),
                        chosen.size());
  }

  void annotate() {
    Stage s(*this, "annotate");
    const auto sample = load_sample();
    const auto topics = load_topics();
    const auto checkpoint = root_ / "runs" / "checkpoint.jsonl";
    const auto tmpl = load_template(PromptStep::kLabel);
    std::vector<AnnotationRun> runs;
    for (int r = 1; r <= cfg_.runs; ++r) {
      auto provider = factory_(cfg_, r);
      AnnotateOptions opt;
      opt.run_id = r;
      opt.concurrency_limit = cfg_.concurrency;
      opt.checkpoint = checkpoint;
      opt.request = request_settings();
      opt.diagnostics = &diag_;
      auto run = annotate_run(sample.comments(), topics, *provider, tmpl, opt);
      compact_checkpoint(checkpoint);
      emit(fmt::format("runs/run-{}.jsonl", r), run_jsonl(run));
      out_ << fmt::format("annotate: run {} labeled {} comments ({} off-list)\n", r,
                          run.labels.size(), run.off_list.size());
      runs.push_back(std::move(run));
    }
    record_output("runs/checkpoint.jsonl");

    std::map<std::string, std::string> resolutions;
    if (!cfg_.resolutions.empty()) resolutions = parse_resolutions(read_input(cfg_.resolutions));
    auto final = consolidate_runs(runs, resolutions);
    std::size_t outliers = 0;
    for (const auto& [id, label] : final.labels) {
      std::size_t votes = 0;
      for (const auto& r : runs) votes += r.labels.at(id) == kOutlier;
      if (2 * votes > runs.size()) ++outliers;
    }
    emit("final_annotation.jsonl", final_annotation_jsonl(final));
    const auto dist = topic_distribution(final, topics);
    emit("topic_distribution.tsv", distribution_tsv(dist));
    manifest_["annotation"] = {{"annotated", final.labels.size()},
                               {"majority_outlier", outliers},
                               {"noise", final.count(kNoise)},
                               {"resolved", final.resolution_log.size()}};
  }

  void agreement() {
    Stage s(*this, "agreement");
    if (cfg_.runs < 2) {
      notice("runs = 1: agreement stage skipped, kappa needs at least two runs");
      manifest_["kappa"] = {{"skipped", true}};
      return;
    }
    std::set<std::string> discovery;
    for (const auto& l : detail::lines(read_input("discovery_ids.txt"))) discovery.insert(l);
    std::vector<AnnotationRun> runs;
    for (int r = 1; r <= cfg_.runs; ++r) {
      runs.push_back(parse_run(read_input(fmt::format("runs/run-{}.jsonl", r))));
    }
    // Validation comments are the ones the topics were not derived from.
    std::vector<AnnotationRun> held_out = runs;
    for (auto& r : held_out) {
      std::erase_if(r.labels, [&](const auto& kv) { return discovery.contains(kv.first); });
    }
    std::string scope = "held_out";
    if (held_out.front().labels.empty()) {
      notice("every annotated comment was in the discovery sample; kappa uses all of them");
      held_out = runs;
      scope = "all";
    }
    const auto pairs = pairwise_kappas(held_out);
    emit("kappa.tsv", kappa_tsv(pairs));
    const double mean = mean_kappa(pairs);
    nlohmann::ordered_json k;
    k["skipped"] = false;
    k["scope"] = scope;
    k["n_items"] = held_out.front().labels.size();
    k["mean"] = mean;
    auto& list = k["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : pairs) {
      list.push_back({{"run_a", p.run_a}, {"run_b", p.run_b}, {"kappa", p.result.kappa}});
    }
    manifest_["kappa"] = std::move(k);
    out_ << fmt::format("agreement: mean pairwise kappa {:.4f} over {} comments\n", mean,
                        held_out.front().labels.size());
  }

  // Graphs use the full corpus reply structure; only the topic node sets
  // come from the annotated sample.
  void network() {
    Stage s(*this, "network");
    const auto corpus = load_input_corpus();
    const auto topics = load_topics();
    const auto final = parse_final_annotation(read_input("final_annotation.jsonl"));

    const auto edgelist = build_edgelist(corpus);
    for (const auto& v : corpus.videos()) {
      std::vector<ReplyEdge> mine;
      for (const auto& e : edgelist.edges) {
        if (e.video_id == v.video_id) mine.push_back(e);
      }
      emit(fmt::format("edgelists/{}.tsv", file_stem(v.video_id)), edgelist_tsv(mine));
    }
    const auto graphs = per_video_graphs(corpus, edgelist.edges);
    const auto table = engagement_table(corpus, graphs, final, topics);
    emit("engagement.tsv", engagement_tsv(table.rows));

    nlohmann::ordered_json ex;
    ex["unresolved_parents"] = edgelist.unresolved_parents.size();
    ex["empty_cells"] = table.empty_cells;
    ex["degenerate_cells"] = table.degenerate_cells;
    ex["outside_users"] = table.outside_users;
    std::size_t isolated = 0, video_edges = 0, self_loops = 0;
    for (const auto& [id, g] : graphs) {
      isolated += g.isolated_excluded();
      video_edges += g.video_edges_dropped();
      self_loops += g.self_loops_dropped();
    }
    ex["isolated_users"] = isolated;
    ex["video_edges_dropped"] = video_edges;
    ex["self_loops_dropped"] = self_loops;
    manifest_["excluded"] = std::move(ex);

    nlohmann::ordered_json net;
    for (Stance st : {Stance::kChange, Stance::kHoax}) {
      bool any = std::any_of(corpus.videos().begin(), corpus.videos().end(),
                             [&](const Video& v) { return v.stance == st; });
      if (!any) continue;
      const auto g = stance_graph(corpus, edgelist.edges, st);
      net[std::string(to_string(st))] = {{"nodes", g.node_count()}, {"edges", g.edge_count()}};
    }
    auto& totals = net["topic_nodes"] = nlohmann::ordered_json::array();
    for (const auto& [key, n] : table.topic_node_totals) {
      totals.push_back({{"stance", to_string(key.first)}, {"topic", key.second}, {"nodes", n}});
    }
    manifest_["network"] = std::move(net);

    if (cfg_.plots) write_plots(corpus, graphs, final, table);
    out_ << fmt::format("network: {} engagement rows ({} empty, {} degenerate cells)\n",
                        table.rows.size(), table.empty_cells, table.degenerate_cells);
  }

  void fit() {
    Stage s(*this, "fit");
    const auto rows = parse_engagement(read_input("engagement.tsv"));
    if (rows.empty()) {
      notice("engagement table has no rows; nothing to fit");
      emit("fit/fit.json", nlohmann::ordered_json{{"rows", 0}}.dump(2) + "\n");
      manifest_["fit"] = {{"rows", 0}};
      return;
    }
    const auto design = encode_design(rows, cfg_.reference_topic, parse_stance(cfg_.reference_stance));
    const auto model = fit_reml(design);
    const auto coefs = coefficient_table(model, design);
    for (const auto& c : coefs) {
      if (c.df_fallback) {
        diag_.warn(fmt::format("Satterthwaite df for '{}' fell back to residual df", c.name));
      }
    }
    std::vector<VifEntry> vifs;
    if (design.p() >= 3) {
      vifs = vif(design);
    } else {
      notice("fewer than two non-intercept columns; VIF skipped");
    }
    const auto resid = residual_diagnostics(model, design);
    emit("fit/coefficients.tsv", coefficient_tsv(coefs));
    emit("fit/coefficients.txt", coefficient_text(coefs));
    emit("fit/residual_quantiles.tsv", quantile_tsv(resid));
    auto j = fit_manifest_json(model, design, vifs, resid);
    j["rows"] = rows.size();
    emit("fit/fit.json", j.dump(2) + "\n");
    manifest_["fit"] = {{"rows", rows.size()},
                        {"reml_criterion", model.reml_criterion},
                        {"theta", model.vc.theta},
                        {"sigma2", model.vc.sigma2},
                        {"tau2", model.vc.tau2},
                        {"at_boundary", model.at_boundary}};
    out_ << fmt::format("fit: {} rows, {} coefficients, REML criterion {:.4f}\n", rows.size(),
                        coefs.size(), model.reml_criterion);
  }

  // Throws DataError after writing a "no rows" report when there was
  // nothing to model.
  void report() {
    Stage s(*this, "report");
    const auto fit_json = nlohmann::json::parse(read_input("fit/fit.json"));
    std::string text;
    if (fit_json.value("rows", 0) == 0) {
      text = "no rows: the engagement table is empty, so no model was fitted\n";
      emit("report.txt", text);
      out_ << text;
      throw DataError("engagement table has no rows");
    }
    const auto dist = detail::parse_tsv(read_input("topic_distribution.tsv"));
    const auto coefs = parse_coefficients(read_input("fit/coefficients.tsv"));
    text += "Topics and rationale\n\n";
    std::size_t wt = 5, wc = 5;
    for (const auto& r : dist.rows) {
      wt = std::max(wt, r[0].size());
      wc = std::max(wc, r[2].size());
    }
    text += fmt::format("{:<{}}  {:>{}}  {}\n", "Topic", wt, "Count", wc, "Rationale");
    for (const auto& r : dist.rows) {
      text += fmt::format("{:<{}}  {:>{}}  {}\n", r[0], wt, r[2], wc, r[1]);
    }
    text += "\nLinear mixed-effects model: normalized average degree ~ topic + video type + "
            "(1 | video)\n\n";
    text += coefficient_text(coefs);
    text += fmt::format("\nREML criterion: {:.4f}   sigma2: {:.6g}   tau2: {:.6g}   rows: {}\n",
                        fit_json.at("reml_criterion").get<double>(),
                        fit_json.at("sigma2").get<double>(), fit_json.at("tau2").get<double>(),
                        fit_json.at("rows").get<std::size_t>());
    if (auto v = fit_json.find("vif"); v != fit_json.end() && !v->empty()) {
      double worst = 0.0;
      bool inf = false;
      for (const auto& [name, value] : v->items()) {
        if (value.is_string()) {
          inf = true;
        } else {
          worst = std::max(worst, value.get<double>());
        }
      }
      text += inf ? std::string("max VIF: inf\n") : fmt::format("max VIF: {:.4f}\n", worst);
    }
    if (auto k = manifest_.find("kappa"); k != manifest_.end() && !k->value("skipped", true)) {
      text += fmt::format("mean pairwise kappa: {:.4f}\n", k->at("mean").get<double>());
    }
    emit("report.txt", text);
    out_ << text;
  }

  // Runs every stage in order.
  void run() {
    ingest();
    sample();
    discover();
    annotate();
    agreement();
    network();
    fit();
    report();
  }

 private:
  // Brackets one stage: names it for error reporting, collects its
  // artifacts, and saves the manifest when it finishes.
  class Stage {
   public:
    Stage(Pipeline& p, std::string name) : p_(p), start_(std::chrono::steady_clock::now()) {
      p_.stage_ = std::move(name);
      p_.stage_json_ = {{"inputs", nlohmann::ordered_json::object()},
                        {"outputs", nlohmann::ordered_json::object()}};
    }
    ~Stage() {
      if (std::uncaught_exceptions() > 0) return;
      p_.manifest_["stages"][p_.stage_] = p_.stage_json_;
      if (p_.cfg_.record_timings) {
        p_.manifest_["timings_ms"][p_.stage_] =
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start_).count();
      }
      p_.save_manifest();
    }
    Stage(const Stage&) = delete;
    Stage& operator=(const Stage&) = delete;

   private:
    Pipeline& p_;
    std::chrono::steady_clock::time_point start_;
  };

  RequestSettings request_settings() const {
    RequestSettings s;
    s.model_name = cfg_.model;
    s.temperature = cfg_.temperature;
    s.max_output_tokens = cfg_.max_output_tokens;
    s.retry.max_retries = cfg_.max_retries;
    s.retry.base_delay = std::chrono::milliseconds(cfg_.retry_base_ms);
    return s;
  }

  static std::string file_stem(std::string_view id) {
    auto name = plot_file_name(id, "");
    return name.substr(0, name.size() - std::string_view("_.svg").size());
  }

  void notice(const std::string& message) {
    out_ << "notice: " << message << '\n';
    auto& list = manifest_["notices"];
    if (!list.is_array()) list = nlohmann::ordered_json::array();
    if (std::find(list.begin(), list.end(), message) == list.end()) list.push_back(message);
  }

  void emit(const std::string& rel, std::string_view contents) {
    const auto path = root_ / rel;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    detail::write_file_atomic(path, contents);
    const auto digest = detail::sha256_hex(contents);
    stage_json_["outputs"][rel] = digest;
    manifest_["artifacts"][rel] = digest;
  }

  void record_output(const std::string& rel) {
    const auto digest = detail::sha256_hex(detail::read_file(root_ / rel));
    stage_json_["outputs"][rel] = digest;
    manifest_["artifacts"][rel] = digest;
  }

  // Relative names resolve against the output directory; the corpus and
  // resolution files are used as given.
  std::string read_input(const std::string& name) {
    fs::path path = name;
    const bool external = name == cfg_.corpus || name == cfg_.resolutions ||
                          name == cfg_.discover_template || name == cfg_.label_template;
    if (!external) path = root_ / name;
    if (!fs::exists(path)) {
      throw DataError(fmt::format("missing input '{}' (run the earlier stages first)",
                                  path.string()));
    }
    auto text = detail::read_file(path);
    stage_json_["inputs"][name] = detail::sha256_hex(text);
    return text;
  }

  Corpus load_input_corpus() {
    if (cfg_.corpus.empty()) throw UsageError("no corpus path configured");
    if (!fs::exists(cfg_.corpus)) {
      throw DataError(fmt::format("corpus file '{}' does not exist", cfg_.corpus));
    }
    return parse_corpus(read_input(cfg_.corpus));
  }

  PromptTemplate load_template(PromptStep step) {
    const auto& path = step == PromptStep::kDiscover ? cfg_.discover_template : cfg_.label_template;
    if (path.empty()) {
      return step == PromptStep::kDiscover ? default_discover_template() : default_label_template();
    }
    return parse_template(read_input(path), step);
  }

  Corpus load_sample() {
    return parse_corpus(read_input("sample.jsonl"), {.allow_external_parents = true});
  }

  TopicSet load_topics() {
    auto topics = parse_topic_set(read_input("topics.jsonl"));
    topics.validate(cfg_.max_topics);
    return topics;
  }

  void write_plots(const Corpus& corpus, const std::map<std::string, UserGraph>& graphs,
                   const FinalAnnotation& final, const EngagementTable& table) {
    std::map<std::pair<std::string, std::string>, std::set<std::string>> members;
    for (const auto& [id, label] : final.labels) {
      if (label == kNoise) continue;
      if (const Comment* c = corpus.find_comment(id)) members[{c->video_id, label}].insert(c->author_id);
    }
    std::map<std::string, LayoutResult> layouts;
    for (const auto& row : table.rows) {
      const auto& g = graphs.at(row.video_id);
      auto it = layouts.find(row.video_id);
      if (it == layouts.end()) {
        LayoutOptions opt;
        opt.iterations = cfg_.layout_iterations;
        opt.seed = cfg_.seed;
        it = layouts.emplace(row.video_id, fr_layout(g, opt)).first;
      }
      emit("plots/" + plot_file_name(row.video_id, row.topic),
           network_svg(g, it->second, members[{row.video_id, row.topic}]));
    }
  }

  void load_manifest() {
    const auto path = root_ / "manifest.json";
    if (fs::exists(path)) {
      manifest_ = nlohmann::ordered_json::parse(detail::read_file(path), nullptr, false);
      if (manifest_.is_discarded() || !manifest_.is_object()) manifest_ = {};
    }
    manifest_["tool"] = "topicnet";
    manifest_["version"] = TOPICNET_VERSION;
    manifest_["config"] = cfg_.snapshot();
    if (!manifest_.contains("stages")) manifest_["stages"] = nlohmann::ordered_json::object();
    if (!manifest_.contains("artifacts")) manifest_["artifacts"] = nlohmann::ordered_json::object();
  }

  void save_manifest() {
    fs::create_directories(root_);
    detail::write_file_atomic(root_ / "manifest.json", manifest_.dump(2) + "\n");
  }

  PipelineConfig cfg_;
  fs::path root_;
  std::ostream& out_;
  ProviderFactory factory_;
  Diagnostics diag_;
  nlohmann::ordered_json manifest_;
  nlohmann::ordered_json stage_json_;
  std::string stage_;
};

}  // namespace topicnet

#endif  // TOPICNET_PIPELINE_HPP_
