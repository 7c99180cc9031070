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

// topicnet command-line driver.
//
//   topicnet <stage> --config run.toml [--flag value ...]
//
// Every config key is also a flag of the same name; flags win.

#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "topicnet/error.hpp"
#include "topicnet/pipeline.hpp"

namespace {

using topicnet::Pipeline;
using topicnet::PipelineConfig;

void add_config_options(CLI::App& app, PipelineConfig& c) {
  app.set_config("--config", "", "Keyed config file (TOML/INI syntax)");
  app.add_option("--corpus", c.corpus, "Corpus file (line-delimited JSON)");
  app.add_option("--out", c.out, "Output directory")->capture_default_str();
  app.add_option("--fraction", c.fraction, "Stratified sample fraction in (0, 1]")
      ->capture_default_str();
  app.add_option("--seed", c.seed, "Sampling and layout seed")->capture_default_str();
  app.add_option("--discovery-size", c.discovery_size, "Balanced discovery sample size")
      ->capture_default_str();
  app.add_option("--max-topics", c.max_topics, "Topic cap for discovery")->capture_default_str();
  app.add_option("--runs", c.runs, "Independent annotation runs")->capture_default_str();
  app.add_option("--concurrency", c.concurrency, "Requests in flight per run")
      ->capture_default_str();
  app.add_option("--reference-topic", c.reference_topic, "Reference topic level")
      ->capture_default_str();
  app.add_option("--reference-stance", c.reference_stance, "Reference video stance")
      ->capture_default_str();
  app.add_option("--resolutions", c.resolutions, "OUTLIER resolution file");
  app.add_option("--discover-template", c.discover_template, "Discovery prompt template file");
  app.add_option("--label-template", c.label_template, "Labeling prompt template file");

  app.add_flag("--mock,!--no-mock", c.mock, "Use the offline deterministic provider");
  app.add_option("--mock-seed", c.mock_seed, "Mock provider seed")->capture_default_str();
  app.add_option("--mock-outlier-rate", c.mock_outlier_rate, "Mock OUTLIER injection rate")
      ->capture_default_str();
  app.add_option("--mock-off-list-rate", c.mock_off_list_rate, "Mock off-list injection rate")
      ->capture_default_str();

  app.add_option("--endpoint", c.endpoint, "Chat-completion endpoint URL");
  app.add_option("--model", c.model, "Model name")->capture_default_str();
  app.add_option("--credential-env", c.credential_env,
                 "Name of the environment variable holding the API token");
  app.add_option("--temperature", c.temperature, "Sampling temperature")->capture_default_str();
  app.add_option("--max-output-tokens", c.max_output_tokens, "Completion token cap")
      ->capture_default_str();
  app.add_option("--max-retries", c.max_retries, "Retries on transient provider errors")
      ->capture_default_str();
  app.add_option("--retry-base-ms", c.retry_base_ms, "First backoff delay in ms")
      ->capture_default_str();

  app.add_option("--layout-iterations", c.layout_iterations, "Force-directed iterations")
      ->capture_default_str();
  app.add_flag("--plots,!--no-plots", c.plots, "Write per-(video, topic) SVG plots");
  app.add_flag("--record-timings", c.record_timings,
               "Record stage timings in the manifest (outputs then differ between runs)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topicnet: LLM topic annotation, reply networks and mixed-model analysis"};
  app.set_version_flag("--version", TOPICNET_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  PipelineConfig config;
  add_config_options(app, config);

  const std::map<std::string, std::pair<std::string, void (Pipeline::*)()>> stages{
      {"ingest", {"Validate the corpus and print per-stratum counts", &Pipeline::ingest}},
      {"sample", {"Draw the stratified sample", &Pipeline::sample}},
      {"discover", {"Discover topics on a balanced sample", &Pipeline::discover}},
      {"annotate", {"Label the sample once per run and consolidate", &Pipeline::annotate}},
      {"agreement", {"Pairwise Cohen's kappa across runs", &Pipeline::agreement}},
      {"network", {"Edgelists, user graphs, engagement table and plots", &Pipeline::network}},
      {"fit", {"Fit the random-intercept model", &Pipeline::fit}},
      {"report", {"Render topic and coefficient tables", &Pipeline::report}},
      {"run", {"Run every stage in order", &Pipeline::run}},
  };
  for (const auto& [name, entry] : stages) app.add_subcommand(name, entry.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(topicnet::ExitCode::kUsage);
  }

  const auto* chosen = app.get_subcommands().front();
  std::string stage = chosen->get_name();
  try {
    Pipeline pipeline(config);
    try {
      (pipeline.*stages.at(stage).second)();
    } catch (...) {
      if (!pipeline.current_stage().empty()) stage = pipeline.current_stage();
      throw;
    }
  } catch (const topicnet::Error& e) {
    std::cerr << fmt::format("topicnet: {} failed: {}\n", stage, e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << fmt::format("topicnet: {} failed: {}\n", stage, e.what());
    return static_cast<int>(topicnet::ExitCode::kData);
  }
  return 0;
}
