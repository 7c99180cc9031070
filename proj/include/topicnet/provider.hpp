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

// Provider-agnostic chat completion: request/response records, the retry
// loop, and a seeded offline mock.

#ifndef TOPICNET_PROVIDER_HPP_
#define TOPICNET_PROVIDER_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "topicnet/detail/hash.hpp"
#include "topicnet/error.hpp"
#include "topicnet/prompt.hpp"
#include "topicnet/topics.hpp"

namespace topicnet {

struct CompletionRequest {
  std::string model_name;
  std::string system_message;
  std::string user_message;
  double temperature = 0.0;
  int max_output_tokens = 512;

  void validate() const {
    if (system_message.empty() || user_message.empty()) {
      throw UsageError("completion request has an empty message");
    }
    if (!std::isfinite(temperature) || temperature < 0.0) {
      throw UsageError(fmt::format("invalid temperature {}", temperature));
    }
    if (max_output_tokens <= 0) throw UsageError("max_output_tokens must be positive");
  }
};

struct CompletionResponse {
  std::string content;
  std::string provider_id;
  std::chrono::milliseconds latency{0};
  int retry_count = 0;
};

// One attempt per send(). Implementations must tolerate concurrent calls and
// signal retryable failures with a transient ProviderError.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  virtual CompletionResponse send(const CompletionRequest& request) = 0;
};

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};

  std::chrono::milliseconds delay_for(int attempt) const {
    double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, attempt);
    ms = std::min(ms, static_cast<double>(max_delay.count()));
    return std::chrono::milliseconds(static_cast<long long>(ms));
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

// Sends with exponential backoff on transient errors. Non-transient errors
// propagate immediately; the last transient error propagates once the retry
// budget is spent.
inline CompletionResponse complete(Provider& provider, const CompletionRequest& request,
                                   const RetryPolicy& policy = {},
                                   const Sleeper& sleep = real_sleep) {
  request.validate();
  for (int attempt = 0;; ++attempt) {
    auto start = std::chrono::steady_clock::now();
    try {
      auto response = provider.send(request);
      if (response.content.empty()) throw SchemaError("provider returned empty content");
      response.retry_count = attempt;
      response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      if (response.provider_id.empty()) response.provider_id = provider.id();
      return response;
    } catch (const ProviderError& e) {
      if (!e.transient() || attempt >= policy.max_retries) throw;
      sleep(policy.delay_for(attempt));
    }
  }
}

// Ten climate-comment topics with rationales; the mock's discovery output.
inline std::vector<Topic> reference_topics() {
  return {
      {"climate skepticism",
       "Comments expressing doubt or denial regarding mainstream scientific "
       "consensus on climate change and its anthropogenic causes."},
      {"natural cycles",
       "Perspectives emphasizing natural climatic cycles and historical data as "
       "evidence against the urgency attributed to human-induced climate change."},
      {"climate solutions",
       "Discussions about proposed solutions to climate change issues, including "
       "renewable energy, reforestation, and technological innovations."},
      {"climate change misinformation",
       "Discussions on misinformation related to climate change, including "
       "skeptics' claims and counterarguments against established scientific data."},
      {"greenhouse gases",
       "Conversations centered on the role of greenhouse gases, particularly "
       "concerning human contributions and their impact on climate dynamics."},
      {"government policy",
       "Discussions around how government policies, such as carbon taxes and "
       "environmental regulations, influence the conversation on climate change."},
      {"scientific consensus",
       "References to the supposed agreement among scientists about climate "
       "change, often critiqued or supported within the comments."},
      {"economic impact",
       "Insights into how climate policy and actions related to climate change "
       "affect economies, industries, and consumer behaviors."},
      {"environmental activism",
       "Comments discussing the influence and role of environmental activism, "
       "including figures like Greta Thunberg and the narrative presented by activists."},
      {"media portrayal",
       "Critiques regarding how media covers climate change issues and the "
       "perceived bias in the presentation of facts and interviews."},
  };
}

struct MockConfig {
  std::uint64_t seed = 0;
  double off_list_rate = 0.0;  // fraction answered with an off-list label
  double outlier_rate = 0.0;   // fraction answered with OUTLIER
  std::uint64_t run_salt = 0;  // varies injections across annotation runs
  std::vector<Topic> topics = reference_topics();
  std::string off_list_label = "space weather";
};

// Offline deterministic provider. Discovery requests get a fenced block of
// the configured topics. Labeling requests (those carrying a <<< >>> comment
// block) get a label chosen by a stable hash of (seed, comment text) into the
// topic list found in the request, falling back to the configured topics.
class MockProvider : public Provider {
 public:
  explicit MockProvider(MockConfig config = {}) : config_(std::move(config)) {}

  std::string id() const override { return fmt::format("mock:{}", config_.seed); }

  CompletionResponse send(const CompletionRequest& request) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    CompletionResponse r;
    r.provider_id = id();
    if (auto comment = extract_comment(request.user_message)) {
      r.content = label_response(*comment, request.user_message);
    } else {
      r.content = discovery_response();
    }
    return r;
  }

  std::size_t calls() const { return calls_.load(); }
  const MockConfig& config() const { return config_; }

  static std::optional<std::string> extract_comment(std::string_view message) {
    auto open = message.find(kCommentOpen);
    if (open == std::string_view::npos) return std::nullopt;
    auto body = open + kCommentOpen.size();
    auto close = message.rfind(kCommentClose);
    if (close == std::string_view::npos || close < body) return std::nullopt;
    return detail::trim(message.substr(body, close - body));
  }

 private:
  std::string discovery_response() const {
    std::string out = "Here are the overarching topics I identified.\n```\n";
    for (const auto& t : config_.topics) {
      out += fmt::format("{} \xe2\x80\x94 {}\n", t.label, t.rationale);
    }
    out += "```\nEach rationale summarizes the comments grouped under the topic.";
    return out;
  }

  std::string label_response(const std::string& comment, std::string_view message) const {
    std::vector<std::string> labels;
    auto open = message.find(kCommentOpen);
    try {
      for (auto& t : parse_topic_list(message.substr(0, open))) labels.push_back(t.label);
    } catch (const SchemaError&) {
    }
    if (labels.empty()) {
      for (const auto& t : config_.topics) labels.push_back(t.label);
    }
    const auto text_hash = detail::fnv1a(comment);
    double u = detail::unit_interval(
        detail::combine({config_.seed, config_.run_salt, text_hash, 0x1f1f}));
    std::string label;
    if (u < config_.outlier_rate) {
      label = std::string(kOutlier);
    } else if (u < config_.outlier_rate + config_.off_list_rate) {
      label = config_.off_list_label;
    } else {
      label = labels[detail::combine({config_.seed, text_hash}) % labels.size()];
    }
    return fmt::format("```\n{}\n```", label);
  }

  MockConfig config_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace topicnet

#endif  // TOPICNET_PROVIDER_HPP_
