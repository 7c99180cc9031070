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

// Chat-completion provider speaking the common JSON-over-HTTPS wire format:
//
//   POST {endpoint}
//   {"model": ..., "messages": [{"role":"system",...},{"role":"user",...}],
//    "temperature": ..., "max_tokens": ...}
//
// and reading choices[0].message.content from the reply.

#ifndef TOPICNET_HTTP_PROVIDER_HPP_
#define TOPICNET_HTTP_PROVIDER_HPP_

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>

#include <fmt/format.h>
#include <httplib.h>
// <resolv.h>, pulled in above, defines _res as a macro; it collides with
// parameter names inside Eigen.
#ifdef _res
#undef _res
#endif
#include <nlohmann/json.hpp>

#include "topicnet/error.hpp"
#include "topicnet/provider.hpp"

namespace topicnet {

inline nlohmann::ordered_json chat_request_json(const CompletionRequest& req) {
  return {{"model", req.model_name},
          {"messages",
           {{{"role", "system"}, {"content", req.system_message}},
            {{"role", "user"}, {"content", req.user_message}}}},
          {"temperature", req.temperature},
          {"max_tokens", req.max_output_tokens}};
}

inline std::string parse_chat_response(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw SchemaError("provider response is not valid JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw SchemaError("choices[0].message.content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("provider response missing choices[0].message.content ({})",
                                  e.what()));
  }
}

struct HttpProviderConfig {
  std::string endpoint;        // e.g. https://api.openai.com/v1/chat/completions
  std::string credential_env;  // name of the env var holding the bearer token
  std::chrono::seconds timeout{60};
};

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
    auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
      throw UsageError(fmt::format("provider endpoint '{}' has no scheme", config_.endpoint));
    }
    auto path_start = config_.endpoint.find('/', scheme_end + 3);
    origin_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
    if (!config_.credential_env.empty()) {
      const char* token = std::getenv(config_.credential_env.c_str());
      if (token == nullptr || *token == '\0') {
        throw AuthError(fmt::format("credential variable {} is not set",
                                    config_.credential_env));
      }
      token_ = token;
    }
  }

  std::string id() const override { return fmt::format("http:{}", origin_); }

  CompletionResponse send(const CompletionRequest& request) override {
    // httplib clients are not safe to share across threads; one per call.
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto result = client.Post(path_, headers, chat_request_json(request).dump(),
                              "application/json");
    if (!result) {
      throw TransportError(fmt::format("request to {} failed: {}", origin_,
                                       httplib::to_string(result.error())));
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
      throw AuthError(fmt::format("provider rejected credentials (HTTP {})", status));
    }
    if (status == 429) throw RateLimitError("provider rate limit (HTTP 429)");
    if (status == 408 || status >= 500) {
      throw TransportError(fmt::format("provider error (HTTP {})", status));
    }
    if (status != 200) {
      throw ProviderError(fmt::format("unexpected provider status HTTP {}", status));
    }
    CompletionResponse r;
    r.content = parse_chat_response(result->body);
    r.provider_id = id();
    return r;
  }

 private:
  HttpProviderConfig config_;
  std::string origin_;
  std::string path_;
  std::string token_;
};

}  // namespace topicnet

#endif  // TOPICNET_HTTP_PROVIDER_HPP_
