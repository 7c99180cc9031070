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

#ifndef TOPICNET_ERROR_HPP_
#define TOPICNET_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace topicnet {

// Process exit codes used by the command line tool. Each exception family
// below maps onto exactly one of them.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kProvider = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kData; }
};

// Malformed or inconsistent input data: corpus records, tables, configs.
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad arguments or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

// Chat-completion provider failures. `transient()` errors are retried.
class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what, bool transient = false)
      : Error(what), transient_(transient) {}
  ExitCode exit_code() const noexcept override { return ExitCode::kProvider; }
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

class AuthError : public ProviderError {
 public:
  explicit AuthError(const std::string& what) : ProviderError(what, false) {}
};

class RateLimitError : public ProviderError {
 public:
  explicit RateLimitError(const std::string& what)
      : ProviderError(what, true) {}
};

class TransportError : public ProviderError {
 public:
  explicit TransportError(const std::string& what)
      : ProviderError(what, true) {}
};

class SchemaError : public ProviderError {
 public:
  explicit SchemaError(const std::string& what) : ProviderError(what, false) {}
};

// Singular systems, failed convergence, undefined statistics.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

}  // namespace topicnet

#endif  // TOPICNET_ERROR_HPP_
