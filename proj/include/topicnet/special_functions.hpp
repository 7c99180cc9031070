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

// Student-t tail probabilities through the regularized incomplete beta
// function.

#ifndef TOPICNET_SPECIAL_FUNCTIONS_HPP_
#define TOPICNET_SPECIAL_FUNCTIONS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include "topicnet/error.hpp"

namespace topicnet {

// I_x(a, b) for a, b > 0 and x in [0, 1]. `y` is 1 - x; pass it when it is
// known more accurately than 1 - x itself. Above x = 1/2 the value is taken
// as the complement I_y(b, a) so no precision is lost forming 1 - y.
inline double regularized_incomplete_beta(double a, double b, double x, double y) {
  if (!(a > 0.0 && b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw NumericalError(fmt::format("incomplete beta needs finite a, b > 0 (got {}, {})", a, b));
  }
  if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0)) {
    throw NumericalError(fmt::format("incomplete beta argument {} outside [0, 1]", x));
  }
  if (x <= 0.5) return boost::math::ibeta(a, b, x);
  return boost::math::ibetac(b, a, y);
}

inline double regularized_incomplete_beta(double a, double b, double x) {
  return regularized_incomplete_beta(a, b, x, 1.0 - x);
}

// P(T > t) for T ~ Student-t with df degrees of freedom.
inline double student_t_upper_tail(double t, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) {
    throw NumericalError(fmt::format("degrees of freedom must be positive and finite (got {})", df));
  }
  if (std::isnan(t)) throw NumericalError("t statistic is NaN");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double t2 = t * t;
  // Tail mass beyond |t| on one side is I_x(df/2, 1/2) / 2 with x = df / (df + t^2).
  const double x = df / (df + t2);
  const double y = t2 / (df + t2);
  const double one_side = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x, y);
  return t > 0 ? one_side : 1.0 - one_side;
}

// Two-sided p-value 2 * (1 - F(|t|; df)), in (0, 1].
inline double p_from_t(double t, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) {
    throw NumericalError(fmt::format("degrees of freedom must be positive and finite (got {})", df));
  }
  if (std::isinf(t)) return std::numeric_limits<double>::denorm_min();
  const double t2 = t * t;
  double p = regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t2), t2 / (df + t2));
  // Keep the result strictly positive for astronomically large |t|.
  return std::max(p, std::numeric_limits<double>::denorm_min());
}

}  // namespace topicnet

#endif  // TOPICNET_SPECIAL_FUNCTIONS_HPP_
