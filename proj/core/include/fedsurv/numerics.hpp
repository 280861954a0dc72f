#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace fedsurv {

// Logistic function, safe for any finite input. For large negative z the
// naive 1/(1+exp(-z)) overflows inside the exp; evaluating through exp(z)
// on that side keeps every intermediate bounded.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow: for large z this is z + log1p(exp(-z)).
inline double softplus(double z) {
  if (z > 0.0) {
    return z + std::log1p(std::exp(-z));
  }
  return std::log1p(std::exp(z));
}

// log(sum_i exp(v_i)) with the usual max-subtraction. Empty input yields -inf.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) {
    return -std::numeric_limits<double>::infinity();
  }
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) {
    return m;
  }
  double sum = 0.0;
  for (const double v : values) {
    sum += std::exp(v - m);
  }
  return m + std::log(sum);
}

}  // namespace fedsurv
