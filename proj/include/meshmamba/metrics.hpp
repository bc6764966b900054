#pragma once

#include "meshmamba/saliency.hpp"

namespace meshmamba {

// Pearson correlation. Throws ErrorKind::ConstantMap when either map has
// zero variance and ErrorKind::LengthMismatch on unequal lengths.
double cc(const SaliencyMap& a, const SaliencyMap& b);

// sum_i min(p_i, q_i). Inputs that do not sum to 1 are normalized with a
// warning.
double sim(const SaliencyMap& p, const SaliencyMap& q);

inline constexpr double kKldEps = 1e-12;

// sum_i p_i ln(p_i / (q_i + eps)) in nats, 0 ln 0 = 0. p is the ground truth.
double kld(const SaliencyMap& p, const SaliencyMap& q);

// Mean squared difference.
double se(const SaliencyMap& pred, const SaliencyMap& gt);

struct MetricRow {
  double cc = 0.0;
  double sim = 0.0;
  double kld = 0.0;
  double se = 0.0;
};

// CC on the raw maps (NaN with a warning for a constant map), SIM and KLD on
// the distribution-normalized maps with gt as p, SE on max-normalized maps.
MetricRow evaluate(const SaliencyMap& pred, const SaliencyMap& gt);

}  // namespace meshmamba
