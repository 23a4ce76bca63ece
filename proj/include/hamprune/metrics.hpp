#pragma once

#include <cstdint>
#include <vector>

namespace hamprune {

struct EvalResult {
    double logloss = 0.0;
    double auc = 0.0;
    size_t n_samples = 0;
};

/// Mean negative log-likelihood. Predictions are clipped to
/// [1e-12, 1-1e-12]; labels must be 0 or 1.
double logloss(const std::vector<double>& predictions, const std::vector<uint8_t>& labels);

/// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 * P(equal), computed by
/// sorting. Throws if only one class is present.
double auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

EvalResult evaluate(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

}  // namespace hamprune
