#include "hamprune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hamprune {

double logloss(const std::vector<double>& predictions, const std::vector<uint8_t>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("logloss: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("logloss: empty input");
    const double lo = 1e-12, hi = 1.0 - 1e-12;
    double sum = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        double p = std::min(hi, std::max(lo, predictions[i]));
        sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return sum / double(predictions.size());
}

double auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
    size_t n = scores.size();
    size_t n_pos = 0;
    for (uint8_t y : labels) n_pos += y ? 1 : 0;
    size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: needs both classes");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Sum of average ranks of the positives; ties share the mean rank of
    // their run, which yields the half-credit convention.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * double(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    return (rank_sum_pos - 0.5 * double(n_pos) * double(n_pos + 1)) /
           (double(n_pos) * double(n_neg));
}

EvalResult evaluate(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    EvalResult r;
    r.logloss = logloss(scores, labels);
    r.auc = auc(scores, labels);
    r.n_samples = scores.size();
    return r;
}

}  // namespace hamprune
