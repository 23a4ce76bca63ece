#include "hamprune/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hamprune {

std::string strategy_name(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::kHam: return "ham";
        case MaskStrategy::kSam: return "sam";
        case MaskStrategy::kSamGs: return "sam-gs";
        case MaskStrategy::kHamP: return "ham-p";
    }
    return "?";
}

MaskStrategy strategy_from_name(const std::string& name) {
    if (name == "ham") return MaskStrategy::kHam;
    if (name == "sam") return MaskStrategy::kSam;
    if (name == "sam-gs" || name == "sam_gs") return MaskStrategy::kSamGs;
    if (name == "ham-p" || name == "ham_p") return MaskStrategy::kHamP;
    throw std::invalid_argument("unknown mask strategy: " + name);
}

MaskState::MaskState(MaskStrategy strategy, size_t total_columns, double init_value,
                     uint64_t seed, double gs_temperature, double p_min)
    : strategy_(strategy),
      alpha_(total_columns, init_value),
      gs_temperature_(gs_temperature),
      p_min_(p_min),
      rng_(seed) {
    if (total_columns == 0) throw std::invalid_argument("mask state: no columns");
    if (gs_temperature <= 0) throw std::invalid_argument("mask state: temperature must be > 0");
    clip();
}

std::vector<double> MaskState::forward() {
    std::vector<double> u;
    if (strategy_ == MaskStrategy::kSamGs || strategy_ == MaskStrategy::kHamP) {
        u.resize(alpha_.size());
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (auto& x : u) x = unif(rng_);
    }
    return forward_with_noise(u);
}

std::vector<double> MaskState::forward_with_noise(const std::vector<double>& u) {
    size_t n = alpha_.size();
    std::vector<double> m(n);
    switch (strategy_) {
        case MaskStrategy::kHam:
            for (size_t i = 0; i < n; ++i) m[i] = alpha_[i] > 0 ? 1.0 : 0.0;
            break;
        case MaskStrategy::kSam:
            m = alpha_;
            break;
        case MaskStrategy::kSamGs: {
            if (u.size() != n) throw std::invalid_argument("sam-gs: need one draw per column");
            last_noise_.resize(n);
            for (size_t i = 0; i < n; ++i) {
                double a = alpha_[i];
                if (!(a > 0.0 && a < 1.0))
                    throw std::domain_error("sam-gs: alpha must lie in (0,1)");
                double ui = std::min(std::max(u[i], p_min_), 1.0 - p_min_);
                last_noise_[i] = ui;
                double logits = std::log(a / (1.0 - a)) + std::log(ui / (1.0 - ui));
                m[i] = 1.0 / (1.0 + std::exp(-logits / gs_temperature_));
            }
            break;
        }
        case MaskStrategy::kHamP: {
            if (u.size() != n) throw std::invalid_argument("ham-p: need one draw per column");
            for (size_t i = 0; i < n; ++i) m[i] = u[i] < alpha_[i] ? 1.0 : 0.0;
            break;
        }
    }
    last_mask_ = m;
    forward_recorded_ = true;
    return m;
}

std::vector<double> MaskState::backward(const std::vector<double>& upstream_grad) {
    if (!forward_recorded_)
        throw std::logic_error("mask backward called without a recorded forward");
    if (upstream_grad.size() != alpha_.size())
        throw std::invalid_argument("mask backward: gradient length mismatch");
    forward_recorded_ = false;
    std::vector<double> g(alpha_.size());
    switch (strategy_) {
        case MaskStrategy::kHam:
        case MaskStrategy::kHamP:
        case MaskStrategy::kSam:
            // Identity: straight-through for the hard masks, exact for SAM.
            g = upstream_grad;
            break;
        case MaskStrategy::kSamGs:
            for (size_t i = 0; i < alpha_.size(); ++i) {
                double m = last_mask_[i];
                double a = alpha_[i];
                // d m / d alpha = m(1-m) / (temperature * a(1-a))
                g[i] = upstream_grad[i] * m * (1.0 - m) / (gs_temperature_ * a * (1.0 - a));
            }
            break;
    }
    return g;
}

std::vector<uint8_t> MaskState::sign_mask() const {
    if (strategy_ != MaskStrategy::kHam)
        throw std::logic_error("sign_mask is defined for the HAM strategy only");
    std::vector<uint8_t> m(alpha_.size());
    for (size_t i = 0; i < alpha_.size(); ++i) m[i] = alpha_[i] > 0 ? 1 : 0;
    return m;
}

std::vector<uint8_t> MaskState::select_top_s(size_t s) const { return top_s_mask(alpha_, s); }

size_t MaskState::positive_count() const {
    double cut = (strategy_ == MaskStrategy::kSamGs || strategy_ == MaskStrategy::kHamP) ? 0.5
                                                                                         : 0.0;
    size_t c = 0;
    for (double a : alpha_)
        if (a > cut) ++c;
    return c;
}

void MaskState::apply_update(const std::vector<double>& delta) {
    if (delta.size() != alpha_.size())
        throw std::invalid_argument("mask update: length mismatch");
    for (size_t i = 0; i < alpha_.size(); ++i) alpha_[i] -= delta[i];
    clip();
}

void MaskState::clip() {
    switch (strategy_) {
        case MaskStrategy::kHam:
            break;
        case MaskStrategy::kSam:
            for (double& a : alpha_) a = std::min(1.0, std::max(0.0, a));
            break;
        case MaskStrategy::kSamGs:
        case MaskStrategy::kHamP:
            for (double& a : alpha_) a = std::min(1.0 - p_min_, std::max(p_min_, a));
            break;
    }
}

double default_alpha_init(MaskStrategy s, double epsilon) {
    switch (s) {
        case MaskStrategy::kHam: return epsilon;
        case MaskStrategy::kSam: return 1.0;
        case MaskStrategy::kSamGs: return 0.9;
        case MaskStrategy::kHamP: return 0.9;
    }
    return epsilon;
}

std::vector<uint8_t> top_s_mask(const std::vector<double>& weights, size_t s) {
    if (s > weights.size()) throw std::invalid_argument("top_s_mask: s exceeds column count");
    std::vector<size_t> order(weights.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return weights[a] > weights[b]; });
    std::vector<uint8_t> mask(weights.size(), 0);
    for (size_t i = 0; i < s; ++i) mask[order[i]] = 1;
    return mask;
}

}  // namespace hamprune
