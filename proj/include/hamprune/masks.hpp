#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hamprune/rng.hpp"

namespace hamprune {

/// The four auxiliary-mask families. HAM is the deterministic hard mask
/// (indicator of positive alpha, straight-through backward); SAM masks with
/// the clipped weights themselves; SAM-GS samples a Gumbel-sigmoid
/// relaxation; HAM-p samples Bernoulli bits and backpropagates straight
/// through.
enum class MaskStrategy : uint8_t { kHam = 0, kSam = 1, kSamGs = 2, kHamP = 3 };

std::string strategy_name(MaskStrategy s);
MaskStrategy strategy_from_name(const std::string& name);

class MaskState {
  public:
    MaskState(MaskStrategy strategy, size_t total_columns, double init_value, uint64_t seed,
              double gs_temperature = 0.1, double p_min = 1e-4);

    MaskStrategy strategy() const { return strategy_; }
    size_t size() const { return alpha_.size(); }
    const std::vector<double>& alpha() const { return alpha_; }
    double gs_temperature() const { return gs_temperature_; }

    /// Mask values for the next forward pass; stochastic strategies draw
    /// fresh noise per call and record it for backward.
    std::vector<double> forward();

    /// Same, but with caller-supplied uniform draws (one per column for the
    /// stochastic strategies; ignored otherwise).
    std::vector<double> forward_with_noise(const std::vector<double>& u);

    /// Maps the loss gradient w.r.t. the mask values onto alpha. Hard masks
    /// pass the gradient straight through (identity); SAM is the identity by
    /// construction; SAM-GS chains through the sampled relaxation. Consumes
    /// the record of the matching forward call.
    std::vector<double> backward(const std::vector<double>& upstream_grad);

    /// Binary mask 1_{alpha>0}; only meaningful for HAM.
    std::vector<uint8_t> sign_mask() const;

    /// Exactly s ones at the largest alpha values; ties broken by lower
    /// flat index.
    std::vector<uint8_t> select_top_s(size_t s) const;

    /// Strategy-specific count of columns that are currently "on": the
    /// positive-alpha count for hard/soft deterministic masks, and the
    /// majority-on count (alpha > 0.5) for the probability-valued ones.
    size_t positive_count() const;

    /// Applies the update alpha -= delta, then the strategy's clipping.
    void apply_update(const std::vector<double>& delta);

  private:
    MaskStrategy strategy_;
    std::vector<double> alpha_;
    double gs_temperature_;
    double p_min_;
    Rng rng_;
    bool forward_recorded_ = false;
    std::vector<double> last_mask_;
    std::vector<double> last_noise_;  // uniform draws for SAM-GS

    void clip();
};

/// Conventional starting point per strategy: HAM starts from the given
/// epsilon (all columns on), the relaxed strategies start mostly on.
double default_alpha_init(MaskStrategy s, double epsilon);

std::vector<uint8_t> top_s_mask(const std::vector<double>& weights, size_t s);

}  // namespace hamprune
