#pragma once

#include <cstdint>
#include <vector>

#include "hamprune/search.hpp"

namespace hamprune {

inline constexpr size_t kOracleColumnCap = 20;

struct MaskEval {
    std::vector<uint8_t> mask;
    double val_logloss = 0;
    double val_auc = 0;
};

/// Exhaustive ranking of every size-s mask, best (lowest validation loss)
/// first; ties broken by the mask bit pattern as an integer.
struct OracleResult {
    std::vector<MaskEval> ranked;
    size_t total_columns = 0;
    size_t target = 0;
};

/// For each size-s mask: clone the checkpoint, fine-tune {V, Theta} for
/// retrain_steps mini-batches on an identical batch sequence, evaluate the
/// validation split. Hard-capped at 20 columns. Deterministic given seed;
/// mask evaluations run in parallel.
OracleResult enumerate_best_mask(const CtrModel& model, const EmbeddingLayer& layer,
                                 const Splits& splits, size_t s, size_t retrain_steps,
                                 const SearchConfig& cfg, uint64_t seed);

uint64_t mask_bits(const std::vector<uint8_t>& mask);

/// 1-based position of `mask` in the ranking; throws if absent.
size_t rank_of(const OracleResult& result, const std::vector<uint8_t>& mask);

}  // namespace hamprune
