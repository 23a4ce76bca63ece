#include "hamprune/oracle.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace hamprune {

uint64_t mask_bits(const std::vector<uint8_t>& mask) {
    uint64_t bits = 0;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) bits |= uint64_t(1) << i;
    return bits;
}

OracleResult enumerate_best_mask(const CtrModel& model, const EmbeddingLayer& layer,
                                 const Splits& splits, size_t s, size_t retrain_steps,
                                 const SearchConfig& cfg, uint64_t seed) {
    size_t total = layer.total_columns();
    if (total > kOracleColumnCap)
        throw std::invalid_argument("oracle: column count exceeds the enumeration cap");
    if (s > total) throw std::invalid_argument("oracle: target exceeds column count");

    std::vector<uint64_t> candidates;
    for (uint64_t bits = 0; bits < (uint64_t(1) << total); ++bits)
        if (size_t(std::popcount(bits)) == s) candidates.push_back(bits);

    OracleResult result;
    result.total_columns = total;
    result.target = s;
    result.ranked.resize(candidates.size());

    // Every candidate fine-tunes from the same checkpoint on the same batch
    // sequence, so evaluations are independent and comparable.
#pragma omp parallel for schedule(dynamic)
    for (size_t c = 0; c < candidates.size(); ++c) {
        std::vector<uint8_t> mask(total, 0);
        for (size_t i = 0; i < total; ++i)
            if (candidates[c] & (uint64_t(1) << i)) mask[i] = 1;
        CtrModel m = model;
        EmbeddingLayer l = layer;
        Adam opt(cfg.model_lr);
        BatchSampler sampler(splits.train.n_rows(), cfg.batch_size, mix_seed(seed, 100));
        std::vector<double> mv = mask_to_values(mask);
        for (size_t step = 0; step < retrain_steps; ++step) {
            Batch batch = make_batch(splits.train, sampler.next_rows());
            train_batch(m, l, batch, mv, false, cfg, opt);
        }
        EvalResult val = eval_split(m, l, splits.val, mv, cfg.batch_size);
        result.ranked[c] = {std::move(mask), val.logloss, val.auc};
    }

    std::sort(result.ranked.begin(), result.ranked.end(), [](const MaskEval& a,
                                                             const MaskEval& b) {
        if (a.val_logloss != b.val_logloss) return a.val_logloss < b.val_logloss;
        return mask_bits(a.mask) < mask_bits(b.mask);
    });
    return result;
}

size_t rank_of(const OracleResult& result, const std::vector<uint8_t>& mask) {
    uint64_t bits = mask_bits(mask);
    for (size_t i = 0; i < result.ranked.size(); ++i)
        if (mask_bits(result.ranked[i].mask) == bits) return i + 1;
    throw std::invalid_argument("rank_of: mask not in enumeration (wrong size?)");
}

}  // namespace hamprune
