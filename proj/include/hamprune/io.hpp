#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hamprune/embeddings.hpp"
#include "hamprune/models.hpp"

namespace hamprune {

/// Stage handoff archive: embedding layer + interaction parameters, plus
/// the auxiliary-weight snapshot when a search has run. Binary and
/// byte-exact, so a round trip is lossless.
struct Checkpoint {
    uint64_t schema_hash = 0;
    EmbeddingLayer layer;
    CtrModel model;
    std::vector<double> alpha;  // empty when no search state is attached
    uint8_t strategy_tag = 0;
    uint64_t mask_seed = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hamprune
