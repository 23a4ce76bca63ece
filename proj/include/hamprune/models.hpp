#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hamprune/data.hpp"
#include "hamprune/embeddings.hpp"
#include "hamprune/graph.hpp"

namespace hamprune {

enum class ModelKind : uint8_t { kFm = 0, kDeepFm = 1, kDcnV2 = 2 };

std::string model_name(ModelKind k);
ModelKind model_from_name(const std::string& name);

struct ModelConfig {
    ModelKind kind = ModelKind::kFm;
    std::vector<size_t> mlp_hidden = {64, 64};  // DeepFM tower
    size_t cross_layers = 2;                    // DCN-V2
    std::vector<size_t> head_hidden = {};       // DCN-V2 head; empty = linear
};

struct MlpParams {
    std::vector<Tensor> weights;  // [in, out] per layer
    std::vector<Tensor> biases;   // [out]
};

/// Interaction/output parameters of one CTR model. Embedding tables live in
/// EmbeddingLayer; only the parts for `kind` are populated.
struct CtrModel {
    ModelKind kind = ModelKind::kFm;
    Tensor w0;                        // global bias [1]
    std::vector<Tensor> first_order;  // per field [C_j, 1]; never masked
    MlpParams mlp;                    // DeepFM tower
    std::vector<Tensor> cross_w;      // DCN-V2 [D, D]
    std::vector<Tensor> cross_b;      // DCN-V2 [D]
    MlpParams head;                   // DCN-V2 head

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    size_t dense_param_count() const;  // interaction + output layers
};

CtrModel make_model(const ModelConfig& cfg, const EmbeddingLayer& layer,
                    const std::vector<uint32_t>& cardinalities, Rng& rng);

/// Batch forward pass as graph nodes. param_leaves is aligned with
/// CtrModel::params(); combined with LookupNodes it gives the optimizer
/// every trainable leaf.
struct ForwardNodes {
    LookupNodes lookup;
    std::vector<int> param_leaves;
    int logit = -1;
    int prob = -1;
};

ForwardNodes build_forward(Graph& g, const CtrModel& model, const EmbeddingLayer& layer,
                           const std::vector<std::vector<uint32_t>>& field_idx, int mask_node,
                           bool train_params);

/// Model whose parameters match a materialize_pruned embedding layer. For
/// DCN-V2 the cross matrices and head drop the rows/columns of pruned
/// slots; FM/DeepFM interaction parameters are unaffected.
CtrModel prune_model(const CtrModel& model, const std::vector<uint8_t>& mask,
                     const EmbeddingLayer& layer);

/// Forward-only predictions over a dataset, in row order.
std::vector<double> predict(const CtrModel& model, const EmbeddingLayer& layer,
                            const Dataset& data, const std::vector<double>& mask_values,
                            size_t batch_size);

}  // namespace hamprune
