#pragma once

#include <cstdint>
#include <vector>

#include "hamprune/graph.hpp"
#include "hamprune/rng.hpp"
#include "hamprune/tensor.hpp"

namespace hamprune {

/// Maps (field, column) to a flat slot in the global column mask.
struct ColumnMaskLayout {
    std::vector<size_t> offsets;  // offsets[j] = first slot of field j; offsets[K] = S

    static ColumnMaskLayout from_dims(const std::vector<size_t>& dims) {
        ColumnMaskLayout l;
        l.offsets.resize(dims.size() + 1, 0);
        for (size_t j = 0; j < dims.size(); ++j) l.offsets[j + 1] = l.offsets[j] + dims[j];
        return l;
    }

    size_t field_count() const { return offsets.size() - 1; }
    size_t total() const { return offsets.back(); }
    size_t flat(size_t field, size_t col) const { return offsets[field] + col; }

    std::pair<size_t, size_t> field_col(size_t slot) const {
        for (size_t j = 0; j + 1 < offsets.size(); ++j)
            if (slot < offsets[j + 1]) return {j, slot - offsets[j]};
        throw std::out_of_range("layout: slot out of range");
    }

    std::vector<size_t> per_field_counts(const std::vector<uint8_t>& mask) const {
        std::vector<size_t> counts(field_count(), 0);
        for (size_t s = 0; s < total(); ++s)
            if (mask[s]) ++counts[field_col(s).first];
        return counts;
    }
};

/// Mixed-dimension embedding tables, optionally followed by per-field
/// bias-free linear projections to a common dimension.
struct EmbeddingLayer {
    std::vector<Tensor> tables;       // V_j: C_j x d_j
    std::vector<Tensor> projections;  // P_j: d_j x proj_dim (empty unless use_projection)
    bool use_projection = false;
    size_t proj_dim = 0;

    size_t field_count() const { return tables.size(); }

    std::vector<size_t> dims() const {
        std::vector<size_t> d(tables.size());
        for (size_t j = 0; j < tables.size(); ++j) d[j] = tables[j].cols();
        return d;
    }

    size_t total_columns() const {
        size_t s = 0;
        for (const auto& t : tables) s += t.cols();
        return s;
    }

    /// Width of one field's output vector.
    size_t field_output_dim(size_t j) const {
        return use_projection ? proj_dim : tables[j].cols();
    }

    size_t output_dim() const {
        size_t s = 0;
        for (size_t j = 0; j < tables.size(); ++j) s += field_output_dim(j);
        return s;
    }

    ColumnMaskLayout layout() const { return ColumnMaskLayout::from_dims(dims()); }
};

/// Base dimensions are capped at the field cardinality to avoid
/// column-rank-deficient tables.
EmbeddingLayer make_embedding_layer(const std::vector<uint32_t>& cardinalities,
                                    const std::vector<size_t>& base_dims, bool use_projection,
                                    size_t proj_dim, Rng& rng);

/// Per-field embedding nodes built into `g`: gather, column mask, optional
/// projection. `mask_node` is a flat [S] node (values in [0,1]).
struct LookupNodes {
    std::vector<int> table_leaves;
    std::vector<int> projection_leaves;
    std::vector<int> masked_raw;  // per field, [B x d_j], pre-projection
    std::vector<int> field_vecs;  // per field, [B x field_output_dim]
};

LookupNodes build_lookup(Graph& g, const EmbeddingLayer& layer,
                         const std::vector<std::vector<uint32_t>>& field_indices, int mask_node,
                         bool train_tables);

/// Soft-orthogonality penalty over the given table nodes:
/// sum_j ||V_j^T V_j - I||_F^2 / d_j^2. The normalized variant rescales
/// columns to unit norm first (pairwise cosine form).
int build_so_penalty(Graph& g, const std::vector<int>& table_nodes, bool normalized);

/// Convenience: penalty value (no graph) for reporting and tests.
double so_penalty_value(const EmbeddingLayer& layer, bool normalized);

/// Mean absolute pairwise column cosine of one table.
double mean_abs_column_cosine(const Tensor& table);

/// New layer with masked columns physically removed; projection rows follow
/// their columns.
EmbeddingLayer materialize_pruned(const EmbeddingLayer& layer, const std::vector<uint8_t>& mask);

/// Embedding parameter count: sum_j C_j * (surviving columns of j).
size_t count_embedding_params(const EmbeddingLayer& layer,
                              const std::vector<uint8_t>* mask = nullptr);

/// Projection parameter count under an optional mask.
size_t count_projection_params(const EmbeddingLayer& layer,
                               const std::vector<uint8_t>* mask = nullptr);

inline std::vector<double> mask_to_values(const std::vector<uint8_t>& mask) {
    return std::vector<double>(mask.begin(), mask.end());
}

}  // namespace hamprune
