#include "hamprune/embeddings.hpp"

#include <cmath>
#include <stdexcept>

namespace hamprune {

EmbeddingLayer make_embedding_layer(const std::vector<uint32_t>& cardinalities,
                                    const std::vector<size_t>& base_dims, bool use_projection,
                                    size_t proj_dim, Rng& rng) {
    if (cardinalities.size() != base_dims.size())
        throw std::invalid_argument("embedding layer: cardinality/dim count mismatch");
    EmbeddingLayer layer;
    layer.use_projection = use_projection;
    layer.proj_dim = use_projection ? proj_dim : 0;
    for (size_t j = 0; j < cardinalities.size(); ++j) {
        size_t c = cardinalities[j];
        size_t d = std::min<size_t>(base_dims[j], c);
        double a = std::sqrt(6.0 / double(c + d));
        layer.tables.push_back(uniform_tensor({c, d}, a, rng));
        if (use_projection) {
            double ap = std::sqrt(6.0 / double(d + proj_dim));
            layer.projections.push_back(uniform_tensor({d, proj_dim}, ap, rng));
        }
    }
    return layer;
}

LookupNodes build_lookup(Graph& g, const EmbeddingLayer& layer,
                         const std::vector<std::vector<uint32_t>>& field_indices, int mask_node,
                         bool train_tables) {
    if (field_indices.size() != layer.field_count())
        throw std::invalid_argument("lookup: field count mismatch");
    if (g.value(mask_node).numel() != layer.total_columns())
        throw std::invalid_argument("lookup: mask length != total columns");

    LookupNodes out;
    size_t off = 0;
    for (size_t j = 0; j < layer.field_count(); ++j) {
        size_t d = layer.tables[j].cols();
        int table = g.leaf(layer.tables[j], train_tables);
        out.table_leaves.push_back(table);
        int rows = g.gather_rows(table, field_indices[j]);
        int field_mask = g.slice_range(mask_node, off, off + d);
        int masked = g.mul_rowvec(rows, field_mask);
        out.masked_raw.push_back(masked);
        if (layer.use_projection) {
            int proj = g.leaf(layer.projections[j], train_tables);
            out.projection_leaves.push_back(proj);
            out.field_vecs.push_back(g.matmul(masked, proj));
        } else {
            out.field_vecs.push_back(masked);
        }
        off += d;
    }
    return out;
}

int build_so_penalty(Graph& g, const std::vector<int>& table_nodes, bool normalized) {
    int total = -1;
    for (int t : table_nodes) {
        size_t d = g.value(t).cols();
        if (d == 0) continue;
        int v = normalized ? g.normalize_cols(t) : t;
        int gram = g.matmul(g.transpose(v), v);
        int diff = g.sub(gram, g.constant(Tensor::identity(d)));
        int frob = g.reduce_sum(g.hadamard(diff, diff));
        int term = g.scale(frob, 1.0 / double(d * d));
        total = total < 0 ? term : g.add(total, term);
    }
    if (total < 0) total = g.constant(Tensor::scalar(0.0));
    return total;
}

double so_penalty_value(const EmbeddingLayer& layer, bool normalized) {
    Graph g;
    std::vector<int> nodes;
    for (const auto& t : layer.tables) nodes.push_back(g.constant(t));
    return g.scalar_value(build_so_penalty(g, nodes, normalized));
}

double mean_abs_column_cosine(const Tensor& table) {
    size_t r = table.rows(), c = table.cols();
    if (c < 2) return 0.0;
    std::vector<double> norms(c, 0.0);
    for (size_t j = 0; j < c; ++j) {
        double s = 0;
        for (size_t i = 0; i < r; ++i) s += table.at(i, j) * table.at(i, j);
        norms[j] = std::sqrt(s);
    }
    double total = 0.0;
    size_t pairs = 0;
    for (size_t a = 0; a < c; ++a)
        for (size_t b = a + 1; b < c; ++b) {
            double dot = 0;
            for (size_t i = 0; i < r; ++i) dot += table.at(i, a) * table.at(i, b);
            double den = norms[a] * norms[b];
            total += den > 0 ? std::abs(dot / den) : 0.0;
            ++pairs;
        }
    return total / double(pairs);
}

EmbeddingLayer materialize_pruned(const EmbeddingLayer& layer, const std::vector<uint8_t>& mask) {
    if (mask.size() != layer.total_columns())
        throw std::invalid_argument("materialize_pruned: mask length != total columns");
    EmbeddingLayer pruned;
    pruned.use_projection = layer.use_projection;
    pruned.proj_dim = layer.proj_dim;
    size_t off = 0;
    for (size_t j = 0; j < layer.field_count(); ++j) {
        const Tensor& v = layer.tables[j];
        std::vector<size_t> keep;
        for (size_t cidx = 0; cidx < v.cols(); ++cidx)
            if (mask[off + cidx]) keep.push_back(cidx);
        Tensor nv({v.rows(), keep.size()});
        for (size_t i = 0; i < v.rows(); ++i)
            for (size_t kk = 0; kk < keep.size(); ++kk) nv.at(i, kk) = v.at(i, keep[kk]);
        pruned.tables.push_back(std::move(nv));
        if (layer.use_projection) {
            const Tensor& p = layer.projections[j];
            Tensor np({keep.size(), layer.proj_dim});
            for (size_t kk = 0; kk < keep.size(); ++kk)
                for (size_t q = 0; q < layer.proj_dim; ++q) np.at(kk, q) = p.at(keep[kk], q);
            pruned.projections.push_back(std::move(np));
        }
        off += v.cols();
    }
    return pruned;
}

size_t count_embedding_params(const EmbeddingLayer& layer, const std::vector<uint8_t>* mask) {
    size_t total = 0;
    size_t off = 0;
    for (const auto& t : layer.tables) {
        size_t cols = 0;
        for (size_t c = 0; c < t.cols(); ++c)
            if (!mask || (*mask)[off + c]) ++cols;
        total += t.rows() * cols;
        off += t.cols();
    }
    return total;
}

size_t count_projection_params(const EmbeddingLayer& layer, const std::vector<uint8_t>* mask) {
    if (!layer.use_projection) return 0;
    size_t total = 0;
    size_t off = 0;
    for (size_t j = 0; j < layer.field_count(); ++j) {
        size_t rows = 0;
        for (size_t c = 0; c < layer.tables[j].cols(); ++c)
            if (!mask || (*mask)[off + c]) ++rows;
        total += rows * layer.proj_dim;
        off += layer.tables[j].cols();
    }
    return total;
}

}  // namespace hamprune
