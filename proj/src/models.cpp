#include "hamprune/models.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hamprune {

std::string model_name(ModelKind k) {
    switch (k) {
        case ModelKind::kFm: return "fm";
        case ModelKind::kDeepFm: return "deepfm";
        case ModelKind::kDcnV2: return "dcnv2";
    }
    return "?";
}

ModelKind model_from_name(const std::string& name) {
    if (name == "fm") return ModelKind::kFm;
    if (name == "deepfm") return ModelKind::kDeepFm;
    if (name == "dcnv2" || name == "dcn-v2") return ModelKind::kDcnV2;
    throw std::invalid_argument("unknown model: " + name);
}

namespace {

MlpParams make_mlp(size_t input_dim, const std::vector<size_t>& hidden, Rng& rng) {
    MlpParams p;
    size_t in = input_dim;
    std::vector<size_t> widths = hidden;
    widths.push_back(1);
    for (size_t out : widths) {
        double a = std::sqrt(6.0 / double(in + out));
        p.weights.push_back(uniform_tensor({in, out}, a, rng));
        p.biases.push_back(Tensor::zeros({out}));
        in = out;
    }
    return p;
}

void append_mlp_params(std::vector<Tensor*>& out, MlpParams& p) {
    for (size_t i = 0; i < p.weights.size(); ++i) {
        out.push_back(&p.weights[i]);
        out.push_back(&p.biases[i]);
    }
}

// Hidden layers with ReLU, linear scalar output: returns a [B] node.
int build_mlp(Graph& g, const MlpParams& p, int input, std::vector<int>& leaves,
              bool train_params) {
    int h = input;
    for (size_t i = 0; i < p.weights.size(); ++i) {
        int w = g.leaf(p.weights[i], train_params);
        int b = g.leaf(p.biases[i], train_params);
        leaves.push_back(w);
        leaves.push_back(b);
        h = g.add_rowvec(g.matmul(h, w), b);
        if (i + 1 < p.weights.size()) h = g.relu(h);
    }
    return g.reshape(h, {g.value(h).rows()});
}

int add_chain(Graph& g, const std::vector<int>& nodes) {
    int acc = nodes.at(0);
    for (size_t i = 1; i < nodes.size(); ++i) acc = g.add(acc, nodes[i]);
    return acc;
}

// w0 + sum_i w_xi + 0.5 (||sum_i e_i||^2 - sum_i ||e_i||^2), per row.
int build_fm_logit(Graph& g, const ForwardNodes& f,
                   const std::vector<std::vector<uint32_t>>& field_idx, int w0_leaf,
                   const std::vector<int>& first_order_leaves) {
    size_t batch = field_idx[0].size();
    std::vector<int> fo_terms;
    for (size_t j = 0; j < first_order_leaves.size(); ++j)
        fo_terms.push_back(g.gather_rows(first_order_leaves[j], field_idx[j]));
    int fo = g.reshape(add_chain(g, fo_terms), {batch});

    int esum = add_chain(g, f.lookup.field_vecs);
    int sq_of_sum = g.row_sum(g.hadamard(esum, esum));
    std::vector<int> norms;
    for (int z : f.lookup.field_vecs) norms.push_back(g.row_sum(g.hadamard(z, z)));
    int sum_of_sq = add_chain(g, norms);
    int pairwise = g.scale(g.sub(sq_of_sum, sum_of_sq), 0.5);

    return add_chain(g, {g.broadcast_scalar(w0_leaf, batch), fo, pairwise});
}

}  // namespace

std::vector<Tensor*> CtrModel::params() {
    std::vector<Tensor*> out;
    if (kind == ModelKind::kFm || kind == ModelKind::kDeepFm) {
        out.push_back(&w0);
        for (auto& t : first_order) out.push_back(&t);
        if (kind == ModelKind::kDeepFm) append_mlp_params(out, mlp);
    } else {
        for (size_t l = 0; l < cross_w.size(); ++l) {
            out.push_back(&cross_w[l]);
            out.push_back(&cross_b[l]);
        }
        append_mlp_params(out, head);
    }
    return out;
}

std::vector<const Tensor*> CtrModel::params() const {
    auto mut = const_cast<CtrModel*>(this)->params();
    return std::vector<const Tensor*>(mut.begin(), mut.end());
}

size_t CtrModel::dense_param_count() const {
    size_t n = 0;
    for (const Tensor* t : params()) n += t->numel();
    if (kind == ModelKind::kFm || kind == ModelKind::kDeepFm) {
        n -= w0.numel();
        for (const auto& t : first_order) n -= t.numel();
    }
    return n;
}

CtrModel make_model(const ModelConfig& cfg, const EmbeddingLayer& layer,
                    const std::vector<uint32_t>& cardinalities, Rng& rng) {
    CtrModel m;
    m.kind = cfg.kind;
    if (cfg.kind == ModelKind::kFm || cfg.kind == ModelKind::kDeepFm) {
        size_t p = layer.field_output_dim(0);
        for (size_t j = 1; j < layer.field_count(); ++j)
            if (layer.field_output_dim(j) != p)
                throw std::invalid_argument(
                    "fm/deepfm: field vectors must share one dimension (enable projection)");
        m.w0 = Tensor::zeros({1});
        for (uint32_t c : cardinalities) m.first_order.push_back(Tensor::zeros({c, 1}));
        if (cfg.kind == ModelKind::kDeepFm)
            m.mlp = make_mlp(layer.field_count() * p, cfg.mlp_hidden, rng);
    } else {
        size_t d = layer.output_dim();
        for (size_t l = 0; l < cfg.cross_layers; ++l) {
            double a = std::sqrt(6.0 / double(d + d));
            m.cross_w.push_back(uniform_tensor({d, d}, a, rng));
            m.cross_b.push_back(Tensor::zeros({d}));
        }
        m.head = make_mlp(d, cfg.head_hidden, rng);
    }
    return m;
}

ForwardNodes build_forward(Graph& g, const CtrModel& model, const EmbeddingLayer& layer,
                           const std::vector<std::vector<uint32_t>>& field_idx, int mask_node,
                           bool train_params) {
    ForwardNodes f;
    f.lookup = build_lookup(g, layer, field_idx, mask_node, train_params);

    if (model.kind == ModelKind::kFm || model.kind == ModelKind::kDeepFm) {
        int w0 = g.leaf(model.w0, train_params);
        f.param_leaves.push_back(w0);
        std::vector<int> fo_leaves;
        for (const auto& t : model.first_order) {
            int leaf = g.leaf(t, train_params);
            fo_leaves.push_back(leaf);
            f.param_leaves.push_back(leaf);
        }
        f.logit = build_fm_logit(g, f, field_idx, w0, fo_leaves);
        if (model.kind == ModelKind::kDeepFm) {
            int tower_in = g.concat_cols(f.lookup.field_vecs);
            int tower = build_mlp(g, model.mlp, tower_in, f.param_leaves, train_params);
            f.logit = g.add(f.logit, tower);
        }
    } else {
        int x0 = g.concat_cols(f.lookup.masked_raw);
        int x = x0;
        for (size_t l = 0; l < model.cross_w.size(); ++l) {
            int w = g.leaf(model.cross_w[l], train_params);
            int b = g.leaf(model.cross_b[l], train_params);
            f.param_leaves.push_back(w);
            f.param_leaves.push_back(b);
            // x_{l+1} = x0 .* (x_l W_l + b_l) + x_l
            x = g.add(g.hadamard(x0, g.add_rowvec(g.matmul(x, w), b)), x);
        }
        f.logit = build_mlp(g, model.head, x, f.param_leaves, train_params);
    }
    f.prob = g.sigmoid(f.logit);
    return f;
}

CtrModel prune_model(const CtrModel& model, const std::vector<uint8_t>& mask,
                     const EmbeddingLayer& layer) {
    CtrModel out = model;
    if (model.kind != ModelKind::kDcnV2) return out;
    if (layer.use_projection)
        throw std::invalid_argument("prune_model: DCN-V2 expects raw embeddings");
    if (mask.size() != layer.total_columns())
        throw std::invalid_argument("prune_model: mask length mismatch");

    std::vector<size_t> keep;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) keep.push_back(i);
    size_t d = keep.size();

    for (size_t l = 0; l < model.cross_w.size(); ++l) {
        Tensor w({d, d});
        for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j) w.at(i, j) = model.cross_w[l].at(keep[i], keep[j]);
        out.cross_w[l] = std::move(w);
        Tensor b({d});
        for (size_t i = 0; i < d; ++i) b.at(i) = model.cross_b[l].at(keep[i]);
        out.cross_b[l] = std::move(b);
    }
    const Tensor& h0 = model.head.weights[0];
    Tensor w({d, h0.cols()});
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < h0.cols(); ++j) w.at(i, j) = h0.at(keep[i], j);
    out.head.weights[0] = std::move(w);
    return out;
}

std::vector<double> predict(const CtrModel& model, const EmbeddingLayer& layer,
                            const Dataset& data, const std::vector<double>& mask_values,
                            size_t batch_size) {
    std::vector<double> out;
    out.reserve(data.n_rows());
    size_t bs = std::max<size_t>(1, batch_size);
    for (size_t lo = 0; lo < data.n_rows(); lo += bs) {
        size_t hi = std::min(lo + bs, data.n_rows());
        std::vector<size_t> rows(hi - lo);
        std::iota(rows.begin(), rows.end(), lo);
        Batch b = make_batch(data, rows);
        Graph g;
        int mask = g.constant(Tensor({mask_values.size()}, mask_values));
        ForwardNodes f = build_forward(g, model, layer, b.field_idx, mask, false);
        const Tensor& p = g.value(f.prob);
        out.insert(out.end(), p.v.begin(), p.v.end());
    }
    return out;
}

}  // namespace hamprune
