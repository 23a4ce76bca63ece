#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>

#include "doctest.h"
#include "hamprune/embeddings.hpp"
#include "hamprune/masks.hpp"
#include "hamprune/metrics.hpp"
#include "hamprune/models.hpp"
#include "hamprune/optim.hpp"
#include "testutil.hpp"

using namespace hamprune;
using testutil::max_rel_err;
using testutil::numeric_grad;

namespace {

EmbeddingLayer random_layer(const std::vector<uint32_t>& cards, const std::vector<size_t>& dims,
                            bool projection, size_t proj_dim, uint64_t seed) {
    Rng rng(seed);
    return make_embedding_layer(cards, dims, projection, proj_dim, rng);
}

std::vector<std::vector<uint32_t>> random_indices(const std::vector<uint32_t>& cards,
                                                  size_t batch, Rng& rng) {
    std::vector<std::vector<uint32_t>> idx(cards.size());
    for (size_t j = 0; j < cards.size(); ++j) {
        std::uniform_int_distribution<uint32_t> pick(0, cards[j] - 1);
        for (size_t b = 0; b < batch; ++b) idx[j].push_back(pick(rng));
    }
    return idx;
}

std::vector<double> random_labels(size_t n, Rng& rng) {
    std::vector<double> y(n);
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& v : y) v = double(coin(rng));
    return y;
}

}  // namespace

// -- embeddings ---------------------------------------------------------------

TEST_CASE("lookup: identity mask reproduces the raw gather") {
    std::vector<uint32_t> cards = {5, 3};
    EmbeddingLayer layer = random_layer(cards, {3, 2}, false, 0, 1);
    std::vector<std::vector<uint32_t>> idx = {{1, 4}, {0, 2}};
    std::vector<double> ones(layer.total_columns(), 1.0);

    Graph g;
    int mask = g.constant(Tensor({ones.size()}, ones));
    LookupNodes nodes = build_lookup(g, layer, idx, mask, false);
    for (size_t j = 0; j < 2; ++j) {
        const Tensor& got = g.value(nodes.field_vecs[j]);
        for (size_t b = 0; b < 2; ++b)
            for (size_t c = 0; c < layer.tables[j].cols(); ++c)
                CHECK(got.at(b, c) == layer.tables[j].at(idx[j][b], c));
    }
}

TEST_CASE("lookup: zeroed field mask annihilates its contribution") {
    std::vector<uint32_t> cards = {5, 3};
    EmbeddingLayer layer = random_layer(cards, {3, 2}, false, 0, 2);
    std::vector<double> mask_vals(layer.total_columns(), 1.0);
    for (size_t c = 0; c < 3; ++c) mask_vals[c] = 0.0;  // field 0

    Graph g;
    int mask = g.constant(Tensor({mask_vals.size()}, mask_vals));
    LookupNodes nodes = build_lookup(g, layer, {{1, 4}, {0, 2}}, mask, false);
    for (double v : g.value(nodes.masked_raw[0]).v) CHECK(v == 0.0);
}

TEST_CASE("lookup: gradients wrt tables, projections and mask match FD") {
    std::vector<uint32_t> cards = {4, 3};
    EmbeddingLayer layer = random_layer(cards, {3, 2}, true, 2, 3);
    std::vector<std::vector<uint32_t>> idx = {{0, 2, 2}, {1, 0, 2}};
    Rng rng(4);
    Tensor w = Tensor({3, 4});
    std::uniform_real_distribution<double> dist(-1, 1);
    for (auto& x : w.v) x = dist(rng);
    Tensor mask_var({5}, {1, 1, 1, 1, 1});

    auto f = [&]() {
        Graph g;
        int mask = g.constant(Tensor({5}, mask_var.v));
        LookupNodes nodes = build_lookup(g, layer, idx, mask, false);
        int cat = g.concat_cols(nodes.field_vecs);
        return g.scalar_value(g.reduce_sum(g.hadamard(cat, g.constant(w))));
    };

    Graph g;
    int mask = g.leaf(Tensor({5}, mask_var.v), true);
    LookupNodes nodes = build_lookup(g, layer, idx, mask, true);
    g.backward(g.reduce_sum(g.hadamard(g.concat_cols(nodes.field_vecs), g.constant(w))));

    CHECK(max_rel_err(g.grad(nodes.table_leaves[0]), numeric_grad(f, layer.tables[0]), 1e-3) <
          1e-5);
    CHECK(max_rel_err(g.grad(nodes.table_leaves[1]), numeric_grad(f, layer.tables[1]), 1e-3) <
          1e-5);
    CHECK(max_rel_err(g.grad(nodes.projection_leaves[0]),
                      numeric_grad(f, layer.projections[0]), 1e-3) < 1e-5);
    CHECK(max_rel_err(g.grad(mask), numeric_grad(f, mask_var), 1e-3) < 1e-5);
}

TEST_CASE("lookup is linear in the table row") {
    std::vector<uint32_t> cards = {6};
    EmbeddingLayer layer = random_layer(cards, {4}, false, 0, 5);
    auto run = [&]() {
        Graph g;
        int mask = g.constant(Tensor({4}, {1, 1, 0, 1}));
        LookupNodes nodes = build_lookup(g, layer, {{1}}, mask, false);
        return g.value(nodes.masked_raw[0]).v;
    };
    std::vector<double> base = run();
    for (size_t c = 0; c < 4; ++c) layer.tables[0].at(1, c) *= 2.0;
    std::vector<double> doubled = run();
    for (size_t c = 0; c < 4; ++c) CHECK(doubled[c] == doctest::Approx(2.0 * base[c]));
}

TEST_CASE("so_penalty: orthonormal columns give zero") {
    EmbeddingLayer layer;
    layer.tables.push_back(Tensor({3, 2}, {1, 0, 0, 1, 0, 0}));
    CHECK(so_penalty_value(layer, false) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(so_penalty_value(layer, true) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("so_penalty: two identical unit columns give 0.5") {
    // V^T V = [[1,1],[1,1]], ||. - I||_F^2 = 2, / d^2 = 0.5.
    EmbeddingLayer layer;
    layer.tables.push_back(Tensor({2, 2}, {1, 1, 0, 0}));
    CHECK(so_penalty_value(layer, false) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(so_penalty_value(layer, true) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("so_penalty: non-negative, gradient matches FD") {
    Rng rng(6);
    Tensor v = uniform_tensor({6, 3}, 1.0, rng);
    for (bool normalized : {false, true}) {
        auto f = [&]() {
            Graph g;
            return g.scalar_value(build_so_penalty(g, {g.constant(v)}, normalized));
        };
        CHECK(f() >= 0.0);
        Graph g;
        int vn = g.leaf(v, true);
        g.backward(build_so_penalty(g, {vn}, normalized));
        CHECK(max_rel_err(g.grad(vn), numeric_grad(f, v), 1e-3) < 1e-4);
    }
}

TEST_CASE("materialize_pruned: shapes shrink and counts drop") {
    std::vector<uint32_t> cards = {10, 5};
    EmbeddingLayer layer = random_layer(cards, {4, 2}, true, 3, 7);
    CHECK(count_embedding_params(layer) == 50);

    std::vector<uint8_t> full(6, 1);
    EmbeddingLayer same = materialize_pruned(layer, full);
    CHECK(count_embedding_params(same) == 50);

    std::vector<uint8_t> mask = {1, 1, 1, 0, 1, 1};  // drop one column of field 0
    CHECK(count_embedding_params(layer, &mask) == 40);
    EmbeddingLayer pruned = materialize_pruned(layer, mask);
    CHECK(pruned.tables[0].cols() == 3);
    CHECK(pruned.projections[0].rows() == 3);
    CHECK(count_embedding_params(pruned) == 40);

    std::vector<uint8_t> none(6, 0);
    CHECK(count_embedding_params(layer, &none) == 0);
}

TEST_CASE("column mask layout round trip") {
    ColumnMaskLayout layout = ColumnMaskLayout::from_dims({3, 1, 4});
    CHECK(layout.total() == 8);
    for (size_t s = 0; s < 8; ++s) {
        auto [f, c] = layout.field_col(s);
        CHECK(layout.flat(f, c) == s);
    }
    CHECK(layout.per_field_counts({1, 0, 1, 1, 0, 0, 1, 1}) ==
          std::vector<size_t>{2, 1, 2});
}

// -- masks ---------------------------------------------------------------------

TEST_CASE("ham mask: sign semantics and determinism") {
    MaskState state(MaskStrategy::kHam, 2, 0.0, 1);
    state.apply_update({-0.01, 0.01});  // alpha = [0.01, -0.01]
    CHECK(state.forward() == std::vector<double>{1.0, 0.0});
    CHECK(state.forward() == std::vector<double>{1.0, 0.0});
    CHECK(state.sign_mask() == std::vector<uint8_t>{1, 0});
    CHECK(state.positive_count() == 1);
}

TEST_CASE("ham backward is the identity, bit for bit") {
    MaskState state(MaskStrategy::kHam, 3, 0.01, 1);
    state.forward();
    std::vector<double> up = {0.7, -0.2, 1e-17};
    std::vector<double> g = state.backward(up);
    CHECK(std::memcmp(g.data(), up.data(), up.size() * sizeof(double)) == 0);
}

TEST_CASE("backward without forward is rejected") {
    MaskState state(MaskStrategy::kHam, 2, 0.01, 1);
    CHECK_THROWS_AS(state.backward({1.0, 1.0}), std::logic_error);
    state.forward();
    state.backward({1.0, 1.0});
    CHECK_THROWS_AS(state.backward({1.0, 1.0}), std::logic_error);
}

TEST_CASE("sam: mask equals clipped alpha, identity backward") {
    MaskState state(MaskStrategy::kSam, 2, 0.6, 1);
    CHECK(state.forward() == std::vector<double>{0.6, 0.6});
    CHECK(state.backward({0.3, -0.4}) == std::vector<double>{0.3, -0.4});
    state.apply_update({1.0, -1.0});  // clip to [0, 1]
    CHECK(state.alpha() == std::vector<double>{0.0, 1.0});
}

TEST_CASE("sam-gs: symmetry point and its derivative") {
    for (double temp : {1.0, 0.1, 0.01}) {
        MaskState state(MaskStrategy::kSamGs, 1, 0.5, 1, temp);
        std::vector<double> m = state.forward_with_noise({0.5});
        CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-12));
        // dm/dalpha = m(1-m)/(temp * a(1-a)) = 1/temp at the symmetry point.
        std::vector<double> g = state.backward({1.0});
        CHECK(g[0] == doctest::Approx(1.0 / temp).epsilon(1e-9));
    }
}

TEST_CASE("sam-gs: sampled mask stays in [0,1] and alpha steers it") {
    MaskState lo(MaskStrategy::kSamGs, 64, 0.05, 2, 0.1);
    MaskState hi(MaskStrategy::kSamGs, 64, 0.95, 2, 0.1);
    double mlo = 0, mhi = 0;
    for (int it = 0; it < 20; ++it) {
        for (double v : lo.forward()) {
            // Saturates to exactly 0/1 in floating point at extreme draws.
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            mlo += v;
        }
        for (double v : hi.forward()) mhi += v;
    }
    CHECK(mlo / (20 * 64) < 0.2);
    CHECK(mhi / (20 * 64) > 0.8);
}

TEST_CASE("sam-gs: Monte Carlo mean matches numerical integration") {
    double a = 0.3, temp = 0.5;
    MaskState state(MaskStrategy::kSamGs, 1, a, 7, temp);
    double mc = 0;
    size_t n = 200000;
    for (size_t i = 0; i < n; ++i) mc += state.forward()[0];
    mc /= double(n);

    // Trapezoid over u in (0,1).
    size_t grid = 200001;
    double integral = 0;
    for (size_t i = 1; i + 1 < grid; ++i) {
        double u = double(i) / double(grid - 1);
        double logits = std::log(a / (1 - a)) + std::log(u / (1 - u));
        integral += 1.0 / (1.0 + std::exp(-logits / temp));
    }
    integral /= double(grid - 2);
    CHECK(std::abs(mc - integral) < 0.01);
}

TEST_CASE("ham-p: degenerate probabilities and straight-through backward") {
    MaskState on(MaskStrategy::kHamP, 3, 1.0, 1);  // clips to 1 - p_min
    CHECK(on.forward_with_noise({0.5, 0.9, 0.0001}) == std::vector<double>{1, 1, 1});
    MaskState off(MaskStrategy::kHamP, 3, 0.0, 1);  // clips to p_min
    CHECK(off.forward_with_noise({0.5, 0.9, 0.2}) == std::vector<double>{0, 0, 0});
    std::vector<double> up = {0.25, -1.5, 0.0};
    CHECK(off.backward(up) == up);
}

TEST_CASE("select_top_s: ordering, extremes, tie break") {
    MaskState state(MaskStrategy::kHam, 3, 0.0, 1);
    state.apply_update({-0.9, -0.1, -0.5});  // alpha = [0.9, 0.1, 0.5]
    CHECK(state.select_top_s(2) == std::vector<uint8_t>{1, 0, 1});
    CHECK(state.select_top_s(0) == std::vector<uint8_t>{0, 0, 0});
    CHECK(state.select_top_s(3) == std::vector<uint8_t>{1, 1, 1});

    MaskState flat(MaskStrategy::kHam, 3, 0.42, 1);
    CHECK(flat.select_top_s(1) == std::vector<uint8_t>{1, 0, 0});
    size_t ones = 0;
    for (uint8_t b : flat.select_top_s(2)) ones += b;
    CHECK(ones == 2);
}

TEST_CASE("sign_mask: definition, initialization, count identity") {
    MaskState state(MaskStrategy::kHam, 3, 0.0, 1);
    state.apply_update({-0.2, 0.2, 0.0});  // alpha = [0.2, -0.2, 0.0]
    CHECK(state.sign_mask() == std::vector<uint8_t>{1, 0, 0});

    MaskState init(MaskStrategy::kHam, 5, 0.01, 1);
    CHECK(init.sign_mask() == std::vector<uint8_t>{1, 1, 1, 1, 1});
    CHECK(init.positive_count() == 5);

    MaskState sam(MaskStrategy::kSam, 2, 0.5, 1);
    CHECK_THROWS_AS(sam.sign_mask(), std::logic_error);
}

// -- models ---------------------------------------------------------------------

TEST_CASE("fm: zero embeddings leave only bias and first-order terms") {
    std::vector<uint32_t> cards = {3, 2};
    EmbeddingLayer layer = random_layer(cards, {2, 2}, false, 0, 8);
    for (auto& t : layer.tables) t.fill(0.0);

    Rng rng(9);
    CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
    model.w0.at(0) = 0.3;
    model.first_order[0].at(1, 0) = 0.5;
    model.first_order[1].at(0, 0) = -0.2;

    std::vector<double> probs = predict(model, layer, [] {
        Dataset d;
        auto schema = std::make_shared<FeatureSchema>();
        schema->fields = {{"a", FieldKind::kCategorical, 3, {}},
                          {"b", FieldKind::kCategorical, 2, {}}};
        d.schema = schema;
        d.idx = {1, 0};
        d.labels = {1};
        return d;
    }(), std::vector<double>(4, 1.0), 8);
    double logit = 0.3 + 0.5 - 0.2;
    CHECK(probs[0] == doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-12));
}

TEST_CASE("fm: hand-checked pairwise interactions") {
    // Two single-value fields with fixed embeddings.
    std::vector<uint32_t> cards = {1, 1};
    EmbeddingLayer layer;
    layer.tables.push_back(Tensor({1, 2}, {1, 0}));
    layer.tables.push_back(Tensor({1, 2}, {0, 1}));

    Rng rng(10);
    CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
    Batch batch;
    batch.field_idx = {{0}, {0}};
    batch.labels = {1};

    auto logit_of = [&](const EmbeddingLayer& l) {
        Graph g;
        int mask = g.constant(Tensor({4}, {1, 1, 1, 1}));
        ForwardNodes f = build_forward(g, model, l, batch.field_idx, mask, false);
        return g.value(f.logit).at(0);
    };
    CHECK(logit_of(layer) == doctest::Approx(0.0).epsilon(1e-15));  // orthogonal

    layer.tables[0] = Tensor({1, 2}, {1, 2});
    layer.tables[1] = Tensor({1, 2}, {3, 4});
    CHECK(logit_of(layer) == doctest::Approx(11.0).epsilon(1e-12));  // <e1,e2>
}

TEST_CASE("fm: squared-sum identity equals the pairwise loop") {
    Rng rng(11);
    std::vector<uint32_t> cards = {6, 4, 5, 3};
    EmbeddingLayer layer = random_layer(cards, {3, 3, 3, 3}, false, 0, 12);
    CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
    std::uniform_real_distribution<double> dist(-1, 1);
    model.w0.at(0) = dist(rng);
    for (auto& t : model.first_order)
        for (auto& x : t.v) x = dist(rng);

    for (int rep = 0; rep < 5; ++rep) {
        auto idx = random_indices(cards, 3, rng);
        Graph g;
        int mask = g.constant(Tensor::full({layer.total_columns()}, 1.0));
        ForwardNodes f = build_forward(g, model, layer, idx, mask, false);
        for (size_t b = 0; b < 3; ++b) {
            double expect = model.w0.at(0);
            for (size_t j = 0; j < cards.size(); ++j)
                expect += model.first_order[j].at(idx[j][b], 0);
            for (size_t i = 0; i < cards.size(); ++i)
                for (size_t j = i + 1; j < cards.size(); ++j)
                    for (size_t c = 0; c < 3; ++c)
                        expect += layer.tables[i].at(idx[i][b], c) *
                                  layer.tables[j].at(idx[j][b], c);
            CHECK(std::abs(g.value(f.logit).at(b) - expect) < 1e-10);
        }
    }
}

TEST_CASE("fm: swapping identical fields leaves the logit unchanged") {
    Rng rng(13);
    std::vector<uint32_t> cards = {4, 4, 3};
    EmbeddingLayer layer = random_layer(cards, {2, 2, 2}, false, 0, 14);
    layer.tables[1] = layer.tables[0];
    CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
    model.first_order[1] = model.first_order[0];

    auto logit = [&](std::vector<std::vector<uint32_t>> idx) {
        Graph g;
        int mask = g.constant(Tensor::full({6}, 1.0));
        ForwardNodes f = build_forward(g, model, layer, idx, mask, false);
        return g.value(f.logit).at(0);
    };
    CHECK(logit({{2}, {1}, {0}}) == doctest::Approx(logit({{1}, {2}, {0}})).epsilon(1e-14));
}

TEST_CASE("deepfm: zeroed tower reduces to fm plus final bias") {
    Rng rng(15);
    std::vector<uint32_t> cards = {5, 4};
    EmbeddingLayer layer = random_layer(cards, {3, 3}, true, 4, 16);
    CtrModel deep = make_model({ModelKind::kDeepFm, {8}, 0, {}}, layer, cards, rng);
    for (auto& w : deep.mlp.weights) w.fill(0.0);
    deep.mlp.biases.back().at(0) = 0.7;

    CtrModel plain = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
    plain.w0 = deep.w0;
    plain.first_order = deep.first_order;

    auto idx = random_indices(cards, 4, rng);
    Graph g1, g2;
    int m1 = g1.constant(Tensor::full({6}, 1.0));
    int m2 = g2.constant(Tensor::full({6}, 1.0));
    ForwardNodes f1 = build_forward(g1, deep, layer, idx, m1, false);
    ForwardNodes f2 = build_forward(g2, plain, layer, idx, m2, false);
    for (size_t b = 0; b < 4; ++b)
        CHECK(g1.value(f1.logit).at(b) ==
              doctest::Approx(g2.value(f2.logit).at(b) + 0.7).epsilon(1e-12));
}

TEST_CASE("deepfm: gradient check on a 2-field toy") {
    Rng rng(17);
    std::vector<uint32_t> cards = {3, 2};
    EmbeddingLayer layer = random_layer(cards, {2, 2}, true, 2, 18);
    CtrModel model = make_model({ModelKind::kDeepFm, {4}, 0, {}}, layer, cards, rng);
    for (auto& w : model.mlp.weights)
        for (auto& x : w.v) x = 0.3 * x + 0.05;

    std::vector<std::vector<uint32_t>> idx = {{0, 2, 1}, {1, 0, 1}};
    std::vector<double> labels = {1, 0, 1};
    auto loss_fn = [&]() {
        Graph g;
        int mask = g.constant(Tensor::full({4}, 1.0));
        ForwardNodes f = build_forward(g, model, layer, idx, mask, false);
        return g.scalar_value(g.logloss(f.prob, labels));
    };

    Graph g;
    int mask = g.constant(Tensor::full({4}, 1.0));
    ForwardNodes f = build_forward(g, model, layer, idx, mask, true);
    g.backward(g.logloss(f.prob, labels));

    CHECK(max_rel_err(g.grad(f.lookup.table_leaves[0]), numeric_grad(loss_fn, layer.tables[0]),
                      1e-3) < 1e-4);
    CHECK(max_rel_err(g.grad(f.lookup.projection_leaves[1]),
                      numeric_grad(loss_fn, layer.projections[1]), 1e-3) < 1e-4);
    CHECK(max_rel_err(g.grad(f.param_leaves[0]), numeric_grad(loss_fn, model.w0), 1e-3) < 1e-4);
    // First tower weight matrix sits right after w0 and the first-order tables.
    CHECK(max_rel_err(g.grad(f.param_leaves[3]), numeric_grad(loss_fn, model.mlp.weights[0]),
                      1e-3) < 1e-4);
}

TEST_CASE("deepfm: perturbing a masked column cannot move the logit") {
    Rng rng(19);
    std::vector<uint32_t> cards = {4, 3};
    EmbeddingLayer layer = random_layer(cards, {3, 2}, true, 3, 20);
    CtrModel model = make_model({ModelKind::kDeepFm, {6}, 0, {}}, layer, cards, rng);
    std::vector<double> mask_vals = {1, 0, 1, 1, 1};  // column 1 of field 0 masked

    auto idx = random_indices(cards, 3, rng);
    auto logits = [&]() {
        Graph g;
        int mask = g.constant(Tensor({5}, mask_vals));
        ForwardNodes f = build_forward(g, model, layer, idx, mask, false);
        return g.value(f.logit).v;
    };
    std::vector<double> before = logits();
    for (size_t r = 0; r < layer.tables[0].rows(); ++r) layer.tables[0].at(r, 1) += 3.21;
    CHECK(logits() == before);
}

TEST_CASE("dcnv2: zero cross weights give the residual identity") {
    Rng rng(21);
    std::vector<uint32_t> cards = {3, 3};
    EmbeddingLayer layer = random_layer(cards, {2, 2}, false, 0, 22);
    CtrModel model = make_model({ModelKind::kDcnV2, {}, 2, {}}, layer, cards, rng);
    for (auto& w : model.cross_w) w.fill(0.0);
    model.head.weights[0] = Tensor({4, 1}, {1, 1, 1, 1});
    model.head.biases[0].fill(0.0);

    std::vector<std::vector<uint32_t>> idx = {{1}, {2}};
    Graph g;
    int mask = g.constant(Tensor::full({4}, 1.0));
    ForwardNodes f = build_forward(g, model, layer, idx, mask, false);
    double expect = 0;
    for (size_t c = 0; c < 2; ++c)
        expect += layer.tables[0].at(1, c) + layer.tables[1].at(2, c);
    CHECK(g.value(f.logit).at(0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("dcnv2: one identity cross layer squares-and-adds") {
    // x0 = [1,2], W = I, b = 0: x1 = x0 .* x0 + x0 = [2, 6].
    std::vector<uint32_t> cards = {1, 1};
    EmbeddingLayer layer;
    layer.tables.push_back(Tensor({1, 1}, {1}));
    layer.tables.push_back(Tensor({1, 1}, {2}));
    Rng rng(23);
    CtrModel model = make_model({ModelKind::kDcnV2, {}, 1, {}}, layer, cards, rng);
    model.cross_w[0] = Tensor::identity(2);
    model.cross_b[0].fill(0.0);
    model.head.weights[0] = Tensor({2, 1}, {1, 0});
    model.head.biases[0].fill(0.0);

    Graph g;
    int mask = g.constant(Tensor({2}, {1, 1}));
    ForwardNodes f = build_forward(g, model, layer, {{0}, {0}}, mask, false);
    CHECK(g.value(f.logit).at(0) == doctest::Approx(2.0).epsilon(1e-14));

    model.head.weights[0] = Tensor({2, 1}, {0, 1});
    Graph g2;
    int mask2 = g2.constant(Tensor({2}, {1, 1}));
    ForwardNodes f2 = build_forward(g2, model, layer, {{0}, {0}}, mask2, false);
    CHECK(g2.value(f2.logit).at(0) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("dcnv2: gradient check") {
    Rng rng(25);
    std::vector<uint32_t> cards = {3, 2};
    EmbeddingLayer layer = random_layer(cards, {2, 2}, false, 0, 26);
    CtrModel model = make_model({ModelKind::kDcnV2, {}, 2, {}}, layer, cards, rng);

    std::vector<std::vector<uint32_t>> idx = {{0, 2}, {1, 0}};
    std::vector<double> labels = {0, 1};
    auto loss_fn = [&]() {
        Graph g;
        int mask = g.constant(Tensor::full({4}, 1.0));
        ForwardNodes f = build_forward(g, model, layer, idx, mask, false);
        return g.scalar_value(g.logloss(f.prob, labels));
    };
    Graph g;
    int mask = g.constant(Tensor::full({4}, 1.0));
    ForwardNodes f = build_forward(g, model, layer, idx, mask, true);
    g.backward(g.logloss(f.prob, labels));

    CHECK(max_rel_err(g.grad(f.param_leaves[0]), numeric_grad(loss_fn, model.cross_w[0]),
                      1e-3) < 1e-4);
    CHECK(max_rel_err(g.grad(f.param_leaves[1]), numeric_grad(loss_fn, model.cross_b[0]),
                      1e-3) < 1e-4);
    CHECK(max_rel_err(g.grad(f.lookup.table_leaves[1]), numeric_grad(loss_fn, layer.tables[1]),
                      1e-3) < 1e-4);
}

TEST_CASE("all models emit finite probabilities in (0,1)") {
    Rng rng(27);
    std::vector<uint32_t> cards = {6, 5, 4};
    for (ModelKind kind : {ModelKind::kFm, ModelKind::kDeepFm, ModelKind::kDcnV2}) {
        bool projection = kind != ModelKind::kDcnV2;
        EmbeddingLayer layer = random_layer(cards, {3, 3, 3}, projection, 4, 28);
        ModelConfig mc{kind, {8}, 2, {}};
        CtrModel model = make_model(mc, layer, cards, rng);
        auto idx = random_indices(cards, 16, rng);
        Graph g;
        int mask = g.constant(Tensor::full({layer.total_columns()}, 1.0));
        ForwardNodes f = build_forward(g, model, layer, idx, mask, false);
        for (double p : g.value(f.prob).v) {
            CHECK(std::isfinite(p));
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
}

TEST_CASE("masked supernet equals materialized pruned model") {
    Rng rng(29);
    std::vector<uint32_t> cards = {7, 5, 6};
    for (ModelKind kind : {ModelKind::kFm, ModelKind::kDcnV2}) {
        bool projection = kind != ModelKind::kDcnV2;
        EmbeddingLayer layer = random_layer(cards, {4, 3, 3}, projection, 4, 30);
        CtrModel model = make_model({kind, {8}, 2, {}}, layer, cards, rng);

        std::uniform_int_distribution<int> coin(0, 1);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<uint8_t> mask(layer.total_columns());
            for (auto& b : mask) b = uint8_t(coin(rng));
            EmbeddingLayer pruned_layer = materialize_pruned(layer, mask);
            CtrModel pruned_model = prune_model(model, mask, layer);

            auto idx = random_indices(cards, 8, rng);
            Graph g1;
            int m1 = g1.constant(Tensor({mask.size()}, mask_to_values(mask)));
            ForwardNodes f1 = build_forward(g1, model, layer, idx, m1, false);
            Graph g2;
            int m2 = g2.constant(Tensor::full({pruned_layer.total_columns()}, 1.0));
            ForwardNodes f2 = build_forward(g2, pruned_model, pruned_layer, idx, m2, false);
            for (size_t b = 0; b < 8; ++b)
                CHECK(std::abs(g1.value(f1.prob).at(b) - g2.value(f2.prob).at(b)) < 1e-12);
        }
    }
}

// -- metrics ---------------------------------------------------------------------

TEST_CASE("logloss examples and errors") {
    CHECK(logloss({0.5, 0.5}, {0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(logloss({1.0 - 1e-12}, {1}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(logloss({0.9, 0.2}, {1, 0}) == doctest::Approx(0.164252).epsilon(1e-4));
    CHECK(logloss({2.0}, {1}) >= 0.0);  // clipped, finite
    CHECK_THROWS_AS(logloss({0.5}, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(logloss({}, {}), std::invalid_argument);
}

TEST_CASE("auc examples and errors") {
    CHECK(auc({0.9, 0.1}, {1, 0}) == 1.0);
    CHECK(auc({0.4, 0.4, 0.4}, {1, 0, 1}) == 0.5);
    CHECK(auc({0.8, 0.6, 0.4}, {1, 0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), std::invalid_argument);
}

TEST_CASE("auc invariants: monotone transform, label flip, pair oracle") {
    Rng rng(31);
    std::uniform_real_distribution<double> dist(0, 1);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        size_t n = 50;
        std::vector<double> s(n);
        std::vector<uint8_t> y(n);
        bool both = false;
        for (size_t i = 0; i < n; ++i) {
            s[i] = std::round(dist(rng) * 20) / 20.0;  // force ties
            y[i] = uint8_t(coin(rng));
        }
        y[0] = 0;
        y[1] = 1;
        both = true;
        REQUIRE(both);

        double base = auc(s, y);
        CHECK(std::abs(base - testutil::auc_pairs(s, y)) < 1e-12);

        std::vector<double> warped(n);
        for (size_t i = 0; i < n; ++i) warped[i] = std::exp(3.0 * s[i]) + 1.0;
        CHECK(auc(warped, y) == doctest::Approx(base).epsilon(1e-12));

        std::vector<uint8_t> flipped(n);
        for (size_t i = 0; i < n; ++i) flipped[i] = uint8_t(1 - y[i]);
        CHECK(auc(s, y) + auc(s, flipped) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

// -- optimizers -------------------------------------------------------------------

TEST_CASE("adam: zero gradient leaves parameters, advances the step count") {
    Tensor p({3}, {1, 2, 3});
    Tensor g({3});
    Adam opt(0.1);
    opt.step({&p}, {&g});
    CHECK(p.v == std::vector<double>{1, 2, 3});
    CHECK(opt.steps_taken() == 1);
}

TEST_CASE("adam: first step follows the bias-corrected closed form") {
    Tensor p({2}, {0.5, -0.5});
    Tensor g({2}, {0.2, -0.1});
    Adam opt(0.01);
    opt.step({&p}, {&g});
    for (size_t i = 0; i < 2; ++i) {
        double expect = (i == 0 ? 0.5 : -0.5) -
                        0.01 * g.at(i) / (std::sqrt(g.at(i) * g.at(i)) + 1e-8);
        CHECK(p.at(i) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("adam: 100-step trace on a quadratic matches a reference rollout") {
    // Independent scalar re-derivation of Adam on f(x) = 0.5 * a * x^2.
    double a = 3.0, lr = 0.05;
    double x_ref = 2.0, m = 0, v = 0;
    Tensor p({1}, {2.0});
    Adam opt(lr);
    for (int t = 1; t <= 100; ++t) {
        double g_ref = a * x_ref;
        m = 0.9 * m + 0.1 * g_ref;
        v = 0.999 * v + 0.001 * g_ref * g_ref;
        double mhat = m / (1 - std::pow(0.9, t));
        double vhat = v / (1 - std::pow(0.999, t));
        x_ref -= lr * mhat / (std::sqrt(vhat) + 1e-8);

        Tensor g({1}, {a * p.at(0)});
        opt.step({&p}, {&g});
    }
    CHECK(std::abs(p.at(0) - x_ref) < 1e-10);
}

TEST_CASE("optimizers reject malformed input") {
    Tensor p({2}, {1, 2});
    Tensor bad({2}, {std::nan(""), 0.0});
    Adam opt(0.1);
    CHECK_THROWS_AS(opt.step({&p}, {&bad}), std::runtime_error);
    Tensor wrong({3});
    CHECK_THROWS_AS(opt.step({&p}, {&wrong}), std::invalid_argument);

    Sgd sgd(0.5);
    Tensor g({2}, {0.2, -0.2});
    sgd.step({&p}, {&g});
    CHECK(p.v == std::vector<double>{0.9, 2.1});
}
