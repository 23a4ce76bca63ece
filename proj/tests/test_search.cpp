#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "hamprune/io.hpp"
#include "hamprune/oracle.hpp"
#include "hamprune/search.hpp"
#include "testutil.hpp"

using namespace hamprune;

namespace {

// Planted-signal task: two interacting rank-2 fields and two pure-noise
// fields.
Splits planted_splits(uint64_t seed, size_t n_rows = 4000) {
    SyntheticSpec spec;
    spec.fields = {{24, 2, 1.6}, {24, 2, 1.6}, {20, 0, 1.0}, {20, 0, 1.0}};
    Dataset all = synthesize(spec, n_rows, seed);
    return split(all, {0.8, 0.1, 0.1}, mix_seed(seed, 77));
}

SearchConfig small_config(uint64_t seed) {
    SearchConfig cfg;
    cfg.target_size = 4;
    cfg.batch_size = 128;
    cfg.pretrain_max_epochs = 4;
    cfg.search_max_epochs = 6;
    cfg.retrain_max_epochs = 4;
    cfg.patience = 2;
    cfg.so_lambda = 1e-3;
    cfg.seed = seed;
    return cfg;
}

ModelSetup fm_setup(size_t dim_per_field, size_t fields, size_t proj_dim = 4) {
    ModelSetup setup;
    setup.model.kind = ModelKind::kFm;
    setup.base_dims.assign(fields, dim_per_field);
    setup.use_projection = true;
    setup.proj_dim = proj_dim;
    return setup;
}

}  // namespace

TEST_CASE("alpha_step reproduces the hand-computed update exactly") {
    MaskState state(MaskStrategy::kHam, 2, 0.01, 1);
    state.forward();
    SearchConfig cfg;
    cfg.alpha_lr = 1e-3;
    cfg.mu = 5e-5;
    cfg.target_size = 1;
    alpha_step(state, {0.5, -0.2}, cfg);

    // count = 2 > s = 1, so the drift is -mu on every coordinate.
    double expect0 = 0.01 - 1e-3 * 0.5 - 5e-5;
    double expect1 = 0.01 - 1e-3 * (-0.2) - 5e-5;
    CHECK(state.alpha()[0] == expect0);  // bit-exact
    CHECK(state.alpha()[1] == expect1);
    CHECK(state.alpha()[0] == doctest::Approx(0.00945).epsilon(1e-12));
    CHECK(state.alpha()[1] == doctest::Approx(0.01015).epsilon(1e-12));
}

TEST_CASE("alpha_step: sign(0) = 0 makes the on-target penalty vanish") {
    MaskState state(MaskStrategy::kHam, 3, 0.0, 1);
    state.apply_update({-0.02, -0.01, 0.03});  // alpha = [0.02, 0.01, -0.03], count = 2
    state.forward();
    SearchConfig cfg;
    cfg.alpha_lr = 1e-3;
    cfg.mu = 5e-5;
    cfg.target_size = 2;
    alpha_step(state, {0.1, -0.1, 0.2}, cfg);
    CHECK(state.alpha()[0] == 0.02 - 1e-3 * 0.1);
    CHECK(state.alpha()[1] == 0.01 + 1e-3 * 0.1);
    CHECK(state.alpha()[2] == -0.03 - 1e-3 * 0.2);
}

TEST_CASE("alpha_step: zero gradient gives a uniform drift of exactly mu") {
    MaskState state(MaskStrategy::kHam, 4, 0.01, 1);
    state.forward();
    SearchConfig cfg;
    cfg.alpha_lr = 1e-3;
    cfg.mu = 5e-5;
    cfg.target_size = 2;  // count = 4 > 2
    alpha_step(state, {0, 0, 0, 0}, cfg);
    for (double a : state.alpha()) CHECK(a == 0.01 - 5e-5);
}

TEST_CASE("drift property: positive count is monotone toward the target") {
    Rng rng(5);
    std::uniform_real_distribution<double> dist(-0.002, 0.002);
    for (int rep = 0; rep < 10; ++rep) {
        MaskState state(MaskStrategy::kHam, 12, 0.0, 1);
        std::vector<double> delta(12);
        for (auto& d : delta) d = -dist(rng);
        state.apply_update(delta);

        SearchConfig cfg;
        cfg.alpha_lr = 1e-3;
        cfg.mu = 1e-4;
        cfg.target_size = 6;
        // Per step: above the target the count cannot grow, below it cannot
        // shrink; at the target the zero-gradient update is a no-op.
        for (int step = 0; step < 30; ++step) {
            size_t prev = state.positive_count();
            if (prev == 6) break;
            state.forward();
            alpha_step(state, std::vector<double>(12, 0.0), cfg);
            size_t now = state.positive_count();
            if (prev > 6) CHECK(now <= prev);
            else CHECK(now >= prev);
        }
    }
}

TEST_CASE("a masked column can re-activate when the count is short") {
    MaskState state(MaskStrategy::kHam, 3, 0.0, 1);
    state.apply_update({-0.5, -0.4, 0.0001});  // alpha = [0.5, 0.4, -0.0001]
    CHECK(state.positive_count() == 2);
    SearchConfig cfg;
    cfg.alpha_lr = 1e-3;
    cfg.mu = 5e-5;
    cfg.target_size = 3;  // short by one: drift pushes everything up
    for (int step = 0; step < 3; ++step) {
        state.forward();
        alpha_step(state, {0, 0, 0}, cfg);
    }
    CHECK(state.alpha()[2] > 0.0);
    CHECK(state.positive_count() == 3);
    CHECK(state.sign_mask() == std::vector<uint8_t>{1, 1, 1});
}

TEST_CASE("uniform_mask: floor split, remainder to large fields, caps") {
    CHECK(uniform_mask({4, 2}, {10, 5}, 3) ==
          std::vector<uint8_t>{1, 1, 0, 0, 1, 0});
    CHECK(uniform_mask({2, 2}, {3, 9}, 4) == std::vector<uint8_t>{1, 1, 1, 1});
    CHECK(uniform_mask({3, 3}, {2, 9}, 0) == std::vector<uint8_t>{0, 0, 0, 0, 0, 0});
    // Cap at d_j: field 0 takes only its 1 column, remainder flows on.
    CHECK(uniform_mask({1, 4}, {9, 5}, 4) == std::vector<uint8_t>{1, 1, 1, 1, 0});
    CHECK_THROWS_AS(uniform_mask({2, 2}, {3, 3}, 5), std::invalid_argument);
}

TEST_CASE("training loss decreases on a learnable task") {
    Splits splits = planted_splits(11);
    SearchConfig cfg = small_config(11);
    cfg.pretrain_max_epochs = 3;
    cfg.patience = 3;
    ModelSetup setup = fm_setup(3, 4);

    Rng rng(mix_seed(cfg.seed, 0));
    std::vector<uint32_t> cards;
    for (const auto& f : splits.train.schema->fields) cards.push_back(f.cardinality);
    EmbeddingLayer layer = make_embedding_layer(cards, setup.base_dims, true, setup.proj_dim, rng);
    CtrModel model = make_model(setup.model, layer, cards, rng);

    RunReport report;
    pretrain(model, layer, splits, cfg, report);
    REQUIRE(report.epochs.size() >= 2);
    CHECK(report.epochs.back().train_logloss < report.epochs.front().train_logloss);
}

TEST_CASE("so term off is bitwise-identical to plain training") {
    Splits splits = planted_splits(13, 600);
    std::vector<uint32_t> cards;
    for (const auto& f : splits.train.schema->fields) cards.push_back(f.cardinality);

    SearchConfig cfg = small_config(13);
    cfg.so_lambda = 0.0;

    auto run_once = [&](bool with_so_flag) {
        Rng rng(1);
        EmbeddingLayer layer = make_embedding_layer(cards, {3, 3, 3, 3}, true, 4, rng);
        CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
        Adam opt(cfg.model_lr);
        BatchSampler sampler(splits.train.n_rows(), cfg.batch_size, 9);
        for (int b = 0; b < 4; ++b) {
            Batch batch = make_batch(splits.train, sampler.next_rows());
            train_batch(model, layer, batch, std::vector<double>(12, 1.0), with_so_flag, cfg,
                        opt);
        }
        return layer.tables[0].v;
    };
    CHECK(run_once(true) == run_once(false));  // lambda = 0: same graph
}

TEST_CASE("pipeline: deterministic reports and coherent bookkeeping") {
    Splits splits = planted_splits(17, 2500);
    SearchConfig cfg = small_config(17);
    cfg.target_size = 6;
    ModelSetup setup = fm_setup(3, 4);

    PipelineResult a = run_pipeline(splits, setup, RunStrategy::kHam, cfg);
    PipelineResult b = run_pipeline(splits, setup, RunStrategy::kHam, cfg);

    CHECK(a.report.test_auc == b.report.test_auc);
    CHECK(a.report.test_logloss == b.report.test_logloss);
    CHECK(a.report.retrain_mask == b.report.retrain_mask);
    CHECK(a.report.final_alpha == b.report.final_alpha);
    REQUIRE(a.report.epochs.size() == b.report.epochs.size());
    for (size_t i = 0; i < a.report.epochs.size(); ++i) {
        CHECK(a.report.epochs[i].train_logloss == b.report.epochs[i].train_logloss);
        CHECK(a.report.epochs[i].val_auc == b.report.epochs[i].val_auc);
    }

    // Bookkeeping invariants.
    size_t ones = 0;
    for (uint8_t m : a.report.retrain_mask) ones += m;
    CHECK(a.report.mask_ones == ones);
    size_t dim_sum = 0;
    for (size_t d : a.report.selected_dims) dim_sum += d;
    CHECK(dim_sum == ones);
    size_t matched = 0;
    for (size_t d : a.report.size_matched_dims) matched += d;
    CHECK(matched == cfg.target_size);
    CHECK(a.report.embedding_params <= a.report.supernet_embedding_params);
    CHECK(a.report.test_auc > 0.5);  // learnable task
}

TEST_CASE("pipeline: every strategy produces a size-matched selection") {
    Splits splits = planted_splits(19, 1500);
    SearchConfig cfg = small_config(19);
    cfg.target_size = 6;
    cfg.pretrain_max_epochs = 2;
    cfg.search_max_epochs = 3;
    cfg.retrain_max_epochs = 2;
    ModelSetup setup = fm_setup(3, 4);

    for (RunStrategy strat : {RunStrategy::kSam, RunStrategy::kSamGs, RunStrategy::kHamP,
                              RunStrategy::kUniform}) {
        if (strat != RunStrategy::kHam) cfg.alpha_lr = default_alpha_lr(strat);
        PipelineResult r = run_pipeline(splits, setup, strat, cfg);
        size_t ones = 0;
        for (uint8_t m : r.report.retrain_mask) ones += m;
        CHECK(ones == cfg.target_size);  // top-s / uniform masks are exact
        CHECK(r.report.test_auc > 0.4);
        CHECK(r.report.strategy == run_strategy_name(strat));
    }
}

TEST_CASE("uniform with a full budget keeps every column") {
    Splits splits = planted_splits(23, 1200);
    SearchConfig cfg = small_config(23);
    ModelSetup setup = fm_setup(3, 4);
    cfg.target_size = 12;
    cfg.pretrain_max_epochs = 2;
    cfg.retrain_max_epochs = 2;
    PipelineResult r = run_pipeline(splits, setup, RunStrategy::kUniform, cfg);
    CHECK(r.report.retrain_mask == std::vector<uint8_t>(12, 1));
    CHECK(r.report.embedding_params == r.report.supernet_embedding_params);
}

TEST_CASE("taylor diagnostic: zero column gives zero gradient and zero delta") {
    std::vector<uint32_t> cards = {5, 4};
    Rng rng(31);
    EmbeddingLayer layer = make_embedding_layer(cards, {3, 2}, true, 3, rng);
    for (size_t r = 0; r < layer.tables[0].rows(); ++r) layer.tables[0].at(r, 1) = 0.0;
    CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);

    Batch batch;
    batch.field_idx = {{0, 1, 2, 3}, {0, 1, 2, 3}};
    batch.labels = {1, 0, 1, 0};
    auto [grad, delta] =
        taylor_diagnostic_column(model, layer, batch, 1, std::vector<double>(5, 1.0));
    CHECK(grad == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(delta == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("oracle: enumeration size, total order, determinism") {
    Splits splits = planted_splits(37, 900);
    std::vector<uint32_t> cards;
    for (const auto& f : splits.train.schema->fields) cards.push_back(f.cardinality);
    Rng rng(37);
    EmbeddingLayer layer = make_embedding_layer(cards, {1, 1, 1, 1}, true, 2, rng);
    CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
    SearchConfig cfg = small_config(37);

    OracleResult res = enumerate_best_mask(model, layer, splits, 2, 5, cfg, 7);
    CHECK(res.ranked.size() == 6);  // C(4,2)
    for (size_t i = 1; i < res.ranked.size(); ++i) {
        bool ordered = res.ranked[i - 1].val_logloss < res.ranked[i].val_logloss ||
                       (res.ranked[i - 1].val_logloss == res.ranked[i].val_logloss &&
                        mask_bits(res.ranked[i - 1].mask) < mask_bits(res.ranked[i].mask));
        CHECK(ordered);
    }
    OracleResult res2 = enumerate_best_mask(model, layer, splits, 2, 5, cfg, 7);
    for (size_t i = 0; i < res.ranked.size(); ++i) {
        CHECK(mask_bits(res.ranked[i].mask) == mask_bits(res2.ranked[i].mask));
        CHECK(res.ranked[i].val_logloss == res2.ranked[i].val_logloss);
    }

    CHECK(rank_of(res, res.ranked[2].mask) == 3);
    CHECK_THROWS_AS(rank_of(res, std::vector<uint8_t>(4, 1)), std::invalid_argument);

    // Single-mask space: s = S.
    OracleResult full = enumerate_best_mask(model, layer, splits, 4, 2, cfg, 7);
    CHECK(full.ranked.size() == 1);
    CHECK(rank_of(full, std::vector<uint8_t>(4, 1)) == 1);
}

TEST_CASE("oracle refuses oversized instances") {
    std::vector<uint32_t> cards(21, 4);
    Rng rng(41);
    EmbeddingLayer layer = make_embedding_layer(cards, std::vector<size_t>(21, 1), true, 2, rng);
    CtrModel model = make_model({ModelKind::kFm, {}, 0, {}}, layer, cards, rng);
    SearchConfig cfg;
    Splits splits = planted_splits(41, 300);
    CHECK_THROWS_AS(enumerate_best_mask(model, layer, splits, 2, 1, cfg, 1),
                    std::invalid_argument);
}

TEST_CASE("report JSON round trip preserves every field") {
    RunReport r;
    r.strategy = "ham";
    r.model = "fm";
    r.seed = 42;
    r.config_json = "{\"target_size\": 4}";
    r.epochs.push_back({"pretrain", 1, 0.6931, 0.69, 0.51, 0});
    r.epochs.push_back({"search", 1, 0.64, 0.66, 0.58, 9});
    r.test_logloss = 0.61;
    r.test_auc = 0.67;
    r.test_samples = 100;
    r.selected_dims = {2, 1};
    r.size_matched_dims = {2, 2};
    r.retrain_mask = {1, 1, 0, 1};
    r.final_alpha = {0.01, 0.02, -0.03, 0.005};
    r.mask_ones = 3;
    r.embedding_params = 30;
    r.projection_params = 12;
    r.dense_params = 7;
    r.total_params = 60;
    r.supernet_embedding_params = 40;
    r.pretrain_seconds = 1.5;

    RunReport p = report_from_json(report_to_json(r));
    CHECK(p.strategy == r.strategy);
    CHECK(p.seed == r.seed);
    CHECK(p.epochs.size() == 2);
    CHECK(p.epochs[1].positive_count == 9);
    CHECK(p.test_auc == r.test_auc);
    CHECK(p.selected_dims == r.selected_dims);
    CHECK(p.retrain_mask == r.retrain_mask);
    CHECK(p.final_alpha == r.final_alpha);
    CHECK(p.total_params == r.total_params);
}

TEST_CASE("checkpoint round trip is byte-exact") {
    std::vector<uint32_t> cards = {6, 4};
    Rng rng(43);
    EmbeddingLayer layer = make_embedding_layer(cards, {3, 2}, true, 3, rng);
    CtrModel model = make_model({ModelKind::kDeepFm, {5}, 0, {}}, layer, cards, rng);

    Checkpoint ckpt;
    ckpt.schema_hash = 0xfeedbeef;
    ckpt.layer = layer;
    ckpt.model = model;
    ckpt.alpha = {0.01, -0.02, 0.03, 0.04, 0.05};
    ckpt.strategy_tag = 2;
    ckpt.mask_seed = 99;

    std::string path =
        (std::filesystem::temp_directory_path() / "hamprune_ckpt_test.bin").string();
    save_checkpoint(path, ckpt);
    Checkpoint loaded = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(loaded.schema_hash == ckpt.schema_hash);
    CHECK(loaded.alpha == ckpt.alpha);
    CHECK(loaded.strategy_tag == 2);
    CHECK(loaded.layer.tables.size() == 2);
    for (size_t j = 0; j < 2; ++j) {
        CHECK(loaded.layer.tables[j].shape == layer.tables[j].shape);
        CHECK(std::memcmp(loaded.layer.tables[j].data(), layer.tables[j].data(),
                          layer.tables[j].numel() * sizeof(double)) == 0);
    }
    CHECK(loaded.model.kind == ModelKind::kDeepFm);
    CHECK(loaded.model.mlp.weights[0].v == model.mlp.weights[0].v);
}
