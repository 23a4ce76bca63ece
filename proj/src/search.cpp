#include "hamprune/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace hamprune {

using nlohmann::json;

std::string run_strategy_name(RunStrategy s) {
    switch (s) {
        case RunStrategy::kHam: return "ham";
        case RunStrategy::kSam: return "sam";
        case RunStrategy::kSamGs: return "sam-gs";
        case RunStrategy::kHamP: return "ham-p";
        case RunStrategy::kUniform: return "uniform";
    }
    return "?";
}

RunStrategy run_strategy_from_name(const std::string& name) {
    if (name == "ham") return RunStrategy::kHam;
    if (name == "sam") return RunStrategy::kSam;
    if (name == "sam-gs" || name == "sam_gs") return RunStrategy::kSamGs;
    if (name == "ham-p" || name == "ham_p") return RunStrategy::kHamP;
    if (name == "uniform") return RunStrategy::kUniform;
    throw std::invalid_argument("unknown strategy: " + name);
}

double default_alpha_lr(RunStrategy s) {
    return s == RunStrategy::kHam ? 1e-3 : 1e-2;
}

std::vector<size_t> default_base_dims(const FeatureSchema& schema, size_t cap) {
    std::vector<size_t> dims;
    for (const auto& f : schema.fields) dims.push_back(std::min<size_t>(cap, f.cardinality));
    return dims;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<uint32_t> cardinalities_of(const FeatureSchema& schema) {
    std::vector<uint32_t> c;
    for (const auto& f : schema.fields) c.push_back(f.cardinality);
    return c;
}

int sgn(double x) { return (x > 0) - (x < 0); }

struct Snapshot {
    CtrModel model;
    EmbeddingLayer layer;
};

// Best-validation-AUC tracker with patience.
struct EarlyStop {
    double best = -1.0;
    size_t since_best = 0;

    // Returns true when this epoch set a new best.
    bool observe(double auc) {
        if (auc > best) {
            best = auc;
            since_best = 0;
            return true;
        }
        ++since_best;
        return false;
    }
};

// Trains {V, Theta} with a fixed mask for up to max_epochs with early
// stopping; restores the best checkpoint into model/layer.
void train_fixed_mask(CtrModel& model, EmbeddingLayer& layer, const Splits& splits,
                      const std::vector<double>& mask_values, bool with_so,
                      const SearchConfig& cfg, size_t max_epochs, uint64_t sampler_seed,
                      const std::string& stage, RunReport& report) {
    Adam opt(cfg.model_lr);
    BatchSampler sampler(splits.train.n_rows(), cfg.batch_size, sampler_seed);
    EarlyStop stop;
    Snapshot best{model, layer};
    for (size_t epoch = 1; epoch <= max_epochs; ++epoch) {
        double loss_sum = 0;
        for (size_t b = 0; b < sampler.batches_per_epoch(); ++b) {
            Batch batch = make_batch(splits.train, sampler.next_rows());
            loss_sum += train_batch(model, layer, batch, mask_values, with_so, cfg, opt);
        }
        EvalResult val = eval_split(model, layer, splits.val, mask_values, cfg.batch_size);
        report.epochs.push_back({stage, epoch, loss_sum / double(sampler.batches_per_epoch()),
                                 val.logloss, val.auc, 0});
        if (stop.observe(val.auc)) {
            if (cfg.restore_best) {
                best.model = model;
                best.layer = layer;
            }
        } else if (stop.since_best >= cfg.patience) {
            break;
        }
    }
    if (cfg.restore_best) {
        model = std::move(best.model);
        layer = std::move(best.layer);
    }
}

}  // namespace

double train_batch(CtrModel& model, EmbeddingLayer& layer, const Batch& batch,
                   const std::vector<double>& mask_values, bool with_so,
                   const SearchConfig& cfg, Adam& opt) {
    Graph g;
    int mask = g.constant(Tensor({mask_values.size()}, mask_values));
    ForwardNodes f = build_forward(g, model, layer, batch.field_idx, mask, true);
    int loss = g.logloss(f.prob, batch.labels);
    int total = loss;
    if (with_so && cfg.so_lambda != 0.0) {
        int so = build_so_penalty(g, f.lookup.table_leaves, cfg.so_normalized);
        total = g.add(loss, g.scale(so, cfg.so_lambda));
    }
    g.backward(total);

    std::vector<Tensor*> params = model.params();
    std::vector<int> leaves = f.param_leaves;
    for (size_t j = 0; j < layer.tables.size(); ++j) {
        params.push_back(&layer.tables[j]);
        leaves.push_back(f.lookup.table_leaves[j]);
    }
    for (size_t j = 0; j < layer.projections.size(); ++j) {
        params.push_back(&layer.projections[j]);
        leaves.push_back(f.lookup.projection_leaves[j]);
    }
    std::vector<const Tensor*> grads;
    grads.reserve(leaves.size());
    for (int id : leaves) grads.push_back(&g.grad(id));
    opt.step(params, grads);
    return g.scalar_value(loss);
}

void alpha_step(MaskState& state, const std::vector<double>& mask_grads,
                const SearchConfig& cfg) {
    std::vector<double> g = state.backward(mask_grads);
    size_t count = state.positive_count();
    double drift = cfg.mu * double(sgn(double(count) - double(cfg.target_size)));
    std::vector<double> delta(g.size());
    for (size_t i = 0; i < g.size(); ++i) delta[i] = cfg.alpha_lr * g[i] + drift;
    state.apply_update(delta);
}

EvalResult eval_split(const CtrModel& model, const EmbeddingLayer& layer, const Dataset& data,
                      const std::vector<double>& mask_values, size_t batch_size) {
    std::vector<double> scores = predict(model, layer, data, mask_values, batch_size);
    return evaluate(scores, data.labels);
}

void pretrain(CtrModel& model, EmbeddingLayer& layer, const Splits& splits,
              const SearchConfig& cfg, RunReport& report) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> ones(layer.total_columns(), 1.0);
    train_fixed_mask(model, layer, splits, ones, /*with_so=*/true, cfg, cfg.pretrain_max_epochs,
                     mix_seed(cfg.seed, 1), "pretrain", report);
    report.pretrain_seconds += seconds_since(t0);
}

SearchOutcome search_stage(CtrModel& model, EmbeddingLayer& layer, MaskState& state,
                           const Splits& splits, const SearchConfig& cfg, RunReport& report) {
    auto t0 = std::chrono::steady_clock::now();
    if (cfg.target_size > state.size())
        throw std::invalid_argument("search: target size exceeds total columns");

    Adam model_opt(cfg.model_lr);
    BatchSampler train_sampler(splits.train.n_rows(), cfg.batch_size, mix_seed(cfg.seed, 2));
    BatchSampler val_sampler(splits.val.n_rows(), cfg.batch_size, mix_seed(cfg.seed, 3));

    SearchOutcome outcome;
    std::vector<double> auc_history;
    for (size_t epoch = 1; epoch <= cfg.search_max_epochs; ++epoch) {
        double loss_sum = 0;
        for (size_t b = 0; b < train_sampler.batches_per_epoch(); ++b) {
            // Validation batch drives the auxiliary weights (Eq. (3) with
            // straight-through mask gradients)...
            {
                Batch vb = make_batch(splits.val, val_sampler.next_rows());
                std::vector<double> m = state.forward();
                Graph g;
                int mask = g.leaf(Tensor({m.size()}, m), true);
                ForwardNodes f = build_forward(g, model, layer, vb.field_idx, mask, false);
                int loss = g.logloss(f.prob, vb.labels);
                g.backward(loss);
                const Tensor& mg = g.grad(mask);
                alpha_step(state, mg.v, cfg);
            }
            // ...then a training batch updates {V, Theta} under the mask.
            {
                Batch tb = make_batch(splits.train, train_sampler.next_rows());
                std::vector<double> m = state.forward();
                loss_sum +=
                    train_batch(model, layer, tb, m, cfg.so_in_search, cfg, model_opt);
            }
        }

        size_t count = state.positive_count();
        std::vector<double> eval_mask = state.forward();
        EvalResult val = eval_split(model, layer, splits.val, eval_mask, cfg.batch_size);
        auc_history.push_back(val.auc);
        report.epochs.push_back({"search", epoch,
                                 loss_sum / double(train_sampler.batches_per_epoch()),
                                 val.logloss, val.auc, count});
        outcome.epochs_run = epoch;
        outcome.final_count = count;

        size_t gap = count > cfg.target_size ? count - cfg.target_size
                                             : cfg.target_size - count;
        bool count_close = gap <= cfg.stop_window;
        bool no_gain = false;
        if (auc_history.size() > cfg.auc_window) {
            double recent = -1.0, earlier = -1.0;
            for (size_t i = 0; i < auc_history.size(); ++i) {
                if (i + cfg.auc_window >= auc_history.size())
                    recent = std::max(recent, auc_history[i]);
                else
                    earlier = std::max(earlier, auc_history[i]);
            }
            no_gain = recent < earlier + cfg.auc_gain_tol;
        }
        if (count_close && no_gain) {
            outcome.stopped_early = true;
            break;
        }
    }
    report.search_seconds += seconds_since(t0);
    return outcome;
}

void retrain(CtrModel& model, EmbeddingLayer& layer, const std::vector<uint8_t>& mask,
             const Splits& splits, const SearchConfig& cfg, RunReport& report) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> mask_values = mask_to_values(mask);
    train_fixed_mask(model, layer, splits, mask_values, cfg.so_in_retrain, cfg,
                     cfg.retrain_max_epochs, mix_seed(cfg.seed, 4), "retrain", report);
    EvalResult test = eval_split(model, layer, splits.test, mask_values, cfg.batch_size);
    report.test_logloss = test.logloss;
    report.test_auc = test.auc;
    report.test_samples = test.n_samples;
    report.retrain_seconds += seconds_since(t0);
}

std::vector<uint8_t> uniform_mask(const std::vector<size_t>& dims,
                                  const std::vector<uint32_t>& cardinalities, size_t s) {
    size_t k = dims.size();
    size_t total = std::accumulate(dims.begin(), dims.end(), size_t(0));
    if (s > total) throw std::invalid_argument("uniform_mask: s exceeds total columns");
    std::vector<size_t> alloc(k);
    size_t assigned = 0;
    for (size_t j = 0; j < k; ++j) {
        alloc[j] = std::min(dims[j], s / k);
        assigned += alloc[j];
    }
    // Remainder goes to the largest-cardinality fields first.
    std::vector<size_t> order(k);
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return cardinalities[a] > cardinalities[b]; });
    while (assigned < s) {
        bool progressed = false;
        for (size_t j : order) {
            if (assigned == s) break;
            if (alloc[j] < dims[j]) {
                ++alloc[j];
                ++assigned;
                progressed = true;
            }
        }
        if (!progressed) break;
    }
    std::vector<uint8_t> mask;
    for (size_t j = 0; j < k; ++j) {
        for (size_t c = 0; c < dims[j]; ++c) mask.push_back(c < alloc[j] ? 1 : 0);
    }
    return mask;
}

PipelineResult run_pipeline(const Splits& splits, const ModelSetup& setup, RunStrategy strategy,
                            const SearchConfig& cfg) {
    const FeatureSchema& schema = *splits.train.schema;
    std::vector<uint32_t> cards = cardinalities_of(schema);
    bool projection = setup.use_projection && setup.model.kind != ModelKind::kDcnV2;

    Rng init_rng(mix_seed(cfg.seed, 0));
    PipelineResult out;
    out.layer = make_embedding_layer(cards, setup.base_dims, projection, setup.proj_dim,
                                     init_rng);
    out.model = make_model(setup.model, out.layer, cards, init_rng);

    RunReport& report = out.report;
    report.strategy = run_strategy_name(strategy);
    report.model = model_name(setup.model.kind);
    report.seed = cfg.seed;
    report.supernet_embedding_params = count_embedding_params(out.layer);

    size_t total_cols = out.layer.total_columns();
    if (cfg.target_size > total_cols)
        throw std::invalid_argument("pipeline: target size exceeds total columns");

    pretrain(out.model, out.layer, splits, cfg, report);

    ColumnMaskLayout layout = out.layer.layout();
    if (strategy == RunStrategy::kUniform) {
        out.retrain_mask = uniform_mask(out.layer.dims(), cards, cfg.target_size);
        report.size_matched_dims = layout.per_field_counts(out.retrain_mask);
    } else {
        MaskStrategy ms = MaskStrategy(uint8_t(strategy));
        double init = ms == MaskStrategy::kHam ? cfg.epsilon
                                               : default_alpha_init(ms, cfg.epsilon);
        MaskState state(ms, total_cols, init, mix_seed(cfg.seed, 5), cfg.gs_temperature,
                        cfg.p_min);
        search_stage(out.model, out.layer, state, splits, cfg, report);
        // HAM retrains on the sign mask (the model it evaluated during
        // search); the relaxed strategies keep the top-s auxiliary weights.
        out.retrain_mask = ms == MaskStrategy::kHam ? state.sign_mask()
                                                    : state.select_top_s(cfg.target_size);
        report.final_alpha = state.alpha();
        report.size_matched_dims =
            layout.per_field_counts(state.select_top_s(cfg.target_size));
    }

    retrain(out.model, out.layer, out.retrain_mask, splits, cfg, report);

    report.retrain_mask = out.retrain_mask;
    report.mask_ones = size_t(std::count(out.retrain_mask.begin(), out.retrain_mask.end(), 1));
    report.selected_dims = layout.per_field_counts(out.retrain_mask);
    report.embedding_params = count_embedding_params(out.layer, &out.retrain_mask);
    report.projection_params = count_projection_params(out.layer, &out.retrain_mask);
    if (setup.model.kind == ModelKind::kDcnV2) {
        CtrModel pruned = prune_model(out.model, out.retrain_mask, out.layer);
        report.dense_params = pruned.dense_param_count();
    } else {
        report.dense_params = out.model.dense_param_count();
    }
    size_t linear_params = 0;
    if (setup.model.kind != ModelKind::kDcnV2) {
        linear_params += out.model.w0.numel();
        for (const auto& t : out.model.first_order) linear_params += t.numel();
    }
    report.total_params =
        report.embedding_params + report.projection_params + report.dense_params + linear_params;
    return out;
}

TaylorDiag taylor_diagnostic(const CtrModel& model, const EmbeddingLayer& layer,
                             const Batch& batch, const std::vector<double>& base_mask) {
    TaylorDiag diag;
    size_t total = layer.total_columns();
    if (base_mask.size() != total)
        throw std::invalid_argument("taylor_diagnostic: mask length mismatch");

    auto loss_with_mask = [&](const std::vector<double>& m) {
        Graph g;
        int mask = g.constant(Tensor({m.size()}, m));
        ForwardNodes f = build_forward(g, model, layer, batch.field_idx, mask, false);
        return g.scalar_value(g.logloss(f.prob, batch.labels));
    };

    {
        Graph g;
        int mask = g.leaf(Tensor({base_mask.size()}, base_mask), true);
        ForwardNodes f = build_forward(g, model, layer, batch.field_idx, mask, false);
        int loss = g.logloss(f.prob, batch.labels);
        g.backward(loss);
        diag.ste_grad = g.grad(mask).v;
        diag.base_loss = g.scalar_value(loss);
    }

    diag.loss_delta.resize(total);
    for (size_t c = 0; c < total; ++c) {
        std::vector<double> on = base_mask, off = base_mask;
        on[c] = 1.0;
        off[c] = 0.0;
        double l_on = base_mask[c] == 1.0 ? diag.base_loss : loss_with_mask(on);
        double l_off = base_mask[c] == 0.0 ? diag.base_loss : loss_with_mask(off);
        diag.loss_delta[c] = l_on - l_off;
    }
    return diag;
}

std::pair<double, double> taylor_diagnostic_column(const CtrModel& model,
                                                   const EmbeddingLayer& layer,
                                                   const Batch& batch, size_t column,
                                                   const std::vector<double>& base_mask) {
    if (column >= layer.total_columns())
        throw std::out_of_range("taylor_diagnostic: column out of range");
    TaylorDiag full = taylor_diagnostic(model, layer, batch, base_mask);
    return {full.ste_grad[column], full.loss_delta[column]};
}

// -- report serialization ------------------------------------------------------

std::string report_to_json(const RunReport& r) {
    json j;
    j["strategy"] = r.strategy;
    j["model"] = r.model;
    j["seed"] = r.seed;
    if (!r.config_json.empty()) j["config"] = json::parse(r.config_json);
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"stage", e.stage},
                          {"epoch", e.epoch},
                          {"train_logloss", e.train_logloss},
                          {"val_logloss", e.val_logloss},
                          {"val_auc", e.val_auc},
                          {"positive_count", e.positive_count}});
    }
    j["epochs"] = std::move(epochs);
    j["test"] = {{"logloss", r.test_logloss}, {"auc", r.test_auc}, {"n", r.test_samples}};
    j["selected_dims"] = r.selected_dims;
    j["size_matched_dims"] = r.size_matched_dims;
    j["retrain_mask"] = r.retrain_mask;
    j["final_alpha"] = r.final_alpha;
    j["mask_ones"] = r.mask_ones;
    j["params"] = {{"embedding", r.embedding_params},
                   {"projection", r.projection_params},
                   {"dense", r.dense_params},
                   {"total", r.total_params},
                   {"supernet_embedding", r.supernet_embedding_params}};
    j["wall_clock"] = {{"pretrain_s", r.pretrain_seconds},
                       {"search_s", r.search_seconds},
                       {"retrain_s", r.retrain_seconds}};
    return j.dump(2);
}

RunReport report_from_json(const std::string& text) {
    json j = json::parse(text);
    RunReport r;
    r.strategy = j.at("strategy").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    if (j.contains("config")) r.config_json = j["config"].dump();
    for (const auto& e : j.at("epochs")) {
        r.epochs.push_back({e.at("stage").get<std::string>(), e.at("epoch").get<size_t>(),
                            e.at("train_logloss").get<double>(),
                            e.at("val_logloss").get<double>(), e.at("val_auc").get<double>(),
                            e.at("positive_count").get<size_t>()});
    }
    r.test_logloss = j.at("test").at("logloss").get<double>();
    r.test_auc = j.at("test").at("auc").get<double>();
    r.test_samples = j.at("test").at("n").get<size_t>();
    r.selected_dims = j.at("selected_dims").get<std::vector<size_t>>();
    r.size_matched_dims = j.at("size_matched_dims").get<std::vector<size_t>>();
    r.retrain_mask = j.at("retrain_mask").get<std::vector<uint8_t>>();
    r.final_alpha = j.at("final_alpha").get<std::vector<double>>();
    r.mask_ones = j.at("mask_ones").get<size_t>();
    r.embedding_params = j.at("params").at("embedding").get<size_t>();
    r.projection_params = j.at("params").at("projection").get<size_t>();
    r.dense_params = j.at("params").at("dense").get<size_t>();
    r.total_params = j.at("params").at("total").get<size_t>();
    r.supernet_embedding_params = j.at("params").at("supernet_embedding").get<size_t>();
    r.pretrain_seconds = j.at("wall_clock").at("pretrain_s").get<double>();
    r.search_seconds = j.at("wall_clock").at("search_s").get<double>();
    r.retrain_seconds = j.at("wall_clock").at("retrain_s").get<double>();
    return r;
}

}  // namespace hamprune
