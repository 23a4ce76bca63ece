#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <string>

#include "CLI11.hpp"
#include "hamprune/io.hpp"
#include "hamprune/oracle.hpp"
#include "hamprune/search.hpp"
#include "json.hpp"

using namespace hamprune;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// -- logging ------------------------------------------------------------------

int log_level() {
    static int level = [] {
        const char* env = std::getenv("HAMPRUNE_LOG");
        std::string v = env ? env : "info";
        if (v == "debug") return 0;
        if (v == "info") return 1;
        if (v == "warn") return 2;
        return 3;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() <= 1) std::cerr << "[hamprune] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() <= 0) std::cerr << "[hamprune] " << msg << "\n";
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
T jget(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

// -- experiment assembly --------------------------------------------------------

struct Experiment {
    Splits splits;
    ModelSetup setup;
    RunStrategy strategy = RunStrategy::kHam;
    SearchConfig search;  // seed filled per run
    std::vector<uint64_t> seeds;
    std::string out_dir;
    json resolved;  // full config echo with defaults expanded
};

std::array<double, 3> parse_ratios(const json& d) {
    std::vector<double> r = jget<std::vector<double>>(d, "split", {0.8, 0.1, 0.1});
    if (r.size() != 3) throw ConfigError("dataset.split must have three entries");
    return {r[0], r[1], r[2]};
}

Splits build_dataset(const json& d, json& echo) {
    std::string type = jget<std::string>(d, "type", "");
    auto ratios = parse_ratios(d);
    uint64_t split_seed = jget<uint64_t>(d, "split_seed", 7);
    size_t threshold = jget<size_t>(d, "threshold", 10);
    bool count_on_full = jget<bool>(d, "count_on_full", true);
    echo["type"] = type;
    echo["split"] = {ratios[0], ratios[1], ratios[2]};
    echo["split_seed"] = split_seed;

    if (type == "synthetic") {
        const json& s = d.at("synthetic");
        SyntheticSpec spec;
        for (const auto& f : s.at("fields")) {
            spec.fields.push_back({f.at("cardinality").get<uint32_t>(),
                                   jget<uint32_t>(f, "latent_rank", 0),
                                   jget<double>(f, "scale", 1.0)});
        }
        spec.bias = jget<double>(s, "bias", 0.0);
        spec.interaction_scale = jget<double>(s, "interaction_scale", 1.0);
        size_t n_rows = s.at("n_rows").get<size_t>();
        uint64_t data_seed = jget<uint64_t>(s, "seed", 1234);
        echo["synthetic"] = {{"n_rows", n_rows},
                             {"seed", data_seed},
                             {"bias", spec.bias},
                             {"interaction_scale", spec.interaction_scale}};
        json jf = json::array();
        for (const auto& f : spec.fields)
            jf.push_back({{"cardinality", f.cardinality},
                          {"latent_rank", f.latent_rank},
                          {"scale", f.scale}});
        echo["synthetic"]["fields"] = std::move(jf);
        Dataset all = synthesize(spec, n_rows, data_seed);
        return split(all, ratios, split_seed);
    }
    if (type == "csv") {
        std::string path = d.at("path").get<std::string>();
        std::string label = jget<std::string>(d, "label_column", "label");
        auto numeric = jget<std::vector<std::string>>(d, "numeric_fields", {});
        echo["path"] = path;
        echo["label_column"] = label;
        echo["numeric_fields"] = numeric;
        echo["threshold"] = threshold;
        echo["count_on_full"] = count_on_full;
        RawTable raw = read_csv(path, label, numeric);
        return split_raw_encode(raw, ratios, split_seed, threshold, count_on_full);
    }
    if (type == "movielens") {
        std::string path = d.at("path").get<std::string>();
        echo["path"] = path;
        echo["threshold"] = threshold;
        RawTable raw = load_movielens(path);
        return split_raw_encode(raw, ratios, split_seed, threshold, count_on_full);
    }
    if (type == "cache") {
        std::string path = d.at("path").get<std::string>();
        echo["path"] = path;
        Dataset all = read_cache(path);
        return split(all, ratios, split_seed);
    }
    throw ConfigError("dataset.type must be synthetic|csv|movielens|cache");
}

ModelSetup build_model_setup(const json& m, const FeatureSchema& schema, json& echo) {
    ModelSetup setup;
    std::string type = jget<std::string>(m, "type", "fm");
    setup.model.kind = model_from_name(type);
    setup.model.mlp_hidden = jget<std::vector<size_t>>(m, "mlp_hidden", {64, 64});
    setup.model.cross_layers = jget<size_t>(m, "cross_layers", 2);
    setup.model.head_hidden = jget<std::vector<size_t>>(m, "head_hidden", {});
    size_t cap = jget<size_t>(m, "base_dim_cap", 16);
    if (m.contains("base_dims"))
        setup.base_dims = m.at("base_dims").get<std::vector<size_t>>();
    else
        setup.base_dims = default_base_dims(schema, cap);
    if (setup.base_dims.size() != schema.field_count())
        throw ConfigError("model.base_dims length must match the field count");
    setup.proj_dim = jget<size_t>(m, "proj_dim", 16);
    setup.use_projection =
        jget<bool>(m, "projection", setup.model.kind != ModelKind::kDcnV2);

    echo["type"] = model_name(setup.model.kind);
    echo["base_dims"] = setup.base_dims;
    echo["proj_dim"] = setup.proj_dim;
    echo["projection"] = setup.use_projection && setup.model.kind != ModelKind::kDcnV2;
    echo["mlp_hidden"] = setup.model.mlp_hidden;
    echo["cross_layers"] = setup.model.cross_layers;
    echo["head_hidden"] = setup.model.head_hidden;
    return setup;
}

SearchConfig build_search_config(const json& s, RunStrategy strategy, json& echo) {
    SearchConfig cfg;
    cfg.target_size = s.at("target_size").get<size_t>();
    cfg.mu = jget<double>(s, "mu", 5e-5);
    cfg.epsilon = jget<double>(s, "epsilon", 0.01);
    cfg.alpha_lr = jget<double>(s, "alpha_lr", default_alpha_lr(strategy));
    cfg.model_lr = jget<double>(s, "model_lr", 1e-3);
    cfg.so_lambda = jget<double>(s, "so_lambda", 1e-3);
    cfg.so_normalized = jget<bool>(s, "so_normalized", false);
    cfg.so_in_search = jget<bool>(s, "so_in_search", false);
    cfg.so_in_retrain = jget<bool>(s, "so_in_retrain", false);
    cfg.batch_size = jget<size_t>(s, "batch_size", 2048);
    cfg.pretrain_max_epochs = jget<size_t>(s, "pretrain_max_epochs", 30);
    cfg.search_max_epochs = jget<size_t>(s, "search_max_epochs", 10);
    cfg.retrain_max_epochs = jget<size_t>(s, "retrain_max_epochs", 30);
    cfg.patience = jget<size_t>(s, "patience", 3);
    cfg.stop_window = jget<size_t>(s, "stop_window", 2);
    cfg.auc_gain_tol = jget<double>(s, "auc_gain_tol", 1e-4);
    cfg.auc_window = jget<size_t>(s, "auc_window", 3);
    cfg.gs_temperature = jget<double>(s, "gs_temperature", 0.1);
    cfg.p_min = jget<double>(s, "p_min", 1e-4);

    echo["target_size"] = cfg.target_size;
    echo["mu"] = cfg.mu;
    echo["epsilon"] = cfg.epsilon;
    echo["alpha_lr"] = cfg.alpha_lr;
    echo["model_lr"] = cfg.model_lr;
    echo["so_lambda"] = cfg.so_lambda;
    echo["so_normalized"] = cfg.so_normalized;
    echo["so_in_search"] = cfg.so_in_search;
    echo["so_in_retrain"] = cfg.so_in_retrain;
    echo["batch_size"] = cfg.batch_size;
    echo["pretrain_max_epochs"] = cfg.pretrain_max_epochs;
    echo["search_max_epochs"] = cfg.search_max_epochs;
    echo["retrain_max_epochs"] = cfg.retrain_max_epochs;
    echo["patience"] = cfg.patience;
    echo["stop_window"] = cfg.stop_window;
    echo["auc_gain_tol"] = cfg.auc_gain_tol;
    echo["auc_window"] = cfg.auc_window;
    echo["gs_temperature"] = cfg.gs_temperature;
    echo["p_min"] = cfg.p_min;
    return cfg;
}

struct Overrides {
    std::string out_dir;
    std::string strategy;
    int64_t seed = -1;
};

Experiment load_experiment(const std::string& config_path, const Overrides& over) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config " + config_path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    try {
        Experiment exp;
        exp.resolved["version"] = jget<int>(cfg, "version", 1);
        exp.splits = build_dataset(cfg.at("dataset"), exp.resolved["dataset"]);
        exp.setup =
            build_model_setup(jget<json>(cfg, "model", json::object()),
                              *exp.splits.train.schema, exp.resolved["model"]);
        std::string strategy_name =
            !over.strategy.empty() ? over.strategy : jget<std::string>(cfg, "strategy", "ham");
        exp.strategy = run_strategy_from_name(strategy_name);
        exp.resolved["strategy"] = run_strategy_name(exp.strategy);
        exp.search =
            build_search_config(cfg.at("search"), exp.strategy, exp.resolved["search"]);
        exp.seeds = jget<std::vector<uint64_t>>(cfg, "seeds", {1});
        if (over.seed >= 0) exp.seeds = {uint64_t(over.seed)};
        exp.resolved["seeds"] = exp.seeds;
        exp.out_dir = !over.out_dir.empty() ? over.out_dir
                                            : jget<std::string>(cfg, "out_dir", "runs/out");
        exp.resolved["out_dir"] = exp.out_dir;
        return exp;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
}

std::pair<CtrModel, EmbeddingLayer> init_model_and_layer(const Experiment& exp,
                                                         const SearchConfig& cfg) {
    std::vector<uint32_t> cards;
    for (const auto& f : exp.splits.train.schema->fields) cards.push_back(f.cardinality);
    bool projection =
        exp.setup.use_projection && exp.setup.model.kind != ModelKind::kDcnV2;
    Rng rng(mix_seed(cfg.seed, 0));
    EmbeddingLayer layer =
        make_embedding_layer(cards, exp.setup.base_dims, projection, exp.setup.proj_dim, rng);
    CtrModel model = make_model(exp.setup.model, layer, cards, rng);
    return {std::move(model), std::move(layer)};
}

// -- file helpers ----------------------------------------------------------------

std::string report_name(const Experiment& exp, uint64_t seed) {
    return "report_" + run_strategy_name(exp.strategy) + "_" +
           model_name(exp.setup.model.kind) + "_s" + std::to_string(exp.search.target_size) +
           "_seed" + std::to_string(seed) + ".json";
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_metrics_csv(const fs::path& path, const RunReport& report) {
    std::ofstream out(path);
    out << "stage,epoch,train_logloss,val_logloss,val_auc,positive_count\n";
    for (const auto& e : report.epochs)
        out << e.stage << "," << e.epoch << "," << e.train_logloss << "," << e.val_logloss
            << "," << e.val_auc << "," << e.positive_count << "\n";
}

std::vector<uint8_t> mask_from_alpha(RunStrategy strategy, const std::vector<double>& alpha,
                                     size_t target) {
    if (strategy == RunStrategy::kHam) {
        std::vector<uint8_t> m(alpha.size());
        for (size_t i = 0; i < alpha.size(); ++i) m[i] = alpha[i] > 0 ? 1 : 0;
        return m;
    }
    return top_s_mask(alpha, target);
}

// -- subcommands -------------------------------------------------------------------

int cmd_run(const std::string& config_path, const Overrides& over, const std::string& stage) {
    Experiment exp = load_experiment(config_path, over);
    fs::create_directories(exp.out_dir);
    std::string config_echo = exp.resolved.dump();

    for (uint64_t seed : exp.seeds) {
        SearchConfig cfg = exp.search;
        cfg.seed = seed;
        fs::path out(exp.out_dir);
        fs::path partial = out / ("partial_seed" + std::to_string(seed) + ".json");
        fs::path pre_ckpt = out / ("pretrain_seed" + std::to_string(seed) + ".ckpt");
        fs::path search_ckpt = out / ("search_seed" + std::to_string(seed) + ".ckpt");
        uint64_t schema_hash = exp.splits.train.schema->hash();

        if (stage == "all") {
            log_info("seed " + std::to_string(seed) + ": pretrain/search/retrain (" +
                     run_strategy_name(exp.strategy) + ", " +
                     model_name(exp.setup.model.kind) + ")");
            PipelineResult result = run_pipeline(exp.splits, exp.setup, exp.strategy, cfg);
            result.report.config_json = config_echo;
            write_file(out / report_name(exp, seed), report_to_json(result.report));
            write_metrics_csv(out / ("metrics_seed" + std::to_string(seed) + ".csv"),
                              result.report);
            Checkpoint ckpt;
            ckpt.schema_hash = schema_hash;
            ckpt.layer = std::move(result.layer);
            ckpt.model = std::move(result.model);
            ckpt.alpha = result.report.final_alpha;
            save_checkpoint((out / ("final_seed" + std::to_string(seed) + ".ckpt")).string(),
                            ckpt);
            log_info("seed " + std::to_string(seed) +
                     ": test auc " + std::to_string(result.report.test_auc));
            continue;
        }

        if (stage == "pretrain") {
            auto [model, layer] = init_model_and_layer(exp, cfg);
            RunReport report;
            report.strategy = run_strategy_name(exp.strategy);
            report.model = model_name(exp.setup.model.kind);
            report.seed = seed;
            report.config_json = config_echo;
            report.supernet_embedding_params = count_embedding_params(layer);
            pretrain(model, layer, exp.splits, cfg, report);
            Checkpoint ckpt;
            ckpt.schema_hash = schema_hash;
            ckpt.layer = std::move(layer);
            ckpt.model = std::move(model);
            save_checkpoint(pre_ckpt.string(), ckpt);
            write_file(partial, report_to_json(report));
            log_info("seed " + std::to_string(seed) + ": pretrain checkpoint saved");
        } else if (stage == "search") {
            if (exp.strategy == RunStrategy::kUniform)
                throw std::runtime_error("uniform strategy has no search stage");
            Checkpoint ckpt = load_checkpoint(pre_ckpt.string());
            if (ckpt.schema_hash != schema_hash)
                throw std::runtime_error("checkpoint schema does not match the dataset");
            RunReport report = report_from_json([&] {
                std::ifstream in(partial);
                if (!in) throw std::runtime_error("missing pretrain report " + partial.string());
                return std::string(std::istreambuf_iterator<char>(in), {});
            }());
            MaskStrategy ms = MaskStrategy(uint8_t(exp.strategy));
            double init = ms == MaskStrategy::kHam ? cfg.epsilon
                                                   : default_alpha_init(ms, cfg.epsilon);
            MaskState state(ms, ckpt.layer.total_columns(), init, mix_seed(seed, 5),
                            cfg.gs_temperature, cfg.p_min);
            search_stage(ckpt.model, ckpt.layer, state, exp.splits, cfg, report);
            ckpt.alpha = state.alpha();
            ckpt.strategy_tag = uint8_t(exp.strategy);
            save_checkpoint(search_ckpt.string(), ckpt);
            write_file(partial, report_to_json(report));
            log_info("seed " + std::to_string(seed) + ": search checkpoint saved");
        } else if (stage == "retrain") {
            fs::path src = exp.strategy == RunStrategy::kUniform ? pre_ckpt : search_ckpt;
            Checkpoint ckpt = load_checkpoint(src.string());
            if (ckpt.schema_hash != schema_hash)
                throw std::runtime_error("checkpoint schema does not match the dataset");
            RunReport report = report_from_json([&] {
                std::ifstream in(partial);
                if (!in) throw std::runtime_error("missing stage report " + partial.string());
                return std::string(std::istreambuf_iterator<char>(in), {});
            }());
            ColumnMaskLayout layout = ckpt.layer.layout();
            std::vector<uint8_t> mask;
            if (exp.strategy == RunStrategy::kUniform) {
                std::vector<uint32_t> cards;
                for (const auto& f : exp.splits.train.schema->fields)
                    cards.push_back(f.cardinality);
                mask = uniform_mask(ckpt.layer.dims(), cards, cfg.target_size);
                report.size_matched_dims = layout.per_field_counts(mask);
            } else {
                mask = mask_from_alpha(exp.strategy, ckpt.alpha, cfg.target_size);
                report.final_alpha = ckpt.alpha;
                report.size_matched_dims =
                    layout.per_field_counts(top_s_mask(ckpt.alpha, cfg.target_size));
            }
            retrain(ckpt.model, ckpt.layer, mask, exp.splits, cfg, report);
            report.retrain_mask = mask;
            report.mask_ones = size_t(std::count(mask.begin(), mask.end(), 1));
            report.selected_dims = layout.per_field_counts(mask);
            report.embedding_params = count_embedding_params(ckpt.layer, &mask);
            report.projection_params = count_projection_params(ckpt.layer, &mask);
            report.dense_params =
                exp.setup.model.kind == ModelKind::kDcnV2
                    ? prune_model(ckpt.model, mask, ckpt.layer).dense_param_count()
                    : ckpt.model.dense_param_count();
            size_t linear = 0;
            if (exp.setup.model.kind != ModelKind::kDcnV2) {
                linear += ckpt.model.w0.numel();
                for (const auto& t : ckpt.model.first_order) linear += t.numel();
            }
            report.total_params = report.embedding_params + report.projection_params +
                                  report.dense_params + linear;
            write_file(out / report_name(exp, seed), report_to_json(report));
            write_metrics_csv(out / ("metrics_seed" + std::to_string(seed) + ".csv"), report);
            log_info("seed " + std::to_string(seed) +
                     ": test auc " + std::to_string(report.test_auc));
        } else {
            throw ConfigError("unknown stage: " + stage);
        }
    }
    return 0;
}

int cmd_curve(const std::vector<std::string>& report_args, const std::string& out_path) {
    std::vector<std::string> files;
    for (const auto& arg : report_args) {
        fs::path p(arg);
        if (fs::is_directory(p)) {
            for (const auto& entry : fs::directory_iterator(p)) {
                std::string name = entry.path().filename().string();
                if (name.rfind("report_", 0) == 0 && entry.path().extension() == ".json")
                    files.push_back(entry.path().string());
            }
        } else {
            files.push_back(arg);
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("curve: no report files matched");

    struct Group {
        std::vector<double> aucs;
        std::vector<double> loglosses;
        double embedding_params = 0, total_params = 0;
    };
    std::map<std::pair<std::string, size_t>, Group> groups;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) throw std::runtime_error("curve: cannot open " + f);
        RunReport r =
            report_from_json(std::string(std::istreambuf_iterator<char>(in), {}));
        size_t s = std::accumulate(r.size_matched_dims.begin(), r.size_matched_dims.end(),
                                   size_t(0));
        Group& g = groups[{r.strategy, s}];
        g.aucs.push_back(r.test_auc);
        g.loglosses.push_back(r.test_logloss);
        g.embedding_params += double(r.embedding_params);
        g.total_params += double(r.total_params);
    }

    std::ostringstream csv;
    csv << "strategy,target_size,runs,mean_test_auc,best_test_auc,mean_test_logloss,"
           "mean_embedding_params,mean_total_params\n";
    for (const auto& [key, g] : groups) {
        double n = double(g.aucs.size());
        double mean = std::accumulate(g.aucs.begin(), g.aucs.end(), 0.0) / n;
        double best = *std::max_element(g.aucs.begin(), g.aucs.end());
        double mean_ll =
            std::accumulate(g.loglosses.begin(), g.loglosses.end(), 0.0) / n;
        csv << key.first << "," << key.second << "," << g.aucs.size() << "," << mean << ","
            << best << "," << mean_ll << "," << g.embedding_params / n << ","
            << g.total_params / n << "\n";
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << csv.str();
    } else {
        write_file(out_path, csv.str());
        log_info("curve written to " + out_path);
    }
    return 0;
}

int cmd_oracle(const std::string& config_path, const Overrides& over, size_t retrain_steps) {
    Experiment exp = load_experiment(config_path, over);
    fs::create_directories(exp.out_dir);
    SearchConfig cfg = exp.search;
    cfg.seed = exp.seeds.empty() ? 1 : exp.seeds[0];

    auto [model, layer] = init_model_and_layer(exp, cfg);
    if (layer.total_columns() > kOracleColumnCap)
        throw ConfigError("oracle: total columns exceed the cap of " +
                          std::to_string(kOracleColumnCap));

    RunReport report;
    pretrain(model, layer, exp.splits, cfg, report);

    log_info("enumerating all masks of size " + std::to_string(cfg.target_size));
    OracleResult result = enumerate_best_mask(model, layer, exp.splits, cfg.target_size,
                                              retrain_steps, cfg, cfg.seed);

    // HAM search from the same checkpoint, size-matched for ranking.
    CtrModel search_model = model;
    EmbeddingLayer search_layer = layer;
    MaskState state(MaskStrategy::kHam, layer.total_columns(), cfg.epsilon,
                    mix_seed(cfg.seed, 5), cfg.gs_temperature, cfg.p_min);
    search_stage(search_model, search_layer, state, exp.splits, cfg, report);
    std::vector<uint8_t> ham_mask = state.select_top_s(cfg.target_size);
    size_t rank = rank_of(result, ham_mask);

    ColumnMaskLayout layout = layer.layout();
    std::ostringstream csv;
    csv << "rank,mask,val_logloss,val_auc,per_field_dims\n";
    for (size_t i = 0; i < result.ranked.size(); ++i) {
        const MaskEval& e = result.ranked[i];
        csv << (i + 1) << ",";
        for (uint8_t b : e.mask) csv << int(b);
        csv << "," << e.val_logloss << "," << e.val_auc << ",";
        auto dims = layout.per_field_counts(e.mask);
        for (size_t j = 0; j < dims.size(); ++j) csv << (j ? "|" : "") << dims[j];
        csv << "\n";
    }
    write_file(fs::path(exp.out_dir) / "oracle_ranking.csv", csv.str());

    json summary;
    summary["masks_evaluated"] = result.ranked.size();
    summary["ham_rank"] = rank;
    summary["ham_percentile"] = double(rank) / double(result.ranked.size());
    std::string bits;
    for (uint8_t b : ham_mask) bits += char('0' + b);
    summary["ham_mask"] = bits;
    summary["best_mask"] = [&] {
        std::string s;
        for (uint8_t b : result.ranked[0].mask) s += char('0' + b);
        return s;
    }();
    write_file(fs::path(exp.out_dir) / "oracle_summary.json", summary.dump(2));

    std::cout << "masks evaluated: " << result.ranked.size() << "\n";
    std::cout << "ham-selected mask rank: " << rank << " of " << result.ranked.size() << " ("
              << 100.0 * double(rank) / double(result.ranked.size()) << "%)\n";
    return 0;
}

int cmd_preprocess(const std::string& config_path, const Overrides& over) {
    Experiment exp = load_experiment(config_path, over);
    fs::create_directories(exp.out_dir);
    // Re-encode the full dataset (splits are taken at run time).
    Dataset full;
    full.schema = exp.splits.train.schema;
    for (const Dataset* part : {&exp.splits.train, &exp.splits.val, &exp.splits.test}) {
        full.idx.insert(full.idx.end(), part->idx.begin(), part->idx.end());
        full.labels.insert(full.labels.end(), part->labels.begin(), part->labels.end());
    }
    std::string path = (fs::path(exp.out_dir) / "dataset.cache").string();
    write_cache(path, full);
    log_info("cache written to " + path + " (" + std::to_string(full.n_rows()) + " rows)");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Field-wise embedding size search via hard auxiliary mask pruning"};
    app.require_subcommand(1);

    std::string config_path, out_dir, strategy, stage = "all", curve_out;
    int64_t seed = -1;
    size_t retrain_steps = 50;
    std::vector<std::string> report_args;

    CLI::App* run = app.add_subcommand("run", "Run pretrain/search/retrain per config");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed, "Override the config seed list with one seed");
    run->add_option("--out", out_dir, "Override the output directory");
    run->add_option("--stage", stage, "pretrain|search|retrain|all")
        ->check(CLI::IsMember({"pretrain", "search", "retrain", "all"}));
    run->add_option("--strategy", strategy, "ham|sam|sam-gs|ham-p|uniform");

    CLI::App* curve = app.add_subcommand("curve", "Aggregate reports into a curve CSV");
    curve->add_option("reports", report_args, "Report files or directories")->required();
    curve->add_option("--out", curve_out, "Output CSV path (default stdout)");

    CLI::App* oracle = app.add_subcommand("oracle", "Exhaustive mask enumeration (tiny instances)");
    oracle->add_option("--config", config_path, "Experiment config (JSON)")->required();
    oracle->add_option("--seed", seed, "Override the config seed list with one seed");
    oracle->add_option("--out", out_dir, "Override the output directory");
    oracle->add_option("--retrain-steps", retrain_steps, "Fine-tune steps per mask");

    CLI::App* preprocess = app.add_subcommand("preprocess", "Encode a dataset into a cache file");
    preprocess->add_option("--config", config_path, "Experiment config (JSON)")->required();
    preprocess->add_option("--out", out_dir, "Override the output directory");

    CLI11_PARSE(app, argc, argv);

    Overrides over{out_dir, strategy, seed};
    try {
        if (run->parsed()) return cmd_run(config_path, over, stage);
        if (curve->parsed()) return cmd_curve(report_args, curve_out);
        if (oracle->parsed()) return cmd_oracle(config_path, over, retrain_steps);
        if (preprocess->parsed()) return cmd_preprocess(config_path, over);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
