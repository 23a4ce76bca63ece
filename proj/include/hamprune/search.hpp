#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hamprune/data.hpp"
#include "hamprune/masks.hpp"
#include "hamprune/metrics.hpp"
#include "hamprune/models.hpp"
#include "hamprune/optim.hpp"

namespace hamprune {

enum class RunStrategy : uint8_t { kHam = 0, kSam = 1, kSamGs = 2, kHamP = 3, kUniform = 4 };

std::string run_strategy_name(RunStrategy s);
RunStrategy run_strategy_from_name(const std::string& name);

/// The learning rate the auxiliary-weight SGD uses unless overridden:
/// 1e-3 for HAM, 1e-2 for the relaxed/stochastic baselines.
double default_alpha_lr(RunStrategy s);

struct SearchConfig {
    size_t target_size = 0;  // s, total surviving columns
    double mu = 5e-5;        // size-penalty strength
    double epsilon = 0.01;   // initial auxiliary weight for HAM
    double alpha_lr = 1e-3;
    double model_lr = 1e-3;
    double so_lambda = 1e-3;  // 0 disables the regularizer
    bool so_normalized = false;
    bool so_in_search = false;   // Algorithm default: pretrain only
    bool so_in_retrain = false;
    size_t batch_size = 2048;
    size_t pretrain_max_epochs = 30;
    size_t search_max_epochs = 10;
    size_t retrain_max_epochs = 30;
    size_t patience = 3;      // pretrain/retrain early stop, epochs without val AUC gain
    bool restore_best = true;  // return the best-val checkpoint (false: last epoch)
    size_t stop_window = 2;   // search stop: |positive count - s| tolerance
    double auc_gain_tol = 1e-4;
    size_t auc_window = 3;    // search stop: evaluations without significant gain
    double gs_temperature = 0.1;
    double p_min = 1e-4;
    uint64_t seed = 1;
};

struct EpochLog {
    std::string stage;
    size_t epoch = 0;
    double train_logloss = 0;
    double val_logloss = 0;
    double val_auc = 0;
    size_t positive_count = 0;  // search stage only
};

struct RunReport {
    std::string strategy;
    std::string model;
    uint64_t seed = 0;
    std::string config_json;  // resolved experiment config echo (set by the caller)
    std::vector<EpochLog> epochs;
    double test_logloss = 0;
    double test_auc = 0;
    size_t test_samples = 0;
    std::vector<size_t> selected_dims;      // per field, from the retrain mask
    std::vector<size_t> size_matched_dims;  // per field, exactly s columns
    std::vector<uint8_t> retrain_mask;
    std::vector<double> final_alpha;
    size_t mask_ones = 0;
    size_t embedding_params = 0;
    size_t projection_params = 0;
    size_t dense_params = 0;
    size_t total_params = 0;
    size_t supernet_embedding_params = 0;
    double pretrain_seconds = 0;
    double search_seconds = 0;
    double retrain_seconds = 0;
};

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

/// Model family plus supernet sizing for one experiment.
struct ModelSetup {
    ModelConfig model;
    std::vector<size_t> base_dims;  // capped at C_j by the embedding layer
    bool use_projection = true;     // ignored (forced off) for DCN-V2
    size_t proj_dim = 16;
};

std::vector<size_t> default_base_dims(const FeatureSchema& schema, size_t cap = 16);

// -- single steps -------------------------------------------------------------

/// One mini-batch update of {V, Theta}: forward with the given mask values,
/// logloss (+ optional SO term), backward, Adam. Returns the batch logloss.
double train_batch(CtrModel& model, EmbeddingLayer& layer, const Batch& batch,
                   const std::vector<double>& mask_values, bool with_so,
                   const SearchConfig& cfg, Adam& opt);

/// The auxiliary-weight update: alpha <- alpha - lr * g - mu * sgn(count - s),
/// where g is the strategy's backward image of the mask gradient, count is
/// the positive count before the update, and sgn(0) = 0.
void alpha_step(MaskState& state, const std::vector<double>& mask_grads,
                const SearchConfig& cfg);

EvalResult eval_split(const CtrModel& model, const EmbeddingLayer& layer, const Dataset& data,
                      const std::vector<double>& mask_values, size_t batch_size);

// -- stages -------------------------------------------------------------------

/// Supernet training with SO regularization and best-validation-AUC early
/// stopping; model/layer hold the best checkpoint on return.
void pretrain(CtrModel& model, EmbeddingLayer& layer, const Splits& splits,
              const SearchConfig& cfg, RunReport& report);

struct SearchOutcome {
    size_t final_count = 0;
    size_t epochs_run = 0;
    bool stopped_early = false;
};

/// Per-iteration alternation: one validation batch drives the auxiliary
/// update, one training batch drives Adam on {V, Theta} under the current
/// mask. Stops when the positive count is within stop_window of the target
/// and validation AUC shows no significant gain.
SearchOutcome search_stage(CtrModel& model, EmbeddingLayer& layer, MaskState& state,
                           const Splits& splits, const SearchConfig& cfg, RunReport& report);

/// Mask frozen, {V, Theta} trained to convergence with early stopping; the
/// test evaluation of the best checkpoint lands in the report.
void retrain(CtrModel& model, EmbeddingLayer& layer, const std::vector<uint8_t>& mask,
             const Splits& splits, const SearchConfig& cfg, RunReport& report);

// -- pipeline -----------------------------------------------------------------

/// Budget split for the strategy without a search stage: floor(s/K) per
/// field capped at d_j, remainder to the largest-cardinality fields.
std::vector<uint8_t> uniform_mask(const std::vector<size_t>& dims,
                                  const std::vector<uint32_t>& cardinalities, size_t s);

struct PipelineResult {
    RunReport report;
    CtrModel model;
    EmbeddingLayer layer;
    std::vector<uint8_t> retrain_mask;
};

/// pretrain -> search -> retrain for any strategy (uniform skips search).
PipelineResult run_pipeline(const Splits& splits, const ModelSetup& setup, RunStrategy strategy,
                            const SearchConfig& cfg);

// -- diagnostics --------------------------------------------------------------

/// Eq.-style first-order importance check: for each column, the
/// straight-through gradient delivered to the mask slot and the exact batch
/// loss difference between mask-on and mask-off.
struct TaylorDiag {
    std::vector<double> ste_grad;
    std::vector<double> loss_delta;
    double base_loss = 0;
};

TaylorDiag taylor_diagnostic(const CtrModel& model, const EmbeddingLayer& layer,
                             const Batch& batch, const std::vector<double>& base_mask);

std::pair<double, double> taylor_diagnostic_column(const CtrModel& model,
                                                   const EmbeddingLayer& layer,
                                                   const Batch& batch, size_t column,
                                                   const std::vector<double>& base_mask);

}  // namespace hamprune
