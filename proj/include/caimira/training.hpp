#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caimira/irt.hpp"

namespace caimira {

class EmbeddingStore;
class ResponseMatrix;

struct TrainConfig {
    int m = 5;
    double learning_rate = 0.005;
    std::size_t batch_size = 512;
    double lambda_d = 1e-5;
    double lambda_s = 1e-5;
    int max_epochs = 500;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    int early_stop_patience = 10;

    void validate() const;
};

// One response; `item` is a row of the embedding store.
struct Observation {
    std::size_t agent = 0;
    std::size_t item = 0;
    std::uint8_t value = 0;
};

// Matrix entries resolved against the store; unknown items throw ConfigError.
std::vector<Observation> observations_from_matrix(const ResponseMatrix& matrix, const EmbeddingStore& store);

struct Gradients {
    Eigen::MatrixXd agent_skills;
    Eigen::MatrixXd w_rel;
    Eigen::VectorXd b_rel;
    Eigen::MatrixXd w_diff;

    static Gradients zeros_like(const CaimiraParams& params);
    bool all_finite() const;
    double max_abs() const;
};

inline constexpr double kProbabilityClamp = 1e-7;

// Binary cross-entropy of one prediction with the probability clamped to
// [1e-7, 1 - 1e-7].
double cross_entropy(double probability, std::uint8_t label);

// lambda_d * sum_j |d_j|_1 + lambda_s * sum_i |s_i|_1 over every store item
// and every agent, computed by a direct per-item sweep.
double regularizer(const CaimiraParams& params, const EmbeddingStore& store, const TrainConfig& cfg);

// Mean cross-entropy over the batch plus reg_scale times the full
// regularizer. reg_scale = 1 gives the complete MAP objective.
double loss(const CaimiraParams& params, std::span<const Observation> batch, const EmbeddingStore& store,
            const TrainConfig& cfg, double reg_scale = 1.0);

// Analytic gradient of loss() with the L1 subgradient taken as 0 at 0.
Gradients grad(const CaimiraParams& params, std::span<const Observation> batch, const EmbeddingStore& store,
               const TrainConfig& cfg, double reg_scale = 1.0);

// Mean cross-entropy only, no penalty.
double mean_cross_entropy(const CaimiraParams& params, std::span<const Observation> batch, const EmbeddingStore& store);

struct AdamState {
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    Gradients first;
    Gradients second;

    static AdamState for_params(const CaimiraParams& params);
};

// Bias-corrected Adam. Non-finite gradients throw TrainingError.
void adam_update(AdamState& state, CaimiraParams& params, const Gradients& grads, double lr);
std::pair<AdamState, CaimiraParams> adam_step(const AdamState& state, const CaimiraParams& params,
                                              const Gradients& grads, double lr);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;  // full objective on the training split
    double val_loss = 0.0;    // mean cross-entropy on the validation split (NaN when empty)
};

struct TrainSplit {
    std::vector<Observation> train;
    std::vector<Observation> validation;
};

// Per-agent random split of the response entries.
TrainSplit split_observations(const std::vector<Observation>& observations, double validation_fraction,
                              std::uint64_t seed);

CaimiraParams initialize_params(std::size_t n_agents, const EmbeddingStore& store, int m, std::uint64_t seed);

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
    std::function<void(int epoch, std::size_t batch, double batch_loss)> on_batch;
};

struct FittedModel {
    CaimiraParams params;
    std::vector<std::string> agent_ids;
    std::vector<EpochRecord> history;  // epoch 0 is the initialization
    TrainConfig config;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

FittedModel train(const ResponseMatrix& matrix, const EmbeddingStore& store, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});
FittedModel train_observations(const TrainSplit& split, std::vector<std::string> agent_ids,
                               const EmbeddingStore& store, const TrainConfig& cfg, const TrainHooks& hooks = {});

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

struct AblationRow {
    int m = 0;
    double best_val_loss = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
};

// One model per m on a shared split and seed.
std::vector<AblationRow> ablate_dimensions(const ResponseMatrix& matrix, const EmbeddingStore& store,
                                           const TrainConfig& cfg, std::span<const int> m_list);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

struct FiniteDiffReport {
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
};

inline constexpr double kRelativeErrorFloor = 1e-3;

// Central differences over every parameter block, at most 500 coordinates
// (seeded subsample). Relative error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3). `analytic`
// defaults to grad().
FiniteDiffReport finite_diff_check(const CaimiraParams& params, std::span<const Observation> batch,
                                   const EmbeddingStore& store, const TrainConfig& cfg, double h,
                                   const Gradients* analytic = nullptr, std::uint64_t seed = 0,
                                   double reg_scale = 1.0);

}  // namespace caimira
