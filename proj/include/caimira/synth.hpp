#pragma once

// Synthetic ground truth for the content-aware model: clustered item
// embeddings, sampled parameters and Bernoulli responses, plus dimension
// alignment and recovery metrics against an estimate.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caimira/dataset.hpp"
#include "caimira/embeddings.hpp"
#include "caimira/irt.hpp"

namespace caimira {

struct SynthConfig {
    std::size_t n_agents = 60;
    std::size_t n_items = 2000;
    int m_true = 2;
    std::size_t dim = 16;
    double density = 0.5;
    int min_clues = 1;  // items per synthetic question
    int max_clues = 6;
    double skill_sd = 1.0;
    double difficulty_sd = 1.0;     // spread of each true difficulty coordinate
    double cluster_radius = 3.0;    // norm of each embedding cluster center
    double embedding_noise = 1.0;   // isotropic sd around the center
    double relevance_sharpness = 3.0;  // own-cluster logit advantage
    double relevance_noise = 0.1;   // sd of W_R perturbation
    std::uint64_t seed = 0;

    void validate() const;
};

SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& cfg);

struct SynthData {
    Checkpoint truth;  // true parameters with agent ids
    EmbeddingStore store;
    ResponseMatrix matrix;
    QuestionBank bank;
    std::vector<Item> items;
    std::vector<int> item_cluster;  // generating cluster per store row
};

SynthData generate_synthetic(const SynthConfig& cfg);

// Writes bank.jsonl, items.jsonl, embeddings.{json,bin}, responses.csv,
// truth.{json,bin} and synth_config.json.
std::vector<std::filesystem::path> write_synthetic(const SynthData& data, const SynthConfig& cfg,
                                                   const std::filesystem::path& out_dir);

double pearson(std::span<const double> x, std::span<const double> y);

// perm[k] is the estimated dimension matched to true dimension k, i.e. the
// argument permute_dimensions(est, perm) needs to line est up with truth.
// Maximizes the summed Pearson correlation of effective-difficulty columns;
// exhaustive for m <= 6, greedy above.
std::vector<std::size_t> align_dimensions(const CaimiraParams& truth, const CaimiraParams& est,
                                          const EmbeddingStore& store);

struct RecoveryReport {
    std::vector<std::size_t> permutation;
    std::vector<double> skill_r;
    std::vector<double> difficulty_r;
    std::vector<double> relevance_r;
    std::vector<double> effective_r;
    double heldout_rmse = 0.0;
    std::size_t heldout_pairs = 0;
};

// Agents are matched by id. Held-out pairs are the (agent, item) cells
// absent from `observed`; with no matrix every pair counts.
RecoveryReport recovery_metrics(const Checkpoint& truth, const Checkpoint& est, std::span<const std::size_t> perm,
                                const EmbeddingStore& store, const ResponseMatrix* observed = nullptr);

std::string recovery_report_json(const RecoveryReport& report);

}  // namespace caimira
