#pragma once

// Forward models: unidimensional IRT, the MIRT baseline and the
// content-aware model whose item relevance and difficulty are linear
// functions of the item embedding.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace caimira {

class EmbeddingStore;

double sigmoid(double x);

struct Irt1dParams {
    Eigen::VectorXd skills;
    Eigen::VectorXd difficulties;
};

// sigma(s - d)
double irt1d_predict(double skill, double difficulty);

struct MirtParams {
    Eigen::MatrixXd skills;        // n_a x m
    Eigen::VectorXd difficulties;  // n_q
    Eigen::MatrixXd log_disc;      // n_q x m; discriminability is exp(log_disc)
};

// sigma(theta . exp(log_disc) - d); size mismatch throws ContractError.
double mirt_predict(std::span<const double> theta, double difficulty, std::span<const double> log_disc);

struct CaimiraParams {
    Eigen::MatrixXd agent_skills;    // n_a x m
    Eigen::MatrixXd w_rel;           // m x n
    Eigen::VectorXd b_rel;           // m
    Eigen::MatrixXd w_diff;          // m x n, no bias: difficulty is centered
    Eigen::VectorXd mean_embedding;  // n

    std::size_t dims() const { return static_cast<std::size_t>(w_rel.rows()); }
    std::size_t embedding_dim() const { return static_cast<std::size_t>(w_rel.cols()); }
    std::size_t agent_count() const { return static_cast<std::size_t>(agent_skills.rows()); }

    // Shapes consistent, m >= 1, all values finite; throws ContractError.
    void validate() const;
    bool operator==(const CaimiraParams& other) const;
};

struct QuestionCharacteristics {
    Eigen::VectorXd relevance;   // on the simplex
    Eigen::VectorXd difficulty;  // centered
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// softmax(W_R e + b_R)
Eigen::VectorXd compute_relevance(const CaimiraParams& params, const Eigen::VectorXd& embedding);
// W_D (e - mean embedding)
Eigen::VectorXd compute_difficulty(const CaimiraParams& params, const Eigen::VectorXd& embedding);
QuestionCharacteristics characteristics(const CaimiraParams& params, const Eigen::VectorXd& embedding);

// s_i - d_j before relevance weighting.
Eigen::VectorXd latent_scores(const CaimiraParams& params, std::size_t agent, const Eigen::VectorXd& embedding);
// sigma((s_i - d_j) . r_j)
double caimira_predict(const CaimiraParams& params, std::size_t agent, const Eigen::VectorXd& embedding);

// Relevance and difficulty for every row of the store (n_q x m each).
struct ItemCharacteristics {
    Eigen::MatrixXd relevance;
    Eigen::MatrixXd difficulty;
};
ItemCharacteristics compute_all_characteristics(const CaimiraParams& params, const Eigen::MatrixXd& embeddings);
ItemCharacteristics compute_all_characteristics(const CaimiraParams& params, const EmbeddingStore& store);

// Probability for every (agent, store row) pair, n_a x n_q.
Eigen::MatrixXd predict_all(const CaimiraParams& params, const ItemCharacteristics& chars);

// With m == 1 the relevance is identically 1 and the model collapses to
// unidimensional IRT over the store's items.
Irt1dParams reduce_to_irt1d(const CaimiraParams& params, const EmbeddingStore& store);

// perm[k] is the source dimension that becomes dimension k.
CaimiraParams permute_dimensions(const CaimiraParams& params, std::span<const std::size_t> perm);

// Rounds every parameter to float32 precision, the checkpoint storage type.
CaimiraParams round_to_float(const CaimiraParams& params);

struct Checkpoint {
    CaimiraParams params;
    std::vector<std::string> agent_ids;
    std::string item_store_ref;  // file name of the embedding store trained against
};

// <prefix>.json manifest + <prefix>.bin float32 blocks in the order
// agent_skills, W_R, b_R, W_D, mean_embedding (row-major).
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& prefix);
Checkpoint load_checkpoint(const std::filesystem::path& prefix);

}  // namespace caimira
