#include "caimira/irt.hpp"

#include <cmath>

#include <fmt/format.h>

#include "caimira/embeddings.hpp"
#include "caimira/error.hpp"

namespace caimira {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double irt1d_predict(double skill, double difficulty) { return sigmoid(skill - difficulty); }

double mirt_predict(std::span<const double> theta, double difficulty, std::span<const double> log_disc) {
    if (theta.size() != log_disc.size()) {
        throw ContractError(fmt::format("skill has {} dims but discriminability has {}", theta.size(), log_disc.size()));
    }
    double score = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) score += theta[k] * std::exp(log_disc[k]);
    return sigmoid(score - difficulty);
}

void CaimiraParams::validate() const {
    const auto m = w_rel.rows();
    const auto n = w_rel.cols();
    if (m < 1) throw ContractError("model needs at least one latent dimension");
    if (agent_skills.cols() != m) throw ContractError("agent skill columns must equal the latent dimension count");
    if (b_rel.size() != m) throw ContractError("relevance bias length must equal the latent dimension count");
    if (w_diff.rows() != m || w_diff.cols() != n) throw ContractError("difficulty transform must be m x n like W_R");
    if (mean_embedding.size() != n) throw ContractError("mean embedding length must equal the embedding dimension");
    if (!agent_skills.allFinite() || !w_rel.allFinite() || !b_rel.allFinite() || !w_diff.allFinite() ||
        !mean_embedding.allFinite()) {
        throw ContractError("model parameters must be finite");
    }
}

bool CaimiraParams::operator==(const CaimiraParams& other) const {
    auto same = [](const auto& a, const auto& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
    };
    return same(agent_skills, other.agent_skills) && same(w_rel, other.w_rel) && same(b_rel, other.b_rel) &&
           same(w_diff, other.w_diff) && same(mean_embedding, other.mean_embedding);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double top = logits.maxCoeff();
    Eigen::VectorXd out = (logits.array() - top).exp();
    return out / out.sum();
}

namespace {

void check_embedding(const CaimiraParams& params, const Eigen::VectorXd& embedding) {
    if (static_cast<std::size_t>(embedding.size()) != params.embedding_dim()) {
        throw ContractError(fmt::format("embedding has {} components, model expects {}", embedding.size(),
                                        params.embedding_dim()));
    }
}

void check_agent(const CaimiraParams& params, std::size_t agent) {
    if (agent >= params.agent_count()) {
        throw ContractError(fmt::format("agent index {} out of range ({} agents)", agent, params.agent_count()));
    }
}

}  // namespace

Eigen::VectorXd compute_relevance(const CaimiraParams& params, const Eigen::VectorXd& embedding) {
    check_embedding(params, embedding);
    return softmax(params.w_rel * embedding + params.b_rel);
}

Eigen::VectorXd compute_difficulty(const CaimiraParams& params, const Eigen::VectorXd& embedding) {
    check_embedding(params, embedding);
    return params.w_diff * (embedding - params.mean_embedding);
}

QuestionCharacteristics characteristics(const CaimiraParams& params, const Eigen::VectorXd& embedding) {
    return {compute_relevance(params, embedding), compute_difficulty(params, embedding)};
}

Eigen::VectorXd latent_scores(const CaimiraParams& params, std::size_t agent, const Eigen::VectorXd& embedding) {
    check_agent(params, agent);
    return params.agent_skills.row(static_cast<Eigen::Index>(agent)).transpose() - compute_difficulty(params, embedding);
}

double caimira_predict(const CaimiraParams& params, std::size_t agent, const Eigen::VectorXd& embedding) {
    const Eigen::VectorXd scores = latent_scores(params, agent, embedding);
    return sigmoid(scores.dot(compute_relevance(params, embedding)));
}

ItemCharacteristics compute_all_characteristics(const CaimiraParams& params, const Eigen::MatrixXd& embeddings) {
    if (static_cast<std::size_t>(embeddings.cols()) != params.embedding_dim()) {
        throw ContractError("embedding matrix width does not match the model");
    }
    ItemCharacteristics out;
    const Eigen::MatrixXd logits = (embeddings * params.w_rel.transpose()).rowwise() + params.b_rel.transpose();
    out.relevance.resize(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
        out.relevance.row(j) = softmax(logits.row(j).transpose()).transpose();
    }
    out.difficulty = (embeddings.rowwise() - params.mean_embedding.transpose()) * params.w_diff.transpose();
    return out;
}

ItemCharacteristics compute_all_characteristics(const CaimiraParams& params, const EmbeddingStore& store) {
    return compute_all_characteristics(params, store.matrix());
}

Eigen::MatrixXd predict_all(const CaimiraParams& params, const ItemCharacteristics& chars) {
    const auto n_a = params.agent_skills.rows();
    const auto n_q = chars.relevance.rows();
    Eigen::MatrixXd out(n_a, n_q);
    for (Eigen::Index j = 0; j < n_q; ++j) {
        const double offset = chars.difficulty.row(j).dot(chars.relevance.row(j));
        for (Eigen::Index i = 0; i < n_a; ++i) {
            out(i, j) = sigmoid(params.agent_skills.row(i).dot(chars.relevance.row(j)) - offset);
        }
    }
    return out;
}

Irt1dParams reduce_to_irt1d(const CaimiraParams& params, const EmbeddingStore& store) {
    if (params.dims() != 1) throw ContractError("only a one-dimensional model reduces to unidimensional IRT");
    const auto chars = compute_all_characteristics(params, store);
    return {params.agent_skills.col(0), chars.difficulty.col(0)};
}

CaimiraParams permute_dimensions(const CaimiraParams& params, std::span<const std::size_t> perm) {
    const auto m = static_cast<std::size_t>(params.dims());
    if (perm.size() != m) throw ContractError("permutation length must equal the latent dimension count");
    std::vector<bool> seen(m, false);
    for (auto p : perm) {
        if (p >= m || seen[p]) throw ContractError("not a permutation");
        seen[p] = true;
    }
    CaimiraParams out = params;
    for (std::size_t k = 0; k < m; ++k) {
        const auto src = static_cast<Eigen::Index>(perm[k]);
        const auto dst = static_cast<Eigen::Index>(k);
        out.agent_skills.col(dst) = params.agent_skills.col(src);
        out.w_rel.row(dst) = params.w_rel.row(src);
        out.b_rel(dst) = params.b_rel(src);
        out.w_diff.row(dst) = params.w_diff.row(src);
    }
    return out;
}

CaimiraParams round_to_float(const CaimiraParams& params) {
    auto round = [](const auto& m) {
        return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); }).eval();
    };
    CaimiraParams out;
    out.agent_skills = round(params.agent_skills);
    out.w_rel = round(params.w_rel);
    out.b_rel = round(params.b_rel);
    out.w_diff = round(params.w_diff);
    out.mean_embedding = round(params.mean_embedding);
    return out;
}

}  // namespace caimira
