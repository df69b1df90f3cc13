#include "caimira/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "caimira/dataset.hpp"
#include "caimira/embeddings.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

void TrainConfig::validate() const {
    if (m < 1) throw ConfigError("m must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(lambda_d >= 0.0) || !(lambda_s >= 0.0)) throw ConfigError("regularization weights must be >= 0");
    if (max_epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in [0, 1)");
    }
    if (early_stop_patience < 1) throw ConfigError("early stopping patience must be >= 1");
}

std::vector<Observation> observations_from_matrix(const ResponseMatrix& matrix, const EmbeddingStore& store) {
    std::vector<std::size_t> rows(matrix.item_count());
    for (std::size_t j = 0; j < matrix.item_count(); ++j) {
        const auto idx = store.index_of(matrix.items()[j]);
        if (!idx) throw ConfigError("response item " + matrix.items()[j] + " has no embedding");
        rows[j] = *idx;
    }
    std::vector<Observation> out;
    out.reserve(matrix.entry_count());
    for (const auto& [key, entry] : matrix.entries()) out.push_back({key.first, rows[key.second], entry.value});
    return out;
}

Gradients Gradients::zeros_like(const CaimiraParams& params) {
    return {Eigen::MatrixXd::Zero(params.agent_skills.rows(), params.agent_skills.cols()),
            Eigen::MatrixXd::Zero(params.w_rel.rows(), params.w_rel.cols()), Eigen::VectorXd::Zero(params.b_rel.size()),
            Eigen::MatrixXd::Zero(params.w_diff.rows(), params.w_diff.cols())};
}

bool Gradients::all_finite() const {
    return agent_skills.allFinite() && w_rel.allFinite() && b_rel.allFinite() && w_diff.allFinite();
}

double Gradients::max_abs() const {
    double out = 0.0;
    for (const Eigen::MatrixXd* m : {&agent_skills, &w_rel, &w_diff}) {
        if (m->size()) out = std::max(out, m->cwiseAbs().maxCoeff());
    }
    if (b_rel.size()) out = std::max(out, b_rel.cwiseAbs().maxCoeff());
    return out;
}

double cross_entropy(double probability, std::uint8_t label) {
    const double p = std::clamp(probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
    return label ? -std::log(p) : -std::log1p(-p);
}

double regularizer(const CaimiraParams& params, const EmbeddingStore& store, const TrainConfig& cfg) {
    double diff_norm = 0.0;
    for (std::size_t j = 0; j < store.size(); ++j) diff_norm += compute_difficulty(params, store.row(j)).lpNorm<1>();
    double skill_norm = 0.0;
    for (Eigen::Index i = 0; i < params.agent_skills.rows(); ++i) skill_norm += params.agent_skills.row(i).lpNorm<1>();
    return cfg.lambda_d * diff_norm + cfg.lambda_s * skill_norm;
}

namespace {

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

// Objective over a fixed embedding table. The centered embeddings depend
// only on the (frozen) mean embedding, so they are computed once.
class Objective {
public:
    Objective(const EmbeddingStore& store, const Eigen::VectorXd& mean)
        : embeddings_(store.matrix()), centered_(store.matrix().rowwise() - mean.transpose()) {}

    double evaluate(const CaimiraParams& params, std::span<const Observation> batch, const TrainConfig& cfg,
                    double reg_scale, Gradients* grads) const {
        const auto m = static_cast<Eigen::Index>(params.dims());
        if (grads) *grads = Gradients::zeros_like(params);
        double total = 0.0;
        if (!batch.empty()) {
            const double inv_b = 1.0 / static_cast<double>(batch.size());
            Eigen::VectorXd logits(m), rel(m), diff(m), score(m), dz(m);
            for (const auto& obs : batch) {
                const auto row = static_cast<Eigen::Index>(obs.item);
                const auto agent = static_cast<Eigen::Index>(obs.agent);
                logits.noalias() = params.w_rel * embeddings_.row(row).transpose();
                logits += params.b_rel;
                rel = softmax(logits);
                diff.noalias() = params.w_diff * centered_.row(row).transpose();
                score = params.agent_skills.row(agent).transpose() - diff;
                const double x = score.dot(rel);
                const double p = sigmoid(x);
                total += cross_entropy(p, obs.value);
                if (!grads) continue;
                if (p <= kProbabilityClamp || p >= 1.0 - kProbabilityClamp) continue;
                const double g = (p - static_cast<double>(obs.value)) * inv_b;
                grads->agent_skills.row(agent) += g * rel.transpose();
                grads->w_diff.noalias() -= (g * rel) * centered_.row(row);
                dz = g * rel.cwiseProduct((score.array() - x).matrix());
                grads->w_rel.noalias() += dz * embeddings_.row(row);
                grads->b_rel += dz;
            }
            total *= inv_b;
        }
        if (reg_scale > 0.0 && cfg.lambda_s > 0.0) {
            total += reg_scale * cfg.lambda_s * params.agent_skills.cwiseAbs().sum();
            if (grads) grads->agent_skills += (reg_scale * cfg.lambda_s) * params.agent_skills.unaryExpr(&sign);
        }
        if (reg_scale > 0.0 && cfg.lambda_d > 0.0) {
            const Eigen::MatrixXd difficulty = centered_ * params.w_diff.transpose();
            total += reg_scale * cfg.lambda_d * difficulty.cwiseAbs().sum();
            if (grads) {
                grads->w_diff.noalias() +=
                    (reg_scale * cfg.lambda_d) * (difficulty.unaryExpr(&sign).transpose() * centered_);
            }
        }
        return total;
    }

private:
    const Eigen::MatrixXd& embeddings_;
    Eigen::MatrixXd centered_;
};

void require_batch(std::span<const Observation> batch) {
    if (batch.empty()) throw ContractError("batch must be non-empty");
}

}  // namespace

double loss(const CaimiraParams& params, std::span<const Observation> batch, const EmbeddingStore& store,
            const TrainConfig& cfg, double reg_scale) {
    require_batch(batch);
    return Objective(store, params.mean_embedding).evaluate(params, batch, cfg, reg_scale, nullptr);
}

Gradients grad(const CaimiraParams& params, std::span<const Observation> batch, const EmbeddingStore& store,
               const TrainConfig& cfg, double reg_scale) {
    require_batch(batch);
    Gradients g;
    Objective(store, params.mean_embedding).evaluate(params, batch, cfg, reg_scale, &g);
    return g;
}

double mean_cross_entropy(const CaimiraParams& params, std::span<const Observation> batch, const EmbeddingStore& store) {
    require_batch(batch);
    return Objective(store, params.mean_embedding).evaluate(params, batch, TrainConfig{}, 0.0, nullptr);
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_params(const CaimiraParams& params) {
    AdamState state;
    state.first = Gradients::zeros_like(params);
    state.second = Gradients::zeros_like(params);
    return state;
}

namespace {

template <typename Block>
void adam_block(Block& param, Block& first, Block& second, const Block& g, double beta1, double beta2, double eps,
                double step_size, double bias2) {
    first = beta1 * first + (1.0 - beta1) * g;
    second = beta2 * second + (1.0 - beta2) * g.cwiseAbs2();
    param.array() -= step_size * first.array() / ((second.array() / bias2).sqrt() + eps);
}

void check_gradient(const Gradients& grads, std::int64_t step) {
    auto check = [&](const auto& block, const char* name) {
        if (!block.allFinite()) {
            throw TrainingError(fmt::format("non-finite gradient in {} at optimizer step {} (max |finite| {:.3g})", name,
                                            step, block.unaryExpr([](double v) {
                                                return std::isfinite(v) ? std::abs(v) : 0.0;
                                            }).maxCoeff()));
        }
    };
    check(grads.agent_skills, "agent_skills");
    check(grads.w_rel, "W_R");
    check(grads.b_rel, "b_R");
    check(grads.w_diff, "W_D");
}

}  // namespace

void adam_update(AdamState& state, CaimiraParams& params, const Gradients& grads, double lr) {
    if (grads.agent_skills.rows() != params.agent_skills.rows() || grads.agent_skills.cols() != params.agent_skills.cols() ||
        grads.w_rel.rows() != params.w_rel.rows() || grads.w_rel.cols() != params.w_rel.cols() ||
        grads.b_rel.size() != params.b_rel.size() || grads.w_diff.rows() != params.w_diff.rows() ||
        grads.w_diff.cols() != params.w_diff.cols()) {
        throw ContractError("gradient shapes do not match parameters");
    }
    if (state.first.agent_skills.size() != params.agent_skills.size() || state.first.w_rel.size() != params.w_rel.size()) {
        const auto step = state.step;
        const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
        state = AdamState::for_params(params);
        state.step = step;
        state.beta1 = b1;
        state.beta2 = b2;
        state.epsilon = eps;
    }
    check_gradient(grads, state.step + 1);
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(state.beta1, t);
    const double bias2 = 1.0 - std::pow(state.beta2, t);
    const double step_size = lr / bias1;
    adam_block(params.agent_skills, state.first.agent_skills, state.second.agent_skills, grads.agent_skills, state.beta1,
               state.beta2, state.epsilon, step_size, bias2);
    adam_block(params.w_rel, state.first.w_rel, state.second.w_rel, grads.w_rel, state.beta1, state.beta2,
               state.epsilon, step_size, bias2);
    adam_block(params.b_rel, state.first.b_rel, state.second.b_rel, grads.b_rel, state.beta1, state.beta2,
               state.epsilon, step_size, bias2);
    adam_block(params.w_diff, state.first.w_diff, state.second.w_diff, grads.w_diff, state.beta1, state.beta2,
               state.epsilon, step_size, bias2);
}

std::pair<AdamState, CaimiraParams> adam_step(const AdamState& state, const CaimiraParams& params,
                                              const Gradients& grads, double lr) {
    AdamState next_state = state;
    CaimiraParams next_params = params;
    adam_update(next_state, next_params, grads, lr);
    return {std::move(next_state), std::move(next_params)};
}

// ---------------------------------------------------------------------------
// Training loop

TrainSplit split_observations(const std::vector<Observation>& observations, double validation_fraction,
                              std::uint64_t seed) {
    std::map<std::size_t, std::vector<std::size_t>> by_agent;
    for (std::size_t k = 0; k < observations.size(); ++k) by_agent[observations[k].agent].push_back(k);
    std::vector<char> is_validation(observations.size(), 0);
    Rng rng(derive_seed(seed, 1));
    for (auto& [agent, indices] : by_agent) {
        rng.shuffle(indices);
        const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(indices.size())));
        for (std::size_t k = 0; k < n_val; ++k) is_validation[indices[k]] = 1;
    }
    TrainSplit split;
    for (std::size_t k = 0; k < observations.size(); ++k) {
        (is_validation[k] ? split.validation : split.train).push_back(observations[k]);
    }
    return split;
}

CaimiraParams initialize_params(std::size_t n_agents, const EmbeddingStore& store, int m, std::uint64_t seed) {
    const auto M = static_cast<Eigen::Index>(m);
    const auto N = static_cast<Eigen::Index>(store.dim());
    Rng rng(derive_seed(seed, 2));
    CaimiraParams p;
    p.agent_skills.resize(static_cast<Eigen::Index>(n_agents), M);
    for (Eigen::Index i = 0; i < p.agent_skills.rows(); ++i) {
        for (Eigen::Index k = 0; k < M; ++k) p.agent_skills(i, k) = 0.1 * rng.normal();
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(m + static_cast<int>(N)));
    p.w_rel.resize(M, N);
    p.w_diff.resize(M, N);
    for (Eigen::Index k = 0; k < M; ++k) {
        for (Eigen::Index c = 0; c < N; ++c) p.w_rel(k, c) = rng.uniform(-limit, limit);
    }
    for (Eigen::Index k = 0; k < M; ++k) {
        for (Eigen::Index c = 0; c < N; ++c) p.w_diff(k, c) = rng.uniform(-limit, limit);
    }
    p.b_rel = Eigen::VectorXd::Zero(M);
    p.mean_embedding = store.mean();
    return p;
}

FittedModel train_observations(const TrainSplit& split, std::vector<std::string> agent_ids,
                               const EmbeddingStore& store, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (split.train.empty()) throw ConfigError("no training responses");
    if (store.size() == 0) throw ConfigError("embedding store is empty");
    for (const auto& obs : split.train) {
        if (obs.agent >= agent_ids.size() || obs.item >= store.size()) throw ContractError("observation out of range");
    }

    FittedModel fitted;
    fitted.agent_ids = std::move(agent_ids);
    fitted.config = cfg;
    CaimiraParams params = initialize_params(fitted.agent_ids.size(), store, cfg.m, cfg.seed);
    const Objective objective(store, params.mean_embedding);
    AdamState adam = AdamState::for_params(params);

    const std::size_t n_train = split.train.size();
    const std::size_t batch_count = (n_train + cfg.batch_size - 1) / cfg.batch_size;
    const double reg_scale = 1.0 / static_cast<double>(batch_count);
    const bool has_validation = !split.validation.empty();

    auto record = [&](int epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = objective.evaluate(params, split.train, cfg, 1.0, nullptr);
        rec.val_loss = has_validation ? objective.evaluate(params, split.validation, cfg, 0.0, nullptr)
                                      : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(rec.train_loss) || (has_validation && !std::isfinite(rec.val_loss))) {
            throw TrainingError(fmt::format("loss diverged at epoch {}", epoch));
        }
        fitted.history.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);
        return has_validation ? rec.val_loss : rec.train_loss;
    };

    double best = record(0);
    CaimiraParams best_params = params;
    fitted.best_epoch = 0;
    int since_best = 0;

    Rng shuffle_rng(derive_seed(cfg.seed, 3));
    std::vector<std::size_t> order(n_train);
    for (std::size_t k = 0; k < n_train; ++k) order[k] = k;
    std::vector<Observation> batch;
    batch.reserve(cfg.batch_size);
    Gradients grads;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t b = 0; b < batch_count; ++b) {
            batch.clear();
            const std::size_t end = std::min(n_train, (b + 1) * cfg.batch_size);
            for (std::size_t k = b * cfg.batch_size; k < end; ++k) batch.push_back(split.train[order[k]]);
            const double batch_loss = objective.evaluate(params, batch, cfg, reg_scale, &grads);
            if (!std::isfinite(batch_loss)) {
                throw TrainingError(fmt::format("loss diverged at epoch {} batch {}", epoch, b));
            }
            if (hooks.on_batch) hooks.on_batch(epoch, b, batch_loss);
            adam_update(adam, params, grads, cfg.learning_rate);
        }
        const double metric = record(epoch);
        if (metric < best) {
            best = metric;
            best_params = params;
            fitted.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    fitted.params = round_to_float(best_params);
    fitted.best_val_loss = best;
    return fitted;
}

FittedModel train(const ResponseMatrix& matrix, const EmbeddingStore& store, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
    cfg.validate();
    if (matrix.entry_count() == 0) throw ConfigError("response matrix is empty");
    const auto observations = observations_from_matrix(matrix, store);
    const auto split = split_observations(observations, cfg.validation_fraction, cfg.seed);
    return train_observations(split, matrix.agents(), store, cfg, hooks);
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,train_loss,val_loss\n";
    for (const auto& rec : history) {
        out << rec.epoch << ',' << format_real(rec.train_loss) << ',' << format_real(rec.val_loss) << '\n';
    }
}

std::vector<AblationRow> ablate_dimensions(const ResponseMatrix& matrix, const EmbeddingStore& store,
                                           const TrainConfig& cfg, std::span<const int> m_list) {
    if (m_list.empty()) throw ConfigError("dimension list must be non-empty");
    cfg.validate();
    if (matrix.entry_count() == 0) throw ConfigError("response matrix is empty");
    const auto observations = observations_from_matrix(matrix, store);
    const auto split = split_observations(observations, cfg.validation_fraction, cfg.seed);
    std::vector<AblationRow> rows;
    for (int m : m_list) {
        TrainConfig run = cfg;
        run.m = m;
        const FittedModel fitted = train_observations(split, matrix.agents(), store, run);
        rows.push_back({m, fitted.best_val_loss, fitted.best_epoch, fitted.history.back().epoch});
        logger()->info("event=ablation_row m={} best_val_loss={} best_epoch={}", m, fitted.best_val_loss,
                       fitted.best_epoch);
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "m,best_val_loss,best_epoch,epochs_run\n";
    for (const auto& r : rows) {
        out << r.m << ',' << format_real(r.best_val_loss) << ',' << r.best_epoch << ',' << r.epochs_run << '\n';
    }
}

// ---------------------------------------------------------------------------
// Gradient verification

FiniteDiffReport finite_diff_check(const CaimiraParams& params, std::span<const Observation> batch,
                                   const EmbeddingStore& store, const TrainConfig& cfg, double h,
                                   const Gradients* analytic, std::uint64_t seed, double reg_scale) {
    if (!(h > 0.0)) throw ContractError("finite difference step must be > 0");
    require_batch(batch);
    const Objective objective(store, params.mean_embedding);
    Gradients computed;
    if (!analytic) {
        objective.evaluate(params, batch, cfg, reg_scale, &computed);
        analytic = &computed;
    }

    // (block, flat index) for every coordinate; blocks: 0 skills, 1 W_R, 2 b_R, 3 W_D
    const std::array<Eigen::Index, 4> sizes{params.agent_skills.size(), params.w_rel.size(), params.b_rel.size(),
                                            params.w_diff.size()};
    std::vector<std::pair<int, Eigen::Index>> coords;
    for (int b = 0; b < 4; ++b) {
        for (Eigen::Index k = 0; k < sizes[b]; ++k) coords.emplace_back(b, k);
    }
    constexpr std::size_t kMaxCoordinates = 500;
    if (coords.size() > kMaxCoordinates) {
        Rng rng(derive_seed(seed, 4));
        rng.shuffle(coords);
        coords.resize(kMaxCoordinates);
        std::sort(coords.begin(), coords.end());
    }

    auto coordinate = [](CaimiraParams& p, int block, Eigen::Index k) -> double& {
        switch (block) {
            case 0: return p.agent_skills.data()[k];
            case 1: return p.w_rel.data()[k];
            case 2: return p.b_rel.data()[k];
            default: return p.w_diff.data()[k];
        }
    };
    auto analytic_value = [&](int block, Eigen::Index k) {
        switch (block) {
            case 0: return analytic->agent_skills.data()[k];
            case 1: return analytic->w_rel.data()[k];
            case 2: return analytic->b_rel.data()[k];
            default: return analytic->w_diff.data()[k];
        }
    };

    FiniteDiffReport report;
    CaimiraParams probe = params;
    for (const auto& [block, k] : coords) {
        double& x = coordinate(probe, block, k);
        const double original = x;
        x = original + h;
        const double up = objective.evaluate(probe, batch, cfg, reg_scale, nullptr);
        x = original - h;
        const double down = objective.evaluate(probe, batch, cfg, reg_scale, nullptr);
        x = original;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic_value(block, k);
        const double denom = std::max({std::abs(a), std::abs(numeric), kRelativeErrorFloor});
        report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
    }
    report.coordinates = coords.size();
    return report;
}

}  // namespace caimira
