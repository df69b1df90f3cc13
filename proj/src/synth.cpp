#include "caimira/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "caimira/analysis.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

using json = nlohmann::ordered_json;

void SynthConfig::validate() const {
    if (n_agents < 1 || n_items < 1) throw ConfigError("synthetic agent and item counts must be positive");
    if (m_true < 1) throw ConfigError("m_true must be >= 1");
    if (dim < 1) throw ConfigError("embedding dimension must be positive");
    if (static_cast<std::size_t>(m_true) > dim) throw ConfigError("m_true cannot exceed the embedding dimension");
    if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
    if (min_clues < 1 || max_clues < min_clues) throw ConfigError("clue range must satisfy 1 <= min_clues <= max_clues");
    for (double v : {skill_sd, difficulty_sd, cluster_radius, embedding_noise}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("spread parameters must be positive and finite");
    }
    if (!(relevance_sharpness >= 0.0) || !(relevance_noise >= 0.0)) {
        throw ConfigError("relevance sharpness and noise must be >= 0");
    }
}

namespace {

template <typename T>
void read_field(const json& doc, const char* key, T& slot) {
    if (doc.contains(key)) slot = doc.at(key).get<T>();
}

}  // namespace

SynthConfig synth_config_from_json(const std::string& text) {
    SynthConfig cfg;
    try {
        const json doc = json::parse(text);
        if (!doc.is_object()) throw ConfigError("synthetic config must be a JSON object");
        static const std::array<const char*, 15> known{
            "n_agents",      "n_items",         "m_true",         "dim",
            "density",       "min_clues",       "max_clues",      "skill_sd",
            "difficulty_sd", "cluster_radius",  "embedding_noise", "relevance_sharpness",
            "relevance_noise", "seed",          "n"};
        for (const auto& [key, value] : doc.items()) {
            if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
                throw ConfigError("unknown synthetic config key: " + key);
            }
        }
        read_field(doc, "n_agents", cfg.n_agents);
        read_field(doc, "n_items", cfg.n_items);
        read_field(doc, "m_true", cfg.m_true);
        read_field(doc, "dim", cfg.dim);
        read_field(doc, "n", cfg.dim);
        read_field(doc, "density", cfg.density);
        read_field(doc, "min_clues", cfg.min_clues);
        read_field(doc, "max_clues", cfg.max_clues);
        read_field(doc, "skill_sd", cfg.skill_sd);
        read_field(doc, "difficulty_sd", cfg.difficulty_sd);
        read_field(doc, "cluster_radius", cfg.cluster_radius);
        read_field(doc, "embedding_noise", cfg.embedding_noise);
        read_field(doc, "relevance_sharpness", cfg.relevance_sharpness);
        read_field(doc, "relevance_noise", cfg.relevance_noise);
        read_field(doc, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synthetic config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
    const json doc = {{"n_agents", cfg.n_agents},
                      {"n_items", cfg.n_items},
                      {"m_true", cfg.m_true},
                      {"dim", cfg.dim},
                      {"density", cfg.density},
                      {"min_clues", cfg.min_clues},
                      {"max_clues", cfg.max_clues},
                      {"skill_sd", cfg.skill_sd},
                      {"difficulty_sd", cfg.difficulty_sd},
                      {"cluster_radius", cfg.cluster_radius},
                      {"embedding_noise", cfg.embedding_noise},
                      {"relevance_sharpness", cfg.relevance_sharpness},
                      {"relevance_noise", cfg.relevance_noise},
                      {"seed", cfg.seed}};
    return doc.dump(2) + "\n";
}

namespace {

constexpr std::array<const char*, 6> kCategories{"Science", "History", "Literature", "Fine Arts", "Geography", "Trash"};

Eigen::MatrixXd orthonormal_directions(int count, std::size_t dim, Rng& rng) {
    Eigen::MatrixXd dirs(count, static_cast<Eigen::Index>(dim));
    for (int k = 0; k < count; ++k) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
        // Redraw in the (measure-zero) case the Gram-Schmidt residual vanishes.
        for (;;) {
            for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = rng.normal();
            for (int l = 0; l < k; ++l) v -= v.dot(dirs.row(l).transpose()) * dirs.row(l).transpose();
            if (v.norm() > 1e-6) break;
        }
        dirs.row(k) = v.normalized().transpose();
    }
    return dirs;
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const auto M = static_cast<Eigen::Index>(cfg.m_true);
    const auto N = static_cast<Eigen::Index>(cfg.dim);
    const double tau = cfg.embedding_noise;

    Rng structure_rng(derive_seed(cfg.seed, 10));
    const Eigen::MatrixXd directions = orthonormal_directions(cfg.m_true, cfg.dim, structure_rng);
    const Eigen::MatrixXd centers = cfg.cluster_radius * directions;

    // Questions and their cumulative items; every item of a question shares
    // its cluster.
    SynthData data;
    Rng text_rng(derive_seed(cfg.seed, 11));
    Rng embed_rng(derive_seed(cfg.seed, 12));
    Eigen::MatrixXd embeddings(static_cast<Eigen::Index>(cfg.n_items), N);
    std::vector<std::string> item_ids;
    std::size_t q_index = 0;
    while (data.items.size() < cfg.n_items) {
        const std::size_t remaining = cfg.n_items - data.items.size();
        const auto span = static_cast<std::uint64_t>(cfg.max_clues - cfg.min_clues + 1);
        const auto clues = std::min<std::size_t>(remaining, static_cast<std::size_t>(cfg.min_clues) + text_rng.uniform_index(span));
        const auto cluster = static_cast<int>(text_rng.uniform_index(static_cast<std::uint64_t>(cfg.m_true)));
        Question q;
        q.qid = fmt::format("q{:05d}", ++q_index);
        q.answer = fmt::format("answer {}", q_index);
        q.category = text_rng.bernoulli(0.8) ? kCategories[static_cast<std::size_t>(cluster) % kCategories.size()]
                                             : kCategories[text_rng.uniform_index(kCategories.size())];
        for (std::size_t t = 1; t <= clues; ++t) {
            std::string clue = fmt::format("Clue {} about topic {} for question {}.", t, cluster + 1, q_index);
            // A temporal phrase planted mostly in the first cluster gives the
            // interpretation stage something to find.
            if (text_rng.bernoulli(cluster == 0 ? 0.5 : 0.05)) clue += " It happened in the 19th century.";
            q.clues.push_back(std::move(clue));
        }
        for (auto& item : expand_cumulative_items(q)) {
            const auto row = static_cast<Eigen::Index>(data.items.size());
            for (Eigen::Index c = 0; c < N; ++c) embeddings(row, c) = centers(cluster, c) + tau * embed_rng.normal();
            data.item_cluster.push_back(cluster);
            item_ids.push_back(item.item_id);
            data.items.push_back(std::move(item));
        }
        data.bank.add(std::move(q));
    }
    data.store = EmbeddingStore(item_ids, embeddings);

    Rng param_rng(derive_seed(cfg.seed, 13));
    CaimiraParams& p = data.truth.params;
    p.agent_skills.resize(static_cast<Eigen::Index>(cfg.n_agents), M);
    for (Eigen::Index i = 0; i < p.agent_skills.rows(); ++i) {
        for (Eigen::Index k = 0; k < M; ++k) p.agent_skills(i, k) = cfg.skill_sd * param_rng.normal();
    }
    // Row k of W_R points at cluster k's center, so e . row gives a logit
    // advantage of `relevance_sharpness` at the center.
    p.w_rel = (cfg.relevance_sharpness / cfg.cluster_radius) * directions;
    for (Eigen::Index k = 0; k < M; ++k) {
        for (Eigen::Index c = 0; c < N; ++c) p.w_rel(k, c) += cfg.relevance_noise * param_rng.normal();
    }
    p.b_rel = Eigen::VectorXd::Zero(M);
    // Within-cluster difficulty spread equals difficulty_sd per coordinate.
    const double w_sd = cfg.difficulty_sd / (tau * std::sqrt(static_cast<double>(cfg.dim)));
    p.w_diff.resize(M, N);
    for (Eigen::Index k = 0; k < M; ++k) {
        for (Eigen::Index c = 0; c < N; ++c) p.w_diff(k, c) = w_sd * param_rng.normal();
    }
    p.mean_embedding = data.store.mean();
    p = round_to_float(p);
    for (std::size_t a = 0; a < cfg.n_agents; ++a) data.truth.agent_ids.push_back(fmt::format("agent_{:03d}", a));
    data.truth.item_store_ref = "embeddings";

    // An exact-size random subset of cells, each a Bernoulli draw at the
    // generating probability.
    const Eigen::MatrixXd prob = predict_all(p, compute_all_characteristics(p, data.store));
    const std::uint64_t cells = static_cast<std::uint64_t>(cfg.n_agents) * cfg.n_items;
    const auto wanted = static_cast<std::uint64_t>(std::llround(cfg.density * static_cast<double>(cells)));
    const std::uint64_t take = std::clamp<std::uint64_t>(wanted, 1, cells);
    std::vector<std::uint64_t> pool(cells);
    std::iota(pool.begin(), pool.end(), 0);
    Rng response_rng(derive_seed(cfg.seed, 14));
    for (std::uint64_t i = 0; i < take; ++i) {
        const auto j = i + response_rng.uniform_index(cells - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    data.matrix = ResponseMatrix(data.truth.agent_ids, item_ids);
    for (const auto cell : pool) {
        const auto a = static_cast<std::size_t>(cell / cfg.n_items);
        const auto j = static_cast<std::size_t>(cell % cfg.n_items);
        const bool correct = response_rng.bernoulli(prob(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)));
        data.matrix.set(a, j, {static_cast<std::uint8_t>(correct ? 1 : 0), Origin::Observed});
    }
    return data;
}

std::vector<std::filesystem::path> write_synthetic(const SynthData& data, const SynthConfig& cfg,
                                                   const std::filesystem::path& out_dir) {
    ensure_directory(out_dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        write_text_file(out_dir / name, content);
        written.push_back(out_dir / name);
    };
    std::ostringstream bank, items, responses;
    write_question_bank(bank, data.bank);
    write_items(items, data.items);
    write_response_csv(responses, data.matrix);
    emit("bank.jsonl", bank.str());
    emit("items.jsonl", items.str());
    emit("responses.csv", responses.str());
    emit("synth_config.json", synth_config_to_json(cfg));
    save_embedding_store(data.store, out_dir / "embeddings");
    written.push_back(out_dir / "embeddings.json");
    written.push_back(out_dir / "embeddings.bin");
    save_checkpoint(data.truth, out_dir / "truth");
    written.push_back(out_dir / "truth.json");
    written.push_back(out_dir / "truth.bin");
    return written;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractError("pearson needs equal-length inputs");
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

namespace {

double column_r(const Eigen::MatrixXd& a, Eigen::Index ca, const Eigen::MatrixXd& b, Eigen::Index cb) {
    const Eigen::VectorXd x = a.col(ca), y = b.col(cb);
    return pearson(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                   std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

}  // namespace

std::vector<std::size_t> align_dimensions(const CaimiraParams& truth, const CaimiraParams& est,
                                          const EmbeddingStore& store) {
    const std::size_t m = truth.dims();
    if (est.dims() != m) throw ContractError("alignment needs equal dimension counts");
    const Eigen::MatrixXd eff_true = effective_difficulty(compute_all_characteristics(truth, store));
    const Eigen::MatrixXd eff_est = effective_difficulty(compute_all_characteristics(est, store));
    Eigen::MatrixXd score(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (Eigen::Index k = 0; k < score.rows(); ++k) {
        for (Eigen::Index l = 0; l < score.cols(); ++l) {
            const double r = column_r(eff_true, k, eff_est, l);
            score(k, l) = std::isnan(r) ? 0.0 : r;
        }
    }
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    if (m <= 6) {
        std::vector<std::size_t> best = perm;
        double best_total = -std::numeric_limits<double>::infinity();
        do {
            double total = 0.0;
            for (std::size_t k = 0; k < m; ++k) total += score(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(perm[k]));
            if (total > best_total) {
                best_total = total;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    // Greedy: repeatedly take the highest remaining (true, est) pair.
    std::vector<bool> used_true(m, false), used_est(m, false);
    for (std::size_t step = 0; step < m; ++step) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t bk = 0, bl = 0;
        for (std::size_t k = 0; k < m; ++k) {
            if (used_true[k]) continue;
            for (std::size_t l = 0; l < m; ++l) {
                if (used_est[l]) continue;
                const double s = score(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
                if (s > best) {
                    best = s;
                    bk = k;
                    bl = l;
                }
            }
        }
        used_true[bk] = used_est[bl] = true;
        perm[bk] = bl;
    }
    return perm;
}

RecoveryReport recovery_metrics(const Checkpoint& truth, const Checkpoint& est, std::span<const std::size_t> perm,
                                const EmbeddingStore& store, const ResponseMatrix* observed) {
    const std::size_t m = truth.params.dims();
    if (est.params.dims() != m || perm.size() != m) throw ContractError("permutation does not match dimensions");
    const CaimiraParams aligned = permute_dimensions(est.params, perm);

    std::vector<std::size_t> est_row(truth.agent_ids.size());
    {
        std::map<std::string, std::size_t> lookup;
        for (std::size_t a = 0; a < est.agent_ids.size(); ++a) lookup[est.agent_ids[a]] = a;
        for (std::size_t a = 0; a < truth.agent_ids.size(); ++a) {
            auto it = lookup.find(truth.agent_ids[a]);
            if (it == lookup.end()) throw ContractError("estimate lacks agent " + truth.agent_ids[a]);
            est_row[a] = it->second;
        }
    }

    RecoveryReport report;
    report.permutation.assign(perm.begin(), perm.end());
    const ItemCharacteristics ct = compute_all_characteristics(truth.params, store);
    const ItemCharacteristics ce = compute_all_characteristics(aligned, store);
    const Eigen::MatrixXd et = effective_difficulty(ct), ee = effective_difficulty(ce);
    Eigen::MatrixXd est_skills(truth.params.agent_skills.rows(), static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < est_row.size(); ++a) {
        est_skills.row(static_cast<Eigen::Index>(a)) = aligned.agent_skills.row(static_cast<Eigen::Index>(est_row[a]));
    }
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k) {
        report.skill_r.push_back(column_r(truth.params.agent_skills, k, est_skills, k));
        report.difficulty_r.push_back(column_r(ct.difficulty, k, ce.difficulty, k));
        report.relevance_r.push_back(column_r(ct.relevance, k, ce.relevance, k));
        report.effective_r.push_back(column_r(et, k, ee, k));
    }

    const Eigen::MatrixXd pt = predict_all(truth.params, ct);
    const Eigen::MatrixXd pe = predict_all(aligned, ce);
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < truth.agent_ids.size(); ++a) {
        std::optional<std::size_t> obs_agent;
        if (observed) obs_agent = observed->agent_index(truth.agent_ids[a]);
        for (std::size_t j = 0; j < store.size(); ++j) {
            if (obs_agent) {
                const auto obs_item = observed->item_index(store.ids()[j]);
                if (obs_item && observed->get(*obs_agent, *obs_item)) continue;
            }
            const double diff = pt(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) -
                                pe(static_cast<Eigen::Index>(est_row[a]), static_cast<Eigen::Index>(j));
            sq += diff * diff;
            ++count;
        }
    }
    report.heldout_pairs = count;
    report.heldout_rmse = count ? std::sqrt(sq / static_cast<double>(count)) : std::numeric_limits<double>::quiet_NaN();
    return report;
}

std::string recovery_report_json(const RecoveryReport& report) {
    auto reals = [](const std::vector<double>& v) {
        json arr = json::array();
        for (double x : v) arr.push_back(std::isnan(x) ? json(nullptr) : json(x));
        return arr;
    };
    const json doc = {{"permutation", report.permutation},
                      {"skill_r", reals(report.skill_r)},
                      {"difficulty_r", reals(report.difficulty_r)},
                      {"relevance_r", reals(report.relevance_r)},
                      {"effective_difficulty_r", reals(report.effective_r)},
                      {"heldout_rmse", report.heldout_rmse},
                      {"heldout_pairs", report.heldout_pairs}};
    return doc.dump(2) + "\n";
}

}  // namespace caimira
