#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "caimira/error.hpp"
#include "caimira/synth.hpp"
#include "caimira/util.hpp"

using namespace caimira;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
}

std::vector<std::size_t> exhaustive_alignment(const CaimiraParams& truth, const CaimiraParams& est, const EmbeddingStore& store) {
    const auto t = compute_all_characteristics(truth, store);
    const auto e = compute_all_characteristics(est, store);
    const Eigen::MatrixXd te = t.relevance.cwiseProduct(t.difficulty), ee = e.relevance.cwiseProduct(e.difficulty);
    std::vector<std::size_t> perm(static_cast<std::size_t>(te.cols())), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_score = -1e300;
    do {
        double score = 0;
        for (std::size_t k = 0; k < perm.size(); ++k) {
            const Eigen::VectorXd a = te.col(static_cast<Eigen::Index>(k)), b = ee.col(static_cast<Eigen::Index>(perm[k]));
            score += pearson({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())});
        }
        if (score > best_score) {
            best_score = score;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("full density counts every pair") {
    SynthConfig cfg;
    cfg.n_agents = 2;
    cfg.n_items = 3;
    cfg.density = 1.0;
    cfg.dim = 4;
    const auto data = generate_synthetic(cfg);
    CHECK(data.matrix.entry_count() == 6);
    CHECK(data.store.size() == 3);
}

TEST_CASE("same seed, same data") {
    SynthConfig cfg;
    cfg.n_agents = 10;
    cfg.n_items = 100;
    cfg.dim = 6;
    cfg.seed = 4;
    const auto a = generate_synthetic(cfg), b = generate_synthetic(cfg);
    CHECK(a.matrix == b.matrix);
    CHECK(a.store.matrix() == b.store.matrix());
    CHECK(a.truth.params == b.truth.params);
    cfg.seed = 5;
    CHECK_FALSE(generate_synthetic(cfg).matrix == a.matrix);
}

TEST_CASE("config validation and json") {
    SynthConfig cfg;
    cfg.density = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    const auto parsed = synth_config_from_json(R"({"n_agents": 7, "n": 5, "seed": 3})");
    CHECK(parsed.n_agents == 7);
    CHECK(parsed.dim == 5);
    CHECK(parsed.seed == 3);
    CHECK_THROWS_AS(synth_config_from_json(R"({"bogus": 1})"), ConfigError);
    const auto back = synth_config_from_json(synth_config_to_json(parsed));
    CHECK(back.n_agents == 7);
    CHECK(back.dim == 5);
}

TEST_CASE("observed correctness tracks generating probabilities") {
    SynthConfig cfg;
    cfg.seed = 2;
    const auto data = generate_synthetic(cfg);
    const auto probs = predict_all(data.truth.params, compute_all_characteristics(data.truth.params, data.store));
    double observed = 0, expected = 0;
    for (const auto& [key, entry] : data.matrix.entries()) {
        const auto row = *data.store.index_of(data.matrix.items()[key.second]);
        observed += entry.value;
        expected += probs(static_cast<Eigen::Index>(key.first), static_cast<Eigen::Index>(row));
    }
    const auto n = static_cast<double>(data.matrix.entry_count());
    CHECK(std::abs(observed / n - expected / n) <= 0.01);
}

TEST_CASE("response rate follows mean latent score") {
    SynthConfig cfg;
    cfg.density = 1.0;
    cfg.n_items = 1000;
    cfg.seed = 3;
    const auto data = generate_synthetic(cfg);
    const auto& p = data.truth.params;
    const auto chars = compute_all_characteristics(p, data.store);
    std::vector<double> rate(cfg.n_agents, 0), latent(cfg.n_agents, 0);
    for (const auto& [key, entry] : data.matrix.entries()) rate[key.first] += entry.value;
    for (std::size_t i = 0; i < cfg.n_agents; ++i)
        for (Eigen::Index j = 0; j < chars.relevance.rows(); ++j)
            latent[i] += (p.agent_skills.row(static_cast<Eigen::Index>(i)) - chars.difficulty.row(j)).dot(chars.relevance.row(j));
    const auto ra = ranks(rate), rl = ranks(latent);
    CHECK(pearson(ra, rl) > 0.95);
}

TEST_CASE("alignment finds the permutation") {
    SynthConfig cfg;
    cfg.m_true = 3;
    cfg.n_items = 600;
    cfg.seed = 6;
    const auto data = generate_synthetic(cfg);
    const auto& truth = data.truth.params;
    const auto identity = align_dimensions(truth, truth, data.store);
    CHECK(identity == std::vector<std::size_t>{0, 1, 2});
    const std::vector<std::size_t> swap{1, 0, 2};
    CHECK(align_dimensions(truth, permute_dimensions(truth, swap), data.store) == swap);

    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::size_t> perm{0, 1, 2};
        rng.shuffle(perm);
        CaimiraParams noisy = permute_dimensions(truth, perm);
        for (int i = 0; i < noisy.w_diff.size(); ++i) noisy.w_diff.data()[i] += 0.3 * rng.normal();
        for (int i = 0; i < noisy.w_rel.size(); ++i) noisy.w_rel.data()[i] += 0.3 * rng.normal();
        const auto got = align_dimensions(truth, noisy, data.store);
        CHECK(got == exhaustive_alignment(truth, noisy, data.store));
        std::vector<std::size_t> sorted = got;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == std::vector<std::size_t>{0, 1, 2});
    }
}

TEST_CASE("recovery metrics of the truth and of noise") {
    SynthConfig cfg;
    cfg.seed = 8;
    const auto data = generate_synthetic(cfg);
    const std::vector<std::size_t> identity{0, 1};
    const auto self = recovery_metrics(data.truth, data.truth, identity, data.store, &data.matrix);
    for (double r : self.skill_r) CHECK(r == doctest::Approx(1.0));
    for (double r : self.effective_r) CHECK(r == doctest::Approx(1.0));
    CHECK(self.heldout_rmse == doctest::Approx(0.0));
    CHECK(self.heldout_pairs > 0);

    Checkpoint random = data.truth;
    Rng rng(9);
    for (auto* m : {&random.params.agent_skills, &random.params.w_rel, &random.params.w_diff})
        for (int i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
    const auto noise = recovery_metrics(data.truth, random, identity, data.store);
    // Item quantities of any linear map share the cluster structure of the
    // embeddings, so only skills are independent of the truth.
    for (double r : noise.skill_r) CHECK(std::abs(r) < 0.3);
    CHECK(noise.heldout_pairs == cfg.n_agents * cfg.n_items);
    CHECK(recovery_report_json(self).find("skill_r") != std::string::npos);
}

TEST_CASE("synthetic outputs round trip through file formats") {
    SynthConfig cfg;
    cfg.n_agents = 5;
    cfg.n_items = 40;
    cfg.dim = 4;
    const auto data = generate_synthetic(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "caimira_synth_test";
    std::filesystem::remove_all(dir);
    write_synthetic(data, cfg, dir);
    const auto back = load_response_csv(dir / "responses.csv");
    CHECK(back.entry_count() == data.matrix.entry_count());
    for (const auto& [key, entry] : data.matrix.entries()) {
        const auto got = back.get(*back.agent_index(data.matrix.agents()[key.first]), *back.item_index(data.matrix.items()[key.second]));
        REQUIRE(got);
        CHECK(*got == entry);
    }
    CHECK(load_embedding_store(dir / "embeddings").matrix() == data.store.matrix());
    CHECK(load_checkpoint(dir / "truth").params == data.truth.params);
    CHECK(load_question_bank(dir / "bank.jsonl").size() == data.bank.size());
    std::vector<std::string> ids;
    for (const auto& item : expand_bank(load_question_bank(dir / "bank.jsonl"))) ids.push_back(item.item_id);
    CHECK(ids == data.store.ids());
    std::filesystem::remove_all(dir);
}
