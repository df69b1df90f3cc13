#include <doctest.h>

#include <cmath>
#include <vector>

#include "caimira/embeddings.hpp"
#include "caimira/error.hpp"
#include "caimira/irt.hpp"
#include "caimira/util.hpp"

using namespace caimira;

namespace {

CaimiraParams random_params(std::size_t agents, int m, std::size_t n, Rng& rng, const EmbeddingStore& store) {
    CaimiraParams p;
    p.agent_skills.resize(static_cast<Eigen::Index>(agents), m);
    p.w_rel.resize(m, static_cast<Eigen::Index>(n));
    p.b_rel.resize(m);
    p.w_diff.resize(m, static_cast<Eigen::Index>(n));
    for (int i = 0; i < p.agent_skills.size(); ++i) p.agent_skills.data()[i] = rng.normal();
    for (int i = 0; i < p.w_rel.size(); ++i) p.w_rel.data()[i] = rng.normal();
    for (int i = 0; i < p.b_rel.size(); ++i) p.b_rel.data()[i] = rng.normal();
    for (int i = 0; i < p.w_diff.size(); ++i) p.w_diff.data()[i] = rng.normal();
    p.mean_embedding = store.mean();
    return p;
}

EmbeddingStore random_store(std::size_t items, std::size_t n, Rng& rng) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(items), static_cast<Eigen::Index>(n));
    std::vector<std::string> ids;
    for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    for (std::size_t j = 0; j < items; ++j) ids.push_back("i" + std::to_string(j));
    return EmbeddingStore(ids, m);
}

// Scalar loops over the raw parameters.
double naive_predict(const CaimiraParams& p, std::size_t agent, const Eigen::VectorXd& e) {
    const auto m = static_cast<std::size_t>(p.w_rel.rows());
    const auto n = static_cast<std::size_t>(p.w_rel.cols());
    std::vector<double> logits(m), diff(m);
    double maxl = -1e300;
    for (std::size_t k = 0; k < m; ++k) {
        double l = p.b_rel(k), d = 0;
        for (std::size_t c = 0; c < n; ++c) {
            l += p.w_rel(k, c) * e(c);
            d += p.w_diff(k, c) * (e(c) - p.mean_embedding(c));
        }
        logits[k] = l;
        diff[k] = d;
        maxl = std::max(maxl, l);
    }
    double z = 0;
    for (auto& l : logits) z += std::exp(l - maxl);
    double x = 0;
    for (std::size_t k = 0; k < m; ++k) x += std::exp(logits[k] - maxl) / z * (p.agent_skills(agent, k) - diff[k]);
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

TEST_CASE("unidimensional predictor") {
    CHECK(irt1d_predict(0.3, 0.3) == 0.5);
    CHECK(irt1d_predict(std::log(3.0), 0.0) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("mirt predictor") {
    const std::vector<double> zero{0.0, 0.0};
    CHECK(mirt_predict(zero, 0.0, zero) == 0.5);
    const std::vector<double> theta{0.7}, ld{0.0};
    CHECK(mirt_predict(theta, 0.2, ld) == doctest::Approx(irt1d_predict(0.7, 0.2)).epsilon(1e-15));
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(mirt_predict(three, 0.0, ld), ContractError);
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> th(4), dl(4);
        double dot = 0;
        for (int k = 0; k < 4; ++k) {
            th[k] = rng.normal();
            dl[k] = rng.normal() * 0.3;
            dot += th[k] * std::exp(dl[k]);
        }
        const double d = rng.normal();
        CHECK(mirt_predict(th, d, dl) == doctest::Approx(1.0 / (1.0 + std::exp(-(dot - d)))).epsilon(1e-12));
    }
}

TEST_CASE("relevance lies on the simplex") {
    Rng rng(1);
    const auto store = random_store(5, 4, rng);
    auto p = random_params(2, 3, 4, rng, store);
    p.w_rel.setZero();
    p.b_rel.setZero();
    const auto r = compute_relevance(p, store.row(0));
    for (int k = 0; k < 3; ++k) CHECK(r(k) == doctest::Approx(1.0 / 3.0));
    const auto p1 = random_params(2, 1, 4, rng, store);
    CHECK(compute_relevance(p1, store.row(3))(0) == 1.0);
}

TEST_CASE("difficulty is centered") {
    Rng rng(2);
    const auto store = random_store(200, 6, rng);
    const auto p = random_params(3, 4, 6, rng, store);
    CHECK(compute_difficulty(p, store.mean()).norm() == 0.0);
    const auto chars = compute_all_characteristics(p, store);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(chars.difficulty.col(k).mean()) < 1e-6);
}

TEST_CASE("zero latent score gives one half") {
    Rng rng(3);
    const auto store = random_store(10, 4, rng);
    auto p = random_params(1, 3, 4, rng, store);
    const Eigen::VectorXd e = store.row(2);
    p.agent_skills.row(0) = compute_difficulty(p, e).transpose();
    CHECK(caimira_predict(p, 0, e) == doctest::Approx(0.5).epsilon(1e-12));
    p.agent_skills.setZero();
    CHECK(latent_scores(p, 0, p.mean_embedding).norm() == 0.0);
    CHECK_THROWS_AS(caimira_predict(p, 5, e), ContractError);
}

TEST_CASE("prediction matches scalar oracle") {
    Rng rng(8);
    const auto store = random_store(30, 8, rng);
    const auto p = random_params(6, 3, 8, rng, store);
    const auto probs = predict_all(p, compute_all_characteristics(p, store));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 30; ++j) {
            const double oracle = naive_predict(p, i, store.row(j));
            CHECK(std::abs(caimira_predict(p, i, store.row(j)) - oracle) <= 1e-12);
            CHECK(std::abs(probs(i, j) - oracle) <= 1e-12);
        }
}

TEST_CASE("permuting dimensions leaves predictions unchanged") {
    Rng rng(9);
    const auto store = random_store(20, 5, rng);
    const auto p = random_params(4, 3, 5, rng, store);
    const std::vector<std::size_t> perm{2, 0, 1};
    const auto q = permute_dimensions(p, perm);
    for (std::size_t j = 0; j < 20; ++j) CHECK(std::abs(caimira_predict(p, 1, store.row(j)) - caimira_predict(q, 1, store.row(j))) <= 1e-12);
    CHECK(q.agent_skills(0, 0) == p.agent_skills(0, 2));
}

TEST_CASE("m = 1 reduces to unidimensional IRT") {
    Rng rng(10);
    const auto store = random_store(25, 4, rng);
    const auto p = random_params(3, 1, 4, rng, store);
    const auto irt = reduce_to_irt1d(p, store);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 25; ++j)
            CHECK(std::abs(caimira_predict(p, i, store.row(j)) - irt1d_predict(irt.skills(i), irt.difficulties(j))) <= 1e-12);
}

TEST_CASE("checkpoint round trip is bitwise") {
    Rng rng(11);
    const auto store = random_store(10, 4, rng);
    Checkpoint ck{round_to_float(random_params(3, 2, 4, rng, store)), {"a", "b", "c"}, "emb"};
    const auto dir = std::filesystem::temp_directory_path() / "caimira_ckpt_test";
    ensure_directory(dir);
    save_checkpoint(ck, dir / "model");
    const auto back = load_checkpoint(dir / "model");
    CHECK(back.params == ck.params);
    CHECK(back.agent_ids == ck.agent_ids);
    CHECK(back.item_store_ref == "emb");
    std::filesystem::remove_all(dir);
}

TEST_CASE("validate catches bad shapes") {
    Rng rng(12);
    const auto store = random_store(4, 3, rng);
    auto p = random_params(2, 2, 3, rng, store);
    p.validate();
    p.b_rel.resize(3);
    CHECK_THROWS_AS(p.validate(), ContractError);
}
