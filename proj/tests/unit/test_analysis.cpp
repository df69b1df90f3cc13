#include <doctest.h>

#include <cmath>
#include <numeric>

#include "caimira/analysis.hpp"
#include "caimira/dataset.hpp"
#include "caimira/embeddings.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

using namespace caimira;

namespace {

ItemCharacteristics random_chars(std::size_t items, int m, Rng& rng) {
    ItemCharacteristics c;
    c.relevance.resize(static_cast<Eigen::Index>(items), m);
    c.difficulty.resize(static_cast<Eigen::Index>(items), m);
    for (Eigen::Index j = 0; j < c.relevance.rows(); ++j) {
        double sum = 0;
        for (int k = 0; k < m; ++k) sum += (c.relevance(j, k) = rng.uniform01() + 1e-3);
        c.relevance.row(j) /= sum;
        for (int k = 0; k < m; ++k) c.difficulty(j, k) = rng.normal();
    }
    return c;
}

Eigen::MatrixXd blobs(std::size_t per, std::vector<std::size_t>& truth, Rng& rng) {
    const double centers[3][2] = {{0, 0}, {1.5, 0}, {0, 1.5}};
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(3 * per), 2);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < per; ++i) {
            const auto r = static_cast<Eigen::Index>(c * per + i);
            pts(r, 0) = centers[c][0] + 0.01 * rng.normal();
            pts(r, 1) = centers[c][1] + 0.01 * rng.normal();
            truth.push_back(c);
        }
    return pts;
}

}  // namespace

TEST_CASE("effective difficulty arithmetic") {
    ItemCharacteristics c;
    c.relevance = Eigen::MatrixXd::Constant(1, 3, 1.0 / 3.0);
    c.difficulty = Eigen::MatrixXd::Zero(1, 3);
    c.difficulty(0, 0) = 3;
    const auto eff = effective_difficulty(c);
    CHECK(eff(0, 0) == doctest::Approx(1.0));
    CHECK(eff(0, 1) == 0.0);
    c.difficulty.setZero();
    CHECK(effective_difficulty(c).norm() == 0.0);
}

TEST_CASE("relevance-weighted cluster difficulty matches direct sums") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = random_chars(40, 4, rng);
        std::vector<std::size_t> members;
        for (std::size_t j = 0; j < 40; ++j)
            if (rng.bernoulli(0.4)) members.push_back(j);
        if (members.empty()) members.push_back(0);
        const auto got = mean_effective_difficulty(members, c);
        for (int k = 0; k < 4; ++k) {
            double num = 0, den = 0;
            for (auto j : members) {
                num += c.relevance(static_cast<Eigen::Index>(j), k) * c.difficulty(static_cast<Eigen::Index>(j), k);
                den += c.relevance(static_cast<Eigen::Index>(j), k);
            }
            CHECK(std::abs(got(k) - num / den) <= 1e-9);
        }
    }
}

TEST_CASE("cluster difficulty special cases") {
    Rng rng(2);
    auto c = random_chars(3, 2, rng);
    const std::vector<std::size_t> one{1};
    const auto single = mean_effective_difficulty(one, c);
    CHECK(single(0) == doctest::Approx(c.difficulty(1, 0)));
    c.relevance.row(0) << 0.5, 0.5;
    c.relevance.row(2) << 0.5, 0.5;
    const std::vector<std::size_t> two{0, 2};
    CHECK(mean_effective_difficulty(two, c)(1) == doctest::Approx((c.difficulty(0, 1) + c.difficulty(2, 1)) / 2));
    c.relevance.row(1) << 1.0, 0.0;
    CHECK(std::isnan(mean_effective_difficulty(one, c)(1)));
}

TEST_CASE("kmeans k = 1 and k = n") {
    Rng rng(3);
    Eigen::MatrixXd pts(12, 3);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
    const auto one = kmeans_cluster(pts, 1, 0);
    for (auto a : one.assignments) CHECK(a == 0);
    CHECK((one.centroids.row(0) - pts.colwise().mean()).norm() < 1e-12);
    const auto all = kmeans_cluster(pts, 12, 0);
    CHECK(all.wcss == doctest::Approx(0.0));
    std::vector<std::size_t> sorted = all.assignments;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 12; ++i) CHECK(sorted[i] == i);
    CHECK_THROWS_AS(kmeans_cluster(pts, 13, 0), ConfigError);
}

TEST_CASE("kmeans recovers planted blobs") {
    Rng rng(4);
    std::vector<std::size_t> truth;
    const auto pts = blobs(100, truth, rng);
    const auto result = kmeans_cluster(pts, 3, 9);
    CHECK(adjusted_rand_index(result.assignments, truth) >= 0.99);
}

TEST_CASE("kmeans objective never increases") {
    Rng rng(5);
    Eigen::MatrixXd pts(300, 4);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
    KMeansOptions options;
    options.record_trace = true;
    const auto result = kmeans_cluster(pts, 6, 2, options);
    REQUIRE(result.traces.size() == 10);
    for (const auto& trace : result.traces)
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
}

TEST_CASE("kmeans partition ignores row order and thread count") {
    Rng rng(6);
    Eigen::MatrixXd pts(80, 3);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
    std::vector<Eigen::Index> order(80);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Eigen::MatrixXd shuffled(80, 3);
    for (Eigen::Index i = 0; i < 80; ++i) shuffled.row(i) = pts.row(order[static_cast<std::size_t>(i)]);
    const auto a = kmeans_cluster(pts, 5, 1);
    const auto b = kmeans_cluster(shuffled, 5, 1);
    std::vector<std::size_t> b_back(80);
    for (Eigen::Index i = 0; i < 80; ++i) b_back[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = b.assignments[static_cast<std::size_t>(i)];
    CHECK(b_back == a.assignments);
    KMeansOptions threaded;
    threaded.threads = 3;
    CHECK(kmeans_cluster(pts, 5, 1, threaded).assignments == a.assignments);
}

TEST_CASE("adjusted rand index") {
    const std::vector<std::size_t> a{0, 0, 1, 1, 2, 2}, relabeled{2, 2, 0, 0, 1, 1}, one{0, 0, 0, 0, 0, 0};
    CHECK(adjusted_rand_index(a, relabeled) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index(a, one) == doctest::Approx(0.0));
}

TEST_CASE("cluster report ranks by difficulty") {
    ItemCharacteristics c;
    c.relevance = Eigen::MatrixXd::Constant(4, 1, 1.0);
    c.difficulty.resize(4, 1);
    c.difficulty << 2, 2, -1, -1;
    const std::vector<std::size_t> assign{0, 0, 1, 1};
    const auto report = build_cluster_report(c, assign, 2, {{1, "easy"}});
    REQUIRE(report.clusters.size() == 2);
    CHECK(report.clusters[0].difficulty_rank == 1);
    CHECK(report.clusters[1].difficulty_rank == 0);
    CHECK(report.clusters[1].label == "easy");
    CHECK(report.clusters[0].overall_difficulty == doctest::Approx(2.0));
}

TEST_CASE("accuracy slices recount entries") {
    ResponseMatrix m({"a", "b"}, {"i1", "i2", "i3", "i4"});
    m.set(0, 0, {1, Origin::Observed});
    m.set(0, 1, {1, Origin::Observed});
    m.set(0, 2, {0, Origin::Observed});
    m.set(1, 3, {1, Origin::Observed});
    const std::map<std::string, std::size_t> clusters{{"i1", 0}, {"i2", 0}, {"i3", 0}, {"i4", 1}};
    const auto cells = accuracy_slices(m, clusters, 2, {{"a", "human"}, {"b", "human"}});
    auto find = [&](const std::string& scope, const std::string& name, std::optional<std::size_t> k) {
        for (const auto& c : cells)
            if (c.scope == scope && c.name == name && c.cluster == k) return c;
        FAIL("missing cell");
        return AccuracyCell{};
    };
    CHECK(*find("agent", "a", 0).accuracy() == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(find("agent", "a", 1).accuracy());
    CHECK(find("agent", "b", std::nullopt).answered == 1);
    const auto human = find("type", "human", std::nullopt);
    CHECK(human.correct == 3);
    CHECK(human.answered == 4);
}

TEST_CASE("reports on a toy model") {
    Rng rng(7);
    Eigen::MatrixXd e(2, 3);
    for (int i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
    const EmbeddingStore store({"x_1", "y_1"}, e);
    Checkpoint ck;
    ck.params.agent_skills = Eigen::MatrixXd::Random(2, 2);
    ck.params.w_rel = Eigen::MatrixXd::Random(2, 3);
    ck.params.b_rel = Eigen::VectorXd::Zero(2);
    ck.params.w_diff = Eigen::MatrixXd::Random(2, 3);
    ck.params.mean_embedding = store.mean();
    ck.agent_ids = {"a", "b"};
    ResponseMatrix m({"a", "b"}, {"x_1", "y_1"});
    m.set(0, 0, {1, Origin::Observed});
    const auto dir = std::filesystem::temp_directory_path() / "caimira_reports_test";
    std::filesystem::remove_all(dir);
    ReportOptions options;
    options.k = 2;
    const auto files = emit_reports(ck, store, m, dir, options);
    CHECK(files.written.size() >= 6);
    for (const auto& f : files.written) {
        CHECK(std::filesystem::is_regular_file(f));
        if (f.extension() == ".csv") CHECK(read_csv_file(f).rows.size() >= 1);
    }
    std::filesystem::remove_all(dir);
}
