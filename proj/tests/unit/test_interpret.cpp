#include <doctest.h>

#include <cmath>

#include "caimira/dataset.hpp"
#include "caimira/error.hpp"
#include "caimira/interpret.hpp"
#include "caimira/util.hpp"

using namespace caimira;

namespace {

Question question(const std::string& category) {
    Question q;
    q.qid = "q1";
    q.clues = {"clue"};
    q.answer = "x";
    q.category = category;
    return q;
}

Item item(const std::string& text, int clues = 1) { return Item{"q1_1", "q1", clues, text}; }

double sigmoid_of(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("category one-hot") {
    const auto f = extract_features(item("text"), question("Music"), nullptr, FeaturePatterns::defaults());
    CHECK(f.categorical.at("c_music") == 1);
    for (const auto& [name, v] : f.categorical)
        if (name != "c_music") CHECK(v == 0);
}

TEST_CASE("temporal flags") {
    const auto patterns = FeaturePatterns::defaults();
    const auto hit = extract_features(item("This war began in the 20th century."), question("History"), nullptr, patterns);
    CHECK(hit.temporal.at("t_range") == 1);
    const auto miss = extract_features(item("This composer wrote an opera."), question("Music"), nullptr, patterns);
    for (const auto& [name, v] : miss.temporal) CHECK(v == 0);
    const auto event = extract_features(item("He fled after the fall of Rome."), question("History"), nullptr, patterns);
    CHECK(event.temporal.at("t_event") == 1);
    const auto record = extract_features(item("It is the best-selling album of all time."), question("Music"), nullptr, patterns);
    CHECK(record.other.at("o_Records") == 1);
    CHECK(extract_features(item("x"), question("Trash"), nullptr, patterns).other.at("o_TRASH") == 1);
}

TEST_CASE("shipped pattern file matches defaults") {
    const auto loaded = load_feature_patterns(std::filesystem::path(CAIMIRA_CONFIG_DIR) / "feature_patterns.json");
    const auto defaults = FeaturePatterns::defaults();
    CHECK(loaded.t_range == defaults.t_range);
    CHECK(loaded.t_event == defaults.t_event);
    CHECK(loaded.o_records == defaults.o_records);
}

TEST_CASE("external features and missing rows") {
    ExternalFeatures ext;
    ext.columns = {"wiki_match_score"};
    ext.rows["q1_1"] = {0.7};
    const auto patterns = FeaturePatterns::defaults();
    const auto present = extract_features(item("a", 3), question("Science"), &ext, patterns);
    CHECK(present.numeric.at("wiki_match_score") == 0.7);
    CHECK(present.numeric.at("clue_count") == 3.0);
    Item other{"q2_1", "q2", 1, "b"};
    const auto absent = extract_features(other, question("Science"), &ext, patterns);
    CHECK(absent.missing.count("wiki_match_score") == 1);
}

TEST_CASE("standardization") {
    FeatureTable t;
    t.item_ids = {"a", "b", "c"};
    t.names = {"flag", "num", "const", "gappy"};
    t.binary = {true, false, false, false};
    t.values.resize(3, 4);
    t.values << 1, 1, 5, 2,
                0, 3, 5, std::nan(""),
                1, 2, 5, 4;
    const auto s = standardize(t);
    REQUIRE(s.names == std::vector<std::string>{"flag", "num", "gappy"});
    CHECK(s.dropped == std::vector<std::string>{"const"});
    REQUIRE(!s.warnings.empty());
    CHECK(s.warnings[0].find("const") != std::string::npos);
    CHECK(s.values(0, 0) == 1.0);
    CHECK(s.values(1, 0) == 0.0);
    for (Eigen::Index c = 1; c < 3; ++c) {
        const double mean = s.values.col(c).mean();
        const double var = (s.values.col(c).array() - mean).square().mean();
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(var - 1.0) <= 1e-9);
    }
    // Imputed cell sits at the column mean, i.e. zero.
    CHECK(s.values(1, 2) == doctest::Approx(0.0));

    FeatureTable two;
    two.item_ids = {"a", "b"};
    two.names = {"x"};
    two.binary = {false};
    two.values.resize(2, 1);
    two.values << 1, 3;
    const auto s2 = standardize(two);
    CHECK(s2.values(0, 0) == doctest::Approx(-1.0));
    CHECK(s2.values(1, 0) == doctest::Approx(1.0));

    FeatureTable again = two;
    again.values = s2.values;
    CHECK((standardize(again).values - s2.values).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("relevance labels use a strict threshold") {
    ItemCharacteristics c;
    c.relevance.resize(3, 2);
    c.relevance << 0.61, 0.39, 0.6, 0.4, 0.2, 0.8;
    c.difficulty = Eigen::MatrixXd::Zero(3, 2);
    CHECK(relevance_labels(c, 0) == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(relevance_labels(c, 1) == std::vector<std::uint8_t>{0, 0, 1});
    std::size_t prev = 4;
    for (double th : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const auto l = relevance_labels(c, 1, th);
        const auto count = static_cast<std::size_t>(std::count(l.begin(), l.end(), 1));
        CHECK(count <= prev);
        prev = count;
    }
    ItemCharacteristics one;
    one.relevance = Eigen::MatrixXd::Ones(4, 1);
    one.difficulty = Eigen::MatrixXd::Zero(4, 1);
    CHECK(relevance_labels(one, 0) == std::vector<std::uint8_t>{1, 1, 1, 1});
}

TEST_CASE("separable toy") {
    Eigen::MatrixXd X(4, 1);
    X << -1, -1, 1, 1;
    const auto r = fit_logreg_balanced(X, {0, 0, 1, 1});
    CHECK(r.coefficients(0) > 0);
    CHECK(r.balanced_accuracy == 1.0);
}

TEST_CASE("single class is a fit error") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
    CHECK_THROWS_WITH_AS(fit_logreg_balanced(X, {0, 0, 0}), doctest::Contains("no positive examples"), FitError);
    CHECK_THROWS_WITH_AS(fit_logreg_balanced(X, {1, 1, 1}), doctest::Contains("no negative examples"), FitError);
}

TEST_CASE("planted model is recovered") {
    Rng rng(12);
    const int n = 5000;
    Eigen::MatrixXd X(n, 2);
    std::vector<std::uint8_t> y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        y[static_cast<std::size_t>(i)] = rng.bernoulli(sigmoid_of(2 * X(i, 0) - X(i, 1) - 1.0));
    }
    const auto r = wald_significance(fit_logreg_balanced(X, y), X, y, balanced_weights(y));
    CHECK(r.converged);
    CHECK(r.coefficients(0) == doctest::Approx(2.0).epsilon(0.2));
    CHECK(r.coefficients(1) == doctest::Approx(-1.0).epsilon(0.2));
    CHECK(r.p_values(0) < 1e-6);
    CHECK(r.p_values(1) < 1e-6);
}

TEST_CASE("null data gives chance balanced accuracy") {
    Rng rng(13);
    const int n = 1000;
    Eigen::MatrixXd X(n, 3);
    std::vector<std::uint8_t> y(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) X(i, c) = rng.normal();
        y[static_cast<std::size_t>(i)] = rng.bernoulli(0.3);
    }
    const auto r = fit_logreg_balanced(X, y);
    CHECK(r.balanced_accuracy == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("normal p-values") {
    CHECK(two_sided_p(0.0) == 1.0);
    CHECK(std::abs(two_sided_p(1.959964) - 0.05) <= 1e-4);
    CHECK(two_sided_p(-1.959964) == two_sided_p(1.959964));
}

TEST_CASE("weights equal row duplication") {
    Rng rng(14);
    const int n = 60;
    Eigen::MatrixXd X(n, 2);
    std::vector<std::uint8_t> y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        y[static_cast<std::size_t>(i)] = rng.bernoulli(sigmoid_of(X(i, 0) - 1.0));
    }
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    std::vector<Eigen::Index> dup_rows;
    for (int i = 0; i < n; ++i)
        if (y[static_cast<std::size_t>(i)] == 1) {
            w(i) = 2.0;
            dup_rows.push_back(i);
        }
    Eigen::MatrixXd Xd(n + static_cast<Eigen::Index>(dup_rows.size()), 2);
    Xd.topRows(n) = X;
    std::vector<std::uint8_t> yd = y;
    for (std::size_t k = 0; k < dup_rows.size(); ++k) {
        Xd.row(n + static_cast<Eigen::Index>(k)) = X.row(dup_rows[k]);
        yd.push_back(1);
    }
    const auto weighted = fit_logreg_weighted(X, y, w);
    const auto duplicated = fit_logreg_weighted(Xd, yd, Eigen::VectorXd::Ones(Xd.rows()));
    CHECK((weighted.coefficients - duplicated.coefficients).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(weighted.intercept - duplicated.intercept) <= 1e-6);
}

TEST_CASE("rescaling a column keeps predicted labels") {
    Rng rng(15);
    const int n = 200;
    Eigen::MatrixXd X(n, 2);
    std::vector<std::uint8_t> y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        y[static_cast<std::size_t>(i)] = rng.bernoulli(sigmoid_of(1.5 * X(i, 0)));
    }
    auto predict = [](const LogRegResult& r, const Eigen::MatrixXd& M) {
        std::vector<int> out;
        for (Eigen::Index i = 0; i < M.rows(); ++i) out.push_back(r.intercept + M.row(i).dot(r.coefficients) > 0);
        return out;
    };
    Eigen::MatrixXd scaled = X;
    scaled.col(1) = scaled.col(1).array() * 3.0 + 2.0;
    LogRegConfig unpenalized;
    unpenalized.ridge = 0.0;
    CHECK(predict(fit_logreg_balanced(X, y, unpenalized), X) == predict(fit_logreg_balanced(scaled, y, unpenalized), scaled));
}

TEST_CASE("singular information gives unavailable errors") {
    Rng rng(16);
    const int n = 100;
    Eigen::MatrixXd X(n, 3);
    std::vector<std::uint8_t> y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = X(i, 0);
        X(i, 2) = rng.normal();
        y[static_cast<std::size_t>(i)] = rng.bernoulli(0.5);
    }
    const auto r = wald_significance(fit_logreg_balanced(X, y), X, y, balanced_weights(y));
    CHECK(std::isnan(r.std_errors(0)));
    CHECK(std::isnan(r.std_errors(1)));
    CHECK(std::isfinite(r.std_errors(2)));
}

TEST_CASE("planted dimension shows up in the report") {
    Rng rng(17);
    const int n = 400;
    StandardizedFeatures f;
    f.names = {"t_range", "noise"};
    f.binary = {true, false};
    f.values.resize(n, 2);
    ItemCharacteristics c;
    c.relevance.resize(n, 2);
    c.difficulty = Eigen::MatrixXd::Zero(n, 2);
    for (int i = 0; i < n; ++i) {
        f.values(i, 0) = rng.bernoulli(0.3);
        f.values(i, 1) = rng.normal();
        const double r0 = sigmoid_of(1.0 * f.values(i, 0) + rng.normal());
        c.relevance(i, 0) = r0;
        c.relevance(i, 1) = 1.0 - r0;
    }
    const auto fits = interpret_dimensions(f, c, 0.6, LogRegConfig{});
    REQUIRE(fits.size() == 2);
    REQUIRE(fits[0].result);
    CHECK(fits[0].result->coefficients(0) > 0);
    CHECK(fits[0].result->p_values(0) < 0.05);
    REQUIRE(fits[1].result);
    CHECK(fits[1].result->coefficients(0) < 0);

    const auto dir = std::filesystem::temp_directory_path() / "caimira_interp_test";
    std::filesystem::remove_all(dir);
    const auto first = interpretation_report(fits, dir, InterpretReportOptions{});
    std::vector<std::string> contents;
    for (const auto& p : first) contents.push_back(read_text_file(p));
    const auto csv = read_text_file(dir / "interpretation.csv");
    CHECK(csv.find("t_range") != std::string::npos);
    CHECK(csv.find("positive") != std::string::npos);
    const auto second = interpretation_report(fits, dir, InterpretReportOptions{});
    for (std::size_t i = 0; i < second.size(); ++i) CHECK(read_text_file(second[i]) == contents[i]);
    std::filesystem::remove_all(dir);
}
