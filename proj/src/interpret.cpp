#include "caimira/interpret.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "caimira/dataset.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool any_match(const std::vector<std::string>& patterns, const std::string& text) {
    for (const auto& p : patterns) {
        try {
            if (std::regex_search(text, std::regex(p, std::regex::ECMAScript | std::regex::icase))) return true;
        } catch (const std::regex_error& e) {
            throw ConfigError(fmt::format("bad feature pattern '{}': {}", p, e.what()));
        }
    }
    return false;
}

}  // namespace

FeaturePatterns FeaturePatterns::defaults() {
    // Keep in sync with config/feature_patterns.json.
    FeaturePatterns p;
    p.t_range = {
        R"(\bin the \d{1,2}(st|nd|rd|th)\b)",
        R"(\b(\d{1,2}(st|nd|rd|th)|first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|eleventh|twelfth|thirteenth|fourteenth|fifteenth|sixteenth|seventeenth|eighteenth|nineteenth|twentieth|twenty-first)[- ]centur(y|ies)\b)",
        R"(\bin the (early |late |mid-?)?\d{3,4}s\b)",
        R"(\b(from|between) \d{3,4} (to|and|until) \d{3,4}\b)",
        R"(\b(during|throughout) the (\w+ )?(century|decade|era|period|age|dynasty|millennium)\b)",
    };
    p.t_event = {
        R"(\b(before|after|following|preceding|prior to|in the wake of|until|since|during) the (\w+ ){0,3}(fall|death|revolution|war|invasion|battle|collapse|founding|rise|end|beginning|start|treaty|reign|coronation|assassination|independence|conquest|sack|siege|election|partition|restoration|reformation)\b)",
    };
    p.o_records = {
        R"(\bmost (recent|popular|successful|famous|common|valuable|decorated|populous|visited|watched|sold|expensive)\b)",
        R"(\b(best|worst)[- ](selling|category|known|picture|actor|actress)\b)",
        R"(\b(largest|smallest|longest|shortest|highest|lowest|tallest|oldest|youngest|fastest|biggest|deepest)\b)",
        R"(\b(world|all-time) record\b)",
    };
    p.trash_categories = {"trash", "pop culture", "popular culture"};
    return p;
}

FeaturePatterns load_feature_patterns(const std::filesystem::path& path) {
    FeaturePatterns p = FeaturePatterns::defaults();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
        auto take = [&](const char* key, std::vector<std::string>& slot) {
            if (doc.contains(key)) slot = doc.at(key).get<std::vector<std::string>>();
        };
        take("t_range", p.t_range);
        take("t_event", p.t_event);
        take("o_records", p.o_records);
        take("trash_categories", p.trash_categories);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    // Compile once so a bad pattern fails at load time.
    for (const auto* group : {&p.t_range, &p.t_event, &p.o_records}) any_match(*group, "");
    return p;
}

ExternalFeatures load_external_features(const std::filesystem::path& path) {
    const CsvTable table = read_csv_file(path);
    if (table.header.empty() || table.header[0] != "item_id") {
        throw ParseError(path.string(), 1, "external feature table must start with an item_id column");
    }
    ExternalFeatures out;
    out.columns.assign(table.header.begin() + 1, table.header.end());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::vector<double> values(out.columns.size(), kNaN);
        for (std::size_t c = 1; c < row.size() && c <= out.columns.size(); ++c) {
            const std::string cell = trim(row[c]);
            if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN") continue;
            try {
                std::size_t used = 0;
                values[c - 1] = std::stod(cell, &used);
                if (used != cell.size() || !std::isfinite(values[c - 1])) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ParseError(path.string(), table.line_numbers[r],
                                 fmt::format("column {} is not numeric: '{}'", table.header[c], cell));
            }
        }
        if (!out.rows.emplace(row[0], std::move(values)).second) {
            throw IntegrityError(fmt::format("{}:{}: duplicate item_id {}", path.string(), table.line_numbers[r], row[0]));
        }
    }
    return out;
}

std::string feature_slug(std::string_view text) {
    std::string out;
    bool pending = false;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            if (pending && !out.empty()) out += '_';
            pending = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            pending = true;
        }
    }
    return out;
}

FeatureVector extract_features(const Item& item, const Question& q, const ExternalFeatures* external,
                               const FeaturePatterns& patterns) {
    FeatureVector fv;
    if (!q.category.empty()) fv.categorical["c_" + feature_slug(q.category)] = 1;
    if (q.subcategory && !q.subcategory->empty()) fv.categorical["sc_" + feature_slug(*q.subcategory)] = 1;

    fv.temporal["t_range"] = any_match(patterns.t_range, item.text) ? 1 : 0;
    fv.temporal["t_event"] = any_match(patterns.t_event, item.text) ? 1 : 0;

    bool trash = false;
    for (const auto& cat : patterns.trash_categories) {
        const auto want = lower(cat);
        if (lower(q.category) == want || (q.subcategory && lower(*q.subcategory) == want)) trash = true;
    }
    fv.other["o_TRASH"] = trash ? 1 : 0;
    fv.other["o_Records"] = any_match(patterns.o_records, item.text) ? 1 : 0;

    fv.numeric["clue_count"] = item.clue_count;
    if (external) {
        auto it = external->rows.find(item.item_id);
        for (std::size_t c = 0; c < external->columns.size(); ++c) {
            const double v = it == external->rows.end() ? kNaN : it->second[c];
            fv.numeric[external->columns[c]] = v;
            if (std::isnan(v)) fv.missing.insert(external->columns[c]);
        }
    }
    return fv;
}

FeatureTable build_feature_table(const std::vector<std::string>& item_ids, const std::vector<FeatureVector>& vectors) {
    if (item_ids.size() != vectors.size()) throw ContractError("one feature vector per item is required");
    std::set<std::string> cat, temporal, other, numeric;
    for (const auto& v : vectors) {
        for (const auto& [k, x] : v.categorical) cat.insert(k);
        for (const auto& [k, x] : v.temporal) temporal.insert(k);
        for (const auto& [k, x] : v.other) other.insert(k);
        for (const auto& [k, x] : v.numeric) numeric.insert(k);
    }
    FeatureTable table;
    table.item_ids = item_ids;
    for (const auto* group : {&cat, &temporal, &other}) {
        for (const auto& name : *group) {
            table.names.push_back(name);
            table.binary.push_back(true);
        }
    }
    for (const auto& name : numeric) {
        table.names.push_back(name);
        table.binary.push_back(false);
    }
    table.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(table.names.size()));
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        const auto& v = vectors[r];
        for (std::size_t c = 0; c < table.names.size(); ++c) {
            const auto& name = table.names[c];
            double x = 0.0;
            if (table.binary[c]) {
                if (auto it = v.categorical.find(name); it != v.categorical.end()) x = it->second;
                else if (auto it2 = v.temporal.find(name); it2 != v.temporal.end()) x = it2->second;
                else if (auto it3 = v.other.find(name); it3 != v.other.end()) x = it3->second;
            } else {
                auto it = v.numeric.find(name);
                x = it == v.numeric.end() || v.missing.count(name) ? kNaN : it->second;
            }
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x;
        }
    }
    return table;
}

StandardizedFeatures standardize(const FeatureTable& table) {
    const auto n = table.values.rows();
    if (n < 2) throw ContractError("standardization needs at least two rows");
    StandardizedFeatures out;
    std::vector<Eigen::VectorXd> kept;
    for (std::size_t c = 0; c < table.names.size(); ++c) {
        Eigen::VectorXd col = table.values.col(static_cast<Eigen::Index>(c));
        double sum = 0.0;
        std::size_t present = 0;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (!std::isnan(col(r))) {
                sum += col(r);
                ++present;
            }
        }
        const double mean = present ? sum / static_cast<double>(present) : 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (std::isnan(col(r))) col(r) = mean;
        }
        const double centered_mean = col.mean();
        const double sd = std::sqrt((col.array() - centered_mean).square().mean());
        if (!(sd > 1e-12)) {
            out.dropped.push_back(table.names[c]);
            out.warnings.push_back(fmt::format("dropped zero-variance feature {}", table.names[c]));
            logger()->warn("event=feature_dropped feature={} reason=zero_variance", table.names[c]);
            continue;
        }
        if (!table.binary[c]) col = (col.array() - centered_mean) / sd;
        out.names.push_back(table.names[c]);
        out.binary.push_back(table.binary[c]);
        kept.push_back(std::move(col));
    }
    out.values.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) out.values.col(static_cast<Eigen::Index>(c)) = kept[c];
    return out;
}

std::vector<std::uint8_t> relevance_labels(const ItemCharacteristics& chars, std::size_t k, double threshold) {
    if (k >= static_cast<std::size_t>(chars.relevance.cols())) {
        throw ContractError(fmt::format("dimension {} out of range (m = {})", k, chars.relevance.cols()));
    }
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(chars.relevance.rows()));
    for (std::size_t j = 0; j < labels.size(); ++j) {
        labels[j] = chars.relevance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) > threshold ? 1 : 0;
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Z(X.rows(), X.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(X.cols()) = X;
    return Z;
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double penalized_loglik(const Eigen::MatrixXd& Z, const std::vector<std::uint8_t>& y, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& beta, double ridge) {
    const Eigen::VectorXd eta = Z * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        ll += w(i) * (y[static_cast<std::size_t>(i)] ? log_sigmoid(eta(i)) : log_sigmoid(-eta(i)));
    }
    return ll - 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
}

}  // namespace

Eigen::VectorXd balanced_weights(const std::vector<std::uint8_t>& y) {
    const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const auto n = static_cast<double>(y.size());
    const double neg = n - pos;
    Eigen::VectorXd w(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        w(static_cast<Eigen::Index>(i)) = y[i] ? (pos > 0 ? n / (2.0 * pos) : 0.0) : (neg > 0 ? n / (2.0 * neg) : 0.0);
    }
    return w;
}

LogRegResult fit_logreg_weighted(const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y,
                                 const Eigen::VectorXd& weights, const LogRegConfig& cfg,
                                 std::vector<std::string> names) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (static_cast<std::size_t>(n) != y.size() || weights.size() != n) throw ContractError("X, y and weights disagree in length");
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != p) throw ContractError("feature names disagree with X");
    if (names.empty()) {
        for (Eigen::Index c = 0; c < p; ++c) names.push_back(fmt::format("x{}", c + 1));
    }
    const auto pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (pos == 0) throw FitError("dimension has no positive examples");
    if (pos == y.size()) throw FitError("dimension has no negative examples");
    if (!X.allFinite()) throw ContractError("feature matrix holds non-finite values");

    const Eigen::MatrixXd Z = with_intercept(X);
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, cfg.ridge);
    penalty(0) = 0.0;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    double objective = penalized_loglik(Z, y, weights, beta, cfg.ridge);
    LogRegResult result;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        const Eigen::VectorXd eta = Z * beta;
        Eigen::VectorXd prob(n), curvature(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = sigmoid(eta(i));
            curvature(i) = weights(i) * prob(i) * (1.0 - prob(i));
        }
        const Eigen::VectorXd gradient = Z.transpose() * (weights.cwiseProduct(yv - prob)) - penalty.cwiseProduct(beta);
        Eigen::MatrixXd hessian = Z.transpose() * curvature.asDiagonal() * Z;
        hessian.diagonal() += penalty;
        // Tiny jitter keeps the intercept block solvable on degenerate designs.
        hessian.diagonal().array() += 1e-12;
        Eigen::VectorXd step = hessian.ldlt().solve(gradient);
        if (!step.allFinite()) break;

        // Step halving keeps the penalized likelihood non-decreasing.
        double scale = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double next = penalized_loglik(Z, y, weights, candidate, cfg.ridge);
        for (int h = 0; h < 30 && next < objective - 1e-12 * std::abs(objective); ++h) {
            scale *= 0.5;
            candidate = beta + scale * step;
            next = penalized_loglik(Z, y, weights, candidate, cfg.ridge);
        }
        const double change = (scale * step).cwiseAbs().maxCoeff();
        beta = candidate;
        objective = next;
        result.iterations = iter;
        if (change < cfg.tolerance) {
            result.converged = true;
            break;
        }
    }

    result.feature_names = std::move(names);
    result.intercept = beta(0);
    result.coefficients = beta.tail(p);
    result.std_errors = Eigen::VectorXd::Constant(p, kNaN);
    result.z = Eigen::VectorXd::Constant(p, kNaN);
    result.p_values = Eigen::VectorXd::Constant(p, kNaN);
    result.positives = pos;
    result.negatives = y.size() - pos;

    const Eigen::VectorXd eta = Z * beta;
    std::size_t tp = 0, tn = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool predicted = eta(i) > 0.0;
        if (y[static_cast<std::size_t>(i)] && predicted) ++tp;
        if (!y[static_cast<std::size_t>(i)] && !predicted) ++tn;
    }
    result.balanced_accuracy = 0.5 * (static_cast<double>(tp) / static_cast<double>(result.positives) +
                                      static_cast<double>(tn) / static_cast<double>(result.negatives));

    if (!result.converged) {
        result.note = fmt::format("did not converge in {} iterations", cfg.max_iterations);
    }
    if (p > 0 && result.coefficients.cwiseAbs().maxCoeff() > cfg.separation_bound) {
        if (!result.note.empty()) result.note += "; ";
        result.note += fmt::format("possible separation: coefficients held finite by ridge {}", format_real(cfg.ridge));
    }
    return result;
}

LogRegResult fit_logreg_balanced(const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y,
                                 const LogRegConfig& cfg, std::vector<std::string> names) {
    return fit_logreg_weighted(X, y, balanced_weights(y), cfg, std::move(names));
}

double two_sided_p(double z) {
    if (std::isnan(z)) return kNaN;
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

LogRegResult wald_significance(LogRegResult result, const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y,
                               const Eigen::VectorXd& weights) {
    const auto p = X.cols();
    if (result.coefficients.size() != p || weights.size() != X.rows() || static_cast<Eigen::Index>(y.size()) != X.rows()) {
        throw ContractError("result does not match X");
    }
    const Eigen::MatrixXd Z = with_intercept(X);
    Eigen::VectorXd beta(p + 1);
    beta << result.intercept, result.coefficients;
    const Eigen::VectorXd eta = Z * beta;
    // Sandwich H^-1 M H^-1: the balancing weights are not frequency weights,
    // so the inverse information alone understates the variance.
    Eigen::VectorXd curvature(X.rows()), score_sq(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double prob = sigmoid(eta(i));
        const double residual = static_cast<double>(y[static_cast<std::size_t>(i)]) - prob;
        curvature(i) = weights(i) * prob * (1.0 - prob);
        score_sq(i) = weights(i) * weights(i) * residual * residual;
    }
    const Eigen::MatrixXd info = Z.transpose() * curvature.asDiagonal() * Z;
    const Eigen::MatrixXd meat = Z.transpose() * score_sq.asDiagonal() * Z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const Eigen::MatrixXd& V = eig.eigenvectors();
    const double top = lambda.cwiseAbs().maxCoeff();
    const double floor = std::max(top, 1e-300) * 1e-10;

    std::vector<bool> affected(static_cast<std::size_t>(p + 1), false);
    Eigen::VectorXd inv_lambda = Eigen::VectorXd::Zero(lambda.size());
    for (Eigen::Index e = 0; e < lambda.size(); ++e) {
        if (lambda(e) > floor) {
            inv_lambda(e) = 1.0 / lambda(e);
            continue;
        }
        for (Eigen::Index c = 0; c <= p; ++c) {
            if (std::abs(V(c, e)) > 1e-6) affected[static_cast<std::size_t>(c)] = true;
        }
    }
    const Eigen::MatrixXd bread = V * inv_lambda.asDiagonal() * V.transpose();
    const Eigen::MatrixXd covariance = bread * meat * bread;
    for (Eigen::Index c = 0; c < p; ++c) {
        if (affected[static_cast<std::size_t>(c + 1)]) {
            result.std_errors(c) = result.z(c) = result.p_values(c) = kNaN;
            continue;
        }
        result.std_errors(c) = std::sqrt(covariance(c + 1, c + 1));
        result.z(c) = result.coefficients(c) / result.std_errors(c);
        result.p_values(c) = two_sided_p(result.z(c));
    }
    if (std::any_of(affected.begin() + 1, affected.end(), [](bool a) { return a; })) {
        if (!result.note.empty()) result.note += "; ";
        result.note += "singular information: some standard errors unavailable";
    }
    return result;
}

std::vector<DimensionFit> interpret_dimensions(const StandardizedFeatures& features, const ItemCharacteristics& chars,
                                               double threshold, const LogRegConfig& cfg, std::size_t threads) {
    if (features.values.rows() != chars.relevance.rows()) {
        throw ContractError("feature rows must align with the item characteristics");
    }
    const auto m = static_cast<std::size_t>(chars.relevance.cols());
    std::vector<DimensionFit> fits(m);
    parallel_for(m, threads, [&](std::size_t k) {
        DimensionFit& fit = fits[k];
        fit.dimension = k;
        const auto labels = relevance_labels(chars, k, threshold);
        fit.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
        try {
            const Eigen::VectorXd w = balanced_weights(labels);
            LogRegResult r = fit_logreg_weighted(features.values, labels, w, cfg, features.names);
            r.dimension = k;
            fit.result = wald_significance(std::move(r), features.values, labels, w);
        } catch (const FitError& e) {
            fit.error = e.what();
        }
    });
    for (const auto& fit : fits) {
        if (!fit.error.empty()) logger()->warn("event=fit_skipped dimension={} reason=\"{}\"", fit.dimension + 1, fit.error);
    }
    return fits;
}

std::vector<std::filesystem::path> interpretation_report(const std::vector<DimensionFit>& fits,
                                                         const std::filesystem::path& out_dir,
                                                         const InterpretReportOptions& options) {
    ensure_directory(out_dir);
    nlohmann::ordered_json doc = {{"alpha", options.alpha},
                                  {"bonferroni", options.bonferroni},
                                  {"threshold", options.threshold},
                                  {"dimensions", nlohmann::ordered_json::array()}};
    std::string summary = join_csv(std::vector<std::string>{"dimension", "balanced_accuracy", "feature", "coefficient",
                                                            "std_error", "z", "p_value", "direction"}) + "\n";
    std::string coefficients = join_csv(std::vector<std::string>{"dimension", "feature", "coefficient", "std_error", "z",
                                                                 "p_value"}) + "\n";
    for (const auto& fit : fits) {
        const std::string dim = std::to_string(fit.dimension + 1);
        nlohmann::ordered_json entry = {{"dimension", fit.dimension + 1}, {"positives", fit.positives}};
        if (!fit.result) {
            entry["balanced_accuracy"] = nullptr;
            entry["error"] = fit.error;
            entry["significant"] = nlohmann::ordered_json::array();
            doc["dimensions"].push_back(entry);
            summary += join_csv(std::vector<std::string>{dim, "NA", "", "", "", "", "", ""}) + "\n";
            continue;
        }
        const LogRegResult& r = *fit.result;
        const auto p = static_cast<std::size_t>(r.coefficients.size());
        const double alpha = options.bonferroni && p > 0 ? options.alpha / static_cast<double>(p) : options.alpha;
        std::vector<std::size_t> significant;
        for (std::size_t c = 0; c < p; ++c) {
            const auto i = static_cast<Eigen::Index>(c);
            coefficients += join_csv(std::vector<std::string>{dim, r.feature_names[c], format_real(r.coefficients(i)),
                                                              format_real(r.std_errors(i)), format_real(r.z(i)),
                                                              format_real(r.p_values(i))}) + "\n";
            if (!std::isnan(r.p_values(i)) && r.p_values(i) < alpha) significant.push_back(c);
        }
        std::stable_sort(significant.begin(), significant.end(), [&](std::size_t a, std::size_t b) {
            const double x = std::abs(r.coefficients(static_cast<Eigen::Index>(a)));
            const double y = std::abs(r.coefficients(static_cast<Eigen::Index>(b)));
            if (x != y) return x > y;
            return r.feature_names[a] < r.feature_names[b];
        });
        entry["balanced_accuracy"] = r.balanced_accuracy;
        entry["intercept"] = r.intercept;
        entry["converged"] = r.converged;
        entry["iterations"] = r.iterations;
        if (!r.note.empty()) entry["note"] = r.note;
        entry["significant"] = nlohmann::ordered_json::array();
        const std::string acc = format_real(r.balanced_accuracy);
        for (auto c : significant) {
            const auto i = static_cast<Eigen::Index>(c);
            const char* direction = r.coefficients(i) > 0 ? "positive" : "negative";
            entry["significant"].push_back({{"feature", r.feature_names[c]},
                                            {"coefficient", r.coefficients(i)},
                                            {"std_error", r.std_errors(i)},
                                            {"z", r.z(i)},
                                            {"p_value", r.p_values(i)},
                                            {"direction", direction}});
            summary += join_csv(std::vector<std::string>{dim, acc, r.feature_names[c], format_real(r.coefficients(i)),
                                                         format_real(r.std_errors(i)), format_real(r.z(i)),
                                                         format_real(r.p_values(i)), direction}) + "\n";
        }
        if (significant.empty()) summary += join_csv(std::vector<std::string>{dim, acc, "", "", "", "", "", ""}) + "\n";
        doc["dimensions"].push_back(entry);
    }
    std::vector<std::filesystem::path> written{out_dir / "interpretation.csv", out_dir / "interpretation.json",
                                               out_dir / "interpretation_coefficients.csv"};
    write_text_file(written[0], summary);
    write_text_file(written[1], doc.dump(2) + "\n");
    write_text_file(written[2], coefficients);
    return written;
}

}  // namespace caimira
