#pragma once

// Interpretable question features, relevance labels per latent dimension
// and class-balanced logistic regressions with Wald tests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "caimira/irt.hpp"

namespace caimira {

struct Item;
struct Question;

// Regexes (ECMAScript, case-insensitive) behind the binary text flags.
struct FeaturePatterns {
    std::vector<std::string> t_range;
    std::vector<std::string> t_event;
    std::vector<std::string> o_records;
    std::vector<std::string> trash_categories;  // matched against category/subcategory, case-insensitive

    static FeaturePatterns defaults();
};

// {"t_range": [...], "t_event": [...], "o_records": [...], "trash_categories": [...]};
// missing keys keep the defaults.
FeaturePatterns load_feature_patterns(const std::filesystem::path& path);

// Precomputed numeric features keyed by item id. Blank or NA cells are
// missing.
struct ExternalFeatures {
    std::vector<std::string> columns;
    std::unordered_map<std::string, std::vector<double>> rows;
};

ExternalFeatures load_external_features(const std::filesystem::path& path);

struct FeatureVector {
    std::map<std::string, int> categorical;  // c_<category>, sc_<subcategory>
    std::map<std::string, int> temporal;     // t_range, t_event
    std::map<std::string, int> other;        // o_TRASH, o_Records
    std::map<std::string, double> numeric;   // clue_count and external columns
    std::set<std::string> missing;           // numeric features without a value
};

// Lowercase, non-alphanumeric runs become '_'.
std::string feature_slug(std::string_view text);

FeatureVector extract_features(const Item& item, const Question& q, const ExternalFeatures* external,
                               const FeaturePatterns& patterns);

struct FeatureTable {
    std::vector<std::string> item_ids;
    std::vector<std::string> names;
    std::vector<bool> binary;
    Eigen::MatrixXd values;  // NaN marks a missing numeric value
};

// Union of all feature names; absent flags are 0, absent numerics missing.
FeatureTable build_feature_table(const std::vector<std::string>& item_ids, const std::vector<FeatureVector>& vectors);

struct StandardizedFeatures {
    std::vector<std::string> names;
    std::vector<bool> binary;
    Eigen::MatrixXd values;
    std::vector<std::string> dropped;
    std::vector<std::string> warnings;
};

// Numeric columns: mean imputation, then zero mean and unit population
// variance. Binary columns stay 0/1. Zero-variance columns are dropped.
StandardizedFeatures standardize(const FeatureTable& table);

inline constexpr double kRelevanceLabelThreshold = 0.6;

// label_j = 1 iff r_{j,k} > threshold.
std::vector<std::uint8_t> relevance_labels(const ItemCharacteristics& chars, std::size_t k,
                                           double threshold = kRelevanceLabelThreshold);

struct LogRegConfig {
    double ridge = 1e-4;
    double tolerance = 1e-8;  // max coefficient change
    int max_iterations = 100;
    // |coefficient| above this after fitting is reported as separation.
    double separation_bound = 20.0;
};

struct LogRegResult {
    std::size_t dimension = 0;
    std::vector<std::string> feature_names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd std_errors;  // NaN where unavailable
    Eigen::VectorXd z;
    Eigen::VectorXd p_values;
    double intercept = 0.0;
    double balanced_accuracy = 0.0;
    int iterations = 0;
    bool converged = false;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::string note;
};

// Weighted ridge logistic regression with an unpenalized intercept, fit by
// IRLS. Throws FitError when a class is missing.
LogRegResult fit_logreg_weighted(const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y,
                                 const Eigen::VectorXd& weights, const LogRegConfig& cfg = {},
                                 std::vector<std::string> names = {});

// Inverse class frequency weights so both classes carry equal total weight.
Eigen::VectorXd balanced_weights(const std::vector<std::uint8_t>& y);

LogRegResult fit_logreg_balanced(const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y,
                                 const LogRegConfig& cfg = {}, std::vector<std::string> names = {});

// Two-sided normal p-value, erfc(|z| / sqrt 2).
double two_sided_p(double z);

// Standard errors from the robust covariance H^-1 M H^-1, where H is the
// weighted Fisher information at the optimum and M the outer product of the
// weighted scores. Coefficients touching a singular direction of H get NaN.
LogRegResult wald_significance(LogRegResult result, const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y,
                               const Eigen::VectorXd& weights);

struct DimensionFit {
    std::size_t dimension = 0;
    std::optional<LogRegResult> result;
    std::string error;  // set when the fit could not run
    std::size_t positives = 0;
};

// Labels every dimension at `threshold`, fits and tests it.
std::vector<DimensionFit> interpret_dimensions(const StandardizedFeatures& features, const ItemCharacteristics& chars,
                                               double threshold, const LogRegConfig& cfg, std::size_t threads = 1);

struct InterpretReportOptions {
    double alpha = 0.05;
    bool bonferroni = false;
    double threshold = kRelevanceLabelThreshold;
};

// interpretation.csv / interpretation.json (significant features per
// dimension) and interpretation_coefficients.csv (every coefficient).
std::vector<std::filesystem::path> interpretation_report(const std::vector<DimensionFit>& fits,
                                                         const std::filesystem::path& out_dir,
                                                         const InterpretReportOptions& options);

}  // namespace caimira
