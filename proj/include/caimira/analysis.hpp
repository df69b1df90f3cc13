#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "caimira/irt.hpp"

namespace caimira {

class EmbeddingStore;
class ResponseMatrix;
struct FittedModel;

inline constexpr int kDefaultClusterCount = 12;

// Elementwise relevance * difficulty, n_q x m.
Eigen::MatrixXd effective_difficulty(const ItemCharacteristics& chars);

// Relevance-weighted mean difficulty of the items in `members` per
// dimension. A dimension with zero total relevance yields NaN.
Eigen::VectorXd mean_effective_difficulty(std::span<const std::size_t> members, const ItemCharacteristics& chars);

struct KMeansOptions {
    int restarts = 10;
    int max_iterations = 300;
    double tolerance = 1e-6;  // max centroid movement
    std::size_t threads = 1;
    bool record_trace = false;
};

struct KMeansResult {
    std::vector<std::size_t> assignments;
    Eigen::MatrixXd centroids;  // k x dims
    double wcss = 0.0;
    int best_restart = 0;
    // Objective after each assignment step, per restart (when recorded).
    std::vector<std::vector<double>> traces;
};

// Lloyd's algorithm with k-means++ seeding. Points are processed in a
// canonical (lexicographic) order so the partition does not depend on row
// order; cluster ids follow the canonical order of first appearance.
KMeansResult kmeans_cluster(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options = {});

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct ClusterSummary {
    std::size_t id = 0;
    std::size_t size = 0;
    Eigen::VectorXd mean_relevance;
    Eigen::VectorXd mean_effective_difficulty;
    double overall_difficulty = 0.0;  // mean over members of sum_k r_k d_k
    std::size_t difficulty_rank = 0;  // 0 = easiest
    std::string label;
};

struct ClusterReport {
    int k = 0;
    std::vector<std::size_t> assignments;  // per store row
    std::vector<ClusterSummary> clusters;
};

ClusterReport build_cluster_report(const ItemCharacteristics& chars, std::span<const std::size_t> assignments, int k,
                                   const std::map<std::size_t, std::string>& labels = {});

// cluster_id,label lines.
std::map<std::size_t, std::string> load_cluster_labels(const std::filesystem::path& path);

struct AccuracyCell {
    std::string scope;  // "agent" or "type"
    std::string name;
    std::optional<std::size_t> cluster;  // nullopt = all items
    std::size_t correct = 0;
    std::size_t answered = 0;

    // Absent cells (answered == 0) have no accuracy.
    std::optional<double> accuracy() const;
};

// Accuracy per (agent, cluster) and per (agent type, cluster) plus overall
// rows, over entries present in the matrix. `item_clusters` maps matrix
// item ids to clusters and must cover every matrix item.
std::vector<AccuracyCell> accuracy_slices(const ResponseMatrix& matrix,
                                          const std::map<std::string, std::size_t>& item_clusters, std::size_t k,
                                          const std::map<std::string, std::string>& agent_types);

// agent_id,type lines.
std::map<std::string, std::string> load_agent_types(const std::filesystem::path& path);

struct ReportOptions {
    int k = kDefaultClusterCount;
    std::uint64_t seed = 0;
    int histogram_bins = 20;
    std::map<std::size_t, std::string> labels;
    std::map<std::string, std::string> agent_types;
    std::size_t threads = 1;
};

struct ReportFiles {
    std::vector<std::filesystem::path> written;
};

// question_characteristics.csv, agent_skills.csv, relevance_distribution.csv
// and their plot specs.
ReportFiles emit_characteristic_reports(const Checkpoint& model, const EmbeddingStore& store,
                                        const std::filesystem::path& out_dir, const ReportOptions& options);

// clusters.csv, cluster_summary.csv, accuracy_slices.csv (when a matrix is
// given) and their plot specs.
ReportFiles emit_cluster_reports(const Checkpoint& model, const EmbeddingStore& store, const ResponseMatrix* matrix,
                                 const std::filesystem::path& out_dir, const ReportOptions& options);

// Everything above.
ReportFiles emit_reports(const Checkpoint& model, const EmbeddingStore& store, const ResponseMatrix& matrix,
                         const std::filesystem::path& out_dir, const ReportOptions& options);

}  // namespace caimira
