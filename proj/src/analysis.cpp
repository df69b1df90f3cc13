#include "caimira/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "caimira/dataset.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

Eigen::MatrixXd effective_difficulty(const ItemCharacteristics& chars) {
    if (chars.relevance.rows() != chars.difficulty.rows() || chars.relevance.cols() != chars.difficulty.cols()) {
        throw ContractError("relevance and difficulty shapes differ");
    }
    return chars.relevance.cwiseProduct(chars.difficulty);
}

Eigen::VectorXd mean_effective_difficulty(std::span<const std::size_t> members, const ItemCharacteristics& chars) {
    const auto m = chars.relevance.cols();
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(m);
    for (auto j : members) {
        const auto row = static_cast<Eigen::Index>(j);
        if (row >= chars.relevance.rows()) throw ContractError("cluster member out of range");
        for (Eigen::Index k = 0; k < m; ++k) {
            weighted(k) += chars.relevance(row, k) * chars.difficulty(row, k);
            mass(k) += chars.relevance(row, k);
        }
    }
    Eigen::VectorXd out(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        out(k) = mass(k) > 0.0 ? weighted(k) / mass(k) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

// ---------------------------------------------------------------------------
// KMeans

namespace {

struct Restart {
    std::vector<std::size_t> assignments;
    Eigen::MatrixXd centroids;
    double wcss = 0.0;
    std::vector<double> trace;
};

double assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids, std::vector<std::size_t>& assignments,
              std::vector<double>* distances) {
    double total = 0.0;
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            const double d = (points.row(p) - centroids.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::size_t>(c);
            }
        }
        assignments[static_cast<std::size_t>(p)] = best;
        if (distances) (*distances)[static_cast<std::size_t>(p)] = best_d;
        total += best_d;
    }
    return total;
}

Eigen::MatrixXd plus_plus_seed(const Eigen::MatrixXd& points, int k, Rng& rng) {
    const auto n = points.rows();
    Eigen::MatrixXd centroids(k, points.cols());
    auto first = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    centroids.row(0) = points.row(first);
    std::vector<double> nearest(static_cast<std::size_t>(n));
    for (Eigen::Index p = 0; p < n; ++p) nearest[static_cast<std::size_t>(p)] = (points.row(p) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform01() * total;
            double acc = 0.0;
            pick = n - 1;
            for (Eigen::Index p = 0; p < n; ++p) {
                acc += nearest[static_cast<std::size_t>(p)];
                if (acc > target && nearest[static_cast<std::size_t>(p)] > 0.0) {
                    pick = p;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        }
        centroids.row(c) = points.row(pick);
        for (Eigen::Index p = 0; p < n; ++p) {
            auto& d = nearest[static_cast<std::size_t>(p)];
            d = std::min(d, (points.row(p) - centroids.row(c)).squaredNorm());
        }
    }
    return centroids;
}

Restart lloyd(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options) {
    Rng rng(seed);
    Restart run;
    run.centroids = plus_plus_seed(points, k, rng);
    const auto n = static_cast<std::size_t>(points.rows());
    run.assignments.assign(n, 0);
    std::vector<double> distances(n);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const double objective = assign(points, run.centroids, run.assignments, &distances);
        if (options.record_trace) run.trace.push_back(objective);

        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t p = 0; p < n; ++p) {
            next.row(static_cast<Eigen::Index>(run.assignments[p])) += points.row(static_cast<Eigen::Index>(p));
            ++counts[run.assignments[p]];
        }
        std::vector<char> taken(n, 0);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: move it onto the point farthest from its centroid.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t p = 0; p < n; ++p) {
                if (!taken[p] && distances[p] > far_d) {
                    far_d = distances[p];
                    far = p;
                }
            }
            taken[far] = 1;
            next.row(c) = points.row(static_cast<Eigen::Index>(far));
        }
        const double movement = (next - run.centroids).rowwise().norm().maxCoeff();
        run.centroids = std::move(next);
        if (movement < options.tolerance) break;
    }
    run.wcss = assign(points, run.centroids, run.assignments, nullptr);
    return run;
}

}  // namespace

KMeansResult kmeans_cluster(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k < 1) throw ConfigError("cluster count must be >= 1");
    if (static_cast<std::size_t>(k) > n) {
        throw ConfigError(fmt::format("cluster count {} exceeds the number of items ({})", k, n));
    }
    if (options.restarts < 1) throw ConfigError("kmeans needs at least one restart");

    std::vector<std::size_t> canonical(n);
    std::iota(canonical.begin(), canonical.end(), 0);
    std::stable_sort(canonical.begin(), canonical.end(), [&](std::size_t a, std::size_t b) {
        for (Eigen::Index c = 0; c < points.cols(); ++c) {
            const double x = points(static_cast<Eigen::Index>(a), c), y = points(static_cast<Eigen::Index>(b), c);
            if (x != y) return x < y;
        }
        return false;
    });
    Eigen::MatrixXd sorted(points.rows(), points.cols());
    for (std::size_t p = 0; p < n; ++p) sorted.row(static_cast<Eigen::Index>(p)) = points.row(static_cast<Eigen::Index>(canonical[p]));

    std::vector<Restart> runs(static_cast<std::size_t>(options.restarts));
    parallel_for(runs.size(), options.threads, [&](std::size_t r) {
        runs[r] = lloyd(sorted, k, derive_seed(seed, 100 + r), options);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].wcss < runs[best].wcss) best = r;
    }
    const Restart& win = runs[best];

    // Relabel clusters by first appearance in canonical order.
    std::vector<std::size_t> relabel(static_cast<std::size_t>(k), SIZE_MAX);
    std::size_t next_id = 0;
    for (std::size_t p = 0; p < n; ++p) {
        auto& slot = relabel[win.assignments[p]];
        if (slot == SIZE_MAX) slot = next_id++;
    }
    for (auto& slot : relabel) {
        if (slot == SIZE_MAX) slot = next_id++;
    }

    KMeansResult result;
    result.assignments.resize(n);
    for (std::size_t p = 0; p < n; ++p) result.assignments[canonical[p]] = relabel[win.assignments[p]];
    result.centroids.resize(k, points.cols());
    for (int c = 0; c < k; ++c) result.centroids.row(static_cast<Eigen::Index>(relabel[static_cast<std::size_t>(c)])) = win.centroids.row(c);
    result.wcss = win.wcss;
    result.best_restart = static_cast<int>(best);
    if (options.record_trace) {
        for (auto& r : runs) result.traces.push_back(std::move(r.trace));
    }
    return result;
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw ContractError("label vectors differ in length");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{a[i], b[i]}] += 1;
        rows[a[i]] += 1;
        cols[b[i]] += 1;
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, count] : joint) index += pairs(count);
    for (const auto& [key, count] : rows) sum_rows += pairs(count);
    for (const auto& [key, count] : cols) sum_cols += pairs(count);
    const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Reports over clusters and agents

ClusterReport build_cluster_report(const ItemCharacteristics& chars, std::span<const std::size_t> assignments, int k,
                                   const std::map<std::size_t, std::string>& labels) {
    const auto n = static_cast<std::size_t>(chars.relevance.rows());
    if (assignments.size() != n) throw ContractError("assignments must cover every item");
    ClusterReport report;
    report.k = k;
    report.assignments.assign(assignments.begin(), assignments.end());
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < n; ++j) {
        if (assignments[j] >= static_cast<std::size_t>(k)) throw ContractError("cluster id out of range");
        members[assignments[j]].push_back(j);
    }
    const Eigen::MatrixXd eff = effective_difficulty(chars);
    const auto m = chars.relevance.cols();
    for (std::size_t c = 0; c < members.size(); ++c) {
        ClusterSummary s;
        s.id = c;
        s.size = members[c].size();
        s.mean_relevance = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
        s.overall_difficulty = std::numeric_limits<double>::quiet_NaN();
        if (s.size > 0) {
            s.mean_relevance.setZero();
            double total = 0.0;
            for (auto j : members[c]) {
                s.mean_relevance += chars.relevance.row(static_cast<Eigen::Index>(j)).transpose();
                total += eff.row(static_cast<Eigen::Index>(j)).sum();
            }
            s.mean_relevance /= static_cast<double>(s.size);
            s.overall_difficulty = total / static_cast<double>(s.size);
        }
        s.mean_effective_difficulty = mean_effective_difficulty(members[c], chars);
        if (auto it = labels.find(c); it != labels.end()) s.label = it->second;
        report.clusters.push_back(std::move(s));
    }
    std::vector<std::size_t> order(report.clusters.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double dx = report.clusters[x].overall_difficulty, dy = report.clusters[y].overall_difficulty;
        if (std::isnan(dx) != std::isnan(dy)) return std::isnan(dy);
        return !std::isnan(dx) && dx < dy;
    });
    for (std::size_t r = 0; r < order.size(); ++r) report.clusters[order[r]].difficulty_rank = r;
    return report;
}

std::map<std::size_t, std::string> load_cluster_labels(const std::filesystem::path& path) {
    const CsvTable table = read_csv_file(path);
    const auto col_id = table.column("cluster");
    const auto col_label = table.column("label");
    if (col_id == std::string::npos || col_label == std::string::npos) {
        throw ParseError(path.string(), 1, "label file needs cluster,label columns");
    }
    std::map<std::size_t, std::string> labels;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        try {
            labels[static_cast<std::size_t>(std::stoul(table.rows[r][col_id]))] = table.rows[r][col_label];
        } catch (const std::exception&) {
            throw ParseError(path.string(), table.line_numbers[r], "cluster id must be a non-negative integer");
        }
    }
    return labels;
}

std::optional<double> AccuracyCell::accuracy() const {
    if (answered == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(answered);
}

std::vector<AccuracyCell> accuracy_slices(const ResponseMatrix& matrix,
                                          const std::map<std::string, std::size_t>& item_clusters, std::size_t k,
                                          const std::map<std::string, std::string>& agent_types) {
    std::vector<std::size_t> cluster_of(matrix.item_count());
    for (std::size_t j = 0; j < matrix.item_count(); ++j) {
        auto it = item_clusters.find(matrix.items()[j]);
        if (it == item_clusters.end()) throw ConfigError("item " + matrix.items()[j] + " has no cluster assignment");
        if (it->second >= k) throw ContractError("cluster id out of range");
        cluster_of[j] = it->second;
    }
    // counts[agent][cluster], cluster index k holds the overall tally
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> counts(
        matrix.agent_count(), std::vector<std::pair<std::size_t, std::size_t>>(k + 1, {0, 0}));
    for (const auto& [key, entry] : matrix.entries()) {
        auto& row = counts[key.first];
        for (std::size_t slot : {cluster_of[key.second], k}) {
            row[slot].first += entry.value;
            row[slot].second += 1;
        }
    }
    std::vector<AccuracyCell> cells;
    auto push_row = [&](const std::string& scope, const std::string& name,
                        const std::vector<std::pair<std::size_t, std::size_t>>& row) {
        for (std::size_t c = 0; c <= k; ++c) {
            AccuracyCell cell;
            cell.scope = scope;
            cell.name = name;
            if (c < k) cell.cluster = c;
            cell.correct = row[c].first;
            cell.answered = row[c].second;
            cells.push_back(std::move(cell));
        }
    };
    for (std::size_t a = 0; a < matrix.agent_count(); ++a) push_row("agent", matrix.agents()[a], counts[a]);

    std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> by_type;
    for (std::size_t a = 0; a < matrix.agent_count(); ++a) {
        auto it = agent_types.find(matrix.agents()[a]);
        if (it == agent_types.end()) continue;
        auto& row = by_type.try_emplace(it->second, k + 1, std::pair<std::size_t, std::size_t>{0, 0}).first->second;
        for (std::size_t c = 0; c <= k; ++c) {
            row[c].first += counts[a][c].first;
            row[c].second += counts[a][c].second;
        }
    }
    for (const auto& [type, row] : by_type) push_row("type", type, row);
    return cells;
}

std::map<std::string, std::string> load_agent_types(const std::filesystem::path& path) {
    const CsvTable table = read_csv_file(path);
    const auto col_agent = table.column("agent_id");
    const auto col_type = table.column("type");
    if (col_agent == std::string::npos || col_type == std::string::npos) {
        throw ParseError(path.string(), 1, "agent type file needs agent_id,type columns");
    }
    std::map<std::string, std::string> types;
    for (const auto& row : table.rows) types[row[col_agent]] = row[col_type];
    return types;
}

}  // namespace caimira
