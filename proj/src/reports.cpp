#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "caimira/analysis.hpp"
#include "caimira/dataset.hpp"
#include "caimira/embeddings.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVegaLiteSchema = "https://vega.github.io/schema/vega-lite/v5.json";

void write_file(const std::filesystem::path& path, const std::string& content, ReportFiles& files) {
    try {
        write_text_file(path, content);
    } catch (const std::exception& e) {
        throw Error(fmt::format("writing {}: {}", path.string(), e.what()));
    }
    files.written.push_back(path);
}

std::string csv_line(const std::vector<std::string>& fields) { return join_csv(fields) + "\n"; }

std::vector<std::string> dim_columns(const char* prefix, std::size_t m) {
    std::vector<std::string> cols;
    for (std::size_t k = 1; k <= m; ++k) cols.push_back(fmt::format("{}_{}", prefix, k));
    return cols;
}

json base_spec(const std::string& title, const std::string& data_file) {
    return json{{"$schema", kVegaLiteSchema},
                {"title", title},
                {"data", {{"url", data_file}, {"format", {{"type", "csv"}}}}}};
}

json fold_of(const std::vector<std::string>& cols, const char* key, const char* value) {
    return json{{"fold", cols}, {"as", json::array({key, value})}};
}

void write_spec(const std::filesystem::path& out_dir, const std::string& name, const json& spec, ReportFiles& files) {
    write_file(out_dir / (name + ".vl.json"), spec.dump(2) + "\n", files);
}

}  // namespace

ReportFiles emit_characteristic_reports(const Checkpoint& model, const EmbeddingStore& store,
                                        const std::filesystem::path& out_dir, const ReportOptions& options) {
    if (options.histogram_bins < 1) throw ConfigError("histogram_bins must be >= 1");
    const auto& params = model.params;
    if (store.dim() != params.embedding_dim()) {
        throw ConfigError(fmt::format("store dimension {} does not match model input dimension {}", store.dim(),
                                      params.embedding_dim()));
    }
    ensure_directory(out_dir);
    ReportFiles files;
    const std::size_t m = params.dims();
    const ItemCharacteristics chars = compute_all_characteristics(params, store);

    {
        std::string out;
        std::vector<std::string> header{"item_id"};
        for (auto& c : dim_columns("r", m)) header.push_back(c);
        for (auto& c : dim_columns("d", m)) header.push_back(c);
        out += csv_line(header);
        for (std::size_t j = 0; j < store.size(); ++j) {
            std::vector<std::string> row{store.ids()[j]};
            for (std::size_t k = 0; k < m; ++k) row.push_back(format_real(chars.relevance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))));
            for (std::size_t k = 0; k < m; ++k) row.push_back(format_real(chars.difficulty(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))));
            out += csv_line(row);
        }
        write_file(out_dir / "question_characteristics.csv", out, files);

        json spec = base_spec("Relevance against difficulty per dimension", "question_characteristics.csv");
        spec["repeat"] = {{"column", dim_columns("r", m)}};
        spec["spec"] = {{"mark", {{"type", "point"}, {"opacity", 0.4}}},
                        {"encoding",
                         {{"x", {{"field", {{"repeat", "column"}}}, {"type", "quantitative"}}},
                          {"y", {{"field", "d_1"}, {"type", "quantitative"}}}}}};
        write_spec(out_dir, "question_characteristics", spec, files);
    }

    {
        std::string out;
        std::vector<std::string> header{"agent_id"};
        for (auto& c : dim_columns("s", m)) header.push_back(c);
        out += csv_line(header);
        for (std::size_t a = 0; a < params.agent_count(); ++a) {
            std::vector<std::string> row{model.agent_ids.at(a)};
            for (std::size_t k = 0; k < m; ++k) row.push_back(format_real(params.agent_skills(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k))));
            out += csv_line(row);
        }
        write_file(out_dir / "agent_skills.csv", out, files);

        json spec = base_spec("Agent skills per dimension", "agent_skills.csv");
        spec["transform"] = json::array({fold_of(dim_columns("s", m), "dimension", "skill")});
        spec["mark"] = "rect";
        spec["encoding"] = {{"x", {{"field", "dimension"}, {"type", "nominal"}}},
                            {"y", {{"field", "agent_id"}, {"type", "nominal"}}},
                            {"color", {{"field", "skill"}, {"type", "quantitative"}}}};
        write_spec(out_dir, "agent_skills", spec, files);
    }

    {
        // Relevance lies in [0, 1]; the last bin is closed on the right.
        const int bins = options.histogram_bins;
        std::string out = csv_line({"dimension", "bin_lower", "bin_upper", "count"});
        for (std::size_t k = 0; k < m; ++k) {
            std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
            for (Eigen::Index j = 0; j < chars.relevance.rows(); ++j) {
                const double r = chars.relevance(j, static_cast<Eigen::Index>(k));
                auto b = static_cast<int>(std::floor(r * bins));
                b = std::clamp(b, 0, bins - 1);
                ++counts[static_cast<std::size_t>(b)];
            }
            for (int b = 0; b < bins; ++b) {
                out += csv_line({std::to_string(k + 1), format_real(static_cast<double>(b) / bins),
                                 format_real(static_cast<double>(b + 1) / bins),
                                 std::to_string(counts[static_cast<std::size_t>(b)])});
            }
        }
        write_file(out_dir / "relevance_distribution.csv", out, files);

        json spec = base_spec("Distribution of relevance per dimension", "relevance_distribution.csv");
        spec["mark"] = "bar";
        spec["encoding"] = {{"row", {{"field", "dimension"}, {"type", "ordinal"}}},
                            {"x", {{"field", "bin_lower"}, {"type", "quantitative"}, {"bin", {{"binned", true}}}}},
                            {"x2", {{"field", "bin_upper"}}},
                            {"y", {{"field", "count"}, {"type", "quantitative"}}}};
        write_spec(out_dir, "relevance_distribution", spec, files);
    }
    return files;
}

ReportFiles emit_cluster_reports(const Checkpoint& model, const EmbeddingStore& store, const ResponseMatrix* matrix,
                                 const std::filesystem::path& out_dir, const ReportOptions& options) {
    const auto& params = model.params;
    if (store.dim() != params.embedding_dim()) {
        throw ConfigError(fmt::format("store dimension {} does not match model input dimension {}", store.dim(),
                                      params.embedding_dim()));
    }
    ensure_directory(out_dir);
    ReportFiles files;
    const std::size_t m = params.dims();
    const ItemCharacteristics chars = compute_all_characteristics(params, store);
    const Eigen::MatrixXd eff = effective_difficulty(chars);
    KMeansOptions km;
    km.threads = options.threads;
    const KMeansResult clustering = kmeans_cluster(eff, options.k, options.seed, km);
    const ClusterReport report = build_cluster_report(chars, clustering.assignments, options.k, options.labels);
    logger()->info("event=clustered k={} wcss={} best_restart={}", options.k, format_real(clustering.wcss),
                   clustering.best_restart);

    {
        std::string out = csv_line({"item_id", "cluster"});
        for (std::size_t j = 0; j < store.size(); ++j) out += csv_line({store.ids()[j], std::to_string(report.assignments[j])});
        write_file(out_dir / "clusters.csv", out, files);

        json spec = base_spec("Items per cluster", "clusters.csv");
        spec["mark"] = "bar";
        spec["encoding"] = {{"x", {{"field", "cluster"}, {"type", "ordinal"}}},
                            {"y", {{"aggregate", "count"}, {"type", "quantitative"}}}};
        write_spec(out_dir, "clusters", spec, files);
    }

    {
        std::vector<std::string> header{"cluster", "label", "size", "difficulty_rank", "overall_difficulty"};
        for (auto& c : dim_columns("mean_r", m)) header.push_back(c);
        for (auto& c : dim_columns("mean_eff", m)) header.push_back(c);
        std::string out = csv_line(header);
        for (const auto& c : report.clusters) {
            std::vector<std::string> row{std::to_string(c.id), c.label, std::to_string(c.size),
                                         std::to_string(c.difficulty_rank), format_real(c.overall_difficulty)};
            for (Eigen::Index k = 0; k < c.mean_relevance.size(); ++k) row.push_back(format_real(c.mean_relevance(k)));
            for (Eigen::Index k = 0; k < c.mean_effective_difficulty.size(); ++k) {
                row.push_back(format_real(c.mean_effective_difficulty(k)));
            }
            out += csv_line(row);
        }
        write_file(out_dir / "cluster_summary.csv", out, files);

        json spec = base_spec("Mean effective difficulty per cluster and dimension", "cluster_summary.csv");
        spec["transform"] = json::array({fold_of(dim_columns("mean_eff", m), "dimension", "mean_effective_difficulty")});
        spec["mark"] = "rect";
        spec["encoding"] = {
            {"x", {{"field", "dimension"}, {"type", "nominal"}}},
            {"y", {{"field", "cluster"}, {"type", "ordinal"}, {"sort", {{"field", "difficulty_rank"}}}}},
            {"color", {{"field", "mean_effective_difficulty"}, {"type", "quantitative"}}}};
        write_spec(out_dir, "cluster_summary", spec, files);
    }

    if (matrix) {
        std::map<std::string, std::size_t> item_clusters;
        for (std::size_t j = 0; j < store.size(); ++j) item_clusters[store.ids()[j]] = report.assignments[j];
        const auto cells = accuracy_slices(*matrix, item_clusters, static_cast<std::size_t>(options.k), options.agent_types);
        std::string out = csv_line({"scope", "name", "cluster", "correct", "answered", "accuracy"});
        for (const auto& cell : cells) {
            const auto acc = cell.accuracy();
            out += csv_line({cell.scope, cell.name, cell.cluster ? std::to_string(*cell.cluster) : "all",
                             std::to_string(cell.correct), std::to_string(cell.answered),
                             acc ? format_real(*acc) : "NA"});
        }
        write_file(out_dir / "accuracy_slices.csv", out, files);

        json spec = base_spec("Accuracy per agent type and cluster", "accuracy_slices.csv");
        spec["transform"] = json::array({json{{"filter", "datum.scope == 'type' && datum.accuracy != 'NA'"}}});
        spec["mark"] = "rect";
        spec["encoding"] = {{"x", {{"field", "cluster"}, {"type", "ordinal"}}},
                            {"y", {{"field", "name"}, {"type", "nominal"}}},
                            {"color", {{"field", "accuracy"}, {"type", "quantitative"}}}};
        write_spec(out_dir, "accuracy_slices", spec, files);
    }
    return files;
}

ReportFiles emit_reports(const Checkpoint& model, const EmbeddingStore& store, const ResponseMatrix& matrix,
                         const std::filesystem::path& out_dir, const ReportOptions& options) {
    ReportFiles files = emit_characteristic_reports(model, store, out_dir, options);
    ReportFiles more = emit_cluster_reports(model, store, &matrix, out_dir, options);
    files.written.insert(files.written.end(), more.written.begin(), more.written.end());
    return files;
}

}  // namespace caimira
