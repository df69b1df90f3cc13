#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace caimira {

struct Item;
struct Question;

inline constexpr std::string_view kEmbeddingSeparator = " [SEP] ";

// Embedder input: item text, answer and the answer's page summary.
std::string assemble_embedding_text(const Item& item, const Question& q);

// Frozen question embeddings, one row per item id. Values are held in
// double precision but are always exactly representable as float32, which
// is the on-disk type, so save/load is lossless.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    // Rounds every value to float32. Throws DataError on non-finite values
    // and IntegrityError on duplicate ids.
    EmbeddingStore(std::vector<std::string> ids, Eigen::MatrixXd matrix);

    std::size_t dim() const { return static_cast<std::size_t>(matrix_.cols()); }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    Eigen::VectorXd row(std::size_t i) const { return matrix_.row(static_cast<Eigen::Index>(i)).transpose(); }
    std::optional<std::size_t> index_of(std::string_view id) const;

private:
    std::vector<std::string> ids_;
    Eigen::MatrixXd matrix_;
    Eigen::VectorXd mean_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

// Header is the JSON text of <name>.json; blob is <name>.bin.
EmbeddingStore load_embedding_store(std::string_view header, std::span<const char> blob);
// `prefix` names the pair without extension: prefix.json + prefix.bin.
EmbeddingStore load_embedding_store(const std::filesystem::path& prefix);
void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& prefix);

std::string embedding_header_json(const EmbeddingStore& store);
std::vector<char> embedding_blob(const EmbeddingStore& store);

// Rows in request order; unknown ids throw LookupError.
Eigen::MatrixXd fetch_embeddings(const EmbeddingStore& store, std::span<const std::string> ids);

struct EmbedClientOptions {
    std::size_t batch_size = 64;
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
    std::chrono::seconds timeout{60};
};

// POSTs {"texts": [...]} batches to the embedding service and expects
// {"embeddings": [[...], ...]} back. `endpoint` is http://host[:port][/path];
// the path defaults to /embed.
Eigen::MatrixXd request_embeddings(const std::string& endpoint, std::span<const std::string> texts,
                                   const EmbedClientOptions& options = {});

}  // namespace caimira
