#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "caimira/error.hpp"
#include "caimira/irt.hpp"
#include "caimira/util.hpp"

namespace caimira {

using json = nlohmann::json;

namespace {

void put_float(std::vector<char>& out, double v) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    const auto offset = out.size();
    out.resize(offset + 4);
    std::memcpy(out.data() + offset, &bits, 4);
}

template <typename Mat>
void put_block(std::vector<char>& out, const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_float(out, m(r, c));
    }
}

class BlobReader {
public:
    explicit BlobReader(std::span<const char> blob) : blob_(blob) {}

    double next() {
        std::uint32_t bits;
        std::memcpy(&bits, blob_.data() + offset_, 4);
        offset_ += 4;
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f)) throw DataError("checkpoint holds a non-finite parameter");
        return f;
    }

    template <typename Mat>
    void fill(Mat& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = next();
        }
    }

private:
    std::span<const char> blob_;
    std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& prefix) {
    const auto& p = checkpoint.params;
    p.validate();
    if (checkpoint.agent_ids.size() != p.agent_count()) throw ContractError("agent id count does not match skill rows");
    json manifest = {{"version", 1},
                     {"m", p.dims()},
                     {"n", p.embedding_dim()},
                     {"n_a", p.agent_count()},
                     {"agent_ids", checkpoint.agent_ids},
                     {"item_store_ref", checkpoint.item_store_ref},
                     {"dtype", "f32"},
                     {"order", "little"},
                     {"blocks", {"agent_skills", "W_R", "b_R", "W_D", "mean_embedding"}}};
    std::vector<char> blob;
    put_block(blob, p.agent_skills);
    put_block(blob, p.w_rel);
    put_block(blob, p.b_rel);
    put_block(blob, p.w_diff);
    put_block(blob, p.mean_embedding);

    std::filesystem::path manifest_path = prefix, blob_path = prefix;
    manifest_path += ".json";
    blob_path += ".bin";
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    write_binary_file(blob_path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& prefix) {
    std::filesystem::path manifest_path = prefix, blob_path = prefix;
    manifest_path += ".json";
    blob_path += ".bin";
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    Checkpoint cp;
    std::size_t m = 0, n = 0, n_a = 0;
    try {
        if (manifest.value("version", 0) != 1) throw FormatError(manifest_path.string() + ": unsupported version");
        m = manifest.at("m").get<std::size_t>();
        n = manifest.at("n").get<std::size_t>();
        n_a = manifest.at("n_a").get<std::size_t>();
        cp.agent_ids = manifest.at("agent_ids").get<std::vector<std::string>>();
        cp.item_store_ref = manifest.value("item_store_ref", "");
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    if (cp.agent_ids.size() != n_a) throw FormatError(manifest_path.string() + ": agent_ids length differs from n_a");
    const std::vector<char> blob = read_binary_file(blob_path);
    const std::size_t expected = (n_a * m + 2 * m * n + m + n) * 4;
    if (blob.size() != expected) {
        throw FormatError(fmt::format("{}: {} bytes, expected {}", blob_path.string(), blob.size(), expected));
    }
    const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n);
    auto& p = cp.params;
    p.agent_skills.resize(static_cast<Eigen::Index>(n_a), M);
    p.w_rel.resize(M, N);
    p.b_rel.resize(M);
    p.w_diff.resize(M, N);
    p.mean_embedding.resize(N);
    BlobReader reader(blob);
    reader.fill(p.agent_skills);
    reader.fill(p.w_rel);
    reader.fill(p.b_rel);
    reader.fill(p.w_diff);
    reader.fill(p.mean_embedding);
    p.validate();
    return cp;
}

}  // namespace caimira
