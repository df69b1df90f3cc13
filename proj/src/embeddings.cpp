#include "caimira/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "caimira/dataset.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

using json = nlohmann::json;

std::string assemble_embedding_text(const Item& item, const Question& q) {
    std::string text = item.text;
    text += kEmbeddingSeparator;
    text += q.answer;
    text += kEmbeddingSeparator;
    text += q.wiki_summary.value_or("");
    return text;
}

EmbeddingStore::EmbeddingStore(std::vector<std::string> ids, Eigen::MatrixXd matrix)
    : ids_(std::move(ids)), matrix_(std::move(matrix)) {
    if (static_cast<Eigen::Index>(ids_.size()) != matrix_.rows()) {
        throw FormatError(fmt::format("{} ids for {} embedding rows", ids_.size(), matrix_.rows()));
    }
    for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix_.cols(); ++c) {
            const float f = static_cast<float>(matrix_(r, c));
            if (!std::isfinite(f)) {
                throw DataError(fmt::format("non-finite embedding value for {} at component {}", ids_[r], c));
            }
            matrix_(r, c) = f;
        }
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!lookup_.emplace(ids_[i], i).second) throw IntegrityError("duplicate embedding id " + ids_[i]);
    }
    mean_ = matrix_.rows() > 0 ? Eigen::VectorXd(matrix_.colwise().mean().transpose())
                               : Eigen::VectorXd::Zero(matrix_.cols());
}

std::optional<std::size_t> EmbeddingStore::index_of(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

namespace {

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

}  // namespace

std::string embedding_header_json(const EmbeddingStore& store) {
    json header = {{"version", 1},      {"dim", store.dim()}, {"count", store.size()},
                   {"ids", store.ids()}, {"dtype", "f32"},     {"order", "little"}};
    return header.dump(2) + "\n";
}

std::vector<char> embedding_blob(const EmbeddingStore& store) {
    const auto& m = store.matrix();
    std::vector<char> blob(static_cast<std::size_t>(m.rows() * m.cols()) * 4);
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
            std::memcpy(blob.data() + offset, &bits, 4);
            offset += 4;
        }
    }
    return blob;
}

EmbeddingStore load_embedding_store(std::string_view header_text, std::span<const char> blob) {
    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("embedding header: ") + e.what());
    }
    std::size_t dim = 0, count = 0;
    std::vector<std::string> ids;
    try {
        if (header.value("version", 0) != 1) throw FormatError("embedding header: unsupported version");
        if (header.value("dtype", "") != "f32") throw FormatError("embedding header: dtype must be f32");
        if (header.value("order", "") != "little") throw FormatError("embedding header: order must be little");
        dim = header.at("dim").get<std::size_t>();
        count = header.at("count").get<std::size_t>();
        ids = header.at("ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("embedding header: ") + e.what());
    }
    if (ids.size() != count) throw FormatError(fmt::format("embedding header lists {} ids but count is {}", ids.size(), count));
    const std::size_t expected = count * dim * 4;
    if (blob.size() != expected) {
        throw FormatError(fmt::format("embedding blob has {} bytes, expected {} ({} x {} float32)", blob.size(), expected,
                                      count, dim));
    }
    Eigen::MatrixXd matrix(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    std::size_t offset = 0;
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            std::uint32_t bits;
            std::memcpy(&bits, blob.data() + offset, 4);
            offset += 4;
            const float f = std::bit_cast<float>(to_little(bits));
            if (!std::isfinite(f)) throw DataError(fmt::format("non-finite embedding value for {} at component {}", ids[r], c));
            matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f;
        }
    }
    return EmbeddingStore(std::move(ids), std::move(matrix));
}

EmbeddingStore load_embedding_store(const std::filesystem::path& prefix) {
    std::filesystem::path header = prefix, blob = prefix;
    header += ".json";
    blob += ".bin";
    const std::string text = read_text_file(header);
    const std::vector<char> bytes = read_binary_file(blob);
    return load_embedding_store(text, bytes);
}

void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& prefix) {
    std::filesystem::path header = prefix, blob = prefix;
    header += ".json";
    blob += ".bin";
    write_text_file(header, embedding_header_json(store));
    write_binary_file(blob, embedding_blob(store));
}

Eigen::MatrixXd fetch_embeddings(const EmbeddingStore& store, std::span<const std::string> ids) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(store.dim()));
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto idx = store.index_of(ids[k]);
        if (!idx) throw LookupError("unknown embedding id " + ids[k]);
        out.row(static_cast<Eigen::Index>(k)) = store.matrix().row(static_cast<Eigen::Index>(*idx));
    }
    return out;
}

}  // namespace caimira
