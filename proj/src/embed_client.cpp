#include <regex>
#include <thread>

// Eigen must precede httplib: <resolv.h> defines a _res macro.
#include "caimira/embeddings.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

using json = nlohmann::json;

namespace {

struct Endpoint {
    std::string host;
    int port = 80;
    std::string path = "/embed";
};

Endpoint parse_endpoint(const std::string& url) {
    static const std::regex pattern(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) {
        throw ConfigError("embedding endpoint must look like http://host[:port][/path], got '" + url + "'");
    }
    Endpoint ep;
    ep.host = m[1].str();
    if (m[2].matched) ep.port = std::stoi(m[2].str());
    if (m[3].matched && m[3].str() != "/") ep.path = m[3].str();
    return ep;
}

// Returns the embeddings of one batch, retrying connection failures and 5xx
// responses with exponential backoff.
std::vector<std::vector<double>> post_batch(httplib::Client& client, const Endpoint& ep,
                                            std::span<const std::string> texts, const EmbedClientOptions& options) {
    const std::string body = json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
    auto backoff = options.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        if (attempt > 0) {
            logger()->warn("event=embed_retry attempt={} reason=\"{}\"", attempt, last_error);
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(ep.path, body, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200) throw TransportError(fmt::format("embedding service returned HTTP {}", res->status));
        json payload;
        try {
            payload = json::parse(res->body);
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("embedding service sent invalid JSON: ") + e.what());
        }
        if (!payload.contains("embeddings") || !payload["embeddings"].is_array()) {
            throw ProtocolError("embedding response lacks an 'embeddings' list");
        }
        std::vector<std::vector<double>> rows;
        try {
            rows = payload["embeddings"].get<std::vector<std::vector<double>>>();
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("embedding rows must be numeric lists: ") + e.what());
        }
        if (rows.size() != texts.size()) {
            throw ProtocolError(fmt::format("sent {} texts but received {} embeddings", texts.size(), rows.size()));
        }
        return rows;
    }
    throw TransportError(fmt::format("embedding request failed after {} retries: {}", options.max_retries, last_error));
}

}  // namespace

Eigen::MatrixXd request_embeddings(const std::string& endpoint, std::span<const std::string> texts,
                                   const EmbedClientOptions& options) {
    if (texts.empty()) return Eigen::MatrixXd(0, 0);
    if (options.batch_size == 0) throw ConfigError("embedding batch size must be >= 1");
    const Endpoint ep = parse_endpoint(endpoint);
    httplib::Client client(ep.host, ep.port);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);

    std::vector<std::vector<double>> rows;
    rows.reserve(texts.size());
    std::size_t dim = 0;
    for (std::size_t start = 0; start < texts.size(); start += options.batch_size) {
        const std::size_t len = std::min(options.batch_size, texts.size() - start);
        auto batch = post_batch(client, ep, texts.subspan(start, len), options);
        for (auto& row : batch) {
            if (rows.empty()) dim = row.size();
            if (row.size() != dim || dim == 0) {
                throw ProtocolError(fmt::format("embedding dimension mismatch: expected {}, got {}", dim, row.size()));
            }
            rows.push_back(std::move(row));
        }
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return out;
}

}  // namespace caimira
