#include <chrono>
#include <fstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "caimira/cli.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira::cli {

using json = nlohmann::ordered_json;

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256 initialization failed");
    }
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

Manifest make_manifest(const std::string& command, std::uint64_t seed, std::map<std::string, std::string> config,
                       const std::vector<std::filesystem::path>& inputs,
                       const std::vector<std::filesystem::path>& outputs) {
    Manifest m;
    m.command = command;
    m.seed = seed;
    m.config = std::move(config);
    for (const auto& p : inputs) m.inputs.push_back({std::filesystem::absolute(p).lexically_normal().string(), sha256_file(p)});
    for (const auto& p : outputs) m.outputs.push_back({p.filename().string(), sha256_file(p)});
    m.timestamp = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                           std::chrono::system_clock::now())));
    return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    auto entries = [](const std::vector<ManifestEntry>& list) {
        json arr = json::array();
        for (const auto& e : list) arr.push_back({{"path", e.path}, {"sha256", e.sha256}});
        return arr;
    };
    json config = json::object();
    for (const auto& [k, v] : manifest.config) config[k] = v;
    const json doc = {{"tool", "caimira"},
                      {"version", manifest.version},
                      {"command", manifest.command},
                      {"seed", manifest.seed},
                      {"config", config},
                      {"inputs", entries(manifest.inputs)},
                      {"outputs", entries(manifest.outputs)},
                      {"timestamp", manifest.timestamp}};
    write_text_file(path, doc.dump(2) + "\n");
}

Manifest read_manifest(const std::filesystem::path& path) {
    Manifest m;
    try {
        const json doc = json::parse(read_text_file(path));
        m.command = doc.at("command").get<std::string>();
        m.version = doc.at("version").get<std::string>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& [k, v] : doc.at("config").items()) m.config[k] = v.get<std::string>();
        for (const auto& e : doc.at("inputs")) m.inputs.push_back({e.at("path"), e.at("sha256")});
        for (const auto& e : doc.at("outputs")) m.outputs.push_back({e.at("path"), e.at("sha256")});
        m.timestamp = doc.value("timestamp", "");
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return m;
}

std::vector<std::string> verify_manifest(const Manifest& manifest) {
    std::vector<std::string> problems;
    for (const auto& input : manifest.inputs) {
        if (!std::filesystem::exists(input.path)) {
            problems.push_back(fmt::format("missing input {}", input.path));
            continue;
        }
        const std::string now = sha256_file(input.path);
        if (now != input.sha256) problems.push_back(fmt::format("input {} changed: recorded {} now {}", input.path, input.sha256, now));
    }
    return problems;
}

}  // namespace caimira::cli
