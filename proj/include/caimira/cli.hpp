#pragma once

// Command-line front end: verbs, run-config merging, provenance manifests
// and exit codes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace caimira::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitTraining = 4,
};

// Runs one command; never throws.
int run(int argc, const char* const* argv);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::string path;
    std::string sha256;
};

struct Manifest {
    std::string command;
    std::string version = kToolVersion;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::vector<ManifestEntry> inputs;
    std::vector<ManifestEntry> outputs;
    std::string timestamp;
};

Manifest make_manifest(const std::string& command, std::uint64_t seed, std::map<std::string, std::string> config,
                       const std::vector<std::filesystem::path>& inputs,
                       const std::vector<std::filesystem::path>& outputs);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// Re-hashes every recorded input; returns one line per drifted or missing
// file (empty when everything matches).
std::vector<std::string> verify_manifest(const Manifest& manifest);

}  // namespace caimira::cli
