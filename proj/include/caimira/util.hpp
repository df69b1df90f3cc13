#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spdlog {
class logger;
}

namespace caimira {

// Seeded generator whose derived draws do not depend on the standard
// library's distribution implementations, so sequences are stable across
// toolchains. Engine is mt19937_64.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    ~Rng();
    Rng(const Rng& other);
    Rng& operator=(const Rng& other);

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);
    // Uniform integer in [0, bound), rejection sampled.
    std::uint64_t uniform_index(std::uint64_t bound);
    // Box-Muller; caches the second variate.
    double normal();
    bool bernoulli(double p);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    struct Engine;
    std::unique_ptr<Engine> engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derive an independent seed for a sub-stream (restart, replication...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Shortest decimal representation that round-trips; "NA" for NaN.
std::string format_real(double x);

// Minimal RFC 4180 CSV support.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);
std::string join_csv(std::span<const std::string> fields);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    // Index of a header column, or npos.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in, const std::string& source_name);
CsvTable read_csv_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
std::vector<char> read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
void write_binary_file(const std::filesystem::path& path, std::span<const char> bytes);
void ensure_directory(const std::filesystem::path& dir);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// visited exactly once; callers write into per-index slots so results do
// not depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

// Worker cap shared by the library; 0 means hardware concurrency.
void set_thread_limit(std::size_t threads);
std::size_t thread_limit();

// Structured key=value log lines on stderr.
std::shared_ptr<spdlog::logger> logger();

}  // namespace caimira
