#include <doctest.h>

#include <cstdlib>
#include <thread>

#include "caimira/cli.hpp"
#include "caimira/dataset.hpp"
#include "caimira/error.hpp"
#include "caimira/irt.hpp"
#include "caimira/util.hpp"
#include "cli/commands.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace caimira;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CAIMIRA_FIXTURE_DIR;

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "caimira");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("caimira_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<std::string> ingest_args(const fs::path& bank, const fs::path& logs, const fs::path& out) {
    return {"ingest", "--bank", bank.string(), "--logs", logs.string(), "--no-groups", "--out", out.string()};
}

}  // namespace

TEST_CASE("ingest toy fixture") {
    const auto out = fresh_dir("ingest");
    REQUIRE(run_cli(ingest_args(kFixtures / "toy_bank.jsonl", kFixtures / "toy_logs.csv", out)) == 0);
    const auto m = load_response_csv(out / "responses.csv");
    CHECK(m.agent_count() == 3);
    CHECK(m.entry_count() == 9);
    std::ifstream items(out / "items.jsonl");
    CHECK(parse_items(items).size() == 5);
    const auto manifest = cli::read_manifest(out / "manifest.json");
    CHECK(manifest.command == "ingest");
    CHECK(manifest.version == cli::kToolVersion);
    CHECK(manifest.inputs.size() == 2);
    CHECK(manifest.config.at("no-groups") == "true");
    CHECK(manifest.config.at("no-backfill") == "false");
    CHECK(manifest.config.count("threads") == 0);
    for (const auto& o : manifest.outputs) CHECK(cli::sha256_file(out / o.path) == o.sha256);
}

TEST_CASE("rerun produces identical artifacts") {
    const auto a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
    REQUIRE(run_cli(ingest_args(kFixtures / "toy_bank.jsonl", kFixtures / "toy_logs.csv", a)) == 0);
    REQUIRE(run_cli(ingest_args(kFixtures / "toy_bank.jsonl", kFixtures / "toy_logs.csv", b)) == 0);
    for (const char* f : {"responses.csv", "players.csv", "bank.jsonl", "items.jsonl"}) CHECK(read_text_file(a / f) == read_text_file(b / f));
}

TEST_CASE("missing input is a config error naming the path") {
    const auto out = fresh_dir("missing");
    CHECK(run_cli({"train", "--responses", "/nonexistent/r.csv", "--embeddings", "/nonexistent/e", "--out", out.string()}) == cli::kExitConfig);
    cli::TrainArgs args;
    args.responses = "/nonexistent/r.csv";
    args.embeddings = "/nonexistent/e";
    cli::Common common;
    common.out = out;
    CHECK_THROWS_WITH_AS(cli::cmd_train(args, common), doctest::Contains("/nonexistent/r.csv"), ConfigError);
    CHECK(run_cli({"train", "--bogus-flag"}) == cli::kExitConfig);
}

TEST_CASE("data errors exit with 3") {
    const auto dir = fresh_dir("dataerr");
    ensure_directory(dir);
    write_text_file(dir / "extra.csv", "agent_id,item_id,value,origin\nx,q404_1,1,observed\n");
    CHECK(run_cli({"ingest", "--bank", (kFixtures / "toy_bank.jsonl").string(), "--responses", (dir / "extra.csv").string(),
                   "--out", (dir / "out").string()}) == cli::kExitData);
    write_text_file(dir / "bad.jsonl", "{not json\n");
    CHECK(run_cli({"ingest", "--bank", (dir / "bad.jsonl").string(), "--responses", (dir / "extra.csv").string(), "--out",
                   (dir / "out2").string()}) == cli::kExitData);
}

TEST_CASE("verify detects input drift") {
    const auto dir = fresh_dir("verify");
    ensure_directory(dir);
    fs::copy_file(kFixtures / "toy_bank.jsonl", dir / "bank.jsonl");
    fs::copy_file(kFixtures / "toy_logs.csv", dir / "logs.csv");
    const auto out = dir / "out";
    const auto args = ingest_args(dir / "bank.jsonl", dir / "logs.csv", out);
    REQUIRE(run_cli(args) == 0);
    CHECK(run_cli({"verify", (out / "manifest.json").string()}) == 0);
    auto again = args;
    again.push_back("--verify");
    CHECK(run_cli(again) == 0);
    write_text_file(dir / "logs.csv", read_text_file(dir / "logs.csv") + "p3,q1,1,x,0,2024-03-02T00:00:00Z\n");
    CHECK(run_cli({"verify", (out / "manifest.json").string()}) == cli::kExitData);
    CHECK(run_cli(again) == cli::kExitData);
    CHECK(cli::verify_manifest(cli::read_manifest(out / "manifest.json")).size() == 1);
}

TEST_CASE("flags override the run config") {
    const auto dir = fresh_dir("precedence");
    ensure_directory(dir);
    write_text_file(dir / "run.json", R"({"synth": {"n_agents": 5, "n_items": 30, "dim": 4}})");
    REQUIRE(run_cli({"--run-config", (dir / "run.json").string(), "synth", "--n-agents", "4", "--out", (dir / "a").string()}) == 0);
    const auto truth = load_checkpoint(dir / "a" / "truth");
    CHECK(truth.agent_ids.size() == 4);
    CHECK(load_embedding_store(dir / "a" / "embeddings").size() == 30);
    CHECK(truth.params.embedding_dim() == 4);

    write_text_file(dir / "synth.json", R"({"n_agents": 3, "n_items": 12, "n": 3, "seed": 9})");
    REQUIRE(run_cli({"synth", "--config", (dir / "synth.json").string(), "--out", (dir / "b").string()}) == 0);
    CHECK(cli::read_manifest(dir / "b" / "manifest.json").seed == 9);
    CHECK(load_checkpoint(dir / "b" / "truth").agent_ids.size() == 3);
}

TEST_CASE("environment sits between file and flags") {
    httplib::Server server;
    server.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json out = nlohmann::json::array();
        const auto body = nlohmann::json::parse(req.body);
        for (const auto& t : body.at("texts")) out.push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
        res.set_content(nlohmann::json{{"embeddings", out}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string url = "http://127.0.0.1:" + std::to_string(port) + "/embed";

    const auto dir = fresh_dir("env");
    REQUIRE(run_cli(ingest_args(kFixtures / "toy_bank.jsonl", kFixtures / "toy_logs.csv", dir / "data")) == 0);
    write_text_file(dir / "run.json", R"({"embed": {"endpoint": "http://127.0.0.1:1/embed", "max_retries": 0}})");
    const std::vector<std::string> base{"--run-config", (dir / "run.json").string(), "embed", "--items", (dir / "data" / "items.jsonl").string(),
                                        "--bank", (dir / "data" / "bank.jsonl").string()};
    auto with_out = [&](std::vector<std::string> extra, const std::string& out) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        args.push_back("--out");
        args.push_back((dir / out).string());
        return args;
    };
    CHECK(run_cli(with_out({}, "file_only")) == cli::kExitData);
    ::setenv("CAIMIRA_EMBED_URL", url.c_str(), 1);
    CHECK(run_cli(with_out({}, "env")) == 0);
    CHECK(load_embedding_store(dir / "env" / "embeddings").size() == 5);
    CHECK(cli::read_manifest(dir / "env" / "manifest.json").config.at("endpoint") == url);
    CHECK(run_cli(with_out({"--endpoint", "http://127.0.0.1:1/embed"}, "flag")) == cli::kExitData);
    ::unsetenv("CAIMIRA_EMBED_URL");
    server.stop();
    thread.join();
}

TEST_CASE("eval-match pairs file") {
    const auto dir = fresh_dir("evalmatch");
    ensure_directory(dir);
    write_text_file(dir / "pairs.csv", "guess,answer,aliases\npianoforte,Piano,Pianoforte|Klavier\nviolin,Piano,\n");
    REQUIRE(run_cli({"eval-match", "--pairs", (dir / "pairs.csv").string(), "--out", (dir / "out").string()}) == 0);
    const auto t = read_csv_file(dir / "out" / "match_results.csv");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][t.column("correct")] == "1");
    CHECK(t.rows[1][t.column("correct")] == "0");
}

TEST_CASE("train defaults follow the reference settings") {
    const TrainConfig cfg;
    CHECK(cfg.m == 5);
    CHECK(cfg.learning_rate == 0.005);
    CHECK(cfg.batch_size == 512);
    CHECK(cfg.lambda_d == 1e-5);
    CHECK(cfg.lambda_s == 1e-5);
    CHECK(cli::ReportArgs{}.k == 12);
}
