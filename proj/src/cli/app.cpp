#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "caimira/analysis.hpp"
#include "caimira/cli.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"
#include "commands.hpp"

namespace caimira::cli {

namespace {

using json = nlohmann::json;

constexpr std::array<const char*, 11> kVerbs{"ingest",    "embed",     "train", "ablate",  "analyze",   "cluster",
                                             "interpret", "synth",     "recover", "eval-match", "verify"};

bool is_verb(const std::string& arg) {
    return std::find_if(kVerbs.begin(), kVerbs.end(), [&](const char* v) { return arg == v; }) != kVerbs.end();
}

// Global options that take a value; needed to find the verb before parsing.
bool global_takes_value(const std::string& arg) {
    return arg == "--run-config" || arg == "--threads" || arg == "--log-level";
}

std::string find_run_config(const std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--run-config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--run-config=", 0) == 0) path = args[i].substr(13);
    }
    return path;
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) out += (out.empty() ? "" : ",") + scalar_text(e);
        return out;
    }
    return v.dump();
}

std::string option_key(std::string key, const std::string& verb) {
    std::replace(key.begin(), key.end(), '_', '-');
    if (verb == "synth" && key == "n") key = "dim";
    return key;
}

// Run-config values become "--key=value" arguments placed ahead of the
// environment and the user's flags; with take-last semantics the later
// source wins.
std::vector<std::string> config_args(const std::string& path, const std::string& verb, CLI::App& app,
                                     CLI::App* sub) {
    if (path.empty()) return {};
    if (!std::filesystem::is_regular_file(path)) throw ConfigError("run config not found: " + path);
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    if (!doc.is_object()) throw ConfigError(path + ": run config must be a JSON object");
    std::vector<std::string> out;
    auto emit = [&](const std::string& raw_key, const json& value, bool strict) {
        const std::string key = option_key(raw_key, verb);
        if (key == "run-config") throw ConfigError(path + ": run config cannot name another run config");
        const bool known = (sub && sub->get_option_no_throw("--" + key)) || app.get_option_no_throw("--" + key);
        if (!known) {
            if (strict) throw ConfigError(fmt::format("{}: unknown option '{}' for {}", path, raw_key, verb));
            return;
        }
        if (value.is_boolean()) {
            out.push_back(fmt::format("--{}={}", key, value.get<bool>() ? "true" : "false"));
        } else if (!value.is_null()) {
            out.push_back(fmt::format("--{}={}", key, scalar_text(value)));
        }
    };
    for (const auto& [key, value] : doc.items()) {
        if (key == "global" || is_verb(key)) continue;
        if (value.is_object()) throw ConfigError(fmt::format("{}: unknown section '{}'", path, key));
        emit(key, value, true);
    }
    if (doc.contains("global")) {
        for (const auto& [key, value] : doc.at("global").items()) emit(key, value, true);
    }
    if (doc.contains(verb)) {
        for (const auto& [key, value] : doc.at(verb).items()) emit(key, value, true);
    }
    return out;
}

std::vector<std::string> env_args(const std::string& verb) {
    std::vector<std::string> out;
    if (const char* threads = std::getenv("CAIMIRA_THREADS"); threads && *threads) {
        out.push_back(fmt::format("--threads={}", threads));
    }
    if (const char* url = std::getenv("CAIMIRA_EMBED_URL"); url && *url && verb == "embed") {
        out.push_back(fmt::format("--endpoint={}", url));
    }
    return out;
}

void record_options(const CLI::App& app, ConfigRecord& record) {
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "version" || name == "run-config") continue;
        const bool flag = opt->get_expected_max() == 0;
        if (opt->count() > 0) {
            const auto& results = opt->results();
            record[name] = results.empty() ? "true" : results.back();
        } else {
            record[name] = flag ? "false" : opt->get_default_str();
        }
    }
}

void add_common(CLI::App* sub, Common& common, bool out_required) {
    auto* out = sub->add_option("--out", common.out, "Output directory");
    if (out_required) out->required();
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_flag("--verify", common.verify, "Re-hash recorded inputs in <out>/manifest.json first; fail on drift");
}

void add_train_options(CLI::App* sub, TrainArgs& a, double& lambda) {
    sub->add_option("--bank", a.bank, "Question bank JSONL (recorded in the manifest)");
    sub->add_option("--lambda", lambda, "Sets both L1 weights unless --lambda-d/--lambda-s are given");
    sub->add_option("--responses", a.responses, "Response matrix CSV")->required();
    sub->add_option("--embeddings", a.embeddings, "Embedding store prefix (<prefix>.json + .bin)")->required();
    sub->add_option("--m", a.train.m, "Latent dimensions");
    sub->add_option("--lr", a.train.learning_rate, "Adam learning rate");
    sub->add_option("--batch-size", a.train.batch_size, "Minibatch size");
    sub->add_option("--lambda-d", a.train.lambda_d, "L1 weight on item difficulties");
    sub->add_option("--lambda-s", a.train.lambda_s, "L1 weight on agent skills");
    sub->add_option("--epochs", a.train.max_epochs, "Maximum epochs");
    sub->add_option("--patience", a.train.early_stop_patience, "Early stopping patience in epochs");
    sub->add_option("--val-fraction", a.train.validation_fraction, "Per-agent validation fraction");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const TrainingError*>(&e)) return kExitTraining;
    if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IntegrityError*>(&e) ||
        dynamic_cast<const DataError*>(&e) || dynamic_cast<const LookupError*>(&e) ||
        dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProtocolError*>(&e) ||
        dynamic_cast<const FitError*>(&e)) {
        return kExitData;
    }
    return kExitInternal;
}

int run_impl(const std::vector<std::string>& user) {
    CLI::App app{"Content-aware multidimensional IRT toolkit", "caimira"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string run_config, log_level = "info";
    std::size_t threads = 1;
    app.add_option("--run-config", run_config, "JSON run config: {\"global\": {...}, \"<verb>\": {...}} or flat keys");
    app.add_option("--threads", threads, "Worker thread cap (0 = all cores; env CAIMIRA_THREADS)");
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    Common common;
    IngestArgs ingest;
    EmbedArgs embed;
    TrainArgs train, ablate;
    ReportArgs analyze, cluster;
    InterpretArgs interpret;
    SynthArgs synth;
    RecoverArgs recover;
    EvalMatchArgs match;
    VerifyArgs verify;
    std::map<std::string, CLI::App*> subs;

    auto* s = subs["ingest"] = app.add_subcommand("ingest", "Parse a question bank and player logs into a response matrix");
    add_common(s, common, true);
    s->add_option("--bank", ingest.bank, "Question bank JSONL")->required();
    s->add_option("--logs", ingest.logs, "Player logs (CSV or JSONL)");
    s->add_option("--responses", ingest.responses, "Extra responses CSV merged as-is (e.g. model agents)");
    s->add_option("--match-threshold", ingest.match_threshold, "Fuzzy answer match threshold");
    s->add_flag("--no-backfill", ingest.no_backfill, "Skip clue-position backfilling");
    s->add_flag("--no-groups", ingest.no_groups, "Keep individual players instead of grouped agents");
    s->add_flag("--keep-players", ingest.keep_players, "Keep individual players alongside groups");
    s->add_option("--group-sizes", ingest.group_sizes, "Comma-separated group sizes");
    s->add_option("--groups-per-size", ingest.groups_per_size, "Groups formed per size");

    s = subs["embed"] = app.add_subcommand("embed", "Fetch item embeddings from an embedding service");
    add_common(s, common, true);
    s->add_option("--items", embed.items, "Items JSONL")->required();
    s->add_option("--bank", embed.bank, "Question bank JSONL")->required();
    s->add_option("--endpoint", embed.endpoint, "Embedding service URL (env CAIMIRA_EMBED_URL)");
    s->add_option("--batch-size", embed.batch_size, "Texts per request");
    s->add_option("--max-retries", embed.max_retries, "Retries on connection failures and 5xx");

    s = subs["train"] = app.add_subcommand("train", "Fit the content-aware model");
    add_common(s, common, true);
    double train_lambda = 1e-5, ablate_lambda = 1e-5;
    add_train_options(s, train, train_lambda);

    s = subs["ablate"] = app.add_subcommand("ablate", "Best validation loss per latent dimension count");
    add_common(s, common, true);
    add_train_options(s, ablate, ablate_lambda);
    s->add_option("--m-list", ablate.m_list, "Comma-separated dimension counts");

    s = subs["analyze"] = app.add_subcommand("analyze", "Question characteristics, agent skills, relevance histograms");
    add_common(s, common, true);
    s->add_option("--model", analyze.model, "Checkpoint prefix")->required();
    s->add_option("--embeddings", analyze.embeddings, "Embedding store prefix")->required();
    s->add_option("--bins", analyze.bins, "Relevance histogram bins");

    s = subs["cluster"] = app.add_subcommand("cluster", "KMeans over effective difficulty, cluster summaries, accuracy slices");
    add_common(s, common, true);
    s->add_option("--model", cluster.model, "Checkpoint prefix")->required();
    s->add_option("--embeddings", cluster.embeddings, "Embedding store prefix")->required();
    s->add_option("--responses", cluster.responses, "Response matrix CSV for accuracy slices");
    s->add_option("--k", cluster.k, "Cluster count");
    s->add_option("--labels", cluster.labels, "CSV cluster,label");
    s->add_option("--agent-types", cluster.agent_types, "CSV agent_id,type");

    s = subs["interpret"] = app.add_subcommand("interpret", "Logistic regressions of relevance labels on question features");
    add_common(s, common, true);
    s->add_option("--model", interpret.model, "Checkpoint prefix")->required();
    s->add_option("--embeddings", interpret.embeddings, "Embedding store prefix")->required();
    s->add_option("--items", interpret.items, "Items JSONL")->required();
    s->add_option("--bank", interpret.bank, "Question bank JSONL")->required();
    s->add_option("--features", interpret.features, "External numeric features CSV keyed by item_id");
    s->add_option("--patterns", interpret.patterns, "Feature regex config JSON");
    s->add_option("--threshold", interpret.threshold, "Relevance label threshold (strict >)");
    s->add_option("--alpha", interpret.alpha, "Significance level");
    s->add_flag("--bonferroni", interpret.bonferroni, "Divide alpha by the feature count");

    s = subs["synth"] = app.add_subcommand("synth", "Generate synthetic data from a known ground truth");
    add_common(s, common, true);
    SynthConfig synth_flags;
    s->add_option("--config", synth.config, "Synthetic config JSON");
    std::map<std::string, CLI::Option*> synth_opts;
    synth_opts["n_agents"] = s->add_option("--n-agents", synth_flags.n_agents, "Agents");
    synth_opts["n_items"] = s->add_option("--n-items", synth_flags.n_items, "Items (cumulative-clue rows)");
    synth_opts["m_true"] = s->add_option("--m-true", synth_flags.m_true, "True latent dimensions");
    synth_opts["dim"] = s->add_option("--dim", synth_flags.dim, "Embedding dimension");
    synth_opts["density"] = s->add_option("--density", synth_flags.density, "Fraction of agent x item cells observed");
    synth_opts["min_clues"] = s->add_option("--min-clues", synth_flags.min_clues, "Fewest items per question");
    synth_opts["max_clues"] = s->add_option("--max-clues", synth_flags.max_clues, "Most items per question");
    synth_opts["skill_sd"] = s->add_option("--skill-sd", synth_flags.skill_sd, "Skill standard deviation");
    synth_opts["difficulty_sd"] = s->add_option("--difficulty-sd", synth_flags.difficulty_sd, "Within-cluster difficulty standard deviation");
    synth_opts["cluster_radius"] = s->add_option("--cluster-radius", synth_flags.cluster_radius, "Norm of each embedding cluster center");
    synth_opts["embedding_noise"] = s->add_option("--embedding-noise", synth_flags.embedding_noise, "Embedding noise around the center");
    synth_opts["relevance_sharpness"] = s->add_option("--relevance-sharpness", synth_flags.relevance_sharpness, "Own-cluster relevance logit advantage");
    synth_opts["relevance_noise"] = s->add_option("--relevance-noise", synth_flags.relevance_noise, "Noise on the relevance weights");

    s = subs["recover"] = app.add_subcommand("recover", "Align an estimate with the synthetic truth and score recovery");
    add_common(s, common, true);
    s->add_option("--truth", recover.truth, "Ground-truth checkpoint prefix")->required();
    s->add_option("--model", recover.model, "Estimated checkpoint prefix")->required();
    s->add_option("--embeddings", recover.embeddings, "Embedding store prefix")->required();
    s->add_option("--responses", recover.responses, "Observed responses; RMSE covers the other cells");

    s = subs["eval-match"] = app.add_subcommand("eval-match", "Rule a guess against an answer with fuzzy matching");
    add_common(s, common, false);
    s->add_option("--guess", match.guess, "Guess text");
    s->add_option("--answer", match.answer, "Gold answer");
    s->add_option("--alias", match.aliases, "Accepted alias (repeatable)")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--pairs", match.pairs, "CSV with guess,answer[,aliases separated by |]");
    s->add_option("--threshold", match.threshold, "Similarity threshold");

    s = subs["verify"] = app.add_subcommand("verify", "Re-hash the inputs recorded in a manifest");
    s->add_option("manifest", verify.manifest, "manifest.json or its directory")->required();

    for (auto& [name, sub] : subs) sub->fallthrough();

    // Locate the verb so run-config and environment values can be placed
    // ahead of the user's own arguments.
    std::string verb;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < user.size(); ++i) {
        if (verb.empty() && is_verb(user[i])) {
            verb = user[i];
            continue;
        }
        rest.push_back(user[i]);
        if (verb.empty() && global_takes_value(user[i]) && i + 1 < user.size()) rest.push_back(user[++i]);
    }
    std::vector<std::string> args;
    if (!verb.empty()) {
        args.push_back(verb);
        for (auto& a : config_args(find_run_config(user), verb, app, subs[verb])) args.push_back(std::move(a));
        for (auto& a : env_args(verb)) args.push_back(std::move(a));
    }
    args.insert(args.end(), rest.begin(), rest.end());
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    spdlog::level::level_enum level = spdlog::level::from_str(log_level);
    logger()->set_level(level);
    set_thread_limit(threads);
    common.threads = threads == 0 ? thread_limit() : threads;

    CLI::App* chosen = subs.at(verb);
    record_options(app, common.record);
    record_options(*chosen, common.record);
    common.record.erase("threads");  // worker count never changes outputs
    common.record.erase("log-level");
    logger()->info("event=start command={} version={}", verb, kToolVersion);

    if (verb == "ingest") cmd_ingest(ingest, common);
    else if (verb == "embed") cmd_embed(embed, common);
    else if (verb == "train" || verb == "ablate") {
        TrainArgs& t = verb == "train" ? train : ablate;
        t.train.seed = common.seed;
        if (chosen->get_option("--lambda")->count() > 0) {
            const double lambda = verb == "train" ? train_lambda : ablate_lambda;
            if (chosen->get_option("--lambda-d")->count() == 0) t.train.lambda_d = lambda;
            if (chosen->get_option("--lambda-s")->count() == 0) t.train.lambda_s = lambda;
        }
        if (verb == "train") cmd_train(t, common);
        else cmd_ablate(t, common);
    } else if (verb == "analyze") cmd_analyze(analyze, common);
    else if (verb == "cluster") cmd_cluster(cluster, common);
    else if (verb == "interpret") cmd_interpret(interpret, common);
    else if (verb == "synth") {
        // Precedence: explicit flags, then the synth config file, then defaults.
        if (!synth.config.empty()) {
            if (!std::filesystem::is_regular_file(synth.config)) throw ConfigError("config not found: " + synth.config);
            synth.synth = synth_config_from_json(read_text_file(synth.config));
        }
        auto given = [&](const char* key) { return synth_opts.at(key)->count() > 0; };
        if (given("n_agents")) synth.synth.n_agents = synth_flags.n_agents;
        if (given("n_items")) synth.synth.n_items = synth_flags.n_items;
        if (given("m_true")) synth.synth.m_true = synth_flags.m_true;
        if (given("dim")) synth.synth.dim = synth_flags.dim;
        if (given("density")) synth.synth.density = synth_flags.density;
        if (given("min_clues")) synth.synth.min_clues = synth_flags.min_clues;
        if (given("max_clues")) synth.synth.max_clues = synth_flags.max_clues;
        if (given("skill_sd")) synth.synth.skill_sd = synth_flags.skill_sd;
        if (given("difficulty_sd")) synth.synth.difficulty_sd = synth_flags.difficulty_sd;
        if (given("cluster_radius")) synth.synth.cluster_radius = synth_flags.cluster_radius;
        if (given("embedding_noise")) synth.synth.embedding_noise = synth_flags.embedding_noise;
        if (given("relevance_sharpness")) synth.synth.relevance_sharpness = synth_flags.relevance_sharpness;
        if (given("relevance_noise")) synth.synth.relevance_noise = synth_flags.relevance_noise;
        if (chosen->get_option("--seed")->count() > 0) synth.synth.seed = common.seed;
        cmd_synth(synth, common);
    } else if (verb == "recover") cmd_recover(recover, common);
    else if (verb == "eval-match") cmd_eval_match(match, common);
    else if (verb == "verify") cmd_verify(verify);
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
    std::vector<std::string> user;
    for (int i = 1; i < argc; ++i) user.emplace_back(argv[i]);
    try {
        return run_impl(user);
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        logger()->error("event=failed exit_code={} error=\"{}\"", code, e.what());
        return code;
    }
}

}  // namespace caimira::cli
