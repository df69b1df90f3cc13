#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "caimira/analysis.hpp"
#include "caimira/cli.hpp"
#include "caimira/embeddings.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira::cli {

namespace fs = std::filesystem;

namespace {

fs::path require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(fmt::format("missing --{}", what));
    if (!fs::is_regular_file(path)) throw ConfigError(fmt::format("{} not found: {}", what, path));
    return path;
}

// Prefix of a .json/.bin pair; returns both files.
std::vector<fs::path> require_pair(const std::string& prefix, const char* what) {
    if (prefix.empty()) throw ConfigError(fmt::format("missing --{}", what));
    fs::path header = prefix, blob = prefix;
    header += ".json";
    blob += ".bin";
    for (const auto& p : {header, blob}) {
        if (!fs::is_regular_file(p)) throw ConfigError(fmt::format("{} not found: {}", what, p.string()));
    }
    return {header, blob};
}

void append(std::vector<fs::path>& into, const std::vector<fs::path>& more) { into.insert(into.end(), more.begin(), more.end()); }

void pre_verify(const Common& common) {
    if (!common.verify) return;
    const fs::path path = common.out / "manifest.json";
    if (!fs::is_regular_file(path)) throw ConfigError("--verify needs an existing manifest: " + path.string());
    const auto problems = verify_manifest(read_manifest(path));
    for (const auto& p : problems) logger()->error("event=verify_failed detail=\"{}\"", p);
    if (!problems.empty()) throw IntegrityError(fmt::format("{} input(s) drifted since {}", problems.size(), path.string()));
    logger()->info("event=verify_ok manifest={}", path.string());
}

void finish(const std::string& command, const Common& common, const std::vector<fs::path>& inputs,
            const std::vector<fs::path>& outputs) {
    const Manifest manifest = make_manifest(command, common.seed, common.record, inputs, outputs);
    write_manifest(manifest, common.out / "manifest.json");
    logger()->info("event=done command={} outputs={} out={}", command, outputs.size(), common.out.string());
}

fs::path write_out(const fs::path& dir, const std::string& name, const std::string& content) {
    write_text_file(dir / name, content);
    return dir / name;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    for (const auto& part : split(text, ',')) {
        const std::string t = trim(part);
        if (t.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(t, &used));
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("--{} expects comma-separated integers, got '{}'", what, text));
        }
    }
    if (out.empty()) throw ConfigError(fmt::format("--{} is empty", what));
    return out;
}

}  // namespace

void cmd_ingest(const IngestArgs& args, const Common& common) {
    std::vector<fs::path> inputs{require_file(args.bank, "bank")};
    if (!args.logs.empty()) inputs.push_back(require_file(args.logs, "logs"));
    if (!args.responses.empty()) inputs.push_back(require_file(args.responses, "responses"));
    if (args.logs.empty() && args.responses.empty()) throw ConfigError("ingest needs --logs, --responses or both");
    MatchConfig match;
    match.threshold = args.match_threshold;
    match.validate();
    GroupSpec spec;
    spec.sizes = parse_int_list(args.group_sizes, "group-sizes");
    spec.groups_per_size = args.groups_per_size;
    spec.seed = common.seed;
    spec.validate();
    pre_verify(common);
    ensure_directory(common.out);

    const QuestionBank bank = load_question_bank(args.bank);
    const std::vector<Item> items = expand_bank(bank);
    std::vector<std::string> item_ids;
    for (const auto& item : items) item_ids.push_back(item.item_id);
    ResponseMatrix combined({}, item_ids);
    std::vector<fs::path> outputs;

    if (!args.logs.empty()) {
        const auto logs = load_player_logs(args.logs);
        MappedResponses mapped = map_player_responses(logs, bank, match);
        for (const auto& w : mapped.warnings) logger()->warn("event=log_conflict detail=\"{}\"", w);
        const ResponseMatrix players = args.no_backfill ? mapped.matrix : backfill(mapped.matrix, bank);
        logger()->info("event=players_mapped players={} entries={}", players.agent_count(), players.entry_count());
        std::ostringstream pcsv;
        write_response_csv(pcsv, players);
        outputs.push_back(write_out(common.out, "players.csv", pcsv.str()));
        if (!args.no_groups) {
            const auto groups = form_groups(player_coverage(players), spec);
            std::string gcsv = "agent_id,size,members\n";
            for (const auto& g : groups) {
                std::string members;
                for (const auto& m : g.members) members += (members.empty() ? "" : ";") + m;
                gcsv += join_csv(std::vector<std::string>{g.agent_id, std::to_string(g.size), members}) + "\n";
            }
            outputs.push_back(write_out(common.out, "groups.csv", gcsv));
            merge_matrix(combined, build_group_matrix(players, groups, common.seed));
        }
        if (args.no_groups || args.keep_players) merge_matrix(combined, players);
    }
    if (!args.responses.empty()) {
        const ResponseMatrix extra = load_response_csv(args.responses);
        for (const auto& id : extra.items()) {
            if (!combined.item_index(id)) {
                throw IntegrityError(fmt::format("{}: item {} is not in the expanded bank", args.responses, id));
            }
        }
        merge_matrix(combined, extra);
    }

    std::ostringstream bank_out, items_out, responses_out;
    write_question_bank(bank_out, bank);
    write_items(items_out, items);
    write_response_csv(responses_out, combined);
    outputs.push_back(write_out(common.out, "bank.jsonl", bank_out.str()));
    outputs.push_back(write_out(common.out, "items.jsonl", items_out.str()));
    outputs.push_back(write_out(common.out, "responses.csv", responses_out.str()));
    logger()->info("event=ingested questions={} items={} agents={} entries={}", bank.size(), items.size(),
                   combined.agent_count(), combined.entry_count());
    finish("ingest", common, inputs, outputs);
}

void cmd_embed(const EmbedArgs& args, const Common& common) {
    std::vector<fs::path> inputs{require_file(args.items, "items"), require_file(args.bank, "bank")};
    if (args.endpoint.empty()) throw ConfigError("no embedding endpoint: pass --endpoint or set CAIMIRA_EMBED_URL");
    if (args.batch_size < 1) throw ConfigError("--batch-size must be >= 1");
    pre_verify(common);
    const QuestionBank bank = load_question_bank(args.bank);
    std::ifstream in(args.items);
    const auto items = parse_items(in, args.items);
    std::vector<std::string> ids, texts;
    for (const auto& item : items) {
        const Question* q = bank.find(item.qid);
        if (!q) throw IntegrityError(fmt::format("item {} refers to unknown question {}", item.item_id, item.qid));
        ids.push_back(item.item_id);
        texts.push_back(assemble_embedding_text(item, *q));
    }
    EmbedClientOptions options;
    options.batch_size = args.batch_size;
    options.max_retries = args.max_retries;
    const Eigen::MatrixXd vectors = request_embeddings(args.endpoint, texts, options);
    const EmbeddingStore store(ids, vectors);
    ensure_directory(common.out);
    save_embedding_store(store, common.out / "embeddings");
    finish("embed", common, inputs, {common.out / "embeddings.json", common.out / "embeddings.bin"});
}

namespace {

struct TrainingInputs {
    std::vector<fs::path> files;
    ResponseMatrix matrix;
    EmbeddingStore store;
};

TrainingInputs load_training_inputs(const TrainArgs& args) {
    TrainingInputs t;
    if (!args.bank.empty()) t.files.push_back(require_file(args.bank, "bank"));
    t.files.push_back(require_file(args.responses, "responses"));
    append(t.files, require_pair(args.embeddings, "embeddings"));
    args.train.validate();
    return t;
}

}  // namespace

void cmd_train(const TrainArgs& args, const Common& common) {
    TrainingInputs t = load_training_inputs(args);
    pre_verify(common);
    t.matrix = load_response_csv(args.responses);
    t.store = load_embedding_store(fs::path(args.embeddings));
    TrainHooks hooks;
    hooks.on_epoch = [](const EpochRecord& r) {
        logger()->info("event=epoch epoch={} train_loss={} val_loss={}", r.epoch, format_real(r.train_loss),
                       format_real(r.val_loss));
    };
    const FittedModel fitted = train(t.matrix, t.store, args.train, hooks);
    ensure_directory(common.out);
    save_checkpoint({fitted.params, fitted.agent_ids, fs::path(args.embeddings).filename().string()}, common.out / "model");
    std::ostringstream history;
    write_history_csv(history, fitted.history);
    std::vector<fs::path> outputs{common.out / "model.json", common.out / "model.bin",
                                  write_out(common.out, "history.csv", history.str())};
    logger()->info("event=trained best_epoch={} best_val_loss={}", fitted.best_epoch, format_real(fitted.best_val_loss));
    finish("train", common, t.files, outputs);
}

void cmd_ablate(const TrainArgs& args, const Common& common) {
    TrainingInputs t = load_training_inputs(args);
    const std::vector<int> m_list = parse_int_list(args.m_list, "m-list");
    pre_verify(common);
    t.matrix = load_response_csv(args.responses);
    t.store = load_embedding_store(fs::path(args.embeddings));
    const auto rows = ablate_dimensions(t.matrix, t.store, args.train, m_list);
    ensure_directory(common.out);
    std::ostringstream table;
    write_ablation_csv(table, rows);
    finish("ablate", common, t.files, {write_out(common.out, "ablation.csv", table.str())});
}

namespace {

struct ModelInputs {
    std::vector<fs::path> files;
    Checkpoint model;
    EmbeddingStore store;
};

ModelInputs model_inputs(const std::string& model, const std::string& embeddings) {
    ModelInputs mi;
    append(mi.files, require_pair(model, "model"));
    append(mi.files, require_pair(embeddings, "embeddings"));
    return mi;
}

void load_model_inputs(ModelInputs& mi, const std::string& model, const std::string& embeddings) {
    mi.model = load_checkpoint(model);
    mi.store = load_embedding_store(fs::path(embeddings));
    if (mi.store.dim() != mi.model.params.embedding_dim()) {
        throw IntegrityError(fmt::format("embeddings have dimension {} but the model expects {}", mi.store.dim(),
                                         mi.model.params.embedding_dim()));
    }
}

}  // namespace

void cmd_analyze(const ReportArgs& args, const Common& common) {
    ModelInputs mi = model_inputs(args.model, args.embeddings);
    pre_verify(common);
    load_model_inputs(mi, args.model, args.embeddings);
    ReportOptions options;
    options.histogram_bins = args.bins;
    options.seed = common.seed;
    options.threads = common.threads;
    const ReportFiles files = emit_characteristic_reports(mi.model, mi.store, common.out, options);
    finish("analyze", common, mi.files, files.written);
}

void cmd_cluster(const ReportArgs& args, const Common& common) {
    ModelInputs mi = model_inputs(args.model, args.embeddings);
    if (!args.responses.empty()) mi.files.push_back(require_file(args.responses, "responses"));
    if (!args.labels.empty()) mi.files.push_back(require_file(args.labels, "labels"));
    if (!args.agent_types.empty()) mi.files.push_back(require_file(args.agent_types, "agent-types"));
    if (args.k < 1) throw ConfigError("--k must be >= 1");
    pre_verify(common);
    load_model_inputs(mi, args.model, args.embeddings);
    ReportOptions options;
    options.k = args.k;
    options.seed = common.seed;
    options.threads = common.threads;
    if (!args.labels.empty()) options.labels = load_cluster_labels(args.labels);
    if (!args.agent_types.empty()) options.agent_types = load_agent_types(args.agent_types);
    std::optional<ResponseMatrix> matrix;
    if (!args.responses.empty()) matrix = load_response_csv(args.responses);
    const ReportFiles files = emit_cluster_reports(mi.model, mi.store, matrix ? &*matrix : nullptr, common.out, options);
    finish("cluster", common, mi.files, files.written);
}

void cmd_interpret(const InterpretArgs& args, const Common& common) {
    ModelInputs mi = model_inputs(args.model, args.embeddings);
    mi.files.push_back(require_file(args.items, "items"));
    mi.files.push_back(require_file(args.bank, "bank"));
    if (!args.features.empty()) mi.files.push_back(require_file(args.features, "features"));
    if (!args.patterns.empty()) mi.files.push_back(require_file(args.patterns, "patterns"));
    if (!(args.alpha > 0.0 && args.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
    if (!(args.threshold >= 0.0 && args.threshold < 1.0)) throw ConfigError("--threshold must lie in [0, 1)");
    const FeaturePatterns patterns = args.patterns.empty() ? FeaturePatterns::defaults() : load_feature_patterns(args.patterns);
    pre_verify(common);
    load_model_inputs(mi, args.model, args.embeddings);
    const QuestionBank bank = load_question_bank(args.bank);
    std::ifstream in(args.items);
    const auto items = parse_items(in, args.items);
    std::map<std::string, const Item*> by_id;
    for (const auto& item : items) by_id[item.item_id] = &item;
    std::optional<ExternalFeatures> external;
    if (!args.features.empty()) external = load_external_features(args.features);

    std::vector<FeatureVector> vectors;
    for (const auto& id : mi.store.ids()) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw IntegrityError("embedding row " + id + " has no item record");
        const Question* q = bank.find(it->second->qid);
        if (!q) throw IntegrityError(fmt::format("item {} refers to unknown question {}", id, it->second->qid));
        vectors.push_back(extract_features(*it->second, *q, external ? &*external : nullptr, patterns));
    }
    const StandardizedFeatures features = standardize(build_feature_table(mi.store.ids(), vectors));
    const ItemCharacteristics chars = compute_all_characteristics(mi.model.params, mi.store);
    const auto fits = interpret_dimensions(features, chars, args.threshold, LogRegConfig{}, common.threads);
    InterpretReportOptions report;
    report.alpha = args.alpha;
    report.bonferroni = args.bonferroni;
    report.threshold = args.threshold;
    const auto written = interpretation_report(fits, common.out, report);
    finish("interpret", common, mi.files, written);
}

void cmd_synth(const SynthArgs& args, const Common& common) {
    std::vector<fs::path> inputs;
    if (!args.config.empty()) inputs.push_back(require_file(args.config, "config"));
    args.synth.validate();
    pre_verify(common);
    const SynthData data = generate_synthetic(args.synth);
    const auto written = write_synthetic(data, args.synth, common.out);
    logger()->info("event=synthesized agents={} items={} entries={}", data.matrix.agent_count(),
                   data.matrix.item_count(), data.matrix.entry_count());
    Common c = common;
    c.seed = args.synth.seed;
    finish("synth", c, inputs, written);
}

void cmd_recover(const RecoverArgs& args, const Common& common) {
    std::vector<fs::path> inputs = require_pair(args.truth, "truth");
    append(inputs, require_pair(args.model, "model"));
    append(inputs, require_pair(args.embeddings, "embeddings"));
    if (!args.responses.empty()) inputs.push_back(require_file(args.responses, "responses"));
    pre_verify(common);
    const Checkpoint truth = load_checkpoint(args.truth);
    const Checkpoint est = load_checkpoint(args.model);
    const EmbeddingStore store = load_embedding_store(fs::path(args.embeddings));
    if (truth.params.dims() != est.params.dims()) {
        throw ConfigError(fmt::format("truth has m = {} but the model has m = {}", truth.params.dims(), est.params.dims()));
    }
    std::optional<ResponseMatrix> matrix;
    if (!args.responses.empty()) matrix = load_response_csv(args.responses);
    const auto perm = align_dimensions(truth.params, est.params, store);
    const RecoveryReport report = recovery_metrics(truth, est, perm, store, matrix ? &*matrix : nullptr);
    ensure_directory(common.out);
    const auto path = write_out(common.out, "recovery.json", recovery_report_json(report));
    const auto [skill_min, skill_max] = std::minmax_element(report.skill_r.begin(), report.skill_r.end());
    logger()->info("event=recovered min_skill_r={} max_skill_r={} heldout_rmse={}", format_real(*skill_min),
                   format_real(*skill_max), format_real(report.heldout_rmse));
    finish("recover", common, inputs, {path});
}

void cmd_eval_match(const EvalMatchArgs& args, const Common& common) {
    MatchConfig cfg;
    cfg.threshold = args.threshold;
    cfg.validate();
    if (args.pairs.empty()) {
        if (args.answer.empty()) throw ConfigError("eval-match needs --answer (or --pairs)");
        Question q;
        q.answer = args.answer;
        q.aliases = args.aliases;
        const MatchResult r = rule_answer(args.guess, q, cfg);
        std::cout << "correct,similarity\n" << (r.correct ? 1 : 0) << ',' << format_real(r.similarity) << '\n';
        return;
    }
    const fs::path input = require_file(args.pairs, "pairs");
    pre_verify(common);
    const CsvTable table = read_csv_file(input);
    const auto col_guess = table.column("guess");
    const auto col_answer = table.column("answer");
    const auto col_aliases = table.column("aliases");
    if (col_guess == std::string::npos || col_answer == std::string::npos) {
        throw ParseError(input.string(), 1, "pairs file needs guess and answer columns");
    }
    std::string out = "guess,answer,correct,similarity\n";
    for (const auto& row : table.rows) {
        Question q;
        q.answer = row[col_answer];
        if (col_aliases != std::string::npos && !row[col_aliases].empty()) q.aliases = split(row[col_aliases], '|');
        const MatchResult r = rule_answer(row[col_guess], q, cfg);
        out += join_csv(std::vector<std::string>{row[col_guess], row[col_answer], r.correct ? "1" : "0",
                                                 format_real(r.similarity)}) + "\n";
    }
    if (common.out.empty()) {
        std::cout << out;
        return;
    }
    ensure_directory(common.out);
    finish("eval-match", common, {input}, {write_out(common.out, "match_results.csv", out)});
}

void cmd_verify(const VerifyArgs& args) {
    fs::path path = args.manifest;
    if (fs::is_directory(path)) path /= "manifest.json";
    require_file(path.string(), "manifest");
    const auto problems = verify_manifest(read_manifest(path));
    for (const auto& p : problems) logger()->error("event=verify_failed detail=\"{}\"", p);
    if (!problems.empty()) throw IntegrityError(fmt::format("{} input(s) drifted since {}", problems.size(), path.string()));
    std::cout << "ok " << path.string() << '\n';
}

}  // namespace caimira::cli
