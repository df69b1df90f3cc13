#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caimira/dataset.hpp"
#include "caimira/interpret.hpp"
#include "caimira/synth.hpp"
#include "caimira/training.hpp"

namespace caimira::cli {

// Resolved option values recorded in the manifest.
using ConfigRecord = std::map<std::string, std::string>;

struct Common {
    std::filesystem::path out;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool verify = false;
    ConfigRecord record;
};

struct IngestArgs {
    std::string bank;
    std::string logs;
    std::string responses;
    double match_threshold = 0.75;
    bool no_backfill = false;
    bool no_groups = false;
    bool keep_players = false;
    std::string group_sizes = "1,5,10,15";
    int groups_per_size = 5;
};

struct EmbedArgs {
    std::string items;
    std::string bank;
    std::string endpoint;
    std::size_t batch_size = 64;
    int max_retries = 3;
};

struct TrainArgs {
    std::string bank;  // optional; hashed into the manifest only
    std::string responses;
    std::string embeddings;
    TrainConfig train;
    std::string m_list = "1,2,3,5,8";
};

struct ReportArgs {
    std::string model;
    std::string embeddings;
    std::string responses;
    int k = 12;
    int bins = 20;
    std::string labels;
    std::string agent_types;
};

struct InterpretArgs {
    std::string model;
    std::string embeddings;
    std::string items;
    std::string bank;
    std::string features;
    std::string patterns;
    double threshold = kRelevanceLabelThreshold;
    double alpha = 0.05;
    bool bonferroni = false;
};

struct SynthArgs {
    std::string config;
    SynthConfig synth;  // file values with explicit flags applied
};

struct RecoverArgs {
    std::string truth;
    std::string model;
    std::string embeddings;
    std::string responses;
};

struct EvalMatchArgs {
    std::string guess;
    std::string answer;
    std::vector<std::string> aliases;
    std::string pairs;
    double threshold = 0.75;
};

struct VerifyArgs {
    std::string manifest;
};

void cmd_ingest(const IngestArgs& args, const Common& common);
void cmd_embed(const EmbedArgs& args, const Common& common);
void cmd_train(const TrainArgs& args, const Common& common);
void cmd_ablate(const TrainArgs& args, const Common& common);
void cmd_analyze(const ReportArgs& args, const Common& common);
void cmd_cluster(const ReportArgs& args, const Common& common);
void cmd_interpret(const InterpretArgs& args, const Common& common);
void cmd_synth(const SynthArgs& args, const Common& common);
void cmd_recover(const RecoverArgs& args, const Common& common);
void cmd_eval_match(const EvalMatchArgs& args, const Common& common);
void cmd_verify(const VerifyArgs& args);

}  // namespace caimira::cli
