#pragma once

// Question banks, cumulative-clue items, player logs and the sparse
// agent x item response matrix.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "caimira/matching.hpp"

namespace caimira {

class Rng;

struct Question {
    std::string qid;
    std::vector<std::string> clues;
    std::string answer;
    std::vector<std::string> aliases;
    std::string category;
    std::optional<std::string> subcategory;
    std::optional<std::string> wiki_summary;
};

class QuestionBank {
public:
    QuestionBank() = default;

    // Throws IntegrityError on duplicate qid, FormatError on empty clues/answer.
    void add(Question q);

    const std::vector<Question>& questions() const { return questions_; }
    std::size_t size() const { return questions_.size(); }
    bool empty() const { return questions_.empty(); }
    const Question* find(std::string_view qid) const;

private:
    std::vector<Question> questions_;
    std::unordered_map<std::string, std::size_t> index_;
};

// One JSON object per line. Blank lines are skipped.
QuestionBank parse_question_bank(std::istream& in, const std::string& source_name = "<bank>");
QuestionBank load_question_bank(const std::filesystem::path& path);
void write_question_bank(std::ostream& out, const QuestionBank& bank);

struct Item {
    std::string item_id;
    std::string qid;
    int clue_count = 0;
    std::string text;
};

std::string make_item_id(std::string_view qid, int clue_count);

// Items qid_1 .. qid_T where item t holds the first t clues joined by spaces.
std::vector<Item> expand_cumulative_items(const Question& q);
std::vector<Item> expand_bank(const QuestionBank& bank);

void write_items(std::ostream& out, const std::vector<Item>& items);
std::vector<Item> parse_items(std::istream& in, const std::string& source_name = "<items>");

struct PlayerLogRecord {
    std::string player_id;
    std::string qid;
    int clue_position = 1;
    std::string answer_text;
    std::optional<bool> ruled_correct;
    std::optional<std::string> timestamp;
};

// CSV with a header row, or one JSON object per line (detected from the
// first non-blank character).
std::vector<PlayerLogRecord> parse_player_logs(std::istream& in, const std::string& source_name = "<logs>");
std::vector<PlayerLogRecord> load_player_logs(const std::filesystem::path& path);

enum class Origin : std::uint8_t { Observed, Backfilled, GroupMajority, GroupSampled };

std::string_view origin_name(Origin origin);
Origin parse_origin(std::string_view name);

struct ResponseEntry {
    std::uint8_t value = 0;
    Origin origin = Origin::Observed;

    bool operator==(const ResponseEntry& other) const = default;
};

// Sparse binary responses. Entries are kept ordered by (agent, item) so
// every traversal is deterministic.
class ResponseMatrix {
public:
    using Key = std::pair<std::size_t, std::size_t>;

    ResponseMatrix() = default;
    ResponseMatrix(std::vector<std::string> agents, std::vector<std::string> items);

    std::size_t add_agent(const std::string& agent_id);
    std::size_t add_item(const std::string& item_id);

    const std::vector<std::string>& agents() const { return agents_; }
    const std::vector<std::string>& items() const { return items_; }
    std::size_t agent_count() const { return agents_.size(); }
    std::size_t item_count() const { return items_.size(); }

    std::optional<std::size_t> agent_index(std::string_view agent_id) const;
    std::optional<std::size_t> item_index(std::string_view item_id) const;

    const std::map<Key, ResponseEntry>& entries() const { return entries_; }
    std::size_t entry_count() const { return entries_.size(); }
    std::optional<ResponseEntry> get(std::size_t agent, std::size_t item) const;

    // Inserts or replaces. Values other than 0/1 throw ContractError.
    void set(std::size_t agent, std::size_t item, ResponseEntry entry);
    // Returns false when an entry already exists.
    bool insert(std::size_t agent, std::size_t item, ResponseEntry entry);
    void erase(std::size_t agent, std::size_t item);

    bool operator==(const ResponseMatrix& other) const = default;

private:
    void check_bounds(std::size_t agent, std::size_t item) const;

    std::vector<std::string> agents_;
    std::vector<std::string> items_;
    std::unordered_map<std::string, std::size_t> agent_lookup_;
    std::unordered_map<std::string, std::size_t> item_lookup_;
    std::map<Key, ResponseEntry> entries_;
};

// agent_id,item_id,value,origin
void write_response_csv(std::ostream& out, const ResponseMatrix& matrix);
ResponseMatrix read_response_csv(std::istream& in, const std::string& source_name = "<responses>");
ResponseMatrix load_response_csv(const std::filesystem::path& path);

struct MappedResponses {
    ResponseMatrix matrix;
    std::vector<std::string> warnings;
};

// Logs become observed entries at item qid_t over every item of the bank.
// Conflicting duplicates for one (player, item) keep the first record after
// a stable sort by (player, item, timestamp).
MappedResponses map_player_responses(const std::vector<PlayerLogRecord>& logs, const QuestionBank& bank,
                                     const MatchConfig& cfg);

// Propagates observed correctness forward along clue positions and observed
// misses backward. Only non-backfilled entries act as evidence; cells where
// the evidence disagrees stay empty.
ResponseMatrix backfill(const ResponseMatrix& matrix, const QuestionBank& bank);

struct GroupSpec {
    std::vector<int> sizes{1, 5, 10, 15};
    int groups_per_size = 5;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t total_players() const;
};

struct PlayerCoverage {
    std::string player_id;
    std::vector<std::size_t> items;  // sorted, unique
};

struct GroupedAgent {
    std::string agent_id;
    int size = 0;
    std::vector<std::string> members;
};

// Greedy set cover: players are ranked by answered-set size, then groups of
// each size take turns picking the remaining player that adds the most
// uncovered items.
std::vector<GroupedAgent> form_groups(std::vector<PlayerCoverage> players, const GroupSpec& spec);

std::vector<PlayerCoverage> player_coverage(const ResponseMatrix& matrix);

struct GroupVote {
    std::uint8_t value = 0;
    Origin origin = Origin::GroupMajority;
};

// Strict majority wins; a tie is a Bernoulli draw at the vote mean.
GroupVote group_response(const std::vector<std::uint8_t>& votes, Rng& rng);

// One agent per group over the player matrix's items; members' entries are
// pooled per item and resolved with group_response.
ResponseMatrix build_group_matrix(const ResponseMatrix& players, const std::vector<GroupedAgent>& groups,
                                  std::uint64_t seed);

// Appends every agent of `extra` into `base` (items are matched by id and
// added when missing). Existing (agent, item) cells are kept.
void merge_matrix(ResponseMatrix& base, const ResponseMatrix& extra);

}  // namespace caimira
