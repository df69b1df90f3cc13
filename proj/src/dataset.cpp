#include "caimira/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "caimira/error.hpp"
#include "caimira/util.hpp"

namespace caimira {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Question bank

void QuestionBank::add(Question q) {
    if (q.qid.empty()) throw FormatError("question has an empty qid");
    if (q.clues.empty()) throw FormatError("question " + q.qid + ": empty clues");
    if (q.answer.empty()) throw FormatError("question " + q.qid + ": empty answer");
    if (index_.count(q.qid)) throw IntegrityError("duplicate qid " + q.qid);
    index_.emplace(q.qid, questions_.size());
    questions_.push_back(std::move(q));
}

const Question* QuestionBank::find(std::string_view qid) const {
    auto it = index_.find(std::string(qid));
    return it == index_.end() ? nullptr : &questions_[it->second];
}

namespace {

std::string required_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::vector<std::string> string_list(const json& obj, const char* key, bool required) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (required) throw FormatError(std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_array()) throw FormatError(std::string("field '") + key + "' must be a list");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw FormatError(std::string("field '") + key + "' must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

Question question_from_json(const json& obj) {
    if (!obj.is_object()) throw FormatError("record is not an object");
    Question q;
    q.qid = required_string(obj, "qid");
    q.clues = string_list(obj, "clues", true);
    q.answer = required_string(obj, "answer");
    q.aliases = string_list(obj, "aliases", false);
    q.category = optional_string(obj, "category").value_or("");
    q.subcategory = optional_string(obj, "subcategory");
    q.wiki_summary = optional_string(obj, "wiki_summary");
    if (q.clues.empty()) throw FormatError("empty clues");
    if (q.answer.empty()) throw FormatError("empty answer");
    return q;
}

}  // namespace

QuestionBank parse_question_bank(std::istream& in, const std::string& source_name) {
    QuestionBank bank;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Question q;
        try {
            q = question_from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(source_name, line_no, e.what());
        } catch (const FormatError& e) {
            throw ParseError(source_name, line_no, e.what());
        }
        try {
            bank.add(std::move(q));
        } catch (const IntegrityError& e) {
            throw IntegrityError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
        }
    }
    return bank;
}

QuestionBank load_question_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open question bank " + path.string());
    return parse_question_bank(in, path.string());
}

void write_question_bank(std::ostream& out, const QuestionBank& bank) {
    for (const auto& q : bank.questions()) {
        json obj = {{"qid", q.qid},
                    {"clues", q.clues},
                    {"answer", q.answer},
                    {"aliases", q.aliases},
                    {"category", q.category},
                    {"subcategory", q.subcategory ? json(*q.subcategory) : json(nullptr)},
                    {"wiki_summary", q.wiki_summary ? json(*q.wiki_summary) : json(nullptr)}};
        out << obj.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Items

std::string make_item_id(std::string_view qid, int clue_count) { return fmt::format("{}_{}", qid, clue_count); }

std::vector<Item> expand_cumulative_items(const Question& q) {
    std::vector<Item> items;
    items.reserve(q.clues.size());
    std::string text;
    for (std::size_t t = 0; t < q.clues.size(); ++t) {
        if (t) text.push_back(' ');
        text += q.clues[t];
        const int count = static_cast<int>(t + 1);
        items.push_back(Item{make_item_id(q.qid, count), q.qid, count, text});
    }
    return items;
}

std::vector<Item> expand_bank(const QuestionBank& bank) {
    std::vector<Item> items;
    for (const auto& q : bank.questions()) {
        auto expanded = expand_cumulative_items(q);
        items.insert(items.end(), std::make_move_iterator(expanded.begin()), std::make_move_iterator(expanded.end()));
    }
    return items;
}

void write_items(std::ostream& out, const std::vector<Item>& items) {
    for (const auto& item : items) {
        json obj = {{"item_id", item.item_id}, {"qid", item.qid}, {"clue_count", item.clue_count}, {"text", item.text}};
        out << obj.dump() << '\n';
    }
}

std::vector<Item> parse_items(std::istream& in, const std::string& source_name) {
    std::vector<Item> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const json obj = json::parse(line);
            Item item;
            item.item_id = required_string(obj, "item_id");
            item.qid = required_string(obj, "qid");
            item.clue_count = obj.at("clue_count").get<int>();
            item.text = required_string(obj, "text");
            if (item.clue_count < 1) throw FormatError("clue_count must be >= 1");
            items.push_back(std::move(item));
        } catch (const json::exception& e) {
            throw ParseError(source_name, line_no, e.what());
        } catch (const FormatError& e) {
            throw ParseError(source_name, line_no, e.what());
        }
    }
    return items;
}

// ---------------------------------------------------------------------------
// Player logs

namespace {

std::optional<bool> parse_ruling(std::string_view text) {
    const std::string t = trim(text);
    if (t.empty() || t == "NA" || t == "null") return std::nullopt;
    if (t == "1" || t == "true" || t == "True" || t == "TRUE") return true;
    if (t == "0" || t == "false" || t == "False" || t == "FALSE") return false;
    throw FormatError("ruled_correct must be true/false/1/0 or empty, got '" + t + "'");
}

int parse_positive_int(std::string_view text, const char* field) {
    const std::string t = trim(text);
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(t, &used);
    } catch (const std::exception&) {
        throw FormatError(std::string(field) + " is not an integer: '" + t + "'");
    }
    if (used != t.size()) throw FormatError(std::string(field) + " is not an integer: '" + t + "'");
    if (value < 1) throw FormatError(std::string(field) + " must be >= 1");
    return value;
}

PlayerLogRecord log_from_json(const json& obj) {
    if (!obj.is_object()) throw FormatError("record is not an object");
    PlayerLogRecord rec;
    rec.player_id = required_string(obj, "player_id");
    rec.qid = required_string(obj, "qid");
    const auto& pos = obj.at("clue_position");
    if (!pos.is_number_integer() || pos.get<long long>() < 1) throw FormatError("clue_position must be an integer >= 1");
    rec.clue_position = pos.get<int>();
    rec.answer_text = optional_string(obj, "answer_text").value_or("");
    if (auto it = obj.find("ruled_correct"); it != obj.end() && !it->is_null()) {
        if (it->is_boolean()) {
            rec.ruled_correct = it->get<bool>();
        } else if (it->is_number_integer()) {
            rec.ruled_correct = parse_ruling(std::to_string(it->get<long long>()));
        } else {
            throw FormatError("ruled_correct must be boolean");
        }
    }
    if (auto it = obj.find("timestamp"); it != obj.end() && !it->is_null()) {
        rec.timestamp = it->is_string() ? it->get<std::string>() : it->dump();
    }
    return rec;
}

}  // namespace

std::vector<PlayerLogRecord> parse_player_logs(std::istream& in, const std::string& source_name) {
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto first = content.find_first_not_of(" \t\r\n");
    std::vector<PlayerLogRecord> logs;
    if (first == std::string::npos) return logs;

    std::istringstream stream(content);
    if (content[first] == '{') {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(stream, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            try {
                logs.push_back(log_from_json(json::parse(line)));
            } catch (const json::exception& e) {
                throw ParseError(source_name, line_no, e.what());
            } catch (const FormatError& e) {
                throw ParseError(source_name, line_no, e.what());
            }
        }
        return logs;
    }

    const CsvTable table = read_csv(stream, source_name);
    const auto col_player = table.column("player_id");
    const auto col_qid = table.column("qid");
    const auto col_pos = table.column("clue_position");
    const auto col_answer = table.column("answer_text");
    const auto col_ruling = table.column("ruled_correct");
    const auto col_time = table.column("timestamp");
    if (col_player == std::string::npos || col_qid == std::string::npos || col_pos == std::string::npos) {
        throw ParseError(source_name, 1, "header must contain player_id, qid, clue_position");
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        try {
            PlayerLogRecord rec;
            rec.player_id = row[col_player];
            rec.qid = row[col_qid];
            rec.clue_position = parse_positive_int(row[col_pos], "clue_position");
            if (col_answer != std::string::npos) rec.answer_text = row[col_answer];
            if (col_ruling != std::string::npos) rec.ruled_correct = parse_ruling(row[col_ruling]);
            if (col_time != std::string::npos && !row[col_time].empty()) rec.timestamp = row[col_time];
            if (rec.player_id.empty() || rec.qid.empty()) throw FormatError("player_id and qid must be non-empty");
            logs.push_back(std::move(rec));
        } catch (const FormatError& e) {
            throw ParseError(source_name, table.line_numbers[r], e.what());
        }
    }
    return logs;
}

std::vector<PlayerLogRecord> load_player_logs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open player logs " + path.string());
    return parse_player_logs(in, path.string());
}

// ---------------------------------------------------------------------------
// Response matrix

std::string_view origin_name(Origin origin) {
    switch (origin) {
        case Origin::Observed: return "observed";
        case Origin::Backfilled: return "backfilled";
        case Origin::GroupMajority: return "group-majority";
        case Origin::GroupSampled: return "group-sampled";
    }
    return "observed";
}

Origin parse_origin(std::string_view name) {
    if (name == "observed" || name.empty()) return Origin::Observed;
    if (name == "backfilled") return Origin::Backfilled;
    if (name == "group-majority") return Origin::GroupMajority;
    if (name == "group-sampled") return Origin::GroupSampled;
    throw FormatError("unknown origin '" + std::string(name) + "'");
}

ResponseMatrix::ResponseMatrix(std::vector<std::string> agents, std::vector<std::string> items) {
    for (auto& a : agents) add_agent(a);
    for (auto& i : items) add_item(i);
}

std::size_t ResponseMatrix::add_agent(const std::string& agent_id) {
    auto [it, inserted] = agent_lookup_.emplace(agent_id, agents_.size());
    if (inserted) agents_.push_back(agent_id);
    return it->second;
}

std::size_t ResponseMatrix::add_item(const std::string& item_id) {
    auto [it, inserted] = item_lookup_.emplace(item_id, items_.size());
    if (inserted) items_.push_back(item_id);
    return it->second;
}

std::optional<std::size_t> ResponseMatrix::agent_index(std::string_view agent_id) const {
    auto it = agent_lookup_.find(std::string(agent_id));
    if (it == agent_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> ResponseMatrix::item_index(std::string_view item_id) const {
    auto it = item_lookup_.find(std::string(item_id));
    if (it == item_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<ResponseEntry> ResponseMatrix::get(std::size_t agent, std::size_t item) const {
    auto it = entries_.find({agent, item});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseMatrix::check_bounds(std::size_t agent, std::size_t item) const {
    if (agent >= agents_.size() || item >= items_.size()) {
        throw ContractError(fmt::format("entry ({}, {}) outside {}x{} matrix", agent, item, agents_.size(), items_.size()));
    }
}

void ResponseMatrix::set(std::size_t agent, std::size_t item, ResponseEntry entry) {
    check_bounds(agent, item);
    if (entry.value > 1) throw ContractError("response values must be 0 or 1");
    entries_[{agent, item}] = entry;
}

bool ResponseMatrix::insert(std::size_t agent, std::size_t item, ResponseEntry entry) {
    check_bounds(agent, item);
    if (entry.value > 1) throw ContractError("response values must be 0 or 1");
    return entries_.emplace(Key{agent, item}, entry).second;
}

void ResponseMatrix::erase(std::size_t agent, std::size_t item) { entries_.erase({agent, item}); }

void write_response_csv(std::ostream& out, const ResponseMatrix& matrix) {
    out << "agent_id,item_id,value,origin\n";
    for (const auto& [key, entry] : matrix.entries()) {
        out << csv_escape(matrix.agents()[key.first]) << ',' << csv_escape(matrix.items()[key.second]) << ','
            << static_cast<int>(entry.value) << ',' << origin_name(entry.origin) << '\n';
    }
}

ResponseMatrix read_response_csv(std::istream& in, const std::string& source_name) {
    const CsvTable table = read_csv(in, source_name);
    const auto col_agent = table.column("agent_id");
    const auto col_item = table.column("item_id");
    const auto col_value = table.column("value");
    const auto col_origin = table.column("origin");
    if (col_agent == std::string::npos || col_item == std::string::npos || col_value == std::string::npos) {
        throw ParseError(source_name, 1, "header must contain agent_id, item_id, value");
    }
    ResponseMatrix matrix;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string value = trim(row[col_value]);
        if (value != "0" && value != "1") {
            throw ParseError(source_name, table.line_numbers[r], "value must be 0 or 1, got '" + value + "'");
        }
        ResponseEntry entry{static_cast<std::uint8_t>(value == "1"), Origin::Observed};
        if (col_origin != std::string::npos) {
            try {
                entry.origin = parse_origin(trim(row[col_origin]));
            } catch (const FormatError& e) {
                throw ParseError(source_name, table.line_numbers[r], e.what());
            }
        }
        const auto a = matrix.add_agent(row[col_agent]);
        const auto i = matrix.add_item(row[col_item]);
        if (!matrix.insert(a, i, entry)) {
            throw IntegrityError(fmt::format("{}:{}: duplicate entry for ({}, {})", source_name,
                                             table.line_numbers[r], row[col_agent], row[col_item]));
        }
    }
    return matrix;
}

ResponseMatrix load_response_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open responses " + path.string());
    return read_response_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// Mapping and refinement

MappedResponses map_player_responses(const std::vector<PlayerLogRecord>& logs, const QuestionBank& bank,
                                      const MatchConfig& cfg) {
    cfg.validate();
    MappedResponses result;
    for (const auto& item : expand_bank(bank)) result.matrix.add_item(item.item_id);

    struct Resolved {
        const PlayerLogRecord* record;
        std::size_t item;
        std::uint8_t value;
    };
    std::vector<Resolved> resolved;
    resolved.reserve(logs.size());
    for (const auto& rec : logs) {
        const Question* q = bank.find(rec.qid);
        if (!q) throw IntegrityError("log references unknown qid " + rec.qid);
        if (rec.clue_position < 1 || static_cast<std::size_t>(rec.clue_position) > q->clues.size()) {
            throw IntegrityError(fmt::format("log for {} has clue_position {} outside 1..{}", rec.qid,
                                             rec.clue_position, q->clues.size()));
        }
        const bool correct = rec.ruled_correct ? *rec.ruled_correct : rule_answer(rec.answer_text, *q, cfg).correct;
        const auto item = *result.matrix.item_index(make_item_id(rec.qid, rec.clue_position));
        resolved.push_back({&rec, item, static_cast<std::uint8_t>(correct)});
    }

    std::stable_sort(resolved.begin(), resolved.end(), [](const Resolved& a, const Resolved& b) {
        if (a.record->player_id != b.record->player_id) return a.record->player_id < b.record->player_id;
        if (a.item != b.item) return a.item < b.item;
        return a.record->timestamp.value_or("") < b.record->timestamp.value_or("");
    });

    for (const auto& r : resolved) {
        const auto agent = result.matrix.add_agent(r.record->player_id);
        const auto existing = result.matrix.get(agent, r.item);
        if (!existing) {
            result.matrix.insert(agent, r.item, {r.value, Origin::Observed});
        } else if (existing->value != r.value) {
            result.warnings.push_back(fmt::format("conflicting rulings for player {} on {}; keeping the first",
                                                  r.record->player_id, result.matrix.items()[r.item]));
        }
    }
    return result;
}

ResponseMatrix backfill(const ResponseMatrix& matrix, const QuestionBank& bank) {
    // item index -> (question slot, clue position - 1)
    std::vector<std::pair<std::size_t, std::size_t>> position(matrix.item_count(), {SIZE_MAX, 0});
    std::vector<std::vector<std::optional<std::size_t>>> question_items;
    for (const auto& q : bank.questions()) {
        std::vector<std::optional<std::size_t>> slots(q.clues.size());
        bool any = false;
        for (std::size_t t = 0; t < q.clues.size(); ++t) {
            if (auto idx = matrix.item_index(make_item_id(q.qid, static_cast<int>(t + 1)))) {
                slots[t] = *idx;
                position[*idx] = {question_items.size(), t};
                any = true;
            }
        }
        if (any) question_items.push_back(std::move(slots));
    }

    ResponseMatrix out = matrix;
    for (const auto& [key, entry] : matrix.entries()) {
        if (entry.origin == Origin::Backfilled && position[key.second].first != SIZE_MAX) out.erase(key.first, key.second);
    }

    // Evidence per (agent, question): earliest correct and latest incorrect position.
    struct Evidence {
        std::size_t first_correct = SIZE_MAX;
        std::size_t last_incorrect = 0;
        bool has_incorrect = false;
    };
    std::map<std::pair<std::size_t, std::size_t>, Evidence> evidence;
    for (const auto& [key, entry] : out.entries()) {
        const auto [question, t] = position[key.second];
        if (question == SIZE_MAX) continue;
        auto& ev = evidence[{key.first, question}];
        if (entry.value == 1) {
            ev.first_correct = std::min(ev.first_correct, t);
        } else {
            ev.last_incorrect = ev.has_incorrect ? std::max(ev.last_incorrect, t) : t;
            ev.has_incorrect = true;
        }
    }

    for (const auto& [key, ev] : evidence) {
        const auto [agent, question] = key;
        const auto& slots = question_items[question];
        for (std::size_t t = 0; t < slots.size(); ++t) {
            if (!slots[t]) continue;
            const bool implies_correct = ev.first_correct != SIZE_MAX && t > ev.first_correct;
            const bool implies_incorrect = ev.has_incorrect && t < ev.last_incorrect;
            if (implies_correct == implies_incorrect) continue;
            out.insert(agent, *slots[t], {static_cast<std::uint8_t>(implies_correct), Origin::Backfilled});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grouped agents

void GroupSpec::validate() const {
    if (sizes.empty()) throw ConfigError("group sizes must be non-empty");
    for (int s : sizes) {
        if (s <= 0) throw ConfigError("group sizes must be positive");
    }
    if (groups_per_size <= 0) throw ConfigError("groups_per_size must be positive");
}

std::size_t GroupSpec::total_players() const {
    std::size_t total = 0;
    for (int s : sizes) total += static_cast<std::size_t>(s) * static_cast<std::size_t>(groups_per_size);
    return total;
}

std::vector<PlayerCoverage> player_coverage(const ResponseMatrix& matrix) {
    std::vector<PlayerCoverage> players(matrix.agent_count());
    for (std::size_t a = 0; a < matrix.agent_count(); ++a) players[a].player_id = matrix.agents()[a];
    for (const auto& [key, entry] : matrix.entries()) players[key.first].items.push_back(key.second);
    return players;
}

std::vector<GroupedAgent> form_groups(std::vector<PlayerCoverage> players, const GroupSpec& spec) {
    spec.validate();
    if (players.empty()) throw ConfigError("no players to group");
    if (spec.total_players() > players.size()) {
        throw ConfigError(fmt::format("group spec needs {} players but only {} are available", spec.total_players(),
                                      players.size()));
    }
    std::size_t universe = 0;
    for (auto& p : players) {
        std::sort(p.items.begin(), p.items.end());
        p.items.erase(std::unique(p.items.begin(), p.items.end()), p.items.end());
        if (!p.items.empty()) universe = std::max(universe, p.items.back() + 1);
    }
    std::stable_sort(players.begin(), players.end(), [](const PlayerCoverage& a, const PlayerCoverage& b) {
        if (a.items.size() != b.items.size()) return a.items.size() > b.items.size();
        return a.player_id < b.player_id;
    });

    std::vector<bool> used(players.size(), false);
    std::vector<GroupedAgent> groups;
    for (int size : spec.sizes) {
        const auto count = static_cast<std::size_t>(spec.groups_per_size);
        std::vector<GroupedAgent> batch(count);
        std::vector<std::vector<char>> covered(count, std::vector<char>(universe, 0));
        for (std::size_t g = 0; g < count; ++g) {
            batch[g].agent_id = fmt::format("human_s{}_g{}", size, g);
            batch[g].size = size;
        }
        for (int round = 0; round < size; ++round) {
            for (std::size_t g = 0; g < count; ++g) {
                std::size_t best = SIZE_MAX;
                std::size_t best_gain = 0;
                for (std::size_t p = 0; p < players.size(); ++p) {
                    if (used[p]) continue;
                    std::size_t gain = 0;
                    for (auto item : players[p].items) gain += covered[g][item] ? 0 : 1;
                    if (best == SIZE_MAX || gain > best_gain) {
                        best = p;
                        best_gain = gain;
                    }
                }
                used[best] = true;
                for (auto item : players[best].items) covered[g][item] = 1;
                batch[g].members.push_back(players[best].player_id);
            }
        }
        for (auto& g : batch) groups.push_back(std::move(g));
    }
    return groups;
}

GroupVote group_response(const std::vector<std::uint8_t>& votes, Rng& rng) {
    if (votes.empty()) throw ContractError("group_response needs at least one vote");
    std::size_t ones = 0;
    for (auto v : votes) ones += v ? 1 : 0;
    const std::size_t zeros = votes.size() - ones;
    if (ones > zeros) return {1, Origin::GroupMajority};
    if (zeros > ones) return {0, Origin::GroupMajority};
    const double p = static_cast<double>(ones) / static_cast<double>(votes.size());
    return {static_cast<std::uint8_t>(rng.bernoulli(p)), Origin::GroupSampled};
}

ResponseMatrix build_group_matrix(const ResponseMatrix& players, const std::vector<GroupedAgent>& groups,
                                  std::uint64_t seed) {
    ResponseMatrix out;
    for (const auto& item : players.items()) out.add_item(item);
    Rng rng(seed);
    for (const auto& group : groups) {
        const auto agent = out.add_agent(group.agent_id);
        std::map<std::size_t, std::vector<std::uint8_t>> votes;
        for (const auto& member : group.members) {
            const auto idx = players.agent_index(member);
            if (!idx) throw IntegrityError("group member " + member + " has no responses");
            const auto& entries = players.entries();
            for (auto it = entries.lower_bound({*idx, 0}); it != entries.end() && it->first.first == *idx; ++it) {
                votes[it->first.second].push_back(it->second.value);
            }
        }
        for (const auto& [item, item_votes] : votes) {
            const GroupVote vote = group_response(item_votes, rng);
            out.insert(agent, item, {vote.value, vote.origin});
        }
    }
    return out;
}

void merge_matrix(ResponseMatrix& base, const ResponseMatrix& extra) {
    std::vector<std::size_t> agent_map(extra.agent_count()), item_map(extra.item_count());
    for (std::size_t a = 0; a < extra.agent_count(); ++a) agent_map[a] = base.add_agent(extra.agents()[a]);
    for (std::size_t i = 0; i < extra.item_count(); ++i) item_map[i] = base.add_item(extra.items()[i]);
    for (const auto& [key, entry] : extra.entries()) base.insert(agent_map[key.first], item_map[key.second], entry);
}

}  // namespace caimira
