#include <doctest.h>

#include <map>
#include <sstream>

#include "caimira/dataset.hpp"
#include "caimira/error.hpp"
#include "caimira/util.hpp"

using namespace caimira;

namespace {

Question make_question(const std::string& qid, int clues, const std::string& answer = "x") {
    Question q;
    q.qid = qid;
    for (int i = 1; i <= clues; ++i) q.clues.push_back("c" + std::to_string(i));
    q.answer = answer;
    q.category = "Science";
    return q;
}

QuestionBank bank_of(std::initializer_list<std::pair<std::string, int>> qs) {
    QuestionBank bank;
    for (const auto& [qid, n] : qs) bank.add(make_question(qid, n));
    return bank;
}

ResponseMatrix matrix_over(const QuestionBank& bank, std::vector<std::string> agents) {
    std::vector<std::string> ids;
    for (const auto& item : expand_bank(bank)) ids.push_back(item.item_id);
    return ResponseMatrix(std::move(agents), ids);
}

std::size_t item(const ResponseMatrix& m, const std::string& id) { return *m.item_index(id); }

}  // namespace

TEST_CASE("parse a minimal bank record") {
    std::istringstream in(R"({"qid":"q1","clues":["a","b"],"answer":"x"})" "\n");
    const auto bank = parse_question_bank(in);
    REQUIRE(bank.size() == 1);
    CHECK(bank.questions()[0].clues.size() == 2);
}

TEST_CASE("empty bank stream") {
    std::istringstream in("");
    CHECK(parse_question_bank(in).empty());
}

TEST_CASE("bank errors") {
    std::istringstream empty_clues(R"({"qid":"q1","clues":[],"answer":"x"})");
    CHECK_THROWS_WITH_AS(parse_question_bank(empty_clues), doctest::Contains("empty clues"), FormatError);
    std::istringstream dup(R"({"qid":"q1","clues":["a"],"answer":"x"})" "\n" R"({"qid":"q1","clues":["b"],"answer":"y"})");
    CHECK_THROWS_AS(parse_question_bank(dup), IntegrityError);
    std::istringstream bad("{\"qid\":\"q1\",\"clues\":[\"a\"],\"answer\":\"x\"}\nnot json\n");
    try {
        parse_question_bank(bad, "bank.jsonl");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("bank write and parse round trip") {
    QuestionBank bank;
    Question q = make_question("q9", 3, "Piano");
    q.aliases = {"Pianoforte"};
    q.subcategory = "Music";
    q.wiki_summary = "An instrument.";
    bank.add(q);
    std::ostringstream out;
    write_question_bank(out, bank);
    std::istringstream in(out.str());
    const auto back = parse_question_bank(in);
    const Question& r = back.questions().at(0);
    CHECK(r.aliases == q.aliases);
    CHECK(r.subcategory == q.subcategory);
    CHECK(r.wiki_summary == q.wiki_summary);
}

TEST_CASE("cumulative items") {
    const auto items = expand_cumulative_items(make_question("q622", 4));
    REQUIRE(items.size() == 4);
    CHECK(items[0].item_id == "q622_1");
    CHECK(items[3].item_id == "q622_4");
    CHECK(items[1].text == "c1 c2");
    CHECK(items[3].clue_count == 4);
    const auto one = expand_cumulative_items(make_question("q1", 1));
    REQUIRE(one.size() == 1);
    CHECK(one[0].text == "c1");
    std::ostringstream out;
    write_items(out, items);
    std::istringstream in(out.str());
    const auto back = parse_items(in);
    REQUIRE(back.size() == 4);
    CHECK(back[2].text == items[2].text);
}

TEST_CASE("player logs map to observed entries") {
    const auto bank = bank_of({{"q31", 4}});
    std::istringstream in("player_id,qid,clue_position,answer_text,ruled_correct\np1,q31,2,x,1\n");
    const auto logs = parse_player_logs(in);
    const auto mapped = map_player_responses(logs, bank, MatchConfig{});
    const auto& m = mapped.matrix;
    REQUIRE(m.entry_count() == 1);
    const auto e = m.get(*m.agent_index("p1"), item(m, "q31_2"));
    REQUIRE(e);
    CHECK(e->value == 1);
    CHECK(e->origin == Origin::Observed);
}

TEST_CASE("no logs give an empty matrix over bank items") {
    const auto bank = bank_of({{"q1", 2}, {"q2", 3}});
    const auto mapped = map_player_responses({}, bank, MatchConfig{});
    CHECK(mapped.matrix.item_count() == 5);
    CHECK(mapped.matrix.entry_count() == 0);
}

TEST_CASE("log integrity errors") {
    const auto bank = bank_of({{"q1", 2}});
    PlayerLogRecord r{"p1", "q404", 1, "x", true, std::nullopt};
    CHECK_THROWS_AS(map_player_responses({r}, bank, MatchConfig{}), IntegrityError);
    r.qid = "q1";
    r.clue_position = 3;
    CHECK_THROWS_AS(map_player_responses({r}, bank, MatchConfig{}), IntegrityError);
}

TEST_CASE("conflicting duplicate logs keep the first and warn") {
    const auto bank = bank_of({{"q1", 2}});
    PlayerLogRecord a{"p1", "q1", 1, "x", true, std::string("2024-01-01")};
    PlayerLogRecord b{"p1", "q1", 1, "y", false, std::string("2024-01-02")};
    for (const auto& logs : {std::vector<PlayerLogRecord>{a, b}, std::vector<PlayerLogRecord>{b, a}}) {
        const auto mapped = map_player_responses(logs, bank, MatchConfig{});
        CHECK(mapped.warnings.size() == 1);
        CHECK(mapped.matrix.get(0, 0)->value == 1);
    }
}

TEST_CASE("unruled logs use the fuzzy matcher") {
    const auto bank = bank_of({{"q1", 1}});
    PlayerLogRecord r{"p1", "q1", 1, "X", std::nullopt, std::nullopt};
    CHECK(map_player_responses({r}, bank, MatchConfig{}).matrix.get(0, 0)->value == 1);
}

TEST_CASE("backfill examples") {
    const auto bank = bank_of({{"q", 4}});
    SUBCASE("correct propagates forward") {
        auto m = matrix_over(bank, {"a"});
        m.set(0, item(m, "q_2"), {1, Origin::Observed});
        const auto b = backfill(m, bank);
        CHECK(b.get(0, item(m, "q_3"))->value == 1);
        CHECK(b.get(0, item(m, "q_4"))->value == 1);
        CHECK(b.get(0, item(m, "q_4"))->origin == Origin::Backfilled);
        CHECK_FALSE(b.get(0, item(m, "q_1")));
    }
    SUBCASE("miss propagates backward") {
        auto m = matrix_over(bank, {"a"});
        m.set(0, item(m, "q_3"), {0, Origin::Observed});
        const auto b = backfill(m, bank);
        CHECK(b.get(0, item(m, "q_1"))->value == 0);
        CHECK(b.get(0, item(m, "q_2"))->value == 0);
        CHECK_FALSE(b.get(0, item(m, "q_4")));
    }
    SUBCASE("observed entries take precedence") {
        auto m = matrix_over(bank, {"a"});
        m.set(0, item(m, "q_4"), {0, Origin::Observed});
        m.set(0, item(m, "q_2"), {1, Origin::Observed});
        const auto b = backfill(m, bank);
        CHECK(b.get(0, item(m, "q_4"))->value == 0);
        CHECK(b.get(0, item(m, "q_4"))->origin == Origin::Observed);
    }
}

TEST_CASE("backfill is idempotent and monotone on random histories") {
    const auto bank = bank_of({{"a", 5}, {"b", 3}, {"c", 1}});
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        auto m = matrix_over(bank, {"p", "r"});
        for (std::size_t agent = 0; agent < 2; ++agent)
            for (std::size_t j = 0; j < m.item_count(); ++j)
                if (rng.bernoulli(0.3)) m.set(agent, j, {static_cast<std::uint8_t>(rng.bernoulli(0.5)), Origin::Observed});
        const auto once = backfill(m, bank);
        REQUIRE(backfill(once, bank) == once);
        for (const auto& [key, entry] : m.entries()) REQUIRE(once.get(key.first, key.second)->value == entry.value);
        for (const auto& q : bank.questions()) {
            for (std::size_t agent = 0; agent < 2; ++agent) {
                std::optional<std::uint8_t> prev;
                for (int t = 1; t <= static_cast<int>(q.clues.size()); ++t) {
                    const auto e = once.get(agent, item(m, make_item_id(q.qid, t)));
                    if (!e) continue;
                    if (prev && *prev == 1 && e->value == 0) REQUIRE(e->origin == Origin::Observed);
                    prev = e->value;
                }
            }
        }
    }
}

TEST_CASE("response csv round trip") {
    const auto bank = bank_of({{"q", 2}});
    auto m = matrix_over(bank, {"a", "b"});
    m.set(0, 0, {1, Origin::Observed});
    m.set(1, 1, {0, Origin::GroupSampled});
    std::ostringstream out;
    write_response_csv(out, m);
    std::istringstream in(out.str());
    const auto back = read_response_csv(in);
    CHECK(back.entry_count() == 2);
    CHECK(back.get(*back.agent_index("b"), *back.item_index("q_2"))->origin == Origin::GroupSampled);
    CHECK_THROWS_AS(m.set(0, 0, {2, Origin::Observed}), ContractError);
}

TEST_CASE("group formation") {
    SUBCASE("singleton") {
        GroupSpec spec;
        spec.sizes = {1};
        spec.groups_per_size = 1;
        const auto groups = form_groups({{"A", {0, 1}}}, spec);
        REQUIRE(groups.size() == 1);
        CHECK(groups[0].members == std::vector<std::string>{"A"});
    }
    SUBCASE("greedy picks the disjoint pair") {
        GroupSpec spec;
        spec.sizes = {2};
        spec.groups_per_size = 1;
        std::vector<PlayerCoverage> players{{"A", {0, 1, 2}}, {"B", {0, 1, 2}}, {"C", {3, 4}}, {"D", {1, 2}}};
        const auto groups = form_groups(players, spec);
        REQUIRE(groups.size() == 1);
        auto members = groups[0].members;
        std::sort(members.begin(), members.end());
        CHECK(members == std::vector<std::string>{"A", "C"});
    }
    SUBCASE("default spec over 155 players gives 20 agents") {
        std::vector<PlayerCoverage> players;
        Rng rng(1);
        for (int i = 0; i < 155; ++i) {
            PlayerCoverage p{"p" + std::to_string(i), {}};
            for (std::size_t j = 0; j < 200; ++j)
                if (rng.bernoulli(0.1)) p.items.push_back(j);
            players.push_back(p);
        }
        const auto groups = form_groups(players, GroupSpec{});
        CHECK(groups.size() == 20);
        CHECK(form_groups(players, GroupSpec{}).at(7).members == groups.at(7).members);
    }
    SUBCASE("too few players") {
        CHECK_THROWS_AS(form_groups({{"A", {0}}}, GroupSpec{}), ConfigError);
    }
}

TEST_CASE("group votes") {
    Rng rng(3);
    const auto majority = group_response({1, 1, 0}, rng);
    CHECK(majority.value == 1);
    CHECK(majority.origin == Origin::GroupMajority);
    Rng r1(99), r2(99);
    CHECK(group_response({1, 0}, r1).value == group_response({1, 0}, r2).value);
    Rng mc(2024);
    int ones = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto v = group_response({1, 0}, mc);
        CHECK(v.origin == Origin::GroupSampled);
        ones += v.value;
    }
    const double rate = static_cast<double>(ones) / n;
    CHECK(rate >= 0.48);
    CHECK(rate <= 0.52);
}

TEST_CASE("group matrix pools member votes") {
    const auto bank = bank_of({{"q", 1}});
    auto players = matrix_over(bank, {"a", "b", "c"});
    players.set(0, 0, {1, Origin::Observed});
    players.set(1, 0, {1, Origin::Observed});
    players.set(2, 0, {0, Origin::Observed});
    const std::vector<GroupedAgent> groups{{"g", 3, {"a", "b", "c"}}};
    const auto m = build_group_matrix(players, groups, 0);
    REQUIRE(m.entry_count() == 1);
    CHECK(m.get(0, 0)->value == 1);
    CHECK(m.get(0, 0)->origin == Origin::GroupMajority);
}
