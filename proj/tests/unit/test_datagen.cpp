#include <doctest.h>

#include <algorithm>
#include <set>

#include "dcot/datagen.hpp"
#include "dcot/rng.hpp"
#include "dcot/template.hpp"

using namespace dcot;
using namespace dcot::datagen;
using dcot::inference::Client;
using dcot::inference::MockBackend;

namespace {

Example mc(const std::string& id, const std::string& gold = "B") {
    Example e;
    e.id = id;
    e.dataset = "arc";
    e.question = "Which drink is black tea?";
    e.options = std::vector<Option>{{"A", "green tea"}, {"B", "earl grey"}, {"C", "coffee"}, {"D", "water"}};
    e.gold = gold;
    e.task_type = TaskType::multiple_choice;
    return e;
}

Example numeric(const std::string& id, const std::string& gold) {
    Example e;
    e.id = id;
    e.dataset = "gsm8k";
    e.question = "How many countries did Cornelia visit?";
    e.gold = gold;
    e.task_type = TaskType::numeric;
    return e;
}

MockBackend::Rule contains(std::string needle, std::string completion, int status = 200) {
    MockBackend::Rule r;
    r.matches = [needle](const std::string& p) { return p.find(needle) != std::string::npos; };
    r.completion = std::move(completion);
    r.status = status;
    return r;
}

CoTRecord rec(const std::string& id, std::size_t trigger, std::string cot, bool correct = true,
              std::string answer = "B") {
    return {id, trigger, std::move(cot), std::move(answer), correct, 0};
}

CoTPool pool(const std::string& id, std::size_t m) {
    CoTPool p{id, {}};
    for (std::size_t i = 0; i < m; ++i) p.records.push_back(rec(id, i, "chain " + std::to_string(i) + " of " + id));
    return p;
}

}  // namespace

TEST_CASE("trigger lists") {
    CHECK(triggers_for(TaskType::numeric).size() == 16);
    CHECK(triggers_for(TaskType::span_extraction).size() == 5);
    CHECK(triggers_for(TaskType::multiple_choice)[0] == "Answer: Let's think step by step.");
}

TEST_CASE("trigger sampling is seeded per question") {
    // Frozen from an independent Python SplitMix64 + FNV-1a implementation.
    auto t = sample_triggers(numeric("gsm8k/train/0", "6"), 0);
    CHECK(t == std::vector<std::size_t>{8, 3, 4, 14});
    Example span;
    span.id = "squad/train/3";
    span.task_type = TaskType::span_extraction;
    CHECK(sample_triggers(span, 42) == std::vector<std::size_t>{4, 1, 2, 3});

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto s = sample_triggers(mc("arc/train/" + std::to_string(seed)), seed);
        CHECK(s.size() == kTriggersPerQuestion);
        CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == s.size());
        CHECK(s == sample_triggers(mc("arc/train/" + std::to_string(seed)), seed));
    }
}

TEST_CASE("teacher and extraction prompts") {
    auto e = mc("arc/train/0");
    auto p = teacher_prompt(e, 0);
    CHECK(p == "Which drink is black tea?\nA) green tea\nB) earl grey\nC) coffee\nD) water\n"
               "Answer: Let's think step by step.");
    CHECK(extraction_prompt(e, p, "It is bergamot.").ends_with(
        "step by step. It is bergamot. Therefore, the answer (A, B, C, or D) is:"));

    Example span;
    span.id = "squad/train/0";
    span.context = "The Earl drank tea.";
    span.question = "Who drank tea?";
    span.gold = "The Earl";
    span.task_type = TaskType::span_extraction;
    CHECK(teacher_prompt(span, 2) == "The Earl drank tea. Who drank tea? Answer: The Earl Here's why:");
    CHECK_THROWS_AS(teacher_prompt(span, 5), std::out_of_range);

    auto tp = teacher_params("teacher");
    CHECK(tp.temperature == 0.7);
    CHECK(tp.top_p == 1.0);
    CHECK(tp.max_tokens == 512);
}

TEST_CASE("multiple-choice chains go through a follow-up extraction") {
    auto mock = std::make_shared<MockBackend>();
    mock->add(contains("Therefore, the answer (A, B, C, or D) is:", " B"));
    mock->add(contains("Answer:", " Earl grey is a black tea. "));
    Client client(mock, nullptr);
    auto e = mc("arc/train/0");
    std::vector<std::size_t> triggers{0, 5};
    auto out = generate_cots(e, triggers, client, teacher_params("t"));
    REQUIRE(out.records.size() == 2);
    CHECK(out.failures.empty());
    CHECK(out.records[0].cot == "Earl grey is a black tea.");
    CHECK(out.records[0].extracted_answer == "B");
    CHECK(out.records[0].correct);
    CHECK(out.records[1].trigger_index == 5);
}

TEST_CASE("numeric chains take the last number and failures are reported") {
    auto mock = std::make_shared<MockBackend>();
    mock->add(contains("detective", "", 400));
    mock->add(contains("Answer:", "She went to 3 places, then 3 more. Therefore, Cornelia visited 6 Asian countries."));
    inference::RetryPolicy quick;
    quick.sleep = [](std::chrono::milliseconds) {};
    Client client(mock, nullptr, quick);
    auto e = numeric("gsm8k/train/1", "6");
    std::vector<std::size_t> triggers{0, 2};
    auto out = generate_cots(e, triggers, client, teacher_params("t"));
    REQUIRE(out.records.size() == 1);
    CHECK(out.records[0].extracted_answer == "6");
    CHECK(out.records[0].correct);
    REQUIRE(out.failures.size() == 1);
    CHECK(out.failures[0].starts_with("trigger 2:"));
}

TEST_CASE("filter_correct keeps correct unique chains in trigger order") {
    auto e = mc("arc/train/0");
    std::vector<CoTRecord> records{rec(e.id, 9, "z"), rec(e.id, 1, "a"), rec(e.id, 3, "a"),
                                   rec(e.id, 4, "wrong", false, "C"), rec(e.id, 2, "b"), rec(e.id, 7, "c"),
                                   rec(e.id, 8, "")};
    auto p = filter_correct(records, e);
    REQUIRE(p.m() == 4);
    CHECK(p.records[0].cot == "a");
    CHECK(p.records[0].trigger_index == 1);
    CHECK(p.records[1].cot == "b");
    CHECK(p.records[2].cot == "c");
    CHECK(p.records[3].cot == "z");
    std::vector<CoTRecord> wrong{rec(e.id, 0, "x", false, "A")};
    CHECK(filter_correct(wrong, e).m() == 0);
}

TEST_CASE("assign_k matches the frozen oracle and clamps to the pool") {
    std::vector<CoTPool> pools;
    for (int i = 0; i < 6; ++i) pools.push_back(pool("q/train/" + std::to_string(i), i == 2 ? 1 : 4));
    // Frozen from the Python oracle: ids sorted, Fisher-Yates with SplitMix64(7), k = i % 4 + 1.
    std::map<std::string, int> want{{"q/train/0", 3}, {"q/train/1", 1}, {"q/train/2", 1},
                                    {"q/train/3", 2}, {"q/train/4", 1}, {"q/train/5", 2}};
    CHECK(assign_k(pools, 7) == want);
    std::reverse(pools.begin(), pools.end());
    CHECK(assign_k(pools, 7) == want);

    pools.push_back(CoTPool{"q/train/9", {}});
    CHECK_THROWS_AS(assign_k(pools, 7), std::invalid_argument);
    pools.back() = pool("q/train/0", 2);
    CHECK_THROWS_AS(assign_k(pools, 7), std::invalid_argument);
}

TEST_CASE("property: full pools get a balanced k histogram") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::vector<CoTPool> pools;
        for (int i = 0; i < 200; ++i) pools.push_back(pool("p/train/" + std::to_string(i), 4));
        std::map<int, int> hist;
        for (const auto& [id, k] : assign_k(pools, seed)) ++hist[k];
        CHECK(hist == std::map<int, int>{{1, 50}, {2, 50}, {3, 50}, {4, 50}});
    }
}

TEST_CASE("training sets keep the CoT budget equal to the DCoT chain count") {
    std::vector<CoTPool> pools;
    std::map<std::string, Example> examples;
    SplitMix64 rng(1);
    for (int i = 0; i < 40; ++i) {
        auto e = mc("arc/train/" + std::to_string(i));
        examples[e.id] = e;
        pools.push_back(pool(e.id, 1 + rng.below(4)));
    }
    auto sets = build_training_sets(pools, assign_k(pools, 3), examples);
    CHECK(sets.dcot.size() == 40);
    std::size_t sum_k = 0;
    for (const auto& t : sets.dcot) sum_k += static_cast<std::size_t>(t.k);
    CHECK(sum_k == sets.cot.size());
    auto budget = check_budget(sets.dcot, sets.cot);
    CHECK(budget.ok());
    CHECK(budget.dcot_chains == sum_k);

    for (std::size_t i = 1; i < sets.dcot.size(); ++i) CHECK(sets.dcot[i - 1].example_id < sets.dcot[i].example_id);

    // a hand-corrupted target is caught
    auto broken = sets.dcot;
    broken[0].target = "[Final answer] B";
    CHECK_FALSE(check_budget(broken, sets.cot).ok());

    std::map<std::string, int> missing;
    CHECK_THROWS_AS(build_training_sets(pools, missing, examples), std::invalid_argument);
}

TEST_CASE("k=1 DCoT instance carries the same chain and answer as its CoT instance") {
    auto e = mc("arc/train/0");
    std::vector<CoTPool> pools{pool(e.id, 3)};
    std::map<std::string, int> k1{{e.id, 1}};
    auto sets = build_training_sets(pools, k1, {{e.id, e}});
    REQUIRE(sets.dcot.size() == 1);
    REQUIRE(sets.cot.size() == 1);
    CHECK(sets.dcot[0].prompt == sets.cot[0].prompt + "[Number of answers] 1\n");
    auto d = templates::parse_dcot_response(sets.dcot[0].target);
    auto c = templates::parse_dcot_response(sets.cot[0].target);
    CHECK(d.cots == c.cots);
    CHECK(d.final_answer == c.final_answer);
    CHECK(d.final_answer == "B");
}

TEST_CASE("TrainingInstance JSON round trip") {
    TrainingInstance t{"a/train/0", Regime::cot, 1, "p", "t"};
    nlohmann::json j = t;
    CHECK(j["regime"] == "cot");
    CHECK(j.get<TrainingInstance>() == t);
    CoTRecord r = rec("a", 2, "x");
    nlohmann::json rj = r;
    CHECK(rj.get<CoTRecord>() == r);
}
