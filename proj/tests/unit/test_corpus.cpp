#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "dcot/corpus.hpp"
#include "dcot/rng.hpp"

using namespace dcot;
using namespace dcot::corpus;

namespace {

std::string mc_line(const std::string& id, int n_options, const std::string& gold = "A") {
    nlohmann::json j{{"id", id}, {"dataset", "arc"}, {"question", "Which?"}, {"gold", gold},
                     {"task_type", "multiple_choice"}, {"split", "train"}};
    j["options"] = nlohmann::json::array();
    for (int i = 0; i < n_options; ++i) {
        j["options"].push_back({{"label", std::string(1, static_cast<char>('A' + i))}, {"body", "opt" + std::to_string(i)}});
    }
    return j.dump();
}

std::vector<Example> make(const std::string& dataset, Split split, std::size_t n, std::size_t start = 0) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        Example e;
        e.id = dataset + "/" + std::string(to_string(split)) + "/" + std::to_string(start + i);
        e.dataset = dataset;
        e.question = "q" + std::to_string(i);
        e.gold = "1";
        e.task_type = TaskType::numeric;
        e.split = split;
        out.push_back(e);
    }
    return out;
}

std::set<std::string> ids(const std::vector<Example>& v) {
    std::set<std::string> s;
    for (const auto& e : v) s.insert(e.id);
    return s;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::none_of(a.begin(), a.end(), [&](const auto& x) { return b.contains(x); });
}

}  // namespace

TEST_CASE("ingest keeps file order") {
    std::stringstream in(mc_line("arc/train/0", 3) + "\n" + mc_line("arc/train/1", 2, "B") + "\n" +
                         mc_line("arc/train/2", 4, "D") + "\n");
    auto v = ingest(in, "arc");
    REQUIRE(v.size() == 3);
    CHECK(v[0].id == "arc/train/0");
    CHECK(v[1].gold == "B");
    CHECK(v[2].options->size() == 4);
}

TEST_CASE("ingest rejects a multiple-choice record with one option") {
    std::stringstream in(mc_line("arc/train/7", 1) + "\n");
    CHECK_THROWS_WITH_AS(ingest(in), "id=arc/train/7: needs ≥2 options", ValidationError);
}

TEST_CASE("ingest names duplicate ids and malformed lines") {
    std::stringstream dup(mc_line("arc/train/0", 2) + "\n" + mc_line("arc/train/0", 2) + "\n");
    CHECK_THROWS_WITH_AS(ingest(dup), doctest::Contains("arc/train/0"), ValidationError);
    std::stringstream bad(mc_line("arc/train/0", 2) + "\n{not json\n");
    CHECK_THROWS_WITH_AS(ingest(bad), doctest::Contains("line 2"), ValidationError);
}

TEST_CASE("ingest rejects unknown keys and null optionals") {
    std::stringstream extra(R"({"id":"x/train/0","dataset":"x","question":"q","gold":"1","task_type":"numeric","split":"train","foo":1})");
    CHECK_THROWS_AS(ingest(extra), ValidationError);
    std::stringstream numeric_gold(R"({"id":"x/train/0","dataset":"x","question":"q","gold":"abc","task_type":"numeric","split":"train"})");
    CHECK_THROWS_WITH_AS(ingest(numeric_gold), doctest::Contains("id=x/train/0"), ValidationError);
}

TEST_CASE("option labels are normalized to letters") {
    std::stringstream in(
        R"({"id":"q/train/0","dataset":"q","question":"q","options":[{"label":"1","body":"red"},{"label":"2","body":"blue"}],"gold":"2","task_type":"multiple_choice","split":"train"})"
        "\n"
        R"({"id":"b/train/0","dataset":"b","question":"q","options":[{"label":"A","body":"yes"},{"label":"B","body":"no"}],"gold":"no","task_type":"binary","split":"train"})");
    auto v = ingest(in);
    REQUIRE(v.size() == 2);
    CHECK((*v[0].options)[0].label == "A");
    CHECK((*v[0].options)[1].body == "2) blue");
    CHECK(v[0].gold == "B");
    CHECK(v[1].gold == "B");
}

TEST_CASE("JSON round trip omits absent optionals") {
    Example e = make("g", Split::dev, 1)[0];
    nlohmann::json j = e;
    CHECK_FALSE(j.contains("context"));
    CHECK_FALSE(j.contains("options"));
    CHECK(j.get<Example>() == e);
}

TEST_CASE("dev sampled from train when missing") {
    auto ex = make("d", Split::train, 2000);
    auto test = make("d", Split::test, 500);
    ex.insert(ex.end(), test.begin(), test.end());
    auto s = derive_splits(ex, SplitPlan{});
    CHECK(s.dev.size() == 500);
    CHECK(s.train.size() == 1500);
    CHECK(s.test.size() == 500);
    for (const auto& e : s.dev) CHECK(e.split == Split::dev);
}

TEST_CASE("override cuts dev and test from the pooled test set") {
    auto ex = make("tiny", Split::train, 300);
    auto test = make("tiny", Split::test, 150);
    ex.insert(ex.end(), test.begin(), test.end());
    SplitPlan plan;
    plan.overrides["tiny"] = {50, 100};
    auto s = derive_splits(ex, plan);
    CHECK(s.dev.size() == 50);
    CHECK(s.test.size() == 100);
    CHECK(s.train.size() == 300);
    CHECK(s.dropped == 0);
}

TEST_CASE("no test: large train moves dev to test and resamples dev") {
    auto ex = make("big", Split::train, 3000);
    auto dev = make("big", Split::dev, 400);
    ex.insert(ex.end(), dev.begin(), dev.end());
    auto s = derive_splits(ex, SplitPlan{});
    CHECK(ids(s.test) == ids(dev));
    CHECK(s.dev.size() == 500);
    CHECK(s.train.size() == 2500);
}

TEST_CASE("no test: small train halves the dev set") {
    auto ex = make("small", Split::train, 800);
    auto dev = make("small", Split::dev, 301);
    ex.insert(ex.end(), dev.begin(), dev.end());
    auto s = derive_splits(ex, SplitPlan{});
    CHECK(s.dev.size() == 150);
    CHECK(s.test.size() == 151);
    CHECK(s.train.size() == 800);
}

TEST_CASE("sample larger than pool names the pool size") {
    auto ex = make("x", Split::train, 100);
    CHECK_THROWS_WITH_AS(derive_splits(ex, SplitPlan{}), doctest::Contains("pool has 100"), std::invalid_argument);
}

TEST_CASE("property: splits are disjoint, complete and deterministic across seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SplitMix64 rng(seed);
        std::vector<Example> ex;
        for (int d = 0; d < 3; ++d) {
            std::string name = "ds" + std::to_string(d);
            auto tr = make(name, Split::train, 600 + rng.below(1500));
            ex.insert(ex.end(), tr.begin(), tr.end());
            if (rng.below(2) == 1) {
                auto dv = make(name, Split::dev, 100 + rng.below(300));
                ex.insert(ex.end(), dv.begin(), dv.end());
            }
            if (rng.below(2) == 1) {
                auto te = make(name, Split::test, 100 + rng.below(300));
                ex.insert(ex.end(), te.begin(), te.end());
            }
        }
        SplitPlan plan;
        plan.seed = seed;
        plan.dev_sample_size = 100;
        auto a = derive_splits(ex, plan);
        auto b = derive_splits(ex, plan);
        CHECK(disjoint(ids(a.train), ids(a.dev)));
        CHECK(disjoint(ids(a.dev), ids(a.test)));
        CHECK(disjoint(ids(a.train), ids(a.test)));
        CHECK(a.train.size() + a.dev.size() + a.test.size() + a.dropped == ex.size());
        std::stringstream sa, sb;
        write_jsonl(sa, a.dev);
        write_jsonl(sb, b.dev);
        CHECK(sa.str() == sb.str());
    }
}
