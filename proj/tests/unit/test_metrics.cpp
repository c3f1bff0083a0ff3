#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dcot/metrics.hpp"
#include "dcot/rng.hpp"

using namespace dcot;
using namespace dcot::metrics;

namespace {

// Independent per-class F1 from explicit tp/fp/fn counts.
double oracle_macro_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                       const std::vector<std::string>& labels) {
    double sum = 0.0;
    int classes = 0;
    for (const auto& c : labels) {
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == c && gold[i] == c) ++tp;
            if (pred[i] == c && gold[i] != c) ++fp;
            if (pred[i] != c && gold[i] == c) ++fn;
        }
        if (tp + fp + fn == 0) continue;
        sum += 2.0 * tp / (2.0 * tp + fp + fn);
        ++classes;
    }
    return classes == 0 ? 0.0 : sum / classes;
}

std::vector<Option> opts(std::initializer_list<std::pair<const char*, const char*>> l) {
    std::vector<Option> out;
    for (auto [a, b] : l) out.push_back({a, b});
    return out;
}

Example example(TaskType t, std::string gold, std::optional<std::vector<Option>> options = std::nullopt) {
    Example e;
    e.id = "d/dev/0";
    e.dataset = "d";
    e.question = "q";
    e.gold = std::move(gold);
    e.task_type = t;
    e.options = std::move(options);
    return e;
}

}  // namespace

TEST_CASE("normalize follows the SQuAD rules") {
    CHECK(normalize("The Earl.").normalized == "earl");
    CHECK(normalize("earl").normalized == "earl");
    CHECK(normalize("  An   apple, a day ").normalized == "apple day");
    auto n = normalize("1,234.0");
    REQUIRE(n.numeric);
    CHECK(*n.numeric == 1234.0);
    CHECK(n.normalized == "1234");
    CHECK(normalize("$12").normalized == "12");
    CHECK_FALSE(normalize("12 apples").numeric);
}

TEST_CASE("property: normalize is idempotent and lowercase-closed") {
    SplitMix64 rng(7);
    const std::string alphabet = "aAbBtThHeE ,.!?-$1234567890";
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        auto n = rng.below(20);
        for (std::uint64_t j = 0; j < n; ++j) s += alphabet[rng.below(alphabet.size())];
        auto once = normalize(s).normalized;
        CHECK(normalize(once).normalized == once);
        CHECK(std::none_of(once.begin(), once.end(), [](char c) { return c >= 'A' && c <= 'Z'; }));
    }
}

TEST_CASE("extract_number takes the last number") {
    CHECK(extract_number("Therefore, Cornelia visited 6 Asian countries.") == 6.0);
    CHECK(extract_number("42 - 30 = 12") == 12.0);
    CHECK(extract_number("It costs -3.5 dollars") == -3.5);
    CHECK(extract_number("total 1,234,567 items") == 1234567.0);
    CHECK(extract_number("ages 5-7") == 7.0);
    CHECK_THROWS_AS(extract_number("no digits here"), ExtractionError);
}

TEST_CASE("extract_choice cascade") {
    auto o = opts({{"A", "green tea"}, {"B", "earl grey tea"}, {"C", "coffee"}, {"D", "water"}});
    CHECK(extract_choice("B", o) == "B");
    CHECK(extract_choice("the answer is (C)", o) == "C");
    CHECK(extract_choice("D) water", o) == "D");
    CHECK(extract_choice("Earl Grey tea", o) == "B");
    CHECK(extract_choice("I would pick coffee today", o) == "C");
    CHECK_THROWS_AS(extract_choice("none of these", o), ExtractionError);
    // "tea" bodies overlap: containment must be unique
    CHECK_THROWS_AS(extract_choice("green tea or earl grey tea", o), ExtractionError);
}

TEST_CASE("squad scores") {
    auto s = squad_scores("six apples", "apples six red");
    CHECK(s.em == 0.0);
    CHECK(s.f1 == doctest::Approx(0.8).epsilon(1e-12));
    auto t = squad_scores("The earl", "earl");
    CHECK(t.em == 1.0);
    CHECK(t.f1 == 1.0);
    CHECK(squad_scores("", "").em == 1.0);
    CHECK(squad_scores("", "").f1 == 1.0);
    std::vector<std::string> golds{"red", "six red apples"};
    CHECK(squad_scores("red apples", golds).f1 == doctest::Approx(0.8));
}

TEST_CASE("property: squad symmetric, bounded, F1 >= EM") {
    SplitMix64 rng(11);
    const std::vector<std::string> words{"the", "a", "cat", "dog", "red", "six", "apples", "Earl", "tea", "."};
    for (int i = 0; i < 1000; ++i) {
        auto sentence = [&] {
            std::string s;
            auto n = rng.below(5);
            for (std::uint64_t j = 0; j < n; ++j) s += words[rng.below(words.size())] + " ";
            return s;
        };
        std::string a = sentence(), b = sentence();
        auto ab = squad_scores(a, b), ba = squad_scores(b, a);
        CHECK(ab.f1 == doctest::Approx(ba.f1));
        CHECK(ab.em == ba.em);
        CHECK(ab.f1 >= ab.em);
        CHECK(ab.f1 <= 1.0);
        CHECK(ab.f1 >= 0.0);
    }
}

TEST_CASE("macro F1 fixtures") {
    std::vector<std::string> labels{"A", "B"};
    std::vector<std::string> gold{"A", "A", "B", "B"};
    std::vector<std::string> pred{"A", "B", "B", "B"};
    auto m = macro_f1(pred, gold, labels);
    CHECK(m.value == doctest::Approx(11.0 / 15.0).epsilon(1e-12));
    CHECK(m.per_class.at("A") == doctest::Approx(2.0 / 3.0));
    CHECK(m.per_class.at("B") == doctest::Approx(0.8));
    CHECK(macro_f1(gold, gold, labels).value == 1.0);
    std::vector<std::string> none(4, std::string(kNoAnswer));
    CHECK(macro_f1(none, gold, labels).value == 0.0);
    std::vector<std::string> short_pred{"A"};
    CHECK_THROWS_AS(macro_f1(short_pred, gold, labels), std::invalid_argument);
}

TEST_CASE("property: macro F1 matches the oracle and is relabel/permutation invariant") {
    SplitMix64 rng(5);
    const std::vector<std::string> labels{"A", "B", "C", "D"};
    const std::map<std::string, std::string> rename{{"A", "C"}, {"B", "D"}, {"C", "A"}, {"D", "B"}};
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 1 + rng.below(30);
        std::vector<std::string> gold, pred;
        for (std::size_t i = 0; i < n; ++i) {
            gold.push_back(labels[rng.below(4)]);
            pred.push_back(rng.below(10) == 0 ? std::string(kNoAnswer) : labels[rng.below(4)]);
        }
        double v = macro_f1(pred, gold, labels).value;
        CHECK(v == doctest::Approx(oracle_macro_f1(pred, gold, labels)).epsilon(1e-12));

        auto rg = gold, rp = pred;
        for (auto& g : rg) g = rename.at(g);
        for (auto& p : rp) {
            if (rename.contains(p)) p = rename.at(p);
        }
        CHECK(macro_f1(rp, rg, labels).value == doctest::Approx(v).epsilon(1e-12));

        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        seeded_shuffle(std::span(perm), rng);
        std::vector<std::string> pg, pp;
        for (auto i : perm) {
            pg.push_back(gold[i]);
            pp.push_back(pred[i]);
        }
        CHECK(macro_f1(pp, pg, labels).value == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("score_dataset picks the metric by task type") {
    auto yn = opts({{"A", "yes"}, {"B", "no"}});
    std::vector<Example> binary{example(TaskType::binary, "A", yn), example(TaskType::binary, "B", yn)};
    binary[1].id = "d/dev/1";
    std::vector<std::optional<std::string>> bp{"yes", "B"};
    auto r = score_dataset(binary, bp);
    CHECK(r.metric == Metric::macro_f1);
    CHECK(r.value == 1.0);
    CHECK(r.n == 2);

    std::vector<Example> span{example(TaskType::span_extraction, "the earl")};
    std::vector<std::optional<std::string>> sp{"Earl"};
    auto s = score_dataset(span, sp);
    CHECK(s.metric == Metric::squad_f1);
    CHECK(s.extras.at("squad_em") == 1.0);

    std::vector<Example> num{example(TaskType::numeric, "12"), example(TaskType::numeric, "1,000")};
    num[1].id = "d/dev/1";
    std::vector<std::optional<std::string>> np{"12", "1000.0"};
    CHECK(score_dataset(num, np).value == 1.0);
    CHECK(score_dataset(num, np).metric == Metric::numeric_acc);

    std::vector<std::optional<std::string>> missing{std::nullopt, "1000"};
    CHECK(score_dataset(num, missing).value == 0.5);

    std::vector<Example> sym{example(TaskType::symbolic, "earl")};
    std::vector<std::optional<std::string>> sy{"Earl."};
    CHECK(score_dataset(sym, sy).metric == Metric::accuracy);
    CHECK(score_dataset(sym, sy).value == 1.0);
}

TEST_CASE("verbatim predictions score exactly 1 on every metric") {
    auto abcd = opts({{"A", "w"}, {"B", "x"}, {"C", "y"}, {"D", "z"}});
    for (auto t : {TaskType::multiple_choice, TaskType::numeric, TaskType::span_extraction, TaskType::symbolic}) {
        std::vector<Example> v;
        for (int i = 0; i < 4; ++i) {
            std::string gold = t == TaskType::multiple_choice ? std::string(1, static_cast<char>('A' + i))
                                                              : (t == TaskType::numeric ? std::to_string(i * 7) : "w" + std::to_string(i));
            auto e = example(t, gold, t == TaskType::multiple_choice ? std::optional(abcd) : std::nullopt);
            e.id = "d/dev/" + std::to_string(i);
            v.push_back(e);
        }
        std::vector<std::optional<std::string>> p;
        for (const auto& e : v) p.push_back(e.gold);
        CHECK(score_dataset(v, p).value == 1.0);
    }
}

TEST_CASE("MetricReport JSON round trip") {
    MetricReport r{"d", Metric::squad_f1, 0.5, 3, {}, {{"squad_em", 0.25}}};
    nlohmann::json j = r;
    auto back = j.get<MetricReport>();
    CHECK(back.metric == Metric::squad_f1);
    CHECK(back.extras.at("squad_em") == 0.25);
}
