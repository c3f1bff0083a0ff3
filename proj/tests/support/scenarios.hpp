// Scripted mock scenarios shared by the unit and acceptance tests.
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dcot/example.hpp"
#include "dcot/inference.hpp"
#include "dcot/rng.hpp"
#include "dcot/template.hpp"

namespace dcot::testing {

inline const std::vector<Option>& four_options() {
    static const std::vector<Option> o{{"A", "red"}, {"B", "blue"}, {"C", "green"}, {"D", "black"}};
    return o;
}

/// n four-option questions; gold letters cycle A, B, C, D.
inline std::vector<Example> mc_items(const std::string& dataset, std::size_t n, Split split = Split::dev) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        Example e;
        e.id = dataset + "/" + std::string(to_string(split)) + "/" + std::to_string(i);
        e.dataset = dataset;
        e.question = "Question number " + std::to_string(i) + "?";
        e.options = four_options();
        e.gold = std::string(1, static_cast<char>('A' + i % 4));
        e.task_type = TaskType::multiple_choice;
        e.split = split;
        out.push_back(std::move(e));
    }
    return out;
}

/// n arithmetic questions scored by accuracy; golds are 1..7.
inline std::vector<Example> numeric_items(const std::string& dataset, std::size_t n, Split split = Split::dev) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        Example e;
        e.id = dataset + "/" + std::string(to_string(split)) + "/" + std::to_string(i);
        e.dataset = dataset;
        e.question = "Question number " + std::to_string(i) + ": what is " + std::to_string(i % 7) + " + 1?";
        e.gold = std::to_string(i % 7 + 1);
        e.task_type = TaskType::numeric;
        e.split = split;
        out.push_back(std::move(e));
    }
    return out;
}

/// An answer different from the gold one.
inline std::string wrong_label(const Example& e) {
    if (e.task_type == TaskType::numeric) return std::to_string(std::stoi(e.gold) + 100);
    return e.gold == "A" ? "B" : "A";
}

/// Chain 1 is right on the first 60% of items. At k = 2 the second chain
/// fixes the next 20% and the final answer follows chain 2. The same
/// completions serve the CoT prompt (as for k = 1).
inline std::shared_ptr<inference::MockBackend> refinement_mock(const std::vector<Example>& items) {
    auto mock = std::make_shared<inference::MockBackend>();
    const std::size_t n = items.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = items[i];
        const bool first_right = i * 10 < n * 6;
        const bool second_right = i * 10 < n * 8;
        std::string a1 = first_right ? e.gold : wrong_label(e);
        std::string a2 = second_right ? e.gold : wrong_label(e);
        std::string one = templates::render_dcot_target({{"Reasoning one, the answer is " + a1}, a1});
        mock->add_exact(templates::render_dcot_prompt(e, 1), one);
        mock->add_exact(templates::render_cot_prompt(e), one);
        mock->add_exact(templates::render_dcot_prompt(e, 2),
                        templates::render_dcot_target(
                            {{"Reasoning one, the answer is " + a1, "Checking again, the answer is " + a2}, a2}));
    }
    return mock;
}

/// Each (prompt, sample_index) draw is correct with probability p, decided by
/// a SplitMix64 stream keyed on both; wrong draws always give the same label.
inline std::shared_ptr<inference::FunctionBackend> iid_draws(const std::vector<Example>& items, double p) {
    auto gold = std::make_shared<std::map<std::string, const Example*>>();
    for (const auto& e : items) (*gold)[templates::render_dcot_prompt(e, 1)] = &e;
    return std::make_shared<inference::FunctionBackend>(
        [gold, p](const std::string& prompt, const inference::GenerationParams& params) {
            inference::Attempt a;
            const Example& e = *gold->at(prompt);
            SplitMix64 rng(derive_seed(static_cast<std::uint64_t>(params.sample_index), prompt));
            std::string answer = rng.unit() < p ? e.gold : wrong_label(e);
            a.completion = templates::render_dcot_target({{"The answer is " + answer}, answer});
            return a;
        });
}

}  // namespace dcot::testing
