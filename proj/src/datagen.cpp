#include "dcot/datagen.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dcot/metrics.hpp"
#include "dcot/rng.hpp"
#include "dcot/template.hpp"

namespace dcot::datagen {

using nlohmann::json;

std::span<const std::string_view> triggers_for(TaskType t) {
    if (t == TaskType::span_extraction) return kSpanTriggers;
    return kGeneralTriggers;
}

void to_json(json& j, const CoTRecord& r) {
    j = json{{"example_id", r.example_id},
             {"trigger_index", r.trigger_index},
             {"cot", r.cot},
             {"extracted_answer", r.extracted_answer},
             {"correct", r.correct},
             {"token_estimate", r.token_estimate}};
}

void from_json(const json& j, CoTRecord& r) {
    j.at("example_id").get_to(r.example_id);
    j.at("trigger_index").get_to(r.trigger_index);
    j.at("cot").get_to(r.cot);
    j.at("extracted_answer").get_to(r.extracted_answer);
    j.at("correct").get_to(r.correct);
    r.token_estimate = j.value("token_estimate", std::size_t{0});
}

std::string_view to_string(Regime r) { return r == Regime::cot ? "cot" : "dcot"; }

void to_json(json& j, const TrainingInstance& t) {
    j = json{{"example_id", t.example_id},
             {"regime", to_string(t.regime)},
             {"k", t.k},
             {"prompt", t.prompt},
             {"target", t.target}};
}

void from_json(const json& j, TrainingInstance& t) {
    j.at("example_id").get_to(t.example_id);
    auto regime = j.at("regime").get<std::string>();
    if (regime == "cot") {
        t.regime = Regime::cot;
    } else if (regime == "dcot") {
        t.regime = Regime::dcot;
    } else {
        throw std::invalid_argument("unknown regime: " + regime);
    }
    j.at("k").get_to(t.k);
    j.at("prompt").get_to(t.prompt);
    j.at("target").get_to(t.target);
}

std::vector<std::size_t> sample_triggers(const Example& example, std::uint64_t seed) {
    auto list = triggers_for(example.task_type);
    std::vector<std::size_t> idx(list.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    SplitMix64 rng(derive_seed(seed, example.id));
    seeded_shuffle(std::span<std::size_t>(idx), rng);
    idx.resize(std::min(kTriggersPerQuestion, idx.size()));
    return idx;
}

std::string teacher_prompt(const Example& example, std::size_t trigger_index) {
    auto list = triggers_for(example.task_type);
    if (trigger_index >= list.size()) {
        throw std::out_of_range("trigger index " + std::to_string(trigger_index) + " out of range");
    }
    const std::string_view trigger = list[trigger_index];
    std::string out;
    if (example.task_type == TaskType::span_extraction) {
        if (example.context) out += *example.context + " ";
        out += example.question;
        out += " Answer: ";
        out += example.gold;
        out += ' ';
        out += trigger;
        return out;
    }
    if (example.context) out += *example.context + "\n";
    out += example.question;
    out += '\n';
    if (example.options) {
        for (const auto& o : *example.options) out += o.label + ") " + o.body + "\n";
    }
    out += trigger;
    return out;
}

std::string extraction_prompt(const Example& example, std::string_view prompt, std::string_view cot) {
    std::string out(prompt);
    out += ' ';
    out += cot;
    if (example.options && !example.options->empty()) {
        out += " Therefore, the answer " + templates::label_enumeration(*example.options) + " is:";
    } else {
        out += " Therefore, the answer is:";
    }
    return out;
}

inference::GenerationParams teacher_params(std::string model) {
    inference::GenerationParams p;
    p.model = std::move(model);
    p.temperature = 0.7;
    p.top_p = 1.0;
    p.max_tokens = 512;
    return p;
}

bool matches_gold(const Example& example, std::string_view answer) {
    auto got = metrics::canonical_answer(example, answer);
    auto want = metrics::canonical_answer(example, example.gold);
    return got && want && *got == *want;
}

namespace {

// Follow-up extraction calls are short and greedy.
inference::GenerationParams extraction_params(const inference::GenerationParams& teacher) {
    inference::GenerationParams p = teacher;
    p.temperature = 0.0;
    p.max_tokens = 32;
    p.sample_index = 0;
    return p;
}

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

bool needs_followup(TaskType t) { return has_options(t) || t == TaskType::symbolic; }

std::string follow_up_answer(const Example& example, const std::string& completion) {
    if (has_options(example.task_type)) {
        try {
            return metrics::extract_choice(completion, *example.options);
        } catch (const metrics::ExtractionError&) {
            return std::string(metrics::kNoAnswer);
        }
    }
    auto n = metrics::normalize(completion);
    return n.normalized.empty() ? std::string(metrics::kNoAnswer) : n.normalized;
}

}  // namespace

GenerationResult generate_cots(const Example& example, std::span<const std::size_t> triggers,
                               inference::Client& client, const inference::GenerationParams& params,
                               std::size_t max_in_flight) {
    GenerationResult out;
    std::vector<inference::Request> requests;
    requests.reserve(triggers.size());
    for (std::size_t t : triggers) requests.push_back({teacher_prompt(example, t), params});
    auto chains = client.complete_batch(requests, max_in_flight);

    std::vector<CoTRecord> records;
    std::vector<inference::Request> followups;
    for (std::size_t i = 0; i < chains.size(); ++i) {
        if (!chains[i].ok()) {
            out.failures.push_back("trigger " + std::to_string(triggers[i]) + ": " + chains[i].error);
            continue;
        }
        const auto& rec = *chains[i].record;
        CoTRecord r;
        r.example_id = example.id;
        r.trigger_index = triggers[i];
        r.cot = trim(rec.completion);
        r.token_estimate = rec.usage.completion_tokens;
        if (needs_followup(example.task_type)) {
            followups.push_back({extraction_prompt(example, requests[i].prompt, r.cot), extraction_params(params)});
        }
        records.push_back(std::move(r));
    }

    std::vector<inference::BatchItem> answers;
    if (!followups.empty()) answers = client.complete_batch(followups, max_in_flight);

    std::size_t f = 0;
    for (auto& r : records) {
        switch (example.task_type) {
            case TaskType::span_extraction:
                r.extracted_answer = example.gold;
                break;
            case TaskType::numeric:
                try {
                    r.extracted_answer = metrics::format_number(metrics::extract_number(r.cot));
                } catch (const metrics::ExtractionError&) {
                    r.extracted_answer = std::string(metrics::kNoAnswer);
                }
                break;
            default: {
                const auto& a = answers[f++];
                if (!a.ok()) {
                    out.failures.push_back("trigger " + std::to_string(r.trigger_index) +
                                           " (extraction): " + a.error);
                    r.extracted_answer.clear();
                    continue;
                }
                r.extracted_answer = follow_up_answer(example, a.record->completion);
            }
        }
        r.correct = matches_gold(example, r.extracted_answer);
        out.records.push_back(r);
    }
    return out;
}

CoTPool filter_correct(std::span<const CoTRecord> records, const Example& example) {
    CoTPool pool;
    pool.example_id = example.id;
    std::vector<CoTRecord> kept;
    for (const auto& r : records) {
        if (r.correct && !r.cot.empty() && r.example_id == example.id && matches_gold(example, r.extracted_answer)) kept.push_back(r);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const CoTRecord& a, const CoTRecord& b) { return a.trigger_index < b.trigger_index; });
    std::set<std::string> seen;
    for (auto& r : kept) {
        if (pool.records.size() == static_cast<std::size_t>(kMaxChains)) break;
        if (!seen.insert(r.cot).second) continue;
        pool.records.push_back(std::move(r));
    }
    return pool;
}

std::map<std::string, int> assign_k(std::span<const CoTPool> pools, std::uint64_t seed) {
    std::vector<const CoTPool*> order;
    order.reserve(pools.size());
    for (const auto& p : pools) {
        if (p.m() == 0) throw std::invalid_argument("empty CoT pool for " + p.example_id);
        order.push_back(&p);
    }
    std::sort(order.begin(), order.end(),
              [](const CoTPool* a, const CoTPool* b) { return a->example_id < b->example_id; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->example_id == order[i - 1]->example_id) {
            throw std::invalid_argument("duplicate pool for " + order[i]->example_id);
        }
    }
    SplitMix64 rng(seed);
    seeded_shuffle(std::span<const CoTPool*>(order), rng);

    std::map<std::string, int> out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        int k = static_cast<int>(i % kMaxChains) + 1;
        out[order[i]->example_id] = std::min(k, static_cast<int>(order[i]->m()));
    }
    return out;
}

TrainingSets build_training_sets(std::span<const CoTPool> pools, const std::map<std::string, int>& assignment,
                                 const std::map<std::string, Example>& examples) {
    std::vector<const CoTPool*> order;
    for (const auto& p : pools) order.push_back(&p);
    std::sort(order.begin(), order.end(),
              [](const CoTPool* a, const CoTPool* b) { return a->example_id < b->example_id; });

    TrainingSets out;
    for (const CoTPool* pool : order) {
        auto a = assignment.find(pool->example_id);
        if (a == assignment.end()) throw std::invalid_argument("no k assigned for " + pool->example_id);
        auto e = examples.find(pool->example_id);
        if (e == examples.end()) throw std::invalid_argument("unknown example " + pool->example_id);
        const int k = a->second;
        if (k < 1 || static_cast<std::size_t>(k) > pool->m()) {
            throw std::invalid_argument("k=" + std::to_string(k) + " does not fit pool of " +
                                        std::to_string(pool->m()) + " for " + pool->example_id);
        }
        const Example& ex = e->second;

        templates::DCoTTarget target;
        target.final_answer = ex.gold;
        for (int i = 0; i < k; ++i) target.cots.push_back(pool->records[i].cot);
        out.dcot.push_back({ex.id, Regime::dcot, k, templates::render_dcot_prompt(ex, k),
                            templates::render_dcot_target(target)});

        const std::string cot_prompt = templates::render_cot_prompt(ex);
        for (const auto& chain : target.cots) {
            out.cot.push_back({ex.id, Regime::cot, 1, cot_prompt, templates::render_cot_target(chain, ex.gold)});
        }
    }
    return out;
}

BudgetCheck check_budget(std::span<const TrainingInstance> dcot, std::span<const TrainingInstance> cot) {
    BudgetCheck out;
    for (const auto& t : dcot) {
        auto parsed = templates::parse_dcot_response(t.target);
        out.dcot_chains += parsed.cots.size();
        if (t.regime != Regime::dcot || static_cast<int>(parsed.cots.size()) != t.k || !parsed.final_answer) {
            out.malformed.push_back(t.example_id);
        }
    }
    for (const auto& t : cot) {
        auto parsed = templates::parse_dcot_response(t.target);
        ++out.cot_instances;
        if (t.regime != Regime::cot || t.k != 1 || parsed.cots.size() != 1 || !parsed.final_answer) {
            out.malformed.push_back(t.example_id);
        }
    }
    return out;
}

}  // namespace dcot::datagen
