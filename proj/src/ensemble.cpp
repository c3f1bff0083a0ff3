#include "dcot/ensemble.hpp"

#include <map>

#include "dcot/metrics.hpp"
#include "dcot/template.hpp"

namespace dcot::ensemble {

std::string majority_vote(std::span<const std::string> answers) {
    if (answers.empty()) throw std::invalid_argument("majority_vote needs at least one answer");
    std::map<std::string, std::size_t> counts;
    for (const auto& a : answers) ++counts[a];
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

std::optional<std::string> final_answer_of(const Example& example, const std::string& completion) {
    auto parsed = templates::parse_dcot_response(completion);
    if (!parsed.final_answer) return std::nullopt;
    return metrics::canonical_answer(example, *parsed.final_answer);
}

SelfConsistencyResult self_consistency(const Example& example, const std::string& prompt,
                                       const EnsembleConfig& cfg, inference::Client& client,
                                       const inference::GenerationParams& params, std::size_t max_in_flight) {
    if (cfg.samples < 1) throw std::invalid_argument("ensemble needs samples >= 1");
    std::vector<inference::Request> requests;
    for (int i = 0; i < cfg.samples; ++i) {
        inference::GenerationParams p = params;
        p.temperature = cfg.temperature;
        p.sample_index = i;
        requests.push_back({prompt, p});
    }
    return tally(example, client.complete_batch(requests, max_in_flight));
}

SelfConsistencyResult tally(const Example& example, std::span<const inference::BatchItem> items) {
    SelfConsistencyResult out;
    std::vector<std::string> votes;
    for (std::size_t i = 0; i < items.size(); ++i) {
        Draw d;
        d.sample_index = static_cast<int>(i);
        if (!items[i].ok()) {
            d.error = items[i].error;
        } else {
            d.completion = items[i].record->completion;
            d.answer = final_answer_of(example, d.completion);
            if (d.answer) {
                votes.push_back(*d.answer);
            } else {
                d.error = "no extractable final answer";
            }
        }
        out.draws.push_back(std::move(d));
    }
    if (votes.empty()) {
        throw EnsembleError("all " + std::to_string(items.size()) + " draws failed for " + example.id);
    }
    out.answer = majority_vote(votes);
    return out;
}

}  // namespace dcot::ensemble
