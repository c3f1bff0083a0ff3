#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcot/example.hpp"
#include "dcot/inference.hpp"

namespace dcot::ensemble {

/// All draws of a self-consistency ensemble failed to yield an answer.
class EnsembleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnsembleConfig {
    int samples = 5;
    double temperature = 0.7;
};

/// Modal answer; ties go to the lexicographically smallest answer.
/// Throws std::invalid_argument on an empty list.
std::string majority_vote(std::span<const std::string> answers);

struct Draw {
    int sample_index = 0;
    std::string completion;
    /// Canonical final answer, nullopt when the draw failed or had none.
    std::optional<std::string> answer;
    std::string error;
};

struct SelfConsistencyResult {
    std::string answer;
    std::vector<Draw> draws;
};

/// Samples the prompt `cfg.samples` times (sample_index 0..n-1, temperature
/// cfg.temperature), reads each draw's [Final answer], maps it to the
/// example's canonical answer space and votes. `params` supplies the model
/// and token limit. Throws EnsembleError when no draw yields an answer.
SelfConsistencyResult self_consistency(const Example& example, const std::string& prompt,
                                       const EnsembleConfig& cfg, inference::Client& client,
                                       const inference::GenerationParams& params, std::size_t max_in_flight = 8);

/// Votes over finished draws (in sample_index order). Throws EnsembleError
/// when none of them yields an answer.
SelfConsistencyResult tally(const Example& example, std::span<const inference::BatchItem> items);

/// Canonical answer carried by the [Final answer] field of a completion.
std::optional<std::string> final_answer_of(const Example& example, const std::string& completion);

}  // namespace dcot::ensemble
