#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcot/example.hpp"
#include "dcot/inference.hpp"

namespace dcot::datagen {

/// Teacher triggers for every task type except span extraction.
inline constexpr std::array<std::string_view, 16> kGeneralTriggers{
    "Answer: Let's think step by step.",
    "Answer: Before we dive into the answer,",
    "Answer: Let's think like a detective step by step.",
    "Answer: Let's think about this logically.",
    "Answer: Let's solve this problem by splitting it into steps.",
    "Answer: The answer is after the proof.",
    "Answer: Let's differentiate using step by step reasoning .",
    "Answer: Let's think step by step using inductive reasoning.",
    "Answer: Let's be concise and think step by step.",
    "Answer: Let's reflect on each answer option step by step.",
    "Answer: Let's think step by step given every option equal consideration.",
    "Answer: Let's think step by step like a scientist.",
    "Answer: Let's use step by step inductive reasoning.",
    "Answer: Let's work by elimination step by step.",
    "Answer: Let's use step by step deductive reasoning.",
    "Answer: Let's work this out in a step by step way to be sure we have the right answer.",
};

/// Rationale triggers for span extraction, appended after the gold answer.
inline constexpr std::array<std::string_view, 5> kSpanTriggers{
    "because of the following reasons:",
    "Justification:",
    "Here's why:",
    "Here is a list of the reasons:",
    "Now, let's think step by step about the reasons:",
};

inline constexpr std::size_t kTriggersPerQuestion = 4;
inline constexpr int kMaxChains = 4;

/// The trigger list used for a task type.
std::span<const std::string_view> triggers_for(TaskType t);

struct CoTRecord {
    std::string example_id;
    std::size_t trigger_index = 0;
    std::string cot;
    std::string extracted_answer;
    bool correct = false;
    std::size_t token_estimate = 0;

    bool operator==(const CoTRecord&) const = default;
};

void to_json(nlohmann::json& j, const CoTRecord& r);
void from_json(const nlohmann::json& j, CoTRecord& r);

/// Correct chains of one question, ordered by trigger index. m = records.size().
struct CoTPool {
    std::string example_id;
    std::vector<CoTRecord> records;

    std::size_t m() const { return records.size(); }
};

enum class Regime { cot, dcot };
std::string_view to_string(Regime r);

struct TrainingInstance {
    std::string example_id;
    Regime regime = Regime::dcot;
    int k = 1;
    std::string prompt;
    std::string target;

    bool operator==(const TrainingInstance&) const = default;
};

void to_json(nlohmann::json& j, const TrainingInstance& t);
void from_json(const nlohmann::json& j, TrainingInstance& t);

/// Four distinct trigger indices drawn with SplitMix64(derive_seed(seed, id)).
std::vector<std::size_t> sample_triggers(const Example& example, std::uint64_t seed);

/// Teacher prompt: context, question and options (one per line) then the
/// trigger. Span tasks use "{context} {question} Answer: {gold} {trigger}".
std::string teacher_prompt(const Example& example, std::size_t trigger_index);

/// "{prompt} {cot} Therefore, the answer (A, B, C, or D) is:" with the
/// example's own labels; the non-option variant ends "Therefore, the answer is:".
std::string extraction_prompt(const Example& example, std::string_view teacher_prompt, std::string_view cot);

/// Teacher sampling defaults: temperature 0.7, top-p 1.0, 512 output tokens.
inference::GenerationParams teacher_params(std::string model);

struct GenerationResult {
    std::vector<CoTRecord> records;
    /// "trigger <i>: <reason>" for every completion that failed.
    std::vector<std::string> failures;
};

/// One teacher completion per trigger, then answer extraction: option tasks
/// ask a follow-up extraction question, numeric tasks take the last number of
/// the chain, symbolic tasks ask a follow-up and normalize it, span tasks use
/// the gold answer (the chain is a rationale for it).
GenerationResult generate_cots(const Example& example, std::span<const std::size_t> triggers,
                               inference::Client& client, const inference::GenerationParams& params,
                               std::size_t max_in_flight = 4);

/// Whether `answer` counts as the example's gold answer.
bool matches_gold(const Example& example, std::string_view answer);

/// Keeps correct records, drops byte-identical duplicate chains, orders by
/// trigger index and caps the pool at four chains.
CoTPool filter_correct(std::span<const CoTRecord> records, const Example& example);

/// One k per question: questions sorted by id, shuffled with SplitMix64(seed),
/// then given 1,2,3,4,1,2,... in that order, each clamped to its pool size.
/// Throws std::invalid_argument for an empty pool.
std::map<std::string, int> assign_k(std::span<const CoTPool> pools, std::uint64_t seed);

struct TrainingSets {
    std::vector<TrainingInstance> dcot;
    std::vector<TrainingInstance> cot;
};

/// Per question: one DCoT instance with the first k pool chains and the gold
/// as final answer, plus one CoT instance for each of those same chains.
/// Output is ordered by example id. Throws std::invalid_argument when an id
/// lacks an assignment or an example.
TrainingSets build_training_sets(std::span<const CoTPool> pools, const std::map<std::string, int>& assignment,
                                 const std::map<std::string, Example>& examples);

struct BudgetCheck {
    std::size_t dcot_chains = 0;
    std::size_t cot_instances = 0;
    /// Instances whose target does not parse to their declared k (or CoT k != 1).
    std::vector<std::string> malformed;

    bool ok() const { return dcot_chains == cot_instances && malformed.empty(); }
};

/// Re-parses every target and compares the DCoT chain total with the CoT count.
BudgetCheck check_budget(std::span<const TrainingInstance> dcot, std::span<const TrainingInstance> cot);

}  // namespace dcot::datagen
