#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dcot/example.hpp"

namespace dcot::metrics {

/// Label recorded for a prediction that could not be extracted. It never
/// matches a gold label, so extraction failures count as wrong.
inline constexpr std::string_view kNoAnswer = "∅";

class ExtractionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NormalizedAnswer {
    std::string raw;
    std::string normalized;
    std::optional<double> numeric;
};

/// SQuAD normalization (lowercase, drop ASCII punctuation, drop a/an/the,
/// collapse whitespace). Text that reads as a plain number once commas and
/// currency symbols are removed normalizes to its canonical numeric form
/// instead, so "1,234.0" becomes "1234".
NormalizedAnswer normalize(std::string_view text);

/// Parses a whole string as a number after stripping whitespace, commas and a
/// leading currency symbol. Returns nullopt when anything else remains.
std::optional<double> parse_number(std::string_view text);

/// Shortest round-trip representation; integral values print without ".0".
std::string format_number(double value);

/// Last number in free text ("42 - 30 = 12" -> 12). Throws ExtractionError.
double extract_number(std::string_view text);

/// Maps a free-form answer onto an option label. Cascade: exact label,
/// bracketed label ("(B)", "B)"), normalized equality with a body, unique
/// token-bounded containment of a body. Throws ExtractionError on no match
/// or ambiguity.
std::string extract_choice(std::string_view answer, std::span<const Option> options);

struct SquadScore {
    double em = 0.0;
    double f1 = 0.0;
};

SquadScore squad_scores(std::string_view prediction, std::string_view gold);
/// Max over golds, taken separately for EM and F1.
SquadScore squad_scores(std::string_view prediction, std::span<const std::string> golds);

struct MacroF1 {
    double value = 0.0;
    /// F1 of every class that entered the average.
    std::map<std::string, double> per_class;
};

/// Unweighted mean of per-class F1 over `label_set`. A class enters the
/// average when it has gold support or was predicted at least once.
/// Predictions outside the label set are plain errors. Throws
/// std::invalid_argument on length mismatch or a gold outside the label set.
MacroF1 macro_f1(std::span<const std::string> predictions, std::span<const std::string> golds,
                 std::span<const std::string> label_set);

enum class Metric { macro_f1, squad_f1, squad_em, numeric_acc, accuracy };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

/// Metric assigned to each task type.
Metric metric_for(TaskType t);

struct MetricReport {
    std::string dataset;
    Metric metric = Metric::accuracy;
    double value = 0.0;  ///< in [0, 1]
    std::size_t n = 0;
    std::map<std::string, double> per_class;
    /// Secondary numbers (e.g. squad_em next to squad_f1).
    std::map<std::string, double> extras;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// Task-aware canonical form of an answer: the option label for option
/// tasks, the canonical number for numeric tasks and the normalized text
/// otherwise. nullopt when nothing can be extracted.
std::optional<std::string> canonical_answer(const Example& e, std::string_view answer);

struct ExampleScore {
    std::string prediction;  ///< canonical answer or kNoAnswer
    bool correct = false;
    double f1 = 0.0;  ///< token F1 for span tasks, 0/1 otherwise
};

ExampleScore score_example(const Example& e, const std::optional<std::string>& final_answer);

/// Labels declared by the dataset's options, sorted.
std::vector<std::string> label_set(std::span<const Example> examples);

/// Scores one dataset. `final_answers[i]` belongs to `examples[i]`; a missing
/// answer is scored as wrong. Throws std::invalid_argument on mixed task
/// types, mixed datasets, length mismatch or an empty dataset.
MetricReport score_dataset(std::span<const Example> examples,
                           std::span<const std::optional<std::string>> final_answers);

}  // namespace dcot::metrics
