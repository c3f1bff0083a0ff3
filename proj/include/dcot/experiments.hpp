#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcot/ensemble.hpp"
#include "dcot/example.hpp"
#include "dcot/inference.hpp"
#include "dcot/metrics.hpp"

namespace dcot::experiments {

enum class Regime { cot, dcot, cot_sc, dcot_sc, prompting_dcot };
std::string_view to_string(Regime r);
Regime parse_regime(std::string_view s);

/// CoT regimes ignore the k sweep and always run at k = 1.
bool uses_k(Regime r);

struct ExperimentConfig {
    std::vector<std::string> datasets;  ///< empty: every dataset in the input
    std::vector<int> ks{1, 2, 3, 4};
    std::vector<std::uint64_t> seeds{0, 42, 2024};
    Regime regime = Regime::dcot;
    /// Student decoding. "{seed}" in the model name is replaced per seed so
    /// each seed can address its own fine-tuned checkpoint.
    inference::GenerationParams params{.model = "", .temperature = 0.0, .top_p = 1.0, .max_tokens = 1024, .sample_index = 0, .stop = {}};
    ensemble::EnsembleConfig ensemble;
    std::size_t max_in_flight = 8;

    /// Throws std::invalid_argument for k outside [1, 4], no seeds or no ks.
    void validate() const;
};

struct ExampleOutcome {
    std::string id;
    std::string gold;
    std::string prediction;  ///< canonical prediction or the no-answer label
    std::vector<std::optional<std::string>> chain_answers;
    std::optional<std::string> final_answer;
    bool correct = false;
    double f1 = 0.0;
    std::string error;

    bool operator==(const ExampleOutcome&) const = default;
};

struct RunResult {
    std::string dataset;
    Regime regime = Regime::dcot;
    int k = 1;
    std::uint64_t seed = 0;
    Split split = Split::dev;
    metrics::MetricReport report;
    std::vector<ExampleOutcome> per_example;
    /// Ids whose completion or ensemble failed; they are scored wrong.
    std::vector<std::string> failures;
};

void to_json(nlohmann::json& j, const ExampleOutcome& o);
void from_json(const nlohmann::json& j, ExampleOutcome& o);

/// Answer stated by one reasoning chain: option label, canonical number or
/// normalized text. Looks at the text after the last "answer is" first, then
/// the last sentence, then (option tasks) the whole chain.
std::optional<std::string> chain_answer(const Example& example, std::string_view chain);

/// Runs every (dataset, k, seed) of `cfg` over `examples` (one split).
/// Results are ordered by dataset name, then k, then seed order of cfg.
std::vector<RunResult> run_sweep(const ExperimentConfig& cfg, std::span<const Example> examples, Split split,
                                 inference::Client& client);

/// Writes runs/{regime}/{dataset}/k{K}/seed{S}.jsonl (per-example lines) and
/// seed{S}.metrics.json next to it.
void write_run(const std::filesystem::path& results_dir, const RunResult& run);
/// Reads every run under results_dir/runs, sorted by (regime, dataset, k, seed).
std::vector<RunResult> read_runs(const std::filesystem::path& results_dir);

/// argmax of the seed-mean metric; ties go to the smallest k.
/// Throws std::invalid_argument on an empty map.
int select_best_k(const std::map<int, double>& seed_means);
/// Per dataset over `dev` runs. Throws std::invalid_argument naming the
/// dataset and k when a requested k has no run.
std::map<std::string, int> select_best_k(std::span<const RunResult> dev, std::span<const int> ks);

struct SeedSummary {
    double mean = 0.0;
    std::optional<double> stddev;  ///< sample std; absent for one seed
    std::size_t n = 0;
};

/// Mean and sample (n-1) standard deviation of `values`.
SeedSummary summarize(std::span<const double> values);
/// "48.63±0.67", or "48.63" when there is no std.
std::string format_cell(const SeedSummary& s);

struct AggregateRow {
    Regime regime = Regime::dcot;
    std::string dataset;
    int k = 1;
    SeedSummary summary;  ///< in points (metric x 100)
};

/// One row per (regime, dataset, k), in that sort order.
std::vector<AggregateRow> aggregate(std::span<const RunResult> results);

struct AnswerPattern {
    std::string pattern;       ///< e.g. "AAB"
    std::string final_letter;  ///< letter of the final answer, "*" when not among the chains
    bool correct = false;

    /// "AAB → B"
    std::string shape() const;
    /// "AAB → B (o)" / "AAB → B (x)"
    std::string row() const;
};

/// Letters follow first occurrence; failed chains (nullopt) get fresh
/// letters of their own. `correct` is final == gold when a final exists.
AnswerPattern classify_pattern(std::span<const std::optional<std::string>> chain_answers,
                               const std::optional<std::string>& final_answer, const std::string& gold);
/// Same, with correctness decided by the caller (a separate name so a
/// string literal gold never binds to the bool).
AnswerPattern classify_graded(std::span<const std::optional<std::string>> chain_answers,
                              const std::optional<std::string>& final_answer, bool correct);

struct PatternRow {
    std::string label;
    std::size_t count = 0;
};

/// Fixed row order: AAA → A, AAB → A, AAB → B, ABA → A, ABA → B, ABB → A,
/// ABB → B, ABC → A, ABC → B, ABC → C, each split into (o) and (x), then the
/// finals that match no chain as "* (o)" and "* (x)".
std::vector<PatternRow> pattern_table(std::span<const AnswerPattern> patterns);
/// Classifies every k = 3 dcot per-example record (first three chain answers,
/// missing chains count as failures) and tabulates them.
std::vector<PatternRow> pattern_table(std::span<const RunResult> results);

struct RefinementRow {
    std::string dataset;
    std::map<int, double> means;                    ///< k -> seed mean in points
    std::vector<std::pair<std::string, double>> deltas;  ///< "1→2" -> points
    bool flagged = false;                           ///< Δ(1→2) > 0.5
};

inline constexpr double kRefinementThreshold = 0.5;

/// Adjacent-k deltas per dataset. Throws std::invalid_argument when a dataset
/// lacks k = 1 or k = 2 or has a gap between its ks.
std::vector<RefinementRow> refinement_delta(std::span<const RunResult> results);

/// Emits summary.csv, summary.txt, patterns.csv (when k = 3 dcot runs exist)
/// and best_k.json (for dev runs) under results_dir. Throws
/// std::runtime_error listing missing (regime, dataset, k, seed) runs.
void write_report(const std::filesystem::path& results_dir, std::span<const RunResult> results);

}  // namespace dcot::experiments
