#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcot/example.hpp"

/// Prompt/target rendering and response parsing for the bracket-marker format.
///
/// Wire format (newline separated, one space after each marker):
///
///     {context}                      <- only when present
///     [Question] {question}
///     [Options]                      <- block omitted when there are no options
///     A) {body}
///     B) {body}
///     [Number of answers] {k}        <- DCoT prompts only
///
/// Every prompt line ends with '\n'. A DCoT target is
///
///     [Answer 1] {chain 1}
///     ...
///     [Answer k] {chain k}
///     [Final answer] {answer}
///
/// and a CoT target is the bare chain followed by "\n[Final answer] {answer}".
/// Markers are case sensitive. A marker that occurs literally inside a chain
/// or answer is escaped with a backslash on render (any backslashes already
/// in front of it are doubled) and unescaped on parse.
namespace dcot::templates {

inline constexpr std::string_view kQuestion = "[Question]";
inline constexpr std::string_view kOptions = "[Options]";
inline constexpr std::string_view kNumberOfAnswers = "[Number of answers]";
inline constexpr std::string_view kFinalAnswer = "[Final answer]";
inline constexpr int kMaxChains = 4;

/// "[Answer i]"
std::string answer_marker(int index);

struct DCoTPrompt {
    std::string question;
    std::optional<std::vector<Option>> options;
    std::optional<std::string> context;
    int k = 1;
};

struct DCoTTarget {
    std::vector<std::string> cots;
    std::string final_answer;

    bool operator==(const DCoTTarget&) const = default;
};

struct ParsedDCoT {
    std::vector<std::string> cots;
    std::optional<std::string> final_answer;
    /// Text after the final answer starting at the next prompt marker.
    std::string trailing;
    std::vector<std::string> warnings;
};

/// Throws std::out_of_range for k outside [1, 4] and std::invalid_argument for
/// an empty question.
std::string render_dcot_prompt(const DCoTPrompt& p);
std::string render_cot_prompt(std::string_view question, const std::optional<std::vector<Option>>& options,
                              const std::optional<std::string>& context = std::nullopt);

std::string render_dcot_prompt(const Example& e, int k);
std::string render_cot_prompt(const Example& e);

/// Throws std::invalid_argument for an empty chain list or an empty answer.
std::string render_dcot_target(const DCoTTarget& t);
std::string render_cot_target(std::string_view cot, std::string_view final_answer);

/// Total: never throws. Chains are split on "[Answer i]" markers; the final
/// answer runs to the end of the text or the next marker and is trimmed.
ParsedDCoT parse_dcot_response(std::string_view text);

/// Prompting-only DCoT instruction followed by the question and options.
/// Throws std::out_of_range for k < 1.
std::string render_prompting_dcot(std::string_view question, const std::optional<std::vector<Option>>& options,
                                  int k);
/// Follow-up prompt that pulls the answer out of a prompting-only completion.
/// Without options it asks for a number, or for a short answer when
/// `numeric` is false.
std::string render_prompting_extraction(std::string_view completion,
                                        const std::optional<std::vector<Option>>& options, bool numeric = true);

/// "(A, B, C, or D)" style enumeration of the option labels.
std::string label_enumeration(std::span<const Option> options);

/// Escaping primitives, exposed for tests.
std::string escape_markers(std::string_view text);
std::string unescape_markers(std::string_view text);

}  // namespace dcot::templates
