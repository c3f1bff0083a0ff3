#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dcot {

enum class TaskType { multiple_choice, span_extraction, numeric, binary, symbolic };
enum class Split { train, dev, test };

std::string_view to_string(TaskType t);
std::string_view to_string(Split s);
TaskType parse_task_type(std::string_view s);
Split parse_split(std::string_view s);

/// True for task types whose answers are picked from an option list.
inline bool has_options(TaskType t) {
    return t == TaskType::multiple_choice || t == TaskType::binary;
}

struct Option {
    std::string label;
    std::string body;

    bool operator==(const Option&) const = default;
};

/// One normalized QA record. `id` is "dataset/split/index" and unique within a corpus.
struct Example {
    std::string id;
    std::string dataset;
    std::string question;
    std::optional<std::string> context;
    std::optional<std::vector<Option>> options;
    std::string gold;
    TaskType task_type = TaskType::symbolic;
    Split split = Split::train;

    bool operator==(const Example&) const = default;
};

/// Raised for malformed input records and violated record invariants.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void to_json(nlohmann::json& j, const Example& e);
void from_json(const nlohmann::json& j, Example& e);

}  // namespace dcot
