#include "dcot/example.hpp"

#include <array>
#include <utility>

namespace dcot {

namespace {

constexpr std::array<std::pair<TaskType, std::string_view>, 5> kTaskNames{{
    {TaskType::multiple_choice, "multiple_choice"},
    {TaskType::span_extraction, "span_extraction"},
    {TaskType::numeric, "numeric"},
    {TaskType::binary, "binary"},
    {TaskType::symbolic, "symbolic"},
}};

constexpr std::array<std::pair<Split, std::string_view>, 3> kSplitNames{{
    {Split::train, "train"},
    {Split::dev, "dev"},
    {Split::test, "test"},
}};

}  // namespace

std::string_view to_string(TaskType t) {
    for (const auto& [value, name] : kTaskNames) {
        if (value == t) return name;
    }
    return "unknown";
}

std::string_view to_string(Split s) {
    for (const auto& [value, name] : kSplitNames) {
        if (value == s) return name;
    }
    return "unknown";
}

TaskType parse_task_type(std::string_view s) {
    for (const auto& [value, name] : kTaskNames) {
        if (name == s) return value;
    }
    throw ValidationError("unknown task_type \"" + std::string(s) + "\"");
}

Split parse_split(std::string_view s) {
    for (const auto& [value, name] : kSplitNames) {
        if (name == s) return value;
    }
    throw ValidationError("unknown split \"" + std::string(s) + "\"");
}

void to_json(nlohmann::json& j, const Example& e) {
    j = nlohmann::json::object();
    j["id"] = e.id;
    j["dataset"] = e.dataset;
    j["question"] = e.question;
    if (e.context) j["context"] = *e.context;
    if (e.options) {
        auto opts = nlohmann::json::array();
        for (const auto& o : *e.options) {
            opts.push_back({{"label", o.label}, {"body", o.body}});
        }
        j["options"] = std::move(opts);
    }
    j["gold"] = e.gold;
    j["task_type"] = std::string(to_string(e.task_type));
    j["split"] = std::string(to_string(e.split));
}

void from_json(const nlohmann::json& j, Example& e) {
    if (!j.is_object()) throw ValidationError("record is not a JSON object");
    static constexpr std::array<std::string_view, 8> kKeys{
        "id", "dataset", "question", "context", "options", "gold", "task_type", "split"};
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (auto k : kKeys) known = known || k == key;
        if (!known) throw ValidationError("unknown key \"" + key + "\"");
    }
    auto text = [&](const char* key) -> std::string {
        if (!j.contains(key)) throw ValidationError(std::string("missing key \"") + key + "\"");
        const auto& v = j.at(key);
        if (!v.is_string()) throw ValidationError(std::string("key \"") + key + "\" must be a string");
        return v.get<std::string>();
    };
    e.id = text("id");
    e.dataset = j.contains("dataset") ? text("dataset") : std::string{};
    e.question = text("question");
    e.gold = text("gold");
    e.task_type = parse_task_type(text("task_type"));
    e.split = parse_split(text("split"));
    e.context.reset();
    if (j.contains("context")) e.context = text("context");
    e.options.reset();
    if (j.contains("options")) {
        const auto& arr = j.at("options");
        if (!arr.is_array()) throw ValidationError("key \"options\" must be a list");
        std::vector<Option> opts;
        for (const auto& o : arr) {
            if (!o.is_object() || !o.contains("label") || !o.contains("body") || !o.at("label").is_string() ||
                !o.at("body").is_string() || o.size() != 2) {
                throw ValidationError("options entries must be {label, body} string pairs");
            }
            opts.push_back({o.at("label").get<std::string>(), o.at("body").get<std::string>()});
        }
        e.options = std::move(opts);
    }
}

}  // namespace dcot
