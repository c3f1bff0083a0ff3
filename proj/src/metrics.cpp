#include "dcot/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace dcot::metrics {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_punct(char c) {
    // Python's string.punctuation.
    static constexpr std::string_view kPunct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    return kPunct.find(c) != std::string_view::npos;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string squad_normalize(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) {
        if (is_punct(c)) continue;
        lowered.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
    std::string out;
    for (const auto& tok : split_ws(lowered)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

std::vector<std::string> answer_tokens(std::string_view text) { return split_ws(normalize(text).normalized); }

constexpr std::array<std::string_view, 4> kCurrency{"$", "€", "£", "¥"};

}  // namespace

std::optional<double> parse_number(std::string_view text) {
    std::string_view s = trim(text);
    std::string cleaned;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        cleaned.push_back(s.front());
        s.remove_prefix(1);
    }
    for (auto sym : kCurrency) {
        if (s.starts_with(sym)) {
            s.remove_prefix(sym.size());
            break;
        }
    }
    for (char c : s) {
        if (c != ',') cleaned.push_back(c);
    }
    std::string_view body = cleaned;
    if (!body.empty() && (body.front() == '-' || body.front() == '+')) body.remove_prefix(1);
    // digits [ . digits ]
    std::size_t i = 0;
    while (i < body.size() && is_digit(body[i])) ++i;
    std::size_t int_digits = i;
    if (i < body.size() && body[i] == '.') {
        std::size_t j = i + 1;
        while (j < body.size() && is_digit(body[j])) ++j;
        if (j == i + 1) return std::nullopt;
        i = j;
    }
    if (i != body.size() || body.empty() || (int_digits == 0 && body.front() != '.')) return std::nullopt;
    const char* begin = cleaned.data();
    if (*begin == '+') ++begin;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, cleaned.data() + cleaned.size(), value);
    if (ec != std::errc{} || ptr != cleaned.data() + cleaned.size()) return std::nullopt;
    return value;
}

std::string format_number(double value) {
    if (value == 0.0) return "0";
    if (std::floor(value) == value && std::fabs(value) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(value));
        return buf;
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

NormalizedAnswer normalize(std::string_view text) {
    NormalizedAnswer out{std::string(text), {}, parse_number(text)};
    if (!out.numeric) {
        out.normalized = squad_normalize(text);
        // "0-4" loses its dash and becomes the number "04"; fold it so normalize stays idempotent
        out.numeric = parse_number(out.normalized);
        if (!out.numeric) return out;
    }
    out.normalized = format_number(*out.numeric);
    return out;
}

double extract_number(std::string_view text) {
    std::optional<std::string> last;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        std::string digits;
        while (i < text.size() && is_digit(text[i])) digits.push_back(text[i++]);
        // thousands groups: ",ddd" not followed by another digit
        while (i + 3 < text.size() && text[i] == ',' && is_digit(text[i + 1]) && is_digit(text[i + 2]) &&
               is_digit(text[i + 3]) && (i + 4 >= text.size() || !is_digit(text[i + 4]))) {
            digits.append(text.substr(i + 1, 3));
            i += 4;
        }
        if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
            digits.push_back('.');
            ++i;
            while (i < text.size() && is_digit(text[i])) digits.push_back(text[i++]);
        }
        bool negative = start > 0 && text[start - 1] == '-' && (start == 1 || !is_alnum(text[start - 2]));
        last = (negative ? "-" : "") + digits;
    }
    if (!last) throw ExtractionError("no number in \"" + std::string(text) + "\"");
    double value = 0.0;
    std::from_chars(last->data(), last->data() + last->size(), value);
    return value;
}

std::string extract_choice(std::string_view answer, std::span<const Option> options) {
    if (options.empty()) throw std::invalid_argument("extract_choice needs options");
    const std::string_view a = trim(answer);

    for (const auto& o : options) {
        if (a == o.label) return o.label;
    }

    std::set<std::string> bracketed;
    for (const auto& o : options) {
        const std::string& l = o.label;
        if (a.find("(" + l + ")") != std::string_view::npos || a.find("[" + l + "]") != std::string_view::npos) {
            bracketed.insert(l);
            continue;
        }
        for (std::size_t pos = a.find(l + ")"); pos != std::string_view::npos; pos = a.find(l + ")", pos + 1)) {
            if (pos == 0 || is_space(a[pos - 1])) {
                bracketed.insert(l);
                break;
            }
        }
        for (char p : {'.', ':', ')'}) {
            std::string prefix = l + p;
            if (a.starts_with(prefix) && (a.size() == prefix.size() || is_space(a[prefix.size()]))) {
                bracketed.insert(l);
            }
        }
    }
    if (bracketed.size() == 1) return *bracketed.begin();

    const std::string na = normalize(a).normalized;
    std::vector<std::string> equal;
    for (const auto& o : options) {
        if (normalize(o.body).normalized == na) equal.push_back(o.label);
    }
    if (equal.size() == 1) return equal.front();
    if (equal.size() > 1) throw ExtractionError("answer matches several option bodies: \"" + std::string(a) + "\"");

    const std::string padded = " " + na + " ";
    std::vector<std::string> contained;
    for (const auto& o : options) {
        std::string nb = normalize(o.body).normalized;
        if (nb.empty()) continue;
        if (padded.find(" " + nb + " ") != std::string::npos) contained.push_back(o.label);
    }
    if (contained.size() == 1) return contained.front();
    if (contained.empty()) throw ExtractionError("answer matches no option: \"" + std::string(a) + "\"");
    throw ExtractionError("answer contains several option bodies: \"" + std::string(a) + "\"");
}

SquadScore squad_scores(std::string_view prediction, std::string_view gold) {
    SquadScore s;
    s.em = normalize(prediction).normalized == normalize(gold).normalized ? 1.0 : 0.0;
    const auto pred = answer_tokens(prediction);
    const auto ref = answer_tokens(gold);
    if (pred.empty() || ref.empty()) {
        s.f1 = (pred.empty() && ref.empty()) ? 1.0 : 0.0;
        return s;
    }
    std::unordered_map<std::string, int> counts;
    for (const auto& t : ref) ++counts[t];
    int common = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return s;
    double precision = static_cast<double>(common) / static_cast<double>(pred.size());
    double recall = static_cast<double>(common) / static_cast<double>(ref.size());
    s.f1 = 2.0 * precision * recall / (precision + recall);
    return s;
}

SquadScore squad_scores(std::string_view prediction, std::span<const std::string> golds) {
    SquadScore best;
    for (const auto& g : golds) {
        auto s = squad_scores(prediction, g);
        best.em = std::max(best.em, s.em);
        best.f1 = std::max(best.f1, s.f1);
    }
    return best;
}

MacroF1 macro_f1(std::span<const std::string> predictions, std::span<const std::string> golds,
                 std::span<const std::string> label_set) {
    if (predictions.size() != golds.size()) {
        throw std::invalid_argument("macro_f1: " + std::to_string(predictions.size()) + " predictions vs " +
                                    std::to_string(golds.size()) + " golds");
    }
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0;
    };
    std::map<std::string, Counts> table;
    for (const auto& l : label_set) table[l];
    for (std::size_t i = 0; i < golds.size(); ++i) {
        auto g = table.find(golds[i]);
        if (g == table.end()) throw std::invalid_argument("macro_f1: gold \"" + golds[i] + "\" not in label set");
        if (predictions[i] == golds[i]) {
            ++g->second.tp;
            continue;
        }
        ++g->second.fn;
        if (auto p = table.find(predictions[i]); p != table.end()) ++p->second.fp;
    }
    MacroF1 out;
    double sum = 0.0;
    for (const auto& [label, c] : table) {
        if (c.tp + c.fn == 0 && c.tp + c.fp == 0) continue;
        double f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
        out.per_class[label] = f1;
        sum += f1;
    }
    if (!out.per_class.empty()) out.value = sum / static_cast<double>(out.per_class.size());
    return out;
}

namespace {
constexpr std::array<std::pair<Metric, std::string_view>, 5> kMetricNames{{
    {Metric::macro_f1, "macro_f1"},
    {Metric::squad_f1, "squad_f1"},
    {Metric::squad_em, "squad_em"},
    {Metric::numeric_acc, "numeric_acc"},
    {Metric::accuracy, "accuracy"},
}};
}  // namespace

std::string_view to_string(Metric m) {
    for (const auto& [value, name] : kMetricNames) {
        if (value == m) return name;
    }
    return "unknown";
}

Metric parse_metric(std::string_view s) {
    for (const auto& [value, name] : kMetricNames) {
        if (name == s) return value;
    }
    throw std::invalid_argument("unknown metric \"" + std::string(s) + "\"");
}

Metric metric_for(TaskType t) {
    switch (t) {
        case TaskType::multiple_choice:
        case TaskType::binary:
            return Metric::macro_f1;
        case TaskType::span_extraction:
            return Metric::squad_f1;
        case TaskType::numeric:
            return Metric::numeric_acc;
        case TaskType::symbolic:
            return Metric::accuracy;
    }
    throw std::invalid_argument("unknown task_type");
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = nlohmann::json{{"dataset", r.dataset},
                       {"metric", std::string(to_string(r.metric))},
                       {"value", r.value},
                       {"n", r.n}};
    if (!r.per_class.empty()) j["per_class"] = r.per_class;
    if (!r.extras.empty()) j["extras"] = r.extras;
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    r.dataset = j.at("dataset").get<std::string>();
    r.metric = parse_metric(j.at("metric").get<std::string>());
    r.value = j.at("value").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.per_class = j.value("per_class", std::map<std::string, double>{});
    r.extras = j.value("extras", std::map<std::string, double>{});
}

std::optional<std::string> canonical_answer(const Example& e, std::string_view answer) {
    try {
        switch (e.task_type) {
            case TaskType::multiple_choice:
            case TaskType::binary:
                return extract_choice(answer, *e.options);
            case TaskType::numeric: {
                auto direct = parse_number(answer);
                return format_number(direct ? *direct : extract_number(answer));
            }
            case TaskType::span_extraction:
            case TaskType::symbolic:
                return normalize(answer).normalized;
        }
    } catch (const ExtractionError&) {
        return std::nullopt;
    }
    return std::nullopt;
}

ExampleScore score_example(const Example& e, const std::optional<std::string>& final_answer) {
    ExampleScore s{std::string(kNoAnswer), false, 0.0};
    if (!final_answer) return s;
    if (e.task_type == TaskType::span_extraction) {
        auto q = squad_scores(*final_answer, e.gold);
        s.prediction = normalize(*final_answer).normalized;
        s.correct = q.em == 1.0;
        s.f1 = q.f1;
        return s;
    }
    auto pred = canonical_answer(e, *final_answer);
    if (!pred) return s;
    s.prediction = *pred;
    std::string gold = e.gold;
    if (e.task_type == TaskType::numeric) {
        auto g = parse_number(e.gold);
        gold = g ? format_number(*g) : normalize(e.gold).normalized;
    } else if (e.task_type == TaskType::symbolic) {
        gold = normalize(e.gold).normalized;
    }
    s.correct = s.prediction == gold;
    s.f1 = s.correct ? 1.0 : 0.0;
    return s;
}

std::vector<std::string> label_set(std::span<const Example> examples) {
    std::set<std::string> labels;
    for (const auto& e : examples) {
        if (!e.options) continue;
        for (const auto& o : *e.options) labels.insert(o.label);
    }
    return {labels.begin(), labels.end()};
}

MetricReport score_dataset(std::span<const Example> examples,
                           std::span<const std::optional<std::string>> final_answers) {
    if (examples.empty()) throw std::invalid_argument("score_dataset: empty dataset");
    if (examples.size() != final_answers.size()) {
        throw std::invalid_argument("score_dataset: " + std::to_string(examples.size()) + " examples vs " +
                                    std::to_string(final_answers.size()) + " answers");
    }
    const TaskType task = examples.front().task_type;
    MetricReport report;
    report.dataset = examples.front().dataset;
    report.metric = metric_for(task);
    report.n = examples.size();
    for (const auto& e : examples) {
        if (e.task_type != task) throw std::invalid_argument("score_dataset: mixed task types in " + report.dataset);
        if (e.dataset != report.dataset) throw std::invalid_argument("score_dataset: mixed datasets");
    }

    std::vector<ExampleScore> scores;
    scores.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) scores.push_back(score_example(examples[i], final_answers[i]));

    const double n = static_cast<double>(examples.size());
    switch (report.metric) {
        case Metric::macro_f1: {
            std::vector<std::string> preds, golds;
            for (std::size_t i = 0; i < examples.size(); ++i) {
                preds.push_back(scores[i].prediction);
                golds.push_back(examples[i].gold);
            }
            auto labels = label_set(examples);
            auto m = macro_f1(preds, golds, labels);
            report.value = m.value;
            report.per_class = std::move(m.per_class);
            break;
        }
        case Metric::squad_f1: {
            double f1 = 0.0, em = 0.0;
            for (const auto& s : scores) {
                f1 += s.f1;
                em += s.correct ? 1.0 : 0.0;
            }
            report.value = f1 / n;
            report.extras["squad_em"] = em / n;
            break;
        }
        default: {
            double correct = 0.0;
            for (const auto& s : scores) correct += s.correct ? 1.0 : 0.0;
            report.value = correct / n;
            break;
        }
    }
    return report;
}

}  // namespace dcot::metrics
