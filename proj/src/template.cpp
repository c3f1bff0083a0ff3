#include "dcot/template.hpp"

#include <stdexcept>

namespace dcot::templates {

namespace {

enum class MarkerKind { answer, final_answer, prompt };

struct Marker {
    MarkerKind kind;
    int index = 0;  // chain number for answer markers
    std::size_t pos = 0;
    std::size_t length = 0;
    std::size_t backslashes = 0;  // run of '\' immediately before pos
};

constexpr std::string_view kAnswerPrefix = "[Answer ";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::optional<Marker> match_marker(std::string_view text, std::size_t pos) {
    std::string_view rest = text.substr(pos);
    if (rest.empty() || rest.front() != '[') return std::nullopt;
    if (rest.starts_with(kAnswerPrefix)) {
        std::size_t i = kAnswerPrefix.size();
        std::size_t digits_start = i;
        long long index = 0;
        while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9' && i - digits_start < 9) {
            index = index * 10 + (rest[i] - '0');
            ++i;
        }
        if (i == digits_start || i >= rest.size() || rest[i] != ']') return std::nullopt;
        return Marker{MarkerKind::answer, static_cast<int>(index), pos, i + 1, 0};
    }
    if (rest.starts_with(kFinalAnswer)) return Marker{MarkerKind::final_answer, 0, pos, kFinalAnswer.size(), 0};
    for (auto m : {kQuestion, kOptions, kNumberOfAnswers}) {
        if (rest.starts_with(m)) return Marker{MarkerKind::prompt, 0, pos, m.size(), 0};
    }
    return std::nullopt;
}

std::size_t backslashes_before(std::string_view text, std::size_t pos) {
    std::size_t n = 0;
    while (n < pos && text[pos - 1 - n] == '\\') ++n;
    return n;
}

/// Markers not cancelled by an odd run of backslashes.
std::vector<Marker> real_markers(std::string_view text) {
    std::vector<Marker> out;
    for (std::size_t pos = text.find('['); pos != std::string_view::npos; pos = text.find('[', pos + 1)) {
        auto m = match_marker(text, pos);
        if (!m) continue;
        m->backslashes = backslashes_before(text, pos);
        if (m->backslashes % 2 == 0) out.push_back(*m);
    }
    return out;
}

/// Unescapes the segment [begin, end) whose end abuts `next` (if any).
std::string segment(std::string_view text, std::size_t begin, std::size_t end, const Marker* next) {
    std::string s = unescape_markers(text.substr(begin, end - begin));
    if (next != nullptr && next->backslashes > 0) {
        // the even run in front of a real marker encodes half as many backslashes
        s.erase(s.size() - next->backslashes / 2);
    }
    return s;
}

void check_k(int k, int min, int max) {
    if (k < min || k > max) {
        throw std::out_of_range("number of answers k=" + std::to_string(k) + " outside [" + std::to_string(min) +
                                ", " + std::to_string(max) + "]");
    }
}

std::string render_body(std::string_view question, const std::optional<std::vector<Option>>& options,
                        const std::optional<std::string>& context) {
    if (trim(question).empty()) throw std::invalid_argument("empty question");
    std::string out;
    if (context) {
        out += *context;
        out += '\n';
    }
    out += kQuestion;
    out += ' ';
    out += question;
    out += '\n';
    if (options && !options->empty()) {
        out += kOptions;
        out += '\n';
        for (const auto& o : *options) {
            out += o.label;
            out += ") ";
            out += o.body;
            out += '\n';
        }
    }
    return out;
}

constexpr std::string_view kPromptingInstruction =
    "Generate {k} different reasoning chains that answer the question. Make sure that none of the reasoning "
    "chains are repeated. Generate each reasoning chain independently, and not based on previous reasoning "
    "chains. This means that each reasoning chain must be as different from the others as possible. When "
    "generating the different reasoning chains, do so without knowledge of the answer. Each step in each of the "
    "reasoning chains must build on the previous steps in that reasoning chain. Once the required number of "
    "reasoning chains are generated, generate an answer based on the all the answers generated by all the "
    "reasoning chains.";

}  // namespace

std::string answer_marker(int index) { return std::string(kAnswerPrefix) + std::to_string(index) + "]"; }

std::string escape_markers(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (auto m = match_marker(text, i)) {
            std::size_t run = backslashes_before(text, i);
            out.append(run + 1, '\\');
            out.append(text.substr(i, m->length));
            i += m->length;
            continue;
        }
        out.push_back(text[i++]);
    }
    return out;
}

std::string unescape_markers(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (auto m = match_marker(text, i)) {
            std::size_t run = backslashes_before(text, i);
            if (run % 2 == 1) out.erase(out.size() - (run + 1) / 2);
            out.append(text.substr(i, m->length));
            i += m->length;
            continue;
        }
        out.push_back(text[i++]);
    }
    return out;
}

std::string render_dcot_prompt(const DCoTPrompt& p) {
    check_k(p.k, 1, kMaxChains);
    std::string out = render_body(p.question, p.options, p.context);
    out += kNumberOfAnswers;
    out += ' ';
    out += std::to_string(p.k);
    out += '\n';
    return out;
}

std::string render_cot_prompt(std::string_view question, const std::optional<std::vector<Option>>& options,
                              const std::optional<std::string>& context) {
    return render_body(question, options, context);
}

std::string render_dcot_prompt(const Example& e, int k) {
    return render_dcot_prompt(DCoTPrompt{e.question, e.options, e.context, k});
}

std::string render_cot_prompt(const Example& e) { return render_cot_prompt(e.question, e.options, e.context); }

std::string render_dcot_target(const DCoTTarget& t) {
    if (t.cots.empty()) throw std::invalid_argument("DCoT target needs at least one chain");
    if (trim(t.final_answer).empty()) throw std::invalid_argument("DCoT target needs a final answer");
    std::string out;
    for (std::size_t i = 0; i < t.cots.size(); ++i) {
        out += answer_marker(static_cast<int>(i + 1));
        out += ' ';
        out += escape_markers(t.cots[i]);
        out += '\n';
    }
    out += kFinalAnswer;
    out += ' ';
    out += escape_markers(t.final_answer);
    return out;
}

std::string render_cot_target(std::string_view cot, std::string_view final_answer) {
    if (trim(final_answer).empty()) throw std::invalid_argument("CoT target needs a final answer");
    std::string out = escape_markers(cot);
    out += '\n';
    out += kFinalAnswer;
    out += ' ';
    out += escape_markers(final_answer);
    return out;
}

ParsedDCoT parse_dcot_response(std::string_view text) {
    ParsedDCoT out;
    const auto markers = real_markers(text);

    std::size_t first_answer = markers.size();
    for (std::size_t i = 0; i < markers.size(); ++i) {
        if (markers[i].kind == MarkerKind::answer) {
            first_answer = i;
            break;
        }
        if (markers[i].kind != MarkerKind::answer) break;
    }

    // Text before the first marker.
    const Marker* first = markers.empty() ? nullptr : &markers.front();
    std::string leading = segment(text, 0, first ? first->pos : text.size(), first);
    if (first_answer == markers.size()) {
        out.cots.emplace_back(trim(leading));
    } else if (!trim(leading).empty()) {
        out.warnings.push_back("ignored text before [Answer 1]");
    }

    bool in_final = false;
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const Marker& m = markers[i];
        const Marker* next = i + 1 < markers.size() ? &markers[i + 1] : nullptr;
        std::size_t begin = m.pos + m.length;
        std::size_t end = next ? next->pos : text.size();
        if (m.kind == MarkerKind::prompt || in_final) {
            out.trailing = std::string(text.substr(m.pos));
            break;
        }
        std::string body(trim(segment(text, begin, end, next)));
        if (m.kind == MarkerKind::answer) {
            int expected = static_cast<int>(out.cots.size()) + 1;
            if (m.index != expected) {
                out.warnings.push_back("re-sequenced [Answer " + std::to_string(m.index) + "] as [Answer " +
                                       std::to_string(expected) + "]");
            }
            out.cots.push_back(std::move(body));
        } else {
            out.final_answer = std::move(body);
            in_final = true;
        }
    }
    return out;
}

std::string label_enumeration(std::span<const Option> options) {
    std::string out = "(";
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i > 0) out += options.size() == 2 ? " " : ", ";
        if (i > 0 && i + 1 == options.size()) out += "or ";
        out += options[i].label;
    }
    out += ")";
    return out;
}

std::string render_prompting_dcot(std::string_view question, const std::optional<std::vector<Option>>& options,
                                  int k) {
    check_k(k, 1, 1 << 20);
    if (trim(question).empty()) throw std::invalid_argument("empty question");
    std::string out(kPromptingInstruction);
    out.replace(out.find("{k}"), 3, std::to_string(k));
    out += "\n\nQuestion: ";
    out += question;
    out += '\n';
    if (options && !options->empty()) {
        out += "Options:\n";
        for (const auto& o : *options) {
            out += o.label;
            out += ") ";
            out += o.body;
            out += '\n';
        }
    }
    return out;
}

std::string render_prompting_extraction(std::string_view completion,
                                        const std::optional<std::vector<Option>>& options, bool numeric) {
    std::string out(completion);
    out += "\n\n";
    if (options && !options->empty()) {
        std::string labels;
        for (const auto& o : *options) {
            if (!labels.empty()) labels += ", ";
            labels += o.label;
        }
        out += "Therefore, based on the solution above, select one of the options (" + labels +
               ") as the answer to the question (just give me the option and nothing else).";
    } else if (numeric) {
        out += "Therefore, based on the solution above, extract the number that represents the answer:";
    } else {
        out += "Therefore, based on the solution above, give the final answer (just the answer and nothing else):";
    }
    return out;
}

}  // namespace dcot::templates
