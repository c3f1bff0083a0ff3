#include "dcot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "dcot/template.hpp"

namespace dcot::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kRegimeNames[] = {"cot", "dcot", "cot_sc", "dcot_sc", "prompting_dcot"};

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string last_line(std::string_view s) {
    std::string t = trim(s);
    auto nl = t.find_last_of('\n');
    return nl == std::string::npos ? t : trim(std::string_view(t).substr(nl + 1));
}

std::string model_for_seed(std::string model, std::uint64_t seed) {
    const std::string key = "{seed}";
    for (auto pos = model.find(key); pos != std::string::npos; pos = model.find(key, pos)) {
        model.replace(pos, key.size(), std::to_string(seed));
    }
    return model;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

json optional_to_json(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> optional_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<std::string>();
}

}  // namespace

std::string_view to_string(Regime r) { return kRegimeNames[static_cast<int>(r)]; }

Regime parse_regime(std::string_view s) {
    for (int i = 0; i < 5; ++i) {
        if (kRegimeNames[i] == s) return static_cast<Regime>(i);
    }
    throw std::invalid_argument("unknown regime: " + std::string(s));
}

bool uses_k(Regime r) { return r == Regime::dcot || r == Regime::dcot_sc || r == Regime::prompting_dcot; }

void ExperimentConfig::validate() const {
    if (ks.empty()) throw std::invalid_argument("experiment.ks is empty");
    if (seeds.empty()) throw std::invalid_argument("experiment.seeds is empty");
    for (int k : ks) {
        if (k < 1 || k > templates::kMaxChains) {
            throw std::invalid_argument("k=" + std::to_string(k) + " outside [1, 4]");
        }
    }
    if (ensemble.samples < 1) throw std::invalid_argument("ensemble.samples must be >= 1");
    if (max_in_flight < 1) throw std::invalid_argument("max in-flight must be >= 1");
}

void to_json(json& j, const ExampleOutcome& o) {
    json chains = json::array();
    for (const auto& c : o.chain_answers) chains.push_back(optional_to_json(c));
    j = json{{"id", o.id},
             {"gold", o.gold},
             {"prediction", o.prediction},
             {"chain_answers", chains},
             {"final_answer", optional_to_json(o.final_answer)},
             {"correct", o.correct},
             {"f1", o.f1}};
    if (!o.error.empty()) j["error"] = o.error;
}

void from_json(const json& j, ExampleOutcome& o) {
    j.at("id").get_to(o.id);
    j.at("gold").get_to(o.gold);
    j.at("prediction").get_to(o.prediction);
    o.chain_answers.clear();
    for (const auto& c : j.at("chain_answers")) o.chain_answers.push_back(optional_from_json(c));
    o.final_answer = optional_from_json(j.at("final_answer"));
    j.at("correct").get_to(o.correct);
    o.f1 = j.value("f1", 0.0);
    o.error = j.value("error", std::string());
}

std::optional<std::string> chain_answer(const Example& example, std::string_view chain) {
    std::vector<std::string> candidates;
    const std::string low = lower_ascii(chain);
    constexpr std::string_view cue = "answer is";
    if (auto pos = low.rfind(cue); pos != std::string::npos) {
        std::string tail = trim(chain.substr(pos + cue.size()));
        if (!tail.empty() && tail.front() == ':') tail = trim(std::string_view(tail).substr(1));
        tail = tail.substr(0, tail.find('\n'));
        if (!tail.empty()) candidates.push_back(tail);
    }
    candidates.push_back(last_line(chain));
    if (has_options(example.task_type) || example.task_type == TaskType::numeric) {
        candidates.emplace_back(chain);
    }
    for (const auto& c : candidates) {
        if (trim(c).empty()) continue;
        if (auto a = metrics::canonical_answer(example, c); a && !a->empty()) return a;
    }
    return std::nullopt;
}

namespace {

struct Attempted {
    std::optional<std::string> final_answer;
    std::vector<std::optional<std::string>> chains;
    std::string error;
};

std::vector<std::optional<std::string>> chain_answers_of(const Example& e, const std::string& completion) {
    std::vector<std::optional<std::string>> out;
    for (const auto& c : templates::parse_dcot_response(completion).cots) out.push_back(chain_answer(e, c));
    return out;
}

std::vector<Attempted> run_single(const std::vector<const Example*>& examples, Regime regime, int k,
                                  const inference::GenerationParams& params, std::size_t limit,
                                  inference::Client& client) {
    std::vector<inference::Request> requests;
    for (const Example* e : examples) {
        std::string prompt;
        if (regime == Regime::cot) {
            prompt = templates::render_cot_prompt(*e);
        } else if (regime == Regime::dcot) {
            prompt = templates::render_dcot_prompt(*e, k);
        } else {
            std::string q = e->context ? *e->context + "\n" + e->question : e->question;
            prompt = templates::render_prompting_dcot(q, e->options, k);
        }
        requests.push_back({std::move(prompt), params});
    }
    auto items = client.complete_batch(requests, limit);

    std::vector<Attempted> out(examples.size());
    if (regime != Regime::prompting_dcot) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (!items[i].ok()) {
                out[i].error = items[i].error;
                continue;
            }
            const auto& text = items[i].record->completion;
            out[i].chains = chain_answers_of(*examples[i], text);
            out[i].final_answer = templates::parse_dcot_response(text).final_answer;
            if (!out[i].final_answer) out[i].error = "no [Final answer] in completion";
        }
        return out;
    }

    // Prompting-only runs ask a second, greedy question to pull out the answer.
    inference::GenerationParams follow = params;
    follow.temperature = 0.0;
    follow.sample_index = 0;
    follow.max_tokens = 32;
    std::vector<inference::Request> followups;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].ok()) {
            out[i].error = items[i].error;
            continue;
        }
        const auto& text = items[i].record->completion;
        out[i].chains = chain_answers_of(*examples[i], text);
        bool numeric = examples[i]->task_type == TaskType::numeric;
        followups.push_back({templates::render_prompting_extraction(text, examples[i]->options, numeric), follow});
        owner.push_back(i);
    }
    auto answers = client.complete_batch(followups, limit);
    for (std::size_t j = 0; j < answers.size(); ++j) {
        auto& slot = out[owner[j]];
        if (!answers[j].ok()) {
            slot.error = answers[j].error;
            continue;
        }
        slot.final_answer = trim(answers[j].record->completion);
    }
    return out;
}

std::vector<Attempted> run_sc(const std::vector<const Example*>& examples, Regime regime, int k,
                              const inference::GenerationParams& params, const ensemble::EnsembleConfig& cfg,
                              std::size_t limit, inference::Client& client) {
    const auto n = static_cast<std::size_t>(cfg.samples);
    std::vector<inference::Request> requests;
    for (const Example* e : examples) {
        std::string prompt =
            regime == Regime::cot_sc ? templates::render_cot_prompt(*e) : templates::render_dcot_prompt(*e, k);
        for (std::size_t s = 0; s < n; ++s) {
            inference::GenerationParams p = params;
            p.temperature = cfg.temperature;
            p.sample_index = static_cast<int>(s);
            requests.push_back({prompt, p});
        }
    }
    auto items = client.complete_batch(requests, limit);

    std::vector<Attempted> out(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        std::span<const inference::BatchItem> draws(items.data() + i * n, n);
        if (draws[0].ok()) out[i].chains = chain_answers_of(*examples[i], draws[0].record->completion);
        try {
            out[i].final_answer = ensemble::tally(*examples[i], draws).answer;
        } catch (const ensemble::EnsembleError& err) {
            out[i].error = err.what();
        }
    }
    return out;
}

}  // namespace

std::vector<RunResult> run_sweep(const ExperimentConfig& cfg, std::span<const Example> examples, Split split,
                                 inference::Client& client) {
    cfg.validate();
    std::map<std::string, std::vector<const Example*>> by_dataset;
    for (const auto& e : examples) by_dataset[e.dataset].push_back(&e);
    if (!cfg.datasets.empty()) {
        std::map<std::string, std::vector<const Example*>> picked;
        for (const auto& d : cfg.datasets) {
            auto it = by_dataset.find(d);
            if (it == by_dataset.end()) throw std::invalid_argument("dataset not in corpus split: " + d);
            picked[d] = it->second;
        }
        by_dataset = std::move(picked);
    }

    std::vector<int> ks;
    if (uses_k(cfg.regime)) {
        std::set<int> uniq(cfg.ks.begin(), cfg.ks.end());
        ks.assign(uniq.begin(), uniq.end());
    } else {
        ks = {1};
    }

    std::vector<RunResult> out;
    for (const auto& [dataset, items] : by_dataset) {
        std::vector<Example> owned;
        for (const Example* e : items) owned.push_back(*e);
        for (int k : ks) {
            for (std::uint64_t seed : cfg.seeds) {
                inference::GenerationParams params = cfg.params;
                params.model = model_for_seed(params.model, seed);

                const bool sc = cfg.regime == Regime::cot_sc || cfg.regime == Regime::dcot_sc;
                auto attempts = sc ? run_sc(items, cfg.regime, k, params, cfg.ensemble, cfg.max_in_flight, client)
                                   : run_single(items, cfg.regime, k, params, cfg.max_in_flight, client);

                RunResult run;
                run.dataset = dataset;
                run.regime = cfg.regime;
                run.k = k;
                run.seed = seed;
                run.split = split;
                std::vector<std::optional<std::string>> finals;
                for (std::size_t i = 0; i < items.size(); ++i) {
                    const Example& e = *items[i];
                    auto& a = attempts[i];
                    auto score = metrics::score_example(e, a.final_answer);
                    ExampleOutcome o;
                    o.id = e.id;
                    o.gold = e.gold;
                    o.prediction = score.prediction;
                    o.chain_answers = std::move(a.chains);
                    o.final_answer = a.final_answer;
                    o.correct = score.correct;
                    o.f1 = score.f1;
                    o.error = a.error;
                    if (!a.error.empty() && !a.final_answer) run.failures.push_back(e.id);
                    finals.push_back(a.final_answer);
                    run.per_example.push_back(std::move(o));
                }
                run.report = metrics::score_dataset(owned, finals);
                out.push_back(std::move(run));
            }
        }
    }
    return out;
}

namespace {

fs::path run_base(const fs::path& dir, const RunResult& run) {
    return dir / "runs" / std::string(to_string(run.regime)) / run.dataset / ("k" + std::to_string(run.k));
}

}  // namespace

void write_run(const fs::path& results_dir, const RunResult& run) {
    fs::path base = run_base(results_dir, run);
    fs::create_directories(base);
    std::string stem = "seed" + std::to_string(run.seed);

    std::string lines;
    for (const auto& o : run.per_example) lines += json(o).dump() + "\n";
    write_text(base / (stem + ".jsonl"), lines);

    json meta{{"dataset", run.dataset},
              {"regime", to_string(run.regime)},
              {"k", run.k},
              {"seed", run.seed},
              {"split", dcot::to_string(run.split)},
              {"report", run.report},
              {"failures", run.failures}};
    write_text(base / (stem + ".metrics.json"), meta.dump(2) + "\n");
}

std::vector<RunResult> read_runs(const fs::path& results_dir) {
    std::vector<RunResult> out;
    fs::path root = results_dir / "runs";
    if (!fs::exists(root)) return out;
    std::vector<fs::path> metas;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.ends_with(".metrics.json")) metas.push_back(entry.path());
    }
    for (const auto& meta_path : metas) {
        std::ifstream in(meta_path);
        json meta = json::parse(in);
        RunResult run;
        meta.at("dataset").get_to(run.dataset);
        run.regime = parse_regime(meta.at("regime").get<std::string>());
        meta.at("k").get_to(run.k);
        meta.at("seed").get_to(run.seed);
        run.split = parse_split(meta.at("split").get<std::string>());
        meta.at("report").get_to(run.report);
        meta.at("failures").get_to(run.failures);

        auto name = meta_path.filename().string();
        fs::path lines_path = meta_path.parent_path() / (name.substr(0, name.size() - 13) + ".jsonl");
        std::ifstream lines(lines_path);
        if (!lines) throw std::runtime_error("missing per-example file " + lines_path.string());
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            run.per_example.push_back(json::parse(line).get<ExampleOutcome>());
        }
        out.push_back(std::move(run));
    }
    std::sort(out.begin(), out.end(), [](const RunResult& a, const RunResult& b) {
        return std::tie(a.regime, a.dataset, a.k, a.seed) < std::tie(b.regime, b.dataset, b.k, b.seed);
    });
    return out;
}

int select_best_k(const std::map<int, double>& seed_means) {
    if (seed_means.empty()) throw std::invalid_argument("select_best_k: no k values");
    auto best = seed_means.begin();
    for (auto it = seed_means.begin(); it != seed_means.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

std::map<std::string, int> select_best_k(std::span<const RunResult> dev, std::span<const int> ks) {
    std::map<std::string, std::map<int, std::vector<double>>> values;
    for (const auto& r : dev) values[r.dataset][r.k].push_back(r.report.value * 100.0);
    std::map<std::string, int> out;
    for (const auto& [dataset, by_k] : values) {
        std::map<int, double> means;
        for (int k : ks) {
            auto it = by_k.find(k);
            if (it == by_k.end()) {
                throw std::invalid_argument("dataset " + dataset + " has no dev run for k=" + std::to_string(k));
            }
            means[k] = mean_of(it->second);
        }
        out[dataset] = select_best_k(means);
    }
    return out;
}

SeedSummary summarize(std::span<const double> values) {
    SeedSummary s;
    s.n = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

std::string format_cell(const SeedSummary& s) {
    // adding 0.0 folds a negative zero into "0.00"
    if (!s.stddev) return fmt::format("{:.2f}", s.mean + 0.0);
    return fmt::format("{:.2f}±{:.2f}", s.mean + 0.0, *s.stddev + 0.0);
}

std::vector<AggregateRow> aggregate(std::span<const RunResult> results) {
    std::map<std::tuple<Regime, std::string, int>, std::map<std::uint64_t, double>> groups;
    for (const auto& r : results) groups[{r.regime, r.dataset, r.k}][r.seed] = r.report.value * 100.0;
    std::vector<AggregateRow> out;
    for (const auto& [key, by_seed] : groups) {
        std::vector<double> v;
        for (const auto& [seed, value] : by_seed) v.push_back(value);
        out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), summarize(v)});
    }
    return out;
}

std::string AnswerPattern::shape() const { return pattern + " → " + final_letter; }

std::string AnswerPattern::row() const { return shape() + (correct ? " (o)" : " (x)"); }

AnswerPattern classify_graded(std::span<const std::optional<std::string>> chain_answers,
                              const std::optional<std::string>& final_answer, bool correct) {
    if (chain_answers.size() > 26) throw std::invalid_argument("too many chains to letter");
    AnswerPattern p;
    std::map<std::string, char> letters;
    char next = 'A';
    for (const auto& a : chain_answers) {
        if (!a) {
            p.pattern += next++;
            continue;
        }
        auto [it, inserted] = letters.emplace(*a, next);
        if (inserted) ++next;
        p.pattern += it->second;
    }
    p.final_letter = "*";
    if (final_answer) {
        if (auto it = letters.find(*final_answer); it != letters.end()) p.final_letter = std::string(1, it->second);
    }
    p.correct = correct;
    return p;
}

AnswerPattern classify_pattern(std::span<const std::optional<std::string>> chain_answers,
                               const std::optional<std::string>& final_answer, const std::string& gold) {
    return classify_graded(chain_answers, final_answer, final_answer.has_value() && *final_answer == gold);
}

namespace {

const std::vector<std::string>& pattern_shapes() {
    static const std::vector<std::string> shapes{"AAA → A", "AAB → A", "AAB → B", "ABA → A", "ABA → B",
                                                 "ABB → A", "ABB → B", "ABC → A", "ABC → B", "ABC → C"};
    return shapes;
}

}  // namespace

std::vector<PatternRow> pattern_table(std::span<const AnswerPattern> patterns) {
    std::vector<PatternRow> rows;
    std::map<std::string, std::size_t> index;
    for (const auto& shape : pattern_shapes()) {
        for (const char* mark : {" (o)", " (x)"}) {
            index[shape + mark] = rows.size();
            rows.push_back({shape + mark, 0});
        }
    }
    for (const char* label : {"* (o)", "* (x)"}) {
        index[label] = rows.size();
        rows.push_back({label, 0});
    }
    for (const auto& p : patterns) {
        if (p.pattern.size() != 3) {
            throw std::invalid_argument("pattern table needs three chains, got pattern " + p.pattern);
        }
        std::string key = p.final_letter == "*" ? std::string("*") + (p.correct ? " (o)" : " (x)") : p.row();
        ++rows[index.at(key)].count;
    }
    return rows;
}

std::vector<PatternRow> pattern_table(std::span<const RunResult> results) {
    std::vector<AnswerPattern> patterns;
    for (const auto& r : results) {
        if (r.regime != Regime::dcot || r.k != 3) continue;
        for (const auto& o : r.per_example) {
            std::vector<std::optional<std::string>> chains(o.chain_answers.begin(),
                                                           o.chain_answers.begin() +
                                                               std::min<std::ptrdiff_t>(3, o.chain_answers.size()));
            chains.resize(3);
            std::optional<std::string> final;
            if (o.prediction != metrics::kNoAnswer) final = o.prediction;
            patterns.push_back(classify_graded(chains, final, o.correct));
        }
    }
    return pattern_table(std::span<const AnswerPattern>(patterns));
}

std::vector<RefinementRow> refinement_delta(std::span<const RunResult> results) {
    std::map<std::string, std::map<int, std::vector<double>>> values;
    for (const auto& r : results) values[r.dataset][r.k].push_back(r.report.value * 100.0);
    std::vector<RefinementRow> out;
    for (const auto& [dataset, by_k] : values) {
        RefinementRow row;
        row.dataset = dataset;
        for (const auto& [k, v] : by_k) row.means[k] = mean_of(v);
        if (!row.means.contains(1) || !row.means.contains(2)) {
            throw std::invalid_argument("refinement delta for " + dataset + " needs k=1 and k=2");
        }
        int prev = 0;
        for (const auto& [k, m] : row.means) {
            if (prev != 0) {
                if (k != prev + 1) {
                    throw std::invalid_argument("refinement delta for " + dataset + " is missing k=" +
                                                std::to_string(prev + 1));
                }
                row.deltas.emplace_back(std::to_string(prev) + "→" + std::to_string(k), m - row.means[prev]);
            }
            prev = k;
        }
        row.flagged = row.deltas.front().second > kRefinementThreshold;
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join_csv(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out += ',';
        out += csv_field(cells[i]);
    }
    return out + "\n";
}

// Display width in code points; the ± and → signs are multi-byte.
std::size_t width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

std::string aligned(const std::vector<std::vector<std::string>>& table) {
    std::vector<std::size_t> widths;
    for (const auto& row : table) {
        widths.resize(std::max(widths.size(), row.size()), 0);
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
    }
    std::string out;
    for (const auto& row : table) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) line += "  ";
            std::string pad(widths[i] - width(row[i]), ' ');
            line += i == 0 ? row[i] + pad : pad + row[i];
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    return out;
}

void check_complete(std::span<const RunResult> results) {
    std::map<Regime, std::set<std::string>> datasets;
    std::map<Regime, std::set<int>> ks;
    std::map<Regime, std::set<std::uint64_t>> seeds;
    std::set<std::tuple<Regime, std::string, int, std::uint64_t>> have;
    for (const auto& r : results) {
        datasets[r.regime].insert(r.dataset);
        ks[r.regime].insert(r.k);
        seeds[r.regime].insert(r.seed);
        have.insert({r.regime, r.dataset, r.k, r.seed});
    }
    std::vector<std::string> gaps;
    for (const auto& [regime, names] : datasets) {
        for (const auto& d : names) {
            for (int k : ks[regime]) {
                for (auto s : seeds[regime]) {
                    if (!have.contains({regime, d, k, s})) {
                        gaps.push_back(fmt::format("runs/{}/{}/k{}/seed{}", to_string(regime), d, k, s));
                    }
                }
            }
        }
    }
    if (!gaps.empty()) {
        std::string msg = "missing run files:";
        for (const auto& g : gaps) msg += "\n  " + g;
        throw std::runtime_error(msg);
    }
}

}  // namespace

void write_report(const fs::path& results_dir, std::span<const RunResult> results) {
    if (results.empty()) throw std::runtime_error("no runs under " + (results_dir / "runs").string());
    check_complete(results);
    fs::create_directories(results_dir);

    // Summary: one row per (regime, k), one column per dataset plus the average.
    std::set<std::string> dataset_set;
    for (const auto& r : results) dataset_set.insert(r.dataset);
    std::vector<std::string> datasets(dataset_set.begin(), dataset_set.end());
    std::map<std::pair<Regime, int>, std::map<std::string, SeedSummary>> cells;
    for (const auto& row : aggregate(results)) cells[{row.regime, row.k}][row.dataset] = row.summary;

    std::vector<std::vector<std::string>> table;
    std::vector<std::string> header{"regime", "k"};
    header.insert(header.end(), datasets.begin(), datasets.end());
    header.push_back("avg");
    table.push_back(header);
    for (const auto& [key, by_dataset] : cells) {
        std::vector<std::string> row{std::string(to_string(key.first)), std::to_string(key.second)};
        std::vector<double> means;
        for (const auto& d : datasets) {
            auto it = by_dataset.find(d);
            if (it == by_dataset.end()) {
                row.emplace_back("-");
                continue;
            }
            row.push_back(format_cell(it->second));
            means.push_back(it->second.mean);
        }
        row.push_back(means.size() == datasets.size() ? fmt::format("{:.2f}", mean_of(means) + 0.0) : "-");
        table.push_back(std::move(row));
    }
    std::string csv;
    for (const auto& row : table) csv += join_csv(row);
    write_text(results_dir / "summary.csv", csv);
    write_text(results_dir / "summary.txt", aligned(table));

    // Answer patterns of dcot k=3 runs, one column per dataset.
    std::map<std::string, std::vector<RunResult>> k3;
    for (const auto& r : results) {
        if (r.regime == Regime::dcot && r.k == 3) k3[r.dataset].push_back(r);
    }
    if (!k3.empty()) {
        std::vector<std::vector<std::string>> ptable;
        std::vector<std::string> pheader{"pattern"};
        std::vector<std::vector<PatternRow>> columns;
        for (const auto& [d, runs] : k3) {
            pheader.push_back(d);
            columns.push_back(pattern_table(std::span<const RunResult>(runs)));
        }
        pheader.push_back("total");
        ptable.push_back(pheader);
        for (std::size_t i = 0; i < columns.front().size(); ++i) {
            std::vector<std::string> row{columns.front()[i].label};
            std::size_t total = 0;
            for (const auto& col : columns) {
                row.push_back(std::to_string(col[i].count));
                total += col[i].count;
            }
            row.push_back(std::to_string(total));
            ptable.push_back(std::move(row));
        }
        std::string pcsv;
        for (const auto& row : ptable) pcsv += join_csv(row);
        write_text(results_dir / "patterns.csv", pcsv);
    }

    // Best k per swept regime, from dev runs only.
    json best = json::object();
    for (Regime regime : {Regime::dcot, Regime::dcot_sc, Regime::prompting_dcot}) {
        std::vector<RunResult> dev;
        std::set<int> ks;
        for (const auto& r : results) {
            if (r.regime == regime && r.split == Split::dev) {
                dev.push_back(r);
                ks.insert(r.k);
            }
        }
        if (dev.empty()) continue;
        std::vector<int> kv(ks.begin(), ks.end());
        best[std::string(to_string(regime))] = select_best_k(std::span<const RunResult>(dev), kv);
    }
    if (!best.empty()) write_text(results_dir / "best_k.json", best.dump(2) + "\n");

    // Adjacent-k deltas for dcot sweeps that include k=1 and k=2.
    std::vector<RunResult> dcot;
    for (const auto& r : results) {
        if (r.regime == Regime::dcot) dcot.push_back(r);
    }
    std::set<int> dcot_ks;
    for (const auto& r : dcot) dcot_ks.insert(r.k);
    const bool contiguous = !dcot_ks.empty() && *dcot_ks.begin() == 1 &&
                            static_cast<std::size_t>(*dcot_ks.rbegin()) == dcot_ks.size();
    if (contiguous && dcot_ks.size() >= 2) {
        std::string rcsv = join_csv({"dataset", "delta", "points", "flagged"});
        for (const auto& row : refinement_delta(dcot)) {
            for (const auto& [label, d] : row.deltas) {
                rcsv += join_csv({row.dataset, label, fmt::format("{:.2f}", d + 0.0),
                                  label == "1→2" && row.flagged ? "yes" : "no"});
            }
        }
        write_text(results_dir / "refinement.csv", rcsv);
    }
}

}  // namespace dcot::experiments
