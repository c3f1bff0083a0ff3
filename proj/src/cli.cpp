#include "dcot/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dcot/datagen.hpp"
#include "dcot/inference.hpp"
#include "dcot/template.hpp"

namespace dcot::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct KeyDoc {
    std::string section;
    std::string key;
    std::string type;
    std::string fallback;
    std::string help;
    std::function<void(const json&, Config&, const fs::path&)> apply;
};

fs::path resolve(const json& v, const fs::path& base) {
    fs::path p = v.get<std::string>();
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

template <typename T>
std::function<void(const json&, Config&, const fs::path&)> set(T Config::*section_ptr, auto member) {
    return [section_ptr, member](const json& v, Config& c, const fs::path&) {
        v.get_to((c.*section_ptr).*member);
    };
}

const std::vector<KeyDoc>& keys() {
    using C = Config;
    static const std::vector<KeyDoc> docs{
        {"endpoint", "url", "string", "\"\"", "student endpoint base URL (OpenAI-compatible)",
         set(&C::endpoint, &C::Endpoint::url)},
        {"endpoint", "model", "string", "\"\"", "student model name; \"{seed}\" is replaced per seed",
         set(&C::endpoint, &C::Endpoint::model)},
        {"endpoint", "api", "string", "\"completions\"", "completions | chat",
         set(&C::endpoint, &C::Endpoint::api)},
        {"endpoint", "timeout_s", "int", "120", "per-request timeout in seconds",
         set(&C::endpoint, &C::Endpoint::timeout_s)},
        {"endpoint", "max_tokens", "int", "1024", "student output token limit",
         set(&C::endpoint, &C::Endpoint::max_tokens)},
        {"endpoint", "temperature", "number", "0", "student temperature for non-ensemble runs",
         set(&C::endpoint, &C::Endpoint::temperature)},
        {"endpoint", "top_p", "number", "1", "student nucleus sampling", set(&C::endpoint, &C::Endpoint::top_p)},
        {"endpoint", "max_in_flight", "int", "8", "concurrent requests", set(&C::endpoint, &C::Endpoint::max_in_flight)},
        {"endpoint", "max_attempts", "int", "5", "attempts per request including the first",
         set(&C::endpoint, &C::Endpoint::max_attempts)},
        {"endpoint", "retry_base_ms", "int", "1000", "first backoff delay; doubles per retry",
         set(&C::endpoint, &C::Endpoint::retry_base_ms)},
        {"teacher", "url", "string", "\"\"", "teacher endpoint base URL (defaults to endpoint.url)",
         set(&C::teacher, &C::Teacher::url)},
        {"teacher", "model", "string", "\"\"", "teacher model name", set(&C::teacher, &C::Teacher::model)},
        {"teacher", "api", "string", "\"completions\"", "completions | chat", set(&C::teacher, &C::Teacher::api)},
        {"teacher", "temperature", "number", "0.7", "teacher sampling temperature",
         set(&C::teacher, &C::Teacher::temperature)},
        {"teacher", "top_p", "number", "1", "teacher nucleus sampling", set(&C::teacher, &C::Teacher::top_p)},
        {"teacher", "max_tokens", "int", "512", "teacher output token limit",
         set(&C::teacher, &C::Teacher::max_tokens)},
        {"teacher", "max_in_flight", "int", "4", "concurrent teacher requests per question",
         set(&C::teacher, &C::Teacher::max_in_flight)},
        {"paths", "corpus", "path", "\"\"", "normalized JSONL file or a directory of *.jsonl",
         [](const json& v, Config& c, const fs::path& b) { c.paths.corpus = resolve(v, b); }},
        {"paths", "cache", "path", "\"{out}/cache.jsonl\"", "append-only response cache",
         [](const json& v, Config& c, const fs::path& b) { c.paths.cache = resolve(v, b); }},
        {"paths", "out", "path", "\"results\"", "output root",
         [](const json& v, Config& c, const fs::path& b) { c.paths.out = resolve(v, b); }},
        {"ensemble", "samples", "int", "5", "self-consistency draws per question",
         [](const json& v, Config& c, const fs::path&) { v.get_to(c.ensemble.samples); }},
        {"ensemble", "temperature", "number", "0.7", "self-consistency sampling temperature",
         [](const json& v, Config& c, const fs::path&) { v.get_to(c.ensemble.temperature); }},
        {"experiment", "ks", "[int]", "[1,2,3,4]", "numbers of chains to sweep",
         set(&C::experiment, &C::Experiment::ks)},
        {"experiment", "seeds", "[int]", "[0,42,2024]", "training seeds to evaluate",
         set(&C::experiment, &C::Experiment::seeds)},
        {"experiment", "regime", "string", "\"dcot\"", "cot | dcot | cot_sc | dcot_sc | prompting_dcot",
         [](const json& v, Config& c, const fs::path&) {
             c.experiment.regime = experiments::parse_regime(v.get<std::string>());
         }},
        {"experiment", "datasets", "[string]", "[]", "datasets to run (empty: all)",
         set(&C::experiment, &C::Experiment::datasets)},
        {"experiment", "split", "string", "\"dev\"", "dev | test",
         [](const json& v, Config& c, const fs::path&) { c.experiment.split = parse_split(v.get<std::string>()); }},
        {"split", "dev_sample_size", "int", "500", "dev size sampled from train when a dataset has none",
         [](const json& v, Config& c, const fs::path&) { v.get_to(c.split.dev_sample_size); }},
        {"split", "seed", "int", "0", "split sampling seed",
         [](const json& v, Config& c, const fs::path&) { v.get_to(c.split.seed); }},
        {"split", "small_train_threshold", "int", "1000", "train size at or below which dev is halved into dev/test",
         [](const json& v, Config& c, const fs::path&) { v.get_to(c.split.small_train_threshold); }},
        {"split", "overrides", "{dataset: {dev, test}}", "{}", "explicit dev/test sizes cut from the pooled dev+test",
         [](const json& v, Config& c, const fs::path&) {
             if (!v.is_object()) throw ConfigError("split.overrides must be an object");
             for (const auto& [name, o] : v.items()) {
                 if (!o.is_object()) throw ConfigError("split.overrides." + name + " must be an object");
                 for (const auto& [k, _] : o.items()) {
                     if (k != "dev" && k != "test") {
                         throw ConfigError("unknown config key split.overrides." + name + "." + k);
                     }
                 }
                 corpus::SplitOverride so;
                 so.dev = o.value("dev", std::size_t{0});
                 so.test = o.value("test", std::size_t{0});
                 c.split.overrides[name] = so;
             }
         }},
        {"datagen", "trigger_seed", "int", "0", "seed for the four triggers drawn per question",
         set(&C::datagen, &C::Datagen::trigger_seed)},
        {"datagen", "assign_seed", "int", "0", "seed for the per-question k assignment",
         set(&C::datagen, &C::Datagen::assign_seed)},
    };
    return docs;
}

inference::ApiShape parse_api(const std::string& s, const std::string& key) {
    if (s == "completions") return inference::ApiShape::completions;
    if (s == "chat") return inference::ApiShape::chat;
    throw ConfigError(key + " must be \"completions\" or \"chat\", got \"" + s + "\"");
}

}  // namespace

void Config::validate() const {
    auto positive = [](long long v, const char* key) {
        if (v < 1) throw ConfigError(fmt::format("{} must be >= 1, got {}", key, v));
    };
    auto fraction = [](double v, const char* key, double max) {
        if (!(v >= 0.0 && v <= max)) throw ConfigError(fmt::format("{} must be in [0, {}], got {}", key, max, v));
    };
    positive(endpoint.timeout_s, "endpoint.timeout_s");
    positive(endpoint.max_tokens, "endpoint.max_tokens");
    positive(endpoint.max_in_flight, "endpoint.max_in_flight");
    positive(endpoint.max_attempts, "endpoint.max_attempts");
    if (endpoint.retry_base_ms < 0) throw ConfigError("endpoint.retry_base_ms must be >= 0");
    fraction(endpoint.temperature, "endpoint.temperature", 2.0);
    fraction(endpoint.top_p, "endpoint.top_p", 1.0);
    parse_api(endpoint.api, "endpoint.api");
    positive(teacher.max_tokens, "teacher.max_tokens");
    positive(teacher.max_in_flight, "teacher.max_in_flight");
    fraction(teacher.temperature, "teacher.temperature", 2.0);
    fraction(teacher.top_p, "teacher.top_p", 1.0);
    parse_api(teacher.api, "teacher.api");
    positive(ensemble.samples, "ensemble.samples");
    fraction(ensemble.temperature, "ensemble.temperature", 2.0);
    if (experiment.ks.empty()) throw ConfigError("experiment.ks is empty");
    for (int k : experiment.ks) {
        if (k < 1 || k > templates::kMaxChains) throw ConfigError(fmt::format("experiment.ks: k={} outside [1, 4]", k));
    }
    if (experiment.seeds.empty()) throw ConfigError("experiment.seeds is empty");
    if (experiment.split == Split::train) throw ConfigError("experiment.split must be dev or test");
    if (paths.out.empty()) throw ConfigError("paths.out is empty");
}

Config parse_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    std::map<std::string, std::map<std::string, const KeyDoc*>> index;
    for (const auto& d : keys()) index[d.section][d.key] = &d;

    Config c;
    for (const auto& [section, body] : j.items()) {
        auto s = index.find(section);
        if (s == index.end()) throw ConfigError("unknown config section \"" + section + "\"");
        if (!body.is_object()) throw ConfigError("config section \"" + section + "\" must be an object");
        for (const auto& [key, value] : body.items()) {
            auto k = s->second.find(key);
            if (k == s->second.end()) throw ConfigError("unknown config key " + section + "." + key);
            try {
                k->second->apply(value, c, base_dir);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& ex) {
                throw ConfigError("config key " + section + "." + key + ": " + ex.what());
            }
        }
    }
    if (c.paths.cache.empty()) c.paths.cache = c.paths.out / "cache.jsonl";
    c.validate();
    return c;
}

Config load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& ex) {
        throw ConfigError(path.string() + ": " + ex.what());
    }
    return parse_config(j, path.parent_path());
}

std::string config_reference() {
    std::string out = "Config keys (JSON file, flags override):\n";
    for (const auto& d : keys()) {
        out += fmt::format("  {:<28} {:<22} default {:<20} {}\n", d.section + "." + d.key, d.type, d.fallback, d.help);
    }
    out += "Environment: DCOT_API_KEY (bearer key; not needed with --mock-script)\n";
    return out;
}

namespace {

class TransportFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<Example> load_corpus(const Config& c) {
    if (c.paths.corpus.empty()) throw ConfigError("paths.corpus is not set");
    if (!fs::exists(c.paths.corpus)) throw ConfigError("paths.corpus does not exist: " + c.paths.corpus.string());
    std::vector<fs::path> files;
    if (fs::is_directory(c.paths.corpus)) {
        for (const auto& e : fs::directory_iterator(c.paths.corpus)) {
            if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(c.paths.corpus);
    }
    std::vector<Example> all;
    std::set<std::string> ids;
    for (const auto& f : files) {
        for (auto& e : corpus::ingest(f)) {
            if (!ids.insert(e.id).second) throw ValidationError("id=" + e.id + ": duplicate id across corpus files");
            all.push_back(std::move(e));
        }
    }
    return all;
}

std::string api_key(bool mock) {
    if (mock) return {};
    const char* key = std::getenv("DCOT_API_KEY");
    if (key == nullptr || *key == '\0') throw ConfigError("DCOT_API_KEY is not set (or pass --mock-script)");
    return key;
}

std::shared_ptr<inference::Backend> make_backend(const std::string& mock_script, const std::string& url,
                                                 const std::string& api, int timeout_s, const char* url_key) {
    if (!mock_script.empty()) {
        return std::make_shared<inference::MockBackend>(inference::MockBackend::from_file(mock_script));
    }
    if (url.empty()) throw ConfigError(std::string(url_key) + " is not set");
    inference::EndpointConfig ec;
    ec.url = url;
    ec.api_key = api_key(false);
    ec.api = parse_api(api, url_key);
    ec.timeout = std::chrono::seconds(timeout_s);
    return std::make_shared<inference::OpenAIBackend>(ec);
}

inference::RetryPolicy retry_policy(const Config& c) {
    inference::RetryPolicy r;
    r.max_attempts = c.endpoint.max_attempts;
    r.base_delay = std::chrono::milliseconds(c.endpoint.retry_base_ms);
    return r;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
}

template <typename T>
std::vector<T> read_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationFailure("cannot read " + path.string());
    std::vector<T> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line).get<T>());
        } catch (const std::exception& ex) {
            throw ValidationFailure(fmt::format("{}:{}: {}", path.string(), n, ex.what()));
        }
    }
    return out;
}

fs::path datagen_dir(const Config& c) { return c.paths.out / "datagen"; }

// ---- gen-cots -------------------------------------------------------------

int cmd_gen_cots(const Config& c, const std::vector<std::string>& datasets, const std::string& mock,
                 std::ostream& out, std::ostream& err) {
    auto all = load_corpus(c);
    auto splits = corpus::derive_splits(all, c.split);
    std::set<std::string> wanted(datasets.begin(), datasets.end());
    std::vector<const Example*> todo;
    for (const auto& e : splits.train) {
        if (wanted.empty() || wanted.contains(e.dataset)) todo.push_back(&e);
    }
    if (todo.empty()) throw ConfigError("no training examples selected");

    auto backend = make_backend(mock, c.teacher.url.empty() ? c.endpoint.url : c.teacher.url, c.teacher.api,
                                c.endpoint.timeout_s, "teacher.url");
    inference::Client client(backend, std::make_shared<inference::ResponseCache>(c.paths.cache), retry_policy(c));
    auto params = datagen::teacher_params(c.teacher.model);
    params.temperature = c.teacher.temperature;
    params.top_p = c.teacher.top_p;
    params.max_tokens = c.teacher.max_tokens;

    // Keep records of datasets outside this invocation.
    const fs::path raw_path = datagen_dir(c) / "raw_generations.jsonl";
    std::vector<datagen::CoTRecord> records;
    std::set<std::string> todo_ids;
    for (const auto* e : todo) todo_ids.insert(e->id);
    if (!wanted.empty() && fs::exists(raw_path)) {
        for (auto& r : read_jsonl<datagen::CoTRecord>(raw_path)) {
            if (!todo_ids.contains(r.example_id)) records.push_back(std::move(r));
        }
    }

    std::map<std::size_t, std::size_t> histogram;
    std::vector<std::string> excluded;
    std::size_t failures = 0;
    std::size_t requested = 0;
    for (const Example* e : todo) {
        auto triggers = datagen::sample_triggers(*e, c.datagen.trigger_seed);
        requested += triggers.size();
        auto result = datagen::generate_cots(*e, triggers, client, params, c.teacher.max_in_flight);
        for (const auto& f : result.failures) err << "gen-cots: " << e->id << ": " << f << '\n';
        failures += triggers.size() - std::min(triggers.size(), result.records.size());
        auto pool = datagen::filter_correct(result.records, *e);
        ++histogram[pool.m()];
        if (pool.m() == 0) excluded.push_back(e->id);
        records.insert(records.end(), result.records.begin(), result.records.end());
    }
    if (failures == requested) throw TransportFailure("every teacher request failed");

    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.example_id, a.trigger_index) < std::tie(b.example_id, b.trigger_index);
    });
    std::vector<std::string> lines;
    for (const auto& r : records) lines.push_back(json(r).dump());
    write_lines(raw_path, lines);
    write_lines(datagen_dir(c) / "excluded.txt", excluded);

    std::size_t tokens = 0;
    for (const auto& r : records) tokens += r.token_estimate;
    out << fmt::format("questions: {}  records: {}  failed requests: {}\n", todo.size(), records.size(), failures);
    out << "retained chains per question (m):\n";
    for (std::size_t m = 0; m <= static_cast<std::size_t>(datagen::kMaxChains); ++m) {
        out << fmt::format("  m={}: {}\n", m, histogram[m]);
    }
    out << fmt::format("excluded (no correct chain): {}\n", excluded.size());
    if (!records.empty()) {
        out << fmt::format("mean chain tokens: {:.1f}\n", static_cast<double>(tokens) / records.size());
    }
    out << fmt::format("backend calls: {}  cache hits: {}\n", client.backend_calls(), client.cache_hits());
    return kOk;
}

// ---- build-train ----------------------------------------------------------

datagen::BudgetCheck verify_train_files(const Config& c) {
    auto dcot = read_jsonl<datagen::TrainingInstance>(datagen_dir(c) / "train_dcot.jsonl");
    auto cot = read_jsonl<datagen::TrainingInstance>(datagen_dir(c) / "train_cot.jsonl");
    return datagen::check_budget(dcot, cot);
}

void print_budget(const datagen::BudgetCheck& b, std::ostream& out) {
    out << fmt::format("budget check: dcot chains {} vs cot instances {}: {}\n", b.dcot_chains, b.cot_instances,
                       b.ok() ? "equal" : "MISMATCH");
    for (const auto& id : b.malformed) out << "  malformed target: " << id << '\n';
}

int cmd_build_train(const Config& c, std::ostream& out) {
    auto all = load_corpus(c);
    std::map<std::string, Example> examples;
    for (auto& e : all) examples.emplace(e.id, e);

    auto records = read_jsonl<datagen::CoTRecord>(datagen_dir(c) / "raw_generations.jsonl");
    std::map<std::string, std::vector<datagen::CoTRecord>> by_id;
    for (auto& r : records) {
        if (!examples.contains(r.example_id)) throw ValidationFailure("raw record for unknown id " + r.example_id);
        by_id[r.example_id].push_back(std::move(r));
    }
    std::vector<datagen::CoTPool> pools;
    for (const auto& [id, recs] : by_id) {
        auto pool = datagen::filter_correct(recs, examples.at(id));
        if (pool.m() > 0) pools.push_back(std::move(pool));
    }
    if (pools.empty()) throw ValidationFailure("no question has a correct chain; nothing to train on");

    auto assignment = datagen::assign_k(pools, c.datagen.assign_seed);
    auto sets = datagen::build_training_sets(pools, assignment, examples);
    std::vector<std::string> dl, cl;
    for (const auto& t : sets.dcot) dl.push_back(json(t).dump());
    for (const auto& t : sets.cot) cl.push_back(json(t).dump());
    write_lines(datagen_dir(c) / "train_dcot.jsonl", dl);
    write_lines(datagen_dir(c) / "train_cot.jsonl", cl);

    std::map<int, std::size_t> hist;
    for (const auto& [id, k] : assignment) ++hist[k];
    out << fmt::format("questions: {}  dcot instances: {}  cot instances: {}\n", pools.size(), sets.dcot.size(),
                       sets.cot.size());
    out << "k assignment:\n";
    for (int k = 1; k <= datagen::kMaxChains; ++k) out << fmt::format("  k={}: {}\n", k, hist[k]);

    auto check = verify_train_files(c);
    print_budget(check, out);
    return check.ok() ? kOk : kValidation;
}

// ---- run ------------------------------------------------------------------

int cmd_run(const Config& c, const std::string& mock, std::ostream& out) {
    auto all = load_corpus(c);
    auto splits = corpus::derive_splits(all, c.split);
    const auto& pool = c.experiment.split == Split::test ? splits.test : splits.dev;

    experiments::ExperimentConfig ec;
    ec.datasets = c.experiment.datasets;
    ec.ks = c.experiment.ks;
    ec.seeds = c.experiment.seeds;
    ec.regime = c.experiment.regime;
    ec.params.model = c.endpoint.model;
    ec.params.temperature = c.endpoint.temperature;
    ec.params.top_p = c.endpoint.top_p;
    ec.params.max_tokens = c.endpoint.max_tokens;
    ec.ensemble = c.ensemble;
    ec.max_in_flight = static_cast<std::size_t>(c.endpoint.max_in_flight);

    auto backend = make_backend(mock, c.endpoint.url, c.endpoint.api, c.endpoint.timeout_s, "endpoint.url");
    inference::Client client(backend, std::make_shared<inference::ResponseCache>(c.paths.cache), retry_policy(c));
    std::vector<experiments::RunResult> runs;
    try {
        runs = experiments::run_sweep(ec, pool, c.experiment.split, client);
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }

    const fs::path dir = c.paths.out / std::string(to_string(c.experiment.split));
    std::size_t items = 0;
    std::size_t failed = 0;
    json manifest = json::array();
    for (const auto& r : runs) {
        experiments::write_run(dir, r);
        items += r.per_example.size();
        failed += r.failures.size();
        out << fmt::format("{} {} k={} seed={}: {} {:.2f} (n={}, failures {})\n", to_string(r.regime), r.dataset, r.k,
                           r.seed, metrics::to_string(r.report.metric), r.report.value * 100.0, r.report.n,
                           r.failures.size());
        if (!r.failures.empty()) {
            manifest.push_back(json{{"regime", to_string(r.regime)},
                                    {"dataset", r.dataset},
                                    {"k", r.k},
                                    {"seed", r.seed},
                                    {"failures", r.failures}});
        }
    }
    out << fmt::format("backend calls: {}  cache hits: {}\n", client.backend_calls(), client.cache_hits());
    if (!manifest.empty()) {
        std::string name = fmt::format("failures.{}.json", to_string(c.experiment.regime));
        write_lines(dir / name, {manifest.dump(2)});
        out << fmt::format("{} of {} items failed; see {}\n", failed, items, (dir / name).string());
    }
    if (items > 0 && failed == items) throw TransportFailure("every request of the run failed");
    return kOk;
}

// ---- report / validate ----------------------------------------------------

int cmd_report(const Config& c, std::ostream& out) {
    const fs::path dir = c.paths.out / std::string(to_string(c.experiment.split));
    auto runs = experiments::read_runs(dir);
    try {
        experiments::write_report(dir, runs);
    } catch (const std::runtime_error& ex) {
        throw ValidationFailure(ex.what());
    }
    std::ifstream summary(dir / "summary.txt");
    out << summary.rdbuf();
    for (const char* f : {"summary.csv", "summary.txt", "patterns.csv", "best_k.json", "refinement.csv"}) {
        if (fs::exists(dir / f)) out << "wrote " << (dir / f).string() << '\n';
    }
    return kOk;
}

int cmd_validate(const Config& c, std::ostream& out) {
    auto all = load_corpus(c);
    auto splits = corpus::derive_splits(all, c.split);
    out << fmt::format("corpus: {} records  train {}  dev {}  test {}  dropped {}\n", all.size(), splits.train.size(),
                       splits.dev.size(), splits.test.size(), splits.dropped);
    if (fs::exists(datagen_dir(c) / "train_dcot.jsonl") || fs::exists(datagen_dir(c) / "train_cot.jsonl")) {
        auto check = verify_train_files(c);
        print_budget(check, out);
        if (!check.ok()) return kValidation;
    }
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"DCoT toolkit: build diverse chain-of-thought training data and evaluate DCoT@k runs", "dcot"};
    app.footer(config_reference());
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path = "dcot.json";
    app.add_option("-c,--config", config_path, "config file")->capture_default_str();

    std::vector<std::string> datasets;
    std::string mock;
    auto* gen = app.add_subcommand("gen-cots", "sample teacher chains for the train split");
    gen->add_option("--dataset", datasets, "restrict to these datasets");
    gen->add_option("--mock-script", mock, "scripted mock backend instead of the endpoint");

    app.add_subcommand("build-train", "assemble train_dcot.jsonl and train_cot.jsonl from raw generations");

    auto* run = app.add_subcommand("run", "evaluate a regime over ks and seeds");
    std::string regime, split;
    std::vector<int> ks;
    std::vector<std::uint64_t> seeds;
    run->add_option("--regime", regime, "cot | dcot | cot_sc | dcot_sc | prompting_dcot");
    run->add_option("--k", ks, "numbers of chains (repeatable)");
    run->add_option("--seed", seeds, "seeds (repeatable)");
    run->add_option("--split", split, "dev | test");
    run->add_option("--dataset", datasets, "restrict to these datasets");
    run->add_option("--mock-script", mock, "scripted mock backend instead of the endpoint");

    auto* report = app.add_subcommand("report", "write summary tables, patterns and best k for a split");
    report->add_option("--split", split, "dev | test");

    app.add_subcommand("validate", "check the config, the corpus and any training files");

    // CLI11 wants the arguments in reverse order.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        Config c = load_config(config_path);
        if (!regime.empty()) c.experiment.regime = experiments::parse_regime(regime);
        if (!split.empty()) c.experiment.split = parse_split(split);
        if (!ks.empty()) c.experiment.ks = ks;
        if (!seeds.empty()) c.experiment.seeds = seeds;
        if (!datasets.empty() && run->parsed()) c.experiment.datasets = datasets;
        c.validate();

        if (gen->parsed()) return cmd_gen_cots(c, datasets, mock, out, err);
        if (app.got_subcommand("build-train")) return cmd_build_train(c, out);
        if (run->parsed()) return cmd_run(c, mock, out);
        if (report->parsed()) return cmd_report(c, out);
        return cmd_validate(c, out);
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << '\n';
        return kConfig;
    } catch (const TransportFailure& ex) {
        err << "transport error: " << ex.what() << '\n';
        return kTransport;
    } catch (const inference::TransportError& ex) {
        err << "transport error: " << ex.what() << '\n';
        return kTransport;
    } catch (const ValidationError& ex) {
        err << "validation error: " << ex.what() << '\n';
        return kValidation;
    } catch (const ValidationFailure& ex) {
        err << "validation error: " << ex.what() << '\n';
        return kValidation;
    } catch (const std::invalid_argument& ex) {
        err << "config error: " << ex.what() << '\n';
        return kConfig;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kValidation;
    }
}

}  // namespace dcot::cli
