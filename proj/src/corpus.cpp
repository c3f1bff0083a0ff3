#include "dcot/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include "dcot/metrics.hpp"
#include "dcot/rng.hpp"

namespace dcot::corpus {

namespace {

std::string letter_label(std::size_t i) {
    // A..Z, then AA, AB, ...
    std::string out;
    ++i;
    while (i > 0) {
        --i;
        out.insert(out.begin(), static_cast<char>('A' + i % 26));
        i /= 26;
    }
    return out;
}

/// Rewrites option labels to letters and points the gold at the new label.
/// Binary sets often carry the answer text ("yes") as gold; it is matched
/// against the option bodies.
void normalize_options(Example& e) {
    auto& opts = *e.options;
    std::optional<std::size_t> gold_index;
    for (std::size_t i = 0; i < opts.size() && !gold_index; ++i) {
        if (opts[i].label == e.gold) gold_index = i;
    }
    if (!gold_index && e.task_type == TaskType::binary) {
        const auto ng = metrics::normalize(e.gold).normalized;
        for (std::size_t i = 0; i < opts.size() && !gold_index; ++i) {
            if (metrics::normalize(opts[i].body).normalized == ng) gold_index = i;
        }
    }
    for (std::size_t i = 0; i < opts.size(); ++i) {
        std::string letter = letter_label(i);
        if (opts[i].label != letter) {
            opts[i].body = opts[i].label + ") " + opts[i].body;
            opts[i].label = std::move(letter);
        }
    }
    if (gold_index) e.gold = opts[*gold_index].label;
}

}  // namespace

void validate(const Example& e) {
    auto fail = [&](const std::string& rule) { throw ValidationError("id=" + e.id + ": " + rule); };
    if (e.id.empty()) throw ValidationError("record without id");
    if (e.question.empty()) fail("empty question");
    if (has_options(e.task_type)) {
        if (!e.options || e.options->size() < 2) fail("needs ≥2 options");
        std::set<std::string> labels;
        for (const auto& o : *e.options) {
            if (!labels.insert(o.label).second) fail("duplicate option label \"" + o.label + "\"");
        }
        if (!labels.contains(e.gold)) fail("gold \"" + e.gold + "\" is not an option label");
    } else if (e.options) {
        fail(std::string(to_string(e.task_type)) + " examples take no options");
    }
    if (e.task_type == TaskType::numeric && !metrics::parse_number(e.gold)) fail("gold \"" + e.gold + "\" is not a number");
}

std::vector<Example> ingest(std::istream& in, const std::string& dataset) {
    std::vector<Example> out;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Example e;
        try {
            from_json(nlohmann::json::parse(line), e);
        } catch (const nlohmann::json::exception& ex) {
            throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON: " + ex.what());
        } catch (const ValidationError& ex) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + ex.what());
        }
        if (e.dataset.empty()) e.dataset = dataset;
        if (!dataset.empty() && e.dataset != dataset) {
            throw ValidationError("id=" + e.id + ": dataset \"" + e.dataset + "\" differs from \"" + dataset + "\"");
        }
        if (e.dataset.empty()) throw ValidationError("id=" + e.id + ": missing dataset");
        if (e.options && e.options->size() >= 2) normalize_options(e);
        validate(e);
        if (!ids.insert(e.id).second) throw ValidationError("id=" + e.id + ": duplicate id");
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Example> ingest(const std::filesystem::path& path, const std::string& dataset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return ingest(in, dataset);
}

namespace {

struct DatasetSplits {
    std::vector<std::size_t> train, dev, test;
};

std::vector<std::size_t> take_sample(std::vector<std::size_t>& pool, std::size_t count, SplitMix64& rng,
                                     const std::string& what) {
    if (count > pool.size()) {
        throw std::invalid_argument(what + ": requested " + std::to_string(count) + " but the pool has " +
                                    std::to_string(pool.size()));
    }
    std::vector<std::size_t> shuffled = pool;
    seeded_shuffle(std::span(shuffled), rng);
    std::vector<std::size_t> picked(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(count));
    std::set<std::size_t> taken(picked.begin(), picked.end());
    std::erase_if(pool, [&](std::size_t i) { return taken.contains(i); });
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

Splits derive_splits(const std::vector<Example>& examples, const SplitPlan& plan) {
    std::vector<std::string> order;
    std::map<std::string, DatasetSplits> per_dataset;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& e = examples[i];
        auto [it, inserted] = per_dataset.try_emplace(e.dataset);
        if (inserted) order.push_back(e.dataset);
        switch (e.split) {
            case Split::train: it->second.train.push_back(i); break;
            case Split::dev: it->second.dev.push_back(i); break;
            case Split::test: it->second.test.push_back(i); break;
        }
    }

    Splits out;
    for (const auto& name : order) {
        auto& s = per_dataset[name];
        const std::size_t source_train = s.train.size();
        SplitMix64 rng(derive_seed(plan.seed, name));
        if (auto ov = plan.overrides.find(name); ov != plan.overrides.end()) {
            // The override replaces the default rules for this dataset.
            std::vector<std::size_t> pool = s.dev;
            pool.insert(pool.end(), s.test.begin(), s.test.end());
            std::sort(pool.begin(), pool.end());
            s.dev = take_sample(pool, ov->second.dev, rng, name + " override dev");
            s.test = take_sample(pool, ov->second.test, rng, name + " override test");
            out.dropped += pool.size();
        } else {
            if (s.dev.empty()) s.dev = take_sample(s.train, plan.dev_sample_size, rng, name + " dev");
            if (s.test.empty()) {
                if (source_train <= plan.small_train_threshold) {
                    std::vector<std::size_t> shuffled = s.dev;
                    seeded_shuffle(std::span(shuffled), rng);
                    std::size_t half = shuffled.size() / 2;
                    s.dev.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(half));
                    s.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(half), shuffled.end());
                    std::sort(s.dev.begin(), s.dev.end());
                    std::sort(s.test.begin(), s.test.end());
                } else {
                    s.test = std::move(s.dev);
                    s.dev = take_sample(s.train, plan.dev_sample_size, rng, name + " dev");
                }
            }
        }
        auto emit = [&](const std::vector<std::size_t>& idx, Split split, std::vector<Example>& dst) {
            for (auto i : idx) {
                Example e = examples[i];
                e.split = split;
                dst.push_back(std::move(e));
            }
        };
        emit(s.train, Split::train, out.train);
        emit(s.dev, Split::dev, out.dev);
        emit(s.test, Split::test, out.test);
    }
    return out;
}

void write_jsonl(std::ostream& out, const std::vector<Example>& examples) {
    for (const auto& e : examples) {
        nlohmann::json j = e;
        out << j.dump() << '\n';
    }
}

}  // namespace dcot::corpus
