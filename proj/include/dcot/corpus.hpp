#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dcot/example.hpp"

namespace dcot::corpus {

/// Explicit dev/test sizes for datasets too small for the default rules.
struct SplitOverride {
    std::size_t dev = 0;
    std::size_t test = 0;
};

struct SplitPlan {
    std::size_t dev_sample_size = 500;
    std::uint64_t seed = 0;
    /// Train sets at or below this size get their dev set halved into dev/test.
    std::size_t small_train_threshold = 1000;
    std::map<std::string, SplitOverride> overrides;
};

struct Splits {
    std::vector<Example> train;
    std::vector<Example> dev;
    std::vector<Example> test;
    /// Records left out of every split (override pools larger than dev+test).
    std::size_t dropped = 0;
};

/// Parses normalized JSONL. Option labels are rewritten to A, B, C, ... and
/// the gold of option tasks follows its option. Throws ValidationError naming
/// the line number (malformed JSON) or the record id (invariant violation).
std::vector<Example> ingest(std::istream& in, const std::string& dataset = {});
std::vector<Example> ingest(const std::filesystem::path& path, const std::string& dataset = {});

/// Checks one record against the Example invariants; throws ValidationError.
void validate(const Example& e);

/// Derives train/dev/test per dataset from the source-declared splits:
///  1. no dev  -> sample dev_sample_size from train;
///  2. no test -> small train: shuffle dev, first half stays dev, second half
///     becomes test; otherwise dev becomes test and a fresh dev is sampled
///     from the remaining train;
///  3. an override pools dev+test, shuffles it and cuts dev then test.
/// Each dataset draws from SplitMix64(derive_seed(plan.seed, dataset)).
/// Sampled items keep their input order inside each split. Ids never change;
/// only the `split` field of a moved record is updated.
Splits derive_splits(const std::vector<Example>& examples, const SplitPlan& plan);

/// Writes one compact JSON object per line, LF terminated.
void write_jsonl(std::ostream& out, const std::vector<Example>& examples);

}  // namespace dcot::corpus
