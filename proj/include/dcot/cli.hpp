#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcot/corpus.hpp"
#include "dcot/ensemble.hpp"
#include "dcot/experiments.hpp"

namespace dcot::cli {

/// Bad flags, unknown or out-of-range config keys, missing API key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kConfig = 1, kTransport = 2, kValidation = 3 };

struct Config {
    struct Endpoint {
        std::string url;
        std::string model;
        std::string api = "completions";
        int timeout_s = 120;
        int max_tokens = 1024;
        double temperature = 0.0;
        double top_p = 1.0;
        int max_in_flight = 8;
        int max_attempts = 5;
        int retry_base_ms = 1000;
    } endpoint;
    struct Teacher {
        std::string url;  ///< falls back to endpoint.url
        std::string model;
        std::string api = "completions";
        double temperature = 0.7;
        double top_p = 1.0;
        int max_tokens = 512;
        int max_in_flight = 4;
    } teacher;
    struct Paths {
        std::filesystem::path corpus;  ///< JSONL file or directory of *.jsonl
        std::filesystem::path cache;   ///< defaults to {out}/cache.jsonl
        std::filesystem::path out = "results";
    } paths;
    ensemble::EnsembleConfig ensemble;
    struct Experiment {
        std::vector<int> ks{1, 2, 3, 4};
        std::vector<std::uint64_t> seeds{0, 42, 2024};
        experiments::Regime regime = experiments::Regime::dcot;
        std::vector<std::string> datasets;
        Split split = Split::dev;
    } experiment;
    corpus::SplitPlan split;
    struct Datagen {
        std::uint64_t trigger_seed = 0;
        std::uint64_t assign_seed = 0;
    } datagen;

    /// Range checks; throws ConfigError.
    void validate() const;
};

/// Parses a config object. Relative paths resolve against `base_dir`.
/// Unknown sections or keys are errors.
Config parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

/// Every config key with its type and default, one per line.
std::string config_reference();

/// Entry point behind the `dcot` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dcot::cli
