#include "dcot/inference.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <set>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>

namespace dcot::inference {

std::string_view to_string(Source s) {
    switch (s) {
        case Source::network: return "network";
        case Source::cache: return "cache";
        case Source::mock: return "mock";
    }
    return "unknown";
}

namespace {

Source parse_source(std::string_view s) {
    if (s == "network") return Source::network;
    if (s == "cache") return Source::cache;
    if (s == "mock") return Source::mock;
    throw std::invalid_argument("unknown completion source \"" + std::string(s) + "\"");
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    static constexpr char kDigits[] = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kDigits[digest[i] >> 4]);
        hex.push_back(kDigits[digest[i] & 0xF]);
    }
    return hex;
}

}  // namespace

void to_json(nlohmann::json& j, const GenerationParams& p) {
    j = nlohmann::json{{"model", p.model},
                       {"temperature", p.temperature},
                       {"top_p", p.top_p},
                       {"max_tokens", p.max_tokens},
                       {"sample_index", p.sample_index},
                       {"stop", p.stop}};
}

void from_json(const nlohmann::json& j, GenerationParams& p) {
    p.model = j.at("model").get<std::string>();
    p.temperature = j.at("temperature").get<double>();
    p.top_p = j.at("top_p").get<double>();
    p.max_tokens = j.at("max_tokens").get<int>();
    p.sample_index = j.at("sample_index").get<int>();
    p.stop = j.value("stop", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const CompletionRecord& r) {
    j = nlohmann::json{{"request_id", r.request_id},
                       {"prompt", r.prompt},
                       {"params", r.params},
                       {"completion", r.completion},
                       {"usage", {{"prompt_tokens", r.usage.prompt_tokens},
                                  {"completion_tokens", r.usage.completion_tokens}}},
                       {"source", std::string(to_string(r.source))},
                       {"attempts", r.attempts}};
    if (r.unmatched) j["unmatched"] = true;
}

void from_json(const nlohmann::json& j, CompletionRecord& r) {
    r.request_id = j.at("request_id").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.params = j.at("params").get<GenerationParams>();
    r.completion = j.at("completion").get<std::string>();
    const auto& u = j.at("usage");
    r.usage.prompt_tokens = u.value("prompt_tokens", std::size_t{0});
    r.usage.completion_tokens = u.value("completion_tokens", std::size_t{0});
    r.source = parse_source(j.at("source").get<std::string>());
    r.attempts = j.value("attempts", 1);
    r.unmatched = j.value("unmatched", false);
}

std::string request_id(const std::string& prompt, const GenerationParams& params) {
    // nlohmann::json objects keep keys sorted, which pins the byte layout.
    nlohmann::json key{{"model", params.model},
                       {"prompt", prompt},
                       {"temperature", params.temperature},
                       {"top_p", params.top_p},
                       {"max_tokens", params.max_tokens},
                       {"sample_index", params.sample_index},
                       {"stop", params.stop}};
    return sha256_hex(key.dump());
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(const std::filesystem::path& path) : path_(path) {
    if (path_.empty()) return;
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_, std::ios::binary);
        std::string line;
        std::size_t line_no = 0;
        std::uintmax_t good = 0;  // bytes up to the end of the last intact line
        bool torn = false;
        while (std::getline(in, line)) {
            ++line_no;
            const bool at_end = in.peek() == EOF;
            if (!line.empty()) {
                try {
                    auto record = nlohmann::json::parse(line).get<CompletionRecord>();
                    records_.insert_or_assign(record.request_id, std::move(record));
                } catch (const std::exception& ex) {
                    // a torn final line from an interrupted run is tolerated and cut off
                    if (!at_end) {
                        throw std::runtime_error(path_.string() + ":" + std::to_string(line_no) + ": " + ex.what());
                    }
                    torn = true;
                    break;
                }
            }
            good += line.size() + 1;
        }
        in.close();
        const auto size = std::filesystem::file_size(path_);
        if (torn) {
            std::filesystem::resize_file(path_, good);
        } else if (size > 0 && good > size) {
            // last record lacks its newline
            std::ofstream(path_, std::ios::binary | std::ios::app) << '\n';
        }
    } else if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw std::runtime_error("cannot open cache " + path_.string());
}

std::optional<CompletionRecord> ResponseCache::lookup(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::append(const CompletionRecord& record) {
    std::lock_guard lock(mutex_);
    if (records_.contains(record.request_id)) return;
    records_.emplace(record.request_id, record);
    if (out_.is_open()) {
        out_ << nlohmann::json(record).dump() << '\n';
        out_.flush();
    }
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

// ---------------------------------------------------------------------------
// Client

Client::Client(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache, RetryPolicy retry)
    : backend_(std::move(backend)), cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      retry_(std::move(retry)) {
    if (!backend_) throw std::invalid_argument("Client needs a backend");
    if (retry_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

CompletionRecord Client::complete(const std::string& prompt, const GenerationParams& params) {
    const std::string id = request_id(prompt, params);
    if (auto hit = cache_->lookup(id)) {
        ++cache_hits_;
        hit->source = Source::cache;
        return *hit;
    }

    std::promise<CompletionRecord> promise;
    std::shared_future<CompletionRecord> future;
    bool owner = false;
    {
        std::lock_guard lock(pending_mutex_);
        auto it = pending_.find(id);
        if (it != pending_.end()) {
            future = it->second;
        } else {
            future = promise.get_future().share();
            pending_.emplace(id, future);
            owner = true;
        }
    }
    if (!owner) {
        CompletionRecord shared = future.get();
        ++cache_hits_;
        shared.source = Source::cache;
        return shared;
    }

    // A request that finished between the lookup above and our registration.
    if (auto hit = cache_->lookup(id)) {
        ++cache_hits_;
        hit->source = Source::cache;
        promise.set_value(*hit);
        std::lock_guard lock(pending_mutex_);
        pending_.erase(id);
        return *hit;
    }
    try {
        CompletionRecord record = fetch(id, prompt, params);
        cache_->append(record);
        promise.set_value(record);
        std::lock_guard lock(pending_mutex_);
        pending_.erase(id);
        return record;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(pending_mutex_);
        pending_.erase(id);
        throw;
    }
}

CompletionRecord Client::fetch(const std::string& id, const std::string& prompt, const GenerationParams& params) {
    std::vector<std::string> log;
    auto delay = retry_.base_delay;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        ++backend_calls_;
        Attempt a;
        try {
            a = backend_->attempt(prompt, params);
        } catch (const std::exception& ex) {
            a.kind = Attempt::Kind::retryable;
            a.status = 0;
            a.error = ex.what();
        }
        switch (a.kind) {
            case Attempt::Kind::ok: {
                CompletionRecord r;
                r.request_id = id;
                r.prompt = prompt;
                r.params = params;
                r.completion = std::move(a.completion);
                r.usage = a.usage;
                r.source = backend_->source();
                r.attempts = attempt;
                r.unmatched = a.unmatched;
                return r;
            }
            case Attempt::Kind::malformed:
                throw ProtocolError("malformed endpoint response: " + a.error, a.body);
            case Attempt::Kind::fatal:
                log.push_back("attempt " + std::to_string(attempt) + ": status " + std::to_string(a.status) + " " +
                              a.error);
                throw TransportError("request failed with status " + std::to_string(a.status), log);
            case Attempt::Kind::retryable:
                log.push_back("attempt " + std::to_string(attempt) + ": status " + std::to_string(a.status) + " " +
                              a.error);
                if (attempt < retry_.max_attempts) {
                    retry_.sleep(delay);
                    delay = std::chrono::milliseconds(
                        static_cast<long long>(static_cast<double>(delay.count()) * retry_.factor));
                }
                break;
        }
    }
    throw TransportError("gave up after " + std::to_string(retry_.max_attempts) + " attempts", log);
}

std::vector<BatchItem> Client::complete_batch(const std::vector<Request>& requests, std::size_t limit) {
    if (limit < 1) throw std::invalid_argument("complete_batch: limit must be >= 1");
    std::vector<BatchItem> results(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) {
            try {
                results[i].record = complete(requests[i].prompt, requests[i].params);
            } catch (const std::exception& ex) {
                results[i].error = ex.what();
            }
        }
    };
    const std::size_t threads = std::min(limit, requests.size());
    if (threads <= 1) {
        worker();
        return results;
    }
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    return results;
}

// ---------------------------------------------------------------------------
// OpenAIBackend

OpenAIBackend::OpenAIBackend(EndpointConfig config) : config_(std::move(config)) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.url, m, kUrl)) throw std::invalid_argument("bad endpoint url \"" + config_.url + "\"");
    scheme_host_port_ = m[1].str();
    std::string prefix = m[2].matched ? m[2].str() : std::string{};
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    if (!prefix.ends_with("/v1")) prefix += "/v1";
    path_ = prefix + (config_.api == ApiShape::chat ? "/chat/completions" : "/completions");
}

nlohmann::json OpenAIBackend::request_body(const std::string& prompt, const GenerationParams& params) const {
    nlohmann::json body{{"model", params.model},
                        {"temperature", params.temperature},
                        {"top_p", params.top_p},
                        {"max_tokens", params.max_tokens}};
    if (!params.stop.empty()) body["stop"] = params.stop;
    if (config_.api == ApiShape::chat) {
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    } else {
        body["prompt"] = prompt;
    }
    return body;
}

Attempt OpenAIBackend::attempt(const std::string& prompt, const GenerationParams& params) {
    httplib::Client cli(scheme_host_port_);
    cli.set_connection_timeout(config_.timeout);
    cli.set_read_timeout(config_.timeout);
    cli.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    Attempt a;
    auto res = cli.Post(path_, headers, request_body(prompt, params).dump(), "application/json");
    if (!res) {
        a.kind = Attempt::Kind::retryable;
        a.status = 0;
        a.error = httplib::to_string(res.error());
        return a;
    }
    a.status = res->status;
    a.body = res->body;
    if (res->status == 429 || res->status >= 500) {
        a.kind = Attempt::Kind::retryable;
        a.error = res->body.substr(0, 200);
        return a;
    }
    if (res->status != 200) {
        a.kind = Attempt::Kind::fatal;
        a.error = res->body.substr(0, 200);
        return a;
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        const auto& choice = j.at("choices").at(0);
        a.completion = config_.api == ApiShape::chat ? choice.at("message").at("content").get<std::string>()
                                                     : choice.at("text").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            a.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
            a.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
        }
        a.kind = Attempt::Kind::ok;
    } catch (const std::exception& ex) {
        a.kind = Attempt::Kind::malformed;
        a.error = ex.what();
    }
    return a;
}

// ---------------------------------------------------------------------------
// MockBackend

namespace {

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

}  // namespace

void MockBackend::add_exact(std::string prompt, std::string completion, std::optional<int> sample_index) {
    exact_[prompt].push_back(rules_.size());
    Rule r;
    r.matches = [p = std::move(prompt)](const std::string& s) { return s == p; };
    r.sample_index = sample_index;
    r.completion = std::move(completion);
    rules_.push_back(std::move(r));
}

MockBackend MockBackend::from_json(const nlohmann::json& script) {
    MockBackend mock;
    if (!script.is_object()) throw std::invalid_argument("mock script must be a JSON object");
    for (const auto& [key, _] : script.items()) {
        if (key != "rules" && key != "default") throw std::invalid_argument("mock script: unknown key \"" + key + "\"");
    }
    if (script.contains("default")) mock.default_ = script.at("default").get<std::string>();
    for (const auto& r : script.value("rules", nlohmann::json::array())) {
        static const std::set<std::string> kRuleKeys{"prompt", "contains", "regex", "sample_index",
                                                     "model",  "completion", "status"};
        for (const auto& [key, _] : r.items()) {
            if (!kRuleKeys.contains(key)) throw std::invalid_argument("mock script: unknown rule key \"" + key + "\"");
        }
        Rule rule;
        rule.completion = r.value("completion", std::string{});
        rule.status = r.value("status", 200);
        if (r.contains("sample_index")) rule.sample_index = r.at("sample_index").get<int>();
        if (r.contains("model")) rule.model = r.at("model").get<std::string>();
        if (r.contains("prompt")) {
            auto p = r.at("prompt").get<std::string>();
            mock.exact_[p].push_back(mock.rules_.size());
            rule.matches = [p](const std::string& s) { return s == p; };
        } else if (r.contains("contains")) {
            auto needle = r.at("contains").get<std::string>();
            rule.matches = [needle](const std::string& s) { return s.find(needle) != std::string::npos; };
        } else if (r.contains("regex")) {
            auto re = std::make_shared<std::regex>(r.at("regex").get<std::string>());
            rule.matches = [re](const std::string& s) { return std::regex_search(s, *re); };
        } else {
            rule.matches = [](const std::string&) { return true; };
        }
        if (!r.contains("prompt")) mock.pattern_rules_.push_back(mock.rules_.size());
        mock.rules_.push_back(std::move(rule));
    }
    return mock;
}

MockBackend MockBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open mock script " + path.string());
    return from_json(nlohmann::json::parse(in));
}

Attempt MockBackend::attempt(const std::string& prompt, const GenerationParams& params) {
    if (hook_) hook_(prompt, params);
    auto applies = [&](const Rule& r) {
        return (!r.sample_index || *r.sample_index == params.sample_index) && (!r.model || *r.model == params.model);
    };
    std::optional<std::size_t> best;
    if (auto it = exact_.find(prompt); it != exact_.end()) {
        for (auto i : it->second) {
            if (applies(rules_[i])) {
                best = i;
                break;
            }
        }
    }
    for (auto i : pattern_rules_) {
        if (best && i > *best) break;
        const Rule& r = rules_[i];
        if (applies(r) && r.matches(prompt)) {
            best = i;
            break;
        }
    }

    Attempt a;
    if (!best) {
        a.completion = default_.value_or(std::string(kMockUnmatched));
        a.unmatched = true;
    } else {
        const Rule& r = rules_[*best];
        a.status = r.status;
        if (r.status != 200) {
            a.kind = (r.status == 429 || r.status >= 500) ? Attempt::Kind::retryable : Attempt::Kind::fatal;
            a.error = "scripted failure";
            return a;
        }
        a.completion = r.completion;
    }
    a.usage = {word_count(prompt), word_count(a.completion)};
    return a;
}

}  // namespace dcot::inference
