#include "survey/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

#include "survey/errors.hpp"
#include "survey/util.hpp"

namespace survey::llm {

using nlohmann::json;

JudgeField JudgeField::boolean(std::string name) {
    JudgeField f;
    f.name = std::move(name);
    f.type = Type::boolean;
    return f;
}

JudgeField JudgeField::number(std::string name, double lo, double hi) {
    JudgeField f;
    f.name = std::move(name);
    f.type = Type::number;
    f.min_value = lo;
    f.max_value = hi;
    return f;
}

JudgeField JudgeField::text_enum(std::string name, std::vector<std::string> allowed) {
    JudgeField f;
    f.name = std::move(name);
    f.type = Type::text_enum;
    f.allowed = std::move(allowed);
    return f;
}

// ---------------------------------------------------------------------------
// Judgment parsing
// ---------------------------------------------------------------------------

namespace {

std::optional<json> last_json_object(const std::string& text) {
    std::optional<json> found;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        int depth = 0;
        std::size_t j = i;
        for (; j < text.size(); ++j) {
            if (text[j] == '{') ++depth;
            if (text[j] == '}') {
                --depth;
                if (depth == 0) break;
            }
        }
        if (j >= text.size()) break;
        json parsed = json::parse(text.substr(i, j - i + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            found = parsed;
            i = j;
        }
    }
    return found;
}

std::optional<std::string> last_field_fragment(const std::string& text, const std::string& name) {
    std::regex re(name + R"lit(\s*"?\s*[:=]\s*("([^"]*)"|[-+A-Za-z0-9_.]+))lit",
                  std::regex::icase);
    std::optional<std::string> last;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
         it != std::sregex_iterator(); ++it) {
        last = (*it)[2].matched ? (*it)[2].str() : (*it)[1].str();
    }
    return last;
}

std::optional<bool> as_bool(const std::string& raw) {
    std::string v = util::to_lower(util::trim(raw));
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    return std::nullopt;
}

std::optional<double> as_number(const std::string& raw) {
    try {
        std::size_t pos = 0;
        double d = std::stod(util::trim(raw), &pos);
        if (pos == util::trim(raw).size() && std::isfinite(d)) return d;
    } catch (...) {
    }
    return std::nullopt;
}

}  // namespace

json parse_judgment(const std::string& response, const JudgeSchema& schema) {
    if (schema.empty()) throw ArgumentError("empty judge schema");
    std::optional<json> obj = last_json_object(response);

    json out = json::object();
    for (const auto& field : schema) {
        std::optional<std::string> raw;
        if (obj && obj->contains(field.name)) {
            const json& v = (*obj)[field.name];
            if (v.is_string()) {
                raw = v.get<std::string>();
            } else {
                raw = v.dump();
            }
        }
        if (!raw) raw = last_field_fragment(response, field.name);

        switch (field.type) {
            case JudgeField::Type::boolean: {
                std::optional<bool> b = raw ? as_bool(*raw) : std::nullopt;
                if (!b) throw JudgmentError("missing or invalid boolean field: " + field.name);
                out[field.name] = *b;
                break;
            }
            case JudgeField::Type::number: {
                std::optional<double> d = raw ? as_number(*raw) : std::nullopt;
                if (!d) throw JudgmentError("missing or invalid numeric field: " + field.name);
                if (*d < field.min_value || *d > field.max_value)
                    throw JudgmentError("field " + field.name + " out of range [" +
                                        std::to_string(field.min_value) + "," +
                                        std::to_string(field.max_value) +
                                        "]: " + std::to_string(*d));
                out[field.name] = *d;
                break;
            }
            case JudgeField::Type::text_enum: {
                std::optional<std::string> match;
                if (raw) {
                    std::string v = util::to_lower(util::trim(*raw));
                    for (const auto& a : field.allowed) {
                        if (v == util::to_lower(a)) match = a;
                    }
                }
                if (!match) {
                    // bare responses: exactly one allowed value mentioned anywhere
                    std::vector<std::string> hits;
                    std::string lower = util::to_lower(response);
                    for (const auto& a : field.allowed) {
                        if (util::contains(lower, util::to_lower(a))) hits.push_back(a);
                    }
                    if (hits.size() == 1) match = hits[0];
                }
                if (!match) throw JudgmentError("missing or invalid enum field: " + field.name);
                out[field.name] = *match;
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// MockScript / MockBackend
// ---------------------------------------------------------------------------

MockScript MockScript::from_file(const std::string& path) {
    return from_json(json::parse(util::read_file(path)));
}

MockScript MockScript::from_json(const json& j) {
    MockScript s;
    s.seed = j.value("seed", s.seed);
    s.embed_dim = j.value("embed_dim", s.embed_dim);
    if (j.contains("default")) s.default_response = j.at("default").get<std::string>();
    for (const auto& r : j.value("rules", json::array())) {
        MockRule rule;
        if (r.at("match").is_string()) {
            rule.match.push_back(r.at("match").get<std::string>());
        } else {
            rule.match = r.at("match").get<std::vector<std::string>>();
        }
        rule.response = r.value("response", "");
        rule.error = r.value("error", false);
        rule.times = r.value("times", 0);
        s.rules.push_back(std::move(rule));
    }
    return s;
}

json MockScript::to_json() const {
    json j{{"seed", seed}, {"embed_dim", embed_dim}};
    if (default_response) j["default"] = *default_response;
    j["rules"] = json::array();
    for (const auto& r : rules) {
        json jr{{"match", r.match}, {"response", r.response}};
        if (r.error) jr["error"] = true;
        if (r.times) jr["times"] = r.times;
        j["rules"].push_back(jr);
    }
    return j;
}

MockBackend::MockBackend(MockScript script)
    : script_(std::move(script)), used_(script_.rules.size(), 0) {}

std::string MockBackend::complete(const ModelRequest& req) {
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const MockRule& rule = script_.rules[i];
        if (rule.times > 0 && used_[i] >= rule.times) continue;
        bool all = true;
        for (const auto& needle : rule.match) {
            if (!util::contains(req.payload, needle)) {
                all = false;
                break;
            }
        }
        if (!all) continue;
        ++used_[i];
        if (rule.error) throw TransportError("scripted backend failure");
        return rule.response;
    }
    if (script_.default_response) return *script_.default_response;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "unscripted:%08llx",
                  static_cast<unsigned long long>(util::fnv1a64(req.payload) & 0xffffffffull));
    return buf;
}

Vec MockBackend::hash_embedding(const std::string& text, std::uint64_t seed, std::size_t dim) {
    std::uint64_t state = util::fnv1a64(text) ^ (seed * 0x9e3779b97f4a7c15ull);
    Vec v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        std::uint64_t u = util::splitmix64(state);
        v[i] = static_cast<double>(u >> 11) * (1.0 / 4503599627370496.0) - 1.0;
    }
    if (!kernels::normalize(v.data(), v.size())) v[0] = 1.0;
    return v;
}

std::vector<Vec> MockBackend::embed(const std::vector<std::string>& texts,
                                    const std::string& model_id) {
    (void)model_id;
    std::vector<Vec> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embedding(t, script_.seed, script_.embed_dim));
    return out;
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(std::string endpoint, std::string api_key, std::size_t embed_dim)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), embed_dim_(embed_dim) {}

std::string HttpBackend::complete(const ModelRequest& req) {
    httplib::Client cli(endpoint_);
    cli.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    json body{{"model", req.params.model_id},
              {"prompt", req.payload},
              {"temperature", req.params.temperature},
              {"max_tokens", req.params.max_tokens},
              {"kind", req.kind == RequestKind::judge ? "judge" : "complete"}};
    auto res = cli.Post("/v1/complete", headers, body.dump(), "application/json");
    if (!res) throw TransportError("backend unreachable: " + endpoint_);
    if (res->status != 200)
        throw TransportError("backend status " + std::to_string(res->status));
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("text"))
        throw TransportError("backend returned malformed completion body");
    return j.at("text").get<std::string>();
}

std::vector<Vec> HttpBackend::embed(const std::vector<std::string>& texts,
                                    const std::string& model_id) {
    httplib::Client cli(endpoint_);
    cli.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    json body{{"model", model_id}, {"inputs", texts}};
    auto res = cli.Post("/v1/embed", headers, body.dump(), "application/json");
    if (!res) throw TransportError("backend unreachable: " + endpoint_);
    if (res->status != 200)
        throw TransportError("backend status " + std::to_string(res->status));
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("vectors"))
        throw TransportError("backend returned malformed embedding body");
    auto vectors = j.at("vectors").get<std::vector<Vec>>();
    if (vectors.size() != texts.size())
        throw TransportError("backend returned wrong embedding count");
    return vectors;
}

// ---------------------------------------------------------------------------
// GatewayConfig
// ---------------------------------------------------------------------------

GatewayConfig GatewayConfig::from_json(const json& j) {
    GatewayConfig c;
    c.backend = j.value("backend", c.backend);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.embed_model = j.value("embed_model", c.embed_model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.mock_script = j.value("mock_script", c.mock_script);
    c.seed = j.value("seed", c.seed);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.temperature_complete = j.value("temperature_complete", c.temperature_complete);
    c.temperature_judge = j.value("temperature_judge", c.temperature_judge);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.retry_backoff_ms = j.value("retry_backoff_ms", c.retry_backoff_ms);
    c.cache = j.value("cache", c.cache);
    return c;
}

json GatewayConfig::to_json() const {
    return json{{"backend", backend},
                {"endpoint", endpoint},
                {"model", model},
                {"embed_model", embed_model},
                {"api_key_env", api_key_env},
                {"mock_script", mock_script},
                {"seed", seed},
                {"embed_dim", embed_dim},
                {"temperature_complete", temperature_complete},
                {"temperature_judge", temperature_judge},
                {"max_tokens", max_tokens},
                {"max_retries", max_retries},
                {"retry_backoff_ms", retry_backoff_ms},
                {"cache", cache}};
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig cfg)
    : backend_(std::move(backend)), cfg_(std::move(cfg)) {}

std::shared_ptr<Gateway> Gateway::create(const GatewayConfig& cfg) {
    if (cfg.backend == "mock") {
        MockScript script;
        script.seed = cfg.seed;
        script.embed_dim = cfg.embed_dim;
        if (!cfg.mock_script.empty()) {
            json j = json::parse(util::read_file(cfg.mock_script));
            MockScript parsed = MockScript::from_json(j);
            if (j.contains("seed")) script.seed = parsed.seed;
            if (j.contains("embed_dim")) script.embed_dim = parsed.embed_dim;
            script.default_response = parsed.default_response;
            script.rules = std::move(parsed.rules);
        }
        return std::make_shared<Gateway>(std::make_shared<MockBackend>(std::move(script)), cfg);
    }
    if (cfg.backend == "http") {
        std::string key;
        if (!cfg.api_key_env.empty()) {
            if (const char* v = std::getenv(cfg.api_key_env.c_str())) key = v;
        }
        return std::make_shared<Gateway>(
            std::make_shared<HttpBackend>(cfg.endpoint, key, cfg.embed_dim), cfg);
    }
    throw ArgumentError("unknown gateway backend: " + cfg.backend);
}

std::shared_ptr<Gateway> Gateway::with_mock(MockScript script, GatewayConfig cfg) {
    cfg.backend = "mock";
    cfg.seed = script.seed;
    cfg.embed_dim = script.embed_dim;
    return std::make_shared<Gateway>(std::make_shared<MockBackend>(std::move(script)), cfg);
}

std::string Gateway::call_with_retries(const ModelRequest& req) {
    int attempts = std::max(1, cfg_.max_retries);
    for (int attempt = 0;; ++attempt) {
        try {
            ++backend_calls_;
            return backend_->complete(req);
        } catch (const TransportError&) {
            if (attempt + 1 >= attempts) throw;
            if (cfg_.retry_backoff_ms > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(cfg_.retry_backoff_ms << attempt));
            }
        }
    }
}

std::string Gateway::complete_cached(const ModelRequest& req) {
    if (util::trim(req.payload).empty()) throw ArgumentError("empty request payload");
    if (req.params.temperature < 0.0) throw ArgumentError("temperature must be >= 0");
    if (!cfg_.cache) return call_with_retries(req);

    std::string key = req.params.model_id + '\x1f' + std::to_string(req.params.temperature) +
                      '\x1f' + std::to_string(req.params.max_tokens) + '\x1f' + req.payload;
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
        auto it = complete_cache_.find(key);
        if (it != complete_cache_.end()) return it->second;
        if (!in_flight_.count(key)) {
            in_flight_.insert(key);
            break;
        }
        cv_.wait(lock);
    }
    lock.unlock();

    std::string response;
    try {
        response = call_with_retries(req);
    } catch (...) {
        lock.lock();
        in_flight_.erase(key);
        cv_.notify_all();
        throw;
    }

    lock.lock();
    complete_cache_[key] = response;
    in_flight_.erase(key);
    cv_.notify_all();
    return response;
}

std::string Gateway::complete(const std::string& payload) {
    ModelRequest req;
    req.kind = RequestKind::complete;
    req.payload = payload;
    req.params.temperature = cfg_.temperature_complete;
    req.params.max_tokens = cfg_.max_tokens;
    req.params.model_id = cfg_.model;
    return complete(req);
}

std::string Gateway::complete(const ModelRequest& req) {
    if (req.kind != RequestKind::complete)
        throw ArgumentError("complete() requires kind=complete");
    return complete_cached(req);
}

nlohmann::json Gateway::judge(const std::string& payload, const JudgeSchema& schema) {
    ModelRequest req;
    req.kind = RequestKind::judge;
    req.payload = payload;
    req.params.temperature = cfg_.temperature_judge;
    req.params.max_tokens = cfg_.max_tokens;
    req.params.model_id = cfg_.model;
    return judge(req, schema);
}

nlohmann::json Gateway::judge(const ModelRequest& req, const JudgeSchema& schema) {
    if (req.kind != RequestKind::judge) throw ArgumentError("judge() requires kind=judge");
    if (schema.empty()) throw ArgumentError("empty judge schema");

    std::string response = complete_cached(req);
    try {
        return parse_judgment(response, schema);
    } catch (const JudgmentError&) {
    }

    // one reprompt with a format reminder
    std::vector<std::string> fields;
    for (const auto& f : schema) fields.push_back("\"" + f.name + "\": ...");
    ModelRequest retry = req;
    retry.payload += "\n\nRespond with exactly one JSON object of the form {" +
                     util::join(fields, ", ") + "}.";
    response = complete_cached(retry);
    return parse_judgment(response, schema);
}

std::vector<Vec> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ArgumentError("embed requires at least one text");
    for (const auto& t : texts) {
        if (t.empty()) throw ArgumentError("embed input texts must be non-empty");
    }

    std::vector<std::string> missing;
    {
        std::lock_guard<std::mutex> lock(mu_);
        std::unordered_set<std::string> pending;
        for (const auto& t : texts) {
            std::string key = cfg_.embed_model + '\x1f' + t;
            if (!embed_cache_.count(key) && !pending.count(t)) {
                pending.insert(t);
                missing.push_back(t);
            }
        }
    }

    if (!missing.empty()) {
        int attempts = std::max(1, cfg_.max_retries);
        std::vector<Vec> fresh;
        for (int attempt = 0;; ++attempt) {
            try {
                ++backend_calls_;
                fresh = backend_->embed(missing, cfg_.embed_model);
                break;
            } catch (const TransportError&) {
                if (attempt + 1 >= attempts) {
                    std::vector<std::size_t> failed;
                    std::unordered_set<std::string> missing_set(missing.begin(), missing.end());
                    for (std::size_t i = 0; i < texts.size(); ++i) {
                        if (missing_set.count(texts[i])) failed.push_back(i);
                    }
                    throw TransportError("embedding backend failed for " +
                                             std::to_string(failed.size()) + " inputs",
                                         failed);
                }
                if (cfg_.retry_backoff_ms > 0) {
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(cfg_.retry_backoff_ms << attempt));
                }
            }
        }
        if (fresh.size() != missing.size())
            throw TransportError("embedding backend returned wrong count");
        std::size_t dim = fresh.empty() ? 0 : fresh[0].size();
        for (const auto& v : fresh) {
            if (v.size() != dim) throw TransportError("inconsistent embedding dims");
            for (double x : v) {
                if (!std::isfinite(x)) throw TransportError("non-finite embedding value");
            }
        }
        std::lock_guard<std::mutex> lock(mu_);
        if (dim > 0) {
            if (embed_dim_seen_ == 0) embed_dim_seen_ = dim;
            if (dim != embed_dim_seen_)
                throw TransportError("embedder changed dims: " + std::to_string(dim) + " vs " +
                                     std::to_string(embed_dim_seen_));
        }
        for (std::size_t i = 0; i < missing.size(); ++i) {
            embed_cache_[cfg_.embed_model + '\x1f' + missing[i]] = fresh[i];
        }
    }

    std::vector<Vec> out;
    out.reserve(texts.size());
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& t : texts) out.push_back(embed_cache_.at(cfg_.embed_model + '\x1f' + t));
    return out;
}

Vec Gateway::embed_one(const std::string& text) {
    return embed({text})[0];
}

}  // namespace survey::llm
