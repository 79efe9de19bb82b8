#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "survey/kernels.hpp"

namespace survey::llm {

using Vec = kernels::Vec;

enum class RequestKind { complete, judge, embed };

struct ModelParams {
    double temperature = 0.0;
    int max_tokens = 2048;
    std::string model_id;
};

struct ModelRequest {
    RequestKind kind = RequestKind::complete;
    std::string payload;
    ModelParams params;
};

// Expected fields of a structured judgment.
struct JudgeField {
    enum class Type { boolean, number, text_enum };
    std::string name;
    Type type = Type::boolean;
    double min_value = 0.0;
    double max_value = 0.0;
    std::vector<std::string> allowed;

    static JudgeField boolean(std::string name);
    static JudgeField number(std::string name, double lo, double hi);
    static JudgeField text_enum(std::string name, std::vector<std::string> allowed);
};
using JudgeSchema = std::vector<JudgeField>;

// Lenient extraction of schema fields from a model response: full-JSON reply,
// last embedded JSON object, or per-field "name: value" fragments (last one
// wins). Throws JudgmentError when a field is missing or out of range.
nlohmann::json parse_judgment(const std::string& response, const JudgeSchema& schema);

struct MockRule {
    std::vector<std::string> match;  // all substrings must occur in the payload
    std::string response;
    bool error = false;  // simulate a transport failure instead of responding
    int times = 0;       // consume after this many matches; 0 = unlimited
};

struct MockScript {
    std::uint64_t seed = 42;
    std::size_t embed_dim = 32;
    std::optional<std::string> default_response;
    std::vector<MockRule> rules;

    static MockScript from_file(const std::string& path);
    static MockScript from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual std::string complete(const ModelRequest& req) = 0;
    virtual std::vector<Vec> embed(const std::vector<std::string>& texts,
                                   const std::string& model_id) = 0;
};

// Deterministic scripted backend. Completions follow the script rules in
// order (first match wins); embeddings are seeded hashes of the text mapped
// onto a fixed-dim unit vector.
class MockBackend : public Backend {
  public:
    explicit MockBackend(MockScript script);

    std::string complete(const ModelRequest& req) override;
    std::vector<Vec> embed(const std::vector<std::string>& texts,
                           const std::string& model_id) override;

    static Vec hash_embedding(const std::string& text, std::uint64_t seed, std::size_t dim);

  private:
    MockScript script_;
    std::vector<int> used_;
    std::mutex mu_;
};

// JSON-over-HTTP backend: POST {endpoint}/v1/complete and /v1/embed.
class HttpBackend : public Backend {
  public:
    HttpBackend(std::string endpoint, std::string api_key, std::size_t embed_dim);

    std::string complete(const ModelRequest& req) override;
    std::vector<Vec> embed(const std::vector<std::string>& texts,
                           const std::string& model_id) override;

  private:
    std::string endpoint_;
    std::string api_key_;
    std::size_t embed_dim_;
};

struct GatewayConfig {
    std::string backend = "mock";  // mock | http
    std::string endpoint;
    std::string model = "mock-model";
    std::string embed_model = "mock-embed";
    std::string api_key_env;  // environment variable holding the API key
    std::string mock_script;  // path, used when backend == mock
    std::uint64_t seed = 42;
    std::size_t embed_dim = 32;
    double temperature_complete = 0.7;
    double temperature_judge = 0.0;
    int max_tokens = 2048;
    int max_retries = 3;
    int retry_backoff_ms = 25;
    bool cache = true;

    static GatewayConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Single choke point for completion, judgment and embedding requests.
// Responses are cached; identical in-flight requests coalesce to one
// backend call. Shareable across threads.
class Gateway {
  public:
    Gateway(std::shared_ptr<Backend> backend, GatewayConfig cfg);

    static std::shared_ptr<Gateway> create(const GatewayConfig& cfg);
    static std::shared_ptr<Gateway> with_mock(MockScript script, GatewayConfig cfg = {});

    std::vector<Vec> embed(const std::vector<std::string>& texts);
    Vec embed_one(const std::string& text);

    std::string complete(const std::string& payload);
    std::string complete(const ModelRequest& req);

    nlohmann::json judge(const std::string& payload, const JudgeSchema& schema);
    nlohmann::json judge(const ModelRequest& req, const JudgeSchema& schema);

    std::size_t backend_calls() const { return backend_calls_.load(); }
    const GatewayConfig& config() const { return cfg_; }

  private:
    std::string complete_cached(const ModelRequest& req);
    std::string call_with_retries(const ModelRequest& req);

    std::shared_ptr<Backend> backend_;
    GatewayConfig cfg_;
    std::atomic<std::size_t> backend_calls_{0};

    std::mutex mu_;
    std::condition_variable cv_;
    std::unordered_map<std::string, std::string> complete_cache_;
    std::unordered_map<std::string, Vec> embed_cache_;
    std::unordered_set<std::string> in_flight_;
    std::size_t embed_dim_seen_ = 0;
};

}  // namespace survey::llm
