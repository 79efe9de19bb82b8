#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace survey::corpus {

enum class Source { offline, online };

std::string to_string(Source s);
Source source_from_string(const std::string& s);

struct DocMeta {
    std::string doc_id;
    std::string title;
    std::string abstract_text;
    std::optional<std::string> full_text;
    Source source = Source::offline;
    std::optional<std::string> published;  // ISO-8601 date
    std::optional<std::string> url;

    // Text available for attribute extraction: full text when present,
    // otherwise the abstract.
    const std::string& body() const { return full_text ? *full_text : abstract_text; }
};

void to_json(nlohmann::json& j, const DocMeta& d);
void from_json(const nlohmann::json& j, DocMeta& d);

struct CorpusStats {
    std::size_t docs = 0;
    std::size_t index_size = 0;  // distinct tokens in the keyword index
};

// Client for the online reference source. The default implementation is a
// fixture-backed stub; an HTTP client is a drop-in replacement.
class OnlineSource {
  public:
    virtual ~OnlineSource() = default;
    virtual std::vector<DocMeta> fetch(const std::string& keyword, std::size_t limit) = 0;
};

// Stub backed by a JSON file mapping keyword -> list of DocMeta.
class FixtureOnlineSource : public OnlineSource {
  public:
    static FixtureOnlineSource from_file(const std::string& path);
    static FixtureOnlineSource from_json(const nlohmann::json& j);

    std::vector<DocMeta> fetch(const std::string& keyword, std::size_t limit) override;

  private:
    std::map<std::string, std::vector<DocMeta>> fixtures_;
};

class Corpus {
  public:
    // Loads a JSON-lines file, one DocMeta per line. Rejects malformed lines
    // and duplicate doc_ids, naming the line number.
    CorpusStats ingest(const std::string& path);

    // Adds a document directly (tests, fixtures). Throws on duplicate id.
    void add(DocMeta doc);

    // Token match over title+abstract: a doc matches when every keyword token
    // occurs at least once. Ranked by (total match count desc, doc_id asc).
    std::vector<DocMeta> search_offline(const std::string& keyword, std::size_t limit) const;

    // Fetches from the online source with retries, stamps source=online and
    // merges into the corpus, deduplicating by normalized title. Degrades to
    // an empty result with a warning after repeated transport failures.
    std::vector<DocMeta> fetch_online(const std::string& keyword, std::size_t limit);

    void set_online_source(std::shared_ptr<OnlineSource> src) { online_ = std::move(src); }
    void set_retry_policy(int attempts, int backoff_ms) {
        retry_attempts_ = attempts;
        retry_backoff_ms_ = backoff_ms;
    }

    const std::vector<DocMeta>& docs() const { return docs_; }
    const DocMeta* find(const std::string& doc_id) const;
    std::size_t size() const { return docs_.size(); }
    CorpusStats stats() const { return {docs_.size(), index_.size()}; }
    const std::vector<std::string>& warnings() const { return warnings_; }

  private:
    void index_doc(std::size_t idx);

    std::vector<DocMeta> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> by_norm_title_;
    // token -> (doc index -> occurrence count); rebuilt deterministically
    std::unordered_map<std::string, std::map<std::size_t, std::size_t>> index_;
    std::shared_ptr<OnlineSource> online_;
    std::vector<std::string> warnings_;
    int retry_attempts_ = 3;
    int retry_backoff_ms_ = 50;
};

}  // namespace survey::corpus
