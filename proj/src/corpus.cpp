#include "survey/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "survey/errors.hpp"
#include "survey/util.hpp"

namespace survey::corpus {

using nlohmann::json;

std::string to_string(Source s) {
    return s == Source::offline ? "offline" : "online";
}

Source source_from_string(const std::string& s) {
    if (s == "offline") return Source::offline;
    if (s == "online") return Source::online;
    throw ParseError("unknown source: " + s);
}

void to_json(json& j, const DocMeta& d) {
    j = json{{"doc_id", d.doc_id},
             {"title", d.title},
             {"abstract", d.abstract_text},
             {"source", to_string(d.source)}};
    if (d.full_text) j["full_text"] = *d.full_text;
    if (d.published) j["published"] = *d.published;
    if (d.url) j["url"] = *d.url;
}

void from_json(const json& j, DocMeta& d) {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.title = j.at("title").get<std::string>();
    d.abstract_text = j.at("abstract").get<std::string>();
    d.source = source_from_string(j.value("source", "offline"));
    if (j.contains("full_text")) d.full_text = j.at("full_text").get<std::string>();
    if (j.contains("published")) d.published = j.at("published").get<std::string>();
    if (j.contains("url")) d.url = j.at("url").get<std::string>();
}

FixtureOnlineSource FixtureOnlineSource::from_file(const std::string& path) {
    return from_json(json::parse(util::read_file(path)));
}

FixtureOnlineSource FixtureOnlineSource::from_json(const json& j) {
    FixtureOnlineSource src;
    for (auto it = j.begin(); it != j.end(); ++it) {
        src.fixtures_[util::to_lower(it.key())] = it.value().get<std::vector<DocMeta>>();
    }
    return src;
}

std::vector<DocMeta> FixtureOnlineSource::fetch(const std::string& keyword, std::size_t limit) {
    auto it = fixtures_.find(util::to_lower(keyword));
    if (it == fixtures_.end()) return {};
    auto docs = it->second;
    if (docs.size() > limit) docs.resize(limit);
    return docs;
}

CorpusStats Corpus::ingest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("malformed line " + std::to_string(lineno) + ": " + e.what());
        }
        DocMeta doc;
        try {
            doc = j.get<DocMeta>();
        } catch (const json::exception& e) {
            throw ParseError("malformed line " + std::to_string(lineno) + ": " + e.what());
        }
        if (doc.abstract_text.empty())
            throw ParseError("malformed line " + std::to_string(lineno) + ": empty abstract");
        if (by_id_.count(doc.doc_id))
            throw ParseError("duplicate id at line " + std::to_string(lineno) + ": " + doc.doc_id);
        add(std::move(doc));
    }
    return stats();
}

void Corpus::add(DocMeta doc) {
    if (by_id_.count(doc.doc_id)) throw ArgumentError("duplicate doc_id: " + doc.doc_id);
    docs_.push_back(std::move(doc));
    std::size_t idx = docs_.size() - 1;
    by_id_[docs_[idx].doc_id] = idx;
    std::string norm = util::normalized_title(docs_[idx].title);
    if (!by_norm_title_.count(norm)) by_norm_title_[norm] = idx;
    index_doc(idx);
}

void Corpus::index_doc(std::size_t idx) {
    const DocMeta& d = docs_[idx];
    for (const auto& tok : util::tokenize(d.title + " " + d.abstract_text)) {
        index_[tok][idx] += 1;
    }
}

const DocMeta* Corpus::find(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::vector<DocMeta> Corpus::search_offline(const std::string& keyword, std::size_t limit) const {
    if (util::trim(keyword).empty()) throw ArgumentError("empty search keyword");
    if (limit < 1) throw ArgumentError("search limit must be >= 1");
    auto tokens = util::tokenize(keyword);
    if (tokens.empty()) throw ArgumentError("keyword has no searchable tokens");

    // intersect postings over keyword tokens; match count = total occurrences
    std::map<std::size_t, std::size_t> counts;
    bool first = true;
    for (const auto& tok : tokens) {
        auto it = index_.find(tok);
        if (it == index_.end()) return {};
        if (first) {
            counts = it->second;
            first = false;
        } else {
            std::map<std::size_t, std::size_t> merged;
            for (const auto& [idx, c] : it->second) {
                auto prev = counts.find(idx);
                if (prev != counts.end()) merged[idx] = prev->second + c;
            }
            counts = std::move(merged);
        }
        if (counts.empty()) return {};
    }

    std::vector<std::pair<std::size_t, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return docs_[a.first].doc_id < docs_[b.first].doc_id;
    });
    if (ranked.size() > limit) ranked.resize(limit);

    std::vector<DocMeta> out;
    out.reserve(ranked.size());
    for (const auto& [idx, cnt] : ranked) out.push_back(docs_[idx]);
    return out;
}

std::vector<DocMeta> Corpus::fetch_online(const std::string& keyword, std::size_t limit) {
    if (!online_) return {};
    std::vector<DocMeta> fetched;
    bool ok = false;
    for (int attempt = 0; attempt < retry_attempts_; ++attempt) {
        try {
            fetched = online_->fetch(keyword, limit);
            ok = true;
            break;
        } catch (const TransportError&) {
            if (attempt + 1 < retry_attempts_ && retry_backoff_ms_ > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(retry_backoff_ms_ << attempt));
            }
        }
    }
    if (!ok) {
        warnings_.push_back("online source unreachable for '" + keyword +
                            "', degraded to offline-only");
        return {};
    }

    std::vector<DocMeta> merged;
    for (auto& doc : fetched) {
        doc.source = Source::online;
        std::string norm = util::normalized_title(doc.title);
        auto it = by_norm_title_.find(norm);
        if (it != by_norm_title_.end()) {
            merged.push_back(docs_[it->second]);  // already known under this title
            continue;
        }
        if (by_id_.count(doc.doc_id)) {
            warnings_.push_back("online doc id collides with existing id: " + doc.doc_id);
            continue;
        }
        add(doc);
        merged.push_back(doc);
    }
    return merged;
}

}  // namespace survey::corpus
