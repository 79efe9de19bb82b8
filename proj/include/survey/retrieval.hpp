#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "survey/corpus.hpp"
#include "survey/gateway.hpp"
#include "survey/kernels.hpp"

namespace survey::retrieval {

using Vec = kernels::Vec;

// Cosine of the angle between u and v. Errors on dim mismatch or zero vector.
double cos_sim(const Vec& u, const Vec& v);

// The evolving keyword pool, seeded from the initial keyword set. The topic
// participates in candidate scoring with topic_weight in the average.
struct KeywordPool {
    std::string topic;
    std::vector<std::string> keywords;
    double topic_weight = 2.0;

    static KeywordPool init(std::string topic, const std::vector<std::string>& k0);
    bool contains(const std::string& keyword) const;  // case-insensitive
    bool add(const std::string& keyword);             // false on duplicate
};

void to_json(nlohmann::json& j, const KeywordPool& p);
void from_json(const nlohmann::json& j, KeywordPool& p);

struct Cluster {
    std::vector<std::string> member_ids;
    Vec centroid;  // arithmetic mean of member vectors
};

struct ClusterOptions {
    std::uint64_t seed = 42;
    std::size_t max_iterations = 50;
};

// Seeded spherical k-means (cosine metric, farthest-point init). Clusters
// partition the input; same seed gives the same partition.
std::vector<Cluster> cluster(const std::vector<std::pair<std::string, Vec>>& docs, std::size_t k,
                             const ClusterOptions& opts = {});

// 1-3 lowercased keywords summarizing a cluster. Falls back to the top-TF
// tokens of the cluster abstracts when the model returns nothing.
std::vector<std::string> extract_cluster_keywords(const Cluster& cl,
                                                  const std::vector<std::string>& abstracts,
                                                  llm::Gateway& gw);

struct CandidateScore {
    std::string candidate;
    double avg_sim = 0.0;
    double max_sim = 0.0;
    std::size_t r1 = 0;  // 1-based descending rank of avg_sim
    std::size_t r2 = 0;  // 1-based descending rank of -max_sim
    std::size_t rank_sum = 0;
};

void to_json(nlohmann::json& j, const CandidateScore& s);
void from_json(const nlohmann::json& j, CandidateScore& s);

struct Selection {
    std::string best;
    std::vector<CandidateScore> scores;
};

// Rank-sum candidate selection over the pool plus the topic. The topic is
// weighted in the average similarity and unweighted in the max. Ties break
// by candidate list order.
Selection select_keyword(const std::vector<std::string>& candidates, const KeywordPool& pool,
                         llm::Gateway& gw);

struct ExpansionRound {
    int round = 0;
    std::vector<std::string> searched;
    std::size_t new_docs = 0;
    std::size_t total_docs = 0;
    std::size_t clusters = 0;
    std::vector<std::string> candidates;
    std::vector<CandidateScore> scores;
    std::string selected;  // empty when the round terminated before selection
};

struct ExpansionResult {
    std::vector<corpus::DocMeta> docs;
    KeywordPool pool;
    std::vector<ExpansionRound> rounds;
    std::string termination;  // theta_reached | no_novel_candidates | round_cap
};

nlohmann::json transcript_json(const ExpansionResult& result);

struct ExpandOptions {
    std::size_t theta = 1000;
    std::size_t search_limit = 1000;
    std::size_t round_cap = 20;
    std::uint64_t seed = 42;
    std::size_t cluster_iterations = 50;
    bool use_online = true;
};

// Keyword-expansion retrieval loop: search newly added keywords, cluster the
// accumulated documents, summarize candidate keywords per cluster, and add
// the best-ranked novel candidate to the pool until the document threshold,
// the round cap, or candidate exhaustion is reached.
ExpansionResult expand_keywords(corpus::Corpus& corp, llm::Gateway& gw, const std::string& topic,
                                const std::vector<std::string>& k0,
                                const ExpandOptions& opts = {});

struct CoarseDecision {
    std::string doc_id;
    double sim = 0.0;
    bool kept = false;
};

struct CoarseResult {
    std::vector<corpus::DocMeta> docs;  // kept docs, similarity descending
    std::vector<CoarseDecision> decisions;
};

// Top-K docs by cosine similarity of abstract to topic, ties by doc_id.
CoarseResult coarse_filter(const std::vector<corpus::DocMeta>& docs, const std::string& topic,
                           std::size_t k, llm::Gateway& gw);

struct FineDecision {
    std::string doc_id;
    bool kept = false;
    bool flagged = false;  // judge failed; retained fail-open
};

struct FineResult {
    std::vector<corpus::DocMeta> docs;  // input order preserved
    std::vector<FineDecision> decisions;
};

// Per-doc relevance judgment; failures keep the doc and flag it.
FineResult fine_filter(const std::vector<corpus::DocMeta>& docs, const std::string& topic,
                       llm::Gateway& gw);

// Shared with the reference-relevance evaluation metric.
std::string reference_relevance_prompt(const std::string& topic, const corpus::DocMeta& doc);

}  // namespace survey::retrieval
