#include "survey/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "survey/errors.hpp"
#include "survey/util.hpp"

namespace survey::retrieval {

using nlohmann::json;

double cos_sim(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) throw ArgumentError("cos_sim: dim mismatch");
    if (u.empty()) throw ArgumentError("cos_sim: empty vectors");
    double nu = kernels::norm(u.data(), u.size());
    double nv = kernels::norm(v.data(), v.size());
    if (nu <= 0.0 || nv <= 0.0) throw ArgumentError("cos_sim: zero vector");
    return kernels::dot(u.data(), v.data(), u.size()) / (nu * nv);
}

// ---------------------------------------------------------------------------
// KeywordPool
// ---------------------------------------------------------------------------

KeywordPool KeywordPool::init(std::string topic, const std::vector<std::string>& k0) {
    if (util::trim(topic).empty()) throw ArgumentError("empty topic");
    KeywordPool pool;
    pool.topic = std::move(topic);
    for (const auto& kw : k0) {
        std::string t = util::trim(kw);
        if (!t.empty()) pool.add(t);
    }
    if (pool.keywords.empty()) throw ArgumentError("initial keyword set is empty");
    return pool;
}

bool KeywordPool::contains(const std::string& keyword) const {
    std::string needle = util::to_lower(util::trim(keyword));
    for (const auto& kw : keywords) {
        if (util::to_lower(kw) == needle) return true;
    }
    return false;
}

bool KeywordPool::add(const std::string& keyword) {
    if (contains(keyword)) return false;
    keywords.push_back(util::trim(keyword));
    return true;
}

void to_json(json& j, const KeywordPool& p) {
    j = json{{"topic", p.topic}, {"keywords", p.keywords}, {"topic_weight", p.topic_weight}};
}

void from_json(const json& j, KeywordPool& p) {
    p.topic = j.at("topic").get<std::string>();
    p.keywords = j.at("keywords").get<std::vector<std::string>>();
    p.topic_weight = j.value("topic_weight", 2.0);
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

std::vector<Cluster> cluster(const std::vector<std::pair<std::string, Vec>>& docs, std::size_t k,
                             const ClusterOptions& opts) {
    if (k < 1) throw ArgumentError("cluster: k must be >= 1");
    if (docs.size() < k) throw ArgumentError("cluster: fewer docs than clusters");

    const std::size_t n = docs.size();
    kernels::Matrix points;
    for (const auto& [id, v] : docs) {
        if (v.empty()) throw ArgumentError("cluster: empty vector for " + id);
        points.push_row(v);
    }

    // farthest-point init, seeded first pick
    std::uint64_t state = opts.seed;
    std::vector<std::size_t> centers;
    centers.push_back(static_cast<std::size_t>(util::splitmix64(state) % n));
    std::vector<double> best_sim(n, -2.0);
    while (centers.size() < k) {
        const double* c = points.row(centers.back());
        auto sims = kernels::cosine_scores(Vec(c, c + points.dim), points);
        for (std::size_t i = 0; i < n; ++i) best_sim[i] = std::max(best_sim[i], sims[i]);
        std::size_t farthest = 0;
        double lowest = 3.0;
        std::vector<bool> taken(n, false);
        for (std::size_t c2 : centers) taken[c2] = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            if (best_sim[i] < lowest) {
                lowest = best_sim[i];
                farthest = i;
            }
        }
        centers.push_back(farthest);
    }

    kernels::Matrix centroids(points.dim);
    for (std::size_t c : centers) centroids.push_row(Vec(points.row(c), points.row(c) + points.dim));

    std::vector<int> assignment(n, -1);
    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        std::vector<int> next = kernels::assign_to_centroids(points, centroids);

        // keep every cluster non-empty: move the worst-assigned point there
        std::vector<std::size_t> sizes(k, 0);
        for (int a : next) ++sizes[static_cast<std::size_t>(a)];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            std::size_t worst = n;
            double worst_sim = 3.0;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t a = static_cast<std::size_t>(next[i]);
                if (sizes[a] <= 1) continue;
                const double* p = points.row(i);
                const double* cv = centroids.row(a);
                double pn = kernels::norm(p, points.dim);
                double cn = kernels::norm(cv, points.dim);
                double s = (pn <= 0 || cn <= 0)
                               ? 0.0
                               : kernels::dot(p, cv, points.dim) / (pn * cn);
                if (s < worst_sim) {
                    worst_sim = s;
                    worst = i;
                }
            }
            if (worst == n) continue;  // nothing movable
            --sizes[static_cast<std::size_t>(next[worst])];
            next[worst] = static_cast<int>(c);
            ++sizes[c];
        }

        bool changed = (next != assignment);
        assignment = std::move(next);
        kernels::Matrix means = kernels::mean_by_assignment(points, assignment, k);
        centroids = std::move(means);
        if (!changed) break;
    }

    std::vector<Cluster> out(k);
    for (std::size_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(assignment[i])].member_ids.push_back(docs[i].first);
    }
    kernels::Matrix means = kernels::mean_by_assignment(points, assignment, k);
    for (std::size_t c = 0; c < k; ++c) {
        out[c].centroid = Vec(means.row(c), means.row(c) + means.dim);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cluster keyword extraction
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",  "and",  "are", "as",   "at",   "be",   "by",   "for", "from",
        "in",   "is",  "it",   "of",  "on",   "or",   "that", "the",  "this", "to",
        "we",   "with", "our", "its", "these", "those", "their", "can", "which"};
    return words;
}

std::vector<std::string> parse_keyword_list(const std::string& text) {
    std::vector<std::string> out;
    std::string norm = text;
    std::replace(norm.begin(), norm.end(), ';', ',');
    std::replace(norm.begin(), norm.end(), '\n', ',');
    for (auto& part : util::split(norm, ',')) {
        std::string kw = util::to_lower(util::trim(part));
        // strip list bullets
        while (!kw.empty() && (kw[0] == '-' || kw[0] == '*' || std::isdigit((unsigned char)kw[0]) ||
                               kw[0] == '.' || kw[0] == ')' || kw[0] == ' ')) {
            kw.erase(kw.begin());
        }
        kw = util::trim(kw);
        if (kw.empty()) continue;
        if (std::find(out.begin(), out.end(), kw) == out.end()) out.push_back(kw);
        if (out.size() == 3) break;
    }
    return out;
}

}  // namespace

std::vector<std::string> extract_cluster_keywords(const Cluster& cl,
                                                  const std::vector<std::string>& abstracts,
                                                  llm::Gateway& gw) {
    if (cl.member_ids.empty()) throw ArgumentError("empty cluster");

    std::string prompt = "task: cluster-keywords\n";
    prompt += "Summarize 1-3 search keywords for this group of papers, comma separated.\n";
    prompt += "abstracts:\n";
    for (const auto& a : abstracts) prompt += "- " + a + "\n";

    std::string response = gw.complete(prompt);
    auto keywords = parse_keyword_list(response);
    if (!keywords.empty()) return keywords;

    // fall back to the top-TF tokens of the cluster abstracts
    std::map<std::string, std::size_t> tf;
    for (const auto& a : abstracts) {
        for (const auto& tok : util::tokenize(a)) {
            if (!stopwords().count(tok) && tok.size() > 2) ++tf[tok];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(tf.begin(), tf.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < 3; ++i) out.push_back(ranked[i].first);
    return out;
}

// ---------------------------------------------------------------------------
// Candidate selection
// ---------------------------------------------------------------------------

void to_json(json& j, const CandidateScore& s) {
    j = json{{"candidate", s.candidate}, {"avg_sim", s.avg_sim}, {"max_sim", s.max_sim},
             {"r1", s.r1},               {"r2", s.r2},           {"rank_sum", s.rank_sum}};
}

void from_json(const json& j, CandidateScore& s) {
    s.candidate = j.at("candidate").get<std::string>();
    s.avg_sim = j.at("avg_sim").get<double>();
    s.max_sim = j.at("max_sim").get<double>();
    s.r1 = j.at("r1").get<std::size_t>();
    s.r2 = j.at("r2").get<std::size_t>();
    s.rank_sum = j.at("rank_sum").get<std::size_t>();
}

Selection select_keyword(const std::vector<std::string>& candidates, const KeywordPool& pool,
                         llm::Gateway& gw) {
    if (candidates.empty()) throw ArgumentError("select_keyword: no candidates");
    if (pool.keywords.empty()) throw ArgumentError("select_keyword: empty pool");
    for (const auto& c : candidates) {
        if (pool.contains(c)) throw ArgumentError("candidate already in pool: " + c);
    }

    std::vector<std::string> texts = pool.keywords;
    texts.push_back(pool.topic);
    for (const auto& c : candidates) texts.push_back(c);
    auto vectors = gw.embed(texts);

    const std::size_t pool_n = pool.keywords.size();
    const Vec& topic_vec = vectors[pool_n];
    const double w = pool.topic_weight;

    std::vector<CandidateScore> scores(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Vec& cv = vectors[pool_n + 1 + i];
        double sum = 0.0;
        double max_sim = -2.0;
        for (std::size_t e = 0; e < pool_n; ++e) {
            double s = cos_sim(cv, vectors[e]);
            sum += s;
            max_sim = std::max(max_sim, s);
        }
        double topic_sim = cos_sim(cv, topic_vec);
        sum += w * topic_sim;
        max_sim = std::max(max_sim, topic_sim);
        scores[i].candidate = candidates[i];
        scores[i].avg_sim = sum / (static_cast<double>(pool_n) + w);
        scores[i].max_sim = max_sim;
    }

    // ordinal ranks: stable by candidate order on ties
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::size_t r1 = 1, r2 = 1;
        for (std::size_t j2 = 0; j2 < scores.size(); ++j2) {
            if (j2 == i) continue;
            if (scores[j2].avg_sim > scores[i].avg_sim ||
                (scores[j2].avg_sim == scores[i].avg_sim && j2 < i)) {
                ++r1;
            }
            if (scores[j2].max_sim < scores[i].max_sim ||
                (scores[j2].max_sim == scores[i].max_sim && j2 < i)) {
                ++r2;
            }
        }
        scores[i].r1 = r1;
        scores[i].r2 = r2;
        scores[i].rank_sum = r1 + r2;
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i].rank_sum < scores[best].rank_sum) best = i;
    }
    return Selection{candidates[best], std::move(scores)};
}

// ---------------------------------------------------------------------------
// Keyword expansion loop
// ---------------------------------------------------------------------------

json transcript_json(const ExpansionResult& result) {
    json rounds = json::array();
    for (const auto& r : result.rounds) {
        json jr{{"round", r.round},
                {"searched", r.searched},
                {"new_docs", r.new_docs},
                {"total_docs", r.total_docs}};
        if (!r.selected.empty() || !r.candidates.empty()) {
            jr["clusters"] = r.clusters;
            jr["candidates"] = r.candidates;
            jr["scores"] = r.scores;
            jr["selected"] = r.selected;
        }
        rounds.push_back(jr);
    }
    return json{{"pool", result.pool},
                {"rounds", rounds},
                {"termination", result.termination},
                {"docs_total", result.docs.size()}};
}

ExpansionResult expand_keywords(corpus::Corpus& corp, llm::Gateway& gw, const std::string& topic,
                                const std::vector<std::string>& k0, const ExpandOptions& opts) {
    if (opts.theta < 1) throw ArgumentError("theta must be >= 1");
    ExpansionResult result;
    result.pool = KeywordPool::init(topic, k0);

    std::unordered_set<std::string> seen_ids;
    std::unordered_set<std::string> seen_titles;
    std::vector<std::string> newly = result.pool.keywords;
    int round_no = 0;

    auto absorb = [&](const std::vector<corpus::DocMeta>& found, std::size_t& added) {
        for (const auto& doc : found) {
            std::string norm = util::normalized_title(doc.title);
            if (seen_ids.count(doc.doc_id) || seen_titles.count(norm)) continue;
            seen_ids.insert(doc.doc_id);
            seen_titles.insert(norm);
            result.docs.push_back(doc);
            ++added;
        }
    };

    for (;;) {
        if (static_cast<std::size_t>(round_no) >= opts.round_cap) {
            result.termination = "round_cap";
            break;
        }
        ++round_no;

        ExpansionRound round;
        round.round = round_no;
        round.searched = newly;
        std::size_t added = 0;
        for (const auto& kw : newly) {
            absorb(corp.search_offline(kw, opts.search_limit), added);
            if (opts.use_online) absorb(corp.fetch_online(kw, opts.search_limit), added);
        }
        round.new_docs = added;
        round.total_docs = result.docs.size();

        if (round_no == 1 && result.docs.empty()) {
            throw Error("empty recall: no documents retrievable for keywords [" +
                        util::join(newly, ", ") + "]");
        }

        if (result.docs.size() >= opts.theta) {
            result.termination = "theta_reached";
            result.rounds.push_back(std::move(round));
            break;
        }

        // cluster the full accumulated doc set into |pool|+1 groups
        std::vector<std::string> abstracts;
        abstracts.reserve(result.docs.size());
        for (const auto& d : result.docs) abstracts.push_back(d.abstract_text);
        auto vectors = gw.embed(abstracts);
        std::vector<std::pair<std::string, Vec>> points;
        points.reserve(result.docs.size());
        for (std::size_t i = 0; i < result.docs.size(); ++i) {
            points.emplace_back(result.docs[i].doc_id, vectors[i]);
        }
        std::size_t k = std::min(result.pool.keywords.size() + 1, points.size());
        auto clusters = cluster(points, k, {opts.seed, opts.cluster_iterations});
        round.clusters = clusters.size();

        std::unordered_map<std::string, std::size_t> doc_index;
        for (std::size_t i = 0; i < result.docs.size(); ++i) doc_index[result.docs[i].doc_id] = i;

        std::vector<std::string> candidates;
        for (const auto& cl : clusters) {
            std::vector<std::string> cluster_abstracts;
            for (const auto& id : cl.member_ids) {
                cluster_abstracts.push_back(result.docs[doc_index[id]].abstract_text);
            }
            for (const auto& kw : extract_cluster_keywords(cl, cluster_abstracts, gw)) {
                if (result.pool.contains(kw)) continue;
                bool dup = false;
                for (const auto& c : candidates) {
                    if (util::to_lower(c) == util::to_lower(kw)) dup = true;
                }
                if (!dup) candidates.push_back(kw);
            }
        }
        round.candidates = candidates;

        if (candidates.empty()) {
            result.termination = "no_novel_candidates";
            result.rounds.push_back(std::move(round));
            break;
        }

        Selection sel = select_keyword(candidates, result.pool, gw);
        round.scores = sel.scores;
        round.selected = sel.best;
        result.pool.add(sel.best);
        newly = {sel.best};
        result.rounds.push_back(std::move(round));
    }

    return result;
}

// ---------------------------------------------------------------------------
// Filtration
// ---------------------------------------------------------------------------

CoarseResult coarse_filter(const std::vector<corpus::DocMeta>& docs, const std::string& topic,
                           std::size_t k, llm::Gateway& gw) {
    if (k < 1) throw ArgumentError("coarse_filter: K must be >= 1");
    CoarseResult result;
    if (docs.empty()) return result;

    Vec topic_vec = gw.embed_one(topic);
    std::vector<std::string> abstracts;
    abstracts.reserve(docs.size());
    for (const auto& d : docs) abstracts.push_back(d.abstract_text);
    auto vectors = gw.embed(abstracts);

    kernels::Matrix m;
    for (const auto& v : vectors) m.push_row(v);
    auto sims = kernels::cosine_scores(topic_vec, m);

    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return docs[a].doc_id < docs[b].doc_id;
    });

    std::size_t keep = std::min(k, docs.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        std::size_t i = order[rank];
        bool kept = rank < keep;
        result.decisions.push_back({docs[i].doc_id, sims[i], kept});
        if (kept) result.docs.push_back(docs[i]);
    }
    return result;
}

std::string reference_relevance_prompt(const std::string& topic, const corpus::DocMeta& doc) {
    std::string prompt = "task: reference-relevance\n";
    prompt += "topic: " + topic + "\n";
    prompt += "doc: " + doc.doc_id + "\n";
    prompt += "title: " + doc.title + "\n";
    prompt += "abstract: " + doc.abstract_text + "\n";
    prompt += "Is this reference relevant to the topic? Answer {\"relevant\": true|false}.";
    return prompt;
}

FineResult fine_filter(const std::vector<corpus::DocMeta>& docs, const std::string& topic,
                       llm::Gateway& gw) {
    FineResult result;
    const std::size_t n = docs.size();
    std::vector<FineDecision> decisions(n);

    llm::JudgeSchema schema{llm::JudgeField::boolean("relevant")};
    const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto& doc = docs[static_cast<std::size_t>(i)];
        FineDecision d;
        d.doc_id = doc.doc_id;
        try {
            auto verdict = gw.judge(reference_relevance_prompt(topic, doc), schema);
            d.kept = verdict.at("relevant").get<bool>();
        } catch (const std::exception&) {
            d.kept = true;  // fail-open
            d.flagged = true;
        }
        decisions[static_cast<std::size_t>(i)] = std::move(d);
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (decisions[i].kept) result.docs.push_back(docs[i]);
    }
    result.decisions = std::move(decisions);
    return result;
}

}  // namespace survey::retrieval
