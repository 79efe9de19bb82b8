#include "survey/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "survey/errors.hpp"
#include "survey/retrieval.hpp"
#include "survey/util.hpp"

namespace survey::evalkit {

using nlohmann::json;

double f1_score(double recall, double precision) {
    if (recall <= 0.0 && precision <= 0.0) return 0.0;
    return 2.0 * recall * precision / (recall + precision);
}

// ---------------------------------------------------------------------------
// Rendered survey parsing
// ---------------------------------------------------------------------------

ParsedSurvey parse_rendered_survey(const std::string& markdown) {
    ParsedSurvey parsed;
    std::string prose;
    bool in_references = false;
    bool in_fence = false;
    for (const auto& line : util::split_lines(markdown)) {
        std::string t = util::trim(line);
        if (t.rfind("```", 0) == 0) {
            in_fence = !in_fence;
            continue;
        }
        if (in_fence) continue;
        if (t.rfind("## References", 0) == 0) {
            in_references = true;
            continue;
        }
        if (in_references) {
            // entries look like: [3] Some title. (doc_id)
            if (t.empty() || t[0] != '[') continue;
            auto close = t.find(']');
            auto open_paren = t.rfind('(');
            auto close_paren = t.rfind(')');
            if (close == std::string::npos || open_paren == std::string::npos ||
                close_paren == std::string::npos || open_paren > close_paren) {
                continue;
            }
            std::string num = t.substr(1, close - 1);
            std::string doc_id = t.substr(open_paren + 1, close_paren - open_paren - 1);
            parsed.reference_map[num] = doc_id;
            continue;
        }
        if (t.empty() || t[0] == '#' || t[0] == '|') continue;
        if (t.rfind("**Table.**", 0) == 0 || t.rfind("**Figure.**", 0) == 0) continue;
        prose += t + "\n";
    }
    parsed.sentences = util::split_sentences(prose);
    return parsed;
}

// ---------------------------------------------------------------------------
// Citation metrics
// ---------------------------------------------------------------------------

json CitationReport::to_json() const {
    json claims = json::array();
    for (const auto& c : per_claim) {
        json jc{{"claim", c.claim}, {"cited", c.cited}};
        if (c.supported) jc["supported"] = *c.supported;
        claims.push_back(jc);
    }
    json citations = json::array();
    for (const auto& c : per_citation) {
        json jc{{"doc_id", c.doc_id}, {"claim", c.claim}};
        if (c.relevant) jc["relevant"] = *c.relevant;
        citations.push_back(jc);
    }
    return json{{"recall", recall},
                {"precision", precision},
                {"f1", f1},
                {"per_claim", claims},
                {"per_citation", citations},
                {"excluded_claims", excluded_claims},
                {"excluded_citations", excluded_citations}};
}

namespace {

std::string doc_evidence(const atree::AttributeForest& refs, const std::string& doc_id,
                         std::size_t max_fragments) {
    std::string out;
    if (const auto* info = refs.doc_for(doc_id)) {
        out += "[" + doc_id + "] " + info->title + ": " + info->abstract_text + "\n";
    }
    std::size_t used = 0;
    for (const auto& f : refs.fragments) {
        if (f.doc_id != doc_id) continue;
        out += "  " + f.text + "\n";
        if (++used >= max_fragments) break;
    }
    if (out.empty()) out = "[" + doc_id + "] (no reference material)\n";
    return out;
}

}  // namespace

CitationReport citation_metrics(const std::string& survey_markdown,
                                const atree::AttributeForest& refs, llm::Gateway& gw,
                                const EvalOptions& opts) {
    ParsedSurvey parsed = parse_rendered_survey(survey_markdown);

    CitationReport report;
    for (const auto& sentence : parsed.sentences) {
        auto keys = util::extract_citation_keys(sentence);
        std::vector<std::string> cited;
        for (const auto& k : keys) {
            auto it = parsed.reference_map.find(k);
            if (it != parsed.reference_map.end()) {
                cited.push_back(it->second);
            } else if (refs.doc_for(k) || refs.tree_for(k)) {
                cited.push_back(k);  // draft-form survey citing doc ids directly
            }
        }
        if (cited.empty()) continue;  // not a claim
        ClaimJudgment claim;
        claim.claim = sentence;
        claim.cited = cited;
        report.per_claim.push_back(std::move(claim));
    }

    llm::JudgeSchema support_schema{llm::JudgeField::boolean("supported")};
    const std::int64_t n_claims = static_cast<std::int64_t>(report.per_claim.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n_claims; ++i) {
        auto& claim = report.per_claim[static_cast<std::size_t>(i)];
        std::string prompt = "task: claim-support\n";
        prompt += "claim: " + claim.claim + "\n";
        prompt += "evidence:\n";
        std::vector<std::string> distinct;
        for (const auto& id : claim.cited) {
            if (std::find(distinct.begin(), distinct.end(), id) == distinct.end())
                distinct.push_back(id);
        }
        for (const auto& id : distinct) prompt += doc_evidence(refs, id, 2);
        prompt += "Is the claim fully supported by the cited references? "
                  "Answer {\"supported\": true|false}.";
        try {
            claim.supported = gw.judge(prompt, support_schema).at("supported").get<bool>();
        } catch (const std::exception&) {
            claim.supported = std::nullopt;
        }
    }

    for (const auto& claim : report.per_claim) {
        for (const auto& id : claim.cited) {
            report.per_citation.push_back({id, claim.claim, std::nullopt});
        }
    }
    llm::JudgeSchema relevance_schema{llm::JudgeField::boolean("relevant")};
    const std::int64_t n_cites = static_cast<std::int64_t>(report.per_citation.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n_cites; ++i) {
        auto& cite = report.per_citation[static_cast<std::size_t>(i)];
        std::string prompt = "task: citation-relevance\n";
        prompt += "claim: " + cite.claim + "\n";
        prompt += "reference:\n" + doc_evidence(refs, cite.doc_id, 2);
        prompt += "Is this citation relevant to the statement? Answer {\"relevant\": true|false}.";
        try {
            cite.relevant = gw.judge(prompt, relevance_schema).at("relevant").get<bool>();
        } catch (const std::exception&) {
            cite.relevant = std::nullopt;
        }
    }

    std::size_t judged_claims = 0, supported = 0;
    for (const auto& c : report.per_claim) {
        if (!c.supported) {
            ++report.excluded_claims;
            continue;
        }
        ++judged_claims;
        if (*c.supported) ++supported;
    }

    std::size_t judged_citations = 0, relevant = 0;
    if (opts.unique_citations) {
        std::map<std::string, std::optional<bool>> by_doc;
        for (const auto& c : report.per_citation) {
            if (!c.relevant) continue;
            auto& slot = by_doc[c.doc_id];
            slot = slot.value_or(false) || *c.relevant;
        }
        std::set<std::string> all_docs;
        for (const auto& c : report.per_citation) all_docs.insert(c.doc_id);
        for (const auto& id : all_docs) {
            auto it = by_doc.find(id);
            if (it == by_doc.end()) {
                ++report.excluded_citations;
                continue;
            }
            ++judged_citations;
            if (*it->second) ++relevant;
        }
    } else {
        for (const auto& c : report.per_citation) {
            if (!c.relevant) {
                ++report.excluded_citations;
                continue;
            }
            ++judged_citations;
            if (*c.relevant) ++relevant;
        }
    }

    report.recall = judged_claims == 0
                        ? 0.0
                        : 100.0 * static_cast<double>(supported) / static_cast<double>(judged_claims);
    report.precision = judged_citations == 0 ? 0.0
                                             : 100.0 * static_cast<double>(relevant) /
                                                   static_cast<double>(judged_citations);
    report.f1 = f1_score(report.recall, report.precision);
    return report;
}

// ---------------------------------------------------------------------------
// Content rubric
// ---------------------------------------------------------------------------

RubricScores RubricScores::from_values(double coverage, double structure, double relevance,
                                       double synthesis, double critical_analysis) {
    RubricScores s;
    s.coverage = coverage;
    s.structure = structure;
    s.relevance = relevance;
    s.synthesis = synthesis;
    s.critical_analysis = critical_analysis;
    s.avg = (coverage + structure + relevance + synthesis + critical_analysis) / 5.0;
    return s;
}

json RubricScores::to_json() const {
    return json{{"coverage", coverage},
                {"structure", structure},
                {"relevance", relevance},
                {"synthesis", synthesis},
                {"critical_analysis", critical_analysis},
                {"invalid", invalid},
                {"avg", avg}};
}

RubricScores content_rubric(const std::string& survey, const std::string& topic, llm::Gateway& gw,
                            const EvalOptions& opts) {
    if (util::trim(survey).empty()) throw ArgumentError("empty survey text");

    static const std::vector<std::pair<std::string, std::string>> dimensions = {
        {"coverage", "how comprehensively the survey covers the topic"},
        {"structure", "how clear and logically organized the survey is"},
        {"relevance", "how relevant the content is to the topic"},
        {"synthesis", "how well the survey interconnects studies into a cohesive framework"},
        {"critical-analysis", "the depth of critique of existing studies"}};

    llm::JudgeSchema schema{llm::JudgeField::number("score", 1.0, 5.0)};
    std::vector<double> values(dimensions.size(), 0.0);
    std::vector<char> valid(dimensions.size(), 0);

    for (std::size_t d = 0; d < dimensions.size(); ++d) {
        double sum = 0.0;
        int runs_ok = 0;
        int runs = std::max(1, opts.rubric_runs);
        for (int run = 0; run < runs; ++run) {
            std::string prompt = "task: rubric-" + dimensions[d].first + "\n";
            prompt += "topic: " + topic + "\n";
            prompt += "Score " + dimensions[d].second + " from 1 to 5.\n";
            if (run > 0) prompt += "sample: " + std::to_string(run) + "\n";
            prompt += "survey:\n" + survey;
            try {
                sum += gw.judge(prompt, schema).at("score").get<double>();
                ++runs_ok;
            } catch (const std::exception&) {
            }
        }
        if (runs_ok > 0) {
            values[d] = sum / runs_ok;
            valid[d] = 1;
        }
    }

    RubricScores scores;
    scores.coverage = values[0];
    scores.structure = values[1];
    scores.relevance = values[2];
    scores.synthesis = values[3];
    scores.critical_analysis = values[4];
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t d = 0; d < dimensions.size(); ++d) {
        if (valid[d]) {
            sum += values[d];
            ++n;
        } else {
            scores.invalid.push_back(dimensions[d].first);
        }
    }
    scores.avg = n == 0 ? 0.0 : sum / static_cast<double>(n);
    return scores;
}

// ---------------------------------------------------------------------------
// Reference relevance metrics
// ---------------------------------------------------------------------------

double iou(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double relevance_semantic(const std::vector<corpus::DocMeta>& docs, const std::string& topic,
                          llm::Gateway& gw) {
    if (docs.empty()) throw ArgumentError("relevance_semantic: no docs");
    llm::Vec topic_vec = gw.embed_one(topic);
    std::vector<std::string> abstracts;
    abstracts.reserve(docs.size());
    for (const auto& d : docs) abstracts.push_back(d.abstract_text);
    auto vectors = gw.embed(abstracts);
    double sum = 0.0;
    for (const auto& v : vectors) sum += retrieval::cos_sim(v, topic_vec);
    return sum / static_cast<double>(docs.size());
}

RelevanceLlmResult relevance_llm(const std::vector<corpus::DocMeta>& docs,
                                 const std::string& topic, llm::Gateway& gw) {
    if (docs.empty()) throw ArgumentError("relevance_llm: no docs");
    llm::JudgeSchema schema{llm::JudgeField::boolean("relevant")};
    const std::int64_t n = static_cast<std::int64_t>(docs.size());
    std::vector<int> verdicts(docs.size(), -1);  // -1 = excluded
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& doc = docs[static_cast<std::size_t>(i)];
        try {
            auto v = gw.judge(retrieval::reference_relevance_prompt(topic, doc), schema);
            verdicts[static_cast<std::size_t>(i)] = v.at("relevant").get<bool>() ? 1 : 0;
        } catch (const std::exception&) {
        }
    }

    RelevanceLlmResult result;
    std::size_t judged = 0, relevant = 0;
    for (int v : verdicts) {
        if (v < 0) {
            ++result.exclusions;
            continue;
        }
        ++judged;
        if (v == 1) ++relevant;
    }
    result.fraction =
        judged == 0 ? 0.0 : static_cast<double>(relevant) / static_cast<double>(judged);
    return result;
}

json RelevanceReport::to_json() const {
    json j{{"rel_semantic", rel_semantic},
           {"rel_llm", rel_llm},
           {"llm_exclusions", llm_exclusions}};
    if (iou) j["iou"] = *iou;
    return j;
}

}  // namespace survey::evalkit
