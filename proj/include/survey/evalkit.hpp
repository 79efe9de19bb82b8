#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "survey/atree.hpp"
#include "survey/corpus.hpp"
#include "survey/gateway.hpp"

namespace survey::evalkit {

// Harmonic mean of recall and precision (percent scale); 0 when both are 0.
double f1_score(double recall, double precision);

struct ClaimJudgment {
    std::string claim;
    std::vector<std::string> cited;  // doc ids, one per citation instance
    std::optional<bool> supported;   // nullopt = judge failed, excluded
};

struct CitationJudgment {
    std::string doc_id;
    std::string claim;
    std::optional<bool> relevant;
};

struct CitationReport {
    double recall = 0.0;     // percent
    double precision = 0.0;  // percent
    double f1 = 0.0;         // percent
    std::vector<ClaimJudgment> per_claim;
    std::vector<CitationJudgment> per_citation;
    std::size_t excluded_claims = 0;
    std::size_t excluded_citations = 0;

    nlohmann::json to_json() const;
};

struct EvalOptions {
    bool unique_citations = false;  // precision over unique cited works
    int rubric_runs = 1;
};

// Parsed form of a rendered survey: prose body plus the numeric-key to doc_id
// map recovered from the references section.
struct ParsedSurvey {
    std::vector<std::string> sentences;            // prose sentences, in order
    std::map<std::string, std::string> reference_map;  // "1" -> doc_id
};

ParsedSurvey parse_rendered_survey(const std::string& markdown);

// Citation recall/precision/F1 over a rendered survey. Claims are sentences
// carrying at least one citation key. Judge failures are excluded from both
// numerator and denominator and counted.
CitationReport citation_metrics(const std::string& survey_markdown,
                                const atree::AttributeForest& refs, llm::Gateway& gw,
                                const EvalOptions& opts = {});

struct RubricScores {
    double coverage = 0.0;
    double structure = 0.0;
    double relevance = 0.0;
    double synthesis = 0.0;
    double critical_analysis = 0.0;
    std::vector<std::string> invalid;  // dimensions dropped after range violations
    double avg = 0.0;                  // mean over valid dimensions

    static RubricScores from_values(double coverage, double structure, double relevance,
                                    double synthesis, double critical_analysis);
    nlohmann::json to_json() const;
};

// One judge call per rubric dimension (1-5); out-of-range dimensions are
// invalidated after the reprompt and the average covers the rest.
RubricScores content_rubric(const std::string& survey, const std::string& topic, llm::Gateway& gw,
                            const EvalOptions& opts = {});

// |A n B| / |A u B|; 1.0 when both sets are empty.
double iou(const std::set<std::string>& a, const std::set<std::string>& b);

// Mean cosine similarity of doc abstracts to the topic.
double relevance_semantic(const std::vector<corpus::DocMeta>& docs, const std::string& topic,
                          llm::Gateway& gw);

struct RelevanceLlmResult {
    double fraction = 0.0;  // of successfully judged docs
    std::size_t exclusions = 0;
};

// Fraction of docs the judge marks topic-relevant; failures are excluded.
RelevanceLlmResult relevance_llm(const std::vector<corpus::DocMeta>& docs,
                                 const std::string& topic, llm::Gateway& gw);

struct RelevanceReport {
    std::optional<double> iou;
    double rel_semantic = 0.0;
    double rel_llm = 0.0;
    std::size_t llm_exclusions = 0;

    nlohmann::json to_json() const;
};

}  // namespace survey::evalkit
