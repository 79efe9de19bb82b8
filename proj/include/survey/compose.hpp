#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "survey/atree.hpp"
#include "survey/gateway.hpp"

namespace survey::compose {

struct Section {
    std::string heading;
    std::vector<std::string> subsections;
};

struct Outline {
    std::string title;
    std::vector<Section> sections;

    std::size_t subsection_count() const;
    // Structural invariants: >= 3 sections and, when required, >= 1 subsection
    // per section with no duplicate subsection headings (case-insensitive).
    void validate(bool require_subsections) const;
};

void to_json(nlohmann::json& j, const Outline& o);
void from_json(const nlohmann::json& j, Outline& o);

struct Hint {
    std::string source;  // doc_id the hint was derived from
    std::string text;
};

void to_json(nlohmann::json& j, const Hint& h);
void from_json(const nlohmann::json& j, Hint& h);

struct SubsectionId {
    std::size_t section = 0;
    std::size_t subsection = 0;
};

struct SectionDraft {
    std::size_t section = 0;
    std::size_t subsection = 0;
    std::string heading;
    std::string query;
    std::vector<atree::Retrieved> retrieved;
    std::vector<std::string> paragraphs;
    std::vector<std::string> citations;  // distinct resolved keys, first-use order
    std::vector<std::string> stripped;   // keys removed by the closed-world rule
};

void to_json(nlohmann::json& j, const SectionDraft& d);
void from_json(const nlohmann::json& j, SectionDraft& d);

// 4-8 top-level sections from model knowledge only; duplicate headings are
// disambiguated, under 3 headings after the reprompt is a composition error.
Outline generate_primary_outline(const std::string& topic, llm::Gateway& gw);

// One hint per attribute tree; failed trees are skipped and recorded.
std::vector<Hint> generate_hints(const atree::AttributeForest& forest, const Outline& primary,
                                 llm::Gateway& gw, std::vector<std::string>* warnings = nullptr);

// Fills each primary section with 2-6 subsection headings from the hint set.
Outline generate_secondary_outline(const Outline& primary, const std::vector<Hint>& hints,
                                   llm::Gateway& gw);

struct MergeEvent {
    std::string kept;
    std::string merged;
};

void to_json(nlohmann::json& j, const MergeEvent& m);
void from_json(const nlohmann::json& j, MergeEvent& m);

struct ReorganizeResult {
    Outline outline;
    std::vector<MergeEvent> merges;
    std::vector<std::string> warnings;
};

// Separate-then-reorganize: detach subsection headings, merge near-duplicates
// (cosine pre-screen above dup_threshold proposes pairs, the judge decides,
// exact case-insensitive duplicates always merge), then reassign survivors to
// sections. Dropping a heading is a composition error.
ReorganizeResult reorganize_outline(const Outline& outline, llm::Gateway& gw,
                                    double dup_threshold = 0.9);

// Single-shot two-level outline used when outline optimization is ablated.
Outline generate_onestep_outline(const std::string& topic, llm::Gateway& gw);

// Drafts one subsection: retrieves fragments for the heading, shows summaries
// of already written drafts, and strips citation keys outside the retrieved
// set.
SectionDraft generate_subsection(const Outline& outline, SubsectionId id,
                                 const atree::AttributeForest& forest,
                                 const std::vector<SectionDraft>& already_written,
                                 llm::Gateway& gw, std::size_t retrieve_k = 8);

// Removes bracketed keys not in `allowed` from text; stripped keys appear in
// `stripped` in first occurrence order.
std::string strip_unknown_keys(const std::string& text, const std::vector<std::string>& allowed,
                               std::vector<std::string>& stripped);

}  // namespace survey::compose
