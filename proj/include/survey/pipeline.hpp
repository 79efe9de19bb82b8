#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "survey/compose.hpp"
#include "survey/corpus.hpp"
#include "survey/gateway.hpp"
#include "survey/refine.hpp"

namespace survey::pipeline {

struct AblationFlags {
    bool no_expansion = false;
    bool no_atree = false;
    bool no_outline_opt = false;
    bool no_rewrite = false;

    static AblationFlags from_names(const std::vector<std::string>& names);
    std::vector<std::string> names() const;
};

void to_json(nlohmann::json& j, const AblationFlags& a);
void from_json(const nlohmann::json& j, AblationFlags& a);

struct RunConfig {
    std::string topic;
    std::vector<std::string> initial_keywords;  // defaults to {topic}
    std::size_t theta = 1000;
    std::size_t coarse_k = 200;
    std::size_t retrieve_k = 8;
    std::size_t rewrite_k = 8;
    std::size_t search_limit = 1000;
    std::size_t round_cap = 20;
    std::uint64_t seed = 42;
    double dup_threshold = 0.9;
    std::string corpus_path;
    std::string online_fixture;
    std::string out_dir;
    std::string atree_templates_path;
    std::string artifact_templates_path;
    llm::GatewayConfig gateway;
    AblationFlags ablate;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    // Applies config-file values over this (flag-parsed) config.
    RunConfig overridden_by(const nlohmann::json& j) const;
    void validate() const;
};

struct StageRecord {
    std::string name;
    std::string status = "pending";  // pending | completed | failed
    std::string detail;
    std::vector<std::string> artifacts;  // paths relative to the run dir
    std::vector<std::string> warnings;
    std::size_t gateway_calls = 0;
    double seconds = 0.0;
    std::string error;
};

void to_json(nlohmann::json& j, const StageRecord& s);
void from_json(const nlohmann::json& j, StageRecord& s);

extern const std::vector<std::string> kStageNames;

struct RunRecord {
    RunConfig config;
    std::vector<StageRecord> stages;
    std::string status = "pending";

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static RunRecord load(const std::string& path);

    const StageRecord* stage(const std::string& name) const;
};

// Executes acquisition -> preprocessing -> outline -> content -> refinement
// -> render, persisting every intermediate artifact under cfg.out_dir. A
// failing stage marks the record and stops; resume re-runs from there.
RunRecord run_pipeline(const RunConfig& cfg);

// Re-runs a persisted run from its first non-completed stage. Stages already
// completed keep their records and are not re-executed. The mock script may
// be overridden (e.g. after fixing a broken script).
RunRecord resume_pipeline(const std::string& run_dir, const std::string& mock_override = "");

struct PlacedArtifact {
    std::string template_id;
    std::string kind;
    std::size_t section = 0;
    std::size_t subsection = 0;
    std::vector<std::string> doc_ids;  // citations carried by the artifact
    std::string rendered;
};

void to_json(nlohmann::json& j, const PlacedArtifact& a);
void from_json(const nlohmann::json& j, PlacedArtifact& a);

// Renders the final Markdown document: numbered sections, [n] citations in
// first-appearance order, artifact blocks at their placements, and a
// references section listing every cited work exactly once. A citation key
// that does not resolve to a reference is a render error.
std::string render_survey(const compose::Outline& outline,
                          const std::vector<compose::SectionDraft>& drafts,
                          const std::vector<PlacedArtifact>& artifacts,
                          const std::vector<corpus::DocMeta>& references);

}  // namespace survey::pipeline
