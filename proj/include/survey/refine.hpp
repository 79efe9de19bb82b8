#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "survey/atree.hpp"
#include "survey/compose.hpp"
#include "survey/corpus.hpp"
#include "survey/gateway.hpp"

namespace survey::refine {

struct RewriteResult {
    std::string paragraph;
    std::vector<std::string> added;
    std::vector<std::string> removed;
    std::vector<std::string> retrieved_ids;
    bool flagged = false;  // rewrite proposed a key outside the retrieved set
};

void to_json(nlohmann::json& j, const RewriteResult& r);

// RAG rewriting: the paragraph is the retrieval query; the rewrite may only
// cite documents retrieved for it. Keys outside that set are stripped and the
// result flagged. added/removed are the citation diff against the original.
RewriteResult rewrite_paragraph(const std::string& paragraph,
                                const atree::AttributeForest& forest, llm::Gateway& gw,
                                std::size_t retrieve_k = 8,
                                const std::string& context_before = "",
                                const std::string& context_after = "");

struct ArtifactTemplate {
    std::string template_id;
    std::string kind;        // table | taxonomy-tree | timeline | bar-comparison
    std::string caption;
    std::string applies_to;  // template kind name or "any"
    std::vector<std::string> columns;  // table column fields
};

struct ArtifactTemplates {
    std::vector<ArtifactTemplate> templates;

    static ArtifactTemplates defaults();
    static ArtifactTemplates from_file(const std::string& path);
    static ArtifactTemplates from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct TableSpec {
    std::string template_id;
    std::string caption;
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;  // doc_id, values
};

enum class FigureType { taxonomy_tree, timeline, bar_comparison };

std::string to_string(FigureType t);
FigureType figure_type_from_string(const std::string& s);

struct FigureSpec {
    std::string template_id;
    FigureType kind = FigureType::taxonomy_tree;
    std::string caption;
    nlohmann::json data;
};

// One row per tree of the template's kind; sentinel and missing leaves render
// as an em-dash cell. Fewer than two qualifying trees yields no table.
std::optional<TableSpec> extract_table(const std::vector<atree::AttributeTree>& trees,
                                       const ArtifactTemplate& tmpl);

std::optional<FigureSpec> build_timeline_figure(const std::vector<corpus::DocMeta>& docs,
                                                const ArtifactTemplate& tmpl);
std::optional<FigureSpec> build_taxonomy_figure(const compose::Outline& outline,
                                                const ArtifactTemplate& tmpl);
std::optional<FigureSpec> build_kind_distribution_figure(
    const std::vector<atree::AttributeTree>& trees, const ArtifactTemplate& tmpl);

// Pure renderers: spec in, Markdown block out, no gateway involved.
std::string render_artifact(const TableSpec& spec);
std::string render_artifact(const FigureSpec& spec);

}  // namespace survey::refine
