#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "survey/corpus.hpp"
#include "survey/gateway.hpp"
#include "survey/kernels.hpp"

namespace survey::atree {

using Vec = kernels::Vec;

enum class TemplateKind { method, benchmark, theory, survey };

std::string to_string(TemplateKind k);
TemplateKind template_kind_from_string(const std::string& s);

// Leaves the extractor could not support stay at this sentinel instead of
// being invented; the tree keeps its template shape.
inline constexpr const char* kNotStated = "not stated";

// Field sets per template kind; overridable from a config file.
struct TemplateSet {
    std::map<TemplateKind, std::vector<std::string>> fields;

    static TemplateSet defaults();
    static TemplateSet from_file(const std::string& path);
    static TemplateSet from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct AttrNode {
    std::string name;
    std::string value;  // leaf payload; internal nodes carry children instead
    std::vector<AttrNode> children;

    bool is_leaf() const { return children.empty(); }
};

void to_json(nlohmann::json& j, const AttrNode& n);
void from_json(const nlohmann::json& j, AttrNode& n);

struct AttributeTree {
    std::string doc_id;
    TemplateKind kind = TemplateKind::method;
    bool flagged = false;  // classification defaulted after a judge failure
    std::vector<AttrNode> nodes;

    const AttrNode* find(const std::string& name) const;
};

void to_json(nlohmann::json& j, const AttributeTree& t);
void from_json(const nlohmann::json& j, AttributeTree& t);

struct Fragment {
    std::string text;
    std::string doc_id;
    std::string path;
    Vec vector;
};

struct DocInfo {
    std::string doc_id;
    std::string title;
    std::string abstract_text;
};

void to_json(nlohmann::json& j, const DocInfo& d);
void from_json(const nlohmann::json& j, DocInfo& d);

// The union of all attribute trees, embedding-indexed by leaf fragment.
// Fragments are sorted by (doc_id, path); the matrix rows follow that order.
struct AttributeForest {
    std::string topic;
    std::size_t embed_dim = 0;
    std::vector<DocInfo> docs;
    std::vector<AttributeTree> trees;
    std::vector<Fragment> fragments;
    kernels::Matrix matrix;

    nlohmann::json to_json() const;
    static AttributeForest from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static AttributeForest load(const std::string& path);

    const AttributeTree* tree_for(const std::string& doc_id) const;
    const DocInfo* doc_for(const std::string& doc_id) const;
};

struct ClassifyResult {
    TemplateKind kind = TemplateKind::method;
    bool flagged = false;
};

// Judge-backed template classification; unknown or failed verdicts default
// to a flagged method classification.
ClassifyResult classify_template(const corpus::DocMeta& doc, llm::Gateway& gw);

// One completion per template field; unsupported fields become the sentinel.
// Throws ExtractionError when the doc has no text or no field is supported.
AttributeTree extract_attribute_tree(const corpus::DocMeta& doc, TemplateKind kind,
                                     llm::Gateway& gw, const TemplateSet& templates);

// Serializes every non-sentinel leaf as "doc_id / path: value", embeds and
// indexes them.
AttributeForest build_forest(const std::vector<AttributeTree>& trees,
                             const std::vector<DocInfo>& docs, const std::string& topic,
                             llm::Gateway& gw);

struct Retrieved {
    std::string fragment;
    std::string doc_id;
    std::string path;
    double score = 0.0;
};

// Exact full-scan cosine top-k over the fragment index. Ties resolve by
// (doc_id, path). An empty forest yields an empty result.
std::vector<Retrieved> retrieve(const AttributeForest& forest, const std::string& query,
                                std::size_t k, llm::Gateway& gw);

}  // namespace survey::atree
