#include "survey/refine.hpp"

#include <algorithm>
#include <map>

#include "survey/errors.hpp"
#include "survey/util.hpp"

namespace survey::refine {

using nlohmann::json;

void to_json(json& j, const RewriteResult& r) {
    j = json{{"paragraph", r.paragraph},
             {"added", r.added},
             {"removed", r.removed},
             {"retrieved_ids", r.retrieved_ids},
             {"flagged", r.flagged}};
}

RewriteResult rewrite_paragraph(const std::string& paragraph,
                                const atree::AttributeForest& forest, llm::Gateway& gw,
                                std::size_t retrieve_k, const std::string& context_before,
                                const std::string& context_after) {
    if (util::trim(paragraph).empty()) throw ArgumentError("empty paragraph");

    auto retrieved = atree::retrieve(forest, paragraph, retrieve_k, gw);

    RewriteResult result;
    for (const auto& r : retrieved) {
        if (std::find(result.retrieved_ids.begin(), result.retrieved_ids.end(), r.doc_id) ==
            result.retrieved_ids.end()) {
            result.retrieved_ids.push_back(r.doc_id);
        }
    }

    std::string prompt = "task: rewrite-paragraph\n";
    prompt += "paragraph:\n" + paragraph + "\n";
    if (!context_before.empty()) prompt += "context before:\n" + context_before + "\n";
    if (!context_after.empty()) prompt += "context after:\n" + context_after + "\n";
    prompt += "references:\n";
    for (const auto& r : retrieved) prompt += "[" + r.doc_id + "] " + r.fragment + "\n";
    prompt += "Rewrite the paragraph: drop citations the references do not support, add relevant "
              "keys from the listed references only, and polish the wording. Reply with the "
              "rewritten paragraph only.";

    std::string rewritten = util::trim(gw.complete(prompt));
    if (rewritten.empty()) rewritten = paragraph;

    std::vector<std::string> stripped;
    result.paragraph = compose::strip_unknown_keys(rewritten, result.retrieved_ids, stripped);
    result.flagged = !stripped.empty();

    auto distinct = [](const std::string& text) {
        std::vector<std::string> keys;
        for (const auto& k : util::extract_citation_keys(text)) {
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
        }
        return keys;
    };
    auto original_keys = distinct(paragraph);
    auto final_keys = distinct(result.paragraph);
    for (const auto& k : original_keys) {
        if (std::find(final_keys.begin(), final_keys.end(), k) == final_keys.end())
            result.removed.push_back(k);
    }
    for (const auto& k : final_keys) {
        if (std::find(original_keys.begin(), original_keys.end(), k) == original_keys.end())
            result.added.push_back(k);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Artifact templates
// ---------------------------------------------------------------------------

ArtifactTemplates ArtifactTemplates::defaults() {
    ArtifactTemplates t;
    t.templates.push_back({"method-comparison", "table", "Comparison of surveyed methods",
                           "method", {"core method", "results"}});
    t.templates.push_back({"benchmark-overview", "table", "Benchmarks referenced in this survey",
                           "benchmark", {"task", "metrics"}});
    t.templates.push_back({"topic-taxonomy", "taxonomy-tree", "Taxonomy of the surveyed topic",
                           "any", {}});
    t.templates.push_back({"publication-timeline", "timeline", "Publication timeline of the references",
                           "any", {}});
    t.templates.push_back({"reference-kinds", "bar-comparison", "Distribution of reference types",
                           "any", {}});
    return t;
}

ArtifactTemplates ArtifactTemplates::from_file(const std::string& path) {
    return from_json(json::parse(util::read_file(path)));
}

ArtifactTemplates ArtifactTemplates::from_json(const json& j) {
    ArtifactTemplates t;
    for (const auto& jt : j) {
        ArtifactTemplate tmpl;
        tmpl.template_id = jt.at("template_id").get<std::string>();
        tmpl.kind = jt.at("kind").get<std::string>();
        tmpl.caption = jt.value("caption", tmpl.template_id);
        tmpl.applies_to = jt.value("applies_to", "any");
        tmpl.columns = jt.value("columns", std::vector<std::string>{});
        t.templates.push_back(std::move(tmpl));
    }
    return t;
}

json ArtifactTemplates::to_json() const {
    json j = json::array();
    for (const auto& t : templates) {
        j.push_back(json{{"template_id", t.template_id},
                         {"kind", t.kind},
                         {"caption", t.caption},
                         {"applies_to", t.applies_to},
                         {"columns", t.columns}});
    }
    return j;
}

std::string to_string(FigureType t) {
    switch (t) {
        case FigureType::taxonomy_tree: return "taxonomy-tree";
        case FigureType::timeline: return "timeline";
        case FigureType::bar_comparison: return "bar-comparison";
    }
    return "taxonomy-tree";
}

FigureType figure_type_from_string(const std::string& s) {
    if (s == "taxonomy-tree") return FigureType::taxonomy_tree;
    if (s == "timeline") return FigureType::timeline;
    if (s == "bar-comparison") return FigureType::bar_comparison;
    throw ParseError("unknown figure type: " + s);
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

namespace {

const atree::AttrNode* find_leaf(const std::vector<atree::AttrNode>& nodes,
                                 const std::string& name) {
    for (const auto& n : nodes) {
        if (n.name == name && n.is_leaf()) return &n;
        if (!n.is_leaf()) {
            if (const auto* hit = find_leaf(n.children, name)) return hit;
        }
    }
    return nullptr;
}

constexpr const char* kEmDash = "\xE2\x80\x94";  // —

}  // namespace

std::optional<TableSpec> extract_table(const std::vector<atree::AttributeTree>& trees,
                                       const ArtifactTemplate& tmpl) {
    if (tmpl.kind != "table") throw ArgumentError("template is not a table: " + tmpl.template_id);
    if (tmpl.columns.empty()) throw ArgumentError("table template without columns");

    TableSpec spec;
    spec.template_id = tmpl.template_id;
    spec.caption = tmpl.caption;
    spec.columns = tmpl.columns;

    for (const auto& tree : trees) {
        if (tmpl.applies_to != "any" && to_string(tree.kind) != tmpl.applies_to) continue;
        std::vector<std::string> values;
        for (const auto& col : tmpl.columns) {
            const auto* leaf = find_leaf(tree.nodes, col);
            if (!leaf || leaf->value == atree::kNotStated || leaf->value.empty()) {
                values.push_back(kEmDash);
            } else {
                values.push_back(leaf->value);
            }
        }
        spec.rows.emplace_back(tree.doc_id, std::move(values));
    }

    if (spec.rows.size() < 2) return std::nullopt;
    return spec;
}

std::optional<FigureSpec> build_timeline_figure(const std::vector<corpus::DocMeta>& docs,
                                                const ArtifactTemplate& tmpl) {
    json entries = json::array();
    std::vector<std::pair<std::string, std::string>> dated;
    for (const auto& d : docs) {
        if (d.published && !d.published->empty()) dated.emplace_back(*d.published, d.title);
    }
    std::sort(dated.begin(), dated.end());
    for (const auto& [date, title] : dated) {
        entries.push_back(json{{"date", date}, {"label", title}});
    }
    if (entries.size() < 2) return std::nullopt;

    FigureSpec spec;
    spec.template_id = tmpl.template_id;
    spec.kind = FigureType::timeline;
    spec.caption = tmpl.caption;
    spec.data = json{{"entries", entries}};
    return spec;
}

std::optional<FigureSpec> build_taxonomy_figure(const compose::Outline& outline,
                                                const ArtifactTemplate& tmpl) {
    if (outline.sections.empty()) return std::nullopt;
    json children = json::array();
    for (const auto& s : outline.sections) {
        json subs = json::array();
        for (const auto& sub : s.subsections) subs.push_back(json{{"label", sub}});
        children.push_back(json{{"label", s.heading}, {"children", subs}});
    }
    FigureSpec spec;
    spec.template_id = tmpl.template_id;
    spec.kind = FigureType::taxonomy_tree;
    spec.caption = tmpl.caption;
    spec.data = json{{"label", outline.title}, {"children", children}};
    return spec;
}

std::optional<FigureSpec> build_kind_distribution_figure(
    const std::vector<atree::AttributeTree>& trees, const ArtifactTemplate& tmpl) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : trees) ++counts[to_string(t.kind)];
    if (counts.size() < 2) return std::nullopt;

    json bars = json::array();
    for (const auto& [label, value] : counts) {
        bars.push_back(json{{"label", label}, {"value", value}});
    }
    FigureSpec spec;
    spec.template_id = tmpl.template_id;
    spec.kind = FigureType::bar_comparison;
    spec.caption = tmpl.caption;
    spec.data = json{{"bars", bars}};
    return spec;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string render_artifact(const TableSpec& spec) {
    if (spec.columns.empty()) throw ArgumentError("table spec without columns");
    for (const auto& [doc_id, values] : spec.rows) {
        if (values.size() != spec.columns.size())
            throw ArgumentError("table row width mismatch for " + doc_id);
    }

    std::string out = "**Table.** " + spec.caption + "\n\n";
    out += "| Reference |";
    for (const auto& c : spec.columns) out += " " + c + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < spec.columns.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& [doc_id, values] : spec.rows) {
        out += "| [" + doc_id + "] |";
        for (const auto& v : values) out += " " + v + " |";
        out += "\n";
    }
    return out;
}

namespace {

void render_taxonomy_node(const json& node, int depth, std::string& out) {
    if (!node.contains("label")) throw ArgumentError("taxonomy node without label");
    out += std::string(static_cast<std::size_t>(depth) * 2, ' ') +
           node.at("label").get<std::string>() + "\n";
    for (const auto& child : node.value("children", json::array())) {
        render_taxonomy_node(child, depth + 1, out);
    }
}

}  // namespace

std::string render_artifact(const FigureSpec& spec) {
    std::string out = "**Figure.** " + spec.caption + "\n\n";
    switch (spec.kind) {
        case FigureType::taxonomy_tree: {
            out += "```taxonomy\n";
            render_taxonomy_node(spec.data, 0, out);
            out += "```\n";
            break;
        }
        case FigureType::timeline: {
            const auto& entries = spec.data.value("entries", json::array());
            if (entries.empty()) throw ArgumentError("timeline without entries");
            out += "```timeline\n";
            for (const auto& e : entries) {
                if (!e.contains("date")) throw ArgumentError("timeline entry without date");
                out += e.at("date").get<std::string>() + "  " +
                       e.value("label", std::string{}) + "\n";
            }
            out += "```\n";
            break;
        }
        case FigureType::bar_comparison: {
            const auto& bars = spec.data.value("bars", json::array());
            if (bars.empty()) throw ArgumentError("bar chart without bars");
            std::size_t width = 0;
            for (const auto& b : bars) {
                width = std::max(width, b.at("label").get<std::string>().size());
            }
            out += "```bars\n";
            for (const auto& b : bars) {
                auto value = b.at("value").get<std::size_t>();
                std::string label = b.at("label").get<std::string>();
                out += label + std::string(width - label.size() + 2, ' ') +
                       std::string(value, '#') + " " + std::to_string(value) + "\n";
            }
            out += "```\n";
            break;
        }
    }
    return out;
}

}  // namespace survey::refine
