#include "survey/atree.hpp"

#include <algorithm>
#include <set>

#include "survey/errors.hpp"
#include "survey/util.hpp"

namespace survey::atree {

using nlohmann::json;

std::string to_string(TemplateKind k) {
    switch (k) {
        case TemplateKind::method: return "method";
        case TemplateKind::benchmark: return "benchmark";
        case TemplateKind::theory: return "theory";
        case TemplateKind::survey: return "survey";
    }
    return "method";
}

TemplateKind template_kind_from_string(const std::string& s) {
    if (s == "method") return TemplateKind::method;
    if (s == "benchmark") return TemplateKind::benchmark;
    if (s == "theory") return TemplateKind::theory;
    if (s == "survey") return TemplateKind::survey;
    throw ParseError("unknown template kind: " + s);
}

TemplateSet TemplateSet::defaults() {
    TemplateSet t;
    t.fields[TemplateKind::method] = {"problem",            "core method", "key contributions",
                                      "experimental setup", "results",     "limitations"};
    t.fields[TemplateKind::benchmark] = {"task", "dataset construction", "metrics", "baselines",
                                         "findings"};
    t.fields[TemplateKind::theory] = {"claim", "assumptions", "formal results", "proof technique",
                                      "implications"};
    t.fields[TemplateKind::survey] = {"scope", "taxonomy", "key themes", "open problems"};
    return t;
}

TemplateSet TemplateSet::from_file(const std::string& path) {
    return from_json(json::parse(util::read_file(path)));
}

TemplateSet TemplateSet::from_json(const json& j) {
    TemplateSet t = defaults();
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto fields = it.value().get<std::vector<std::string>>();
        std::set<std::string> seen;
        for (const auto& f : fields) {
            if (f.empty() || !seen.insert(f).second)
                throw ParseError("template '" + it.key() + "' has empty or duplicate field");
        }
        t.fields[template_kind_from_string(it.key())] = std::move(fields);
    }
    return t;
}

json TemplateSet::to_json() const {
    json j = json::object();
    for (const auto& [kind, names] : fields) j[to_string(kind)] = names;
    return j;
}

void to_json(json& j, const AttrNode& n) {
    j = json{{"name", n.name}};
    if (n.is_leaf()) {
        j["value"] = n.value;
    } else {
        j["children"] = n.children;
    }
}

void from_json(const json& j, AttrNode& n) {
    n.name = j.at("name").get<std::string>();
    n.value = j.value("value", "");
    if (j.contains("children")) n.children = j.at("children").get<std::vector<AttrNode>>();
}

const AttrNode* AttributeTree::find(const std::string& name) const {
    for (const auto& n : nodes) {
        if (n.name == name) return &n;
    }
    return nullptr;
}

void to_json(json& j, const AttributeTree& t) {
    j = json{{"doc_id", t.doc_id}, {"kind", to_string(t.kind)}, {"nodes", t.nodes}};
    if (t.flagged) j["flagged"] = true;
}

void from_json(const json& j, AttributeTree& t) {
    t.doc_id = j.at("doc_id").get<std::string>();
    t.kind = template_kind_from_string(j.at("kind").get<std::string>());
    t.flagged = j.value("flagged", false);
    t.nodes = j.at("nodes").get<std::vector<AttrNode>>();
}

void to_json(json& j, const DocInfo& d) {
    j = json{{"doc_id", d.doc_id}, {"title", d.title}, {"abstract", d.abstract_text}};
}

void from_json(const json& j, DocInfo& d) {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.title = j.at("title").get<std::string>();
    d.abstract_text = j.at("abstract").get<std::string>();
}

// ---------------------------------------------------------------------------
// Forest
// ---------------------------------------------------------------------------

json AttributeForest::to_json() const {
    json frags = json::array();
    for (const auto& f : fragments) {
        frags.push_back(json{{"text", f.text}, {"doc_id", f.doc_id}, {"path", f.path},
                             {"vector", f.vector}});
    }
    return json{{"topic", topic},   {"embed_dim", embed_dim}, {"docs", docs},
                {"trees", trees},   {"fragments", frags}};
}

AttributeForest AttributeForest::from_json(const json& j) {
    AttributeForest f;
    f.topic = j.value("topic", "");
    f.embed_dim = j.value("embed_dim", std::size_t{0});
    f.docs = j.value("docs", std::vector<DocInfo>{});
    f.trees = j.at("trees").get<std::vector<AttributeTree>>();
    for (const auto& jf : j.at("fragments")) {
        Fragment frag;
        frag.text = jf.at("text").get<std::string>();
        frag.doc_id = jf.at("doc_id").get<std::string>();
        frag.path = jf.at("path").get<std::string>();
        frag.vector = jf.at("vector").get<Vec>();
        f.fragments.push_back(std::move(frag));
    }
    f.matrix = kernels::Matrix(f.embed_dim);
    for (const auto& frag : f.fragments) f.matrix.push_row(frag.vector);
    return f;
}

void AttributeForest::save(const std::string& path) const {
    util::write_file(path, to_json().dump(2) + "\n");
}

AttributeForest AttributeForest::load(const std::string& path) {
    return from_json(json::parse(util::read_file(path)));
}

const AttributeTree* AttributeForest::tree_for(const std::string& doc_id) const {
    for (const auto& t : trees) {
        if (t.doc_id == doc_id) return &t;
    }
    return nullptr;
}

const DocInfo* AttributeForest::doc_for(const std::string& doc_id) const {
    for (const auto& d : docs) {
        if (d.doc_id == doc_id) return &d;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Classification and extraction
// ---------------------------------------------------------------------------

ClassifyResult classify_template(const corpus::DocMeta& doc, llm::Gateway& gw) {
    if (doc.abstract_text.empty()) throw ArgumentError("doc has no abstract: " + doc.doc_id);
    std::string prompt = "task: classify-reference\n";
    prompt += "doc: " + doc.doc_id + "\n";
    prompt += "title: " + doc.title + "\n";
    prompt += "abstract: " + doc.abstract_text + "\n";
    prompt += "Classify this reference as one of: method, benchmark, theory, survey.";

    llm::JudgeSchema schema{
        llm::JudgeField::text_enum("kind", {"method", "benchmark", "theory", "survey"})};
    try {
        auto verdict = gw.judge(prompt, schema);
        return {template_kind_from_string(verdict.at("kind").get<std::string>()), false};
    } catch (const std::exception&) {
        return {TemplateKind::method, true};
    }
}

AttributeTree extract_attribute_tree(const corpus::DocMeta& doc, TemplateKind kind,
                                     llm::Gateway& gw, const TemplateSet& templates) {
    const std::string& body = doc.body();
    if (util::trim(body).empty()) throw ExtractionError("no text for doc: " + doc.doc_id);

    auto it = templates.fields.find(kind);
    if (it == templates.fields.end() || it->second.empty())
        throw ArgumentError("no template fields for kind: " + to_string(kind));

    AttributeTree tree;
    tree.doc_id = doc.doc_id;
    tree.kind = kind;

    std::size_t supported = 0;
    for (const auto& field : it->second) {
        std::string prompt = "task: extract-field\n";
        prompt += "doc: " + doc.doc_id + "\n";
        prompt += "field: " + field + "\n";
        prompt += "Extract the " + field +
                  " from the reference text below, in one or two sentences. If the text does not "
                  "state it, reply exactly \"not stated\".\n";
        prompt += "text:\n" + body;

        std::string value = util::trim(gw.complete(prompt));
        std::string lower = util::to_lower(value);
        if (value.empty() || lower.rfind(kNotStated, 0) == 0) {
            value = kNotStated;
        } else {
            ++supported;
        }
        tree.nodes.push_back(AttrNode{field, value, {}});
    }

    if (supported == 0)
        throw ExtractionError("extraction failed: every field unsupported for doc " + doc.doc_id);
    return tree;
}

// ---------------------------------------------------------------------------
// Forest build and retrieval
// ---------------------------------------------------------------------------

namespace {

void collect_leaves(const AttrNode& node, const std::string& prefix,
                    std::vector<std::pair<std::string, std::string>>& out) {
    std::string path = prefix.empty() ? node.name : prefix + "/" + node.name;
    if (node.is_leaf()) {
        out.emplace_back(path, node.value);
        return;
    }
    for (const auto& child : node.children) collect_leaves(child, path, out);
}

}  // namespace

AttributeForest build_forest(const std::vector<AttributeTree>& trees,
                             const std::vector<DocInfo>& docs, const std::string& topic,
                             llm::Gateway& gw) {
    if (trees.empty()) throw ArgumentError("build_forest: no trees");
    {
        std::set<std::string> ids;
        for (const auto& t : trees) {
            if (!ids.insert(t.doc_id).second)
                throw ArgumentError("duplicate tree doc_id: " + t.doc_id);
        }
    }

    AttributeForest forest;
    forest.topic = topic;
    forest.docs = docs;
    forest.trees = trees;

    for (const auto& tree : trees) {
        std::vector<std::pair<std::string, std::string>> leaves;
        for (const auto& node : tree.nodes) collect_leaves(node, "", leaves);
        for (const auto& [path, value] : leaves) {
            if (value == kNotStated) continue;
            Fragment f;
            f.doc_id = tree.doc_id;
            f.path = path;
            f.text = tree.doc_id + " / " + path + ": " + value;
            forest.fragments.push_back(std::move(f));
        }
    }

    std::sort(forest.fragments.begin(), forest.fragments.end(),
              [](const Fragment& a, const Fragment& b) {
                  if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
                  return a.path < b.path;
              });

    if (!forest.fragments.empty()) {
        std::vector<std::string> texts;
        texts.reserve(forest.fragments.size());
        for (const auto& f : forest.fragments) texts.push_back(f.text);
        auto vectors = gw.embed(texts);
        forest.embed_dim = vectors[0].size();
        forest.matrix = kernels::Matrix(forest.embed_dim);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            forest.fragments[i].vector = vectors[i];
            forest.matrix.push_row(vectors[i]);
        }
    }
    return forest;
}

std::vector<Retrieved> retrieve(const AttributeForest& forest, const std::string& query,
                                std::size_t k, llm::Gateway& gw) {
    if (k < 1) throw ArgumentError("retrieve: k must be >= 1");
    if (util::trim(query).empty()) throw ArgumentError("retrieve: empty query");
    if (forest.fragments.empty()) return {};

    Vec qv = gw.embed_one(query);
    auto scores = kernels::cosine_scores(qv, forest.matrix);
    auto top = kernels::top_k_indices(scores, k);

    std::vector<Retrieved> out;
    out.reserve(top.size());
    for (std::size_t idx : top) {
        const Fragment& f = forest.fragments[idx];
        out.push_back({f.text, f.doc_id, f.path, scores[idx]});
    }
    return out;
}

}  // namespace survey::atree
