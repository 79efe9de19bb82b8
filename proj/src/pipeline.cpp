#include "survey/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <unordered_set>

#include "survey/atree.hpp"
#include "survey/errors.hpp"
#include "survey/evalkit.hpp"
#include "survey/retrieval.hpp"
#include "survey/util.hpp"

namespace survey::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kStageNames = {"acquisition", "preprocessing", "outline",
                                              "content",     "refinement",    "render"};

// ---------------------------------------------------------------------------
// Config and record serialization
// ---------------------------------------------------------------------------

AblationFlags AblationFlags::from_names(const std::vector<std::string>& names) {
    AblationFlags a;
    for (const auto& n : names) {
        if (n == "no_expansion") {
            a.no_expansion = true;
        } else if (n == "no_atree") {
            a.no_atree = true;
        } else if (n == "no_outline_opt") {
            a.no_outline_opt = true;
        } else if (n == "no_rewrite") {
            a.no_rewrite = true;
        } else {
            throw ArgumentError("unknown ablation flag: " + n);
        }
    }
    return a;
}

std::vector<std::string> AblationFlags::names() const {
    std::vector<std::string> out;
    if (no_expansion) out.push_back("no_expansion");
    if (no_atree) out.push_back("no_atree");
    if (no_outline_opt) out.push_back("no_outline_opt");
    if (no_rewrite) out.push_back("no_rewrite");
    return out;
}

void to_json(json& j, const AblationFlags& a) {
    j = json{{"no_expansion", a.no_expansion},
             {"no_atree", a.no_atree},
             {"no_outline_opt", a.no_outline_opt},
             {"no_rewrite", a.no_rewrite}};
}

void from_json(const json& j, AblationFlags& a) {
    a.no_expansion = j.value("no_expansion", false);
    a.no_atree = j.value("no_atree", false);
    a.no_outline_opt = j.value("no_outline_opt", false);
    a.no_rewrite = j.value("no_rewrite", false);
}

json RunConfig::to_json() const {
    return json{{"topic", topic},
                {"initial_keywords", initial_keywords},
                {"theta", theta},
                {"coarse_k", coarse_k},
                {"retrieve_k", retrieve_k},
                {"rewrite_k", rewrite_k},
                {"search_limit", search_limit},
                {"round_cap", round_cap},
                {"seed", seed},
                {"dup_threshold", dup_threshold},
                {"corpus", corpus_path},
                {"online_fixture", online_fixture},
                {"out", out_dir},
                {"atree_templates", atree_templates_path},
                {"artifact_templates", artifact_templates_path},
                {"gateway", gateway.to_json()},
                {"ablate", ablate}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    return c.overridden_by(j);
}

RunConfig RunConfig::overridden_by(const json& j) const {
    RunConfig c = *this;
    c.topic = j.value("topic", c.topic);
    c.initial_keywords = j.value("initial_keywords", c.initial_keywords);
    c.theta = j.value("theta", c.theta);
    c.coarse_k = j.value("coarse_k", c.coarse_k);
    c.retrieve_k = j.value("retrieve_k", c.retrieve_k);
    c.rewrite_k = j.value("rewrite_k", c.rewrite_k);
    c.search_limit = j.value("search_limit", c.search_limit);
    c.round_cap = j.value("round_cap", c.round_cap);
    c.seed = j.value("seed", c.seed);
    c.dup_threshold = j.value("dup_threshold", c.dup_threshold);
    c.corpus_path = j.value("corpus", c.corpus_path);
    c.online_fixture = j.value("online_fixture", c.online_fixture);
    c.out_dir = j.value("out", c.out_dir);
    c.atree_templates_path = j.value("atree_templates", c.atree_templates_path);
    c.artifact_templates_path = j.value("artifact_templates", c.artifact_templates_path);
    if (j.contains("gateway")) {
        json merged = c.gateway.to_json();
        merged.update(j.at("gateway"));
        c.gateway = llm::GatewayConfig::from_json(merged);
    }
    if (j.contains("ablate")) {
        if (j.at("ablate").is_array()) {
            c.ablate = AblationFlags::from_names(j.at("ablate").get<std::vector<std::string>>());
        } else {
            c.ablate = j.at("ablate").get<AblationFlags>();
        }
    }
    return c;
}

void RunConfig::validate() const {
    if (util::trim(topic).empty()) throw ArgumentError("topic must be non-empty");
    if (theta < 1) throw ArgumentError("theta must be >= 1");
    if (out_dir.empty()) throw ArgumentError("output directory is required");
    if (corpus_path.empty()) throw ArgumentError("corpus path is required");
}

void to_json(json& j, const StageRecord& s) {
    j = json{{"name", s.name},
             {"status", s.status},
             {"detail", s.detail},
             {"artifacts", s.artifacts},
             {"warnings", s.warnings},
             {"gateway_calls", s.gateway_calls},
             {"seconds", s.seconds},
             {"error", s.error}};
}

void from_json(const json& j, StageRecord& s) {
    s.name = j.at("name").get<std::string>();
    s.status = j.value("status", "pending");
    s.detail = j.value("detail", "");
    s.artifacts = j.value("artifacts", std::vector<std::string>{});
    s.warnings = j.value("warnings", std::vector<std::string>{});
    s.gateway_calls = j.value("gateway_calls", std::size_t{0});
    s.seconds = j.value("seconds", 0.0);
    s.error = j.value("error", "");
}

json RunRecord::to_json() const {
    return json{{"config", config.to_json()}, {"stages", stages}, {"status", status}};
}

RunRecord RunRecord::from_json(const json& j) {
    RunRecord r;
    r.config = RunConfig::from_json(j.at("config"));
    r.stages = j.at("stages").get<std::vector<StageRecord>>();
    r.status = j.value("status", "pending");
    return r;
}

void RunRecord::save(const std::string& path) const {
    util::write_file(path, to_json().dump(2) + "\n");
}

RunRecord RunRecord::load(const std::string& path) {
    return from_json(json::parse(util::read_file(path)));
}

const StageRecord* RunRecord::stage(const std::string& name) const {
    for (const auto& s : stages) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

void to_json(json& j, const PlacedArtifact& a) {
    j = json{{"template_id", a.template_id},
             {"kind", a.kind},
             {"section", a.section},
             {"subsection", a.subsection},
             {"doc_ids", a.doc_ids},
             {"rendered", a.rendered}};
}

void from_json(const json& j, PlacedArtifact& a) {
    a.template_id = j.at("template_id").get<std::string>();
    a.kind = j.at("kind").get<std::string>();
    a.section = j.at("section").get<std::size_t>();
    a.subsection = j.at("subsection").get<std::size_t>();
    a.doc_ids = j.value("doc_ids", std::vector<std::string>{});
    a.rendered = j.at("rendered").get<std::string>();
}

// ---------------------------------------------------------------------------
// Survey rendering
// ---------------------------------------------------------------------------

namespace {

std::string replace_keys(const std::string& text,
                         const std::map<std::string, std::size_t>& numbers) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '[') {
            std::size_t close = text.find(']', i + 1);
            if (close != std::string::npos) {
                std::string key = text.substr(i + 1, close - i - 1);
                auto it = numbers.find(key);
                if (it != numbers.end()) {
                    out += "[" + std::to_string(it->second) + "]";
                    i = close;
                    continue;
                }
            }
        }
        out += text[i];
    }
    return out;
}

}  // namespace

std::string render_survey(const compose::Outline& outline,
                          const std::vector<compose::SectionDraft>& drafts,
                          const std::vector<PlacedArtifact>& artifacts,
                          const std::vector<corpus::DocMeta>& references) {
    std::map<std::string, const corpus::DocMeta*> refs;
    for (const auto& r : references) refs[r.doc_id] = &r;

    std::map<std::pair<std::size_t, std::size_t>, const compose::SectionDraft*> drafts_by_id;
    for (const auto& d : drafts) drafts_by_id[{d.section, d.subsection}] = &d;
    for (std::size_t i = 0; i < outline.sections.size(); ++i) {
        for (std::size_t j = 0; j < outline.sections[i].subsections.size(); ++j) {
            if (!drafts_by_id.count({i, j}))
                throw RenderError("missing draft for subsection " + std::to_string(i + 1) + "." +
                                  std::to_string(j + 1));
        }
    }

    // document-order blocks, before citation numbering
    struct Block {
        std::string text;
    };
    std::vector<Block> blocks;
    blocks.push_back({"# " + outline.title});
    for (std::size_t i = 0; i < outline.sections.size(); ++i) {
        blocks.push_back({"## " + std::to_string(i + 1) + ". " + outline.sections[i].heading});
        for (std::size_t j = 0; j < outline.sections[i].subsections.size(); ++j) {
            blocks.push_back({"### " + std::to_string(i + 1) + "." + std::to_string(j + 1) +
                              ". " + outline.sections[i].subsections[j]});
            const auto* draft = drafts_by_id.at({i, j});
            for (const auto& p : draft->paragraphs) blocks.push_back({p});
            for (const auto& a : artifacts) {
                if (a.section == i && a.subsection == j) blocks.push_back({a.rendered});
            }
        }
    }

    // first-appearance citation numbering; dangling keys are render errors
    std::map<std::string, std::size_t> numbers;
    std::vector<std::string> order;
    for (const auto& b : blocks) {
        for (const auto& key : util::extract_citation_keys(b.text)) {
            if (!refs.count(key)) throw RenderError("dangling citation key: " + key);
            if (!numbers.count(key)) {
                numbers[key] = order.size() + 1;
                order.push_back(key);
            }
        }
    }

    std::string out;
    for (const auto& b : blocks) {
        std::string block = replace_keys(b.text, numbers);
        while (!block.empty() && (block.back() == '\n' || block.back() == ' ')) block.pop_back();
        out += block + "\n\n";
    }
    out += "## References\n\n";
    for (std::size_t n = 0; n < order.size(); ++n) {
        const auto& doc = *refs.at(order[n]);
        out += "[" + std::to_string(n + 1) + "] " + doc.title + ". (" + doc.doc_id + ")\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline runner
// ---------------------------------------------------------------------------

namespace {

struct Runner {
    RunConfig cfg;
    fs::path out;
    std::shared_ptr<llm::Gateway> gateway;
    RunRecord record;

    explicit Runner(RunConfig config) : cfg(std::move(config)), out(cfg.out_dir) {}

    std::string path(const std::string& rel) const { return (out / rel).string(); }

    void save_record() const { record.save(path("run.json")); }

    void write_json(const std::string& rel, const json& j, StageRecord& st) {
        util::write_file(path(rel), j.dump(2) + "\n");
        st.artifacts.push_back(rel);
    }

    // ---- stages -----------------------------------------------------------

    void stage_acquisition(StageRecord& st) {
        corpus::Corpus corp;
        corp.ingest(cfg.corpus_path);
        if (!cfg.online_fixture.empty()) {
            corp.set_online_source(std::make_shared<corpus::FixtureOnlineSource>(
                corpus::FixtureOnlineSource::from_file(cfg.online_fixture)));
        }
        corp.set_retry_policy(cfg.gateway.max_retries, cfg.gateway.retry_backoff_ms);

        json doc;
        doc["topic"] = cfg.topic;
        std::vector<std::string> k0 =
            cfg.initial_keywords.empty() ? std::vector<std::string>{cfg.topic}
                                         : cfg.initial_keywords;
        doc["initial_keywords"] = k0;

        std::vector<corpus::DocMeta> docs;
        if (cfg.ablate.no_expansion) {
            st.detail = "altered: keyword expansion disabled, searching initial keywords";
            std::unordered_set<std::string> seen_ids, seen_titles;
            for (const auto& kw : k0) {
                auto found = corp.search_offline(kw, cfg.search_limit);
                auto online = corp.fetch_online(kw, cfg.search_limit);
                found.insert(found.end(), online.begin(), online.end());
                for (const auto& d : found) {
                    std::string norm = util::normalized_title(d.title);
                    if (seen_ids.count(d.doc_id) || seen_titles.count(norm)) continue;
                    seen_ids.insert(d.doc_id);
                    seen_titles.insert(norm);
                    docs.push_back(d);
                }
            }
            if (docs.empty())
                throw Error("empty recall: no documents retrievable for keywords [" +
                            util::join(k0, ", ") + "]");
            doc["direct_search"] = json{{"keywords", k0}, {"docs", docs.size()}};
        } else {
            retrieval::ExpandOptions opts;
            opts.theta = cfg.theta;
            opts.search_limit = cfg.search_limit;
            opts.round_cap = cfg.round_cap;
            opts.seed = cfg.seed;
            auto result = retrieval::expand_keywords(corp, *gateway, cfg.topic, k0, opts);
            docs = result.docs;
            doc["expansion"] = retrieval::transcript_json(result);
        }

        auto coarse = retrieval::coarse_filter(docs, cfg.topic, cfg.coarse_k, *gateway);
        json coarse_j = json::array();
        for (const auto& d : coarse.decisions) {
            coarse_j.push_back(json{{"doc_id", d.doc_id}, {"sim", d.sim}, {"kept", d.kept}});
        }
        doc["coarse"] = coarse_j;

        auto fine = retrieval::fine_filter(coarse.docs, cfg.topic, *gateway);
        json fine_j = json::array();
        for (const auto& d : fine.decisions) {
            fine_j.push_back(json{{"doc_id", d.doc_id}, {"kept", d.kept}, {"flagged", d.flagged}});
            if (d.flagged) st.warnings.push_back("relevance judgment failed, doc retained: " + d.doc_id);
        }
        doc["fine"] = fine_j;
        doc["refs"] = fine.docs;
        for (const auto& w : corp.warnings()) st.warnings.push_back(w);

        if (fine.docs.empty()) throw Error("no references survive filtration");
        write_json("retrieval.json", doc, st);
    }

    std::vector<corpus::DocMeta> load_refs() const {
        json rj = json::parse(util::read_file(path("retrieval.json")));
        return rj.at("refs").get<std::vector<corpus::DocMeta>>();
    }

    void stage_preprocessing(StageRecord& st) {
        auto refs = load_refs();
        std::vector<atree::DocInfo> infos;
        for (const auto& d : refs) infos.push_back({d.doc_id, d.title, d.abstract_text});

        std::vector<atree::AttributeTree> trees;
        if (cfg.ablate.no_atree) {
            st.detail = "altered: raw reference text instead of attribute trees";
            for (const auto& d : refs) {
                atree::AttributeTree t;
                t.doc_id = d.doc_id;
                t.kind = atree::TemplateKind::method;
                t.nodes.push_back({"full text", d.body(), {}});
                trees.push_back(std::move(t));
            }
        } else {
            atree::TemplateSet templates = cfg.atree_templates_path.empty()
                                               ? atree::TemplateSet::defaults()
                                               : atree::TemplateSet::from_file(cfg.atree_templates_path);
            const std::int64_t n = static_cast<std::int64_t>(refs.size());
            std::vector<atree::AttributeTree> slots(refs.size());
            std::vector<char> ok(refs.size(), 0);
            std::vector<std::string> errs(refs.size());
#pragma omp parallel for schedule(dynamic)
            for (std::int64_t i = 0; i < n; ++i) {
                const auto& d = refs[static_cast<std::size_t>(i)];
                try {
                    auto cls = atree::classify_template(d, *gateway);
                    auto tree = atree::extract_attribute_tree(d, cls.kind, *gateway, templates);
                    tree.flagged = cls.flagged;
                    slots[static_cast<std::size_t>(i)] = std::move(tree);
                    ok[static_cast<std::size_t>(i)] = 1;
                    if (cls.flagged) {
                        errs[static_cast<std::size_t>(i)] =
                            "classification defaulted to method for " + d.doc_id;
                    }
                } catch (const std::exception& e) {
                    errs[static_cast<std::size_t>(i)] =
                        "attribute extraction failed, doc excluded: " + d.doc_id + " (" +
                        e.what() + ")";
                }
            }
            for (std::size_t i = 0; i < refs.size(); ++i) {
                if (ok[i]) {
                    trees.push_back(std::move(slots[i]));
                    if (!errs[i].empty()) st.warnings.push_back(errs[i]);
                } else {
                    st.warnings.push_back(errs[i]);
                }
            }
        }

        if (trees.empty()) throw ExtractionError("no attribute trees extracted");
        auto forest = atree::build_forest(trees, infos, cfg.topic, *gateway);
        forest.save(path("forest.json"));
        st.artifacts.push_back("forest.json");
    }

    void stage_outline(StageRecord& st) {
        auto forest = atree::AttributeForest::load(path("forest.json"));
        json doc;
        compose::Outline final_outline;
        if (cfg.ablate.no_outline_opt) {
            st.detail = "altered: single-shot outline, optimization skipped";
            final_outline = compose::generate_onestep_outline(cfg.topic, *gateway);
            doc["mode"] = "onestep";
        } else {
            auto primary = compose::generate_primary_outline(cfg.topic, *gateway);
            std::vector<std::string> hint_warnings;
            auto hints = compose::generate_hints(forest, primary, *gateway, &hint_warnings);
            for (const auto& w : hint_warnings) st.warnings.push_back(w);
            if (hints.empty()) throw CompositionError("no hints generated");
            auto secondary = compose::generate_secondary_outline(primary, hints, *gateway);
            auto reorg = compose::reorganize_outline(secondary, *gateway, cfg.dup_threshold);
            for (const auto& w : reorg.warnings) st.warnings.push_back(w);
            final_outline = reorg.outline;
            doc["mode"] = "optimized";
            doc["primary"] = primary;
            doc["hints"] = hints;
            doc["secondary"] = secondary;
            doc["merges"] = reorg.merges;
        }
        final_outline.validate(true);
        doc["final"] = final_outline;
        write_json("outline.json", doc, st);
    }

    compose::Outline load_outline() const {
        json oj = json::parse(util::read_file(path("outline.json")));
        return oj.at("final").get<compose::Outline>();
    }

    static std::string draft_name(std::size_t i, std::size_t j) {
        return "drafts/s" + std::to_string(i) + "_" + std::to_string(j) + ".json";
    }
    static std::string refined_name(std::size_t i, std::size_t j) {
        return "refined/s" + std::to_string(i) + "_" + std::to_string(j) + ".json";
    }

    void stage_content(StageRecord& st) {
        auto forest = atree::AttributeForest::load(path("forest.json"));
        auto outline = load_outline();
        fs::create_directories(out / "drafts");

        std::vector<compose::SectionDraft> written;
        for (std::size_t i = 0; i < outline.sections.size(); ++i) {
            for (std::size_t j = 0; j < outline.sections[i].subsections.size(); ++j) {
                auto draft = compose::generate_subsection(outline, {i, j}, forest, written,
                                                          *gateway, cfg.retrieve_k);
                for (const auto& key : draft.stripped) {
                    st.warnings.push_back("stripped unknown citation key [" + key + "] in '" +
                                          draft.heading + "'");
                }
                json dj = draft;
                write_json(draft_name(i, j), dj, st);
                written.push_back(std::move(draft));
            }
        }
    }

    std::vector<compose::SectionDraft> load_drafts(const compose::Outline& outline,
                                                   bool refined) const {
        std::vector<compose::SectionDraft> drafts;
        for (std::size_t i = 0; i < outline.sections.size(); ++i) {
            for (std::size_t j = 0; j < outline.sections[i].subsections.size(); ++j) {
                std::string rel = refined ? refined_name(i, j) : draft_name(i, j);
                drafts.push_back(
                    json::parse(util::read_file(path(rel))).get<compose::SectionDraft>());
            }
        }
        return drafts;
    }

    void stage_refinement(StageRecord& st) {
        auto forest = atree::AttributeForest::load(path("forest.json"));
        auto outline = load_outline();
        auto drafts = load_drafts(outline, false);
        fs::create_directories(out / "refined");

        if (cfg.ablate.no_rewrite) {
            st.detail = "skipped: rewrite";
            for (const auto& d : drafts) {
                json dj = d;
                write_json(refined_name(d.section, d.subsection), dj, st);
            }
        } else {
            json audit = json::array();
            for (auto& draft : drafts) {
                std::vector<std::string> rewritten = draft.paragraphs;
                for (std::size_t p = 0; p < draft.paragraphs.size(); ++p) {
                    std::string before = p > 0 ? draft.paragraphs[p - 1] : "";
                    std::string after =
                        p + 1 < draft.paragraphs.size() ? draft.paragraphs[p + 1] : "";
                    auto rr = refine::rewrite_paragraph(draft.paragraphs[p], forest, *gateway,
                                                        cfg.rewrite_k, before, after);
                    rewritten[p] = rr.paragraph;
                    audit.push_back(json{{"section", draft.section},
                                         {"subsection", draft.subsection},
                                         {"paragraph", p},
                                         {"retrieved_ids", rr.retrieved_ids},
                                         {"added", rr.added},
                                         {"removed", rr.removed},
                                         {"flagged", rr.flagged}});
                    if (rr.flagged) {
                        st.warnings.push_back("rewrite proposed out-of-set citation in '" +
                                              draft.heading + "' paragraph " + std::to_string(p));
                    }
                }
                draft.paragraphs = rewritten;
                draft.citations.clear();
                for (const auto& p : draft.paragraphs) {
                    for (const auto& key : util::extract_citation_keys(p)) {
                        if (std::find(draft.citations.begin(), draft.citations.end(), key) ==
                            draft.citations.end()) {
                            draft.citations.push_back(key);
                        }
                    }
                }
                json dj = draft;
                write_json(refined_name(draft.section, draft.subsection), dj, st);
            }
            write_json("rewrite_audit.json", audit, st);
        }

        // tables and figures from the attribute forest and run metadata
        refine::ArtifactTemplates templates =
            cfg.artifact_templates_path.empty()
                ? refine::ArtifactTemplates::defaults()
                : refine::ArtifactTemplates::from_file(cfg.artifact_templates_path);
        auto refs = load_refs();

        std::vector<PlacedArtifact> placed;
        for (const auto& tmpl : templates.templates) {
            std::string rendered;
            std::vector<std::string> doc_ids;
            if (tmpl.kind == "table") {
                auto spec = refine::extract_table(forest.trees, tmpl);
                if (!spec) continue;
                rendered = refine::render_artifact(*spec);
                for (const auto& [id, values] : spec->rows) doc_ids.push_back(id);
            } else if (tmpl.kind == "taxonomy-tree") {
                auto spec = refine::build_taxonomy_figure(outline, tmpl);
                if (!spec) continue;
                rendered = refine::render_artifact(*spec);
            } else if (tmpl.kind == "timeline") {
                auto spec = refine::build_timeline_figure(refs, tmpl);
                if (!spec) continue;
                rendered = refine::render_artifact(*spec);
            } else if (tmpl.kind == "bar-comparison") {
                auto spec = refine::build_kind_distribution_figure(forest.trees, tmpl);
                if (!spec) continue;
                rendered = refine::render_artifact(*spec);
            } else {
                throw ArgumentError("unknown artifact template kind: " + tmpl.kind);
            }

            // placement: subsection heading closest to the template's fields
            std::string query = tmpl.caption;
            for (const auto& c : tmpl.columns) query += " " + c;
            auto qv = gateway->embed_one(query);
            std::size_t best_i = 0, best_j = 0;
            double best = -2.0;
            for (std::size_t i = 0; i < outline.sections.size(); ++i) {
                for (std::size_t j = 0; j < outline.sections[i].subsections.size(); ++j) {
                    auto hv = gateway->embed_one(outline.sections[i].heading + " / " +
                                                 outline.sections[i].subsections[j]);
                    double s = retrieval::cos_sim(qv, hv);
                    if (s > best) {
                        best = s;
                        best_i = i;
                        best_j = j;
                    }
                }
            }
            PlacedArtifact pa;
            pa.template_id = tmpl.template_id;
            pa.kind = tmpl.kind;
            pa.section = best_i;
            pa.subsection = best_j;
            pa.doc_ids = doc_ids;
            pa.rendered = rendered;
            placed.push_back(std::move(pa));
        }
        json aj = placed;
        write_json("artifacts.json", aj, st);
    }

    void stage_render(StageRecord& st) {
        auto outline = load_outline();
        auto drafts = load_drafts(outline, true);
        auto refs = load_refs();
        auto artifacts = json::parse(util::read_file(path("artifacts.json")))
                             .get<std::vector<PlacedArtifact>>();

        std::string survey = render_survey(outline, drafts, artifacts, refs);
        util::write_file(path("survey.md"), survey);
        st.artifacts.push_back("survey.md");

        // deterministic run report (no timings)
        auto parsed = evalkit::parse_rendered_survey(survey);
        std::set<std::string> body_keys;
        bool in_refs = false, in_fence = false;
        std::size_t dangling = 0;
        for (const auto& line : util::split_lines(survey)) {
            std::string t = util::trim(line);
            if (t.rfind("```", 0) == 0) in_fence = !in_fence;
            if (t.rfind("## References", 0) == 0) in_refs = true;
            if (in_refs || in_fence) continue;
            for (const auto& key : util::extract_citation_keys(line)) {
                body_keys.insert(key);
                if (!parsed.reference_map.count(key)) ++dangling;
            }
        }
        std::set<std::string> entry_keys;
        for (const auto& [num, id] : parsed.reference_map) entry_keys.insert(num);

        json report;
        report["topic"] = cfg.topic;
        report["seed"] = cfg.seed;
        report["ablation"] = cfg.ablate;
        json stage_summaries = json::array();
        for (const auto& s : record.stages) {
            std::string status = s.status;
            std::string detail = s.detail;
            if (s.name == "render") {
                status = "completed";
                detail = st.detail;
            }
            stage_summaries.push_back(
                json{{"name", s.name}, {"status", status}, {"detail", detail}});
        }
        report["stages"] = stage_summaries;
        json warnings = json::array();
        for (const auto& s : record.stages) {
            for (const auto& w : s.warnings) warnings.push_back(s.name + ": " + w);
        }
        for (const auto& w : st.warnings) warnings.push_back("render: " + w);
        report["warnings"] = warnings;

        std::size_t subsections = 0;
        for (const auto& s : outline.sections) subsections += s.subsections.size();
        std::size_t tables = 0, figures = 0;
        for (const auto& a : artifacts) {
            if (a.kind == "table") {
                ++tables;
            } else {
                ++figures;
            }
        }
        report["counts"] = json{{"references", refs.size()},
                                {"trees", atree::AttributeForest::load(path("forest.json")).trees.size()},
                                {"sections", outline.sections.size()},
                                {"subsections", subsections},
                                {"cited_works", parsed.reference_map.size()},
                                {"tables", tables},
                                {"figures", figures}};
        report["citation_integrity"] =
            json{{"dangling", dangling},
                 {"body_keys", body_keys.size()},
                 {"reference_entries", entry_keys.size()},
                 {"match", body_keys == entry_keys}};
        json artifact_list = json::array();
        for (const auto& s : record.stages) {
            for (const auto& a : s.artifacts) artifact_list.push_back(a);
        }
        artifact_list.push_back("report.json");
        report["artifacts"] = artifact_list;

        util::write_file(path("report.json"), report.dump(2) + "\n");
        st.artifacts.push_back("report.json");
    }

    void dispatch(StageRecord& st) {
        if (st.name == "acquisition") {
            stage_acquisition(st);
        } else if (st.name == "preprocessing") {
            stage_preprocessing(st);
        } else if (st.name == "outline") {
            stage_outline(st);
        } else if (st.name == "content") {
            stage_content(st);
        } else if (st.name == "refinement") {
            stage_refinement(st);
        } else if (st.name == "render") {
            stage_render(st);
        } else {
            throw ArgumentError("unknown stage: " + st.name);
        }
    }

    void run_from(std::size_t first) {
        for (std::size_t i = first; i < record.stages.size(); ++i) {
            StageRecord& st = record.stages[i];
            st.status = "pending";
            st.artifacts.clear();
            st.warnings.clear();
            st.error.clear();
            std::size_t calls_before = gateway->backend_calls();
            auto t0 = std::chrono::steady_clock::now();
            try {
                dispatch(st);
                st.status = "completed";
            } catch (const std::exception& e) {
                st.status = "failed";
                st.error = e.what();
            }
            st.gateway_calls = gateway->backend_calls() - calls_before;
            st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (st.status == "failed") {
                record.status = "failed";
                save_record();
                return;
            }
            save_record();
        }
        record.status = "completed";
        save_record();
    }
};

}  // namespace

RunRecord run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    Runner runner(cfg);
    fs::create_directories(runner.out);
    runner.record.config = runner.cfg;
    for (const auto& name : kStageNames) {
        StageRecord st;
        st.name = name;
        runner.record.stages.push_back(std::move(st));
    }
    runner.gateway = llm::Gateway::create(runner.cfg.gateway);
    runner.run_from(0);
    return runner.record;
}

RunRecord resume_pipeline(const std::string& run_dir, const std::string& mock_override) {
    RunRecord prior = RunRecord::load((fs::path(run_dir) / "run.json").string());
    RunConfig cfg = prior.config;
    cfg.out_dir = run_dir;
    if (!mock_override.empty()) cfg.gateway.mock_script = mock_override;

    std::size_t first = prior.stages.size();
    for (std::size_t i = 0; i < prior.stages.size(); ++i) {
        if (prior.stages[i].status != "completed") {
            first = i;
            break;
        }
    }

    Runner runner(cfg);
    runner.record = prior;
    runner.record.config = cfg;
    if (first == prior.stages.size()) return runner.record;  // nothing to do

    runner.gateway = llm::Gateway::create(cfg.gateway);
    runner.record.status = "pending";
    runner.run_from(first);
    return runner.record;
}

}  // namespace survey::pipeline
