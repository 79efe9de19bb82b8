#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "survey/atree.hpp"
#include "survey/corpus.hpp"
#include "survey/errors.hpp"
#include "survey/evalkit.hpp"
#include "survey/pipeline.hpp"
#include "survey/util.hpp"

using nlohmann::json;
using namespace survey;

namespace {

void print_record(const pipeline::RunRecord& record) {
    for (const auto& s : record.stages) {
        std::cout << "  " << s.name << ": " << s.status;
        if (!s.detail.empty()) std::cout << " (" << s.detail << ")";
        if (!s.error.empty()) std::cout << " - " << s.error;
        std::cout << "\n";
    }
    std::cout << "run " << record.status << "\n";
}

int run_generate(pipeline::RunConfig cfg, const std::string& config_path) {
    if (!config_path.empty()) {
        cfg = cfg.overridden_by(json::parse(util::read_file(config_path)));
    }
    auto record = pipeline::run_pipeline(cfg);
    print_record(record);
    return record.status == "completed" ? 0 : 1;
}

int run_eval(const std::string& survey_path, const std::string& forest_path,
             const std::string& human_refs_path, const std::string& topic_override,
             const std::string& mock_path, const std::string& config_path,
             const std::string& out_path, bool unique_citations) {
    llm::GatewayConfig gw_cfg;
    if (!config_path.empty()) {
        json cj = json::parse(util::read_file(config_path));
        gw_cfg = llm::GatewayConfig::from_json(cj.contains("gateway") ? cj.at("gateway") : cj);
    }
    if (!mock_path.empty()) {
        gw_cfg.backend = "mock";
        gw_cfg.mock_script = mock_path;
    }
    auto gateway = llm::Gateway::create(gw_cfg);

    std::string survey_md = util::read_file(survey_path);
    auto forest = atree::AttributeForest::load(forest_path);
    std::string topic = topic_override.empty() ? forest.topic : topic_override;
    if (topic.empty()) throw ArgumentError("no topic: forest has none, pass --topic");

    evalkit::EvalOptions opts;
    opts.unique_citations = unique_citations;

    auto citation = evalkit::citation_metrics(survey_md, forest, *gateway, opts);
    auto rubric = evalkit::content_rubric(survey_md, topic, *gateway, opts);

    std::vector<corpus::DocMeta> docs;
    for (const auto& d : forest.docs) {
        corpus::DocMeta m;
        m.doc_id = d.doc_id;
        m.title = d.title;
        m.abstract_text = d.abstract_text;
        docs.push_back(std::move(m));
    }

    evalkit::RelevanceReport relevance;
    if (!docs.empty()) {
        relevance.rel_semantic = evalkit::relevance_semantic(docs, topic, *gateway);
        auto llm_rel = evalkit::relevance_llm(docs, topic, *gateway);
        relevance.rel_llm = llm_rel.fraction;
        relevance.llm_exclusions = llm_rel.exclusions;
    }
    if (!human_refs_path.empty()) {
        std::set<std::string> human, machine;
        for (const auto& line : util::split_lines(util::read_file(human_refs_path))) {
            std::string norm = util::normalized_title(line);
            if (!norm.empty()) human.insert(norm);
        }
        for (const auto& d : forest.docs) machine.insert(util::normalized_title(d.title));
        relevance.iou = evalkit::iou(human, machine);
    }

    json report{{"topic", topic},
                {"citation", citation.to_json()},
                {"rubric", rubric.to_json()},
                {"relevance", relevance.to_json()}};
    std::string text = report.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        util::write_file(out_path, text);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surveygen: retrieval-augmented academic survey generation"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_path;
    auto* ingest = app.add_subcommand("ingest", "Validate and index a JSON-lines corpus");
    ingest->add_option("corpus", ingest_path, "corpus .jsonl file")->required();

    // generate
    pipeline::RunConfig cfg;
    std::string config_path;
    std::vector<std::string> ablate_names;
    auto* generate = app.add_subcommand("generate", "Run the full survey pipeline");
    generate->add_option("--topic", cfg.topic, "survey topic");
    generate->add_option("--keywords", cfg.initial_keywords, "initial keyword set");
    generate->add_option("--corpus", cfg.corpus_path, "offline corpus .jsonl");
    generate->add_option("--online-fixture", cfg.online_fixture, "online source fixture JSON");
    generate->add_option("--theta", cfg.theta, "document threshold for keyword expansion");
    generate->add_option("--coarse-k", cfg.coarse_k, "coarse filter top-K");
    generate->add_option("--retrieve-k", cfg.retrieve_k, "fragments per subsection draft");
    generate->add_option("--rewrite-k", cfg.rewrite_k, "fragments per paragraph rewrite");
    generate->add_option("--search-limit", cfg.search_limit, "per-keyword search limit");
    generate->add_option("--round-cap", cfg.round_cap, "keyword expansion round cap");
    generate->add_option("--seed", cfg.seed, "run seed");
    generate->add_option("--mock", cfg.gateway.mock_script, "mock script JSON for the gateway");
    generate->add_option("--atree-templates", cfg.atree_templates_path,
                         "attribute tree template config");
    generate->add_option("--artifact-templates", cfg.artifact_templates_path,
                         "table/figure template config");
    generate->add_option("--ablate", ablate_names,
                         "ablation flags: no_expansion no_atree no_outline_opt no_rewrite");
    generate->add_option("--out", cfg.out_dir, "output directory");
    generate->add_option("--config", config_path, "config file (overrides flags)");

    // eval
    std::string eval_survey, eval_forest, eval_human, eval_topic, eval_mock, eval_config,
        eval_out;
    bool eval_unique = false;
    auto* eval = app.add_subcommand("eval", "Score a rendered survey");
    eval->add_option("--survey", eval_survey, "rendered survey.md")->required();
    eval->add_option("--forest", eval_forest, "forest.json of the run")->required();
    eval->add_option("--human-refs", eval_human, "human reference list (titles, one per line)");
    eval->add_option("--topic", eval_topic, "topic override");
    eval->add_option("--mock", eval_mock, "mock script JSON for the gateway");
    eval->add_option("--config", eval_config, "gateway config file");
    eval->add_option("--out", eval_out, "write the JSON report here");
    eval->add_flag("--unique-citations", eval_unique,
                   "precision over unique cited works instead of instances");

    // resume
    std::string resume_dir, resume_mock;
    auto* resume = app.add_subcommand("resume", "Resume a run from its last good stage");
    resume->add_option("--run", resume_dir, "run directory")->required();
    resume->add_option("--mock", resume_mock, "replacement mock script");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            corpus::Corpus corp;
            auto stats = corp.ingest(ingest_path);
            std::cout << "docs: " << stats.docs << "\nindex tokens: " << stats.index_size << "\n";
            return 0;
        }
        if (generate->parsed()) {
            cfg.ablate = pipeline::AblationFlags::from_names(ablate_names);
            return run_generate(cfg, config_path);
        }
        if (eval->parsed()) {
            return run_eval(eval_survey, eval_forest, eval_human, eval_topic, eval_mock,
                            eval_config, eval_out, eval_unique);
        }
        if (resume->parsed()) {
            auto record = pipeline::resume_pipeline(resume_dir, resume_mock);
            print_record(record);
            return record.status == "completed" ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
