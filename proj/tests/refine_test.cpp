#include <doctest.h>

#include <algorithm>
#include <set>

#include "survey/errors.hpp"
#include "survey/refine.hpp"
#include "survey/util.hpp"
#include "support/fixture_gen.hpp"

using namespace survey;
using nlohmann::json;

namespace {

std::shared_ptr<llm::Gateway> mock_gateway(json rules) {
    llm::GatewayConfig cfg;
    cfg.retry_backoff_ms = 0;
    return llm::Gateway::with_mock(llm::MockScript::from_json(json{{"rules", rules}}), cfg);
}

json rule(json match, const std::string& response) {
    return json{{"match", match}, {"response", response}};
}

atree::AttributeForest forest_of(llm::Gateway& gw, int n) {
    std::vector<atree::AttributeTree> trees;
    for (int i = 0; i < n; ++i) {
        atree::AttributeTree t;
        t.doc_id = "d" + std::to_string(i);
        t.kind = atree::TemplateKind::method;
        t.nodes.push_back({"problem", "problem text " + std::to_string(i), {}});
        t.nodes.push_back({"core method", "method text " + std::to_string(i), {}});
        trees.push_back(std::move(t));
    }
    return atree::build_forest(trees, {}, "topic", gw);
}

}  // namespace

TEST_CASE("rewrite_paragraph: fixed point, citation diff, closed world") {
    SUBCASE("supported paragraph is a fixed point") {
        std::string para = "Dense retrieval works well [d0] and scales [d1].";
        auto gw = mock_gateway(json::array({rule("task: rewrite-paragraph", para)}));
        auto forest = forest_of(*gw, 3);
        auto r = refine::rewrite_paragraph(para, forest, *gw, 8);
        CHECK(r.paragraph == para);
        CHECK(r.added.empty());
        CHECK(r.removed.empty());
        CHECK_FALSE(r.flagged);
    }
    SUBCASE("swap an unsupported citation for a retrieved one") {
        std::string para = "A claim with a weak citation [d2].";
        auto gw = mock_gateway(json::array(
            {rule("task: rewrite-paragraph", "A claim with a strong citation [d1].")}));
        auto forest = forest_of(*gw, 3);
        auto r = refine::rewrite_paragraph(para, forest, *gw, 8);
        CHECK(r.removed == std::vector<std::string>{"d2"});
        CHECK(r.added == std::vector<std::string>{"d1"});
        CHECK_FALSE(r.flagged);
    }
    SUBCASE("keys outside the retrieved set are stripped and flagged") {
        std::string para = "Original text [d0].";
        auto gw = mock_gateway(json::array(
            {rule("task: rewrite-paragraph", "Rewritten text [d0] with phantom [d99].")}));
        auto forest = forest_of(*gw, 3);
        auto r = refine::rewrite_paragraph(para, forest, *gw, 8);
        CHECK(r.flagged);
        CHECK_FALSE(util::contains(r.paragraph, "d99"));
        for (const auto& key : util::extract_citation_keys(r.paragraph)) {
            CHECK(std::find(r.retrieved_ids.begin(), r.retrieved_ids.end(), key) !=
                  r.retrieved_ids.end());
        }
        // citation-diff invariant: final = (original - removed) + added
        std::set<std::string> final_keys;
        for (const auto& k : util::extract_citation_keys(r.paragraph)) final_keys.insert(k);
        std::set<std::string> reconstructed{"d0"};
        for (const auto& k : r.removed) reconstructed.erase(k);
        for (const auto& k : r.added) reconstructed.insert(k);
        CHECK(final_keys == reconstructed);
    }
    SUBCASE("fuzz: rewrites never cite an unretrieved doc") {
        std::uint64_t state = 7;
        for (int trial = 0; trial < 100; ++trial) {
            // a mock that answers every rewrite with a citation-heavy response
            std::string response = "Fuzzed rewrite";
            for (int k = 0; k < 4; ++k) {
                response += " [d" + std::to_string(util::splitmix64(state) % 12) + "]";
            }
            response += " trailing [z" + std::to_string(trial) + "].";
            auto gw = mock_gateway(json::array({rule("task: rewrite-paragraph", response)}));
            auto forest = forest_of(*gw, 4);  // only d0..d3 exist
            std::string para = "Fuzz input " + std::to_string(trial) + " [d" +
                               std::to_string(util::splitmix64(state) % 12) + "].";
            auto r = refine::rewrite_paragraph(para, forest, *gw, 5);
            std::set<std::string> allowed(r.retrieved_ids.begin(), r.retrieved_ids.end());
            for (const auto& key : util::extract_citation_keys(r.paragraph)) {
                CHECK(allowed.count(key));
            }
        }
    }
    SUBCASE("empty paragraph is an argument error") {
        auto gw = mock_gateway(json::array());
        auto forest = forest_of(*gw, 2);
        CHECK_THROWS_AS(refine::rewrite_paragraph("  ", forest, *gw, 4), ArgumentError);
    }
}

namespace {

atree::AttributeTree method_tree(const std::string& id, const std::string& method,
                                 const std::string& results) {
    atree::AttributeTree t;
    t.doc_id = id;
    t.kind = atree::TemplateKind::method;
    t.nodes.push_back({"problem", "some problem", {}});
    t.nodes.push_back({"core method", method, {}});
    t.nodes.push_back({"results", results, {}});
    return t;
}

}  // namespace

TEST_CASE("extract_table: rows per qualifying tree, sentinel cells, threshold") {
    refine::ArtifactTemplate tmpl{"method-comparison", "table", "Methods compared", "method",
                                  {"core method", "results"}};
    SUBCASE("three method trees give a 3x2 table") {
        std::vector<atree::AttributeTree> trees = {method_tree("d0", "m0", "r0"),
                                                   method_tree("d1", "m1", "r1"),
                                                   method_tree("d2", "m2", "r2")};
        auto spec = refine::extract_table(trees, tmpl);
        REQUIRE(spec.has_value());
        CHECK(spec->rows.size() == 3);
        CHECK(spec->columns.size() == 2);
        CHECK(spec->rows[1].second[0] == "m1");
    }
    SUBCASE("sentinel leaf renders as an em-dash cell") {
        std::vector<atree::AttributeTree> trees = {
            method_tree("d0", "m0", "r0"), method_tree("d1", "m1", atree::kNotStated)};
        auto spec = refine::extract_table(trees, tmpl);
        REQUIRE(spec.has_value());
        CHECK(spec->rows[1].second[1] == "\xE2\x80\x94");
    }
    SUBCASE("fewer than two qualifying trees yields no table") {
        std::vector<atree::AttributeTree> trees = {method_tree("d0", "m0", "r0")};
        CHECK_FALSE(refine::extract_table(trees, tmpl).has_value());
        atree::AttributeTree survey_tree;
        survey_tree.doc_id = "s0";
        survey_tree.kind = atree::TemplateKind::survey;
        survey_tree.nodes.push_back({"scope", "x", {}});
        trees.push_back(survey_tree);  // wrong kind, still only one qualifying
        CHECK_FALSE(refine::extract_table(trees, tmpl).has_value());
    }
}

TEST_CASE("render_artifact: tables are exact pipe tables") {
    refine::TableSpec spec;
    spec.template_id = "t";
    spec.caption = "Two by two";
    spec.columns = {"core method", "results"};
    spec.rows = {{"d0", {"m0", "r0"}}, {"d1", {"m1", "\xE2\x80\x94"}}};
    std::string expected =
        "**Table.** Two by two\n"
        "\n"
        "| Reference | core method | results |\n"
        "|---|---|---|\n"
        "| [d0] | m0 | r0 |\n"
        "| [d1] | m1 | \xE2\x80\x94 |\n";
    CHECK(refine::render_artifact(spec) == expected);
    CHECK(refine::render_artifact(spec) == refine::render_artifact(spec));  // pure

    refine::TableSpec bad = spec;
    bad.rows[0].second.pop_back();
    CHECK_THROWS_AS(refine::render_artifact(bad), ArgumentError);
}

TEST_CASE("render_artifact: taxonomy figure of depth two") {
    refine::FigureSpec spec;
    spec.template_id = "tax";
    spec.kind = refine::FigureType::taxonomy_tree;
    spec.caption = "Taxonomy";
    spec.data = json{{"label", "Topic"},
                     {"children", json::array({json{{"label", "Branch A"},
                                                    {"children", json::array({json{{"label",
                                                                                    "Leaf"}}})}},
                                               json{{"label", "Branch B"}}})}};
    std::string expected =
        "**Figure.** Taxonomy\n"
        "\n"
        "```taxonomy\n"
        "Topic\n"
        "  Branch A\n"
        "    Leaf\n"
        "  Branch B\n"
        "```\n";
    CHECK(refine::render_artifact(spec) == expected);
}

TEST_CASE("render_artifact: timeline requires dates, bars render counts") {
    refine::FigureSpec timeline;
    timeline.template_id = "tl";
    timeline.kind = refine::FigureType::timeline;
    timeline.caption = "Timeline";
    timeline.data = json{{"entries", json::array({json{{"date", "2023-01-15"},
                                                       {"label", "Paper A"}},
                                                  json{{"date", "2024-02-10"},
                                                       {"label", "Paper B"}}})}};
    auto rendered = refine::render_artifact(timeline);
    CHECK(util::contains(rendered, "2023-01-15  Paper A"));

    timeline.data = json{{"entries", json::array({json{{"label", "No date"}}})}};
    CHECK_THROWS_AS(refine::render_artifact(timeline), ArgumentError);

    refine::FigureSpec bars;
    bars.template_id = "b";
    bars.kind = refine::FigureType::bar_comparison;
    bars.caption = "Kinds";
    bars.data = json{{"bars", json::array({json{{"label", "method"}, {"value", 4}},
                                           json{{"label", "survey"}, {"value", 2}}})}};
    auto bar_text = refine::render_artifact(bars);
    CHECK(util::contains(bar_text, "####"));
    CHECK(util::contains(bar_text, "method"));
}

TEST_CASE("figure builders: timeline from dated docs, kind distribution") {
    refine::ArtifactTemplate tl{"tl", "timeline", "Timeline", "any", {}};
    std::vector<corpus::DocMeta> docs(3);
    docs[0].doc_id = "d0";
    docs[0].title = "A";
    docs[0].abstract_text = "a";
    docs[0].published = "2024-05-01";
    docs[1].doc_id = "d1";
    docs[1].title = "B";
    docs[1].abstract_text = "b";
    docs[1].published = "2022-01-01";
    docs[2].doc_id = "d2";
    docs[2].title = "C";
    docs[2].abstract_text = "c";  // undated, skipped
    auto spec = refine::build_timeline_figure(docs, tl);
    REQUIRE(spec.has_value());
    auto entries = spec->data.at("entries");
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].at("date") == "2022-01-01");  // sorted by date

    refine::ArtifactTemplate bars{"b", "bar-comparison", "Kinds", "any", {}};
    std::vector<atree::AttributeTree> trees = {method_tree("d0", "m", "r"),
                                               method_tree("d1", "m", "r")};
    CHECK_FALSE(refine::build_kind_distribution_figure(trees, bars).has_value());  // one kind
    atree::AttributeTree s;
    s.doc_id = "d2";
    s.kind = atree::TemplateKind::survey;
    s.nodes.push_back({"scope", "x", {}});
    trees.push_back(s);
    auto bar_spec = refine::build_kind_distribution_figure(trees, bars);
    REQUIRE(bar_spec.has_value());
    CHECK(bar_spec->data.at("bars").size() == 2);
}
