#include <doctest.h>

#include <algorithm>
#include <set>

#include "survey/errors.hpp"
#include "survey/evalkit.hpp"
#include "survey/retrieval.hpp"
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

// forest with doc metadata and a fragment per doc
atree::AttributeForest eval_forest(llm::Gateway& gw, int n) {
    std::vector<atree::AttributeTree> trees;
    std::vector<atree::DocInfo> infos;
    for (int i = 0; i < n; ++i) {
        std::string id = "d" + std::to_string(i);
        atree::AttributeTree t;
        t.doc_id = id;
        t.kind = atree::TemplateKind::method;
        t.nodes.push_back({"core method", "method of " + id, {}});
        trees.push_back(std::move(t));
        infos.push_back({id, "Title " + id, "Abstract of " + id + "."});
    }
    return atree::build_forest(trees, infos, "eval topic", gw);
}

// a rendered survey with four claims and five citation instances
std::string rendered_survey() {
    return "# Topic\n"
           "\n"
           "## 1. Body\n"
           "\n"
           "### 1.1. Part\n"
           "\n"
           "Claim one holds [1]. Claim two follows [2]. Claim three is shaky [3]. "
           "Claim four combines sources [1] [2].\n"
           "\n"
           "## References\n"
           "\n"
           "[1] Title d0. (d0)\n"
           "[2] Title d1. (d1)\n"
           "[3] Title d2. (d2)\n";
}

}  // namespace

TEST_CASE("f1_score: table values and degenerate zero") {
    CHECK(evalkit::f1_score(85.23, 78.12) == doctest::Approx(81.52).epsilon(0.0002));
    CHECK(evalkit::f1_score(86.33, 77.78) == doctest::Approx(81.83).epsilon(0.0002));
    CHECK(evalkit::f1_score(75.0, 80.0) == doctest::Approx(77.42).epsilon(0.0002));
    CHECK(evalkit::f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("f1 lies between min and max of recall and precision") {
    std::uint64_t state = 3;
    for (int i = 0; i < 200; ++i) {
        double r = static_cast<double>(util::splitmix64(state) % 10000) / 100.0 + 0.01;
        double p = static_cast<double>(util::splitmix64(state) % 10000) / 100.0 + 0.01;
        double f1 = evalkit::f1_score(r, p);
        CHECK(f1 >= std::min(r, p) - 1e-9);
        CHECK(f1 <= std::max(r, p) + 1e-9);
    }
}

TEST_CASE("parse_rendered_survey: reference map and prose sentences") {
    auto parsed = evalkit::parse_rendered_survey(rendered_survey());
    CHECK(parsed.reference_map.size() == 3);
    CHECK(parsed.reference_map.at("1") == "d0");
    CHECK(parsed.reference_map.at("3") == "d2");
    REQUIRE(parsed.sentences.size() == 4);

    // deterministic: same text, same claims
    auto again = evalkit::parse_rendered_survey(rendered_survey());
    CHECK(parsed.sentences == again.sentences);
}

TEST_CASE("citation_metrics: hand-computed recall, precision and f1") {
    // 3 of 4 claims supported, 4 of 5 citation instances relevant
    json rules = json::array();
    rules.push_back(rule(json::array({"task: claim-support", "Claim three"}),
                         "{\"supported\": false}"));
    rules.push_back(rule("task: claim-support", "{\"supported\": true}"));
    rules.push_back(rule(json::array({"task: citation-relevance", "Claim three"}),
                         "{\"relevant\": false}"));
    rules.push_back(rule("task: citation-relevance", "{\"relevant\": true}"));
    auto gw = mock_gateway(rules);
    auto forest = eval_forest(*gw, 3);

    auto report = evalkit::citation_metrics(rendered_survey(), forest, *gw);
    CHECK(report.per_claim.size() == 4);
    CHECK(report.per_citation.size() == 5);
    CHECK(report.recall == doctest::Approx(75.0));
    CHECK(report.precision == doctest::Approx(80.0));
    CHECK(report.f1 == doctest::Approx(77.42).epsilon(0.0002));
    CHECK(report.excluded_claims == 0);

    // invariant: f1 equals the harmonic mean of the reported numbers
    CHECK(report.f1 == doctest::Approx(evalkit::f1_score(report.recall, report.precision)));
}

TEST_CASE("citation_metrics: unanimity and judge exclusions") {
    SUBCASE("all supported and relevant scores 100 everywhere") {
        json rules = json::array();
        rules.push_back(rule("task: claim-support", "{\"supported\": true}"));
        rules.push_back(rule("task: citation-relevance", "{\"relevant\": true}"));
        auto gw = mock_gateway(rules);
        auto forest = eval_forest(*gw, 3);
        auto report = evalkit::citation_metrics(rendered_survey(), forest, *gw);
        CHECK(report.recall == doctest::Approx(100.0));
        CHECK(report.precision == doctest::Approx(100.0));
        CHECK(report.f1 == doctest::Approx(100.0));
    }
    SUBCASE("failed judgments are excluded from both sides") {
        json rules = json::array();
        rules.push_back(json{{"match", json::array({"task: claim-support", "Claim one"})},
                             {"error", true}});
        rules.push_back(rule("task: claim-support", "{\"supported\": true}"));
        rules.push_back(rule("task: citation-relevance", "{\"relevant\": true}"));
        auto gw = mock_gateway(rules);
        auto forest = eval_forest(*gw, 3);
        auto report = evalkit::citation_metrics(rendered_survey(), forest, *gw);
        CHECK(report.excluded_claims == 1);
        CHECK(report.recall == doctest::Approx(100.0));  // 3 of 3 judged
    }
}

TEST_CASE("citation_metrics: unique-citations toggle changes the denominator") {
    // d0 cited twice (instances 1 and 4), once relevant and once not
    json rules = json::array();
    rules.push_back(rule(json::array({"task: citation-relevance", "Claim one"}),
                         "{\"relevant\": false}"));
    rules.push_back(rule("task: citation-relevance", "{\"relevant\": true}"));
    rules.push_back(rule("task: claim-support", "{\"supported\": true}"));
    auto gw = mock_gateway(rules);
    auto forest = eval_forest(*gw, 3);

    evalkit::EvalOptions instances;
    auto by_instance = evalkit::citation_metrics(rendered_survey(), forest, *gw, instances);
    CHECK(by_instance.precision == doctest::Approx(80.0));  // 4 of 5 instances

    evalkit::EvalOptions unique;
    unique.unique_citations = true;
    auto by_work = evalkit::citation_metrics(rendered_survey(), forest, *gw, unique);
    CHECK(by_work.precision == doctest::Approx(100.0));  // all 3 works have a relevant instance
}

TEST_CASE("content_rubric: averaging, range recovery and invalid dimensions") {
    SUBCASE("from_values reproduces the headline average") {
        auto s = evalkit::RubricScores::from_values(4.95, 4.91, 4.94, 4.10, 4.05);
        CHECK(s.avg == doctest::Approx(4.59).epsilon(0.0011));
    }
    SUBCASE("scripted dimension scores average correctly") {
        json rules = json::array();
        rules.push_back(rule("task: rubric-coverage", "score: 4.95"));
        rules.push_back(rule("task: rubric-structure", "score: 4.91"));
        rules.push_back(rule("task: rubric-relevance", "score: 4.94"));
        rules.push_back(rule("task: rubric-synthesis", "score: 4.10"));
        rules.push_back(rule("task: rubric-critical-analysis", "score: 4.05"));
        auto gw = mock_gateway(rules);
        auto s = evalkit::content_rubric("survey text", "topic", *gw);
        CHECK(s.coverage == doctest::Approx(4.95));
        CHECK(s.avg == doctest::Approx(4.59).epsilon(0.0011));
        CHECK(s.invalid.empty());
    }
    SUBCASE("all fives average to five") {
        auto gw = mock_gateway(json::array({rule("task: rubric-", "score: 5")}));
        auto s = evalkit::content_rubric("survey text", "topic", *gw);
        CHECK(s.avg == doctest::Approx(5.0));
    }
    SUBCASE("persistent out-of-range score invalidates the dimension") {
        json rules = json::array();
        rules.push_back(rule("task: rubric-coverage", "score: 7"));
        rules.push_back(rule("task: rubric-", "score: 4"));
        auto gw = mock_gateway(rules);
        auto s = evalkit::content_rubric("survey text", "topic", *gw);
        CHECK(s.invalid == std::vector<std::string>{"coverage"});
        CHECK(s.avg == doctest::Approx(4.0));  // over the four valid dimensions
    }
}

TEST_CASE("iou: examples and properties") {
    CHECK(evalkit::iou({"a", "b"}, {"a", "b"}) == doctest::Approx(1.0));
    CHECK(evalkit::iou({"a"}, {"b"}) == doctest::Approx(0.0));
    CHECK(evalkit::iou({"a", "b", "c"}, {"b", "c", "d"}) == doctest::Approx(0.5));
    CHECK(evalkit::iou({}, {}) == doctest::Approx(1.0));

    std::uint64_t state = 9;
    for (int trial = 0; trial < 200; ++trial) {
        std::set<std::string> a, b;
        for (int i = 0; i < 12; ++i) {
            if (util::splitmix64(state) % 2) a.insert("e" + std::to_string(i));
            if (util::splitmix64(state) % 2) b.insert("e" + std::to_string(i));
        }
        double ab = evalkit::iou(a, b);
        CHECK(ab == evalkit::iou(b, a));  // symmetry
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        if (!a.empty()) CHECK(evalkit::iou(a, a) == doctest::Approx(1.0));
        // monotone under adding a shared element
        std::set<std::string> a2 = a, b2 = b;
        a2.insert("shared");
        b2.insert("shared");
        CHECK(evalkit::iou(a2, b2) >= ab - 1e-12);
    }
}

TEST_CASE("relevance_semantic: identity, mean, permutation invariance") {
    auto gw = mock_gateway(json::array());
    std::string topic = "graph neural networks";
    std::vector<corpus::DocMeta> docs(3);
    for (int i = 0; i < 3; ++i) {
        docs[i].doc_id = "d" + std::to_string(i);
        docs[i].title = "T" + std::to_string(i);
        docs[i].abstract_text = "Abstract " + std::to_string(i) + ".";
    }
    docs[0].abstract_text = topic;  // identical to the topic

    double value = evalkit::relevance_semantic(docs, topic, *gw);
    // oracle: mean of the three cosines computed directly
    auto tv = gw->embed_one(topic);
    double expected = 0.0;
    for (const auto& d : docs) {
        expected += retrieval::cos_sim(gw->embed_one(d.abstract_text), tv);
    }
    expected /= 3.0;
    CHECK(value == doctest::Approx(expected));

    std::vector<corpus::DocMeta> shuffled = {docs[2], docs[0], docs[1]};
    CHECK(evalkit::relevance_semantic(shuffled, topic, *gw) == doctest::Approx(value));

    std::vector<corpus::DocMeta> single = {docs[0]};
    CHECK(evalkit::relevance_semantic(single, topic, *gw) == doctest::Approx(1.0));

    CHECK_THROWS_AS(evalkit::relevance_semantic({}, topic, *gw), ArgumentError);
}

TEST_CASE("relevance_llm: fractions and exclusions") {
    std::vector<corpus::DocMeta> docs(4);
    for (int i = 0; i < 4; ++i) {
        docs[i].doc_id = "d" + std::to_string(i);
        docs[i].title = "T" + std::to_string(i);
        docs[i].abstract_text = "Abstract " + std::to_string(i) + ".";
    }

    SUBCASE("all relevant gives 1.0") {
        auto gw = mock_gateway(
            json::array({rule("task: reference-relevance", "{\"relevant\": true}")}));
        CHECK(evalkit::relevance_llm(docs, "topic", *gw).fraction == doctest::Approx(1.0));
    }
    SUBCASE("3 of 4 relevant gives 0.75") {
        json rules = json::array();
        rules.push_back(rule(json::array({"task: reference-relevance", "doc: d2"}),
                             "{\"relevant\": false}"));
        rules.push_back(rule("task: reference-relevance", "{\"relevant\": true}"));
        auto gw = mock_gateway(rules);
        CHECK(evalkit::relevance_llm(docs, "topic", *gw).fraction == doctest::Approx(0.75));
    }
    SUBCASE("judge failure is excluded, not counted against") {
        std::vector<corpus::DocMeta> two = {docs[0], docs[1]};
        json rules = json::array();
        rules.push_back(json{{"match", json::array({"task: reference-relevance", "doc: d1"})},
                             {"error", true}});
        rules.push_back(rule("task: reference-relevance", "{\"relevant\": true}"));
        auto gw = mock_gateway(rules);
        auto result = evalkit::relevance_llm(two, "topic", *gw);
        CHECK(result.fraction == doctest::Approx(1.0));
        CHECK(result.exclusions == 1);
    }
}
