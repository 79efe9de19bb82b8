#include "survey/compose.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "survey/errors.hpp"
#include "survey/retrieval.hpp"
#include "survey/util.hpp"

namespace survey::compose {

using nlohmann::json;

std::size_t Outline::subsection_count() const {
    std::size_t n = 0;
    for (const auto& s : sections) n += s.subsections.size();
    return n;
}

void Outline::validate(bool require_subsections) const {
    if (sections.size() < 3)
        throw CompositionError("outline has " + std::to_string(sections.size()) +
                               " sections, need at least 3");
    if (!require_subsections) return;
    std::set<std::string> seen;
    for (const auto& s : sections) {
        if (s.subsections.empty())
            throw CompositionError("section without subsections: " + s.heading);
        for (const auto& sub : s.subsections) {
            if (!seen.insert(util::to_lower(sub)).second)
                throw CompositionError("duplicate subsection heading: " + sub);
        }
    }
}

void to_json(json& j, const Outline& o) {
    json sections = json::array();
    for (const auto& s : o.sections) {
        sections.push_back(json{{"heading", s.heading}, {"subsections", s.subsections}});
    }
    j = json{{"title", o.title}, {"sections", sections}};
}

void from_json(const json& j, Outline& o) {
    o.title = j.at("title").get<std::string>();
    o.sections.clear();
    for (const auto& js : j.at("sections")) {
        Section s;
        s.heading = js.at("heading").get<std::string>();
        s.subsections = js.value("subsections", std::vector<std::string>{});
        o.sections.push_back(std::move(s));
    }
}

void to_json(json& j, const Hint& h) {
    j = json{{"source", h.source}, {"text", h.text}};
}

void from_json(const json& j, Hint& h) {
    h.source = j.at("source").get<std::string>();
    h.text = j.at("text").get<std::string>();
}

void to_json(json& j, const MergeEvent& m) {
    j = json{{"kept", m.kept}, {"merged", m.merged}};
}

void from_json(const json& j, MergeEvent& m) {
    m.kept = j.at("kept").get<std::string>();
    m.merged = j.at("merged").get<std::string>();
}

void to_json(json& j, const SectionDraft& d) {
    json retrieved = json::array();
    for (const auto& r : d.retrieved) {
        retrieved.push_back(json{{"fragment", r.fragment},
                                 {"doc_id", r.doc_id},
                                 {"path", r.path},
                                 {"score", r.score}});
    }
    j = json{{"section", d.section},       {"subsection", d.subsection},
             {"heading", d.heading},       {"query", d.query},
             {"retrieved", retrieved},     {"paragraphs", d.paragraphs},
             {"citations", d.citations},   {"stripped", d.stripped}};
}

void from_json(const json& j, SectionDraft& d) {
    d.section = j.at("section").get<std::size_t>();
    d.subsection = j.at("subsection").get<std::size_t>();
    d.heading = j.at("heading").get<std::string>();
    d.query = j.value("query", "");
    d.retrieved.clear();
    for (const auto& jr : j.value("retrieved", json::array())) {
        d.retrieved.push_back({jr.at("fragment").get<std::string>(),
                               jr.at("doc_id").get<std::string>(),
                               jr.at("path").get<std::string>(), jr.at("score").get<double>()});
    }
    d.paragraphs = j.at("paragraphs").get<std::vector<std::string>>();
    d.citations = j.value("citations", std::vector<std::string>{});
    d.stripped = j.value("stripped", std::vector<std::string>{});
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

namespace {

std::string strip_list_marker(const std::string& line) {
    std::string s = util::trim(line);
    std::size_t i = 0;
    while (i < s.size() && (s[i] == '#' || s[i] == '-' || s[i] == '*')) ++i;
    std::size_t digits = i;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits > i && digits < s.size() && (s[digits] == '.' || s[digits] == ')')) {
        i = digits + 1;
        // handle "1.2." style numbering
        while (i < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == ')')) {
            ++i;
        }
    }
    return util::trim(s.substr(i));
}

std::vector<std::string> parse_headings(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& line : util::split_lines(text)) {
        std::string h = strip_list_marker(line);
        if (!h.empty()) out.push_back(h);
    }
    return out;
}

std::vector<std::string> dedup_with_suffix(const std::vector<std::string>& headings) {
    std::vector<std::string> out;
    std::map<std::string, int> counts;
    for (const auto& h : headings) {
        std::string key = util::to_lower(h);
        int n = ++counts[key];
        out.push_back(n == 1 ? h : h + " (" + std::to_string(n) + ")");
    }
    return out;
}

std::string outline_text(const Outline& o) {
    std::string out;
    for (std::size_t i = 0; i < o.sections.size(); ++i) {
        out += std::to_string(i + 1) + ". " + o.sections[i].heading + "\n";
        for (std::size_t j = 0; j < o.sections[i].subsections.size(); ++j) {
            out += "  " + std::to_string(i + 1) + "." + std::to_string(j + 1) + " " +
                   o.sections[i].subsections[j] + "\n";
        }
    }
    return out;
}

std::vector<std::string> parse_paragraphs(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (const auto& line : util::split_lines(text)) {
        if (util::trim(line).empty()) {
            if (!util::trim(cur).empty()) out.push_back(util::trim(cur));
            cur.clear();
        } else {
            if (!cur.empty()) cur += "\n";
            cur += line;
        }
    }
    if (!util::trim(cur).empty()) out.push_back(util::trim(cur));
    return out;
}

std::string tree_text(const atree::AttributeTree& tree) {
    std::string out;
    for (const auto& node : tree.nodes) {
        if (node.is_leaf()) {
            out += node.name + ": " + node.value + "\n";
        } else {
            out += node.name + ":\n";
            for (const auto& child : node.children) {
                out += "  " + child.name + ": " + child.value + "\n";
            }
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Outline generation
// ---------------------------------------------------------------------------

Outline generate_primary_outline(const std::string& topic, llm::Gateway& gw) {
    if (util::trim(topic).empty()) throw ArgumentError("empty topic");
    std::string prompt = "task: primary-outline\n";
    prompt += "topic: " + topic + "\n";
    prompt += "Produce 4-8 top-level section headings for an academic survey on the topic, one "
              "per line, starting with an introduction and ending with a conclusion.";

    auto parse = [&](const std::string& response) {
        return dedup_with_suffix(parse_headings(response));
    };

    auto headings = parse(gw.complete(prompt));
    if (headings.size() < 3) {
        headings = parse(gw.complete(prompt + "\nList at least 4 headings, one per line."));
    }
    if (headings.size() < 3)
        throw CompositionError("primary outline has fewer than 3 sections");
    if (headings.size() > 8) headings.resize(8);

    Outline o;
    o.title = topic;
    for (const auto& h : headings) o.sections.push_back({h, {}});
    return o;
}

std::vector<Hint> generate_hints(const atree::AttributeForest& forest, const Outline& primary,
                                 llm::Gateway& gw, std::vector<std::string>* warnings) {
    if (forest.trees.empty()) throw ArgumentError("generate_hints: empty forest");

    const std::size_t n = forest.trees.size();
    std::vector<Hint> hints(n);
    std::vector<char> ok(n, 0);
    std::vector<std::string> errors(n);

    const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t idx = 0; idx < count; ++idx) {
        const auto& tree = forest.trees[static_cast<std::size_t>(idx)];
        std::string prompt = "task: hint\n";
        prompt += "doc: " + tree.doc_id + "\n";
        prompt += "attribute tree:\n" + tree_text(tree);
        prompt += "primary outline:\n" + outline_text(primary);
        prompt += "Write one hint describing what this reference contributes to the survey "
                  "framework.";
        try {
            std::string text = util::trim(gw.complete(prompt));
            if (!text.empty()) {
                hints[static_cast<std::size_t>(idx)] = Hint{tree.doc_id, text};
                ok[static_cast<std::size_t>(idx)] = 1;
            } else {
                errors[static_cast<std::size_t>(idx)] = "empty hint for " + tree.doc_id;
            }
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(idx)] = "hint failed for " + tree.doc_id + ": " + e.what();
        }
    }

    std::vector<Hint> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (ok[i]) {
            out.push_back(std::move(hints[i]));
        } else if (warnings) {
            warnings->push_back(errors[i]);
        }
    }
    return out;
}

Outline generate_secondary_outline(const Outline& primary, const std::vector<Hint>& hints,
                                   llm::Gateway& gw) {
    if (hints.empty()) throw ArgumentError("generate_secondary_outline: no hints");
    primary.validate(false);

    std::string hint_block;
    for (const auto& h : hints) hint_block += "- (" + h.source + ") " + h.text + "\n";

    Outline out = primary;
    for (auto& section : out.sections) {
        std::string prompt = "task: secondary-outline\n";
        prompt += "section: " + section.heading + "\n";
        prompt += "primary outline:\n" + outline_text(primary);
        prompt += "hints:\n" + hint_block;
        prompt += "Propose 2-6 subsection headings for this section, one per line.";

        auto subs = parse_headings(gw.complete(prompt));
        if (subs.empty()) {
            subs = parse_headings(
                gw.complete(prompt + "\nList between 2 and 6 headings, one per line."));
        }
        if (subs.empty())
            throw CompositionError("no subsections generated for section: " + section.heading);
        if (subs.size() > 6) subs.resize(6);
        section.subsections = subs;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Separate-then-reorganize
// ---------------------------------------------------------------------------

ReorganizeResult reorganize_outline(const Outline& outline, llm::Gateway& gw,
                                    double dup_threshold) {
    if (outline.subsection_count() == 0)
        throw ArgumentError("reorganize_outline: outline has no subsections");

    ReorganizeResult result;

    // detach headings, auto-merging exact case-insensitive duplicates
    std::vector<std::string> headings;
    std::map<std::string, std::string> canonical;
    for (const auto& section : outline.sections) {
        for (const auto& sub : section.subsections) {
            std::string key = util::to_lower(sub);
            auto it = canonical.find(key);
            if (it != canonical.end()) {
                result.merges.push_back({it->second, sub});
            } else {
                canonical[key] = sub;
                headings.push_back(sub);
            }
        }
    }

    // near-duplicate pre-screen, judged pairwise
    std::vector<bool> merged(headings.size(), false);
    if (headings.size() > 1) {
        auto vectors = gw.embed(headings);
        llm::JudgeSchema schema{llm::JudgeField::boolean("merge")};
        for (std::size_t i = 0; i < headings.size(); ++i) {
            if (merged[i]) continue;
            for (std::size_t j = i + 1; j < headings.size(); ++j) {
                if (merged[j]) continue;
                if (retrieval::cos_sim(vectors[i], vectors[j]) <= dup_threshold) continue;
                std::string prompt = "task: merge-judge\n";
                prompt += "a: " + headings[i] + "\n";
                prompt += "b: " + headings[j] + "\n";
                prompt += "Are these subsection headings duplicates that should be merged? "
                          "Answer {\"merge\": true|false}.";
                try {
                    auto verdict = gw.judge(prompt, schema);
                    if (verdict.at("merge").get<bool>()) {
                        merged[j] = true;
                        result.merges.push_back({headings[i], headings[j]});
                    }
                } catch (const std::exception& e) {
                    result.warnings.push_back("merge judgment failed for '" + headings[j] +
                                              "': " + std::string(e.what()));
                }
            }
        }
    }

    std::vector<std::string> survivors;
    for (std::size_t i = 0; i < headings.size(); ++i) {
        if (!merged[i]) survivors.push_back(headings[i]);
    }

    // reassign survivors to sections
    std::string prompt = "task: reassign-headings\n";
    prompt += "sections:\n";
    for (std::size_t i = 0; i < outline.sections.size(); ++i) {
        prompt += std::to_string(i + 1) + ". " + outline.sections[i].heading + "\n";
    }
    prompt += "subsection headings:\n";
    for (const auto& h : survivors) prompt += "- " + h + "\n";
    prompt += "Assign every subsection heading to exactly one section. Reply one line per "
              "heading as \"<section number> | <heading>\".";

    std::string response = gw.complete(prompt);

    Outline reorganized;
    reorganized.title = outline.title;
    for (const auto& s : outline.sections) reorganized.sections.push_back({s.heading, {}});

    std::set<std::string> assigned;
    std::map<std::string, std::string> survivor_by_key;
    for (const auto& h : survivors) survivor_by_key[util::to_lower(h)] = h;

    for (const auto& line : util::split_lines(response)) {
        if (util::trim(line).empty()) continue;
        auto bar = line.find('|');
        if (bar == std::string::npos) continue;
        std::string num = util::trim(line.substr(0, bar));
        std::string heading = util::trim(line.substr(bar + 1));
        std::size_t idx = 0;
        try {
            idx = static_cast<std::size_t>(std::stoul(strip_list_marker(num)));
        } catch (...) {
            continue;
        }
        auto it = survivor_by_key.find(util::to_lower(heading));
        if (it == survivor_by_key.end()) {
            result.warnings.push_back("reassignment proposed unknown heading: " + heading);
            continue;
        }
        if (idx < 1 || idx > reorganized.sections.size()) {
            result.warnings.push_back("reassignment used invalid section number for: " + heading);
            continue;
        }
        if (!assigned.insert(util::to_lower(it->second)).second) {
            result.warnings.push_back("heading assigned twice, keeping first: " + it->second);
            continue;
        }
        reorganized.sections[idx - 1].subsections.push_back(it->second);
    }

    for (const auto& h : survivors) {
        if (!assigned.count(util::to_lower(h)))
            throw CompositionError("reassignment dropped heading: " + h);
    }
    for (const auto& s : reorganized.sections) {
        if (s.subsections.empty())
            throw CompositionError("reassignment left section empty: " + s.heading);
    }
    reorganized.validate(true);

    result.outline = std::move(reorganized);
    return result;
}

Outline generate_onestep_outline(const std::string& topic, llm::Gateway& gw) {
    if (util::trim(topic).empty()) throw ArgumentError("empty topic");
    std::string prompt = "task: onestep-outline\n";
    prompt += "topic: " + topic + "\n";
    prompt += "Produce a complete two-level survey outline: section headings flush left, "
              "subsection headings indented by two spaces, one per line.";

    auto parse = [&](const std::string& response) {
        Outline o;
        o.title = topic;
        for (const auto& line : util::split_lines(response)) {
            if (util::trim(line).empty()) continue;
            bool indented = line.size() > 1 && (line[0] == ' ' || line[0] == '\t');
            std::string h = strip_list_marker(line);
            if (h.empty()) continue;
            if (indented && !o.sections.empty()) {
                o.sections.back().subsections.push_back(h);
            } else {
                o.sections.push_back({h, {}});
            }
        }
        return o;
    };

    Outline o = parse(gw.complete(prompt));
    auto shaped = [](const Outline& ol) {
        if (ol.sections.size() < 3) return false;
        for (const auto& s : ol.sections) {
            if (s.subsections.empty()) return false;
        }
        return true;
    };
    if (!shaped(o)) {
        o = parse(gw.complete(prompt + "\nEvery section needs at least one indented subsection."));
    }
    if (!shaped(o)) throw CompositionError("one-step outline is malformed");

    if (o.sections.size() > 8) o.sections.resize(8);
    std::vector<std::string> all;
    for (auto& s : o.sections) {
        if (s.subsections.size() > 6) s.subsections.resize(6);
        for (const auto& sub : s.subsections) all.push_back(sub);
    }
    auto unique = dedup_with_suffix(all);
    std::size_t cursor = 0;
    for (auto& s : o.sections) {
        for (auto& sub : s.subsections) sub = unique[cursor++];
    }
    o.validate(true);
    return o;
}

// ---------------------------------------------------------------------------
// Subsection drafting
// ---------------------------------------------------------------------------

std::string strip_unknown_keys(const std::string& text, const std::vector<std::string>& allowed,
                               std::vector<std::string>& stripped) {
    std::set<std::string> allow(allowed.begin(), allowed.end());
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '[') {
            std::size_t close = text.find(']', i + 1);
            if (close != std::string::npos) {
                std::string key = text.substr(i + 1, close - i - 1);
                auto keys = util::extract_citation_keys(text.substr(i, close - i + 1));
                if (keys.size() == 1 && !allow.count(key)) {
                    if (std::find(stripped.begin(), stripped.end(), key) == stripped.end())
                        stripped.push_back(key);
                    // drop the bracket token and a directly preceding space, unless
                    // another citation follows and still needs it
                    bool next_is_key = close + 1 < text.size() && text[close + 1] == '[';
                    if (!out.empty() && out.back() == ' ' && !next_is_key &&
                        (close + 1 >= text.size() || text[close + 1] == ' ' ||
                         std::ispunct(static_cast<unsigned char>(text[close + 1])))) {
                        out.pop_back();
                    }
                    i = close;
                    continue;
                }
            }
        }
        out += text[i];
    }
    return out;
}

namespace {

std::string draft_summary(const SectionDraft& draft) {
    if (draft.paragraphs.empty()) return "";
    std::string s = draft.paragraphs.front();
    if (s.size() > 300) s = s.substr(0, 300) + "...";
    return s;
}

}  // namespace

SectionDraft generate_subsection(const Outline& outline, SubsectionId id,
                                 const atree::AttributeForest& forest,
                                 const std::vector<SectionDraft>& already_written,
                                 llm::Gateway& gw, std::size_t retrieve_k) {
    if (id.section >= outline.sections.size() ||
        id.subsection >= outline.sections[id.section].subsections.size()) {
        throw ArgumentError("invalid subsection id");
    }

    SectionDraft draft;
    draft.section = id.section;
    draft.subsection = id.subsection;
    draft.heading = outline.sections[id.section].subsections[id.subsection];
    draft.query = outline.sections[id.section].heading + ": " + draft.heading;
    draft.retrieved = atree::retrieve(forest, draft.query, retrieve_k, gw);

    std::vector<std::string> allowed;
    for (const auto& r : draft.retrieved) {
        if (std::find(allowed.begin(), allowed.end(), r.doc_id) == allowed.end())
            allowed.push_back(r.doc_id);
    }

    std::string prompt = "task: draft-subsection\n";
    prompt += "heading: " + draft.heading + "\n";
    prompt += "section: " + outline.sections[id.section].heading + "\n";
    prompt += "outline:\n" + outline_text(outline);
    prompt += "references:\n";
    for (const auto& r : draft.retrieved) prompt += "[" + r.doc_id + "] " + r.fragment + "\n";
    if (!already_written.empty()) {
        prompt += "previously written:\n";
        for (const auto& d : already_written) {
            prompt += "- " + d.heading + ": " + draft_summary(d) + "\n";
        }
    }
    prompt += "Write this subsection as one or more paragraphs separated by blank lines, citing "
              "references inline by their bracketed keys. Use only the listed keys.";

    auto paragraphs = parse_paragraphs(gw.complete(prompt));
    if (paragraphs.empty()) {
        paragraphs = parse_paragraphs(gw.complete(prompt + "\nWrite at least one paragraph."));
    }
    if (paragraphs.empty())
        throw CompositionError("no paragraphs generated for subsection: " + draft.heading);

    for (auto& p : paragraphs) p = strip_unknown_keys(p, allowed, draft.stripped);
    draft.paragraphs = paragraphs;

    for (const auto& p : draft.paragraphs) {
        for (const auto& key : util::extract_citation_keys(p)) {
            if (std::find(draft.citations.begin(), draft.citations.end(), key) ==
                draft.citations.end()) {
                draft.citations.push_back(key);
            }
        }
    }
    return draft;
}

}  // namespace survey::compose
