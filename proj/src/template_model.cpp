#include "polybite/template_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace polybite {

using nlohmann::json;

std::string Placeholder::token() const {
    std::string t = "{" + category;
    if (index) t += std::to_string(*index);
    t += "}";
    return t;
}

std::string to_string(OracleKind kind) {
    switch (kind) {
        case OracleKind::ExpectedValueMatch: return "expected-value-match";
        case OracleKind::AnyOfKeywords: return "any-of-keywords";
        case OracleKind::StructuredProbability: return "structured-probability";
    }
    return "expected-value-match";
}

OracleKind oracle_kind_from_string(const std::string& s) {
    if (s == "expected-value-match") return OracleKind::ExpectedValueMatch;
    if (s == "any-of-keywords") return OracleKind::AnyOfKeywords;
    if (s == "structured-probability") return OracleKind::StructuredProbability;
    throw ParseError("malformed-syntax", "unknown oracle kind: " + s);
}

// -- placeholder grammar ------------------------------------------------------

namespace {

bool is_category_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Shared scanner. In strict mode malformed runs throw; in lenient mode they
// are consumed as literal text.
std::vector<PlaceholderSpan> scan(const std::string& text, bool strict) {
    std::vector<PlaceholderSpan> out;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        char c = text[i];
        if (c == '{') {
            if (i + 1 < n && text[i + 1] == '{') {
                // literal escape, skip to the matching "}}" if present
                i += 2;
                continue;
            }
            std::size_t j = i + 1;
            std::size_t cat_begin = j;
            while (j < n && is_category_char(text[j])) ++j;
            std::size_t cat_end = j;
            std::size_t num_begin = j;
            while (j < n && is_digit(text[j])) ++j;
            std::size_t num_end = j;
            bool closed = j < n && text[j] == '}';
            bool has_category = cat_end > cat_begin;
            if (closed && has_category) {
                Placeholder p;
                p.category = text.substr(cat_begin, cat_end - cat_begin);
                bool bad_index = false;
                if (num_end > num_begin) {
                    int idx = std::stoi(text.substr(num_begin, num_end - num_begin));
                    if (idx < 1) {
                        if (strict)
                            throw ParseError("malformed-placeholder",
                                             "placeholder index must be >= 1 at byte " +
                                                 std::to_string(i),
                                             static_cast<long>(i));
                        bad_index = true;
                    } else {
                        p.index = idx;
                    }
                }
                if (!bad_index) out.push_back({std::move(p), i, j + 1});
                i = j + 1;
                continue;
            }
            if (strict)
                throw ParseError("malformed-placeholder",
                                 "malformed placeholder at byte " + std::to_string(i) +
                                     (has_category ? " (unbalanced brace)"
                                                   : " (category must be UPPERCASE)"),
                                 static_cast<long>(i));
            ++i;
            continue;
        }
        if (c == '}') {
            if (i + 1 < n && text[i + 1] == '}') {
                i += 2;
                continue;
            }
            if (strict)
                throw ParseError("malformed-placeholder",
                                 "unbalanced '}' at byte " + std::to_string(i),
                                 static_cast<long>(i));
            ++i;
            continue;
        }
        ++i;
    }
    return out;
}

std::vector<Placeholder> strip_spans(std::vector<PlaceholderSpan> spans) {
    std::vector<Placeholder> out;
    out.reserve(spans.size());
    for (auto& s : spans) out.push_back(std::move(s.placeholder));
    return out;
}

}  // namespace

std::vector<Placeholder> extract_placeholders(const std::string& text) {
    return strip_spans(scan(text, /*strict=*/true));
}

std::vector<Placeholder> scan_placeholders_lenient(const std::string& text) {
    return strip_spans(scan(text, /*strict=*/false));
}

std::vector<PlaceholderSpan> scan_placeholder_spans(const std::string& text) {
    return scan(text, /*strict=*/false);
}

// -- combinatorics ------------------------------------------------------------

std::uint64_t count_instantiations(unsigned n, unsigned p) {
    if (p > n) throw MetricError("invalid-arity", "p > n in count_instantiations");
    if (p == 0 || p == n) return 1;
    if (p > n - p) p = n - p;
    std::uint64_t result = 1;
    for (unsigned k = 1; k <= p; ++k) {
        // multiply then divide keeps intermediate values integral
        result = result * (n - p + k) / k;
    }
    return result;
}

std::uint64_t count_arrangements(unsigned n, unsigned p) {
    if (p > n) throw MetricError("invalid-arity", "p > n in count_arrangements");
    std::uint64_t result = 1;
    for (unsigned k = 0; k < p; ++k) result *= (n - k);
    return result;
}

// -- instantiation ------------------------------------------------------------

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

// Next size-p subset of {0..n-1} in lexicographic order. Returns false when
// exhausted.
bool next_subset(std::vector<unsigned>& idx, unsigned n) {
    const unsigned p = static_cast<unsigned>(idx.size());
    if (p == 0) return false;
    int i = static_cast<int>(p) - 1;
    while (i >= 0 && idx[static_cast<unsigned>(i)] == n - p + static_cast<unsigned>(i)) --i;
    if (i < 0) return false;
    ++idx[static_cast<unsigned>(i)];
    for (unsigned j = static_cast<unsigned>(i) + 1; j < p; ++j) idx[j] = idx[j - 1] + 1;
    return true;
}

}  // namespace

std::string join_prompt_parts(const std::optional<std::string>& prefix, const std::string& body,
                              const std::optional<std::string>& suffix) {
    std::string out;
    auto append = [&out](const std::string& part) {
        std::string t = trim_copy(part);
        if (t.empty()) return;
        if (!out.empty()) out += ' ';
        out += t;
    };
    if (prefix) append(*prefix);
    append(body);
    if (suffix) append(*suffix);
    return out;
}

std::vector<TestCase> instantiate(const PromptTemplate& tpl, const CommunitySet& communities,
                                  InstantiationMode mode) {
    std::vector<Placeholder> slots = extract_placeholders(tpl.body);

    // Assignment follows ascending placeholder index, not textual order.
    std::sort(slots.begin(), slots.end(), [](const Placeholder& a, const Placeholder& b) {
        return a.index.value_or(0) < b.index.value_or(0);
    });

    for (const Placeholder& p : slots)
        if (p.category != slots.front().category)
            throw ConfigError("placeholder-category-mismatch",
                              "template " + tpl.id + " mixes placeholder categories " +
                                  slots.front().category + " and " + p.category);

    const unsigned p = static_cast<unsigned>(slots.size());
    const unsigned n = static_cast<unsigned>(communities.communities.size());
    if (p > n)
        throw ConfigError("insufficient-communities",
                          "template " + tpl.id + " needs " + std::to_string(p) +
                              " communities but concern '" + communities.concern + "' has " +
                              std::to_string(n));

    std::vector<std::vector<unsigned>> assignments;
    if (mode == InstantiationMode::Combination) {
        std::vector<unsigned> idx(p);
        for (unsigned k = 0; k < p; ++k) idx[k] = k;
        if (p == 0) {
            assignments.push_back({});
        } else {
            do {
                assignments.push_back(idx);
            } while (next_subset(idx, n));
        }
    } else {
        // all ordered p-tuples of distinct communities, lexicographic
        std::vector<unsigned> tuple;
        std::vector<bool> used(n, false);
        auto rec = [&](auto&& self) -> void {
            if (tuple.size() == p) {
                assignments.push_back(tuple);
                return;
            }
            for (unsigned k = 0; k < n; ++k) {
                if (used[k]) continue;
                used[k] = true;
                tuple.push_back(k);
                self(self);
                tuple.pop_back();
                used[k] = false;
            }
        };
        rec(rec);
    }

    std::vector<TestCase> cases;
    cases.reserve(assignments.size());
    for (const auto& assignment : assignments) {
        std::string body = tpl.body;
        std::vector<std::string> used;
        used.reserve(p);
        for (unsigned k = 0; k < p; ++k) {
            const std::string& community = communities.communities[assignment[k]];
            body = replace_all(body, slots[k].token(), community);
            used.push_back(community);
        }
        TestCase tc;
        tc.parent_template_id = tpl.id;
        tc.language = tpl.language;
        tc.concern = tpl.concern;
        tc.oracle = tpl.oracle;
        tc.expected_values = tpl.expected_values;
        tc.communities_used = used;
        tc.prompt = join_prompt_parts(tpl.prefix, body, tpl.suffix);
        std::string tag;
        for (std::size_t k = 0; k < used.size(); ++k) {
            if (k) tag += ',';
            tag += used[k];
        }
        tc.id = tpl.id + "[" + tag + "]";
        cases.push_back(std::move(tc));
    }
    return cases;
}

// -- library I/O --------------------------------------------------------------

namespace {

json oracle_to_json(const Oracle& oracle) {
    json j;
    j["kind"] = to_string(oracle.kind);
    switch (oracle.kind) {
        case OracleKind::ExpectedValueMatch: j["payload"] = oracle.expected; break;
        case OracleKind::AnyOfKeywords: j["payload"] = oracle.keywords; break;
        case OracleKind::StructuredProbability: j["payload"] = oracle.max_spread; break;
    }
    return j;
}

Oracle oracle_from_json(const json& j) {
    Oracle oracle;
    oracle.kind = oracle_kind_from_string(j.at("kind").get<std::string>());
    const json& payload = j.at("payload");
    switch (oracle.kind) {
        case OracleKind::ExpectedValueMatch:
            if (!payload.is_string())
                throw ParseError("malformed-syntax", "expected-value-match payload must be a string");
            oracle.expected = payload.get<std::string>();
            break;
        case OracleKind::AnyOfKeywords:
            if (!payload.is_array() || payload.empty())
                throw ParseError("malformed-syntax", "any-of-keywords payload must be a non-empty list");
            oracle.keywords = payload.get<std::vector<std::string>>();
            break;
        case OracleKind::StructuredProbability:
            if (!payload.is_number())
                throw ParseError("malformed-syntax", "structured-probability payload must be a number");
            oracle.max_spread = payload.get<double>();
            if (oracle.max_spread < 0.0 || oracle.max_spread > 1.0)
                throw ParseError("malformed-syntax", "structured-probability spread must be in [0,1]");
            break;
    }
    return oracle;
}

}  // namespace

TemplateLibrary parse_library(const std::string& bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError("malformed-syntax", e.what(), static_cast<long>(e.byte));
    }

    TemplateLibrary lib;
    try {
        if (doc.contains("concerns")) {
            for (const auto& [concern, arr] : doc.at("concerns").items()) {
                CommunitySet set;
                set.concern = concern;
                for (const auto& c : arr) set.communities.push_back(c.get<std::string>());
                if (set.communities.empty())
                    throw ParseError("malformed-syntax", "concern '" + concern + "' has no communities");
                for (std::size_t a = 0; a < set.communities.size(); ++a)
                    for (std::size_t b = a + 1; b < set.communities.size(); ++b)
                        if (set.communities[a] == set.communities[b])
                            throw ParseError("malformed-syntax",
                                             "duplicate community '" + set.communities[a] +
                                                 "' in concern '" + concern + "'");
                lib.community_sets.emplace(concern, std::move(set));
            }
        }
        for (const auto& jt : doc.value("templates", json::array())) {
            PromptTemplate t;
            t.id = jt.at("id").get<std::string>();
            t.concern = jt.at("concern").get<std::string>();
            t.language = jt.at("language").get<std::string>();
            t.body = jt.at("template").get<std::string>();
            if (jt.contains("prefix")) t.prefix = jt.at("prefix").get<std::string>();
            if (jt.contains("suffix")) t.suffix = jt.at("suffix").get<std::string>();
            t.oracle = oracle_from_json(jt.at("oracle"));
            if (jt.contains("expected_values"))
                t.expected_values =
                    jt.at("expected_values").get<std::map<std::string, std::string>>();
            lib.templates.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw ParseError("malformed-syntax", e.what());
    }

    // invariants
    std::map<std::string, bool> seen_ids;
    for (const PromptTemplate& t : lib.templates) {
        if (seen_ids.count(t.id))
            throw ParseError("duplicate-id", "duplicate template id '" + t.id + "'");
        seen_ids[t.id] = true;
        if (trim_copy(t.body).empty())
            throw ParseError("malformed-syntax", "template '" + t.id + "' has an empty body");
        if (!lib.community_sets.count(t.concern))
            throw ParseError("unknown-concern",
                             "template '" + t.id + "' references unknown concern '" + t.concern + "'");
        std::vector<Placeholder> slots;
        try {
            slots = extract_placeholders(t.body);
        } catch (const ParseError& e) {
            throw ParseError("invalid-placeholder",
                             "template '" + t.id + "': " + e.what(), e.position());
        }
        for (std::size_t a = 0; a < slots.size(); ++a)
            for (std::size_t b = a + 1; b < slots.size(); ++b)
                if (slots[a].category == slots[b].category && slots[a].index == slots[b].index)
                    throw ParseError("invalid-placeholder",
                                     "template '" + t.id + "' repeats placeholder " +
                                         slots[a].token());
    }
    return lib;
}

namespace detail_json {

json template_to_json(const PromptTemplate& t) {
    json jt;
    jt["id"] = t.id;
    jt["concern"] = t.concern;
    jt["language"] = t.language;
    jt["template"] = t.body;
    if (t.prefix) jt["prefix"] = *t.prefix;
    if (t.suffix) jt["suffix"] = *t.suffix;
    jt["oracle"] = oracle_to_json(t.oracle);
    if (!t.expected_values.empty()) jt["expected_values"] = t.expected_values;
    return jt;
}

json library_to_json(const TemplateLibrary& library) {
    json doc;
    json concerns = json::object();
    for (const auto& [name, set] : library.community_sets) concerns[name] = set.communities;
    doc["concerns"] = concerns;
    json templates = json::array();
    for (const PromptTemplate& t : library.templates) templates.push_back(template_to_json(t));
    doc["templates"] = templates;
    return doc;
}

}  // namespace detail_json

std::string serialize_library(const TemplateLibrary& library) {
    return detail_json::library_to_json(library).dump(2) + "\n";
}

TemplateLibrary load_library_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("unreadable-library", "cannot open library file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_library(ss.str());
}

void write_library_file(const TemplateLibrary& library, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("io-failure", "cannot write library file: " + path);
    out << serialize_library(library);
}

}  // namespace polybite
