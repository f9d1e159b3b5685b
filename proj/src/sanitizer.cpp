#include "polybite/sanitizer.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "polybite/template_model.hpp"

namespace polybite {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Announcer prefixes are stripped only when followed by a colon or phrased
// as "<article> <noun> <copula> "; a fully optional colon would also eat
// legitimate imperatives like "Answer the question below."
struct AnnouncerTable {
    const char* language;
    const char* articles;  // regex alternation, includes trailing space
    const char* nouns;     // regex alternation
    const char* copulas;   // regex alternation
};

const AnnouncerTable kAnnouncers[] = {
    {"en", "[Tt]he |[Mm]y |[Yy]our ",
     "[Tt]ranslation|[Pp]araphrase|[Aa]nswer|[Oo]utput|[Rr]esponse", " is| would be"},
    {"es", "[Ll]a |[Uu]na |[Ee]l ",
     "[Tt]raducci(?:ó|o)n|[Pp]ar(?:á|a)frasis|[Rr]espuesta|[Ss]alida", " es| ser(?:í|i)a"},
    {"ca", "[Ll]a |[Uu]na ", "[Tt]raducci(?:ó|o)|[Pp]ar(?:à|a)frasi|[Rr]esposta", " (?:é|e)s"},
    {"fr", "[Ll]a |[Uu]ne ", "[Tt]raduction|[Pp]araphrase|[Rr](?:é|e)ponse", " est| serait"},
    {"de", "[Dd]ie ", "(?:Ü|ü|U|u)bersetzung|[Pp]araphrase|[Aa]ntwort|[Aa]usgabe",
     " ist| lautet"},
    {"lb", "[Dd]'|[Dd](?:é|e)i ", "(?:Ë|ë|I|i)wwersetzung|(?:Ä|ä|A|a)ntwert", " ass"},
};

bool starts_with(const std::string& s, const std::string& p) {
    return s.compare(0, p.size(), p) == 0;
}
bool ends_with(const std::string& s, const std::string& p) {
    return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

// Matching open/close quote pairs, one level.
const std::pair<const char*, const char*> kQuotePairs[] = {
    {"\"", "\""}, {"'", "'"}, {"“", "”"}, {"‘", "’"},
    {"«", "»"},
};

}  // namespace

struct Sanitizer::Rule {
    enum class Kind { Fence, Announcer, Quotes, ListMarker, Trim, CustomRegex };
    Kind kind = Kind::CustomRegex;
    std::string id;
    std::regex regex;  // Announcer / CustomRegex
};

Sanitizer::Sanitizer(std::vector<Rule> rules) : rules_(std::move(rules)) {}
Sanitizer::~Sanitizer() = default;
Sanitizer::Sanitizer(const Sanitizer&) = default;
Sanitizer& Sanitizer::operator=(const Sanitizer&) = default;
Sanitizer::Sanitizer(Sanitizer&&) noexcept = default;
Sanitizer& Sanitizer::operator=(Sanitizer&&) noexcept = default;

Sanitizer::Sanitizer() {
    rules_.push_back({Rule::Kind::Fence, "code-fence", std::regex()});
    for (const AnnouncerTable& t : kAnnouncers) {
        std::string colon_form = std::string("^(?:") + t.articles + ")?(?:" + t.nouns +
                                 ")(?:" + t.copulas + ")?[ \\t]*:[ \\t]*";
        std::string copula_form = std::string("^(?:") + t.articles + ")(?:" + t.nouns +
                                  ")(?:" + t.copulas + ")[ \\t]+";
        rules_.push_back({Rule::Kind::Announcer, std::string("announcer-") + t.language + "-colon",
                          std::regex(colon_form)});
        rules_.push_back({Rule::Kind::Announcer, std::string("announcer-") + t.language + "-copula",
                          std::regex(copula_form)});
    }
    rules_.push_back({Rule::Kind::Quotes, "unwrap-quotes", std::regex()});
    rules_.push_back({Rule::Kind::ListMarker, "list-marker", std::regex()});
    rules_.push_back({Rule::Kind::Trim, "trim", std::regex()});
}

Sanitizer Sanitizer::from_rules_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("unreadable-rules", "cannot open rules file: " + path);
    std::vector<Rule> rules;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            rules.push_back({Rule::Kind::CustomRegex, "custom-" + std::to_string(lineno),
                             std::regex(t)});
        } catch (const std::regex_error& e) {
            throw ConfigError("invalid-rule",
                              "rules file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    rules.push_back({Rule::Kind::Trim, "trim", std::regex()});
    return Sanitizer(std::move(rules));
}

std::string Sanitizer::apply_pass(const std::string& text, std::vector<std::string>& fired) const {
    std::string cur = text;
    auto record = [&fired](const std::string& id) {
        if (std::find(fired.begin(), fired.end(), id) == fired.end()) fired.push_back(id);
    };

    for (const Rule& rule : rules_) {
        switch (rule.kind) {
            case Rule::Kind::Fence: {
                std::string t = trim(cur);
                if (starts_with(t, "```") && ends_with(t, "```") && t.size() > 6) {
                    std::size_t body_begin = t.find('\n');
                    if (body_begin != std::string::npos && body_begin < t.size() - 3) {
                        std::string inner = t.substr(body_begin + 1, t.size() - body_begin - 4);
                        cur = trim(inner);
                        record(rule.id);
                    }
                }
                break;
            }
            case Rule::Kind::Announcer:
            case Rule::Kind::CustomRegex: {
                std::string next = std::regex_replace(cur, rule.regex, "",
                                                      std::regex_constants::format_first_only);
                if (next != cur) {
                    cur = next;
                    record(rule.id);
                }
                break;
            }
            case Rule::Kind::Quotes: {
                std::string t = trim(cur);
                for (const auto& [open, close] : kQuotePairs) {
                    std::string o(open), c(close);
                    if (t.size() > o.size() + c.size() && starts_with(t, o) && ends_with(t, c)) {
                        cur = t.substr(o.size(), t.size() - o.size() - c.size());
                        record(rule.id);
                        break;
                    }
                }
                break;
            }
            case Rule::Kind::ListMarker: {
                static const std::regex marker("^[ \\t]*(?:-|\\*|•|\\d{1,3}[.)])[ \\t]+");
                std::string next =
                    std::regex_replace(cur, marker, "", std::regex_constants::format_first_only);
                if (next != cur) {
                    cur = next;
                    record(rule.id);
                }
                break;
            }
            case Rule::Kind::Trim: {
                std::string next = trim(cur);
                if (next != cur) {
                    cur = next;
                    record(rule.id);
                }
                break;
            }
        }
    }
    return cur;
}

SanitizeReport Sanitizer::clean_single(const std::string& raw) const {
    SanitizeReport report;
    std::string cur = raw;
    for (int pass = 0; pass < 8; ++pass) {
        std::string next = apply_pass(cur, report.rules_fired);
        if (next == cur) break;
        cur = next;
    }
    if (trim(cur).empty()) {
        report.ok = false;
        report.diagnostic = "unparseable-output: nothing left after cleaning";
        return report;
    }
    report.ok = true;
    report.cleaned = cur;
    return report;
}

namespace {

struct RawItem {
    std::string text;
};

bool bullet_prefix(const std::string& line, std::size_t& marker_len) {
    std::size_t i = line.find_first_not_of(" \t");
    if (i == std::string::npos) return false;
    for (const std::string& m : {std::string("- "), std::string("* "), std::string("• ")}) {
        if (line.compare(i, m.size(), m) == 0) {
            marker_len = i + m.size();
            return true;
        }
    }
    return false;
}

bool numbered_prefix(const std::string& line, std::size_t& marker_len) {
    std::size_t i = line.find_first_not_of(" \t");
    if (i == std::string::npos) return false;
    std::size_t j = i;
    while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
    if (j == i || j - i > 3) return false;
    if (j >= line.size() || (line[j] != '.' && line[j] != ')')) return false;
    ++j;
    while (j < line.size() && (line[j] == ' ' || line[j] == '\t')) ++j;
    marker_len = j;
    return true;
}

}  // namespace

SplitReport Sanitizer::split_paraphrases(const std::string& raw, std::size_t expected) const {
    SplitReport report;
    if (expected < 1) {
        report.error_kind = "unparseable-output";
        report.diagnostic = "expected count must be >= 1";
        return report;
    }

    // Fences wrap the whole list sometimes; drop them before line parsing.
    std::string body = raw;
    {
        std::string t = trim(body);
        if (starts_with(t, "```") && ends_with(t, "```") && t.size() > 6) {
            std::size_t nl = t.find('\n');
            if (nl != std::string::npos && nl < t.size() - 3)
                body = t.substr(nl + 1, t.size() - nl - 4);
        }
    }

    std::vector<std::string> lines;
    {
        std::istringstream ss(body);
        std::string line;
        while (std::getline(ss, line)) lines.push_back(line);
    }

    std::vector<RawItem> items;
    bool any_numbered = false, any_bulleted = false;
    std::size_t marker_len = 0;
    for (const std::string& line : lines) {
        if (numbered_prefix(line, marker_len)) any_numbered = true;
        else if (bullet_prefix(line, marker_len)) any_bulleted = true;
    }

    if (any_numbered || any_bulleted) {
        auto is_marker = [&](const std::string& line, std::size_t& len) {
            return any_numbered ? numbered_prefix(line, len) : bullet_prefix(line, len);
        };
        for (const std::string& line : lines) {
            std::size_t len = 0;
            if (is_marker(line, len)) {
                items.push_back({line.substr(len)});
            } else if (!items.empty() && !trim(line).empty()) {
                items.back().text += " " + trim(line);  // continuation line
            }
        }
    } else {
        // blank-line separated blocks, else one item per non-empty line
        std::vector<std::string> blocks;
        std::string block;
        for (const std::string& line : lines) {
            if (trim(line).empty()) {
                if (!block.empty()) blocks.push_back(block);
                block.clear();
            } else {
                if (!block.empty()) block += " ";
                block += trim(line);
            }
        }
        if (!block.empty()) blocks.push_back(block);
        if (blocks.size() <= 1 && lines.size() > 1) {
            for (const std::string& line : lines)
                if (!trim(line).empty()) items.push_back({trim(line)});
        } else {
            for (const std::string& b : blocks) items.push_back({b});
        }
    }

    if (items.empty()) {
        report.error_kind = "unparseable-output";
        report.diagnostic = "no paraphrase items found";
        return report;
    }

    std::vector<std::string> cleaned;
    for (const RawItem& item : items) {
        SanitizeReport r = clean_single(item.text);
        if (!r.ok) {
            report.error_kind = "unparseable-output";
            report.diagnostic = "item failed cleaning: " + r.diagnostic;
            return report;
        }
        cleaned.push_back(r.cleaned);
    }

    if (cleaned.size() != expected) {
        report.error_kind = "wrong-count";
        report.diagnostic = "found " + std::to_string(cleaned.size()) + " paraphrases, expected " +
                            std::to_string(expected);
        return report;
    }

    report.ok = true;
    report.items = std::move(cleaned);
    return report;
}

bool verify_placeholders(const std::string& original, const std::string& candidate) {
    std::vector<Placeholder> a = scan_placeholders_lenient(original);
    std::vector<Placeholder> b = scan_placeholders_lenient(candidate);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

}  // namespace polybite
