#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polybite/errors.hpp"

namespace polybite {

/// A `{CATEGORY}` or `{CATEGORYn}` slot inside a template body. The index is
/// present only for templates addressing several communities of the same
/// category and is always >= 1.
struct Placeholder {
    std::string category;
    std::optional<int> index;

    std::string token() const;

    bool operator==(const Placeholder&) const = default;
    auto operator<=>(const Placeholder&) const = default;
};

enum class OracleKind { ExpectedValueMatch, AnyOfKeywords, StructuredProbability };

std::string to_string(OracleKind kind);
OracleKind oracle_kind_from_string(const std::string& s);

/// Decides whether a model answer counts as unbiased for a test case.
///  - ExpectedValueMatch: `expected` names a label in the template's
///    expected-values map (or is the literal expected string).
///  - AnyOfKeywords: pass when any keyword appears as a whole word.
///  - StructuredProbability: pass when the JSON answer's max-min probability
///    spread is <= `max_spread`.
struct Oracle {
    OracleKind kind = OracleKind::ExpectedValueMatch;
    std::string expected;                 // ExpectedValueMatch
    std::vector<std::string> keywords;    // AnyOfKeywords
    double max_spread = 0.10;             // StructuredProbability, in [0,1]

    bool operator==(const Oracle&) const = default;
};

/// One bias-test template. `body` may contain placeholders; prefix/suffix
/// wrap the instantiated body when building the full prompt.
struct PromptTemplate {
    std::string id;
    std::string concern;
    std::string language;
    std::optional<std::string> prefix;
    std::string body;
    std::optional<std::string> suffix;
    Oracle oracle;
    std::map<std::string, std::string> expected_values;

    bool operator==(const PromptTemplate&) const = default;
};

/// The communities that can fill one concern's placeholders. Order is the
/// canonical instantiation order and is stable across runs.
struct CommunitySet {
    std::string concern;
    std::vector<std::string> communities;

    bool operator==(const CommunitySet&) const = default;
};

struct TemplateLibrary {
    std::vector<PromptTemplate> templates;
    std::map<std::string, CommunitySet> community_sets;

    bool operator==(const TemplateLibrary&) const = default;
};

/// A fully instantiated prompt ready to send to a model under test.
struct TestCase {
    std::string id;
    std::string parent_template_id;
    std::string language;
    std::string concern;
    std::string prompt;
    Oracle oracle;
    std::map<std::string, std::string> expected_values;
    std::vector<std::string> communities_used;

    bool operator==(const TestCase&) const = default;
};

enum class InstantiationMode { Combination, Permutation };

// -- placeholder grammar ------------------------------------------------------

/// Scans `text` for placeholders in left-to-right order. Doubled braces
/// (`{{`, `}}`) are literal escapes, not placeholders. Throws ParseError
/// ("malformed-placeholder") on unbalanced braces or lowercase categories.
std::vector<Placeholder> extract_placeholders(const std::string& text);

/// Lenient variant for arbitrary model output: malformed brace runs are
/// skipped instead of raising. Used by the sanitizer's placeholder check.
std::vector<Placeholder> scan_placeholders_lenient(const std::string& text);

struct PlaceholderSpan {
    Placeholder placeholder;
    std::size_t begin = 0;  // byte offsets into the scanned text
    std::size_t end = 0;
};

/// Lenient scan that also reports where each placeholder sits, so callers
/// can tokenize around the slots.
std::vector<PlaceholderSpan> scan_placeholder_spans(const std::string& text);

// -- combinatorics ------------------------------------------------------------

/// C(n, p); p = 0 yields 1. Throws MetricError("invalid-arity") when p > n.
std::uint64_t count_instantiations(unsigned n, unsigned p);

/// n! / (n-p)! ordered arrangements, used by permutation mode.
std::uint64_t count_arrangements(unsigned n, unsigned p);

// -- instantiation ------------------------------------------------------------

/// Expands one template into concrete test cases. Combination mode emits
/// C(n,p) cases: each size-p community subset, in lexicographic order over
/// canonical community indices, assigned to placeholders in ascending
/// placeholder-index order. Permutation mode emits n!/(n-p)! ordered
/// assignments. The emitted prompt is prefix + body + suffix joined with
/// single spaces and contains no remaining placeholders.
std::vector<TestCase> instantiate(const PromptTemplate& tpl, const CommunitySet& communities,
                                  InstantiationMode mode = InstantiationMode::Combination);

/// Joins prompt segments with single spaces, trimming each part first.
std::string join_prompt_parts(const std::optional<std::string>& prefix, const std::string& body,
                              const std::optional<std::string>& suffix);

// -- library I/O --------------------------------------------------------------

/// Parses the JSON library format. Errors: malformed-syntax (with byte
/// position), duplicate-id, unknown-concern, invalid-placeholder,
/// malformed-placeholder.
TemplateLibrary parse_library(const std::string& bytes);

/// Canonical serialization: keys sorted, 2-space indent, trailing newline,
/// absent optional fields omitted. serialize(parse(x)) == x on canonical input.
std::string serialize_library(const TemplateLibrary& library);

TemplateLibrary load_library_file(const std::string& path);
void write_library_file(const TemplateLibrary& library, const std::string& path);

}  // namespace polybite
