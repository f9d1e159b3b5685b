#pragma once

#include <string>
#include <vector>

#include "polybite/errors.hpp"

namespace polybite {

/// Outcome of cleaning one raw model output. When ok is false, cleaned is
/// empty and diagnostic explains why.
struct SanitizeReport {
    bool ok = false;
    std::string cleaned;
    std::vector<std::string> rules_fired;
    std::string diagnostic;
};

/// Outcome of splitting a paraphrase-list response. error_kind is one of
/// "wrong-count" / "unparseable-output" when ok is false.
struct SplitReport {
    bool ok = false;
    std::vector<std::string> items;
    std::string error_kind;
    std::string diagnostic;
};

/// Ordered cleanup rule set. The embedded default reconstructs the usual
/// wrapper junk: code fences, announcer prefixes in EN/ES/CA/FR/DE/LB,
/// one level of quotes, list markers, surrounding whitespace.
class Sanitizer {
public:
    Sanitizer();
    ~Sanitizer();
    Sanitizer(const Sanitizer&);
    Sanitizer& operator=(const Sanitizer&);
    Sanitizer(Sanitizer&&) noexcept;
    Sanitizer& operator=(Sanitizer&&) noexcept;

    /// Replaces the embedded rules with one regex per line (comments start
    /// with '#'). Each match is deleted; rules keep file order.
    static Sanitizer from_rules_file(const std::string& path);

    /// Applies the rule set to a fixpoint. Idempotent: clean(clean(x)).cleaned
    /// == clean(x).cleaned. Fails with "unparseable-output" when nothing
    /// survives.
    SanitizeReport clean_single(const std::string& raw) const;

    /// Parses numbered / bulleted / line-separated paraphrase lists into
    /// exactly `expected` cleaned strings.
    SplitReport split_paraphrases(const std::string& raw, std::size_t expected) const;

private:
    struct Rule;
    std::vector<Rule> rules_;

    explicit Sanitizer(std::vector<Rule> rules);
    std::string apply_pass(const std::string& text, std::vector<std::string>& fired) const;
};

/// True iff candidate carries exactly the same placeholder multiset as
/// original. Pure predicate; malformed braces in the candidate simply do
/// not count as placeholders.
bool verify_placeholders(const std::string& original, const std::string& candidate);

}  // namespace polybite
