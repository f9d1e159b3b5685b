#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "polybite/provider.hpp"
#include "polybite/sanitizer.hpp"
#include "polybite/template_model.hpp"

namespace polybite {

/// One language's translated template fields.
struct TranslatedEntry {
    std::optional<std::string> prefix;
    std::string body;
    std::optional<std::string> suffix;
    std::map<std::string, std::string> expected_values;
};

/// Per-language bundle for one source template. Keys are exactly the
/// requested language set, or the source language alone when the set was
/// empty.
struct TranslatedTemplateSet {
    std::string template_id;
    std::string source_language;
    std::map<std::string, TranslatedEntry> entries;
};

struct SkipRecord {
    std::string template_id;
    std::string language;
    std::string error_kind;
    std::string detail;
};

/// Memoizing (source-text, target-language) -> translation map with
/// atomic get-or-insert: concurrent misses on one key still produce a
/// single backend call. Used for both affixes and expected values.
class TranslationCache {
public:
    /// Returns the cached value or computes it via `producer` exactly once.
    std::string get_or_translate(const std::string& text, const std::string& language,
                                 const std::function<std::string()>& producer);

    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }

    /// JSON map from SHA-256(text + "\0" + language) to translated text.
    void load_file(const std::string& path);
    void save_file(const std::string& path) const;

    static std::string cache_key(const std::string& text, const std::string& language);

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_future<std::string>> entries_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

/// Builds the translation prompt used for template bodies, placeholder
/// clause included.
std::string build_translation_prompt(const std::string& sentence, const std::string& language);

/// Plain variant for affixes and expected values: semantic-preservation
/// clause only, no placeholder handling needed.
std::string build_plain_translation_prompt(const std::string& sentence,
                                           const std::string& language);

class Translator {
public:
    Translator(std::shared_ptr<Provider> provider, Sanitizer sanitizer = Sanitizer());

    /// Body translation with enforced placeholder preservation: translate,
    /// clean, verify; one regeneration attempt before giving up.
    std::string translate_body(const std::string& body, const std::string& language);

    std::string translate_affix(const std::string& text, const std::string& language,
                                TranslationCache& cache);

    /// Absent affixes pass through as absent.
    std::optional<std::string> translate_optional_affix(const std::optional<std::string>& text,
                                                        const std::string& language,
                                                        TranslationCache& cache);

    std::map<std::string, std::string> translate_expected_values(
        const std::map<std::string, std::string>& values, const std::string& language,
        TranslationCache& cache);

    /// Full per-template translation. Empty language set yields the identity
    /// bundle keyed by the source language. Individual language failures are
    /// recorded in `skipped`; if every requested language fails the error is
    /// rethrown annotated with the template id.
    TranslatedTemplateSet translate_template(const PromptTemplate& pt,
                                             const std::vector<std::string>& languages,
                                             TranslationCache& affix_cache,
                                             TranslationCache& expected_value_cache,
                                             std::vector<SkipRecord>* skipped = nullptr);

    Provider& provider() { return *provider_; }
    const Sanitizer& sanitizer() const { return sanitizer_; }

private:
    std::shared_ptr<Provider> provider_;
    Sanitizer sanitizer_;
};

}  // namespace polybite
