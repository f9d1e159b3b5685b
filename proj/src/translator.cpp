#include "polybite/translator.hpp"

#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "polybite/languages.hpp"

namespace polybite {

namespace {

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

}  // namespace

// -- cache -------------------------------------------------------------------

std::string TranslationCache::cache_key(const std::string& text, const std::string& language) {
    std::string material = text;
    material += '\0';
    material += language;
    return sha256_hex(material);
}

std::string TranslationCache::get_or_translate(const std::string& text,
                                               const std::string& language,
                                               const std::function<std::string()>& producer) {
    const std::string key = cache_key(text, language);
    std::shared_future<std::string> fut;
    std::shared_ptr<std::promise<std::string>> owner;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            hits_.fetch_add(1);
            fut = it->second;
        } else {
            misses_.fetch_add(1);
            owner = std::make_shared<std::promise<std::string>>();
            fut = owner->get_future().share();
            entries_.emplace(key, fut);
        }
    }
    if (owner) {
        try {
            owner->set_value(producer());
        } catch (...) {
            owner->set_exception(std::current_exception());
            std::lock_guard<std::mutex> lock(mutex_);
            entries_.erase(key);  // allow a later retry
        }
    }
    return fut.get();
}

void TranslationCache::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return;  // absent cache files are simply cold caches
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid-cache-file", std::string(e.what()) + " in " + path);
    }
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_string()) continue;
        std::promise<std::string> ready;
        ready.set_value(value.get<std::string>());
        entries_.emplace(key, ready.get_future().share());
    }
}

void TranslationCache::save_file(const std::string& path) const {
    nlohmann::json doc = nlohmann::json::object();
    {
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& [key, fut] : entries_) {
            if (fut.wait_for(std::chrono::seconds(0)) != std::future_status::ready) continue;
            try {
                doc[key] = fut.get();
            } catch (...) {
                // poisoned entry, skip
            }
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("io-failure", "cannot write cache file: " + path);
    out << doc.dump(2) << "\n";
}

// -- prompts -----------------------------------------------------------------

std::string build_translation_prompt(const std::string& sentence, const std::string& language) {
    if (sentence.empty()) throw ConfigError("empty-sentence", "nothing to translate");
    if (language.empty()) throw ConfigError("empty-language", "no target language given");
    std::ostringstream out;
    out << "You must provide a translation in " << language << " of the following sentence:\n"
        << "\"" << sentence << "\"\n"
        << "It is CRITICAL to maintain the exact semantic meaning.\n"
        << "If there are placeholders in the format {{PLACEHOLDER}}, it is CRITICAL not to "
           "translate them.\n"
        << "If the sentence is a yes/no question, the translation must also be.\n"
        << "If the sentence involves probabilities, the translation must also.";
    return out.str();
}

std::string build_plain_translation_prompt(const std::string& sentence,
                                           const std::string& language) {
    if (sentence.empty()) throw ConfigError("empty-sentence", "nothing to translate");
    if (language.empty()) throw ConfigError("empty-language", "no target language given");
    std::ostringstream out;
    out << "You must provide a translation in " << language << " of the following sentence:\n"
        << "\"" << sentence << "\"\n"
        << "It is CRITICAL to maintain the exact semantic meaning.";
    return out.str();
}

// -- translator ---------------------------------------------------------------

Translator::Translator(std::shared_ptr<Provider> provider, Sanitizer sanitizer)
    : provider_(std::move(provider)), sanitizer_(std::move(sanitizer)) {}

std::string Translator::translate_body(const std::string& body, const std::string& language) {
    const std::string prompt = build_translation_prompt(body, language_name(language));
    std::string last_kind = "unparseable-output";
    std::string detail;
    for (int attempt = 0; attempt < 2; ++attempt) {
        GenerationResponse response = provider_->generate({prompt});
        SanitizeReport report = sanitizer_.clean_single(response.text);
        if (!report.ok) {
            last_kind = "unparseable-output";
            detail = report.diagnostic;
            continue;
        }
        if (!verify_placeholders(body, report.cleaned)) {
            last_kind = "placeholder-loss";
            detail = "translation dropped or altered placeholders: " + report.cleaned;
            continue;
        }
        return report.cleaned;
    }
    throw AugmentationError(last_kind, "translating into " + language + ": " + detail);
}

std::string Translator::translate_affix(const std::string& text, const std::string& language,
                                        TranslationCache& cache) {
    return cache.get_or_translate(text, language, [&] {
        const std::string prompt = build_plain_translation_prompt(text, language_name(language));
        for (int attempt = 0; attempt < 2; ++attempt) {
            GenerationResponse response = provider_->generate({prompt});
            SanitizeReport report = sanitizer_.clean_single(response.text);
            if (report.ok) return report.cleaned;
        }
        throw AugmentationError("unparseable-output",
                                "affix translation into " + language + " failed cleaning");
    });
}

std::optional<std::string> Translator::translate_optional_affix(
    const std::optional<std::string>& text, const std::string& language,
    TranslationCache& cache) {
    if (!text) return std::nullopt;
    return translate_affix(*text, language, cache);
}

std::map<std::string, std::string> Translator::translate_expected_values(
    const std::map<std::string, std::string>& values, const std::string& language,
    TranslationCache& cache) {
    std::map<std::string, std::string> out;
    for (const auto& [label, value] : values)
        out[label] = translate_affix(value, language, cache);
    return out;
}

TranslatedTemplateSet Translator::translate_template(const PromptTemplate& pt,
                                                     const std::vector<std::string>& languages,
                                                     TranslationCache& affix_cache,
                                                     TranslationCache& expected_value_cache,
                                                     std::vector<SkipRecord>* skipped) {
    TranslatedTemplateSet set;
    set.template_id = pt.id;
    set.source_language = pt.language;

    if (languages.empty()) {
        set.entries[pt.language] = {pt.prefix, pt.body, pt.suffix, pt.expected_values};
        return set;
    }

    std::string first_kind, first_detail, first_language;
    for (const std::string& language : languages) {
        try {
            TranslatedEntry entry;
            entry.body = translate_body(pt.body, language);
            entry.prefix = translate_optional_affix(pt.prefix, language, affix_cache);
            entry.suffix = translate_optional_affix(pt.suffix, language, affix_cache);
            entry.expected_values =
                translate_expected_values(pt.expected_values, language, expected_value_cache);
            set.entries[language] = std::move(entry);
        } catch (const Error& e) {
            if (first_kind.empty()) {
                first_kind = e.kind();
                first_detail = e.what();
                first_language = language;
            }
            if (skipped) skipped->push_back({pt.id, language, e.kind(), e.what()});
        }
    }

    if (set.entries.empty())
        throw AugmentationError(first_kind.empty() ? "translation-failed" : first_kind,
                                "template " + pt.id + ": every requested language failed (" +
                                    first_language + ": " + first_detail + ")");
    return set;
}

}  // namespace polybite
