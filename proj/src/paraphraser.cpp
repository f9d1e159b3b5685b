#include "polybite/paraphraser.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace polybite {

std::string to_string(GrammaticalNumber gn) {
    return gn == GrammaticalNumber::Singular ? "singular" : "plural";
}

std::string build_paraphrase_prompt(const std::string& sentence, GrammaticalNumber gn,
                                    std::size_t n_paraphrases) {
    if (sentence.empty()) throw ConfigError("empty-sentence", "nothing to paraphrase");
    if (n_paraphrases < 1)
        throw ConfigError("invalid-paraphrase-count", "paraphrase prompt needs P >= 1");
    std::ostringstream out;
    out << "You must provide exactly " << n_paraphrases
        << " different paraphrases of the following sentence:\n"
        << "\"" << sentence << "\"\n"
        << "It is CRITICAL to maintain the same language as the sentence.\n"
        << "It is CRITICAL to make the paraphrase as " << to_string(gn) << ".\n"
        << "It is CRITICAL to maintain the exact semantic meaning, as well as all the "
           "placeholders in the format {{PLACEHOLDER}}.\n"
        << "If the sentence is a yes/no question, the paraphrase must also be.\n"
        << "If the sentence involves probabilities, the paraphrase must also.";
    return out.str();
}

std::string build_grammatical_number_prompt(const std::string& sentence) {
    return "Answer with exactly one word, singular or plural: what is the grammatical number "
           "of the subject of: \"" +
           sentence + "\"?";
}

Paraphraser::Paraphraser(std::shared_ptr<Provider> provider, Sanitizer sanitizer)
    : provider_(std::move(provider)), sanitizer_(std::move(sanitizer)) {}

namespace {

std::string lower_trim_word(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

// whitespace-normalized copy used for the distinctness check
std::string squash_spaces(const std::string& s) {
    std::string out;
    bool in_space = true;
    for (char c : s) {
        bool space = c == ' ' || c == '\t' || c == '\r' || c == '\n';
        if (space) {
            if (!in_space) out += ' ';
        } else {
            out += c;
        }
        in_space = space;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace

GrammaticalNumber Paraphraser::identify_grammatical_number(const std::string& body,
                                                           const std::string& language) {
    if (body.empty()) throw ConfigError("empty-sentence", "no body to classify");
    const std::string prompt = build_grammatical_number_prompt(body);
    std::string last_answer;
    for (int attempt = 0; attempt < 2; ++attempt) {
        GenerationResponse response = provider_->generate({prompt});
        SanitizeReport report = sanitizer_.clean_single(response.text);
        if (!report.ok) continue;
        std::string word = lower_trim_word(report.cleaned);
        if (word == "singular") return GrammaticalNumber::Singular;
        if (word == "plural") return GrammaticalNumber::Plural;
        // mixed-subject sentences default to plural; community fillers are
        // predominantly plural nouns
        if (word == "mixed" || word == "both") return GrammaticalNumber::Plural;
        last_answer = report.cleaned;
    }
    throw AugmentationError("unparseable-output",
                            "grammatical-number classification for language " + language +
                                " kept answering '" + last_answer + "'");
}

std::vector<std::string> Paraphraser::request_variants(const std::string& body,
                                                       GrammaticalNumber gn, std::size_t count,
                                                       std::string& error_kind,
                                                       std::string& detail) {
    const std::string prompt = build_paraphrase_prompt(body, gn, count);
    GenerationResponse response = provider_->generate({prompt});
    SplitReport split = sanitizer_.split_paraphrases(response.text, count);
    if (!split.ok) {
        error_kind = split.error_kind;
        detail = split.diagnostic;
        return {};
    }
    for (const std::string& variant : split.items) {
        if (!verify_placeholders(body, variant)) {
            error_kind = "placeholder-loss";
            detail = "variant dropped placeholders: " + variant;
            return {};
        }
    }
    std::set<std::string> seen;
    for (const std::string& variant : split.items) {
        if (!seen.insert(squash_spaces(variant)).second) {
            error_kind = "duplicate-variants";
            detail = "variant repeated: " + variant;
            return {};
        }
    }
    return split.items;
}

ParaphraseBundle Paraphraser::paraphrase(const std::string& body, const std::string& language,
                                         std::size_t count) {
    ParaphraseBundle bundle;
    bundle.source = body;
    bundle.language = language;
    if (count == 0) {
        bundle.pass_through = true;
        return bundle;
    }

    bundle.grammatical_number = identify_grammatical_number(body, language);

    std::string error_kind, detail;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::vector<std::string> variants =
            request_variants(body, bundle.grammatical_number, count, error_kind, detail);
        if (!variants.empty()) {
            bundle.variants = std::move(variants);
            return bundle;
        }
    }
    throw AugmentationError(error_kind, "paraphrasing in " + language + ": " + detail);
}

std::vector<PromptTemplate> materialize(const PromptTemplate& parent,
                                        const ParaphraseBundle& bundle, bool include_base) {
    std::vector<PromptTemplate> out;
    // P = 0 always passes the parent through, or the generated set would
    // silently lose the template
    if (include_base || bundle.pass_through) out.push_back(parent);
    for (std::size_t k = 0; k < bundle.variants.size(); ++k) {
        PromptTemplate t = parent;
        t.id = parent.id + "#p" + std::to_string(k + 1);
        t.body = bundle.variants[k];
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace polybite
