#pragma once

#include <memory>
#include <string>
#include <vector>

#include "polybite/provider.hpp"
#include "polybite/sanitizer.hpp"
#include "polybite/template_model.hpp"
#include "polybite/translator.hpp"

namespace polybite {

enum class GrammaticalNumber { Singular, Plural };

std::string to_string(GrammaticalNumber gn);

/// P paraphrase variants of one translated body. pass_through marks the
/// P = 0 case where the bundle is the identity.
struct ParaphraseBundle {
    std::string source;
    std::string language;
    std::vector<std::string> variants;
    GrammaticalNumber grammatical_number = GrammaticalNumber::Plural;
    bool pass_through = false;
};

/// Emits the paraphrasing prompt with the paraphrase count, sentence and
/// grammatical number filled in.
std::string build_paraphrase_prompt(const std::string& sentence, GrammaticalNumber gn,
                                    std::size_t n_paraphrases);

/// Single-word classification prompt used before paraphrasing.
std::string build_grammatical_number_prompt(const std::string& sentence);

class Paraphraser {
public:
    Paraphraser(std::shared_ptr<Provider> provider, Sanitizer sanitizer = Sanitizer());

    /// One backend call, case-insensitive mapping of the answer, one retry
    /// on unparseable output.
    GrammaticalNumber identify_grammatical_number(const std::string& body,
                                                  const std::string& language);

    /// Full paraphrase step: P = 0 is the identity pass-through; otherwise
    /// one generation call split into exactly P placeholder-preserving,
    /// pairwise distinct variants (one regeneration attempt on violation).
    ParaphraseBundle paraphrase(const std::string& body, const std::string& language,
                                std::size_t count);

    Provider& provider() { return *provider_; }

private:
    std::shared_ptr<Provider> provider_;
    Sanitizer sanitizer_;

    std::vector<std::string> request_variants(const std::string& body, GrammaticalNumber gn,
                                              std::size_t count, std::string& error_kind,
                                              std::string& detail);
};

/// Materializes a bundle into concrete templates: each variant becomes the
/// body of a copy of `parent` with id parent.id + "#p" + k (k starting at 1);
/// when include_base is set the untouched parent is emitted first.
std::vector<PromptTemplate> materialize(const PromptTemplate& parent,
                                        const ParaphraseBundle& bundle, bool include_base);

}  // namespace polybite
