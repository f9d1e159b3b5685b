#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polybite/config.hpp"
#include "polybite/metrics.hpp"
#include "polybite/paraphraser.hpp"
#include "polybite/pipeline.hpp"
#include "polybite/provider.hpp"
#include "polybite/translator.hpp"

namespace polybite {

/// Exit codes shared by every subcommand: 0 success, 1 partial failures
/// (skipped templates, unprocessable answers), 2 configuration errors.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

/// Builds the provider set a command needs. In mock mode every referenced
/// backend id is bound to the deterministic mock seeded from config.seed.
ProviderHub build_hub(const RunConfig& config);

/// One audit measurement: a generated text scored against its source or
/// human reference.
struct AuditRow {
    std::string template_id;
    std::string language;
    std::string direction;  // e.g. "en->es"
    std::string order;      // "P=5" for paraphrase audits, "translate" otherwise
    double bleu = 0.0;
    double cosine = 0.0;
};

struct AuditResult {
    std::vector<AuditRow> rows;
    // per paraphrase count: distribution of each metric
    struct PerCount {
        std::size_t paraphrase_count = 0;
        DistributionSummary bleu;
        DistributionSummary cosine;
        std::size_t samples = 0;
    };
    std::vector<PerCount> per_count;
    std::vector<SkipRecord> skipped;
};

/// Paraphrases every template at each requested P and scores variants
/// against their sources (the paraphrase-quality study).
AuditResult run_paraphrase_audit(const TemplateLibrary& library,
                                 const std::vector<std::size_t>& counts,
                                 Paraphraser& paraphraser, Provider& embedder);

/// Translates every template into each language and scores against the
/// human references (the translation-quality study).
AuditResult run_translation_audit(const TemplateLibrary& library,
                                  const std::vector<std::string>& languages,
                                  const ReferenceMap& references, Translator& translator,
                                  Provider& embedder);

void write_audit_files(const AuditResult& paraphrase_audit, const AuditResult* translation_audit,
                       const std::string& directory);

// -- subcommands -------------------------------------------------------------------

int cmd_validate(const RunConfig& config);
int cmd_augment(const RunConfig& config);
int cmd_run(const RunConfig& config);
int cmd_report(const RunConfig& config);
int cmd_audit(const RunConfig& config);
int cmd_compare_pipelines(const RunConfig& config);

}  // namespace polybite
