#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polybite/metrics.hpp"
#include "polybite/paraphraser.hpp"
#include "polybite/provider.hpp"
#include "polybite/template_model.hpp"
#include "polybite/translator.hpp"

namespace polybite {

enum class PipelineOrder { TranslateThenParaphrase, ParaphraseThenTranslate };

std::string to_string(PipelineOrder order);
PipelineOrder pipeline_order_from_string(const std::string& s);

struct PipelineConfig {
    std::vector<std::string> languages;  // L, in request order; empty = source only
    std::size_t paraphrase_count = 0;    // P
    PipelineOrder order = PipelineOrder::TranslateThenParaphrase;
    std::string translator_backend;
    std::string paraphraser_backend;  // empty = same backend as the translator
    bool include_base_translation = true;
    int workers = 4;
    std::optional<std::string> cache_path;
};

/// How one generated template came to be. parent_id is the root source
/// template; stages lists the applied steps in order ("translate:es",
/// "paraphrase:2").
struct StageTrace {
    std::string parent_id;
    std::string language;
    std::vector<std::string> stages;

    bool operator==(const StageTrace&) const = default;
};

struct CacheStats {
    std::uint64_t affix_hits = 0;
    std::uint64_t affix_misses = 0;
    std::uint64_t expected_value_hits = 0;
    std::uint64_t expected_value_misses = 0;
};

struct GeneratedLibrary {
    TemplateLibrary library;  // generated templates + carried-over community sets
    std::map<std::string, StageTrace> provenance;  // generated id -> trace; source
                                                   // templates passed through have none
    std::vector<SkipRecord> diagnostics;
    CacheStats cache_stats;
};

/// Runs the full augmentation pipeline over a library. Per-template failures
/// are recorded in diagnostics and skipped; the run itself only fails when
/// every template fails. Output order is deterministic: source template id,
/// then language in config order, then variant index (base first).
GeneratedLibrary run_pipeline(const TemplateLibrary& library, const PipelineConfig& config,
                              const ProviderHub& hub);

/// Library file format plus a "provenance" section (omitted while empty, so
/// an identity run serializes byte-identically to its input).
std::string serialize_generated_library(const GeneratedLibrary& generated);
GeneratedLibrary parse_generated_library(const std::string& bytes);
void write_generated_library_file(const GeneratedLibrary& generated, const std::string& path);
GeneratedLibrary load_generated_library_file(const std::string& path);

// -- pipeline-order comparison -------------------------------------------------

/// references: source-template-id -> language -> human-written text.
using ReferenceMap = std::map<std::string, std::map<std::string, std::string>>;

struct PipelineComparisonCell {
    std::string order;
    std::string language;  // "" for the all-languages row
    DistributionSummary cosine;
    std::size_t samples = 0;
};

struct PipelineComparisonReport {
    std::vector<PipelineComparisonCell> cells;  // per (order, language) + per-order totals
    std::size_t missing_references = 0;
    std::vector<std::string> warnings;
};

/// Runs both pipeline orders and summarizes cosine similarity of each
/// generated body against its human reference (the boxplot statistics).
/// Entries without a reference are skipped with a warning.
PipelineComparisonReport compare_pipelines(const TemplateLibrary& library,
                                           const std::vector<std::string>& languages,
                                           std::size_t paraphrase_count, const ReferenceMap& refs,
                                           const PipelineConfig& base_config,
                                           const ProviderHub& hub,
                                           const std::string& embedding_backend);

ReferenceMap load_reference_file(const std::string& path);

}  // namespace polybite
