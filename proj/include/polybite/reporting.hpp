#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polybite/metrics.hpp"
#include "polybite/pipeline.hpp"
#include "polybite/runner.hpp"

namespace polybite {

/// All analysis artifacts derived from one run's batch reports: per-concern
/// radar tables, the language x model heatmap with marginal means, the
/// cross-language Pearson matrix and the fault-rate tables.
struct ReportBundle {
    struct RadarCell {
        std::optional<double> pass_rate;  // percent; absent when no valid answers
        std::size_t n_valid = 0;
    };
    using LangModel = std::pair<std::string, std::string>;

    std::vector<std::string> concerns;   // sorted
    std::vector<std::string> languages;  // sorted
    std::vector<std::string> models;     // sorted

    std::map<std::string, std::map<LangModel, RadarCell>> radar;  // concern -> cell
    std::map<LangModel, std::optional<double>> heatmap;           // mean over concerns
    std::map<std::string, std::optional<double>> heatmap_language_means;
    std::map<std::string, std::optional<double>> heatmap_model_means;
    std::optional<double> heatmap_grand_mean;

    CorrelationMatrix pearson_by_language;

    std::map<std::string, double> faults_by_model;     // mean batch fault rate
    std::map<std::string, double> faults_by_concern;
    std::map<std::string, double> faults_by_language;
    std::vector<BatchReport> batches;  // sorted by (model, language, concern)

    // batch-level fault bookkeeping, in percent of batches
    double zero_fault_batch_share = 0.0;
    double low_fault_batch_share = 0.0;   // >0 and <= 10%
    double high_fault_batch_share = 0.0;  // > 10%
};

/// Deterministic bundle assembly. The Pearson matrix correlates languages
/// over aligned (model, concern) pass-rate vectors; pairs with an undefined
/// entry on either side are dropped from that cell.
ReportBundle build_reports(const std::vector<BatchReport>& batches);

/// Writes the CSV set, bundle.json and the SVG plots into `directory`
/// (created if missing). Byte-identical across calls on the same bundle.
void emit(const ReportBundle& bundle, const std::string& directory);

/// Boxplot statistics CSV + SVG for a pipeline-order comparison.
void emit_pipeline_comparison(const PipelineComparisonReport& report,
                              const std::string& directory);

}  // namespace polybite
