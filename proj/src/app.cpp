#include "polybite/app.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "polybite/languages.hpp"
#include "polybite/reporting.hpp"
#include "polybite/runner.hpp"

namespace polybite {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("io-failure", "cannot write " + path);
    out << content;
}

std::string now_utc() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

/// Every backend id a command may touch.
std::set<std::string> referenced_backends(const RunConfig& config) {
    std::set<std::string> ids;
    if (!config.pipeline.translator_backend.empty()) ids.insert(config.pipeline.translator_backend);
    if (!config.pipeline.paraphraser_backend.empty())
        ids.insert(config.pipeline.paraphraser_backend);
    for (const std::string& model : config.models_under_test) ids.insert(model);
    if (!config.embedding_backend.empty()) ids.insert(config.embedding_backend);
    return ids;
}

TemplateLibrary load_and_filter(const RunConfig& config) {
    if (config.library_path.empty())
        throw ConfigError("missing-library", "no library path configured");
    TemplateLibrary library = load_library_file(config.library_path);
    const std::vector<std::string>& wanted =
        config.concerns_filter ? *config.concerns_filter : default_concerns();
    std::set<std::string> filter(wanted.begin(), wanted.end());
    TemplateLibrary filtered;
    filtered.community_sets = library.community_sets;
    for (const PromptTemplate& t : library.templates)
        if (filter.count(t.concern)) filtered.templates.push_back(t);
    return filtered;
}

void write_manifest(const RunConfig& config, const std::string& command,
                    const GeneratedLibrary* generated) {
    json doc;
    doc["command"] = command;
    doc["library"] = config.library_path;
    doc["seed"] = config.seed;
    doc["mock"] = config.mock;
    doc["languages"] = config.pipeline.languages;
    doc["paraphrase_count"] = config.pipeline.paraphrase_count;
    doc["order"] = to_string(config.pipeline.order);
    doc["include_base_translation"] = config.pipeline.include_base_translation;
    doc["translator_backend"] = config.pipeline.translator_backend;
    doc["models"] = config.models_under_test;
    doc["generated_at"] = now_utc();  // excluded from determinism comparisons
    if (generated) {
        doc["generated_templates"] = generated->library.templates.size();
        doc["skipped"] = generated->diagnostics.size();
        doc["cache"] = {{"affix_hits", generated->cache_stats.affix_hits},
                        {"affix_misses", generated->cache_stats.affix_misses},
                        {"expected_value_hits", generated->cache_stats.expected_value_hits},
                        {"expected_value_misses", generated->cache_stats.expected_value_misses}};
    }
    write_text(config.output_dir + "/manifest.json", doc.dump(2) + "\n");
}

}  // namespace

ProviderHub build_hub(const RunConfig& config) {
    for (const std::string& language : config.pipeline.languages)
        if (!is_wellformed_language_code(language))
            throw ConfigError("invalid-language", "malformed language code '" + language + "'");
    ProviderHub hub;
    if (config.mock) {
        for (const std::string& id : referenced_backends(config))
            hub.add(make_mock_provider(id, config.seed));
        return hub;
    }
    for (const std::string& id : referenced_backends(config)) {
        auto it = config.backends.find(id);
        if (it == config.backends.end())
            throw ConfigError("unknown-backend",
                              "backend '" + id + "' has no [backend." + id + "] config section");
        hub.add(std::make_shared<Provider>(make_http_text_backend(it->second),
                                           make_http_embedding_backend(it->second)));
    }
    return hub;
}

// -- audits -------------------------------------------------------------------------

AuditResult run_paraphrase_audit(const TemplateLibrary& library,
                                 const std::vector<std::size_t>& counts,
                                 Paraphraser& paraphraser, Provider& embedder) {
    AuditResult result;
    for (std::size_t count : counts) {
        std::vector<double> bleus, cosines;
        for (const PromptTemplate& t : library.templates) {
            ParaphraseBundle bundle;
            try {
                bundle = paraphraser.paraphrase(t.body, t.language, count);
            } catch (const Error& e) {
                result.skipped.push_back({t.id, t.language, e.kind(), e.what()});
                continue;
            }
            EmbeddingVector source_vec = embedder.embed(t.body);
            for (const std::string& variant : bundle.variants) {
                AuditRow row;
                row.template_id = t.id;
                row.language = t.language;
                row.direction = t.language + "->" + t.language;
                row.order = "P=" + std::to_string(count);
                row.bleu = bleu(variant, {t.body});
                row.cosine = cosine_similarity(embedder.embed(variant), source_vec);
                bleus.push_back(row.bleu);
                cosines.push_back(row.cosine);
                result.rows.push_back(std::move(row));
            }
        }
        AuditResult::PerCount per;
        per.paraphrase_count = count;
        per.samples = bleus.size();
        if (!bleus.empty()) {
            per.bleu = summarize(bleus);
            per.cosine = summarize(cosines);
        }
        result.per_count.push_back(per);
    }
    return result;
}

AuditResult run_translation_audit(const TemplateLibrary& library,
                                  const std::vector<std::string>& languages,
                                  const ReferenceMap& references, Translator& translator,
                                  Provider& embedder) {
    AuditResult result;
    TranslationCache affix_cache, expected_cache;
    for (const PromptTemplate& t : library.templates) {
        std::vector<SkipRecord> skips;
        TranslatedTemplateSet set;
        try {
            set = translator.translate_template(t, languages, affix_cache, expected_cache, &skips);
        } catch (const Error& e) {
            result.skipped.push_back({t.id, "", e.kind(), e.what()});
            continue;
        }
        for (SkipRecord& s : skips) result.skipped.push_back(std::move(s));
        for (const auto& [language, entry] : set.entries) {
            const std::string* reference = nullptr;
            if (auto by_lang = references.find(t.id); by_lang != references.end())
                if (auto ref = by_lang->second.find(language); ref != by_lang->second.end())
                    reference = &ref->second;
            if (!reference) {
                result.skipped.push_back({t.id, language, "missing-reference", "no human text"});
                continue;
            }
            AuditRow row;
            row.template_id = t.id;
            row.language = language;
            row.direction = t.language + "->" + language;
            row.order = "translate";
            row.bleu = bleu(entry.body, {*reference});
            row.cosine = cosine_similarity(embedder.embed(entry.body), embedder.embed(*reference));
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

void write_audit_files(const AuditResult& paraphrase_audit, const AuditResult* translation_audit,
                       const std::string& directory) {
    fs::create_directories(directory);
    {
        std::ostringstream csv;
        csv << "template_id,language,direction,order,bleu,cosine\n";
        auto rows_of = [&csv](const AuditResult& audit) {
            for (const AuditRow& row : audit.rows)
                csv << row.template_id << "," << row.language << "," << row.direction << ","
                    << row.order << "," << fmt6(row.bleu) << "," << fmt6(row.cosine) << "\n";
        };
        rows_of(paraphrase_audit);
        if (translation_audit) rows_of(*translation_audit);
        write_text(directory + "/audit_samples.csv", csv.str());
    }
    {
        std::ostringstream csv;
        csv << "paraphrase_count,metric,count,min,q1,median,q3,max,mean\n";
        for (const auto& per : paraphrase_audit.per_count) {
            auto line = [&](const char* metric, const DistributionSummary& s) {
                csv << per.paraphrase_count << "," << metric << "," << per.samples << ","
                    << fmt6(s.min) << "," << fmt6(s.q1) << "," << fmt6(s.median) << ","
                    << fmt6(s.q3) << "," << fmt6(s.max) << "," << fmt6(s.mean) << "\n";
            };
            line("bleu", per.bleu);
            line("cosine", per.cosine);
        }
        write_text(directory + "/audit_summary.csv", csv.str());
    }
}

// -- subcommands ----------------------------------------------------------------------

int cmd_validate(const RunConfig& config) {
    if (config.library_path.empty())
        throw ConfigError("missing-library", "validate needs a library path");
    TemplateLibrary library = load_library_file(config.library_path);
    for (const auto& [concern, _] : library.community_sets)
        if (is_untranslatable_concern(concern))
            throw ConfigError("untranslatable-concern",
                              "concern '" + concern +
                                  "' relies on untranslatable constructs and is not supported");
    for (const PromptTemplate& t : library.templates)
        if (!is_wellformed_language_code(t.language))
            throw ConfigError("invalid-language",
                              "template '" + t.id + "' has malformed language '" + t.language + "'");
    std::cout << "library ok: " << library.templates.size() << " templates, "
              << library.community_sets.size() << " concerns\n";
    return kExitOk;
}

int cmd_augment(const RunConfig& config) {
    TemplateLibrary library = load_and_filter(config);
    if (library.templates.empty())
        throw ConfigError("empty-library", "no templates left after the concern filter");
    PipelineConfig pipeline = config.pipeline;
    if (pipeline.translator_backend.empty())
        throw ConfigError("missing-backend", "augment needs pipeline.translator_backend");
    if (!pipeline.cache_path && config.cache_path) pipeline.cache_path = config.cache_path;

    ProviderHub hub = build_hub(config);
    GeneratedLibrary generated = run_pipeline(library, pipeline, hub);

    fs::create_directories(config.output_dir);
    write_generated_library_file(generated, config.output_dir + "/generated_library.json");
    write_manifest(config, "augment", &generated);

    std::cout << "generated " << generated.library.templates.size() << " templates";
    if (!generated.diagnostics.empty())
        std::cout << " (" << generated.diagnostics.size() << " skips)";
    std::cout << "\n";
    return generated.diagnostics.empty() ? kExitOk : kExitPartial;
}

int cmd_run(const RunConfig& config) {
    if (config.models_under_test.empty())
        throw ConfigError("missing-models", "run needs at least one model under test");
    TemplateLibrary library = load_and_filter(config);

    std::vector<TestCase> cases;
    for (const PromptTemplate& t : library.templates) {
        auto set = library.community_sets.find(t.concern);
        if (set == library.community_sets.end())
            throw ConfigError("unknown-concern", "no community set for concern " + t.concern);
        std::vector<TestCase> expanded = instantiate(t, set->second, config.instantiation_mode);
        cases.insert(cases.end(), expanded.begin(), expanded.end());
    }
    if (cases.empty()) throw ConfigError("empty-library", "no test cases instantiated");

    ProviderHub hub = build_hub(config);
    Runner runner(hub, config.pipeline.workers, /*deterministic_timestamps=*/config.mock);
    Runner::Outcome outcome = runner.run_all(cases, config.models_under_test);

    fs::create_directories(config.output_dir);
    write_run_log(outcome.log, config.output_dir + "/run_log.jsonl");
    write_manifest(config, "run", nullptr);

    std::size_t unprocessable = 0;
    for (const TestResult& r : outcome.results)
        if (r.verdict == Verdict::Unprocessable) ++unprocessable;
    std::cout << "ran " << cases.size() << " cases x " << config.models_under_test.size()
              << " models; " << unprocessable << " unprocessable\n";
    return unprocessable == 0 ? kExitOk : kExitPartial;
}

int cmd_report(const RunConfig& config) {
    const std::string log_path = config.output_dir + "/run_log.jsonl";
    std::vector<RunLogEntry> log = read_run_log(log_path);
    if (log.empty()) throw ConfigError("empty-log", "run log has no entries: " + log_path);
    ReportBundle bundle = build_reports(reports_from_log(log));
    emit(bundle, config.output_dir + "/report");
    std::cout << "report written to " << config.output_dir << "/report ("
              << bundle.batches.size() << " batches)\n";
    return kExitOk;
}

int cmd_audit(const RunConfig& config) {
    TemplateLibrary library = load_and_filter(config);
    if (config.pipeline.translator_backend.empty())
        throw ConfigError("missing-backend", "audit needs pipeline.translator_backend");
    ProviderHub hub = build_hub(config);
    auto text_provider = hub.get(config.pipeline.paraphraser_backend.empty()
                                     ? config.pipeline.translator_backend
                                     : config.pipeline.paraphraser_backend);
    auto embed_provider = hub.get(config.embedding_backend.empty()
                                      ? config.pipeline.translator_backend
                                      : config.embedding_backend);
    Paraphraser paraphraser(text_provider);
    AuditResult paraphrase_audit =
        run_paraphrase_audit(library, config.audit_paraphrase_counts, paraphraser,
                             *embed_provider);

    std::optional<AuditResult> translation_audit;
    if (config.references_path) {
        ReferenceMap references = load_reference_file(*config.references_path);
        Translator translator(hub.get(config.pipeline.translator_backend));
        translation_audit = run_translation_audit(library, config.pipeline.languages, references,
                                                  translator, *embed_provider);
    }

    write_audit_files(paraphrase_audit, translation_audit ? &*translation_audit : nullptr,
                      config.output_dir + "/audit");

    // informational only: the 0.85-0.95 band is a live-model observation,
    // never a gate
    for (const auto& per : paraphrase_audit.per_count)
        if (per.samples > 0)
            std::cout << "P=" << per.paraphrase_count << ": mean cosine "
                      << fmt6(per.cosine.mean) << " (reference band 0.85-0.95), " << per.samples
                      << " samples\n";

    bool partial = !paraphrase_audit.skipped.empty() ||
                   (translation_audit && !translation_audit->skipped.empty());
    return partial ? kExitPartial : kExitOk;
}

int cmd_compare_pipelines(const RunConfig& config) {
    if (!config.references_path)
        throw ConfigError("missing-references", "compare-pipelines needs a references file");
    TemplateLibrary library = load_and_filter(config);
    if (config.pipeline.translator_backend.empty())
        throw ConfigError("missing-backend", "compare-pipelines needs pipeline.translator_backend");
    ReferenceMap references = load_reference_file(*config.references_path);
    ProviderHub hub = build_hub(config);
    const std::string embedder = config.embedding_backend.empty()
                                     ? config.pipeline.translator_backend
                                     : config.embedding_backend;
    PipelineComparisonReport report =
        compare_pipelines(library, config.pipeline.languages, config.pipeline.paraphrase_count,
                          references, config.pipeline, hub, embedder);
    emit_pipeline_comparison(report, config.output_dir);
    std::cout << "pipeline comparison written (" << report.cells.size() << " cells, "
              << report.missing_references << " missing references)\n";
    return report.missing_references == 0 ? kExitOk : kExitPartial;
}

}  // namespace polybite
