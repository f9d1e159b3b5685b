#include "polybite/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "library_json.hpp"

namespace polybite {

using nlohmann::json;

std::string to_string(PipelineOrder order) {
    return order == PipelineOrder::TranslateThenParaphrase ? "t2p" : "p2t";
}

PipelineOrder pipeline_order_from_string(const std::string& s) {
    if (s == "t2p" || s == "T2P") return PipelineOrder::TranslateThenParaphrase;
    if (s == "p2t" || s == "P2T") return PipelineOrder::ParaphraseThenTranslate;
    throw ConfigError("invalid-order", "pipeline order must be t2p or p2t, got '" + s + "'");
}

namespace {

// Bounded worker pool; fn must not throw.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max(1, workers);
    if (count <= 1 || workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    int spawn = std::min<int>(workers, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(spawn));
    for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
}

struct Emitted {
    std::string source_id;
    std::size_t language_position = 0;
    std::size_t variant_index = 0;
    PromptTemplate tpl;
    StageTrace trace;
    bool has_trace = false;
};

PromptTemplate apply_translation(const PromptTemplate& source, const std::string& language,
                                 const TranslatedEntry& entry) {
    PromptTemplate t = source;
    t.id = source.id + "@" + language;
    t.language = language;
    t.prefix = entry.prefix;
    t.body = entry.body;
    t.suffix = entry.suffix;
    t.expected_values = entry.expected_values;
    return t;
}

std::vector<std::string> with_stage(std::vector<std::string> stages, std::string stage) {
    stages.push_back(std::move(stage));
    return stages;
}

}  // namespace

GeneratedLibrary run_pipeline(const TemplateLibrary& library, const PipelineConfig& config,
                              const ProviderHub& hub) {
    if (library.templates.empty())
        throw ConfigError("empty-library", "run_pipeline needs at least one template");
    for (std::size_t i = 0; i < config.languages.size(); ++i) {
        if (config.languages[i].empty())
            throw ConfigError("invalid-language", "empty language code in config");
        for (std::size_t j = i + 1; j < config.languages.size(); ++j)
            if (config.languages[i] == config.languages[j])
                throw ConfigError("invalid-language",
                                  "duplicate language '" + config.languages[i] + "' in config");
    }

    auto translator_provider = hub.get(config.translator_backend);
    auto paraphraser_provider = config.paraphraser_backend.empty()
                                    ? translator_provider
                                    : hub.get(config.paraphraser_backend);
    Translator translator(translator_provider);
    Paraphraser paraphraser(paraphraser_provider);

    TranslationCache affix_cache;
    TranslationCache expected_value_cache;
    if (config.cache_path) {
        affix_cache.load_file(*config.cache_path + ".affix");
        expected_value_cache.load_file(*config.cache_path + ".expval");
    }

    const std::size_t template_count = library.templates.size();
    std::vector<std::vector<Emitted>> emitted_per_template(template_count);
    std::vector<std::vector<SkipRecord>> skips_per_template(template_count);

    auto language_at = [&](std::size_t pos) { return config.languages[pos]; };
    const bool translating = !config.languages.empty();

    auto process_t2p = [&](std::size_t i) {
        const PromptTemplate& pt = library.templates[i];
        auto& out = emitted_per_template[i];
        auto& skips = skips_per_template[i];

        TranslatedTemplateSet set =
            translator.translate_template(pt, config.languages, affix_cache,
                                          expected_value_cache, &skips);

        const std::size_t lang_count = translating ? config.languages.size() : 1;
        for (std::size_t pos = 0; pos < lang_count; ++pos) {
            const std::string language = translating ? language_at(pos) : pt.language;
            auto entry_it = set.entries.find(language);
            if (entry_it == set.entries.end()) continue;  // skipped during translation

            PromptTemplate parent =
                translating ? apply_translation(pt, language, entry_it->second) : pt;
            std::vector<std::string> base_stages;
            if (translating) base_stages.push_back("translate:" + language);

            ParaphraseBundle bundle;
            try {
                bundle = paraphraser.paraphrase(parent.body, language, config.paraphrase_count);
            } catch (const Error& e) {
                skips.push_back({pt.id, language, e.kind(), e.what()});
                continue;
            }

            std::vector<PromptTemplate> materialized =
                materialize(parent, bundle, config.include_base_translation);
            std::size_t variant = config.include_base_translation || bundle.pass_through ? 0 : 1;
            for (PromptTemplate& m : materialized) {
                Emitted e;
                e.source_id = pt.id;
                e.language_position = pos;
                e.variant_index = variant;
                e.has_trace = m.id != pt.id;
                if (e.has_trace) {
                    e.trace.parent_id = pt.id;
                    e.trace.language = language;
                    e.trace.stages = variant == 0
                                         ? base_stages
                                         : with_stage(base_stages,
                                                      "paraphrase:" + std::to_string(variant));
                }
                e.tpl = std::move(m);
                out.push_back(std::move(e));
                ++variant;
            }
        }
    };

    auto process_p2t = [&](std::size_t i) {
        const PromptTemplate& pt = library.templates[i];
        auto& out = emitted_per_template[i];
        auto& skips = skips_per_template[i];

        ParaphraseBundle bundle;
        try {
            bundle = paraphraser.paraphrase(pt.body, pt.language, config.paraphrase_count);
        } catch (const Error& e) {
            skips.push_back({pt.id, pt.language, e.kind(), e.what()});
            return;
        }
        std::vector<PromptTemplate> variants =
            materialize(pt, bundle, config.include_base_translation);

        std::size_t variant = config.include_base_translation || bundle.pass_through ? 0 : 1;
        for (const PromptTemplate& vt : variants) {
            std::vector<std::string> variant_stages;
            if (vt.id != pt.id) variant_stages.push_back("paraphrase:" + std::to_string(variant));

            if (!translating) {
                Emitted e;
                e.source_id = pt.id;
                e.language_position = 0;
                e.variant_index = variant;
                e.has_trace = vt.id != pt.id;
                if (e.has_trace) e.trace = {pt.id, pt.language, variant_stages};
                e.tpl = vt;
                out.push_back(std::move(e));
                ++variant;
                continue;
            }

            TranslatedTemplateSet set =
                translator.translate_template(vt, config.languages, affix_cache,
                                              expected_value_cache, &skips);
            for (std::size_t pos = 0; pos < config.languages.size(); ++pos) {
                const std::string language = language_at(pos);
                auto entry_it = set.entries.find(language);
                if (entry_it == set.entries.end()) continue;
                Emitted e;
                e.source_id = pt.id;
                e.language_position = pos;
                e.variant_index = variant;
                e.has_trace = true;
                e.trace = {pt.id, language, with_stage(variant_stages, "translate:" + language)};
                e.tpl = apply_translation(vt, language, entry_it->second);
                out.push_back(std::move(e));
            }
            ++variant;
        }
    };

    std::atomic<std::size_t> hard_failures{0};
    auto process = [&](std::size_t i) {
        try {
            if (config.order == PipelineOrder::TranslateThenParaphrase)
                process_t2p(i);
            else
                process_p2t(i);
        } catch (const Error& e) {
            // per-language skips are usually recorded already; add a
            // template-level record only when nothing was
            if (skips_per_template[i].empty())
                skips_per_template[i].push_back({library.templates[i].id, "", e.kind(), e.what()});
        } catch (const std::exception& e) {
            skips_per_template[i].push_back(
                {library.templates[i].id, "", "internal-error", e.what()});
        }
        if (emitted_per_template[i].empty()) hard_failures.fetch_add(1);
    };

    parallel_for(template_count, config.workers, process);

    if (hard_failures.load() == template_count) {
        std::string detail = "no diagnostics";
        for (const auto& batch : skips_per_template)
            if (!batch.empty()) {
                detail = batch.front().detail;
                break;
            }
        throw AugmentationError("pipeline-failed",
                                "every template failed augmentation; first error: " + detail);
    }

    GeneratedLibrary result;
    result.library.community_sets = library.community_sets;

    std::vector<Emitted> all;
    for (auto& batch : emitted_per_template)
        for (Emitted& e : batch) all.push_back(std::move(e));
    std::sort(all.begin(), all.end(), [](const Emitted& a, const Emitted& b) {
        if (a.source_id != b.source_id) return a.source_id < b.source_id;
        if (a.language_position != b.language_position)
            return a.language_position < b.language_position;
        return a.variant_index < b.variant_index;
    });
    for (Emitted& e : all) {
        if (e.has_trace) result.provenance[e.tpl.id] = std::move(e.trace);
        result.library.templates.push_back(std::move(e.tpl));
    }

    for (auto& batch : skips_per_template)
        for (SkipRecord& s : batch) result.diagnostics.push_back(std::move(s));
    std::sort(result.diagnostics.begin(), result.diagnostics.end(),
              [](const SkipRecord& a, const SkipRecord& b) {
                  return std::tie(a.template_id, a.language, a.error_kind) <
                         std::tie(b.template_id, b.language, b.error_kind);
              });

    result.cache_stats = {affix_cache.hits(), affix_cache.misses(), expected_value_cache.hits(),
                          expected_value_cache.misses()};
    if (config.cache_path) {
        affix_cache.save_file(*config.cache_path + ".affix");
        expected_value_cache.save_file(*config.cache_path + ".expval");
    }
    return result;
}

// -- serialization ---------------------------------------------------------------

std::string serialize_generated_library(const GeneratedLibrary& generated) {
    json doc = detail_json::library_to_json(generated.library);
    if (!generated.provenance.empty()) {
        json prov = json::object();
        for (const auto& [id, trace] : generated.provenance) {
            prov[id] = {{"parent", trace.parent_id},
                        {"language", trace.language},
                        {"stages", trace.stages}};
        }
        doc["provenance"] = prov;
    }
    return doc.dump(2) + "\n";
}

GeneratedLibrary parse_generated_library(const std::string& bytes) {
    GeneratedLibrary out;
    out.library = parse_library(bytes);
    json doc = json::parse(bytes);
    if (doc.contains("provenance")) {
        for (const auto& [id, j] : doc.at("provenance").items()) {
            StageTrace trace;
            trace.parent_id = j.at("parent").get<std::string>();
            trace.language = j.at("language").get<std::string>();
            trace.stages = j.at("stages").get<std::vector<std::string>>();
            out.provenance[id] = std::move(trace);
        }
    }
    return out;
}

void write_generated_library_file(const GeneratedLibrary& generated, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("io-failure", "cannot write generated library: " + path);
    out << serialize_generated_library(generated);
}

GeneratedLibrary load_generated_library_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("unreadable-library", "cannot open generated library: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_generated_library(ss.str());
}

// -- pipeline comparison -----------------------------------------------------------

PipelineComparisonReport compare_pipelines(const TemplateLibrary& library,
                                           const std::vector<std::string>& languages,
                                           std::size_t paraphrase_count, const ReferenceMap& refs,
                                           const PipelineConfig& base_config,
                                           const ProviderHub& hub,
                                           const std::string& embedding_backend) {
    PipelineComparisonReport report;
    auto embedder = hub.get(embedding_backend);

    for (PipelineOrder order : {PipelineOrder::TranslateThenParaphrase,
                                PipelineOrder::ParaphraseThenTranslate}) {
        PipelineConfig config = base_config;
        config.languages = languages;
        config.paraphrase_count = paraphrase_count;
        config.order = order;

        GeneratedLibrary generated = run_pipeline(library, config, hub);

        std::map<std::string, std::vector<double>> by_language;
        std::vector<double> all;
        for (const PromptTemplate& t : generated.library.templates) {
            auto prov = generated.provenance.find(t.id);
            if (prov == generated.provenance.end()) continue;  // untranslated passthrough
            const std::string& source_id = prov->second.parent_id;
            const std::string& language = prov->second.language;
            const std::string* reference = nullptr;
            if (auto by_lang = refs.find(source_id); by_lang != refs.end())
                if (auto ref = by_lang->second.find(language); ref != by_lang->second.end())
                    reference = &ref->second;
            if (!reference) {
                ++report.missing_references;
                report.warnings.push_back("no reference for (" + source_id + ", " + language +
                                          "); skipped");
                continue;
            }
            double similarity =
                cosine_similarity(embedder->embed(t.body), embedder->embed(*reference));
            by_language[language].push_back(similarity);
            all.push_back(similarity);
        }

        for (const auto& [language, values] : by_language) {
            PipelineComparisonCell cell;
            cell.order = to_string(order);
            cell.language = language;
            cell.cosine = summarize(values);
            cell.samples = values.size();
            report.cells.push_back(std::move(cell));
        }
        if (!all.empty()) {
            PipelineComparisonCell total;
            total.order = to_string(order);
            total.language = "";
            total.cosine = summarize(all);
            total.samples = all.size();
            report.cells.push_back(std::move(total));
        }
    }

    std::sort(report.warnings.begin(), report.warnings.end());
    report.warnings.erase(std::unique(report.warnings.begin(), report.warnings.end()),
                          report.warnings.end());
    return report;
}

ReferenceMap load_reference_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("unreadable-references", "cannot open reference file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("invalid-references", std::string(e.what()) + " in " + path);
    }
    ReferenceMap refs;
    for (const auto& [template_id, langs] : doc.items())
        for (const auto& [language, text] : langs.items())
            refs[template_id][language] = text.get<std::string>();
    return refs;
}

}  // namespace polybite
