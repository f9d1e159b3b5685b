#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polybite/app.hpp"
#include "polybite/config.hpp"
#include "polybite/errors.hpp"

namespace {

using polybite::RunConfig;

struct CliOptions {
    std::string config_path;
    std::string library;
    std::string langs;
    std::string models;
    std::string concerns;
    std::string out;
    std::string order;
    std::string cache;
    std::string references;
    int paraphrases = -1;
    std::int64_t seed = -1;
    bool mock = false;
    bool permutation = false;
};

void add_common_flags(CLI::App* cmd, CliOptions& opts) {
    cmd->add_option("--config", opts.config_path, "config file (key = value sections)");
    cmd->add_option("--library", opts.library, "template library JSON file");
    cmd->add_option("--lang", opts.langs, "comma-separated target language codes");
    cmd->add_option("-P,--paraphrases", opts.paraphrases, "paraphrase count per template");
    cmd->add_option("--order", opts.order, "pipeline order: t2p or p2t");
    cmd->add_option("--models", opts.models, "comma-separated model backend ids");
    cmd->add_option("--concerns", opts.concerns, "comma-separated concern filter");
    cmd->add_option("--out", opts.out, "output directory");
    cmd->add_option("--seed", opts.seed, "seed for the deterministic mock backends");
    cmd->add_option("--cache", opts.cache, "translation cache file prefix");
    cmd->add_option("--references", opts.references, "human reference translations JSON");
    cmd->add_flag("--mock", opts.mock, "use the deterministic mock backends");
    cmd->add_flag("--permutation", opts.permutation,
                  "instantiate ordered community arrangements instead of combinations");
}

RunConfig assemble(const CliOptions& opts) {
    RunConfig config;
    if (!opts.config_path.empty()) config = polybite::load_config_file(opts.config_path);
    polybite::apply_env_overrides(config);

    if (!opts.library.empty()) config.library_path = opts.library;
    if (!opts.langs.empty()) config.pipeline.languages = polybite::split_csv_list(opts.langs);
    if (opts.paraphrases >= 0)
        config.pipeline.paraphrase_count = static_cast<std::size_t>(opts.paraphrases);
    if (!opts.order.empty()) config.pipeline.order = polybite::pipeline_order_from_string(opts.order);
    if (!opts.models.empty()) config.models_under_test = polybite::split_csv_list(opts.models);
    if (!opts.concerns.empty()) config.concerns_filter = polybite::split_csv_list(opts.concerns);
    if (!opts.out.empty()) config.output_dir = opts.out;
    if (opts.seed >= 0) config.seed = static_cast<std::uint64_t>(opts.seed);
    if (!opts.cache.empty()) config.cache_path = opts.cache;
    if (!opts.references.empty()) config.references_path = opts.references;
    if (opts.mock) config.mock = true;
    if (opts.permutation) config.instantiation_mode = polybite::InstantiationMode::Permutation;

    // a mock run without explicit backends still needs ids to address
    if (config.pipeline.translator_backend.empty() && config.mock)
        config.pipeline.translator_backend = "mock-translator";
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"polybite: multilingual bias-test template augmentation and evaluation"};
    app.require_subcommand(1);

    CliOptions opts;
    auto* validate = app.add_subcommand("validate", "lint a template library");
    auto* augment = app.add_subcommand("augment", "translate + paraphrase a library");
    auto* run = app.add_subcommand("run", "execute test cases against models");
    auto* report = app.add_subcommand("report", "build report files from a run log");
    auto* audit = app.add_subcommand("audit", "BLEU/cosine quality audit of the augmenters");
    auto* compare = app.add_subcommand("compare-pipelines", "T2P vs P2T quality comparison");
    for (CLI::App* cmd : {validate, augment, run, report, audit, compare})
        add_common_flags(cmd, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = assemble(opts);
        if (validate->parsed()) return polybite::cmd_validate(config);
        if (augment->parsed()) return polybite::cmd_augment(config);
        if (run->parsed()) return polybite::cmd_run(config);
        if (report->parsed()) return polybite::cmd_report(config);
        if (audit->parsed()) return polybite::cmd_audit(config);
        if (compare->parsed()) return polybite::cmd_compare_pipelines(config);
    } catch (const polybite::ConfigError& e) {
        std::cerr << "config error [" << e.kind() << "]: " << e.what() << "\n";
        return polybite::kExitConfig;
    } catch (const polybite::ParseError& e) {
        std::cerr << "parse error [" << e.kind() << "]: " << e.what() << "\n";
        return polybite::kExitConfig;
    } catch (const polybite::Error& e) {
        std::cerr << "error [" << e.kind() << "]: " << e.what() << "\n";
        return polybite::kExitPartial;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return polybite::kExitPartial;
    }
    return polybite::kExitConfig;
}
