#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polybite/pipeline.hpp"
#include "polybite/provider.hpp"
#include "polybite/template_model.hpp"

namespace polybite {

/// Everything one invocation needs. Loaded from a key/value config file,
/// overridden by POLYBITE_* environment variables, then by CLI flags.
struct RunConfig {
    std::string library_path;
    PipelineConfig pipeline;
    std::vector<std::string> models_under_test;
    std::optional<std::vector<std::string>> concerns_filter;  // default: the seven categories
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    std::optional<std::string> cache_path;
    bool mock = false;
    InstantiationMode instantiation_mode = InstantiationMode::Combination;
    std::string embedding_backend;  // defaults to the translator backend
    std::vector<std::size_t> audit_paraphrase_counts = {2, 5, 10};
    std::optional<std::string> references_path;
    std::map<std::string, HttpBackendConfig> backends;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

/// POLYBITE_LIBRARY, POLYBITE_OUT, POLYBITE_SEED, POLYBITE_LANGS,
/// POLYBITE_MODELS, POLYBITE_CONCERNS, POLYBITE_P, POLYBITE_ORDER,
/// POLYBITE_CACHE, POLYBITE_MOCK override file values.
void apply_env_overrides(RunConfig& config);

/// Canonical text form; parse(dump(c)) reproduces c.
std::string dump_config(const RunConfig& config);

/// The seven evaluated concern categories.
const std::vector<std::string>& default_concerns();

/// Concerns that rely on untranslatable linguistic constructs and are
/// rejected by validate ("sexual ambiguity" and spelling variants).
bool is_untranslatable_concern(const std::string& concern);

/// Splits "es,ca , fr" into trimmed non-empty items.
std::vector<std::string> split_csv_list(const std::string& text);

}  // namespace polybite
