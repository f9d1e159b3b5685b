#include "polybite/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "polybite/languages.hpp"

namespace polybite {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> parse_list(const std::string& value) {
    std::string inner = trim(value);
    if (!inner.empty() && inner.front() == '[' && inner.back() == ']')
        inner = inner.substr(1, inner.size() - 2);
    std::vector<std::string> items;
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string t = unquote(trim(item));
        if (!t.empty()) items.push_back(t);
    }
    return items;
}

bool parse_bool(const std::string& value, const std::string& key) {
    std::string v = lower(trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid-config", "key '" + key + "' expects a boolean, got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
    try {
        return std::stoull(trim(value));
    } catch (const std::exception&) {
        throw ConfigError("invalid-config", "key '" + key + "' expects an integer, got '" + value + "'");
    }
}

}  // namespace

std::vector<std::string> split_csv_list(const std::string& text) { return parse_list(text); }

const std::vector<std::string>& default_concerns() {
    static const std::vector<std::string> kConcerns = {
        "ageism", "lgbtiqphobia", "politics", "racism", "religion", "sexism", "xenophobia"};
    return kConcerns;
}

bool is_untranslatable_concern(const std::string& concern) {
    std::string folded;
    for (char c : lower(concern))
        folded += (c == '_' || c == '-') ? ' ' : c;
    return trim(folded) == "sexual ambiguity";
}

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("invalid-config",
                              "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));

        if (section.empty()) {
            if (key == "library") config.library_path = unquote(value);
            else if (key == "output") config.output_dir = unquote(value);
            else if (key == "seed") config.seed = parse_u64(value, key);
            else if (key == "mock") config.mock = parse_bool(value, key);
            else if (key == "models") config.models_under_test = parse_list(value);
            else if (key == "concerns") config.concerns_filter = parse_list(value);
            else if (key == "cache") config.cache_path = unquote(value);
            else if (key == "embedding_backend") config.embedding_backend = unquote(value);
            else if (key == "references") config.references_path = unquote(value);
            else if (key == "instantiation") {
                std::string v = lower(unquote(value));
                if (v == "combination") config.instantiation_mode = InstantiationMode::Combination;
                else if (v == "permutation")
                    config.instantiation_mode = InstantiationMode::Permutation;
                else
                    throw ConfigError("invalid-config", "instantiation must be combination|permutation");
            } else if (key == "audit_paraphrase_counts") {
                config.audit_paraphrase_counts.clear();
                for (const std::string& item : parse_list(value))
                    config.audit_paraphrase_counts.push_back(parse_u64(item, key));
            } else {
                throw ConfigError("invalid-config",
                                  "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            }
        } else if (section == "pipeline") {
            if (key == "languages") config.pipeline.languages = parse_list(value);
            else if (key == "paraphrase_count") config.pipeline.paraphrase_count = parse_u64(value, key);
            else if (key == "order") config.pipeline.order = pipeline_order_from_string(unquote(value));
            else if (key == "translator_backend") config.pipeline.translator_backend = unquote(value);
            else if (key == "paraphraser_backend") config.pipeline.paraphraser_backend = unquote(value);
            else if (key == "include_base_translation")
                config.pipeline.include_base_translation = parse_bool(value, key);
            else if (key == "workers") config.pipeline.workers = static_cast<int>(parse_u64(value, key));
            else
                throw ConfigError("invalid-config", "unknown [pipeline] key '" + key + "'");
        } else if (section.rfind("backend.", 0) == 0) {
            std::string id = section.substr(8);
            HttpBackendConfig& backend = config.backends[id];
            backend.backend_id = id;
            if (key == "base_url") backend.base_url = unquote(value);
            else if (key == "chat_path") backend.chat_path = unquote(value);
            else if (key == "embeddings_path") backend.embeddings_path = unquote(value);
            else if (key == "model") backend.model = unquote(value);
            else if (key == "embedding_model") backend.embedding_model = unquote(value);
            else if (key == "timeout_seconds")
                backend.timeout_seconds = static_cast<int>(parse_u64(value, key));
            else
                throw ConfigError("invalid-config", "unknown [" + section + "] key '" + key + "'");
        } else {
            throw ConfigError("invalid-config", "unknown section [" + section + "]");
        }
    }

    for (const std::string& language : config.pipeline.languages)
        if (!is_wellformed_language_code(language))
            throw ConfigError("invalid-config", "malformed language code '" + language + "'");
    return config;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing-config", "cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_env_overrides(RunConfig& config) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    if (auto v = env("POLYBITE_LIBRARY")) config.library_path = *v;
    if (auto v = env("POLYBITE_OUT")) config.output_dir = *v;
    if (auto v = env("POLYBITE_SEED")) config.seed = parse_u64(*v, "POLYBITE_SEED");
    if (auto v = env("POLYBITE_LANGS")) config.pipeline.languages = split_csv_list(*v);
    if (auto v = env("POLYBITE_MODELS")) config.models_under_test = split_csv_list(*v);
    if (auto v = env("POLYBITE_CONCERNS")) config.concerns_filter = split_csv_list(*v);
    if (auto v = env("POLYBITE_P"))
        config.pipeline.paraphrase_count = parse_u64(*v, "POLYBITE_P");
    if (auto v = env("POLYBITE_ORDER")) config.pipeline.order = pipeline_order_from_string(*v);
    if (auto v = env("POLYBITE_CACHE")) config.cache_path = *v;
    if (auto v = env("POLYBITE_MOCK")) config.mock = parse_bool(*v, "POLYBITE_MOCK");
}

std::string dump_config(const RunConfig& config) {
    std::ostringstream out;
    auto quote = [](const std::string& s) { return "\"" + s + "\""; };
    auto list = [&](const std::vector<std::string>& items) {
        std::string s = "[";
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) s += ", ";
            s += quote(items[i]);
        }
        return s + "]";
    };

    out << "library = " << quote(config.library_path) << "\n";
    out << "output = " << quote(config.output_dir) << "\n";
    out << "seed = " << config.seed << "\n";
    out << "mock = " << (config.mock ? "true" : "false") << "\n";
    out << "models = " << list(config.models_under_test) << "\n";
    if (config.concerns_filter) out << "concerns = " << list(*config.concerns_filter) << "\n";
    if (config.cache_path) out << "cache = " << quote(*config.cache_path) << "\n";
    if (!config.embedding_backend.empty())
        out << "embedding_backend = " << quote(config.embedding_backend) << "\n";
    if (config.references_path) out << "references = " << quote(*config.references_path) << "\n";
    out << "instantiation = "
        << (config.instantiation_mode == InstantiationMode::Combination ? "\"combination\""
                                                                        : "\"permutation\"")
        << "\n";
    {
        std::vector<std::string> counts;
        for (std::size_t p : config.audit_paraphrase_counts) counts.push_back(std::to_string(p));
        std::string s = "[";
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (i) s += ", ";
            s += counts[i];
        }
        out << "audit_paraphrase_counts = " << s << "]\n";
    }

    out << "\n[pipeline]\n";
    out << "languages = " << list(config.pipeline.languages) << "\n";
    out << "paraphrase_count = " << config.pipeline.paraphrase_count << "\n";
    out << "order = \"" << to_string(config.pipeline.order) << "\"\n";
    out << "translator_backend = " << quote(config.pipeline.translator_backend) << "\n";
    if (!config.pipeline.paraphraser_backend.empty())
        out << "paraphraser_backend = " << quote(config.pipeline.paraphraser_backend) << "\n";
    out << "include_base_translation = "
        << (config.pipeline.include_base_translation ? "true" : "false") << "\n";
    out << "workers = " << config.pipeline.workers << "\n";

    for (const auto& [id, backend] : config.backends) {
        out << "\n[backend." << id << "]\n";
        out << "base_url = " << quote(backend.base_url) << "\n";
        out << "chat_path = " << quote(backend.chat_path) << "\n";
        out << "embeddings_path = " << quote(backend.embeddings_path) << "\n";
        out << "model = " << quote(backend.model) << "\n";
        out << "embedding_model = " << quote(backend.embedding_model) << "\n";
        out << "timeout_seconds = " << backend.timeout_seconds << "\n";
    }
    return out.str();
}

}  // namespace polybite
