#include "polybite/languages.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace polybite {

namespace {

struct Entry {
    const char* code;
    const char* name;
};

// The six paper languages first, plus a few common neighbours.
constexpr std::array<Entry, 12> kLanguages{{
    {"en", "English"},
    {"es", "Spanish"},
    {"ca", "Catalan"},
    {"fr", "French"},
    {"de", "German"},
    {"lb", "Luxembourgish"},
    {"it", "Italian"},
    {"pt", "Portuguese"},
    {"nl", "Dutch"},
    {"ro", "Romanian"},
    {"sv", "Swedish"},
    {"pl", "Polish"},
}};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::string language_name(const std::string& code) {
    std::string needle = lower(code);
    for (const Entry& e : kLanguages)
        if (needle == e.code) return e.name;
    return code;
}

std::optional<std::string> language_code_from_name(const std::string& name) {
    std::string needle = lower(name);
    for (const Entry& e : kLanguages)
        if (needle == lower(e.name)) return std::string(e.code);
    return std::nullopt;
}

bool is_wellformed_language_code(const std::string& code) {
    std::size_t dash = code.find('-');
    std::string base = dash == std::string::npos ? code : code.substr(0, dash);
    if (base.size() < 2 || base.size() > 3) return false;
    for (char c : base)
        if (c < 'a' || c > 'z') return false;
    if (dash != std::string::npos) {
        std::string region = code.substr(dash + 1);
        if (region.size() < 2 || region.size() > 3) return false;
        for (char c : region)
            if (!std::isalnum(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

}  // namespace polybite
