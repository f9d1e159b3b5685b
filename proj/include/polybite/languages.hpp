#pragma once

#include <optional>
#include <string>

namespace polybite {

/// English exonym for a language code ("es" -> "Spanish"). Unknown codes
/// pass through unchanged so prompts stay usable.
std::string language_name(const std::string& code);

/// Reverse lookup, case-insensitive ("spanish" -> "es").
std::optional<std::string> language_code_from_name(const std::string& name);

/// BCP-47-ish shape check: 2-3 lowercase letters, optional -REGION part.
bool is_wellformed_language_code(const std::string& code);

}  // namespace polybite
