#pragma once

// Internal JSON helpers shared between template_model and pipeline
// serialization. Not part of the public surface.

#include <json.hpp>

#include "polybite/template_model.hpp"

namespace polybite::detail_json {

nlohmann::json template_to_json(const PromptTemplate& t);
nlohmann::json library_to_json(const TemplateLibrary& library);

}  // namespace polybite::detail_json
