#pragma once

#include <map>
#include <string>
#include <string_view>

// Default data files compiled into the library so every binary works without a
// data directory. Keys are paths relative to data/, e.g. "slot_templates.json".
namespace slotwise::resources {

const std::map<std::string, std::string_view>& all();

// Throws Error(NotFound) for an unknown key.
std::string_view get(std::string_view name);

}  // namespace slotwise::resources
