#include "slotwise/resources.hpp"

#include "slotwise/error.hpp"

namespace slotwise::resources {

std::string_view get(std::string_view name) {
    const auto& table = all();
    const auto it = table.find(std::string(name));
    if (it == table.end()) {
        throw Error(ErrorCode::NotFound, "no bundled resource " + std::string(name));
    }
    return it->second;
}

}  // namespace slotwise::resources
