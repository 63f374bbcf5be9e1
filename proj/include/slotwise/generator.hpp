#pragma once

#include <string>

namespace slotwise {

// Plain prompt-in, text-out capability. Implementations must be safe to call
// concurrently.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string generate(const std::string& prompt) const = 0;
};

}  // namespace slotwise
