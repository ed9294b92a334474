#pragma once

#include <stdexcept>
#include <string>

namespace kicl {

// Raised when a caller breaks a documented precondition (bad shape, label out
// of range, invalid scale, ...). The CLI maps it to exit code 1.
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// File-system and parse failures on external inputs. The CLI maps it to exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

#define KICL_REQUIRE(cond, msg)                                                  \
    do {                                                                         \
        if (!(cond)) throw ::kicl::ContractViolation(std::string(msg));          \
    } while (0)

}  // namespace kicl
