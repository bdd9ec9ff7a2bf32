// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rightpath {

/// Base of every error the engine throws. `code()` is the machine-readable
/// category surfaced in CLI exit messages and HTTP error payloads.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& message) : Error("contract_violation", message) {}
};

} // namespace rightpath
