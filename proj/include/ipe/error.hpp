#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace ipe {

// Every failure path carries one of these codes. The CLI maps each code to a
// distinct process exit status (see exit_status()).
enum class ErrorCode {
    Dimension,
    Precondition,
    DegenerateEvidence,
    Domain,
    RankDeficient,
    WeakFirstStage,
    DegenerateWeights,
    Validation,
    Schema,
    Io,
};

std::string_view to_string(ErrorCode code);
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string module, const std::string& message)
        : std::runtime_error(message), code_(code), module_(std::move(module)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorCode code_;
    std::string module_;
};

}  // namespace ipe
