#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace actsteer {

enum class ErrorCode {
    invalid_argument,
    non_finite,
    shape_mismatch,
    hook_shape_violation,
    unknown_attribute,
    grid_mismatch,
    degenerate_field,
    io,
    bad_magic,
    unsupported_version,
    checksum_mismatch,
    kind_mismatch,
    empty_grid,
    config,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every library failure is reported through this type; the code lets callers
// (the CLI in particular) branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace actsteer
