#include "actsteer/error.hpp"

namespace actsteer {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::non_finite: return "non_finite";
        case ErrorCode::shape_mismatch: return "shape_mismatch";
        case ErrorCode::hook_shape_violation: return "hook_shape_violation";
        case ErrorCode::unknown_attribute: return "unknown_attribute";
        case ErrorCode::grid_mismatch: return "grid_mismatch";
        case ErrorCode::degenerate_field: return "degenerate_field";
        case ErrorCode::io: return "io";
        case ErrorCode::bad_magic: return "bad_magic";
        case ErrorCode::unsupported_version: return "unsupported_version";
        case ErrorCode::checksum_mismatch: return "checksum_mismatch";
        case ErrorCode::kind_mismatch: return "kind_mismatch";
        case ErrorCode::empty_grid: return "empty_grid";
        case ErrorCode::config: return "config";
    }
    return "unknown";
}

}  // namespace actsteer
