#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rkhs_adapt {

enum class Errc {
    invalid_argument,
    not_hurwitz,
    not_symmetric,
    not_positive_definite,
    non_finite,
    duplicate_centers,
    kernel_mismatch,
    window_out_of_range,
    not_applicable,
    unstable_integration,
    non_finite_derivative,
    parse_error,
    too_few_points,
    io_error,
};

[[nodiscard]] constexpr std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::not_hurwitz: return "NotHurwitz";
    case Errc::not_symmetric: return "NotSymmetric";
    case Errc::not_positive_definite: return "NotPositiveDefinite";
    case Errc::non_finite: return "NonFinite";
    case Errc::duplicate_centers: return "DuplicateCenters";
    case Errc::kernel_mismatch: return "KernelMismatch";
    case Errc::window_out_of_range: return "WindowOutOfRange";
    case Errc::not_applicable: return "NotApplicable";
    case Errc::unstable_integration: return "UnstableIntegration";
    case Errc::non_finite_derivative: return "NonFiniteDerivative";
    case Errc::parse_error: return "ParseError";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::io_error: return "IoError";
    }
    return "Unknown";
}

/// Process exit status used by the command-line front end for each error class.
[[nodiscard]] constexpr int exit_status(Errc code) noexcept {
    switch (code) {
    case Errc::not_hurwitz:
    case Errc::not_positive_definite:
    case Errc::unstable_integration:
    case Errc::non_finite_derivative:
        return 3;
    case Errc::io_error:
        return 4;
    default:
        return 2;
    }
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Non-fatal diagnostics (ill-conditioned Grammians, deduplicated CSV rows).
// The default handler writes to stderr; tests and the CLI may replace it.
using WarningHandler = std::function<void(std::string_view)>;

inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return handler;
}

inline void warn(std::string_view msg) {
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    if (auto& h = warning_handler()) h(msg);
}

} // namespace rkhs_adapt
