#pragma once

#include <stdexcept>
#include <string>

namespace hdiv {

enum class Errc {
    missing_input,
    validation,
    not_psd,
    degenerate_residual,
    degenerate_instruments,
    numeric,
    cell_failure,
};

// Process exit status used by the command-line tool for each error class.
constexpr int exit_code(Errc code) noexcept {
    switch (code) {
    case Errc::missing_input:
        return 2;
    case Errc::validation:
    case Errc::not_psd:
        return 3;
    case Errc::degenerate_residual:
    case Errc::degenerate_instruments:
    case Errc::numeric:
        return 4;
    case Errc::cell_failure:
        return 5;
    }
    return 1;
}

constexpr const char* errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::missing_input: return "missing_input";
    case Errc::validation: return "validation";
    case Errc::not_psd: return "not_psd";
    case Errc::degenerate_residual: return "degenerate_residual";
    case Errc::degenerate_instruments: return "degenerate_instruments";
    case Errc::numeric: return "numeric";
    case Errc::cell_failure: return "cell_failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

    bool degenerate() const noexcept {
        return code_ == Errc::degenerate_residual || code_ == Errc::degenerate_instruments;
    }

private:
    Errc code_;
};

}  // namespace hdiv
