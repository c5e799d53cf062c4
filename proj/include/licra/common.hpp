#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace licra {

/// Margin used when comparing the intervention branch against the null
/// branch. Ties resolve to the null action: intervening pays a strictly
/// positive cost for no strict gain.
inline constexpr double kTieEpsilon = 1e-9;

/// Thrown when an iterative solver fails to reach its tolerance.
struct SolverError : std::runtime_error {
    double residual;
    SolverError(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

/// Thrown on malformed experiment configs or data files; carries the
/// 1-based line number when known (0 otherwise).
struct ConfigError : std::runtime_error {
    int line;
    explicit ConfigError(const std::string& what, int line_no = 0)
        : std::runtime_error(line_no > 0 ? what + " (line " + std::to_string(line_no) + ")"
                                         : what),
          line(line_no) {}
};

/// Shortest-faithful text form of a double: parsing the result recovers the
/// exact bit pattern, which is what the round-trip contracts rely on.
inline std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

} // namespace licra
