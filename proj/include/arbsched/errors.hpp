// Exception types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace arbsched {

// Invalid construction parameters (negative rates, decreasing slopes, ...).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Flow evaluated outside [-p_out, p_in] by more than the flow tolerance.
struct DomainViolation : std::domain_error {
    using std::domain_error::domain_error;
};

// Round-trip efficiency outside (0, 1].
struct InvalidEfficiency : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Schedule violates problem constraints beyond tolerance.
struct InfeasibleSchedule : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No feasible schedule exists (target level unreachable).
struct InfeasibleProblem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Solver self-check failed; indicates a bug or pathological tolerances.
struct InternalInvariantViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Grid oracle: target level unreachable on the discretized lattice.
struct GridInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Enumeration oracle: instance exceeds the configured size caps.
struct TooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; message carries the 1-based line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace arbsched
