// errors.hpp: Exception types thrown by the jpm library

#pragma once

#include <stdexcept>
#include <string>

namespace jpm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parameter or argument outside the documented domain.
struct PreconditionError : Error {
    using Error::Error;
};

// Coherent-state Fock tail exceeds tolerance: truncation too small.
struct TruncationError : Error {
    using Error::Error;
};

// Hermiticity / trace / positivity drift beyond tolerance.
struct InvariantViolation : Error {
    using Error::Error;
};

struct ZeroProbabilityOutcome : Error {
    using Error::Error;
};

struct PoleEvaluation : Error {
    using Error::Error;
};

struct RegimeViolation : Error {
    using Error::Error;
};

struct GridTooCoarse : Error {
    using Error::Error;
};

struct AnchorDegenerate : Error {
    using Error::Error;
};

struct SnapshotError : Error {
    using Error::Error;
};

// Configuration problems; carries the offending line (0 if unknown) and field.
struct ConfigError : Error {
    ConfigError(const std::string& msg, std::string field_name = {}, int line_no = 0)
        : Error(format(msg, field_name, line_no)), field(std::move(field_name)), line(line_no) {}

    std::string field;
    int line{0};

private:
    static std::string format(const std::string& msg, const std::string& f, int l) {
        std::string out = "config";
        if (l > 0) out += ":" + std::to_string(l);
        if (!f.empty()) out += " [" + f + "]";
        return out + ": " + msg;
    }
};

} // namespace jpm
