#pragma once

#include <stdexcept>
#include <string>

namespace sgeig {

// Error classes used across the library.  The CLI maps these to distinct
// process exit codes (see README).
enum class ErrorCode {
    Config,            // inconsistent or invalid configuration / input
    MissingFile,       // referenced file does not exist
    Parse,             // malformed file contents (manifest, Matrix Market, CSV)
    DimensionMismatch, // matrix/vector shapes disagree
    NonsymmetricMass,  // mass matrix fails the symmetry tolerance
    Numerical,         // breakdowns, singular factorizations, failed eigensolves
    NotConverged,      // iteration budget exhausted / flagged sample
    Io                 // filesystem write/read failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

} // namespace sgeig
