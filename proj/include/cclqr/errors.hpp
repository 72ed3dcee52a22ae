#pragma once

#include <stdexcept>
#include <string>

namespace cclqr {

// Exception taxonomy shared by all modules.  Every error carries a
// human-readable message; the CLI maps the types onto exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct NotSymmetric : Error {
    explicit NotSymmetric(const std::string& msg) : Error(msg) {}
};

struct NotPSD : Error {
    explicit NotPSD(const std::string& msg) : Error(msg) {}
};

struct NotStable : Error {
    explicit NotStable(const std::string& msg) : Error(msg) {}
};

struct NotObservable : Error {
    explicit NotObservable(const std::string& msg) : Error(msg) {}
};

struct OutOfRange : Error {
    explicit OutOfRange(const std::string& msg) : Error(msg) {}
};

struct SingularX : Error {
    explicit SingularX(const std::string& msg) : Error(msg) {}
};

struct MalformedProblem : Error {
    explicit MalformedProblem(const std::string& msg) : Error(msg) {}
};

struct NumericalFailure : Error {
    explicit NumericalFailure(const std::string& msg) : Error(msg) {}
};

struct Infeasible : Error {
    explicit Infeasible(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

}  // namespace cclqr
