#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace covclust {

/// Broad failure families; the CLI maps each to an exit code.
enum class ErrorKind {
    config,     // bad configuration or usage (exit 2)
    data,       // input data cannot support the request (exit 3)
    numerical,  // solver or search did not reach its target (exit 4)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// A precondition of an operation was not met by its caller.
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& what)
        : Error(ErrorKind::config, "contract violation: " + what) {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::data, "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class SamplingFailure : public Error {
public:
    SamplingFailure(double best_correlation, const std::string& what)
        : Error(ErrorKind::numerical, what), best_correlation_(best_correlation) {}
    double best_correlation() const noexcept { return best_correlation_; }

private:
    double best_correlation_;
};

class DegenerateInstance : public Error {
public:
    explicit DegenerateInstance(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Coordinate descent hit its iteration cap. Carries the best iterate.
class NonConvergence : public Error {
public:
    NonConvergence(std::vector<double> beta, double kkt_violation, std::size_t iterations)
        : Error(ErrorKind::numerical,
                "lasso did not converge after " + std::to_string(iterations) +
                    " sweeps (kkt violation " + std::to_string(kkt_violation) + ")"),
          beta_(std::move(beta)),
          kkt_violation_(kkt_violation) {}
    const std::vector<double>& beta() const noexcept { return beta_; }
    double kkt_violation() const noexcept { return kkt_violation_; }

private:
    std::vector<double> beta_;
    double kkt_violation_;
};

class EmptyClassSetError : public Error {
public:
    explicit EmptyClassSetError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class UndefinedImpurity : public Error {
public:
    explicit UndefinedImpurity(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NoPeersError : public Error {
public:
    explicit NoPeersError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NotReadyError : public Error {
public:
    explicit NotReadyError(const std::string& stage)
        : Error(ErrorKind::data, "stage '" + stage + "' has not produced its artifacts"),
          stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Wraps an error raised inside a pipeline stage with the stage name.
class StageError : public Error {
public:
    StageError(const std::string& stage, const Error& cause)
        : Error(cause.kind(), "stage '" + stage + "' failed: " + cause.what()), stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config:
        return 2;
    case ErrorKind::data:
        return 3;
    case ErrorKind::numerical:
        return 4;
    }
    return 1;
}

}  // namespace covclust
