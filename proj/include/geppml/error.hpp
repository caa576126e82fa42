#pragma once

#include <stdexcept>
#include <string>

namespace geppml {

/// Bad or inconsistent input data (files, arguments, scenario definitions).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
    InputError(const std::string& file, long line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_ = 0;
};

/// Failure inside the PPML estimator.
class EstimationError : public std::runtime_error {
public:
    enum class Kind { NonConvergence, Collinearity, Separation, Degenerate };

    EstimationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace geppml
