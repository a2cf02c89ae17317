#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpburst {

// Base class for all toolkit errors. Subclasses map onto the CLI exit codes:
// ConfigError -> 2, FormatError -> 3, everything else -> 4 (stage failure).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid parameters, impossible configurations, missing inputs.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed on-disk data; carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& msg, std::uint64_t offset)
        : Error(msg + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

// Mathematical preconditions violated (out-of-range probabilities, empty tails, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Model cannot be resolved from the data (coincident centers, too few modes,
// all-equal abscissae, degenerate cuts).
class DegeneracyError : public Error {
public:
    explicit DegeneracyError(const std::string& msg) : Error(msg) {}
};

// Threshold search exhausted its range without meeting the target.
class SaturationError : public Error {
public:
    explicit SaturationError(const std::string& msg) : Error(msg) {}
};

// Iterative fit failed to converge; keeps the last residual vector for diagnosis.
class FitError : public Error {
public:
    FitError(const std::string& msg, std::vector<double> residuals, double chi2, int iterations)
        : Error(msg), residuals_(std::move(residuals)), chi2_(chi2), iterations_(iterations) {}
    const std::vector<double>& residuals() const noexcept { return residuals_; }
    double chi2() const noexcept { return chi2_; }
    int iterations() const noexcept { return iterations_; }

private:
    std::vector<double> residuals_;
    double chi2_;
    int iterations_;
};

}  // namespace qpburst
