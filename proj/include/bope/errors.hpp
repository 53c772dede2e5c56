#pragma once

#include <stdexcept>
#include <string>

namespace bope {

// Base for all library errors. Catch this to handle anything thrown by bope.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& msg) : Error(msg) {}
};

struct NonFiniteValue : Error {
    explicit NonFiniteValue(const std::string& msg) : Error(msg) {}
};

struct MixedActionVariant : Error {
    explicit MixedActionVariant(const std::string& msg) : Error(msg) {}
};

struct VariantMismatch : Error {
    explicit VariantMismatch(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct SingleClass : Error {
    explicit SingleClass(const std::string& msg) : Error(msg) {}
};

// Logistic solver ran out of iterations; carries the final gradient norm.
struct NonConvergence : Error {
    NonConvergence(const std::string& msg, double gradient_norm)
        : Error(msg + " (final gradient inf-norm " + std::to_string(gradient_norm) + ")"),
          grad_norm(gradient_norm) {}
    double grad_norm;
};

struct FoldTooSmall : Error {
    explicit FoldTooSmall(const std::string& msg) : Error(msg) {}
};

struct MissingK : Error {
    explicit MissingK(const std::string& msg) : Error(msg) {}
};

struct OutOfRange : Error {
    explicit OutOfRange(const std::string& msg) : Error(msg) {}
};

struct ZeroScale : Error {
    explicit ZeroScale(const std::string& msg) : Error(msg) {}
};

struct AllZeroWeights : Error {
    explicit AllZeroWeights(const std::string& msg) : Error(msg) {}
};

struct NonPositiveTruth : Error {
    explicit NonPositiveTruth(const std::string& msg) : Error(msg) {}
};

struct EmptyCandidates : Error {
    explicit EmptyCandidates(const std::string& msg) : Error(msg) {}
};

struct EmptyInput : Error {
    explicit EmptyInput(const std::string& msg) : Error(msg) {}
};

struct ZeroDenominator : Error {
    explicit ZeroDenominator(const std::string& msg) : Error(msg) {}
};

struct FileNotFound : Error {
    explicit FileNotFound(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t row_index, const std::string& column)
        : Error(msg + " (row " + std::to_string(row_index) + ", column '" + column + "')"),
          row(row_index),
          col(column) {}
    std::size_t row;
    std::string col;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct TooFewRows : Error {
    explicit TooFewRows(const std::string& msg) : Error(msg) {}
};

}  // namespace bope
