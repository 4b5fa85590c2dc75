#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lscbo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
public:
    NotPositiveDefinite() : Error("matrix is not positive definite after jitter escalation") {}
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

/// All constraint rows coincide, so the centered constraint matrix carries no directions.
class ConstantConstraints : public Error {
public:
    ConstantConstraints() : Error("constraint matrix is constant after centering") {}
};

class ZeroNorm : public Error {
public:
    ZeroNorm() : Error("reference matrix has zero Frobenius norm") {}
};

class InsufficientPositiveEigenvalues : public Error {
public:
    InsufficientPositiveEigenvalues(std::size_t requested, std::size_t available)
        : Error("kernel PCA requested " + std::to_string(requested) + " components but only " +
                std::to_string(available) + " positive eigenvalues exist"),
          requested_(requested),
          available_(available) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t available() const noexcept { return available_; }

private:
    std::size_t requested_;
    std::size_t available_;
};

class DimensionUnsupported : public Error {
public:
    using Error::Error;
};

class UnrepairableBlock : public Error {
public:
    explicit UnrepairableBlock(std::size_t block)
        : Error("analytic block " + std::to_string(block) + " rejects every candidate and the fallback"),
          block_(block) {}

    std::size_t block() const noexcept { return block_; }

private:
    std::size_t block_;
};

/// Invalid experiment configuration or unreadable input; maps to CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace lscbo
