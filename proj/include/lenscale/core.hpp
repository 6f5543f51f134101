#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lenscale {

/// Parameter outside the admissible region of a closed-form relation
/// (e.g. an intermediate threshold at or above the erosion threshold).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed input data: non-finite densities, shape mismatches, bad config.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative search terminated without satisfying its condition.
class SearchFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Root finding stopped above tolerance; carries the final residual norm.
class NoSolution : public std::runtime_error {
public:
    NoSolution(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Requested length scales admit no parameter set.
class Unsatisfiable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Phase { Solid, Void };

constexpr Phase opposite(Phase p) noexcept {
    return p == Phase::Solid ? Phase::Void : Phase::Solid;
}

constexpr std::string_view to_string(Phase p) noexcept {
    return p == Phase::Solid ? "solid" : "void";
}

namespace detail {

inline void require(bool ok, std::string_view msg) {
    if (!ok) throw InvalidInput(std::string(msg));
}

inline void require_domain(bool ok, std::string_view msg) {
    if (!ok) throw DomainError(std::string(msg));
}

inline bool finite(double v) noexcept { return std::isfinite(v); }

}  // namespace detail
}  // namespace lenscale
