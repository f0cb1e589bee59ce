#pragma once

#include <stdexcept>
#include <string>

namespace ttpmf {

/// Operand shapes or ranks are inconsistent.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Multi-index outside the tensor bounds.
class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// A dense materialisation was refused because it exceeds the memory guard.
class GuardError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// A black-box evaluator produced NaN or infinity.
class NonFiniteValueError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A density lost all of its mass (normalisation constant <= 0 or not finite).
class DegenerateDensityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, grid or run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ttpmf
