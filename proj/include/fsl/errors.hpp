#pragma once

#include <stdexcept>
#include <string>

namespace fsl {

/// All recoverable failures are reported through typed exceptions so callers
/// can distinguish e.g. a degenerate likelihood from a configuration mistake.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct AllWeightsZero : Error {
    explicit AllWeightsZero(const std::string& msg) : Error(msg) {}
};

struct SingularNoise : Error {
    explicit SingularNoise(const std::string& msg) : Error(msg) {}
};

struct SupportTooLarge : Error {
    explicit SupportTooLarge(const std::string& msg) : Error(msg) {}
};

struct SingularInnovation : Error {
    explicit SingularInnovation(const std::string& msg) : Error(msg) {}
};

struct NonFiniteState : Error {
    explicit NonFiniteState(const std::string& msg) : Error(msg) {}
};

struct ZeroLikelihood : Error {
    explicit ZeroLikelihood(const std::string& msg) : Error(msg) {}
};

struct NotMonotone : Error {
    explicit NotMonotone(const std::string& msg) : Error(msg) {}
};

struct InvalidModel : Error {
    explicit InvalidModel(const std::string& msg) : Error(msg) {}
};

struct SandwichViolated : Error {
    explicit SandwichViolated(const std::string& msg) : Error(msg) {}
};

struct BoundViolated : Error {
    explicit BoundViolated(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace fsl
