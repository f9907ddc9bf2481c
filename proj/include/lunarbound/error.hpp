#pragma once

#include <stdexcept>
#include <string>

namespace lunarbound {

enum class ErrorCode {
    InvalidArgument = 1,
    Singular,
    Domain,
    Collision,
    NoSplitting,
    Infeasible,
    NotApplicable,
    Convergence,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Thrown by the Kepler propagator when a radial orbit reaches the center.
class CollisionError : public Error {
public:
    CollisionError(double t_collision, const std::string& what)
        : Error(ErrorCode::Collision, what), t_collision_(t_collision) {}
    double t_collision() const noexcept { return t_collision_; }

private:
    double t_collision_;
};

}  // namespace lunarbound
