#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace morpho {

using Vec3 = Eigen::Vector3d;
using Attitude = Eigen::Quaterniond;

inline constexpr double kGravity = 9.81;

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Raised when a NaN/Inf reaches a simulation entry point.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or invalid arguments detected before any compute.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

inline void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw NonFiniteError(std::string("non-finite value in ") + what);
    }
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& v, const char* what) {
    if (!v.allFinite()) {
        throw NonFiniteError(std::string("non-finite vector in ") + what);
    }
}

}  // namespace morpho
