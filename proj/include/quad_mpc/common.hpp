#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace quad_mpc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr int kNumLegs = 4;

/// Leg ordering used everywhere: front-left, front-right, rear-left, rear-right.
enum class Leg : int { FL = 0, FR = 1, RL = 2, RR = 3 };

template <typename T>
using PerLeg = std::array<T, kNumLegs>;

inline constexpr PerLeg<const char*> kLegNames{"FL", "FR", "RL", "RR"};

// Errors. Every failure mode that callers may want to branch on has its own type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GimbalLock : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct EmptyContact : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct InvalidBounds : Error {
  using Error::Error;
};
struct UnknownGait : Error {
  using Error::Error;
};
struct PhaseOutOfRange : Error {
  using Error::Error;
};
struct Unreachable : Error {
  using Error::Error;
};
struct SimDiverged : Error {
  SimDiverged(const std::string& what, double time) : Error(what), t(time) {}
  double t;
};
struct ConfigError : Error {
  using Error::Error;
};
struct MissingColumn : Error {
  using Error::Error;
};

}  // namespace quad_mpc
