#pragma once

#include <Eigen/Core>

namespace stepseq {

using Vec2 = Eigen::Vector2d;
using Vec5 = Eigen::Matrix<double, 5, 1>;

/// Lateral direction of a step. Bound sets are labeled by the sign of the
/// step's y displacement, not by a physical foot name; which foot that is
/// on a given robot is a configuration concern.
enum class Side { neg, pos };

constexpr Side other(Side s) { return s == Side::neg ? Side::pos : Side::neg; }

constexpr const char* to_string(Side s) { return s == Side::neg ? "neg" : "pos"; }

}  // namespace stepseq
