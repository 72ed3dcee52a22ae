#pragma once

#include <vector>

#include "cclqr/synthesis.hpp"

// Built-in demo: attitude regulation of a satellite with a flexible
// appendage, sampled at 0.1 s.  State feedback on four states (two angles
// and their rates), one torque input, two angle measurements.

namespace cclqr {

SystemModel satellite_model();
CostSpec satellite_cost();

// |u| <= 1 with at most 10% violations, normal disturbance class.
ChanceConstraint satellite_input_constraint(double eps = 0.1);
// |x_1| <= 5 (first angle) with at most 10% violations.
ChanceConstraint satellite_state_constraint(double eps = 0.1);
// Joint ellipsoidal bound x' inv(G) x <= 5 concentrating on the two
// angles; the rate semiaxes are near-slack.
ChanceConstraint satellite_joint_constraint(double eps = 0.1);

}  // namespace cclqr
