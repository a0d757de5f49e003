#pragma once

#include <array>

#include "grip/body.hpp"
#include "grip/kinnet.hpp"
#include "grip/rotmath.hpp"

namespace grip {

/// Per-joint state of the simulated humanoid, all in the global frame.
struct SimState {
    Eigen::Matrix<double, 24, 3> joint_pos = Eigen::Matrix<double, 24, 3>::Zero();     // m
    std::array<Rotation, 24> joint_rot;                                                // R^j_g
    Eigen::Matrix<double, 24, 3> joint_linvel = Eigen::Matrix<double, 24, 3>::Zero();  // m/s
    Eigen::Matrix<double, 24, 3> joint_angvel = Eigen::Matrix<double, 24, 3>::Zero();  // rad/s
};

/// Feature-group switches for the tracking observation. The two joint-position
/// variants are alternatives: the relative form root-centres both sides before
/// differencing, the global form differences drift-prone integrated positions.
/// When both are set the relative form wins.
struct AblationMask {
    bool orientation = true;      // relative leaf rotations + aligned sim leaf rotations
    bool angular = true;          // leaf angular-velocity differences
    bool velocity = true;         // key-joint linear-velocity differences
    bool joints_global = false;   // joint-position differences, integrated-root variant
    bool joints_relative = true;  // joint-position differences, root-aligned variant

    static AblationMask oa() { return {true, true, false, false, false}; }
    static AblationMask oav() { return {true, true, true, false, false}; }
    static AblationMask oav_jglo() { return {true, true, true, true, false}; }
    static AblationMask oav_jrel() { return {true, true, true, false, true}; }
    static AblationMask full() { return oav_jrel(); }
};

/// Difference between the kinematic estimate and the simulated state,
/// expressed in the simulated root's heading-aligned frame. Masked-off
/// blocks are zero; the flattened width is always 222.
struct StateDifference {
    Eigen::Matrix<double, 4, 6> d_theta = Eigen::Matrix<double, 4, 6>::Zero();
    Eigen::Matrix<double, 6, 3> d_v = Eigen::Matrix<double, 6, 3>::Zero();
    Eigen::Matrix<double, 4, 3> d_omega = Eigen::Matrix<double, 4, 3>::Zero();
    Eigen::Matrix<double, 4, 6> theta_leaf = Eigen::Matrix<double, 4, 6>::Zero();
    Eigen::Matrix<double, 24, 3> d_p = Eigen::Matrix<double, 24, 3>::Zero();
    Eigen::Matrix<double, 24, 3> p = Eigen::Matrix<double, 24, 3>::Zero();

    static constexpr int kFlatWidth = 24 + 18 + 12 + 24 + 72 + 72;  // 222

    /// Blocks in declaration order, each row-major.
    std::array<double, kFlatWidth> flatten() const;
};

/// Sequence context the single-frame difference cannot carry itself.
struct StateDiffContext {
    /// Previous-frame estimate; enables the estimated leaf angular velocities
    /// (without it their contribution is taken as zero).
    const KinematicEstimate* kin_prev = nullptr;
    /// Integrated global root position of the estimate (joints_global only).
    Vec3 kin_root_global = Vec3::Zero();
    /// Fallback heading when the simulated root faces straight up/down.
    const Rotation* heading_prev = nullptr;
    double dt = kFrameDt;
};

/// Heading-aligned residual between estimate and simulation. Every block is
/// conjugated by the inverse heading of the simulated root, which makes the
/// result invariant to a common global yaw of both inputs.
StateDifference compute_state_difference(const KinematicEstimate& kin, const SimState& sim,
                                         const AblationMask& mask = AblationMask::full(),
                                         const StateDiffContext& ctx = {});

}  // namespace grip
