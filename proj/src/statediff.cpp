#include "grip/statediff.hpp"

namespace grip {

namespace {

void write_rot6d(Eigen::Matrix<double, 4, 6>& block, int row, const Rotation& r) {
    Rot6D v = rot6d_from_matrix(r);
    block.row(row).head<3>() = v.a.transpose();
    block.row(row).tail<3>() = v.b.transpose();
}

}  // namespace

std::array<double, StateDifference::kFlatWidth> StateDifference::flatten() const {
    std::array<double, kFlatWidth> out{};
    size_t k = 0;
    auto put = [&](const auto& m) {
        for (int r = 0; r < m.rows(); ++r) {
            for (int c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
        }
    };
    put(d_theta);
    put(d_v);
    put(d_omega);
    put(theta_leaf);
    put(d_p);
    put(p);
    return out;
}

StateDifference compute_state_difference(const KinematicEstimate& kin, const SimState& sim,
                                         const AblationMask& mask, const StateDiffContext& ctx) {
    const Rotation heading =
        heading_rotation(sim.joint_rot[body::kRoot], forward_axis(), ctx.heading_prev);
    const Rotation align = heading.inverse();
    const Mat3 align_m = align.matrix();
    const Vec3 sim_root = sim.joint_pos.row(body::kRoot).transpose();

    StateDifference d;
    if (mask.orientation) {
        for (int i = 0; i < 4; ++i) {
            int j = body::kImuJoints[size_t(i)];
            Rotation rel = align * kin.joint_rotation(j) * sim.joint_rot[size_t(j)].inverse() *
                           heading;
            write_rot6d(d.d_theta, i, rel);
            write_rot6d(d.theta_leaf, i, align * sim.joint_rot[size_t(j)]);
        }
    }
    if (mask.velocity) {
        for (int i = 0; i < 6; ++i) {
            int j = body::kKeyJoints[size_t(i)];
            Vec3 dv = kin.v_key.row(i).transpose() - sim.joint_linvel.row(j).transpose();
            d.d_v.row(i) = (align_m * dv).transpose();
        }
    }
    if (mask.angular) {
        for (int i = 0; i < 4; ++i) {
            int j = body::kImuJoints[size_t(i)];
            Vec3 w_kin = Vec3::Zero();
            if (ctx.kin_prev) {
                w_kin = angular_velocity(ctx.kin_prev->joint_rotation(j), kin.joint_rotation(j),
                                         ctx.dt);
            }
            Vec3 dw = w_kin - sim.joint_angvel.row(j).transpose();
            d.d_omega.row(i) = (align_m * dw).transpose();
        }
    }
    const bool want_p = mask.joints_relative || mask.joints_global;
    if (want_p) {
        for (int j = 0; j < body::kNumJoints; ++j) {
            Vec3 kin_local = kin.p.row(j).transpose();
            Vec3 sim_pos = sim.joint_pos.row(j).transpose();
            Vec3 diff;
            if (mask.joints_relative) {
                diff = kin_local - (sim_pos - sim_root);
            } else {
                diff = (ctx.kin_root_global + kin_local) - sim_pos;
            }
            d.d_p.row(j) = (align_m * diff).transpose();
            d.p.row(j) = (align_m * kin_local).transpose();
        }
    }
    return d;
}

}  // namespace grip
