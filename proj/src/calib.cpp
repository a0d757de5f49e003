#include "grip/calib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace grip {

namespace {

constexpr double kStaticityBound = 0.05;  // per-axis accel variance, (m/s^2)^2
constexpr double kVqfTauAcc = 3.0;        // s, inclination-correction time constant

void check_window(const RawImuStream& stream, FrameRange w, int min_frames) {
    if (w.begin < 0 || size_t(w.end) > stream.size() || w.length() < min_frames) {
        throw SequenceTooShort("calibration window must cover >= " +
                               std::to_string(min_frames) + " recorded frames");
    }
}

void check_static(const RawImuStream& stream, FrameRange w) {
    Vec3 mean = Vec3::Zero();
    for (int t = w.begin; t < w.end; ++t) mean += stream.accel[size_t(t)];
    mean /= double(w.length());
    Vec3 var = Vec3::Zero();
    for (int t = w.begin; t < w.end; ++t) {
        Vec3 d = stream.accel[size_t(t)] - mean;
        var += d.cwiseProduct(d);
    }
    var /= double(w.length());
    if (var.maxCoeff() >= kStaticityBound) {
        throw StaticityViolation("device moved during a static calibration window");
    }
}

Rotation mean_orientation(const RawImuStream& stream, FrameRange w) {
    if (stream.orientation_r.size() != stream.size()) {
        throw MissingContext("stream carries no reference-frame orientations");
    }
    return chordal_mean(
        std::span<const Rotation>(stream.orientation_r.data() + w.begin, size_t(w.length())));
}

// Body rate over the step ending at each sample: R(t) = R(t-1) * exp(w_t dt),
// the convention strapdown integration consumes. Sample 0 repeats sample 1.
std::vector<Vec3> body_rates(const std::vector<Rotation>& r, double dt) {
    std::vector<Vec3> w(r.size(), Vec3::Zero());
    for (size_t t = 1; t < r.size(); ++t) {
        w[t] = (r[t - 1].inverse() * r[t]).rotvec() / dt;
    }
    if (r.size() >= 2) w[0] = w[1];
    return w;
}

}  // namespace

Vec3 insole_handedness_gyro(const Vec3& w, Side side) {
    return side == Side::left ? Vec3(-w.x(), w.y(), -w.z()) : w;
}

Vec3 insole_handedness_accel(const Vec3& a, Side side) {
    return side == Side::left ? Vec3(a.x(), -a.y(), a.z()) : a;
}

Rotation estimate_reference_frame(const RawImuStream& stream, FrameRange static_window) {
    check_window(stream, static_window, 100);
    check_static(stream, static_window);
    return mean_orientation(stream, static_window);
}

Rotation derive_joint_to_sensor(const RawImuStream& stream, FrameRange tpose_window,
                                const Rotation& ref_frame_r_to_g,
                                const Rotation& tpose_joint_global) {
    check_window(stream, tpose_window, 100);
    check_static(stream, tpose_window);
    Rotation sensor_r = mean_orientation(stream, tpose_window);  // R^{s_T}_r
    return sensor_r.inverse() * ref_frame_r_to_g.inverse() * tpose_joint_global;
}

CalibrationContext make_calibration_context(const RawImuStream& stream, FrameRange floor_window,
                                            FrameRange tpose_window,
                                            const Rotation& tpose_joint_global) {
    CalibrationContext ctx;
    ctx.ref_frame_r_to_g = estimate_reference_frame(stream, floor_window).inverse();
    ctx.joint_to_sensor =
        derive_joint_to_sensor(stream, tpose_window, ctx.ref_frame_r_to_g, tpose_joint_global);
    ctx.tpose_window = tpose_window;
    ctx.tpose_joint_global = tpose_joint_global;
    return ctx;
}

CalibratedImuStream calibrate_watch_strap(const RawImuStream& stream,
                                          const CalibrationContext& ctx) {
    if (ctx.tpose_window.empty()) {
        throw MissingContext("calibration context lacks a T-pose window");
    }
    if (stream.orientation_r.size() != stream.size()) {
        throw MissingContext("stream carries no reference-frame orientations");
    }
    CalibratedImuStream out;
    out.dt = stream.dt;
    out.joint_orientation_g.reserve(stream.size());
    out.accel_g.reserve(stream.size());
    for (size_t t = 0; t < stream.size(); ++t) {
        Rotation sensor_g = ctx.ref_frame_r_to_g * stream.orientation_r[t];
        out.joint_orientation_g.push_back(sensor_g * ctx.joint_to_sensor);
        out.accel_g.push_back(sensor_g * stream.accel[t] + gravity_vector());
    }
    return out;
}

std::vector<Rotation> vqf_track(const std::vector<Vec3>& gyro, const std::vector<Vec3>& accel,
                                double dt) {
    if (gyro.size() != accel.size()) throw LengthMismatch("gyro/accel length mismatch");
    if (!(dt > 0.0)) throw DegenerateInput("vqf_track: dt must be positive");

    std::vector<Rotation> out;
    out.reserve(gyro.size());
    Rotation r;  // sensor -> gravity-aligned world, yaw arbitrary
    for (size_t i = 0; i < gyro.size(); ++i) {
        if (i > 0) r = r * Rotation::from_rotvec(gyro[i] * dt);

        // Inclination correction: rotate the measured up direction onto +z
        // about a horizontal axis, with an expanding-window gain that decays
        // to dt/tau. The first sample snaps the initial tilt.
        double norm = accel[i].norm();
        if (norm > 1e-8) {
            Vec3 up = r * (accel[i] / norm);
            Vec3 axis = up.cross(Vec3::UnitZ());
            double s = axis.norm();
            double angle = std::atan2(s, up.z());
            if (s > 1e-12) {
                double t_elapsed = double(i + 1) * dt;
                double gain = dt / std::clamp(t_elapsed, dt, kVqfTauAcc);
                r = Rotation::axis_angle(axis / s, gain * angle) * r;
            } else if (up.z() < 0.0) {
                r = Rotation::rot_x(std::numbers::pi) * r;  // fully inverted start
            }
        }
        out.push_back(r);
    }
    return out;
}

CalibratedImuStream calibrate_insole(const RawImuStream& stream, Side side,
                                     const Rotation& sensor_to_joint,
                                     const std::optional<InsoleTposeAnchor>& tpose) {
    if (!tpose) throw MissingTpose("insole calibration requires a T-pose anchor");

    std::vector<Vec3> gyro_j(stream.size()), accel_j(stream.size());
    for (size_t t = 0; t < stream.size(); ++t) {
        gyro_j[t] = sensor_to_joint * insole_handedness_gyro(stream.gyro[t], side);
        accel_j[t] = sensor_to_joint * insole_handedness_accel(stream.accel[t], side);
    }

    std::vector<Rotation> vqf = vqf_track(gyro_j, accel_j, stream.dt);
    Rotation align = tpose->tpose_joint_global * tpose->tpose_vqf.inverse();

    CalibratedImuStream out;
    out.dt = stream.dt;
    out.joint_orientation_g.reserve(stream.size());
    out.accel_g.reserve(stream.size());
    for (size_t t = 0; t < stream.size(); ++t) {
        Rotation joint_g = align * vqf[t];
        out.joint_orientation_g.push_back(joint_g);
        out.accel_g.push_back(joint_g * accel_j[t] + gravity_vector());
    }
    return out;
}

CalibratedImuStream calibrate_headset(const HeadsetExtrinsics& ext,
                                      const std::vector<Vec3>& mocap_cpf_positions,
                                      const std::vector<Vec3>& accel_i) {
    if (ext.slam_device_orientation.size() != accel_i.size() ||
        ext.slam_position.size() != mocap_cpf_positions.size()) {
        throw LengthMismatch("headset streams must cover the same frames");
    }
    SimilarityTransform world_to_global;  // R^w_g, t, s
    try {
        world_to_global = umeyama_align(ext.slam_position, mocap_cpf_positions, true);
    } catch (const DegenerateInput& e) {
        throw DegenerateTrajectory(e.what());
    }

    CalibratedImuStream out;
    out.joint_orientation_g.reserve(accel_i.size());
    out.accel_g.reserve(accel_i.size());
    for (size_t t = 0; t < accel_i.size(); ++t) {
        Rotation device_g = world_to_global.r * ext.slam_device_orientation[t];
        out.joint_orientation_g.push_back(device_g * ext.imu_to_device * ext.imu_to_cpf);
        out.accel_g.push_back(device_g * (ext.imu_to_device * accel_i[t]) + gravity_vector());
    }
    return out;
}

std::vector<double> vertical_accel(const CalibratedImuStream& stream) {
    std::vector<double> z(stream.size());
    for (size_t t = 0; t < stream.size(); ++t) z[t] = stream.accel_g[t].z();
    return z;
}

SyncResult synchronize(const std::vector<CalibratedImuStream>& streams,
                       const std::vector<std::vector<double>>& reference_vertical_accel,
                       int max_lag) {
    if (streams.size() != reference_vertical_accel.size()) {
        throw LengthMismatch("one reference series per stream required");
    }
    SyncResult res;
    res.offsets.reserve(streams.size());
    for (size_t i = 0; i < streams.size(); ++i) {
        res.offsets.push_back(
            cross_correlation_offset(vertical_accel(streams[i]), reference_vertical_accel[i],
                                     max_lag));
    }

    // Stream sample t corresponds to reference time t - offset; intersect the
    // covered reference intervals.
    int start = std::numeric_limits<int>::min();
    int end = std::numeric_limits<int>::max();
    for (size_t i = 0; i < streams.size(); ++i) {
        start = std::max(start, -res.offsets[i]);
        end = std::min(end, int(streams[i].size()) - res.offsets[i]);
    }
    if (end <= start) throw SequenceTooShort("synchronized streams do not overlap");
    res.common = FrameRange{start, end};

    res.trimmed.reserve(streams.size());
    for (size_t i = 0; i < streams.size(); ++i) {
        int lo = start + res.offsets[i];
        int hi = end + res.offsets[i];
        CalibratedImuStream cut;
        cut.dt = streams[i].dt;
        cut.joint_orientation_g.assign(streams[i].joint_orientation_g.begin() + lo,
                                       streams[i].joint_orientation_g.begin() + hi);
        cut.accel_g.assign(streams[i].accel_g.begin() + lo, streams[i].accel_g.begin() + hi);
        res.trimmed.push_back(std::move(cut));
    }
    return res;
}

CalibratedImuStream synthesize_imu(const std::vector<Rotation>& joint_orientations,
                                   const TimeSeries3& attachment_positions) {
    if (joint_orientations.size() != attachment_positions.samples.size()) {
        throw LengthMismatch("orientations and positions must cover the same frames");
    }
    CalibratedImuStream out;
    out.dt = attachment_positions.dt;
    out.joint_orientation_g = joint_orientations;
    out.accel_g = finite_diff_accel(attachment_positions).samples;
    return out;
}

RawImuStream synthesize_raw_watch_strap(const std::vector<Rotation>& joint_orientation_g,
                                        const std::vector<Vec3>& accel_g,
                                        const Rotation& ref_frame_r_to_g,
                                        const Rotation& joint_to_sensor, double dt) {
    if (joint_orientation_g.size() != accel_g.size()) {
        throw LengthMismatch("orientations and accelerations must cover the same frames");
    }
    RawImuStream raw;
    raw.device_kind = DeviceKind::watch;
    raw.dt = dt;
    const size_t n = joint_orientation_g.size();
    raw.orientation_r.reserve(n);
    raw.accel.reserve(n);
    std::vector<Rotation> sensor_g(n);
    for (size_t t = 0; t < n; ++t) {
        sensor_g[t] = joint_orientation_g[t] * joint_to_sensor.inverse();
        raw.orientation_r.push_back(ref_frame_r_to_g.inverse() * sensor_g[t]);
        // Sensors report specific force: the gravity-free global acceleration
        // minus gravity, expressed in the sensor frame.
        raw.accel.push_back(sensor_g[t].inverse() * (accel_g[t] - gravity_vector()));
    }
    raw.gyro = body_rates(sensor_g, dt);
    return raw;
}

RawImuStream synthesize_raw_insole(const std::vector<Rotation>& joint_orientation_g,
                                   const std::vector<Vec3>& accel_g, Side side,
                                   const Rotation& sensor_to_joint, double dt) {
    if (joint_orientation_g.size() != accel_g.size()) {
        throw LengthMismatch("orientations and accelerations must cover the same frames");
    }
    RawImuStream raw;
    raw.device_kind = side == Side::left ? DeviceKind::insole_left : DeviceKind::insole_right;
    raw.dt = dt;
    const size_t n = joint_orientation_g.size();
    std::vector<Vec3> gyro_j = body_rates(joint_orientation_g, dt);
    raw.gyro.reserve(n);
    raw.accel.reserve(n);
    for (size_t t = 0; t < n; ++t) {
        Vec3 w = sensor_to_joint.inverse() * gyro_j[t];
        Vec3 a = sensor_to_joint.inverse() *
                 (joint_orientation_g[t].inverse() * (accel_g[t] - gravity_vector()));
        // The handedness flips are involutive, so applying them here undoes
        // the correction calibrate_insole will apply.
        raw.gyro.push_back(insole_handedness_gyro(w, side));
        raw.accel.push_back(insole_handedness_accel(a, side));
    }
    return raw;
}

}  // namespace grip
