#pragma once

#include <optional>
#include <vector>

#include "grip/rotmath.hpp"

namespace grip {

enum class DeviceKind { watch, strap, insole_left, insole_right, headset };
enum class Side { left, right };

/// Half-open frame interval [begin, end).
struct FrameRange {
    int begin = 0;
    int end = 0;
    int length() const { return end - begin; }
    bool empty() const { return end <= begin; }
};

/// Per-device sensor stream exactly as recorded: orientations in the device
/// vendor's reference frame r (absent for insoles, which are 6-DoF only),
/// body-frame rates and specific forces (gravity included).
struct RawImuStream {
    DeviceKind device_kind = DeviceKind::watch;
    std::vector<Rotation> orientation_r;  // R^s_r per frame; empty for insoles
    std::vector<Vec3> gyro;               // rad/s, sensor frame
    std::vector<Vec3> accel;              // m/s^2, sensor frame, gravity included
    double dt = kFrameDt;

    size_t size() const { return accel.size(); }
};

/// Everything needed to move a watch/strap stream into the global frame.
struct CalibrationContext {
    Rotation ref_frame_r_to_g;     // R^r_g, from the floor-calibration window
    Rotation joint_to_sensor;      // R^j_s, fixed mounting rotation
    FrameRange tpose_window;       // static T-pose frames used to derive R^j_s
    Rotation tpose_joint_global;   // R^{j_T}_g, the joint's known T-pose orientation
};

/// Globally expressed stream: joint orientations plus gravity-free
/// accelerations, the common currency of the rest of the pipeline.
struct CalibratedImuStream {
    std::vector<Rotation> joint_orientation_g;  // R^j_g per frame
    std::vector<Vec3> accel_g;                  // m/s^2, global, gravity removed
    double dt = kFrameDt;

    size_t size() const { return accel_g.size(); }
};

/// Headset factory extrinsics plus its SLAM trajectory in the world frame w.
struct HeadsetExtrinsics {
    Rotation imu_to_device;                         // R^i_d
    Rotation imu_to_cpf;                            // R^c_i
    std::vector<Rotation> slam_device_orientation;  // R^d_w per frame
    std::vector<Vec3> slam_position;                // m, world frame
};

/// T-pose anchor for insole alignment: the filter's orientation at the T-pose
/// frame and the joint's known global orientation there.
struct InsoleTposeAnchor {
    Rotation tpose_vqf;           // R^{j_T}_vqf
    Rotation tpose_joint_global;  // R^{j_T}_g
};

/// Chordal mean of the device orientations over a static window in which the
/// device lies flat in the agreed global pose; the result is R^g_r and its
/// inverse is the reference-to-global rotation. Throws StaticityViolation
/// when any accel axis has variance >= 0.05 (m/s^2)^2 over the window, and
/// SequenceTooShort below 100 frames.
Rotation estimate_reference_frame(const RawImuStream& stream, FrameRange static_window);

/// Fixed joint-to-sensor mounting rotation from a static T-pose window:
/// R^{j_T}_{s_T} = (R^{s_T}_r)^-1 R^g_r R^{j_T}_g. Same staticity rules as
/// estimate_reference_frame.
Rotation derive_joint_to_sensor(const RawImuStream& stream, FrameRange tpose_window,
                                const Rotation& ref_frame_r_to_g,
                                const Rotation& tpose_joint_global);

/// Floor window + T-pose window -> complete context for calibrate_watch_strap.
CalibrationContext make_calibration_context(const RawImuStream& stream, FrameRange floor_window,
                                            FrameRange tpose_window,
                                            const Rotation& tpose_joint_global);

/// Applies R^j_g = R^r_g R^s_r R^j_s per frame and rotates accelerations into
/// the global frame with gravity removed. Throws MissingContext when the
/// stream carries no orientations or the context has an empty T-pose window.
CalibratedImuStream calibrate_watch_strap(const RawImuStream& stream,
                                          const CalibrationContext& ctx);

/// Gravity-referenced orientation from gyro strapdown plus accelerometer
/// inclination correction (time constant 3 s, expanding-window gain so the
/// first sample snaps the inclination). Yaw is relative to the start frame.
std::vector<Rotation> vqf_track(const std::vector<Vec3>& gyro, const std::vector<Vec3>& accel,
                                double dt);

/// Handedness correction applied to insole samples before any rotation:
/// the left sensor negates gyro x/z and accel y; the right side passes
/// through unchanged.
Vec3 insole_handedness_gyro(const Vec3& w, Side side);
Vec3 insole_handedness_accel(const Vec3& a, Side side);

/// Insole path: side-specific sign flips (left gyro x/z, left accel y), the
/// fixed sensor-to-joint rotation, orientation through vqf_track, then global
/// alignment R^j_g = R^{j_T}_g (R^{j_T}_vqf)^-1 R^j_vqf. Throws MissingTpose
/// when no anchor is supplied.
CalibratedImuStream calibrate_insole(const RawImuStream& stream, Side side,
                                     const Rotation& sensor_to_joint,
                                     const std::optional<InsoleTposeAnchor>& tpose);

/// Headset path: similarity-aligns the SLAM trajectory to the MoCap CPF
/// trajectory (rotation + translation + scale), then chains
/// R^c_g = R^w_g R^d_w R^i_d R^c_i. Throws DegenerateTrajectory for collinear
/// or too-short trajectories.
CalibratedImuStream calibrate_headset(const HeadsetExtrinsics& ext,
                                      const std::vector<Vec3>& mocap_cpf_positions,
                                      const std::vector<Vec3>& accel_i);

/// Vertical (global z) acceleration series, the signal used for sync.
std::vector<double> vertical_accel(const CalibratedImuStream& stream);

struct SyncResult {
    std::vector<int> offsets;                  // lag of each stream vs its reference
    std::vector<CalibratedImuStream> trimmed;  // aligned to a common window
    FrameRange common;                         // window in reference time
};

/// Per-stream offset of the vertical acceleration against the matching
/// reference series (positive = stream trails the reference), then trims all
/// streams to the overlapping window. Throws SequenceTooShort when the
/// overlap is empty; FlatSignal propagates per stream.
SyncResult synchronize(const std::vector<CalibratedImuStream>& streams,
                       const std::vector<std::vector<double>>& reference_vertical_accel,
                       int max_lag);

/// Virtual IMU from motion labels: orientations pass through, accelerations
/// are second differences of the attachment positions (gravity-free by
/// construction). Throws SequenceTooShort below 3 frames, LengthMismatch when
/// the inputs disagree.
CalibratedImuStream synthesize_imu(const std::vector<Rotation>& joint_orientations,
                                   const TimeSeries3& attachment_positions);

/// Inverse of calibrate_watch_strap for fixture construction: produces the
/// raw stream a device with the given mounting would have recorded for the
/// given global motion.
RawImuStream synthesize_raw_watch_strap(const std::vector<Rotation>& joint_orientation_g,
                                        const std::vector<Vec3>& accel_g,
                                        const Rotation& ref_frame_r_to_g,
                                        const Rotation& joint_to_sensor, double dt = kFrameDt);

/// Inverse of calibrate_insole for fixture construction (applies the inverse
/// handedness flips for the left side).
RawImuStream synthesize_raw_insole(const std::vector<Rotation>& joint_orientation_g,
                                   const std::vector<Vec3>& accel_g, Side side,
                                   const Rotation& sensor_to_joint, double dt = kFrameDt);

}  // namespace grip
