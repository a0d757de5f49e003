#pragma once

// Evaluation metrics over motion segments: position and rotation errors under
// progressively stronger alignment (none, root-relative, full similarity),
// temporal smoothness, and the contact-quality measures (foot sliding,
// penetration depth, vertical ground-reaction-force error).

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "grip/body.hpp"
#include "grip/dyn.hpp"
#include "grip/rotmath.hpp"

namespace grip {

/// A reconstructed or ground-truth motion at 100 Hz: global joint positions
/// and rotations plus, when available, per-foot contact labels (forefoot,
/// rearfoot; left foot first) and vertical ground reaction forces in newtons.
/// The rotation, contact, and force series may be empty but otherwise must
/// match the position series in length.
struct MotionSequence {
    std::vector<Eigen::Matrix<double, 24, 3>> joint_pos;
    std::vector<std::array<Rotation, 24>> joint_rot;
    std::vector<std::array<std::array<bool, 2>, 2>> contact;
    std::vector<Vec2> vgrf;
    double dt = kFrameDt;

    int size() const { return int(joint_pos.size()); }

    /// Throws LengthMismatch when any non-empty series disagrees in length
    /// with the positions, or when there are no frames at all.
    void validate() const;
};

/// One row of the evaluation table. success_rate is a rollout-level statistic
/// the harness fills in; the per-segment evaluators leave it at 1.
struct MetricReport {
    double mpjpe = 0.0;         // mm
    double pel_mpjpe = 0.0;     // mm
    double pa_mpjpe = 0.0;      // mm
    double mpjre = 0.0;         // deg
    double acc = 0.0;           // m/s^2
    double fs = 0.0;            // m/s
    double fp = 0.0;            // mm
    double vgrf = 0.0;          // N
    double success_rate = 1.0;  // fraction
};

/// Mean per-joint position error in millimetres, no alignment.
double mpjpe(const MotionSequence& pred, const MotionSequence& gt);

/// MPJPE after subtracting each frame's root position from both sequences.
double pel_mpjpe(const MotionSequence& pred, const MotionSequence& gt);

/// MPJPE after per-frame least-squares similarity alignment of the predicted
/// joints onto the ground truth (rotation, translation, and scale removed).
double pa_mpjpe(const MotionSequence& pred, const MotionSequence& gt);

/// Mean per-joint geodesic rotation error in degrees.
double mpjre(const MotionSequence& pred, const MotionSequence& gt);

/// Mean norm of the difference between second-difference accelerations of the
/// two position series, over joints and frames.
double accel_error(const MotionSequence& pred, const MotionSequence& gt);

/// Mean horizontal foot-joint speed (backward difference) over the frames
/// where that foot is in contact (either pad label set). Returns 0 when no
/// contacted frames exist, including when the label series is absent.
double foot_sliding(const MotionSequence& seq);

/// Mean over frames of max(0, surface height - foot joint height), averaged
/// over the two feet, in millimetres.
double foot_penetration(const MotionSequence& seq, const Terrain& terrain);

/// Per-foot root-mean-square force error over frames, averaged over feet.
double vgrf_error(std::span<const Vec2> pred, std::span<const Vec2> measured);

/// Fraction of rollouts with zero fall detections. Throws EmptySet on an
/// empty batch.
double success_rate(std::span<const int> falls_per_rollout);

/// All metrics pooled over the frames of one segment. Rotation, contact, and
/// force metrics are 0 when the corresponding series are absent.
MetricReport evaluate_segment(const MotionSequence& pred, const MotionSequence& gt,
                              const Terrain& terrain);

/// Splits the sequences into consecutive segments of `segment_frames`,
/// evaluates each, and averages the reports with equal segment weight.
/// A final partial segment is included when it has at least 3 frames (the
/// shortest span accelerations are defined on). The result is invariant to
/// segment reordering.
MetricReport evaluate(const MotionSequence& pred, const MotionSequence& gt,
                      const Terrain& terrain, int segment_frames = 500);

}  // namespace grip
