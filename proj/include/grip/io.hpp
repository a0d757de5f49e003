#pragma once

// Line-delimited structured-text file formats. Every file starts with a
// versioned `#GRIP <kind> v1` header; numbers are written with the shortest
// representation that parses back to the identical 64-bit value, so
// write -> read -> write is byte-identical. Lines starting with '#' after the
// header are skipped on read (and never emitted), keeping fixtures diff-able
// and annotatable.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grip/calib.hpp"
#include "grip/dyn.hpp"
#include "grip/insole.hpp"
#include "grip/kinnet.hpp"
#include "grip/metrics.hpp"
#include "grip/reward.hpp"

namespace grip {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double x);

std::string load_text(const std::string& path);   // throws ParseError when unreadable
void save_text(const std::string& path, std::string_view content);

/// A recording (or fixture) at 100 Hz: per-frame calibrated sensor
/// observations plus whatever ground truth is available. Truth series are
/// either empty or frame-aligned with the sensors.
struct SequenceData {
    std::string subject = "fixture";
    std::vector<SensorObservation> sensors;
    std::vector<KinematicEstimate> truth_kin;  // empty or one per frame
    MotionSequence truth_motion;               // series empty or one per frame
    Terrain terrain;

    int size() const { return int(sensors.size()); }
    /// Throws LengthMismatch when a truth series disagrees with the sensors.
    void validate() const;
};

std::string write_sequence(const SequenceData& seq);
SequenceData read_sequence(std::string_view text);

std::string write_estimates(std::span<const KinematicEstimate> frames);
std::vector<KinematicEstimate> read_estimates(std::string_view text);

/// Stream offsets report (the output of the sync command).
struct OffsetsData {
    std::vector<int> offsets;
    FrameRange common;
};

std::string write_offsets(const OffsetsData& data);
OffsetsData read_offsets(std::string_view text);

/// Vertical-acceleration series to be aligned, plus an optional shared
/// reference. Without a reference the first series is the reference for all.
struct SyncInput {
    std::vector<std::vector<double>> series;
    std::vector<double> reference;  // may be empty
};

std::string write_sync_input(const SyncInput& data);
SyncInput read_sync_input(std::string_view text);

/// One recovery reset: the control frame it fired on and the kinematic window
/// that replaced the simulated trajectory.
struct RecoveryEvent {
    int frame = 0;
    std::vector<KinematicEstimate> segment;
};

/// Closed-loop simulation output, one record per input frame.
struct RolloutData {
    MotionSequence motion;  // simulated poses, contact labels, per-foot vGRF
    std::vector<RewardTerms> rewards;
    std::vector<int> fell, recovered, terminated;  // 0/1 flags per frame
    std::vector<RecoveryEvent> recoveries;

    int size() const { return motion.size(); }
    void validate() const;  // LengthMismatch on ragged series
};

std::string write_rollout(const RolloutData& data);
RolloutData read_rollout(std::string_view text);

/// Field names follow the evaluation table headers; the success rate is
/// stored as a fraction.
std::string write_metrics(const MetricReport& report);
MetricReport read_metrics(std::string_view text);

std::string write_checkpoint(Estimator& est);
Estimator read_checkpoint(std::string_view text);

std::string write_model(const HumanoidModel& model);
HumanoidModel read_model(std::string_view text);

std::string write_terrain(const Terrain& terrain);
Terrain read_terrain(std::string_view text);

std::string write_profile(const InsoleProfile& profile);
InsoleProfile read_profile(std::string_view text);

/// One recorded device stream with its calibration context. Watch/strap
/// devices carry vendor orientations and the floor/T-pose windows; insoles
/// are 6-DoF and anchor to a single T-pose frame inside the static prologue.
struct RawDevice {
    DeviceKind kind = DeviceKind::watch;
    RawImuStream stream;
    FrameRange floor_window;
    FrameRange tpose_window;
    Rotation tpose_joint_global;
    Rotation mounting;  // joint->sensor for watch/strap, sensor->joint for insoles
};

/// Uncalibrated fixture recording: the four device streams in canonical site
/// order (wrist L/R as watches, feet as insoles), raw pressure frames, and
/// the ground truth carried through for the downstream stages.
struct RawBundle {
    std::string subject = "fixture";
    std::vector<RawDevice> devices;
    std::vector<PressureFrame> pressure;
    std::vector<KinematicEstimate> truth_kin;
    MotionSequence truth_motion;
    Terrain terrain;
};

std::string write_raw_bundle(const RawBundle& bundle);
RawBundle read_raw_bundle(std::string_view text);

}  // namespace grip
