#pragma once

#include <array>
#include <span>

#include "grip/rotmath.hpp"

namespace grip {

/// Body attachment sites of the four IMUs, in the canonical device order
/// used everywhere downstream.
enum class SensorSite { wrist_left = 0, wrist_right = 1, foot_left = 2, foot_right = 3 };

inline constexpr int kNumImuSites = 4;

/// One frame of plantar pressure, 16 cells per foot, index 0 = left.
struct PressureFrame {
    std::array<std::array<double, 16>, 2> cells{};  // N, non-negative
};

/// Cell layout and thresholds of a pressure insole model. Cell positions are
/// midfoot-centered (+x lateral, +y toward the toes).
struct InsoleProfile {
    std::array<std::array<Vec2, 16>, 2> cell_positions;  // m, [foot][cell]
    double contact_threshold = 10.0;  // N per region before a contact bit sets
    double cop_min_force = 5.0;       // N total before the CoP is trusted

    /// 4x4 grid, 0.02 m lateral pitch by 0.06 m longitudinal pitch, ordered
    /// row-major from the most anterior row (y = +0.09) to the heel row
    /// (y = -0.09), x from -0.03 to +0.03 within each row; both feet alike.
    static InsoleProfile default_grid();
};

/// Simplified pressure representation: per-foot total vertical force, centre
/// of pressure, and forefoot/rearfoot contact labels. Index 0 = left foot.
struct InsoleFeatures {
    std::array<double, 2> grf{};                     // N
    std::array<Vec2, 2> cop{Vec2::Zero(), Vec2::Zero()};
    std::array<std::array<bool, 2>, 2> contact{};    // [foot][fore, rear]

    /// Layout: per foot (left first): grf, cop_x, cop_y, contact_fore,
    /// contact_rear. Width 10.
    std::array<double, 10> flatten() const;
};

/// One already-calibrated IMU frame tagged with its attachment site.
struct SiteImuFrame {
    SensorSite site;
    Rotation orientation;  // R^j_g
    Vec3 accel;            // m/s^2, global, gravity-free
};

/// Per-frame sensor input: four IMU orientations + accelerations in canonical
/// site order, plus the 2x5 insole features.
struct SensorObservation {
    std::array<Rotation, kNumImuSites> r;
    std::array<Vec3, kNumImuSites> a;
    InsoleFeatures insole;

    static constexpr int kFlatWidth = kNumImuSites * 6 + kNumImuSites * 3 + 10;  // 46

    /// Layout: four 6D orientations (24), four accelerations (12), insole
    /// features (10).
    std::array<double, kFlatWidth> flatten() const;
};

/// Per-foot sums, weighted centroid and region contact labels. The CoP is
/// reported as (0,0) below cop_min_force; regions split at y = 0 (cells with
/// y > 0 count as forefoot).
InsoleFeatures extract_features(const PressureFrame& frame, const InsoleProfile& profile);

/// Bundles four tagged IMU frames with the pressure features. Throws
/// LayoutMismatch unless the frames arrive exactly in canonical site order.
SensorObservation build_sensor_observation(std::span<const SiteImuFrame> imu,
                                           const InsoleFeatures& feats);

}  // namespace grip
