#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "grip/errors.hpp"

namespace grip {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Global frame convention: right-handed, z-up. Gravity points down the z axis.
inline Vec3 gravity_vector() { return Vec3(0.0, 0.0, -9.81); }

// T-pose protocol has the subject facing +y; headings are measured against it.
inline Vec3 forward_axis() { return Vec3::UnitY(); }

// All sensor streams run at 100 Hz.
inline constexpr double kFrameDt = 0.01;

struct Rot6D;
struct SimilarityTransform;

/// 3x3 orthonormal rotation with det +1. Construction through from_matrix
/// validates; composition of valid rotations stays valid.
class Rotation {
public:
    Rotation() : m_(Mat3::Identity()) {}

    static bool is_valid(const Mat3& m, double tol = 1e-9);

    /// Throws DegenerateInput if m is not orthonormal with det +1 (tol 1e-9).
    static Rotation from_matrix(const Mat3& m);

    /// Normalizes q before converting.
    static Rotation from_quaternion(const Quat& q);

    /// Exponential map of a rotation vector (axis * angle).
    static Rotation from_rotvec(const Vec3& w);

    static Rotation axis_angle(const Vec3& axis, double angle);
    static Rotation rot_x(double angle);
    static Rotation rot_y(double angle);
    static Rotation rot_z(double angle);

    const Mat3& matrix() const { return m_; }
    Quat quaternion() const { return Quat(m_); }

    /// Log map: rotation vector in [0, pi].
    Vec3 rotvec() const;

    Rotation inverse() const { return Rotation(m_.transpose(), unchecked_t{}); }
    Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_, unchecked_t{}); }
    Vec3 operator*(const Vec3& v) const { return m_ * v; }

    bool isApprox(const Rotation& o, double tol = 1e-9) const { return m_.isApprox(o.m_, tol); }

private:
    struct unchecked_t {};
    Rotation(const Mat3& m, unchecked_t) : m_(m) {}
    Mat3 m_;

    friend Rotation matrix_from_rot6d(const Rot6D&);
    friend Rotation chordal_mean(std::span<const Rotation>);
    friend SimilarityTransform umeyama_align(std::span<const Vec3>, std::span<const Vec3>, bool);
};

/// First two columns of a rotation matrix (the continuous 6D encoding).
struct Rot6D {
    Vec3 a;
    Vec3 b;
};

/// x -> s * R * x + t  (least-squares point-set alignment result).
struct SimilarityTransform {
    Rotation r;
    Vec3 t = Vec3::Zero();
    double s = 1.0;

    Vec3 apply(const Vec3& x) const { return s * (r * x) + t; }
};

/// Uniformly sampled 3-vector signal.
struct TimeSeries3 {
    std::vector<Vec3> samples;
    double dt = kFrameDt;
};

/// Gram-Schmidt decode. Throws DegenerateInput when a is near zero or a, b
/// are near parallel (1e-12).
Rotation matrix_from_rot6d(const Rot6D& v);

Rot6D rot6d_from_matrix(const Rotation& r);

/// Relative rotation angle in [0, pi].
double geodesic_angle(const Rotation& a, const Rotation& b);

/// Yaw-only rotation matching the ground-plane projection of root * forward.
/// When the projection is shorter than 1e-6 the previous heading is reused
/// (identity when none is given).
Rotation heading_rotation(const Rotation& root, const Vec3& forward = forward_axis(),
                          const Rotation* previous = nullptr);

/// Closed-form least-squares similarity alignment (SVD with determinant sign
/// correction). with_scale=false pins s = 1. Throws DegenerateInput for
/// fewer than 3 points or collinear sources.
SimilarityTransform umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                                  bool with_scale);

/// Central second difference; endpoint samples replicate the nearest interior
/// value. Throws SequenceTooShort below 3 samples.
TimeSeries3 finite_diff_accel(const TimeSeries3& pos);

/// Zero-phase (forward-backward) second-order Butterworth low-pass, DC gain 1.
TimeSeries3 lowpass(const TimeSeries3& x, double cutoff_hz);
std::vector<double> lowpass(std::span<const double> x, double cutoff_hz, double dt);

/// Lag by which `a` trails `b`, i.e. the l maximizing the normalized
/// correlation of a[t] against b[t - l] over l in [-max_lag, max_lag].
/// Ties resolve to the smallest |lag|. Throws FlatSignal when either series
/// has variance below 1e-12.
int cross_correlation_offset(std::span<const double> a, std::span<const double> b, int max_lag);

/// World-frame angular velocity taking prev to cur over dt.
Vec3 angular_velocity(const Rotation& prev, const Rotation& cur, double dt);

/// Euclidean mean of rotation matrices projected back onto SO(3).
Rotation chordal_mean(std::span<const Rotation> rs);

}  // namespace grip
