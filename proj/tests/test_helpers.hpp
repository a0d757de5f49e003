#pragma once

// Shared generators for synthetic motions used across the test binaries.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "grip/rotmath.hpp"

namespace grip::testing {

inline Rotation random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Quat q(g(rng), g(rng), g(rng), g(rng));
    return Rotation::from_quaternion(q);
}

/// Smooth orientation trajectory: slow sinusoidal yaw/pitch/roll around a
/// fixed base, static for the first `static_frames`.
inline std::vector<Rotation> smooth_orientations(int n, const Rotation& base,
                                                 int static_frames = 0, double dt = kFrameDt) {
    std::vector<Rotation> out;
    out.reserve(n);
    const double pi2 = 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
        double t = std::max(0, i - static_frames) * dt;
        Rotation wiggle = Rotation::rot_z(0.4 * std::sin(pi2 * 0.50 * t)) *
                          Rotation::rot_x(0.3 * std::sin(pi2 * 0.30 * t + 1.0)) *
                          Rotation::rot_y(0.2 * std::sin(pi2 * 0.45 * t + 2.0));
        out.push_back(wiggle * base);
    }
    return out;
}

/// Smooth gravity-free acceleration trajectory, zero over the static prefix.
/// Zero-mean sinusoids: a sustained net acceleration would be unphysical and
/// indistinguishable from tilt for any gravity-referencing filter.
inline std::vector<Vec3> smooth_accels(int n, double amplitude = 0.5, int static_frames = 0,
                                       double dt = kFrameDt) {
    std::vector<Vec3> out;
    out.reserve(n);
    const double pi2 = 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
        double t = std::max(0, i - static_frames) * dt;
        double ramp = std::min(1.0, (i <= static_frames) ? 0.0 : (i - static_frames) * dt / 0.5);
        out.push_back(amplitude * ramp *
                      Vec3(std::sin(pi2 * 0.7 * t), std::cos(pi2 * 0.9 * t),
                           std::sin(pi2 * 1.1 * t + 0.5)));
    }
    return out;
}

/// Jump-like vertical acceleration pulses at the given frame centers.
inline std::vector<double> jump_pulses(int n, std::initializer_list<int> centers,
                                       double amplitude = 20.0) {
    std::vector<double> z(n, 0.0);
    for (int c : centers) {
        for (int i = -15; i <= 15; ++i) {
            if (c + i >= 0 && c + i < n) z[c + i] += amplitude * std::exp(-(i * i) / 30.0);
        }
    }
    return z;
}

}  // namespace grip::testing
