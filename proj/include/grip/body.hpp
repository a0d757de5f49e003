#pragma once

#include <array>

namespace grip::body {

// 24-joint kinematic tree (SMPL-compatible ordering).
inline constexpr int kNumJoints = 24;
inline constexpr int kRoot = 0;

inline constexpr std::array<int, kNumJoints> kParents = {
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

/// Leaf joints in the canonical order wrists, feet, head.
inline constexpr std::array<int, 5> kLeafJoints = {20, 21, 10, 11, 15};

/// Key joints: the leaves followed by the root.
inline constexpr std::array<int, 6> kKeyJoints = {20, 21, 10, 11, 15, 0};

/// Joints the four IMUs attach to, in canonical device order
/// (wrist L/R, foot L/R).
inline constexpr std::array<int, 4> kImuJoints = {20, 21, 10, 11};

const char* joint_name(int joint);

}  // namespace grip::body
