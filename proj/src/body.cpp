#include "grip/body.hpp"

namespace grip::body {

const char* joint_name(int joint) {
    static constexpr const char* kNames[kNumJoints] = {
        "pelvis",      "hip_l",      "hip_r",      "spine1",   "knee_l",   "knee_r",
        "spine2",      "ankle_l",    "ankle_r",    "spine3",   "foot_l",   "foot_r",
        "neck",        "collar_l",   "collar_r",   "head",     "shoulder_l", "shoulder_r",
        "elbow_l",     "elbow_r",    "wrist_l",    "wrist_r",  "hand_l",   "hand_r"};
    return (joint >= 0 && joint < kNumJoints) ? kNames[joint] : "invalid";
}

}  // namespace grip::body
