#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "grip/body.hpp"
#include "grip/insole.hpp"
#include "grip/rotmath.hpp"
#include "grip/statediff.hpp"

namespace grip {

/// One rigid body hanging off a ball joint. Offsets are expressed in the
/// parent joint's frame, the centre of mass and contact spheres in this
/// joint's own frame. Inertia is the body-frame diagonal.
struct JointSpec {
    std::string name;
    int parent = -1;
    Vec3 offset = Vec3::Zero();  // m, joint origin in the parent joint frame
    Vec3 com = Vec3::Zero();     // m
    double mass = 1.0;           // kg
    Vec3 inertia = Vec3::Ones() * 1e-3;  // kg m^2
    double kp = 300.0, kd = 30.0;        // N m / rad, N m s / rad
    double torque_limit = 200.0;         // N m per axis
    /// Relative-rate damping the integrator applies implicitly (stable at any
    /// step size, unlike a damping term inside an explicit torque).
    double joint_damping = 0.0;          // N m s / rad
    std::vector<Vec3> contact_points;    // sphere centres, m
    double contact_radius = 0.03;        // m
};

/// Torque-driven ball-jointed tree plus its contact material. The standard
/// factory builds the 24-joint humanoid; tests build small ad-hoc chains.
struct HumanoidModel {
    std::vector<JointSpec> joints;
    bool fixed_root = false;
    double contact_stiffness = 3e4;  // N/m
    double contact_damping = 3e2;    // N s/m
    double friction = 0.9;
    int substeps = 1;                // physics substeps per control step

    int size() const { return int(joints.size()); }
    double total_mass() const;

    /// 24-joint humanoid, ~67 kg, T-pose with the root 0.95 m above ground
    /// and the eight foot spheres exactly touching z = 0. Four contact
    /// spheres per foot plus sparse guard spheres on the torso and limbs.
    static HumanoidModel standard();
};

/// Diagonal inertia of a capsule-like segment of the given mass, radius and
/// half-length, its axis along 'x', 'y' or 'z'.
Vec3 capsule_inertia(double mass, double radius, double half_len, char axis);

/// Flat plane at z = ground plus axis-aligned boxes standing on it.
struct TerrainBox {
    Vec2 min_xy, max_xy;  // m
    double height;        // m, top surface above the plane
};

struct Terrain {
    double ground = 0.0;  // m
    std::vector<TerrainBox> boxes;

    static Terrain flat() { return {}; }
    /// Throws DegenerateInput unless extents and height are positive.
    void add_box(const Vec2& min_xy, const Vec2& max_xy, double height);
    double height_at(double x, double y) const;
};

/// Heading-aligned 25x25 grid of terrain heights around the root's ground
/// projection, relative to the height under the root. Row-major with +x
/// fastest; both axes run from -0.75 m to +0.75 m in the heading frame.
struct HeightMap {
    static constexpr int kSize = 25;
    static constexpr double kSpacing = 1.5 / 24.0;  // m
    std::array<double, kSize * kSize> values{};
};

HeightMap sample_height_map(const Terrain& terrain, const Vec3& root_pos,
                            const Rotation& root_rot);

/// Proportional-derivative torques about each ball joint, componentwise in
/// the parent-joint frame: kp * rotvec(current^-1 * target) - kd * omega_rel,
/// clamped per axis to the joint's torque limit. Row 0 (the root) is computed
/// but never actuated by the simulation.
MatX pd_torque(std::span<const Rotation> target_local, std::span<const Rotation> current_local,
               const MatX& angvel_local, const HumanoidModel& model);

/// Maximal-coordinate-free rigid-body simulation: generalized coordinates are
/// the root pose plus one ball rotation per joint, integrated with
/// semi-implicit Euler; ground contact through penalty springs with
/// regularized Coulomb friction.
class Simulation {
public:
    Simulation(HumanoidModel model, Terrain terrain);

    const HumanoidModel& model() const { return model_; }
    const Terrain& terrain() const { return terrain_; }
    double time() const { return time_; }

    /// Place the tree: root pose plus local joint rotations; zero velocities.
    void set_pose(const Vec3& root_pos, const Rotation& root_rot,
                  std::span<const Rotation> local_rot);
    /// Adopt a full state (joint rotations and velocities are global; joint
    /// positions beyond the root are recomputed from the model geometry).
    void set_state(const SimState& s);
    SimState state() const;

    std::vector<Rotation> local_rotations() const;
    /// Relative angular velocity of each joint in its parent frame (row 0:
    /// root angular velocity in the world frame).
    MatX local_angular_velocities() const;

    /// Advance one control step of `dt` (split into the model's substeps)
    /// under constant parent-frame joint torques (n x 3; row 0 ignored).
    /// Throws NumericalDivergence when the state leaves sanity bounds.
    void step(const MatX& joint_torques, double dt = kFrameDt);

    /// Mean vertical ground-reaction force per foot over the last control
    /// step, N; order follows HumanoidModel::standard() feet (left, right).
    std::array<double, 2> last_vgrf() const { return vgrf_; }

    double kinetic_energy() const;
    double potential_energy() const;

private:
    void forward_kinematics();
    void substep(const MatX& joint_torques, double h);

    HumanoidModel model_;
    Terrain terrain_;
    double time_ = 0.0;

    Vec3 root_pos_ = Vec3::Zero();
    Rotation root_rot_;
    std::vector<Rotation> local_;  // per joint, parent frame (index 0 unused)
    VecX u_;                       // 6 + 3n generalized velocity

    // Forward-kinematics scratch, world frame.
    std::vector<Vec3> joint_pos_, joint_vel_, body_omega_, com_pos_, com_vel_;
    std::vector<Mat3> joint_rot_;
    std::array<double, 2> vgrf_{0.0, 0.0};
};

/// One frame through the physics: functional form of Simulation::step.
SimState step(const SimState& state, const MatX& joint_torques, const Terrain& terrain,
              const HumanoidModel& model, double dt = kFrameDt);

/// Width of the flat tracking observation produced by build_observation, and
/// the offsets of its four blocks.
inline constexpr int kObsSensorOffset = 0;
inline constexpr int kObsDiffOffset = SensorObservation::kFlatWidth;
inline constexpr int kObsSelfOffset = kObsDiffOffset + StateDifference::kFlatWidth;
inline constexpr int kObsSelfWidth = 24 * 15;
inline constexpr int kObsHeightOffset = kObsSelfOffset + kObsSelfWidth;
inline constexpr int kObservationWidth =
    kObsHeightOffset + HeightMap::kSize * HeightMap::kSize;  // 46 + 222 + 360 + 625 = 1253

/// The simulated-body block alone: per joint the heading-aligned
/// root-relative position, aligned rotation (6D), aligned linear and angular
/// velocity; 360 values.
VecX self_observation(const SimState& sim);

/// Flat policy observation: sensor block, state-difference block, the
/// simulated body itself (per joint: heading-aligned root-relative position,
/// aligned rotation as 6D, aligned linear and angular velocity), then the
/// height map. The layout and width never depend on the data.
VecX build_observation(const SensorObservation& sen, const StateDifference& kin_diff,
                       const SimState& sim, const HeightMap& hmap,
                       const AblationMask& mask = AblationMask::full());

}  // namespace grip
