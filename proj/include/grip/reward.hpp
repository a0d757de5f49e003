#pragma once

#include <array>
#include <span>
#include <vector>

#include "grip/dyn.hpp"
#include "grip/kinnet.hpp"
#include "grip/statediff.hpp"

namespace grip {

/// Shaping weights and kernel scales for the tracking reward, plus the
/// discriminator-side knobs. None of them are hard-coded anywhere else.
struct RewardConfig {
    double w_amp = 0.5, w_imit = 0.5;
    double w_p = 0.5, w_theta = 0.3, w_v = 0.1, w_omega = 0.1;
    double scale_p = 100.0, scale_theta = 100.0, scale_v = 10.0, scale_omega = 0.1;
    double energy_coeff = 0.0005;  // per-step penalty on |torque . angvel|
    double lambda_gp = 5.0;        // gradient-penalty weight
    int disc_window = 10;          // frames per discriminator sample
    double discount = 0.99;
};

struct RewardTerms {
    double amp = 0.0, imitation = 0.0, energy = 0.0, total = 0.0;
};

/// -log(1 - sigmoid(logit)), evaluated as softplus(logit) so large logits
/// neither overflow nor lose precision.
double amp_reward(double logit);

/// Kernelized pose-matching reward: w_p e^{-100 dp} + w_th e^{-100 dth} +
/// w_v e^{-10 dv} + w_om e^{-0.1 dom}, where dp/dv/dom are Frobenius norms of
/// the stacked per-joint differences and dth is the 2-norm of the per-joint
/// geodesic angles.
double imitation_reward(const SimState& ref, const SimState& sim, const RewardConfig& cfg);

/// -coeff * sum_j |tau_j . omega_j| (rows beyond the root), zero during the
/// first three frames of an episode.
double energy_penalty(const MatX& torques, const MatX& angvel, const RewardConfig& cfg,
                      int frame_index);

RewardTerms total_reward(double amp, double imitation, double energy, const RewardConfig& cfg);

/// Minimized discriminator objective: mean softplus(-real) +
/// mean softplus(fake) + lambda_gp * mean grad_sq_norms_real. Throws EmptySet
/// when either logit batch is empty.
double discriminator_loss(std::span<const double> real_logits,
                          std::span<const double> fake_logits,
                          std::span<const double> grad_sq_norms_real, const RewardConfig& cfg);

struct FallRecoveryConfig {
    double min_root_height = 0.30;  // m, fall when the root drops below this
    double max_disc_prob = 0.7;     // ... and the discriminator score is below this
    int window = 100;               // frames of kinematic history kept for recovery
    double max_joint_error = 0.25;  // m, early-termination threshold
};

/// A fall needs both signals: the root below min_root_height and the
/// discriminator score below max_disc_prob.
bool detect_fall(double root_height, double disc_prob, const FallRecoveryConfig& cfg);

/// True when any joint's position error strictly exceeds max_joint_error.
bool early_termination(const Eigen::Matrix<double, 24, 3>& kin_pos,
                       const Eigen::Matrix<double, 24, 3>& sim_pos,
                       const FallRecoveryConfig& cfg);

/// Root height that rests the pose's lowest contact sphere on the terrain at
/// the given ground position.
double grounded_root_height(const HumanoidModel& model, const Terrain& terrain,
                            const KinematicEstimate& kin, const Vec2& root_xy);

struct RecoveryResult {
    SimState state;
    std::vector<KinematicEstimate> segment;  // the buffered window, oldest first
};

/// Teleport the simulated body back onto the kinematic estimate after a fall:
/// the horizontal root position restarts from the simulated root at the start
/// of the buffered window advanced by the integrated kinematic root velocity,
/// the height comes from resting the newest buffered pose on the terrain, the
/// joints adopt that pose, the root keeps the kinematic root velocity, and
/// every other velocity is zeroed. Returns the buffered window that replaces
/// the simulator's output. Throws Underflow until the buffer is full.
RecoveryResult recover(const HumanoidModel& model, const Terrain& terrain,
                       const Vec3& sim_root_window_start, const HistoryBuffer& buf,
                       const FallRecoveryConfig& cfg, double dt = kFrameDt);

/// Fixed-parameter two-layer tanh network over the simulated-body
/// observation block. Stands in for a trained motion discriminator so the
/// reward, loss, and fall-detection plumbing is exercisable end to end.
class Discriminator {
public:
    explicit Discriminator(uint64_t seed = 0x5eedff);

    double logit(const VecX& self_obs) const;  // expects kObsSelfWidth values
    double prob(const VecX& self_obs) const;   // sigmoid of the logit

private:
    MatX w1_;
    VecX b1_, w2_;
    double b2_ = 0.0;
};

struct EnvConfig {
    RewardConfig reward;
    FallRecoveryConfig fall;
    AblationMask mask = AblationMask::full();
    double dt = kFrameDt;
    /// Scales the PD torques before they reach the simulation. 1 is the
    /// normal tracking controller; 0 leaves the body unactuated.
    double torque_scale = 1.0;
};

struct StepResult {
    SimState state;
    RewardTerms reward;
    bool fell = false, recovered = false, terminated = false;
    VecX observation;
    std::array<double, 2> vgrf{0.0, 0.0};
    /// The kinematic window that replaced the simulated trajectory when a
    /// recovery reset fired this frame; empty otherwise.
    std::vector<KinematicEstimate> recovery_segment;
};

/// Closed-loop tracking environment: each control frame it differences the
/// kinematic estimate against the simulated state, assembles the policy
/// observation, converts the (optionally action-offset) kinematic pose into
/// PD torques, steps the physics, scores the result, and handles falls and
/// early termination. Owns one Simulation; pure per-frame functions above do
/// the scoring.
class TrackingEnv {
public:
    TrackingEnv(HumanoidModel model, Terrain terrain, EnvConfig cfg = {});

    /// Start an episode standing in the given kinematic pose; the root is
    /// placed at root_xy with the pose's lowest contact sphere on the ground.
    void reset(const KinematicEstimate& kin, const Vec2& root_xy);

    /// Advance one control frame tracking `kin` (whose root sits at
    /// kin_root_global). `action` may add a per-joint rotation-vector offset
    /// (24 x 3) to the kinematic PD targets; a learned policy drives this
    /// hook, and zero rows reproduce pure kinematic tracking.
    StepResult step(const KinematicEstimate& kin, const SensorObservation& sen,
                    const Vec3& kin_root_global, const MatX* action = nullptr);

    const Simulation& simulation() const { return sim_; }
    const Discriminator& discriminator() const { return disc_; }
    int frame() const { return frame_; }

private:
    EnvConfig cfg_;
    Simulation sim_;
    Discriminator disc_;
    HistoryBuffer kin_buf_;
    std::vector<Vec3> root_ring_;  // simulated root when each buffered frame landed
    int root_head_ = 0, root_count_ = 0;
    KinematicEstimate prev_kin_;
    Rotation heading_prev_;
    bool has_prev_ = false;
    int frame_ = 0;
};

}  // namespace grip
