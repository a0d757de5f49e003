#include "grip/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "grip/errors.hpp"

namespace grip {

namespace {

// log(1 + e^x) without overflow on either tail.
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Per-joint global rotations of an estimate as local (parent-frame) ones.
std::vector<Rotation> kin_local_rotations(const KinematicEstimate& kin) {
    std::vector<Rotation> local(size_t(body::kNumJoints));
    local[0] = kin.joint_rotation(0);
    for (int j = 1; j < body::kNumJoints; ++j) {
        int p = body::kParents[size_t(j)];
        local[size_t(j)] = kin.joint_rotation(p).inverse() * kin.joint_rotation(j);
    }
    return local;
}

static_assert(body::kKeyJoints[5] == 0, "root must be the last key-joint row");
constexpr int kRootKeyRow = 5;

}  // namespace

double amp_reward(double logit) { return softplus(logit); }

double imitation_reward(const SimState& ref, const SimState& sim, const RewardConfig& cfg) {
    double dp = (ref.joint_pos - sim.joint_pos).norm();
    double dv = (ref.joint_linvel - sim.joint_linvel).norm();
    double dw = (ref.joint_angvel - sim.joint_angvel).norm();
    double dth_sq = 0.0;
    for (int j = 0; j < body::kNumJoints; ++j) {
        double a = geodesic_angle(ref.joint_rot[size_t(j)], sim.joint_rot[size_t(j)]);
        dth_sq += a * a;
    }
    return cfg.w_p * std::exp(-cfg.scale_p * dp) +
           cfg.w_theta * std::exp(-cfg.scale_theta * std::sqrt(dth_sq)) +
           cfg.w_v * std::exp(-cfg.scale_v * dv) +
           cfg.w_omega * std::exp(-cfg.scale_omega * dw);
}

double energy_penalty(const MatX& torques, const MatX& angvel, const RewardConfig& cfg,
                      int frame_index) {
    if (torques.rows() != angvel.rows() || torques.cols() != 3 || angvel.cols() != 3) {
        throw ShapeMismatch("torques and angular velocities must both be n x 3");
    }
    if (frame_index < 3) return 0.0;
    double power = 0.0;
    for (int j = 1; j < torques.rows(); ++j) {
        power += std::abs(torques.row(j).dot(angvel.row(j)));
    }
    return -cfg.energy_coeff * power;
}

RewardTerms total_reward(double amp, double imitation, double energy, const RewardConfig& cfg) {
    RewardTerms t;
    t.amp = amp;
    t.imitation = imitation;
    t.energy = energy;
    t.total = cfg.w_amp * amp + cfg.w_imit * imitation + energy;
    return t;
}

double discriminator_loss(std::span<const double> real_logits,
                          std::span<const double> fake_logits,
                          std::span<const double> grad_sq_norms_real, const RewardConfig& cfg) {
    if (real_logits.empty() || fake_logits.empty()) {
        throw EmptySet("discriminator loss needs non-empty real and fake batches");
    }
    double real = 0.0;
    for (double x : real_logits) real += softplus(-x);  // -log sigmoid(x)
    real /= double(real_logits.size());
    double fake = 0.0;
    for (double x : fake_logits) fake += softplus(x);  // -log(1 - sigmoid(x))
    fake /= double(fake_logits.size());
    double gp = 0.0;
    if (!grad_sq_norms_real.empty()) {
        for (double g : grad_sq_norms_real) gp += g;
        gp /= double(grad_sq_norms_real.size());
    }
    return real + fake + cfg.lambda_gp * gp;
}

bool detect_fall(double root_height, double disc_prob, const FallRecoveryConfig& cfg) {
    return root_height < cfg.min_root_height && disc_prob < cfg.max_disc_prob;
}

bool early_termination(const Eigen::Matrix<double, 24, 3>& kin_pos,
                       const Eigen::Matrix<double, 24, 3>& sim_pos,
                       const FallRecoveryConfig& cfg) {
    return (kin_pos - sim_pos).rowwise().norm().maxCoeff() > cfg.max_joint_error;
}

double grounded_root_height(const HumanoidModel& model, const Terrain& terrain,
                            const KinematicEstimate& kin, const Vec2& root_xy) {
    Simulation scratch(model, terrain);
    scratch.set_pose(Vec3(root_xy.x(), root_xy.y(), 0.0), kin.joint_rotation(0),
                     kin_local_rotations(kin));
    SimState s = scratch.state();
    double clearance = std::numeric_limits<double>::infinity();
    for (int j = 0; j < model.size(); ++j) {
        const JointSpec& spec = model.joints[size_t(j)];
        for (const Vec3& cp : spec.contact_points) {
            Vec3 y = Vec3(s.joint_pos.row(j)) + s.joint_rot[size_t(j)] * cp;
            clearance = std::min(
                clearance, y.z() - spec.contact_radius - terrain.height_at(y.x(), y.y()));
        }
    }
    if (!std::isfinite(clearance)) {
        throw DegenerateInput("cannot ground a model without contact spheres");
    }
    return -clearance;
}

RecoveryResult recover(const HumanoidModel& model, const Terrain& terrain,
                       const Vec3& sim_root_window_start, const HistoryBuffer& buf,
                       const FallRecoveryConfig& cfg, double dt) {
    if (buf.capacity() != cfg.window) {
        throw ShapeMismatch("recovery buffer capacity must match the configured window");
    }
    RecoveryResult out;
    out.segment = buf.segment();  // throws Underflow until the window is full

    Vec2 xy = sim_root_window_start.head<2>();
    for (const KinematicEstimate& e : out.segment) {
        xy += e.v_key.row(kRootKeyRow).head<2>().transpose() * dt;
    }
    const KinematicEstimate& newest = out.segment.back();
    double z = grounded_root_height(model, terrain, newest, xy);

    Simulation scratch(model, terrain);
    scratch.set_pose(Vec3(xy.x(), xy.y(), z), newest.joint_rotation(0),
                     kin_local_rotations(newest));
    out.state = scratch.state();
    out.state.joint_linvel.row(0) = newest.v_key.row(kRootKeyRow);
    return out;
}

Discriminator::Discriminator(uint64_t seed) {
    constexpr int kHidden = 32;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    w1_ = MatX(kHidden, kObsSelfWidth);
    double s1 = 1.0 / std::sqrt(double(kObsSelfWidth));
    for (int r = 0; r < w1_.rows(); ++r) {
        for (int c = 0; c < w1_.cols(); ++c) w1_(r, c) = s1 * n01(rng);
    }
    b1_ = VecX::Zero(kHidden);
    w2_ = VecX(kHidden);
    double s2 = 1.0 / std::sqrt(double(kHidden));
    for (int r = 0; r < kHidden; ++r) w2_(r) = s2 * n01(rng);
}

double Discriminator::logit(const VecX& self_obs) const {
    if (self_obs.size() != kObsSelfWidth) {
        throw ShapeMismatch("discriminator expects the simulated-body observation block");
    }
    return w2_.dot((w1_ * self_obs + b1_).array().tanh().matrix()) + b2_;
}

double Discriminator::prob(const VecX& self_obs) const { return sigmoid(logit(self_obs)); }

TrackingEnv::TrackingEnv(HumanoidModel model, Terrain terrain, EnvConfig cfg)
    : cfg_(cfg),
      sim_(std::move(model), std::move(terrain)),
      kin_buf_(cfg.fall.window),
      root_ring_(size_t(cfg.fall.window) + 1) {}

void TrackingEnv::reset(const KinematicEstimate& kin, const Vec2& root_xy) {
    double z = grounded_root_height(sim_.model(), sim_.terrain(), kin, root_xy);
    sim_.set_pose(Vec3(root_xy.x(), root_xy.y(), z), kin.joint_rotation(0),
                  kin_local_rotations(kin));
    kin_buf_.clear();
    root_head_ = root_count_ = 0;
    root_ring_[size_t(root_head_)] = Vec3(root_xy.x(), root_xy.y(), z);
    root_head_ = (root_head_ + 1) % int(root_ring_.size());
    root_count_ = 1;
    prev_kin_ = kin;
    has_prev_ = true;
    heading_prev_ = heading_rotation(kin.joint_rotation(0));
    frame_ = 0;
}

StepResult TrackingEnv::step(const KinematicEstimate& kin, const SensorObservation& sen,
                             const Vec3& kin_root_global, const MatX* action) {
    const HumanoidModel& model = sim_.model();
    const Terrain& terrain = sim_.terrain();
    const int cap = int(root_ring_.size());

    // Observation of the pre-step state: what a policy acts on.
    SimState pre = sim_.state();
    StateDiffContext ctx;
    ctx.kin_prev = has_prev_ ? &prev_kin_ : nullptr;
    ctx.kin_root_global = kin_root_global;
    ctx.heading_prev = &heading_prev_;
    ctx.dt = cfg_.dt;
    StateDifference diff = compute_state_difference(kin, pre, cfg_.mask, ctx);
    HeightMap hmap = sample_height_map(terrain, pre.joint_pos.row(0).transpose(),
                                       pre.joint_rot[0]);

    StepResult res;
    res.observation = build_observation(sen, diff, pre, hmap, cfg_.mask);

    // Kinematic pose (plus the policy's offsets) as PD targets.
    std::vector<Rotation> targets = kin_local_rotations(kin);
    if (action) {
        if (action->rows() != model.size() || action->cols() != 3) {
            throw ShapeMismatch("action must be one rotation vector per joint");
        }
        for (int j = 0; j < model.size(); ++j) {
            targets[size_t(j)] =
                Rotation::from_rotvec(action->row(j).transpose()) * targets[size_t(j)];
        }
    }
    MatX torques =
        pd_torque(targets, sim_.local_rotations(), sim_.local_angular_velocities(), model);
    torques *= cfg_.torque_scale;
    sim_.step(torques, cfg_.dt);
    res.state = sim_.state();
    res.vgrf = sim_.last_vgrf();

    // Scoring.
    VecX self = self_observation(res.state);
    double r_amp = amp_reward(disc_.logit(self));
    SimState ref;
    for (int j = 0; j < body::kNumJoints; ++j) {
        ref.joint_pos.row(j) = (kin_root_global + kin.p.row(j).transpose()).transpose();
        ref.joint_rot[size_t(j)] = kin.joint_rotation(j);
    }
    for (int k = 0; k < int(body::kKeyJoints.size()); ++k) {
        ref.joint_linvel.row(body::kKeyJoints[size_t(k)]) = kin.v_key.row(k);
    }
    double r_imit = imitation_reward(ref, res.state, cfg_.reward);
    double r_energy =
        energy_penalty(torques, sim_.local_angular_velocities(), cfg_.reward, frame_);
    res.reward = total_reward(r_amp, r_imit, r_energy, cfg_.reward);

    // Fall handling: height above the local ground, discriminator score.
    Vec3 root = res.state.joint_pos.row(0).transpose();
    double height = root.z() - terrain.height_at(root.x(), root.y());
    res.fell = detect_fall(height, disc_.prob(self), cfg_.fall);

    kin_buf_.push(kin);
    root_ring_[size_t(root_head_)] = root;
    root_head_ = (root_head_ + 1) % cap;
    root_count_ = std::min(root_count_ + 1, cap);

    if (res.fell && kin_buf_.full() && root_count_ == cap) {
        Vec3 window_start = root_ring_[size_t((root_head_ - root_count_ + cap) % cap)];
        RecoveryResult rec = recover(model, terrain, window_start, kin_buf_, cfg_.fall, cfg_.dt);
        sim_.set_state(rec.state);
        res.state = rec.state;
        res.recovered = true;
        res.recovery_segment = std::move(rec.segment);
        kin_buf_.clear();
        root_head_ = root_count_ = 0;
        root_ring_[size_t(root_head_)] = rec.state.joint_pos.row(0).transpose();
        root_head_ = 1;
        root_count_ = 1;
    }

    Eigen::Matrix<double, 24, 3> kin_world = kin.p;
    kin_world.rowwise() += kin_root_global.transpose();
    res.terminated = early_termination(kin_world, res.state.joint_pos, cfg_.fall);

    prev_kin_ = kin;
    has_prev_ = true;
    heading_prev_ = heading_rotation(res.state.joint_rot[0], forward_axis(), &heading_prev_);
    ++frame_;
    return res;
}

}  // namespace grip
