#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "grip/errors.hpp"
#include "grip/reward.hpp"
#include "test_helpers.hpp"

using namespace grip;

namespace {

SimState random_sim_state(std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    SimState s;
    for (int j = 0; j < 24; ++j) {
        s.joint_rot[size_t(j)] = testing::random_rotation(rng);
        for (int c = 0; c < 3; ++c) {
            s.joint_pos(j, c) = n01(rng);
            s.joint_linvel(j, c) = n01(rng);
            s.joint_angvel(j, c) = n01(rng);
        }
    }
    return s;
}

KinematicEstimate tpose_estimate(const HumanoidModel& m) {
    Simulation sim(m, Terrain::flat());
    std::vector<Rotation> id(size_t(m.size()));
    sim.set_pose(Vec3(0.0, 0.0, 0.95), Rotation(), id);
    SimState s = sim.state();
    KinematicEstimate kin;
    for (int j = 0; j < 24; ++j) {
        kin.set_joint_rotation(j, Rotation());
        kin.p.row(j) = s.joint_pos.row(j) - s.joint_pos.row(0);
    }
    return kin;
}

}  // namespace

TEST_CASE("amp reward: exact values, stability, monotonicity") {
    CHECK(amp_reward(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // sigmoid(ln 9) = 0.9, so the reward is -ln(0.1) = ln 10.
    CHECK(amp_reward(std::log(9.0)) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    CHECK(amp_reward(700.0) == doctest::Approx(700.0));  // no overflow
    CHECK(amp_reward(-700.0) >= 0.0);
    double prev = amp_reward(-20.0);
    for (double x = -19.5; x <= 20.0; x += 0.5) {
        double cur = amp_reward(x);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("imitation reward: kernels at zero error and the position kernel scale") {
    RewardConfig cfg;
    std::mt19937_64 rng(7);
    SimState a = random_sim_state(rng);
    SimState b = a;
    CHECK(imitation_reward(a, b, cfg) == doctest::Approx(1.0).epsilon(1e-12));

    // A lone 0.01 m position offset: the position kernel drops to e^{-1}.
    b.joint_pos(13, 1) += 0.01;
    double expect = 0.5 * std::exp(-1.0) + 0.3 + 0.1 + 0.1;
    CHECK(imitation_reward(a, b, cfg) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("imitation reward matches an independent re-implementation") {
    RewardConfig cfg;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        SimState ref = random_sim_state(rng);
        SimState sim = random_sim_state(rng);
        double dp = 0.0, dv = 0.0, dw = 0.0, dth = 0.0;
        for (int j = 0; j < 24; ++j) {
            for (int c = 0; c < 3; ++c) {
                dp += std::pow(ref.joint_pos(j, c) - sim.joint_pos(j, c), 2);
                dv += std::pow(ref.joint_linvel(j, c) - sim.joint_linvel(j, c), 2);
                dw += std::pow(ref.joint_angvel(j, c) - sim.joint_angvel(j, c), 2);
            }
            double ang = geodesic_angle(ref.joint_rot[size_t(j)], sim.joint_rot[size_t(j)]);
            dth += ang * ang;
        }
        double naive = 0.5 * std::exp(-100.0 * std::sqrt(dp)) +
                       0.3 * std::exp(-100.0 * std::sqrt(dth)) +
                       0.1 * std::exp(-10.0 * std::sqrt(dv)) +
                       0.1 * std::exp(-0.1 * std::sqrt(dw));
        CHECK(imitation_reward(ref, sim, cfg) == doctest::Approx(naive).epsilon(1e-12));
    }
}

TEST_CASE("energy penalty: coefficient, warmup frames, root exclusion, shapes") {
    RewardConfig cfg;
    MatX tau = MatX::Zero(24, 3), omega = MatX::Zero(24, 3);
    CHECK(energy_penalty(tau, omega, cfg, 5) == 0.0);

    // |2*3| + |-2*2| = 10 summed over joints, scaled by 0.0005.
    tau.row(1) << 2.0, 0.0, 0.0;
    omega.row(1) << 3.0, 0.0, 0.0;
    tau.row(2) << 0.0, -2.0, 0.0;
    omega.row(2) << 0.0, 2.0, 0.0;
    CHECK(energy_penalty(tau, omega, cfg, 3) == doctest::Approx(-0.005).epsilon(1e-12));

    // The first three frames are free regardless of power.
    CHECK(energy_penalty(tau, omega, cfg, 0) == 0.0);
    CHECK(energy_penalty(tau, omega, cfg, 1) == 0.0);
    CHECK(energy_penalty(tau, omega, cfg, 2) == 0.0);

    // Row 0 is the unactuated root and never counts.
    tau.row(0) << 1e6, 1e6, 1e6;
    omega.row(0) << 1.0, 1.0, 1.0;
    CHECK(energy_penalty(tau, omega, cfg, 3) == doctest::Approx(-0.005).epsilon(1e-12));

    CHECK_THROWS_AS(energy_penalty(MatX::Zero(23, 3), omega, cfg, 3), ShapeMismatch);
}

TEST_CASE("total reward combines the three terms with the configured weights") {
    RewardConfig cfg;
    RewardTerms t = total_reward(std::log(2.0), 1.0, 0.0, cfg);
    CHECK(t.total == doctest::Approx(0.846574).epsilon(1e-6));
    CHECK(t.amp == doctest::Approx(std::log(2.0)));
    t = total_reward(0.0, 0.0, -0.005, cfg);
    CHECK(t.total == doctest::Approx(-0.005).epsilon(1e-12));
    t = total_reward(0.0, 0.0, 0.0, cfg);
    CHECK(t.total == 0.0);
    // Linear in each term.
    RewardTerms a = total_reward(1.0, 2.0, -0.5, cfg);
    RewardTerms b = total_reward(2.0, 4.0, -1.0, cfg);
    CHECK(b.total == doctest::Approx(2.0 * a.total).epsilon(1e-12));
}

TEST_CASE("discriminator loss: exact values, limits, penalty, empty batches") {
    RewardConfig cfg;
    cfg.lambda_gp = 0.0;
    std::vector<double> zeros = {0.0, 0.0};
    CHECK(discriminator_loss(zeros, zeros, {}, cfg) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    cfg.lambda_gp = 10.0;
    std::vector<double> gp = {0.1, 0.1};
    CHECK(discriminator_loss(zeros, zeros, gp, cfg) ==
          doctest::Approx(2.0 * std::log(2.0) + 1.0).epsilon(1e-12));

    // A sharp discriminator on both batches drives the loss to zero.
    cfg.lambda_gp = 0.0;
    std::vector<double> real = {20.0}, fake = {-20.0};
    CHECK(discriminator_loss(real, fake, {}, cfg) < 1e-8);
    CHECK(discriminator_loss(real, fake, {}, cfg) > 0.0);

    CHECK_THROWS_AS(discriminator_loss({}, zeros, {}, cfg), EmptySet);
    CHECK_THROWS_AS(discriminator_loss(zeros, {}, {}, cfg), EmptySet);
    CHECK(RewardConfig{}.lambda_gp == 5.0);
}

TEST_CASE("fall detection: truth table, strictness, monotonicity") {
    FallRecoveryConfig cfg;
    CHECK(detect_fall(0.25, 0.5, cfg));
    CHECK_FALSE(detect_fall(0.50, 0.5, cfg));
    CHECK_FALSE(detect_fall(0.25, 0.9, cfg));
    // Thresholds are strict.
    CHECK_FALSE(detect_fall(0.30, 0.5, cfg));
    CHECK_FALSE(detect_fall(0.25, 0.7, cfg));

    // Lowering either signal never un-triggers a fall.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uh(0.0, 0.6), up(0.0, 1.0), step(0.0, 0.2);
    for (int i = 0; i < 200; ++i) {
        double h = uh(rng), p = up(rng);
        if (!detect_fall(h, p, cfg)) continue;
        CHECK(detect_fall(h - step(rng), p, cfg));
        CHECK(detect_fall(h, p - step(rng), cfg));
    }
}

TEST_CASE("early termination triggers on the worst joint only, strictly") {
    FallRecoveryConfig cfg;
    Eigen::Matrix<double, 24, 3> a = Eigen::Matrix<double, 24, 3>::Zero();
    Eigen::Matrix<double, 24, 3> b = a;
    CHECK_FALSE(early_termination(a, b, cfg));
    b.setConstant(0.24 / std::sqrt(3.0));
    CHECK_FALSE(early_termination(a, b, cfg));  // every joint at 0.24 m
    b.setZero();
    b(17, 2) = 0.26;
    CHECK(early_termination(a, b, cfg));  // one joint past the threshold
    b(17, 2) = 0.25;
    CHECK_FALSE(early_termination(a, b, cfg));  // exactly at it: strict
}

TEST_CASE("grounding rests the lowest contact sphere on the terrain") {
    HumanoidModel m = HumanoidModel::standard();
    KinematicEstimate kin = tpose_estimate(m);

    CHECK(grounded_root_height(m, Terrain::flat(), kin, Vec2(0.0, 0.0)) ==
          doctest::Approx(0.95).epsilon(1e-12));

    Terrain stepped = Terrain::flat();
    stepped.add_box(Vec2(-5.0, -5.0), Vec2(5.0, 5.0), 0.2);
    CHECK(grounded_root_height(m, stepped, kin, Vec2(0.0, 0.0)) ==
          doctest::Approx(1.15).epsilon(1e-12));
}

TEST_CASE("recovery: integrated root, grounded height, velocities, window") {
    HumanoidModel m = HumanoidModel::standard();
    Terrain t = Terrain::flat();
    FallRecoveryConfig cfg;
    cfg.window = 100;
    KinematicEstimate kin = tpose_estimate(m);

    SUBCASE("zero buffered velocity restores the window-start position") {
        HistoryBuffer buf(cfg.window);
        for (int i = 0; i < cfg.window; ++i) buf.push(kin);
        RecoveryResult rec = recover(m, t, Vec3(3.0, 4.0, 0.2), buf, cfg);
        CHECK(rec.state.joint_pos(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(rec.state.joint_pos(0, 1) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(rec.state.joint_pos(0, 2) == doctest::Approx(0.95).epsilon(1e-12));
        CHECK(int(rec.segment.size()) == cfg.window);
    }

    SUBCASE("constant 1 m/s forward velocity over 100 frames adds one metre") {
        KinematicEstimate moving = kin;
        moving.v_key.row(5) << 1.0, 0.0, 0.0;  // root key-joint row
        HistoryBuffer buf(cfg.window);
        for (int i = 0; i < cfg.window; ++i) buf.push(moving);
        RecoveryResult rec = recover(m, t, Vec3(0.0, 0.0, 0.5), buf, cfg);
        CHECK(rec.state.joint_pos(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rec.state.joint_pos(0, 1) == doctest::Approx(0.0));
        // The root keeps the kinematic velocity; everything else is still.
        CHECK(rec.state.joint_linvel.row(0).isApprox(Eigen::RowVector3d(1.0, 0.0, 0.0)));
        CHECK(rec.state.joint_linvel.bottomRows(23).norm() == 0.0);
        CHECK(rec.state.joint_angvel.norm() == 0.0);
    }

    SUBCASE("recovered state is geometrically consistent") {
        std::mt19937_64 rng(19);
        KinematicEstimate posed = kin;
        for (int j = 0; j < 24; ++j) {
            posed.set_joint_rotation(
                j, testing::random_rotation(rng));
        }
        HistoryBuffer buf(cfg.window);
        for (int i = 0; i < cfg.window; ++i) buf.push(posed);
        RecoveryResult rec = recover(m, t, Vec3::Zero(), buf, cfg);
        for (int j = 0; j < 24; ++j) {
            CHECK(std::abs(rec.state.joint_rot[size_t(j)].quaternion().norm() - 1.0) < 1e-9);
        }
        for (int j = 1; j < 24; ++j) {
            int p = m.joints[size_t(j)].parent;
            Vec3 expect = Vec3(rec.state.joint_pos.row(p)) +
                          rec.state.joint_rot[size_t(p)] * m.joints[size_t(j)].offset;
            CHECK((Vec3(rec.state.joint_pos.row(j)) - expect).norm() < 1e-9);
        }
        // The lowest contact sphere rests exactly on the ground.
        double lowest = 1e9;
        for (int j = 0; j < 24; ++j) {
            for (const Vec3& cp : m.joints[size_t(j)].contact_points) {
                Vec3 y = Vec3(rec.state.joint_pos.row(j)) + rec.state.joint_rot[size_t(j)] * cp;
                lowest = std::min(lowest, y.z() - m.joints[size_t(j)].contact_radius);
            }
        }
        CHECK(lowest == doctest::Approx(0.0).epsilon(1e-9));
    }

    SUBCASE("window underflow and capacity mismatch are rejected") {
        HistoryBuffer buf(cfg.window);
        for (int i = 0; i < cfg.window - 1; ++i) buf.push(kin);
        CHECK_THROWS_AS(recover(m, t, Vec3::Zero(), buf, cfg), Underflow);
        HistoryBuffer wrong(cfg.window + 1);
        CHECK_THROWS_AS(recover(m, t, Vec3::Zero(), wrong, cfg), ShapeMismatch);
    }
}

TEST_CASE("fixture discriminator is deterministic and well-ranged") {
    Discriminator d1, d2;
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n01(0.0, 1.0);
    VecX x(kObsSelfWidth);
    for (int i = 0; i < x.size(); ++i) x(i) = n01(rng);
    CHECK(d1.logit(x) == d2.logit(x));
    CHECK(d1.prob(x) > 0.0);
    CHECK(d1.prob(x) < 1.0);
    Discriminator other(99);
    CHECK(other.logit(x) != d1.logit(x));
    CHECK_THROWS_AS(d1.logit(VecX::Zero(10)), ShapeMismatch);
}

TEST_CASE("tracking environment: closed loop, determinism, action hook") {
    HumanoidModel m = HumanoidModel::standard();
    KinematicEstimate kin = tpose_estimate(m);
    Vec3 kin_root(0.0, 0.0, 0.95);
    SensorObservation sen;

    EnvConfig cfg;
    TrackingEnv env(m, Terrain::flat(), cfg);
    env.reset(kin, Vec2(0.0, 0.0));
    CHECK(env.simulation().state().joint_pos(0, 2) == doctest::Approx(0.95).epsilon(1e-12));

    for (int f = 0; f < 50; ++f) {
        StepResult r = env.step(kin, sen, kin_root);
        CHECK(r.observation.size() == kObservationWidth);
        CHECK_FALSE(r.terminated);
        CHECK_FALSE(r.fell);
        CHECK(r.reward.total ==
              doctest::Approx(0.5 * r.reward.amp + 0.5 * r.reward.imitation + r.reward.energy)
                  .epsilon(1e-12));
        CHECK(r.reward.amp > 0.0);
        CHECK(r.reward.imitation > 0.0);
        CHECK(r.reward.energy <= 0.0);
    }
    // Tracking its own start pose, the body barely moves and carries weight.
    SimState end = env.simulation().state();
    CHECK(end.joint_pos(0, 2) > 0.90);

    SUBCASE("bitwise deterministic across instances") {
        TrackingEnv a(m, Terrain::flat(), cfg), b(m, Terrain::flat(), cfg);
        a.reset(kin, Vec2(0.0, 0.0));
        b.reset(kin, Vec2(0.0, 0.0));
        for (int f = 0; f < 10; ++f) {
            StepResult ra = a.step(kin, sen, kin_root);
            StepResult rb = b.step(kin, sen, kin_root);
            CHECK(ra.observation == rb.observation);
            CHECK(ra.state.joint_pos == rb.state.joint_pos);
            CHECK(ra.reward.total == rb.reward.total);
        }
    }

    SUBCASE("the action hook changes the trajectory") {
        TrackingEnv a(m, Terrain::flat(), cfg), b(m, Terrain::flat(), cfg);
        a.reset(kin, Vec2(0.0, 0.0));
        b.reset(kin, Vec2(0.0, 0.0));
        MatX action = MatX::Zero(24, 3);
        action(16, 1) = 0.4;  // lift one shoulder target
        StepResult ra = a.step(kin, sen, kin_root, &action);
        StepResult rb = b.step(kin, sen, kin_root);
        CHECK((ra.state.joint_pos - rb.state.joint_pos).norm() > 0.0);
        MatX bad = MatX::Zero(3, 3);
        CHECK_THROWS_AS(a.step(kin, sen, kin_root, &bad), ShapeMismatch);
    }
}

TEST_CASE("tracking environment recovers after a detected fall") {
    HumanoidModel m = HumanoidModel::standard();
    KinematicEstimate kin = tpose_estimate(m);
    Vec3 kin_root(0.0, 0.0, 0.95);
    SensorObservation sen;

    // Force the fall detector on: any height and any score count as fallen.
    EnvConfig cfg;
    cfg.fall.min_root_height = 10.0;
    cfg.fall.max_disc_prob = 2.0;
    cfg.fall.window = 10;
    TrackingEnv env(m, Terrain::flat(), cfg);
    env.reset(kin, Vec2(0.0, 0.0));

    for (int f = 0; f < 25; ++f) {
        StepResult r = env.step(kin, sen, kin_root);
        CHECK(r.fell);
        // Recovery fires exactly when the kinematic window fills (frames 9, 19).
        CHECK(r.recovered == (f % 10 == 9));
        if (r.recovered) {
            CHECK(r.state.joint_pos(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
            CHECK(r.state.joint_pos(0, 2) == doctest::Approx(0.95).epsilon(1e-9));
            CHECK(r.state.joint_angvel.norm() == 0.0);
        }
    }
}
