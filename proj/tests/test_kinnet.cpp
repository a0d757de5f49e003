#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "grip/errors.hpp"
#include "grip/kinnet.hpp"
#include "test_helpers.hpp"

using namespace grip;

namespace {

KinematicEstimate random_estimate(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 0.3);
    KinematicEstimate e;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) e.p_leaf(r, c) = g(rng);
    for (int r = 0; r < body::kNumJoints; ++r)
        for (int c = 0; c < 3; ++c) e.p(r, c) = g(rng);
    for (int j = 0; j < body::kNumJoints; ++j) e.set_joint_rotation(j, testing::random_rotation(rng));
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 3; ++c) e.v_key(r, c) = g(rng);
    return e;
}

SensorObservation random_observation(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    SensorObservation obs;
    for (int i = 0; i < kNumImuSites; ++i) {
        obs.r[i] = testing::random_rotation(rng);
        obs.a[i] = Vec3(g(rng), g(rng), g(rng));
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int f = 0; f < 2; ++f) {
        obs.insole.grf[f] = 100.0 * u(rng);
        obs.insole.cop[f] = Vec2(0.03 * g(rng), 0.05 * g(rng));
        obs.insole.contact[f][0] = u(rng) > 0.5;
        obs.insole.contact[f][1] = u(rng) > 0.5;
    }
    return obs;
}

double relative_gap(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

}  // namespace

TEST_CASE("staged forward produces the documented shapes and zero maps to zero") {
    Estimator est(4);  // zero parameters
    std::mt19937_64 rng(11);
    KinematicEstimate truth0 = random_estimate(rng);
    Estimator::Hidden hidden = est.init_hidden(truth0);
    // Zero projections: hidden starts at zero regardless of the truth.
    for (const StageState& s : hidden.state) {
        CHECK(s.h.norm() == 0.0);
        CHECK(s.c.norm() == 0.0);
    }
    KinematicEstimate out = est.staged_forward(random_observation(rng), hidden);
    CHECK(out.p_leaf.rows() == 5);
    CHECK(out.p.rows() == 24);
    CHECK(out.theta.cols() == 6);
    CHECK(out.v_key.rows() == 6);
    CHECK(out.p_leaf.norm() == 0.0);
    CHECK(out.p.norm() == 0.0);
    CHECK(out.theta.norm() == 0.0);
    CHECK(out.v_key.norm() == 0.0);
}

TEST_CASE("staged forward is deterministic bit for bit") {
    std::mt19937_64 rng(42);
    Estimator est(6, rng);
    KinematicEstimate truth0 = random_estimate(rng);
    std::vector<SensorObservation> obs;
    for (int t = 0; t < 5; ++t) obs.push_back(random_observation(rng));

    auto run = [&]() {
        Estimator::Hidden h = est.init_hidden(truth0);
        std::vector<KinematicEstimate> out;
        for (const SensorObservation& o : obs) out.push_back(est.staged_forward(o, h));
        return out;
    };
    std::vector<KinematicEstimate> a = run(), b = run();
    for (size_t t = 0; t < a.size(); ++t) {
        CHECK(a[t].p_leaf == b[t].p_leaf);
        CHECK(a[t].p == b[t].p);
        CHECK(a[t].theta == b[t].theta);
        CHECK(a[t].v_key == b[t].v_key);
    }
}

TEST_CASE("hidden initialization reflects the first-frame truth and is not re-applied") {
    std::mt19937_64 rng(7);
    Estimator est(6, rng);
    KinematicEstimate t0 = random_estimate(rng), t1 = random_estimate(rng);
    Estimator::Hidden ha = est.init_hidden(t0);
    Estimator::Hidden hb = est.init_hidden(t1);
    bool any_differs = false;
    for (int s = 0; s < Estimator::kNumStages; ++s) {
        if ((ha.state[s].h - hb.state[s].h).norm() > 1e-12) any_differs = true;
    }
    CHECK(any_differs);

    // Streaming two frames evolves the state: frame 1 output differs from the
    // output obtained by re-initializing right before it.
    SensorObservation o0 = random_observation(rng), o1 = random_observation(rng);
    Estimator::Hidden h_stream = est.init_hidden(t0);
    (void)est.staged_forward(o0, h_stream);
    KinematicEstimate streamed = est.staged_forward(o1, h_stream);
    Estimator::Hidden h_fresh = est.init_hidden(t0);
    KinematicEstimate reinit = est.staged_forward(o1, h_fresh);
    CHECK((streamed.p - reinit.p).norm() > 1e-9);

    Estimator::Hidden never_initialized;
    CHECK_THROWS_AS((void)est.staged_forward(o0, never_initialized), MissingContext);
    Estimator other(3);
    Estimator::Hidden wrong = other.init_hidden(t0);
    CHECK_THROWS_AS((void)est.staged_forward(o0, wrong), ShapeMismatch);
}

TEST_CASE("kin_loss arithmetic and invariances") {
    std::mt19937_64 rng(3);
    KinematicEstimate truth = random_estimate(rng);
    CHECK(kin_loss(truth, truth) == 0.0);

    const double delta = 0.37;
    KinematicEstimate pred = truth;
    pred.p(13, 1) += delta;
    CHECK(kin_loss(pred, truth) == doctest::Approx(delta * delta / 72.0).epsilon(1e-12));

    // Perturbing any single field makes the loss strictly positive.
    for (int field = 0; field < 4; ++field) {
        KinematicEstimate q = truth;
        switch (field) {
            case 0: q.p_leaf(2, 0) += 1e-3; break;
            case 1: q.p(5, 2) += 1e-3; break;
            case 2: q.theta(8, 4) += 1e-3; break;
            case 3: q.v_key(1, 1) += 1e-3; break;
        }
        CHECK(kin_loss(q, truth) > 0.0);
    }

    // Translating prediction and truth by the same tensors leaves it unchanged.
    KinematicEstimate shift = random_estimate(rng);
    KinematicEstimate pred2 = random_estimate(rng);
    double base = kin_loss(pred2, truth);
    KinematicEstimate pred_s = pred2, truth_s = truth;
    pred_s.p_leaf += shift.p_leaf;
    truth_s.p_leaf += shift.p_leaf;
    pred_s.p += shift.p;
    truth_s.p += shift.p;
    pred_s.theta += shift.theta;
    truth_s.theta += shift.theta;
    pred_s.v_key += shift.v_key;
    truth_s.v_key += shift.v_key;
    CHECK(kin_loss(pred_s, truth_s) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("sequence kin_loss averages frames and validates lengths") {
    std::mt19937_64 rng(9);
    std::vector<KinematicEstimate> truth = {random_estimate(rng), random_estimate(rng),
                                            random_estimate(rng)};
    std::vector<KinematicEstimate> pred = {random_estimate(rng), random_estimate(rng),
                                           random_estimate(rng)};
    double mean = (kin_loss(pred[0], truth[0]) + kin_loss(pred[1], truth[1]) +
                   kin_loss(pred[2], truth[2])) /
                  3.0;
    CHECK(kin_loss(std::span<const KinematicEstimate>(pred),
                   std::span<const KinematicEstimate>(truth)) ==
          doctest::Approx(mean).epsilon(1e-14));

    std::vector<KinematicEstimate> short_pred = {pred[0]};
    CHECK_THROWS_AS((void)kin_loss(std::span<const KinematicEstimate>(short_pred),
                                   std::span<const KinematicEstimate>(truth)),
                    LengthMismatch);
    std::vector<KinematicEstimate> empty;
    CHECK_THROWS_AS((void)kin_loss(std::span<const KinematicEstimate>(empty),
                                   std::span<const KinematicEstimate>(empty)),
                    SequenceTooShort);
}

TEST_CASE("single-stage gradients match central finite differences") {
    std::mt19937_64 rng(21);
    LstmStage s = LstmStage::zeros(7, 3, 4, 4);
    s.randomize(rng, 0.8);

    const int T = 5;
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<VecX> xs(T);
    std::vector<VecX> targets(T);
    for (int t = 0; t < T; ++t) {
        xs[t] = VecX::NullaryExpr(7, [&](int) { return g(rng); });
        targets[t] = VecX::NullaryExpr(4, [&](int) { return g(rng); });
    }
    VecX target0 = VecX::NullaryExpr(4, [&](int) { return g(rng); });

    auto objective = [&]() {
        std::vector<VecX> ys = stage_forward(s, xs, target0, nullptr);
        double j = 0.0;
        for (int t = 0; t < T; ++t) j += 0.5 * (ys[t] - targets[t]).squaredNorm();
        return j;
    };

    StageTrace trace;
    std::vector<VecX> ys = stage_forward(s, xs, target0, &trace);
    std::vector<VecX> dys(T);
    for (int t = 0; t < T; ++t) dys[t] = ys[t] - targets[t];
    LstmStage grad = LstmStage::zeros(7, 3, 4, 4);
    std::vector<VecX> dxs = stage_backward(s, trace, dys, grad);

    const double h = 1e-5;
    double worst = 0.0;

    std::vector<TensorRef> params, grads;
    s.collect_tensors("s", params);
    grad.collect_tensors("s", grads);
    for (size_t k = 0; k < params.size(); ++k) {
        for (size_t i = 0; i < params[k].size(); ++i) {
            double saved = params[k].data[i];
            params[k].data[i] = saved + h;
            double jp = objective();
            params[k].data[i] = saved - h;
            double jm = objective();
            params[k].data[i] = saved;
            worst = std::max(worst, relative_gap((jp - jm) / (2.0 * h), grads[k].data[i]));
        }
    }
    // Input gradients through the recurrence.
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < 7; ++i) {
            double saved = xs[t](i);
            xs[t](i) = saved + h;
            double jp = objective();
            xs[t](i) = saved - h;
            double jm = objective();
            xs[t](i) = saved;
            worst = std::max(worst, relative_gap((jp - jm) / (2.0 * h), dxs[t](i)));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("end-to-end sequence gradients match finite differences on a 2-hidden-unit net") {
    std::mt19937_64 rng(33);
    Estimator est(2, rng, 0.4);
    const int T = 4;
    std::vector<SensorObservation> obs;
    std::vector<KinematicEstimate> truth;
    for (int t = 0; t < T; ++t) {
        obs.push_back(random_observation(rng));
        truth.push_back(random_estimate(rng));
    }

    Estimator grad;
    double loss = est.sequence_loss(obs, truth, &grad);
    CHECK(loss > 0.0);

    std::vector<TensorRef> params = est.tensors();
    std::vector<TensorRef> grads = grad.tensors();
    REQUIRE(params.size() == grads.size());

    const double h = 1e-5;
    double worst = 0.0;
    for (size_t k = 0; k < params.size(); ++k) {
        REQUIRE(params[k].name == grads[k].name);
        for (size_t i = 0; i < params[k].size(); ++i) {
            double saved = params[k].data[i];
            params[k].data[i] = saved + h;
            double jp = est.sequence_loss(obs, truth);
            params[k].data[i] = saved - h;
            double jm = est.sequence_loss(obs, truth);
            params[k].data[i] = saved;
            worst = std::max(worst, relative_gap((jp - jm) / (2.0 * h), grads[k].data[i]));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("sequence loss agrees with streaming forward plus per-frame loss") {
    std::mt19937_64 rng(55);
    Estimator est(5, rng);
    const int T = 7;
    std::vector<SensorObservation> obs;
    std::vector<KinematicEstimate> truth;
    for (int t = 0; t < T; ++t) {
        obs.push_back(random_observation(rng));
        truth.push_back(random_estimate(rng));
    }
    Estimator::Hidden h = est.init_hidden(truth[0]);
    std::vector<KinematicEstimate> streamed;
    for (const SensorObservation& o : obs) streamed.push_back(est.staged_forward(o, h));
    double manual = kin_loss(std::span<const KinematicEstimate>(streamed),
                             std::span<const KinematicEstimate>(truth));
    CHECK(est.sequence_loss(obs, truth) == doctest::Approx(manual).epsilon(1e-13));

    std::vector<KinematicEstimate> ragged(truth.begin(), truth.end() - 1);
    CHECK_THROWS_AS((void)est.sequence_loss(obs, ragged), LengthMismatch);
    CHECK_THROWS_AS((void)est.sequence_loss({}, {}), SequenceTooShort);
}

TEST_CASE("staged forward is causal") {
    std::mt19937_64 rng(77);
    Estimator est(6, rng);
    KinematicEstimate t0 = random_estimate(rng);
    std::vector<SensorObservation> obs;
    for (int t = 0; t < 6; ++t) obs.push_back(random_observation(rng));

    auto run = [&]() {
        Estimator::Hidden h = est.init_hidden(t0);
        std::vector<KinematicEstimate> out;
        for (const SensorObservation& o : obs) out.push_back(est.staged_forward(o, h));
        return out;
    };
    std::vector<KinematicEstimate> before = run();
    obs[4] = random_observation(rng);
    std::vector<KinematicEstimate> after = run();
    for (int t = 0; t < 4; ++t) {
        CHECK(before[t].p == after[t].p);
        CHECK(before[t].theta == after[t].theta);
    }
    CHECK((before[4].p - after[4].p).norm() > 1e-9);
}

TEST_CASE("oracle estimator returns truth, bakes noise deterministically") {
    std::mt19937_64 rng(99);
    std::vector<KinematicEstimate> truth;
    for (int t = 0; t < 20; ++t) truth.push_back(random_estimate(rng));

    EstimateSource clean = oracle_estimator(truth);
    for (int t : {0, 7, 19}) {
        KinematicEstimate e = clean(t);
        CHECK((e.p - truth[size_t(t)].p).norm() == 0.0);
        CHECK((e.theta - truth[size_t(t)].theta).norm() == 0.0);
    }
    CHECK_THROWS_AS((void)clean(20), SequenceTooShort);
    CHECK_THROWS_AS((void)clean(-1), SequenceTooShort);

    OracleNoise noise;
    noise.p = 0.01;
    noise.theta = 0.02;
    EstimateSource noisy = oracle_estimator(truth, noise, 5);
    // Random access is order-free: repeated and out-of-order reads agree.
    KinematicEstimate first = noisy(9);
    (void)noisy(2);
    CHECK((noisy(9).p - first.p).norm() == 0.0);
    // Perturbed angles still decode to valid rotations.
    for (int j = 0; j < body::kNumJoints; ++j) {
        Rotation r = noisy(9).joint_rotation(j);
        CHECK_NOTHROW((void)Rotation::from_matrix(r.matrix()));
    }
}

TEST_CASE("oracle position noise has the expected mean deviation norm") {
    std::mt19937_64 rng(123);
    const int T = 300;
    std::vector<KinematicEstimate> truth;
    for (int t = 0; t < T; ++t) truth.push_back(random_estimate(rng));
    OracleNoise noise;
    noise.p = 0.01;
    EstimateSource noisy = oracle_estimator(truth, noise, 17);

    double sum = 0.0;
    int n = 0;
    for (int t = 0; t < T; ++t) {
        KinematicEstimate e = noisy(t);
        for (int j = 0; j < body::kNumJoints; ++j) {
            sum += (e.p.row(j) - truth[size_t(t)].p.row(j)).norm();
            ++n;
        }
    }
    // Mean norm of an isotropic 3D Gaussian: sigma * 2*sqrt(2)/sqrt(pi).
    double expected = 0.01 * 2.0 * std::sqrt(2.0) / std::sqrt(std::numbers::pi);
    CHECK(sum / n == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("history buffer keeps the most recent window in order") {
    std::mt19937_64 rng(13);
    HistoryBuffer buf(10);
    CHECK(buf.capacity() == 10);

    std::vector<KinematicEstimate> frames;
    for (int t = 0; t < 13; ++t) frames.push_back(random_estimate(rng));

    for (int t = 0; t < 5; ++t) buf.push(frames[size_t(t)]);
    CHECK(buf.size() == 5);
    CHECK_FALSE(buf.full());
    CHECK_THROWS_AS((void)buf.segment(), Underflow);
    CHECK((buf.back(0).p - frames[4].p).norm() == 0.0);
    CHECK((buf.back(4).p - frames[0].p).norm() == 0.0);
    CHECK_THROWS_AS((void)buf.back(5), Underflow);

    for (int t = 5; t < 10; ++t) buf.push(frames[size_t(t)]);
    CHECK(buf.full());
    std::vector<KinematicEstimate> window = buf.segment();
    REQUIRE(window.size() == 10);
    for (int t = 0; t < 10; ++t) CHECK((window[size_t(t)].p - frames[size_t(t)].p).norm() == 0.0);

    // Three more pushes evict the oldest three.
    for (int t = 10; t < 13; ++t) buf.push(frames[size_t(t)]);
    CHECK(buf.size() == 10);
    window = buf.segment();
    for (int t = 0; t < 10; ++t) {
        CHECK((window[size_t(t)].p - frames[size_t(t + 3)].p).norm() == 0.0);
    }

    buf.clear();
    CHECK(buf.size() == 0);
    CHECK_THROWS_AS((void)buf.back(), Underflow);
}

TEST_CASE("estimator source matches manual streaming") {
    std::mt19937_64 rng(31);
    Estimator est(5, rng);
    KinematicEstimate t0 = random_estimate(rng);
    std::vector<SensorObservation> obs;
    for (int t = 0; t < 8; ++t) obs.push_back(random_observation(rng));

    Estimator::Hidden h = est.init_hidden(t0);
    std::vector<KinematicEstimate> manual;
    for (const SensorObservation& o : obs) manual.push_back(est.staged_forward(o, h));

    EstimateSource src = estimator_source(est, obs, t0);
    for (int t : {0, 3, 3, 7}) {
        CHECK((src(t).p - manual[size_t(t)].p).norm() == 0.0);
        CHECK((src(t).theta - manual[size_t(t)].theta).norm() == 0.0);
    }
    CHECK_THROWS_AS((void)src(8), SequenceTooShort);
}

TEST_CASE("adaptive-moment training drives the sequence loss down") {
    std::mt19937_64 rng(2024);
    Estimator est(8, rng, 0.2);

    // Fixed short sequence: a constant pose observed through constant sensors.
    KinematicEstimate pose = random_estimate(rng);
    SensorObservation obs = random_observation(rng);
    const int T = 6;
    std::vector<SensorObservation> obs_seq(T, obs);
    std::vector<KinematicEstimate> truth(T, pose);

    double initial = est.sequence_loss(obs_seq, truth);
    AdamOptimizer opt(1e-2);
    double last = initial;
    for (int step = 0; step < 150; ++step) {
        Estimator grad;
        last = est.sequence_loss(obs_seq, truth, &grad);
        opt.step(est.tensors(), grad.tensors());
    }
    CHECK(last < 0.1 * initial);
}
