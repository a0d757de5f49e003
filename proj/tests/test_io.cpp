#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <charconv>
#include <random>
#include <string>

#include "grip/errors.hpp"
#include "grip/io.hpp"
#include "test_helpers.hpp"

using namespace grip;

namespace {

KinematicEstimate random_estimate(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    KinematicEstimate e;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) e.p_leaf(r, c) = g(rng);
    for (int r = 0; r < 24; ++r)
        for (int c = 0; c < 3; ++c) e.p(r, c) = g(rng);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 3; ++c) e.v_key(r, c) = g(rng);
    for (int j = 0; j < 24; ++j) e.set_joint_rotation(j, testing::random_rotation(rng));
    return e;
}

SensorObservation random_observation(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    SensorObservation s;
    for (int k = 0; k < kNumImuSites; ++k) {
        s.r[size_t(k)] = testing::random_rotation(rng);
        s.a[size_t(k)] = Vec3(g(rng), g(rng), g(rng));
    }
    for (int foot = 0; foot < 2; ++foot) {
        s.insole.grf[size_t(foot)] = 400.0 * u01(rng);
        s.insole.cop[size_t(foot)] = Vec2(0.03 * g(rng), 0.05 * g(rng));
        s.insole.contact[size_t(foot)][0] = u01(rng) < 0.5;
        s.insole.contact[size_t(foot)][1] = u01(rng) < 0.5;
    }
    return s;
}

MotionSequence random_motion(std::mt19937_64& rng, int frames) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    MotionSequence seq;
    for (int i = 0; i < frames; ++i) {
        Eigen::Matrix<double, 24, 3> pos;
        std::array<Rotation, 24> rot;
        for (int j = 0; j < 24; ++j) {
            pos.row(j) = Vec3(g(rng), g(rng), 1.0 + 0.2 * g(rng)).transpose();
            rot[size_t(j)] = testing::random_rotation(rng);
        }
        seq.joint_pos.push_back(pos);
        seq.joint_rot.push_back(rot);
        seq.contact.push_back({{{u01(rng) < 0.5, u01(rng) < 0.5},
                                {u01(rng) < 0.5, u01(rng) < 0.5}}});
        seq.vgrf.push_back(Vec2(350.0 * u01(rng), 350.0 * u01(rng)));
    }
    return seq;
}

SequenceData random_sequence(std::mt19937_64& rng, int frames, bool with_truth) {
    SequenceData seq;
    seq.subject = "s01";
    for (int i = 0; i < frames; ++i) seq.sensors.push_back(random_observation(rng));
    if (with_truth) {
        for (int i = 0; i < frames; ++i) seq.truth_kin.push_back(random_estimate(rng));
        seq.truth_motion = random_motion(rng, frames);
        seq.terrain.add_box(Vec2(0.5, -0.4), Vec2(1.5, 0.4), 0.2);
    }
    return seq;
}

bool estimates_equal(const KinematicEstimate& a, const KinematicEstimate& b) {
    return a.p_leaf == b.p_leaf && a.p == b.p && a.theta == b.theta && a.v_key == b.v_key;
}

// Replaces the whole line that starts with `tag` (first occurrence).
std::string replace_line(std::string text, const std::string& tag, const std::string& line) {
    size_t at = text.find("\n" + tag);
    REQUIRE(at != std::string::npos);
    size_t end = text.find('\n', at + 1);
    return text.replace(at + 1, end - at - 1, line);
}

double parse_back(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    REQUIRE(res.ec == std::errc());
    REQUIRE(res.ptr == s.data() + s.size());
    return v;
}

}  // namespace

TEST_CASE("format_double emits exact shortest decimal forms") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-0.25) == "-0.25");
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(100.0) == "100");

    // Shortest round trip: parsing the text recovers the exact bits.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> scale(-30, 30);
    for (int i = 0; i < 2000; ++i) {
        double x = g(rng) * std::pow(10.0, scale(rng));
        double back = parse_back(format_double(x));
        CHECK(back == x);
    }
}

TEST_CASE("sequence files round trip byte for byte") {
    std::mt19937_64 rng(21);
    SequenceData seq = random_sequence(rng, 4, true);

    std::string text1 = write_sequence(seq);
    SequenceData back = read_sequence(text1);
    std::string text2 = write_sequence(back);
    CHECK(text1 == text2);

    CHECK(back.subject == seq.subject);
    CHECK(back.size() == seq.size());
    for (int i = 0; i < seq.size(); ++i) {
        const SensorObservation& a = seq.sensors[size_t(i)];
        const SensorObservation& b = back.sensors[size_t(i)];
        for (int k = 0; k < kNumImuSites; ++k) {
            CHECK(a.r[size_t(k)].matrix() == b.r[size_t(k)].matrix());
            CHECK(a.a[size_t(k)] == b.a[size_t(k)]);
        }
        CHECK(a.insole.flatten() == b.insole.flatten());
        CHECK(estimates_equal(seq.truth_kin[size_t(i)], back.truth_kin[size_t(i)]));
        CHECK(seq.truth_motion.joint_pos[size_t(i)] == back.truth_motion.joint_pos[size_t(i)]);
        for (int j = 0; j < 24; ++j) {
            CHECK(seq.truth_motion.joint_rot[size_t(i)][size_t(j)].matrix() ==
                  back.truth_motion.joint_rot[size_t(i)][size_t(j)].matrix());
        }
        CHECK(seq.truth_motion.contact[size_t(i)] == back.truth_motion.contact[size_t(i)]);
        CHECK(seq.truth_motion.vgrf[size_t(i)] == back.truth_motion.vgrf[size_t(i)]);
    }
    CHECK(back.terrain.ground == seq.terrain.ground);
    REQUIRE(back.terrain.boxes.size() == 1);
    CHECK(back.terrain.boxes[0].height == seq.terrain.boxes[0].height);

    SUBCASE("sensor-only files carry no truth blocks") {
        SequenceData bare = random_sequence(rng, 3, false);
        std::string t1 = write_sequence(bare);
        SequenceData b2 = read_sequence(t1);
        CHECK(write_sequence(b2) == t1);
        CHECK(b2.truth_kin.empty());
        CHECK(b2.truth_motion.joint_pos.empty());
        CHECK(b2.truth_motion.vgrf.empty());
    }
}

TEST_CASE("readers skip annotations and blank lines, writers never emit them") {
    std::mt19937_64 rng(22);
    SequenceData seq = random_sequence(rng, 2, true);
    std::string canonical = write_sequence(seq);

    // The only '#' in the output is the format header on line one.
    CHECK(canonical.rfind("#GRIP sequence v1\n", 0) == 0);
    CHECK(canonical.find('#', 1) == std::string::npos);

    std::string commented = canonical;
    size_t after_header = commented.find('\n') + 1;
    commented.insert(after_header, "# annotations and blank lines are ignored\n\n");
    commented.insert(commented.find("\nframe 1") + 1, "# mid-stream note\n");
    commented += "\n# trailing note\n";

    SequenceData back = read_sequence(commented);
    CHECK(write_sequence(back) == canonical);
}

TEST_CASE("sequence reader rejects malformed input") {
    std::mt19937_64 rng(23);
    SequenceData seq = random_sequence(rng, 1, false);
    const std::string good = write_sequence(seq);

    CHECK_NOTHROW(read_sequence(good));
    CHECK_THROWS_AS(read_sequence(write_offsets(OffsetsData{})), ParseError);
    CHECK_THROWS_AS(read_sequence(""), ParseError);
    CHECK_THROWS_AS(read_sequence(replace_line(good, "rate", "rate 50")), ParseError);
    CHECK_THROWS_AS(read_sequence(replace_line(good, "gravity", "gravity y-up")), ParseError);
    CHECK_THROWS_AS(read_sequence(replace_line(good, "frame 0", "frame 3")), ParseError);
    CHECK_THROWS_AS(read_sequence(good.substr(0, good.size() / 2)), ParseError);
    CHECK_THROWS_AS(read_sequence(good + "junk 1\n"), ParseError);

    // A tampered orientation must be rejected, not silently accepted.
    std::string bad_rot =
        replace_line(good, "imu 0", "imu 0 1 0 0 0 1 0 0 0 2 0.1 -0.2 -9.8");
    CHECK_THROWS_AS(read_sequence(bad_rot), ParseError);

    std::string short_row = replace_line(good, "insole", "insole 1 2 3");
    CHECK_THROWS_AS(read_sequence(short_row), ParseError);

    std::string not_a_number = replace_line(good, "insole", "insole 1 2 3 4 5 6 7 8 9 x");
    CHECK_THROWS_AS(read_sequence(not_a_number), ParseError);
}

TEST_CASE("estimate files round trip and validate joint angles") {
    std::mt19937_64 rng(24);
    std::vector<KinematicEstimate> frames;
    for (int i = 0; i < 5; ++i) frames.push_back(random_estimate(rng));

    std::string text1 = write_estimates(frames);
    std::vector<KinematicEstimate> back = read_estimates(text1);
    CHECK(write_estimates(back) == text1);
    REQUIRE(back.size() == frames.size());
    for (size_t i = 0; i < frames.size(); ++i) CHECK(estimates_equal(frames[i], back[i]));

    // A zeroed angle row cannot be decoded into a rotation.
    std::string zeros = "kin_theta";
    for (int i = 0; i < 144; ++i) zeros += " 0";
    CHECK_THROWS_AS(read_estimates(replace_line(text1, "kin_theta", zeros)), ParseError);
}

TEST_CASE("offset reports round trip") {
    OffsetsData data;
    data.offsets = {10, -5, 0, 25};
    data.common = {25, 975};

    std::string text1 = write_offsets(data);
    OffsetsData back = read_offsets(text1);
    CHECK(write_offsets(back) == text1);
    CHECK(back.offsets == data.offsets);
    CHECK(back.common.begin == 25);
    CHECK(back.common.end == 975);
}

TEST_CASE("sync inputs round trip with and without a shared reference") {
    std::mt19937_64 rng(25);
    std::normal_distribution<double> g(0.0, 1.0);
    SyncInput data;
    for (int s = 0; s < 3; ++s) {
        std::vector<double> series;
        for (int t = 0; t < 5 + s; ++t) series.push_back(g(rng));
        data.series.push_back(series);
    }
    for (int t = 0; t < 5; ++t) data.reference.push_back(g(rng));

    std::string text1 = write_sync_input(data);
    SyncInput back = read_sync_input(text1);
    CHECK(write_sync_input(back) == text1);
    CHECK(back.series == data.series);
    CHECK(back.reference == data.reference);

    SUBCASE("an absent reference stays absent") {
        data.reference.clear();
        SyncInput b2 = read_sync_input(write_sync_input(data));
        CHECK(b2.reference.empty());
        CHECK(b2.series == data.series);
    }
}

TEST_CASE("rollout files carry rewards, flags, and recovery segments") {
    std::mt19937_64 rng(26);
    std::normal_distribution<double> g(0.0, 1.0);
    RolloutData data;
    data.motion = random_motion(rng, 6);
    for (int i = 0; i < 6; ++i) {
        data.rewards.push_back({g(rng), g(rng), g(rng), g(rng)});
        data.fell.push_back(i >= 4);
        data.recovered.push_back(i == 5);
        data.terminated.push_back(0);
    }
    RecoveryEvent ev1{2, {random_estimate(rng), random_estimate(rng)}};
    RecoveryEvent ev2{5, {random_estimate(rng), random_estimate(rng), random_estimate(rng)}};
    data.recoveries.push_back(ev1);
    data.recoveries.push_back(ev2);

    std::string text1 = write_rollout(data);
    RolloutData back = read_rollout(text1);
    CHECK(write_rollout(back) == text1);

    REQUIRE(back.size() == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(back.rewards[size_t(i)].total == data.rewards[size_t(i)].total);
        CHECK(back.rewards[size_t(i)].amp == data.rewards[size_t(i)].amp);
        CHECK(back.fell[size_t(i)] == data.fell[size_t(i)]);
        CHECK(back.recovered[size_t(i)] == data.recovered[size_t(i)]);
    }
    REQUIRE(back.recoveries.size() == 2);
    CHECK(back.recoveries[0].frame == 2);
    CHECK(back.recoveries[1].frame == 5);
    REQUIRE(back.recoveries[1].segment.size() == 3);
    CHECK(estimates_equal(back.recoveries[1].segment[2], ev2.segment[2]));

    SUBCASE("ragged per-frame series are rejected before writing") {
        data.rewards.pop_back();
        CHECK_THROWS_AS(write_rollout(data), LengthMismatch);
    }
}

TEST_CASE("metric reports use the evaluation table field names") {
    MetricReport report;
    report.mpjpe = 31.4;
    report.pel_mpjpe = 27.1;
    report.pa_mpjpe = 19.8;
    report.mpjre = 10.7;
    report.acc = 2.53;
    report.fs = 0.145;
    report.fp = 6.2;
    report.vgrf = 87.5;
    report.success_rate = 0.875;

    std::string text1 = write_metrics(report);
    for (const char* tag : {"MPJPE[mm]", "PEL-MPJPE[mm]", "PA-MPJPE[mm]", "MPJRE[deg]",
                            "Acc[m/s^2]", "FS[m/s]", "FP[mm]", "vGRF[N]", "Succ.Rate"}) {
        CHECK(text1.find(tag) != std::string::npos);
    }

    MetricReport back = read_metrics(text1);
    CHECK(write_metrics(back) == text1);
    CHECK(back.mpjpe == report.mpjpe);
    CHECK(back.pa_mpjpe == report.pa_mpjpe);
    CHECK(back.success_rate == 0.875);  // stored as a fraction, not a percentage

    CHECK_THROWS_AS(read_metrics(replace_line(text1, "FS[m/s]", "FS[mm] 1")), ParseError);
}

TEST_CASE("checkpoints restore every parameter bit for bit") {
    std::mt19937_64 rng(27);
    Estimator est(6, rng);

    std::string text1 = write_checkpoint(est);
    Estimator back = read_checkpoint(text1);
    CHECK(write_checkpoint(back) == text1);
    CHECK(back.hidden_width() == 6);

    std::vector<TensorRef> a = est.tensors();
    std::vector<TensorRef> b = back.tensors();
    REQUIRE(a.size() == b.size());
    for (size_t t = 0; t < a.size(); ++t) {
        CHECK(a[t].name == b[t].name);
        REQUIRE(a[t].size() == b[t].size());
        for (size_t i = 0; i < a[t].size(); ++i) CHECK(a[t].data[i] == b[t].data[i]);
    }

    SUBCASE("wrong hidden width is caught through tensor shapes") {
        CHECK_THROWS_AS(read_checkpoint(replace_line(text1, "hidden", "hidden 7")), ParseError);
    }
    SUBCASE("renamed tensors are rejected") {
        size_t at = text1.find("tensor ");
        REQUIRE(at != std::string::npos);
        std::string bad = text1;
        bad.replace(at, 8, "tensor x");
        CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
    }
}

TEST_CASE("body model files reproduce the standard model exactly") {
    HumanoidModel model = HumanoidModel::standard();
    std::string text1 = write_model(model);
    HumanoidModel back = read_model(text1);
    CHECK(write_model(back) == text1);

    REQUIRE(back.size() == model.size());
    CHECK(back.contact_stiffness == model.contact_stiffness);
    CHECK(back.contact_damping == model.contact_damping);
    CHECK(back.friction == model.friction);
    CHECK(back.substeps == model.substeps);
    for (int j = 0; j < model.size(); ++j) {
        const JointSpec& a = model.joints[size_t(j)];
        const JointSpec& b = back.joints[size_t(j)];
        CHECK(a.name == b.name);
        CHECK(a.parent == b.parent);
        CHECK(a.offset == b.offset);
        CHECK(a.com == b.com);
        CHECK(a.mass == b.mass);
        CHECK(a.inertia == b.inertia);
        CHECK(a.kp == b.kp);
        CHECK(a.joint_damping == b.joint_damping);
        CHECK(a.torque_limit == b.torque_limit);
        CHECK(a.contact_radius == b.contact_radius);
        REQUIRE(a.contact_points.size() == b.contact_points.size());
        for (size_t s = 0; s < a.contact_points.size(); ++s) {
            CHECK(a.contact_points[s] == b.contact_points[s]);
        }
    }
    CHECK(back.total_mass() == model.total_mass());
}

TEST_CASE("terrain files round trip and reject inverted boxes") {
    Terrain t;
    t.ground = 0.1;
    t.add_box(Vec2(-1.0, -1.0), Vec2(0.0, 0.5), 0.3);
    t.add_box(Vec2(2.0, 2.0), Vec2(3.0, 4.0), 0.15);

    std::string text1 = write_terrain(t);
    Terrain back = read_terrain(text1);
    CHECK(write_terrain(back) == text1);
    CHECK(back.height_at(-0.5, 0.0) == t.height_at(-0.5, 0.0));
    CHECK(back.height_at(2.5, 3.0) == t.height_at(2.5, 3.0));
    CHECK(back.height_at(10.0, 10.0) == 0.1);

    CHECK_THROWS_AS(read_terrain("#GRIP terrain v1\nterrain 0 1\nbox 1 1 0 0 0.3\n"),
                    ParseError);
}

TEST_CASE("insole profiles round trip") {
    InsoleProfile p = InsoleProfile::default_grid();
    p.contact_threshold = 12.5;

    std::string text1 = write_profile(p);
    InsoleProfile back = read_profile(text1);
    CHECK(write_profile(back) == text1);
    CHECK(back.contact_threshold == 12.5);
    CHECK(back.cop_min_force == p.cop_min_force);
    for (int foot = 0; foot < 2; ++foot) {
        for (int c = 0; c < 16; ++c) {
            CHECK(back.cell_positions[size_t(foot)][size_t(c)] ==
                  p.cell_positions[size_t(foot)][size_t(c)]);
        }
    }
}

TEST_CASE("raw bundles round trip") {
    std::mt19937_64 rng(28);
    std::normal_distribution<double> g(0.0, 1.0);
    const int n = 5;

    RawBundle bundle;
    bundle.subject = "s02";

    RawDevice watch;
    watch.kind = DeviceKind::watch;
    watch.floor_window = {0, 2};
    watch.tpose_window = {2, 4};
    watch.tpose_joint_global = testing::random_rotation(rng);
    watch.mounting = testing::random_rotation(rng);
    for (int t = 0; t < n; ++t) {
        watch.stream.orientation_r.push_back(testing::random_rotation(rng));
        watch.stream.gyro.push_back(Vec3(g(rng), g(rng), g(rng)));
        watch.stream.accel.push_back(Vec3(g(rng), g(rng), g(rng) - 9.81));
    }

    RawDevice insole;
    insole.kind = DeviceKind::insole_left;
    insole.tpose_window = {3, 4};
    insole.tpose_joint_global = testing::random_rotation(rng);
    insole.mounting = testing::random_rotation(rng);
    for (int t = 0; t < n; ++t) {
        insole.stream.gyro.push_back(Vec3(g(rng), g(rng), g(rng)));
        insole.stream.accel.push_back(Vec3(g(rng), g(rng), g(rng) - 9.81));
    }

    bundle.devices.push_back(watch);
    bundle.devices.push_back(insole);
    for (int t = 0; t < n; ++t) {
        PressureFrame p;
        for (int foot = 0; foot < 2; ++foot) {
            for (int c = 0; c < 16; ++c) {
                p.cells[size_t(foot)][size_t(c)] = std::abs(g(rng)) * 20.0;
            }
        }
        bundle.pressure.push_back(p);
    }
    for (int t = 0; t < n; ++t) bundle.truth_kin.push_back(random_estimate(rng));

    std::string text1 = write_raw_bundle(bundle);
    RawBundle back = read_raw_bundle(text1);
    CHECK(write_raw_bundle(back) == text1);

    CHECK(back.subject == "s02");
    REQUIRE(back.devices.size() == 2);
    CHECK(back.devices[0].kind == DeviceKind::watch);
    CHECK(back.devices[1].kind == DeviceKind::insole_left);
    CHECK(back.devices[0].floor_window.begin == 0);
    CHECK(back.devices[0].floor_window.end == 2);
    CHECK(back.devices[1].tpose_window.begin == 3);
    CHECK(back.devices[0].stream.orientation_r.size() == size_t(n));
    CHECK(back.devices[1].stream.orientation_r.empty());
    for (int t = 0; t < n; ++t) {
        CHECK(back.devices[0].stream.orientation_r[size_t(t)].matrix() ==
              watch.stream.orientation_r[size_t(t)].matrix());
        CHECK(back.devices[0].stream.gyro[size_t(t)] == watch.stream.gyro[size_t(t)]);
        CHECK(back.devices[1].stream.accel[size_t(t)] == insole.stream.accel[size_t(t)]);
        CHECK(back.pressure[size_t(t)].cells == bundle.pressure[size_t(t)].cells);
        CHECK(estimates_equal(back.truth_kin[size_t(t)], bundle.truth_kin[size_t(t)]));
    }
    CHECK(back.devices[0].mounting.matrix() == watch.mounting.matrix());
    CHECK(back.devices[1].tpose_joint_global.matrix() == insole.tpose_joint_global.matrix());
    CHECK(back.truth_motion.joint_pos.empty());

    SUBCASE("ragged device streams are rejected before writing") {
        bundle.devices[1].stream.gyro.pop_back();
        bundle.devices[1].stream.accel.pop_back();
        CHECK_THROWS_AS(write_raw_bundle(bundle), LengthMismatch);
    }
    SUBCASE("an unknown device kind is rejected") {
        std::string bad = replace_line(text1, "device 1",
                                       "device 1 gizmo 0 0 3 4 0");
        CHECK_THROWS_AS(read_raw_bundle(bad), ParseError);
    }
}

TEST_CASE("file helpers report unreadable paths") {
    CHECK_THROWS_AS(load_text("/nonexistent/nowhere.grip"), ParseError);
    CHECK_THROWS_AS(save_text("/nonexistent/nowhere.grip", "x"), ParseError);

    const std::string path = "io_test_scratch.grip";
    save_text(path, "#GRIP terrain v1\nterrain 0.25 0\n");
    Terrain t = read_terrain(load_text(path));
    CHECK(t.ground == 0.25);
    std::remove(path.c_str());
}
