#include "grip/fixture.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "grip/calib.hpp"
#include "grip/dyn.hpp"
#include "grip/errors.hpp"

namespace grip {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Joint rows of the 24-joint tree used by the pose scripts.
constexpr int kLHip = 1, kRHip = 2;
constexpr int kLKnee = 4, kRKnee = 5;
constexpr int kLAnkle = 7, kRAnkle = 8;
constexpr int kLShoulder = 16, kRShoulder = 17;
constexpr int kLElbow = 18, kRElbow = 19;

struct PoseTrack {
    std::vector<Vec3> root_pos;
    std::vector<Rotation> root_rot;
    std::vector<std::vector<Rotation>> local;  // [frame][joint], row 0 unused
};

// Forward kinematics of every scripted frame; zero velocities.
std::vector<SimState> track_states(const PoseTrack& track) {
    Simulation sim(HumanoidModel::standard(), Terrain{});
    std::vector<SimState> states;
    states.reserve(track.root_pos.size());
    for (size_t t = 0; t < track.root_pos.size(); ++t) {
        sim.set_pose(track.root_pos[t], track.root_rot[t], track.local[t]);
        states.push_back(sim.state());
    }
    return states;
}

// Ground truth from FK states: root-centered positions, global joint angles,
// and backward-difference key-joint velocities (zero at the first frame).
std::vector<KinematicEstimate> truth_estimates(const std::vector<SimState>& states, double dt) {
    std::vector<KinematicEstimate> out;
    out.reserve(states.size());
    for (size_t t = 0; t < states.size(); ++t) {
        const SimState& s = states[t];
        KinematicEstimate e;
        Vec3 root = s.joint_pos.row(0).transpose();
        e.p = s.joint_pos.rowwise() - root.transpose();
        for (int i = 0; i < int(body::kLeafJoints.size()); ++i) {
            e.p_leaf.row(i) = e.p.row(body::kLeafJoints[size_t(i)]);
        }
        for (int j = 0; j < body::kNumJoints; ++j) {
            e.set_joint_rotation(j, s.joint_rot[size_t(j)]);
        }
        if (t > 0) {
            for (int i = 0; i < int(body::kKeyJoints.size()); ++i) {
                int j = body::kKeyJoints[size_t(i)];
                e.v_key.row(i) =
                    (states[t].joint_pos.row(j) - states[t - 1].joint_pos.row(j)) / dt;
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

// Virtual calibrated IMUs at the four attachment joints.
std::vector<std::array<SiteImuFrame, kNumImuSites>> site_imu(
    const std::vector<SimState>& states, double dt) {
    std::vector<std::array<SiteImuFrame, kNumImuSites>> per_frame(states.size());
    for (int k = 0; k < kNumImuSites; ++k) {
        int joint = body::kImuJoints[size_t(k)];
        std::vector<Rotation> orient;
        TimeSeries3 pos;
        pos.dt = dt;
        for (const SimState& s : states) {
            orient.push_back(s.joint_rot[size_t(joint)]);
            pos.samples.push_back(s.joint_pos.row(joint).transpose());
        }
        CalibratedImuStream stream = synthesize_imu(orient, pos);
        for (size_t t = 0; t < states.size(); ++t) {
            per_frame[t][size_t(k)] =
                SiteImuFrame{SensorSite(k), stream.joint_orientation_g[t], stream.accel_g[t]};
        }
    }
    return per_frame;
}

// Spreads one foot's load over the 16 cells: `rear_share` of it across the
// rear half (y < 0), the rest across the forefoot.
void load_foot(PressureFrame& frame, const InsoleProfile& profile, int foot, double total,
               double rear_share) {
    for (int c = 0; c < 16; ++c) {
        bool rear = profile.cell_positions[size_t(foot)][size_t(c)].y() < 0.0;
        double region = rear ? total * rear_share : total * (1.0 - rear_share);
        frame.cells[size_t(foot)][size_t(c)] = region / 8.0;  // 8 cells per region
    }
}

// Assembles a full sequence from scripted poses and per-frame foot loads.
SequenceData assemble(const PoseTrack& track, const std::vector<Vec2>& foot_load,
                      const std::vector<Vec2>& rear_share, const std::string& subject) {
    std::vector<SimState> states = track_states(track);
    std::vector<std::array<SiteImuFrame, kNumImuSites>> imu = site_imu(states, kFrameDt);
    InsoleProfile profile = InsoleProfile::default_grid();

    SequenceData seq;
    seq.subject = subject;
    seq.truth_kin = truth_estimates(states, kFrameDt);
    for (size_t t = 0; t < states.size(); ++t) {
        PressureFrame frame;
        load_foot(frame, profile, 0, foot_load[t][0], rear_share[t][0]);
        load_foot(frame, profile, 1, foot_load[t][1], rear_share[t][1]);
        InsoleFeatures feats = extract_features(frame, profile);
        seq.sensors.push_back(build_sensor_observation(imu[t], feats));

        seq.truth_motion.joint_pos.push_back(states[t].joint_pos);
        seq.truth_motion.joint_rot.push_back(states[t].joint_rot);
        seq.truth_motion.contact.push_back(feats.contact);
        seq.truth_motion.vgrf.push_back(Vec2(feats.grf[0], feats.grf[1]));
    }
    return seq;
}

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

// Root height that grounds the neutral T-pose exactly.
double tpose_root_height(const HumanoidModel& model) {
    KinematicEstimate tpose;
    for (int j = 0; j < body::kNumJoints; ++j) tpose.set_joint_rotation(j, Rotation());
    return grounded_root_height(model, Terrain{}, tpose, Vec2::Zero());
}

// Standing script: grounded T-pose, arms swinging in the frontal plane.
// `sway_start` delays the sway (with a 1 s ramp) so a prologue stays static.
PoseTrack standing_track(std::mt19937_64& rng, int frames, int sway_start) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double freq = 0.3 + 0.2 * u01(rng);            // Hz
    double amp = 0.10 + 0.08 * u01(rng);           // rad
    double phase = kTau * u01(rng);
    double elbow_amp = 0.4 * amp;

    PoseTrack track;
    HumanoidModel model = HumanoidModel::standard();
    double root_z = tpose_root_height(model);
    for (int t = 0; t < frames; ++t) {
        double ramp = smoothstep((t - sway_start) / 100.0);
        double a = ramp * amp * std::sin(kTau * freq * t * kFrameDt + phase);
        double b = ramp * elbow_amp * std::sin(kTau * freq * t * kFrameDt + phase + kTau / 4);
        std::vector<Rotation> local(body::kNumJoints);
        local[kLShoulder] = Rotation::rot_y(a);
        local[kRShoulder] = Rotation::rot_y(-a);
        local[kLElbow] = Rotation::rot_z(b);
        local[kRElbow] = Rotation::rot_z(-b);
        track.root_pos.push_back(Vec3(0.0, 0.0, root_z));
        track.root_rot.push_back(Rotation());
        track.local.push_back(std::move(local));
    }
    return track;
}

}  // namespace

SequenceData standing_fixture(uint64_t seed, int frames) {
    if (frames < 3) throw SequenceTooShort("a fixture needs at least 3 frames");
    std::mt19937_64 rng(seed);
    PoseTrack track = standing_track(rng, frames, 0);

    double half_weight = HumanoidModel::standard().total_mass() * 9.81 / 2.0;
    std::vector<Vec2> load(size_t(frames), Vec2(half_weight, half_weight));
    std::vector<Vec2> rear(size_t(frames), Vec2(0.5, 0.5));
    return assemble(track, load, rear, "standing");
}

SequenceData gait_fixture(uint64_t seed, int frames) {
    if (frames < 3) throw SequenceTooShort("a fixture needs at least 3 frames");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double stride = 0.8 + 0.4 * u01(rng);   // Hz
    double speed = 0.8 + 0.4 * u01(rng);    // m/s
    double phase = kTau * u01(rng);
    double hip_amp = 0.30 + 0.10 * u01(rng);
    double knee_amp = 0.35 + 0.15 * u01(rng);
    double arm_amp = 0.20 + 0.10 * u01(rng);

    PoseTrack track;
    HumanoidModel model = HumanoidModel::standard();
    double root_z = tpose_root_height(model);
    double weight = model.total_mass() * 9.81;
    std::vector<Vec2> load, rear;
    for (int t = 0; t < frames; ++t) {
        double p = kTau * stride * t * kFrameDt + phase;
        double s = std::sin(p);
        std::vector<Rotation> local(body::kNumJoints);
        local[kLHip] = Rotation::rot_x(hip_amp * s);
        local[kRHip] = Rotation::rot_x(-hip_amp * s);
        // Knees flex while their leg swings forward, half a cycle apart.
        local[kLKnee] = Rotation::rot_x(knee_amp * std::max(0.0, std::sin(p - kTau / 4)));
        local[kRKnee] = Rotation::rot_x(knee_amp * std::max(0.0, std::sin(p + kTau / 4)));
        // Ankles counter-rotate to keep the feet roughly level.
        local[kLAnkle] = Rotation::rot_x(-0.5 * hip_amp * s);
        local[kRAnkle] = Rotation::rot_x(0.5 * hip_amp * s);
        local[kLShoulder] = Rotation::rot_x(-arm_amp * s);
        local[kRShoulder] = Rotation::rot_x(arm_amp * s);
        track.root_pos.push_back(
            Vec3(0.0, speed * t * kFrameDt, root_z + 0.01 * std::cos(2.0 * p)));
        track.root_rot.push_back(Rotation());
        track.local.push_back(std::move(local));

        // Load rolls to the stance side, leaving short flight windows on the
        // swing side; within a stance it rolls rear to fore.
        double wl = std::clamp(0.5 - 0.8 * s, 0.0, 1.0);
        double wr = std::clamp(0.5 + 0.8 * s, 0.0, 1.0);
        double sum = wl + wr;
        load.push_back(Vec2(weight * wl / sum, weight * wr / sum));
        rear.push_back(Vec2(0.5 + 0.4 * std::cos(p), 0.5 - 0.4 * std::cos(p)));
    }
    return assemble(track, load, rear, "gait");
}

SyncInput jump_fixture(uint64_t seed, int frames, std::span<const int> planted_offsets) {
    int max_mag = 0;
    for (int o : planted_offsets) max_mag = std::max(max_mag, std::abs(o));
    int margin = max_mag + 40;
    if (frames < 2 * margin + 60) {
        throw DegenerateInput("jump fixture too short for the planted offsets");
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> jitter(-10, 10);
    std::uniform_real_distribution<double> amp_d(16.0, 24.0);

    // Three pulses, evenly spread with a little jitter, on a quiet baseline.
    std::vector<double> base(size_t(frames), 0.0);
    int span = frames - 2 * margin;
    for (int k = 0; k < 3; ++k) {
        int center = margin + span * (2 * k + 1) / 6 + jitter(rng);
        double amp = amp_d(rng);
        for (int t = std::max(0, center - 15); t < std::min(frames, center + 16); ++t) {
            double d = t - center;
            base[size_t(t)] += amp * std::exp(-d * d / 30.0);
        }
    }

    SyncInput data;
    data.reference = base;
    for (int o : planted_offsets) {
        std::vector<double> shifted(size_t(frames), 0.0);
        for (int t = 0; t < frames; ++t) {
            int src = t - o;
            if (src >= 0 && src < frames) shifted[size_t(t)] = base[size_t(src)];
        }
        data.series.push_back(std::move(shifted));
    }
    return data;
}

RawBundle raw_fixture(uint64_t seed, int frames) {
    constexpr int kFloorEnd = 150, kTposeEnd = 300;
    if (frames < 400) throw SequenceTooShort("raw fixture needs at least 400 frames");
    std::mt19937_64 rng(seed);

    // Truth: static T-pose through the calibration prologue, then arm sway.
    PoseTrack track = standing_track(rng, frames, kTposeEnd);
    std::vector<SimState> states = track_states(track);

    RawBundle bundle;
    bundle.subject = "raw";
    bundle.truth_kin = truth_estimates(states, kFrameDt);
    for (const SimState& s : states) {
        bundle.truth_motion.joint_pos.push_back(s.joint_pos);
        bundle.truth_motion.joint_rot.push_back(s.joint_rot);
    }

    auto random_rot = [&rng]() {
        std::normal_distribution<double> g(0.0, 1.0);
        Quat q(g(rng), g(rng), g(rng), g(rng));
        return Rotation::from_quaternion(q);
    };

    std::vector<std::array<SiteImuFrame, kNumImuSites>> imu = site_imu(states, kFrameDt);
    for (int k = 0; k < kNumImuSites; ++k) {
        std::vector<Rotation> joint_g;
        std::vector<Vec3> accel_g;
        for (int t = 0; t < frames; ++t) {
            joint_g.push_back(imu[size_t(t)][size_t(k)].orientation);
            accel_g.push_back(imu[size_t(t)][size_t(k)].accel);
        }

        RawDevice dev;
        dev.tpose_window = {kFloorEnd + 10, kTposeEnd - 10};
        dev.tpose_joint_global = joint_g[size_t(kFloorEnd + 10)];
        if (k < 2) {  // wrists: 9-DoF watch/strap behind a vendor frame
            dev.kind = k == 0 ? DeviceKind::watch : DeviceKind::strap;
            dev.floor_window = {10, kFloorEnd - 10};
            dev.mounting = random_rot();
            Rotation ref_r_to_g = random_rot();
            // Device flat on the floor in the agreed pose, then worn.
            RawImuStream floor;
            floor.orientation_r.assign(kFloorEnd, ref_r_to_g.inverse());
            floor.gyro.assign(kFloorEnd, Vec3::Zero());
            floor.accel.assign(kFloorEnd, -gravity_vector());
            std::vector<Rotation> worn_rot(joint_g.begin() + kFloorEnd, joint_g.end());
            std::vector<Vec3> worn_acc(accel_g.begin() + kFloorEnd, accel_g.end());
            dev.stream =
                synthesize_raw_watch_strap(worn_rot, worn_acc, ref_r_to_g, dev.mounting);
            dev.stream.orientation_r.insert(dev.stream.orientation_r.begin(),
                                            floor.orientation_r.begin(),
                                            floor.orientation_r.end());
            dev.stream.gyro.insert(dev.stream.gyro.begin(), floor.gyro.begin(),
                                   floor.gyro.end());
            dev.stream.accel.insert(dev.stream.accel.begin(), floor.accel.begin(),
                                    floor.accel.end());
        } else {  // feet: 6-DoF insoles, worn the whole time
            Side side = k == 2 ? Side::left : Side::right;
            dev.kind = k == 2 ? DeviceKind::insole_left : DeviceKind::insole_right;
            dev.mounting = random_rot();
            dev.stream = synthesize_raw_insole(joint_g, accel_g, side, dev.mounting);
        }
        dev.stream.device_kind = dev.kind;
        bundle.devices.push_back(std::move(dev));
    }

    double half_weight = HumanoidModel::standard().total_mass() * 9.81 / 2.0;
    InsoleProfile profile = InsoleProfile::default_grid();
    for (int t = 0; t < frames; ++t) {
        PressureFrame frame;
        load_foot(frame, profile, 0, half_weight, 0.5);
        load_foot(frame, profile, 1, half_weight, 0.5);
        bundle.pressure.push_back(frame);
    }
    return bundle;
}

}  // namespace grip
