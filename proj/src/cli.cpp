#include "grip/cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <iostream>
#include <limits>
#include <numeric>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "grip/fixture.hpp"
#include "grip/io.hpp"

namespace grip {

namespace {

InsoleProfile profile_from(const PipelineConfig& cfg) {
    InsoleProfile profile = InsoleProfile::default_grid();
    profile.contact_threshold = cfg.insole_contact_threshold;
    profile.cop_min_force = cfg.insole_cop_min_force;
    return profile;
}

/// Masks a sensor sequence down to the configured subset. The observation
/// layout carries the four wearable sites; configurations below four keep
/// only the wrists, and the head/pelvis trackers of the 5- and 6-IMU setups
/// have no slot here, so those reduce to the full four.
void apply_sensor_subset(std::vector<SensorObservation>& sensors, const PipelineConfig& cfg) {
    bool feet = cfg.num_imus >= 4;
    if (feet && cfg.use_pressure) return;
    for (SensorObservation& s : sensors) {
        if (!feet) {
            for (int k : {int(SensorSite::foot_left), int(SensorSite::foot_right)}) {
                s.r[size_t(k)] = Rotation();
                s.a[size_t(k)] = Vec3::Zero();
            }
        }
        if (!cfg.use_pressure) s.insole = InsoleFeatures{};
    }
}

}  // namespace

void cmd_calibrate(const std::string& raw_path, const std::string& out_path,
                   const PipelineConfig& cfg) {
    RawBundle bundle = read_raw_bundle(load_text(raw_path));
    if (int(bundle.devices.size()) != kNumImuSites) {
        throw LayoutMismatch("expected 4 device streams (wrist L/R, foot L/R), got " +
                             std::to_string(bundle.devices.size()));
    }

    std::array<CalibratedImuStream, kNumImuSites> cal;
    for (int k = 0; k < kNumImuSites; ++k) {
        const RawDevice& dev = bundle.devices[size_t(k)];
        bool wrist = k < 2;
        DeviceKind foot_kind = k == 2 ? DeviceKind::insole_left : DeviceKind::insole_right;
        bool kind_ok = wrist
                           ? dev.kind == DeviceKind::watch || dev.kind == DeviceKind::strap
                           : dev.kind == foot_kind;
        if (!kind_ok) {
            throw LayoutMismatch("device " + std::to_string(k) +
                                 " does not match its canonical site");
        }
        if (dev.tpose_window.empty()) {
            throw MissingContext("device " + std::to_string(k) + " has no T-pose window");
        }
        if (wrist) {
            if (dev.floor_window.empty()) {
                throw MissingContext("device " + std::to_string(k) + " has no floor window");
            }
            CalibrationContext ctx = make_calibration_context(
                dev.stream, dev.floor_window, dev.tpose_window, dev.tpose_joint_global);
            cal[size_t(k)] = calibrate_watch_strap(dev.stream, ctx);
        } else {
            Side side = k == 2 ? Side::left : Side::right;
            // Run the same deterministic filter the calibration uses and
            // capture its state in the middle of the static T-pose window.
            std::vector<Vec3> gyro_j(dev.stream.size()), accel_j(dev.stream.size());
            for (size_t t = 0; t < dev.stream.size(); ++t) {
                gyro_j[t] = dev.mounting * insole_handedness_gyro(dev.stream.gyro[t], side);
                accel_j[t] = dev.mounting * insole_handedness_accel(dev.stream.accel[t], side);
            }
            int anchor_frame = (dev.tpose_window.begin + dev.tpose_window.end) / 2;
            if (anchor_frame < 0 || anchor_frame >= int(dev.stream.size())) {
                throw MissingContext("device " + std::to_string(k) +
                                     " T-pose window lies outside the stream");
            }
            std::vector<Rotation> vqf = vqf_track(gyro_j, accel_j, dev.stream.dt);
            InsoleTposeAnchor anchor{vqf[size_t(anchor_frame)], dev.tpose_joint_global};
            cal[size_t(k)] = calibrate_insole(dev.stream, side, dev.mounting, anchor);
        }
    }

    size_t n = cal[0].size();
    for (const CalibratedImuStream& c : cal) {
        if (c.size() != n) throw LengthMismatch("calibrated device streams differ in length");
    }
    if (bundle.pressure.size() != n) {
        throw LengthMismatch("pressure frames (" + std::to_string(bundle.pressure.size()) +
                             ") do not match the device streams (" + std::to_string(n) + ")");
    }

    InsoleProfile profile = profile_from(cfg);
    SequenceData out;
    out.subject = bundle.subject;
    out.terrain = bundle.terrain;
    out.truth_kin = bundle.truth_kin;
    out.truth_motion = bundle.truth_motion;
    out.sensors.reserve(n);
    for (size_t t = 0; t < n; ++t) {
        std::array<SiteImuFrame, kNumImuSites> imu;
        for (int k = 0; k < kNumImuSites; ++k) {
            imu[size_t(k)] = SiteImuFrame{SensorSite(k), cal[size_t(k)].joint_orientation_g[t],
                                          cal[size_t(k)].accel_g[t]};
        }
        out.sensors.push_back(
            build_sensor_observation(imu, extract_features(bundle.pressure[t], profile)));
    }
    out.validate();
    save_text(out_path, write_sequence(out));
}

void cmd_sync(const std::string& input_path, const std::string& out_path,
              const PipelineConfig& cfg) {
    SyncInput in = read_sync_input(load_text(input_path));
    if (in.series.empty()) throw MissingContext("sync input carries no series");

    std::vector<CalibratedImuStream> streams(in.series.size());
    for (size_t i = 0; i < in.series.size(); ++i) {
        streams[i].joint_orientation_g.assign(in.series[i].size(), Rotation());
        streams[i].accel_g.reserve(in.series[i].size());
        for (double v : in.series[i]) streams[i].accel_g.push_back(Vec3(0.0, 0.0, v));
    }
    const std::vector<double>& ref = in.reference.empty() ? in.series[0] : in.reference;
    std::vector<std::vector<double>> refs(in.series.size(), ref);

    SyncResult res;
    try {
        res = synchronize(streams, refs, cfg.sync_max_lag);
    } catch (const FlatSignal&) {
        std::cerr << "warning: a series carries no signal to correlate\n";
        throw;
    }
    save_text(out_path, write_offsets(OffsetsData{res.offsets, res.common}));
}

void cmd_estimate(const std::string& seq_path, const std::string& checkpoint_path,
                  const std::string& out_path, const PipelineConfig& cfg) {
    SequenceData seq = read_sequence(load_text(seq_path));
    seq.validate();
    if (seq.size() == 0) throw SequenceTooShort("sequence has no frames");
    if (seq.truth_kin.empty()) {
        throw MissingContext(checkpoint_path.empty()
                                 ? "oracle estimation needs ground-truth kinematics in the "
                                   "sequence"
                                 : "estimator rollout needs the frame-0 ground truth to seed "
                                   "its recurrent state");
    }

    std::vector<SensorObservation> sensors = seq.sensors;
    apply_sensor_subset(sensors, cfg);

    Estimator est;  // must outlive the source below
    EstimateSource source;
    if (checkpoint_path.empty()) {
        source = oracle_estimator(seq.truth_kin, cfg.oracle_noise, cfg.seed);
    } else {
        est = read_checkpoint(load_text(checkpoint_path));
        source = estimator_source(est, std::move(sensors), seq.truth_kin[0]);
    }

    std::vector<KinematicEstimate> frames(size_t(seq.size()));
    for (int t = 0; t < seq.size(); ++t) frames[size_t(t)] = source(t);
    save_text(out_path, write_estimates(frames));
}

void cmd_simulate(const std::string& seq_path, const std::string& est_path,
                  const std::string& model_path, const std::string& terrain_path,
                  const std::string& out_path, const PipelineConfig& cfg) {
    SequenceData seq = read_sequence(load_text(seq_path));
    seq.validate();
    std::vector<KinematicEstimate> est = read_estimates(load_text(est_path));
    if (int(est.size()) != seq.size()) {
        throw LengthMismatch("estimate frames (" + std::to_string(est.size()) +
                             ") do not match the sequence (" + std::to_string(seq.size()) + ")");
    }
    if (est.empty()) throw SequenceTooShort("nothing to simulate");

    HumanoidModel model =
        model_path.empty() ? HumanoidModel::standard() : read_model(load_text(model_path));
    cfg.apply_material(model);
    Terrain terrain =
        terrain_path.empty() ? seq.terrain : read_terrain(load_text(terrain_path));

    bool truth_root = !seq.truth_motion.joint_pos.empty();
    Vec2 start_xy = Vec2::Zero();
    if (truth_root) start_xy = seq.truth_motion.joint_pos[0].row(0).head<2>().transpose();

    EnvConfig env_cfg = cfg.env_config();
    TrackingEnv env(model, terrain, env_cfg);
    env.reset(est[0], start_xy);
    Vec3 root_g = env.simulation().state().joint_pos.row(0).transpose();

    RolloutData out;
    for (int t = 0; t < seq.size(); ++t) {
        if (truth_root) {
            root_g = seq.truth_motion.joint_pos[size_t(t)].row(0).transpose();
        } else if (t > 0) {
            // Backward-difference velocities integrate back to positions.
            root_g += est[size_t(t)].v_key.row(5).transpose() * env_cfg.dt;
        }
        StepResult r = env.step(est[size_t(t)], seq.sensors[size_t(t)], root_g);

        out.motion.joint_pos.push_back(r.state.joint_pos);
        out.motion.joint_rot.push_back(r.state.joint_rot);
        std::array<std::array<bool, 2>, 2> contact{};
        for (int f = 0; f < 2; ++f) {
            bool on = r.vgrf[size_t(f)] >= cfg.insole_contact_threshold;
            contact[size_t(f)] = {on, on};
        }
        out.motion.contact.push_back(contact);
        out.motion.vgrf.push_back(Vec2(r.vgrf[0], r.vgrf[1]));
        out.rewards.push_back(r.reward);
        out.fell.push_back(r.fell ? 1 : 0);
        out.recovered.push_back(r.recovered ? 1 : 0);
        out.terminated.push_back(r.terminated ? 1 : 0);
        if (!r.recovery_segment.empty()) {
            out.recoveries.push_back(RecoveryEvent{t, std::move(r.recovery_segment)});
        }
        if (!truth_root && r.recovered) {
            // The reset teleported the body; restart the integral there.
            root_g = r.state.joint_pos.row(0).transpose();
        }
    }
    out.validate();
    save_text(out_path, write_rollout(out));
}

void cmd_evaluate(const std::string& rollout_path, const std::string& truth_path,
                  const std::string& out_path, const PipelineConfig& cfg) {
    RolloutData roll = read_rollout(load_text(rollout_path));
    SequenceData truth = read_sequence(load_text(truth_path));
    if (truth.truth_motion.joint_pos.empty()) {
        throw MissingContext("evaluation needs ground-truth motion in the sequence file");
    }

    MetricReport report =
        evaluate(roll.motion, truth.truth_motion, truth.terrain, cfg.segment_frames);

    // Success rate over the same segmentation: a segment succeeds when none
    // of its control frames detected a fall.
    std::vector<int> falls;
    int n = int(roll.fell.size());
    for (int begin = 0; begin < n; begin += cfg.segment_frames) {
        int count = std::min(cfg.segment_frames, n - begin);
        if (count < 3) break;
        falls.push_back(std::accumulate(roll.fell.begin() + begin,
                                        roll.fell.begin() + begin + count, 0));
    }
    if (!falls.empty()) report.success_rate = success_rate(falls);

    std::string text = write_metrics(report);
    save_text(out_path, text);
    std::cout << text;
}

void cmd_fixture(const std::string& kind, int frames, const std::string& out_path,
                 const std::string& truth_out_path, const PipelineConfig& cfg) {
    if (kind == "standing") {
        save_text(out_path, write_sequence(standing_fixture(cfg.seed, frames)));
    } else if (kind == "gait") {
        save_text(out_path, write_sequence(gait_fixture(cfg.seed, frames)));
    } else if (kind == "raw") {
        save_text(out_path, write_raw_bundle(raw_fixture(cfg.seed, frames)));
    } else if (kind == "jump") {
        const std::array<int, 4> planted = {10, -5, 0, 25};
        save_text(out_path, write_sync_input(jump_fixture(cfg.seed, frames, planted)));
        if (!truth_out_path.empty()) {
            OffsetsData truth;
            truth.offsets.assign(planted.begin(), planted.end());
            int begin = std::numeric_limits<int>::min();
            int end = std::numeric_limits<int>::max();
            for (int o : planted) {
                begin = std::max(begin, -o);
                end = std::min(end, frames - o);
            }
            truth.common = FrameRange{begin, end};
            save_text(truth_out_path, write_offsets(truth));
        }
    } else {
        throw ConfigError("unknown fixture kind '" + kind +
                          "' (expected standing, gait, jump, or raw)");
    }
}

namespace {

/// Decodes the sensor-subset flag: an IMU count with an optional "+pressure"
/// suffix, e.g. "2", "4+pressure".
void apply_sensors_flag(const std::string& text, PipelineConfig& cfg) {
    std::string_view v = text;
    bool pressure = false;
    if (size_t plus = v.find('+'); plus != std::string_view::npos) {
        std::string_view suffix = v.substr(plus + 1);
        if (suffix != "pressure") {
            throw ConfigError("--sensors suffix '" + std::string(suffix) +
                              "' is not 'pressure'");
        }
        pressure = true;
        v = v.substr(0, plus);
    }
    int count = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), count);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("--sensors count '" + std::string(v) + "' is not an integer");
    }
    cfg.num_imus = count;  // range-checked by validate()
    cfg.use_pressure = pressure;
}

int report(const std::exception& e, int code) {
    std::cerr << "error: " << e.what() << "\n";
    return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"inertial + insole motion reconstruction pipeline", "grip"};
    app.require_subcommand(1);

    std::string config_path, sensors, ablation;
    uint64_t seed = 0;
    int segment_frames = 0;
    CLI::Option* config_opt = app.add_option("--config", config_path, "JSON config file");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "RNG seed override");
    CLI::Option* sensors_opt =
        app.add_option("--sensors", sensors, "IMU subset: {2..6}[+pressure]");
    CLI::Option* ablation_opt =
        app.add_option("--ablation", ablation, "observation feature groups")
            ->check(CLI::IsMember({"OA", "OAV", "OAVJglo", "OAVJrel"}));
    CLI::Option* segment_opt =
        app.add_option("--segment-frames", segment_frames, "evaluation chunk length");

    std::string cal_in, cal_out;
    CLI::App* cal = app.add_subcommand("calibrate", "raw device bundle -> calibrated sequence");
    cal->fallthrough();
    cal->add_option("raw", cal_in, "raw device bundle")->required();
    cal->add_option("-o,--out", cal_out, "output sequence file")->required();

    std::string sync_in, sync_out;
    CLI::App* syn = app.add_subcommand("sync", "vertical-acceleration series -> offset report");
    syn->fallthrough();
    syn->add_option("input", sync_in, "sync input file")->required();
    syn->add_option("-o,--out", sync_out, "output offsets file")->required();

    std::string est_in, est_ckpt, est_out;
    CLI::App* est = app.add_subcommand("estimate", "sequence -> per-frame kinematic estimates");
    est->fallthrough();
    est->add_option("sequence", est_in, "calibrated sequence file")->required();
    est->add_option("--checkpoint", est_ckpt, "estimator checkpoint (omit for the oracle)");
    est->add_option("-o,--out", est_out, "output estimates file")->required();

    std::string sim_in, sim_est, sim_model, sim_terrain, sim_out, policy;
    CLI::App* sim = app.add_subcommand("simulate", "closed-loop tracking rollout");
    sim->fallthrough();
    sim->add_option("sequence", sim_in, "calibrated sequence file")->required();
    sim->add_option("--estimates", sim_est, "kinematic estimates file")->required();
    sim->add_option("--model", sim_model, "body model file (default: built-in humanoid)");
    sim->add_option("--terrain", sim_terrain, "terrain file (default: the sequence's)");
    sim->add_option("-o,--out", sim_out, "output rollout file")->required();
    CLI::Option* policy_opt = sim->add_option("--policy", policy, "pd or zero (unactuated)")
                                  ->check(CLI::IsMember({"pd", "zero"}));

    std::string eval_roll, eval_truth, eval_out;
    CLI::App* eva = app.add_subcommand("evaluate", "rollout vs ground truth -> metric report");
    eva->fallthrough();
    eva->add_option("rollout", eval_roll, "rollout file")->required();
    eva->add_option("truth", eval_truth, "sequence file with ground-truth motion")->required();
    eva->add_option("-o,--out", eval_out, "output metrics file")->required();

    std::string fix_kind, fix_out, fix_truth;
    int fix_frames = 600;
    CLI::App* fix = app.add_subcommand("fixture", "deterministic synthetic data");
    fix->fallthrough();
    fix->add_option("kind", fix_kind, "standing, gait, jump, or raw")->required();
    fix->add_option("--frames", fix_frames, "timeline length (default 600)");
    fix->add_option("-o,--out", fix_out, "output file")->required();
    fix->add_option("--truth", fix_truth, "expected-offsets file (jump only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        PipelineConfig cfg;
        if (config_opt->count() > 0) cfg = config_from_json(load_text(config_path));
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (sensors_opt->count() > 0) apply_sensors_flag(sensors, cfg);
        if (ablation_opt->count() > 0) cfg.ablation = ablation;
        if (segment_opt->count() > 0) cfg.segment_frames = segment_frames;
        if (policy_opt->count() > 0) cfg.policy = policy;
        cfg.validate();

        if (app.got_subcommand(cal)) {
            cmd_calibrate(cal_in, cal_out, cfg);
        } else if (app.got_subcommand(syn)) {
            cmd_sync(sync_in, sync_out, cfg);
        } else if (app.got_subcommand(est)) {
            cmd_estimate(est_in, est_ckpt, est_out, cfg);
        } else if (app.got_subcommand(sim)) {
            cmd_simulate(sim_in, sim_est, sim_model, sim_terrain, sim_out, cfg);
        } else if (app.got_subcommand(eva)) {
            cmd_evaluate(eval_roll, eval_truth, eval_out, cfg);
        } else if (app.got_subcommand(fix)) {
            cmd_fixture(fix_kind, fix_frames, fix_out, fix_truth, cfg);
        }
        return 0;
    } catch (const ParseError& e) {
        return report(e, 2);
    } catch (const ConfigError& e) {
        return report(e, 2);
    } catch (const MissingContext& e) {
        return report(e, 2);
    } catch (const MissingTpose& e) {
        return report(e, 2);
    } catch (const Error& e) {
        return report(e, 1);
    } catch (const std::exception& e) {
        return report(e, 1);
    }
}

}  // namespace grip
