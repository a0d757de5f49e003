#include "grip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "grip/errors.hpp"

namespace grip {

namespace {

constexpr std::array<int, 2> kFootJoints = {10, 11};

void check_pair(const MotionSequence& pred, const MotionSequence& gt) {
    pred.validate();
    gt.validate();
    if (pred.size() != gt.size()) {
        throw LengthMismatch("prediction and ground truth must have the same frame count");
    }
}

// Mean over frames and joints of per-joint position error, in metres, after
// applying `adjust` to each frame pair.
template <typename Adjust>
double mean_position_error(const MotionSequence& pred, const MotionSequence& gt, Adjust adjust) {
    check_pair(pred, gt);
    double sum = 0.0;
    for (int f = 0; f < pred.size(); ++f) {
        Eigen::Matrix<double, 24, 3> a = pred.joint_pos[size_t(f)];
        Eigen::Matrix<double, 24, 3> b = gt.joint_pos[size_t(f)];
        adjust(a, b);
        sum += (a - b).rowwise().norm().mean();
    }
    return sum / double(pred.size());
}

}  // namespace

void MotionSequence::validate() const {
    if (joint_pos.empty()) throw LengthMismatch("motion sequence has no frames");
    auto check = [&](size_t n, const char* what) {
        if (n != 0 && n != joint_pos.size()) throw LengthMismatch(what);
    };
    check(joint_rot.size(), "rotation series length disagrees with positions");
    check(contact.size(), "contact series length disagrees with positions");
    check(vgrf.size(), "force series length disagrees with positions");
}

double mpjpe(const MotionSequence& pred, const MotionSequence& gt) {
    return 1000.0 * mean_position_error(pred, gt, [](auto&, auto&) {});
}

double pel_mpjpe(const MotionSequence& pred, const MotionSequence& gt) {
    return 1000.0 * mean_position_error(pred, gt, [](auto& a, auto& b) {
               a.rowwise() -= a.row(body::kRoot).eval();
               b.rowwise() -= b.row(body::kRoot).eval();
           });
}

double pa_mpjpe(const MotionSequence& pred, const MotionSequence& gt) {
    return 1000.0 * mean_position_error(pred, gt, [](auto& a, const auto& b) {
               std::array<Vec3, 24> src, dst;
               for (int j = 0; j < 24; ++j) {
                   src[size_t(j)] = a.row(j).transpose();
                   dst[size_t(j)] = b.row(j).transpose();
               }
               SimilarityTransform t = umeyama_align(src, dst, true);
               for (int j = 0; j < 24; ++j) {
                   a.row(j) = t.apply(src[size_t(j)]).transpose();
               }
           });
}

double mpjre(const MotionSequence& pred, const MotionSequence& gt) {
    check_pair(pred, gt);
    if (pred.joint_rot.empty() || gt.joint_rot.empty()) {
        throw LengthMismatch("rotation error needs rotations on both sequences");
    }
    double sum = 0.0;
    for (int f = 0; f < pred.size(); ++f) {
        for (int j = 0; j < body::kNumJoints; ++j) {
            sum += geodesic_angle(pred.joint_rot[size_t(f)][size_t(j)],
                                  gt.joint_rot[size_t(f)][size_t(j)]);
        }
    }
    return sum / double(pred.size() * body::kNumJoints) * 180.0 / std::numbers::pi;
}

double accel_error(const MotionSequence& pred, const MotionSequence& gt) {
    check_pair(pred, gt);
    double sum = 0.0;
    for (int j = 0; j < body::kNumJoints; ++j) {
        TimeSeries3 a{{}, pred.dt}, b{{}, gt.dt};
        a.samples.reserve(size_t(pred.size()));
        b.samples.reserve(size_t(gt.size()));
        for (int f = 0; f < pred.size(); ++f) {
            a.samples.push_back(pred.joint_pos[size_t(f)].row(j).transpose());
            b.samples.push_back(gt.joint_pos[size_t(f)].row(j).transpose());
        }
        TimeSeries3 aa = finite_diff_accel(a), ba = finite_diff_accel(b);
        for (int f = 0; f < pred.size(); ++f) {
            sum += (aa.samples[size_t(f)] - ba.samples[size_t(f)]).norm();
        }
    }
    return sum / double(pred.size() * body::kNumJoints);
}

double foot_sliding(const MotionSequence& seq) {
    seq.validate();
    if (seq.contact.empty()) return 0.0;
    double sum = 0.0;
    int count = 0;
    for (int f = 1; f < seq.size(); ++f) {
        for (int foot = 0; foot < 2; ++foot) {
            const auto& pads = seq.contact[size_t(f)][size_t(foot)];
            if (!pads[0] && !pads[1]) continue;
            int j = kFootJoints[size_t(foot)];
            Vec2 step = (seq.joint_pos[size_t(f)].row(j) - seq.joint_pos[size_t(f) - 1].row(j))
                            .head<2>()
                            .transpose();
            sum += step.norm() / seq.dt;
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / double(count);
}

double foot_penetration(const MotionSequence& seq, const Terrain& terrain) {
    seq.validate();
    double sum = 0.0;
    for (int f = 0; f < seq.size(); ++f) {
        for (int j : kFootJoints) {
            Vec3 p = seq.joint_pos[size_t(f)].row(j).transpose();
            sum += std::max(0.0, terrain.height_at(p.x(), p.y()) - p.z());
        }
    }
    return 1000.0 * sum / double(2 * seq.size());
}

double vgrf_error(std::span<const Vec2> pred, std::span<const Vec2> measured) {
    if (pred.size() != measured.size()) {
        throw LengthMismatch("force series must have the same length");
    }
    if (pred.empty()) throw EmptySet("force error needs at least one frame");
    Vec2 sq = Vec2::Zero();
    for (size_t f = 0; f < pred.size(); ++f) {
        sq += (pred[f] - measured[f]).array().square().matrix();
    }
    return (sq / double(pred.size())).cwiseSqrt().mean();
}

double success_rate(std::span<const int> falls_per_rollout) {
    if (falls_per_rollout.empty()) throw EmptySet("success rate needs at least one rollout");
    int ok = 0;
    for (int falls : falls_per_rollout) ok += falls == 0 ? 1 : 0;
    return double(ok) / double(falls_per_rollout.size());
}

MetricReport evaluate_segment(const MotionSequence& pred, const MotionSequence& gt,
                              const Terrain& terrain) {
    check_pair(pred, gt);
    MetricReport r;
    r.mpjpe = mpjpe(pred, gt);
    r.pel_mpjpe = pel_mpjpe(pred, gt);
    r.pa_mpjpe = pa_mpjpe(pred, gt);
    if (!pred.joint_rot.empty() && !gt.joint_rot.empty()) r.mpjre = mpjre(pred, gt);
    r.acc = accel_error(pred, gt);
    r.fs = foot_sliding(pred);
    r.fp = foot_penetration(pred, terrain);
    if (!pred.vgrf.empty() && !gt.vgrf.empty()) r.vgrf = vgrf_error(pred.vgrf, gt.vgrf);
    return r;
}

MetricReport evaluate(const MotionSequence& pred, const MotionSequence& gt,
                      const Terrain& terrain, int segment_frames) {
    check_pair(pred, gt);
    if (segment_frames < 3) throw DegenerateInput("segments need at least 3 frames");

    auto slice = [](const MotionSequence& s, int begin, int count) {
        MotionSequence out;
        out.dt = s.dt;
        auto copy = [&](const auto& src, auto& dst) {
            if (src.empty()) return;
            dst.assign(src.begin() + begin, src.begin() + begin + count);
        };
        copy(s.joint_pos, out.joint_pos);
        copy(s.joint_rot, out.joint_rot);
        copy(s.contact, out.contact);
        copy(s.vgrf, out.vgrf);
        return out;
    };

    MetricReport total;
    total.mpjpe = total.pel_mpjpe = total.pa_mpjpe = 0.0;
    total.mpjre = total.acc = total.fs = total.fp = total.vgrf = 0.0;
    int segments = 0;
    for (int begin = 0; begin < pred.size(); begin += segment_frames) {
        int count = std::min(segment_frames, pred.size() - begin);
        if (count < 3) break;  // too short for acceleration differences
        MetricReport r = evaluate_segment(slice(pred, begin, count), slice(gt, begin, count),
                                          terrain);
        total.mpjpe += r.mpjpe;
        total.pel_mpjpe += r.pel_mpjpe;
        total.pa_mpjpe += r.pa_mpjpe;
        total.mpjre += r.mpjre;
        total.acc += r.acc;
        total.fs += r.fs;
        total.fp += r.fp;
        total.vgrf += r.vgrf;
        ++segments;
    }
    if (segments == 0) throw SequenceTooShort("no segment long enough to evaluate");
    double inv = 1.0 / double(segments);
    total.mpjpe *= inv;
    total.pel_mpjpe *= inv;
    total.pa_mpjpe *= inv;
    total.mpjre *= inv;
    total.acc *= inv;
    total.fs *= inv;
    total.fp *= inv;
    total.vgrf *= inv;
    return total;
}

}  // namespace grip
