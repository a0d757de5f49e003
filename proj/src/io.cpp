#include "grip/io.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "grip/errors.hpp"

namespace grip {

namespace {

void append_double(std::string& out, double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    out.append(buf, res.ptr);
}

void append_int(std::string& out, long long v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

class Writer {
public:
    explicit Writer(const char* kind) {
        out_ += "#GRIP ";
        out_ += kind;
        out_ += " v1\n";
    }

    Writer& tag(std::string_view t) {
        out_ += t;
        return *this;
    }
    Writer& d(double x) {
        out_ += ' ';
        append_double(out_, x);
        return *this;
    }
    Writer& i(long long v) {
        out_ += ' ';
        append_int(out_, v);
        return *this;
    }
    Writer& s(std::string_view token) {
        if (token.empty() || token.find_first_of(" \t\n") != std::string_view::npos) {
            throw ParseError("file tokens must be non-empty and free of whitespace");
        }
        out_ += ' ';
        out_ += token;
        return *this;
    }
    Writer& rot(const Rotation& r) {
        const Mat3& m = r.matrix();
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col) d(m(row, col));
        }
        return *this;
    }
    Writer& vec(const Vec3& v) { return d(v.x()).d(v.y()).d(v.z()); }
    template <typename Derived>
    Writer& mat(const Eigen::MatrixBase<Derived>& m) {
        for (int r = 0; r < m.rows(); ++r) {
            for (int c = 0; c < m.cols(); ++c) d(m(r, c));
        }
        return *this;
    }
    Writer& nl() {
        out_ += '\n';
        return *this;
    }

    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    Reader(std::string_view text, const char* kind) : text_(text) {
        next_raw();  // the header line is never skipped as a comment
        if (tokens_.size() != 3 || tokens_[0] != "#GRIP" || tokens_[1] != kind ||
            tokens_[2] != "v1") {
            throw ParseError(std::string("expected a '#GRIP ") + kind + " v1' header");
        }
    }

    /// Advances to the next data line and checks its tag and field count.
    /// n_fields < 0 accepts any count.
    void expect(std::string_view tag, int n_fields) {
        if (!next()) {
            throw ParseError("unexpected end of file, expected '" + std::string(tag) + "'");
        }
        if (tokens_[0] != tag) {
            fail("expected '" + std::string(tag) + "', found '" + std::string(tokens_[0]) + "'");
        }
        if (n_fields >= 0 && int(tokens_.size()) - 1 != n_fields) {
            fail("'" + std::string(tag) + "' needs " + std::to_string(n_fields) + " fields");
        }
    }

    void expect_end() {
        if (next()) fail("trailing content after the final record");
    }

    int fields() const { return int(tokens_.size()) - 1; }

    std::string str(int i) const { return std::string(field(i)); }

    double num(int i) const {
        std::string_view t = field(i);
        double v = 0.0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
            fail("not a number: '" + std::string(t) + "'");
        }
        return v;
    }

    long long inum(int i) const {
        std::string_view t = field(i);
        long long v = 0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
            fail("not an integer: '" + std::string(t) + "'");
        }
        return v;
    }

    Rotation rot(int i) const {
        Mat3 m;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m(r, c) = num(i + 3 * r + c);
        }
        try {
            return Rotation::from_matrix(m);
        } catch (const DegenerateInput&) {
            fail("not a valid rotation matrix");
        }
    }

    Vec3 vec(int i) const { return Vec3(num(i), num(i + 1), num(i + 2)); }

    template <typename Derived>
    void mat(int i, Eigen::MatrixBase<Derived>& m) const {
        for (int r = 0; r < m.rows(); ++r) {
            for (int c = 0; c < m.cols(); ++c) m(r, c) = num(i + r * int(m.cols()) + c);
        }
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw ParseError("line " + std::to_string(line_) + ": " + why);
    }

private:
    std::string_view field(int i) const {
        if (i + 1 >= int(tokens_.size())) fail("missing field " + std::to_string(i));
        return tokens_[size_t(i) + 1];
    }

    bool next() {
        while (next_raw()) {
            if (tokens_.empty()) continue;               // blank line
            if (tokens_[0].starts_with('#')) continue;   // annotation
            return true;
        }
        return false;
    }

    bool next_raw() {
        tokens_.clear();
        if (pos_ >= text_.size()) return false;
        size_t end = text_.find('\n', pos_);
        if (end == std::string_view::npos) end = text_.size();
        std::string_view line = text_.substr(pos_, end - pos_);
        pos_ = end + 1;
        ++line_;
        size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
            size_t start = i;
            while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
            if (i > start) tokens_.push_back(line.substr(start, i - start));
        }
        return true;
    }

    std::string_view text_;
    size_t pos_ = 0;
    int line_ = 0;
    std::vector<std::string_view> tokens_;
};

// --- shared sub-blocks ------------------------------------------------------

void write_kin_frame(Writer& w, const KinematicEstimate& e) {
    w.tag("kin_pleaf").mat(e.p_leaf).nl();
    w.tag("kin_p").mat(e.p).nl();
    w.tag("kin_theta").mat(e.theta).nl();
    w.tag("kin_vkey").mat(e.v_key).nl();
}

KinematicEstimate read_kin_frame(Reader& r) {
    KinematicEstimate e;
    r.expect("kin_pleaf", 15);
    r.mat(0, e.p_leaf);
    r.expect("kin_p", 72);
    r.mat(0, e.p);
    r.expect("kin_theta", 144);
    r.mat(0, e.theta);
    r.expect("kin_vkey", 18);
    r.mat(0, e.v_key);
    for (int j = 0; j < body::kNumJoints; ++j) {
        try {
            (void)e.joint_rotation(j);
        } catch (const DegenerateInput&) {
            r.fail("joint angle row " + std::to_string(j) + " does not decode to a rotation");
        }
    }
    return e;
}

void write_terrain_block(Writer& w, const Terrain& t) {
    w.tag("terrain").d(t.ground).i(int(t.boxes.size())).nl();
    for (const TerrainBox& b : t.boxes) {
        w.tag("box").d(b.min_xy.x()).d(b.min_xy.y()).d(b.max_xy.x()).d(b.max_xy.y()).d(b.height);
        w.nl();
    }
}

Terrain read_terrain_block(Reader& r) {
    Terrain t;
    r.expect("terrain", 2);
    t.ground = r.num(0);
    int boxes = int(r.inum(1));
    for (int i = 0; i < boxes; ++i) {
        r.expect("box", 5);
        try {
            t.add_box(Vec2(r.num(0), r.num(1)), Vec2(r.num(2), r.num(3)), r.num(4));
        } catch (const DegenerateInput& e) {
            r.fail(e.what());
        }
    }
    return t;
}

struct TruthFlags {
    bool kin, pos, rot, contact, vgrf;
};

TruthFlags truth_flags(const std::vector<KinematicEstimate>& kin, const MotionSequence& m) {
    return {!kin.empty(), !m.joint_pos.empty(), !m.joint_rot.empty(), !m.contact.empty(),
            !m.vgrf.empty()};
}

void write_truth_header(Writer& w, const TruthFlags& f) {
    w.tag("truth").i(f.kin).i(f.pos).i(f.rot).i(f.contact).i(f.vgrf).nl();
}

TruthFlags read_truth_header(Reader& r) {
    r.expect("truth", 5);
    auto b = [&](int i) {
        long long v = r.inum(i);
        if (v != 0 && v != 1) r.fail("truth flags must be 0 or 1");
        return v == 1;
    };
    return {b(0), b(1), b(2), b(3), b(4)};
}

void write_truth_frame(Writer& w, const TruthFlags& f, const std::vector<KinematicEstimate>& kin,
                       const MotionSequence& m, int i) {
    if (f.kin) write_kin_frame(w, kin[size_t(i)]);
    if (f.pos) w.tag("mot_pos").mat(m.joint_pos[size_t(i)]).nl();
    if (f.rot) {
        w.tag("mot_rot");
        for (const Rotation& rr : m.joint_rot[size_t(i)]) w.rot(rr);
        w.nl();
    }
    if (f.contact) {
        const auto& c = m.contact[size_t(i)];
        w.tag("mot_contact").i(c[0][0]).i(c[0][1]).i(c[1][0]).i(c[1][1]).nl();
    }
    if (f.vgrf) w.tag("mot_vgrf").d(m.vgrf[size_t(i)].x()).d(m.vgrf[size_t(i)].y()).nl();
}

void read_truth_frame(Reader& r, const TruthFlags& f, std::vector<KinematicEstimate>& kin,
                      MotionSequence& m) {
    if (f.kin) kin.push_back(read_kin_frame(r));
    if (f.pos) {
        r.expect("mot_pos", 72);
        Eigen::Matrix<double, 24, 3> p;
        r.mat(0, p);
        m.joint_pos.push_back(p);
    }
    if (f.rot) {
        r.expect("mot_rot", 216);
        std::array<Rotation, 24> rots;
        for (int j = 0; j < 24; ++j) rots[size_t(j)] = r.rot(9 * j);
        m.joint_rot.push_back(rots);
    }
    if (f.contact) {
        r.expect("mot_contact", 4);
        std::array<std::array<bool, 2>, 2> c{};
        for (int k = 0; k < 4; ++k) {
            long long v = r.inum(k);
            if (v != 0 && v != 1) r.fail("contact labels must be 0 or 1");
            c[size_t(k / 2)][size_t(k % 2)] = v == 1;
        }
        m.contact.push_back(c);
    }
    if (f.vgrf) {
        r.expect("mot_vgrf", 2);
        m.vgrf.push_back(Vec2(r.num(0), r.num(1)));
    }
}

const char* device_kind_token(DeviceKind k) {
    switch (k) {
        case DeviceKind::watch: return "watch";
        case DeviceKind::strap: return "strap";
        case DeviceKind::insole_left: return "insole_left";
        case DeviceKind::insole_right: return "insole_right";
        case DeviceKind::headset: return "headset";
    }
    throw ParseError("unknown device kind");
}

DeviceKind parse_device_kind(Reader& r, const std::string& token) {
    if (token == "watch") return DeviceKind::watch;
    if (token == "strap") return DeviceKind::strap;
    if (token == "insole_left") return DeviceKind::insole_left;
    if (token == "insole_right") return DeviceKind::insole_right;
    if (token == "headset") return DeviceKind::headset;
    r.fail("unknown device kind '" + token + "'");
}

}  // namespace

std::string format_double(double x) {
    std::string s;
    append_double(s, x);
    return s;
}

std::string load_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw ParseError("cannot read '" + path + "'");
    return content;
}

void save_text(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    out.write(content.data(), std::streamsize(content.size()));
    if (!out) throw ParseError("cannot write '" + path + "'");
}

// --- sequence ----------------------------------------------------------------

void SequenceData::validate() const {
    auto check = [&](size_t n, const char* what) {
        if (n != 0 && n != sensors.size()) throw LengthMismatch(what);
    };
    check(truth_kin.size(), "kinematic truth length disagrees with the sensors");
    check(truth_motion.joint_pos.size(), "motion positions disagree with the sensors");
    check(truth_motion.joint_rot.size(), "motion rotations disagree with the sensors");
    check(truth_motion.contact.size(), "contact labels disagree with the sensors");
    check(truth_motion.vgrf.size(), "force series disagrees with the sensors");
}

std::string write_sequence(const SequenceData& seq) {
    seq.validate();
    Writer w("sequence");
    w.tag("subject").s(seq.subject).nl();
    w.tag("rate").i(100).nl();
    w.tag("gravity").s("z-up").nl();
    w.tag("devices").s("wrist_l").s("wrist_r").s("foot_l").s("foot_r").s("insoles").nl();
    write_terrain_block(w, seq.terrain);
    TruthFlags f = truth_flags(seq.truth_kin, seq.truth_motion);
    write_truth_header(w, f);
    w.tag("frames").i(seq.size()).nl();
    for (int i = 0; i < seq.size(); ++i) {
        const SensorObservation& s = seq.sensors[size_t(i)];
        w.tag("frame").i(i).nl();
        for (int k = 0; k < kNumImuSites; ++k) {
            w.tag("imu").i(k).rot(s.r[size_t(k)]).vec(s.a[size_t(k)]).nl();
        }
        w.tag("insole");
        for (double v : s.insole.flatten()) w.d(v);
        w.nl();
        write_truth_frame(w, f, seq.truth_kin, seq.truth_motion, i);
    }
    return w.take();
}

SequenceData read_sequence(std::string_view text) {
    Reader r(text, "sequence");
    SequenceData seq;
    r.expect("subject", 1);
    seq.subject = r.str(0);
    r.expect("rate", 1);
    if (r.inum(0) != 100) r.fail("unsupported frame rate (expected 100)");
    r.expect("gravity", 1);
    if (r.str(0) != "z-up") r.fail("unsupported gravity convention");
    r.expect("devices", -1);
    seq.terrain = read_terrain_block(r);
    TruthFlags f = read_truth_header(r);
    r.expect("frames", 1);
    int n = int(r.inum(0));
    if (n < 0) r.fail("negative frame count");
    for (int i = 0; i < n; ++i) {
        r.expect("frame", 1);
        if (r.inum(0) != i) r.fail("frame indices must be consecutive from 0");
        SensorObservation s;
        for (int k = 0; k < kNumImuSites; ++k) {
            r.expect("imu", 13);
            if (r.inum(0) != k) r.fail("sensor sites must appear in canonical order");
            s.r[size_t(k)] = r.rot(1);
            s.a[size_t(k)] = r.vec(10);
        }
        r.expect("insole", 10);
        for (int foot = 0; foot < 2; ++foot) {
            int base = 5 * foot;
            s.insole.grf[size_t(foot)] = r.num(base);
            s.insole.cop[size_t(foot)] = Vec2(r.num(base + 1), r.num(base + 2));
            s.insole.contact[size_t(foot)][0] = r.num(base + 3) != 0.0;
            s.insole.contact[size_t(foot)][1] = r.num(base + 4) != 0.0;
        }
        seq.sensors.push_back(s);
        read_truth_frame(r, f, seq.truth_kin, seq.truth_motion);
    }
    r.expect_end();
    seq.validate();
    return seq;
}

// --- estimates ----------------------------------------------------------------

std::string write_estimates(std::span<const KinematicEstimate> frames) {
    Writer w("estimates");
    w.tag("frames").i(int(frames.size())).nl();
    for (size_t i = 0; i < frames.size(); ++i) {
        w.tag("frame").i(int(i)).nl();
        write_kin_frame(w, frames[i]);
    }
    return w.take();
}

std::vector<KinematicEstimate> read_estimates(std::string_view text) {
    Reader r(text, "estimates");
    r.expect("frames", 1);
    int n = int(r.inum(0));
    std::vector<KinematicEstimate> out;
    out.reserve(size_t(std::max(0, n)));
    for (int i = 0; i < n; ++i) {
        r.expect("frame", 1);
        if (r.inum(0) != i) r.fail("frame indices must be consecutive from 0");
        out.push_back(read_kin_frame(r));
    }
    r.expect_end();
    return out;
}

// --- offsets --------------------------------------------------------------

std::string write_offsets(const OffsetsData& data) {
    Writer w("offsets");
    w.tag("streams").i(int(data.offsets.size())).nl();
    for (size_t i = 0; i < data.offsets.size(); ++i) {
        w.tag("offset").i(int(i)).i(data.offsets[i]).nl();
    }
    w.tag("common").i(data.common.begin).i(data.common.end).nl();
    return w.take();
}

OffsetsData read_offsets(std::string_view text) {
    Reader r(text, "offsets");
    OffsetsData data;
    r.expect("streams", 1);
    int n = int(r.inum(0));
    for (int i = 0; i < n; ++i) {
        r.expect("offset", 2);
        if (r.inum(0) != i) r.fail("stream indices must be consecutive from 0");
        data.offsets.push_back(int(r.inum(1)));
    }
    r.expect("common", 2);
    data.common = {int(r.inum(0)), int(r.inum(1))};
    r.expect_end();
    return data;
}

// --- sync input -------------------------------------------------------------

std::string write_sync_input(const SyncInput& data) {
    Writer w("sync");
    w.tag("streams").i(int(data.series.size())).nl();
    for (size_t i = 0; i < data.series.size(); ++i) {
        w.tag("series").i(int(i)).i(int(data.series[i].size()));
        for (double v : data.series[i]) w.d(v);
        w.nl();
    }
    w.tag("reference").i(int(data.reference.size()));
    for (double v : data.reference) w.d(v);
    w.nl();
    return w.take();
}

SyncInput read_sync_input(std::string_view text) {
    Reader r(text, "sync");
    SyncInput data;
    r.expect("streams", 1);
    int k = int(r.inum(0));
    for (int i = 0; i < k; ++i) {
        r.expect("series", -1);
        if (r.inum(0) != i) r.fail("series indices must be consecutive from 0");
        int n = int(r.inum(1));
        if (r.fields() != n + 2) r.fail("series sample count disagrees with its length field");
        std::vector<double> s;
        s.resize(size_t(n));
        for (int t = 0; t < n; ++t) s[size_t(t)] = r.num(t + 2);
        data.series.push_back(std::move(s));
    }
    r.expect("reference", -1);
    int n = int(r.inum(0));
    if (r.fields() != n + 1) r.fail("reference sample count disagrees with its length field");
    data.reference.resize(size_t(n));
    for (int t = 0; t < n; ++t) data.reference[size_t(t)] = r.num(t + 1);
    r.expect_end();
    return data;
}

// --- rollout -----------------------------------------------------------------

void RolloutData::validate() const {
    motion.validate();
    size_t n = motion.joint_pos.size();
    if (motion.joint_rot.size() != n) throw LengthMismatch("rollout needs rotations per frame");
    if (rewards.size() != n || fell.size() != n || recovered.size() != n ||
        terminated.size() != n) {
        throw LengthMismatch("rollout per-frame series disagree in length");
    }
}

std::string write_rollout(const RolloutData& data) {
    data.validate();
    Writer w("rollout");
    w.tag("frames").i(data.size()).nl();
    for (int i = 0; i < data.size(); ++i) {
        w.tag("frame").i(i).nl();
        w.tag("pos").mat(data.motion.joint_pos[size_t(i)]).nl();
        w.tag("rot");
        for (const Rotation& rr : data.motion.joint_rot[size_t(i)]) w.rot(rr);
        w.nl();
        if (!data.motion.contact.empty()) {
            const auto& c = data.motion.contact[size_t(i)];
            w.tag("contact").i(c[0][0]).i(c[0][1]).i(c[1][0]).i(c[1][1]).nl();
        }
        if (!data.motion.vgrf.empty()) {
            w.tag("vgrf").d(data.motion.vgrf[size_t(i)].x()).d(data.motion.vgrf[size_t(i)].y());
            w.nl();
        }
        const RewardTerms& t = data.rewards[size_t(i)];
        w.tag("reward").d(t.amp).d(t.imitation).d(t.energy).d(t.total).nl();
        w.tag("flags").i(data.fell[size_t(i)]).i(data.recovered[size_t(i)]);
        w.i(data.terminated[size_t(i)]).nl();
    }
    w.tag("recoveries").i(int(data.recoveries.size())).nl();
    for (const RecoveryEvent& ev : data.recoveries) {
        w.tag("recovery").i(ev.frame).i(int(ev.segment.size())).nl();
        for (const KinematicEstimate& e : ev.segment) write_kin_frame(w, e);
    }
    return w.take();
}

RolloutData read_rollout(std::string_view text) {
    Reader r(text, "rollout");
    RolloutData data;
    r.expect("frames", 1);
    int n = int(r.inum(0));
    for (int i = 0; i < n; ++i) {
        r.expect("frame", 1);
        if (r.inum(0) != i) r.fail("frame indices must be consecutive from 0");
        r.expect("pos", 72);
        Eigen::Matrix<double, 24, 3> p;
        r.mat(0, p);
        data.motion.joint_pos.push_back(p);
        r.expect("rot", 216);
        std::array<Rotation, 24> rots;
        for (int j = 0; j < 24; ++j) rots[size_t(j)] = r.rot(9 * j);
        data.motion.joint_rot.push_back(rots);
        r.expect("contact", 4);
        std::array<std::array<bool, 2>, 2> c{};
        for (int k = 0; k < 4; ++k) c[size_t(k / 2)][size_t(k % 2)] = r.inum(k) == 1;
        data.motion.contact.push_back(c);
        r.expect("vgrf", 2);
        data.motion.vgrf.push_back(Vec2(r.num(0), r.num(1)));
        r.expect("reward", 4);
        data.rewards.push_back({r.num(0), r.num(1), r.num(2), r.num(3)});
        r.expect("flags", 3);
        data.fell.push_back(int(r.inum(0)));
        data.recovered.push_back(int(r.inum(1)));
        data.terminated.push_back(int(r.inum(2)));
    }
    r.expect("recoveries", 1);
    int k = int(r.inum(0));
    for (int e = 0; e < k; ++e) {
        r.expect("recovery", 2);
        RecoveryEvent ev;
        ev.frame = int(r.inum(0));
        int len = int(r.inum(1));
        for (int i = 0; i < len; ++i) ev.segment.push_back(read_kin_frame(r));
        data.recoveries.push_back(std::move(ev));
    }
    r.expect_end();
    data.validate();
    return data;
}

// --- metrics --------------------------------------------------------------

std::string write_metrics(const MetricReport& report) {
    Writer w("metrics");
    w.tag("MPJPE[mm]").d(report.mpjpe).nl();
    w.tag("PEL-MPJPE[mm]").d(report.pel_mpjpe).nl();
    w.tag("PA-MPJPE[mm]").d(report.pa_mpjpe).nl();
    w.tag("MPJRE[deg]").d(report.mpjre).nl();
    w.tag("Acc[m/s^2]").d(report.acc).nl();
    w.tag("FS[m/s]").d(report.fs).nl();
    w.tag("FP[mm]").d(report.fp).nl();
    w.tag("vGRF[N]").d(report.vgrf).nl();
    w.tag("Succ.Rate").d(report.success_rate).nl();
    return w.take();
}

MetricReport read_metrics(std::string_view text) {
    Reader r(text, "metrics");
    MetricReport report;
    auto field = [&](const char* tag, double& dst) {
        r.expect(tag, 1);
        dst = r.num(0);
    };
    field("MPJPE[mm]", report.mpjpe);
    field("PEL-MPJPE[mm]", report.pel_mpjpe);
    field("PA-MPJPE[mm]", report.pa_mpjpe);
    field("MPJRE[deg]", report.mpjre);
    field("Acc[m/s^2]", report.acc);
    field("FS[m/s]", report.fs);
    field("FP[mm]", report.fp);
    field("vGRF[N]", report.vgrf);
    field("Succ.Rate", report.success_rate);
    r.expect_end();
    return report;
}

// --- checkpoint -------------------------------------------------------------

std::string write_checkpoint(Estimator& est) {
    Writer w("checkpoint");
    w.tag("hidden").i(est.hidden_width()).nl();
    std::vector<TensorRef> tensors = est.tensors();
    w.tag("tensors").i(int(tensors.size())).nl();
    for (const TensorRef& t : tensors) {
        w.tag("tensor").s(t.name).i(t.rows).i(t.cols).nl();
        w.tag("data");
        for (size_t i = 0; i < t.size(); ++i) w.d(t.data[i]);
        w.nl();
    }
    return w.take();
}

Estimator read_checkpoint(std::string_view text) {
    Reader r(text, "checkpoint");
    r.expect("hidden", 1);
    int hidden = int(r.inum(0));
    if (hidden <= 0) r.fail("hidden width must be positive");
    Estimator est(hidden);
    std::vector<TensorRef> tensors = est.tensors();
    r.expect("tensors", 1);
    if (r.inum(0) != int(tensors.size())) r.fail("tensor count does not match the architecture");
    for (TensorRef& t : tensors) {
        r.expect("tensor", 3);
        if (r.str(0) != t.name) r.fail("expected tensor '" + t.name + "', found '" + r.str(0) + "'");
        if (r.inum(1) != t.rows || r.inum(2) != t.cols) {
            r.fail("tensor '" + t.name + "' has the wrong shape");
        }
        r.expect("data", int(t.size()));
        for (size_t i = 0; i < t.size(); ++i) t.data[i] = r.num(int(i));
    }
    r.expect_end();
    return est;
}

// --- model ----------------------------------------------------------------

std::string write_model(const HumanoidModel& model) {
    Writer w("model");
    w.tag("material").d(model.contact_stiffness).d(model.contact_damping).d(model.friction);
    w.i(model.substeps).i(model.fixed_root).nl();
    w.tag("joints").i(model.size()).nl();
    for (int j = 0; j < model.size(); ++j) {
        const JointSpec& s = model.joints[size_t(j)];
        w.tag("joint").i(j).s(s.name).i(s.parent).nl();
        w.tag("geom").vec(s.offset).vec(s.com).d(s.mass).vec(s.inertia).nl();
        w.tag("gains").d(s.kp).d(s.kd).d(s.joint_damping).d(s.torque_limit).nl();
        w.tag("spheres").d(s.contact_radius).i(int(s.contact_points.size()));
        for (const Vec3& p : s.contact_points) w.vec(p);
        w.nl();
    }
    return w.take();
}

HumanoidModel read_model(std::string_view text) {
    Reader r(text, "model");
    HumanoidModel m;
    r.expect("material", 5);
    m.contact_stiffness = r.num(0);
    m.contact_damping = r.num(1);
    m.friction = r.num(2);
    m.substeps = int(r.inum(3));
    m.fixed_root = r.inum(4) == 1;
    r.expect("joints", 1);
    int n = int(r.inum(0));
    for (int j = 0; j < n; ++j) {
        JointSpec s;
        r.expect("joint", 3);
        if (r.inum(0) != j) r.fail("joint indices must be consecutive from 0");
        s.name = r.str(1);
        s.parent = int(r.inum(2));
        if (s.parent < -1 || s.parent >= j) r.fail("joint parents must precede their children");
        r.expect("geom", 10);
        s.offset = r.vec(0);
        s.com = r.vec(3);
        s.mass = r.num(6);
        s.inertia = r.vec(7);
        r.expect("gains", 4);
        s.kp = r.num(0);
        s.kd = r.num(1);
        s.joint_damping = r.num(2);
        s.torque_limit = r.num(3);
        r.expect("spheres", -1);
        s.contact_radius = r.num(0);
        int k = int(r.inum(1));
        if (r.fields() != 2 + 3 * k) r.fail("sphere count disagrees with the coordinate list");
        for (int i = 0; i < k; ++i) s.contact_points.push_back(r.vec(2 + 3 * i));
        m.joints.push_back(std::move(s));
    }
    r.expect_end();
    return m;
}

// --- terrain ----------------------------------------------------------------

std::string write_terrain(const Terrain& terrain) {
    Writer w("terrain");
    write_terrain_block(w, terrain);
    return w.take();
}

Terrain read_terrain(std::string_view text) {
    Reader r(text, "terrain");
    Terrain t = read_terrain_block(r);
    r.expect_end();
    return t;
}

// --- insole profile -----------------------------------------------------------

std::string write_profile(const InsoleProfile& profile) {
    Writer w("profile");
    w.tag("thresholds").d(profile.contact_threshold).d(profile.cop_min_force).nl();
    for (int foot = 0; foot < 2; ++foot) {
        w.tag("cells").i(foot);
        for (const Vec2& p : profile.cell_positions[size_t(foot)]) w.d(p.x()).d(p.y());
        w.nl();
    }
    return w.take();
}

InsoleProfile read_profile(std::string_view text) {
    Reader r(text, "profile");
    InsoleProfile p;
    r.expect("thresholds", 2);
    p.contact_threshold = r.num(0);
    p.cop_min_force = r.num(1);
    for (int foot = 0; foot < 2; ++foot) {
        r.expect("cells", 33);
        if (r.inum(0) != foot) r.fail("cell blocks must list the left foot first");
        for (int c = 0; c < 16; ++c) {
            p.cell_positions[size_t(foot)][size_t(c)] = Vec2(r.num(1 + 2 * c), r.num(2 + 2 * c));
        }
    }
    r.expect_end();
    return p;
}

// --- raw bundle ---------------------------------------------------------------

std::string write_raw_bundle(const RawBundle& bundle) {
    Writer w("raw");
    w.tag("subject").s(bundle.subject).nl();
    int frames = bundle.devices.empty() ? 0 : int(bundle.devices[0].stream.size());
    for (const RawDevice& d : bundle.devices) {
        if (int(d.stream.size()) != frames) {
            throw LengthMismatch("raw device streams disagree in length");
        }
        if (!d.stream.orientation_r.empty() &&
            d.stream.orientation_r.size() != d.stream.gyro.size()) {
            throw LengthMismatch("raw orientations disagree with the gyro series");
        }
        if (d.stream.gyro.size() != d.stream.accel.size()) {
            throw LengthMismatch("raw gyro and accelerometer series disagree");
        }
    }
    if (!bundle.pressure.empty() && int(bundle.pressure.size()) != frames) {
        throw LengthMismatch("pressure frames disagree with the device streams");
    }
    w.tag("frames").i(frames).nl();
    write_terrain_block(w, bundle.terrain);
    TruthFlags f = truth_flags(bundle.truth_kin, bundle.truth_motion);
    write_truth_header(w, f);
    w.tag("pressure").i(!bundle.pressure.empty()).nl();
    w.tag("devices").i(int(bundle.devices.size())).nl();
    for (size_t i = 0; i < bundle.devices.size(); ++i) {
        const RawDevice& d = bundle.devices[i];
        w.tag("device").i(int(i)).s(device_kind_token(d.kind));
        w.i(d.floor_window.begin).i(d.floor_window.end);
        w.i(d.tpose_window.begin).i(d.tpose_window.end);
        w.i(!d.stream.orientation_r.empty()).nl();
        w.tag("tpose_joint").rot(d.tpose_joint_global).nl();
        w.tag("mount").rot(d.mounting).nl();
    }
    for (int t = 0; t < frames; ++t) {
        w.tag("frame").i(t).nl();
        for (size_t i = 0; i < bundle.devices.size(); ++i) {
            const RawDevice& d = bundle.devices[i];
            w.tag("raw").i(int(i));
            if (!d.stream.orientation_r.empty()) w.rot(d.stream.orientation_r[size_t(t)]);
            w.vec(d.stream.gyro[size_t(t)]).vec(d.stream.accel[size_t(t)]).nl();
        }
        if (!bundle.pressure.empty()) {
            w.tag("cells");
            for (int foot = 0; foot < 2; ++foot) {
                for (double v : bundle.pressure[size_t(t)].cells[size_t(foot)]) w.d(v);
            }
            w.nl();
        }
        write_truth_frame(w, f, bundle.truth_kin, bundle.truth_motion, t);
    }
    return w.take();
}

RawBundle read_raw_bundle(std::string_view text) {
    Reader r(text, "raw");
    RawBundle bundle;
    r.expect("subject", 1);
    bundle.subject = r.str(0);
    r.expect("frames", 1);
    int frames = int(r.inum(0));
    bundle.terrain = read_terrain_block(r);
    TruthFlags f = read_truth_header(r);
    r.expect("pressure", 1);
    bool has_pressure = r.inum(0) == 1;
    r.expect("devices", 1);
    int k = int(r.inum(0));
    std::vector<bool> has_orient;
    for (int i = 0; i < k; ++i) {
        r.expect("device", 7);
        if (r.inum(0) != i) r.fail("device indices must be consecutive from 0");
        RawDevice d;
        d.kind = parse_device_kind(r, r.str(1));
        d.stream.device_kind = d.kind;
        d.floor_window = {int(r.inum(2)), int(r.inum(3))};
        d.tpose_window = {int(r.inum(4)), int(r.inum(5))};
        has_orient.push_back(r.inum(6) == 1);
        r.expect("tpose_joint", 9);
        d.tpose_joint_global = r.rot(0);
        r.expect("mount", 9);
        d.mounting = r.rot(0);
        bundle.devices.push_back(std::move(d));
    }
    for (int t = 0; t < frames; ++t) {
        r.expect("frame", 1);
        if (r.inum(0) != t) r.fail("frame indices must be consecutive from 0");
        for (int i = 0; i < k; ++i) {
            RawDevice& d = bundle.devices[size_t(i)];
            r.expect("raw", has_orient[size_t(i)] ? 16 : 7);
            if (r.inum(0) != i) r.fail("device records must appear in order");
            int base = 1;
            if (has_orient[size_t(i)]) {
                d.stream.orientation_r.push_back(r.rot(1));
                base = 10;
            }
            d.stream.gyro.push_back(r.vec(base));
            d.stream.accel.push_back(r.vec(base + 3));
        }
        if (has_pressure) {
            r.expect("cells", 32);
            PressureFrame p;
            for (int c = 0; c < 32; ++c) p.cells[size_t(c / 16)][size_t(c % 16)] = r.num(c);
            bundle.pressure.push_back(p);
        }
        read_truth_frame(r, f, bundle.truth_kin, bundle.truth_motion);
    }
    r.expect_end();
    return bundle;
}

}  // namespace grip
