#include "grip/kinnet.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace grip {

namespace {

constexpr int kObsWidth = SensorObservation::kFlatWidth;

template <int R, int C>
VecX flatten_rm(const Eigen::Matrix<double, R, C>& m) {
    VecX v(R * C);
    for (int r = 0; r < R; ++r) {
        for (int c = 0; c < C; ++c) v(r * C + c) = m(r, c);
    }
    return v;
}

template <int R, int C>
void unflatten_rm(const VecX& v, Eigen::Matrix<double, R, C>& m) {
    for (int r = 0; r < R; ++r) {
        for (int c = 0; c < C; ++c) m(r, c) = v(r * C + c);
    }
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

VecX obs_vector(const SensorObservation& obs) {
    std::array<double, kObsWidth> flat = obs.flatten();
    return Eigen::Map<const VecX>(flat.data(), kObsWidth);
}

// One gated-cell step; optionally records activations for backprop.
VecX cell_step(const LstmStage& s, const VecX& x, VecX& h, VecX& c, StageTrace* trace) {
    const int H = s.hidden_width;
    VecX z = s.w_x * x + s.w_h * h + s.b;
    VecX gi(H), gf(H), gg(H), go(H);
    for (int k = 0; k < H; ++k) {
        gi(k) = sigmoid(z(k));
        gf(k) = sigmoid(z(H + k));
        gg(k) = std::tanh(z(2 * H + k));
        go(k) = sigmoid(z(3 * H + k));
    }
    c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
    VecX hc = c.array().tanh();
    h = go.cwiseProduct(hc);
    if (trace) {
        trace->x.push_back(x);
        trace->gi.push_back(gi);
        trace->gf.push_back(gf);
        trace->gg.push_back(gg);
        trace->go.push_back(go);
        trace->c.push_back(c);
        trace->hc.push_back(hc);
        trace->h.push_back(h);
    }
    return s.w_out * h + s.b_out;
}

}  // namespace

Rotation KinematicEstimate::joint_rotation(int joint) const {
    Rot6D v{theta.row(joint).head<3>().transpose(), theta.row(joint).tail<3>().transpose()};
    return matrix_from_rot6d(v);
}

void KinematicEstimate::set_joint_rotation(int joint, const Rotation& r) {
    Rot6D v = rot6d_from_matrix(r);
    theta.row(joint).head<3>() = v.a.transpose();
    theta.row(joint).tail<3>() = v.b.transpose();
}

double kin_loss(const KinematicEstimate& pred, const KinematicEstimate& truth) {
    return (pred.p_leaf - truth.p_leaf).squaredNorm() / KinematicEstimate::kPLeafWidth +
           (pred.p - truth.p).squaredNorm() / KinematicEstimate::kPWidth +
           (pred.theta - truth.theta).squaredNorm() / KinematicEstimate::kThetaWidth +
           (pred.v_key - truth.v_key).squaredNorm() / KinematicEstimate::kVKeyWidth;
}

double kin_loss(std::span<const KinematicEstimate> pred,
                std::span<const KinematicEstimate> truth) {
    if (pred.size() != truth.size()) throw LengthMismatch("prediction/truth length mismatch");
    if (pred.empty()) throw SequenceTooShort("kin_loss over an empty sequence");
    double sum = 0.0;
    for (size_t t = 0; t < pred.size(); ++t) sum += kin_loss(pred[t], truth[t]);
    return sum / double(pred.size());
}

LstmStage LstmStage::zeros(int input, int hidden, int output, int target) {
    LstmStage s;
    s.input_width = input;
    s.hidden_width = hidden;
    s.output_width = output;
    s.target_width = target;
    s.w_x = MatX::Zero(4 * hidden, input);
    s.w_h = MatX::Zero(4 * hidden, hidden);
    s.b = VecX::Zero(4 * hidden);
    s.w_out = MatX::Zero(output, hidden);
    s.b_out = VecX::Zero(output);
    s.w_h0 = MatX::Zero(hidden, target);
    s.w_c0 = MatX::Zero(hidden, target);
    s.b_h0 = VecX::Zero(hidden);
    s.b_c0 = VecX::Zero(hidden);
    return s;
}

void LstmStage::randomize(std::mt19937_64& rng, double scale) {
    auto fill = [&](MatX& m, int fan_in) {
        std::normal_distribution<double> g(0.0, scale / std::sqrt(double(std::max(1, fan_in))));
        for (int c = 0; c < m.cols(); ++c) {
            for (int r = 0; r < m.rows(); ++r) m(r, c) = g(rng);
        }
    };
    fill(w_x, input_width);
    fill(w_h, hidden_width);
    fill(w_out, hidden_width);
    fill(w_h0, target_width);
    fill(w_c0, target_width);
    b.setZero();
    b.segment(hidden_width, hidden_width).setOnes();  // open forget gates
    b_out.setZero();
    b_h0.setZero();
    b_c0.setZero();
}

void LstmStage::collect_tensors(const std::string& prefix, std::vector<TensorRef>& out) {
    auto add_m = [&](const char* n, MatX& m) {
        out.push_back({prefix + "." + n, m.data(), int(m.rows()), int(m.cols())});
    };
    auto add_v = [&](const char* n, VecX& v) {
        out.push_back({prefix + "." + n, v.data(), int(v.size()), 1});
    };
    add_m("w_x", w_x);
    add_m("w_h", w_h);
    add_v("b", b);
    add_m("w_out", w_out);
    add_v("b_out", b_out);
    add_m("w_h0", w_h0);
    add_v("b_h0", b_h0);
    add_m("w_c0", w_c0);
    add_v("b_c0", b_c0);
}

StageState stage_init(const LstmStage& s, const VecX& target0) {
    if (target0.size() != s.target_width) {
        throw ShapeMismatch("hidden-init target width mismatch");
    }
    return {s.w_h0 * target0 + s.b_h0, s.w_c0 * target0 + s.b_c0};
}

VecX stage_step(const LstmStage& s, const VecX& x, StageState& state) {
    if (x.size() != s.input_width) throw ShapeMismatch("stage input width mismatch");
    if (state.h.size() != s.hidden_width || state.c.size() != s.hidden_width) {
        throw ShapeMismatch("stage hidden width mismatch");
    }
    return cell_step(s, x, state.h, state.c, nullptr);
}

std::vector<VecX> stage_forward(const LstmStage& s, const std::vector<VecX>& xs,
                                const VecX& target0, StageTrace* trace) {
    StageState st = stage_init(s, target0);
    if (trace) {
        trace->target0 = target0;
        trace->h_init = st.h;
        trace->c_init = st.c;
    }
    std::vector<VecX> ys;
    ys.reserve(xs.size());
    for (const VecX& x : xs) {
        if (x.size() != s.input_width) throw ShapeMismatch("stage input width mismatch");
        ys.push_back(cell_step(s, x, st.h, st.c, trace));
    }
    return ys;
}

std::vector<VecX> stage_backward(const LstmStage& s, const StageTrace& trace,
                                 const std::vector<VecX>& dys, LstmStage& grad) {
    const int T = int(trace.x.size());
    const int H = s.hidden_width;
    if (int(dys.size()) != T) throw ShapeMismatch("output-gradient count mismatch");

    std::vector<VecX> dxs(T);
    VecX dh_next = VecX::Zero(H), dc_next = VecX::Zero(H);
    for (int t = T - 1; t >= 0; --t) {
        const VecX& gi = trace.gi[t];
        const VecX& gf = trace.gf[t];
        const VecX& gg = trace.gg[t];
        const VecX& go = trace.go[t];
        const VecX& hc = trace.hc[t];
        const VecX& c_prev = t > 0 ? trace.c[t - 1] : trace.c_init;
        const VecX& h_prev = t > 0 ? trace.h[t - 1] : trace.h_init;

        grad.w_out += dys[t] * trace.h[t].transpose();
        grad.b_out += dys[t];
        VecX dh = s.w_out.transpose() * dys[t] + dh_next;

        VecX d_go = dh.cwiseProduct(hc);
        VecX dc = dh.cwiseProduct(go).cwiseProduct(VecX::Ones(H) - hc.cwiseProduct(hc)) + dc_next;
        VecX d_gi = dc.cwiseProduct(gg);
        VecX d_gg = dc.cwiseProduct(gi);
        VecX d_gf = dc.cwiseProduct(c_prev);
        dc_next = dc.cwiseProduct(gf);

        VecX dz(4 * H);
        dz.segment(0, H) = d_gi.cwiseProduct(gi).cwiseProduct(VecX::Ones(H) - gi);
        dz.segment(H, H) = d_gf.cwiseProduct(gf).cwiseProduct(VecX::Ones(H) - gf);
        dz.segment(2 * H, H) = d_gg.cwiseProduct(VecX::Ones(H) - gg.cwiseProduct(gg));
        dz.segment(3 * H, H) = d_go.cwiseProduct(go).cwiseProduct(VecX::Ones(H) - go);

        grad.w_x += dz * trace.x[t].transpose();
        grad.w_h += dz * h_prev.transpose();
        grad.b += dz;
        dxs[t] = s.w_x.transpose() * dz;
        dh_next = s.w_h.transpose() * dz;
    }
    grad.w_h0 += dh_next * trace.target0.transpose();
    grad.b_h0 += dh_next;
    grad.w_c0 += dc_next * trace.target0.transpose();
    grad.b_c0 += dc_next;
    return dxs;
}

Estimator::Estimator(int hidden_width) : hidden_(hidden_width) {
    stages_[LP] = LstmStage::zeros(kObsWidth, hidden_, KinematicEstimate::kPLeafWidth,
                                   KinematicEstimate::kPLeafWidth);
    stages_[FP] = LstmStage::zeros(kObsWidth + KinematicEstimate::kPLeafWidth, hidden_,
                                   KinematicEstimate::kPWidth, KinematicEstimate::kPWidth);
    stages_[FA] = LstmStage::zeros(kObsWidth + KinematicEstimate::kPWidth, hidden_,
                                   KinematicEstimate::kThetaWidth, KinematicEstimate::kThetaWidth);
    stages_[KV] = LstmStage::zeros(kObsWidth + KinematicEstimate::kPWidth, hidden_,
                                   KinematicEstimate::kVKeyWidth, KinematicEstimate::kVKeyWidth);
}

Estimator::Estimator(int hidden_width, std::mt19937_64& rng, double init_scale)
    : Estimator(hidden_width) {
    for (LstmStage& s : stages_) s.randomize(rng, init_scale);
}

Estimator::Hidden Estimator::init_hidden(const KinematicEstimate& first_frame_truth) const {
    Hidden h;
    h.state[LP] = stage_init(stages_[LP], flatten_rm(first_frame_truth.p_leaf));
    h.state[FP] = stage_init(stages_[FP], flatten_rm(first_frame_truth.p));
    h.state[FA] = stage_init(stages_[FA], flatten_rm(first_frame_truth.theta));
    h.state[KV] = stage_init(stages_[KV], flatten_rm(first_frame_truth.v_key));
    h.ready = true;
    return h;
}

KinematicEstimate Estimator::staged_forward(const SensorObservation& obs, Hidden& state) const {
    if (!state.ready) throw MissingContext("hidden state must be initialized per sequence");
    for (const StageState& s : state.state) {
        if (s.h.size() != hidden_) throw ShapeMismatch("hidden state from another configuration");
    }
    VecX obs_v = obs_vector(obs);
    VecX y_lp = stage_step(stages_[LP], obs_v, state.state[LP]);

    VecX x_fp(kObsWidth + KinematicEstimate::kPLeafWidth);
    x_fp << obs_v, y_lp;
    VecX y_fp = stage_step(stages_[FP], x_fp, state.state[FP]);

    VecX x_full(kObsWidth + KinematicEstimate::kPWidth);
    x_full << obs_v, y_fp;
    VecX y_fa = stage_step(stages_[FA], x_full, state.state[FA]);
    VecX y_kv = stage_step(stages_[KV], x_full, state.state[KV]);

    KinematicEstimate e;
    unflatten_rm(y_lp, e.p_leaf);
    unflatten_rm(y_fp, e.p);
    unflatten_rm(y_fa, e.theta);
    unflatten_rm(y_kv, e.v_key);
    return e;
}

double Estimator::sequence_loss(const std::vector<SensorObservation>& obs,
                                const std::vector<KinematicEstimate>& truth,
                                Estimator* grad) const {
    const int T = int(obs.size());
    if (truth.size() != obs.size()) throw LengthMismatch("observation/truth length mismatch");
    if (T == 0) throw SequenceTooShort("empty training sequence");
    if (grad && grad->hidden_width() != hidden_) *grad = Estimator(hidden_);

    std::vector<VecX> xs_lp(T);
    for (int t = 0; t < T; ++t) xs_lp[t] = obs_vector(obs[t]);

    StageTrace tr_lp, tr_fp, tr_fa, tr_kv;
    std::vector<VecX> y_lp =
        stage_forward(stages_[LP], xs_lp, flatten_rm(truth[0].p_leaf), grad ? &tr_lp : nullptr);

    std::vector<VecX> xs_fp(T);
    for (int t = 0; t < T; ++t) {
        xs_fp[t].resize(kObsWidth + KinematicEstimate::kPLeafWidth);
        xs_fp[t] << xs_lp[t], y_lp[t];
    }
    std::vector<VecX> y_fp =
        stage_forward(stages_[FP], xs_fp, flatten_rm(truth[0].p), grad ? &tr_fp : nullptr);

    std::vector<VecX> xs_full(T);
    for (int t = 0; t < T; ++t) {
        xs_full[t].resize(kObsWidth + KinematicEstimate::kPWidth);
        xs_full[t] << xs_lp[t], y_fp[t];
    }
    std::vector<VecX> y_fa =
        stage_forward(stages_[FA], xs_full, flatten_rm(truth[0].theta), grad ? &tr_fa : nullptr);
    std::vector<VecX> y_kv =
        stage_forward(stages_[KV], xs_full, flatten_rm(truth[0].v_key), grad ? &tr_kv : nullptr);

    // Per-field MSE, each normalized by its own width, averaged over frames.
    double loss = 0.0;
    std::vector<VecX> e_lp(T), e_fp(T), e_fa(T), e_kv(T);
    for (int t = 0; t < T; ++t) {
        e_lp[t] = y_lp[t] - flatten_rm(truth[t].p_leaf);
        e_fp[t] = y_fp[t] - flatten_rm(truth[t].p);
        e_fa[t] = y_fa[t] - flatten_rm(truth[t].theta);
        e_kv[t] = y_kv[t] - flatten_rm(truth[t].v_key);
        loss += e_lp[t].squaredNorm() / KinematicEstimate::kPLeafWidth +
                e_fp[t].squaredNorm() / KinematicEstimate::kPWidth +
                e_fa[t].squaredNorm() / KinematicEstimate::kThetaWidth +
                e_kv[t].squaredNorm() / KinematicEstimate::kVKeyWidth;
    }
    loss /= T;
    if (!grad) return loss;

    auto dy_of = [T](const VecX& e, int width) { return VecX(2.0 / (width * T) * e); };
    std::vector<VecX> dy_fa(T), dy_kv(T);
    for (int t = 0; t < T; ++t) {
        dy_fa[t] = dy_of(e_fa[t], KinematicEstimate::kThetaWidth);
        dy_kv[t] = dy_of(e_kv[t], KinematicEstimate::kVKeyWidth);
    }
    std::vector<VecX> dx_fa = stage_backward(stages_[FA], tr_fa, dy_fa, grad->stages_[FA]);
    std::vector<VecX> dx_kv = stage_backward(stages_[KV], tr_kv, dy_kv, grad->stages_[KV]);

    std::vector<VecX> dy_fp(T);
    for (int t = 0; t < T; ++t) {
        dy_fp[t] = dy_of(e_fp[t], KinematicEstimate::kPWidth) +
                   dx_fa[t].segment(kObsWidth, KinematicEstimate::kPWidth) +
                   dx_kv[t].segment(kObsWidth, KinematicEstimate::kPWidth);
    }
    std::vector<VecX> dx_fp = stage_backward(stages_[FP], tr_fp, dy_fp, grad->stages_[FP]);

    std::vector<VecX> dy_lp(T);
    for (int t = 0; t < T; ++t) {
        dy_lp[t] = dy_of(e_lp[t], KinematicEstimate::kPLeafWidth) +
                   dx_fp[t].segment(kObsWidth, KinematicEstimate::kPLeafWidth);
    }
    stage_backward(stages_[LP], tr_lp, dy_lp, grad->stages_[LP]);
    return loss;
}

std::vector<TensorRef> Estimator::tensors() {
    static constexpr const char* kPrefix[kNumStages] = {"lp", "fp", "fa", "kv"};
    std::vector<TensorRef> out;
    for (int s = 0; s < kNumStages; ++s) stages_[s].collect_tensors(kPrefix[s], out);
    return out;
}

EstimateSource oracle_estimator(std::vector<KinematicEstimate> truth, OracleNoise noise,
                                uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    bool perturb = noise.p_leaf > 0.0 || noise.p > 0.0 || noise.theta > 0.0 || noise.v_key > 0.0;
    if (perturb) {
        for (KinematicEstimate& e : truth) {
            if (noise.p_leaf > 0.0) {
                for (int r = 0; r < 5; ++r) {
                    for (int c = 0; c < 3; ++c) e.p_leaf(r, c) += noise.p_leaf * g(rng);
                }
            }
            if (noise.p > 0.0) {
                for (int r = 0; r < body::kNumJoints; ++r) {
                    for (int c = 0; c < 3; ++c) e.p(r, c) += noise.p * g(rng);
                }
            }
            if (noise.theta > 0.0) {
                for (int j = 0; j < body::kNumJoints; ++j) {
                    Vec3 w(noise.theta * g(rng), noise.theta * g(rng), noise.theta * g(rng));
                    e.set_joint_rotation(j, Rotation::from_rotvec(w) * e.joint_rotation(j));
                }
            }
            if (noise.v_key > 0.0) {
                for (int r = 0; r < 6; ++r) {
                    for (int c = 0; c < 3; ++c) e.v_key(r, c) += noise.v_key * g(rng);
                }
            }
        }
    }
    auto data = std::make_shared<std::vector<KinematicEstimate>>(std::move(truth));
    return [data](int frame) -> KinematicEstimate {
        if (frame < 0 || size_t(frame) >= data->size()) {
            throw SequenceTooShort("estimate requested past the end of the sequence");
        }
        return (*data)[size_t(frame)];
    };
}

EstimateSource estimator_source(const Estimator& est, std::vector<SensorObservation> obs,
                                const KinematicEstimate& first_frame_truth) {
    struct Stream {
        Estimator est;
        std::vector<SensorObservation> obs;
        Estimator::Hidden hidden;
        std::vector<KinematicEstimate> produced;
    };
    auto s = std::make_shared<Stream>();
    s->est = est;
    s->obs = std::move(obs);
    s->hidden = s->est.init_hidden(first_frame_truth);
    return [s](int frame) -> KinematicEstimate {
        if (frame < 0 || size_t(frame) >= s->obs.size()) {
            throw SequenceTooShort("estimate requested past the end of the sequence");
        }
        while (s->produced.size() <= size_t(frame)) {
            s->produced.push_back(s->est.staged_forward(s->obs[s->produced.size()], s->hidden));
        }
        return s->produced[size_t(frame)];
    };
}

HistoryBuffer::HistoryBuffer(int capacity) : ring_(size_t(std::max(1, capacity))) {}

void HistoryBuffer::push(const KinematicEstimate& e) {
    ring_[size_t(head_)] = e;
    head_ = (head_ + 1) % capacity();
    count_ = std::min(count_ + 1, capacity());
}

const KinematicEstimate& HistoryBuffer::back(int age) const {
    if (age < 0 || age >= count_) throw Underflow("history buffer holds too few frames");
    int idx = (head_ - 1 - age + 2 * capacity()) % capacity();
    return ring_[size_t(idx)];
}

std::vector<KinematicEstimate> HistoryBuffer::segment() const {
    if (!full()) throw Underflow("history buffer not yet full");
    std::vector<KinematicEstimate> out;
    out.reserve(size_t(capacity()));
    for (int age = capacity() - 1; age >= 0; --age) out.push_back(back(age));
    return out;
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(std::vector<TensorRef> params, std::vector<TensorRef> grads) {
    if (params.size() != grads.size()) throw ShapeMismatch("parameter/gradient tensor counts");
    if (m_.empty()) {
        for (const TensorRef& p : params) {
            m_.push_back(VecX::Zero(long(p.size())));
            v_.push_back(VecX::Zero(long(p.size())));
        }
    }
    if (m_.size() != params.size()) throw ShapeMismatch("optimizer bound to another model");
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, t_);
    double c2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].size() != grads[i].size() || long(params[i].size()) != m_[i].size()) {
            throw ShapeMismatch("tensor size changed between optimizer steps");
        }
        Eigen::Map<VecX> p(params[i].data, long(params[i].size()));
        Eigen::Map<const VecX> g(grads[i].data, long(grads[i].size()));
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        p -= lr_ * (m_[i] / c1).cwiseQuotient(((v_[i] / c2).cwiseSqrt().array() + eps_).matrix());
    }
}

}  // namespace grip
