#pragma once

#include <array>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "grip/body.hpp"
#include "grip/insole.hpp"
#include "grip/rotmath.hpp"

namespace grip {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Per-frame kinematic state: root-centered (but globally rotated) positions,
/// per-joint angles in the continuous 6D encoding, and global key-joint
/// velocities. Key-joint row order is wrists, feet, head, root.
struct KinematicEstimate {
    Eigen::Matrix<double, 5, 3> p_leaf = Eigen::Matrix<double, 5, 3>::Zero();    // m
    Eigen::Matrix<double, 24, 3> p = Eigen::Matrix<double, 24, 3>::Zero();       // m
    Eigen::Matrix<double, 24, 6> theta = Eigen::Matrix<double, 24, 6>::Zero();   // 6D
    Eigen::Matrix<double, 6, 3> v_key = Eigen::Matrix<double, 6, 3>::Zero();     // m/s

    static constexpr int kPLeafWidth = 15;
    static constexpr int kPWidth = 72;
    static constexpr int kThetaWidth = 144;
    static constexpr int kVKeyWidth = 18;

    /// Decoded rotation of one joint's theta row.
    Rotation joint_rotation(int joint) const;
    void set_joint_rotation(int joint, const Rotation& r);
};

/// Sum of the four per-field mean-squared errors, each averaged over its own
/// elements. Sequence form averages over frames; throws LengthMismatch on
/// ragged inputs, SequenceTooShort when empty.
double kin_loss(const KinematicEstimate& pred, const KinematicEstimate& truth);
double kin_loss(std::span<const KinematicEstimate> pred,
                std::span<const KinematicEstimate> truth);

/// Mutable view of one parameter (or gradient) tensor, used by the optimizer
/// and the checkpoint reader/writer.
struct TensorRef {
    std::string name;
    double* data;
    int rows, cols;  // cols = 1 for vectors
    size_t size() const { return size_t(rows) * size_t(cols); }
};

/// One recurrent stage: a gated recurrent cell (input/forget/cell/output
/// gates stacked in that order), a linear readout, and two linear maps that
/// produce the initial hidden/cell state from the stage's frame-0 target.
struct LstmStage {
    int input_width = 0, hidden_width = 0, output_width = 0, target_width = 0;
    MatX w_x, w_h;          // 4H x I, 4H x H
    VecX b;                 // 4H
    MatX w_out;             // O x H
    VecX b_out;             // O
    MatX w_h0, w_c0;        // H x T0
    VecX b_h0, b_c0;        // H

    static LstmStage zeros(int input, int hidden, int output, int target);
    void randomize(std::mt19937_64& rng, double scale);
    void collect_tensors(const std::string& prefix, std::vector<TensorRef>& out);
};

/// Streaming recurrent state of one stage.
struct StageState {
    VecX h, c;
};

/// Whole-sequence activations cached for backpropagation.
struct StageTrace {
    std::vector<VecX> x;
    VecX target0, h_init, c_init;
    std::vector<VecX> gi, gf, gg, go, c, hc, h;
};

StageState stage_init(const LstmStage& s, const VecX& target0);
VecX stage_step(const LstmStage& s, const VecX& x, StageState& state);

/// Forward over a sequence; when trace is non-null it is filled for backward.
std::vector<VecX> stage_forward(const LstmStage& s, const std::vector<VecX>& xs,
                                const VecX& target0, StageTrace* trace);

/// Backpropagation through time. Accumulates parameter gradients into `grad`
/// (same shapes as `s`) and returns the per-frame input gradients.
std::vector<VecX> stage_backward(const LstmStage& s, const StageTrace& trace,
                                 const std::vector<VecX>& dys, LstmStage& grad);

/// Staged estimator: LP predicts leaf positions from the sensor observation,
/// FP full positions from observation + leaf positions, FA joint angles and
/// KV key velocities from observation + full positions.
class Estimator {
public:
    static constexpr int kNumStages = 4;
    enum Stage { LP = 0, FP = 1, FA = 2, KV = 3 };

    Estimator() = default;
    explicit Estimator(int hidden_width);                          // zero parameters
    Estimator(int hidden_width, std::mt19937_64& rng, double init_scale = 0.1);

    int hidden_width() const { return hidden_; }
    LstmStage& stage(int s) { return stages_[s]; }
    const LstmStage& stage(int s) const { return stages_[s]; }

    struct Hidden {
        std::array<StageState, kNumStages> state;
        bool ready = false;
    };

    /// Learned projection of the frame-0 ground truth into each stage's
    /// initial recurrent state. Call once per sequence.
    Hidden init_hidden(const KinematicEstimate& first_frame_truth) const;

    /// One frame through the four chained stages. Throws MissingContext when
    /// the hidden state was never initialized and ShapeMismatch when it
    /// belongs to a different configuration.
    KinematicEstimate staged_forward(const SensorObservation& obs, Hidden& state) const;

    /// Mean kin_loss of teacher-free rollout over the sequence (hidden
    /// initialized from truth[0]); accumulates parameter gradients into
    /// `grad` when non-null.
    double sequence_loss(const std::vector<SensorObservation>& obs,
                         const std::vector<KinematicEstimate>& truth,
                         Estimator* grad = nullptr) const;

    /// All parameter tensors in a fixed documented order.
    std::vector<TensorRef> tensors();

private:
    int hidden_ = 0;
    std::array<LstmStage, kNumStages> stages_;
};

/// Ground-truth-backed estimate source with optional Gaussian perturbation;
/// interface-compatible with a frame-by-frame estimator rollout. Noise is
/// baked at construction, so access is deterministic and order-free.
struct OracleNoise {
    double p_leaf = 0.0;  // m, per element
    double p = 0.0;       // m, per element
    double theta = 0.0;   // rad, random-axis perturbation per joint
    double v_key = 0.0;   // m/s, per element
};

using EstimateSource = std::function<KinematicEstimate(int frame)>;

EstimateSource oracle_estimator(std::vector<KinematicEstimate> truth, OracleNoise noise = {},
                                uint64_t seed = 0);

/// Wraps a trained estimator and a sensor-observation sequence as an
/// EstimateSource (frames must be requested in increasing order).
EstimateSource estimator_source(const Estimator& est, std::vector<SensorObservation> obs,
                                const KinematicEstimate& first_frame_truth);

/// Fixed-capacity ring of the most recent kinematic estimates, the reset
/// reference for fall recovery.
class HistoryBuffer {
public:
    explicit HistoryBuffer(int capacity = 100);

    int capacity() const { return int(ring_.size()); }
    int size() const { return count_; }
    bool full() const { return count_ == capacity(); }

    void push(const KinematicEstimate& e);
    void clear() { head_ = count_ = 0; }

    /// Entry `age` frames before the newest one. Throws Underflow.
    const KinematicEstimate& back(int age = 0) const;

    /// The full window, oldest first. Throws Underflow until `capacity`
    /// frames have been pushed.
    std::vector<KinematicEstimate> segment() const;

private:
    std::vector<KinematicEstimate> ring_;
    int head_ = 0;  // next write slot
    int count_ = 0;
};

/// Elementwise adaptive-moment optimizer over a fixed tensor list.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);
    void step(std::vector<TensorRef> params, std::vector<TensorRef> grads);

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<VecX> m_, v_;
};

}  // namespace grip
