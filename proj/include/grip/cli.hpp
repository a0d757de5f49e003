#pragma once

#include <string>

#include "grip/config.hpp"

namespace grip {

// Command cores behind the `grip` executable. Each one reads and writes the
// structured-text formats from io.hpp, takes every tunable through
// PipelineConfig, and reports problems through the grip error types; run_cli
// maps those onto the documented exit codes (0 success, 1 invariant
// violation, 2 missing or invalid input).

/// Raw device bundle -> calibrated sequence file. Watch/strap devices go
/// through the floor + T-pose context derivation, insoles through the
/// gravity-referenced filter anchored at the middle of their T-pose window.
/// Throws MissingContext when a device lacks a T-pose window.
void cmd_calibrate(const std::string& raw_path, const std::string& out_path,
                   const PipelineConfig& cfg);

/// Vertical-acceleration series -> stream-offset report. Without an explicit
/// reference the first series is the reference for all (so a single stream
/// reports offset 0). A flat series still aborts, but with a warning first.
void cmd_sync(const std::string& input_path, const std::string& out_path,
              const PipelineConfig& cfg);

/// Sequence -> per-frame kinematic estimates. With an empty checkpoint path
/// the truth-backed oracle source is used (optionally perturbed per the
/// config); otherwise the checkpoint estimator is rolled out over the sensor
/// observations, masked down to the configured sensor subset. Both modes need
/// ground-truth kinematics in the sequence (the oracle reads all of it, the
/// estimator seeds its recurrent state from frame 0).
void cmd_estimate(const std::string& seq_path, const std::string& checkpoint_path,
                  const std::string& out_path, const PipelineConfig& cfg);

/// Closed-loop tracking rollout: one simulated frame per input frame, PD
/// torques toward the estimates (or none under the "zero" policy), fall
/// detection and recovery resets included. Empty model/terrain paths fall
/// back to the standard humanoid and the sequence's own terrain. The
/// kinematic root position comes from the ground-truth motion when present,
/// else from integrating the estimated root velocity.
void cmd_simulate(const std::string& seq_path, const std::string& est_path,
                  const std::string& model_path, const std::string& terrain_path,
                  const std::string& out_path, const PipelineConfig& cfg);

/// Rollout vs ground-truth sequence -> metric report file (also printed to
/// stdout). The success rate is recomputed from the rollout's fall flags over
/// the same segmentation the other metrics use.
void cmd_evaluate(const std::string& rollout_path, const std::string& truth_path,
                  const std::string& out_path, const PipelineConfig& cfg);

/// Deterministic synthetic data: "standing", "gait" (sequence files), "raw"
/// (uncalibrated bundle), or "jump" (sync input with planted offsets
/// 10/-5/0/25; truth_out_path, when non-empty, receives the expected offset
/// report). Unknown kinds raise ConfigError.
void cmd_fixture(const std::string& kind, int frames, const std::string& out_path,
                 const std::string& truth_out_path, const PipelineConfig& cfg);

/// Full argv front end: subcommand dispatch, config loading, flag overrides.
/// Returns the process exit code instead of throwing.
int run_cli(int argc, const char* const* argv);

}  // namespace grip
