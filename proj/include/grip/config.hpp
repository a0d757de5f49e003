#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "grip/kinnet.hpp"
#include "grip/reward.hpp"
#include "grip/statediff.hpp"

namespace grip {

/// Every tunable the pipeline commands accept. Serialized as JSON; loading
/// rejects unknown keys so a typo never silently falls back to a default,
/// and validate() names the offending key in its error message.
struct PipelineConfig {
    uint64_t seed = 0;

    // Sensor subset fed to the estimator: 2 (wrists), 4 (+feet), 5 (+head),
    // 6 (+pelvis); pressure features ride along when available.
    int num_imus = 4;
    bool use_pressure = true;

    // Observation feature groups: OA, OAV, OAVJglo, or OAVJrel.
    std::string ablation = "OAVJrel";

    int segment_frames = 500;  // evaluation chunk length
    int sync_max_lag = 200;    // frames searched on either side of zero

    double insole_contact_threshold = 10.0;  // N per region
    double insole_cop_min_force = 5.0;       // N total

    int estimator_hidden = 64;
    OracleNoise oracle_noise;  // perturbation of truth-backed estimates

    RewardConfig reward;
    FallRecoveryConfig fall;

    // Contact material and integrator granularity of the simulated body.
    double contact_stiffness = 3.0e4;  // N/m
    double contact_damping = 3.0e2;    // N*s/m
    double friction = 0.9;
    int substeps = 8;

    // Tracking policy: "pd" drives toward the estimate, "zero" leaves the
    // body unactuated (used to provoke falls).
    std::string policy = "pd";

    /// Throws ConfigError naming the first out-of-range key.
    void validate() const;

    /// Decoded feature-group mask; throws ConfigError on an unknown name.
    AblationMask ablation_mask() const;

    /// Reward/fall/mask/torque-scale bundle for the tracking environment.
    EnvConfig env_config() const;

    /// Applies the contact material and substep settings to a body model.
    void apply_material(HumanoidModel& model) const;
};

/// Parses a JSON object; throws ParseError on malformed JSON, ConfigError on
/// unknown keys, wrong types, or out-of-range values.
PipelineConfig config_from_json(std::string_view text);

/// Serializes every field (round trips through config_from_json).
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace grip
