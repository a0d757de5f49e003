#include "grip/config.hpp"

#include <algorithm>
#include <vector>

#include <json.hpp>

#include "grip/errors.hpp"

namespace grip {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
    throw ConfigError("config key '" + key + "': " + what);
}

/// Applies present keys to their targets, remembers which names are legal,
/// and type-checks every value it touches.
class FieldReader {
public:
    explicit FieldReader(const Json& j) : j_(j) {}

    void num(const char* key, double& dst) {
        auto it = note(key);
        if (it == j_.end()) return;
        if (!it->is_number()) bad_key(key, "must be a number");
        dst = it->get<double>();
    }
    void integer(const char* key, int& dst) {
        auto it = note(key);
        if (it == j_.end()) return;
        if (!it->is_number_integer()) bad_key(key, "must be an integer");
        dst = it->get<int>();
    }
    void unsigned64(const char* key, uint64_t& dst) {
        auto it = note(key);
        if (it == j_.end()) return;
        if (!it->is_number_unsigned()) bad_key(key, "must be a non-negative integer");
        dst = it->get<uint64_t>();
    }
    void boolean(const char* key, bool& dst) {
        auto it = note(key);
        if (it == j_.end()) return;
        if (!it->is_boolean()) bad_key(key, "must be true or false");
        dst = it->get<bool>();
    }
    void text(const char* key, std::string& dst) {
        auto it = note(key);
        if (it == j_.end()) return;
        if (!it->is_string()) bad_key(key, "must be a string");
        dst = it->get<std::string>();
    }

    void reject_unknown() const {
        for (const auto& item : j_.items()) {
            if (std::find(known_.begin(), known_.end(), item.key()) == known_.end()) {
                bad_key(item.key(), "unknown key");
            }
        }
    }

private:
    Json::const_iterator note(const char* key) {
        known_.push_back(key);
        return j_.find(key);
    }

    const Json& j_;
    std::vector<std::string> known_;
};

void read_fields(FieldReader& r, PipelineConfig& c) {
    r.unsigned64("seed", c.seed);
    r.integer("num_imus", c.num_imus);
    r.boolean("use_pressure", c.use_pressure);
    r.text("ablation", c.ablation);
    r.integer("segment_frames", c.segment_frames);
    r.integer("sync_max_lag", c.sync_max_lag);
    r.num("insole_contact_threshold", c.insole_contact_threshold);
    r.num("insole_cop_min_force", c.insole_cop_min_force);
    r.integer("estimator_hidden", c.estimator_hidden);
    r.num("oracle_noise_p_leaf", c.oracle_noise.p_leaf);
    r.num("oracle_noise_p", c.oracle_noise.p);
    r.num("oracle_noise_theta", c.oracle_noise.theta);
    r.num("oracle_noise_v_key", c.oracle_noise.v_key);
    r.num("reward_w_amp", c.reward.w_amp);
    r.num("reward_w_imit", c.reward.w_imit);
    r.num("reward_w_p", c.reward.w_p);
    r.num("reward_w_theta", c.reward.w_theta);
    r.num("reward_w_v", c.reward.w_v);
    r.num("reward_w_omega", c.reward.w_omega);
    r.num("reward_scale_p", c.reward.scale_p);
    r.num("reward_scale_theta", c.reward.scale_theta);
    r.num("reward_scale_v", c.reward.scale_v);
    r.num("reward_scale_omega", c.reward.scale_omega);
    r.num("reward_energy_coeff", c.reward.energy_coeff);
    r.num("reward_lambda_gp", c.reward.lambda_gp);
    r.integer("reward_disc_window", c.reward.disc_window);
    r.num("reward_discount", c.reward.discount);
    r.num("fall_min_root_height", c.fall.min_root_height);
    r.num("fall_max_disc_prob", c.fall.max_disc_prob);
    r.integer("fall_window", c.fall.window);
    r.num("fall_max_joint_error", c.fall.max_joint_error);
    r.num("contact_stiffness", c.contact_stiffness);
    r.num("contact_damping", c.contact_damping);
    r.num("friction", c.friction);
    r.integer("substeps", c.substeps);
    r.text("policy", c.policy);
}

}  // namespace

void PipelineConfig::validate() const {
    auto require = [](bool ok, const char* key, const char* what) {
        if (!ok) bad_key(key, what);
    };
    require(num_imus >= 2 && num_imus <= 6, "num_imus", "must be between 2 and 6");
    (void)ablation_mask();  // throws on an unknown name
    require(segment_frames >= 3, "segment_frames", "must be at least 3");
    require(sync_max_lag >= 1, "sync_max_lag", "must be at least 1");
    require(insole_contact_threshold >= 0.0, "insole_contact_threshold",
            "must be non-negative");
    require(insole_cop_min_force >= 0.0, "insole_cop_min_force", "must be non-negative");
    require(estimator_hidden >= 1, "estimator_hidden", "must be at least 1");
    require(oracle_noise.p_leaf >= 0.0, "oracle_noise_p_leaf", "must be non-negative");
    require(oracle_noise.p >= 0.0, "oracle_noise_p", "must be non-negative");
    require(oracle_noise.theta >= 0.0, "oracle_noise_theta", "must be non-negative");
    require(oracle_noise.v_key >= 0.0, "oracle_noise_v_key", "must be non-negative");
    require(reward.w_amp >= 0.0, "reward_w_amp", "must be non-negative");
    require(reward.w_imit >= 0.0, "reward_w_imit", "must be non-negative");
    require(reward.w_p >= 0.0, "reward_w_p", "must be non-negative");
    require(reward.w_theta >= 0.0, "reward_w_theta", "must be non-negative");
    require(reward.w_v >= 0.0, "reward_w_v", "must be non-negative");
    require(reward.w_omega >= 0.0, "reward_w_omega", "must be non-negative");
    require(reward.scale_p > 0.0, "reward_scale_p", "must be positive");
    require(reward.scale_theta > 0.0, "reward_scale_theta", "must be positive");
    require(reward.scale_v > 0.0, "reward_scale_v", "must be positive");
    require(reward.scale_omega > 0.0, "reward_scale_omega", "must be positive");
    require(reward.energy_coeff >= 0.0, "reward_energy_coeff", "must be non-negative");
    require(reward.lambda_gp >= 0.0, "reward_lambda_gp", "must be non-negative");
    require(reward.disc_window >= 1, "reward_disc_window", "must be at least 1");
    require(reward.discount > 0.0 && reward.discount <= 1.0, "reward_discount",
            "must be in (0, 1]");
    require(fall.min_root_height > 0.0, "fall_min_root_height", "must be positive");
    require(fall.max_disc_prob >= 0.0 && fall.max_disc_prob <= 1.0, "fall_max_disc_prob",
            "must be in [0, 1]");
    require(fall.window >= 1, "fall_window", "must be at least 1");
    require(fall.max_joint_error > 0.0, "fall_max_joint_error", "must be positive");
    require(contact_stiffness > 0.0, "contact_stiffness", "must be positive");
    require(contact_damping >= 0.0, "contact_damping", "must be non-negative");
    require(friction >= 0.0, "friction", "must be non-negative");
    require(substeps >= 1, "substeps", "must be at least 1");
    require(policy == "pd" || policy == "zero", "policy", "must be 'pd' or 'zero'");
}

AblationMask PipelineConfig::ablation_mask() const {
    if (ablation == "OA") return AblationMask::oa();
    if (ablation == "OAV") return AblationMask::oav();
    if (ablation == "OAVJglo") return AblationMask::oav_jglo();
    if (ablation == "OAVJrel") return AblationMask::oav_jrel();
    bad_key("ablation", "must be one of OA, OAV, OAVJglo, OAVJrel (got '" + ablation + "')");
}

EnvConfig PipelineConfig::env_config() const {
    EnvConfig env;
    env.reward = reward;
    env.fall = fall;
    env.mask = ablation_mask();
    env.torque_scale = policy == "zero" ? 0.0 : 1.0;
    return env;
}

void PipelineConfig::apply_material(HumanoidModel& model) const {
    model.contact_stiffness = contact_stiffness;
    model.contact_damping = contact_damping;
    model.friction = friction;
    model.substeps = substeps;
}

PipelineConfig config_from_json(std::string_view text) {
    Json j = Json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ParseError("config is not valid JSON");
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    PipelineConfig c;
    FieldReader r(j);
    read_fields(r, c);
    r.reject_unknown();
    c.validate();
    return c;
}

std::string config_to_json(const PipelineConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["num_imus"] = c.num_imus;
    j["use_pressure"] = c.use_pressure;
    j["ablation"] = c.ablation;
    j["segment_frames"] = c.segment_frames;
    j["sync_max_lag"] = c.sync_max_lag;
    j["insole_contact_threshold"] = c.insole_contact_threshold;
    j["insole_cop_min_force"] = c.insole_cop_min_force;
    j["estimator_hidden"] = c.estimator_hidden;
    j["oracle_noise_p_leaf"] = c.oracle_noise.p_leaf;
    j["oracle_noise_p"] = c.oracle_noise.p;
    j["oracle_noise_theta"] = c.oracle_noise.theta;
    j["oracle_noise_v_key"] = c.oracle_noise.v_key;
    j["reward_w_amp"] = c.reward.w_amp;
    j["reward_w_imit"] = c.reward.w_imit;
    j["reward_w_p"] = c.reward.w_p;
    j["reward_w_theta"] = c.reward.w_theta;
    j["reward_w_v"] = c.reward.w_v;
    j["reward_w_omega"] = c.reward.w_omega;
    j["reward_scale_p"] = c.reward.scale_p;
    j["reward_scale_theta"] = c.reward.scale_theta;
    j["reward_scale_v"] = c.reward.scale_v;
    j["reward_scale_omega"] = c.reward.scale_omega;
    j["reward_energy_coeff"] = c.reward.energy_coeff;
    j["reward_lambda_gp"] = c.reward.lambda_gp;
    j["reward_disc_window"] = c.reward.disc_window;
    j["reward_discount"] = c.reward.discount;
    j["fall_min_root_height"] = c.fall.min_root_height;
    j["fall_max_disc_prob"] = c.fall.max_disc_prob;
    j["fall_window"] = c.fall.window;
    j["fall_max_joint_error"] = c.fall.max_joint_error;
    j["contact_stiffness"] = c.contact_stiffness;
    j["contact_damping"] = c.contact_damping;
    j["friction"] = c.friction;
    j["substeps"] = c.substeps;
    j["policy"] = c.policy;
    return j.dump(2) + "\n";
}

}  // namespace grip
