#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "grip/config.hpp"
#include "grip/errors.hpp"

using namespace grip;

TEST_CASE("defaults are valid and round trip through JSON") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    std::string text1 = config_to_json(cfg);
    PipelineConfig back = config_from_json(text1);
    std::string text2 = config_to_json(back);
    CHECK(text1 == text2);

    CHECK(back.seed == cfg.seed);
    CHECK(back.num_imus == 4);
    CHECK(back.use_pressure == true);
    CHECK(back.ablation == "OAVJrel");
    CHECK(back.segment_frames == 500);
    CHECK(back.sync_max_lag == 200);
    CHECK(back.insole_contact_threshold == 10.0);
    CHECK(back.insole_cop_min_force == 5.0);
    CHECK(back.reward.w_amp == 0.5);
    CHECK(back.reward.w_imit == 0.5);
    CHECK(back.reward.energy_coeff == 0.0005);
    CHECK(back.reward.lambda_gp == 5.0);
    CHECK(back.fall.min_root_height == 0.30);
    CHECK(back.fall.max_disc_prob == 0.7);
    CHECK(back.fall.max_joint_error == 0.25);
    CHECK(back.contact_stiffness == 3.0e4);
    CHECK(back.friction == 0.9);
    CHECK(back.substeps == 8);
    CHECK(back.policy == "pd");
}

TEST_CASE("partial configs keep defaults for absent keys") {
    PipelineConfig cfg = config_from_json(R"({"seed": 42, "num_imus": 2})");
    CHECK(cfg.seed == 42);
    CHECK(cfg.num_imus == 2);
    CHECK(cfg.use_pressure == true);
    CHECK(cfg.reward.w_amp == 0.5);

    PipelineConfig empty = config_from_json("{}");
    CHECK(empty.num_imus == 4);
}

TEST_CASE("malformed JSON and non-objects are parse errors") {
    CHECK_THROWS_AS(config_from_json("{"), ParseError);
    CHECK_THROWS_AS(config_from_json("not json"), ParseError);
    CHECK_THROWS_AS(config_from_json("[1, 2]"), ParseError);
    CHECK_THROWS_AS(config_from_json("3"), ParseError);
}

TEST_CASE("unknown keys and wrong types are rejected by name") {
    try {
        config_from_json(R"({"num_imsu": 4})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("num_imsu") != std::string::npos);
    }

    try {
        config_from_json(R"({"num_imus": "four"})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("num_imus") != std::string::npos);
    }

    CHECK_THROWS_AS(config_from_json(R"({"use_pressure": 1})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"friction": "high"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"seed": -1})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"substeps": 2.5})"), ConfigError);
}

TEST_CASE("out-of-range values are rejected with the key named") {
    auto rejects = [](const std::string& body, const char* key) {
        try {
            config_from_json(body);
            FAIL_CHECK("expected ConfigError for ", body);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(key) != std::string::npos);
        }
    };
    rejects(R"({"num_imus": 1})", "num_imus");
    rejects(R"({"num_imus": 7})", "num_imus");
    rejects(R"({"ablation": "OAVX"})", "ablation");
    rejects(R"({"segment_frames": 2})", "segment_frames");
    rejects(R"({"sync_max_lag": 0})", "sync_max_lag");
    rejects(R"({"insole_contact_threshold": -1.0})", "insole_contact_threshold");
    rejects(R"({"estimator_hidden": 0})", "estimator_hidden");
    rejects(R"({"oracle_noise_theta": -0.1})", "oracle_noise_theta");
    rejects(R"({"reward_scale_p": 0.0})", "reward_scale_p");
    rejects(R"({"reward_discount": 0.0})", "reward_discount");
    rejects(R"({"reward_discount": 1.5})", "reward_discount");
    rejects(R"({"fall_max_disc_prob": 1.2})", "fall_max_disc_prob");
    rejects(R"({"fall_window": 0})", "fall_window");
    rejects(R"({"contact_stiffness": 0.0})", "contact_stiffness");
    rejects(R"({"substeps": 0})", "substeps");
    rejects(R"({"policy": "random"})", "policy");
}

TEST_CASE("ablation names map to the feature-group masks") {
    PipelineConfig cfg;

    cfg.ablation = "OA";
    AblationMask m = cfg.ablation_mask();
    CHECK(m.orientation);
    CHECK(m.angular);
    CHECK_FALSE(m.velocity);
    CHECK_FALSE(m.joints_global);
    CHECK_FALSE(m.joints_relative);

    cfg.ablation = "OAV";
    m = cfg.ablation_mask();
    CHECK(m.velocity);
    CHECK_FALSE(m.joints_global);
    CHECK_FALSE(m.joints_relative);

    cfg.ablation = "OAVJglo";
    m = cfg.ablation_mask();
    CHECK(m.joints_global);
    CHECK_FALSE(m.joints_relative);

    cfg.ablation = "OAVJrel";
    m = cfg.ablation_mask();
    CHECK_FALSE(m.joints_global);
    CHECK(m.joints_relative);

    cfg.ablation = "oa";
    CHECK_THROWS_AS(cfg.ablation_mask(), ConfigError);
}

TEST_CASE("derived bundles carry the configured values") {
    PipelineConfig cfg;
    cfg.policy = "zero";
    cfg.reward.w_amp = 0.25;
    cfg.fall.window = 17;
    cfg.ablation = "OAV";

    EnvConfig env = cfg.env_config();
    CHECK(env.torque_scale == 0.0);
    CHECK(env.reward.w_amp == 0.25);
    CHECK(env.fall.window == 17);
    CHECK(env.mask.velocity);
    CHECK_FALSE(env.mask.joints_relative);

    cfg.policy = "pd";
    CHECK(cfg.env_config().torque_scale == 1.0);

    HumanoidModel model = HumanoidModel::standard();
    cfg.contact_stiffness = 1.0e4;
    cfg.substeps = 4;
    cfg.apply_material(model);
    CHECK(model.contact_stiffness == 1.0e4);
    CHECK(model.substeps == 4);
}
