#include "wmmon/config.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wmmon {

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_keys(const json& j, const std::string& section,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key))
            throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_env(const json& j, EnvConfig& env) {
    require_keys(j, "env",
                 {"kind", "dt", "gravity", "actuator_gains", "waypoints", "arm_velocity_ref",
                  "episode_len", "seed", "sensor_noise_std"});
    if (j.contains("kind")) env = EnvConfig::defaults(env_kind_from_string(j.at("kind")));
    read(j, "dt", env.dt);
    read(j, "gravity", env.gravity);
    if (j.contains("actuator_gains")) {
        const auto g = j.at("actuator_gains").get<std::vector<double>>();
        env.actuator_gains = Eigen::Map<const Vec>(g.data(), static_cast<long>(g.size()));
    }
    if (j.contains("waypoints")) {
        env.waypoints.clear();
        for (const auto& w : j.at("waypoints")) {
            const auto p = w.get<std::vector<double>>();
            if (p.size() != 2) throw ConfigError("waypoints must be 2D points");
            env.waypoints.push_back({p[0], p[1]});
        }
    }
    if (j.contains("arm_velocity_ref")) {
        const auto v = j.at("arm_velocity_ref").get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("arm_velocity_ref must have 2 entries");
        env.arm_velocity_ref = {v[0], v[1]};
    }
    read(j, "episode_len", env.episode_len);
    read(j, "seed", env.seed);
    read(j, "sensor_noise_std", env.sensor_noise_std);
}

void parse_schedule(const json& j, std::vector<PerturbationEvent>& schedule) {
    schedule.clear();
    for (const auto& e : j) {
        require_keys(e, "scenario.schedule[]",
                     {"kind", "onset_step", "duration", "magnitude", "target"});
        PerturbationEvent ev;
        ev.kind = perturbation_kind_from_string(e.at("kind").get<std::string>());
        ev.onset_step = e.at("onset_step").get<int>();
        read(e, "duration", ev.duration);
        if (e.at("magnitude").is_array())
            ev.magnitude = e.at("magnitude").get<std::vector<double>>();
        else
            ev.magnitude = {e.at("magnitude").get<double>()};
        read(e, "target", ev.target);
        schedule.push_back(std::move(ev));
    }
}

}  // namespace

void HarnessConfig::validate() const {
    env.validate();
    train.validate();
    policy.validate();
    monitor.validate();
    if (train_episodes <= 0) throw std::invalid_argument("train.episodes must be positive");
    if (calibration_episodes < 0)
        throw std::invalid_argument("monitor.calibration_episodes must be >= 0");
    if (scenario.total_steps <= monitor.n_horizon)
        throw std::invalid_argument("scenario.total_steps must exceed the prediction horizon");
    for (const auto& ev : scenario.schedule) ev.validate(env.action_dim());
}

HarnessConfig parse_config_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config parse error in " + origin + ": " + e.what());
    }
    require_keys(j, "<top level>", {"env", "model", "train", "policy", "monitor", "scenario"});

    HarnessConfig cfg;
    cfg.env = EnvConfig::defaults(EnvKind::PlanarHover);

    try {
        if (j.contains("env")) parse_env(j.at("env"), cfg.env);

        cfg.policy = ScriptedPolicyConfig::defaults(cfg.env.kind);
        cfg.policy.arm_velocity_ref = cfg.env.arm_velocity_ref;

        if (j.contains("model")) {
            const json& m = j.at("model");
            require_keys(m, "model",
                         {"d_h", "d_z", "d_hidden", "n_horizon", "sample_latent",
                          "latent_noise_std"});
            read(m, "d_h", cfg.model.d_h);
            read(m, "d_z", cfg.model.d_z);
            read(m, "d_hidden", cfg.model.d_hidden);
            read(m, "n_horizon", cfg.model.n_horizon);
            read(m, "sample_latent", cfg.sample_latent);
            read(m, "latent_noise_std", cfg.latent_noise_std);
        }
        cfg.model.d_obs = cfg.env.obs_dim();
        cfg.model.d_act = cfg.env.action_dim();

        if (j.contains("train")) {
            const json& t = j.at("train");
            require_keys(t, "train",
                         {"learning_rate", "batch_size", "seq_len", "train_steps",
                          "latent_consistency_weight", "reward_loss_weight", "grad_clip_norm",
                          "seed", "episodes"});
            read(t, "learning_rate", cfg.train.learning_rate);
            read(t, "batch_size", cfg.train.batch_size);
            read(t, "seq_len", cfg.train.seq_len);
            read(t, "train_steps", cfg.train.train_steps);
            read(t, "latent_consistency_weight", cfg.train.latent_consistency_weight);
            read(t, "reward_loss_weight", cfg.train.reward_loss_weight);
            read(t, "grad_clip_norm", cfg.train.grad_clip_norm);
            read(t, "seed", cfg.train.seed);
            read(t, "episodes", cfg.train_episodes);
        }

        if (j.contains("policy")) {
            const json& p = j.at("policy");
            require_keys(p, "policy",
                         {"kp", "kd", "hover_gravity_comp", "clone_steps", "clone_batch_size",
                          "clone_learning_rate", "clone_seed", "use_latent_actor"});
            read(p, "kp", cfg.policy.kp);
            read(p, "kd", cfg.policy.kd);
            read(p, "hover_gravity_comp", cfg.policy.hover_gravity_comp);
            read(p, "clone_steps", cfg.clone.train_steps);
            read(p, "clone_batch_size", cfg.clone.batch_size);
            read(p, "clone_learning_rate", cfg.clone.learning_rate);
            read(p, "clone_seed", cfg.clone.seed);
            read(p, "use_latent_actor", cfg.use_latent_actor);
        }

        if (j.contains("monitor")) {
            const json& m = j.at("monitor");
            require_keys(m, "monitor",
                         {"n_horizon", "smoothing_alpha", "calibration_quantile", "debounce_m",
                          "per_dim_tracking", "stride", "arming_step", "gate_on_reward",
                          "calibration_episodes"});
            if (m.contains("n_horizon") && m.at("n_horizon").get<int>() != cfg.model.n_horizon)
                throw std::runtime_error(
                    "monitor.n_horizon must match model.n_horizon (set it once under model)");
            read(m, "smoothing_alpha", cfg.monitor.smoothing_alpha);
            read(m, "calibration_quantile", cfg.monitor.calibration_quantile);
            read(m, "debounce_m", cfg.monitor.debounce_m);
            read(m, "per_dim_tracking", cfg.monitor.per_dim_tracking);
            read(m, "stride", cfg.monitor.stride);
            read(m, "arming_step", cfg.monitor.arming_step);
            read(m, "gate_on_reward", cfg.monitor.gate_on_reward);
            read(m, "calibration_episodes", cfg.calibration_episodes);
        }
        cfg.monitor.n_horizon = cfg.model.n_horizon;

        if (j.contains("scenario")) {
            const json& s = j.at("scenario");
            require_keys(s, "scenario",
                         {"total_steps", "seed", "schedule", "checkpoint", "thresholds"});
            read(s, "total_steps", cfg.scenario.total_steps);
            read(s, "seed", cfg.scenario.seed);
            if (s.contains("schedule")) parse_schedule(s.at("schedule"), cfg.scenario.schedule);
            read(s, "checkpoint", cfg.scenario.checkpoint);
            read(s, "thresholds", cfg.scenario.thresholds);
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("config error in " + origin + ": " + e.what());
    }

    cfg.validate();
    return cfg;
}

HarnessConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    HarnessConfig cfg = parse_config_text(ss.str(), path);

    // resolve artifact paths relative to the config file
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&base](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative())
            p = (base / p).string();
    };
    resolve(cfg.scenario.checkpoint);
    resolve(cfg.scenario.thresholds);
    return cfg;
}

std::string dump_config(const HarnessConfig& cfg) {
    json j;
    j["env"] = {
        {"kind", to_string(cfg.env.kind)},
        {"dt", cfg.env.dt},
        {"gravity", cfg.env.gravity},
        {"actuator_gains",
         std::vector<double>(cfg.env.actuator_gains.data(),
                             cfg.env.actuator_gains.data() + cfg.env.actuator_gains.size())},
        {"episode_len", cfg.env.episode_len},
        {"seed", cfg.env.seed},
        {"sensor_noise_std", cfg.env.sensor_noise_std},
    };
    if (cfg.env.kind == EnvKind::PlanarHover) {
        json wps = json::array();
        for (const auto& w : cfg.env.waypoints) wps.push_back({w[0], w[1]});
        j["env"]["waypoints"] = wps;
    } else {
        j["env"]["arm_velocity_ref"] = {cfg.env.arm_velocity_ref[0], cfg.env.arm_velocity_ref[1]};
    }
    j["model"] = {{"d_h", cfg.model.d_h},
                  {"d_z", cfg.model.d_z},
                  {"d_hidden", cfg.model.d_hidden},
                  {"n_horizon", cfg.model.n_horizon},
                  {"sample_latent", cfg.sample_latent},
                  {"latent_noise_std", cfg.latent_noise_std}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"batch_size", cfg.train.batch_size},
                  {"seq_len", cfg.train.seq_len},
                  {"train_steps", cfg.train.train_steps},
                  {"latent_consistency_weight", cfg.train.latent_consistency_weight},
                  {"reward_loss_weight", cfg.train.reward_loss_weight},
                  {"grad_clip_norm", cfg.train.grad_clip_norm},
                  {"seed", cfg.train.seed},
                  {"episodes", cfg.train_episodes}};
    j["policy"] = {{"kp", cfg.policy.kp},
                   {"kd", cfg.policy.kd},
                   {"hover_gravity_comp", cfg.policy.hover_gravity_comp},
                   {"clone_steps", cfg.clone.train_steps},
                   {"clone_batch_size", cfg.clone.batch_size},
                   {"clone_learning_rate", cfg.clone.learning_rate},
                   {"clone_seed", cfg.clone.seed},
                   {"use_latent_actor", cfg.use_latent_actor}};
    j["monitor"] = {{"n_horizon", cfg.monitor.n_horizon},
                    {"smoothing_alpha", cfg.monitor.smoothing_alpha},
                    {"calibration_quantile", cfg.monitor.calibration_quantile},
                    {"debounce_m", cfg.monitor.debounce_m},
                    {"per_dim_tracking", cfg.monitor.per_dim_tracking},
                    {"stride", cfg.monitor.stride},
                    {"arming_step", cfg.monitor.arming_step},
                    {"gate_on_reward", cfg.monitor.gate_on_reward},
                    {"calibration_episodes", cfg.calibration_episodes}};
    json sched = json::array();
    for (const auto& ev : cfg.scenario.schedule) {
        json e = {{"kind", to_string(ev.kind)},
                  {"onset_step", ev.onset_step},
                  {"magnitude", ev.magnitude}};
        if (ev.kind == PerturbationKind::ImpulseForce) e["duration"] = ev.duration;
        if (ev.kind == PerturbationKind::ActuatorGain) e["target"] = ev.target;
        sched.push_back(std::move(e));
    }
    j["scenario"] = {{"total_steps", cfg.scenario.total_steps},
                     {"seed", cfg.scenario.seed},
                     {"schedule", sched},
                     {"checkpoint", cfg.scenario.checkpoint},
                     {"thresholds", cfg.scenario.thresholds}};
    return j.dump(1) + "\n";
}

}  // namespace wmmon
