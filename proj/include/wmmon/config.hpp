#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wmmon/env.hpp"
#include "wmmon/monitor.hpp"
#include "wmmon/policy.hpp"
#include "wmmon/training.hpp"

namespace wmmon {

// Full harness configuration: one JSON document with sections
// env / model / train / policy / monitor / scenario. Unknown keys anywhere
// are a hard parse error so typos cannot silently fall back to defaults.
struct HarnessConfig {
    EnvConfig env;
    ModelDims model;          // d_obs/d_act filled from env
    bool sample_latent = false;
    double latent_noise_std = 0.1;
    TrainConfig train;
    int train_episodes = 200;
    ScriptedPolicyConfig policy;
    CloneConfig clone;
    bool use_latent_actor = true;  // imagination mode A; false = decode-then-scripted
    MonitorConfig monitor;
    int calibration_episodes = 20;

    struct Scenario {
        int total_steps = 1000;
        std::uint64_t seed = 1000;
        std::vector<PerturbationEvent> schedule;
        std::string checkpoint;   // paths may be relative to the config file
        std::string thresholds;
    } scenario;

    void validate() const;
};

HarnessConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
HarnessConfig load_config(const std::string& path);

// The fully resolved configuration, suitable for re-running the experiment.
std::string dump_config(const HarnessConfig& config);

}  // namespace wmmon
