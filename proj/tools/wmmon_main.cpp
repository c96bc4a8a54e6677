#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "wmmon/harness.hpp"

namespace {

// --out paths are resolved under WMMON_OUT_ROOT when that is set and the
// path is relative.
std::string resolve_out(const std::string& out) {
    const char* root = std::getenv("WMMON_OUT_ROOT");
    if (root && *root && std::filesystem::path(out).is_relative())
        return (std::filesystem::path(root) / out).string();
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"world-model runtime monitor: train, calibrate, run and replay "
                 "anomaly-monitoring experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::uint64_t seed_override = 0;
    bool has_seed = false;
    int stride = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", config_path, "configuration file (JSON)")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option_function<std::uint64_t>(
               "--seed",
               [&](std::uint64_t s) {
                   seed_override = s;
                   has_seed = true;
               },
               "override the scenario/data seed");
    };

    auto* train = app.add_subcommand("train", "collect nominal episodes and train the model");
    add_common(train, true);

    auto* calibrate = app.add_subcommand("calibrate", "compute error thresholds on nominal runs");
    add_common(calibrate, true);
    std::string checkpoint_override;
    calibrate->add_option("--checkpoint", checkpoint_override, "checkpoint path override");

    auto* monitor = app.add_subcommand("monitor", "run a scenario with the monitor attached");
    add_common(monitor, true);
    monitor->add_option("--stride", stride, "issue a rollout every k steps");

    auto* replay = app.add_subcommand("replay", "re-score a run log offline");
    add_common(replay, false);
    std::string log_path, profile_path;
    replay->add_option("--log", log_path, "run_log.csv from a monitor run")->required();
    replay->add_option("--thresholds", profile_path, "threshold profile")->required();
    double quantile = -1.0, alpha = -1.0;
    int debounce = 0;
    replay->add_option("--quantile", quantile, "recompute thresholds at this quantile");
    replay->add_option("--debounce", debounce, "override debounce count");
    replay->add_option("--alpha", alpha, "override smoothing coefficient");

    CLI11_PARSE(app, argc, argv);

    try {
        out_dir = resolve_out(out_dir);

        if (replay->parsed()) {
            wmmon::ReplayOverrides overrides;
            if (quantile >= 0.0) overrides.quantile = quantile;
            if (debounce > 0) overrides.debounce_m = debounce;
            if (alpha > 0.0) overrides.smoothing_alpha = alpha;
            return wmmon::cmd_replay(log_path, profile_path, out_dir, overrides, std::cout);
        }

        wmmon::HarnessConfig config;
        try {
            config = wmmon::load_config(config_path);
            if (has_seed) {
                config.scenario.seed = seed_override;
                config.env.seed = seed_override;
            }
            if (stride > 0) config.monitor.stride = stride;
            config.validate();
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return wmmon::kExitConfigError;
        }

        if (train->parsed()) return wmmon::cmd_train(config, out_dir, std::cout);
        if (calibrate->parsed())
            return wmmon::cmd_calibrate(config, out_dir, std::cout, checkpoint_override);
        return wmmon::cmd_monitor(config, out_dir, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return wmmon::kExitRuntimeError;
    }
}
