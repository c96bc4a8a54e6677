#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wmmon/checkpoint.hpp"
#include "wmmon/config.hpp"
#include "wmmon/csv.hpp"
#include "wmmon/monitor.hpp"

namespace wmmon {

// Process exit codes shared by the CLI subcommands.
inline constexpr int kExitNoTrigger = 0;
inline constexpr int kExitTrigger = 10;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

// Calibrated thresholds plus everything needed to re-score a run offline:
// the monitor settings they were computed under, the smoothed calibration
// series (so any other quantile can be recomputed) and the hash of the
// statistics they belong to.
struct ThresholdProfile {
    static constexpr int kVersion = 1;

    double threshold_obs = 0.0;
    double threshold_rew = 0.0;
    double quantile = 0.995;
    double smoothing_alpha = 0.05;
    int debounce_m = 4;
    int arming_step = 100;
    int n_horizon = 16;
    std::string stats_hash;
    std::uint64_t seed = 0;
    int episodes = 0;
    std::vector<double> calibration_obs;  // smoothed e_obs samples, armed steps
    std::vector<double> calibration_rew;
};

void save_threshold_profile(const ThresholdProfile& profile, const std::string& path);
ThresholdProfile load_threshold_profile(const std::string& path);

struct ScenarioResult {
    RunLog log;
    std::vector<ErrorReport> reports;
    std::vector<TriggerEvent> triggers;
};

// Closed loop with the monitor attached: the scripted controller drives the
// plant while the monitor watches; runs to total_steps even after a trigger
// so the whole episode can be analyzed.
ScenarioResult run_scenario(const HarnessConfig& config, const Checkpoint& ckpt,
                            double threshold_obs, double threshold_rew,
                            const std::vector<PerturbationEvent>& schedule, std::uint64_t seed,
                            int total_steps);

// Builds the imagination actor: the cloned latent actor (mode A) or the
// decode-then-scripted fallback (mode B).
ActorFn make_imagination_actor(const HarnessConfig& config, const Checkpoint& ckpt);

struct TrainOutputs {
    Checkpoint checkpoint;
    std::string checkpoint_path;
    std::string metrics_path;
};

// Subcommands. Each returns a process exit code and writes its artifacts
// under out_dir. Diagnostics go to the provided stream.
int cmd_train(const HarnessConfig& config, const std::string& out_dir, std::ostream& diag,
              TrainOutputs* outputs = nullptr);
int cmd_calibrate(const HarnessConfig& config, const std::string& out_dir, std::ostream& diag,
                  const std::string& checkpoint_override = "");
int cmd_monitor(const HarnessConfig& config, const std::string& out_dir, std::ostream& diag);

struct ReplayOverrides {
    std::optional<double> quantile;
    std::optional<int> debounce_m;
    std::optional<double> smoothing_alpha;
};

int cmd_replay(const std::string& run_log_path, const std::string& profile_path,
               const std::string& out_dir, const ReplayOverrides& overrides, std::ostream& diag);

// Offline re-scoring of a run log: recomputes smoothing, thresholds and
// trigger decisions from the logged raw errors.
struct ReplayResult {
    std::vector<RunLogRow> rows;  // smooth/threshold/trigger columns rebuilt
    std::vector<int> trigger_steps;
};

ReplayResult rescore_run_log(const RunLog& log, const ThresholdProfile& profile,
                             const ReplayOverrides& overrides);

}  // namespace wmmon
