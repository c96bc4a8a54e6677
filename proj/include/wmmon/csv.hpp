#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wmmon/env.hpp"
#include "wmmon/training.hpp"

namespace wmmon {

// Shortest round-trip decimal representation; parsing it back recovers the
// exact double, which replay relies on.
std::string format_double(double v);
double parse_double(const std::string& s);

// One monitoring row per step once the first rollout has matured. The
// predicted columns hold the n-step-ahead prediction of that same step's
// observation/reward, in raw units.
struct RunLogRow {
    int step = 0;
    Vec obs;       // raw units
    Vec pred_obs;  // raw units
    double reward = 0.0;
    double pred_reward = 0.0;
    double e_obs = 0.0;
    double e_obs_smooth = 0.0;
    double e_rew = 0.0;
    double e_rew_smooth = 0.0;
    double threshold = 0.0;
    bool triggered = false;
};

struct RunLog {
    static constexpr int kVersion = 1;
    std::string env_kind;
    int d_obs = 0;
    int n_horizon = 0;
    std::vector<RunLogRow> rows;
};

void write_run_log(const RunLog& log, const std::string& path);
RunLog read_run_log(const std::string& path);

void write_metrics_csv(const std::vector<TrainMetricsRow>& metrics, const std::string& path);

}  // namespace wmmon
