#pragma once

#include <Eigen/Dense>
#include <deque>
#include <optional>
#include <vector>

#include "wmmon/training.hpp"
#include "wmmon/world_model.hpp"

namespace wmmon {

struct MonitorConfig {
    int n_horizon = 16;
    double smoothing_alpha = 0.05;      // EMA coefficient in (0, 1]
    double calibration_quantile = 0.995;
    int debounce_m = 4;                 // consecutive exceedances before a trigger
    bool per_dim_tracking = true;
    int stride = 1;                     // issue a rollout every stride steps
    int arming_step = 100;              // reports before this step never trigger and
                                        // are excluded from calibration (burn-in)
    bool gate_on_reward = false;        // reward error is logged, not gating, by default

    void validate() const;
};

// An imagination rollout issued at step t0, stored until it can be scored
// against reality n steps later. Observations in normalized units.
struct PredictionRecord {
    int t0 = 0;
    Mat predicted_obs;      // n x d
    Vec predicted_rewards;  // n
};

struct ErrorReport {
    int t = 0;  // emission step (= t0 + n of the matured record)
    double e_obs = 0.0;
    double e_rew = 0.0;
    Vec per_dim_e_obs;  // empty when per-dim tracking is off
    double e_obs_smooth = 0.0;
    double e_rew_smooth = 0.0;
    double threshold = 0.0;
    bool triggered = false;
};

enum class TriggerKind { Threshold, ModelDivergence };

struct TriggerEvent {
    int step = 0;
    TriggerKind kind = TriggerKind::Threshold;
    double e_obs_smooth = 0.0;
    double threshold = 0.0;
};

// Mean absolute difference over the horizon, per dimension and averaged:
// per_dim[j] = (1/n) sum_i |pred(i,j) - actual(i,j)|, e_obs = mean_j per_dim[j].
std::pair<double, Vec> compute_obs_error(const Mat& predicted, const Mat& actual);

// Mean absolute difference between predicted and actual reward sequences.
double compute_reward_error(const Vec& predicted, const Vec& actual);

// Elementwise absolute difference; usable as an error heatmap.
Mat image_error(const Mat& predicted, const Mat& actual);
std::vector<Mat> image_error(const std::vector<Mat>& predicted, const std::vector<Mat>& actual);

class EmaSmoother {
public:
    double update(double value, double alpha);
    bool initialized() const { return initialized_; }
    double value() const { return value_; }
    void reset() { initialized_ = false; value_ = 0.0; }

private:
    bool initialized_ = false;
    double value_ = 0.0;
};

// Empirical quantile with linear interpolation between order statistics.
double quantile_linear(std::vector<double> values, double q);

// Quantile of a smoothed nominal-error series; requires >= 100 samples.
double calibrate_threshold(const std::vector<double>& smoothed_series, double quantile);

struct RankedDim {
    int dim = 0;
    double ratio = 0.0;  // (mean error after onset) / (mean before onset + eps)
};

// Analysis-time utility: dimensions ordered by error-increase ratio around a
// known onset. Ties break toward the lower dimension index.
std::vector<RankedDim> rank_per_dim_errors(const std::vector<ErrorReport>& series,
                                           int onset_step, int window);

struct MonitorStepOutput {
    std::optional<ErrorReport> report;
    std::optional<TriggerEvent> trigger;
    std::optional<PredictionRecord> matured;  // the record the report scored
};

// The runtime state machine: every step it filters the model state from the
// incoming observation, issues an imagination rollout, scores the rollout
// that just matured, smooths, thresholds and debounces.
class Monitor {
public:
    Monitor(WorldModelParams model, NormStats stats, ActorFn actor, MonitorConfig config,
            double threshold_obs, double threshold_rew);

    // Feed the observation and the arrival reward for step t (the reward
    // delivered together with x_t; 0 at the first step).
    MonitorStepOutput step(const Vec& x_raw, double arrival_reward);

    // Record the action the controller executed in response to the latest
    // observation; used to advance the filtered recurrent state.
    void note_action(const Vec& executed_action);

    const ModelState& state() const { return state_; }
    int pending_count() const { return static_cast<int>(pending_.size()); }
    int current_step() const { return t_; }
    double threshold_obs() const { return threshold_obs_; }

private:
    MonitorStepOutput divergence(int step);

    WorldModelParams model_;
    NormStats stats_;
    ActorFn actor_;
    MonitorConfig config_;
    double threshold_obs_;
    double threshold_rew_;

    int t_ = 0;
    ModelState state_;
    Vec last_action_;
    bool have_state_ = false;
    std::deque<PredictionRecord> pending_;
    std::deque<Vec> obs_window_;      // normalized observations, newest last
    std::deque<double> reward_window_;
    EmaSmoother ema_obs_;
    EmaSmoother ema_rew_;
    int consecutive_exceed_ = 0;
    bool diverged_ = false;
};

}  // namespace wmmon
