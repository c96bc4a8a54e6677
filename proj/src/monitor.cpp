#include "wmmon/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmmon {

void MonitorConfig::validate() const {
    if (n_horizon < 1) throw std::invalid_argument("n_horizon must be >= 1");
    if (!(smoothing_alpha > 0.0) || smoothing_alpha > 1.0)
        throw std::invalid_argument("smoothing_alpha must be in (0, 1]");
    if (!(calibration_quantile > 0.0) || !(calibration_quantile < 1.0))
        throw std::invalid_argument("calibration_quantile must be in (0, 1)");
    if (debounce_m < 1) throw std::invalid_argument("debounce_m must be >= 1");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (arming_step < 0) throw std::invalid_argument("arming_step must be >= 0");
}

std::pair<double, Vec> compute_obs_error(const Mat& predicted, const Mat& actual) {
    if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols())
        throw std::invalid_argument("compute_obs_error: shape mismatch");
    if (!predicted.allFinite() || !actual.allFinite())
        throw std::invalid_argument("compute_obs_error: NaN/Inf input");
    const double n = static_cast<double>(predicted.rows());
    Vec per_dim = ((predicted - actual).cwiseAbs().colwise().sum() / n).transpose();
    return {per_dim.mean(), per_dim};
}

double compute_reward_error(const Vec& predicted, const Vec& actual) {
    if (predicted.size() != actual.size())
        throw std::invalid_argument("compute_reward_error: length mismatch");
    if (!predicted.allFinite() || !actual.allFinite())
        throw std::invalid_argument("compute_reward_error: NaN/Inf input");
    return (predicted - actual).cwiseAbs().mean();
}

Mat image_error(const Mat& predicted, const Mat& actual) {
    if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols())
        throw std::invalid_argument("image_error: shape mismatch");
    return (predicted - actual).cwiseAbs();
}

std::vector<Mat> image_error(const std::vector<Mat>& predicted, const std::vector<Mat>& actual) {
    if (predicted.size() != actual.size())
        throw std::invalid_argument("image_error: channel count mismatch");
    std::vector<Mat> out;
    out.reserve(predicted.size());
    for (std::size_t c = 0; c < predicted.size(); ++c)
        out.push_back(image_error(predicted[c], actual[c]));
    return out;
}

double EmaSmoother::update(double value, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("alpha must be in (0, 1]");
    if (!initialized_) {
        initialized_ = true;
        value_ = value;
    } else {
        value_ = (1.0 - alpha) * value_ + alpha * value;
    }
    return value_;
}

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty series");
    if (!(q >= 0.0) || !(q <= 1.0)) throw std::invalid_argument("quantile must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double calibrate_threshold(const std::vector<double>& smoothed_series, double quantile) {
    if (smoothed_series.size() < 100)
        throw std::invalid_argument("calibration series too short (need >= 100 samples)");
    return quantile_linear(smoothed_series, quantile);
}

std::vector<RankedDim> rank_per_dim_errors(const std::vector<ErrorReport>& series,
                                           int onset_step, int window) {
    constexpr double kEps = 1e-9;
    if (window <= 0) throw std::invalid_argument("rank window must be positive");
    int d = 0;
    for (const auto& r : series)
        if (r.per_dim_e_obs.size() > 0) d = static_cast<int>(r.per_dim_e_obs.size());
    if (d == 0) throw std::invalid_argument("series carries no per-dimension errors");

    Vec pre = Vec::Zero(d), post = Vec::Zero(d);
    int n_pre = 0, n_post = 0;
    for (const auto& r : series) {
        if (r.per_dim_e_obs.size() == 0) continue;
        if (r.t < onset_step && r.t >= onset_step - window) {
            pre += r.per_dim_e_obs;
            ++n_pre;
        } else if (r.t >= onset_step && r.t < onset_step + window) {
            post += r.per_dim_e_obs;
            ++n_post;
        }
    }
    if (n_pre == 0 || n_post == 0)
        throw std::invalid_argument("rank window contains no reports on one side of onset");
    pre /= n_pre;
    post /= n_post;

    std::vector<RankedDim> ranked(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
        ranked[static_cast<std::size_t>(j)] = {j, post[j] / (pre[j] + kEps)};
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedDim& a, const RankedDim& b) { return a.ratio > b.ratio; });
    return ranked;
}

Monitor::Monitor(WorldModelParams model, NormStats stats, ActorFn actor, MonitorConfig config,
                 double threshold_obs, double threshold_rew)
    : model_(std::move(model)),
      stats_(std::move(stats)),
      actor_(std::move(actor)),
      config_(config),
      threshold_obs_(threshold_obs),
      threshold_rew_(threshold_rew) {
    config_.validate();
    state_ = initial_state(model_);
    last_action_ = Vec::Zero(model_.dims.d_act);
}

void Monitor::note_action(const Vec& executed_action) {
    if (executed_action.size() != model_.dims.d_act)
        throw std::invalid_argument("note_action: dimension mismatch");
    last_action_ = executed_action.cwiseMax(-1.0).cwiseMin(1.0);
}

MonitorStepOutput Monitor::divergence(int step) {
    MonitorStepOutput out;
    out.trigger = TriggerEvent{step, TriggerKind::ModelDivergence, ema_obs_.value(), threshold_obs_};
    // drop poisoned rollouts and restart filtering from a clean state; the
    // reality window must stay step-consecutive, so it goes too
    pending_.clear();
    obs_window_.clear();
    reward_window_.clear();
    state_ = initial_state(model_);
    have_state_ = false;
    diverged_ = true;
    return out;
}

MonitorStepOutput Monitor::step(const Vec& x_raw, double arrival_reward) {
    const int t = t_++;
    const int n = config_.n_horizon;

    if (x_raw.size() != model_.dims.d_obs || !x_raw.allFinite() || !std::isfinite(arrival_reward))
        return divergence(t);

    const Vec x = stats_.normalize(x_raw);

    // (1) advance the filtered model state with the executed action
    Vec h;
    if (!have_state_) {
        h = Vec::Zero(model_.dims.d_h);
    } else {
        h = sequence_step(model_, state_.h, state_.z, last_action_);
    }
    Vec z = encode(model_, x, h);
    if (!h.allFinite() || !z.allFinite()) return divergence(t);
    state_ = {std::move(h), std::move(z)};
    have_state_ = true;

    // (2) issue a rollout
    if (t % config_.stride == 0) {
        std::vector<ImaginedStep> rollout;
        try {
            rollout = imagine(model_, state_, actor_, n);
        } catch (const ModelDivergence&) {
            return divergence(t);
        }
        PredictionRecord rec;
        rec.t0 = t;
        rec.predicted_obs.resize(n, model_.dims.d_obs);
        rec.predicted_rewards.resize(n);
        for (int i = 0; i < n; ++i) {
            rec.predicted_obs.row(i) = rollout[static_cast<std::size_t>(i)].obs.transpose();
            rec.predicted_rewards[i] = rollout[static_cast<std::size_t>(i)].reward;
        }
        pending_.push_back(std::move(rec));
    }

    // (3) record reality
    obs_window_.push_back(x);
    reward_window_.push_back(arrival_reward);
    while (static_cast<int>(obs_window_.size()) > n + 1) {
        obs_window_.pop_front();
        reward_window_.pop_front();
    }

    MonitorStepOutput out;

    // (4) score the matured rollout, smooth, threshold, debounce
    if (!pending_.empty() && pending_.front().t0 + n == t) {
        PredictionRecord rec = std::move(pending_.front());
        pending_.pop_front();

        // reality for steps t0+1 .. t0+n = the last n window entries
        Mat actual_obs(n, model_.dims.d_obs);
        Vec actual_rew(n);
        const int base = static_cast<int>(obs_window_.size()) - n;
        for (int i = 0; i < n; ++i) {
            actual_obs.row(i) = obs_window_[static_cast<std::size_t>(base + i)].transpose();
            actual_rew[i] = reward_window_[static_cast<std::size_t>(base + i)];
        }

        if (!rec.predicted_obs.allFinite() || !rec.predicted_rewards.allFinite())
            return divergence(t);

        ErrorReport report;
        report.t = t;
        auto [e_obs, per_dim] = compute_obs_error(rec.predicted_obs, actual_obs);
        report.e_obs = e_obs;
        if (config_.per_dim_tracking) report.per_dim_e_obs = std::move(per_dim);
        report.e_rew = compute_reward_error(rec.predicted_rewards, actual_rew);
        report.e_obs_smooth = ema_obs_.update(report.e_obs, config_.smoothing_alpha);
        report.e_rew_smooth = ema_rew_.update(report.e_rew, config_.smoothing_alpha);
        report.threshold = threshold_obs_;

        bool exceeded = report.e_obs_smooth > threshold_obs_;
        if (config_.gate_on_reward) exceeded = exceeded || report.e_rew_smooth > threshold_rew_;

        if (t < config_.arming_step) {
            consecutive_exceed_ = 0;
        } else if (exceeded) {
            ++consecutive_exceed_;
        } else {
            consecutive_exceed_ = 0;
        }

        report.triggered = consecutive_exceed_ >= config_.debounce_m;
        if (consecutive_exceed_ == config_.debounce_m) {
            out.trigger = TriggerEvent{t, TriggerKind::Threshold, report.e_obs_smooth,
                                       threshold_obs_};
        }
        out.report = std::move(report);
        out.matured = std::move(rec);
    }

    return out;
}

}  // namespace wmmon
