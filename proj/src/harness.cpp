#include "wmmon/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <ostream>
#include <sstream>

#include "wmmon/plot.hpp"
#include "wmmon/policy.hpp"

namespace wmmon {

using nlohmann::json;
namespace fs = std::filesystem;

void save_threshold_profile(const ThresholdProfile& p, const std::string& path) {
    json j;
    j["format"] = "wmmon-thresholds";
    j["version"] = ThresholdProfile::kVersion;
    j["threshold_obs"] = p.threshold_obs;
    j["threshold_rew"] = p.threshold_rew;
    j["quantile"] = p.quantile;
    j["smoothing_alpha"] = p.smoothing_alpha;
    j["debounce_m"] = p.debounce_m;
    j["arming_step"] = p.arming_step;
    j["n_horizon"] = p.n_horizon;
    j["stats_hash"] = p.stats_hash;
    j["seed"] = p.seed;
    j["episodes"] = p.episodes;
    j["calibration_obs"] = p.calibration_obs;
    j["calibration_rew"] = p.calibration_rew;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write threshold profile: " + path);
    out << j.dump(1) << "\n";
    if (!out) throw std::runtime_error("threshold profile write failed: " + path);
}

ThresholdProfile load_threshold_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open threshold profile: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("threshold profile parse error in " + path + ": " + e.what());
    }
    if (j.value("format", "") != "wmmon-thresholds")
        throw std::runtime_error("not a threshold profile: " + path);
    if (j.at("version").get<int>() != ThresholdProfile::kVersion)
        throw std::runtime_error("unsupported threshold profile version in " + path);
    ThresholdProfile p;
    p.threshold_obs = j.at("threshold_obs").get<double>();
    p.threshold_rew = j.at("threshold_rew").get<double>();
    p.quantile = j.at("quantile").get<double>();
    p.smoothing_alpha = j.at("smoothing_alpha").get<double>();
    p.debounce_m = j.at("debounce_m").get<int>();
    p.arming_step = j.at("arming_step").get<int>();
    p.n_horizon = j.at("n_horizon").get<int>();
    p.stats_hash = j.at("stats_hash").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.episodes = j.at("episodes").get<int>();
    p.calibration_obs = j.at("calibration_obs").get<std::vector<double>>();
    p.calibration_rew = j.at("calibration_rew").get<std::vector<double>>();
    return p;
}

ActorFn make_imagination_actor(const HarnessConfig& config, const Checkpoint& ckpt) {
    if (config.use_latent_actor && ckpt.has_actor) return make_latent_actor_fn(ckpt.actor);
    return make_decoded_scripted_actor_fn(ckpt.model, ckpt.stats, config.env.kind, config.policy);
}

ScenarioResult run_scenario(const HarnessConfig& config, const Checkpoint& ckpt,
                            double threshold_obs, double threshold_rew,
                            const std::vector<PerturbationEvent>& schedule, std::uint64_t seed,
                            int total_steps) {
    if (ckpt.env_kind != config.env.kind)
        throw std::runtime_error("checkpoint was trained on a different environment");

    EnvConfig env = config.env;
    env.episode_len = total_steps;

    Monitor monitor(ckpt.model, ckpt.stats, make_imagination_actor(config, ckpt), config.monitor,
                    threshold_obs, threshold_rew);

    ScenarioResult result;
    result.log.env_kind = to_string(env.kind);
    result.log.d_obs = env.obs_dim();
    result.log.n_horizon = config.monitor.n_horizon;

    auto [state, obs] = env_reset(env, seed);
    double arrival_reward = 0.0;

    for (int t = 0; t < total_steps; ++t) {
        const MonitorStepOutput out = monitor.step(obs, arrival_reward);
        if (out.trigger) result.triggers.push_back(*out.trigger);
        if (out.report) {
            result.reports.push_back(*out.report);
            const auto& rep = *out.report;
            RunLogRow row;
            row.step = t;
            row.obs = obs;
            const int n = config.monitor.n_horizon;
            if (out.matured) {
                row.pred_obs =
                    ckpt.stats.denormalize(out.matured->predicted_obs.row(n - 1).transpose());
                row.pred_reward = out.matured->predicted_rewards[n - 1];
            } else {
                row.pred_obs = Vec::Constant(env.obs_dim(), std::nan(""));
                row.pred_reward = std::nan("");
            }
            row.reward = arrival_reward;
            row.e_obs = rep.e_obs;
            row.e_obs_smooth = rep.e_obs_smooth;
            row.e_rew = rep.e_rew;
            row.e_rew_smooth = rep.e_rew_smooth;
            row.threshold = rep.threshold;
            row.triggered = rep.triggered;
            result.log.rows.push_back(std::move(row));
        }

        const Vec action = scripted_action(obs, env.kind, config.policy);
        monitor.note_action(action);
        auto [next_state, step_result] = env_step(state, action, env, schedule);
        state = next_state;
        obs = step_result.observation;
        arrival_reward = step_result.reward;
    }
    return result;
}

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + dir);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

PolicyFn scripted_policy_fn(const HarnessConfig& config) {
    const EnvKind kind = config.env.kind;
    const ScriptedPolicyConfig policy = config.policy;
    return [kind, policy](const Vec& obs) { return scripted_action(obs, kind, policy); };
}

constexpr std::uint64_t kCalibrationSeedOffset = 500000;

}  // namespace

int cmd_train(const HarnessConfig& config, const std::string& out_dir, std::ostream& diag,
              TrainOutputs* outputs) {
    ensure_dir(out_dir);

    diag << "collecting " << config.train_episodes << " nominal episodes ("
         << to_string(config.env.kind) << ")\n";
    ReplayBuffer buffer;
    buffer.capacity = static_cast<std::size_t>(config.train_episodes);
    const PolicyFn policy = scripted_policy_fn(config);
    for (int i = 0; i < config.train_episodes; ++i) {
        buffer.add(collect_episode(config.env, {}, policy,
                                   config.env.seed + static_cast<std::uint64_t>(i)));
    }
    const NormStats stats = compute_norm_stats(buffer);

    diag << "training world model: " << config.train.train_steps << " steps\n";
    const WorldModelParams init = init_params(config.model, config.train.seed);
    TrainResult trained = train(init, buffer, stats, config.train);
    if (trained.diverged)
        diag << "warning: training diverged at step " << trained.steps_completed
             << "; keeping last finite parameters\n";
    if (!trained.metrics.empty()) {
        const auto& last = trained.metrics.back();
        diag << "final loss total=" << last.loss.total << " obs=" << last.loss.obs_recon
             << " reward=" << last.loss.reward << " latent=" << last.loss.latent_consistency
             << "\n";
    }

    diag << "cloning latent actor: " << config.clone.train_steps << " steps\n";
    const ActorParams actor_init = init_actor(config.model, config.clone.seed);
    CloneResult cloned = clone_actor(buffer, trained.params, stats, actor_init, config.clone);
    if (cloned.diverged) diag << "warning: actor cloning diverged\n";
    diag << "cloning action mse=" << cloned.final_mse << "\n";

    Checkpoint ckpt;
    ckpt.env_kind = config.env.kind;
    ckpt.model = trained.params;
    ckpt.actor = cloned.actor;
    ckpt.has_actor = true;
    ckpt.stats = stats;

    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.json").string();
    const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    save_checkpoint(ckpt, ckpt_path);
    write_metrics_csv(trained.metrics, metrics_path);
    write_text((fs::path(out_dir) / "resolved_config.json").string(), dump_config(config));
    diag << "checkpoint: " << ckpt_path << "\n";

    if (outputs) {
        outputs->checkpoint = std::move(ckpt);
        outputs->checkpoint_path = ckpt_path;
        outputs->metrics_path = metrics_path;
    }
    return trained.diverged ? kExitRuntimeError : kExitNoTrigger;
}

int cmd_calibrate(const HarnessConfig& config, const std::string& out_dir, std::ostream& diag,
                  const std::string& checkpoint_override) {
    if (config.calibration_episodes <= 0)
        throw std::invalid_argument("calibration requires at least one episode");
    ensure_dir(out_dir);

    const std::string ckpt_path =
        checkpoint_override.empty() ? config.scenario.checkpoint : checkpoint_override;
    if (ckpt_path.empty())
        throw std::invalid_argument("no checkpoint path configured (scenario.checkpoint)");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);

    constexpr double kInf = std::numeric_limits<double>::infinity();
    ThresholdProfile profile;
    profile.quantile = config.monitor.calibration_quantile;
    profile.smoothing_alpha = config.monitor.smoothing_alpha;
    profile.debounce_m = config.monitor.debounce_m;
    profile.arming_step = config.monitor.arming_step;
    profile.n_horizon = config.monitor.n_horizon;
    profile.stats_hash = stats_hash(ckpt.stats);
    profile.seed = config.scenario.seed;
    profile.episodes = config.calibration_episodes;

    diag << "calibrating on " << config.calibration_episodes << " nominal episodes\n";
    for (int ep = 0; ep < config.calibration_episodes; ++ep) {
        const std::uint64_t seed =
            config.scenario.seed + kCalibrationSeedOffset + static_cast<std::uint64_t>(ep);
        const ScenarioResult run =
            run_scenario(config, ckpt, kInf, kInf, {}, seed, config.env.episode_len);
        for (const auto& rep : run.reports) {
            if (rep.t < config.monitor.arming_step) continue;
            profile.calibration_obs.push_back(rep.e_obs_smooth);
            profile.calibration_rew.push_back(rep.e_rew_smooth);
        }
    }

    profile.threshold_obs = calibrate_threshold(profile.calibration_obs, profile.quantile);
    profile.threshold_rew = calibrate_threshold(profile.calibration_rew, profile.quantile);
    diag << "threshold_obs=" << profile.threshold_obs
         << " threshold_rew=" << profile.threshold_rew << " (quantile=" << profile.quantile
         << ", " << profile.calibration_obs.size() << " samples)\n";

    const std::string path = (fs::path(out_dir) / "thresholds.json").string();
    save_threshold_profile(profile, path);
    write_text((fs::path(out_dir) / "resolved_config.json").string(), dump_config(config));
    diag << "threshold profile: " << path << "\n";
    return kExitNoTrigger;
}

namespace {

void write_scenario_plots(const HarnessConfig& config, const ScenarioResult& result,
                          const std::string& out_dir) {
    const int d = result.log.d_obs;
    std::vector<double> onsets;
    for (const auto& ev : config.scenario.schedule)
        onsets.push_back(static_cast<double>(ev.onset_step));

    std::vector<PlotPanel> panels;
    for (int j = 0; j < d; ++j) {
        PlotPanel panel;
        panel.title = "obs[" + std::to_string(j) + "]";
        PlotSeries actual{"actual", "#1f77b4", {}, {}};
        PlotSeries predicted{"predicted", "#2ca02c", {}, {}};
        for (const auto& row : result.log.rows) {
            actual.x.push_back(row.step);
            actual.y.push_back(row.obs[j]);
            if (std::isfinite(row.pred_obs[j])) {
                predicted.x.push_back(row.step);
                predicted.y.push_back(row.pred_obs[j]);
            }
        }
        panel.series = {actual, predicted};
        panel.vlines = onsets;
        panels.push_back(std::move(panel));
    }
    write_svg_panels(panels, 2, (fs::path(out_dir) / "predictions.svg").string());

    PlotPanel obs_panel, rew_panel;
    obs_panel.title = "smoothed observation error";
    rew_panel.title = "smoothed reward error";
    PlotSeries eo{"e_obs_smooth", "#1f77b4", {}, {}};
    PlotSeries er{"e_rew_smooth", "#ff7f0e", {}, {}};
    for (const auto& row : result.log.rows) {
        eo.x.push_back(row.step);
        eo.y.push_back(row.e_obs_smooth);
        er.x.push_back(row.step);
        er.y.push_back(row.e_rew_smooth);
    }
    obs_panel.series = {eo};
    rew_panel.series = {er};
    obs_panel.vlines = onsets;
    rew_panel.vlines = onsets;
    if (!result.log.rows.empty()) obs_panel.hlines = {result.log.rows.front().threshold};
    for (const auto& trig : result.triggers)
        obs_panel.vlines.push_back(static_cast<double>(trig.step));
    write_svg_panels({obs_panel, rew_panel}, 1, (fs::path(out_dir) / "errors.svg").string());
}

}  // namespace

int cmd_monitor(const HarnessConfig& config, const std::string& out_dir, std::ostream& diag) {
    ensure_dir(out_dir);
    if (config.scenario.checkpoint.empty())
        throw std::invalid_argument("scenario.checkpoint not configured");
    if (config.scenario.thresholds.empty())
        throw std::invalid_argument("scenario.thresholds not configured");

    const Checkpoint ckpt = load_checkpoint(config.scenario.checkpoint);
    const ThresholdProfile profile = load_threshold_profile(config.scenario.thresholds);
    if (profile.stats_hash != stats_hash(ckpt.stats))
        throw std::runtime_error(
            "threshold profile does not match the checkpoint statistics (stats hash mismatch)");
    if (profile.n_horizon != config.monitor.n_horizon)
        throw std::runtime_error("threshold profile horizon differs from configured horizon");

    // the profile's smoothing/debounce settings are authoritative so that
    // online scoring and offline replay can never disagree
    HarnessConfig cfg = config;
    cfg.monitor.smoothing_alpha = profile.smoothing_alpha;
    cfg.monitor.debounce_m = profile.debounce_m;
    cfg.monitor.arming_step = profile.arming_step;

    const ScenarioResult result =
        run_scenario(cfg, ckpt, profile.threshold_obs, profile.threshold_rew,
                     cfg.scenario.schedule, cfg.scenario.seed, cfg.scenario.total_steps);

    write_run_log(result.log, (fs::path(out_dir) / "run_log.csv").string());
    write_scenario_plots(cfg, result, out_dir);
    write_text((fs::path(out_dir) / "resolved_config.json").string(), dump_config(cfg));

    for (const auto& trig : result.triggers) {
        diag << "trigger at step " << trig.step << " ("
             << (trig.kind == TriggerKind::Threshold ? "threshold" : "model-divergence")
             << "), e_obs_smooth=" << trig.e_obs_smooth << " threshold=" << trig.threshold
             << "\n";
    }
    if (result.triggers.empty()) diag << "no trigger\n";

    if (!cfg.scenario.schedule.empty() && cfg.monitor.per_dim_tracking) {
        const int onset = cfg.scenario.schedule.front().onset_step;
        try {
            const auto ranking = rank_per_dim_errors(result.reports, onset, 200);
            diag << "per-dimension error increase around onset " << onset << ":";
            for (std::size_t i = 0; i < ranking.size() && i < 5; ++i)
                diag << " dim" << ranking[i].dim << "=" << ranking[i].ratio;
            diag << "\n";
        } catch (const std::exception&) {
            // not enough reports around the onset; ranking is advisory output
        }
    }
    return result.triggers.empty() ? kExitNoTrigger : kExitTrigger;
}

ReplayResult rescore_run_log(const RunLog& log, const ThresholdProfile& profile,
                             const ReplayOverrides& overrides) {
    const double alpha = overrides.smoothing_alpha.value_or(profile.smoothing_alpha);
    const int debounce = overrides.debounce_m.value_or(profile.debounce_m);
    double thr_obs = profile.threshold_obs;
    if (overrides.quantile)
        thr_obs = calibrate_threshold(profile.calibration_obs, *overrides.quantile);

    ReplayResult result;
    result.rows = log.rows;
    EmaSmoother ema_obs, ema_rew;
    int consecutive = 0;
    for (auto& row : result.rows) {
        row.e_obs_smooth = ema_obs.update(row.e_obs, alpha);
        row.e_rew_smooth = ema_rew.update(row.e_rew, alpha);
        row.threshold = thr_obs;
        const bool exceeded = row.e_obs_smooth > thr_obs;
        if (row.step < profile.arming_step) {
            consecutive = 0;
        } else if (exceeded) {
            ++consecutive;
        } else {
            consecutive = 0;
        }
        row.triggered = consecutive >= debounce;
        if (consecutive == debounce) result.trigger_steps.push_back(row.step);
    }
    return result;
}

int cmd_replay(const std::string& run_log_path, const std::string& profile_path,
               const std::string& out_dir, const ReplayOverrides& overrides, std::ostream& diag) {
    ensure_dir(out_dir);
    const RunLog log = read_run_log(run_log_path);
    const ThresholdProfile profile = load_threshold_profile(profile_path);
    if (log.n_horizon != profile.n_horizon)
        throw std::runtime_error("run log horizon differs from threshold profile horizon");

    const ReplayResult replay = rescore_run_log(log, profile, overrides);

    RunLog out = log;
    out.rows = replay.rows;
    write_run_log(out, (fs::path(out_dir) / "rescored.csv").string());

    if (replay.trigger_steps.empty()) {
        diag << "no trigger\n";
    } else {
        diag << "trigger at step " << replay.trigger_steps.front() << "\n";
    }
    return replay.trigger_steps.empty() ? kExitNoTrigger : kExitTrigger;
}

}  // namespace wmmon
