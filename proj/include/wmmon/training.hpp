#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "wmmon/env.hpp"
#include "wmmon/world_model.hpp"

namespace wmmon {

// Time-aligned rollout record: T actions/rewards between T+1 observations.
// rewards[t] is the reward produced by actions.row(t).
struct Episode {
    Mat observations;        // (T+1) x d_obs
    Mat actions;             // T x d_act
    Vec rewards;             // T
    std::vector<char> dones; // T

    int length() const { return static_cast<int>(actions.rows()); }
    void validate() const;
};

struct ReplayBuffer {
    std::vector<Episode> episodes;
    std::size_t capacity = 512;

    void add(Episode ep);
    bool empty() const { return episodes.empty(); }
};

// Per-dimension observation statistics from the training buffer. Errors and
// model inputs use normalized units so thresholds transfer across dimensions.
struct NormStats {
    Vec mean;
    Vec std;

    Vec normalize(const Vec& obs) const { return (obs - mean).cwiseQuotient(std); }
    Vec denormalize(const Vec& obs) const { return obs.cwiseProduct(std) + mean; }
};

NormStats compute_norm_stats(const ReplayBuffer& buffer);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 16;  // subsequences per step
    int seq_len = 32;     // observations per subsequence
    int train_steps = 20000;
    double latent_consistency_weight = 1.0;
    double reward_loss_weight = 1.0;
    double grad_clip_norm = 100.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double obs_recon = 0.0;           // MSE of decoded vs true observations
    double reward = 0.0;              // MSE of decoded vs arrival rewards
    double latent_consistency = 0.0;  // MSE of posterior vs prior latent
};

// A batch of teacher-forcing subsequences in normalized units. Time-major:
// obs[t] and act[t] are (dim x batch) matrices, rewards(t, b) is the arrival
// reward delivered together with obs[t] (zero at episode start).
struct SubseqBatch {
    std::vector<Mat> obs;  // L entries
    std::vector<Mat> act;  // L-1 entries
    Mat rewards;           // L x B

    int length() const { return static_cast<int>(obs.size()); }
    int batch_size() const { return obs.empty() ? 0 : static_cast<int>(obs[0].cols()); }
};

// Teacher-forced loss: per step, z = encode(x_t, h_t); accumulate decoder,
// reward and posterior-vs-prior errors; advance h with the posterior z.
LossBreakdown compute_loss(const WorldModelParams& params, const SubseqBatch& batch,
                           const TrainConfig& config);

// Exact reverse-mode gradients of compute_loss through all time steps.
// grads must be shaped like params (zero_params works); it is overwritten.
LossBreakdown compute_gradients(const WorldModelParams& params, const SubseqBatch& batch,
                                const TrainConfig& config, WorldModelParams& grads);

// Deterministic episode-epoch sampler: every episode is visited once per
// |episodes| draws, so sampling never starves an episode.
class EpisodeSampler {
public:
    explicit EpisodeSampler(std::size_t n_episodes);
    std::size_t next(Rng& rng);

private:
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

SubseqBatch sample_batch(const ReplayBuffer& buffer, const NormStats& stats, int seq_len,
                         int batch_size, EpisodeSampler& sampler, Rng& rng);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    Vec m, v;
    int t = 0;

    explicit AdamState(int n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
};

void adam_step(Vec& params, const Vec& grad, AdamState& state, const AdamConfig& config);

// Clips g in place to the given global norm; returns the pre-clip norm.
double clip_grad_norm(Vec& g, double max_norm);

struct TrainMetricsRow {
    int step = 0;
    LossBreakdown loss;
    double grad_norm = 0.0;
};

struct TrainResult {
    WorldModelParams params;
    std::vector<TrainMetricsRow> metrics;
    bool diverged = false;
    int steps_completed = 0;
};

// Adam with gradient-norm clipping; deterministic given config.seed. On NaN
// divergence the last finite parameters are returned with diverged = true.
TrainResult train(const WorldModelParams& init, const ReplayBuffer& buffer,
                  const NormStats& stats, const TrainConfig& config);

using PolicyFn = std::function<Vec(const Vec& observation)>;

// Rolls one full episode; actions are clipped to [-1, 1] before being
// executed and recorded so the model sees exactly what the plant received.
Episode collect_episode(const EnvConfig& config, const std::vector<PerturbationEvent>& schedule,
                        const PolicyFn& policy, std::uint64_t seed);

}  // namespace wmmon
