#include "wmmon/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmmon {

void Episode::validate() const {
    const int T = length();
    if (observations.rows() != T + 1)
        throw std::invalid_argument("episode: observations must have T+1 rows");
    if (rewards.size() != T || static_cast<int>(dones.size()) != T)
        throw std::invalid_argument("episode: rewards/dones length mismatch");
    if (!observations.allFinite() || !actions.allFinite() || !rewards.allFinite())
        throw std::invalid_argument("episode: non-finite values");
}

void ReplayBuffer::add(Episode ep) {
    ep.validate();
    episodes.push_back(std::move(ep));
    while (episodes.size() > capacity) episodes.erase(episodes.begin());
}

void TrainConfig::validate() const {
    if (learning_rate <= 0 || batch_size <= 0 || seq_len < 2 || train_steps < 0 ||
        latent_consistency_weight < 0 || reward_loss_weight < 0 || grad_clip_norm <= 0)
        throw std::invalid_argument("invalid training configuration");
}

NormStats compute_norm_stats(const ReplayBuffer& buffer) {
    if (buffer.empty()) throw std::invalid_argument("compute_norm_stats: empty buffer");
    const int d = static_cast<int>(buffer.episodes.front().observations.cols());
    Vec mean = Vec::Zero(d);
    long count = 0;
    for (const auto& ep : buffer.episodes) {
        mean += ep.observations.colwise().sum().transpose();
        count += ep.observations.rows();
    }
    mean /= static_cast<double>(count);
    Vec var = Vec::Zero(d);
    for (const auto& ep : buffer.episodes) {
        var += (ep.observations.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    var /= static_cast<double>(count);
    NormStats stats;
    stats.mean = mean;
    stats.std = var.array().sqrt().max(1e-8).matrix();
    return stats;
}

namespace {

Mat sigmoid(const Mat& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

// Per-step forward cache for backpropagation through time.
struct StepCache {
    Mat h;       // h_t before the step's advance
    Mat in_enc;  // [x_t; h_t]
    Mat e1;      // encoder hidden (tanh output)
    Mat z;       // posterior latent
    Mat zp;      // prior latent
    Mat in_dec;  // [h_t; z_t]
    Mat d1;      // obs-decoder hidden
    Mat xhat;
    Mat r1;      // reward-head hidden
    Mat rhat;    // 1 x B
    Mat ga;      // [z; a; h]
    Mat rg, ug;  // gates
    Mat rh;      // rg .* h
    Mat gc_in;   // [z; a; rh]
    Mat cg;      // candidate
};

void check_batch(const WorldModelParams& params, const SubseqBatch& batch) {
    const auto& d = params.dims;
    const int L = batch.length();
    if (L < 2) throw std::invalid_argument("subsequence length must be >= 2");
    if (static_cast<int>(batch.act.size()) != L - 1)
        throw std::invalid_argument("batch needs L-1 action matrices");
    if (batch.rewards.rows() != L) throw std::invalid_argument("batch rewards must be L x B");
    const int B = batch.batch_size();
    for (const auto& m : batch.obs)
        if (m.rows() != d.d_obs || m.cols() != B)
            throw std::invalid_argument("batch observation shape mismatch");
    for (const auto& m : batch.act)
        if (m.rows() != d.d_act || m.cols() != B)
            throw std::invalid_argument("batch action shape mismatch");
    if (batch.rewards.cols() != B) throw std::invalid_argument("batch rewards shape mismatch");
}

LossBreakdown forward_pass(const WorldModelParams& params, const SubseqBatch& batch,
                           const TrainConfig& config, std::vector<StepCache>* caches) {
    const auto& d = params.dims;
    const int L = batch.length();
    const int B = batch.batch_size();

    LossBreakdown loss;
    Mat h = Mat::Zero(d.d_h, B);
    if (caches) caches->resize(static_cast<std::size_t>(L));

    for (int t = 0; t < L; ++t) {
        StepCache local;
        StepCache& c = caches ? (*caches)[static_cast<std::size_t>(t)] : local;
        c.h = h;
        c.in_enc.resize(d.d_obs + d.d_h, B);
        c.in_enc << batch.obs[static_cast<std::size_t>(t)], h;
        c.e1 = (params.encoder.l1.forward(c.in_enc)).array().tanh().matrix();
        c.z = params.encoder.l2.forward(c.e1);
        c.zp = params.prior.forward(h);
        c.in_dec.resize(d.d_h + d.d_z, B);
        c.in_dec << h, c.z;
        c.d1 = (params.obs_decoder.l1.forward(c.in_dec)).array().tanh().matrix();
        c.xhat = params.obs_decoder.l2.forward(c.d1);
        c.r1 = (params.reward_head.l1.forward(c.in_dec)).array().tanh().matrix();
        c.rhat = params.reward_head.l2.forward(c.r1);

        loss.obs_recon += (c.xhat - batch.obs[static_cast<std::size_t>(t)]).squaredNorm();
        loss.reward += (c.rhat.row(0).transpose() - batch.rewards.row(t).transpose()).squaredNorm();
        loss.latent_consistency += (c.z - c.zp).squaredNorm();

        if (t < L - 1) {
            const Mat& a = batch.act[static_cast<std::size_t>(t)];
            c.ga.resize(d.d_z + d.d_act + d.d_h, B);
            c.ga << c.z, a, h;
            c.rg = sigmoid((params.cell.Wr * c.ga).colwise() + params.cell.br);
            c.ug = sigmoid((params.cell.Wu * c.ga).colwise() + params.cell.bu);
            c.rh = c.rg.cwiseProduct(h);
            c.gc_in.resize(d.d_z + d.d_act + d.d_h, B);
            c.gc_in << c.z, a, c.rh;
            c.cg = ((params.cell.Wc * c.gc_in).colwise() + params.cell.bc).array().tanh().matrix();
            h = ((1.0 - c.ug.array()) * h.array() + c.ug.array() * c.cg.array()).matrix();
        }
    }

    const double nLB = static_cast<double>(L) * B;
    loss.obs_recon /= nLB * d.d_obs;
    loss.reward /= nLB;
    loss.latent_consistency /= nLB * d.d_z;
    loss.total = loss.obs_recon + config.reward_loss_weight * loss.reward +
                 config.latent_consistency_weight * loss.latent_consistency;
    return loss;
}

}  // namespace

LossBreakdown compute_loss(const WorldModelParams& params, const SubseqBatch& batch,
                           const TrainConfig& config) {
    check_batch(params, batch);
    return forward_pass(params, batch, config, nullptr);
}

LossBreakdown compute_gradients(const WorldModelParams& params, const SubseqBatch& batch,
                                const TrainConfig& config, WorldModelParams& grads) {
    check_batch(params, batch);
    const auto& d = params.dims;
    const int L = batch.length();
    const int B = batch.batch_size();

    std::vector<StepCache> caches;
    const LossBreakdown loss = forward_pass(params, batch, config, &caches);

    grads = zero_params(d);
    const double nLB = static_cast<double>(L) * B;
    const double w_obs = 2.0 / (nLB * d.d_obs);
    const double w_rew = 2.0 * config.reward_loss_weight / nLB;
    const double w_lat = 2.0 * config.latent_consistency_weight / (nLB * d.d_z);

    Mat dh_next = Mat::Zero(d.d_h, B);

    for (int t = L - 1; t >= 0; --t) {
        const StepCache& c = caches[static_cast<std::size_t>(t)];

        Mat dz_gru = Mat::Zero(d.d_z, B);
        Mat dh_gru = Mat::Zero(d.d_h, B);
        if (t < L - 1) {
            const Mat du = dh_next.cwiseProduct(c.cg - c.h);
            const Mat dc = dh_next.cwiseProduct(c.ug);
            Mat dh_acc = dh_next.cwiseProduct((1.0 - c.ug.array()).matrix());

            const Mat dpre_c = dc.cwiseProduct((1.0 - c.cg.array().square()).matrix());
            grads.cell.Wc += dpre_c * c.gc_in.transpose();
            grads.cell.bc += dpre_c.rowwise().sum();
            const Mat dgc = params.cell.Wc.transpose() * dpre_c;
            dz_gru += dgc.topRows(d.d_z);
            const Mat drh = dgc.bottomRows(d.d_h);
            const Mat drg = drh.cwiseProduct(c.h);
            dh_acc += drh.cwiseProduct(c.rg);

            const Mat dpre_u =
                du.cwiseProduct(c.ug.cwiseProduct((1.0 - c.ug.array()).matrix()));
            grads.cell.Wu += dpre_u * c.ga.transpose();
            grads.cell.bu += dpre_u.rowwise().sum();
            Mat dga = params.cell.Wu.transpose() * dpre_u;

            const Mat dpre_r =
                drg.cwiseProduct(c.rg.cwiseProduct((1.0 - c.rg.array()).matrix()));
            grads.cell.Wr += dpre_r * c.ga.transpose();
            grads.cell.br += dpre_r.rowwise().sum();
            dga += params.cell.Wr.transpose() * dpre_r;

            dz_gru += dga.topRows(d.d_z);
            dh_gru = dh_acc + dga.bottomRows(d.d_h);
        }

        // reward head
        const Mat drhat = w_rew * (c.rhat - batch.rewards.row(t));
        grads.reward_head.l2.W += drhat * c.r1.transpose();
        grads.reward_head.l2.b += drhat.rowwise().sum();
        const Mat dr1 = params.reward_head.l2.W.transpose() * drhat;
        const Mat dpre_r1 = dr1.cwiseProduct((1.0 - c.r1.array().square()).matrix());
        grads.reward_head.l1.W += dpre_r1 * c.in_dec.transpose();
        grads.reward_head.l1.b += dpre_r1.rowwise().sum();
        Mat d_in_dec = params.reward_head.l1.W.transpose() * dpre_r1;

        // observation decoder
        const Mat dxhat = w_obs * (c.xhat - batch.obs[static_cast<std::size_t>(t)]);
        grads.obs_decoder.l2.W += dxhat * c.d1.transpose();
        grads.obs_decoder.l2.b += dxhat.rowwise().sum();
        const Mat dd1 = params.obs_decoder.l2.W.transpose() * dxhat;
        const Mat dpre_d1 = dd1.cwiseProduct((1.0 - c.d1.array().square()).matrix());
        grads.obs_decoder.l1.W += dpre_d1 * c.in_dec.transpose();
        grads.obs_decoder.l1.b += dpre_d1.rowwise().sum();
        d_in_dec += params.obs_decoder.l1.W.transpose() * dpre_d1;

        Mat dh_local = d_in_dec.topRows(d.d_h);
        const Mat dz_local = d_in_dec.bottomRows(d.d_z);

        // latent consistency; gradient flows to both posterior and prior
        const Mat dz_lat = w_lat * (c.z - c.zp);
        const Mat dzp = -dz_lat;
        grads.prior.W += dzp * c.h.transpose();
        grads.prior.b += dzp.rowwise().sum();
        const Mat dh_prior = params.prior.W.transpose() * dzp;

        // encoder
        const Mat dz_total = dz_gru + dz_local + dz_lat;
        grads.encoder.l2.W += dz_total * c.e1.transpose();
        grads.encoder.l2.b += dz_total.rowwise().sum();
        const Mat de1 = params.encoder.l2.W.transpose() * dz_total;
        const Mat dpre_e1 = de1.cwiseProduct((1.0 - c.e1.array().square()).matrix());
        grads.encoder.l1.W += dpre_e1 * c.in_enc.transpose();
        grads.encoder.l1.b += dpre_e1.rowwise().sum();
        const Mat d_in_enc = params.encoder.l1.W.transpose() * dpre_e1;
        const Mat dh_enc = d_in_enc.bottomRows(d.d_h);

        dh_next = dh_gru + dh_local + dh_prior + dh_enc;
    }
    return loss;
}

EpisodeSampler::EpisodeSampler(std::size_t n_episodes) {
    if (n_episodes == 0) throw std::invalid_argument("sampler needs at least one episode");
    order_.resize(n_episodes);
    for (std::size_t i = 0; i < n_episodes; ++i) order_[i] = i;
    pos_ = n_episodes;  // force a shuffle on the first draw
}

std::size_t EpisodeSampler::next(Rng& rng) {
    if (pos_ >= order_.size()) {
        for (std::size_t i = order_.size(); i > 1; --i)
            std::swap(order_[i - 1], order_[rng.next_below(i)]);
        pos_ = 0;
    }
    return order_[pos_++];
}

SubseqBatch sample_batch(const ReplayBuffer& buffer, const NormStats& stats, int seq_len,
                         int batch_size, EpisodeSampler& sampler, Rng& rng) {
    const int L = seq_len;
    SubseqBatch batch;
    batch.obs.assign(static_cast<std::size_t>(L), Mat());
    batch.act.assign(static_cast<std::size_t>(L - 1), Mat());
    const int d_obs = static_cast<int>(stats.mean.size());
    const int d_act = static_cast<int>(buffer.episodes.front().actions.cols());
    for (auto& m : batch.obs) m.resize(d_obs, batch_size);
    for (auto& m : batch.act) m.resize(d_act, batch_size);
    batch.rewards.resize(L, batch_size);

    for (int b = 0; b < batch_size; ++b) {
        std::size_t idx = sampler.next(rng);
        int guard = 0;
        while (buffer.episodes[idx].observations.rows() < L) {
            idx = sampler.next(rng);
            if (++guard > static_cast<int>(buffer.episodes.size()))
                throw std::invalid_argument("no episode long enough for seq_len");
        }
        const Episode& ep = buffer.episodes[idx];
        const int max_start = static_cast<int>(ep.observations.rows()) - L;
        const int start = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_start + 1)));
        for (int t = 0; t < L; ++t) {
            batch.obs[static_cast<std::size_t>(t)].col(b) =
                stats.normalize(ep.observations.row(start + t).transpose());
            const int abs_t = start + t;
            batch.rewards(t, b) = abs_t == 0 ? 0.0 : ep.rewards[abs_t - 1];
            if (t < L - 1)
                batch.act[static_cast<std::size_t>(t)].col(b) = ep.actions.row(abs_t).transpose();
        }
    }
    return batch;
}

void adam_step(Vec& params, const Vec& grad, AdamState& state, const AdamConfig& config) {
    state.t += 1;
    state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
    state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(config.beta1, state.t);
    const double bc2 = 1.0 - std::pow(config.beta2, state.t);
    params -= (config.learning_rate * (state.m / bc1).array() /
               ((state.v / bc2).array().sqrt() + config.epsilon))
                  .matrix();
}

double clip_grad_norm(Vec& g, double max_norm) {
    const double norm = g.norm();
    if (norm > max_norm && norm > 0.0) g *= max_norm / norm;
    return norm;
}

TrainResult train(const WorldModelParams& init, const ReplayBuffer& buffer,
                  const NormStats& stats, const TrainConfig& config) {
    config.validate();
    if (buffer.empty()) throw std::invalid_argument("train: empty replay buffer");

    TrainResult result;
    result.params = init;
    result.metrics.reserve(static_cast<std::size_t>(config.train_steps));

    Rng rng(config.seed);
    EpisodeSampler sampler(buffer.episodes.size());
    Vec flat = flatten_params(result.params);
    AdamState adam(static_cast<int>(flat.size()));
    const AdamConfig adam_cfg{config.learning_rate, 0.9, 0.999, 1e-8};
    WorldModelParams grads = zero_params(init.dims);

    for (int step = 0; step < config.train_steps; ++step) {
        const SubseqBatch batch =
            sample_batch(buffer, stats, config.seq_len, config.batch_size, sampler, rng);
        const LossBreakdown loss = compute_gradients(result.params, batch, config, grads);
        Vec gflat = flatten_params(grads);
        const double raw_norm = gflat.norm();
        if (!std::isfinite(loss.total) || !std::isfinite(raw_norm)) {
            result.diverged = true;
            break;  // result.params still holds the last finite parameters
        }
        clip_grad_norm(gflat, config.grad_clip_norm);
        const Vec previous = flat;
        adam_step(flat, gflat, adam, adam_cfg);
        if (!flat.allFinite()) {
            flat = previous;
            result.diverged = true;
            break;
        }
        unflatten_params(flat, result.params);
        result.metrics.push_back({step, loss, raw_norm});
        result.steps_completed = step + 1;
    }
    return result;
}

Episode collect_episode(const EnvConfig& config, const std::vector<PerturbationEvent>& schedule,
                        const PolicyFn& policy, std::uint64_t seed) {
    config.validate();
    const int T = config.episode_len;
    Episode ep;
    ep.observations.resize(T + 1, config.obs_dim());
    ep.actions.resize(T, config.action_dim());
    ep.rewards.resize(T);
    ep.dones.assign(static_cast<std::size_t>(T), 0);

    auto [state, obs] = env_reset(config, seed);
    ep.observations.row(0) = obs.transpose();
    for (int t = 0; t < T; ++t) {
        const Vec action = policy(obs).cwiseMax(-1.0).cwiseMin(1.0);
        auto [next_state, result] = env_step(state, action, config, schedule);
        ep.actions.row(t) = action.transpose();
        ep.rewards[t] = result.reward;
        ep.dones[static_cast<std::size_t>(t)] = result.done ? 1 : 0;
        state = next_state;
        obs = result.observation;
        ep.observations.row(t + 1) = obs.transpose();
    }
    ep.validate();
    return ep;
}

}  // namespace wmmon
