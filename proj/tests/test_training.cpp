#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "wmmon/policy.hpp"
#include "wmmon/training.hpp"

using namespace wmmon;

namespace {

ModelDims small_dims() {
    ModelDims d;
    d.d_obs = 5;
    d.d_act = 2;
    d.d_h = 7;
    d.d_z = 3;
    d.d_hidden = 6;
    return d;
}

SubseqBatch random_batch(const ModelDims& dims, int L, int B, std::uint64_t seed) {
    Rng rng(seed);
    SubseqBatch batch;
    for (int t = 0; t < L; ++t)
        batch.obs.push_back(
            Mat::NullaryExpr(dims.d_obs, B, [&](int, int) { return rng.next_gaussian(); }));
    for (int t = 0; t < L - 1; ++t)
        batch.act.push_back(
            Mat::NullaryExpr(dims.d_act, B, [&](int, int) { return rng.next_gaussian(); }));
    batch.rewards = Mat::NullaryExpr(L, B, [&](int, int) { return rng.next_gaussian(); });
    return batch;
}

SubseqBatch constant_batch(const ModelDims& dims, int L, int B, double obs_value,
                           double reward_value) {
    SubseqBatch batch;
    for (int t = 0; t < L; ++t) batch.obs.push_back(Mat::Constant(dims.d_obs, B, obs_value));
    for (int t = 0; t < L - 1; ++t) batch.act.push_back(Mat::Zero(dims.d_act, B));
    batch.rewards = Mat::Constant(L, B, reward_value);
    return batch;
}

ReplayBuffer hover_buffer(int episodes, int episode_len, double noise = 0.01) {
    auto env = EnvConfig::defaults(EnvKind::PlanarHover);
    env.episode_len = episode_len;
    env.sensor_noise_std = noise;
    const auto policy_cfg = ScriptedPolicyConfig::defaults(env.kind);
    ReplayBuffer buffer;
    buffer.capacity = static_cast<std::size_t>(episodes);
    for (int i = 0; i < episodes; ++i) {
        buffer.add(collect_episode(env, {}, [&](const Vec& obs) {
            return scripted_action(obs, env.kind, policy_cfg);
        }, static_cast<std::uint64_t>(i)));
    }
    return buffer;
}

}  // namespace

TEST_CASE("zero parameters, all-zero batch: every loss term is zero") {
    const auto dims = small_dims();
    const auto p = zero_params(dims);
    const auto batch = constant_batch(dims, 4, 3, 0.0, 0.0);
    const auto loss = compute_loss(p, batch, TrainConfig{});
    CHECK(loss.obs_recon == 0.0);
    CHECK(loss.reward == 0.0);
    CHECK(loss.latent_consistency == 0.0);
    CHECK(loss.total == 0.0);
}

TEST_CASE("zero parameters, observations of one: obs_recon = 1") {
    const auto dims = small_dims();
    const auto p = zero_params(dims);
    const auto batch = constant_batch(dims, 4, 3, 1.0, 0.0);
    const auto loss = compute_loss(p, batch, TrainConfig{});
    CHECK(loss.obs_recon == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(loss.reward == 0.0);
    CHECK(loss.latent_consistency == 0.0);
}

TEST_CASE("loss matches the straight-line oracle to 1e-10") {
    const auto dims = small_dims();
    TrainConfig cfg;
    cfg.reward_loss_weight = 0.7;
    cfg.latent_consistency_weight = 1.3;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = init_params(dims, seed);
        const auto batch = random_batch(dims, 6, 4, seed + 100);
        const auto loss = compute_loss(p, batch, cfg);
        const auto ref = oracle::loss(p, batch, cfg);
        CHECK(loss.obs_recon == doctest::Approx(ref.obs_recon).epsilon(1e-10));
        CHECK(loss.reward == doctest::Approx(ref.reward).epsilon(1e-10));
        CHECK(loss.latent_consistency ==
              doctest::Approx(ref.latent_consistency).epsilon(1e-10));
        CHECK(loss.total == doctest::Approx(ref.total).epsilon(1e-10));
    }
}

TEST_CASE("loss breakdown satisfies its own invariant") {
    const auto dims = small_dims();
    TrainConfig cfg;
    cfg.reward_loss_weight = 2.0;
    cfg.latent_consistency_weight = 0.5;
    const auto p = init_params(dims, 1);
    const auto batch = random_batch(dims, 5, 3, 42);
    const auto loss = compute_loss(p, batch, cfg);
    CHECK(loss.obs_recon >= 0.0);
    CHECK(loss.reward >= 0.0);
    CHECK(loss.latent_consistency >= 0.0);
    CHECK(loss.total == doctest::Approx(loss.obs_recon + cfg.reward_loss_weight * loss.reward +
                                        cfg.latent_consistency_weight * loss.latent_consistency)
                            .epsilon(1e-15));
}

TEST_CASE("gradients vanish at a zero-loss configuration") {
    const auto dims = small_dims();
    const auto p = zero_params(dims);
    const auto batch = constant_batch(dims, 4, 2, 0.0, 0.0);
    auto grads = zero_params(dims);
    compute_gradients(p, batch, TrainConfig{}, grads);
    CHECK(flatten_params(grads).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto dims = small_dims();
    TrainConfig cfg;
    cfg.reward_loss_weight = 0.8;
    cfg.latent_consistency_weight = 1.1;
    auto p = init_params(dims, 7);
    const auto batch = random_batch(dims, 8, 3, 1234);

    auto grads = zero_params(dims);
    compute_gradients(p, batch, cfg, grads);
    const Vec g = flatten_params(grads);
    Vec flat = flatten_params(p);

    const double eps = 1e-4;
    Rng rng(99);
    const int total = static_cast<int>(flat.size());
    // sample indices across every tensor plus uniform draws
    std::set<int> indices;
    {
        auto tensors = param_tensors(p);
        int off = 0;
        for (const auto& t : tensors) {
            indices.insert(off + static_cast<int>(rng.next_below(
                                     static_cast<std::uint64_t>(t.rows * t.cols))));
            off += t.rows * t.cols;
        }
    }
    while (indices.size() < 64)
        indices.insert(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(total))));

    auto wiggled = p;
    for (int idx : indices) {
        Vec probe = flat;
        probe[idx] = flat[idx] + eps;
        unflatten_params(probe, wiggled);
        const double hi = compute_loss(wiggled, batch, cfg).total;
        probe[idx] = flat[idx] - eps;
        unflatten_params(probe, wiggled);
        const double lo = compute_loss(wiggled, batch, cfg).total;
        const double fd = (hi - lo) / (2.0 * eps);
        const double denom = std::max({std::abs(fd), std::abs(g[idx]), 1e-8});
        CHECK(std::abs(fd - g[idx]) / denom < 1e-4);
    }
}

TEST_CASE("doubling the observation targets scales the output-layer gradient per MSE algebra") {
    // one step, zero parameters: d obs_recon / d bd2_j = 2 (0 - x_j) / d_obs,
    // so doubling x doubles that gradient exactly
    ModelDims dims = small_dims();
    const auto p = zero_params(dims);
    TrainConfig cfg;
    SubseqBatch one = constant_batch(dims, 2, 1, 1.0, 0.0);
    SubseqBatch two = constant_batch(dims, 2, 1, 2.0, 0.0);
    auto g1 = zero_params(dims), g2 = zero_params(dims);
    compute_gradients(p, one, cfg, g1);
    compute_gradients(p, two, cfg, g2);
    CHECK((g2.obs_decoder.l2.b - 2.0 * g1.obs_decoder.l2.b).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(g1.obs_decoder.l2.b[0] == doctest::Approx(-2.0 / dims.d_obs).epsilon(1e-12));
}

TEST_CASE("collect_episode keeps the length bookkeeping and is deterministic") {
    auto env = EnvConfig::defaults(EnvKind::PlanarHover);
    env.episode_len = 10;
    const auto policy_cfg = ScriptedPolicyConfig::defaults(env.kind);
    const PolicyFn policy = [&](const Vec& obs) {
        return scripted_action(obs, env.kind, policy_cfg);
    };
    const Episode ep = collect_episode(env, {}, policy, 3);
    CHECK(ep.observations.rows() == 11);
    CHECK(ep.actions.rows() == 10);
    CHECK(ep.rewards.size() == 10);
    CHECK(ep.dones.back() == 1);

    const Episode again = collect_episode(env, {}, policy, 3);
    CHECK(ep.observations == again.observations);
    CHECK(ep.actions == again.actions);
    CHECK(ep.rewards == again.rewards);
}

TEST_CASE("scripted episodes collect positive mean reward") {
    auto env = EnvConfig::defaults(EnvKind::PlanarHover);
    env.episode_len = 300;
    env.sensor_noise_std = 0.01;
    const auto policy_cfg = ScriptedPolicyConfig::defaults(env.kind);
    double total = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Episode ep = collect_episode(env, {}, [&](const Vec& obs) {
            return scripted_action(obs, env.kind, policy_cfg);
        }, static_cast<std::uint64_t>(i));
        total += ep.rewards.sum();
    }
    CHECK(total / 50.0 > 0.0);
}

TEST_CASE("normalization stats cover every episode and flooring") {
    ReplayBuffer buffer = hover_buffer(4, 30);
    const NormStats stats = compute_norm_stats(buffer);
    CHECK(stats.mean.size() == 10);
    CHECK((stats.std.array() > 0.0).all());
    const Vec x = buffer.episodes[0].observations.row(5).transpose();
    CHECK((stats.denormalize(stats.normalize(x)) - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("train with 0 steps returns the parameters unchanged") {
    ReplayBuffer buffer = hover_buffer(2, 40);
    const NormStats stats = compute_norm_stats(buffer);
    ModelDims dims;
    dims.d_obs = 10;
    dims.d_act = 2;
    dims.d_h = 16;
    dims.d_z = 4;
    dims.d_hidden = 16;
    TrainConfig cfg;
    cfg.train_steps = 0;
    cfg.seq_len = 8;
    const auto init = init_params(dims, 0);
    const TrainResult result = train(init, buffer, stats, cfg);
    CHECK(flatten_params(result.params) == flatten_params(init));
    CHECK(result.metrics.empty());
}

TEST_CASE("training is deterministic given the seed") {
    ReplayBuffer buffer = hover_buffer(3, 40);
    const NormStats stats = compute_norm_stats(buffer);
    ModelDims dims;
    dims.d_obs = 10;
    dims.d_act = 2;
    dims.d_h = 16;
    dims.d_z = 4;
    dims.d_hidden = 16;
    TrainConfig cfg;
    cfg.train_steps = 40;
    cfg.seq_len = 8;
    cfg.batch_size = 4;
    cfg.seed = 5;
    const auto init = init_params(dims, 1);
    const TrainResult a = train(init, buffer, stats, cfg);
    const TrainResult b = train(init, buffer, stats, cfg);
    CHECK(flatten_params(a.params) == flatten_params(b.params));
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].loss.total == b.metrics[i].loss.total);
        CHECK(a.metrics[i].grad_norm == b.metrics[i].grad_norm);
    }
}

TEST_CASE("training reduces held-out loss across seeds") {
    ReplayBuffer buffer = hover_buffer(6, 60);
    ReplayBuffer held_out = hover_buffer(2, 60, 0.01);
    held_out.episodes[0] = collect_episode(
        [] {
            auto env = EnvConfig::defaults(EnvKind::PlanarHover);
            env.episode_len = 60;
            env.sensor_noise_std = 0.01;
            return env;
        }(),
        {},
        [&](const Vec& obs) {
            return scripted_action(obs, EnvKind::PlanarHover,
                                   ScriptedPolicyConfig::defaults(EnvKind::PlanarHover));
        },
        991);
    const NormStats stats = compute_norm_stats(buffer);
    ModelDims dims;
    dims.d_obs = 10;
    dims.d_act = 2;
    dims.d_h = 24;
    dims.d_z = 6;
    dims.d_hidden = 24;

    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
        TrainConfig cfg;
        cfg.train_steps = 400;
        cfg.seq_len = 12;
        cfg.batch_size = 8;
        cfg.seed = seed;
        const auto init = init_params(dims, seed + 10);

        Rng rng(123);
        EpisodeSampler sampler(held_out.episodes.size());
        const SubseqBatch eval =
            sample_batch(held_out, stats, cfg.seq_len, 16, sampler, rng);
        const double before = compute_loss(init, eval, cfg).total;
        const TrainResult result = train(init, buffer, stats, cfg);
        const double after = compute_loss(result.params, eval, cfg).total;
        CHECK(after < before);
        CHECK(!result.diverged);
    }
}

TEST_CASE("episode sampling never starves an episode") {
    ReplayBuffer buffer = hover_buffer(8, 24);
    EpisodeSampler sampler(buffer.episodes.size());
    Rng rng(0);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < 10 * buffer.episodes.size(); ++i) seen.insert(sampler.next(rng));
    CHECK(seen.size() == buffer.episodes.size());
}

TEST_CASE("replay buffer capacity evicts the oldest episode") {
    ReplayBuffer buffer = hover_buffer(3, 20);
    buffer.capacity = 3;
    const Mat first = buffer.episodes.front().observations;
    auto env = EnvConfig::defaults(EnvKind::PlanarHover);
    env.episode_len = 20;
    buffer.add(collect_episode(env, {}, [&](const Vec& obs) {
        return scripted_action(obs, env.kind, ScriptedPolicyConfig::defaults(env.kind));
    }, 77));
    CHECK(buffer.episodes.size() == 3);
    CHECK(buffer.episodes.front().observations != first);
}

TEST_CASE("divergent training aborts with the last finite parameters") {
    ReplayBuffer buffer = hover_buffer(2, 40);
    const NormStats stats = compute_norm_stats(buffer);
    ModelDims dims;
    dims.d_obs = 10;
    dims.d_act = 2;
    dims.d_h = 8;
    dims.d_z = 4;
    dims.d_hidden = 8;
    TrainConfig cfg;
    cfg.train_steps = 50;
    cfg.seq_len = 8;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e155;  // guaranteed overflow within a couple of steps
    const auto init = init_params(dims, 0);
    const TrainResult result = train(init, buffer, stats, cfg);
    CHECK(result.diverged);
    CHECK(flatten_params(result.params).allFinite());
    CHECK(result.steps_completed < cfg.train_steps);
}

TEST_CASE("adam step and gradient clipping behave as specified") {
    Vec p = Vec::Zero(3);
    Vec g(3);
    g << 3.0, 4.0, 0.0;
    const double norm = clip_grad_norm(g, 2.5);
    CHECK(norm == doctest::Approx(5.0));
    CHECK(g.norm() == doctest::Approx(2.5).epsilon(1e-12));

    AdamState state(3);
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    adam_step(p, g, state, cfg);
    // first Adam step moves each coordinate by ~lr * sign(g)
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p[2] == 0.0);
}
