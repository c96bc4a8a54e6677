// Independent reference implementations used as test oracles. Everything here
// is written as plain scalar loops over std::vector, deliberately sharing no
// code path with the library implementations it checks.
#pragma once

#include <cmath>
#include <vector>

#include "wmmon/env.hpp"
#include "wmmon/training.hpp"
#include "wmmon/world_model.hpp"

namespace oracle {

using DVec = std::vector<double>;
using DMat = std::vector<std::vector<double>>;  // rows

inline DVec to_dvec(const wmmon::Vec& v) {
    DVec out(static_cast<std::size_t>(v.size()));
    for (long i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i];
    return out;
}

inline DMat to_dmat(const wmmon::Mat& m) {
    DMat out(static_cast<std::size_t>(m.rows()), DVec(static_cast<std::size_t>(m.cols())));
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c)
            out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
    return out;
}

inline DVec affine(const DMat& W, const DVec& b, const DVec& x) {
    DVec y(W.size());
    for (std::size_t r = 0; r < W.size(); ++r) {
        double acc = b[r];
        for (std::size_t c = 0; c < x.size(); ++c) acc += W[r][c] * x[c];
        y[r] = acc;
    }
    return y;
}

inline DVec tanh_v(DVec v) {
    for (auto& x : v) x = std::tanh(x);
    return v;
}

inline DVec sigmoid_v(DVec v) {
    for (auto& x : v) x = 1.0 / (1.0 + std::exp(-x));
    return v;
}

inline DVec concat(const DVec& a, const DVec& b) {
    DVec out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline DVec concat(const DVec& a, const DVec& b, const DVec& c) {
    return concat(concat(a, b), c);
}

inline DVec mlp2(const DMat& W1, const DVec& b1, const DMat& W2, const DVec& b2, const DVec& x) {
    return affine(W2, b2, tanh_v(affine(W1, b1, x)));
}

// --- world-model forward passes -------------------------------------------

struct ModelRefs {
    DMat We1, We2, Wr, Wu, Wc, Wp, Wd1, Wd2, Wh1, Wh2;
    DVec be1, be2, br, bu, bc, bp, bd1, bd2, bh1, bh2;

    explicit ModelRefs(const wmmon::WorldModelParams& p)
        : We1(to_dmat(p.encoder.l1.W)), We2(to_dmat(p.encoder.l2.W)),
          Wr(to_dmat(p.cell.Wr)), Wu(to_dmat(p.cell.Wu)), Wc(to_dmat(p.cell.Wc)),
          Wp(to_dmat(p.prior.W)),
          Wd1(to_dmat(p.obs_decoder.l1.W)), Wd2(to_dmat(p.obs_decoder.l2.W)),
          Wh1(to_dmat(p.reward_head.l1.W)), Wh2(to_dmat(p.reward_head.l2.W)),
          be1(to_dvec(p.encoder.l1.b)), be2(to_dvec(p.encoder.l2.b)),
          br(to_dvec(p.cell.br)), bu(to_dvec(p.cell.bu)), bc(to_dvec(p.cell.bc)),
          bp(to_dvec(p.prior.b)),
          bd1(to_dvec(p.obs_decoder.l1.b)), bd2(to_dvec(p.obs_decoder.l2.b)),
          bh1(to_dvec(p.reward_head.l1.b)), bh2(to_dvec(p.reward_head.l2.b)) {}

    DVec encode(const DVec& x, const DVec& h) const {
        return mlp2(We1, be1, We2, be2, concat(x, h));
    }
    DVec prior(const DVec& h) const { return affine(Wp, bp, h); }
    DVec decode_obs(const DVec& h, const DVec& z) const {
        return mlp2(Wd1, bd1, Wd2, bd2, concat(h, z));
    }
    double decode_reward(const DVec& h, const DVec& z) const {
        return mlp2(Wh1, bh1, Wh2, bh2, concat(h, z))[0];
    }
    DVec gru(const DVec& h, const DVec& z, const DVec& a) const {
        const DVec ga = concat(z, a, h);
        const DVec r = sigmoid_v(affine(Wr, br, ga));
        const DVec u = sigmoid_v(affine(Wu, bu, ga));
        DVec rh(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) rh[i] = r[i] * h[i];
        const DVec c = tanh_v(affine(Wc, bc, concat(z, a, rh)));
        DVec hn(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) hn[i] = (1.0 - u[i]) * h[i] + u[i] * c[i];
        return hn;
    }
};

// Straight-line teacher-forced loss, column by column.
inline wmmon::LossBreakdown loss(const wmmon::WorldModelParams& params,
                                 const wmmon::SubseqBatch& batch,
                                 const wmmon::TrainConfig& config) {
    const ModelRefs m(params);
    const int L = batch.length();
    const int B = batch.batch_size();
    const int d_obs = params.dims.d_obs;
    const int d_z = params.dims.d_z;

    double obs_sum = 0.0, rew_sum = 0.0, lat_sum = 0.0;
    for (int b = 0; b < B; ++b) {
        DVec h(static_cast<std::size_t>(params.dims.d_h), 0.0);
        for (int t = 0; t < L; ++t) {
            const DVec x = to_dvec(batch.obs[static_cast<std::size_t>(t)].col(b));
            const DVec z = m.encode(x, h);
            const DVec zp = m.prior(h);
            const DVec xhat = m.decode_obs(h, z);
            const double rhat = m.decode_reward(h, z);
            for (int j = 0; j < d_obs; ++j) {
                const double d = xhat[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(j)];
                obs_sum += d * d;
            }
            const double dr = rhat - batch.rewards(t, b);
            rew_sum += dr * dr;
            for (int k = 0; k < d_z; ++k) {
                const double d = z[static_cast<std::size_t>(k)] - zp[static_cast<std::size_t>(k)];
                lat_sum += d * d;
            }
            if (t < L - 1) {
                const DVec a = to_dvec(batch.act[static_cast<std::size_t>(t)].col(b));
                h = m.gru(h, z, a);
            }
        }
    }
    wmmon::LossBreakdown out;
    const double nLB = static_cast<double>(L) * B;
    out.obs_recon = obs_sum / (nLB * d_obs);
    out.reward = rew_sum / nLB;
    out.latent_consistency = lat_sum / (nLB * d_z);
    out.total = out.obs_recon + config.reward_loss_weight * out.reward +
                config.latent_consistency_weight * out.latent_consistency;
    return out;
}

// --- environment one-step integrators --------------------------------------

struct HoverStep {
    double px, py, vx, vy, ax, ay;
    double reward;
    int waypoint_index;
};

inline HoverStep hover_step(double px, double py, double vx, double vy, double a0, double a1,
                            double gain0, double gain1, double gravity, double fx, double fy,
                            double dt, const std::vector<std::pair<double, double>>& waypoints,
                            int wp_index) {
    auto clip = [](double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); };
    HoverStep out{};
    out.ax = clip(a0) * gain0 * wmmon::kHoverThrustAccel + fx / wmmon::kHoverMass;
    out.ay = clip(a1) * gain1 * wmmon::kHoverThrustAccel - gravity + fy / wmmon::kHoverMass;
    out.vx = vx + dt * out.ax;
    out.vy = vy + dt * out.ay;
    out.px = px + dt * out.vx;
    out.py = py + dt * out.vy;
    const auto [wx, wy] = waypoints[static_cast<std::size_t>(wp_index) % waypoints.size()];
    const double dist_prev = std::hypot(wx - px, wy - py);
    const double dist_new = std::hypot(wx - out.px, wy - out.py);
    out.reward = wmmon::kRewardApproach * (dist_prev - dist_new);
    out.waypoint_index = wp_index;
    if (dist_new < wmmon::kWaypointRadius) {
        out.reward += wmmon::kRewardTraversal;
        out.waypoint_index = (wp_index + 1) % static_cast<int>(waypoints.size());
    }
    return out;
}

struct ArmStep {
    double t1, t2, w1, w2, al1, al2;
    double reward;
};

inline ArmStep arm_step(double t1, double t2, double w1, double w2, double a0, double a1,
                        double gain0, double gain1, double f0, double f1, double dt,
                        double vref0, double vref1) {
    auto clip = [](double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); };
    ArmStep out{};
    out.al1 = (clip(a0) * gain0 * wmmon::kArmTorqueScale + f0 - wmmon::kArmDamping * w1) /
              wmmon::kArmInertia;
    out.al2 = (clip(a1) * gain1 * wmmon::kArmTorqueScale + f1 - wmmon::kArmDamping * w2) /
              wmmon::kArmInertia;
    out.w1 = w1 + dt * out.al1;
    out.w2 = w2 + dt * out.al2;
    out.t1 = t1 + dt * out.w1;
    out.t2 = t2 + dt * out.w2;
    const double e0 = out.w1 - vref0;
    const double e1 = out.w2 - vref1;
    out.reward = std::exp(-(e0 * e0 + e1 * e1));
    return out;
}

inline std::pair<double, double> fingertip(double t1, double t2) {
    return {wmmon::kLinkLength1 * std::cos(t1) + wmmon::kLinkLength2 * std::cos(t1 + t2),
            wmmon::kLinkLength1 * std::sin(t1) + wmmon::kLinkLength2 * std::sin(t1 + t2)};
}

// --- error formulas ---------------------------------------------------------

inline std::pair<double, DVec> obs_error_bruteforce(const wmmon::Mat& pred,
                                                    const wmmon::Mat& actual) {
    const int n = static_cast<int>(pred.rows());
    const int d = static_cast<int>(pred.cols());
    DVec per_dim(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += std::abs(pred(i, j) - actual(i, j));
        per_dim[static_cast<std::size_t>(j)] = acc / n;
    }
    double e = 0.0;
    for (double v : per_dim) e += v;
    return {e / d, per_dim};
}

inline double reward_error_bruteforce(const wmmon::Vec& pred, const wmmon::Vec& actual) {
    double acc = 0.0;
    for (long i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - actual[i]);
    return acc / static_cast<double>(pred.size());
}

}  // namespace oracle
