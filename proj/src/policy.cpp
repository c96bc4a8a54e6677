#include "wmmon/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace wmmon {

ScriptedPolicyConfig ScriptedPolicyConfig::defaults(EnvKind kind) {
    ScriptedPolicyConfig c;
    if (kind == EnvKind::TwoLinkArm) {
        c.kp = 1.0;
        c.kd = 0.0;
    }
    return c;
}

void ScriptedPolicyConfig::validate() const {
    if (!(kp > 0.0) || !std::isfinite(kp) || !std::isfinite(kd))
        throw std::invalid_argument("scripted policy gains invalid");
    if (!(action_clip > 0.0)) throw std::invalid_argument("action clip must be positive");
}

Vec scripted_action(const Vec& observation, EnvKind kind, const ScriptedPolicyConfig& config) {
    config.validate();
    Vec a(2);
    if (kind == EnvKind::PlanarHover) {
        if (observation.size() != 10)
            throw std::invalid_argument("scripted_action: planar-hover expects 10 dims");
        const Eigen::Vector2d vel(observation[2], observation[3]);
        const Eigen::Vector2d delta(observation[6], observation[7]);
        a = config.kp * delta - config.kd * vel;
        a[1] += config.hover_gravity_comp;
    } else {
        if (observation.size() != 8)
            throw std::invalid_argument("scripted_action: two-link-arm expects 8 dims");
        const Eigen::Vector2d vel(observation[4], observation[5]);
        a = config.kp * (config.arm_velocity_ref - vel);
    }
    return a.cwiseMax(-config.action_clip).cwiseMin(config.action_clip);
}

namespace {

ModelDims checked(const ModelDims& dims) {
    dims.validate();
    return dims;
}

}  // namespace

ActorParams zero_actor(const ModelDims& dims) {
    ActorParams a;
    a.dims = checked(dims);
    a.net.l1 = {Mat::Zero(dims.d_hidden, dims.d_h + dims.d_z), Vec::Zero(dims.d_hidden)};
    a.net.l2 = {Mat::Zero(dims.d_act, dims.d_hidden), Vec::Zero(dims.d_act)};
    return a;
}

ActorParams init_actor(const ModelDims& dims, std::uint64_t seed) {
    ActorParams a = zero_actor(dims);
    Rng rng(seed);
    for (auto& t : actor_tensors(a)) {
        if (t.cols == 1) continue;
        const double scale = 1.0 / std::sqrt(static_cast<double>(t.cols));
        for (int i = 0; i < t.rows * t.cols; ++i) t.data[i] = scale * rng.next_gaussian();
    }
    return a;
}

Vec latent_action(const ActorParams& actor, const ModelState& s) {
    if (s.h.size() != actor.dims.d_h || s.z.size() != actor.dims.d_z)
        throw std::invalid_argument("latent_action: dimension mismatch");
    if (!s.h.allFinite() || !s.z.allFinite())
        throw std::invalid_argument("NaN/Inf in model state");
    Vec in(s.h.size() + s.z.size());
    in << s.h, s.z;
    return actor.net.forward(in).array().tanh().matrix();
}

std::vector<TensorRef> actor_tensors(ActorParams& a) {
    return {
        {"actor.l1.W", a.net.l1.W.data(), static_cast<int>(a.net.l1.W.rows()),
         static_cast<int>(a.net.l1.W.cols())},
        {"actor.l1.b", a.net.l1.b.data(), static_cast<int>(a.net.l1.b.size()), 1},
        {"actor.l2.W", a.net.l2.W.data(), static_cast<int>(a.net.l2.W.rows()),
         static_cast<int>(a.net.l2.W.cols())},
        {"actor.l2.b", a.net.l2.b.data(), static_cast<int>(a.net.l2.b.size()), 1},
    };
}

int actor_param_count(const ModelDims& dims) {
    return dims.d_hidden * (dims.d_h + dims.d_z) + dims.d_hidden +
           dims.d_act * dims.d_hidden + dims.d_act;
}

Vec flatten_actor(const ActorParams& actor) {
    auto& a = const_cast<ActorParams&>(actor);
    Vec flat(actor_param_count(actor.dims));
    int off = 0;
    for (const auto& t : actor_tensors(a)) {
        const int n = t.rows * t.cols;
        flat.segment(off, n) = Eigen::Map<const Vec>(t.data, n);
        off += n;
    }
    return flat;
}

void unflatten_actor(const Vec& flat, ActorParams& actor) {
    if (flat.size() != actor_param_count(actor.dims))
        throw std::invalid_argument("unflatten_actor: size mismatch");
    int off = 0;
    for (auto& t : actor_tensors(actor)) {
        const int n = t.rows * t.cols;
        Eigen::Map<Vec>(t.data, n) = flat.segment(off, n);
        off += n;
    }
}

namespace {

// Teacher-forced filtering: model states visited along each episode, paired
// with the action executed there.
struct ClonePairs {
    Mat states;   // (d_h+d_z) x N
    Mat actions;  // d_act x N
};

ClonePairs build_pairs(const ReplayBuffer& buffer, const WorldModelParams& model,
                       const NormStats& stats) {
    const auto& d = model.dims;
    long total = 0;
    for (const auto& ep : buffer.episodes) total += ep.length();
    ClonePairs pairs;
    pairs.states.resize(d.d_h + d.d_z, total);
    pairs.actions.resize(d.d_act, total);
    long col = 0;
    for (const auto& ep : buffer.episodes) {
        Vec h = Vec::Zero(d.d_h);
        for (int t = 0; t < ep.length(); ++t) {
            const Vec x = stats.normalize(ep.observations.row(t).transpose());
            const Vec z = encode(model, x, h);
            pairs.states.col(col).head(d.d_h) = h;
            pairs.states.col(col).tail(d.d_z) = z;
            pairs.actions.col(col) = ep.actions.row(t).transpose();
            ++col;
            h = sequence_step(model, h, z, ep.actions.row(t).transpose());
        }
    }
    return pairs;
}

}  // namespace

CloneResult clone_actor(const ReplayBuffer& buffer, const WorldModelParams& model,
                        const NormStats& stats, const ActorParams& init,
                        const CloneConfig& config) {
    if (buffer.empty()) throw std::invalid_argument("clone_actor: empty buffer");
    if (config.train_steps < 0 || config.batch_size <= 0 || config.learning_rate <= 0)
        throw std::invalid_argument("clone_actor: invalid config");

    const ClonePairs pairs = build_pairs(buffer, model, stats);
    const long n_pairs = pairs.states.cols();
    const auto& d = model.dims;

    CloneResult result;
    result.actor = init;
    Vec flat = flatten_actor(result.actor);
    AdamState adam(static_cast<int>(flat.size()));
    const AdamConfig adam_cfg{config.learning_rate, 0.9, 0.999, 1e-8};
    Rng rng(config.seed);

    Mat xb(d.d_h + d.d_z, config.batch_size);
    Mat ab(d.d_act, config.batch_size);
    ActorParams grads = zero_actor(d);

    for (int step = 0; step < config.train_steps; ++step) {
        for (int b = 0; b < config.batch_size; ++b) {
            const long i = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(n_pairs)));
            xb.col(b) = pairs.states.col(i);
            ab.col(b) = pairs.actions.col(i);
        }
        // forward
        const Mat h1 = (result.actor.net.l1.forward(xb)).array().tanh().matrix();
        const Mat pre = result.actor.net.l2.forward(h1);
        const Mat out = pre.array().tanh().matrix();
        const Mat diff = out - ab;
        const double mse = diff.squaredNorm() / static_cast<double>(diff.size());
        // backward
        const Mat dout = (2.0 / static_cast<double>(diff.size())) * diff;
        const Mat dpre = dout.cwiseProduct((1.0 - out.array().square()).matrix());
        grads.net.l2.W = dpre * h1.transpose();
        grads.net.l2.b = dpre.rowwise().sum();
        const Mat dh1 = result.actor.net.l2.W.transpose() * dpre;
        const Mat dpre1 = dh1.cwiseProduct((1.0 - h1.array().square()).matrix());
        grads.net.l1.W = dpre1 * xb.transpose();
        grads.net.l1.b = dpre1.rowwise().sum();

        Vec gflat = flatten_actor(grads);
        if (!std::isfinite(mse) || !gflat.allFinite()) {
            result.diverged = true;
            break;
        }
        adam_step(flat, gflat, adam, adam_cfg);
        unflatten_actor(flat, result.actor);
        result.final_mse = mse;
    }
    return result;
}

ActorFn make_latent_actor_fn(const ActorParams& actor) {
    return [actor](const ModelState& s) { return latent_action(actor, s); };
}

ActorFn make_decoded_scripted_actor_fn(const WorldModelParams& model, const NormStats& stats,
                                        EnvKind kind, const ScriptedPolicyConfig& config) {
    return [model, stats, kind, config](const ModelState& s) {
        const Vec x = stats.denormalize(decode_obs(model, s));
        return scripted_action(x, kind, config);
    };
}

}  // namespace wmmon
