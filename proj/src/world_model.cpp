#include "wmmon/world_model.hpp"

#include <cmath>
#include <stdexcept>

namespace wmmon {

void ModelDims::validate() const {
    if (d_obs <= 0 || d_act <= 0 || d_h <= 0 || d_z <= 0 || d_hidden <= 0 || n_horizon <= 0)
        throw std::invalid_argument("all model dimensions must be positive");
}

namespace {

Vec sigmoid(const Vec& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

void check_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) throw std::invalid_argument(std::string("NaN/Inf in ") + what);
}

}  // namespace

WorldModelParams zero_params(const ModelDims& dims) {
    dims.validate();
    WorldModelParams p;
    p.dims = dims;
    const int ga = dims.d_z + dims.d_act + dims.d_h;
    p.encoder.l1 = {Mat::Zero(dims.d_hidden, dims.d_obs + dims.d_h), Vec::Zero(dims.d_hidden)};
    p.encoder.l2 = {Mat::Zero(dims.d_z, dims.d_hidden), Vec::Zero(dims.d_z)};
    p.cell.Wr = Mat::Zero(dims.d_h, ga);
    p.cell.Wu = Mat::Zero(dims.d_h, ga);
    p.cell.Wc = Mat::Zero(dims.d_h, ga);
    p.cell.br = Vec::Zero(dims.d_h);
    p.cell.bu = Vec::Zero(dims.d_h);
    p.cell.bc = Vec::Zero(dims.d_h);
    p.prior = {Mat::Zero(dims.d_z, dims.d_h), Vec::Zero(dims.d_z)};
    p.obs_decoder.l1 = {Mat::Zero(dims.d_hidden, dims.d_h + dims.d_z), Vec::Zero(dims.d_hidden)};
    p.obs_decoder.l2 = {Mat::Zero(dims.d_obs, dims.d_hidden), Vec::Zero(dims.d_obs)};
    p.reward_head.l1 = {Mat::Zero(dims.d_hidden, dims.d_h + dims.d_z), Vec::Zero(dims.d_hidden)};
    p.reward_head.l2 = {Mat::Zero(1, dims.d_hidden), Vec::Zero(1)};
    return p;
}

WorldModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
    WorldModelParams p = zero_params(dims);
    Rng rng(seed);
    for (auto& t : param_tensors(p)) {
        if (t.cols == 1) continue;  // biases start at zero
        const double scale = 1.0 / std::sqrt(static_cast<double>(t.cols));
        for (int i = 0; i < t.rows * t.cols; ++i) t.data[i] = scale * rng.next_gaussian();
    }
    return p;
}

ModelState initial_state(const WorldModelParams& params) {
    return {Vec::Zero(params.dims.d_h), Vec::Zero(params.dims.d_z)};
}

Vec encode(const WorldModelParams& params, const Vec& obs, const Vec& h) {
    if (obs.size() != params.dims.d_obs || h.size() != params.dims.d_h)
        throw std::invalid_argument("encode: dimension mismatch");
    check_finite(obs, "encode observation");
    check_finite(h, "encode recurrent state");
    Vec in(obs.size() + h.size());
    in << obs, h;
    return params.encoder.forward(in);
}

Vec sequence_step(const WorldModelParams& params, const Vec& h, const Vec& z, const Vec& a) {
    const auto& d = params.dims;
    if (h.size() != d.d_h || z.size() != d.d_z || a.size() != d.d_act)
        throw std::invalid_argument("sequence_step: dimension mismatch");
    check_finite(h, "sequence_step h");
    check_finite(z, "sequence_step z");
    check_finite(a, "sequence_step action");
    Vec ga(d.d_z + d.d_act + d.d_h);
    ga << z, a, h;
    const Vec r = sigmoid(params.cell.Wr * ga + params.cell.br);
    const Vec u = sigmoid(params.cell.Wu * ga + params.cell.bu);
    Vec gc(ga.size());
    gc << z, a, r.cwiseProduct(h);
    const Vec c = (params.cell.Wc * gc + params.cell.bc).array().tanh().matrix();
    return ((1.0 - u.array()) * h.array() + u.array() * c.array()).matrix();
}

Vec prior_latent(const WorldModelParams& params, const Vec& h) {
    if (h.size() != params.dims.d_h) throw std::invalid_argument("prior_latent: dimension mismatch");
    check_finite(h, "prior_latent h");
    return params.prior.forward(h);
}

namespace {

Vec state_features(const WorldModelParams& params, const ModelState& s) {
    if (s.h.size() != params.dims.d_h || s.z.size() != params.dims.d_z)
        throw std::invalid_argument("model state: dimension mismatch");
    Vec in(s.h.size() + s.z.size());
    in << s.h, s.z;
    return in;
}

}  // namespace

Vec decode_obs(const WorldModelParams& params, const ModelState& s) {
    return params.obs_decoder.forward(state_features(params, s));
}

double decode_reward(const WorldModelParams& params, const ModelState& s) {
    return params.reward_head.forward(state_features(params, s))[0];
}

std::vector<ImaginedStep> imagine(const WorldModelParams& params, const ModelState& s0,
                                  const ActorFn& actor, int n, const LatentSampling& sampling) {
    if (n < 0) throw std::invalid_argument("imagine: n must be >= 0");
    std::vector<ImaginedStep> out;
    out.reserve(static_cast<std::size_t>(n));
    ModelState s = s0;
    Rng rng(sampling.seed);
    for (int i = 0; i < n; ++i) {
        Vec a = actor(s);
        if (a.size() != params.dims.d_act || !a.allFinite())
            throw ModelDivergence("imagine: actor produced an invalid action");
        ModelState next;
        next.h = sequence_step(params, s.h, s.z, a);
        next.z = prior_latent(params, next.h);
        if (sampling.enabled) {
            for (int j = 0; j < next.z.size(); ++j)
                next.z[j] += sampling.sigma * rng.next_gaussian();
        }
        if (!next.h.allFinite() || !next.z.allFinite())
            throw ModelDivergence("imagine: rollout diverged (NaN/Inf in model state)");
        ImaginedStep step;
        step.s = next;
        step.obs = decode_obs(params, next);
        step.reward = decode_reward(params, next);
        step.action = std::move(a);
        if (!step.obs.allFinite() || !std::isfinite(step.reward))
            throw ModelDivergence("imagine: rollout diverged (NaN/Inf in decoded output)");
        out.push_back(std::move(step));
        s = out.back().s;
    }
    return out;
}

std::vector<TensorRef> param_tensors(WorldModelParams& p) {
    auto mat = [](const std::string& name, Mat& m) {
        return TensorRef{name, m.data(), static_cast<int>(m.rows()), static_cast<int>(m.cols())};
    };
    auto vec = [](const std::string& name, Vec& v) {
        return TensorRef{name, v.data(), static_cast<int>(v.size()), 1};
    };
    return {
        mat("encoder.l1.W", p.encoder.l1.W),       vec("encoder.l1.b", p.encoder.l1.b),
        mat("encoder.l2.W", p.encoder.l2.W),       vec("encoder.l2.b", p.encoder.l2.b),
        mat("cell.Wr", p.cell.Wr),                 vec("cell.br", p.cell.br),
        mat("cell.Wu", p.cell.Wu),                 vec("cell.bu", p.cell.bu),
        mat("cell.Wc", p.cell.Wc),                 vec("cell.bc", p.cell.bc),
        mat("prior.W", p.prior.W),                 vec("prior.b", p.prior.b),
        mat("obs_decoder.l1.W", p.obs_decoder.l1.W), vec("obs_decoder.l1.b", p.obs_decoder.l1.b),
        mat("obs_decoder.l2.W", p.obs_decoder.l2.W), vec("obs_decoder.l2.b", p.obs_decoder.l2.b),
        mat("reward_head.l1.W", p.reward_head.l1.W), vec("reward_head.l1.b", p.reward_head.l1.b),
        mat("reward_head.l2.W", p.reward_head.l2.W), vec("reward_head.l2.b", p.reward_head.l2.b),
    };
}

int param_count(const ModelDims& dims) {
    const int ga = dims.d_z + dims.d_act + dims.d_h;
    int n = 0;
    n += dims.d_hidden * (dims.d_obs + dims.d_h) + dims.d_hidden;  // encoder l1
    n += dims.d_z * dims.d_hidden + dims.d_z;                      // encoder l2
    n += 3 * (dims.d_h * ga + dims.d_h);                           // cell
    n += dims.d_z * dims.d_h + dims.d_z;                           // prior
    n += dims.d_hidden * (dims.d_h + dims.d_z) + dims.d_hidden;    // obs dec l1
    n += dims.d_obs * dims.d_hidden + dims.d_obs;                  // obs dec l2
    n += dims.d_hidden * (dims.d_h + dims.d_z) + dims.d_hidden;    // reward l1
    n += dims.d_hidden + 1;                                        // reward l2
    return n;
}

Vec flatten_params(const WorldModelParams& params) {
    auto& p = const_cast<WorldModelParams&>(params);
    Vec flat(param_count(params.dims));
    int off = 0;
    for (const auto& t : param_tensors(p)) {
        const int n = t.rows * t.cols;
        flat.segment(off, n) = Eigen::Map<const Vec>(t.data, n);
        off += n;
    }
    return flat;
}

void unflatten_params(const Vec& flat, WorldModelParams& params) {
    if (flat.size() != param_count(params.dims))
        throw std::invalid_argument("unflatten_params: size mismatch");
    int off = 0;
    for (auto& t : param_tensors(params)) {
        const int n = t.rows * t.cols;
        Eigen::Map<Vec>(t.data, n) = flat.segment(off, n);
        off += n;
    }
}

}  // namespace wmmon
