#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmmon/rng.hpp"

namespace wmmon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ModelDims {
    int d_obs = 0;
    int d_act = 0;
    int d_h = 64;
    int d_z = 16;
    int d_hidden = 64;   // width of all perceptron hidden layers
    int n_horizon = 16;  // imagination depth

    void validate() const;
    bool operator==(const ModelDims&) const = default;
};

struct Linear {
    Mat W;
    Vec b;

    Vec forward(const Vec& x) const { return W * x + b; }
    Mat forward(const Mat& x) const { return (W * x).colwise() + b; }
};

// Two affine layers with a tanh in between.
struct Mlp2 {
    Linear l1, l2;

    Vec forward(const Vec& x) const {
        return l2.forward(Vec(l1.forward(x).array().tanh().matrix()));
    }
    Mat forward(const Mat& x) const {
        return l2.forward(Mat(l1.forward(x).array().tanh().matrix()));
    }
};

// Gated recurrent cell over input (z, a) with state h:
//   r = sigma(Wr [z;a;h] + br), u = sigma(Wu [z;a;h] + bu),
//   c = tanh(Wc [z;a;r.h] + bc), h' = (1-u).h + u.c
struct GruCell {
    Mat Wr, Wu, Wc;
    Vec br, bu, bc;
};

struct WorldModelParams {
    ModelDims dims;
    Mlp2 encoder;      // [x;h] -> z mean
    GruCell cell;      // (z, a, h) -> h'
    Linear prior;      // h -> z mean (imagination latent)
    Mlp2 obs_decoder;  // [h;z] -> x_hat
    Mlp2 reward_head;  // [h;z] -> r_hat
};

// The internal model state: deterministic recurrent vector plus latent code.
struct ModelState {
    Vec h;
    Vec z;
};

WorldModelParams zero_params(const ModelDims& dims);
WorldModelParams init_params(const ModelDims& dims, std::uint64_t seed);

ModelState initial_state(const WorldModelParams& params);

// Posterior latent mean given the (normalized) observation and current h.
Vec encode(const WorldModelParams& params, const Vec& obs, const Vec& h);

Vec sequence_step(const WorldModelParams& params, const Vec& h, const Vec& z, const Vec& a);

// Latent predicted from h alone; imagination advances with this in place of
// the posterior once real observations are no longer available.
Vec prior_latent(const WorldModelParams& params, const Vec& h);

Vec decode_obs(const WorldModelParams& params, const ModelState& s);
double decode_reward(const WorldModelParams& params, const ModelState& s);

using ActorFn = std::function<Vec(const ModelState&)>;

struct ImaginedStep {
    ModelState s;
    Vec obs;        // decoded observation, normalized units
    double reward;  // decoded reward
    Vec action;     // action the rollout assumed when leaving the previous state
};

// Optional latent sampling. Disabled by default so monitoring is
// deterministic; when enabled, z picks up N(0, sigma^2 I) noise.
struct LatentSampling {
    bool enabled = false;
    double sigma = 0.1;
    std::uint64_t seed = 0;
};

// Recursive n-step rollout with no environment access:
//   a_i = actor(s_i); h_{i+1} = cell(h_i, z_i, a_i); z_{i+1} = prior(h_{i+1}).
// Throws ModelDivergence if the rollout produces non-finite values.
std::vector<ImaginedStep> imagine(const WorldModelParams& params, const ModelState& s0,
                                  const ActorFn& actor, int n,
                                  const LatentSampling& sampling = {});

struct ModelDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat-parameter plumbing: fixed, documented tensor order used by the
// optimizer, the finite-difference tests and the checkpoint format.
struct TensorRef {
    std::string name;
    double* data;
    int rows;
    int cols;  // 1 for bias vectors
};

std::vector<TensorRef> param_tensors(WorldModelParams& params);
int param_count(const ModelDims& dims);
Vec flatten_params(const WorldModelParams& params);
void unflatten_params(const Vec& flat, WorldModelParams& params);

}  // namespace wmmon
