#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "wmmon/env.hpp"
#include "wmmon/training.hpp"
#include "wmmon/world_model.hpp"

namespace wmmon {

struct ScriptedPolicyConfig {
    double kp = 0.4;
    double kd = 0.6;
    double action_clip = 1.0;
    // planar-hover feedforward: thrust fraction holding the vehicle against
    // nominal gravity (g / thrust scale). The controller compensates the
    // gravity it was designed for, never the perturbed one.
    double hover_gravity_comp = 9.81 / kHoverThrustAccel;
    // two-link-arm joint-velocity setpoints tracked with the kp term
    Eigen::Vector2d arm_velocity_ref{0.8, -0.6};

    static ScriptedPolicyConfig defaults(EnvKind kind);
    void validate() const;
};

// Stateless PD law on the raw observation: hover steers toward the active
// waypoint with gravity feedforward; the arm regulates joint velocities to
// the reference. Output clipped to [-clip, clip].
Vec scripted_action(const Vec& observation, EnvKind kind, const ScriptedPolicyConfig& config);

// Two-layer perceptron from the model state (h;z) to a tanh-squashed action.
struct ActorParams {
    ModelDims dims;
    Mlp2 net;
};

ActorParams zero_actor(const ModelDims& dims);
ActorParams init_actor(const ModelDims& dims, std::uint64_t seed);

Vec latent_action(const ActorParams& actor, const ModelState& s);

std::vector<TensorRef> actor_tensors(ActorParams& actor);
Vec flatten_actor(const ActorParams& actor);
void unflatten_actor(const Vec& flat, ActorParams& actor);
int actor_param_count(const ModelDims& dims);

struct CloneConfig {
    double learning_rate = 1e-3;
    int batch_size = 256;  // (state, action) pairs
    int train_steps = 4000;
    std::uint64_t seed = 0;
};

struct CloneResult {
    ActorParams actor;
    double final_mse = 0.0;
    bool diverged = false;
};

// Behavior cloning: teacher-forced filtering of buffer episodes through the
// world model yields (s_t, a_t) pairs; the actor minimizes squared action
// error. Deterministic given config.seed.
CloneResult clone_actor(const ReplayBuffer& buffer, const WorldModelParams& model,
                        const NormStats& stats, const ActorParams& init,
                        const CloneConfig& config);

// actor-fn adapters for imagination
ActorFn make_latent_actor_fn(const ActorParams& actor);

// Fallback: decode the model state to an observation, undo normalization and
// ask the scripted controller.
ActorFn make_decoded_scripted_actor_fn(const WorldModelParams& model, const NormStats& stats,
                                       EnvKind kind, const ScriptedPolicyConfig& config);

}  // namespace wmmon
