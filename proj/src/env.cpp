#include "wmmon/env.hpp"

#include <cmath>
#include <stdexcept>

#include "wmmon/rng.hpp"

namespace wmmon {

std::string to_string(EnvKind kind) {
    return kind == EnvKind::PlanarHover ? "planar-hover" : "two-link-arm";
}

EnvKind env_kind_from_string(const std::string& s) {
    if (s == "planar-hover") return EnvKind::PlanarHover;
    if (s == "two-link-arm") return EnvKind::TwoLinkArm;
    throw std::invalid_argument("unknown env kind: " + s);
}

std::string to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::GravityScale: return "gravity-scale";
        case PerturbationKind::ActuatorGain: return "actuator-gain";
        case PerturbationKind::ImpulseForce: return "impulse-force";
    }
    return "?";
}

PerturbationKind perturbation_kind_from_string(const std::string& s) {
    if (s == "gravity-scale") return PerturbationKind::GravityScale;
    if (s == "actuator-gain") return PerturbationKind::ActuatorGain;
    if (s == "impulse-force") return PerturbationKind::ImpulseForce;
    throw std::invalid_argument("unknown perturbation kind: " + s);
}

void PerturbationEvent::validate(int num_actuators) const {
    if (onset_step < 0) throw std::invalid_argument("perturbation onset_step < 0");
    if (magnitude.empty()) throw std::invalid_argument("perturbation magnitude empty");
    for (double m : magnitude) {
        if (!std::isfinite(m)) throw std::invalid_argument("perturbation magnitude not finite");
    }
    switch (kind) {
        case PerturbationKind::GravityScale:
            if (magnitude.size() != 1)
                throw std::invalid_argument("gravity-scale takes a single scalar magnitude");
            break;
        case PerturbationKind::ActuatorGain:
            if (magnitude.size() != 1 && static_cast<int>(magnitude.size()) != num_actuators)
                throw std::invalid_argument("actuator-gain magnitude must be scalar or per-actuator");
            if (magnitude.size() == 1 && (target < 0 || target >= num_actuators))
                throw std::invalid_argument("actuator-gain target out of range");
            break;
        case PerturbationKind::ImpulseForce:
            if (static_cast<int>(magnitude.size()) != num_actuators)
                throw std::invalid_argument("impulse-force magnitude must be a per-DOF vector");
            if (duration <= 0) throw std::invalid_argument("impulse-force duration must be positive");
            break;
    }
}

EnvConfig EnvConfig::defaults(EnvKind kind) {
    EnvConfig c;
    c.kind = kind;
    c.actuator_gains = Vec::Ones(2);
    if (kind == EnvKind::PlanarHover) {
        c.waypoints = {{1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.0, 0.0}};
    }
    return c;
}

void EnvConfig::validate() const {
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (episode_len <= 0) throw std::invalid_argument("episode_len must be positive");
    if (!std::isfinite(gravity)) throw std::invalid_argument("gravity not finite");
    if (actuator_gains.size() != action_dim())
        throw std::invalid_argument("actuator_gains must have one entry per actuator");
    if ((actuator_gains.array() <= 0.0).any())
        throw std::invalid_argument("actuator_gains must be positive");
    if (sensor_noise_std < 0.0) throw std::invalid_argument("sensor_noise_std must be >= 0");
    if (kind == EnvKind::PlanarHover && waypoints.empty())
        throw std::invalid_argument("planar-hover requires at least one waypoint");
}

EffectiveParams effective_params(const EnvConfig& config,
                                 const std::vector<PerturbationEvent>& schedule,
                                 int step) {
    EffectiveParams p;
    p.gravity = config.gravity;
    p.actuator_gains = config.actuator_gains;
    p.impulse_force = Vec::Zero(config.action_dim());
    for (const auto& ev : schedule) {
        ev.validate(config.action_dim());
        switch (ev.kind) {
            case PerturbationKind::GravityScale:
                if (step >= ev.onset_step) p.gravity *= ev.magnitude[0];
                break;
            case PerturbationKind::ActuatorGain:
                if (step >= ev.onset_step) {
                    if (ev.magnitude.size() == 1) {
                        p.actuator_gains[ev.target] *= ev.magnitude[0];
                    } else {
                        for (int i = 0; i < p.actuator_gains.size(); ++i)
                            p.actuator_gains[i] *= ev.magnitude[i];
                    }
                }
                break;
            case PerturbationKind::ImpulseForce:
                if (step >= ev.onset_step && step < ev.onset_step + ev.duration) {
                    for (int i = 0; i < p.impulse_force.size(); ++i)
                        p.impulse_force[i] += ev.magnitude[i];
                }
                break;
        }
    }
    return p;
}

std::pair<EnvState, Vec> env_reset(const EnvConfig& config, std::uint64_t seed) {
    config.validate();
    EnvState s;
    s.positions = Vec::Zero(2);
    s.velocities = Vec::Zero(2);
    s.last_accel = Vec::Zero(2);
    s.waypoint_index = 0;
    s.step = 0;
    s.seed = seed;
    return {s, observe(s, config)};
}

namespace {

Vec sensor_noise(const EnvConfig& config, const EnvState& state, int dim) {
    Vec noise = Vec::Zero(dim);
    if (config.sensor_noise_std > 0.0) {
        for (int j = 0; j < dim; ++j) {
            noise[j] = config.sensor_noise_std *
                       keyed_gaussian(state.seed, static_cast<std::uint64_t>(state.step),
                                      static_cast<std::uint64_t>(j));
        }
    }
    return noise;
}

}  // namespace

Vec observe(const EnvState& state, const EnvConfig& config) {
    Vec obs(config.obs_dim());
    if (config.kind == EnvKind::PlanarHover) {
        obs.segment(0, 2) = state.positions;
        obs.segment(2, 2) = state.velocities;
        obs.segment(4, 2) = state.last_accel;
        const auto n = static_cast<int>(config.waypoints.size());
        const Eigen::Vector2d w0 = config.waypoints[state.waypoint_index % n];
        const Eigen::Vector2d w1 = config.waypoints[(state.waypoint_index + 1) % n];
        obs.segment(6, 2) = w0 - state.positions.head<2>();
        obs.segment(8, 2) = w1 - state.positions.head<2>();
    } else {
        const double t1 = state.positions[0];
        const double t2 = state.positions[1];
        obs[0] = std::sin(t1);
        obs[1] = std::cos(t1);
        obs[2] = std::sin(t2);
        obs[3] = std::cos(t2);
        obs[4] = state.velocities[0];
        obs[5] = state.velocities[1];
        obs[6] = kLinkLength1 * std::cos(t1) + kLinkLength2 * std::cos(t1 + t2);
        obs[7] = kLinkLength1 * std::sin(t1) + kLinkLength2 * std::sin(t1 + t2);
    }
    obs += sensor_noise(config, state, config.obs_dim());
    return obs;
}

std::pair<EnvState, StepResult> env_step(const EnvState& state, const Vec& action,
                                         const EnvConfig& config,
                                         const std::vector<PerturbationEvent>& schedule) {
    config.validate();
    if (action.size() != config.action_dim())
        throw std::invalid_argument("action dimension mismatch");
    if (!action.allFinite()) throw std::invalid_argument("NaN/Inf in action");

    const EffectiveParams eff = effective_params(config, schedule, state.step);
    const Vec clipped = action.cwiseMax(-1.0).cwiseMin(1.0);
    const Vec effective_action = clipped.cwiseProduct(eff.actuator_gains);

    EnvState next = state;
    double reward = 0.0;

    if (config.kind == EnvKind::PlanarHover) {
        Vec accel(2);
        accel[0] = effective_action[0] * kHoverThrustAccel + eff.impulse_force[0] / kHoverMass;
        accel[1] = effective_action[1] * kHoverThrustAccel - eff.gravity +
                   eff.impulse_force[1] / kHoverMass;
        next.velocities = state.velocities + config.dt * accel;
        next.positions = state.positions + config.dt * next.velocities;
        next.last_accel = accel;

        const auto n = static_cast<int>(config.waypoints.size());
        const Eigen::Vector2d wp = config.waypoints[state.waypoint_index % n];
        const double dist_prev = (wp - state.positions.head<2>()).norm();
        const double dist_new = (wp - next.positions.head<2>()).norm();
        reward = kRewardApproach * (dist_prev - dist_new);
        if (dist_new < kWaypointRadius) {
            reward += kRewardTraversal;
            next.waypoint_index = (state.waypoint_index + 1) % n;
        }
    } else {
        Vec accel(2);
        for (int i = 0; i < 2; ++i) {
            const double torque = effective_action[i] * kArmTorqueScale + eff.impulse_force[i];
            accel[i] = (torque - kArmDamping * state.velocities[i]) / kArmInertia;
        }
        next.velocities = state.velocities + config.dt * accel;
        next.positions = state.positions + config.dt * next.velocities;
        next.last_accel = accel;

        const double verr = (next.velocities - Vec(config.arm_velocity_ref)).squaredNorm();
        reward = std::exp(-verr);
    }

    next.step = state.step + 1;

    StepResult result;
    result.observation = observe(next, config);
    result.reward = reward;
    result.done = next.step >= config.episode_len;
    return {next, result};
}

}  // namespace wmmon
