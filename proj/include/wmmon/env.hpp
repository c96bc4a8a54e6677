#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace wmmon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class EnvKind { PlanarHover, TwoLinkArm };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& s);

// Fixed physical constants of the two plants. Exposed so tests can reimplement
// the dynamics independently.
inline constexpr double kHoverMass = 1.0;          // kg
inline constexpr double kHoverThrustAccel = 15.0;  // m/s^2 at action = 1
inline constexpr double kArmInertia = 1.0;         // kg m^2 per joint
inline constexpr double kArmTorqueScale = 2.0;     // N m at action = 1
inline constexpr double kArmDamping = 0.5;         // N m s/rad
inline constexpr double kLinkLength1 = 0.5;        // m
inline constexpr double kLinkLength2 = 0.5;        // m
inline constexpr double kRewardApproach = 1.0;     // per meter of approach
inline constexpr double kRewardTraversal = 10.0;   // per waypoint traversal
inline constexpr double kWaypointRadius = 0.1;     // m

enum class PerturbationKind { GravityScale, ActuatorGain, ImpulseForce };

std::string to_string(PerturbationKind kind);
PerturbationKind perturbation_kind_from_string(const std::string& s);

// A scheduled change to the plant. Gravity and gain changes persist from
// onset_step to the end of the episode; an impulse lasts `duration` steps.
struct PerturbationEvent {
    PerturbationKind kind = PerturbationKind::GravityScale;
    int onset_step = 0;
    int duration = 1;  // impulse only
    // gravity-scale: magnitude[0] multiplies gravity.
    // actuator-gain: size 1 -> multiplies gains[target]; size d_act -> elementwise.
    // impulse-force: per-DOF force vector in N (hover) / N m (arm).
    std::vector<double> magnitude;
    int target = 0;  // actuator-gain only

    void validate(int num_actuators) const;
};

struct EnvConfig {
    EnvKind kind = EnvKind::PlanarHover;
    double dt = 0.05;       // s
    double gravity = 9.81;  // m/s^2, planar-hover only (the arm moves in a
                            // horizontal plane, so gravity exerts no torque)
    Vec actuator_gains;     // per-actuator multiplier, default all 1
    std::vector<Eigen::Vector2d> waypoints;  // planar-hover targets
    Eigen::Vector2d arm_velocity_ref{0.8, -0.6};  // rad/s joint-velocity setpoints
    int episode_len = 500;
    std::uint64_t seed = 0;
    double sensor_noise_std = 0.0;  // zero-mean Gaussian on each observed dim

    static EnvConfig defaults(EnvKind kind);
    int action_dim() const { return 2; }
    int obs_dim() const { return kind == EnvKind::PlanarHover ? 10 : 8; }
    void validate() const;
};

struct EnvState {
    Vec positions;   // hover: (x, y) m; arm: joint angles rad
    Vec velocities;  // hover: m/s; arm: rad/s
    Vec last_accel;  // acceleration applied on the most recent step (sensor)
    int waypoint_index = 0;  // planar-hover only
    int step = 0;
    std::uint64_t seed = 0;  // active run seed, drives the sensor-noise stream
};

struct StepResult {
    Vec observation;
    double reward = 0.0;
    bool done = false;
};

// Deterministic initial state: hover at the origin at rest, arm at joint
// angles (0, 0) at rest.
std::pair<EnvState, Vec> env_reset(const EnvConfig& config, std::uint64_t seed);

// One semi-implicit Euler step: v' = v + dt*a, p' = p + dt*v'. Actions are
// clipped to [-1, 1] and scaled by the currently effective actuator gains.
std::pair<EnvState, StepResult> env_step(const EnvState& state, const Vec& action,
                                         const EnvConfig& config,
                                         const std::vector<PerturbationEvent>& schedule);

// Flat sensor vector. planar-hover: position(2), velocity(2), last accel(2),
// deltas to the next two waypoints(4). two-link-arm: sin/cos of both joints(4),
// joint velocities(2), fingertip position(2).
Vec observe(const EnvState& state, const EnvConfig& config);

// Effective parameters at a given step once the schedule is applied.
struct EffectiveParams {
    double gravity = 0.0;
    Vec actuator_gains;
    Vec impulse_force;  // summed over active impulses, zero when none
};

EffectiveParams effective_params(const EnvConfig& config,
                                 const std::vector<PerturbationEvent>& schedule,
                                 int step);

}  // namespace wmmon
