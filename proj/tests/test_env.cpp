#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "wmmon/env.hpp"
#include "wmmon/rng.hpp"

using namespace wmmon;

namespace {

std::vector<EnvState> roll_states(const EnvConfig& cfg, std::uint64_t seed,
                                  const std::vector<PerturbationEvent>& schedule, int steps,
                                  const Vec& action) {
    auto [state, obs] = env_reset(cfg, seed);
    std::vector<EnvState> out{state};
    for (int t = 0; t < steps; ++t) {
        auto [next, res] = env_step(state, action, cfg, schedule);
        state = next;
        out.push_back(state);
    }
    return out;
}

bool states_equal(const EnvState& a, const EnvState& b) {
    return a.positions == b.positions && a.velocities == b.velocities &&
           a.last_accel == b.last_accel && a.waypoint_index == b.waypoint_index &&
           a.step == b.step;
}

}  // namespace

TEST_CASE("reset gives the defined initial condition") {
    const auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    auto [state, obs] = env_reset(cfg, 0);
    CHECK(state.positions == Vec::Zero(2));
    CHECK(state.velocities == Vec::Zero(2));
    CHECK(state.waypoint_index == 0);
    CHECK(state.step == 0);
    // first six observed values are zero, then the deltas to (1,0) and (1,1)
    for (int j = 0; j < 6; ++j) CHECK(obs[j] == 0.0);
    CHECK(obs[6] == 1.0);
    CHECK(obs[7] == 0.0);
    CHECK(obs[8] == 1.0);
    CHECK(obs[9] == 1.0);

    const auto arm = EnvConfig::defaults(EnvKind::TwoLinkArm);
    auto [astate, aobs] = env_reset(arm, 0);
    CHECK(astate.positions == Vec::Zero(2));
    CHECK(aobs[0] == 0.0);
    CHECK(aobs[1] == 1.0);
    CHECK(aobs[2] == 0.0);
    CHECK(aobs[3] == 1.0);
    CHECK(aobs[6] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(aobs[7] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("reset is deterministic and seeds only move the sensor noise") {
    auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    auto [s1, o1] = env_reset(cfg, 7);
    auto [s2, o2] = env_reset(cfg, 7);
    CHECK(states_equal(s1, s2));
    CHECK(o1 == o2);

    // noise disabled: different seeds give identical observations
    auto [s3, o3] = env_reset(cfg, 8);
    CHECK(states_equal(s1, s3));
    CHECK(o1 == o3);

    cfg.sensor_noise_std = 0.01;
    auto [n0, q0] = env_reset(cfg, 0);
    auto [n1, q1] = env_reset(cfg, 1);
    CHECK(states_equal(n0, n1));  // state untouched by noise
    CHECK(q0 != q1);
    CHECK((q0 - q1).cwiseAbs().maxCoeff() < 0.2);  // only the small noise differs
}

TEST_CASE("thrust canceling gravity leaves the hover position unchanged") {
    const auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    auto [state, obs] = env_reset(cfg, 0);
    Vec action(2);
    action << 0.0, cfg.gravity / kHoverThrustAccel;
    auto [next, res] = env_step(state, action, cfg, {});
    CHECK(next.positions == Vec::Zero(2));
    CHECK(next.velocities == Vec::Zero(2));
}

TEST_CASE("gravity-scale 1.5 yields 1.5 x 9.81 downward acceleration") {
    const auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    auto [state, obs] = env_reset(cfg, 0);
    PerturbationEvent ev{PerturbationKind::GravityScale, 0, 1, {1.5}, 0};
    auto [next, res] = env_step(state, Vec::Zero(2), cfg, {ev});
    CHECK(next.last_accel[1] == doctest::Approx(-1.5 * 9.81).epsilon(1e-15));
    CHECK(next.last_accel[0] == 0.0);
}

TEST_CASE("one-step integration matches the scalar oracle to 1e-12") {
    Rng rng(42);
    auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    std::vector<std::pair<double, double>> wps;
    for (const auto& w : cfg.waypoints) wps.emplace_back(w[0], w[1]);

    for (int trial = 0; trial < 200; ++trial) {
        EnvState s;
        s.positions = Vec::NullaryExpr(2, [&](int) { return 2.0 * rng.next_gaussian(); });
        s.velocities = Vec::NullaryExpr(2, [&](int) { return rng.next_gaussian(); });
        s.last_accel = Vec::Zero(2);
        s.waypoint_index = static_cast<int>(rng.next_below(4));
        s.step = static_cast<int>(rng.next_below(100));
        Vec a = Vec::NullaryExpr(2, [&](int) { return 3.0 * rng.next_gaussian(); });

        std::vector<PerturbationEvent> schedule;
        if (trial % 3 == 0)
            schedule.push_back({PerturbationKind::GravityScale, 0, 1, {1.5}, 0});
        if (trial % 4 == 0)
            schedule.push_back({PerturbationKind::ImpulseForce, s.step, 3, {4.0, -2.0}, 0});
        const EffectiveParams eff = effective_params(cfg, schedule, s.step);

        auto [next, res] = env_step(s, a, cfg, schedule);
        const auto ref = oracle::hover_step(s.positions[0], s.positions[1], s.velocities[0],
                                            s.velocities[1], a[0], a[1], eff.actuator_gains[0],
                                            eff.actuator_gains[1], eff.gravity,
                                            eff.impulse_force[0], eff.impulse_force[1], cfg.dt,
                                            wps, s.waypoint_index);
        CHECK(next.positions[0] == doctest::Approx(ref.px).epsilon(1e-12));
        CHECK(next.positions[1] == doctest::Approx(ref.py).epsilon(1e-12));
        CHECK(next.velocities[0] == doctest::Approx(ref.vx).epsilon(1e-12));
        CHECK(next.velocities[1] == doctest::Approx(ref.vy).epsilon(1e-12));
        CHECK(res.reward == doctest::Approx(ref.reward).epsilon(1e-12));
        CHECK(next.waypoint_index == ref.waypoint_index);
    }

    auto arm = EnvConfig::defaults(EnvKind::TwoLinkArm);
    for (int trial = 0; trial < 200; ++trial) {
        EnvState s;
        s.positions = Vec::NullaryExpr(2, [&](int) { return 3.0 * rng.next_gaussian(); });
        s.velocities = Vec::NullaryExpr(2, [&](int) { return 2.0 * rng.next_gaussian(); });
        s.last_accel = Vec::Zero(2);
        s.step = static_cast<int>(rng.next_below(100));
        Vec a = Vec::NullaryExpr(2, [&](int) { return 2.0 * rng.next_gaussian(); });

        std::vector<PerturbationEvent> schedule;
        if (trial % 2 == 0)
            schedule.push_back({PerturbationKind::ActuatorGain, 0, 1, {3.0}, 1});
        const EffectiveParams eff = effective_params(arm, schedule, s.step);

        auto [next, res] = env_step(s, a, arm, schedule);
        const auto ref = oracle::arm_step(s.positions[0], s.positions[1], s.velocities[0],
                                          s.velocities[1], a[0], a[1], eff.actuator_gains[0],
                                          eff.actuator_gains[1], 0.0, 0.0, arm.dt,
                                          arm.arm_velocity_ref[0], arm.arm_velocity_ref[1]);
        CHECK(next.positions[0] == doctest::Approx(ref.t1).epsilon(1e-12));
        CHECK(next.positions[1] == doctest::Approx(ref.t2).epsilon(1e-12));
        CHECK(next.velocities[0] == doctest::Approx(ref.w1).epsilon(1e-12));
        CHECK(next.velocities[1] == doctest::Approx(ref.w2).epsilon(1e-12));
        CHECK(res.reward == doctest::Approx(ref.reward).epsilon(1e-12));
    }
}

TEST_CASE("observation matches the forward-kinematics oracle") {
    const auto arm = EnvConfig::defaults(EnvKind::TwoLinkArm);
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        EnvState s;
        s.positions = Vec::NullaryExpr(2, [&](int) { return 4.0 * rng.next_gaussian(); });
        s.velocities = Vec::NullaryExpr(2, [&](int) { return rng.next_gaussian(); });
        s.last_accel = Vec::Zero(2);
        s.step = 0;
        const Vec obs = observe(s, arm);
        const auto [fx, fy] = oracle::fingertip(s.positions[0], s.positions[1]);
        CHECK(obs[0] == doctest::Approx(std::sin(s.positions[0])).epsilon(1e-12));
        CHECK(obs[1] == doctest::Approx(std::cos(s.positions[0])).epsilon(1e-12));
        CHECK(obs[4] == s.velocities[0]);
        CHECK(obs[6] == doctest::Approx(fx).epsilon(1e-12));
        CHECK(obs[7] == doctest::Approx(fy).epsilon(1e-12));
    }
}

TEST_CASE("identical config, seed, actions and schedule give bit-identical trajectories") {
    auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    cfg.sensor_noise_std = 0.01;
    Vec action(2);
    action << 0.3, 0.7;
    std::vector<PerturbationEvent> schedule{{PerturbationKind::GravityScale, 10, 1, {1.2}, 0}};
    const auto a = roll_states(cfg, 3, schedule, 50, action);
    const auto b = roll_states(cfg, 3, schedule, 50, action);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(states_equal(a[i], b[i]));
}

TEST_CASE("ballistic energy drift stays O(dt^2) per step") {
    auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    auto [state, obs] = env_reset(cfg, 0);
    state.velocities << 1.0, 2.0;
    const double g = cfg.gravity;
    const double e0 = 0.5 * state.velocities.squaredNorm() + g * state.positions[1];
    for (int k = 1; k <= 200; ++k) {
        auto [next, res] = env_step(state, Vec::Zero(2), cfg, {});
        state = next;
        const double e = 0.5 * state.velocities.squaredNorm() + g * state.positions[1];
        CHECK(std::abs(e - e0) <= 0.5 * g * g * cfg.dt * cfg.dt * k * (1.0 + 1e-9));
    }
}

TEST_CASE("perturbations are isolated before their onset") {
    auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    cfg.sensor_noise_std = 0.01;
    Vec action(2);
    action << 0.1, 0.65;
    const int onset = 20;
    std::vector<PerturbationEvent> schedule{{PerturbationKind::GravityScale, onset, 1, {1.5}, 0}};
    const auto nominal = roll_states(cfg, 1, {}, 40, action);
    const auto perturbed = roll_states(cfg, 1, schedule, 40, action);
    for (int t = 0; t <= onset; ++t) CHECK(states_equal(nominal[t], perturbed[t]));
    CHECK(!states_equal(nominal[onset + 1], perturbed[onset + 1]));
}

TEST_CASE("all-ones actuator-gain event is a no-op") {
    auto cfg = EnvConfig::defaults(EnvKind::TwoLinkArm);
    Vec action(2);
    action << 0.4, -0.2;
    std::vector<PerturbationEvent> schedule{{PerturbationKind::ActuatorGain, 5, 1, {1.0, 1.0}, 0}};
    const auto a = roll_states(cfg, 2, {}, 30, action);
    const auto b = roll_states(cfg, 2, schedule, 30, action);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(states_equal(a[i], b[i]));
}

TEST_CASE("impulse force lasts exactly its duration") {
    auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    const int onset = 10, duration = 4;
    std::vector<PerturbationEvent> schedule{
        {PerturbationKind::ImpulseForce, onset, duration, {5.0, 0.0}, 0}};
    const auto nominal = roll_states(cfg, 0, {}, 30, Vec::Zero(2));
    const auto pulsed = roll_states(cfg, 0, schedule, 30, Vec::Zero(2));
    for (int t = 1; t <= 30; ++t) {
        const bool active = (t - 1) >= onset && (t - 1) < onset + duration;
        const double dax = pulsed[static_cast<std::size_t>(t)].last_accel[0] -
                           nominal[static_cast<std::size_t>(t)].last_accel[0];
        if (active)
            CHECK(dax == doctest::Approx(5.0 / kHoverMass).epsilon(1e-12));
        else
            CHECK(dax == 0.0);
    }
}

TEST_CASE("invalid configs and actions are rejected") {
    auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    cfg.dt = 0.0;
    CHECK_THROWS_AS(env_reset(cfg, 0), std::invalid_argument);

    auto no_wp = EnvConfig::defaults(EnvKind::PlanarHover);
    no_wp.waypoints.clear();
    CHECK_THROWS_AS(env_reset(no_wp, 0), std::invalid_argument);

    const auto good = EnvConfig::defaults(EnvKind::PlanarHover);
    auto [state, obs] = env_reset(good, 0);
    Vec bad(2);
    bad << std::nan(""), 0.0;
    CHECK_THROWS_AS(env_step(state, bad, good, {}), std::invalid_argument);
    CHECK_THROWS_AS(env_step(state, Vec::Zero(3), good, {}), std::invalid_argument);

    auto neg_gain = EnvConfig::defaults(EnvKind::TwoLinkArm);
    neg_gain.actuator_gains << 1.0, -1.0;
    CHECK_THROWS_AS(env_reset(neg_gain, 0), std::invalid_argument);
}

TEST_CASE("actions are clipped to [-1, 1]") {
    const auto cfg = EnvConfig::defaults(EnvKind::PlanarHover);
    auto [state, obs] = env_reset(cfg, 0);
    Vec big(2), one(2);
    big << 5.0, -7.0;
    one << 1.0, -1.0;
    auto [n1, r1] = env_step(state, big, cfg, {});
    auto [n2, r2] = env_step(state, one, cfg, {});
    CHECK(n1.positions == n2.positions);
    CHECK(n1.velocities == n2.velocities);
}
