#pragma once

#include <string>

#include "wmmon/env.hpp"
#include "wmmon/policy.hpp"
#include "wmmon/training.hpp"
#include "wmmon/world_model.hpp"

namespace wmmon {

// Versioned container for everything monitoring needs: model dimensions,
// world-model and actor parameters in the documented tensor order, and the
// observation statistics the errors are normalized with. Save -> load is
// value-exact for every double.
struct Checkpoint {
    static constexpr int kVersion = 1;

    EnvKind env_kind = EnvKind::PlanarHover;
    WorldModelParams model;
    ActorParams actor;
    bool has_actor = false;
    NormStats stats;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the little-endian bytes of (mean, std); ties threshold profiles
// to the statistics they were calibrated with.
std::string stats_hash(const NormStats& stats);

}  // namespace wmmon
