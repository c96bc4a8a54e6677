#include "wmmon/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace wmmon {

using nlohmann::json;

namespace {

json tensor_to_json(const TensorRef& t) {
    // column-major storage order, matching Eigen
    std::vector<double> data(t.data, t.data + static_cast<std::size_t>(t.rows) * t.cols);
    return json{{"rows", t.rows}, {"cols", t.cols}, {"data", data}};
}

void tensor_from_json(const json& j, TensorRef& t) {
    if (j.at("rows").get<int>() != t.rows || j.at("cols").get<int>() != t.cols)
        throw std::runtime_error("checkpoint: tensor shape mismatch for " + t.name);
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(t.rows) * t.cols)
        throw std::runtime_error("checkpoint: tensor length mismatch for " + t.name);
    std::memcpy(t.data, data.data(), data.size() * sizeof(double));
}

json dims_to_json(const ModelDims& d) {
    return json{{"d_obs", d.d_obs},       {"d_act", d.d_act}, {"d_h", d.d_h},
                {"d_z", d.d_z},           {"d_hidden", d.d_hidden},
                {"n_horizon", d.n_horizon}};
}

ModelDims dims_from_json(const json& j) {
    ModelDims d;
    d.d_obs = j.at("d_obs").get<int>();
    d.d_act = j.at("d_act").get<int>();
    d.d_h = j.at("d_h").get<int>();
    d.d_z = j.at("d_z").get<int>();
    d.d_hidden = j.at("d_hidden").get<int>();
    d.n_horizon = j.at("n_horizon").get<int>();
    d.validate();
    return d;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j;
    j["format"] = "wmmon-checkpoint";
    j["version"] = Checkpoint::kVersion;
    j["env_kind"] = to_string(ckpt.env_kind);
    j["dims"] = dims_to_json(ckpt.model.dims);
    j["obs_mean"] = std::vector<double>(ckpt.stats.mean.data(),
                                        ckpt.stats.mean.data() + ckpt.stats.mean.size());
    j["obs_std"] = std::vector<double>(ckpt.stats.std.data(),
                                       ckpt.stats.std.data() + ckpt.stats.std.size());

    json wm = json::object();
    auto& model = const_cast<WorldModelParams&>(ckpt.model);
    for (const auto& t : param_tensors(model)) wm[t.name] = tensor_to_json(t);
    j["world_model"] = wm;

    if (ckpt.has_actor) {
        json actor = json::object();
        auto& a = const_cast<ActorParams&>(ckpt.actor);
        for (const auto& t : actor_tensors(a)) actor[t.name] = tensor_to_json(t);
        j["actor"] = actor;
    }

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(1) << "\n";
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint parse error in " + path + ": " + e.what());
    }
    if (j.value("format", "") != "wmmon-checkpoint")
        throw std::runtime_error("not a checkpoint file: " + path);
    if (j.at("version").get<int>() != Checkpoint::kVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);

    Checkpoint ckpt;
    ckpt.env_kind = env_kind_from_string(j.at("env_kind").get<std::string>());
    const ModelDims dims = dims_from_json(j.at("dims"));
    ckpt.model = zero_params(dims);
    for (auto& t : param_tensors(ckpt.model))
        tensor_from_json(j.at("world_model").at(t.name), t);

    const auto mean = j.at("obs_mean").get<std::vector<double>>();
    const auto std_ = j.at("obs_std").get<std::vector<double>>();
    if (static_cast<int>(mean.size()) != dims.d_obs || static_cast<int>(std_.size()) != dims.d_obs)
        throw std::runtime_error("checkpoint: statistics dimension mismatch");
    ckpt.stats.mean = Eigen::Map<const Vec>(mean.data(), static_cast<long>(mean.size()));
    ckpt.stats.std = Eigen::Map<const Vec>(std_.data(), static_cast<long>(std_.size()));

    ckpt.actor = zero_actor(dims);
    if (j.contains("actor")) {
        ckpt.has_actor = true;
        for (auto& t : actor_tensors(ckpt.actor)) tensor_from_json(j.at("actor").at(t.name), t);
    }
    return ckpt;
}

std::string stats_hash(const NormStats& stats) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const Vec& v) {
        for (long i = 0; i < v.size(); ++i) {
            const auto bits = std::bit_cast<std::uint64_t>(v[i]);
            for (int byte = 0; byte < 8; ++byte) {
                h ^= (bits >> (8 * byte)) & 0xffULL;
                h *= 0x100000001b3ULL;
            }
        }
    };
    mix(stats.mean);
    mix(stats.std);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace wmmon
