#include "wmmon/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wmmon {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("bad numeric field: '" + s + "'");
    return v;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

void write_run_log(const RunLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write run log: " + path);
    out << "# wmmon-runlog v" << RunLog::kVersion << " env=" << log.env_kind
        << " d_obs=" << log.d_obs << " n_horizon=" << log.n_horizon << "\n";
    out << "step";
    for (int j = 0; j < log.d_obs; ++j) out << ",obs_" << j;
    for (int j = 0; j < log.d_obs; ++j) out << ",pred_obs_" << j;
    out << ",reward,pred_reward,e_obs,e_obs_smooth,e_rew,e_rew_smooth,threshold,triggered\n";
    for (const auto& r : log.rows) {
        out << r.step;
        for (int j = 0; j < log.d_obs; ++j) out << "," << format_double(r.obs[j]);
        for (int j = 0; j < log.d_obs; ++j) out << "," << format_double(r.pred_obs[j]);
        out << "," << format_double(r.reward) << "," << format_double(r.pred_reward) << ","
            << format_double(r.e_obs) << "," << format_double(r.e_obs_smooth) << ","
            << format_double(r.e_rew) << "," << format_double(r.e_rew_smooth) << ","
            << format_double(r.threshold) << "," << (r.triggered ? 1 : 0) << "\n";
    }
    if (!out) throw std::runtime_error("run log write failed: " + path);
}

RunLog read_run_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run log: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty run log: " + path);

    RunLog log;
    {
        std::stringstream header(line);
        std::string hash, tag, token;
        header >> hash >> tag;
        if (hash != "#" || tag != "wmmon-runlog")
            throw std::runtime_error("run log schema mismatch: " + path);
        header >> token;
        if (token != "v" + std::to_string(RunLog::kVersion))
            throw std::runtime_error("unsupported run log version in " + path);
        while (header >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            if (key == "env") log.env_kind = value;
            if (key == "d_obs") log.d_obs = std::stoi(value);
            if (key == "n_horizon") log.n_horizon = std::stoi(value);
        }
    }
    if (log.d_obs <= 0) throw std::runtime_error("run log header missing d_obs: " + path);

    if (!std::getline(in, line)) throw std::runtime_error("run log missing column header");
    const std::size_t expected = 1 + 2 * static_cast<std::size_t>(log.d_obs) + 8;
    if (split(line, ',').size() != expected)
        throw std::runtime_error("run log column count mismatch: " + path);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != expected)
            throw std::runtime_error("run log row width mismatch: " + path);
        RunLogRow r;
        std::size_t k = 0;
        r.step = std::stoi(fields[k++]);
        r.obs.resize(log.d_obs);
        for (int j = 0; j < log.d_obs; ++j) r.obs[j] = parse_double(fields[k++]);
        r.pred_obs.resize(log.d_obs);
        for (int j = 0; j < log.d_obs; ++j) r.pred_obs[j] = parse_double(fields[k++]);
        r.reward = parse_double(fields[k++]);
        r.pred_reward = parse_double(fields[k++]);
        r.e_obs = parse_double(fields[k++]);
        r.e_obs_smooth = parse_double(fields[k++]);
        r.e_rew = parse_double(fields[k++]);
        r.e_rew_smooth = parse_double(fields[k++]);
        r.threshold = parse_double(fields[k++]);
        r.triggered = fields[k++] == "1";
        log.rows.push_back(std::move(r));
    }
    return log;
}

void write_metrics_csv(const std::vector<TrainMetricsRow>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics: " + path);
    out << "# wmmon-metrics v1\n";
    out << "step,total,obs_recon,reward,latent_consistency,grad_norm\n";
    for (const auto& m : metrics) {
        out << m.step << "," << format_double(m.loss.total) << ","
            << format_double(m.loss.obs_recon) << "," << format_double(m.loss.reward) << ","
            << format_double(m.loss.latent_consistency) << "," << format_double(m.grad_norm)
            << "\n";
    }
    if (!out) throw std::runtime_error("metrics write failed: " + path);
}

}  // namespace wmmon
