#include "flicker/metrics/run_result.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace flicker {

namespace {

constexpr const char* kSchema = "flickersim.run_result";
constexpr int kVersion = 1;

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

double RunResult::final_reward() const {
  if (curve.empty()) throw std::invalid_argument("run result has no evaluation points");
  return curve.back().mean_reward;
}

void RunResult::validate() const {
  if (curve.empty()) throw std::invalid_argument("run result has no evaluation points");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (i > 0 && curve[i].step <= curve[i - 1].step) {
      throw std::invalid_argument("run result curve steps must strictly increase (step " +
                                  std::to_string(curve[i].step) + " after " + std::to_string(curve[i - 1].step) +
                                  ")");
    }
    if (!std::isfinite(curve[i].mean_reward)) throw std::invalid_argument("run result has a non-finite reward");
    for (double r : curve[i].rewards) {
      if (!std::isfinite(r)) throw std::invalid_argument("run result has a non-finite reward");
    }
  }
}

Summary aggregate(const std::vector<RunResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no run results");
  std::vector<double> finals;
  for (const auto& r : results) finals.push_back(r.final_reward());
  return summarize(finals);
}

std::string run_result_json(const RunResult& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.curve) curve.push_back({{"step", p.step}, {"mean_reward", p.mean_reward}, {"rewards", p.rewards}});
  nlohmann::json j = {{"schema", kSchema},      {"version", kVersion},         {"seed", r.seed},
                      {"env", r.env},           {"domain_mode", r.domain_mode}, {"method", r.method},
                      {"curve", curve},         {"final_reward", r.final_reward()}};
  return j.dump(2);
}

RunResult parse_run_result(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("schema").get<std::string>() != kSchema) throw std::runtime_error("not a run result");
  if (j.at("version").get<int>() != kVersion) throw std::runtime_error("unsupported run result version");
  RunResult r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.env = j.at("env").get<std::string>();
  r.domain_mode = j.at("domain_mode").get<std::string>();
  r.method = j.at("method").get<std::string>();
  for (const auto& p : j.at("curve")) {
    r.curve.push_back({p.at("step").get<std::int64_t>(), p.at("mean_reward").get<double>(),
                       p.at("rewards").get<std::vector<double>>()});
  }
  r.validate();
  return r;
}

void write_run_result(const std::filesystem::path& path, const RunResult& r) {
  r.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << run_result_json(r) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

RunResult read_run_result(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return parse_run_result(ss.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_curve_csv(std::ostream& os, const RunResult& r) {
  std::size_t k = 0;
  for (const auto& p : r.curve) k = std::max(k, p.rewards.size());
  os << "step,mean_reward";
  for (std::size_t i = 0; i < k; ++i) os << ",reward_" << i;
  os << '\n';
  for (const auto& p : r.curve) {
    os << p.step << ',' << format_double(p.mean_reward);
    for (std::size_t i = 0; i < k; ++i) {
      os << ',';
      if (i < p.rewards.size()) os << format_double(p.rewards[i]);
    }
    os << '\n';
  }
}

void export_curve(const RunResult& r, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_curve_csv(os, r);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace flicker
