#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "flicker/metrics/stats.hpp"

namespace flicker {

struct CurvePoint {
  std::int64_t step = 0;
  double mean_reward = 0.0;
  std::vector<double> rewards;  // one per evaluation episode
};

// Outcome of one seed of one configuration.
struct RunResult {
  std::uint64_t seed = 0;
  std::string env;
  std::string domain_mode;  // in, ood1 or ood2
  std::string method;       // e.g. "flicker-mlp"
  std::vector<CurvePoint> curve;

  // Mean reward of the last curve point.
  double final_reward() const;
  // Throws std::invalid_argument unless the curve is nonempty with strictly
  // increasing steps and finite rewards.
  void validate() const;
};

// Mean, sample std, IQM and quartiles over the final rewards.
Summary aggregate(const std::vector<RunResult>& results);

std::string run_result_json(const RunResult& r);
RunResult parse_run_result(const std::string& json);
void write_run_result(const std::filesystem::path& path, const RunResult& r);
RunResult read_run_result(const std::filesystem::path& path);

// CSV with header step,mean_reward,reward_0..reward_{k-1}, k being the
// largest number of episodes at any point; shorter rows leave cells empty.
void write_curve_csv(std::ostream& os, const RunResult& r);
void export_curve(const RunResult& r, const std::filesystem::path& path);

}  // namespace flicker
