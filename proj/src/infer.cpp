#include "hlsf/infer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace hlsf {

using json = nlohmann::ordered_json;

AllocationPlan allocate_samples(const std::vector<double>& weights, int K) {
  if (K < 1) throw std::invalid_argument("allocate_samples: K must be >= 1");
  const int m = static_cast<int>(weights.size());
  if (m == 0) throw std::invalid_argument("allocate_samples: no weights");

  AllocationPlan plan;
  plan.K = K;
  plan.counts.assign(static_cast<std::size_t>(m), 0);
  std::vector<double> frac(static_cast<std::size_t>(m), 0.0);
  int assigned = 0;
  for (int i = 0; i < m; ++i) {
    const double exact = K * weights[static_cast<std::size_t>(i)];
    const int base = static_cast<int>(std::floor(exact));
    plan.counts[static_cast<std::size_t>(i)] = base;
    frac[static_cast<std::size_t>(i)] = exact - base;
    assigned += base;
  }
  // Largest remainder, ties to the lowest index.
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
  });
  for (int r = 0; r < K - assigned; ++r)
    plan.counts[static_cast<std::size_t>(order[static_cast<std::size_t>(r % m)])]++;
  return plan;
}

void write_predictions(const std::string& path, const std::vector<PredictionSet>& preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& p : preds) {
    json j;
    j["scene_id"] = p.scene_id;
    j["target_id"] = p.target_id;
    j["K"] = p.K;
    j["weights"] = p.weights;
    j["counts"] = p.counts;
    json trajs = json::array();
    for (const auto& traj : p.trajs) {
      json one = json::array();
      for (int t = 0; t < traj.rows(); ++t) one.push_back({traj(t, 0), traj(t, 1)});
      trajs.push_back(std::move(one));
    }
    j["trajs"] = std::move(trajs);
    j["mode_of"] = p.mode_of;
    out << j.dump() << '\n';
  }
}

std::vector<PredictionSet> read_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<PredictionSet> out;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("predictions line " + std::to_string(line_number) + ": " + e.what());
    }
    PredictionSet p;
    p.scene_id = j.at("scene_id").get<std::string>();
    p.target_id = j.at("target_id").get<std::string>();
    p.K = j.at("K").get<int>();
    p.weights = j.at("weights").get<std::vector<double>>();
    p.counts = j.at("counts").get<std::vector<int>>();
    for (const auto& one : j.at("trajs")) {
      Eigen::MatrixX2d traj(static_cast<int>(one.size()), 2);
      for (std::size_t t = 0; t < one.size(); ++t) {
        traj(static_cast<int>(t), 0) = one[t][0].get<double>();
        traj(static_cast<int>(t), 1) = one[t][1].get<double>();
      }
      p.trajs.push_back(std::move(traj));
    }
    p.mode_of = j.at("mode_of").get<std::vector<int>>();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hlsf
