#include "hlsf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace hlsf {

double ade(const Eigen::MatrixX2d& pred, const Eigen::MatrixX2d& truth) {
  if (pred.rows() != truth.rows() || pred.rows() == 0)
    throw std::invalid_argument("ade: length mismatch");
  double sum = 0.0;
  for (int t = 0; t < pred.rows(); ++t) sum += (pred.row(t) - truth.row(t)).norm();
  return sum / static_cast<double>(pred.rows());
}

double fde(const Eigen::MatrixX2d& pred, const Eigen::MatrixX2d& truth) {
  if (pred.rows() != truth.rows() || pred.rows() == 0)
    throw std::invalid_argument("fde: length mismatch");
  const int last = static_cast<int>(pred.rows()) - 1;
  return (pred.row(last) - truth.row(last)).norm();
}

namespace {

const Example& find_example(const std::vector<Example>& examples,
                            const std::map<std::pair<std::string, std::string>, int>& index,
                            const PredictionSet& p) {
  const auto it = index.find({p.scene_id, p.target_id});
  if (it == index.end())
    throw std::invalid_argument("evaluate: no example for " + p.scene_id + "/" + p.target_id);
  return examples[static_cast<std::size_t>(it->second)];
}

std::map<std::pair<std::string, std::string>, int> index_examples(
    const std::vector<Example>& examples) {
  std::map<std::pair<std::string, std::string>, int> index;
  for (std::size_t i = 0; i < examples.size(); ++i)
    index[{examples[i].scene_id, examples[i].target_id}] = static_cast<int>(i);
  return index;
}

}  // namespace

MetricReport evaluate_predictions(const std::vector<PredictionSet>& preds,
                                  const std::vector<Example>& examples,
                                  const std::vector<int>& k_values) {
  if (preds.empty()) throw std::invalid_argument("evaluate: no predictions");
  const auto index = index_examples(examples);

  MetricReport report;
  report.k_values = k_values;
  report.ade_k.assign(k_values.size(), 0.0);
  report.fde_k.assign(k_values.size(), 0.0);

  int mode_hits = 0, mode_total = 0;
  double blur_sum = 0.0;
  long long blur_count = 0;

  for (const auto& p : preds) {
    const Example& ex = find_example(examples, index, p);
    for (const int k : k_values)
      if (k < 1 || k > static_cast<int>(p.trajs.size()))
        throw std::invalid_argument("evaluate: K exceeds available samples");

    std::vector<double> ades(p.trajs.size()), fdes(p.trajs.size());
    for (std::size_t i = 0; i < p.trajs.size(); ++i) {
      ades[i] = ade(p.trajs[i], ex.future);
      fdes[i] = fde(p.trajs[i], ex.future);
    }
    for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
      const int k = k_values[ki];
      report.ade_k[ki] += *std::min_element(ades.begin(), ades.begin() + k);
      report.fde_k[ki] += *std::min_element(fdes.begin(), fdes.begin() + k);
    }

    // Mode accuracy, when the prediction carries a real weight vector.
    if (p.weights.size() == static_cast<std::size_t>(ex.lanes.count())) {
      const int top =
          static_cast<int>(std::max_element(p.weights.begin(), p.weights.end()) - p.weights.begin());
      mode_hits += (top == ex.gt_index) ? 1 : 0;
      ++mode_total;
    }

    // Mode blur: mean distance of every generated point to the nearest
    // real candidate centerline.
    for (const auto& traj : p.trajs) {
      double traj_sum = 0.0;
      for (int t = 0; t < traj.rows(); ++t) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& lane : ex.lanes.lanes) {
          if (lane.is_fake) continue;
          best = std::min(best, nearest_centerline_point(traj.row(t).transpose(), lane).distance);
        }
        traj_sum += best;
      }
      blur_sum += traj_sum / static_cast<double>(traj.rows());
      ++blur_count;
    }
  }

  const double n = static_cast<double>(preds.size());
  for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
    report.ade_k[ki] /= n;
    report.fde_k[ki] /= n;
  }
  report.mode_accuracy = mode_total > 0 ? static_cast<double>(mode_hits) / mode_total : -1.0;
  report.lane_alignment = blur_count > 0 ? blur_sum / static_cast<double>(blur_count) : 0.0;
  report.examples = static_cast<int>(preds.size());
  return report;
}

GroupReport aade_by_group(const std::vector<PredictionSet>& preds,
                          const std::vector<Example>& examples) {
  const auto index = index_examples(examples);
  std::map<std::string, std::pair<double, int>> acc;  // group -> (sum ADE_1, count)
  double overall = 0.0;
  for (const auto& p : preds) {
    const Example& ex = find_example(examples, index, p);
    if (p.trajs.empty()) throw std::invalid_argument("aade_by_group: empty prediction");
    const double a = ade(p.trajs.front(), ex.future);
    overall += a;
    auto& slot = acc[ex.group];
    slot.first += a;
    slot.second += 1;
  }
  GroupReport report;
  report.overall_ade1 = overall / static_cast<double>(preds.size());
  for (const auto& [group, slot] : acc) {
    report.groups.push_back(group);
    report.weights.push_back(static_cast<double>(slot.second) / static_cast<double>(preds.size()));
    report.aade.push_back(slot.first / static_cast<double>(slot.second));
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_to_text(const MetricReport& report) {
  std::ostringstream out;
  out << "examples: " << report.examples << "\n";
  out << "  K    ADE_K     FDE_K\n";
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof(line), "%3d  %8.4f  %8.4f\n", report.k_values[i], report.ade_k[i],
                  report.fde_k[i]);
    out << line;
  }
  if (report.mode_accuracy >= 0.0) out << "mode top-1 accuracy: " << fmt(report.mode_accuracy) << "\n";
  out << "lane alignment (m): " << fmt(report.lane_alignment) << "\n";
  return out.str();
}

std::string report_to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "K,ade_k,fde_k\n";
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g\n", report.k_values[i], report.ade_k[i],
                  report.fde_k[i]);
    out << line;
  }
  char extra[128];
  std::snprintf(extra, sizeof(extra), "mode_accuracy,%.9g,\nlane_alignment,%.9g,\n",
                report.mode_accuracy, report.lane_alignment);
  out << extra;
  return out.str();
}

std::string group_report_to_text(const GroupReport& report) {
  std::ostringstream out;
  out << "group          weight      AADE\n";
  for (std::size_t i = 0; i < report.groups.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-12s  %8.4f  %8.4f\n", report.groups[i].c_str(),
                  report.weights[i], report.aade[i]);
    out << line;
  }
  out << "overall ADE_1: " << fmt(report.overall_ade1) << "\n";
  return out.str();
}

}  // namespace hlsf
