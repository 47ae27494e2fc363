#pragma once

#include <string>
#include <vector>

#include "hlsf/infer.hpp"
#include "hlsf/model.hpp"

namespace hlsf {

/// Average and final displacement error between a prediction and the
/// ground truth (equal length required).
double ade(const Eigen::MatrixX2d& pred, const Eigen::MatrixX2d& truth);
double fde(const Eigen::MatrixX2d& pred, const Eigen::MatrixX2d& truth);

/// Per-K table of min-over-K displacement errors plus mode diagnostics.
struct MetricReport {
  std::vector<int> k_values;
  std::vector<double> ade_k;
  std::vector<double> fde_k;
  double mode_accuracy = -1.0;   // top-1 weight vs ground-truth lane; -1 when mode-free
  double lane_alignment = 0.0;   // mean distance to the nearest real centerline (m)
  int examples = 0;
};

/// Evaluates predictions against their examples (matched by scene and
/// target id). For each K the minimum error over the first K trajectories
/// in generation order is averaged over the set. Throws when a requested K
/// exceeds the available samples.
MetricReport evaluate_predictions(const std::vector<PredictionSet>& preds,
                                  const std::vector<Example>& examples,
                                  const std::vector<int>& k_values);

/// Grouped average-quality decomposition: per-group AADE (mean first-sample
/// ADE) with group weights, whose weighted sum reproduces the overall ADE_1.
struct GroupReport {
  std::vector<std::string> groups;
  std::vector<double> weights;
  std::vector<double> aade;
  double overall_ade1 = 0.0;
};
GroupReport aade_by_group(const std::vector<PredictionSet>& preds,
                          const std::vector<Example>& examples);

std::string report_to_text(const MetricReport& report);
std::string report_to_csv(const MetricReport& report);
std::string group_report_to_text(const GroupReport& report);

}  // namespace hlsf
