#include <algorithm>
#include <cmath>

#include "subject_context.hpp"

namespace cimllm::detail {

MismatchFeatures mismatch_features(SubjectContext& ctx) {
  MismatchFeatures f;
  const SubjectBundle& b = ctx.bundle();
  if (!b.flair || !b.t2) return f;
  const VoxelGrid& flair = *b.flair;
  const VoxelGrid& t2 = *b.t2;
  const auto& params = ctx.params();
  const auto& th = params.thresholds;

  f.cnwm_source = ctx.cnwm().source;
  const auto ref_t2 = ctx.cnwm_reference(t2);
  const auto ref_flair = ctx.cnwm_reference(flair);
  if (!ref_t2 || !ref_flair) return f;

  const BinaryMask& net = ctx.net();
  std::vector<double> t2_norm, flair_norm;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t v = 0; v < net.size(); ++v) {
    if (!net[v]) continue;
    t2_norm.push_back(t2[v] / *ref_t2);
    flair_norm.push_back(flair[v] / *ref_flair);
    sum += t2[v];
    sum_sq += t2[v] * t2[v];
  }
  const std::size_t n = t2_norm.size();
  if (n == 0) return f;

  const double med_t2 = median(t2_norm);
  const double med_flair = median(flair_norm);
  if (n >= params.tiny_net_voxels && med_flair > 0.0) {
    const double ratio = med_t2 / med_flair;
    f.t2_flair_mismatch_ratio = ratio;
    const double mean = sum / static_cast<double>(n);
    if (mean > 0.0) {
      const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
      const double cv = std::sqrt(var) / mean;
      f.flair_suppression = ratio > th.ratio && cv < th.homogeneity_cv && med_flair < th.suppression;
    }
  }

  const BinaryMask shell = dilate_mm(net, params.rim_shell_mm).minus(net);
  BinaryMask interior = net.minus(voxel::boundary(net, voxel::Connectivity::Six));
  if (interior.empty()) interior = net;
  std::vector<double> shell_values, interior_values;
  for (std::size_t v = 0; v < net.size(); ++v) {
    if (shell[v]) shell_values.push_back(flair[v] / *ref_flair);
    if (interior[v]) interior_values.push_back(flair[v] / *ref_flair);
  }
  if (!shell_values.empty()) {
    f.flair_rim_hyperintensity = median(shell_values) > th.rim * median(interior_values);
  }
  return f;
}

}  // namespace cimllm::detail
