#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evalign/ssm.hpp"
#include "evalign/tensor.hpp"

namespace evalign {

/// Cross-modal fusion parameters: per-modality channel affine factors, the
/// scan bank, per-position channel linear map, and layer-norm affine.
struct CmmParams {
  std::vector<double> r_e, beta_e;  // C each
  std::vector<double> r_r, beta_r;
  SSMParams ssm;                      // channels == C
  Tensor linear_weight;               // [C, C]
  std::vector<double> linear_bias;    // C
  std::vector<double> ln_gamma, ln_beta;  // C
  double ln_eps = 1e-5;

  static CmmParams random(int channels, int state_dim, std::uint64_t seed);

  void check(int channels) const;
  TensorMap to_tensors() const;
  static CmmParams from_tensors(const TensorMap& tensors);
};

/// Per-channel affine transform, broadcast over the spatial extent.
FeatureMap modality_affine(const FeatureMap& feat,
                           const std::vector<double>& r,
                           const std::vector<double>& beta);

/// Column interleave along width: output column 2j is the event column j,
/// column 2j+1 the rgb column j.
FeatureMap interlace_concat(const FeatureMap& z_e, const FeatureMap& z_r);

/// Exact inverse of interlace_concat.
std::pair<FeatureMap, FeatureMap> decouple(const FeatureMap& z_f);

/// Flattens the spatial extent row-major into a per-channel sequence, runs
/// the selective scan, and reshapes back; output shape equals input shape.
FeatureMap cmm_scan(const FeatureMap& z_f, const SSMParams& ssm);

/// weight_map * z_f elementwise, then a per-position channel linear map,
/// then layer normalization over channels.
FeatureMap cmm_refine(const FeatureMap& weight_map, const FeatureMap& z_f,
                      const CmmParams& params);

/// Full chain: affine both modalities, interlace, scan, refine, decouple,
/// add residually onto the original inputs, and sum the two enhanced maps.
FeatureMap cmm_forward(const FeatureMap& f_e, const FeatureMap& f_r,
                       const CmmParams& params);

}  // namespace evalign
