#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evalign/conv.hpp"
#include "evalign/tensor.hpp"

namespace evalign {

/// Parameters of the dynamic upsampler: a 3x3 transposed-convolution kernel
/// whose per-input-channel scale is produced from the pooled input, plus a
/// 7x7 spatial-attention convolution over the [channel-mean, channel-max]
/// stack of the guidance features. Geometry is fixed at stride 2, padding 1,
/// output_padding 1, so the output is exactly 2H x 2W.
struct EdumParams {
  Tensor kernel;                 // [C, C, 3, 3]
  Tensor mod_weight;             // [C, C] 1x1 conv
  std::vector<double> mod_bias;  // C
  Tensor attn_kernel;            // [1, 2, 7, 7]
  double attn_bias = 0.0;

  /// Identity modulation (weights 0, bias 1) around the given base kernel,
  /// attention kernel zeroed with the given bias.
  static EdumParams identity(Tensor base_kernel, double attn_bias = 0.0);
  static EdumParams random(int channels, std::uint64_t seed);

  void check(int channels) const;
  TensorMap to_tensors() const;
  static EdumParams from_tensors(const TensorMap& tensors);
};

/// Per-channel mean over the spatial extent.
std::vector<double> global_average_pool(const FeatureMap& feat);

/// Upsamples event features to the guidance resolution:
///   m   = mod_weight * GAP(event) + mod_bias          (per input channel)
///   F'  = tconv(kernel scaled by m, event)            (stride 2 -> 2H x 2W)
///   att = sigmoid(conv7x7([mean_c(rgb), max_c(rgb)]))
///   out = F' + F' * att
FeatureMap edum_forward(const FeatureMap& event_feat,
                        const FeatureMap& rgb_feat, const EdumParams& params);

}  // namespace evalign
