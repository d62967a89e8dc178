#pragma once

#include "evalign/tensor.hpp"

namespace evalign {

/// Cross-correlation with kernel [out_c, in_c, kh, kw]; bias may be empty or
/// out_c long. Output spatial size: (H + 2 pad - kh) / stride + 1.
FeatureMap conv2d(const FeatureMap& input, const Tensor& kernel,
                  const std::vector<double>& bias, int stride, int padding);

/// Transposed convolution with kernel [in_c, out_c, kh, kw]. Output spatial
/// size: (H - 1) stride - 2 pad + kh + output_padding.
FeatureMap transposed_conv2d(const FeatureMap& input, const Tensor& kernel,
                             int stride, int padding, int output_padding);

}  // namespace evalign
