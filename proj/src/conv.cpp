#include "evalign/conv.hpp"

#include <string>

namespace evalign {

FeatureMap conv2d(const FeatureMap& input, const Tensor& kernel,
                  const std::vector<double>& bias, int stride, int padding) {
  if (kernel.shape.size() != 4) {
    throw ShapeMismatch("conv2d: kernel must be [out_c, in_c, kh, kw]");
  }
  const int out_c = static_cast<int>(kernel.shape[0]);
  const int in_c = static_cast<int>(kernel.shape[1]);
  const int kh = static_cast<int>(kernel.shape[2]);
  const int kw = static_cast<int>(kernel.shape[3]);
  if (in_c != input.channels) {
    throw ShapeMismatch("conv2d: kernel expects " + std::to_string(in_c) +
                        " input channels, got " +
                        std::to_string(input.channels));
  }
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_c)) {
    throw ShapeMismatch("conv2d: bias length mismatch");
  }
  if (stride < 1) throw ValidationError("conv2d: stride must be >= 1");
  const int oh = (input.height + 2 * padding - kh) / stride + 1;
  const int ow = (input.width + 2 * padding - kw) / stride + 1;
  if (oh < 1 || ow < 1) throw ShapeMismatch("conv2d: empty output");

  FeatureMap out(out_c, oh, ow);
  for (int oc = 0; oc < out_c; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < in_c; ++ic) {
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= input.height) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= input.width) continue;
              const std::size_t widx =
                  ((static_cast<std::size_t>(oc) * in_c + ic) * kh + ky) * kw +
                  kx;
              acc += input.at(ic, iy, ix) * kernel.data[widx];
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

FeatureMap transposed_conv2d(const FeatureMap& input, const Tensor& kernel,
                             int stride, int padding, int output_padding) {
  if (kernel.shape.size() != 4) {
    throw ShapeMismatch("transposed_conv2d: kernel must be [in_c, out_c, kh, kw]");
  }
  const int in_c = static_cast<int>(kernel.shape[0]);
  const int out_c = static_cast<int>(kernel.shape[1]);
  const int kh = static_cast<int>(kernel.shape[2]);
  const int kw = static_cast<int>(kernel.shape[3]);
  if (in_c != input.channels) {
    throw ShapeMismatch("transposed_conv2d: kernel expects " +
                        std::to_string(in_c) + " input channels, got " +
                        std::to_string(input.channels));
  }
  if (stride < 1) throw ValidationError("transposed_conv2d: stride must be >= 1");
  if (output_padding < 0 || output_padding >= stride) {
    throw ValidationError(
        "transposed_conv2d: output_padding must be in [0, stride)");
  }
  const int oh = (input.height - 1) * stride - 2 * padding + kh + output_padding;
  const int ow = (input.width - 1) * stride - 2 * padding + kw + output_padding;
  if (oh < 1 || ow < 1) throw ShapeMismatch("transposed_conv2d: empty output");

  // scatter form: every input pixel stamps the kernel footprint
  FeatureMap out(out_c, oh, ow);
  for (int ic = 0; ic < in_c; ++ic) {
    for (int iy = 0; iy < input.height; ++iy) {
      for (int ix = 0; ix < input.width; ++ix) {
        const double val = input.at(ic, iy, ix);
        if (val == 0.0) continue;
        for (int oc = 0; oc < out_c; ++oc) {
          const std::size_t wbase =
              (static_cast<std::size_t>(ic) * out_c + oc) *
              static_cast<std::size_t>(kh) * kw;
          for (int ky = 0; ky < kh; ++ky) {
            const int oy = iy * stride - padding + ky;
            if (oy < 0 || oy >= oh) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ox = ix * stride - padding + kx;
              if (ox < 0 || ox >= ow) continue;
              out.at(oc, oy, ox) +=
                  val * kernel.data[wbase + static_cast<std::size_t>(ky) * kw +
                                    kx];
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace evalign
