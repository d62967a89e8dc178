#include "evalign/edum.hpp"

#include <cmath>
#include <string>

#include "evalign/rng.hpp"

namespace evalign {

EdumParams EdumParams::identity(Tensor base_kernel, double attn_bias) {
  if (base_kernel.shape.size() != 4 ||
      base_kernel.shape[0] != base_kernel.shape[1] ||
      base_kernel.shape[2] != 3 || base_kernel.shape[3] != 3) {
    throw ShapeMismatch("edum: base kernel must be [C, C, 3, 3]");
  }
  const std::size_t c = base_kernel.shape[0];
  EdumParams p;
  p.kernel = std::move(base_kernel);
  p.mod_weight = Tensor::zeros({c, c});
  p.mod_bias.assign(c, 1.0);
  p.attn_kernel = Tensor::zeros({1, 2, 7, 7});
  p.attn_bias = attn_bias;
  return p;
}

EdumParams EdumParams::random(int channels, std::uint64_t seed) {
  Rng rng(seed);
  const auto c = static_cast<std::size_t>(channels);
  EdumParams p;
  p.kernel = Tensor::zeros({c, c, 3, 3});
  for (double& v : p.kernel.data) v = rng.normal() * 0.3;
  p.mod_weight = Tensor::zeros({c, c});
  for (double& v : p.mod_weight.data) v = rng.normal() * 0.1;
  p.mod_bias.assign(c, 0.0);
  for (double& v : p.mod_bias) v = 1.0 + rng.normal() * 0.1;
  p.attn_kernel = Tensor::zeros({1, 2, 7, 7});
  for (double& v : p.attn_kernel.data) v = rng.normal() * 0.1;
  p.attn_bias = rng.normal() * 0.1;
  return p;
}

void EdumParams::check(int channels) const {
  const auto c = static_cast<std::size_t>(channels);
  if (kernel.shape != std::vector<std::size_t>{c, c, 3, 3}) {
    throw ShapeMismatch("edum: kernel must be [C, C, 3, 3]");
  }
  if (mod_weight.shape != std::vector<std::size_t>{c, c}) {
    throw ShapeMismatch("edum: modulation weight must be [C, C]");
  }
  if (mod_bias.size() != c) {
    throw ShapeMismatch("edum: modulation bias must have C entries");
  }
  if (attn_kernel.shape != std::vector<std::size_t>{1, 2, 7, 7}) {
    throw ShapeMismatch("edum: attention kernel must be [1, 2, 7, 7]");
  }
}

TensorMap EdumParams::to_tensors() const {
  TensorMap m;
  m["edum.kernel"] = kernel;
  m["edum.mod_weight"] = mod_weight;
  Tensor bias = Tensor::zeros({mod_bias.size()});
  bias.data = mod_bias;
  m["edum.mod_bias"] = std::move(bias);
  m["edum.attn_kernel"] = attn_kernel;
  Tensor ab = Tensor::zeros({1});
  ab.data[0] = attn_bias;
  m["edum.attn_bias"] = std::move(ab);
  return m;
}

EdumParams EdumParams::from_tensors(const TensorMap& tensors) {
  auto get = [&](const char* name) -> const Tensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw ParseError(std::string("edum: missing tensor '") + name + "'");
    }
    return it->second;
  };
  EdumParams p;
  p.kernel = get("edum.kernel");
  p.mod_weight = get("edum.mod_weight");
  p.mod_bias = get("edum.mod_bias").data;
  p.attn_kernel = get("edum.attn_kernel");
  p.attn_bias = get("edum.attn_bias").data.at(0);
  if (p.kernel.shape.size() != 4) {
    throw ShapeMismatch("edum: kernel must be 4-d");
  }
  p.check(static_cast<int>(p.kernel.shape[0]));
  return p;
}

std::vector<double> global_average_pool(const FeatureMap& feat) {
  std::vector<double> out(static_cast<std::size_t>(feat.channels), 0.0);
  const double inv = 1.0 / (static_cast<double>(feat.height) * feat.width);
  for (int c = 0; c < feat.channels; ++c) {
    double s = 0.0;
    for (int y = 0; y < feat.height; ++y) {
      for (int x = 0; x < feat.width; ++x) s += feat.at(c, y, x);
    }
    out[static_cast<std::size_t>(c)] = s * inv;
  }
  return out;
}

FeatureMap edum_forward(const FeatureMap& event_feat,
                        const FeatureMap& rgb_feat, const EdumParams& params) {
  params.check(event_feat.channels);
  if (rgb_feat.channels != event_feat.channels ||
      rgb_feat.height != 2 * event_feat.height ||
      rgb_feat.width != 2 * event_feat.width) {
    throw ShapeMismatch("edum_forward: guidance must be C x 2H x 2W");
  }
  const int c = event_feat.channels;

  // kernel modulation from the pooled input
  const std::vector<double> pooled = global_average_pool(event_feat);
  std::vector<double> mod(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    double s = params.mod_bias[static_cast<std::size_t>(i)];
    for (int j = 0; j < c; ++j) {
      s += params.mod_weight.data[static_cast<std::size_t>(i) * c + j] *
           pooled[static_cast<std::size_t>(j)];
    }
    mod[static_cast<std::size_t>(i)] = s;
  }
  Tensor scaled = params.kernel;
  {
    const std::size_t per_in = static_cast<std::size_t>(c) * 9;
    for (int ic = 0; ic < c; ++ic) {
      const double m = mod[static_cast<std::size_t>(ic)];
      double* w = scaled.data.data() + static_cast<std::size_t>(ic) * per_in;
      for (std::size_t k = 0; k < per_in; ++k) w[k] *= m;
    }
  }

  FeatureMap up = transposed_conv2d(event_feat, scaled, 2, 1, 1);

  // spatial attention from the guidance features
  FeatureMap stats(2, rgb_feat.height, rgb_feat.width);
  for (int y = 0; y < rgb_feat.height; ++y) {
    for (int x = 0; x < rgb_feat.width; ++x) {
      double mean = 0.0;
      double mx = rgb_feat.at(0, y, x);
      for (int ch = 0; ch < c; ++ch) {
        const double v = rgb_feat.at(ch, y, x);
        mean += v;
        if (v > mx) mx = v;
      }
      stats.at(0, y, x) = mean / c;
      stats.at(1, y, x) = mx;
    }
  }
  FeatureMap attn_raw = conv2d(stats, params.attn_kernel, {params.attn_bias},
                               1, 3);

  FeatureMap out(c, up.height, up.width);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < up.height; ++y) {
      for (int x = 0; x < up.width; ++x) {
        const double a = 1.0 / (1.0 + std::exp(-attn_raw.at(0, y, x)));
        const double f = up.at(ch, y, x);
        out.at(ch, y, x) = f + f * a;
      }
    }
  }
  return out;
}

}  // namespace evalign
