#include "evalign/cmm.hpp"

#include <cmath>
#include <string>

#include "evalign/rng.hpp"

namespace evalign {

CmmParams CmmParams::random(int channels, int state_dim, std::uint64_t seed) {
  Rng rng(seed);
  const auto c = static_cast<std::size_t>(channels);
  const auto n = static_cast<std::size_t>(state_dim);
  CmmParams p;
  auto fill = [&](std::vector<double>& v, std::size_t len, double mean,
                  double sd) {
    v.resize(len);
    for (double& x : v) x = mean + sd * rng.normal();
  };
  fill(p.r_e, c, 1.0, 0.1);
  fill(p.beta_e, c, 0.0, 0.1);
  fill(p.r_r, c, 1.0, 0.1);
  fill(p.beta_r, c, 0.0, 0.1);
  p.ssm.a.resize(n);
  for (double& a : p.ssm.a) a = -0.2 - rng.uniform();  // stable by construction
  fill(p.ssm.b, c * n, 0.0, 0.5);
  fill(p.ssm.c, c * n, 0.0, 0.5);
  fill(p.ssm.d, c, 1.0, 0.1);
  p.ssm.delta = {1.0};
  p.linear_weight = Tensor::zeros({c, c});
  for (double& w : p.linear_weight.data) w = rng.normal() * 0.3;
  fill(p.linear_bias, c, 0.0, 0.1);
  p.ln_gamma.assign(c, 1.0);
  p.ln_beta.assign(c, 0.0);
  return p;
}

void CmmParams::check(int channels) const {
  const auto c = static_cast<std::size_t>(channels);
  if (r_e.size() != c || beta_e.size() != c || r_r.size() != c ||
      beta_r.size() != c) {
    throw ShapeMismatch("cmm: affine factors must have C entries");
  }
  if (ssm.channels() != channels) {
    throw ShapeMismatch("cmm: scan bank channel count mismatch");
  }
  if (linear_weight.shape != std::vector<std::size_t>{c, c}) {
    throw ShapeMismatch("cmm: linear weight must be [C, C]");
  }
  if (linear_bias.size() != c || ln_gamma.size() != c || ln_beta.size() != c) {
    throw ShapeMismatch("cmm: linear/layer-norm vectors must have C entries");
  }
  if (!(ln_eps > 0.0)) {
    throw ValidationError("cmm: layer-norm epsilon must be > 0");
  }
}

TensorMap CmmParams::to_tensors() const {
  TensorMap m;
  auto vec = [](const std::vector<double>& v) {
    Tensor t = Tensor::zeros({v.size()});
    t.data = v;
    return t;
  };
  m["cmm.r_e"] = vec(r_e);
  m["cmm.beta_e"] = vec(beta_e);
  m["cmm.r_r"] = vec(r_r);
  m["cmm.beta_r"] = vec(beta_r);
  Tensor b = Tensor::zeros({ssm.d.size(), ssm.a.size()});
  b.data = ssm.b;
  Tensor c = Tensor::zeros({ssm.d.size(), ssm.a.size()});
  c.data = ssm.c;
  m["cmm.ssm.a"] = vec(ssm.a);
  m["cmm.ssm.b"] = std::move(b);
  m["cmm.ssm.c"] = std::move(c);
  m["cmm.ssm.d"] = vec(ssm.d);
  m["cmm.ssm.delta"] = vec(ssm.delta);
  m["cmm.linear_weight"] = linear_weight;
  m["cmm.linear_bias"] = vec(linear_bias);
  m["cmm.ln_gamma"] = vec(ln_gamma);
  m["cmm.ln_beta"] = vec(ln_beta);
  Tensor e = Tensor::zeros({1});
  e.data[0] = ln_eps;
  m["cmm.ln_eps"] = std::move(e);
  return m;
}

CmmParams CmmParams::from_tensors(const TensorMap& tensors) {
  auto get = [&](const char* name) -> const Tensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw ParseError(std::string("cmm: missing tensor '") + name + "'");
    }
    return it->second;
  };
  CmmParams p;
  p.r_e = get("cmm.r_e").data;
  p.beta_e = get("cmm.beta_e").data;
  p.r_r = get("cmm.r_r").data;
  p.beta_r = get("cmm.beta_r").data;
  p.ssm.a = get("cmm.ssm.a").data;
  p.ssm.b = get("cmm.ssm.b").data;
  p.ssm.c = get("cmm.ssm.c").data;
  p.ssm.d = get("cmm.ssm.d").data;
  p.ssm.delta = get("cmm.ssm.delta").data;
  p.linear_weight = get("cmm.linear_weight");
  p.linear_bias = get("cmm.linear_bias").data;
  p.ln_gamma = get("cmm.ln_gamma").data;
  p.ln_beta = get("cmm.ln_beta").data;
  p.ln_eps = get("cmm.ln_eps").data.at(0);
  p.check(static_cast<int>(p.r_e.size()));
  return p;
}

FeatureMap modality_affine(const FeatureMap& feat,
                           const std::vector<double>& r,
                           const std::vector<double>& beta) {
  if (r.size() != static_cast<std::size_t>(feat.channels) ||
      beta.size() != r.size()) {
    throw ShapeMismatch("modality_affine: factor length must equal channels");
  }
  FeatureMap out(feat.channels, feat.height, feat.width);
  const std::size_t plane =
      static_cast<std::size_t>(feat.height) * feat.width;
  for (int c = 0; c < feat.channels; ++c) {
    const double rc = r[static_cast<std::size_t>(c)];
    const double bc = beta[static_cast<std::size_t>(c)];
    const double* src = feat.data.data() + static_cast<std::size_t>(c) * plane;
    double* dst = out.data.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * rc + bc;
  }
  return out;
}

FeatureMap interlace_concat(const FeatureMap& z_e, const FeatureMap& z_r) {
  if (!z_e.same_shape(z_r)) {
    throw ShapeMismatch("interlace_concat: inputs must have identical shapes");
  }
  FeatureMap out(z_e.channels, z_e.height, 2 * z_e.width);
  for (int c = 0; c < z_e.channels; ++c) {
    for (int y = 0; y < z_e.height; ++y) {
      for (int x = 0; x < z_e.width; ++x) {
        out.at(c, y, 2 * x) = z_e.at(c, y, x);
        out.at(c, y, 2 * x + 1) = z_r.at(c, y, x);
      }
    }
  }
  return out;
}

std::pair<FeatureMap, FeatureMap> decouple(const FeatureMap& z_f) {
  if (z_f.width % 2 != 0) {
    throw ShapeMismatch("decouple: width must be even");
  }
  const int w = z_f.width / 2;
  FeatureMap z_e(z_f.channels, z_f.height, w);
  FeatureMap z_r(z_f.channels, z_f.height, w);
  for (int c = 0; c < z_f.channels; ++c) {
    for (int y = 0; y < z_f.height; ++y) {
      for (int x = 0; x < w; ++x) {
        z_e.at(c, y, x) = z_f.at(c, y, 2 * x);
        z_r.at(c, y, x) = z_f.at(c, y, 2 * x + 1);
      }
    }
  }
  return {std::move(z_e), std::move(z_r)};
}

FeatureMap cmm_scan(const FeatureMap& z_f, const SSMParams& ssm) {
  if (ssm.channels() != z_f.channels) {
    throw ShapeMismatch("cmm_scan: scan bank channel count mismatch");
  }
  const std::size_t length =
      static_cast<std::size_t>(z_f.height) * z_f.width;
  // row-major flatten: position index runs over H then W, channels innermost
  std::vector<double> x(length * static_cast<std::size_t>(z_f.channels));
  for (int c = 0; c < z_f.channels; ++c) {
    for (int y = 0; y < z_f.height; ++y) {
      for (int xx = 0; xx < z_f.width; ++xx) {
        const std::size_t pos = static_cast<std::size_t>(y) * z_f.width + xx;
        x[pos * z_f.channels + static_cast<std::size_t>(c)] =
            z_f.at(c, y, xx);
      }
    }
  }
  const std::vector<double> y = selective_scan(ssm, x, length);
  FeatureMap out(z_f.channels, z_f.height, z_f.width);
  for (int c = 0; c < z_f.channels; ++c) {
    for (int yy = 0; yy < z_f.height; ++yy) {
      for (int xx = 0; xx < z_f.width; ++xx) {
        const std::size_t pos = static_cast<std::size_t>(yy) * z_f.width + xx;
        out.at(c, yy, xx) = y[pos * z_f.channels + static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

FeatureMap cmm_refine(const FeatureMap& weight_map, const FeatureMap& z_f,
                      const CmmParams& params) {
  if (!weight_map.same_shape(z_f)) {
    throw ShapeMismatch("cmm_refine: weight map shape mismatch");
  }
  params.check(z_f.channels);
  const int c = z_f.channels;
  FeatureMap out(c, z_f.height, z_f.width);
  std::vector<double> gated(static_cast<std::size_t>(c));
  std::vector<double> lin(static_cast<std::size_t>(c));
  for (int y = 0; y < z_f.height; ++y) {
    for (int x = 0; x < z_f.width; ++x) {
      for (int i = 0; i < c; ++i) {
        gated[static_cast<std::size_t>(i)] =
            weight_map.at(i, y, x) * z_f.at(i, y, x);
      }
      for (int i = 0; i < c; ++i) {
        double s = params.linear_bias[static_cast<std::size_t>(i)];
        const double* w =
            params.linear_weight.data.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) s += w[j] * gated[static_cast<std::size_t>(j)];
        lin[static_cast<std::size_t>(i)] = s;
      }
      double mean = 0.0;
      for (double v : lin) mean += v;
      mean /= c;
      double var = 0.0;
      for (double v : lin) var += (v - mean) * (v - mean);
      var /= c;
      const double inv = 1.0 / std::sqrt(var + params.ln_eps);
      for (int i = 0; i < c; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out.at(i, y, x) =
            params.ln_gamma[k] * (lin[k] - mean) * inv + params.ln_beta[k];
      }
    }
  }
  return out;
}

FeatureMap cmm_forward(const FeatureMap& f_e, const FeatureMap& f_r,
                       const CmmParams& params) {
  if (!f_e.same_shape(f_r)) {
    throw ShapeMismatch("cmm_forward: inputs must have identical shapes");
  }
  params.check(f_e.channels);
  const FeatureMap z_e = modality_affine(f_e, params.r_e, params.beta_e);
  const FeatureMap z_r = modality_affine(f_r, params.r_r, params.beta_r);
  const FeatureMap z_f = interlace_concat(z_e, z_r);
  const FeatureMap weight_map = cmm_scan(z_f, params.ssm);
  const FeatureMap refined = cmm_refine(weight_map, z_f, params);
  auto [d_e, d_r] = decouple(refined);

  FeatureMap out(f_e.channels, f_e.height, f_e.width);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double fe = f_e.data[i] + d_e.data[i];  // residual per modality
    const double fr = f_r.data[i] + d_r.data[i];
    out.data[i] = fe + fr;
  }
  return out;
}

}  // namespace evalign
