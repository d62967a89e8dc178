#include "evalign/ssm.hpp"

#include <cmath>
#include <string>

namespace evalign {

namespace {

// (exp(z) - 1) / z with a 3-term series below the switch point.
inline double expm1_over(double z) {
  if (std::abs(z) < 1e-6) {
    return 1.0 + z / 2.0 + z * z / 6.0;
  }
  return std::expm1(z) / z;
}

}  // namespace

void SSMParams::validate(std::size_t length, bool check_stability) const {
  const std::size_t n = a.size();
  const std::size_t ch = d.size();
  if (n == 0 || ch == 0) throw ShapeMismatch("ssm: empty parameters");
  if (b.size() != ch * n || c.size() != ch * n) {
    throw ShapeMismatch("ssm: B/C must be channels x N");
  }
  if (delta.size() != 1 && delta.size() != length) {
    throw ShapeMismatch("ssm: delta must be scalar or per-position (" +
                        std::to_string(length) + "), got " +
                        std::to_string(delta.size()));
  }
  for (double dl : delta) {
    if (!(dl > 0.0)) throw NonPositiveDelta("ssm: delta must be > 0");
    if (!std::isfinite(dl)) throw ValidationError("ssm: non-finite delta");
  }
  auto all_finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (!all_finite(a) || !all_finite(b) || !all_finite(c) || !all_finite(d)) {
    throw ValidationError("ssm: non-finite parameter");
  }
  if (check_stability) {
    for (double av : a) {
      if (av > 0.0)
        throw ValidationError("ssm: A entries must be <= 0 in checked mode");
    }
  }
}

Discretized discretize(const std::vector<double>& a,
                       const std::vector<double>& b, double delta) {
  if (!(delta > 0.0)) throw NonPositiveDelta("discretize: delta must be > 0");
  if (a.size() != b.size()) {
    throw ShapeMismatch("discretize: A and B must have equal length");
  }
  Discretized out;
  out.abar.resize(a.size());
  out.bbar.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = delta * a[i];
    out.abar[i] = std::exp(z);
    out.bbar[i] = delta * b[i] * expm1_over(z);
  }
  return out;
}

ScanState make_scan_state(const SSMParams& params) {
  ScanState s;
  s.h.assign(static_cast<std::size_t>(params.channels()) *
                 static_cast<std::size_t>(params.state_dim()),
             0.0);
  return s;
}

std::vector<double> scan_chunk(const SSMParams& params,
                               const std::vector<double>& x,
                               std::size_t chunk_len, std::size_t start,
                               ScanState& state) {
  const std::size_t n = static_cast<std::size_t>(params.state_dim());
  const std::size_t ch = static_cast<std::size_t>(params.channels());
  if (x.size() != chunk_len * ch) {
    throw ShapeMismatch("scan_chunk: input must be chunk_len x channels");
  }
  if (state.h.size() != ch * n) {
    throw ShapeMismatch("scan_chunk: bad state size");
  }
  const bool const_delta = params.delta.size() == 1;
  if (!const_delta && params.delta.size() < start + chunk_len) {
    throw ShapeMismatch("scan_chunk: per-position delta shorter than scan");
  }

  std::vector<double> y(x.size(), 0.0);
  std::vector<double> abar(n), phi(n);  // phi = delta * (exp(z)-1)/z
  bool have_disc = false;

  for (std::size_t t = 0; t < chunk_len; ++t) {
    const double dl = const_delta ? params.delta[0] : params.delta[start + t];
    if (!(dl > 0.0)) throw NonPositiveDelta("scan_chunk: delta must be > 0");
    if (!have_disc || !const_delta) {
      for (std::size_t i = 0; i < n; ++i) {
        const double z = dl * params.a[i];
        abar[i] = std::exp(z);
        phi[i] = dl * expm1_over(z);
      }
      have_disc = true;
    }
    for (std::size_t cidx = 0; cidx < ch; ++cidx) {
      const double xt = x[t * ch + cidx];
      double* h = state.h.data() + cidx * n;
      const double* bc = params.b.data() + cidx * n;
      const double* cc = params.c.data() + cidx * n;
      double yt = params.d[cidx] * xt;
      for (std::size_t i = 0; i < n; ++i) {
        h[i] = abar[i] * h[i] + phi[i] * bc[i] * xt;
        yt += cc[i] * h[i];
      }
      y[t * ch + cidx] = yt;
    }
  }
  return y;
}

std::vector<double> selective_scan(const SSMParams& params,
                                   const std::vector<double>& x,
                                   std::size_t length) {
  params.validate(length);
  const std::size_t ch = static_cast<std::size_t>(params.channels());
  if (x.size() != length * ch) {
    throw ShapeMismatch("selective_scan: input must be length x channels");
  }
  ScanState state = make_scan_state(params);
  return scan_chunk(params, x, length, 0, state);
}

}  // namespace evalign
