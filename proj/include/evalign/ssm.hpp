#pragma once

#include <cstddef>
#include <vector>

#include "evalign/errors.hpp"

namespace evalign {

/// Diagonal continuous-time state-space parameters for a bank of per-channel
/// scalar-in/scalar-out systems sharing the state dimension N:
///   h'(t) = A h(t) + B x(t),  y(t) = C h(t) + D x(t)
/// Delta holds the per-position timescale (size L) or a single constant.
struct SSMParams {
  std::vector<double> a;      // N (diagonal of A)
  std::vector<double> b;      // channels * N, row per channel
  std::vector<double> c;      // channels * N
  std::vector<double> d;      // channels
  std::vector<double> delta;  // size 1 or sequence length

  int state_dim() const { return static_cast<int>(a.size()); }
  int channels() const { return static_cast<int>(d.size()); }

  /// Shape consistency; with check_stability also requires all A <= 0.
  void validate(std::size_t length, bool check_stability = false) const;
};

/// Zero-order-hold step for one channel:
///   abar = exp(delta a),  bbar = (exp(delta a) - 1) / a * b
/// with the series limit delta b (1 + z/2 + z^2/6), z = delta a, used when
/// |z| < 1e-6.
struct Discretized {
  std::vector<double> abar;
  std::vector<double> bbar;
};
Discretized discretize(const std::vector<double>& a,
                       const std::vector<double>& b, double delta);

/// Hidden state carried across chunked scans; channels * N, zero initial.
struct ScanState {
  std::vector<double> h;
};
ScanState make_scan_state(const SSMParams& params);

/// Runs h_t = abar h_{t-1} + bbar x_t, y_t = c . h_t + d x_t over a chunk of
/// the sequence starting at global position `start` (which indexes the
/// per-position delta). x is chunk_len * channels row-major.
std::vector<double> scan_chunk(const SSMParams& params,
                               const std::vector<double>& x,
                               std::size_t chunk_len, std::size_t start,
                               ScanState& state);

/// One-shot scan of the whole sequence (length * channels row-major);
/// bitwise identical to any chunked split of the same input.
std::vector<double> selective_scan(const SSMParams& params,
                                   const std::vector<double>& x,
                                   std::size_t length);

}  // namespace evalign
