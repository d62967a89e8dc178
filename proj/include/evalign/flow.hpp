#pragma once

#include <string>
#include <vector>

#include "evalign/errors.hpp"

namespace evalign {

/// Per-pixel motion field in pixels per unit normalized time, parameterized
/// by a coarse control grid. The dense view is the bilinear interpolation of
/// the control grid onto the H x W pixel lattice; when the grid matches the
/// pixel lattice the dense view reproduces the control values exactly.
struct FlowField {
  int grid_h = 0;
  int grid_w = 0;
  int height = 0;  // dense (sensor) resolution
  int width = 0;
  std::vector<double> u;  // grid_h * grid_w, row-major
  std::vector<double> v;

  static FlowField zeros(int grid_h, int grid_w, int height, int width);
  static FlowField constant(int grid_h, int grid_w, int height, int width,
                            double cu, double cv);

  /// Supporting control nodes and interpolation weights for pixel (x, y).
  struct Basis {
    int idx[4];
    double w[4];
  };
  Basis basis_at(double x, double y) const;

  void sample(double x, double y, double& out_u, double& out_v) const;

  /// Dense H x W planes (row-major).
  std::vector<double> dense_u() const;
  std::vector<double> dense_v() const;

  bool finite() const;
  void check(int expect_height, int expect_width) const;
};

/// ".flo32": ASCII header "FLO1 <Gh> <Gw> <H> <W>\n" followed by
/// Gh*Gw little-endian f32 for the u plane, then the v plane, row-major.
FlowField read_flo32(const std::string& path);
void write_flo32(const FlowField& flow, const std::string& path);

}  // namespace evalign
