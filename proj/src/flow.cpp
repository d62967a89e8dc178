#include "evalign/flow.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evalign {

FlowField FlowField::zeros(int grid_h, int grid_w, int height, int width) {
  if (grid_h < 1 || grid_w < 1 || height < 1 || width < 1) {
    throw ValidationError("flow field dimensions must be positive");
  }
  FlowField f;
  f.grid_h = grid_h;
  f.grid_w = grid_w;
  f.height = height;
  f.width = width;
  f.u.assign(static_cast<std::size_t>(grid_h) * grid_w, 0.0);
  f.v.assign(static_cast<std::size_t>(grid_h) * grid_w, 0.0);
  return f;
}

FlowField FlowField::constant(int grid_h, int grid_w, int height, int width,
                              double cu, double cv) {
  FlowField f = zeros(grid_h, grid_w, height, width);
  std::fill(f.u.begin(), f.u.end(), cu);
  std::fill(f.v.begin(), f.v.end(), cv);
  return f;
}

FlowField::Basis FlowField::basis_at(double x, double y) const {
  // Corner-aligned mapping: control node (gi, gj) sits at pixel
  // (gi*(H-1)/(Gh-1), gj*(W-1)/(Gw-1)).
  double gx = 0.0, gy = 0.0;
  if (grid_w > 1 && width > 1) gx = x * (grid_w - 1) / (width - 1.0);
  if (grid_h > 1 && height > 1) gy = y * (grid_h - 1) / (height - 1.0);

  int j0 = static_cast<int>(std::floor(gx));
  int i0 = static_cast<int>(std::floor(gy));
  if (j0 > grid_w - 2) j0 = grid_w - 2;
  if (i0 > grid_h - 2) i0 = grid_h - 2;
  if (j0 < 0) j0 = 0;
  if (i0 < 0) i0 = 0;
  const int j1 = grid_w > 1 ? j0 + 1 : j0;
  const int i1 = grid_h > 1 ? i0 + 1 : i0;
  const double fx = grid_w > 1 ? gx - j0 : 0.0;
  const double fy = grid_h > 1 ? gy - i0 : 0.0;

  Basis b;
  b.idx[0] = i0 * grid_w + j0;
  b.idx[1] = i0 * grid_w + j1;
  b.idx[2] = i1 * grid_w + j0;
  b.idx[3] = i1 * grid_w + j1;
  b.w[0] = (1.0 - fy) * (1.0 - fx);
  b.w[1] = (1.0 - fy) * fx;
  b.w[2] = fy * (1.0 - fx);
  b.w[3] = fy * fx;
  return b;
}

void FlowField::sample(double x, double y, double& out_u,
                       double& out_v) const {
  const Basis b = basis_at(x, y);
  double su = 0.0, sv = 0.0;
  for (int k = 0; k < 4; ++k) {
    su += b.w[k] * u[static_cast<std::size_t>(b.idx[k])];
    sv += b.w[k] * v[static_cast<std::size_t>(b.idx[k])];
  }
  out_u = su;
  out_v = sv;
}

std::vector<double> FlowField::dense_u() const {
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double du, dv;
      sample(x, y, du, dv);
      out[static_cast<std::size_t>(y) * width + x] = du;
    }
  }
  return out;
}

std::vector<double> FlowField::dense_v() const {
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double du, dv;
      sample(x, y, du, dv);
      out[static_cast<std::size_t>(y) * width + x] = dv;
    }
  }
  return out;
}

bool FlowField::finite() const {
  for (double a : u)
    if (!std::isfinite(a)) return false;
  for (double a : v)
    if (!std::isfinite(a)) return false;
  return true;
}

void FlowField::check(int expect_height, int expect_width) const {
  if (height != expect_height || width != expect_width) {
    throw ShapeMismatch("flow dense view is " + std::to_string(width) + "x" +
                        std::to_string(height) + ", expected " +
                        std::to_string(expect_width) + "x" +
                        std::to_string(expect_height));
  }
  if (u.size() != static_cast<std::size_t>(grid_h) * grid_w ||
      v.size() != u.size()) {
    throw ShapeMismatch("flow control grid storage mismatch");
  }
  if (!finite()) throw ValidationError("flow field contains non-finite values");
}

namespace {

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

FlowField read_flo32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": missing header");
  std::istringstream hs(header);
  std::string magic;
  int gh = 0, gw = 0, h = 0, w = 0;
  if (!(hs >> magic >> gh >> gw >> h >> w) || magic != "FLO1" || gh < 1 ||
      gw < 1 || h < 1 || w < 1) {
    throw ParseError(path + ": bad header, expected 'FLO1 <Gh> <Gw> <H> <W>'");
  }
  const std::size_t n = static_cast<std::size_t>(gh) * gw;
  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (payload.size() != n * 2 * 4) {
    throw ParseError(path + ": payload size mismatch");
  }
  FlowField f = FlowField::zeros(gh, gw, h, w);
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < n; ++i) f.u[i] = get_f32(p + i * 4);
  for (std::size_t i = 0; i < n; ++i) f.v[i] = get_f32(p + (n + i) * 4);
  if (!f.finite()) throw ValidationError(path + ": non-finite flow values");
  return f;
}

void write_flo32(const FlowField& flow, const std::string& path) {
  if (!flow.finite())
    throw ValidationError("refusing to write non-finite flow field");
  std::string out;
  out += "FLO1 " + std::to_string(flow.grid_h) + " " +
         std::to_string(flow.grid_w) + " " + std::to_string(flow.height) +
         " " + std::to_string(flow.width) + "\n";
  for (double a : flow.u) put_f32(out, static_cast<float>(a));
  for (double a : flow.v) put_f32(out, static_cast<float>(a));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace evalign
