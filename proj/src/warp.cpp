#include "evalign/warp.hpp"

#include <algorithm>
#include <cmath>

namespace evalign {

double Image::abs_sum() const {
  double s = 0.0;
  for (double v : data) s += std::abs(v);
  return s;
}

double Image::min() const {
  return data.empty() ? 0.0 : *std::min_element(data.begin(), data.end());
}

double Image::max() const {
  return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
}

WarpedStream warp_events(const EventStream& stream,
                         const std::vector<double>& tstar,
                         const FlowField& flow, double t_ref) {
  flow.check(stream.height, stream.width);
  if (tstar.size() != stream.size()) {
    throw ShapeMismatch("warp_events: timestamp count mismatch");
  }
  WarpedStream w;
  w.t_ref = t_ref;
  w.height = stream.height;
  w.width = stream.width;
  const std::size_t n = stream.size();
  w.x.resize(n);
  w.y.resize(n);
  w.t = tstar;
  w.p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Event& e = stream.events[i];
    double u, v;
    flow.sample(e.x, e.y, u, v);
    const double s = t_ref - tstar[i];
    w.x[i] = e.x + s * u;
    w.y[i] = e.y + s * v;
    w.p[i] = e.p;
  }
  return w;
}

WarpedStream warp_events(const EventStream& stream, const FlowField& flow,
                         double t_ref) {
  if (stream.empty()) {
    WarpedStream w;
    w.t_ref = t_ref;
    w.height = stream.height;
    w.width = stream.width;
    return w;
  }
  return warp_events(stream, normalize_timestamps(stream), flow, t_ref);
}

WarpedStream identity_warp(const EventStream& stream) {
  WarpedStream w;
  w.t_ref = 1.0;
  w.height = stream.height;
  w.width = stream.width;
  const std::size_t n = stream.size();
  w.x.resize(n);
  w.y.resize(n);
  w.p.resize(n);
  w.t = stream.empty() ? std::vector<double>{}
                       : normalize_timestamps(stream);
  for (std::size_t i = 0; i < n; ++i) {
    w.x[i] = stream.events[i].x;
    w.y[i] = stream.events[i].y;
    w.p[i] = stream.events[i].p;
  }
  return w;
}

Iwe splat_iwe(const WarpedStream& warped) {
  Iwe iwe;
  iwe.image = Image(warped.height, warped.width);
  iwe.event_count = warped.size();
  const int h = warped.height;
  const int w = warped.width;
  for (std::size_t i = 0; i < warped.size(); ++i) {
    const double xw = warped.x[i];
    const double yw = warped.y[i];
    if (!(std::isfinite(xw) && std::isfinite(yw))) {
      throw ValidationError("splat_iwe: non-finite warped coordinate");
    }
    const int x0 = static_cast<int>(std::floor(xw));
    const int y0 = static_cast<int>(std::floor(yw));
    const double fx = xw - x0;
    const double fy = yw - y0;
    const double p = static_cast<double>(warped.p[i]);
    const double wgt[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy),
                           (1.0 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int k = 0; k < 4; ++k) {
      if (xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h) continue;
      iwe.image.at(ys[k], xs[k]) += p * wgt[k];
      iwe.mass_deposited += wgt[k];
    }
  }
  return iwe;
}

TimestampImages timestamp_images(const WarpedStream& warped, double eps) {
  const int h = warped.height;
  const int w = warped.width;
  Image num_p(h, w), den_p(h, w), num_m(h, w), den_m(h, w);
  for (std::size_t i = 0; i < warped.size(); ++i) {
    const double xw = warped.x[i];
    const double yw = warped.y[i];
    const int x0 = static_cast<int>(std::floor(xw));
    const int y0 = static_cast<int>(std::floor(yw));
    const double fx = xw - x0;
    const double fy = yw - y0;
    const double wgt[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy),
                           (1.0 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    Image& num = warped.p[i] > 0 ? num_p : num_m;
    Image& den = warped.p[i] > 0 ? den_p : den_m;
    const double ts = warped.t[i];
    for (int k = 0; k < 4; ++k) {
      if (xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h) continue;
      num.at(ys[k], xs[k]) += wgt[k] * ts;
      den.at(ys[k], xs[k]) += wgt[k];
    }
  }
  TimestampImages out;
  out.t_plus = Image(h, w);
  out.t_minus = Image(h, w);
  for (std::size_t i = 0; i < num_p.data.size(); ++i) {
    out.t_plus.data[i] = num_p.data[i] / (den_p.data[i] + eps);
    out.t_minus.data[i] = num_m.data[i] / (den_m.data[i] + eps);
  }
  return out;
}

}  // namespace evalign
