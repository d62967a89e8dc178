#include "evalign/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "evalign/rng.hpp"

namespace evalign {

namespace {

constexpr int kTimeSteps = 1000;
constexpr double kDarkLum = 0.1;
constexpr double kBrightLum = 1.0;

double overlap1d(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

Rect resolved_rect1(const SceneSpec& s) {
  Rect r = s.rect1;
  if (r.w < 0) r = {s.width * 0.15, s.height * 0.20, s.width * 0.20,
                    s.height * 0.25};
  return r;
}

Rect resolved_rect2(const SceneSpec& s) {
  Rect r = s.rect2;
  if (r.w < 0) r = {s.width * 0.60, s.height * 0.55, s.width * 0.20,
                    s.height * 0.25};
  return r;
}

double resolved_bar_x0(const SceneSpec& s) {
  return s.bar_x0 >= 0.0 ? s.bar_x0 : (s.width - s.bar_width - s.u) / 2.0;
}

double rect_coverage(const Rect& r, double dx, double dy, int px, int py) {
  return overlap1d(px, px + 1.0, r.x + dx, r.x + r.w + dx) *
         overlap1d(py, py + 1.0, r.y + dy, r.y + r.h + dy);
}

// Fraction of the pixel square covered by bright checker cells with the
// lattice shifted by (sx, sy). Cell size >= 2 means at most two lattice
// segments per axis.
double checker_coverage(double cell, double sx, double sy, int px, int py) {
  struct Seg {
    long idx;
    double len;
  };
  auto segments = [cell](double lo) {
    std::array<Seg, 3> segs{};
    int n = 0;
    double x = lo;
    const double hi = lo + 1.0;
    while (x < hi - 1e-12 && n < 3) {
      const double fidx = std::floor(x / cell);
      const double next = (fidx + 1.0) * cell;
      const double stop = std::min(hi, next);
      segs[static_cast<std::size_t>(n++)] = {static_cast<long>(fidx),
                                             stop - x};
      x = stop;
    }
    return std::pair(segs, n);
  };
  const auto [xs, nx] = segments(px - sx);
  const auto [ys, ny] = segments(py - sy);
  double area = 0.0;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      if (((xs[static_cast<std::size_t>(i)].idx +
            ys[static_cast<std::size_t>(j)].idx) & 1) == 0) {
        area += xs[static_cast<std::size_t>(i)].len *
                ys[static_cast<std::size_t>(j)].len;
      }
    }
  }
  return area;
}

double luminance(const SceneSpec& s, int px, int py, double tau) {
  double cov = 0.0;
  switch (s.pattern) {
    case Pattern::Bar: {
      const double e1 = resolved_bar_x0(s) + s.u * tau;
      cov = overlap1d(px, px + 1.0, e1, e1 + s.bar_width);
      break;
    }
    case Pattern::Checker:
      cov = checker_coverage(s.cell, s.u * tau, s.v * tau, px, py);
      break;
    case Pattern::TwoObject: {
      const Rect r1 = resolved_rect1(s);
      const Rect r2 = resolved_rect2(s);
      const double c1 = rect_coverage(r1, s.u * tau, s.v * tau, px, py);
      const double c2 = rect_coverage(r2, s.u2 * tau, s.v2 * tau, px, py);
      // union of the two bright regions
      const double ix0 = std::max(r1.x + s.u * tau, r2.x + s.u2 * tau);
      const double ix1 =
          std::min(r1.x + r1.w + s.u * tau, r2.x + r2.w + s.u2 * tau);
      const double iy0 = std::max(r1.y + s.v * tau, r2.y + s.v2 * tau);
      const double iy1 =
          std::min(r1.y + r1.h + s.v * tau, r2.y + r2.h + s.v2 * tau);
      double c12 = 0.0;
      if (ix1 > ix0 && iy1 > iy0) {
        c12 = overlap1d(px, px + 1.0, ix0, ix1) *
              overlap1d(py, py + 1.0, iy0, iy1);
      }
      cov = c1 + c2 - c12;
      break;
    }
  }
  return kDarkLum + (kBrightLum - kDarkLum) * cov;
}

void check_range(double lo, double hi, double limit, const char* what) {
  if (lo < 1.0 || hi > limit - 1.0) {
    throw InvalidSpec(std::string(what) +
                      " sweep leaves the frame interior: [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

double point_rect_boundary_distance(double cx, double cy, const Rect& r) {
  const double x0 = r.x, x1 = r.x + r.w, y0 = r.y, y1 = r.y + r.h;
  const bool inside = cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1;
  if (inside) {
    return std::min(std::min(cx - x0, x1 - cx), std::min(cy - y0, y1 - cy));
  }
  const double dx = std::max({x0 - cx, 0.0, cx - x1});
  const double dy = std::max({y0 - cy, 0.0, cy - y1});
  return std::hypot(dx, dy);
}

}  // namespace

void validate(const SceneSpec& s) {
  if (s.width < 4 || s.height < 4) throw InvalidSpec("frame too small");
  if (!(s.contrast_c > 0.0)) throw InvalidSpec("contrast threshold must be > 0");
  if (s.duration_us == 0) throw InvalidSpec("duration must be > 0");
  if (s.noise_rate < 0.0) throw InvalidSpec("noise rate must be >= 0");
  switch (s.pattern) {
    case Pattern::Bar: {
      if (!(s.bar_width >= 1.0)) throw InvalidSpec("bar width must be >= 1");
      const double x0 = resolved_bar_x0(s);
      check_range(x0 + std::min(0.0, s.u),
                  x0 + s.bar_width + std::max(0.0, s.u), s.width, "bar");
      break;
    }
    case Pattern::Checker:
      if (!(s.cell >= 2.0)) throw InvalidSpec("checker cell must be >= 2");
      break;
    case Pattern::TwoObject: {
      const Rect r1 = resolved_rect1(s);
      const Rect r2 = resolved_rect2(s);
      if (r1.w < 2 || r1.h < 2 || r2.w < 2 || r2.h < 2)
        throw InvalidSpec("objects must be at least 2x2");
      check_range(r1.x + std::min(0.0, s.u), r1.x + r1.w + std::max(0.0, s.u),
                  s.width, "object 1 x");
      check_range(r1.y + std::min(0.0, s.v), r1.y + r1.h + std::max(0.0, s.v),
                  s.height, "object 1 y");
      check_range(r2.x + std::min(0.0, s.u2),
                  r2.x + r2.w + std::max(0.0, s.u2), s.width, "object 2 x");
      check_range(r2.y + std::min(0.0, s.v2),
                  r2.y + r2.h + std::max(0.0, s.v2), s.height, "object 2 y");
      break;
    }
  }
}

SynthResult generate(const SceneSpec& spec, std::uint64_t seed) {
  validate(spec);
  const int w = spec.width, h = spec.height;
  const double duration = static_cast<double>(spec.duration_us);

  std::vector<double> prev(static_cast<std::size_t>(w) * h);
  std::vector<double> ref(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double logl = std::log(luminance(spec, x, y, 0.0));
      prev[static_cast<std::size_t>(y) * w + x] = logl;
      ref[static_cast<std::size_t>(y) * w + x] = logl;
    }
  }

  std::vector<Event> events;
  const double c = spec.contrast_c;
  for (int s = 1; s <= kTimeSteps; ++s) {
    const double tau = static_cast<double>(s) / kTimeSteps;
    const double t0_us = duration * (s - 1) / kTimeSteps;
    const double dt_us = duration / kTimeSteps;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double itdt = std::log(luminance(spec, x, y, tau));
        const double it = prev[i];
        if (itdt != it) {
          const double pol = itdt >= it ? 1.0 : -1.0;
          double cross = ref[i];
          for (;;) {
            cross += pol * c;
            const bool hit = pol > 0 ? (cross > it && cross <= itdt)
                                     : (cross < it && cross >= itdt);
            if (!hit) break;
            const double frac = (cross - it) / (itdt - it);
            const double t_us = t0_us + frac * dt_us;
            Event e;
            e.t = static_cast<std::uint64_t>(std::llround(t_us));
            e.x = static_cast<std::uint16_t>(x);
            e.y = static_cast<std::uint16_t>(y);
            e.p = pol > 0 ? 1 : -1;
            events.push_back(e);
            ref[i] = cross;
          }
          prev[i] = itdt;
        }
      }
    }
  }

  if (spec.noise_rate > 0.0) {
    Rng rng(seed);
    const double lambda =
        spec.noise_rate * w * h * (duration * 1e-6);
    const std::uint64_t count = rng.poisson(lambda);
    for (std::uint64_t i = 0; i < count; ++i) {
      Event e;
      e.t = rng.below(spec.duration_us + 1);
      e.x = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(w)));
      e.y = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(h)));
      e.p = rng.coin() ? 1 : -1;
      events.push_back(e);
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });

  SynthResult out;
  out.stream.events = std::move(events);
  out.stream.width = static_cast<std::uint16_t>(w);
  out.stream.height = static_cast<std::uint16_t>(h);
  out.stream.window_start = 0;
  out.stream.window_end = spec.duration_us;

  out.flow_gt = FlowField::zeros(h, w, h, w);
  if (spec.pattern == Pattern::TwoObject) {
    const Rect r1 = resolved_rect1(spec);
    const Rect r2 = resolved_rect2(spec);
    const Rect s1{r1.x + std::min(0.0, spec.u), r1.y + std::min(0.0, spec.v),
                  r1.w + std::abs(spec.u), r1.h + std::abs(spec.v)};
    const Rect s2{r2.x + std::min(0.0, spec.u2), r2.y + std::min(0.0, spec.v2),
                  r2.w + std::abs(spec.u2), r2.h + std::abs(spec.v2)};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (overlap1d(x, x + 1.0, s1.x, s1.x + s1.w) > 0 &&
            overlap1d(y, y + 1.0, s1.y, s1.y + s1.h) > 0) {
          out.flow_gt.u[i] = spec.u;
          out.flow_gt.v[i] = spec.v;
        } else if (overlap1d(x, x + 1.0, s2.x, s2.x + s2.w) > 0 &&
                   overlap1d(y, y + 1.0, s2.y, s2.y + s2.h) > 0) {
          out.flow_gt.u[i] = spec.u2;
          out.flow_gt.v[i] = spec.v2;
        }
      }
    }
  } else {
    std::fill(out.flow_gt.u.begin(), out.flow_gt.u.end(), spec.u);
    std::fill(out.flow_gt.v.begin(), out.flow_gt.v.end(), spec.v);
  }
  return out;
}

double edge_distance(const SceneSpec& spec, int x, int y, double tau) {
  const double cx = x + 0.5, cy = y + 0.5;
  switch (spec.pattern) {
    case Pattern::Bar: {
      const double e1 = resolved_bar_x0(spec) + spec.u * tau;
      const double e2 = e1 + spec.bar_width;
      return std::min(std::abs(cx - e1), std::abs(cx - e2));
    }
    case Pattern::Checker: {
      auto lattice = [&](double coord, double shift) {
        const double r = coord - shift -
                         spec.cell * std::floor((coord - shift) / spec.cell);
        return std::min(r, spec.cell - r);
      };
      return std::min(lattice(cx, spec.u * tau), lattice(cy, spec.v * tau));
    }
    case Pattern::TwoObject: {
      const Rect r1 = resolved_rect1(spec);
      const Rect r2 = resolved_rect2(spec);
      const Rect m1{r1.x + spec.u * tau, r1.y + spec.v * tau, r1.w, r1.h};
      const Rect m2{r2.x + spec.u2 * tau, r2.y + spec.v2 * tau, r2.w, r2.h};
      return std::min(point_rect_boundary_distance(cx, cy, m1),
                      point_rect_boundary_distance(cx, cy, m2));
    }
  }
  return 0.0;
}

std::vector<std::uint8_t> edge_mask(const SceneSpec& spec, double tau,
                                    double radius) {
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(spec.width) * spec.height, 0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (edge_distance(spec, x, y, tau) <= radius) {
        mask[static_cast<std::size_t>(y) * spec.width + x] = 1;
      }
    }
  }
  return mask;
}

}  // namespace evalign
