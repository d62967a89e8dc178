#include "evalign/ecm.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace evalign {

namespace {

// Per-event state that is invariant across optimizer iterations: original
// pixel, normalized timestamp, polarity, and the control-grid basis at the
// event's pixel.
struct Workspace {
  int height = 0, width = 0;
  int grid_h = 0, grid_w = 0;
  std::vector<double> tstar;
  std::vector<int> ex, ey;
  std::vector<std::int8_t> pol;
  std::vector<FlowField::Basis> basis;

  std::size_t size() const { return tstar.size(); }
};

Workspace build_workspace(const EventStream& stream, int grid_h, int grid_w) {
  Workspace ws;
  ws.height = stream.height;
  ws.width = stream.width;
  ws.grid_h = grid_h;
  ws.grid_w = grid_w;
  if (stream.empty()) return ws;
  ws.tstar = normalize_timestamps(stream);
  const std::size_t n = stream.size();
  ws.ex.resize(n);
  ws.ey.resize(n);
  ws.pol.resize(n);
  ws.basis.resize(n);
  const FlowField probe =
      FlowField::zeros(grid_h, grid_w, stream.height, stream.width);
  for (std::size_t i = 0; i < n; ++i) {
    const Event& e = stream.events[i];
    ws.ex[i] = e.x;
    ws.ey[i] = e.y;
    ws.pol[i] = e.p;
    ws.basis[i] = probe.basis_at(e.x, e.y);
  }
  return ws;
}

// Worker count for n items; small batches stay serial.
int effective_threads(std::size_t n, int threads) {
  int t = std::max(1, threads);
  if (n < 1024) t = 1;
  if (static_cast<std::size_t>(t) > n && n > 0) t = static_cast<int>(n);
  return t;
}

// Runs fn(chunk_index, begin, end) over contiguous chunks; chunk boundaries
// depend only on (n, t) so reductions merged in chunk order are reproducible
// for a fixed thread count.
template <typename Fn>
void run_chunked(std::size_t n, int t, Fn&& fn) {
  if (t <= 1) {
    fn(0, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  const std::size_t per = (n + t - 1) / t;
  for (int c = 0; c < t; ++c) {
    const std::size_t b = std::min(n, per * static_cast<std::size_t>(c));
    const std::size_t e = std::min(n, b + per);
    pool.emplace_back([&, c, b, e] { fn(c, b, e); });
  }
  for (auto& th : pool) th.join();
}

struct PolarityImages {
  Image num_p, den_p, num_m, den_m;

  explicit PolarityImages(int h, int w)
      : num_p(h, w), den_p(h, w), num_m(h, w), den_m(h, w) {}

  void add(const PolarityImages& other) {
    for (std::size_t i = 0; i < num_p.data.size(); ++i) {
      num_p.data[i] += other.num_p.data[i];
      den_p.data[i] += other.den_p.data[i];
      num_m.data[i] += other.num_m.data[i];
      den_m.data[i] += other.den_m.data[i];
    }
  }
};

struct Neighborhood {
  int xs[4], ys[4];
  double w[4];    // bilinear weights
  double dwx[4];  // d w / d x_warped
  double dwy[4];  // d w / d y_warped
};

inline Neighborhood neighborhood(double xw, double yw) {
  const int x0 = static_cast<int>(std::floor(xw));
  const int y0 = static_cast<int>(std::floor(yw));
  const double fx = xw - x0;
  const double fy = yw - y0;
  Neighborhood nb;
  nb.xs[0] = x0;     nb.ys[0] = y0;
  nb.xs[1] = x0 + 1; nb.ys[1] = y0;
  nb.xs[2] = x0;     nb.ys[2] = y0 + 1;
  nb.xs[3] = x0 + 1; nb.ys[3] = y0 + 1;
  nb.w[0] = (1.0 - fx) * (1.0 - fy);
  nb.w[1] = fx * (1.0 - fy);
  nb.w[2] = (1.0 - fx) * fy;
  nb.w[3] = fx * fy;
  nb.dwx[0] = -(1.0 - fy);
  nb.dwx[1] = (1.0 - fy);
  nb.dwx[2] = -fy;
  nb.dwx[3] = fy;
  nb.dwy[0] = -(1.0 - fx);
  nb.dwy[1] = -fx;
  nb.dwy[2] = (1.0 - fx);
  nb.dwy[3] = fx;
  return nb;
}

inline void warp_one(const Workspace& ws, const FlowField& flow, double t_ref,
                     std::size_t i, double& xw, double& yw, double& scale) {
  const FlowField::Basis& b = ws.basis[i];
  double u = 0.0, v = 0.0;
  for (int k = 0; k < 4; ++k) {
    u += b.w[k] * flow.u[static_cast<std::size_t>(b.idx[k])];
    v += b.w[k] * flow.v[static_cast<std::size_t>(b.idx[k])];
  }
  scale = t_ref - ws.tstar[i];
  xw = ws.ex[i] + scale * u;
  yw = ws.ey[i] + scale * v;
}

// Contrast term of a constant flow evaluated on a canvas padded by `pad`
// pixels per side, so border crossings cannot fake an improvement. Used by
// the global translation probe.
double padded_constant_contrast(const Workspace& ws, double cu, double cv,
                                double pad, double eps) {
  const int h = ws.height + 2 * static_cast<int>(pad);
  const int w = ws.width + 2 * static_cast<int>(pad);
  double loss = 0.0;
  for (double t_ref : {1.0, 0.0}) {
    Image num_p(h, w), den_p(h, w), num_m(h, w), den_m(h, w);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      const double s = t_ref - ws.tstar[i];
      const double xw = ws.ex[i] + s * cu + pad;
      const double yw = ws.ey[i] + s * cv + pad;
      const Neighborhood nb = neighborhood(xw, yw);
      Image& num = ws.pol[i] > 0 ? num_p : num_m;
      Image& den = ws.pol[i] > 0 ? den_p : den_m;
      for (int k = 0; k < 4; ++k) {
        if (nb.xs[k] < 0 || nb.xs[k] >= w || nb.ys[k] < 0 || nb.ys[k] >= h)
          continue;
        num.at(nb.ys[k], nb.xs[k]) += nb.w[k] * ws.tstar[i];
        den.at(nb.ys[k], nb.xs[k]) += nb.w[k];
      }
    }
    for (std::size_t i = 0; i < num_p.data.size(); ++i) {
      const double tp = num_p.data[i] / (den_p.data[i] + eps);
      const double tm = num_m.data[i] / (den_m.data[i] + eps);
      loss += tp * tp + tm * tm;
    }
  }
  return loss;
}

PolarityImages accumulate_reference(const Workspace& ws, const FlowField& flow,
                                    double t_ref, int threads) {
  const std::size_t n = ws.size();
  const int h = ws.height, w = ws.width;
  const int used = effective_threads(n, threads);
  std::vector<PolarityImages> partial;
  for (int c = 0; c < used; ++c) partial.emplace_back(h, w);

  run_chunked(n, used, [&](int chunk, std::size_t b, std::size_t e) {
    PolarityImages& im = partial[static_cast<std::size_t>(chunk)];
    for (std::size_t i = b; i < e; ++i) {
      double xw, yw, s;
      warp_one(ws, flow, t_ref, i, xw, yw, s);
      const Neighborhood nb = neighborhood(xw, yw);
      Image& num = ws.pol[i] > 0 ? im.num_p : im.num_m;
      Image& den = ws.pol[i] > 0 ? im.den_p : im.den_m;
      const double ts = ws.tstar[i];
      for (int k = 0; k < 4; ++k) {
        if (nb.xs[k] < 0 || nb.xs[k] >= w || nb.ys[k] < 0 || nb.ys[k] >= h)
          continue;
        num.at(nb.ys[k], nb.xs[k]) += nb.w[k] * ts;
        den.at(nb.ys[k], nb.xs[k]) += nb.w[k];
      }
    }
  });

  for (int c = 1; c < used; ++c)
    partial[0].add(partial[static_cast<std::size_t>(c)]);
  return std::move(partial[0]);
}

double reference_loss(const PolarityImages& im, double eps) {
  double loss = 0.0;
  for (std::size_t i = 0; i < im.num_p.data.size(); ++i) {
    const double tp = im.num_p.data[i] / (im.den_p.data[i] + eps);
    const double tm = im.num_m.data[i] / (im.den_m.data[i] + eps);
    loss += tp * tp + tm * tm;
  }
  return loss;
}

// Backpropagates the squared-average-timestamp loss of one reference into
// the control-grid gradient. For a pixel with average T and total weight D,
// d loss / d w_event = 2 T (t_event - T) / (D + eps).
void reference_grad(const Workspace& ws, const FlowField& flow, double t_ref,
                    const PolarityImages& im, double eps, int threads,
                    std::vector<double>& grad_u, std::vector<double>& grad_v) {
  const std::size_t n = ws.size();
  const int h = ws.height, w = ws.width;
  const std::size_t gsize = grad_u.size();

  Image t_pos(h, w), t_neg(h, w);
  for (std::size_t i = 0; i < t_pos.data.size(); ++i) {
    t_pos.data[i] = im.num_p.data[i] / (im.den_p.data[i] + eps);
    t_neg.data[i] = im.num_m.data[i] / (im.den_m.data[i] + eps);
  }

  const int used = effective_threads(n, threads);
  std::vector<std::vector<double>> pu(static_cast<std::size_t>(used)),
      pv(static_cast<std::size_t>(used));
  for (int c = 0; c < used; ++c) {
    pu[static_cast<std::size_t>(c)].assign(gsize, 0.0);
    pv[static_cast<std::size_t>(c)].assign(gsize, 0.0);
  }

  run_chunked(n, used, [&](int chunk, std::size_t b, std::size_t e) {
    std::vector<double>& gu = pu[static_cast<std::size_t>(chunk)];
    std::vector<double>& gv = pv[static_cast<std::size_t>(chunk)];
    for (std::size_t i = b; i < e; ++i) {
      double xw, yw, s;
      warp_one(ws, flow, t_ref, i, xw, yw, s);
      const Neighborhood nb = neighborhood(xw, yw);
      const bool pos = ws.pol[i] > 0;
      const Image& tim = pos ? t_pos : t_neg;
      const Image& den = pos ? im.den_p : im.den_m;
      const double ts = ws.tstar[i];
      double dx = 0.0, dy = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (nb.xs[k] < 0 || nb.xs[k] >= w || nb.ys[k] < 0 || nb.ys[k] >= h)
          continue;
        const double t_avg = tim.at(nb.ys[k], nb.xs[k]);
        const double g =
            2.0 * t_avg * (ts - t_avg) / (den.at(nb.ys[k], nb.xs[k]) + eps);
        dx += g * nb.dwx[k];
        dy += g * nb.dwy[k];
      }
      const double du = dx * s;
      const double dv = dy * s;
      const FlowField::Basis& bs = ws.basis[i];
      for (int k = 0; k < 4; ++k) {
        gu[static_cast<std::size_t>(bs.idx[k])] += bs.w[k] * du;
        gv[static_cast<std::size_t>(bs.idx[k])] += bs.w[k] * dv;
      }
    }
  });

  for (int c = 0; c < used; ++c) {
    for (std::size_t k = 0; k < gsize; ++k) {
      grad_u[k] += pu[static_cast<std::size_t>(c)][k];
      grad_v[k] += pv[static_cast<std::size_t>(c)][k];
    }
  }
}

double contrast_loss_ws(const Workspace& ws, const FlowField& flow, double eps,
                        int threads) {
  if (ws.size() == 0) return 0.0;
  double loss = 0.0;
  for (double t_ref : {1.0, 0.0}) {
    const PolarityImages im = accumulate_reference(ws, flow, t_ref, threads);
    loss += reference_loss(im, eps);
  }
  return loss;
}

void smoothness_grad(const FlowField& flow, double eps_char,
                     std::vector<double>& gu, std::vector<double>& gv) {
  const double e2 = eps_char * eps_char;
  auto pair = [&](std::size_t a, std::size_t b) {
    const double du = flow.u[a] - flow.u[b];
    const double dv = flow.v[a] - flow.v[b];
    const double ru = std::sqrt(du * du + e2);
    const double rv = std::sqrt(dv * dv + e2);
    const double su = ru > 0.0 ? du / ru : 0.0;
    const double sv = rv > 0.0 ? dv / rv : 0.0;
    gu[a] += su;
    gu[b] -= su;
    gv[a] += sv;
    gv[b] -= sv;
  };
  for (int i = 0; i < flow.grid_h; ++i) {
    for (int j = 0; j < flow.grid_w; ++j) {
      const std::size_t a = static_cast<std::size_t>(i) * flow.grid_w + j;
      if (j + 1 < flow.grid_w) pair(a, a + 1);
      if (i + 1 < flow.grid_h)
        pair(a, a + static_cast<std::size_t>(flow.grid_w));
    }
  }
}

}  // namespace

double contrast_loss(const EventStream& stream, const FlowField& flow,
                     double eps, int threads) {
  flow.check(stream.height, stream.width);
  if (stream.empty()) return 0.0;
  const Workspace ws = build_workspace(stream, flow.grid_h, flow.grid_w);
  // basis indices are grid-local, so reuse the caller's control values
  return contrast_loss_ws(ws, flow, eps, threads);
}

double smoothness_loss(const FlowField& flow, double eps_char) {
  if (flow.grid_h < 2 || flow.grid_w < 2) {
    throw ValidationError("smoothness_loss: control grid must be >= 2x2");
  }
  const double e2 = eps_char * eps_char;
  auto rho = [e2](double x) { return std::sqrt(x * x + e2); };
  double loss = 0.0;
  for (int i = 0; i < flow.grid_h; ++i) {
    for (int j = 0; j < flow.grid_w; ++j) {
      const std::size_t a = static_cast<std::size_t>(i) * flow.grid_w + j;
      if (j + 1 < flow.grid_w) {
        loss += rho(flow.u[a] - flow.u[a + 1]) + rho(flow.v[a] - flow.v[a + 1]);
      }
      if (i + 1 < flow.grid_h) {
        const std::size_t b = a + static_cast<std::size_t>(flow.grid_w);
        loss += rho(flow.u[a] - flow.u[b]) + rho(flow.v[a] - flow.v[b]);
      }
    }
  }
  return loss;
}

double ecm_loss(const EventStream& stream, const FlowField& flow,
                const EcmConfig& cfg) {
  return contrast_loss(stream, flow, cfg.eps, cfg.threads) +
         cfg.lambda1 * smoothness_loss(flow, cfg.eps_char);
}

FlowGrad ecm_loss_grad(const EventStream& stream, const FlowField& flow,
                       const EcmConfig& cfg) {
  flow.check(stream.height, stream.width);
  if (flow.grid_h < 2 || flow.grid_w < 2) {
    throw ValidationError("ecm_loss_grad: control grid must be >= 2x2");
  }
  FlowGrad grad;
  grad.u.assign(flow.u.size(), 0.0);
  grad.v.assign(flow.v.size(), 0.0);

  if (!stream.empty()) {
    const Workspace ws = build_workspace(stream, flow.grid_h, flow.grid_w);
    for (double t_ref : {1.0, 0.0}) {
      const PolarityImages im =
          accumulate_reference(ws, flow, t_ref, cfg.threads);
      reference_grad(ws, flow, t_ref, im, cfg.eps, cfg.threads, grad.u,
                     grad.v);
    }
  }

  if (cfg.lambda1 != 0.0) {
    std::vector<double> su(grad.u.size(), 0.0), sv(grad.v.size(), 0.0);
    smoothness_grad(flow, cfg.eps_char, su, sv);
    for (std::size_t k = 0; k < grad.u.size(); ++k) {
      grad.u[k] += cfg.lambda1 * su[k];
      grad.v[k] += cfg.lambda1 * sv[k];
    }
  }
  return grad;
}

OptimizeResult optimize_flow(const EventStream& stream,
                             const OptimizerConfig& cfg) {
  if (stream.empty()) throw EmptyStream("optimize_flow: empty stream");
  if (cfg.grid_h < 2 || cfg.grid_w < 2) {
    throw ValidationError("optimize_flow: control grid must be >= 2x2");
  }
  validate(stream);

  const Workspace ws = build_workspace(stream, cfg.grid_h, cfg.grid_w);
  FlowField flow =
      FlowField::zeros(cfg.grid_h, cfg.grid_w, stream.height, stream.width);

  auto eval_loss = [&](const FlowField& f) {
    return contrast_loss_ws(ws, f, cfg.ecm.eps, cfg.ecm.threads) +
           cfg.ecm.lambda1 * smoothness_loss(f, cfg.ecm.eps_char);
  };

  OptimizeResult result;
  result.loss_initial = eval_loss(flow);
  if (!std::isfinite(result.loss_initial)) {
    throw NonFiniteLoss("optimize_flow: initial loss is not finite");
  }
  result.trace.push_back(result.loss_initial);
  FlowField best = flow;
  double best_loss = result.loss_initial;

  if (cfg.global_search && cfg.max_iterations > 0 && cfg.search_radius > 0) {
    const double pad = cfg.search_radius + 2.0;
    double best_probe = padded_constant_contrast(ws, 0.0, 0.0, pad,
                                                 cfg.ecm.eps);
    const double probe_zero = best_probe;
    int best_cu = 0, best_cv = 0;
    for (int cv = -cfg.search_radius; cv <= cfg.search_radius; ++cv) {
      for (int cu = -cfg.search_radius; cu <= cfg.search_radius; ++cu) {
        if (cu == 0 && cv == 0) continue;
        const double probe =
            padded_constant_contrast(ws, cu, cv, pad, cfg.ecm.eps);
        if (probe < best_probe) {
          best_probe = probe;
          best_cu = cu;
          best_cv = cv;
        }
      }
    }
    if (best_probe < (1.0 - cfg.search_accept) * probe_zero) {
      flow = FlowField::constant(cfg.grid_h, cfg.grid_w, stream.height,
                                 stream.width, best_cu, best_cv);
      const double loss = eval_loss(flow);
      result.trace.push_back(loss);
      if (loss < best_loss) {
        best_loss = loss;
        best = flow;
      }
    }
  }

  std::vector<double> vel_u(flow.u.size(), 0.0), vel_v(flow.v.size(), 0.0);

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    FlowGrad grad;
    grad.u.assign(flow.u.size(), 0.0);
    grad.v.assign(flow.v.size(), 0.0);
    for (double t_ref : {1.0, 0.0}) {
      const PolarityImages im =
          accumulate_reference(ws, flow, t_ref, cfg.ecm.threads);
      reference_grad(ws, flow, t_ref, im, cfg.ecm.eps, cfg.ecm.threads,
                     grad.u, grad.v);
    }
    if (cfg.ecm.lambda1 != 0.0) {
      std::vector<double> su(grad.u.size(), 0.0), sv(grad.v.size(), 0.0);
      smoothness_grad(flow, cfg.ecm.eps_char, su, sv);
      for (std::size_t k = 0; k < grad.u.size(); ++k) {
        grad.u[k] += cfg.ecm.lambda1 * su[k];
        grad.v[k] += cfg.ecm.lambda1 * sv[k];
      }
    }

    // Cap the raw step at learning_rate pixels (inf-norm) so a steep
    // landscape cannot throw the iterate out of the basin.
    double gmax = 0.0;
    for (double g : grad.u) gmax = std::max(gmax, std::abs(g));
    for (double g : grad.v) gmax = std::max(gmax, std::abs(g));
    if (!std::isfinite(gmax)) {
      throw NonFiniteLoss("optimize_flow: non-finite gradient at iteration " +
                          std::to_string(iter));
    }
    const double scale = cfg.learning_rate / std::max(1.0, gmax);

    for (std::size_t k = 0; k < flow.u.size(); ++k) {
      vel_u[k] = cfg.momentum * vel_u[k] - scale * grad.u[k];
      vel_v[k] = cfg.momentum * vel_v[k] - scale * grad.v[k];
      flow.u[k] += vel_u[k];
      flow.v[k] += vel_v[k];
    }

    const double loss = eval_loss(flow);
    if (!std::isfinite(loss)) {
      throw NonFiniteLoss("optimize_flow: loss diverged at iteration " +
                          std::to_string(iter));
    }
    result.trace.push_back(loss);
    result.iterations = iter;
    if (loss < best_loss) {
      best_loss = loss;
      best = flow;
    }

    const std::size_t n = result.trace.size();
    if (cfg.tol_window > 0 &&
        n > static_cast<std::size_t>(cfg.tol_window)) {
      const double prev = result.trace[n - 1 - cfg.tol_window];
      const double change = std::abs(result.trace[n - 1] - prev);
      if (change < cfg.rel_tol * std::max(std::abs(prev), 1e-30)) break;
    }
  }

  result.flow = std::move(best);
  result.loss_final = best_loss;
  return result;
}

double mean_endpoint_error(const FlowField& estimate, const FlowField& truth,
                           const std::vector<std::uint8_t>& mask) {
  if (estimate.height != truth.height || estimate.width != truth.width) {
    throw ShapeMismatch("mean_endpoint_error: dense dimensions differ");
  }
  const std::size_t n =
      static_cast<std::size_t>(estimate.height) * estimate.width;
  if (!mask.empty() && mask.size() != n) {
    throw ShapeMismatch("mean_endpoint_error: mask size mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < estimate.height; ++y) {
    for (int x = 0; x < estimate.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * estimate.width + x;
      if (!mask.empty() && mask[i] == 0) continue;
      double eu, ev, tu, tv;
      estimate.sample(x, y, eu, ev);
      truth.sample(x, y, tu, tv);
      sum += std::hypot(eu - tu, ev - tv);
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace evalign
