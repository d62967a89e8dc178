#pragma once

#include <cstdint>
#include <vector>

#include "evalign/events.hpp"
#include "evalign/flow.hpp"
#include "evalign/warp.hpp"

namespace evalign {

/// Shared knobs of the motion-compensation objective.
struct EcmConfig {
  double lambda1 = 1.0;    // smoothness weight
  double eps = 1e-9;       // average-timestamp denominator guard
  double eps_char = 1e-3;  // Charbonnier epsilon
  int threads = 1;         // deterministic chunked accumulation
};

/// Sum over pixels of squared per-polarity average-timestamp images,
/// evaluated at both reference times (forward t_ref=1 and backward t_ref=0).
double contrast_loss(const EventStream& stream, const FlowField& flow,
                     double eps = 1e-9, int threads = 1);

/// Charbonnier penalty over 4-neighbor differences of the control grid,
/// each unordered pair counted once, u and v channels summed.
double smoothness_loss(const FlowField& flow, double eps_char = 1e-3);

double ecm_loss(const EventStream& stream, const FlowField& flow,
                const EcmConfig& cfg = {});

/// Gradient of ecm_loss with respect to the flow control grid.
struct FlowGrad {
  std::vector<double> u;  // grid_h * grid_w
  std::vector<double> v;
};

FlowGrad ecm_loss_grad(const EventStream& stream, const FlowField& flow,
                       const EcmConfig& cfg = {});

struct OptimizerConfig {
  int grid_h = 8;
  int grid_w = 8;
  double learning_rate = 0.5;  // pixels per step
  double momentum = 0.9;
  int max_iterations = 300;
  double rel_tol = 1e-6;  // relative loss change ...
  int tol_window = 10;    // ... over this many iterations

  // Global translation probe run before the descent: integer constant flows
  // in [-radius, radius]^2 scored on a border-padded canvas, adopted only
  // when the improvement over zero flow is decisive. The average-timestamp
  // objective is a staircase in sub-pixel flow (its cliffs carry most of the
  // alignment signal but have zero gradient almost everywhere), so descent
  // alone cannot leave the zero-flow plateau; the probe supplies the basin
  // and the descent refines within it.
  bool global_search = true;
  int search_radius = 16;
  double search_accept = 0.05;  // required relative improvement

  EcmConfig ecm;
};

struct OptimizeResult {
  FlowField flow;             // best-loss iterate
  std::vector<double> trace;  // loss per iteration, trace[0] = initial
  int iterations = 0;
  double loss_initial = 0.0;
  double loss_final = 0.0;
};

/// Momentum gradient descent on the control grid from zero initialization.
/// Steps are capped so no control value moves more than learning_rate pixels
/// per iteration. Returns the best iterate seen, so loss_final never exceeds
/// loss_initial. Throws EmptyStream / NonFiniteLoss.
OptimizeResult optimize_flow(const EventStream& stream,
                             const OptimizerConfig& cfg);

/// Mean endpoint error between the dense views of two flow fields over the
/// pixels selected by mask (empty mask = everywhere).
double mean_endpoint_error(const FlowField& estimate, const FlowField& truth,
                           const std::vector<std::uint8_t>& mask = {});

}  // namespace evalign
