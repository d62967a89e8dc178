// evalign command-line front end: synthetic scenes, motion compensation,
// voxelization, IWE rendering, SSM self-checks and fusion demos.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evalign/cmm.hpp"
#include "evalign/ecm.hpp"
#include "evalign/edum.hpp"
#include "evalign/event_io.hpp"
#include "evalign/hash.hpp"
#include "evalign/image_io.hpp"
#include "evalign/rng.hpp"
#include "evalign/ssm.hpp"
#include "evalign/synthgen.hpp"
#include "evalign/tensor.hpp"
#include "evalign/voxel.hpp"

namespace {

using nlohmann::json;

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

evalign::Pattern parse_pattern(const std::string& name) {
  if (name == "bar") return evalign::Pattern::Bar;
  if (name == "checker") return evalign::Pattern::Checker;
  if (name == "two-object") return evalign::Pattern::TwoObject;
  throw evalign::InvalidSpec("unknown pattern '" + name +
                             "' (bar, checker, two-object)");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(',', pos);
    const std::string tok =
        text.substr(pos, next == std::string::npos ? next : next - pos);
    if (tok.empty()) throw evalign::ValidationError("empty list element");
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw evalign::ValidationError("bad number '" + tok + "'");
    }
    if (used != tok.size())
      throw evalign::ValidationError("bad number '" + tok + "'");
    out.push_back(v);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

// key=value configuration file: one entry per line, '#' comments, keys named
// after the long command-line flags (without the leading dashes). Values are
// type-checked; unknown keys are rejected; explicit flags win over the file.
struct ConfigEntry {
  enum class Type { Int, Double, Bool, Text };
  const char* key;
  Type type;
  void* target;
};

void apply_config_file(const std::string& path, const CLI::App* cmd,
                       const std::vector<ConfigEntry>& entries) {
  std::ifstream in(path);
  if (!in) throw evalign::IoError("cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw evalign::ValidationError(path + ":" + std::to_string(lineno) +
                                     ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);

    const ConfigEntry* entry = nullptr;
    for (const ConfigEntry& e : entries) {
      if (key == e.key) {
        entry = &e;
        break;
      }
    }
    if (entry == nullptr) {
      throw evalign::ValidationError(path + ":" + std::to_string(lineno) +
                                     ": unknown key '" + key + "'");
    }
    if (cmd->count("--" + key) > 0) continue;  // explicit flag wins

    std::size_t used = 0;
    try {
      switch (entry->type) {
        case ConfigEntry::Type::Int:
          *static_cast<int*>(entry->target) = std::stoi(value, &used);
          break;
        case ConfigEntry::Type::Double:
          *static_cast<double*>(entry->target) = std::stod(value, &used);
          break;
        case ConfigEntry::Type::Bool:
          if (value == "true" || value == "false") {
            *static_cast<bool*>(entry->target) = value == "true";
            used = value.size();
          } else {
            *static_cast<bool*>(entry->target) = std::stoi(value, &used) != 0;
          }
          break;
        case ConfigEntry::Type::Text:
          *static_cast<std::string*>(entry->target) = value;
          used = value.size();
          break;
      }
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != value.size()) {
      throw evalign::ValidationError(path + ":" + std::to_string(lineno) +
                                     ": bad value for '" + key + "'");
    }
  }
}

// Shared optimizer/objective options; names double as config-file keys.
struct RunOptions {
  int grid_h = 8;
  int grid_w = 8;
  double lr = 0.5;
  double momentum = 0.9;
  int iterations = 300;
  double tol = 1e-6;
  int tol_window = 10;
  double lambda1 = 1.0;
  double eps = 1e-9;
  double eps_char = 1e-3;
  double t_ref = 1.0;
  double window_ms = 50.0;
  int threads = 1;
  bool global_search = true;
  int search_radius = 16;
  double search_accept = 0.05;

  void attach(CLI::App* cmd) {
    cmd->add_option("--global-search", global_search,
                    "Run the global translation probe before descent")
        ->capture_default_str();
    cmd->add_option("--search-radius", search_radius,
                    "Translation probe radius in px")
        ->capture_default_str();
    cmd->add_option("--search-accept", search_accept,
                    "Relative improvement required to adopt the probe")
        ->capture_default_str();
    cmd->add_option("--grid-h", grid_h, "Flow control grid rows")
        ->capture_default_str();
    cmd->add_option("--grid-w", grid_w, "Flow control grid columns")
        ->capture_default_str();
    cmd->add_option("--lr", lr, "Learning rate (pixels per step)")
        ->capture_default_str();
    cmd->add_option("--momentum", momentum, "Momentum coefficient")
        ->capture_default_str();
    cmd->add_option("--iterations", iterations, "Maximum iterations")
        ->capture_default_str();
    cmd->add_option("--tol", tol, "Relative loss-change stop tolerance")
        ->capture_default_str();
    cmd->add_option("--tol-window", tol_window,
                    "Iterations spanned by the stop tolerance")
        ->capture_default_str();
    cmd->add_option("--lambda1", lambda1, "Smoothness weight")
        ->capture_default_str();
    cmd->add_option("--eps", eps, "Average-timestamp denominator guard")
        ->capture_default_str();
    cmd->add_option("--eps-char", eps_char, "Charbonnier epsilon")
        ->capture_default_str();
    cmd->add_option("--t-ref", t_ref, "Reference time for the output IWE")
        ->capture_default_str();
    cmd->add_option("--window-ms", window_ms, "Event window length in ms")
        ->capture_default_str();
    cmd->add_option("--threads", threads,
                    "Threads for deterministic inner reductions")
        ->capture_default_str();
  }

  evalign::OptimizerConfig optimizer() const {
    evalign::OptimizerConfig cfg;
    cfg.grid_h = grid_h;
    cfg.grid_w = grid_w;
    cfg.learning_rate = lr;
    cfg.momentum = momentum;
    cfg.max_iterations = iterations;
    cfg.rel_tol = tol;
    cfg.tol_window = tol_window;
    cfg.global_search = global_search;
    cfg.search_radius = search_radius;
    cfg.search_accept = search_accept;
    cfg.ecm.lambda1 = lambda1;
    cfg.ecm.eps = eps;
    cfg.ecm.eps_char = eps_char;
    cfg.ecm.threads = threads;
    return cfg;
  }
};

std::vector<evalign::EventStream> split_windows(
    const evalign::EventStream& stream, std::uint64_t window_us) {
  if (stream.empty() || window_us == 0) return {stream};
  const std::uint64_t t0 = stream.events.front().t;
  const std::uint64_t t1 = stream.events.back().t;
  const std::uint64_t count = (t1 - t0) / window_us + 1;
  std::vector<evalign::EventStream> out(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    out[k].width = stream.width;
    out[k].height = stream.height;
    out[k].window_start = t0 + k * window_us;
    out[k].window_end = t0 + (k + 1) * window_us;
  }
  for (const evalign::Event& e : stream.events) {
    std::uint64_t k = (e.t - t0) / window_us;
    if (k >= count) k = count - 1;
    out[k].events.push_back(e);
  }
  return out;
}

struct CompensateArgs {
  std::string events_path;
  std::string out_prefix;
  std::string gt_flow_path;
  std::string config_path;
  RunOptions run;
  bool batch = false;
  bool viz = false;
  bool print_json = false;

  std::vector<ConfigEntry> config_entries() {
    using T = ConfigEntry::Type;
    return {
        {"events", T::Text, &events_path},
        {"out", T::Text, &out_prefix},
        {"gt-flow", T::Text, &gt_flow_path},
        {"grid-h", T::Int, &run.grid_h},
        {"grid-w", T::Int, &run.grid_w},
        {"lr", T::Double, &run.lr},
        {"momentum", T::Double, &run.momentum},
        {"iterations", T::Int, &run.iterations},
        {"tol", T::Double, &run.tol},
        {"tol-window", T::Int, &run.tol_window},
        {"lambda1", T::Double, &run.lambda1},
        {"eps", T::Double, &run.eps},
        {"eps-char", T::Double, &run.eps_char},
        {"t-ref", T::Double, &run.t_ref},
        {"window-ms", T::Double, &run.window_ms},
        {"threads", T::Int, &run.threads},
        {"global-search", T::Bool, &run.global_search},
        {"search-radius", T::Int, &run.search_radius},
        {"search-accept", T::Double, &run.search_accept},
    };
  }
};

json compensate_window(const evalign::EventStream& window,
                       const CompensateArgs& args,
                       const std::string& prefix) {
  using namespace evalign;
  const OptimizerConfig cfg = args.run.optimizer();

  OptimizeResult result;
  if (window.empty()) {
    result.flow = FlowField::zeros(cfg.grid_h, cfg.grid_w,
                                   window.height, window.width);
    result.trace = {0.0};
  } else {
    result = optimize_flow(window, cfg);
  }

  const WarpedStream warped = window.empty()
                                  ? identity_warp(window)
                                  : warp_events(window, result.flow,
                                                args.run.t_ref);
  const Iwe iwe = splat_iwe(warped);

  write_flo32(result.flow, prefix + ".flo32");
  write_pgm16(iwe.image, prefix + ".iwe.pgm", prefix + ".iwe.json");
  write_f32(iwe.image, prefix + ".iwe.f32");
  if (args.viz) write_ppm_redblue(iwe.image, prefix + ".iwe.ppm");

  json metrics;
  metrics["schema"] = "evalign/1";
  metrics["loss_initial"] = result.loss_initial;
  metrics["loss_final"] = result.loss_final;
  metrics["iterations"] = result.iterations;
  metrics["boundary_mass_lost_fraction"] = iwe.lost_mass_fraction();
  metrics["loss_trace"] = result.trace;
  metrics["events"] = window.size();

  if (!args.gt_flow_path.empty()) {
    const FlowField gt = read_flo32(args.gt_flow_path);
    std::vector<std::uint8_t> support(
        static_cast<std::size_t>(window.height) * window.width, 0);
    for (const Event& e : window.events) {
      support[static_cast<std::size_t>(e.y) * window.width + e.x] = 1;
    }
    const double epe_events = mean_endpoint_error(result.flow, gt, support);
    metrics["epe_vs_gt"] = epe_events;
    metrics["epe_mean"] = epe_events;
    metrics["epe_all_mean"] = mean_endpoint_error(result.flow, gt);
  }

  std::ofstream m(prefix + ".metrics.json", std::ios::trunc);
  if (!m) throw IoError("cannot write " + prefix + ".metrics.json");
  m << metrics.dump(2) << "\n";
  return metrics;
}

void run_compensate(const CompensateArgs& args) {
  using namespace evalign;
  if (args.events_path.empty() || args.out_prefix.empty()) {
    throw ValidationError("compensate: --events and --out are required "
                          "(flags or config file)");
  }
  const EventStream stream = read_events(args.events_path);
  const auto window_us =
      static_cast<std::uint64_t>(args.run.window_ms * 1000.0);

  if (!args.batch) {
    std::vector<EventStream> windows = split_windows(stream, window_us);
    const json metrics = compensate_window(windows.front(), args,
                                           args.out_prefix);
    if (args.print_json) emit(metrics);
    return;
  }

  const std::vector<EventStream> windows = split_windows(stream, window_us);
  json all = json::array();
  for (std::size_t k = 0; k < windows.size(); ++k) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), ".w%03zu", k);
    all.push_back(compensate_window(windows[k], args,
                                    args.out_prefix + suffix));
  }
  if (args.print_json) emit(all);
}

// Composite Simpson quadrature of exp(s a) over [0, delta], times b; the
// independent route to the ZOH input map.
double quadrature_bbar(double a, double b, double delta) {
  const int n = 256;  // even
  const double h = delta / n;
  double acc = std::exp(0.0) + std::exp(delta * a);
  for (int i = 1; i < n; ++i) {
    acc += std::exp(h * i * a) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return acc * h / 3.0 * b;
}

void run_ssm_check(const std::string& a_list, const std::string& b_list,
                   const std::string& c_list, double d, double delta,
                   int length, std::uint64_t seed) {
  using namespace evalign;
  const std::vector<double> a = parse_list(a_list);
  std::vector<double> b = parse_list(b_list);
  std::vector<double> c =
      c_list.empty() ? std::vector<double>(a.size(), 1.0) : parse_list(c_list);
  if (b.size() != a.size() || c.size() != a.size()) {
    throw ShapeMismatch("ssm-check: A, B, C must have equal length");
  }

  const Discretized disc = discretize(a, b, delta);

  double quad_err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    quad_err = std::max(quad_err, std::abs(disc.bbar[i] -
                                           quadrature_bbar(a[i], b[i], delta)));
  }

  SSMParams params;
  params.a = a;
  params.b = b;
  params.c = c;
  params.d = {d};
  params.delta = {delta};

  Rng rng(seed);
  std::vector<double> x(static_cast<std::size_t>(length));
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const std::vector<double> y =
      selective_scan(params, x, static_cast<std::size_t>(length));

  // brute-force convolution with the impulse response
  std::vector<double> kernel(static_cast<std::size_t>(length), 0.0);
  {
    std::vector<double> pow_a(a.size(), 1.0);
    for (int t = 0; t < length; ++t) {
      double k = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        k += c[i] * pow_a[i] * disc.bbar[i];
        pow_a[i] *= disc.abar[i];
      }
      kernel[static_cast<std::size_t>(t)] = k;
    }
  }
  double conv_err = 0.0;
  for (int t = 0; t < length; ++t) {
    double yt = d * x[static_cast<std::size_t>(t)];
    for (int s = 0; s <= t; ++s) {
      yt += kernel[static_cast<std::size_t>(t - s)] *
            x[static_cast<std::size_t>(s)];
    }
    conv_err = std::max(conv_err,
                        std::abs(yt - y[static_cast<std::size_t>(t)]));
  }

  // chunked scan must agree bitwise with the one-shot scan
  bool chunked_equal = true;
  {
    ScanState state = make_scan_state(params);
    std::vector<double> pieces;
    std::size_t pos = 0;
    std::size_t chunk = 3;
    while (pos < x.size()) {
      const std::size_t len = std::min(chunk, x.size() - pos);
      const std::vector<double> part(
          x.begin() + static_cast<std::ptrdiff_t>(pos),
          x.begin() + static_cast<std::ptrdiff_t>(pos + len));
      const std::vector<double> yp = scan_chunk(params, part, len, pos, state);
      pieces.insert(pieces.end(), yp.begin(), yp.end());
      pos += len;
      chunk = chunk * 2 + 1;
    }
    chunked_equal = pieces == y;
  }

  json out;
  out["schema"] = "evalign/1";
  out["abar"] = disc.abar;
  out["bbar"] = disc.bbar;
  out["quadrature_max_abs_err"] = quad_err;
  out["conv_max_abs_err"] = conv_err;
  out["chunked_bitwise_equal"] = chunked_equal;
  emit(out);
  if (quad_err > 1e-8 || conv_err > 1e-10 || !chunked_equal) {
    throw NumericError("ssm-check: oracle comparison out of tolerance");
  }
}

void run_fuse_demo(int channels, int height, int width, int state_dim,
                   std::uint64_t seed, const std::string& params_in,
                   const std::string& params_out) {
  using namespace evalign;
  Rng rng(seed);
  FeatureMap event_feat(channels, height, width);
  for (double& v : event_feat.data) v = rng.normal();
  FeatureMap rgb_feat(channels, 2 * height, 2 * width);
  for (double& v : rgb_feat.data) v = rng.normal();

  EdumParams edum;
  CmmParams cmm;
  if (!params_in.empty()) {
    edum = EdumParams::from_tensors(read_tsr(params_in + ".edum.tsr"));
    cmm = CmmParams::from_tensors(read_tsr(params_in + ".cmm.tsr"));
  } else {
    edum = EdumParams::random(channels, seed + 1);
    cmm = CmmParams::random(channels, state_dim, seed + 2);
  }
  if (!params_out.empty()) {
    write_tsr(edum.to_tensors(), params_out + ".edum.tsr");
    write_tsr(cmm.to_tensors(), params_out + ".cmm.tsr");
  }

  const FeatureMap upsampled = edum_forward(event_feat, rgb_feat, edum);
  const FeatureMap fused = cmm_forward(upsampled, rgb_feat, cmm);

  auto shape = [](const FeatureMap& f) {
    return json::array({f.channels, f.height, f.width});
  };
  json out;
  out["schema"] = "evalign/1";
  out["event_shape"] = shape(event_feat);
  out["rgb_shape"] = shape(rgb_feat);
  out["upsampled_shape"] = shape(upsampled);
  out["fused_shape"] = shape(fused);
  out["upsampled_checksum"] = hex64(fnv1a(upsampled.data));
  out["fused_checksum"] = hex64(fnv1a(fused.data));
  emit(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evalign: event-stream motion compensation and fusion kernels"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic event stream with known flow");
  struct {
    std::string pattern = "bar";
    int width = 64, height = 64;
    double u = 8.0, v = 0.0, u2 = -4.0, v2 = 0.0;
    double bar_width = 8.0, bar_x0 = -1.0, cell = 8.0;
    double duration_ms = 50.0;
    double contrast = 0.3;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "both";
    bool print_json = false;
  } sargs;
  synth->add_option("--pattern", sargs.pattern,
                    "bar, checker or two-object")->capture_default_str();
  synth->add_option("--width", sargs.width, "Frame width")->capture_default_str();
  synth->add_option("--height", sargs.height, "Frame height")->capture_default_str();
  synth->add_option("--u", sargs.u, "Horizontal motion (px/window)")
      ->capture_default_str();
  synth->add_option("--v", sargs.v, "Vertical motion (px/window)")
      ->capture_default_str();
  synth->add_option("--u2", sargs.u2, "Second object horizontal motion")
      ->capture_default_str();
  synth->add_option("--v2", sargs.v2, "Second object vertical motion")
      ->capture_default_str();
  synth->add_option("--bar-width", sargs.bar_width, "Bar width in px")
      ->capture_default_str();
  synth->add_option("--bar-x0", sargs.bar_x0,
                    "Bar start column (negative = centered)")
      ->capture_default_str();
  synth->add_option("--cell", sargs.cell, "Checker cell size")
      ->capture_default_str();
  synth->add_option("--duration-ms,--duration", sargs.duration_ms,
                    "Window duration in ms")->capture_default_str();
  synth->add_option("--contrast", sargs.contrast, "Contrast threshold")
      ->capture_default_str();
  synth->add_option("--noise-rate", sargs.noise_rate,
                    "Background noise (events/px/s)")->capture_default_str();
  synth->add_option("--seed", sargs.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", sargs.out, "Output prefix")->required();
  synth->add_option("--format", sargs.format, "text, binary or both")
      ->capture_default_str();
  synth->add_flag("--json", sargs.print_json, "Print a summary JSON");
  synth->callback([&] {
    using namespace evalign;
    SceneSpec spec;
    spec.pattern = parse_pattern(sargs.pattern);
    spec.width = sargs.width;
    spec.height = sargs.height;
    spec.u = sargs.u;
    spec.v = sargs.v;
    spec.u2 = sargs.u2;
    spec.v2 = sargs.v2;
    spec.bar_width = sargs.bar_width;
    spec.bar_x0 = sargs.bar_x0;
    spec.cell = sargs.cell;
    spec.duration_us = static_cast<std::uint64_t>(sargs.duration_ms * 1000.0);
    spec.contrast_c = sargs.contrast;
    spec.noise_rate = sargs.noise_rate;
    if (sargs.format != "text" && sargs.format != "binary" &&
        sargs.format != "both") {
      throw ValidationError("--format must be text, binary or both");
    }
    const SynthResult result = generate(spec, sargs.seed);
    if (sargs.format != "binary")
      write_events(result.stream, sargs.out + ".evt");
    if (sargs.format != "text")
      write_events(result.stream, sargs.out + ".evb");
    write_flo32(result.flow_gt, sargs.out + ".gt.flo32");
    if (sargs.print_json) {
      json j;
      j["schema"] = "evalign/1";
      j["events"] = result.stream.size();
      j["width"] = spec.width;
      j["height"] = spec.height;
      j["duration_us"] = spec.duration_us;
      emit(j);
    }
  });

  // ---- compensate ----
  auto* comp = app.add_subcommand(
      "compensate", "Recover flow by contrast maximization and emit the IWE");
  CompensateArgs cargs;
  comp->add_option("--events", cargs.events_path,
                   "Event file (.evt/.evb); may come from the config file");
  comp->add_option("--out", cargs.out_prefix,
                   "Output prefix; may come from the config file");
  comp->add_option("--gt-flow", cargs.gt_flow_path,
                   "Ground-truth .flo32 for endpoint error");
  cargs.run.attach(comp);
  comp->add_flag("--batch", cargs.batch, "Process every window in the file");
  comp->add_flag("--viz", cargs.viz, "Also write a red/blue PPM rendering");
  comp->add_flag("--json", cargs.print_json, "Print metrics JSON to stdout");
  comp->add_option("--config", cargs.config_path,
                   "key=value config file (keys named after flags; explicit "
                   "flags win)");
  comp->callback([&, comp] {
    if (!cargs.config_path.empty()) {
      auto entries = cargs.config_entries();
      apply_config_file(cargs.config_path, comp, entries);
    }
    run_compensate(cargs);
  });

  // ---- voxelize ----
  auto* vox = app.add_subcommand("voxelize",
                                 "Accumulate an event file into a voxel grid");
  struct {
    std::string events;
    std::string out;
    int bins = 5;
    bool print_json = false;
  } vargs;
  vox->add_option("--events", vargs.events, "Event file (.evt/.evb)")
      ->required();
  vox->add_option("--out", vargs.out, "Output .f32 path")->required();
  vox->add_option("--bins", vargs.bins, "Temporal bin count")
      ->capture_default_str();
  vox->add_flag("--json", vargs.print_json, "Print a summary JSON");
  vox->callback([&] {
    using namespace evalign;
    const EventStream stream = read_events(vargs.events);
    const VoxelGrid grid = voxelize(stream, vargs.bins);
    write_f32({static_cast<std::size_t>(grid.bins),
               static_cast<std::size_t>(grid.height),
               static_cast<std::size_t>(grid.width)},
              grid.data, vargs.out);
    if (vargs.print_json) {
      json j;
      j["schema"] = "evalign/1";
      j["bins"] = grid.bins;
      j["height"] = grid.height;
      j["width"] = grid.width;
      j["sum"] = grid.sum();
      j["checksum"] = hex64(fnv1a(grid.data));
      emit(j);
    }
  });

  // ---- iwe ----
  auto* iwe = app.add_subcommand(
      "iwe", "Splat an event file (optionally warped by a flow) to an image");
  struct {
    std::string events;
    std::string flow;
    std::string out;
    double t_ref = 1.0;
    bool viz = false;
    bool print_json = false;
  } iargs;
  iwe->add_option("--events", iargs.events, "Event file (.evt/.evb)")
      ->required();
  iwe->add_option("--flow", iargs.flow, "Flow .flo32 (default: zero flow)");
  iwe->add_option("--t-ref", iargs.t_ref, "Reference time (0 or 1)")
      ->capture_default_str();
  iwe->add_option("--out", iargs.out, "Output prefix")->required();
  iwe->add_flag("--viz", iargs.viz, "Also write a red/blue PPM rendering");
  iwe->add_flag("--json", iargs.print_json, "Print a summary JSON");
  iwe->callback([&] {
    using namespace evalign;
    const EventStream stream = read_events(iargs.events);
    FlowField flow = iargs.flow.empty()
                         ? FlowField::zeros(2, 2, stream.height, stream.width)
                         : read_flo32(iargs.flow);
    const WarpedStream warped =
        stream.empty() ? identity_warp(stream)
                       : warp_events(stream, flow, iargs.t_ref);
    const Iwe image = splat_iwe(warped);
    write_pgm16(image.image, iargs.out + ".iwe.pgm", iargs.out + ".iwe.json");
    write_f32(image.image, iargs.out + ".iwe.f32");
    if (iargs.viz) write_ppm_redblue(image.image, iargs.out + ".iwe.ppm");
    if (iargs.print_json) {
      json j;
      j["schema"] = "evalign/1";
      j["events"] = image.event_count;
      j["mass_deposited"] = image.mass_deposited;
      j["boundary_mass_lost_fraction"] = image.lost_mass_fraction();
      j["checksum"] = hex64(fnv1a(image.image.data));
      emit(j);
    }
  });

  // ---- ssm-check ----
  auto* ssm = app.add_subcommand(
      "ssm-check", "Discretize an SSM and compare the scan against oracles");
  struct {
    std::string a = "-1";
    std::string b = "1";
    std::string c;
    double d = 0.0;
    double delta = 1.0;
    int length = 32;
    std::uint64_t seed = 0;
  } ssargs;
  ssm->add_option("--A", ssargs.a, "Diagonal of A (comma list)")
      ->capture_default_str();
  ssm->add_option("--B", ssargs.b, "Input map (comma list)")
      ->capture_default_str();
  ssm->add_option("--C", ssargs.c, "Output map (comma list, default ones)");
  ssm->add_option("--D", ssargs.d, "Feedthrough")->capture_default_str();
  ssm->add_option("--delta", ssargs.delta, "Timescale")->capture_default_str();
  ssm->add_option("--length", ssargs.length, "Oracle sequence length")
      ->capture_default_str();
  ssm->add_option("--seed", ssargs.seed, "Oracle input seed")
      ->capture_default_str();
  ssm->callback([&] {
    run_ssm_check(ssargs.a, ssargs.b, ssargs.c, ssargs.d, ssargs.delta,
                  ssargs.length, ssargs.seed);
  });

  // ---- fuse-demo ----
  auto* fuse = app.add_subcommand(
      "fuse-demo", "Run the upsampling + fusion chain on synthetic tensors");
  struct {
    int channels = 4;
    int height = 6;
    int width = 6;
    int state_dim = 4;
    std::uint64_t seed = 1;
    std::string params_in;
    std::string params_out;
  } fargs;
  fuse->add_option("--C", fargs.channels, "Channels")->capture_default_str();
  fuse->add_option("--H", fargs.height, "Event feature height")
      ->capture_default_str();
  fuse->add_option("--W", fargs.width, "Event feature width")
      ->capture_default_str();
  fuse->add_option("--state-dim", fargs.state_dim, "SSM state size")
      ->capture_default_str();
  fuse->add_option("--seed", fargs.seed, "Random seed")->capture_default_str();
  fuse->add_option("--params-in", fargs.params_in,
                   "Load parameters from PREFIX.{edum,cmm}.tsr");
  fuse->add_option("--params-out", fargs.params_out,
                   "Save parameters to PREFIX.{edum,cmm}.tsr");
  fuse->callback([&] {
    run_fuse_demo(fargs.channels, fargs.height, fargs.width, fargs.state_dim,
                  fargs.seed, fargs.params_in, fargs.params_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const evalign::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const evalign::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const evalign::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
