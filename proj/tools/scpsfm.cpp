// Command-line front end: synthetic data generation, robust solving,
// evaluation against ground truth, and factor sweeps with CSV/SVG reports.
//
// Exit codes: 0 success, 1 invalid input, 2 degenerate solve.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "scpsfm/eval.hpp"
#include "scpsfm/io.hpp"
#include "scpsfm/solver.hpp"
#include "scpsfm/synthgen.hpp"

using namespace scpsfm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitDegenerate = 2;

// Relative output paths resolve under $SCPSFM_OUTPUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("SCPSFM_OUTPUT_ROOT");
  if (root && *root && fs::path(path).is_relative())
    return (fs::path(root) / path).string();
  return path;
}

struct SolverFlags {
  std::optional<double> alpha, beta, t, lr, inlier_threshold;
  std::optional<int> max_iters;
  std::optional<uint64_t> seed;
  std::optional<std::string> proj_loss_variant, parameterization;

  void add_to(CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--alpha", alpha, "projection-loss weight");
    cmd->add_option("--beta", beta, "calibration-loss weight (0 disables)");
    cmd->add_option("--t", t, "minimum expected inlier count");
    cmd->add_option("--lr", lr, "optimizer learning rate");
    cmd->add_option("--max-iters", max_iters, "optimization iteration budget");
    cmd->add_option("--inlier-threshold", inlier_threshold,
                    "soft-weight classification threshold");
    if (with_seed) cmd->add_option("--seed", seed, "solver seed");
    cmd->add_option("--proj-loss-variant", proj_loss_variant,
                    "tail_sum or sigma4");
    cmd->add_option("--parameterization", parameterization, "direct or encoder");
  }

  void apply(SolverConfig& cfg) const {
    if (alpha) cfg.alpha = *alpha;
    if (beta) cfg.beta = *beta;
    if (t) cfg.t = *t;
    if (lr) cfg.learning_rate = *lr;
    if (max_iters) cfg.max_iters = *max_iters;
    if (inlier_threshold) cfg.inlier_threshold = *inlier_threshold;
    if (seed) cfg.seed = *seed;
    if (proj_loss_variant) {
      if (*proj_loss_variant == "tail_sum")
        cfg.proj_loss_variant = ProjLossVariant::kTailSum;
      else if (*proj_loss_variant == "sigma4")
        cfg.proj_loss_variant = ProjLossVariant::kSigma4;
      else
        throw IoError("bad --proj-loss-variant '" + *proj_loss_variant + "'");
    }
    if (parameterization) {
      if (*parameterization == "direct")
        cfg.parameterization = Parameterization::kDirect;
      else if (*parameterization == "encoder")
        cfg.parameterization = Parameterization::kEncoder;
      else
        throw IoError("bad --parameterization '" + *parameterization + "'");
    }
  }
};

MeasurementMatrix matrix_from_tracks(const CorrespondenceTracks& tracks) {
  auto depths = estimate_depths(tracks, DepthStrategy::kUnit);
  return build_measurement_matrix(tracks, depths);
}

void write_loss_outputs(const std::string& dir, const SolveResult& res,
                        bool plot) {
  save_loss_trace_csv(dir + "/loss_trace.csv", res.loss_trace);
  if (!plot || res.loss_trace.empty()) return;
  std::vector<double> it(res.loss_trace.size());
  std::vector<std::vector<double>> ys(3, std::vector<double>(res.loss_trace.size()));
  for (size_t i = 0; i < res.loss_trace.size(); ++i) {
    it[i] = static_cast<double>(i + 1);
    for (int c = 0; c < 3; ++c) ys[c][i] = res.loss_trace[i][c];
  }
  write_svg_lines(dir + "/loss.svg", "loss components vs iteration",
                  {"count", "projection", "calibration"}, {it, it, it}, ys);
}

int cmd_synth(const SceneConfig& scfg, const std::string& out) {
  scfg.validate();
  auto inst = make_instance(scfg);
  save_scene_bundle(out, inst);
  int inliers = 0;
  for (char c : inst.scene.inlier_mask_true) inliers += c;
  std::cout << "bundle " << out << ": n=" << scfg.n_views << " m=" << scfg.m_points
            << " delta=" << scfg.delta << " sigma=" << scfg.sigma
            << " seed=" << scfg.seed << " inliers=" << inliers << "\n";
  return kExitOk;
}

int cmd_solve(const std::string& bundle, const std::string& tracks_path,
              const std::string& config_path, const SolverFlags& flags,
              const std::string& out, bool plot) {
  SolverConfig cfg;
  if (!config_path.empty()) cfg = load_solver_config(config_path);
  flags.apply(cfg);
  cfg.validate();

  MeasurementMatrix M;
  if (!bundle.empty()) {
    auto inst = load_scene_bundle(bundle);
    M = inst.M;
    cfg.image_width = inst.scene.cfg.image_width;
    cfg.image_height = inst.scene.cfg.image_height;
  } else {
    M = matrix_from_tracks(load_tracks_csv(tracks_path));
  }

  auto res = solve(M, cfg);
  fs::create_directories(out);
  write_file(out + "/result.json", solve_result_to_json(res));
  write_file(out + "/config.json", solver_config_to_json(cfg));
  write_loss_outputs(out, res, plot);
  int inliers = 0;
  for (char c : res.inlier_mask) inliers += c;
  std::cout << "solve " << out << ": " << inliers << "/" << res.inlier_mask.size()
            << " inliers, " << res.iterations << " iterations"
            << (res.converged ? " (converged)" : "") << "\n";
  if (res.degenerate || res.too_few_inliers) {
    std::cerr << "warning: degenerate solve (see result.json diagnostics)\n";
    return kExitDegenerate;
  }
  return kExitOk;
}

// Rebuilds the solver's reconstruction from the bundle matrix and the saved
// inlier mask (the result JSON stores weights and mask, not 3D points).
ProjectiveReconstruction reconstruction_from_mask(
    const MeasurementMatrix& M, const std::vector<char>& mask,
    std::vector<int>& cols) {
  MeasurementMatrix Mf = MeasurementMatrix::from_dense(M.valid_block());
  for (size_t j = 0; j < mask.size(); ++j) Mf.col_valid[j] = mask[j];
  cols.clear();
  for (size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) cols.push_back(static_cast<int>(j));
  return sturm_triggs_factorize(rank4_project(Mf));
}

int cmd_eval(const std::string& bundle, const std::string& tracks_path,
             const std::string& result_path, const std::string& out) {
  json rj;
  try {
    rj = json::parse(read_file(result_path));
  } catch (const json::exception& e) {
    throw IoError("result JSON " + result_path + ": " + e.what());
  }
  std::vector<char> mask;
  for (const auto& v : rj.at("inlier_mask")) mask.push_back(v.get<int>() != 0);
  CalibrationEstimate cal = calibration_from_json(rj.at("calibration").dump());

  json report;
  bool have_gt = !bundle.empty();
  SyntheticInstance inst;
  CorrespondenceTracks tracks;
  MeasurementMatrix M;
  if (have_gt) {
    inst = load_scene_bundle(bundle);
    tracks = inst.scene.tracks;
    M = inst.M;
  } else {
    tracks = load_tracks_csv(tracks_path);
    M = matrix_from_tracks(tracks);
  }
  if (static_cast<int>(mask.size()) != M.m_valid())
    throw IoError("result mask length does not match the input's track count");

  std::vector<int> cols;
  auto recon = reconstruction_from_mask(M, mask, cols);

  // 2D error over predicted inliers
  {
    ProjectiveReconstruction full;
    full.cameras = recon.cameras;
    // insert placeholder points for masked-out columns so indices line up
    full.points.assign(mask.size(), HomPoint3());
    for (size_t k = 0; k < cols.size(); ++k) full.points[cols[k]] = recon.points[k];
    report["error_2d_px"] = error_2d(full, tracks, mask);
  }

  if (have_gt) {
    auto cls = f1_score(mask, inst.scene.inlier_mask_true);
    report["f1"] = cls.f1;
    report["precision"] = cls.precision;
    report["recall"] = cls.recall;
    std::vector<HomPoint3> est, tru;
    std::vector<char> emask;
    for (size_t k = 0; k < cols.size(); ++k) {
      est.push_back(recon.points[k]);
      tru.push_back(inst.scene.points_metric[cols[k]]);
      emask.push_back(inst.scene.inlier_mask_true[cols[k]]);
    }
    report["error_3d_rel"] = error_3d(est, tru, emask, Alignment::kHomography);
    report["focal_error_rel"] = focal_error(cal.K, inst.scene.K_true);
  } else {
    std::cout << "no ground truth: skipping F1, 3D and focal metrics\n";
  }

  fs::create_directories(out);
  write_file(out + "/eval.json", report.dump(2) + "\n");
  std::ostringstream csv;
  csv << "metric,value\n";
  for (const auto& [k, v] : report.items())
    csv << k << "," << v.dump() << "\n";
  write_file(out + "/eval.csv", csv.str());
  std::cout << "eval " << out << ": " << report.dump() << "\n";
  return kExitOk;
}

int cmd_sweep(const SceneConfig& base, const SolverConfig& solver_base,
              const std::string& factor, const std::vector<double>& values,
              int trials, const std::string& out, bool with_baseline) {
  if (values.empty()) throw IoError("sweep: no values given");
  if (trials < 1) throw IoError("sweep: trials must be >= 1");

  std::vector<SweepRecord> records;
  for (size_t vi = 0; vi < values.size(); ++vi) {
    for (int trial = 0; trial < trials; ++trial) {
      SceneConfig scfg = base;
      double v = values[vi];
      if (factor == "m") scfg.m_points = static_cast<int>(v);
      else if (factor == "n") scfg.n_views = static_cast<int>(v);
      else if (factor == "delta") scfg.delta = v;
      else if (factor == "sigma") scfg.sigma = v;
      else throw IoError("sweep: unknown factor '" + factor + "'");
      // documented derivation: every cell reproducible in isolation
      scfg.seed = base.seed + 1000003ull * vi + static_cast<uint64_t>(trial);
      scfg.validate();
      auto inst = make_instance(scfg);

      auto add = [&](const std::string& variant,
                     const std::map<std::string, double>& metrics) {
        SweepRecord r;
        r.factor = factor;
        r.value = v;
        r.variant = variant;
        r.trial = trial;
        r.metrics = metrics;
        records.push_back(std::move(r));
      };
      auto eval_points = [&](const std::vector<HomPoint3>& est,
                             const std::vector<int>& cols) {
        std::vector<HomPoint3> tru;
        std::vector<char> emask;
        for (size_t k = 0; k < cols.size(); ++k) {
          tru.push_back(inst.scene.points_metric[cols[k]]);
          emask.push_back(inst.scene.inlier_mask_true[cols[k]]);
        }
        int kept = 0;
        for (char c : emask) kept += c;
        if (kept < 5) return std::numeric_limits<double>::quiet_NaN();
        return error_3d(est, tru, emask, Alignment::kHomography);
      };

      for (const std::string& variant :
           with_baseline ? std::vector<std::string>{"baseline", "beta0", "full"}
                         : std::vector<std::string>{"beta0", "full"}) {
        try {
          if (variant == "baseline") {
            auto recon = sturm_triggs_factorize(rank4_project(inst.M));
            std::vector<int> all_cols(scfg.m_points);
            std::iota(all_cols.begin(), all_cols.end(), 0);
            add(variant, {{"error_3d_rel", eval_points(recon.points, all_cols)}});
            continue;
          }
          SolverConfig cfg = solver_base;
          cfg.seed = scfg.seed;
          if (variant == "beta0") cfg.beta = 0;
          auto res = solve(inst.M, cfg);
          std::map<std::string, double> metrics;
          metrics["f1"] = f1_score(res.inlier_mask, inst.scene.inlier_mask_true).f1;
          metrics["focal_error_rel"] = focal_error(res.calibration.K, scfg.K_true);
          if (!res.reconstruction_cols.empty())
            metrics["error_3d_rel"] =
                eval_points(res.reconstruction.points, res.reconstruction_cols);
          add(variant, metrics);
        } catch (const std::runtime_error& e) {
          // partial failure: record the cell and keep sweeping
          add(variant, {{"failed", 1.0}});
          std::cerr << "sweep cell failed (" << factor << "=" << v << ", trial "
                    << trial << ", " << variant << "): " << e.what() << "\n";
        }
      }
      std::cout << "sweep " << factor << "=" << v << " trial " << trial << " done\n";
    }
  }

  auto cells = aggregate_sweep(records);
  fs::create_directories(out);
  write_file(out + "/sweep.csv", sweep_to_csv(cells));

  // one curve per variant for each headline metric
  for (const std::string& metric : {"f1", "error_3d_rel"}) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> xs, ys;
    for (const std::string& variant : {"baseline", "beta0", "full"}) {
      std::vector<double> x, y;
      for (const auto& c : cells) {
        auto it = c.mean.find(metric);
        if (c.variant == variant && it != c.mean.end() && std::isfinite(it->second)) {
          x.push_back(c.value);
          y.push_back(it->second);
        }
      }
      if (!x.empty()) {
        names.push_back(variant);
        xs.push_back(std::move(x));
        ys.push_back(std::move(y));
      }
    }
    if (!names.empty())
      write_svg_lines(out + "/" + metric + ".svg", metric + " vs " + factor, names,
                      xs, ys);
  }
  std::cout << "sweep " << out << ": " << records.size() << " records, "
            << cells.size() << " cells\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust projective structure-from-motion with self-calibration"};
  app.require_subcommand(1);

  // synth
  SceneConfig scfg;
  std::string out = "out";
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene bundle");
  synth->add_option("--n", scfg.n_views, "number of views");
  synth->add_option("--m", scfg.m_points, "number of tracks");
  synth->add_option("--delta", scfg.delta, "outlier rate in [0,1)");
  synth->add_option("--sigma", scfg.sigma, "noise as a fraction of matrix RMS");
  synth->add_option("--seed", scfg.seed, "scene seed");
  synth->add_option("--pad-rows", scfg.pad_rows, "pad to this many rows");
  synth->add_option("--pad-cols", scfg.pad_cols, "pad to this many columns");
  synth->add_option("--out", out, "output bundle directory");

  // solve
  std::string bundle, tracks_path, config_path;
  bool plot = false;
  SolverFlags flags;
  auto* solve_cmd = app.add_subcommand("solve", "run the robust solver");
  solve_cmd->add_option("--bundle", bundle, "scene bundle directory");
  solve_cmd->add_option("--tracks", tracks_path, "tracks CSV (unit depths)");
  solve_cmd->add_option("--config", config_path, "solver config (.json/.toml)");
  solve_cmd->add_flag("--plot", plot, "also write an SVG loss plot");
  solve_cmd->add_option("--out", out, "output directory");
  flags.add_to(solve_cmd);

  // eval
  std::string result_path;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a solve result");
  eval_cmd->add_option("--bundle", bundle, "scene bundle with ground truth");
  eval_cmd->add_option("--tracks", tracks_path, "tracks CSV (no ground truth)");
  eval_cmd->add_option("--result", result_path, "result.json from solve")
      ->required();
  eval_cmd->add_option("--out", out, "output directory");

  // sweep
  std::string factor = "delta";
  std::vector<double> values;
  int trials = 3;
  bool no_baseline = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "factor sweep over scene configs");
  sweep_cmd->add_option("--factor", factor, "m | n | delta | sigma");
  sweep_cmd->add_option("--values", values, "factor values")->required();
  sweep_cmd->add_option("--trials", trials, "seeds per value");
  sweep_cmd->add_option("--n", scfg.n_views, "base number of views");
  sweep_cmd->add_option("--m", scfg.m_points, "base number of tracks");
  sweep_cmd->add_option("--delta", scfg.delta, "base outlier rate");
  sweep_cmd->add_option("--sigma", scfg.sigma, "base noise level");
  sweep_cmd->add_option("--seed", scfg.seed, "base seed");
  sweep_cmd->add_option("--config", config_path, "solver config (.json/.toml)");
  sweep_cmd->add_flag("--no-baseline", no_baseline,
                      "skip the plain factorization variant");
  sweep_cmd->add_option("--out", out, "output directory");
  flags.add_to(sweep_cmd, /*with_seed=*/false);  // per-cell seeds are derived

  CLI11_PARSE(app, argc, argv);

  try {
    out = resolve_out(out);
    if (synth->parsed()) return cmd_synth(scfg, out);
    if (solve_cmd->parsed()) {
      if (bundle.empty() == tracks_path.empty())
        throw IoError("solve: give exactly one of --bundle or --tracks");
      return cmd_solve(bundle, tracks_path, config_path, flags, out, plot);
    }
    if (eval_cmd->parsed()) {
      if (bundle.empty() == tracks_path.empty())
        throw IoError("eval: give exactly one of --bundle or --tracks");
      return cmd_eval(bundle, tracks_path, result_path, out);
    }
    if (sweep_cmd->parsed()) {
      SolverConfig cfg;
      if (!config_path.empty()) cfg = load_solver_config(config_path);
      flags.apply(cfg);
      return cmd_sweep(scfg, cfg, factor, values, trials, out, !no_baseline);
    }
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
