#include "scpsfm/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace scpsfm {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string matrix_to_csv(const MatX& M) {
  std::ostringstream os;
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = 0; j < M.cols(); ++j) {
      if (j) os << ",";
      os << fmt(M(i, j));
    }
    os << "\n";
  }
  return os.str();
}

MatX matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows[0].size())
      throw IoError("matrix CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("matrix CSV: empty");
  MatX M(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[0].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

json mat3_to_json(const Mat3& K) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back({K(i, 0), K(i, 1), K(i, 2)});
  return rows;
}

Mat3 mat3_from_json(const json& j) {
  Mat3 K;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) K(i, c) = j.at(i).at(c).get<double>();
  return K;
}

}  // namespace

CorrespondenceTracks load_tracks_csv(const std::string& path) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line)) throw IoError("tracks CSV: empty file " + path);
  // header: view,track,x,y[,w]
  struct Obs {
    int view, track;
    double x, y, w;
  };
  std::vector<Obs> obs;
  int max_view = -1, max_track = -1;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 4)
      throw IoError("tracks CSV: line " + std::to_string(lineno) + " needs >= 4 fields");
    Obs o;
    o.view = std::stoi(cells[0]);
    o.track = std::stoi(cells[1]);
    o.x = std::stod(cells[2]);
    o.y = std::stod(cells[3]);
    o.w = cells.size() > 4 ? std::stod(cells[4]) : 1.0;
    max_view = std::max(max_view, o.view);
    max_track = std::max(max_track, o.track);
    obs.push_back(o);
  }
  if (obs.empty()) throw IoError("tracks CSV: no observations in " + path);
  CorrespondenceTracks t;
  t.n = max_view + 1;
  t.m = max_track + 1;
  t.points.assign(static_cast<size_t>(t.n) * t.m, HomPoint2());
  std::vector<char> seen(static_cast<size_t>(t.n) * t.m, 0);
  for (const auto& o : obs) {
    t.at(o.view, o.track) = HomPoint2(o.x, o.y, o.w);
    seen[static_cast<size_t>(o.view) * t.m + o.track] = 1;
  }
  for (size_t k = 0; k < seen.size(); ++k)
    if (!seen[k])
      throw IoError("tracks CSV: missing observation (full visibility required)");
  return t;
}

void save_tracks_csv(const std::string& path, const CorrespondenceTracks& tracks) {
  std::ostringstream os;
  os << "view,track,x,y,w\n";
  for (int i = 0; i < tracks.n; ++i)
    for (int j = 0; j < tracks.m; ++j) {
      const Vec3& c = tracks.at(i, j).coords;
      os << i << "," << j << "," << fmt(c(0)) << "," << fmt(c(1)) << ","
         << fmt(c(2)) << "\n";
    }
  write_file(path, os.str());
}

void save_measurement_matrix(const std::string& csv_path,
                             const std::string& sidecar_path,
                             const MeasurementMatrix& M) {
  write_file(csv_path, matrix_to_csv(M.entries));
  json j;
  j["n"] = M.n_total();
  j["m"] = M.m_total();
  j["row_valid"] = std::vector<int>(M.row_valid.begin(), M.row_valid.end());
  j["col_valid"] = std::vector<int>(M.col_valid.begin(), M.col_valid.end());
  write_file(sidecar_path, j.dump(2) + "\n");
}

MeasurementMatrix load_measurement_matrix(const std::string& csv_path,
                                          const std::string& sidecar_path) {
  MeasurementMatrix M;
  M.entries = matrix_from_csv(read_file(csv_path));
  json j = json::parse(read_file(sidecar_path));
  int n = j.at("n").get<int>(), m = j.at("m").get<int>();
  if (M.entries.rows() != 3 * n || M.entries.cols() != m)
    throw IoError("measurement matrix: sidecar dimensions disagree with CSV");
  for (const auto& v : j.at("row_valid")) M.row_valid.push_back(v.get<int>() != 0);
  for (const auto& v : j.at("col_valid")) M.col_valid.push_back(v.get<int>() != 0);
  if (static_cast<int>(M.row_valid.size()) != n ||
      static_cast<int>(M.col_valid.size()) != m)
    throw IoError("measurement matrix: validity mask lengths wrong");
  return M;
}

std::string calibration_to_json(const CalibrationEstimate& c) {
  json j;
  j["K"] = mat3_to_json(c.K.K);
  j["n_inf"] = {c.n_inf.n_inf(0), c.n_inf.n_inf(1), c.n_inf.n_inf(2)};
  j["frame"] = c.frame;
  return j.dump(2) + "\n";
}

CalibrationEstimate calibration_from_json(const std::string& text) {
  json j = json::parse(text);
  CalibrationEstimate c;
  c.K = Intrinsics(mat3_from_json(j.at("K")));
  for (int i = 0; i < 3; ++i) c.n_inf.n_inf(i) = j.at("n_inf").at(i).get<double>();
  c.frame = j.value("frame", "pixel");
  if (c.frame != "pixel" && c.frame != "normalized")
    throw IoError("calibration JSON: bad frame '" + c.frame + "'");
  return c;
}

namespace {

void apply_config_json(SolverConfig& cfg, const json& j) {
  for (const auto& [key, val] : j.items()) {
    if (key == "alpha") cfg.alpha = val.get<double>();
    else if (key == "beta") cfg.beta = val.get<double>();
    else if (key == "t") cfg.t = val.get<double>();
    else if (key == "learning_rate") cfg.learning_rate = val.get<double>();
    else if (key == "max_iters") cfg.max_iters = val.get<int>();
    else if (key == "inlier_threshold") cfg.inlier_threshold = val.get<double>();
    else if (key == "parameterization") {
      std::string s = val.get<std::string>();
      if (s == "direct") cfg.parameterization = Parameterization::kDirect;
      else if (s == "encoder") cfg.parameterization = Parameterization::kEncoder;
      else throw IoError("config: bad parameterization '" + s + "'");
    } else if (key == "seed") cfg.seed = val.get<uint64_t>();
    else if (key == "adam_beta1") cfg.adam_beta1 = val.get<double>();
    else if (key == "adam_beta2") cfg.adam_beta2 = val.get<double>();
    else if (key == "adam_eps") cfg.adam_eps = val.get<double>();
    else if (key == "proj_loss_variant") {
      std::string s = val.get<std::string>();
      if (s == "tail_sum") cfg.proj_loss_variant = ProjLossVariant::kTailSum;
      else if (s == "sigma4") cfg.proj_loss_variant = ProjLossVariant::kSigma4;
      else throw IoError("config: bad proj_loss_variant '" + s + "'");
    } else if (key == "phase1_frac") cfg.phase1_frac = val.get<double>();
    else if (key == "anchor_b") cfg.anchor_b = val.get<double>();
    else if (key == "daq_couple_weights") cfg.daq_couple_weights = val.get<bool>();
    else if (key == "frame") cfg.frame = val.get<std::string>();
    else if (key == "image_width") cfg.image_width = val.get<double>();
    else if (key == "image_height") cfg.image_height = val.get<double>();
    else if (key == "convergence_tol") cfg.convergence_tol = val.get<double>();
    else if (key == "convergence_window") cfg.convergence_window = val.get<int>();
    else throw IoError("config: unknown field '" + key + "'");
  }
}

}  // namespace

SolverConfig solver_config_from_json(const std::string& text) {
  SolverConfig cfg;
  apply_config_json(cfg, json::parse(text));
  cfg.validate();
  return cfg;
}

SolverConfig solver_config_from_toml(const std::string& text) {
  // Flat `key = value` subset: strings, numbers, booleans, # comments.
  json j = json::object();
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto strip = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("TOML line " + std::to_string(lineno) + ": expected key = value");
    std::string key = strip(line.substr(0, eq));
    std::string val = strip(line.substr(eq + 1));
    if (val.size() >= 2 && (val.front() == '"' || val.front() == '\'')) {
      if (val.back() != val.front())
        throw IoError("TOML line " + std::to_string(lineno) + ": unterminated string");
      j[key] = val.substr(1, val.size() - 2);
    } else if (val == "true" || val == "false") {
      j[key] = (val == "true");
    } else if (val.find_first_of(".eE") != std::string::npos) {
      j[key] = std::stod(val);
    } else {
      j[key] = std::stoll(val);
    }
  }
  SolverConfig cfg;
  apply_config_json(cfg, j);
  cfg.validate();
  return cfg;
}

SolverConfig load_solver_config(const std::string& path) {
  std::string text = read_file(path);
  if (fs::path(path).extension() == ".toml") return solver_config_from_toml(text);
  return solver_config_from_json(text);
}

std::string solver_config_to_json(const SolverConfig& cfg) {
  json j;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["t"] = cfg.t;
  j["learning_rate"] = cfg.learning_rate;
  j["max_iters"] = cfg.max_iters;
  j["inlier_threshold"] = cfg.inlier_threshold;
  j["parameterization"] =
      cfg.parameterization == Parameterization::kDirect ? "direct" : "encoder";
  j["seed"] = cfg.seed;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["proj_loss_variant"] =
      cfg.proj_loss_variant == ProjLossVariant::kTailSum ? "tail_sum" : "sigma4";
  j["phase1_frac"] = cfg.phase1_frac;
  j["anchor_b"] = cfg.anchor_b;
  j["daq_couple_weights"] = cfg.daq_couple_weights;
  j["frame"] = cfg.frame;
  j["image_width"] = cfg.image_width;
  j["image_height"] = cfg.image_height;
  j["convergence_tol"] = cfg.convergence_tol;
  j["convergence_window"] = cfg.convergence_window;
  return j.dump(2) + "\n";
}

std::string solve_result_to_json(const SolveResult& res) {
  json j;
  j["soft_weights"] = std::vector<double>(res.soft_weights.data(),
                                          res.soft_weights.data() + res.soft_weights.size());
  j["inlier_mask"] = std::vector<int>(res.inlier_mask.begin(), res.inlier_mask.end());
  j["calibration"]["K"] = mat3_to_json(res.calibration.K.K);
  j["calibration"]["n_inf"] = {res.calibration.n_inf.n_inf(0),
                               res.calibration.n_inf.n_inf(1),
                               res.calibration.n_inf.n_inf(2)};
  j["calibration"]["frame"] = res.calibration.frame;
  j["diagnostics"]["iterations"] = res.iterations;
  j["diagnostics"]["converged"] = res.converged;
  j["diagnostics"]["degenerate"] = res.degenerate;
  j["diagnostics"]["too_few_inliers"] = res.too_few_inliers;
  if (!res.loss_trace.empty()) {
    const auto& last = res.loss_trace.back();
    j["diagnostics"]["final_loss"] = {last[0], last[1], last[2]};
  }
  return j.dump(2) + "\n";
}

void save_loss_trace_csv(const std::string& path,
                         const std::vector<std::array<double, 3>>& trace) {
  std::ostringstream os;
  os << "iteration,loss_num,loss_proj,loss_daq\n";
  for (size_t i = 0; i < trace.size(); ++i)
    os << (i + 1) << "," << fmt(trace[i][0]) << "," << fmt(trace[i][1]) << ","
       << fmt(trace[i][2]) << "\n";
  write_file(path, os.str());
}

void save_scene_bundle(const std::string& dir, const SyntheticInstance& inst) {
  fs::create_directories(dir);
  const auto& s = inst.scene;
  json cj;
  cj["n_views"] = s.cfg.n_views;
  cj["m_points"] = s.cfg.m_points;
  cj["delta"] = s.cfg.delta;
  cj["sigma"] = s.cfg.sigma;
  cj["seed"] = s.cfg.seed;
  cj["pad_rows"] = s.cfg.pad_rows;
  cj["pad_cols"] = s.cfg.pad_cols;
  cj["K_true"] = mat3_to_json(s.cfg.K_true.K);
  cj["image_width"] = s.cfg.image_width;
  cj["image_height"] = s.cfg.image_height;
  write_file(dir + "/config.json", cj.dump(2) + "\n");

  save_tracks_csv(dir + "/tracks.csv", s.tracks);
  write_file(dir + "/depths.csv", matrix_to_csv(s.depths_true.lambdas));

  MatX P(4, s.points_metric.size());
  for (size_t j = 0; j < s.points_metric.size(); ++j)
    P.col(j) = s.points_metric[j].coords;
  write_file(dir + "/points_metric.csv", matrix_to_csv(P));

  MatX C(3 * s.cameras_metric.size(), 4);
  for (size_t i = 0; i < s.cameras_metric.size(); ++i)
    C.middleRows(3 * i, 3) = s.cameras_metric[i].entries;
  write_file(dir + "/cameras_metric.csv", matrix_to_csv(C));

  std::ostringstream mos;
  for (size_t j = 0; j < s.inlier_mask_true.size(); ++j)
    mos << static_cast<int>(s.inlier_mask_true[j]) << "\n";
  write_file(dir + "/inlier_mask.csv", mos.str());

  save_measurement_matrix(dir + "/M.csv", dir + "/M.json", inst.M);
}

SyntheticInstance load_scene_bundle(const std::string& dir) {
  SyntheticInstance inst;
  json cj = json::parse(read_file(dir + "/config.json"));
  SceneConfig cfg;
  cfg.n_views = cj.at("n_views").get<int>();
  cfg.m_points = cj.at("m_points").get<int>();
  cfg.delta = cj.at("delta").get<double>();
  cfg.sigma = cj.at("sigma").get<double>();
  cfg.seed = cj.at("seed").get<uint64_t>();
  cfg.pad_rows = cj.value("pad_rows", 0);
  cfg.pad_cols = cj.value("pad_cols", 0);
  cfg.K_true = Intrinsics(mat3_from_json(cj.at("K_true")));
  cfg.image_width = cj.value("image_width", 640.0);
  cfg.image_height = cj.value("image_height", 480.0);
  inst.scene.cfg = cfg;
  inst.scene.K_true = cfg.K_true;

  inst.scene.tracks = load_tracks_csv(dir + "/tracks.csv");
  inst.scene.depths_true.lambdas = matrix_from_csv(read_file(dir + "/depths.csv"));
  inst.scene.depths_true.n = static_cast<int>(inst.scene.depths_true.lambdas.rows());
  inst.scene.depths_true.m = static_cast<int>(inst.scene.depths_true.lambdas.cols());

  MatX P = matrix_from_csv(read_file(dir + "/points_metric.csv"));
  for (int j = 0; j < P.cols(); ++j)
    inst.scene.points_metric.emplace_back(Vec4(P.col(j)));
  MatX C = matrix_from_csv(read_file(dir + "/cameras_metric.csv"));
  for (int i = 0; i < C.rows() / 3; ++i)
    inst.scene.cameras_metric.emplace_back(Mat34(C.middleRows(3 * i, 3)));

  std::istringstream ms(read_file(dir + "/inlier_mask.csv"));
  std::string line;
  while (std::getline(ms, line))
    if (!line.empty()) inst.scene.inlier_mask_true.push_back(line[0] == '1');

  inst.M = load_measurement_matrix(dir + "/M.csv", dir + "/M.json");
  return inst;
}

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<std::string>& series_names,
                     const std::vector<std::vector<double>>& xs,
                     const std::vector<std::vector<double>>& ys) {
  if (series_names.size() != xs.size() || xs.size() != ys.size())
    throw IoError("write_svg_lines: series count mismatch");
  const int W = 720, H = 480, pad = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (size_t s = 0; s < xs.size(); ++s)
    for (size_t i = 0; i < xs[s].size(); ++i) {
      xmin = std::min(xmin, xs[s][i]);
      xmax = std::max(xmax, xs[s][i]);
      ymin = std::min(ymin, ys[s][i]);
      ymax = std::max(ymax, ys[s][i]);
    }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto px = [&](double x) { return pad + (x - xmin) / (xmax - xmin) * (W - 2 * pad); };
  auto py = [&](double y) { return H - pad - (y - ymin) / (ymax - ymin) * (H - 2 * pad); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
     << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << title << "</text>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad
     << "\" y2=\"" << H - pad << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
     << H - pad << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"" << H - pad + 20 << "\" font-size=\"11\">"
     << xmin << "</text>\n<text x=\"" << W - pad << "\" y=\"" << H - pad + 20
     << "\" text-anchor=\"end\" font-size=\"11\">" << xmax << "</text>\n";
  os << "<text x=\"" << pad - 4 << "\" y=\"" << H - pad << "\" text-anchor=\"end\" "
     << "font-size=\"11\">" << ymin << "</text>\n<text x=\"" << pad - 4 << "\" y=\""
     << pad << "\" text-anchor=\"end\" font-size=\"11\">" << ymax << "</text>\n";
  for (size_t s = 0; s < xs.size(); ++s) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[s % 6]
       << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < xs[s].size(); ++i)
      os << px(xs[s][i]) << "," << py(ys[s][i]) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << W - pad - 4 << "\" y=\"" << pad + 16 * (s + 1)
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << colors[s % 6] << "\">"
       << series_names[s] << "</text>\n";
  }
  os << "</svg>\n";
  write_file(path, os.str());
}

}  // namespace scpsfm
