#include "csvgd/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "csvgd/problems.hpp"
#include "csvgd/svg.hpp"

namespace csvgd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + key + "' in " + where);
  }
}

double get_positive(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
  const double x = v.get<double>();
  if (!(x > 0.0)) throw ConfigError("'" + key + "' in " + where + " must be positive");
  return x;
}

Eigen::VectorXd get_vector(const json& obj, const std::string& key, Eigen::Index size,
                           const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != size) {
    throw ConfigError("'" + key + "' in " + where + " must be an array of " +
                      std::to_string(size) + " numbers");
  }
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) {
      throw ConfigError("'" + key + "' in " + where + " must contain numbers");
    }
    out[i] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

const std::set<std::string>& problem_keys(const std::string& problem) {
  static const std::set<std::string> toy{"alpha", "bound"};
  static const std::set<std::string> traj{"alpha", "waypoints", "start", "goal", "obstacles",
                                          "init_noise"};
  static const std::set<std::string> ik{"alpha", "weights", "target_q", "z_target", "init_spread"};
  static const std::set<std::string> icp{"alpha", "subset_size", "d_max", "table_radius",
                                         "scene_seed", "init_height", "cylinder_radius",
                                         "cylinder_height", "center", "weights"};
  if (problem == "toy2d") return toy;
  if (problem == "trajectory") return traj;
  if (problem == "ik") return ik;
  if (problem == "icp") return icp;
  throw ConfigError("unknown problem '" + problem + "'");
}

ThetaMode theta_mode_from_string(const std::string& s) {
  if (s == "per-particle") return ThetaMode::PerParticle;
  if (s == "shared") return ThetaMode::Shared;
  throw ConfigError("unknown theta_mode '" + s + "'");
}

Mapping mapping_from_string(const std::string& s) {
  if (s == "none") return Mapping::None;
  if (s == "tanh") return Mapping::Tanh;
  if (s == "sin") return Mapping::Sin;
  throw ConfigError("unknown mapping '" + s + "'");
}

void apply_solver_json(SolveConfig& s, const json& doc) {
  const std::string where = "solver";
  reject_unknown(doc, {"n_particles", "inner_tol", "outer_tol", "max_inner", "max_outer",
                       "max_total_steps", "eps0", "beta", "max_backtracks", "min_eps",
                       "line_search", "theta_mode", "mapping"},
                 where);
  if (doc.contains("n_particles")) s.n_particles = get_as<int>(doc, "n_particles", where);
  if (doc.contains("inner_tol")) s.inner_tol = get_positive(doc, "inner_tol", where);
  if (doc.contains("outer_tol")) s.outer_tol = get_positive(doc, "outer_tol", where);
  if (doc.contains("max_inner")) s.max_inner = get_as<int>(doc, "max_inner", where);
  if (doc.contains("max_outer")) s.max_outer = get_as<int>(doc, "max_outer", where);
  if (doc.contains("max_total_steps")) s.max_total_steps = get_as<long>(doc, "max_total_steps", where);
  if (doc.contains("eps0")) s.step.eps0 = get_positive(doc, "eps0", where);
  if (doc.contains("beta")) s.step.beta = get_positive(doc, "beta", where);
  if (doc.contains("max_backtracks")) s.step.max_backtracks = get_as<int>(doc, "max_backtracks", where);
  if (doc.contains("min_eps")) s.step.min_eps = get_positive(doc, "min_eps", where);
  if (doc.contains("line_search")) s.step.line_search = get_as<bool>(doc, "line_search", where);
  if (doc.contains("theta_mode")) {
    s.theta_mode = theta_mode_from_string(get_as<std::string>(doc, "theta_mode", where));
  }
  if (doc.contains("mapping")) s.mapping = mapping_from_string(get_as<std::string>(doc, "mapping", where));
}

void apply_formulation_json(SoftFormulation& F, const json& doc) {
  const std::string where = "formulation_params";
  reject_unknown(doc, {"c", "d", "mu", "delta", "growth", "shrink"}, where);
  if (doc.contains("c")) F.c = get_positive(doc, "c", where);
  if (doc.contains("d")) F.d_w = get_positive(doc, "d", where);
  if (doc.contains("mu")) F.mu = get_positive(doc, "mu", where);
  if (doc.contains("delta")) F.delta = get_positive(doc, "delta", where);
  if (doc.contains("growth")) F.growth = get_positive(doc, "growth", where);
  if (doc.contains("shrink")) F.shrink = get_positive(doc, "shrink", where);
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
}

double param_or(const json& params, const std::string& key, double fallback) {
  return params.contains(key) ? params.at(key).get<double>() : fallback;
}

}  // namespace

ExperimentConfig default_config(const std::string& problem) {
  ExperimentConfig cfg;
  cfg.problem = problem;
  problem_keys(problem);
  SolveConfig& s = cfg.solver;
  SoftFormulation& F = cfg.formulation_params;
  if (problem == "toy2d") {
    cfg.problem_params = {{"alpha", 1.0}};
    s.n_particles = 50;
    s.inner_tol = 1e-4;
    s.outer_tol = 1e-3;
    s.max_inner = 500;
    s.max_outer = 20;
    s.step.eps0 = 0.05;
    s.step.line_search = true;
    F.c = 1.0;
    F.d_w = 1.0;
    F.mu = 1.0;
    F.delta = 0.1;
  } else if (problem == "trajectory") {
    cfg.problem_params = json::object();
    s.n_particles = 20;
    s.inner_tol = 1e-4;
    s.outer_tol = 1e-4;
    s.max_inner = 2000;
    s.max_outer = 50;
    s.step.eps0 = 1e-3;
    s.step.min_eps = 1e-5;
    F.c = 1.0;
    F.d_w = 10.0;
    F.growth = 2.0;
    F.mu = 1e-3;
    F.delta = 0.01;
    cfg.emd_enabled = false;
  } else if (problem == "ik") {
    cfg.problem_params = json::object();
    s.n_particles = 50;
    s.inner_tol = 1e-5;
    s.outer_tol = 1e-3;
    s.max_inner = 1000;
    s.max_outer = 20;
    s.step.eps0 = 0.01;
    F.c = 1.0;
    F.d_w = 1.0;
    cfg.emd_enabled = false;
  } else if (problem == "icp") {
    cfg.problem_params = json::object();
    cfg.formulation = FormulationKind::QuadraticPenalty;
    s.n_particles = 100;
    s.inner_tol = 1e-6;
    s.outer_tol = 1e-6;
    s.max_inner = 300;
    s.max_outer = 35;
    s.step.eps0 = 0.01;
    F.c = 1.0;
    F.d_w = 1.0;
    cfg.emd_enabled = false;
  }
  return cfg;
}

void apply_config_json(ExperimentConfig& cfg, const json& doc) {
  reject_unknown(doc, {"problem", "problem_params", "method", "formulation", "formulation_params",
                       "solver", "seed", "output_dir", "emd", "matrix"},
                 "config");
  if (doc.contains("problem")) {
    const std::string problem = get_as<std::string>(doc, "problem", "config");
    if (problem != cfg.problem) {
      ExperimentConfig fresh = default_config(problem);
      fresh.output_dir = cfg.output_dir;
      cfg = fresh;
    }
  }
  if (doc.contains("problem_params")) {
    const json& params = doc.at("problem_params");
    reject_unknown(params, problem_keys(cfg.problem), "problem_params");
    for (const auto& [key, value] : params.items()) cfg.problem_params[key] = value;
  }
  try {
    if (doc.contains("method")) cfg.method = method_from_string(get_as<std::string>(doc, "method", "config"));
    if (doc.contains("formulation")) {
      cfg.formulation = formulation_from_string(get_as<std::string>(doc, "formulation", "config"));
    }
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (doc.contains("formulation_params")) apply_formulation_json(cfg.formulation_params, doc.at("formulation_params"));
  if (doc.contains("solver")) apply_solver_json(cfg.solver, doc.at("solver"));
  if (doc.contains("seed")) cfg.solver.seed = get_as<std::uint64_t>(doc, "seed", "config");
  if (doc.contains("output_dir")) cfg.output_dir = get_as<std::string>(doc, "output_dir", "config");
  if (doc.contains("emd")) {
    const json& e = doc.at("emd");
    reject_unknown(e, {"enabled", "samples"}, "emd");
    if (e.contains("enabled")) cfg.emd_enabled = get_as<bool>(e, "enabled", "emd");
    if (e.contains("samples")) cfg.emd_samples = get_as<long>(e, "samples", "emd");
    if (cfg.emd_samples < 1) throw ConfigError("emd.samples must be positive");
  }
  if (doc.contains("matrix")) {
    const json& m = doc.at("matrix");
    reject_unknown(m, {"methods", "formulations", "seeds"}, "matrix");
    MatrixBlock block;
    try {
      for (const auto& v : m.value("methods", json::array())) {
        block.methods.push_back(method_from_string(v.get<std::string>()));
      }
      for (const auto& v : m.value("formulations", json::array())) {
        block.formulations.push_back(formulation_from_string(v.get<std::string>()));
      }
      for (const auto& v : m.value("seeds", json::array())) block.seeds.push_back(v.get<std::uint64_t>());
    } catch (const json::exception&) {
      throw ConfigError("matrix lists must hold strings (methods, formulations) and integers (seeds)");
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
    cfg.matrix = block;
  }
  try {
    cfg.solver.validate();
    build_formulation(cfg, cfg.formulation).validate();
    (void)build_problem(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad problem parameter: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_config(const fs::path& path, const std::optional<std::string>& problem_hint) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  std::string problem = problem_hint.value_or("toy2d");
  if (doc.contains("problem") && doc.at("problem").is_string()) {
    const std::string named = doc.at("problem").get<std::string>();
    if (problem_hint && named != *problem_hint) {
      throw ConfigError("config names problem '" + named + "' but the subcommand is '" +
                        *problem_hint + "'");
    }
    problem = named;
  }
  ExperimentConfig cfg = default_config(problem);
  apply_config_json(cfg, doc);
  return cfg;
}

Problem build_problem(const ExperimentConfig& cfg) {
  const json& p = cfg.problem_params;
  if (cfg.problem == "toy2d") {
    return toy2d_problem(param_or(p, "alpha", 1.0), param_or(p, "bound", 2.0));
  }
  if (cfg.problem == "trajectory") {
    TrajectorySpec spec = default_trajectory_spec();
    spec.alpha = param_or(p, "alpha", spec.alpha);
    spec.init_noise = param_or(p, "init_noise", spec.init_noise);
    if (p.contains("waypoints")) spec.waypoints = p.at("waypoints").get<int>();
    if (p.contains("start")) spec.start = get_vector(p, "start", 2, "problem_params");
    if (p.contains("goal")) spec.goal = get_vector(p, "goal", 2, "problem_params");
    if (p.contains("obstacles")) {
      spec.obstacles.clear();
      for (const json& o : p.at("obstacles")) {
        if (!o.is_array() || o.size() != 3) throw ConfigError("obstacles are [x, y, radius] triples");
        spec.obstacles.push_back({{o[0].get<double>(), o[1].get<double>()}, o[2].get<double>()});
      }
    }
    return trajectory_problem(spec);
  }
  if (cfg.problem == "ik") {
    IkSpec spec = default_ik_spec();
    spec.alpha = param_or(p, "alpha", spec.alpha);
    if (p.contains("weights")) spec.weights = get_vector(p, "weights", 6, "problem_params");
    if (p.contains("target_q")) {
      spec.target = fk(spec.chain, get_vector(p, "target_q", spec.chain.size(), "problem_params"));
      spec.z_target = spec.target.t.z();
    }
    spec.z_target = param_or(p, "z_target", spec.z_target);
    spec.init_spread = param_or(p, "init_spread", spec.init_spread);
    return ik_problem(spec);
  }
  if (cfg.problem == "icp") {
    CylinderSceneSpec scene;
    scene.table_radius = param_or(p, "table_radius", scene.table_radius);
    scene.cylinder_radius = param_or(p, "cylinder_radius", scene.cylinder_radius);
    scene.cylinder_height = param_or(p, "cylinder_height", scene.cylinder_height);
    if (p.contains("center")) scene.center = get_vector(p, "center", 2, "problem_params");
    if (p.contains("scene_seed")) scene.seed = p.at("scene_seed").get<std::uint64_t>();
    IcpSpec spec;
    spec.scene = make_cylinder_scene(scene);
    spec.alpha = param_or(p, "alpha", spec.alpha);
    spec.d_max = param_or(p, "d_max", spec.d_max);
    spec.init_height = param_or(p, "init_height", spec.init_height);
    if (p.contains("subset_size")) spec.subset_size = p.at("subset_size").get<int>();
    spec.seed = cfg.solver.seed;
    Problem P = icp_problem(spec);
    if (p.contains("weights")) P.se3_weights = get_vector(p, "weights", 6, "problem_params");
    return P;
  }
  throw ConfigError("unknown problem '" + cfg.problem + "'");
}

SoftFormulation build_formulation(const ExperimentConfig& cfg, FormulationKind kind) {
  SoftFormulation F = cfg.formulation_params;
  F.kind = kind;
  F.lambda.resize(0);
  F.gamma.resize(0);
  return F;
}

std::string trial_id(const ExperimentConfig& cfg, Method method, FormulationKind kind,
                     std::uint64_t seed) {
  return cfg.problem + "_" + to_string(method) + "_" + to_string(kind) + "_s" + std::to_string(seed);
}

std::string particles_csv(const ParticleSet& X) {
  std::string out = "particle_id";
  for (Eigen::Index k = 0; k < X.dim(); ++k) out += ",dim_" + std::to_string(k);
  out += '\n';
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index k = 0; k < X.dim(); ++k) out += "," + fmt_full(X.positions()(i, k));
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json metrics_json(const MetricsRecord& rec, bool record_wall_time) {
  nlohmann::ordered_json j;
  j["emd"] = rec.emd ? nlohmann::ordered_json(*rec.emd) : nlohmann::ordered_json(nullptr);
  j["total_gradient_steps"] = rec.total_gradient_steps;
  j["outer_iterations"] = rec.outer_iterations;
  j["max_abs_h"] = rec.max_abs_h;
  j["max_pos_g"] = rec.max_pos_g;
  j["converged"] = rec.converged;
  j["seed"] = rec.seed;
  j["method"] = to_string(rec.method);
  j["formulation"] = to_string(rec.formulation);
  j["wall_time_s"] = record_wall_time ? rec.wall_time : 0.0;
  return j;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records,
                        const std::vector<std::string>& trial_ids, bool record_wall_time) {
  std::string out =
      "trial_id,problem,method,formulation,seed,n_particles,emd,total_gradient_steps,"
      "outer_iterations,max_abs_h,max_pos_g,converged,wall_time_s\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const MetricsRecord& r = records[i];
    out += trial_ids[i] + "," + r.problem + "," + to_string(r.method) + "," +
           to_string(r.formulation) + "," + std::to_string(r.seed) + "," +
           std::to_string(r.n_particles) + "," + (r.emd ? fmt_full(*r.emd) : std::string()) + "," +
           std::to_string(r.total_gradient_steps) + "," + std::to_string(r.outer_iterations) + "," +
           fmt_full(r.max_abs_h) + "," + fmt_full(r.max_pos_g) + "," +
           (r.converged ? "true" : "false") + "," +
           fmt_full(record_wall_time ? r.wall_time : 0.0) + "\n";
  }
  return out;
}

std::string scatter_svg(const ExperimentConfig& cfg, const ParticleSet& X, const std::string& title) {
  const Eigen::MatrixXd& P = X.positions();
  if (cfg.problem == "toy2d") {
    const double bound = param_or(cfg.problem_params, "bound", 2.0);
    SvgPlot plot(-bound - 0.2, bound + 0.2, -bound - 0.2, bound + 0.2);
    plot.set_title(title);
    plot.add_rect({-bound, -bound}, {bound, bound}, "#888888");
    plot.add_circle({0.0, 0.0}, std::sqrt(2.0), "#d62728");
    for (Eigen::Index i = 0; i < P.rows(); ++i) plot.add_point({P(i, 0), P(i, 1)});
    return plot.render();
  }
  if (cfg.problem == "trajectory") {
    TrajectorySpec spec = default_trajectory_spec();
    const json& p = cfg.problem_params;
    if (p.contains("waypoints")) spec.waypoints = p.at("waypoints").get<int>();
    if (p.contains("start")) spec.start = get_vector(p, "start", 2, "problem_params");
    if (p.contains("goal")) spec.goal = get_vector(p, "goal", 2, "problem_params");
    if (p.contains("obstacles")) {
      spec.obstacles.clear();
      for (const json& o : p.at("obstacles")) {
        spec.obstacles.push_back({{o[0].get<double>(), o[1].get<double>()}, o[2].get<double>()});
      }
    }
    Eigen::Vector2d lo = spec.start.cwiseMin(spec.goal);
    Eigen::Vector2d hi = spec.start.cwiseMax(spec.goal);
    std::vector<std::vector<Eigen::Vector2d>> lines;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      lines.push_back(trajectory_polyline(spec, P.row(i).transpose()));
      for (const Eigen::Vector2d& q : lines.back()) {
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
      }
    }
    const double pad = 0.1 * std::max(hi.x() - lo.x(), hi.y() - lo.y()) + 0.05;
    SvgPlot plot(lo.x() - pad, hi.x() + pad, lo.y() - pad, hi.y() + pad);
    plot.set_title(title);
    for (const CircleObstacle& o : spec.obstacles) plot.add_circle(o.center, o.radius, "#d62728", "#f4b6b6");
    for (const auto& line : lines) plot.add_polyline(line, "#1f77b4");
    plot.add_point(spec.start, 4.0, "#2ca02c");
    plot.add_point(spec.goal, 4.0, "#2ca02c");
    return plot.render();
  }
  Eigen::Vector2d lo(P.col(0).minCoeff(), P.col(1).minCoeff());
  Eigen::Vector2d hi(P.col(0).maxCoeff(), P.col(1).maxCoeff());
  const double pad = 0.1 * std::max(hi.x() - lo.x(), hi.y() - lo.y()) + 0.05;
  SvgPlot plot(lo.x() - pad, hi.x() + pad, lo.y() - pad, hi.y() + pad);
  plot.set_title(title);
  if (cfg.problem == "icp") {
    const double r = param_or(cfg.problem_params, "table_radius", CylinderSceneSpec{}.table_radius);
    plot = SvgPlot(-r - 0.05, r + 0.05, -r - 0.05, r + 0.05);
    plot.set_title(title);
    plot.add_circle({0.0, 0.0}, r, "#1f77b4", "#dbe9f6");
  }
  for (Eigen::Index i = 0; i < P.rows(); ++i) plot.add_point({P(i, 0), P(i, 1)});
  return plot.render();
}

std::vector<MetricsRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  std::vector<Method> methods{cfg.method};
  std::vector<FormulationKind> kinds{cfg.formulation};
  std::vector<std::uint64_t> seeds{cfg.solver.seed};
  if (cfg.matrix) {
    if (!cfg.matrix->methods.empty()) methods = cfg.matrix->methods;
    if (!cfg.matrix->formulations.empty()) kinds = cfg.matrix->formulations;
    if (!cfg.matrix->seeds.empty()) seeds = cfg.matrix->seeds;
  }

  std::optional<Eigen::MatrixXd> truth;
  if (cfg.emd_enabled) {
    const Problem P = build_problem(cfg);
    if (P.constraints.equalities.empty() && P.constraints.lo.allFinite() &&
        P.constraints.hi.allFinite()) {
      truth = rejection_sample(P, cfg.emd_samples, cfg.solver.seed + 0x5eedULL).samples;
    }
  }

  std::vector<TrialSpec> trials;
  std::vector<std::string> ids;
  for (Method method : methods) {
    for (FormulationKind kind : kinds) {
      for (std::uint64_t seed : seeds) {
        ExperimentConfig cell = cfg;
        cell.solver.seed = seed;
        TrialSpec t;
        t.problem_name = cfg.problem;
        t.make_problem = [cell] { return build_problem(cell); };
        t.method = method;
        t.formulation = build_formulation(cfg, kind);
        t.config = cell.solver;
        t.ground_truth = truth;
        trials.push_back(std::move(t));
        ids.push_back(trial_id(cfg, method, kind, seed));
      }
    }
  }

  std::vector<MetricsRecord> records(trials.size());
  fs::create_directories(cfg.output_dir);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    SolveReport report;
    records[i] = run_trial(trials[i], &report);
    const fs::path dir = cfg.output_dir / ids[i];
    fs::create_directories(dir);
    write_file(dir / "particles.csv", particles_csv(report.particles));
    write_file(dir / "metrics.json", metrics_json(records[i], opts.record_wall_time).dump(2) + "\n");
    write_file(dir / "scatter.svg", scatter_svg(cfg, report.particles, ids[i]));
  }
  if (cfg.matrix) {
    write_file(cfg.output_dir / "metrics.csv", metrics_csv(records, ids, opts.record_wall_time));
  }
  return records;
}

std::vector<GradCheckLine> gradcheck_all(int points, std::uint64_t seed) {
  std::vector<GradCheckLine> lines;
  std::mt19937_64 rng(seed);
  const auto check_problem = [&](const Problem& P, const std::vector<Eigen::VectorXd>& xs) {
    lines.push_back({P.name, "f", grad_check(P.f, P.grad_f, xs)});
    for (const ScalarFunction& h : P.constraints.equalities) {
      lines.push_back({P.name, h.name, grad_check(h.value, h.gradient, xs)});
    }
    for (const ScalarFunction& g : P.constraints.inequalities) {
      lines.push_back({P.name, g.name, grad_check(g.value, g.gradient, xs)});
    }
  };
  const auto sample = [&](const Problem& P) {
    std::vector<Eigen::VectorXd> xs;
    for (int i = 0; i < points; ++i) xs.push_back(P.init_sampler(rng));
    return xs;
  };

  const Problem toy = toy2d_problem(1.0);
  check_problem(toy, sample(toy));
  TrajectorySpec traj_spec = default_trajectory_spec();
  traj_spec.init_noise = 0.2;
  const Problem traj = trajectory_problem(traj_spec);
  check_problem(traj, sample(traj));
  const Problem ik = ik_problem(default_ik_spec());
  check_problem(ik, sample(ik));

  IcpSpec icp_spec;
  icp_spec.scene = make_cylinder_scene({});
  std::shared_ptr<IcpCost> cost;
  const Problem icp = icp_problem(icp_spec, &cost);
  // keep only poses where the truncated nearest-neighbour cost is smooth
  std::vector<Eigen::VectorXd> xs;
  while (static_cast<int>(xs.size()) < points) {
    Eigen::VectorXd x = icp.init_sampler(rng);
    x.head<2>() = icp_spec.scene.true_pose.head<2>() + 0.05 * x.head<2>();
    if (cost->smooth_at(x, 1e-4)) xs.push_back(x);
  }
  check_problem(icp, xs);
  return lines;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constrained Stein variational gradient descent experiments"};
  app.require_subcommand(1, 1);

  std::optional<std::uint64_t> seed;
  std::optional<int> particles;
  std::optional<std::string> method;
  std::optional<std::string> formulation;
  std::optional<std::string> out_dir;
  std::optional<std::string> config_path;
  bool timing = false;

  const auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--particles", particles, "Number of particles");
    sub->add_option("--method", method, "q | p | unconstrained");
    sub->add_option("--formulation", formulation,
                    "auglag | quadpenalty | logbarrier | relaxedlogbarrier");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_flag("--timing", timing, "Record measured wall time in metrics");
  };
  for (const char* name : {"toy2d", "trajectory", "ik", "icp"}) {
    add_run_flags(app.add_subcommand(name, std::string("Run the ") + name + " experiment"));
  }
  CLI::App* matrix = app.add_subcommand("matrix", "Run a problems x methods x formulations x seeds sweep");
  add_run_flags(matrix);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  int gc_points = 20;
  gradcheck->add_option("--points", gc_points, "Random points per function");
  gradcheck->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  if (gradcheck->parsed()) {
    const std::vector<GradCheckLine> lines = gradcheck_all(gc_points, seed.value_or(0));
    bool ok = true;
    for (const GradCheckLine& l : lines) {
      const bool pass = l.max_rel_error < 1e-4;
      ok = ok && pass;
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-10s %-28s %.3e %s\n", l.problem.c_str(), l.function.c_str(),
                    l.max_rel_error, pass ? "ok" : "FAIL");
      out << buf;
    }
    return ok ? 0 : 1;
  }

  ExperimentConfig cfg;
  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    const std::optional<std::string> hint =
        sub == "matrix" ? std::nullopt : std::optional<std::string>(sub);
    if (config_path) {
      cfg = load_config(*config_path, hint);
    } else {
      cfg = default_config(hint.value_or("trajectory"));
      if (sub == "matrix") {
        cfg.matrix = MatrixBlock{{Method::Q, Method::P},
                                 {FormulationKind::AugmentedLagrangian,
                                  FormulationKind::QuadraticPenalty},
                                 {0, 1, 2}};
      }
    }
    if (sub == "matrix" && !cfg.matrix) cfg.matrix = MatrixBlock{};
    if (seed) cfg.solver.seed = *seed;
    if (particles) cfg.solver.n_particles = *particles;
    if (method) cfg.method = method_from_string(*method);
    if (formulation) cfg.formulation = formulation_from_string(*formulation);
    if (out_dir) cfg.output_dir = *out_dir;
    cfg.solver.validate();
  } catch (const Error& e) {
    err << "invalid config: " << e.what() << '\n';
    return 1;
  }

  try {
    const std::vector<MetricsRecord> records = run_experiment(cfg, {timing});
    for (const MetricsRecord& r : records) {
      out << to_string(r.method) << ' ' << to_string(r.formulation) << " seed=" << r.seed
          << " steps=" << r.total_gradient_steps << " converged=" << (r.converged ? "yes" : "no");
      if (r.emd) out << " emd=" << *r.emd;
      out << '\n';
    }
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace csvgd
