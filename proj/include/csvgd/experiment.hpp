#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csvgd/constraints.hpp"
#include "csvgd/errors.hpp"
#include "csvgd/evaluation.hpp"
#include "csvgd/solvers.hpp"

namespace csvgd {

/// Config file rejected by the schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Optional sweep block; each list replaces the single value of the base config.
struct MatrixBlock {
  std::vector<Method> methods;
  std::vector<FormulationKind> formulations;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  std::string problem = "toy2d";
  /// Problem-specific parameters; validated against the problem's key list.
  nlohmann::json problem_params = nlohmann::json::object();
  Method method = Method::Q;
  FormulationKind formulation = FormulationKind::AugmentedLagrangian;
  SoftFormulation formulation_params;
  SolveConfig solver;
  std::filesystem::path output_dir = "out";
  /// Ground-truth sample count for the EMD column (problems that support it).
  long emd_samples = 500;
  bool emd_enabled = true;
  std::optional<MatrixBlock> matrix;
};

/// Tuned defaults for one of toy2d | trajectory | ik | icp.
ExperimentConfig default_config(const std::string& problem);

/// Overlays a JSON document on `cfg`. Unknown keys and bad values throw ConfigError.
void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& doc);

/// Reads a config file; the "problem" key (if any) selects the defaults first.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::optional<std::string>& problem_hint = std::nullopt);

Problem build_problem(const ExperimentConfig& cfg);

/// Formulation with the kind and parameters of the config.
SoftFormulation build_formulation(const ExperimentConfig& cfg, FormulationKind kind);

std::string trial_id(const ExperimentConfig& cfg, Method method, FormulationKind kind,
                     std::uint64_t seed);

struct RunOptions {
  /// Record measured wall time in metrics.json; off keeps outputs byte-identical.
  bool record_wall_time = false;
};

/// Runs the single trial or every matrix cell and writes
/// <out>/<trial_id>/{particles.csv, metrics.json, scatter.svg}, plus
/// <out>/metrics.csv for matrix runs.
std::vector<MetricsRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

std::string particles_csv(const ParticleSet& X);
nlohmann::ordered_json metrics_json(const MetricsRecord& rec, bool record_wall_time);
std::string scatter_svg(const ExperimentConfig& cfg, const ParticleSet& X,
                        const std::string& title);
std::string metrics_csv(const std::vector<MetricsRecord>& records,
                        const std::vector<std::string>& trial_ids, bool record_wall_time);

struct GradCheckLine {
  std::string problem;
  std::string function;
  double max_rel_error = 0.0;
};

/// Finite-difference check of every objective and constraint gradient of the
/// four benchmark problems at `points` random points each.
std::vector<GradCheckLine> gradcheck_all(int points = 20, std::uint64_t seed = 0);

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace csvgd
