#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nlhelm/assembly.hpp"
#include "nlhelm/grid.hpp"
#include "nlhelm/kernel.hpp"
#include "nlhelm/solver.hpp"
#include "nlhelm/source.hpp"
#include "nlhelm/stretch.hpp"

namespace nlhelm {

/// Evaluates arithmetic over complex numbers: + - * / ^, parentheses,
/// implicit multiplication ("40(1+i)", "2pi"), and the names pi, i and any
/// entry of `vars`.
cplx evaluate_expression(const std::string& text, const std::map<std::string, cplx>& vars = {});

/// Flat `key = value` text with `#` comments, keys kept in file order.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& file);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string text(const std::string& key, const std::string& fallback) const;
  double real(const std::string& key, double fallback) const;
  cplx complex(const std::string& key, cplx fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> real_list(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  /// Keys that were never read; typos show up here.
  std::vector<std::string> unused() const;

  nlohmann::json to_json() const;
  std::string canonical() const;

 private:
  std::map<std::string, cplx> variables() const;

  std::vector<std::pair<std::string, std::string>> order_;
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

enum class ReferenceMode { Analytic, Oversolve };

struct ExperimentConfig {
  std::string name = "experiment";
  int dimension = 1;
  KernelSpec kernel;
  double k = 1.0;
  PmlStyle pml_style = PmlStyle::Cartesian;
  cplx z{0.0, 1.0};
  double d_pml = 1.0;
  DomainShape shape = DomainShape::Square;  // 2D only
  double l = 1.0;
  double delta_b = 0.0;  // 0: kernel horizon
  std::vector<double> h_list;
  Source source;
  SolverOptions solver;
  SolverOptions reference_solver;  // oversolve reference; method may differ
  AssemblyOptions assembly;
  ReferenceMode reference = ReferenceMode::Analytic;
  int refinement = 4;
  double enlargement = 2.0;
  bool write_fields = true;
  KeyValueConfig raw;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
  double boundary_width() const { return delta_b > 0.0 ? delta_b : kernel.horizon(); }
  PmlSetup pml(double l_inner, double d) const;
};

ExperimentConfig experiment_from(const KeyValueConfig& kv);
ExperimentConfig load_experiment(const std::filesystem::path& file);

/// Nodal field on a 1D or 2D grid.
struct SolutionField {
  int dimension = 1;
  double h = 0.0;
  std::vector<Point2> positions;
  std::vector<NodeClass> classes;
  std::vector<std::array<int, 2>> lattice;
  Eigen::VectorXcd values;
};

SolutionField make_field(const Grid1D& grid, const Eigen::VectorXcd& values);
SolutionField make_field(const Grid2D& grid, const Eigen::VectorXcd& values);

/// Trapezoidal L2 norm of u - ref over Interior nodes: tensor trapezoid on
/// intervals and squares, plain h^2 lattice weights on disks.
double l2_error(const SolutionField& u, const Eigen::VectorXcd& ref, DomainShape shape = DomainShape::Square);

/// order_i = log2(e_{i-1} / e_i); the first entry has no order.
std::vector<std::optional<double>> convergence_orders(const std::vector<std::pair<double, double>>& errors);

struct SweepRow {
  double h = 0.0;
  bool ok = false;
  std::string message;
  double error = 0.0;
  std::optional<double> order;
  std::size_t unknowns = 0;
  std::size_t nonzeros = 0;
  std::size_t distinct_stencils = 0;
  double assemble_seconds = 0.0;
  SolveReport report;
  SolutionField field;
};

struct ReferenceInfo {
  std::string mode;
  double h = 0.0;
  double l = 0.0;
  double d_pml = 0.0;
  std::size_t unknowns = 0;
  double seconds = 0.0;
  SolveReport report;
};

struct ExperimentResult {
  std::vector<SweepRow> rows;
  ReferenceInfo reference;
  double seconds = 0.0;
  bool all_ok() const;
};

/// Assembles and solves for every h, compares with the reference and fills
/// errors and orders. A failing h is recorded and the sweep continues;
/// a failing reference marks every row failed.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// errors.csv, meta.json and fields/*.csv under `dir`.
void write_results(const ExperimentConfig& cfg, const ExperimentResult& res,
                   const std::filesystem::path& dir);

/// Convergence table rendered from errors.csv.
std::string render_table(const std::filesystem::path& dir);

/// kappa-weighted average u^a(x~_n) of a 1D PML field at the given grid
/// nodes. The average is taken along the stretched contour y -> x~(y), which
/// turns it into an integral of field * alpha * kappa(x~(y) - x~_n) over the
/// nodes; a fourth-order Gregory rule runs on the pieces between the kinks at
/// +-l, +-(l + d_pml) and x_n (trapezoid on pieces shorter than six cells).
std::vector<cplx> kappa_average(const KernelSpec& kernel, cplx k_tilde, const PmlSetup& pml,
                                const Grid1D& grid, const Eigen::VectorXcd& field,
                                const std::vector<std::size_t>& nodes);

struct DecayCheckRow {
  double x = 0.0;
  double eta = 0.0;
  cplx averaged;        // kappa average of the numerical field
  cplx exact_averaged;  // integral G_{x~}(y) f(y) dy
  double bound = 0.0;   // average-solution bound
  double ratio() const { return std::abs(averaged) / bound; }
};

/// Solves a 1D exponential-kernel configuration at mesh size h and compares
/// the kappa-averaged field with the decay bound at every PML node with
/// |x| >= l + h.
std::vector<DecayCheckRow> decay_bound_check(const ExperimentConfig& cfg, double h);

/// Path of the field CSV written for mesh size h.
std::filesystem::path field_file(const std::filesystem::path& dir, double h);

}  // namespace nlhelm
