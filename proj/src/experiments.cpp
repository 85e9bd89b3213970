#include "nlhelm/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nlhelm/analytic.hpp"

namespace nlhelm {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- expressions

namespace {

class ExpressionParser {
 public:
  ExpressionParser(const std::string& text, const std::map<std::string, cplx>& vars)
      : s_(text), vars_(vars) {}

  cplx parse() {
    const cplx v = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("cannot evaluate '" + s_ + "': " + why);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool starts_primary() {
    skip();
    if (pos_ >= s_.size()) return false;
    const char c = s_[pos_];
    return c == '(' || std::isalpha(static_cast<unsigned char>(c)) ||
           std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  }

  cplx sum() {
    cplx v = product();
    while (true) {
      if (eat('+')) v += product();
      else if (eat('-')) v -= product();
      else return v;
    }
  }
  cplx product() {
    cplx v = unary();
    while (true) {
      if (eat('*')) v *= unary();
      else if (eat('/')) v /= unary();
      else if (starts_primary()) v *= power();  // implicit multiplication
      else return v;
    }
  }
  cplx unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }
  cplx power() {
    const cplx base = primary();
    if (eat('^')) {
      const cplx e = unary();
      if (base.imag() == 0.0 && e.imag() == 0.0 && base.real() > 0.0)
        return std::pow(base.real(), e.real());
      return std::pow(base, e);
    }
    return base;
  }
  cplx primary() {
    skip();
    if (eat('(')) {
      const cplx v = sum();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t end = pos_;
      while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
        ++end;
      const std::string name = s_.substr(pos_, end - pos_);
      pos_ = end;
      if (name == "pi") return kPi;
      if (name == "i") return {0.0, 1.0};
      if (name == "sqrt") {
        if (!eat('(')) fail("sqrt needs parentheses");
        const cplx v = sum();
        if (!eat(')')) fail("missing ')'");
        return std::sqrt(v);
      }
      const auto it = vars_.find(name);
      if (it == vars_.end()) fail("unknown name '" + name + "'");
      return it->second;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string s_;
  const std::map<std::string, cplx>& vars_;
  std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double real_part(const cplx& v, const std::string& key) {
  if (std::abs(v.imag()) > 1e-14 * std::max(1.0, std::abs(v.real())))
    throw ConfigError(key + " must be real");
  return v.real();
}

}  // namespace

cplx evaluate_expression(const std::string& text, const std::map<std::string, cplx>& vars) {
  return ExpressionParser(text, vars).parse();
}

// ---------------------------------------------------------------- key/value

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    if (cfg.values_.count(key)) throw ConfigError("duplicate key '" + key + "'");
    cfg.set(key, value);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) order_.emplace_back(key, value);
  else
    for (auto& kv : order_)
      if (kv.first == key) kv.second = value;
  values_[key] = value;
}

std::map<std::string, cplx> KeyValueConfig::variables() const {
  std::map<std::string, cplx> vars;
  const auto it = values_.find("k");
  if (it != values_.end()) vars["k"] = evaluate_expression(it->second);
  return vars;
}

std::string KeyValueConfig::text(const std::string& key, const std::string& fallback) const {
  used_[key] = true;
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

cplx KeyValueConfig::complex(const std::string& key, cplx fallback) const {
  used_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return evaluate_expression(it->second, variables());
}

double KeyValueConfig::real(const std::string& key, double fallback) const {
  return real_part(complex(key, fallback), key);
}

int KeyValueConfig::integer(const std::string& key, int fallback) const {
  const double v = real(key, fallback);
  if (v != std::round(v)) throw ConfigError(key + " must be an integer");
  return static_cast<int>(v);
}

bool KeyValueConfig::flag(const std::string& key, bool fallback) const {
  const std::string v = lower(text(key, fallback ? "true" : "false"));
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(key + " must be true or false");
}

std::vector<double> KeyValueConfig::real_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(text(key, ""));
  std::string item;
  const auto vars = variables();
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(real_part(evaluate_expression(item, vars), key));
  }
  return out;
}

std::vector<std::string> KeyValueConfig::unused() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : order_)
    if (!used_.count(key)) out.push_back(key);
  return out;
}

nlohmann::json KeyValueConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : order_) j[key] = value;
  return j;
}

std::string KeyValueConfig::canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

// ---------------------------------------------------------------- config

PmlSetup ExperimentConfig::pml(double l_inner, double d) const {
  PmlSetup setup;
  setup.style = pml_style;
  StretchConfig sc;
  sc.z = z;
  sc.k = k;
  sc.profile.inner_extent = l_inner;
  sc.profile.pml_width = d;
  setup.x1 = sc;
  setup.x2 = sc;
  return setup;
}

ExperimentConfig experiment_from(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.raw = kv;
  cfg.name = kv.text("name", "experiment");
  cfg.dimension = kv.integer("dimension", 1);
  if (cfg.dimension != 1 && cfg.dimension != 2) throw ConfigError("dimension must be 1 or 2");
  cfg.k = kv.real("k", 1.0);

  const std::string family = lower(kv.text("kernel.family", "exponential"));
  if (family == "exponential") {
    cfg.kernel.family = cfg.dimension == 1 ? KernelFamily::Exponential1D : KernelFamily::Exponential2D;
    cfg.kernel.c_gamma = kv.real("kernel.c_gamma", 0.0);
  } else if (family == "piecewise_constant") {
    cfg.kernel.family =
        cfg.dimension == 1 ? KernelFamily::PiecewiseConstant1D : KernelFamily::PiecewiseConstant2D;
    cfg.kernel.delta = kv.real("kernel.delta", 0.0);
    cfg.kernel.smoothed = kv.flag("kernel.smoothed", true);
    cfg.kernel.smoothing_tol = kv.real("kernel.smoothing_tol", 0.01);
    cfg.kernel.smoothing_eps0 = kv.real("kernel.smoothing_eps0", 0.01);
  } else if (family == "fractional") {
    cfg.kernel.family = cfg.dimension == 1 ? KernelFamily::Fractional1D : KernelFamily::Fractional2D;
    cfg.kernel.s_order = kv.real("kernel.s", 0.5);
  } else {
    throw ConfigError("unknown kernel.family '" + family + "'");
  }

  const std::string style = lower(kv.text("pml.style", "cartesian"));
  if (style == "none") cfg.pml_style = PmlStyle::None;
  else if (style == "cartesian") cfg.pml_style = PmlStyle::Cartesian;
  else if (style == "polar") cfg.pml_style = PmlStyle::Polar;
  else throw ConfigError("unknown pml.style '" + style + "'");
  cfg.z = kv.complex("pml.z", {0.0, 1.0});
  if (kv.has("pml.z_re") || kv.has("pml.z_im")) {
    if (kv.has("pml.z")) throw ConfigError("give either pml.z or pml.z_re/pml.z_im");
    cfg.z = {kv.real("pml.z_re", 0.0), kv.real("pml.z_im", 1.0)};
  }
  if (cfg.z == cplx(0.0)) cfg.pml_style = PmlStyle::None;
  if (kv.has("pml.d") && kv.has("pml.d_pml")) throw ConfigError("give either pml.d or pml.d_pml");
  cfg.d_pml = kv.real("pml.d_pml", kv.real("pml.d", 1.0));

  const std::string shape =
      lower(kv.text("domain.shape", cfg.pml_style == PmlStyle::Polar ? "disk" : "square"));
  if (shape == "square" || shape == "interval") cfg.shape = DomainShape::Square;
  else if (shape == "disk") cfg.shape = DomainShape::Disk;
  else throw ConfigError("unknown domain.shape '" + shape + "'");
  if (kv.has("domain.l") && kv.has("domain.l_r")) throw ConfigError("give either domain.l or domain.l_r");
  cfg.l = kv.real("domain.l_r", kv.real("domain.l", 1.0));

  // Fractional default: the diameter of the domain plus layer, so every pair
  // of nodes there interacts.
  double diameter = 2.0 * (cfg.l + cfg.d_pml);
  if (cfg.dimension == 2 && cfg.shape == DomainShape::Square) diameter *= std::sqrt(2.0);
  cfg.kernel.truncation_radius =
      kv.real("kernel.truncation_radius", cfg.kernel.is_fractional() ? diameter : 0.0);
  cfg.h_list = kv.real_list("grid.h");
  cfg.delta_b = kv.real("grid.delta_b", 0.0);

  const std::string source = lower(kv.text("source.type", "gaussian"));
  if (source == "zero") {
    cfg.source = Source::zero();
  } else if (source == "gaussian") {
    // Defaults reproduce k/sqrt(pi) exp(-k^2 x^2).
    cfg.source = Source::gaussian(kv.real("source.amplitude", cfg.k / std::sqrt(kPi)),
                                  kv.real("source.rate", cfg.k));
  } else {
    throw ConfigError("unknown source.type '" + source + "'");
  }

  cfg.solver.method = parse_solver_method(lower(kv.text("solver.method", "auto")));
  cfg.solver.tol = kv.real("solver.tol", 1e-10);
  cfg.solver.max_iters = kv.integer("solver.max_iters", 5000);
  cfg.solver.restart = kv.integer("solver.restart", 50);
  cfg.solver.allow_zero_rhs = true;
  cfg.assembly.threads = kv.integer("assembly.threads", 1);
  cfg.assembly.rel_tol = kv.real("assembly.rel_tol", 1e-10);
  cfg.assembly.tail_correction = kv.flag("assembly.tail_correction", true);

  const std::string mode = lower(kv.text("reference.mode", cfg.dimension == 1 &&
                                                                   cfg.kernel.is_exponential()
                                                               ? "analytic"
                                                               : "oversolve"));
  if (mode == "analytic") cfg.reference = ReferenceMode::Analytic;
  else if (mode == "oversolve") cfg.reference = ReferenceMode::Oversolve;
  else throw ConfigError("unknown reference.mode '" + mode + "'");
  cfg.reference_solver = cfg.solver;
  cfg.reference_solver.method =
      parse_solver_method(lower(kv.text("reference.solver.method", std::string(to_string(cfg.solver.method)))));
  cfg.reference_solver.tol = kv.real("reference.solver.tol", cfg.solver.tol);
  cfg.refinement = kv.integer("reference.refinement", 4);
  cfg.enlargement = kv.real("reference.enlargement", 2.0);
  cfg.write_fields = kv.flag("output.fields", true);

  const auto unused = kv.unused();
  if (!unused.empty()) throw ConfigError("unknown config key '" + unused.front() + "'");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment(const fs::path& file) {
  return experiment_from(KeyValueConfig::load(file));
}

void ExperimentConfig::validate() const {
  try {
    kernel.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (kernel.dimension() != dimension) throw ConfigError("kernel dimension mismatch");
  if (!(k > 0.0)) throw ConfigError("k must be positive");
  if (!std::isfinite(kernel.horizon())) throw ConfigError("kernel needs a finite truncation radius");
  if (pml_style != PmlStyle::None) pml(l, d_pml).x1.validate();
  if (dimension == 1 && pml_style == PmlStyle::Polar) throw ConfigError("polar PML needs dimension 2");
  if (dimension == 2 && pml_style == PmlStyle::Polar && shape != DomainShape::Disk)
    throw ConfigError("polar PML needs domain.shape = disk");
  if (dimension == 2 && pml_style == PmlStyle::Cartesian && shape != DomainShape::Square)
    throw ConfigError("Cartesian PML needs domain.shape = square");
  if (h_list.empty()) throw ConfigError("grid.h lists no mesh sizes");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    commensurate_cells(l, h_list[i], "domain.l");
    commensurate_cells(d_pml, h_list[i], "pml.d");
    if (i > 0 && std::abs(h_list[i - 1] / h_list[i] - 2.0) > 1e-9)
      throw ConfigError("grid.h must halve from one entry to the next");
  }
  if (boundary_width() < kernel.horizon() * (1.0 - 1e-9))
    throw ConfigError("grid.delta_b is smaller than the kernel horizon");
  if (source.support_radius() > l * (1.0 + 1e-12))
    throw ConfigError("source support exceeds the physical domain");
  if (reference == ReferenceMode::Analytic && (dimension != 1 || !kernel.is_exponential()))
    throw ConfigError("analytic reference needs the 1D exponential kernel");
  if (reference == ReferenceMode::Oversolve) {
    if (refinement < 1) throw ConfigError("reference.refinement must be >= 1");
    if (!(enlargement >= 1.0)) throw ConfigError("reference.enlargement must be >= 1");
    const double h_ref = h_list.back() / refinement;
    commensurate_cells(enlargement * l, h_ref, "enlarged domain.l");
    commensurate_cells(enlargement * d_pml, h_ref, "enlarged pml.d");
  }
}

// ---------------------------------------------------------------- fields and errors

SolutionField make_field(const Grid1D& grid, const Eigen::VectorXcd& values) {
  SolutionField f;
  f.dimension = 1;
  f.h = grid.h;
  f.values = values;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    f.positions.push_back({grid.x(i), 0.0});
    f.classes.push_back(grid.classes[i]);
    f.lattice.push_back({grid.lattice(i), 0});
  }
  return f;
}

SolutionField make_field(const Grid2D& grid, const Eigen::VectorXcd& values) {
  SolutionField f;
  f.dimension = 2;
  f.h = grid.h;
  f.values = values;
  for (const auto& nd : grid.nodes) {
    f.positions.push_back(grid.position(nd));
    f.classes.push_back(nd.cls);
    f.lattice.push_back({nd.n1, nd.n2});
  }
  return f;
}

double l2_error(const SolutionField& u, const Eigen::VectorXcd& ref, DomainShape shape) {
  if (ref.size() != u.values.size()) throw std::invalid_argument("l2_error: grid mismatch");
  int edge = 0;  // largest |n_i| among interior nodes
  for (std::size_t i = 0; i < u.classes.size(); ++i)
    if (u.classes[i] == NodeClass::Interior)
      edge = std::max({edge, std::abs(u.lattice[i][0]), std::abs(u.lattice[i][1])});
  const bool tensor = u.dimension == 1 || shape == DomainShape::Square;
  double sum = 0.0;
  for (std::size_t i = 0; i < u.classes.size(); ++i) {
    if (u.classes[i] != NodeClass::Interior) continue;
    double w = std::pow(u.h, u.dimension);
    if (tensor)
      for (int a = 0; a < u.dimension; ++a)
        if (std::abs(u.lattice[i][a]) == edge) w *= 0.5;
    sum += w * std::norm(u.values[static_cast<Eigen::Index>(i)] - ref[static_cast<Eigen::Index>(i)]);
  }
  return std::sqrt(sum);
}

std::vector<std::optional<double>> convergence_orders(
    const std::vector<std::pair<double, double>>& errors) {
  std::vector<std::optional<double>> out(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i].second > 0.0)) throw std::invalid_argument("convergence_orders: nonpositive error");
    if (i == 0) continue;
    if (!(errors[i].first < errors[i - 1].first))
      throw std::invalid_argument("convergence_orders: h must decrease");
    out[i] = std::log2(errors[i - 1].second / errors[i].second);
  }
  return out;
}

bool ExperimentResult::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
}

// ---------------------------------------------------------------- runner

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Assembles and solves on a grid of mesh size h over [l, d_pml]; returns the
/// nodal field.
template <class Grid>
SolutionField solve_on(const ExperimentConfig& cfg, const Grid& grid, double l, double d,
                       const SolverOptions& solver, SweepRow& row) {
  const auto t0 = std::chrono::steady_clock::now();
  const SparseComplexSystem sys = assemble(cfg.kernel, cfg.pml(l, d), grid, cfg.source, cfg.k, cfg.assembly);
  row.assemble_seconds = seconds_since(t0);
  row.unknowns = sys.size();
  row.nonzeros = static_cast<std::size_t>(sys.matrix.nonZeros());
  row.distinct_stencils = sys.distinct_stencils;
  row.report = solve(sys, solver);
  return make_field(grid, row.report.field);
}

SolutionField solve_at(const ExperimentConfig& cfg, double h, double l, double d,
                       const SolverOptions& solver, SweepRow& row) {
  if (cfg.dimension == 1)
    return solve_on(cfg, build_grid_1d(h, l, d, cfg.boundary_width()), l, d, solver, row);
  return solve_on(cfg, build_grid_2d(h, cfg.shape, l, d, cfg.boundary_width()), l, d, solver, row);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  for (double h : cfg.h_list) {
    SweepRow row;
    row.h = h;
    try {
      row.field = solve_at(cfg, h, cfg.l, cfg.d_pml, cfg.solver, row);
      row.ok = true;
    } catch (const std::exception& e) {
      row.message = e.what();
    }
    res.rows.push_back(std::move(row));
  }

  // Reference values on each row's nodes (only Interior nodes matter).
  std::vector<Eigen::VectorXcd> refs(res.rows.size());
  if (cfg.reference == ReferenceMode::Analytic) {
    res.reference.mode = "analytic";
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t r = 0; r < res.rows.size(); ++r) {
      if (!res.rows[r].ok) continue;
      const SolutionField& f = res.rows[r].field;
      refs[r] = Eigen::VectorXcd::Zero(f.values.size());
      for (std::size_t i = 0; i < f.classes.size(); ++i)
        if (f.classes[i] == NodeClass::Interior)
          refs[r][static_cast<Eigen::Index>(i)] =
              exact_solution_exponential(cfg.source, cfg.k, cfg.kernel.c_gamma, f.positions[i][0]);
    }
    res.reference.seconds = seconds_since(t0);
  } else {
    res.reference.mode = "oversolve";
    res.reference.h = cfg.h_list.back() / cfg.refinement;
    res.reference.l = cfg.enlargement * cfg.l;
    res.reference.d_pml = cfg.enlargement * cfg.d_pml;
    const auto t0 = std::chrono::steady_clock::now();
    SweepRow ref_row;
    std::optional<SolutionField> ref_field;
    std::string failure;
    try {
      ref_field = solve_at(cfg, res.reference.h, res.reference.l, res.reference.d_pml,
                           cfg.reference_solver, ref_row);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    res.reference.seconds = seconds_since(t0);
    res.reference.unknowns = ref_row.unknowns;
    res.reference.report = ref_row.report;
    std::map<std::array<int, 2>, Eigen::Index> ref_index;
    if (ref_field)
      for (std::size_t i = 0; i < ref_field->lattice.size(); ++i)
        ref_index[ref_field->lattice[i]] = static_cast<Eigen::Index>(i);
    for (std::size_t r = 0; r < res.rows.size(); ++r) {
      SweepRow& row = res.rows[r];
      if (!row.ok) continue;
      if (!ref_field) {
        row.ok = false;
        row.message = "reference solve failed: " + failure;
        continue;
      }
      const int ratio = static_cast<int>(std::lround(row.h / res.reference.h));
      refs[r] = Eigen::VectorXcd::Zero(row.field.values.size());
      for (std::size_t i = 0; i < row.field.classes.size(); ++i) {
        if (row.field.classes[i] != NodeClass::Interior) continue;
        const std::array<int, 2> fine{row.field.lattice[i][0] * ratio, row.field.lattice[i][1] * ratio};
        const auto it = ref_index.find(fine);
        if (it == ref_index.end()) throw std::logic_error("reference grid misses a coarse node");
        refs[r][static_cast<Eigen::Index>(i)] = ref_field->values[it->second];
      }
    }
  }

  for (std::size_t r = 0; r < res.rows.size(); ++r)
    if (res.rows[r].ok) res.rows[r].error = l2_error(res.rows[r].field, refs[r], cfg.shape);
  for (std::size_t r = 1; r < res.rows.size(); ++r) {
    const SweepRow& a = res.rows[r - 1];
    SweepRow& b = res.rows[r];
    if (a.ok && b.ok && a.error > 0.0 && b.error > 0.0)
      b.order = convergence_orders({{a.h, a.error}, {b.h, b.error}})[1];
  }
  res.seconds = seconds_since(start);
  return res;
}

// ---------------------------------------------------------------- decay check

namespace {

/// Weights for nodes N0..N1 of spacing h: Gregory end corrections on every
/// piece between consecutive breakpoints.
std::vector<double> piecewise_gregory(int n0, int n1, std::vector<int> breaks, double h) {
  static constexpr double kEnd[3] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};
  breaks.push_back(n0);
  breaks.push_back(n1);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> w(static_cast<std::size_t>(n1 - n0 + 1), 0.0);
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const int a = std::max(breaks[b], n0), e = std::min(breaks[b + 1], n1);
    if (e <= a) continue;
    const bool gregory = e - a >= 6;
    for (int j = a; j <= e; ++j) {
      const int from_end = std::min(j - a, e - j);
      double c = 1.0;
      if (gregory && from_end < 3) c = kEnd[from_end];
      else if (!gregory && from_end == 0) c = 0.5;
      w[static_cast<std::size_t>(j - n0)] += h * c;
    }
  }
  return w;
}

}  // namespace

std::vector<cplx> kappa_average(const KernelSpec& kernel, cplx k_tilde, const PmlSetup& pml,
                                const Grid1D& grid, const Eigen::VectorXcd& field,
                                const std::vector<std::size_t>& nodes) {
  if (static_cast<std::size_t>(field.size()) != grid.size())
    throw std::invalid_argument("kappa_average: field does not match the grid");
  const int outer = grid.m_inner + grid.m_pml;
  std::vector<Stretch1D> maps;
  for (int j = -outer; j <= outer; ++j) maps.push_back(pml.map(j * grid.h));
  std::vector<cplx> out;
  out.reserve(nodes.size());
  for (std::size_t n : nodes) {
    const int ln = grid.lattice(n);
    const cplx xn = pml.map(grid.x(n)).x_tilde;
    const auto w = piecewise_gregory(-outer, outer, {-grid.m_inner, grid.m_inner, ln}, grid.h);
    cplx sum = 0.0;
    for (int j = -outer; j <= outer; ++j) {
      const std::size_t idx = static_cast<std::size_t>(j + outer);
      const cplx u = field[static_cast<Eigen::Index>(*grid.find(j))];
      if (u == cplx(0.0)) continue;
      sum += w[idx] * u * maps[idx].alpha * kappa_weight(kernel, k_tilde, maps[idx].x_tilde - xn);
    }
    out.push_back(sum);
  }
  return out;
}

std::vector<DecayCheckRow> decay_bound_check(const ExperimentConfig& cfg, double h) {
  if (cfg.dimension != 1 || !cfg.kernel.is_exponential())
    throw ConfigError("decay check needs the 1D exponential kernel");
  const Grid1D grid = build_grid_1d(h, cfg.l, cfg.d_pml, cfg.boundary_width());
  const PmlSetup pml = cfg.pml(cfg.l, cfg.d_pml);
  const SparseComplexSystem sys = assemble(cfg.kernel, pml, grid, cfg.source, cfg.k, cfg.assembly);
  const SolveReport rep = solve(sys, cfg.solver);
  const DispersionRoot root = dispersion_root(cfg.kernel, cfg.k);

  DecayBoundParams params;
  params.l = cfg.l;
  params.k = cfg.k;
  params.z1 = cfg.z.real();
  params.z2 = cfg.z.imag();
  params.k_tilde = root.k_tilde;
  params.f_norm = cfg.source.l2_norm_1d(cfg.l);

  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.classes[i] == NodeClass::Pml && std::abs(grid.x(i)) >= cfg.l + h * (1.0 - 1e-9))
      nodes.push_back(i);
  const std::vector<cplx> avg = kappa_average(cfg.kernel, root.k_tilde, pml, grid, rep.field, nodes);

  std::vector<DecayCheckRow> rows;
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    DecayCheckRow r;
    r.x = grid.x(nodes[q]);
    r.eta = eta(pml.x1.profile, r.x);
    r.averaged = avg[q];
    r.exact_averaged = averaged_solution(cfg.source, root.k_tilde, pml.map(r.x).x_tilde);
    r.bound = decay_bound(params, BoundKind::Average, r.x, r.eta);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------- output

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string h_tag(double h) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", h);
  return buf;
}

nlohmann::json report_json(const SolveReport& r) {
  return {{"method", std::string(to_string(r.method))},
          {"relative_residual", r.relative_residual},
          {"iterations", r.iterations},
          {"factor_nonzeros", r.factor_nonzeros},
          {"seconds", r.seconds}};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_field_csv(const SolutionField& f, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << std::setprecision(17);
  out << (f.dimension == 1 ? "x,re,im,class\n" : "x,y,re,im,class\n");
  for (std::size_t i = 0; i < f.positions.size(); ++i) {
    out << f.positions[i][0] << ',';
    if (f.dimension == 2) out << f.positions[i][1] << ',';
    const cplx v = f.values[static_cast<Eigen::Index>(i)];
    out << v.real() << ',' << v.imag() << ',' << to_string(f.classes[i]) << '\n';
  }
}

}  // namespace

fs::path field_file(const fs::path& dir, double h) {
  return dir / "fields" / ("field_h" + h_tag(h) + ".csv");
}

void write_results(const ExperimentConfig& cfg, const ExperimentResult& res, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "errors.csv");
    if (!csv) throw std::runtime_error("cannot write errors.csv in " + dir.string());
    csv << "h,error,order\n";
    for (const SweepRow& r : res.rows) {
      csv << format_number(r.h) << ',';
      csv << (r.ok ? format_number(r.error) : std::string("failed")) << ',';
      if (r.order) csv << format_number(*r.order);
      csv << '\n';
    }
  }
  if (cfg.write_fields) {
    fs::create_directories(dir / "fields");
    for (const SweepRow& r : res.rows)
      if (r.ok) write_field_csv(r.field, field_file(dir, r.h));
  }

  nlohmann::json meta;
  meta["name"] = cfg.name;
  meta["config"] = cfg.raw.to_json();
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(cfg.raw.canonical())));
  meta["config_hash"] = hash;
  meta["kernel"] = {{"family", std::string(to_string(cfg.kernel.family))},
                    {"horizon", cfg.kernel.horizon()},
                    {"boundary_width", cfg.boundary_width()}};
  meta["reference"] = {{"mode", res.reference.mode},
                       {"h", res.reference.h},
                       {"l", res.reference.l},
                       {"d_pml", res.reference.d_pml},
                       {"refinement", cfg.refinement},
                       {"enlargement", cfg.enlargement},
                       {"unknowns", res.reference.unknowns},
                       {"seconds", res.reference.seconds}};
  if (res.reference.mode == "oversolve") meta["reference"]["solver"] = report_json(res.reference.report);
  nlohmann::json rows = nlohmann::json::array();
  for (const SweepRow& r : res.rows) {
    nlohmann::json j = {{"h", r.h}, {"ok", r.ok}};
    if (r.ok) {
      j["error"] = r.error;
      j["unknowns"] = r.unknowns;
      j["nonzeros"] = r.nonzeros;
      j["distinct_stencils"] = r.distinct_stencils;
      j["assemble_seconds"] = r.assemble_seconds;
      j["solver"] = report_json(r.report);
      if (cfg.write_fields) j["field"] = fs::relative(field_file(dir, r.h), dir).string();
    } else {
      j["message"] = r.message;
    }
    if (r.order) j["order"] = *r.order;
    rows.push_back(j);
  }
  meta["rows"] = rows;
  meta["seconds"] = res.seconds;
  std::ofstream js(dir / "meta.json");
  js << meta.dump(2) << '\n';
}

std::string render_table(const fs::path& dir) {
  std::ifstream in(dir / "errors.csv");
  if (!in) throw std::runtime_error("no errors.csv in " + dir.string());
  std::string line;
  std::getline(in, line);
  std::ostringstream out;
  out << std::left << std::setw(12) << "h" << std::setw(14) << "L2 error" << "order\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string h, e, o;
    std::getline(ss, h, ',');
    std::getline(ss, e, ',');
    std::getline(ss, o, ',');
    const double hv = std::stod(h);
    const double lg = std::log2(hv);
    std::string hs = h_tag(hv);
    if (std::abs(lg - std::round(lg)) < 1e-12) hs = "2^" + std::to_string(static_cast<int>(std::round(lg)));
    char es[32] = "failed", os[32] = "";
    if (e != "failed") std::snprintf(es, sizeof es, "%.2e", std::stod(e));
    if (!o.empty()) std::snprintf(os, sizeof os, "%.2f", std::stod(o));
    out << std::setw(12) << hs << std::setw(14) << es << os << '\n';
  }
  return out.str();
}

}  // namespace nlhelm
