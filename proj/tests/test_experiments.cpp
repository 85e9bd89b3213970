#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlhelm/experiments.hpp"

using namespace nlhelm;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(# small 1D run
name = small
dimension = 1
k = 2pi
kernel.family = exponential
kernel.c_gamma = 0.9/k
pml.z = 40(1+i)
pml.d = 1
domain.l = 1
grid.h = 2^-4, 2^-5
)";

ExperimentConfig parse(const std::string& text) { return experiment_from(KeyValueConfig::parse(text)); }

/// The small config with one key replaced, or appended when absent.
std::string small_with(const std::string& key, const std::string& value) {
  std::string t = kSmall;
  const auto at = t.find("\n" + key + " = ");
  if (at == std::string::npos) return t + key + " = " + value + "\n";
  const auto end = t.find('\n', at + 1);
  return t.replace(at + 1, end - at - 1, key + " = " + value);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nlhelm_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("expression evaluation") {
  CHECK(evaluate_expression("2pi").real() == doctest::Approx(2.0 * kPi).epsilon(1e-15));
  CHECK(evaluate_expression("40(1+i)") == cplx(40.0, 40.0));
  CHECK(evaluate_expression("2^-5").real() == 1.0 / 32.0);
  CHECK(evaluate_expression("0.9/k", {{"k", cplx(2.0)}}).real() == doctest::Approx(0.45));
  CHECK(evaluate_expression("-(3 - 1) * 2 + 10 / 4").real() == doctest::Approx(-1.5));
  CHECK(evaluate_expression("2^3^2").real() == doctest::Approx(512.0));
  CHECK(evaluate_expression("1e-3").real() == doctest::Approx(1e-3));
  CHECK(evaluate_expression("2sqrt(pi)").real() == doctest::Approx(2.0 * std::sqrt(kPi)));
  CHECK_THROWS_AS(evaluate_expression("2 +"), ConfigError);
  CHECK_THROWS_AS(evaluate_expression("foo"), ConfigError);
  CHECK_THROWS_AS(evaluate_expression("(1"), ConfigError);
}

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse(kSmall);
  CHECK(cfg.name == "small");
  CHECK(cfg.kernel.family == KernelFamily::Exponential1D);
  CHECK(cfg.kernel.c_gamma == doctest::Approx(0.9 / (2.0 * kPi)).epsilon(1e-15));
  CHECK(cfg.z == cplx(40.0, 40.0));
  CHECK(cfg.h_list.size() == 2);
  CHECK(cfg.reference == ReferenceMode::Analytic);
  CHECK(cfg.source.amplitude == doctest::Approx(2.0 * std::sqrt(kPi)));
  CHECK(cfg.solver.method == SolverMethod::Auto);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse(small_with("kernel.cgamma", "0.1")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("grid.h", "2^-4, 2^-6")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("grid.h", "0.3")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("dimension", "3")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("pml.style", "polar")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("kernel.family", "gaussian")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("source.rate", "1")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("pml.z", "1")), ConfigError);
  CHECK_THROWS_AS(parse(small_with("reference.mode", "oversolve") + "reference.enlargement = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse(std::string(kSmall) + "k = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("k = 1\n= 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("k 1\n"), ConfigError);
  CHECK_THROWS_AS(load_experiment("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("config key aliases") {
  std::string text = kSmall;
  text.replace(text.find("pml.z = 40(1+i)"), 15, "pml.z_re = 40\npml.z_im = 40");
  text.replace(text.find("pml.d = 1"), 9, "pml.d_pml = 1");
  text.replace(text.find("domain.l = 1"), 12, "domain.l_r = 1");
  const ExperimentConfig cfg = parse(text);
  CHECK(cfg.z == cplx(40.0, 40.0));
  CHECK(cfg.d_pml == 1.0);
  CHECK(cfg.l == 1.0);
  CHECK_THROWS_AS(parse(std::string(kSmall) + "pml.z_re = 40\n"), ConfigError);
  CHECK_THROWS_AS(parse(std::string(kSmall) + "pml.d_pml = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse(std::string(kSmall) + "domain.l_r = 1\n"), ConfigError);
}

TEST_CASE("zero absorption turns the layer off") {
  CHECK(parse(small_with("pml.z", "0")).pml_style == PmlStyle::None);
  CHECK(parse(kSmall).pml_style == PmlStyle::Cartesian);
}

TEST_CASE("shipped configs load") {
  for (const auto& entry : fs::directory_iterator(NLHELM_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().filename().string());
    const ExperimentConfig cfg = load_experiment(entry.path());
    CHECK(cfg.name == entry.path().stem().string());
  }
}

TEST_CASE("L2 error on the interior") {
  const Grid1D grid = build_grid_1d(1.0 / 16.0, 1.0, 1.0, 0.25);
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(grid.size()));
  const SolutionField c = make_field(grid, Eigen::VectorXcd::Constant(zero.size(), cplx(3.0, 0.0)));
  CHECK(l2_error(c, zero) == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-14));

  const Grid1D fine = build_grid_1d(1.0 / 256.0, 1.0, 1.0, 0.25);
  Eigen::VectorXcd s(static_cast<Eigen::Index>(fine.size()));
  for (std::size_t i = 0; i < fine.size(); ++i) s[static_cast<Eigen::Index>(i)] = std::sin(kPi * fine.x(i));
  const SolutionField sf = make_field(fine, s);
  CHECK(std::abs(l2_error(sf, Eigen::VectorXcd::Zero(s.size())) - 1.0) <= 1e-4);
  CHECK_THROWS(l2_error(sf, zero));

  // Unit square: the constant 2 has norm 2 * 2 = 4.
  const Grid2D sq = build_grid_2d(0.125, DomainShape::Square, 1.0, 0.5, 0.25);
  const Eigen::VectorXcd z2 = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(sq.size()));
  const SolutionField f2 = make_field(sq, Eigen::VectorXcd::Constant(z2.size(), cplx(0.0, 2.0)));
  CHECK(l2_error(f2, z2) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("convergence orders") {
  const auto o = convergence_orders({{1.0 / 32, 2.05e-2}, {1.0 / 64, 5.29e-3}, {1.0 / 128, 1.35e-3}, {1.0 / 256, 3.54e-4}});
  REQUIRE(o.size() == 4);
  CHECK(!o[0]);
  CHECK(*o[1] == doctest::Approx(1.95).epsilon(0.01));
  CHECK(*o[2] == doctest::Approx(1.97).epsilon(0.01));
  CHECK(*o[3] == doctest::Approx(1.93).epsilon(0.01));
  const auto one = convergence_orders({{0.5, 1.0}, {0.25, 0.5}});
  CHECK(*one[1] == doctest::Approx(1.0));
  CHECK(convergence_orders({}).empty());
}

TEST_CASE("zero source gives a zero field") {
  const ExperimentResult res = run_experiment(parse(small_with("source.type", "zero")));
  REQUIRE(res.all_ok());
  for (const auto& row : res.rows) {
    CHECK(row.error == 0.0);
    CHECK(row.report.field.norm() == 0.0);
  }
}

TEST_CASE("sweep output is deterministic") {
  const ExperimentConfig cfg = parse(kSmall);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const ExperimentResult ra = run_experiment(cfg);
  const ExperimentResult rb = run_experiment(cfg);
  REQUIRE(ra.all_ok());
  write_results(cfg, ra, a);
  write_results(cfg, rb, b);
  CHECK(slurp(a / "errors.csv") == slurp(b / "errors.csv"));
  CHECK(slurp(field_file(a, 1.0 / 16.0)) == slurp(field_file(b, 1.0 / 16.0)));
  CHECK(ra.rows[1].error < ra.rows[0].error);
  CHECK(ra.rows[1].order.has_value());

  const std::string table = render_table(a);
  CHECK(table.find("2^-4") != std::string::npos);
  CHECK(table.find("2^-5") != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("decay check rows sit in the layer") {
  const ExperimentConfig cfg = parse(kSmall);
  const auto rows = decay_bound_check(cfg, 1.0 / 32.0);
  REQUIRE(!rows.empty());
  for (const auto& r : rows) {
    CHECK(std::abs(r.x) >= 1.0 + 1.0 / 32.0 - 1e-12);
    CHECK(std::abs(r.x) <= 2.0 + 1e-12);
    CHECK(r.eta > 0.0);
    CHECK(r.bound > 0.0);
  }
}
