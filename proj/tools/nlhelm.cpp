// Command line front end: run sweeps, print convergence tables, dump fields.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nlhelm/experiments.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal Helmholtz PML solver"};
  app.require_subcommand(1);

  std::string config, out_dir, in_dir, h_text;
  int threads = -1;
  auto* run = app.add_subcommand("run", "run an h-sweep and write errors.csv, meta.json, fields/");
  run->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--threads", threads, "assembly threads (overrides the config)");

  auto* table = app.add_subcommand("table", "print the convergence table of a finished run");
  table->add_option("--in", in_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  auto* field = app.add_subcommand("field", "print the nodal field CSV for one mesh size");
  field->set_help_flag("--help", "print this help message and exit");  // frees -h
  field->add_option("--in", in_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  field->add_option("--h", h_text, "mesh size, e.g. 2^-6 or 0.015625")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      nlhelm::KeyValueConfig kv = nlhelm::KeyValueConfig::load(config);
      if (threads >= 0) kv.set("assembly.threads", std::to_string(threads));
      const nlhelm::ExperimentConfig cfg = nlhelm::experiment_from(kv);
      const nlhelm::ExperimentResult res = nlhelm::run_experiment(cfg);
      nlhelm::write_results(cfg, res, out_dir);
      std::cout << nlhelm::render_table(out_dir);
      for (const auto& row : res.rows)
        if (!row.ok) std::cerr << "h = " << row.h << " failed: " << row.message << '\n';
      return res.all_ok() ? 0 : 1;
    }
    if (*table) {
      std::cout << nlhelm::render_table(in_dir);
      return 0;
    }
    if (*field) {
      const double h = nlhelm::evaluate_expression(h_text).real();
      const fs::path file = nlhelm::field_file(in_dir, h);
      std::ifstream in(file);
      if (!in) {
        std::cerr << "no field for h = " << h_text << " (" << file.string() << ")\n";
        return 1;
      }
      std::cout << in.rdbuf();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
