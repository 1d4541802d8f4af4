// Command-line front end: simulate a regimen, optimize regimens over the
// configured weight vectors, rebuild the aggregate table, validate configs.

#include <mmopt/results_io.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"four-population tumor-immune treatment simulation and regimen optimization"};
  app.require_subcommand(1);

  std::string config_path, regimen_path, out_dir, runs_dir, method, validate_path;

  auto* sim = app.add_subcommand("simulate", "integrate one regimen and write the trajectory");
  sim->add_option("--config", config_path, "scenario config JSON")->required();
  sim->add_option("--regimen", regimen_path, "regimen JSON")->required();
  sim->add_option("--out", out_dir, "output directory (default: config output_dir)");

  auto* opt = app.add_subcommand("optimize", "search for the best regimen per weight vector");
  opt->add_option("--config", config_path, "scenario config JSON")->required();
  opt->add_option("--method", method, "constant|piecewise|optimal|approx")
      ->required()
      ->check(CLI::IsMember({"constant", "piecewise", "optimal", "approx"}));
  opt->add_option("--out", out_dir, "output directory (default: config output_dir)");

  auto* tab = app.add_subcommand("table", "rebuild the aggregate table from run artifacts");
  tab->add_option("--runs", runs_dir, "directory holding per-run result.json files")
      ->required();

  auto* val = app.add_subcommand("validate-config", "parse and validate a config file");
  val->add_option("config", validate_path, "scenario config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const mmopt::ScenarioConfig cfg = mmopt::load_config(config_path);
      if (out_dir.empty()) out_dir = cfg.output_dir;
      const mmopt::Trajectory traj = mmopt::simulate_command(cfg, regimen_path, out_dir);
      const auto& x = traj.final_state();
      std::cout << "simulated " << traj.horizon() << " days, " << traj.times.size()
                << " output points\n"
                << "final state: M=" << x[mmopt::kM] << " T_C=" << x[mmopt::kTC]
                << " N=" << x[mmopt::kN] << " T_R=" << x[mmopt::kTR] << "\n"
                << "wrote " << out_dir << "/trajectory.csv\n";
      return 0;
    }
    if (opt->parsed()) {
      const mmopt::ScenarioConfig cfg = mmopt::load_config(config_path);
      if (out_dir.empty()) out_dir = cfg.output_dir;
      const int failures = mmopt::run_scenario(cfg, {method}, out_dir);
      std::cout << mmopt::collect_results(out_dir).render_text();
      if (failures > 0) {
        std::cerr << failures << " cell(s) failed\n";
        return 1;
      }
      return 0;
    }
    if (tab->parsed()) {
      std::cout << mmopt::collect_results(runs_dir).render_text();
      return 0;
    }
    if (val->parsed()) {
      mmopt::load_config(validate_path);
      std::cout << "config ok\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
