#pragma once

// Result artifacts: trajectory CSVs, per-run result JSON, and the aggregate
// results table. Numeric text uses 17 significant digits so files round-trip
// doubles exactly.

#include <mmopt/config_io.hpp>
#include <mmopt/optimize.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace mmopt {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Columns: t, M, T_C, N, T_R, u1, u2, u3, running_integral. The last column
// is the running cost integral of (beta*M + gamma . u); doses are evaluated
// right-continuously at the output times.
inline std::string trajectory_csv(const Trajectory& traj, const Regimen& regimen,
                                  const ObjectiveWeights& w) {
  std::string out = "t,M,T_C,N,T_R,u1,u2,u3,running_integral\n";
  Dose cum = Dose::Zero();
  for (size_t i = 0; i < traj.times.size(); ++i) {
    const double t = traj.times[i];
    if (i > 0) cum += dose_integral(regimen, traj.times[i - 1], t);
    const Dose u = dose_at(regimen, t);
    const double running = weighted_total(w, 0.0, traj.integral[i], cum);
    out += fmt17(t);
    for (int c = 0; c < 4; ++c) out += "," + fmt17(traj.states[i][c]);
    for (int c = 0; c < 3; ++c) out += "," + fmt17(u[c]);
    out += "," + fmt17(running) + "\n";
  }
  return out;
}

inline json result_to_json(const OptimizationResult& res, const Dose& G, int sequence) {
  json j;
  j["sequence"] = sequence;
  j["method"] = res.method;
  j["G"] = detail::dose_to_json(G);
  j["objective"] = {{"total", res.objective.total},
                    {"terminal", res.objective.terminal},
                    {"burden_integral", res.objective.burden_integral},
                    {"toxicity", detail::dose_to_json(res.objective.toxicity)}};
  j["final_state"] = {{"M", res.final_state[kM]},
                      {"T_C", res.final_state[kTC]},
                      {"N", res.final_state[kN]},
                      {"T_R", res.final_state[kTR]}};
  j["regimen"] = regimen_to_json(res.regimen);
  j["diagnostics"] = {{"iterations", res.diagnostics.iterations},
                      {"gradient_norm", res.diagnostics.gradient_norm},
                      {"candidates_evaluated", res.diagnostics.candidates_evaluated},
                      {"nodes_evaluated", res.diagnostics.nodes_evaluated},
                      {"wall_seconds", res.diagnostics.wall_seconds},
                      {"converged", res.diagnostics.converged},
                      {"note", res.diagnostics.note}};
  return j;
}

inline void result_from_json(const json& j, OptimizationResult& res, Dose& G, int& sequence) {
  sequence = j.at("sequence").get<int>();
  res.method = j.at("method").get<std::string>();
  G = detail::dose_from_json(j.at("G"), "result.G");
  const json& o = j.at("objective");
  res.objective.total = o.at("total").get<double>();
  res.objective.terminal = o.at("terminal").get<double>();
  res.objective.burden_integral = o.at("burden_integral").get<double>();
  res.objective.toxicity = detail::dose_from_json(o.at("toxicity"), "result.objective.toxicity");
  const json& f = j.at("final_state");
  res.final_state[kM] = f.at("M").get<double>();
  res.final_state[kTC] = f.at("T_C").get<double>();
  res.final_state[kN] = f.at("N").get<double>();
  res.final_state[kTR] = f.at("T_R").get<double>();
  res.regimen = regimen_from_json(j.at("regimen"));
  const json& d = j.at("diagnostics");
  res.diagnostics.iterations = d.at("iterations").get<int>();
  res.diagnostics.gradient_norm = d.at("gradient_norm").get<double>();
  res.diagnostics.candidates_evaluated = d.at("candidates_evaluated").get<long>();
  res.diagnostics.nodes_evaluated = d.at("nodes_evaluated").get<long>();
  res.diagnostics.wall_seconds = d.at("wall_seconds").get<double>();
  res.diagnostics.converged = d.at("converged").get<bool>();
  res.diagnostics.note = d.at("note").get<std::string>();
}

// ---------------------------------------------------------------------------
// aggregate table

struct ResultsRow {
  int sequence = 0;
  Dose G = Dose::Zero();
  std::string method;
  double J = 0.0;
  State final_state = State::Zero();
};

inline int method_rank(const std::string& m) {
  if (m == "constant") return 0;
  if (m == "piecewise") return 1;
  if (m == "optimal") return 2;
  if (m == "approximation") return 3;
  return 4;
}

struct ResultsTable {
  std::vector<ResultsRow> rows;

  void sort() {
    std::sort(rows.begin(), rows.end(), [](const ResultsRow& a, const ResultsRow& b) {
      if (a.sequence != b.sequence) return a.sequence < b.sequence;
      const int ra = method_rank(a.method), rb = method_rank(b.method);
      if (ra != rb) return ra < rb;
      for (int c = 0; c < 3; ++c)
        if (a.G[c] != b.G[c]) return a.G[c] < b.G[c];
      return a.method < b.method;
    });
  }

  std::string render_csv() const {
    std::string out = "G1,G2,G3,method,J_min,M_final,T_C_final,N_final,T_R_final\n";
    for (const auto& r : rows) {
      out += fmt17(r.G[0]) + "," + fmt17(r.G[1]) + "," + fmt17(r.G[2]) + "," + r.method;
      out += "," + fmt17(r.J);
      for (int c = 0; c < 4; ++c) out += "," + fmt17(r.final_state[c]);
      out += "\n";
    }
    return out;
  }

  std::string render_text() const {
    auto fnum = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", v);
      return std::string(buf);
    };
    auto fg = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", v);
      return std::string(buf);
    };
    std::vector<std::array<std::string, 7>> cells;
    cells.push_back({"Weights", "Method", "J_min", "M_final", "T_C_final", "N_final",
                     "T_R_final"});
    for (const auto& r : rows)
      cells.push_back({"G=(" + fg(r.G[0]) + "," + fg(r.G[1]) + "," + fg(r.G[2]) + ")",
                       r.method, fnum(r.J), fnum(r.final_state[kM]), fnum(r.final_state[kTC]),
                       fnum(r.final_state[kN]), fnum(r.final_state[kTR])});
    std::array<size_t, 7> width{};
    for (const auto& row : cells)
      for (size_t c = 0; c < 7; ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : cells) {
      for (size_t c = 0; c < 7; ++c) {
        out += row[c];
        if (c + 1 < 7) out += std::string(width[c] - row[c].size() + 2, ' ');
      }
      out += "\n";
    }
    return out;
  }
};

inline ResultsRow row_from_result(const OptimizationResult& res, const Dose& G, int sequence) {
  ResultsRow row;
  row.sequence = sequence;
  row.G = G;
  row.method = res.method;
  row.J = res.objective.total;
  row.final_state = res.final_state;
  return row;
}

// Rebuild the table from every result.json under a runs directory.
inline ResultsTable collect_results(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir)) throw std::runtime_error("runs directory not found: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "result.json")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());

  ResultsTable table;
  for (const auto& p : paths) {
    OptimizationResult res;
    Dose G;
    int seq = 0;
    result_from_json(detail::parse_file(p), res, G, seq);
    table.rows.push_back(row_from_result(res, G, seq));
  }
  table.sort();
  return table;
}

// ---------------------------------------------------------------------------
// batch execution

inline constexpr const char* kMethodNames[4] = {"constant", "piecewise", "optimal",
                                                "approximation"};

// Runs the requested methods for every configured G vector, writing one
// artifact directory per (G, method) cell plus the aggregate table. Returns
// the number of failed cells. The piecewise cells share one tree sweep.
inline int run_scenario(const ScenarioConfig& cfg, const std::vector<std::string>& methods,
                        const std::string& out_dir, std::ostream& log = std::cerr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  ResultsTable table;
  int failures = 0;

  auto cell_name = [&](size_t gi, const std::string& method) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "g%02zu_", gi);
    return buf + method;
  };
  auto emit = [&](const OptimizationResult& res, const Dose& G, size_t gi) {
    const int seq = static_cast<int>(gi) * 4 + method_rank(res.method);
    const fs::path cell = fs::path(out_dir) / cell_name(gi, res.method);
    fs::create_directories(cell);
    detail::write_text((cell / "result.json").string(),
                       result_to_json(res, G, seq).dump(2) + "\n");
    detail::write_text((cell / "regimen.json").string(),
                       regimen_to_json(res.regimen).dump(2) + "\n");
    const Scenario scen = scenario_from_config(cfg, G);
    const Trajectory traj = simulate(scen.params.x0, res.regimen, scen.horizon, scen.params,
                                     scen.pharma, report_settings(scen));
    detail::write_text((cell / "trajectory.csv").string(),
                       trajectory_csv(traj, res.regimen, scen.weights));
    table.rows.push_back(row_from_result(res, G, seq));
  };

  for (const std::string& method : methods) {
    if (method == "piecewise") {
      // one shared sweep; node data is weight-independent
      if (cfg.G_vectors.empty()) continue;
      try {
        std::vector<ObjectiveWeights> weights;
        for (const Dose& G : cfg.G_vectors)
          weights.push_back(build_weights(G, cfg.params.x0[kM], cfg.pharma.u_max, cfg.horizon,
                                          cfg.tie_weights_to_horizon));
        const Scenario scen = scenario_from_config(cfg, cfg.G_vectors.front());
        const auto results = optimize_piecewise_batch(scen, weights);
        for (size_t gi = 0; gi < results.size(); ++gi) emit(results[gi], cfg.G_vectors[gi], gi);
      } catch (const std::exception& e) {
        failures += static_cast<int>(cfg.G_vectors.size());
        log << "piecewise sweep failed: " << e.what() << "\n";
      }
      continue;
    }
    for (size_t gi = 0; gi < cfg.G_vectors.size(); ++gi) {
      try {
        const Scenario scen = scenario_from_config(cfg, cfg.G_vectors[gi]);
        OptimizationResult res;
        if (method == "constant") res = optimize_constant(scen);
        else if (method == "optimal") res = optimize_control(scen);
        else if (method == "approximation" || method == "approx")
          res = optimize_approximation(scen);
        else throw std::runtime_error("unknown method: " + method);
        emit(res, cfg.G_vectors[gi], gi);
      } catch (const std::exception& e) {
        ++failures;
        log << method << " failed for G=(" << cfg.G_vectors[gi][0] << ","
            << cfg.G_vectors[gi][1] << "," << cfg.G_vectors[gi][2] << "): " << e.what()
            << "\n";
      }
    }
  }

  table.sort();
  detail::write_text((fs::path(out_dir) / "table.csv").string(), table.render_csv());
  detail::write_text((fs::path(out_dir) / "table.txt").string(), table.render_text());
  return failures;
}

// Simulates a regimen file under the configured model and writes the
// trajectory CSV. Weights come from the first configured G vector; with no G
// vectors the running integral carries the burden term only.
inline Trajectory simulate_command(const ScenarioConfig& cfg, const std::string& regimen_path,
                                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  const Regimen regimen = load_regimen(regimen_path);

  if (const auto* pc = std::get_if<PiecewiseConstantRegimen>(&regimen)) {
    const double n = cfg.horizon / pc->period;
    if (std::abs(n - std::round(n)) > 1e-9 ||
        static_cast<double>(pc->doses.size()) * pc->period < cfg.horizon - 1e-9)
      throw std::runtime_error("regimen: piecewise periods do not tile the horizon (" +
                               std::to_string(pc->doses.size()) + " periods of " +
                               std::to_string(pc->period) + " days against " +
                               std::to_string(cfg.horizon) + " days)");
  }
  if (regimen_duration(regimen) < cfg.horizon)
    throw std::runtime_error("regimen: does not cover the horizon");

  // no period or mesh preconditions here: any covering regimen simulates
  const Dose G = cfg.G_vectors.empty() ? Dose::Zero() : cfg.G_vectors.front();
  const ObjectiveWeights weights = build_weights(G, cfg.params.x0[kM], cfg.pharma.u_max,
                                                 cfg.horizon, cfg.tie_weights_to_horizon);
  const Trajectory traj =
      simulate(cfg.params.x0, regimen, cfg.horizon, cfg.params, cfg.pharma, cfg.integrator);
  fs::create_directories(out_dir);
  detail::write_text((fs::path(out_dir) / "trajectory.csv").string(),
                     trajectory_csv(traj, regimen, weights));
  return traj;
}

}  // namespace mmopt
