#pragma once

// A fully specified optimization problem: model, drugs, horizon, admissible
// doses, objective weights, and numerical settings.

#include <mmopt/integrator.hpp>
#include <mmopt/model.hpp>
#include <mmopt/objective.hpp>
#include <mmopt/regimen.hpp>

#include <cmath>

namespace mmopt {

struct SolverSettings {
  int max_iterations = 300;
  double gradient_tol = 1e-6;   // stop when the projected gradient max-norm falls below
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 40;
  double mesh_days = 1.0;       // control mesh spacing for the continuous solver
  int threads = 0;              // 0 = hardware concurrency

  std::vector<std::string> validate(double horizon) const {
    std::vector<std::string> bad;
    if (max_iterations < 1) bad.push_back("solver.max_iterations must be >= 1");
    if (!(gradient_tol > 0.0)) bad.push_back("solver.gradient_tol must be > 0");
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) bad.push_back("solver.armijo_c1 must be in (0,1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      bad.push_back("solver.backtrack_factor must be in (0,1)");
    if (!(mesh_days > 0.0)) bad.push_back("solver.mesh_days must be > 0");
    else {
      const double n = horizon / mesh_days;
      if (std::abs(n - std::round(n)) > 1e-9)
        bad.push_back("solver.mesh_days must divide the horizon");
    }
    if (threads < 0) bad.push_back("solver.threads must be >= 0");
    return bad;
  }
};

struct Scenario {
  ModelParameters params;
  Pharmacodynamics pharma;
  double horizon = 360.0;
  double period = 90.0;
  DoseGrid grid;
  ObjectiveWeights weights;
  IntegratorSettings integrator;
  SolverSettings solver;

  std::vector<std::string> validate() const {
    std::vector<std::string> bad = params.validate();
    auto more = pharma.validate();
    bad.insert(bad.end(), more.begin(), more.end());
    more = grid.validate(pharma.u_max);
    bad.insert(bad.end(), more.begin(), more.end());
    more = solver.validate(horizon);
    bad.insert(bad.end(), more.begin(), more.end());
    if (!(horizon > 0.0)) bad.push_back("horizon must be > 0");
    if (!(period > 0.0)) bad.push_back("period must be > 0");
    else {
      const double n = horizon / period;
      if (std::abs(n - std::round(n)) > 1e-9) bad.push_back("period must divide the horizon");
    }
    if (!(integrator.rtol > 0.0) || !(integrator.atol > 0.0))
      bad.push_back("integrator tolerances must be > 0");
    return bad;
  }
};

inline Scenario default_scenario(const Dose& G = Dose{1.0, 1.0, 1.0}) {
  Scenario s;
  s.weights = build_weights(G, s.params.x0[kM], s.pharma.u_max, s.horizon);
  return s;
}

}  // namespace mmopt
