#include <doctest.h>

#include <mmopt/optimize.hpp>

#include <algorithm>
#include <vector>

using namespace mmopt;

namespace {

// two levels per drug, two periods: 64 block sequences, small enough to verify
// the tree search against plain enumeration
Scenario tiny_scenario(const Dose& G = Dose{1.0, 1.0, 1.0}) {
  Scenario s;
  s.horizon = 180.0;
  s.period = 90.0;
  s.grid.levels = {{{0.0, 204.93}, {0.0, 3.5325}, {0.0, 90.0}}};
  s.weights = build_weights(G, s.params.x0[kM], s.pharma.u_max, s.horizon);
  s.solver.threads = 1;
  return s;
}

struct BruteResult {
  double J;
  std::vector<int> path;
};

// explicit lexicographic enumeration mirroring the tree's arithmetic
BruteResult brute_force(const Scenario& scen) {
  const auto candidates = enumerate_grid(scen.grid);
  const int L = static_cast<int>(candidates.size());
  const int n_periods = static_cast<int>(std::llround(scen.horizon / scen.period));

  BruteResult best{std::numeric_limits<double>::infinity(), {}};
  std::vector<int> path(static_cast<size_t>(n_periods), 0);
  while (true) {
    Vec5 y;
    y.head<4>() = scen.params.x0;
    y[4] = 0.0;
    Dose dose_sum = Dose::Zero();
    for (int k = 0; k < n_periods; ++k) {
      const Dose& u = candidates[static_cast<size_t>(path[static_cast<size_t>(k)])];
      y = advance_constant_dose(y, scen.period * k, scen.period * (k + 1), u, scen.params,
                                scen.pharma, scen.integrator);
      dose_sum = dose_sum + u * scen.period;
    }
    const double J = weighted_total(scen.weights, y[0], y[4], dose_sum);
    if (J < best.J) best = {J, path};

    int d = n_periods - 1;
    while (d >= 0 && path[static_cast<size_t>(d)] == L - 1) path[static_cast<size_t>(d--)] = 0;
    if (d < 0) break;
    ++path[static_cast<size_t>(d)];
  }
  return best;
}

}  // namespace

TEST_CASE("tree search equals plain enumeration on a 64-candidate instance") {
  const Scenario scen = tiny_scenario();
  const BruteResult ref = brute_force(scen);

  long nodes = 0, leaves = 0;
  const auto best = piecewise_search(scen, {scen.weights}, &nodes, &leaves);
  REQUIRE(best.size() == 1);
  CHECK(best[0].J == ref.J);
  CHECK(best[0].path == ref.path);
  CHECK(nodes > 0);
  CHECK(leaves <= 64);

  // the reported objective of the assembled result equals the search value
  const auto res = optimize_piecewise(scen);
  CHECK(res.objective.total == ref.J);
}

TEST_CASE("thread count does not change the search result") {
  Scenario scen = tiny_scenario(Dose{5.0, 1.0, 1.0});
  scen.solver.threads = 1;
  const auto a = piecewise_search(scen, {scen.weights});
  scen.solver.threads = 3;
  const auto b = piecewise_search(scen, {scen.weights});
  CHECK(a[0].J == b[0].J);
  CHECK(a[0].path == b[0].path);
}

TEST_CASE("a batched sweep reproduces per-weight searches") {
  const Scenario scen = tiny_scenario();
  std::vector<ObjectiveWeights> ws;
  for (const auto& G : {Dose{1, 1, 1}, Dose{5, 1, 1}, Dose{1, 5, 0.5}})
    ws.push_back(build_weights(G, scen.params.x0[kM], scen.pharma.u_max, scen.horizon));

  const auto batch = optimize_piecewise_batch(scen, ws);
  REQUIRE(batch.size() == 3);
  for (size_t wi = 0; wi < ws.size(); ++wi) {
    Scenario single = scen;
    single.weights = ws[wi];
    const auto solo = optimize_piecewise(single);
    CHECK(batch[wi].objective.total == solo.objective.total);
    CHECK(batch[wi].final_state[kM] == solo.final_state[kM]);
  }
  CHECK(batch[0].diagnostics.note.find("3 weight vectors") != std::string::npos);
}

TEST_CASE("one period reduces the piecewise search to the constant search") {
  Scenario scen = tiny_scenario();
  scen.horizon = 90.0;
  scen.weights = build_weights(Dose{1, 1, 1}, scen.params.x0[kM], scen.pharma.u_max, scen.horizon);

  const auto pw = optimize_piecewise(scen);
  const auto cons = optimize_constant(scen);
  CHECK(pw.objective.total == cons.objective.total);
  for (int c = 0; c < 4; ++c) CHECK(pw.final_state[c] == cons.final_state[c]);
  const auto& preg = std::get<PiecewiseConstantRegimen>(pw.regimen);
  const auto& creg = std::get<ConstantRegimen>(cons.regimen);
  REQUIRE(preg.doses.size() == 1);
  for (int i = 0; i < 3; ++i) CHECK(preg.doses[0][i] == creg.u[i]);
}

TEST_CASE("constant enumeration reproduces pinned winners on the default grid") {
  {
    const auto res = optimize_constant(default_scenario(Dose{1.0, 1.0, 1.0}));
    CHECK(res.objective.total == doctest::Approx(4.9342207640).epsilon(1e-6));
    const auto& reg = std::get<ConstantRegimen>(res.regimen);
    CHECK(reg.u[0] == 153.6975);
    CHECK(reg.u[1] == 1.7663);
    CHECK(reg.u[2] == 0.0);
    CHECK(res.final_state[kM] == doctest::Approx(0.0756).epsilon(0.01));
    CHECK(res.diagnostics.candidates_evaluated == 50);
  }
  {
    const auto res = optimize_constant(default_scenario(Dose{5.0, 5.0, 1.0}));
    CHECK(res.objective.total == doctest::Approx(8.2754766052).epsilon(1e-6));
    const auto& reg = std::get<ConstantRegimen>(res.regimen);
    CHECK(reg.u[0] == 102.465);
    CHECK(reg.u[1] == 0.8831);
    CHECK(reg.u[2] == 0.0);
  }
}

TEST_CASE("a pinned mixed regimen reproduces its objective") {
  const Scenario scen = default_scenario(Dose{1.0, 1.0, 1.0});
  PiecewiseConstantRegimen reg;
  reg.period = 90.0;
  reg.doses = {Dose{204.93, 0.8831, 90.0}, Dose{51.2325, 3.5325, 0.0},
               Dose{0.0, 1.7663, 90.0}, Dose{153.6975, 2.6494, 0.0}};
  const auto traj = simulate(scen.params.x0, Regimen(reg), scen.horizon, scen.params,
                             scen.pharma, report_settings(scen));
  const auto v = evaluate(traj, scen.weights);
  CHECK(v.total == doctest::Approx(5.640888169262209).epsilon(1e-7));
  CHECK(traj.final_state()[kM] == doctest::Approx(0.12282748218950527).epsilon(1e-6));
}

TEST_CASE("projected gradient descent is monotone and deterministic") {
  Scenario scen = tiny_scenario();
  scen.horizon = 100.0;
  scen.period = 50.0;
  scen.weights = build_weights(Dose{1, 1, 1}, scen.params.x0[kM], scen.pharma.u_max, scen.horizon);

  Scenario s3 = scen;
  s3.solver.max_iterations = 3;
  const auto r3 = optimize_control(s3);
  const auto r3b = optimize_control(s3);
  CHECK(r3.objective.total == r3b.objective.total);  // bitwise repeatable
  CHECK(r3.diagnostics.iterations == r3b.diagnostics.iterations);

  Scenario s6 = scen;
  s6.solver.max_iterations = 6;
  const auto r6 = optimize_control(s6);
  // iterations of the shorter run are a prefix of the longer one
  CHECK(r6.objective.total <= r3.objective.total);
  CHECK(r3.diagnostics.gradient_norm >= 0.0);
}

TEST_CASE("an all-zero objective converges immediately") {
  Scenario scen = tiny_scenario();
  scen.horizon = 100.0;
  scen.period = 50.0;
  scen.weights = ObjectiveWeights{};
  scen.weights.alpha = 0.0;
  scen.weights.beta = 0.0;
  scen.weights.gamma = Dose::Zero();
  scen.weights.T = 100.0;

  const auto res = optimize_control(scen);
  CHECK(res.objective.total == 0.0);
  CHECK(res.diagnostics.iterations == 0);
  CHECK(res.diagnostics.converged);
}

TEST_CASE("adjoint gradients match finite differences on a short horizon") {
  Scenario scen = tiny_scenario();
  scen.horizon = 100.0;
  scen.period = 50.0;
  scen.weights = build_weights(Dose{1, 1, 1}, scen.params.x0[kM], scen.pharma.u_max, scen.horizon);

  const auto check = adjoint_fd_check(scen, 3);
  CHECK(check.probes == 3);
  CHECK(check.max_rel_error < 1e-4);
}

TEST_CASE("methods respect the class-inclusion ordering") {
  const Scenario scen = tiny_scenario(Dose{1.0, 5.0, 1.0});

  const auto cons = optimize_constant(scen);
  const auto pw = optimize_piecewise(scen);
  const auto opt = optimize_control(scen);
  const auto appr = optimize_approximation(scen);

  // block sequences include the constant regimens, and the rounded continuous
  // optimum is itself a block sequence the exhaustive search has seen
  CHECK(pw.objective.total <= cons.objective.total);
  CHECK(pw.objective.total <= appr.objective.total);
  CHECK(opt.objective.total <= pw.objective.total + 10.0 * scen.solver.gradient_tol);
}

TEST_CASE("incumbent comparison prefers earlier block sequences on ties") {
  PiecewiseBest best;
  CHECK(improves(1.0, {1, 2}, best));  // anything beats an empty incumbent
  best.J = 1.0;
  best.path = {1, 2};
  CHECK(improves(0.5, {3, 3}, best));
  CHECK(!improves(1.5, {0, 0}, best));
  CHECK(improves(1.0, {1, 1}, best));   // equal cost, earlier sequence
  CHECK(!improves(1.0, {1, 2}, best));  // equal cost, same sequence
  CHECK(!improves(1.0, {2, 0}, best));  // equal cost, later sequence
}
