#include <doctest.h>

#include <mmopt/integrator.hpp>
#include <mmopt/objective.hpp>

using namespace mmopt;

namespace {

Trajectory synthetic_constant_M(double m, double T, const Dose& dose_total) {
  Trajectory traj;
  traj.times = {0.0, T};
  traj.states = {State{m, 100.0, 100.0, 10.0}, State{m, 100.0, 100.0, 10.0}};
  traj.integral = {0.0, m * T};
  traj.dose_integral_total = dose_total;
  return traj;
}

Dose default_u_max() { return Pharmacodynamics().u_max; }

}  // namespace

TEST_CASE("weight construction follows the normalization formulas") {
  const Dose u_max = default_u_max();
  const auto w = build_weights(Dose{1.0, 1.0, 1.0}, 4.0, u_max);

  CHECK(w.alpha == 4.0);
  CHECK(w.beta == 4.0 / 360.0);
  CHECK(w.T == 360.0);
  CHECK(w.gamma[0] == doctest::Approx(1.355476395734044687e-5).epsilon(1e-15));
  CHECK(w.gamma[1] == doctest::Approx(7.86348981678068727e-4).epsilon(1e-15));
  CHECK(w.gamma[2] == doctest::Approx(2.923976608187134503e-5).epsilon(1e-15));

  // agreement with independently hand-rounded values
  CHECK(w.gamma[0] == doctest::Approx(1.35558e-5).epsilon(1e-4));
  CHECK(w.gamma[1] == doctest::Approx(7.86339e-4).epsilon(1e-4));
  CHECK(w.gamma[2] == doctest::Approx(2.92398e-5).epsilon(1e-4));

  const auto w0 = build_weights(Dose::Zero(), 4.0, u_max);
  for (int i = 0; i < 3; ++i) CHECK(w0.gamma[i] == 0.0);

  // doubling a G component exactly doubles its toxicity weight
  const auto w2 = build_weights(Dose{2.0, 2.0, 2.0}, 4.0, u_max);
  for (int i = 0; i < 3; ++i) CHECK(w2.gamma[i] == 2.0 * w.gamma[i]);
  CHECK(w2.alpha == w.alpha);
  CHECK(w2.beta == w.beta);

  // optional re-tie of the normalization scale to a non-default horizon
  const auto wt = build_weights(Dose{1.0, 1.0, 1.0}, 4.0, u_max, 180.0, true);
  CHECK(wt.beta == 4.0 / 180.0);
  CHECK(wt.gamma[1] == 1.0 / (180.0 * u_max[1]));
  const auto wu = build_weights(Dose{1.0, 1.0, 1.0}, 4.0, u_max, 180.0, false);
  CHECK(wu.beta == 4.0 / 360.0);

  CHECK_THROWS_AS(build_weights(Dose{1, 1, 1}, 4.0, Dose{204.93, 0.0, 95.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_weights(Dose{-1, 1, 1}, 4.0, u_max), std::invalid_argument);
  CHECK_THROWS_AS(build_weights(Dose{1, 1, 1}, -4.0, u_max), std::invalid_argument);
}

TEST_CASE("constant tumor burden doubles the terminal cost") {
  // with beta = alpha/360 and T = 360, J = alpha*m + beta*m*360 = 2*alpha*m
  const auto w = build_weights(Dose{1, 1, 1}, 4.0, default_u_max());
  for (const double m : {0.5, 2.5, 4.0}) {
    const auto v = evaluate(synthetic_constant_M(m, 360.0, Dose::Zero()), w);
    CHECK(v.total == doctest::Approx(2.0 * w.alpha * m).epsilon(1e-14));
    for (int i = 0; i < 3; ++i) CHECK(v.toxicity[i] == 0.0);
  }
}

TEST_CASE("a full-dose horizon costs exactly the G vector") {
  // gamma_i * u_max_i * 360 telescopes back to G_i whatever u_max is
  for (const Dose& u_max : {default_u_max(), Dose{100.0, 7.0, 11.0}}) {
    const Dose G{1.0, 5.0, 0.5};
    const auto w = build_weights(G, 4.0, u_max);
    const auto v = evaluate(synthetic_constant_M(0.0, 360.0, Dose(360.0 * u_max)), w);
    for (int i = 0; i < 3; ++i) CHECK(v.toxicity[i] == doctest::Approx(G[i]).epsilon(1e-12));
    CHECK(v.total == doctest::Approx(G.sum()).epsilon(1e-12));
    CHECK(v.terminal == 0.0);
  }
}

TEST_CASE("objective decomposition is exact on a real trajectory") {
  const ModelParameters p;
  const Pharmacodynamics q;
  const auto w = build_weights(Dose{1, 5, 1}, 4.0, q.u_max);
  const Regimen reg = ConstantRegimen{Dose{102.465, 1.7663, 90.0}};
  const auto traj = simulate(p.x0, reg, 360.0, p, q);
  const auto v = evaluate(traj, w);

  CHECK(v.total == v.parts_sum());
  CHECK(v.total ==
        weighted_total(w, traj.final_state()[kM], traj.integral.back(), traj.dose_integral_total));
  CHECK(v.terminal == w.alpha * traj.final_state()[kM]);
  CHECK(v.burden_integral == w.beta * traj.integral.back());
  CHECK(v.terminal > 0.0);
  CHECK(v.burden_integral > 0.0);
  for (int i = 0; i < 3; ++i) CHECK(v.toxicity[i] > 0.0);
}

TEST_CASE("raising doses or weights never lowers the cost") {
  const auto w = build_weights(Dose{1, 1, 1}, 4.0, default_u_max());
  const auto w5 = build_weights(Dose{5, 5, 5}, 4.0, default_u_max());
  const Dose d{1000.0, 300.0, 2000.0};
  const double base = weighted_total(w, 0.5, 100.0, d);
  CHECK(weighted_total(w, 0.5, 100.0, Dose(d + Dose{50.0, 0.0, 0.0})) > base);
  CHECK(weighted_total(w, 0.5, 100.0, Dose(d + Dose{0.0, 2.0, 30.0})) > base);
  CHECK(weighted_total(w5, 0.5, 100.0, d) > base);
}

TEST_CASE("evaluating a mismatched horizon is rejected") {
  const auto w = build_weights(Dose{1, 1, 1}, 4.0, default_u_max());
  CHECK_THROWS_AS(evaluate(synthetic_constant_M(1.0, 180.0, Dose::Zero()), w),
                  std::invalid_argument);
}
