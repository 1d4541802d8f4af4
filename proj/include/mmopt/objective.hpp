#pragma once

// Treatment objective: J = alpha*M(T) + integral of (beta*M + gamma . u).
// Weights derive from a drug-importance vector G: alpha = M_init,
// beta = alpha/360, gamma_i = G_i / (360 * u_max_i). The 360 stays literal so
// alternate horizons keep the reference weighting; tie_scale_to_horizon
// substitutes T for it.

#include <mmopt/integrator.hpp>

#include <cmath>

namespace mmopt {

struct ObjectiveWeights {
  double alpha = 4.0;
  double beta = 4.0 / 360.0;
  Dose gamma = Dose::Zero();
  Dose G = Dose::Zero();  // provenance of gamma, kept for reporting
  double T = 360.0;
};

inline ObjectiveWeights build_weights(const Dose& G, double M_init, const Dose& u_max,
                                      double T = 360.0, bool tie_scale_to_horizon = false) {
  std::vector<std::string> bad;
  if (!(M_init >= 0.0)) bad.push_back("M_init must be >= 0");
  if (!(T > 0.0)) bad.push_back("horizon must be > 0");
  for (int i = 0; i < 3; ++i) {
    if (!(G[i] >= 0.0)) bad.push_back("G components must be >= 0");
    if (!(u_max[i] > 0.0)) bad.push_back("u_max components must be > 0");
  }
  throw_if_invalid(bad, "build_weights");

  const double scale = tie_scale_to_horizon ? T : 360.0;
  ObjectiveWeights w;
  w.alpha = M_init;
  w.beta = w.alpha / scale;
  for (int i = 0; i < 3; ++i) w.gamma[i] = G[i] / (scale * u_max[i]);
  w.G = G;
  w.T = T;
  return w;
}

// Single authoritative expression for J given the endpoint burden, the raw
// integral of M, and the per-drug dose integrals. Every ranking and report
// site funnels through this so equal trajectories give bit-equal values.
inline double weighted_total(const ObjectiveWeights& w, double M_final, double integral_M,
                             const Dose& dose_integral) {
  return (w.alpha * M_final + w.beta * integral_M) +
         ((w.gamma[0] * dose_integral[0] + w.gamma[1] * dose_integral[1]) +
          w.gamma[2] * dose_integral[2]);
}

struct ObjectiveValue {
  double total = 0.0;
  double terminal = 0.0;         // alpha * M(T)
  double burden_integral = 0.0;  // beta * integral of M
  Dose toxicity = Dose::Zero();  // gamma_i * integral of u_i

  // grouped to reproduce weighted_total exactly
  double parts_sum() const {
    return (terminal + burden_integral) + ((toxicity[0] + toxicity[1]) + toxicity[2]);
  }
};

inline ObjectiveValue evaluate(const Trajectory& traj, const ObjectiveWeights& w) {
  if (std::abs(traj.horizon() - w.T) > 1e-9 * std::max(1.0, w.T))
    throw std::invalid_argument("evaluate: trajectory horizon does not match the weights");
  ObjectiveValue v;
  v.terminal = w.alpha * traj.final_state()[kM];
  v.burden_integral = w.beta * traj.integral.back();
  for (int i = 0; i < 3; ++i) v.toxicity[i] = w.gamma[i] * traj.dose_integral_total[i];
  v.total = weighted_total(w, traj.final_state()[kM], traj.integral.back(),
                           traj.dose_integral_total);
  return v;
}

}  // namespace mmopt
