#pragma once

// The four regimen optimization strategies over a Scenario:
//   constant      exhaustive search over the dose grid, one dose for the horizon
//   piecewise     exhaustive search over per-period grid doses via a prefix tree
//   optimal       continuous control by adjoint-gradient projected descent
//   approximation per-period averaging and grid rounding of the optimal control

#include <mmopt/objective.hpp>
#include <mmopt/scenario.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <random>
#include <thread>

namespace mmopt {

struct SolverDiagnostics {
  int iterations = 0;
  double gradient_norm = 0.0;
  long candidates_evaluated = 0;
  long nodes_evaluated = 0;  // single-period integrations in the tree search
  double wall_seconds = 0.0;
  bool converged = true;
  std::string note;
};

struct OptimizationResult {
  std::string method;
  Regimen regimen;
  ObjectiveValue objective;
  State final_state;
  SolverDiagnostics diagnostics;
};

// Report settings: every method's report restarts at period boundaries, so a
// regimen scored during a search is re-scored identically here.
inline IntegratorSettings report_settings(const Scenario& scen) {
  IntegratorSettings s = scen.integrator;
  const int n = static_cast<int>(std::llround(scen.horizon / scen.period));
  for (int k = 1; k < n; ++k) s.extra_breakpoints.push_back(scen.period * k);
  return s;
}

namespace detail {

class StopWatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Re-simulate a winning regimen for reporting.
inline OptimizationResult finish_result(std::string method, Regimen regimen,
                                        const Scenario& scen, SolverDiagnostics diag) {
  const Trajectory traj = simulate(scen.params.x0, regimen, scen.horizon, scen.params,
                                   scen.pharma, report_settings(scen));
  OptimizationResult res;
  res.method = std::move(method);
  res.regimen = std::move(regimen);
  res.objective = evaluate(traj, scen.weights);
  res.final_state = traj.final_state();
  res.diagnostics = std::move(diag);
  return res;
}

// One period-segmented pass over [0, horizon] at a fixed dose; the same
// computation simulate performs under report_settings, endpoint only.
inline Vec5 chain_constant(const Scenario& scen, const Dose& u, int n_periods) {
  Vec5 y;
  y.head<4>() = scen.params.x0;
  y[4] = 0.0;
  for (int k = 0; k < n_periods; ++k)
    y = advance_constant_dose(y, scen.period * k, scen.period * (k + 1), u, scen.params,
                              scen.pharma, scen.integrator);
  return y;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// constant enumeration

inline OptimizationResult optimize_constant(const Scenario& scen) {
  throw_if_invalid(scen.validate(), "optimize_constant: invalid scenario");
  detail::StopWatch watch;
  const auto candidates = enumerate_grid(scen.grid);
  const int n_periods = static_cast<int>(std::llround(scen.horizon / scen.period));

  double bestJ = std::numeric_limits<double>::infinity();
  size_t best = candidates.size();
  long failures = 0;
  std::string first_failure;
  for (size_t i = 0; i < candidates.size(); ++i) {
    Vec5 y;
    try {
      y = detail::chain_constant(scen, candidates[i], n_periods);
    } catch (const IntegrationError& e) {
      ++failures;
      if (first_failure.empty()) first_failure = e.what();
      continue;
    }
    Dose dose_sum = Dose::Zero();
    for (int k = 0; k < n_periods; ++k) dose_sum += candidates[i] * scen.period;
    const double J = weighted_total(scen.weights, y[0], y[4], dose_sum);
    if (J < bestJ) {  // strict: ties keep the lexicographically first candidate
      bestJ = J;
      best = i;
    }
  }
  if (best == candidates.size())
    throw std::runtime_error("optimize_constant: every candidate failed to integrate (" +
                             first_failure + ")");

  SolverDiagnostics diag;
  diag.candidates_evaluated = static_cast<long>(candidates.size());
  diag.iterations = 1;
  if (failures > 0)
    diag.note = std::to_string(failures) + " candidate(s) excluded by integration failure";
  diag.wall_seconds = watch.seconds();
  return detail::finish_result("constant", ConstantRegimen{candidates[best]}, scen,
                               std::move(diag));
}

// ---------------------------------------------------------------------------
// piecewise-constant enumeration over a prefix tree
//
// Tree nodes are dose prefixes; each node costs one single-period integration
// from its parent's cached state. Node data (endpoint state, running integral
// of M, per-drug dose sums) is weight-independent, so one sweep can serve
// several weight vectors at once. A subtree is pruned when the cost already
// incurred exceeds every tracked incumbent.

struct PiecewiseBest {
  double J = std::numeric_limits<double>::infinity();
  std::vector<int> path;  // level index per period into enumerate_grid order
};

// strict improvement, equal J resolved toward the lexicographically
// earlier regimen
inline bool improves(double J, const std::vector<int>& path, const PiecewiseBest& best) {
  if (J < best.J) return true;
  return J == best.J && !best.path.empty() && path < best.path;
}

namespace detail {

struct PwShared {
  const Scenario* scen;
  std::vector<Dose> candidates;
  int n_periods;
  const std::vector<ObjectiveWeights>* weights;
};

struct PwWorker {
  const PwShared* sh;
  std::vector<PiecewiseBest> best;  // per weight vector, local incumbent
  long nodes = 0;
  long leaves = 0;
  std::vector<int> path;

  void run(int first_lo, int first_hi) {
    path.assign(static_cast<size_t>(sh->n_periods), -1);
    Vec5 y0;
    y0.head<4>() = sh->scen->params.x0;
    y0[4] = 0.0;
    for (int li = first_lo; li < first_hi; ++li) descend(0, li, y0, Dose::Zero());
  }

  void descend(int depth, int level, const Vec5& y_in, const Dose& dose_sum_in) {
    const Scenario& sc = *sh->scen;
    const Dose& u = sh->candidates[static_cast<size_t>(level)];
    const double t0 = sc.period * depth, t1 = sc.period * (depth + 1);
    Vec5 y;
    try {
      y = advance_constant_dose(y_in, t0, t1, u, sc.params, sc.pharma, sc.integrator);
    } catch (const IntegrationError&) {
      return;  // candidate subtree unreachable; exhaustive minimum over the rest
    }
    ++nodes;
    path[static_cast<size_t>(depth)] = level;
    const Dose dose_sum = dose_sum_in + u * sc.period;

    const auto& ws = *sh->weights;
    if (depth + 1 == sh->n_periods) {
      ++leaves;
      for (size_t wi = 0; wi < ws.size(); ++wi) {
        const double J = weighted_total(ws[wi], y[0], y[4], dose_sum);
        if (improves(J, path, best[wi])) {
          best[wi].J = J;
          best[wi].path = path;
        }
      }
      return;
    }

    // cost already incurred bounds every completion from below; descend only
    // if some incumbent is still beatable
    bool alive = false;
    for (size_t wi = 0; wi < ws.size(); ++wi) {
      if (weighted_total(ws[wi], 0.0, y[4], dose_sum) <= best[wi].J) {
        alive = true;
        break;
      }
    }
    if (!alive) return;

    for (int li = 0; li < static_cast<int>(sh->candidates.size()); ++li)
      descend(depth + 1, li, y, dose_sum);
  }
};

// Seed incumbents with the constant regimens (a subset of the piecewise
// class), integrated with the same period segmentation as the tree so the
// bound is bit-comparable.
inline std::vector<PiecewiseBest> pw_seed(const PwShared& sh) {
  std::vector<PiecewiseBest> seeds(sh.weights->size());
  for (int li = 0; li < static_cast<int>(sh.candidates.size()); ++li) {
    const Dose& u = sh.candidates[static_cast<size_t>(li)];
    Vec5 y;
    try {
      y = chain_constant(*sh.scen, u, sh.n_periods);
    } catch (const IntegrationError&) {
      continue;
    }
    Dose dose_sum = Dose::Zero();
    for (int k = 0; k < sh.n_periods; ++k) dose_sum += u * sh.scen->period;
    for (size_t wi = 0; wi < sh.weights->size(); ++wi) {
      const double J = weighted_total((*sh.weights)[wi], y[0], y[4], dose_sum);
      if (J < seeds[wi].J) {  // candidate order is lexicographic already
        seeds[wi].J = J;
        seeds[wi].path.assign(static_cast<size_t>(sh.n_periods), li);
      }
    }
  }
  return seeds;
}

}  // namespace detail

// Exhaustive piecewise search for several weight vectors in one tree sweep.
// Returns one best per weight vector plus shared node/leaf counts.
inline std::vector<PiecewiseBest> piecewise_search(const Scenario& scen,
                                                   const std::vector<ObjectiveWeights>& weights,
                                                   long* nodes_out = nullptr,
                                                   long* leaves_out = nullptr) {
  throw_if_invalid(scen.validate(), "piecewise_search: invalid scenario");
  const double np_real = scen.horizon / scen.period;
  const int n_periods = static_cast<int>(std::llround(np_real));

  detail::PwShared sh;
  sh.scen = &scen;
  sh.candidates = enumerate_grid(scen.grid);
  sh.n_periods = n_periods;
  sh.weights = &weights;

  const auto seeds = detail::pw_seed(sh);
  const int L = static_cast<int>(sh.candidates.size());
  int n_threads = scen.solver.threads > 0 ? scen.solver.threads
                                          : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, L);

  std::vector<detail::PwWorker> workers(static_cast<size_t>(n_threads));
  for (auto& w : workers) {
    w.sh = &sh;
    w.best = seeds;
  }
  if (n_threads == 1) {
    workers[0].run(0, L);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (L + n_threads - 1) / n_threads;
    for (int k = 0; k < n_threads; ++k)
      pool.emplace_back([&, k] { workers[static_cast<size_t>(k)].run(
          k * chunk, std::min(L, (k + 1) * chunk)); });
    for (auto& th : pool) th.join();
  }

  // deterministic merge independent of the thread schedule; equal J resolves
  // to the lexicographically first path
  std::vector<PiecewiseBest> best = seeds;
  long nodes = 0, leaves = 0;
  for (const auto& w : workers) {
    nodes += w.nodes;
    leaves += w.leaves;
    for (size_t wi = 0; wi < best.size(); ++wi)
      if (improves(w.best[wi].J, w.best[wi].path, best[wi])) best[wi] = w.best[wi];
  }
  if (nodes_out) *nodes_out = nodes;
  if (leaves_out) *leaves_out = leaves;
  for (const auto& b : best)
    if (b.path.empty())
      throw std::runtime_error("piecewise_search: every candidate failed to integrate");
  return best;
}

// One tree sweep shared across several weight vectors; results line up with
// the input order. Node data is weight-independent, so the sweep costs the
// same as a single-weight search apart from weakened pruning.
inline std::vector<OptimizationResult> optimize_piecewise_batch(
    const Scenario& scen, const std::vector<ObjectiveWeights>& weights) {
  detail::StopWatch watch;
  long nodes = 0, leaves = 0;
  const auto best = piecewise_search(scen, weights, &nodes, &leaves);
  const auto candidates = enumerate_grid(scen.grid);

  std::vector<OptimizationResult> results;
  results.reserve(weights.size());
  for (size_t wi = 0; wi < weights.size(); ++wi) {
    PiecewiseConstantRegimen reg;
    reg.period = scen.period;
    for (int li : best[wi].path) reg.doses.push_back(candidates[static_cast<size_t>(li)]);

    SolverDiagnostics diag;
    diag.candidates_evaluated = leaves;
    diag.nodes_evaluated = nodes;
    diag.iterations = 1;
    if (weights.size() > 1)
      diag.note = "tree sweep shared across " + std::to_string(weights.size()) +
                  " weight vectors";
    diag.wall_seconds = watch.seconds();
    Scenario cell = scen;
    cell.weights = weights[wi];
    results.push_back(
        detail::finish_result("piecewise", std::move(reg), cell, std::move(diag)));
  }
  return results;
}

inline OptimizationResult optimize_piecewise(const Scenario& scen) {
  return optimize_piecewise_batch(scen, {scen.weights}).front();
}

// ---------------------------------------------------------------------------
// continuous optimal control
//
// Controls are optimized in normalized units (fraction of u_max per drug) on
// a uniform mesh with linear interpolation. The gradient of the discretized
// objective with respect to the nodal values is the integral of
// (gamma + (df/du)^T lambda) . u_max against each node's hat function,
// accumulated per mesh interval with composite Gauss-Legendre quadrature
// while the costate lambda is integrated backward.

namespace detail {

inline constexpr std::array<double, 4> kGlNodes{0.0694318442029737124, 0.3300094782075718676,
                                                0.6699905217924281324, 0.9305681557970262876};
inline constexpr std::array<double, 4> kGlWeights{0.1739274225687269287, 0.3260725774312730713,
                                                  0.3260725774312730713, 0.1739274225687269287};
inline constexpr int kGlPanels = 4;

struct AdjointRhs {
  const DenseSegment* xdense;
  const ModelParameters* p;
  const Pharmacodynamics* q;
  double t0, t1;  // forward-time segment bounds; integration runs in s = t1 - t
  Dose u0, u1;
  double beta;

  Vec5 operator()(double s, const Vec5& lam) const {
    const double t = t1 - s;
    const double w = (t - t0) / (t1 - t0);
    const Dose u = (1.0 - w) * u0 + w * u1;
    const Vec4<double> x = xdense->eval(t).head<4>();
    Mat4<double> fx;
    Mat43<double> fu;
    rhs_jacobians<double>(x, u, *p, *q, fx, fu);
    Vec5 d;
    d.head<4>() = fx.transpose() * lam.head<4>();
    d[0] += beta;
    d[4] = 0.0;
    return d;
  }
};

class ControlSolver {
 public:
  ControlSolver(const Scenario& scen) : scen_(scen) {
    const double n_real = scen.horizon / scen.solver.mesh_days;
    n_ = static_cast<int>(std::llround(n_real));
    if (n_ < 100)
      throw std::invalid_argument(
          "optimize_control: control mesh must have at least 100 intervals");
    mesh_.resize(static_cast<size_t>(n_) + 1);
    for (int i = 0; i <= n_; ++i)
      mesh_[static_cast<size_t>(i)] = scen.horizon * static_cast<double>(i) / n_;
    useg_ = scen.integrator;
    useg_.max_step = scen.solver.mesh_days;
  }

  int nodes() const { return n_ + 1; }
  const std::vector<double>& mesh() const { return mesh_; }

  // J of the normalized control matrix; optionally keeps dense state output.
  // The dose integral of the piecewise-linear control is exact trapezoids.
  double forward(const Eigen::MatrixX3d& U, std::vector<DenseSegment>* dense) const {
    Vec5 y;
    y.head<4>() = scen_.params.x0;
    y[4] = 0.0;
    if (dense) {
      dense->clear();
      dense->reserve(static_cast<size_t>(n_));
    }
    Dose dose_total = Dose::Zero();
    for (int i = 0; i < n_; ++i) {
      const Dose u0 = dose_row(U, i), u1 = dose_row(U, i + 1);
      LinearDoseRhs rhs{&scen_.params, &scen_.pharma, mesh_[i], mesh_[i + 1], u0, u1};
      DenseSegment* ds = nullptr;
      if (dense) {
        dense->emplace_back();
        ds = &dense->back();
      }
      integrate_segment(rhs, mesh_[i], mesh_[i + 1], y, useg_, [](double, const Vec5&) {}, ds);
      dose_total += 0.5 * (mesh_[static_cast<size_t>(i) + 1] - mesh_[static_cast<size_t>(i)]) *
                    (u0 + u1);
    }
    return weighted_total(scen_.weights, y[0], y[4], dose_total);
  }

  // discrete gradient with respect to the normalized nodal doses
  Eigen::MatrixX3d gradient(const Eigen::MatrixX3d& U,
                            const std::vector<DenseSegment>& dense) const {
    const auto& w = scen_.weights;
    Eigen::MatrixX3d grad = Eigen::MatrixX3d::Zero(n_ + 1, 3);
    Vec5 lam;
    lam << w.alpha, 0.0, 0.0, 0.0, 0.0;
    for (int i = n_ - 1; i >= 0; --i) {
      const double t0 = mesh_[i], t1 = mesh_[i + 1], h = t1 - t0;
      AdjointRhs rhs{&dense[static_cast<size_t>(i)], &scen_.params, &scen_.pharma,
                     t0, t1, dose_row(U, i), dose_row(U, i + 1), w.beta};
      DenseSegment lam_dense;
      integrate_segment(rhs, 0.0, h, lam, useg_, [](double, const Vec5&) {}, &lam_dense);

      const double hp = h / kGlPanels;
      for (int pan = 0; pan < kGlPanels; ++pan)
        for (int gq = 0; gq < 4; ++gq) {
          const double t = t0 + (pan + kGlNodes[static_cast<size_t>(gq)]) * hp;
          const double theta = (t - t0) / h;
          const Dose u = (1.0 - theta) * dose_row(U, i) + theta * dose_row(U, i + 1);
          const Vec4<double> x = dense[static_cast<size_t>(i)].eval(t).head<4>();
          const Vec4<double> lv = lam_dense.eval(t1 - t).head<4>();
          Mat4<double> fx;
          Mat43<double> fu;
          rhs_jacobians<double>(x, u, scen_.params, scen_.pharma, fx, fu);
          const Dose g =
              (w.gamma + fu.transpose() * lv).cwiseProduct(scen_.pharma.u_max) *
              (hp * kGlWeights[static_cast<size_t>(gq)]);
          grad.row(i) += (1.0 - theta) * g.transpose();
          grad.row(i + 1) += theta * g.transpose();
        }
    }
    return grad;
  }

  SampledRegimen to_regimen(const Eigen::MatrixX3d& U) const {
    SampledRegimen reg;
    reg.times = mesh_;
    reg.doses.reserve(static_cast<size_t>(n_) + 1);
    for (int i = 0; i <= n_; ++i) reg.doses.push_back(dose_row(U, i));
    return reg;
  }

 private:
  Dose dose_row(const Eigen::MatrixX3d& U, int i) const {
    return U.row(i).transpose().cwiseProduct(scen_.pharma.u_max);
  }

  const Scenario& scen_;
  int n_ = 0;
  std::vector<double> mesh_;
  IntegratorSettings useg_;
};

inline Eigen::MatrixX3d clamp01(const Eigen::MatrixX3d& U) {
  return U.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace detail

inline OptimizationResult optimize_control(const Scenario& scen) {
  throw_if_invalid(scen.validate(), "optimize_control: invalid scenario");
  detail::StopWatch watch;
  detail::ControlSolver solver(scen);
  const auto& st = scen.solver;

  Eigen::MatrixX3d U = Eigen::MatrixX3d::Constant(solver.nodes(), 3, 0.5);
  std::vector<DenseSegment> dense;
  double J = solver.forward(U, &dense);

  Eigen::MatrixX3d prev_u, prev_g;
  double step = 1.0;
  double pg_norm = 0.0;
  int it = 0;
  bool converged = false;
  std::string note;

  for (; it < st.max_iterations; ++it) {
    const Eigen::MatrixX3d grad = solver.gradient(U, dense);
    pg_norm = (U - detail::clamp01(U - grad)).cwiseAbs().maxCoeff();
    if (pg_norm <= st.gradient_tol) {
      converged = true;
      break;
    }
    if (prev_u.size() > 0) {  // Barzilai-Borwein step from the last accepted move
      const double denom = ((U - prev_u).array() * (grad - prev_g).array()).sum();
      const double nom = (U - prev_u).squaredNorm();
      if (denom > 1e-16) step = std::clamp(nom / denom, 1e-3, 1e3);
    }
    prev_u = U;
    prev_g = grad;

    bool accepted = false;
    for (int bt = 0; bt < st.max_backtracks; ++bt) {
      const Eigen::MatrixX3d U_try = detail::clamp01(U - step * grad);
      const double slope = (grad.array() * (U_try - U).array()).sum();
      std::vector<DenseSegment> dense_try;
      const double J_try = solver.forward(U_try, &dense_try);
      if (J_try <= J + st.armijo_c1 * slope) {
        U = U_try;
        J = J_try;
        dense = std::move(dense_try);
        accepted = true;
        break;
      }
      step *= st.backtrack_factor;
    }
    if (!accepted) {
      note = "line search stalled before reaching the gradient tolerance";
      break;
    }
  }
  if (!converged && note.empty())
    note = "iteration budget reached before the gradient tolerance";

  SolverDiagnostics diag;
  diag.iterations = it;
  diag.gradient_norm = pg_norm;
  diag.converged = converged;
  diag.note = std::move(note);
  diag.wall_seconds = watch.seconds();
  return detail::finish_result("optimal", solver.to_regimen(U), scen, std::move(diag));
}

inline OptimizationResult optimize_approximation(const Scenario& scen) {
  detail::StopWatch watch;
  OptimizationResult cont = optimize_control(scen);
  PiecewiseConstantRegimen reg =
      pc_approximate(cont.regimen, scen.period, scen.grid);
  SolverDiagnostics diag = cont.diagnostics;
  diag.wall_seconds = watch.seconds();
  if (!diag.note.empty()) diag.note += "; ";
  diag.note += "per-period average of the continuous optimum rounded to the grid";
  return detail::finish_result("approximation", std::move(reg), scen, std::move(diag));
}

// ---------------------------------------------------------------------------
// gradient verification: adjoint directional derivatives against central
// finite differences of J along random control perturbations

struct GradientCheckResult {
  double max_rel_error = 0.0;
  int probes = 0;
};

inline GradientCheckResult adjoint_fd_check(const Scenario& scen_in, int probes = 20,
                                            double eps = 3e-5, std::uint64_t seed = 20240917) {
  Scenario scen = scen_in;
  scen.integrator.rtol = scen.integrator.atol = 1e-12;  // probe runs are oracle grade
  detail::ControlSolver solver(scen);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.15, 0.85);
  std::normal_distribution<double> gauss(0.0, 1.0);

  GradientCheckResult out;
  out.probes = probes;
  for (int k = 0; k < probes; ++k) {
    Eigen::MatrixX3d U(solver.nodes(), 3), D(solver.nodes(), 3);
    for (int i = 0; i < U.rows(); ++i)
      for (int j = 0; j < 3; ++j) {
        U(i, j) = unif(rng);
        D(i, j) = gauss(rng);
      }
    std::vector<DenseSegment> dense;
    solver.forward(U, &dense);
    const Eigen::MatrixX3d grad = solver.gradient(U, dense);
    const double directional = (grad.array() * D.array()).sum();
    const double Jp = solver.forward(U + eps * D, nullptr);
    const double Jm = solver.forward(U - eps * D, nullptr);
    const double fd = (Jp - Jm) / (2.0 * eps);
    const double rel = std::abs(fd - directional) / std::max(std::abs(fd), 1e-12);
    out.max_rel_error = std::max(out.max_rel_error, rel);
  }
  return out;
}

}  // namespace mmopt
