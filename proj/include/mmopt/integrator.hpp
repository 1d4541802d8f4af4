#pragma once

// Adaptive Dormand-Prince 5(4) integration of the controlled system with the
// running integral of M carried as a fifth state component. The integral is
// weight-independent so one trajectory serves every objective weight vector.
// Integration always restarts at regimen switch times so no step straddles a
// control discontinuity; restarting depends only on the segment-start state,
// which makes chained runs bit-identical to single runs.

#include <mmopt/model.hpp>
#include <mmopt/regimen.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace mmopt {

using Vec5 = Eigen::Matrix<double, 5, 1>;

struct IntegratorSettings {
  double rtol = 1e-10;
  double atol = 1e-10;
  double max_step = 5.0;           // days; also bounds output spacing
  long max_steps_per_segment = 2000000;
  std::vector<double> extra_breakpoints;
};

struct IntegrationError : std::runtime_error {
  double t;
  explicit IntegrationError(const std::string& what, double time)
      : std::runtime_error(what + " at t=" + std::to_string(time)), t(time) {}
};

// One accepted step's dense-output record: quartic interpolant per component.
struct DenseStep {
  double t0, h;
  Eigen::Matrix<double, 5, 5> rcont;  // column c holds interpolation coefficient c
};

struct DenseSegment {
  std::vector<DenseStep> steps;

  Vec5 eval(double t) const {
    // steps tile the segment; pick the one containing t
    size_t lo = 0, hi = steps.size();
    while (hi - lo > 1) {
      const size_t mid = (lo + hi) / 2;
      if (steps[mid].t0 <= t) lo = mid; else hi = mid;
    }
    const DenseStep& s = steps[lo];
    const double th = std::clamp((t - s.t0) / s.h, 0.0, 1.0);
    const double th1 = 1.0 - th;
    Vec5 y;
    for (int i = 0; i < 5; ++i) {
      const auto& r = s.rcont.row(i);
      y[i] = r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])));
    }
    return y;
  }
};

namespace detail {

inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// initial step from local derivative scales only, so it is a pure function
// of the segment-start state
template <class Rhs>
double initial_step(const Rhs& f, double t0, const Vec5& y0, const Vec5& f0, double hmax,
                    double rtol, double atol) {
  const auto sc = (atol + rtol * y0.cwiseAbs().array()).matrix().eval();
  const double d0 = (y0.array() / sc.array()).matrix().norm();
  const double d1 = (f0.array() / sc.array()).matrix().norm();
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, hmax);
  const Vec5 y1 = y0 + h0 * f0;
  const Vec5 f1 = f(t0 + h0, y1);
  const double d2 = ((f1 - f0).array() / sc.array()).matrix().norm() / h0;
  const double dmax = std::max(d1, d2);
  double h1 = dmax > 1e-15 ? std::pow(0.01 / dmax, 0.2) : std::max(1e-6, h0 * 1e-3);
  return std::min({100.0 * h0, h1, hmax});
}

}  // namespace detail

// Integrate y' = f(t, y) over [t0, t1]. step_sink(t, y) fires at t0 and after
// every accepted step; dense (optional) collects interpolants covering the span.
template <class Rhs, class StepSink>
void integrate_segment(const Rhs& f, double t0, double t1, Vec5& y,
                       const IntegratorSettings& s, StepSink&& step_sink,
                       DenseSegment* dense = nullptr) {
  using namespace detail;
  if (t1 <= t0) return;
  const double span = t1 - t0;
  double t = t0;
  Vec5 k1 = f(t, y);
  double h = initial_step(f, t, y, k1, std::min(s.max_step, span), s.rtol, s.atol);
  long nsteps = 0;
  bool rejected = false;

  while (t < t1) {
    if (++nsteps > s.max_steps_per_segment)
      throw IntegrationError("integrator exceeded the step budget", t);
    const bool last = h >= t1 - t;
    if (last) h = t1 - t;
    if (!(h > std::abs(t) * 1e-14 + 1e-300))
      throw IntegrationError("integrator step size underflow", t);

    const Vec5 k2 = f(t + c2 * h, y + h * (a21 * k1));
    const Vec5 k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Vec5 k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec5 k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec5 k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec5 ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec5 k7 = f(t + h, ynew);
    if (!ynew.allFinite()) throw IntegrationError("state diverged", t);

    const Vec5 err_v = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = 0.0;
    for (int i = 0; i < 5; ++i) {
      const double sc = s.atol + s.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double q = err_v[i] / sc;
      err += q * q;
    }
    err = std::sqrt(err / 5.0);

    if (err <= 1.0) {
      if (dense) {
        DenseStep ds;
        ds.t0 = t;
        ds.h = h;
        const Vec5 ydiff = ynew - y;
        const Vec5 bspl = h * k1 - ydiff;
        ds.rcont.col(0) = y;
        ds.rcont.col(1) = ydiff;
        ds.rcont.col(2) = bspl;
        ds.rcont.col(3) = ydiff - h * k7 - bspl;
        ds.rcont.col(4) = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        dense->steps.push_back(ds);
      }
      t = last ? t1 : t + h;
      y = ynew;
      k1 = k7;  // first-same-as-last
      step_sink(t, y);
      double fac = 0.9 * std::pow(err > 0.0 ? 1.0 / err : 1e10, 0.2);
      fac = std::clamp(fac, 0.2, rejected ? 1.0 : 5.0);
      h = std::min(h * fac, s.max_step);
      rejected = false;
    } else {
      const double fac = std::clamp(0.9 * std::pow(1.0 / err, 0.2), 0.2, 1.0);
      h *= fac;
      rejected = true;
    }
  }
}

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<double> integral;  // running integral of M
  Dose dose_integral_total = Dose::Zero();  // exact per-drug dose integral over the horizon

  const State& final_state() const { return states.back(); }
  double horizon() const { return times.back(); }
};

namespace detail {

// RHS over one segment where the dose is constant: effects hoisted out.
struct ConstantDoseRhs {
  const ModelParameters* p;
  EffectBundle<double> eff;

  Vec5 operator()(double, const Vec5& y) const {
    Vec5 dy;
    dy.head<4>() = rhs_core<double>(y.head<4>(), eff, *p);
    dy[4] = y[0];
    return dy;
  }
};

// RHS where the dose varies linearly across the segment.
struct LinearDoseRhs {
  const ModelParameters* p;
  const Pharmacodynamics* q;
  double t0, t1;
  Dose u0, u1;

  Dose dose(double t) const {
    const double w = (t - t0) / (t1 - t0);
    return (1.0 - w) * u0 + w * u1;
  }
  Vec5 operator()(double t, const Vec5& y) const {
    Vec5 dy;
    dy.head<4>() = rhs_controlled<double>(y.head<4>(), dose(t), *p, *q);
    dy[4] = y[0];
    return dy;
  }
};

inline std::vector<double> assemble_breakpoints(const Regimen& r, double T,
                                                const IntegratorSettings& s) {
  std::vector<double> bp{0.0, T};
  for (double t : switch_times(r, T))
    if (t > 0.0 && t < T) bp.push_back(t);
  for (double t : s.extra_breakpoints)
    if (t > 0.0 && t < T) bp.push_back(t);
  std::sort(bp.begin(), bp.end());
  // merge near-coincident points so rounding differences cannot leave sliver
  // segments behind
  const double tol = 1e-12 * std::max(1.0, T);
  std::vector<double> out{bp.front()};
  for (double t : bp)
    if (t - out.back() > tol) out.push_back(t);
  out.back() = T;
  return out;
}

}  // namespace detail

// Simulate the controlled system under a regimen, recording every accepted
// step. The fifth component accumulates the integral of M; the per-drug dose
// integral is accumulated segment by segment in exact closed form.
inline Trajectory simulate(const State& x0, const Regimen& regimen, double T,
                           const ModelParameters& p, const Pharmacodynamics& q,
                           const IntegratorSettings& settings = {},
                           std::vector<DenseSegment>* dense = nullptr) {
  if (!(T >= 0.0)) throw std::invalid_argument("simulate: horizon must be >= 0");
  if (regimen_duration(regimen) < T)
    throw std::invalid_argument("simulate: regimen does not cover the horizon");

  Trajectory traj;
  Vec5 y;
  y.head<4>() = x0;
  y[4] = 0.0;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.integral.push_back(0.0);
  if (T == 0.0) return traj;

  const auto bp = detail::assemble_breakpoints(regimen, T, settings);
  auto sink = [&](double t, const Vec5& yy) {
    traj.times.push_back(t);
    traj.states.push_back(yy.head<4>());
    traj.integral.push_back(yy[4]);
  };

  for (size_t seg = 0; seg + 1 < bp.size(); ++seg) {
    const double t0 = bp[seg], t1 = bp[seg + 1];
    DenseSegment* ds = nullptr;
    if (dense) {
      dense->emplace_back();
      ds = &dense->back();
    }
    if (std::holds_alternative<SampledRegimen>(regimen)) {
      // sampled mesh nodes are breakpoints, so the dose is linear here
      detail::LinearDoseRhs rhs{&p, &q, t0, t1, dose_at(regimen, t0), dose_at(regimen, t1)};
      integrate_segment(rhs, t0, t1, y, settings, sink, ds);
    } else {
      const Dose u = dose_at(regimen, t0);
      detail::ConstantDoseRhs rhs{&p, EffectBundle<double>::from_dose(Vec3<double>(u), q)};
      integrate_segment(rhs, t0, t1, y, settings, sink, ds);
    }
    traj.dose_integral_total += dose_integral(regimen, t0, t1);
  }
  return traj;
}

// Endpoint-only fast path used by the enumeration searches: same RHS and
// settings as simulate over one constant-dose segment, endpoint state only.
inline Vec5 advance_constant_dose(Vec5 y, double t0, double t1, const Dose& u,
                                  const ModelParameters& p, const Pharmacodynamics& q,
                                  const IntegratorSettings& settings) {
  detail::ConstantDoseRhs rhs{&p, EffectBundle<double>::from_dose(Vec3<double>(u), q)};
  integrate_segment(rhs, t0, t1, y, settings, [](double, const Vec5&) {});
  return y;
}

// Max relative change of each population over the trailing window, measured
// against the final value.
inline std::array<bool, 4> steady_state_check(const Trajectory& traj, double window,
                                              double tol) {
  if (traj.horizon() <= window)
    throw std::invalid_argument("steady_state_check: window must be shorter than the horizon");
  const double t_start = traj.horizon() - window;
  std::array<bool, 4> ok{};
  for (int c = 0; c < 4; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (size_t i = 0; i < traj.times.size(); ++i) {
      if (traj.times[i] < t_start) continue;
      lo = std::min(lo, traj.states[i][c]);
      hi = std::max(hi, traj.states[i][c]);
    }
    const double ref = std::max(std::abs(traj.states.back()[c]), 1e-300);
    ok[c] = (hi - lo) / ref < tol;
  }
  return ok;
}

}  // namespace mmopt
