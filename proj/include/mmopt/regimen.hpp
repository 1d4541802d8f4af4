#pragma once

// Admissible dosing regimens: constant, piecewise-constant on a period grid
// with discrete levels, and mesh-sampled with linear interpolation.

#include <mmopt/model.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

namespace mmopt {

struct DoseGrid {
  // allowed levels per drug, ascending
  std::array<std::vector<double>, 3> levels{
      std::vector<double>{0.0, 51.2325, 102.465, 153.6975, 204.93},
      std::vector<double>{0.0, 0.8831, 1.7663, 2.6494, 3.5325},
      std::vector<double>{0.0, 90.0}};

  std::vector<std::string> validate(const Dose& u_max) const {
    std::vector<std::string> bad;
    for (int i = 0; i < 3; ++i) {
      if (levels[i].empty()) bad.push_back("dose grid for drug " + std::to_string(i + 1) + " is empty");
      for (size_t j = 0; j < levels[i].size(); ++j) {
        if (j > 0 && !(levels[i][j] > levels[i][j - 1]))
          bad.push_back("dose grid for drug " + std::to_string(i + 1) + " must be strictly ascending");
        if (levels[i][j] < 0.0 || levels[i][j] > u_max[i])
          bad.push_back("dose grid level " + std::to_string(levels[i][j]) + " for drug " +
                        std::to_string(i + 1) + " outside [0, u_max]");
      }
    }
    return bad;
  }
};

// Cartesian product of the grid levels, drug 1 slowest (lexicographic).
inline std::vector<Dose> enumerate_grid(const DoseGrid& g) {
  std::vector<Dose> out;
  out.reserve(g.levels[0].size() * g.levels[1].size() * g.levels[2].size());
  for (double u1 : g.levels[0])
    for (double u2 : g.levels[1])
      for (double u3 : g.levels[2]) out.push_back(Dose{u1, u2, u3});
  return out;
}

struct ConstantRegimen {
  Dose u{0.0, 0.0, 0.0};
};

struct PiecewiseConstantRegimen {
  double period = 90.0;
  std::vector<Dose> doses;  // one per period, tiling [0, period*doses.size()]
};

struct SampledRegimen {
  std::vector<double> times;  // strictly increasing, spans the horizon
  std::vector<Dose> doses;    // nodal values, linear in between
};

using Regimen = std::variant<ConstantRegimen, PiecewiseConstantRegimen, SampledRegimen>;

// Horizon intrinsically covered by the regimen; constants cover any horizon.
inline double regimen_duration(const Regimen& r) {
  if (std::holds_alternative<ConstantRegimen>(r)) return std::numeric_limits<double>::infinity();
  if (const auto* pc = std::get_if<PiecewiseConstantRegimen>(&r))
    return pc->period * static_cast<double>(pc->doses.size());
  return std::get<SampledRegimen>(r).times.back();
}

// Dose in effect at time t. Piecewise regimens are right-continuous: the
// dose of a new period applies from its start time onward.
inline Dose dose_at(const Regimen& r, double t) {
  if (t < 0.0 || t > regimen_duration(r))
    throw std::out_of_range("dose_at: time outside the regimen domain");
  if (const auto* c = std::get_if<ConstantRegimen>(&r)) return c->u;
  if (const auto* pc = std::get_if<PiecewiseConstantRegimen>(&r)) {
    auto idx = static_cast<size_t>(std::floor(t / pc->period));
    if (idx >= pc->doses.size()) idx = pc->doses.size() - 1;  // t == duration
    return pc->doses[idx];
  }
  const auto& s = std::get<SampledRegimen>(r);
  auto it = std::upper_bound(s.times.begin(), s.times.end(), t);
  if (it == s.times.begin()) return s.doses.front();
  if (it == s.times.end()) return s.doses.back();
  auto i = static_cast<size_t>(it - s.times.begin()) - 1;
  const double w = (t - s.times[i]) / (s.times[i + 1] - s.times[i]);
  return ((1.0 - w) * s.doses[i] + w * s.doses[i + 1]).cwiseMax(0.0);
}

// Interior times where the control is not smooth; integration restarts there.
// Period multiples are computed by multiplication so equal times reproduce
// bit-identically wherever they are derived.
inline std::vector<double> switch_times(const Regimen& r, double T) {
  std::vector<double> out;
  if (const auto* pc = std::get_if<PiecewiseConstantRegimen>(&r)) {
    for (size_t k = 1; pc->period * static_cast<double>(k) < T; ++k)
      out.push_back(pc->period * static_cast<double>(k));
  } else if (const auto* s = std::get_if<SampledRegimen>(&r)) {
    for (size_t i = 1; i + 1 < s->times.size(); ++i)
      if (s->times[i] < T) out.push_back(s->times[i]);
  }
  return out;
}

// Exact integral of the dose vector over [t0, t1].
inline Dose dose_integral(const Regimen& r, double t0, double t1) {
  if (t1 < t0) throw std::invalid_argument("dose_integral: t1 < t0");
  if (const auto* c = std::get_if<ConstantRegimen>(&r)) return c->u * (t1 - t0);
  Dose acc = Dose::Zero();
  if (const auto* pc = std::get_if<PiecewiseConstantRegimen>(&r)) {
    for (size_t k = 0; k < pc->doses.size(); ++k) {
      const double a = std::max(t0, pc->period * static_cast<double>(k));
      const double b = std::min(t1, pc->period * static_cast<double>(k + 1));
      if (b > a) acc += pc->doses[k] * (b - a);
    }
    return acc;
  }
  const auto& s = std::get<SampledRegimen>(r);
  for (size_t i = 0; i + 1 < s.times.size(); ++i) {
    const double a = std::max(t0, s.times[i]);
    const double b = std::min(t1, s.times[i + 1]);
    if (b <= a) continue;
    const double h = s.times[i + 1] - s.times[i];
    const double wa = (a - s.times[i]) / h, wb = (b - s.times[i]) / h;
    const Dose ua = (1.0 - wa) * s.doses[i] + wa * s.doses[i + 1];
    const Dose ub = (1.0 - wb) * s.doses[i] + wb * s.doses[i + 1];
    acc += 0.5 * (ua + ub) * (b - a);  // trapezoid is exact on a linear segment
  }
  return acc;
}

// Nearest grid level; exact ties resolve to the lower level.
inline double nearest_level(double v, const std::vector<double>& levels) {
  double best = levels.front();
  double dist = std::abs(v - best);
  for (double l : levels) {
    const double d = std::abs(v - l);
    if (d < dist) {
      dist = d;
      best = l;
    }
  }
  return best;
}

// Per-period dose averaging followed by rounding to the grid.
inline PiecewiseConstantRegimen pc_approximate(const Regimen& r, double period,
                                               const DoseGrid& grid) {
  const double T = regimen_duration(r);
  if (!std::isfinite(T))
    throw std::invalid_argument("pc_approximate: regimen has no finite duration");
  const double np_real = T / period;
  const auto np = static_cast<size_t>(std::llround(np_real));
  if (np == 0 || std::abs(np_real - static_cast<double>(np)) > 1e-9)
    throw std::invalid_argument("pc_approximate: horizon not divisible by the period");
  for (const auto& lv : grid.levels)
    if (lv.empty()) throw std::invalid_argument("pc_approximate: empty dose grid");

  PiecewiseConstantRegimen out;
  out.period = period;
  out.doses.resize(np);
  for (size_t k = 0; k < np; ++k) {
    const Dose mean = dose_integral(r, period * static_cast<double>(k),
                                    std::min(T, period * static_cast<double>(k + 1))) /
                      period;
    for (int i = 0; i < 3; ++i) out.doses[k][i] = nearest_level(mean[i], grid.levels[i]);
  }
  return out;
}

}  // namespace mmopt
