#pragma once

// Four-population tumor-immune dynamics under three-drug therapy.
// State order: [M, T_C, N, T_R] = M-protein (g/dL), cytotoxic T cells,
// NK cells, regulatory T cells (cells/uL).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmopt {

template <class S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <class S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S> using Mat4 = Eigen::Matrix<S, 4, 4>;
template <class S> using Mat43 = Eigen::Matrix<S, 4, 3>;

using State = Vec4<double>;
using Dose = Vec3<double>;

inline constexpr int kM = 0;   // M-protein
inline constexpr int kTC = 1;  // cytotoxic T cells
inline constexpr int kN = 2;   // NK cells
inline constexpr int kTR = 3;  // regulatory T cells

struct ModelParameters {
  // myeloma
  double s_M = 0.001, r_M = 0.0175, K_M = 10.0, delta_M = 0.002;
  // kill pathways acting on M
  double a_NM = 5.0, b_NM = 150.0, a_CM = 5.0, b_CM = 375.0, a_CNM = 8.0;
  // self/Treg inhibition of the kill terms; a_MM + a_RM <= 1
  double a_MM = 0.5, b_MM = 3.0, a_RM = 0.5, b_RM = 25.0;
  // CTL
  double r_C = 0.013, K_C = 800.0, delta_C = 0.02;
  double a_MC = 5.0, b_MC = 3.0, a_NC = 1.0, b_NC = 150.0;
  // NK
  double s_N = 0.03, r_N = 0.04, K_N = 450.0, delta_N = 0.025;
  double a_CN = 1.0, b_CN = 375.0;
  // Treg
  double r_R = 0.0831, K_R = 80.0, delta_R = 0.0757;
  double a_MR = 2.0, b_MR = 3.0;

  State x0{4.0, 464.0, 227.0, 42.0};

  std::vector<std::string> validate() const {
    std::vector<std::string> bad;
    auto nonneg = [&](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << name << " must be >= 0 (got " << v << ")";
        bad.push_back(os.str());
      }
    };
    nonneg(s_M, "s_M"); nonneg(r_M, "r_M"); nonneg(K_M, "K_M"); nonneg(delta_M, "delta_M");
    nonneg(a_NM, "a_NM"); nonneg(b_NM, "b_NM"); nonneg(a_CM, "a_CM"); nonneg(b_CM, "b_CM");
    nonneg(a_CNM, "a_CNM"); nonneg(a_MM, "a_MM"); nonneg(b_MM, "b_MM"); nonneg(a_RM, "a_RM");
    nonneg(b_RM, "b_RM"); nonneg(r_C, "r_C"); nonneg(K_C, "K_C"); nonneg(delta_C, "delta_C");
    nonneg(a_MC, "a_MC"); nonneg(b_MC, "b_MC"); nonneg(a_NC, "a_NC"); nonneg(b_NC, "b_NC");
    nonneg(s_N, "s_N"); nonneg(r_N, "r_N"); nonneg(K_N, "K_N"); nonneg(delta_N, "delta_N");
    nonneg(a_CN, "a_CN"); nonneg(b_CN, "b_CN"); nonneg(r_R, "r_R"); nonneg(K_R, "K_R");
    nonneg(delta_R, "delta_R"); nonneg(a_MR, "a_MR"); nonneg(b_MR, "b_MR");
    if (a_MM + a_RM > 1.0) {
      std::ostringstream os;
      os << "a_MM + a_RM must be <= 1 (got " << a_MM + a_RM << ")";
      bad.push_back(os.str());
    }
    if (!(K_M > 0.0)) bad.push_back("K_M must be > 0");
    if (!(K_C > 0.0)) bad.push_back("K_C must be > 0");
    if (!(K_N > 0.0)) bad.push_back("K_N must be > 0");
    if (!(K_R > 0.0)) bad.push_back("K_R must be > 0");
    for (int i = 0; i < 4; ++i)
      if (!(x0[i] > 0.0) || !std::isfinite(x0[i])) {
        std::ostringstream os;
        os << "initial state component " << i << " must be > 0 (got " << x0[i] << ")";
        bad.push_back(os.str());
      }
    // b = 0 together with a zero population makes a kill fraction 0/0
    if (b_NM == 0.0 || b_CM == 0.0 || b_MM == 0.0 || b_RM == 0.0 || b_MC == 0.0 ||
        b_NC == 0.0 || b_CN == 0.0 || b_MR == 0.0)
      bad.push_back("half-saturation constants b_* must be > 0 (degenerate 0/0 at zero population)");
    return bad;
  }
};

// Emax effect parameters. Effects 1..9 respond to u1, 10..13 to u2, 14 to u3
// (0-based indices 0..8, 9..12, 13 below).
struct Pharmacodynamics {
  std::array<double, 14> phi{};
  std::array<double, 14> psi{};
  Dose u_max{204.93, 3.5325, 95.0};

  Pharmacodynamics() {
    phi.fill(0.5);
    for (int i = 0; i < 9; ++i) psi[i] = 40.986;
    for (int i = 9; i < 13; ++i) psi[i] = 0.7065;
    psi[13] = 19.0;
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> bad;
    for (int i = 0; i < 14; ++i) {
      if (!(phi[i] >= 0.0 && phi[i] <= 1.0)) {
        std::ostringstream os;
        os << "phi_" << i + 1 << " must be in [0,1] (got " << phi[i] << ")";
        bad.push_back(os.str());
      }
      if (!(psi[i] > 0.0)) {
        std::ostringstream os;
        os << "psi_" << i + 1 << " must be > 0 (got " << psi[i] << ")";
        bad.push_back(os.str());
      }
    }
    for (int i = 0; i < 3; ++i)
      if (!(u_max[i] > 0.0)) {
        std::ostringstream os;
        os << "u_max[" << i << "] must be > 0 (got " << u_max[i] << ")";
        bad.push_back(os.str());
      }
    return bad;
  }
};

inline void throw_if_invalid(const std::vector<std::string>& bad, const char* what) {
  if (bad.empty()) return;
  std::string msg = std::string(what) + ":";
  for (const auto& m : bad) msg += "\n  " + m;
  throw std::invalid_argument(msg);
}

// phi*u/(psi+u), saturating in [0, phi)
template <class S>
S emax(S u, double phi, double psi) {
  if (!(psi > 0.0)) throw std::domain_error("emax: psi must be > 0");
  if (u < S(0)) throw std::domain_error("emax: dose must be >= 0");
  return phi * u / (psi + u);
}

// Multiplicative factors the 14 effects contribute to the rate equations.
// identity() is the drug-free bundle; from_dose(0) reproduces it exactly,
// which keeps the controlled system bit-identical to the uncontrolled one
// at zero dose.
template <class S>
struct EffectBundle {
  S growth_inhibition;  // 1 - E5 - E12, scales r_M
  S death_boost;        // 1 + E9, scales delta_M
  S nk_kill_boost;      // 1 + E6 + E14, scales a_NM
  S cnm_kill_boost;     // 1 + E4, scales a_CNM
  S ctl_prolif_shift;   // E2 - E11
  S nk_prolif_shift;    // E1 - E10
  S cn_boost;           // 1 + E3, scales the CTL->NK support
  S treg_suppression;   // 1 - E13, scales r_R
  S mm_relief_nk;       // 1 - E7, scales the a_MM inhibition in the NK bracket
  S mm_relief_ctl;      // 1 - E8, same in the direct CTL bracket

  static EffectBundle identity() {
    return {S(1), S(1), S(1), S(1), S(0), S(0), S(1), S(1), S(1), S(1)};
  }

  static EffectBundle from_dose(const Vec3<S>& u, const Pharmacodynamics& q) {
    std::array<S, 14> E;
    for (int i = 0; i < 9; ++i) E[i] = emax(u[0], q.phi[i], q.psi[i]);
    for (int i = 9; i < 13; ++i) E[i] = emax(u[1], q.phi[i], q.psi[i]);
    E[13] = emax(u[2], q.phi[13], q.psi[13]);
    EffectBundle b;
    b.growth_inhibition = S(1) - E[4] - E[11];
    b.death_boost = S(1) + E[8];
    b.nk_kill_boost = S(1) + E[5] + E[13];
    b.cnm_kill_boost = S(1) + E[3];
    b.ctl_prolif_shift = E[1] - E[10];
    b.nk_prolif_shift = E[0] - E[9];
    b.cn_boost = S(1) + E[2];
    b.treg_suppression = S(1) - E[12];
    b.mm_relief_nk = S(1) - E[6];
    b.mm_relief_ctl = S(1) - E[7];
    return b;
  }
};

// Shared rate core. The M kill bracket groups the NK-mediated pathways over
// N/(b_NM+N) with the direct CTL pathway separate; each bracket carries its
// own inhibition factor 1 - g_M*(relief) - g_R.
template <class S>
Vec4<S> rhs_core(const Vec4<S>& x, const EffectBundle<S>& e, const ModelParameters& p) {
  const S M = x[kM], TC = x[kTC], N = x[kN], TR = x[kTR];

  const S eN = N / (p.b_NM + N);
  const S eC = TC / (p.b_CM + TC);
  const S gM = p.a_MM * M / (p.b_MM + M);
  const S gR = p.a_RM * TR / (p.b_RM + TR);
  const S inhib_nk = S(1) - gM * e.mm_relief_nk - gR;
  const S inhib_ctl = S(1) - gM * e.mm_relief_ctl - gR;
  const S nk_bracket = p.a_NM * e.nk_kill_boost + p.a_CNM * eC * e.cnm_kill_boost;

  Vec4<S> dx;
  dx[kM] = p.s_M + p.r_M * e.growth_inhibition * (S(1) - M / p.K_M) * M -
           p.delta_M * e.death_boost * M -
           p.delta_M * M * (eN * nk_bracket * inhib_nk + p.a_CM * eC * inhib_ctl);

  const S hMC = p.a_MC * M / (p.b_MC + M);
  const S hNC = p.a_NC * N / (p.b_NC + N);
  dx[kTC] = p.r_C * (S(1) - TC / p.K_C) * TC * (S(1) + e.ctl_prolif_shift + hMC + hNC) -
            p.delta_C * TC;

  const S hCN = p.a_CN * TC / (p.b_CN + TC);
  dx[kN] = p.s_N + p.r_N * (S(1) - N / p.K_N) * N *
                       (S(1) + e.nk_prolif_shift + hCN * e.cn_boost) -
           p.delta_N * N;

  const S hMR = p.a_MR * M / (p.b_MR + M);
  dx[kTR] = p.r_R * (S(1) - TR / p.K_R) * TR * e.treg_suppression * (S(1) + hMR) -
            p.delta_R * TR;
  return dx;
}

template <class S>
Vec4<S> rhs_uncontrolled(const Vec4<S>& x, const ModelParameters& p) {
  return rhs_core(x, EffectBundle<S>::identity(), p);
}

template <class S>
Vec4<S> rhs_controlled(const Vec4<S>& x, const Vec3<S>& u, const ModelParameters& p,
                       const Pharmacodynamics& q) {
  return rhs_core(x, EffectBundle<S>::from_dose(u, q), p);
}

// Analytic Jacobians of rhs_controlled with respect to state and dose.
// E[i], dE[i] follow the 0-based effect indexing of EffectBundle.
template <class S>
void rhs_jacobians(const Vec4<S>& x, const Vec3<S>& u, const ModelParameters& p,
                   const Pharmacodynamics& q, Mat4<S>& fx, Mat43<S>& fu) {
  const S M = x[kM], TC = x[kTC], N = x[kN], TR = x[kTR];

  std::array<S, 14> E, dE;
  for (int i = 0; i < 14; ++i) {
    const S ui = i < 9 ? u[0] : (i < 13 ? u[1] : u[2]);
    const S den = q.psi[i] + ui;
    E[i] = q.phi[i] * ui / den;
    dE[i] = q.phi[i] * q.psi[i] / (den * den);
  }

  const S eN = N / (p.b_NM + N), deN = p.b_NM / ((p.b_NM + N) * (p.b_NM + N));
  const S eC = TC / (p.b_CM + TC), deC = p.b_CM / ((p.b_CM + TC) * (p.b_CM + TC));
  const S gM = p.a_MM * M / (p.b_MM + M), dgM = p.a_MM * p.b_MM / ((p.b_MM + M) * (p.b_MM + M));
  const S gR = p.a_RM * TR / (p.b_RM + TR), dgR = p.a_RM * p.b_RM / ((p.b_RM + TR) * (p.b_RM + TR));
  const S D1 = S(1) - gM * (S(1) - E[6]) - gR;
  const S D2 = S(1) - gM * (S(1) - E[7]) - gR;
  const S B1 = p.a_NM * (S(1) + E[5] + E[13]) + p.a_CNM * eC * (S(1) + E[3]);
  const S cg = S(1) - E[4] - E[11];

  const S hMC = p.a_MC * M / (p.b_MC + M), dhMC = p.a_MC * p.b_MC / ((p.b_MC + M) * (p.b_MC + M));
  const S hNC = p.a_NC * N / (p.b_NC + N), dhNC = p.a_NC * p.b_NC / ((p.b_NC + N) * (p.b_NC + N));
  const S hCN = p.a_CN * TC / (p.b_CN + TC), dhCN = p.a_CN * p.b_CN / ((p.b_CN + TC) * (p.b_CN + TC));
  const S hMR = p.a_MR * M / (p.b_MR + M), dhMR = p.a_MR * p.b_MR / ((p.b_MR + M) * (p.b_MR + M));

  fx.setZero();
  fx(0, 0) = p.r_M * cg * (S(1) - S(2) * M / p.K_M) - p.delta_M * (S(1) + E[8]) -
             p.delta_M * eN * B1 * (D1 - M * (S(1) - E[6]) * dgM) -
             p.delta_M * p.a_CM * eC * (D2 - M * (S(1) - E[7]) * dgM);
  fx(0, 1) = -p.delta_M * M * eN * p.a_CNM * (S(1) + E[3]) * D1 * deC -
             p.delta_M * M * p.a_CM * D2 * deC;
  fx(0, 2) = -p.delta_M * M * B1 * D1 * deN;
  fx(0, 3) = p.delta_M * M * dgR * (eN * B1 + p.a_CM * eC);

  const S PC = S(1) + E[1] - E[10] + hMC + hNC;
  fx(1, 0) = p.r_C * (S(1) - TC / p.K_C) * TC * dhMC;
  fx(1, 1) = p.r_C * (S(1) - S(2) * TC / p.K_C) * PC - p.delta_C;
  fx(1, 2) = p.r_C * (S(1) - TC / p.K_C) * TC * dhNC;

  const S PN = S(1) + E[0] - E[9] + hCN * (S(1) + E[2]);
  fx(2, 1) = p.r_N * (S(1) - N / p.K_N) * N * (S(1) + E[2]) * dhCN;
  fx(2, 2) = p.r_N * (S(1) - S(2) * N / p.K_N) * PN - p.delta_N;

  fx(3, 0) = p.r_R * (S(1) - TR / p.K_R) * TR * (S(1) - E[12]) * dhMR;
  fx(3, 3) = p.r_R * (S(1) - S(2) * TR / p.K_R) * (S(1) - E[12]) * (S(1) + hMR) - p.delta_R;

  fu.setZero();
  fu(0, 0) = -p.r_M * (S(1) - M / p.K_M) * M * dE[4] - p.delta_M * M * dE[8] -
             p.delta_M * M * eN * (p.a_NM * dE[5] + p.a_CNM * eC * dE[3]) * D1 -
             p.delta_M * M * eN * B1 * gM * dE[6] -
             p.delta_M * M * p.a_CM * eC * gM * dE[7];
  fu(0, 1) = -p.r_M * (S(1) - M / p.K_M) * M * dE[11];
  fu(0, 2) = -p.delta_M * M * eN * p.a_NM * dE[13] * D1;
  fu(1, 0) = p.r_C * (S(1) - TC / p.K_C) * TC * dE[1];
  fu(1, 1) = -p.r_C * (S(1) - TC / p.K_C) * TC * dE[10];
  fu(2, 0) = p.r_N * (S(1) - N / p.K_N) * N * (dE[0] + hCN * dE[2]);
  fu(2, 1) = -p.r_N * (S(1) - N / p.K_N) * N * dE[9];
  fu(3, 1) = -p.r_R * (S(1) - TR / p.K_R) * TR * dE[12] * (S(1) + hMR);
}

}  // namespace mmopt
