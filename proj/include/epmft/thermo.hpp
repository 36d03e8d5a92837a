#pragma once

// End-point-measurement (EPM) and two-point-measurement (TPM) energy
// statistics, the thermal/coherent split of the initial state, and the
// entropy-production terms entering the EPM fluctuation theorems.
//
// All averages are closed-form sums over the four (initial, final) outcomes.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "epmft/channel.hpp"
#include "epmft/errors.hpp"
#include "epmft/linops.hpp"
#include "epmft/state.hpp"

namespace epmft {

// Probabilities at or below this are exact zeros for logarithms.
inline constexpr double kZeroProbability = 1e-300;

using OutcomeTable = std::array<std::array<double, 2>, 2>;  // [i][f]

template <LinearChannel Map>
std::array<double, 2> final_populations(const Map& map, const Matrix2& a) {
  const Matrix2 out = apply(map, a);
  return {population(out, 0), population(out, 1)};
}

struct ThermalDecomposition {
  double beta = 0.0;
  double partition = 2.0;
  std::array<double, 2> populations{};
  Matrix2 thermal;
  Matrix2 chi;
  EnergyLevels levels;
};

// rho0 = rho_th(beta) + chi with beta read off the population ratio.
inline ThermalDecomposition decompose_state(const DensityMatrix& rho0, const EnergyLevels& levels) {
  const auto p = rho0.populations();
  if (p[0] <= kZeroProbability || p[1] <= kZeroProbability)
    raise(Errc::InfiniteBeta, "a vanishing population admits no finite inverse temperature");
  ThermalDecomposition d;
  d.levels = levels;
  d.populations = p;
  const double gap = levels.energy(0) - levels.energy(1);
  if (gap == 0.0) {
    if (std::abs(p[0] - p[1]) > 1e-15) raise(Errc::DomainError, "degenerate levels with unequal populations");
    d.beta = 0.0;
  } else {
    d.beta = std::log(p[1] / p[0]) / gap;
  }
  d.partition = std::exp(-d.beta * levels.energy(0)) + std::exp(-d.beta * levels.energy(1));
  d.thermal = rho0.diagonal_part();
  d.chi = rho0.coherence();
  return d;
}

// Both endpoints share the same time-independent Hamiltonian here, so the
// free-energy difference vanishes; callers with distinct endpoint spectra
// supply it explicitly.
inline double free_energy_change(double beta, const EnergyLevels& initial, const EnergyLevels& final) {
  if (beta == 0.0) return 0.0;
  const auto z = [&](const EnergyLevels& l) {
    return std::exp(-beta * l.energy(0)) + std::exp(-beta * l.energy(1));
  };
  return -std::log(z(final) / z(initial)) / beta;
}

struct JointDistribution {
  OutcomeTable joint{};
  std::array<double, 2> initial{};
  std::array<double, 2> final{};
  std::array<double, 2> energies{};

  double energy_change(std::size_t i, std::size_t f) const { return energies[f] - energies[i]; }

  double total() const { return joint[0][0] + joint[0][1] + joint[1][0] + joint[1][1]; }

  double mean_energy_change() const {
    double m = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t f = 0; f < 2; ++f) m += joint[i][f] * energy_change(i, f);
    return m;
  }

  // Largest |P(i,f) - P_in(i) P_fin(f)|.
  double factorization_defect() const {
    double d = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t f = 0; f < 2; ++f) d = std::max(d, std::abs(joint[i][f] - initial[i] * final[f]));
    return d;
  }
};

using EpmDistribution = JointDistribution;
using TpmDistribution = JointDistribution;

template <LinearChannel Map>
EpmDistribution epm_distribution(const DensityMatrix& rho0, const Map& map, const EnergyLevels& levels) {
  EpmDistribution d;
  d.energies = levels.values();
  d.initial = rho0.populations();
  d.final = final_populations(map, rho0.matrix());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t f = 0; f < 2; ++f) d.joint[i][f] = d.initial[i] * d.final[f];
  return d;
}

template <LinearChannel Map>
TpmDistribution tpm_distribution(const DensityMatrix& rho0, const Map& map, const EnergyLevels& levels) {
  TpmDistribution d;
  d.energies = levels.values();
  d.initial = rho0.populations();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto cond = final_populations(map, projector(i));
    for (std::size_t f = 0; f < 2; ++f) d.joint[i][f] = d.initial[i] * cond[f];
  }
  for (std::size_t f = 0; f < 2; ++f) d.final[f] = d.joint[0][f] + d.joint[1][f];
  return d;
}

// Per-outcome entropy production along the forward EPM trajectory, with the
// backward process started in the beta-thermal state of the final Hamiltonian.
struct EntropyLedger {
  double beta = 0.0;
  double delta_f = 0.0;
  EnergyLevels levels;

  std::array<double, 2> p_in{};             // tr(Pi_i rho0)
  std::array<double, 2> p_fin{};            // tr(Pi_f Phi(rho0))
  std::array<double, 2> p_fin_thermal{};    // tr(Pi_f Phi(rho_th))
  std::array<double, 2> p_fin_coherence{};  // tr(Pi_f Phi(chi))
  std::array<double, 2> p_rev_in{};         // tr(Pi_f rho_B)
  std::array<double, 2> p_rev_fin{};        // tr(Pi_i Phi~(rho_B))

  OutcomeTable delta_e{};
  OutcomeTable delta_sigma{};
  std::array<double, 2> delta_Sigma_by_final{};  // depends on f only

  double mean_delta_e = 0.0;
  double mean_delta_sigma = 0.0;
  double mean_delta_Sigma = 0.0;
  double exp_mean_Sigma = 0.0;  // <exp(-dSigma)>
  double exp_mean_total = 0.0;  // <exp(-beta dE - dsigma - dSigma)>

  double delta_Sigma(std::size_t /*i*/, std::size_t f) const { return delta_Sigma_by_final[f]; }
  double forward_joint(std::size_t i, std::size_t f) const { return p_in[i] * p_fin[f]; }
  double backward_joint(std::size_t f, std::size_t i) const { return p_rev_in[f] * p_rev_fin[i]; }
};

namespace detail {

inline void fill_averages(EntropyLedger& l) {
  l.mean_delta_e = l.mean_delta_sigma = l.mean_delta_Sigma = 0.0;
  l.exp_mean_Sigma = l.exp_mean_total = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t f = 0; f < 2; ++f) {
      const double w = l.forward_joint(i, f);
      if (w == 0.0) continue;
      const double dS = l.delta_Sigma(i, f);
      l.mean_delta_e += w * l.delta_e[i][f];
      l.mean_delta_sigma += w * l.delta_sigma[i][f];
      l.mean_delta_Sigma += w * dS;
      l.exp_mean_Sigma += w * std::exp(-dS);
      l.exp_mean_total += w * std::exp(-l.beta * l.delta_e[i][f] - l.delta_sigma[i][f] - dS);
    }
}

inline double coherence_log_term(double p_coherence, double p_thermal, std::size_t f) {
  if (p_thermal <= kZeroProbability)
    raise(Errc::DivergentEntropyTerm, "thermal final probability vanishes for outcome " + std::to_string(f));
  const double arg = 1.0 + p_coherence / p_thermal;
  if (arg <= kZeroProbability)
    raise(Errc::NonPhysicalCoherenceRatio, "1 + p(chi)/p(th) = " + std::to_string(arg) + " for outcome " +
                                               std::to_string(f));
  return std::log(arg);
}

}  // namespace detail

template <LinearChannel Forward, LinearChannel Reversed>
EntropyLedger entropy_terms(const DensityMatrix& rho0, const Forward& forward, const Reversed& reversed,
                            const EnergyLevels& levels) {
  const ThermalDecomposition d = decompose_state(rho0, levels);
  EntropyLedger l;
  l.beta = d.beta;
  l.levels = levels;
  l.delta_f = free_energy_change(d.beta, levels, levels);
  l.p_in = d.populations;
  l.p_fin = final_populations(forward, rho0.matrix());
  l.p_fin_thermal = final_populations(forward, d.thermal);
  l.p_fin_coherence = final_populations(forward, d.chi);

  const Matrix2 rho_b = thermal_state(d.beta, levels).matrix();
  l.p_rev_in = {population(rho_b, 0), population(rho_b, 1)};
  l.p_rev_fin = final_populations(reversed, rho_b);

  for (std::size_t f = 0; f < 2; ++f)
    l.delta_Sigma_by_final[f] = detail::coherence_log_term(l.p_fin_coherence[f], l.p_fin_thermal[f], f);
  for (std::size_t i = 0; i < 2; ++i) {
    if (l.p_rev_fin[i] <= kZeroProbability)
      raise(Errc::DivergentEntropyTerm, "backward final probability vanishes for outcome " + std::to_string(i));
    for (std::size_t f = 0; f < 2; ++f) {
      l.delta_e[i][f] = levels.energy(f) - levels.energy(i);
      l.delta_sigma[i][f] = std::log(l.p_fin_thermal[f]) - std::log(l.p_rev_fin[i]);
    }
  }
  detail::fill_averages(l);
  return l;
}

// <exp(-dSigma)> over the forward EPM distribution; exactly 1 in theory.
inline double verify_sigma_ft(const EntropyLedger& ledger) { return ledger.exp_mean_Sigma; }

struct IntegralFtCheck {
  double lhs = 0.0;  // <exp(-beta dE - (dsigma + dSigma))>
  double rhs = 1.0;  // exp(-beta dF)
  double residual() const { return std::abs(lhs - rhs); }
};

inline IntegralFtCheck verify_integral_ft(const EntropyLedger& ledger) {
  return {ledger.exp_mean_total, std::exp(-ledger.beta * ledger.delta_f)};
}

struct DetailedBalanceCheck {
  double direct = 0.0;       // P_fwd(i,f) / P_bwd(f,i)
  double exponential = 0.0;  // exp[beta(dE - dF) + dsigma + dSigma]
  double relative_residual() const { return std::abs(direct - exponential) / std::max(std::abs(direct), 1e-300); }
};

inline DetailedBalanceCheck detailed_balance_ratio(std::size_t i, std::size_t f, const EntropyLedger& ledger) {
  const double backward = ledger.backward_joint(f, i);
  if (backward <= kZeroProbability)
    raise(Errc::DivergentRatio, "backward joint probability vanishes for (f, i) = (" + std::to_string(f) + ", " +
                                    std::to_string(i) + ")");
  return {ledger.forward_joint(i, f) / backward,
          std::exp(ledger.beta * (ledger.delta_e[i][f] - ledger.delta_f) + ledger.delta_sigma[i][f] +
                   ledger.delta_Sigma(i, f))};
}

struct CharacteristicIdentity {
  double lhs = 0.0;                // <exp(-beta (dE - dF))> over EPM
  double rhs_classical_term = 0.0; // d tr(rho_th^fin Phi(rho_th^in))
  double rhs_coherence_term = 0.0; // d tr(rho_th^fin Phi(chi))
  double residual() const { return std::abs(lhs - rhs_classical_term - rhs_coherence_term); }
};

template <LinearChannel Map>
CharacteristicIdentity epm_characteristic_identity(const DensityMatrix& rho0, const Map& map,
                                                   const EnergyLevels& levels) {
  const ThermalDecomposition d = decompose_state(rho0, levels);
  const EpmDistribution epm = epm_distribution(rho0, map, levels);
  const double delta_f = free_energy_change(d.beta, levels, levels);
  CharacteristicIdentity out;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t f = 0; f < 2; ++f)
      out.lhs += epm.joint[i][f] * std::exp(-d.beta * (epm.energy_change(i, f) - delta_f));
  const Matrix2 rho_fin_th = thermal_state(d.beta, levels).matrix();
  constexpr double dim = 2.0;
  out.rhs_classical_term = dim * (rho_fin_th * apply(map, d.thermal)).trace().real();
  out.rhs_coherence_term = dim * (rho_fin_th * apply(map, d.chi)).trace().real();
  return out;
}

struct HeatSplit {
  double epm_mean = 0.0;
  double tpm_mean = 0.0;
  double coherence_term = 0.0;  // sum_f tr(Pi_f Phi(chi)) E_f
  double residual() const { return std::abs(epm_mean - tpm_mean - coherence_term); }
};

// The coherence term propagates chi through the channel before projecting;
// projecting chi itself would give zero identically.
template <LinearChannel Map>
HeatSplit heat_split(const DensityMatrix& rho0, const Map& map, const EnergyLevels& levels) {
  HeatSplit h;
  h.epm_mean = epm_distribution(rho0, map, levels).mean_energy_change();
  h.tpm_mean = tpm_distribution(rho0, map, levels).mean_energy_change();
  const auto pc = final_populations(map, rho0.coherence());
  h.coherence_term = pc[0] * levels.energy(0) + pc[1] * levels.energy(1);
  return h;
}

struct JensenBounds {
  double beta_mean_delta_e = 0.0;
  double bound_charfn = 0.0;   // -ln G_EPM
  double bound_entropy = 0.0;  // -(<dsigma> + <dSigma>)
  double characteristic = 0.0; // G_EPM
};

template <LinearChannel Map>
JensenBounds jensen_bounds(const EntropyLedger& ledger, const DensityMatrix& rho0, const Map& map) {
  JensenBounds b;
  b.beta_mean_delta_e = ledger.beta * ledger.mean_delta_e;
  const Matrix2 rho_fin_th = thermal_state(ledger.beta, ledger.levels).matrix();
  b.characteristic = 2.0 * (rho_fin_th * apply(map, rho0.matrix())).trace().real();
  if (!(b.characteristic > 0.0)) raise(Errc::DomainError, "EPM characteristic function is not positive");
  b.bound_charfn = -std::log(b.characteristic);
  b.bound_entropy = -(ledger.mean_delta_sigma + ledger.mean_delta_Sigma);
  return b;
}

// Entropy split when the backward process also starts with coherence:
// rho_B = rho_th^fin(beta) + chi_fin. Reduces to entropy_terms for chi_fin = 0.
struct GeneralEntropyTerms {
  double beta = 0.0;
  double delta_f = 0.0;
  OutcomeTable delta_e{};
  OutcomeTable delta_sigma{};
  OutcomeTable delta_Sigma{};
  OutcomeTable forward_joint{};   // [i][f]
  OutcomeTable backward_joint{};  // [f][i]
};

template <LinearChannel Forward, LinearChannel Reversed>
GeneralEntropyTerms general_entropy_terms(const DensityMatrix& rho0, const Matrix2& chi_fin, const Forward& forward,
                                          const Reversed& reversed, const EnergyLevels& levels) {
  if (std::abs(chi_fin(0, 0)) > 1e-15 || std::abs(chi_fin(1, 1)) > 1e-15)
    raise(Errc::DomainError, "backward coherence must be strictly off-diagonal");
  const ThermalDecomposition d = decompose_state(rho0, levels);
  const Matrix2 th_fin = thermal_state(d.beta, levels).matrix();
  const DensityMatrix rho_b = DensityMatrix::from_matrix(th_fin + chi_fin);

  const auto p_th = final_populations(forward, d.thermal);
  const auto p_chi = final_populations(forward, d.chi);
  const auto pt_th = final_populations(reversed, th_fin);
  const auto pt_chi = final_populations(reversed, chi_fin);
  const auto p_fin = final_populations(forward, rho0.matrix());
  const auto pt_fin = final_populations(reversed, rho_b.matrix());

  GeneralEntropyTerms g;
  g.beta = d.beta;
  g.delta_f = free_energy_change(d.beta, levels, levels);
  for (std::size_t k = 0; k < 2; ++k) {
    if (p_th[k] <= kZeroProbability)
      raise(Errc::DivergentEntropyTerm, "thermal final probability vanishes for outcome " + std::to_string(k));
    if (pt_th[k] <= kZeroProbability)
      raise(Errc::DivergentEntropyTerm, "backward thermal probability vanishes for outcome " + std::to_string(k));
  }
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t f = 0; f < 2; ++f) {
      const double sigma_f = std::log(p_th[f]);
      const double Sigma_f = detail::coherence_log_term(p_chi[f], p_th[f], f);
      const double sigma_rev_i = std::log(pt_th[i]);
      const double Sigma_rev_i = detail::coherence_log_term(pt_chi[i], pt_th[i], i);
      g.delta_e[i][f] = levels.energy(f) - levels.energy(i);
      g.delta_sigma[i][f] = sigma_f - sigma_rev_i;
      g.delta_Sigma[i][f] = Sigma_f - Sigma_rev_i;
      g.forward_joint[i][f] = d.populations[i] * p_fin[f];
      g.backward_joint[f][i] = population(rho_b.matrix(), f) * pt_fin[i];
    }
  return g;
}

struct RelativeEntropyIdentity {
  double mean = 0.0;        // sum_n p_n ln(p~_n / p_n)
  double neg_relent = 0.0;  // -S(p || p~)
  double exp_mean = 0.0;    // <exp(dsigma_bar)>; 1 when p~ has full support
};

inline RelativeEntropyIdentity relative_entropy_identity(const std::array<double, 2>& p,
                                                         const std::array<double, 2>& p_tilde) {
  RelativeEntropyIdentity r;
  double relent = 0.0;
  for (std::size_t n = 0; n < 2; ++n) {
    if (p[n] <= kZeroProbability) continue;  // 0 ln 0 = 0
    if (p_tilde[n] <= kZeroProbability)
      raise(Errc::DivergentEntropyTerm, "reference distribution vanishes where p does not");
    const double sigma_bar = std::log(p_tilde[n] / p[n]);
    r.mean += p[n] * sigma_bar;
    r.exp_mean += p[n] * std::exp(sigma_bar);
    relent += p[n] * (std::log(p[n]) - std::log(p_tilde[n]));
  }
  r.neg_relent = -relent;
  return r;
}

// Backward process started from the time reversal of the forward final
// state, rho_B = conj(Phi(rho0)) (complex conjugation in the energy basis
// plays the role of the anti-unitary reversal). backward[n][m] is the
// probability of the reversed trajectory m -> n, so a micro-reversible
// unitary process gives forward == backward entrywise.
struct TrajectoryReversal {
  OutcomeTable forward{};
  OutcomeTable backward{};
  std::array<double, 2> p_tilde_fin{};         // tr(Pi_n Phi~(rho_B))
  std::array<double, 2> delta_sigma_bar_in{};  // -ln(p_in_n / p~_fin_n)
  double max_defect() const {
    double d = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t m = 0; m < 2; ++m) d = std::max(d, std::abs(forward[n][m] - backward[n][m]));
    return d;
  }
};

template <LinearChannel Forward, LinearChannel Reversed>
TrajectoryReversal trajectory_reversal(const DensityMatrix& rho0, const Forward& forward, const Reversed& reversed) {
  const Matrix2 rho_fin = apply(forward, rho0.matrix());
  const Matrix2 rho_b = rho_fin.conj();
  const Matrix2 rho_b_fin = apply(reversed, rho_b);
  TrajectoryReversal t;
  for (std::size_t n = 0; n < 2; ++n) {
    const double p_in = rho0.population(n), pt_fin = population(rho_b_fin, n);
    t.p_tilde_fin[n] = pt_fin;
    if (p_in <= kZeroProbability || pt_fin <= kZeroProbability)
      t.delta_sigma_bar_in[n] = p_in <= kZeroProbability && pt_fin <= kZeroProbability ? 0.0 : std::nan("");
    else
      t.delta_sigma_bar_in[n] = -std::log(p_in / pt_fin);
    for (std::size_t m = 0; m < 2; ++m) {
      t.forward[n][m] = p_in * population(rho_fin, m);
      t.backward[n][m] = population(rho_b, m) * pt_fin;
    }
  }
  return t;
}

// max_j |p~_j(Phi~(rho_B)) - p_j(Phi(rho_th))| with rho_B = rho_th(beta).
template <LinearChannel Forward, LinearChannel Reversed>
double backward_forward_consistency(const Forward& forward, const Reversed& reversed, double beta,
                                    const EnergyLevels& levels) {
  const Matrix2 rho_th = thermal_state(beta, levels).matrix();
  const auto fwd = final_populations(forward, rho_th);
  const auto bwd = final_populations(reversed, rho_th);
  return std::max(std::abs(fwd[0] - bwd[0]), std::abs(fwd[1] - bwd[1]));
}

}  // namespace epmft
