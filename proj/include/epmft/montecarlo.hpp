#pragma once

// Finite-shot simulation of the EPM measurement statistics with bootstrap
// error bars.
//
// Sampling model. At each pulse count N the excited-level population is
// estimated from independent binomial runs of the prepared basis states
// (the "calibration" runs) and from one independent run of the target
// preparation (the "production" run). Entropy terms are built from the
// calibration estimates by convex mixing, and averages over the forward EPM
// distribution are weighted with the production estimate. Error bars are the
// standard deviation over bootstrap resamples of every binomial count, which
// for Bernoulli shots is the same as resampling the shots themselves.
//
// RNG: SplitMix64 streams keyed by (seed, N, purpose, index); binomial
// variates by inversion for n*min(p,1-p) < 10 and by Hormann's BTRS
// transformed rejection otherwise.

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "epmft/channel.hpp"
#include "epmft/errors.hpp"
#include "epmft/state.hpp"
#include "epmft/thermo.hpp"

namespace epmft {

inline constexpr std::string_view kRngAlgorithm = "splitmix64+btrs";
inline constexpr std::string_view kRngVersion = "1";

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Independent stream key for (seed, a, b, c).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = SplitMix64::mix(seed + 0x9e3779b97f4a7c15ULL);
  h = SplitMix64::mix(h ^ (a + 0x632be59bd9b4e019ULL));
  h = SplitMix64::mix(h ^ (b + 0x8cb92ba72f3d8dd7ULL));
  h = SplitMix64::mix(h ^ (c + 0x5851f42d4c957f2dULL));
  return h;
}

namespace detail {

inline std::uint64_t binomial_inversion(std::uint64_t n, double p, SplitMix64& rng) {
  const double q = 1.0 - p;
  const double s = p / q;
  const double a = static_cast<double>(n + 1) * s;
  double r = std::pow(q, static_cast<double>(n));
  double u = rng.uniform();
  std::uint64_t x = 0;
  while (u > r && x < n) {
    u -= r;
    ++x;
    r *= a / static_cast<double>(x) - s;
  }
  return x;
}

// W. Hormann, "The generation of binomial random variates" (1993), BTRS.
inline std::uint64_t binomial_btrs(std::uint64_t n, double p, SplitMix64& rng) {
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  const double spq = std::sqrt(nd * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lpq = std::log(p / q);
  const double m = std::floor((nd + 1.0) * p);
  const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + c);
    if (k < 0.0 || k > nd) continue;
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
    v = std::log(v * alpha / (a / (us * us) + b));
    if (v <= h - std::lgamma(k + 1.0) - std::lgamma(nd - k + 1.0) + (k - m) * lpq)
      return static_cast<std::uint64_t>(k);
  }
}

}  // namespace detail

inline std::uint64_t sample_binomial(std::uint64_t n, double p, SplitMix64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) raise(Errc::DomainError, "binomial probability outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  const bool flip = p > 0.5;
  const double pp = flip ? 1.0 - p : p;
  const std::uint64_t k = static_cast<double>(n) * pp < 10.0 ? detail::binomial_inversion(n, pp, rng)
                                                             : detail::binomial_btrs(n, pp, rng);
  return flip ? n - k : k;
}

enum class Sampling { finite, analytic };

struct ShotConfig {
  std::uint64_t shots = 1'000'000;
  std::uint64_t seed = 1;
  unsigned bootstrap_resamples = 1000;
  Sampling mode = Sampling::finite;

  static ShotConfig analytic_limit() {
    ShotConfig c;
    c.mode = Sampling::analytic;
    return c;
  }

  void validate() const {
    if (mode == Sampling::analytic) return;
    if (shots < 1) raise(Errc::DomainError, "shots must be at least 1");
    if (bootstrap_resamples < 1) raise(Errc::DomainError, "bootstrap_resamples must be at least 1");
  }
};

struct EmpiricalEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::uint64_t shots = 0;
};

// Binomial estimate of `prob` from config.shots shots on the given stream.
inline EmpiricalEstimate sample_marginal(double prob, const ShotConfig& config, std::uint64_t stream = 0) {
  config.validate();
  if (!(prob >= 0.0 && prob <= 1.0)) raise(Errc::DomainError, "probability outside [0, 1]");
  if (config.mode == Sampling::analytic) return {prob, 0.0, 0};
  SplitMix64 rng(derive_seed(config.seed, stream));
  const std::uint64_t k = sample_binomial(config.shots, prob, rng);
  const double n = static_cast<double>(config.shots);
  const double v = static_cast<double>(k) / n;
  return {v, std::sqrt(v * (1.0 - v) / n), config.shots};
}

struct EmpiricalQuantity {
  double value = 0.0;
  double std_err = 0.0;
};

struct EmpiricalLedger {
  unsigned pulses = 0;
  double beta = 0.0;
  std::array<EmpiricalQuantity, 2> p_fin{};                 // production run
  std::array<EmpiricalQuantity, 2> delta_Sigma_by_final{};
  EmpiricalQuantity mean_delta_sigma;
  EmpiricalQuantity mean_delta_Sigma;
  EmpiricalQuantity exp_mean_Sigma;
  EmpiricalQuantity exp_mean_total;
  EmpiricalQuantity beta_mean_delta_e;
  EmpiricalQuantity bound_charfn;
  EmpiricalQuantity bound_entropy;
  std::uint64_t shots = 0;
  std::uint64_t seed = 0;
  unsigned resamples = 0;
  unsigned dropped_outcomes = 0;  // outcomes skipped because a needed log argument was sampled as 0
};

namespace detail {

// Excited-level (index 0) populations: one per basis state plus the production run.
struct ShotEstimates {
  std::array<double, 4> calibration{};
  double production = 0.0;
};

struct DerivedValues {
  std::array<double, 2> p_fin{};
  std::array<double, 2> delta_Sigma{};
  double mean_delta_sigma = 0.0, mean_delta_Sigma = 0.0, exp_mean_Sigma = 0.0, exp_mean_total = 0.0;
  double beta_mean_delta_e = 0.0, bound_charfn = 0.0, bound_entropy = 0.0;
  unsigned dropped = 0;
};

inline std::array<double, 2> as_distribution(double excited) { return {excited, 1.0 - excited}; }

inline DerivedValues derive(const ShotEstimates& est, const LabelMixture& prep, const ThermalDecomposition& d,
                            const std::array<double, 2>& p_rev_fin, const EnergyLevels& levels) {
  DerivedValues out;
  const auto cal = [&](BasisState s) { return as_distribution(est.calibration[index_of(s)]); };
  std::array<double, 2> p_th{}, p_rho{};
  for (std::size_t f = 0; f < 2; ++f) {
    p_th[f] = d.populations[0] * cal(BasisState::ket0)[f] + d.populations[1] * cal(BasisState::ket1)[f];
    for (BasisState s : kAllBasisStates) p_rho[f] += prep.weight(s) * cal(s)[f];
  }
  out.p_fin = as_distribution(est.production);

  const Matrix2 rho_th_fin = thermal_state(d.beta, levels).matrix();
  double g = 0.0;
  for (std::size_t f = 0; f < 2; ++f) g += 2.0 * population(rho_th_fin, f) * out.p_fin[f];
  out.bound_charfn = -std::log(g);

  for (std::size_t f = 0; f < 2; ++f) {
    if (p_th[f] <= kZeroProbability || p_rho[f] <= kZeroProbability) {
      ++out.dropped;
      out.delta_Sigma[f] = std::nan("");
      continue;
    }
    out.delta_Sigma[f] = std::log(p_rho[f] / p_th[f]);
    for (std::size_t i = 0; i < 2; ++i) {
      const double w = d.populations[i] * out.p_fin[f];
      const double dE = levels.energy(f) - levels.energy(i);
      const double dsig = std::log(p_th[f]) - std::log(p_rev_fin[i]);
      out.beta_mean_delta_e += w * d.beta * dE;
      out.mean_delta_sigma += w * dsig;
      out.mean_delta_Sigma += w * out.delta_Sigma[f];
      out.exp_mean_Sigma += w * std::exp(-out.delta_Sigma[f]);
      out.exp_mean_total += w * std::exp(-d.beta * dE - dsig - out.delta_Sigma[f]);
    }
  }
  out.bound_entropy = -(out.mean_delta_sigma + out.mean_delta_Sigma);
  return out;
}

class RunningMoments {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  double std_dev() const { return n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace detail

// Empirical counterpart of entropy_terms/jensen_bounds at one pulse count.
// The backward probabilities come from the supplied reversed channel.
inline EmpiricalLedger empirical_ledger(const LabelMixture& preparation, const PulsedProcess& process,
                                        const EnergyLevels& levels, const ShotConfig& config) {
  config.validate();
  const DensityMatrix rho0 = prepare(preparation);
  const ThermalDecomposition d = decompose_state(rho0, levels);
  const auto p_rev_fin = final_populations(process.reversed, thermal_state(d.beta, levels).matrix());
  for (std::size_t i = 0; i < 2; ++i)
    if (p_rev_fin[i] <= kZeroProbability)
      raise(Errc::DivergentEntropyTerm, "backward final probability vanishes");

  detail::ShotEstimates exact;
  for (BasisState s : kAllBasisStates)
    exact.calibration[index_of(s)] = final_populations(process.forward, basis_state(s).matrix())[0];
  exact.production = final_populations(process.forward, rho0.matrix())[0];

  EmpiricalLedger out;
  out.pulses = process.pulses;
  out.beta = d.beta;
  out.seed = config.seed;

  const auto fill = [&](const detail::DerivedValues& v) {
    for (std::size_t f = 0; f < 2; ++f) {
      out.p_fin[f].value = v.p_fin[f];
      out.delta_Sigma_by_final[f].value = v.delta_Sigma[f];
    }
    out.mean_delta_sigma.value = v.mean_delta_sigma;
    out.mean_delta_Sigma.value = v.mean_delta_Sigma;
    out.exp_mean_Sigma.value = v.exp_mean_Sigma;
    out.exp_mean_total.value = v.exp_mean_total;
    out.beta_mean_delta_e.value = v.beta_mean_delta_e;
    out.bound_charfn.value = v.bound_charfn;
    out.bound_entropy.value = v.bound_entropy;
    out.dropped_outcomes += v.dropped;
  };

  if (config.mode == Sampling::analytic) {
    fill(detail::derive(exact, preparation, d, p_rev_fin, levels));
    return out;
  }

  out.shots = config.shots;
  out.resamples = config.bootstrap_resamples;
  const double n = static_cast<double>(config.shots);
  constexpr std::uint64_t kCalibration = 1, kProduction = 2, kBootstrap = 3;

  // Only the basis states that enter a mixture need to be measured.
  std::array<bool, 4> needed{};
  needed[index_of(BasisState::ket0)] = needed[index_of(BasisState::ket1)] = true;
  for (BasisState s : kAllBasisStates)
    if (preparation.weight(s) > 0.0) needed[index_of(s)] = true;

  std::array<std::uint64_t, 4> cal_counts{};
  detail::ShotEstimates observed;
  for (BasisState s : kAllBasisStates) {
    const std::size_t k = index_of(s);
    if (!needed[k]) continue;
    SplitMix64 rng(derive_seed(config.seed, process.pulses, kCalibration, k));
    cal_counts[k] = sample_binomial(config.shots, exact.calibration[k], rng);
    observed.calibration[k] = static_cast<double>(cal_counts[k]) / n;
  }
  SplitMix64 prod_rng(derive_seed(config.seed, process.pulses, kProduction, 0));
  const std::uint64_t prod_count = sample_binomial(config.shots, exact.production, prod_rng);
  observed.production = static_cast<double>(prod_count) / n;
  fill(detail::derive(observed, preparation, d, p_rev_fin, levels));

  std::array<detail::RunningMoments, 2> m_pfin, m_dSigma;
  detail::RunningMoments m_sig, m_Sig, m_expS, m_expT, m_bde, m_bchar, m_bent;
  for (unsigned r = 0; r < config.bootstrap_resamples; ++r) {
    SplitMix64 rng(derive_seed(config.seed, process.pulses, kBootstrap, r));
    detail::ShotEstimates resample;
    for (std::size_t k = 0; k < 4; ++k) {
      if (!needed[k]) continue;
      resample.calibration[k] = static_cast<double>(sample_binomial(config.shots, observed.calibration[k], rng)) / n;
    }
    resample.production = static_cast<double>(sample_binomial(config.shots, observed.production, rng)) / n;
    const auto v = detail::derive(resample, preparation, d, p_rev_fin, levels);
    out.dropped_outcomes += v.dropped;
    for (std::size_t f = 0; f < 2; ++f) {
      m_pfin[f].add(v.p_fin[f]);
      if (std::isfinite(v.delta_Sigma[f])) m_dSigma[f].add(v.delta_Sigma[f]);
    }
    m_sig.add(v.mean_delta_sigma);
    m_Sig.add(v.mean_delta_Sigma);
    m_expS.add(v.exp_mean_Sigma);
    m_expT.add(v.exp_mean_total);
    m_bde.add(v.beta_mean_delta_e);
    m_bchar.add(v.bound_charfn);
    m_bent.add(v.bound_entropy);
  }
  for (std::size_t f = 0; f < 2; ++f) {
    out.p_fin[f].std_err = m_pfin[f].std_dev();
    out.delta_Sigma_by_final[f].std_err = m_dSigma[f].std_dev();
  }
  out.mean_delta_sigma.std_err = m_sig.std_dev();
  out.mean_delta_Sigma.std_err = m_Sig.std_dev();
  out.exp_mean_Sigma.std_err = m_expS.std_dev();
  out.exp_mean_total.std_err = m_expT.std_dev();
  out.beta_mean_delta_e.std_err = m_bde.std_dev();
  out.bound_charfn.std_err = m_bchar.std_dev();
  out.bound_entropy.std_err = m_bent.std_dev();
  return out;
}

}  // namespace epmft
