#pragma once

// Subcommand implementations behind the epmft executable. Each command turns
// an ExperimentConfig into a RunReport; the report renders as CSV preceded by
// '#' metadata lines (tool version, effective config, RNG, notes, warnings).

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "epmft/channel.hpp"
#include "epmft/dataio.hpp"
#include "epmft/errors.hpp"
#include "epmft/montecarlo.hpp"
#include "epmft/state.hpp"
#include "epmft/thermo.hpp"

namespace epmft {

inline constexpr std::string_view kToolName = "epmft";
inline constexpr std::string_view kToolVersion = "1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitIdentityViolation = 1;
inline constexpr int kExitInputError = 2;

// Tolerances applied by `verify`.
inline constexpr double kTolSigmaFt = 1e-12;
inline constexpr double kTolIdentity = 1e-10;
inline constexpr double kTolPositivity = 1e-12;
inline constexpr double kTolReversedChannel = 1e-8;
inline constexpr double kTolKraus = 1e-9;

inline bool is_input_error(Errc c) {
  return c == Errc::ParseError || c == Errc::DomainError || c == Errc::IncompleteData || c == Errc::InfiniteBeta;
}

struct ConfigOverrides {
  std::optional<std::string> config_path;
  std::optional<double> alpha, omega_tau, p_abs, p_d, beta;
  std::optional<unsigned> n_max;
  std::optional<std::string> state;
  std::optional<std::uint64_t> shots, seed;
};

// File values first, then flags. A state flag clears a beta from the file
// and vice versa.
inline ExperimentConfig resolve_config(const ConfigOverrides& o) {
  ExperimentConfig c;
  if (o.config_path) c = read_config_file(*o.config_path);
  if (o.alpha) c.pulse.alpha = *o.alpha;
  if (o.omega_tau) c.pulse.omega_tau = *o.omega_tau;
  if (o.p_abs) c.pulse.p_abs = *o.p_abs;
  if (o.p_d) c.pulse.p_d = *o.p_d;
  if (o.n_max) c.n_max = *o.n_max;
  if (o.shots) c.shots = *o.shots;
  if (o.seed) c.seed = *o.seed;
  if (o.state && o.beta) raise(Errc::ParseError, "--state and --beta are mutually exclusive");
  if (o.state) {
    parse_state_spec(*o.state);
    c.state = *o.state;
    c.beta.reset();
  }
  if (o.beta) {
    c.beta = *o.beta;
    c.state.reset();
  }
  c.validate();
  return c;
}

enum class Fault { none, non_tp };

struct IdentityCheck {
  std::string identity;
  std::string state;
  unsigned n = 0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed() const { return residual <= tolerance; }  // NaN fails
};

struct RunReport {
  std::string command;
  std::string description;
  ExperimentConfig config;
  std::optional<ShotConfig> rng;
  std::vector<std::string> notes;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<IdentityCheck> checks;
  std::vector<std::string> warnings;
  std::optional<Errc> failure;
  std::string failure_message;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed(); });
  }

  int exit_code() const {
    if (failure) return is_input_error(*failure) ? kExitInputError : kExitIdentityViolation;
    return all_passed() ? kExitOk : kExitIdentityViolation;
  }

  void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  void write(std::ostream& os) const {
    os << "# " << kToolName << ' ' << kToolVersion << ' ' << command << '\n';
    if (!description.empty()) os << "# " << description << '\n';
    os << "# config: " << to_json(config).dump() << '\n';
    if (rng)
      os << "# rng: " << kRngAlgorithm << '/' << kRngVersion << " seed=" << rng->seed << " shots=" << rng->shots
         << " resamples=" << rng->bootstrap_resamples << '\n';
    for (const auto& n : notes) os << "# " << n << '\n';
    for (const auto& w : warnings) os << "# warning: " << w << '\n';
    if (failure) os << "# failure: " << to_string(*failure) << ": " << failure_message << '\n';
    if (!checks.empty()) {
      std::size_t failed = 0;
      for (const auto& c : checks) failed += c.passed() ? 0 : 1;
      os << "# checks: " << checks.size() << " evaluated, " << failed << " failed\n";
    }
    if (columns.empty()) return;
    for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << columns[k];
    os << '\n';
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
      os << '\n';
    }
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }
};

namespace detail {

inline std::string num(double x) { return format_number(x); }

inline RunReport make_report(std::string command, std::string description, const ExperimentConfig& config) {
  RunReport r;
  r.command = std::move(command);
  r.description = std::move(description);
  r.config = config;
  return r;
}

inline ShotConfig shot_config(const ExperimentConfig& c) {
  ShotConfig s;
  s.shots = c.shots;
  s.seed = c.seed;
  return s;
}

inline PulsedChannelModel build_model(const ExperimentConfig& c, Fault fault) {
  if (fault == Fault::none) return PulsedChannelModel(c.pulse);
  // A pulse that loses 3% of the trace; everything downstream must notice.
  Superoperator pulse = build_pulse_superoperator(c.pulse);
  pulse.matrix = pulse.matrix * cplx(0.97, 0.0);
  return PulsedChannelModel(c.pulse, pulse);
}

// Runs body and converts library errors into the report's failure field.
inline RunReport guarded(RunReport report, const std::function<void(RunReport&)>& body) {
  try {
    body(report);
  } catch (const Error& e) {
    report.failure = e.code();
    report.failure_message = e.what();
  }
  return report;
}

}  // namespace detail

// ---------------------------------------------------------------------------

// Per-pulse-count EPM and TPM statistics and the evolved state. With
// all_states, one block per prepared basis state.
inline RunReport cmd_simulate(const ExperimentConfig& config, bool all_states = false, Fault fault = Fault::none) {
  auto report = detail::make_report("simulate", "EPM/TPM energy statistics and state trajectory versus pulse count",
                                    config);
  report.notes.push_back(
      "columns: p_in_k = initial level populations; p_fin_k = final populations (EPM marginal); tpm_if = TPM joint "
      "P(i,f); rho_* = evolved state; level 0 has energy +omega/2");
  report.columns = {"state", "N",      "p_in_0", "p_in_1", "p_fin_0", "p_fin_1",  "tpm_00",
                    "tpm_01", "tpm_10", "tpm_11", "rho_00", "rho_11", "re_rho_01", "im_rho_01"};
  return detail::guarded(std::move(report), [&](RunReport& r) {
    Superoperator pulse = build_pulse_superoperator(config.pulse);
    if (fault == Fault::non_tp) pulse.matrix = pulse.matrix * cplx(0.97, 0.0);
    const Superoperator cycle = pulse * build_unitary_superoperator(config.pulse);
    if (const double d = trace_preservation_defect(cycle); d > 1e-9)
      raise(Errc::NotTracePreserving, "one-cycle map trace defect " + detail::num(d));
    const EnergyLevels levels = config.pulse.levels();

    std::vector<std::pair<std::string, DensityMatrix>> preps;
    if (all_states)
      for (BasisState s : kAllBasisStates) preps.emplace_back(std::string(label(s)), basis_state(s));
    else
      preps.emplace_back(config.state_text(), prepare(config.preparation()));

    for (const auto& [name, rho0] : preps) {
      Superoperator map = Superoperator::identity();
      for (unsigned n = 0; n <= config.n_max; ++n) {
        const Matrix2 rho = apply(map, rho0.matrix());
        const auto tpm = tpm_distribution(rho0, map, levels);
        r.add_row({name, std::to_string(n), detail::num(rho0.population(0)), detail::num(rho0.population(1)),
                   detail::num(population(rho, 0)), detail::num(population(rho, 1)), detail::num(tpm.joint[0][0]),
                   detail::num(tpm.joint[0][1]), detail::num(tpm.joint[1][0]), detail::num(tpm.joint[1][1]),
                   detail::num(rho(0, 0).real()), detail::num(rho(1, 1).real()), detail::num(rho(0, 1).real()),
                   detail::num(rho(0, 1).imag())});
        map = cycle * map;
      }
    }
  });
}

// ---------------------------------------------------------------------------

struct VerifyTarget {
  std::string name;
  LabelMixture preparation;
};

// Targets for verify: the configured state, or the experimental family at
// each listed mixing probability.
inline std::vector<VerifyTarget> verify_targets(const ExperimentConfig& config, const std::vector<double>& p_values) {
  std::vector<VerifyTarget> out;
  if (p_values.empty()) {
    out.push_back({config.state_text(), config.preparation()});
    return out;
  }
  for (double p : p_values) out.push_back({"mix:" + format_number(p), experimental_mixture(p)});
  return out;
}

namespace detail {

inline void check(RunReport& r, std::string identity, const std::string& state, unsigned n, double residual,
                  double tol) {
  r.checks.push_back({std::move(identity), state, n, residual, tol});
}

inline void verify_point(RunReport& r, const PulsedChannelModel& model, const PulsedProcess& proc,
                         const VerifyTarget& target, double& consistency_max) {
  const unsigned n = proc.pulses;
  const EnergyLevels levels = model.levels();
  const DensityMatrix rho0 = prepare(target.preparation);
  const std::string& s = target.name;

  const HeatSplit heat = heat_split(rho0, proc.forward, levels);
  check(r, "heat_split", s, n, heat.residual(), kTolIdentity);

  if (rho0.population(0) <= kZeroProbability || rho0.population(1) <= kZeroProbability) {
    if (n == 0)
      r.warnings.push_back("state " + s +
                           ": an energy level is unpopulated so beta is undefined (InfiniteBeta); only "
                           "beta-independent identities are checked");
    return;
  }

  const EntropyLedger l = entropy_terms(rho0, proc.forward, proc.reversed, levels);
  check(r, "sigma_ft", s, n, std::abs(verify_sigma_ft(l) - 1.0), kTolSigmaFt);
  check(r, "integral_ft", s, n, verify_integral_ft(l).residual(), kTolIdentity);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t f = 0; f < 2; ++f)
      check(r, "detailed_balance_" + std::to_string(i) + std::to_string(f), s, n,
            detailed_balance_ratio(i, f, l).relative_residual(), kTolIdentity);
  check(r, "characteristic_identity", s, n, epm_characteristic_identity(rho0, proc.forward, levels).residual(),
        kTolIdentity);
  check(r, "sigma_positivity", s, n, std::max(0.0, -l.mean_delta_Sigma), kTolPositivity);
  const JensenBounds b = jensen_bounds(l, rho0, proc.forward);
  check(r, "bound_charfn", s, n, std::max(0.0, b.bound_charfn - b.beta_mean_delta_e), kTolIdentity);
  check(r, "bound_entropy", s, n, std::max(0.0, b.bound_entropy - b.beta_mean_delta_e), kTolIdentity);

  const TrajectoryReversal tr = trajectory_reversal(rho0, proc.forward, proc.reversed);
  const RelativeEntropyIdentity re = relative_entropy_identity(l.p_in, tr.p_tilde_fin);
  check(r, "relative_entropy_identity", s, n, std::abs(re.mean - re.neg_relent), kTolPositivity);
  check(r, "relative_entropy_exp_mean", s, n, std::abs(re.exp_mean - 1.0), kTolPositivity);

  if (!model.fixed_point_unique()) {
    check(r, "unitary_reversal", s, n, tr.max_defect(), kTolIdentity);
    double sigma_dev = 0.0, Sigma_dev = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t f = 0; f < 2; ++f) {
        sigma_dev = std::max(sigma_dev, std::abs(l.delta_sigma[i][f] + l.beta * l.delta_e[i][f]));
        Sigma_dev = std::max(Sigma_dev, std::abs(l.delta_Sigma(i, f)));
      }
    check(r, "unitary_delta_sigma", s, n, sigma_dev, kTolIdentity);
    check(r, "unitary_delta_Sigma", s, n, Sigma_dev, kTolIdentity);
  }
  consistency_max =
      std::max(consistency_max, backward_forward_consistency(proc.forward, proc.reversed, l.beta, levels));
}

}  // namespace detail

// Residual of every identity at every (state, N). Exit status 1 when any
// residual exceeds its tolerance or a channel construction step fails.
inline RunReport cmd_verify(const ExperimentConfig& config, const std::vector<double>& p_values = {},
                            Fault fault = Fault::none) {
  auto report = detail::make_report("verify", "identity residuals for the EPM fluctuation theorems", config);
  report.notes.push_back("status pass means residual <= tolerance");
  report.columns = {"identity", "state", "N", "residual", "tolerance", "status"};
  report = detail::guarded(std::move(report), [&](RunReport& r) {
    const auto targets = verify_targets(config, p_values);
    const PulsedChannelModel model = detail::build_model(config, fault);
    if (!model.fixed_point_unique())
      r.notes.push_back("one-cycle map is unital with a degenerate fixed point; reference state I/2; "
                        "unitary_delta_sigma is max|dsigma + beta dE|, which is dsigma itself at beta = 0");
    double consistency = 0.0;
    for (unsigned n = 0; n <= config.n_max; ++n) {
      const PulsedProcess proc = model.process(n);
      detail::check(r, "kraus_reconstruction", "-", n,
                    (proc.forward_kraus.superoperator().matrix - proc.forward.matrix).max_abs(), kTolKraus);
      detail::check(r, "reversed_trace_preserving", "-", n, proc.reversed.completeness_defect(), kTolReversedChannel);
      const Matrix2 star = model.fixed().state.matrix();
      detail::check(r, "reversed_fixed_point", "-", n, (apply(proc.reversed, star) - star).max_abs(),
                    kTolReversedChannel);
      for (const auto& t : targets) detail::verify_point(r, model, proc, t, consistency);
    }
    r.notes.push_back("diagnostic: max_j |p~_j(reversed) - p_j(thermal)| over the run = " + detail::num(consistency));
  });
  if (report.failure) {
    report.checks.push_back({"channel_construction", std::string(to_string(*report.failure)), 0, std::nan(""), 0.0});
  }
  for (const auto& c : report.checks)
    report.add_row({c.identity, c.state, std::to_string(c.n), detail::num(c.residual), detail::num(c.tolerance),
                    c.passed() ? "pass" : "fail"});
  return report;
}

// ---------------------------------------------------------------------------

// Average entropy production terms and both FT exponential means versus N.
// With sampled = true every value comes from finite-shot statistics with
// bootstrap error columns.
inline RunReport cmd_entropy(const ExperimentConfig& config, bool sampled = false, Fault fault = Fault::none) {
  auto report = detail::make_report(
      "entropy", "average coherence-affected entropy production and FT exponential means versus pulse count", config);
  report.notes.push_back(
      "columns: mean_* are EPM averages; exp_mean_Sigma = <exp(-dSigma)>; exp_mean_total = "
      "<exp(-beta dE - dsigma - dSigma)>; dSigma_f = per-outcome dSigma for final level f (independent of i)");
  report.columns = {"N", "beta", "mean_beta_dE", "mean_dsigma", "mean_dSigma", "exp_mean_Sigma", "exp_mean_total",
                    "dSigma_0", "dSigma_1"};
  if (sampled) {
    report.rng = detail::shot_config(config);
    for (const char* c : {"mean_beta_dE_err", "mean_dsigma_err", "mean_dSigma_err", "exp_mean_Sigma_err",
                          "exp_mean_total_err", "dSigma_0_err", "dSigma_1_err"})
      report.columns.push_back(c);
  }
  return detail::guarded(std::move(report), [&](RunReport& r) {
    const PulsedChannelModel model = detail::build_model(config, fault);
    const LabelMixture prep = config.preparation();
    const DensityMatrix rho0 = prepare(prep);
    unsigned dropped = 0;
    for (unsigned n = 0; n <= config.n_max; ++n) {
      const PulsedProcess proc = model.process(n);
      if (!sampled) {
        const EntropyLedger l = entropy_terms(rho0, proc.forward, proc.reversed, model.levels());
        r.add_row({std::to_string(n), detail::num(l.beta), detail::num(l.beta * l.mean_delta_e),
                   detail::num(l.mean_delta_sigma), detail::num(l.mean_delta_Sigma), detail::num(l.exp_mean_Sigma),
                   detail::num(l.exp_mean_total), detail::num(l.delta_Sigma_by_final[0]),
                   detail::num(l.delta_Sigma_by_final[1])});
        continue;
      }
      const EmpiricalLedger e = empirical_ledger(prep, proc, model.levels(), *r.rng);
      dropped += e.dropped_outcomes;
      r.add_row({std::to_string(n), detail::num(e.beta), detail::num(e.beta_mean_delta_e.value),
                 detail::num(e.mean_delta_sigma.value), detail::num(e.mean_delta_Sigma.value),
                 detail::num(e.exp_mean_Sigma.value), detail::num(e.exp_mean_total.value),
                 detail::num(e.delta_Sigma_by_final[0].value), detail::num(e.delta_Sigma_by_final[1].value),
                 detail::num(e.beta_mean_delta_e.std_err), detail::num(e.mean_delta_sigma.std_err),
                 detail::num(e.mean_delta_Sigma.std_err), detail::num(e.exp_mean_Sigma.std_err),
                 detail::num(e.exp_mean_total.std_err), detail::num(e.delta_Sigma_by_final[0].std_err),
                 detail::num(e.delta_Sigma_by_final[1].std_err)});
    }
    if (dropped > 0)
      r.warnings.push_back(std::to_string(dropped) + " outcome(s) dropped where a sampled probability was zero");
  });
}

// EPM mean energy change, TPM mean energy change and the coherence term.
inline RunReport cmd_heat(const ExperimentConfig& config, Fault fault = Fault::none) {
  auto report = detail::make_report("heat", "EPM and TPM average energy change and the coherence contribution", config);
  report.notes.push_back("columns: residual = |epm_mean - tpm_mean - coherence_term|; energies in units of 1/tau");
  report.columns = {"N", "epm_mean", "tpm_mean", "coherence_term", "residual"};
  return detail::guarded(std::move(report), [&](RunReport& r) {
    Superoperator pulse = build_pulse_superoperator(config.pulse);
    if (fault == Fault::non_tp) pulse.matrix = pulse.matrix * cplx(0.97, 0.0);
    const Superoperator cycle = pulse * build_unitary_superoperator(config.pulse);
    if (const double d = trace_preservation_defect(cycle); d > 1e-9)
      raise(Errc::NotTracePreserving, "one-cycle map trace defect " + detail::num(d));
    const DensityMatrix rho0 = prepare(config.preparation());
    Superoperator map = Superoperator::identity();
    for (unsigned n = 0; n <= config.n_max; ++n) {
      const HeatSplit h = heat_split(rho0, map, config.pulse.levels());
      r.add_row({std::to_string(n), detail::num(h.epm_mean), detail::num(h.tpm_mean), detail::num(h.coherence_term),
                 detail::num(h.residual())});
      map = cycle * map;
    }
  });
}

// beta <dE> against its two Jensen lower bounds.
inline RunReport cmd_bounds(const ExperimentConfig& config, bool sampled = false, Fault fault = Fault::none) {
  auto report = detail::make_report("bounds", "beta <dE> and its characteristic-function and entropy lower bounds",
                                    config);
  report.notes.push_back("columns: bound_charfn = -ln G_EPM; bound_entropy = -(<dsigma> + <dSigma>)");
  report.columns = {"N", "beta", "beta_mean_dE", "bound_charfn", "bound_entropy"};
  if (sampled) {
    report.rng = detail::shot_config(config);
    for (const char* c : {"beta_mean_dE_err", "bound_charfn_err", "bound_entropy_err"}) report.columns.push_back(c);
  } else {
    report.columns.push_back("characteristic");
  }
  return detail::guarded(std::move(report), [&](RunReport& r) {
    const PulsedChannelModel model = detail::build_model(config, fault);
    const LabelMixture prep = config.preparation();
    const DensityMatrix rho0 = prepare(prep);
    for (unsigned n = 0; n <= config.n_max; ++n) {
      const PulsedProcess proc = model.process(n);
      if (!sampled) {
        const EntropyLedger l = entropy_terms(rho0, proc.forward, proc.reversed, model.levels());
        const JensenBounds b = jensen_bounds(l, rho0, proc.forward);
        r.add_row({std::to_string(n), detail::num(l.beta), detail::num(b.beta_mean_delta_e),
                   detail::num(b.bound_charfn), detail::num(b.bound_entropy), detail::num(b.characteristic)});
        continue;
      }
      const EmpiricalLedger e = empirical_ledger(prep, proc, model.levels(), *r.rng);
      r.add_row({std::to_string(n), detail::num(e.beta), detail::num(e.beta_mean_delta_e.value),
                 detail::num(e.bound_charfn.value), detail::num(e.bound_entropy.value),
                 detail::num(e.beta_mean_delta_e.std_err), detail::num(e.bound_charfn.std_err),
                 detail::num(e.bound_entropy.std_err)});
    }
  });
}

// ---------------------------------------------------------------------------

// Kraus decomposition of the `cycles`-fold map, its Choi spectrum, the fixed
// point with spectral gap, and the time-reversed Kraus set.
inline RunReport cmd_kraus(const ExperimentConfig& config, unsigned cycles = 1, Fault fault = Fault::none) {
  auto report = detail::make_report("kraus", "Choi spectrum, Kraus operators, fixed point and time-reversed channel",
                                    config);
  report.notes.push_back("cycles: " + std::to_string(cycles));
  report.notes.push_back("long format: matrices are listed entrywise with row and col; scalars leave them empty");
  report.columns = {"quantity", "index", "row", "col", "re", "im"};
  return detail::guarded(std::move(report), [&](RunReport& r) {
    const PulsedChannelModel model = detail::build_model(config, fault);
    const PulsedProcess proc = model.process(cycles);
    const auto scalar = [&](const std::string& q, const std::string& idx, cplx v) {
      r.add_row({q, idx, "", "", detail::num(v.real()), detail::num(v.imag())});
    };
    const auto matrix = [&](const std::string& q, const std::string& idx, const Matrix2& m) {
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          r.add_row({q, idx, std::to_string(i), std::to_string(j), detail::num(m(i, j).real()),
                     detail::num(m(i, j).imag())});
    };
    const auto choi = hermitian_eig(choi_matrix(proc.forward));
    for (std::size_t k = 0; k < 4; ++k) scalar("choi_eigenvalue", std::to_string(k), choi.values[k]);
    scalar("kraus_rank", "", static_cast<double>(proc.forward_kraus.rank()));
    for (std::size_t l = 0; l < proc.forward_kraus.rank(); ++l)
      matrix("kraus", std::to_string(l), proc.forward_kraus.operators[l]);
    scalar("kraus_reconstruction_error", "",
           (proc.forward_kraus.superoperator().matrix - proc.forward.matrix).max_abs());
    scalar("kraus_completeness_defect", "", proc.forward_kraus.completeness_defect());
    matrix("fixed_point", "", model.fixed().state.matrix());
    scalar("fixed_point_unique", "", model.fixed_point_unique() ? 1.0 : 0.0);
    scalar("spectral_gap", "", model.fixed().spectral_gap);
    scalar("subdominant_eigenvalue", "", model.fixed().subdominant_eigenvalue);
    for (std::size_t l = 0; l < proc.reversed.rank(); ++l) matrix("reversed_kraus", std::to_string(l), proc.reversed.operators[l]);
    scalar("reversed_completeness_defect", "", proc.reversed.completeness_defect());
    const Matrix2 star = model.fixed().state.matrix();
    scalar("reversed_fixed_point_residual", "", (apply(proc.reversed, star) - star).max_abs());
  });
}

// ---------------------------------------------------------------------------

inline RunReport cmd_fit(const ExperimentConfig& config, const MeasurementTable& table, const FitOptions& options = {}) {
  auto report = detail::make_report("fit", "least-squares fit of p_abs and p_d with alpha and omega_tau fixed", config);
  report.notes.push_back(std::string("residuals: ") + (options.weighted ? "weighted by 1/std_err^2" : "unweighted") +
                         "; grid step " + detail::num(options.grid_step) + ", refined to " +
                         detail::num(options.final_step));
  report.columns = {"p_abs", "p_d", "residual", "points", "evaluations"};
  return detail::guarded(std::move(report), [&](RunReport& r) {
    const FitResult f = fit_parameters(table, config.pulse.alpha, config.pulse.omega_tau, options);
    r.add_row({detail::num(f.p_abs), detail::num(f.p_d), detail::num(f.residual), std::to_string(table.rows().size()),
               std::to_string(f.evaluations)});
  });
}

inline RunReport cmd_mix(const ExperimentConfig& config, const MeasurementTable& table, const LabelMixture& weights) {
  auto report = detail::make_report("mix", "convex mixture of measured basis-state curves", config);
  report.notes.push_back("weights ket0,ket1,plus_y,minus_y: " + detail::num(weights.weights[0]) + "," +
                         detail::num(weights.weights[1]) + "," + detail::num(weights.weights[2]) + "," +
                         detail::num(weights.weights[3]));
  report.columns = {"N", "p_excited", "std_err"};
  return detail::guarded(std::move(report), [&](RunReport& r) {
    for (const auto& pt : mix_measured(table, weights))
      r.add_row({std::to_string(pt.n), detail::num(pt.p_excited), detail::num(pt.std_err)});
  });
}

// Synthetic measurement table for the four basis states with shot noise.
inline RunReport cmd_sample(const ExperimentConfig& config) {
  auto report = detail::make_report("sample", "synthetic excited-population measurements with binomial shot noise",
                                    config);
  report.rng = detail::shot_config(config);
  report.columns = {"state", "N", "p_excited", "std_err"};
  return detail::guarded(std::move(report), [&](RunReport& r) {
    const std::vector<BasisState> states(kAllBasisStates.begin(), kAllBasisStates.end());
    const MeasurementTable t = sample_table(config.pulse, states, config.n_max, *r.rng);
    for (const auto& row : t.rows())
      r.add_row({std::string(label(row.state)), std::to_string(row.n), detail::num(row.p_excited),
                 detail::num(row.std_err)});
  });
}

}  // namespace epmft
