// Command-line front end; see `epmft --help`.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "epmft/cli.hpp"

namespace {

using namespace epmft;

struct Common {
  ConfigOverrides overrides;
  std::string out;
  std::string fault = "none";
};

void add_common(CLI::App* cmd, Common& c) {
  auto& o = c.overrides;
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its values");
  cmd->add_option("--alpha", o.alpha, "pumping-axis angle alpha [rad]");
  cmd->add_option("--omega-tau", o.omega_tau, "rotation angle omega*tau per cycle");
  cmd->add_option("--p-abs", o.p_abs, "pulse absorption probability");
  cmd->add_option("--p-d", o.p_d, "spin-flip probability p_d");
  cmd->add_option("--n-max", o.n_max, "largest pulse count");
  cmd->add_option("--state", o.state, "ket0 | ket1 | plus-y | minus-y | mix:p");
  cmd->add_option("--beta", o.beta, "diagonal thermal preparation at this beta (instead of --state)");
  cmd->add_option("--shots", o.shots, "shots per measured point");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--out", c.out, "output file (default stdout)");
  cmd->add_option("--fault", c.fault, "fault injection for testing: none | non-tp")
      ->check(CLI::IsMember({"none", "non-tp"}));
}

LabelMixture parse_weights(const std::string& text) {
  LabelMixture m;
  std::stringstream ss(text);
  std::string item;
  std::size_t k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= 4) raise(Errc::ParseError, "--weights takes four values (ket0,ket1,plus_y,minus_y)");
    std::size_t used = 0;
    try {
      m.weights[k] = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) raise(Errc::ParseError, "--weights: cannot parse '" + item + "'");
    ++k;
  }
  if (k != 4) raise(Errc::ParseError, "--weights takes four values (ket0,ket1,plus_y,minus_y)");
  try {
    m.validate();
  } catch (const Error& e) {
    raise(Errc::ParseError, std::string("--weights: ") + e.what());
  }
  return m;
}

int emit(const RunReport& report, const std::string& out) {
  if (out.empty()) {
    report.write(std::cout);
  } else {
    std::ofstream f(out);
    if (!f) {
      std::cerr << "error: cannot write '" << out << "'\n";
      return kExitInputError;
    }
    report.write(f);
  }
  if (report.failure) std::cerr << "error: " << report.failure_message << '\n';
  else if (!report.all_passed()) std::cerr << "error: identity check failed\n";
  return report.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulsed-qubit EPM fluctuation theorem toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common common;
  bool all_states = false, sampled = false, weighted = false;
  unsigned cycles = 1;
  std::vector<double> p_values;
  std::string data_path, weights;

  auto* simulate = app.add_subcommand("simulate", "EPM/TPM statistics and state trajectory versus N");
  add_common(simulate, common);
  simulate->add_flag("--all-states", all_states, "one block per basis state instead of --state");

  auto* verify = app.add_subcommand("verify", "check every identity; exit 1 on any violation");
  add_common(verify, common);
  verify->add_option("--p-values", p_values, "experimental-family mixing probabilities to sweep")->delimiter(',');

  auto* entropy = app.add_subcommand("entropy", "average entropy production and FT means versus N");
  add_common(entropy, common);
  entropy->add_flag("--sampled", sampled, "finite-shot estimates with bootstrap errors");

  auto* heat = app.add_subcommand("heat", "EPM/TPM mean energy change and coherence term");
  add_common(heat, common);

  auto* bounds = app.add_subcommand("bounds", "beta <dE> and its two lower bounds");
  add_common(bounds, common);
  bounds->add_flag("--sampled", sampled, "finite-shot estimates with bootstrap errors");

  auto* kraus = app.add_subcommand("kraus", "Kraus/Choi analysis and time-reversed channel");
  add_common(kraus, common);
  kraus->add_option("--cycles", cycles, "number of pulse cycles in the analysed map");

  auto* fit = app.add_subcommand("fit", "fit p_abs and p_d to a measurement CSV");
  add_common(fit, common);
  fit->add_option("data", data_path, "measurement CSV")->required();
  fit->add_flag("--weighted", weighted, "weight residuals by 1/std_err^2");

  auto* mix = app.add_subcommand("mix", "mix measured basis-state curves");
  add_common(mix, common);
  mix->add_option("data", data_path, "measurement CSV")->required();
  mix->add_option("--weights", weights, "ket0,ket1,plus_y,minus_y weights (default: from --state/--beta)");

  auto* sample = app.add_subcommand("sample", "synthetic measurement CSV with shot noise");
  add_common(sample, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  ExperimentConfig config;
  try {
    config = resolve_config(common.overrides);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  const Fault fault = common.fault == "non-tp" ? Fault::non_tp : Fault::none;

  try {
    if (simulate->parsed()) return emit(cmd_simulate(config, all_states, fault), common.out);
    if (verify->parsed()) return emit(cmd_verify(config, p_values, fault), common.out);
    if (entropy->parsed()) return emit(cmd_entropy(config, sampled, fault), common.out);
    if (heat->parsed()) return emit(cmd_heat(config, fault), common.out);
    if (bounds->parsed()) return emit(cmd_bounds(config, sampled, fault), common.out);
    if (kraus->parsed()) return emit(cmd_kraus(config, cycles, fault), common.out);
    if (sample->parsed()) return emit(cmd_sample(config), common.out);
    const MeasurementTable table = read_measurements_file(data_path);
    if (fit->parsed()) {
      FitOptions options;
      options.weighted = weighted;
      return emit(cmd_fit(config, table, options), common.out);
    }
    const LabelMixture w = weights.empty() ? config.preparation() : parse_weights(weights);
    return emit(cmd_mix(config, table, w), common.out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitInputError : kExitIdentityViolation;
  }
}
