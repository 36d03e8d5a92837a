#pragma once

// Measurement tables (CSV), experiment configuration (JSON), convex mixing
// of measured curves and least-squares fitting of (p_abs, p_d).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "epmft/channel.hpp"
#include "epmft/errors.hpp"
#include "epmft/montecarlo.hpp"
#include "epmft/state.hpp"

namespace epmft {

// Shortest of %.15g / %.17g that parses back to the same double.
inline std::string format_number(double x) {
  if (x == 0.0) x = 0.0;  // no "-0"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  if (std::strtod(buf, nullptr) != x) std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct MeasurementRow {
  BasisState state = BasisState::ket0;
  unsigned n = 0;
  double p_excited = 0.0;
  double std_err = 0.0;

  bool operator==(const MeasurementRow&) const = default;
};

class MeasurementTable {
 public:
  MeasurementTable() = default;
  explicit MeasurementTable(std::vector<MeasurementRow> rows) : rows_(std::move(rows)) { validate(); }

  const std::vector<MeasurementRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  bool operator==(const MeasurementTable&) const = default;

  void add(const MeasurementRow& row) {
    rows_.push_back(row);
    try {
      validate();
    } catch (...) {
      rows_.pop_back();
      throw;
    }
  }

  std::optional<MeasurementRow> find(BasisState s, unsigned n) const {
    for (const auto& r : rows_)
      if (r.state == s && r.n == n) return r;
    return std::nullopt;
  }

  std::vector<BasisState> states() const {
    std::vector<BasisState> out;
    for (BasisState s : kAllBasisStates)
      if (std::any_of(rows_.begin(), rows_.end(), [s](const auto& r) { return r.state == s; })) out.push_back(s);
    return out;
  }

  // Ordered pulse counts recorded for state s.
  std::vector<unsigned> pulse_counts(BasisState s) const {
    std::vector<unsigned> out;
    for (const auto& r : rows_)
      if (r.state == s) out.push_back(r.n);
    std::sort(out.begin(), out.end());
    return out;
  }

  // Probabilities in [0,1], finite non-negative errors, unique (state, N),
  // and N contiguous from 0 within each state.
  void validate() const {
    std::set<std::pair<std::size_t, unsigned>> seen;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto& r = rows_[k];
      const std::string where = "row " + std::to_string(k + 1) + " (" + std::string(label(r.state)) + ", N=" +
                                std::to_string(r.n) + ")";
      if (!(r.p_excited >= 0.0 && r.p_excited <= 1.0))
        raise(Errc::ParseError, where + ": p_excited " + format_number(r.p_excited) + " outside [0, 1]");
      if (!(r.std_err >= 0.0) || !std::isfinite(r.std_err))
        raise(Errc::ParseError, where + ": std_err must be finite and non-negative");
      if (!seen.emplace(index_of(r.state), r.n).second) raise(Errc::ParseError, where + ": duplicate (state, N)");
    }
    for (BasisState s : states()) {
      const auto ns = pulse_counts(s);
      for (std::size_t k = 0; k < ns.size(); ++k)
        if (ns[k] != k)
          raise(Errc::ParseError, std::string("state ") + std::string(label(s)) + ": N values are not contiguous from 0");
    }
  }

 private:
  std::vector<MeasurementRow> rows_;
};

inline constexpr std::string_view kMeasurementHeader = "state,N,p_excited,std_err";

inline void write_measurements(std::ostream& os, const MeasurementTable& table,
                               const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) os << "# " << c << '\n';
  os << kMeasurementHeader << '\n';
  for (const auto& r : table.rows())
    os << label(r.state) << ',' << r.n << ',' << format_number(r.p_excited) << ',' << format_number(r.std_err) << '\n';
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace detail

inline MeasurementTable read_measurements(std::istream& is) {
  std::vector<MeasurementRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const std::string at = "line " + std::to_string(line_no);
    if (!header_seen) {
      if (text != kMeasurementHeader)
        raise(Errc::ParseError, at + ": expected header '" + std::string(kMeasurementHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto fields = detail::split(text, ',');
    if (fields.size() != 4)
      raise(Errc::ParseError, at + ": expected 4 fields, found " + std::to_string(fields.size()));
    MeasurementRow r;
    const auto s = parse_basis_state(fields[0]);
    if (!s) raise(Errc::ParseError, at + ": field 'state': unknown label '" + std::string(fields[0]) + "'");
    r.state = *s;
    if (!detail::parse_number(fields[1], r.n)) raise(Errc::ParseError, at + ": field 'N': not a non-negative integer");
    if (!detail::parse_number(fields[2], r.p_excited)) raise(Errc::ParseError, at + ": field 'p_excited': not a number");
    if (!(r.p_excited >= 0.0 && r.p_excited <= 1.0))
      raise(Errc::ParseError, at + ": field 'p_excited': " + std::string(fields[2]) + " outside [0, 1]");
    if (!detail::parse_number(fields[3], r.std_err)) raise(Errc::ParseError, at + ": field 'std_err': not a number");
    if (!(r.std_err >= 0.0) || !std::isfinite(r.std_err))
      raise(Errc::ParseError, at + ": field 'std_err': must be finite and non-negative");
    rows.push_back(r);
  }
  if (!header_seen) raise(Errc::ParseError, "missing header '" + std::string(kMeasurementHeader) + "'");
  return MeasurementTable(std::move(rows));
}

inline MeasurementTable read_measurements_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open measurement file '" + path + "'");
  return read_measurements(in);
}

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  PulseParams pulse;
  double tau_ns = 190.0;
  std::optional<std::string> state;  // ket0 | ket1 | plus-y | minus-y | mix:p
  std::optional<double> beta;        // diagonal thermal preparation instead
  unsigned n_max = 20;
  std::uint64_t shots = 1'000'000;
  std::uint64_t seed = 1;

  bool operator==(const ExperimentConfig& o) const {
    return pulse.alpha == o.pulse.alpha && pulse.omega_tau == o.pulse.omega_tau && pulse.p_abs == o.pulse.p_abs &&
           pulse.p_d == o.pulse.p_d && tau_ns == o.tau_ns && state == o.state && beta == o.beta &&
           n_max == o.n_max && shots == o.shots && seed == o.seed;
  }

  void validate() const {
    pulse.validate();
    if (!(tau_ns > 0.0) || !std::isfinite(tau_ns)) raise(Errc::DomainError, "tau_ns must be positive");
    if (state && beta) raise(Errc::DomainError, "state and beta are mutually exclusive");
    if (state) parse_state_spec(*state);
    if (beta && !std::isfinite(*beta)) raise(Errc::DomainError, "beta must be finite");
    if (shots < 1) raise(Errc::DomainError, "shots must be at least 1");
  }

  // The prepared state as weights over the four basis states. A beta entry
  // selects the diagonal thermal mixture of ket0 and ket1.
  LabelMixture preparation() const {
    if (beta) {
      const auto p = thermal_populations(*beta, pulse.levels());
      LabelMixture m;
      m.weights[index_of(BasisState::ket0)] = p[0];
      m.weights[index_of(BasisState::ket1)] = p[1];
      return m;
    }
    return parse_state_spec(state.value_or("plus-y")).mixture;
  }

  std::string state_text() const {
    if (beta) return "thermal(beta=" + format_number(*beta) + ")";
    return state.value_or("plus-y");
  }
};

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["alpha"] = c.pulse.alpha;
  j["omega_tau"] = c.pulse.omega_tau;
  j["tau_ns"] = c.tau_ns;
  j["p_abs"] = c.pulse.p_abs;
  j["p_d"] = c.pulse.p_d;
  if (c.state) j["state"] = *c.state;
  if (c.beta) j["beta"] = *c.beta;
  j["n_max"] = c.n_max;
  j["shots"] = c.shots;
  j["seed"] = c.seed;
  return j;
}

namespace detail {

inline double json_real(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) raise(Errc::ParseError, std::string("field '") + key + "': expected a number");
  return v.get<double>();
}

template <class T>
T json_count(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    raise(Errc::ParseError, std::string("field '") + key + "': expected a non-negative integer");
  const auto raw = v.get<std::uint64_t>();
  if (raw > std::numeric_limits<T>::max()) raise(Errc::ParseError, std::string("field '") + key + "': out of range");
  return static_cast<T>(raw);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) raise(Errc::ParseError, "config must be a JSON object");
  static const std::set<std::string> known{"alpha", "omega_tau", "tau_ns", "p_abs", "p_d",
                                           "state", "beta",      "n_max",  "shots", "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) raise(Errc::ParseError, "unknown field '" + key + "'");
  for (const char* key : {"alpha", "omega_tau", "p_abs", "p_d"})
    if (!j.contains(key)) raise(Errc::ParseError, std::string("missing required field '") + key + "'");

  ExperimentConfig c;
  c.pulse.alpha = detail::json_real(j, "alpha");
  c.pulse.omega_tau = detail::json_real(j, "omega_tau");
  c.pulse.p_abs = detail::json_real(j, "p_abs");
  c.pulse.p_d = detail::json_real(j, "p_d");
  if (j.contains("tau_ns")) c.tau_ns = detail::json_real(j, "tau_ns");
  if (j.contains("state")) {
    if (!j["state"].is_string()) raise(Errc::ParseError, "field 'state': expected a string");
    c.state = j["state"].get<std::string>();
    parse_state_spec(*c.state);
  }
  if (j.contains("beta")) c.beta = detail::json_real(j, "beta");
  if (j.contains("n_max")) c.n_max = detail::json_count<unsigned>(j, "n_max");
  if (j.contains("shots")) c.shots = detail::json_count<std::uint64_t>(j, "shots");
  if (j.contains("seed")) c.seed = detail::json_count<std::uint64_t>(j, "seed");
  try {
    c.validate();
  } catch (const Error& e) {
    raise(Errc::ParseError, e.what());
  }
  return c;
}

inline ExperimentConfig read_config(std::istream& is) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    raise(Errc::ParseError, std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open config file '" + path + "'");
  return read_config(in);
}

inline void write_config(std::ostream& os, const ExperimentConfig& c) { os << to_json(c).dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// Mixing

struct CurvePoint {
  unsigned n = 0;
  double p_excited = 0.0;
  double std_err = 0.0;
};

// Convex combination of the measured curves; errors add in quadrature with
// the weights. Every label with non-zero weight must cover the same N range.
inline std::vector<CurvePoint> mix_measured(const MeasurementTable& table, const LabelMixture& weights) {
  weights.validate();
  if (table.empty()) raise(Errc::IncompleteData, "measurement table is empty");
  unsigned n_max = 0;
  for (BasisState s : kAllBasisStates)
    if (weights.weight(s) > 0.0) {
      const auto ns = table.pulse_counts(s);
      if (ns.empty()) raise(Errc::IncompleteData, "no rows for state " + std::string(label(s)));
      n_max = std::max(n_max, ns.back());
    }
  std::vector<CurvePoint> out;
  for (unsigned n = 0; n <= n_max; ++n) {
    CurvePoint pt{n, 0.0, 0.0};
    double var = 0.0;
    for (BasisState s : kAllBasisStates) {
      const double w = weights.weight(s);
      if (w == 0.0) continue;
      const auto row = table.find(s, n);
      if (!row) raise(Errc::IncompleteData, "missing row (" + std::string(label(s)) + ", N=" + std::to_string(n) + ")");
      pt.p_excited += w * row->p_excited;
      var += w * w * row->std_err * row->std_err;
    }
    pt.std_err = std::sqrt(var);
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model curves, synthetic tables and fitting

// Excited population tr(Pi_0 (SU)^n rho) for n = 0..n_max.
inline std::vector<double> model_curve(const Superoperator& one_cycle, const DensityMatrix& rho, unsigned n_max) {
  std::vector<double> out;
  out.reserve(n_max + 1);
  Vector4 v = vectorize(rho.matrix());
  for (unsigned n = 0;; ++n) {
    out.push_back(v[0].real());
    if (n == n_max) break;
    v = one_cycle.matrix * v;
  }
  return out;
}

inline Superoperator one_cycle_map(const PulseParams& params) {
  return build_pulse_superoperator(params) * build_unitary_superoperator(params);
}

inline MeasurementTable simulate_table(const PulseParams& params, const std::vector<BasisState>& states,
                                       unsigned n_max) {
  const Superoperator l = one_cycle_map(params);
  std::vector<MeasurementRow> rows;
  for (BasisState s : states) {
    const auto curve = model_curve(l, basis_state(s), n_max);
    for (unsigned n = 0; n <= n_max; ++n) rows.push_back({s, n, std::clamp(curve[n], 0.0, 1.0), 0.0});
  }
  return MeasurementTable(std::move(rows));
}

// Binomial shot noise on every (state, N) point; independent stream per point.
inline MeasurementTable sample_table(const PulseParams& params, const std::vector<BasisState>& states, unsigned n_max,
                                     const ShotConfig& shots) {
  const MeasurementTable exact = simulate_table(params, states, n_max);
  std::vector<MeasurementRow> rows;
  for (const auto& r : exact.rows()) {
    const std::uint64_t stream = derive_seed(0x5a4d, index_of(r.state), r.n);
    const auto est = sample_marginal(r.p_excited, shots, stream);
    rows.push_back({r.state, r.n, est.value, est.std_err});
  }
  return MeasurementTable(std::move(rows));
}

struct FitOptions {
  double grid_step = 0.005;
  double final_step = 1e-5;
  bool weighted = false;  // weights 1/std_err^2
};

struct FitResult {
  double p_abs = 0.0;
  double p_d = 0.0;
  double residual = 0.0;  // sum of (weighted) squared residuals at the optimum
  std::size_t evaluations = 0;
};

// Least squares over p_abs, p_d in [0,1]^2 with alpha and omega_tau fixed:
// exhaustive grid, then coordinate descent with step halving.
inline FitResult fit_parameters(const MeasurementTable& table, double alpha, double omega_tau,
                                const FitOptions& options = {}) {
  if (table.empty()) raise(Errc::IncompleteData, "measurement table is empty");
  const auto states = table.states();
  unsigned min_points = std::numeric_limits<unsigned>::max();
  for (BasisState s : states) min_points = std::min<unsigned>(min_points, table.pulse_counts(s).size());
  if (states.size() < 2 || min_points < 5)
    raise(Errc::IncompleteData, "fit needs at least 2 initial states with at least 5 pulse counts each");
  if (!(options.grid_step > 0.0 && options.grid_step <= 1.0) || !(options.final_step > 0.0))
    raise(Errc::DomainError, "fit step sizes must be positive");

  struct Series {
    Vector4 start;
    std::vector<double> data, weight;
  };
  // Zero error bars (p exactly 0 or 1) are floored at the smallest positive one.
  double err_floor = std::numeric_limits<double>::infinity();
  for (const auto& r : table.rows())
    if (r.std_err > 0.0) err_floor = std::min(err_floor, r.std_err);
  if (options.weighted && !std::isfinite(err_floor))
    raise(Errc::DomainError, "weighted fit needs at least one row with std_err > 0");

  std::vector<Series> series;
  for (BasisState s : states) {
    Series ser{vectorize(basis_state(s).matrix()), {}, {}};
    for (unsigned n : table.pulse_counts(s)) {
      const auto row = *table.find(s, n);
      ser.data.push_back(row.p_excited);
      if (options.weighted) {
        const double e = std::max(row.std_err, err_floor);
        ser.weight.push_back(1.0 / (e * e));
      } else {
        ser.weight.push_back(1.0);
      }
    }
    series.push_back(std::move(ser));
  }

  const Superoperator unitary = build_unitary_superoperator(omega_tau);
  FitResult best;
  best.residual = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  const auto objective = [&](double p_abs, double p_d) {
    ++evaluations;
    PulseParams p;
    p.alpha = alpha;
    p.omega_tau = omega_tau;
    p.p_abs = p_abs;
    p.p_d = p_d;
    const Matrix4 l = (build_pulse_superoperator(p) * unitary).matrix;
    double sum = 0.0;
    for (const auto& ser : series) {
      Vector4 v = ser.start;
      for (std::size_t n = 0; n < ser.data.size(); ++n) {
        const double r = v[0].real() - ser.data[n];
        sum += ser.weight[n] * r * r;
        v = l * v;
      }
    }
    return sum;
  };
  const auto consider = [&](double a, double d) {
    const double r = objective(a, d);
    if (r < best.residual) {
      best.residual = r;
      best.p_abs = a;
      best.p_d = d;
    }
  };

  const auto steps = static_cast<unsigned>(std::llround(1.0 / options.grid_step));
  for (unsigned ia = 0; ia <= steps; ++ia)
    for (unsigned id = 0; id <= steps; ++id)
      consider(std::min(1.0, ia * options.grid_step), std::min(1.0, id * options.grid_step));

  for (double step = options.grid_step / 2.0; step >= options.final_step; step /= 2.0) {
    for (bool moved = true; moved;) {
      moved = false;
      const double a0 = best.p_abs, d0 = best.p_d;
      for (double da : {-step, step}) consider(std::clamp(a0 + da, 0.0, 1.0), d0);
      for (double dd : {-step, step}) consider(best.p_abs, std::clamp(best.p_d + dd, 0.0, 1.0));
      moved = best.p_abs != a0 || best.p_d != d0;
    }
  }
  best.evaluations = evaluations;
  return best;
}

}  // namespace epmft
