#pragma once

// Closed-loop simulation: configuration, the per-sample loop, time series,
// CSV round trip, metrics and the offline tuning run.

#include "sprcfd/actuator.hpp"
#include "sprcfd/common.hpp"
#include "sprcfd/fdi.hpp"
#include "sprcfd/numerics.hpp"
#include "sprcfd/plant.hpp"
#include "sprcfd/sprc.hpp"
#include "sprcfd/supervisor.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sprcfd::harness {

using nlohmann::json;

enum class Mode { Baseline, SprcOnly, Proposed, OfflineTune };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Baseline: return "baseline";
    case Mode::SprcOnly: return "sprc_only";
    case Mode::Proposed: return "proposed";
    case Mode::OfflineTune: return "offline_tune";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "baseline") return Mode::Baseline;
  if (s == "sprc_only") return Mode::SprcOnly;
  if (s == "proposed") return Mode::Proposed;
  if (s == "offline_tune") return Mode::OfflineTune;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

struct FaultConfig {
  int blade = 3;
  std::optional<double> stuck_angle;  // defaults to the load case's paired angle
};

struct ActuatorConfig {
  double omega = 6.28;
  double damping = 0.7;
};

struct FdiConfig {
  fdi::FdiParams params;
  double noise = 1.5;
  std::string noise_interpretation = "variance";  // or "std"
  bool noise_enabled = true;

  double noise_std() const { return noise_interpretation == "std" ? noise : std::sqrt(noise); }
};

struct PrbsConfig {
  double amplitude = 3.0;
  double cutoff_hz = 1.0;
  int hold = 1;
  bool in_baseline = false;
};

struct MetricsConfig {
  double window = 200.0;  // s, comparison window at the end of the run
  int settle_periods = 2;
  double convergence_eps = 0.02;
  double convergence_floor = 0.1;  // deg
  int convergence_consecutive = 10;
  int psd_segment = 0;  // 0: 4 rotor periods
};

struct TuneConfig {
  double max_duration = 1400.0;  // s
};

struct OutputConfig {
  std::string csv;
  std::string report;
  std::string bank;
};

struct RunConfig {
  Mode mode = Mode::Proposed;
  plant::LoadCaseId load_case = plant::LoadCaseId::LC3;
  std::optional<plant::LoadCase> load_case_override;
  std::optional<FaultConfig> fault = FaultConfig{};
  double Ts = 0.01;
  double duration = 1400.0;
  double fault_time = 900.0;
  std::uint64_t seed = 1;
  plant::PlantParams plant;
  ActuatorConfig actuator;
  FdiConfig fdi;
  sprc::SprcParams sprc;
  PrbsConfig prbs;
  MetricsConfig metrics;
  TuneConfig tune;
  OutputConfig output;

  plant::LoadCase load_case_params() const {
    return load_case_override ? *load_case_override : plant::load_case_params(load_case);
  }
  long samples() const { return std::lround(duration / Ts); }
  long fault_sample() const { return mode == Mode::OfflineTune ? 0 : std::lround(fault_time / Ts); }
  int period() const { return plant.rotor_period_samples; }

  std::optional<actuator::FaultDescriptor> fault_descriptor() const {
    if (!fault) return std::nullopt;
    actuator::FaultDescriptor f;
    f.blade = fault->blade;
    f.stuck_angle = fault->stuck_angle ? *fault->stuck_angle : load_case_params().stuck_angle;
    f.onset = fault_sample();
    return f;
  }

  void validate() const {
    if (!(Ts > 0.0)) throw std::invalid_argument("config: Ts must be positive");
    if (!(duration > 0.0)) throw std::invalid_argument("config: duration must be positive");
    if (std::abs(plant.Ts - Ts) > 1e-15) throw std::invalid_argument("config: plant.Ts must equal Ts");
    if (mode != Mode::OfflineTune && !(fault_time < duration))
      throw std::invalid_argument("config: fault_time must be < duration");
    if (fault_time < 0.0) throw std::invalid_argument("config: fault_time must be >= 0");
    if (sprc.period != plant.rotor_period_samples)
      throw std::invalid_argument("config: sprc.P must equal the plant rotor period in samples");
    if (fault && (fault->blade < 1 || fault->blade > kBlades))
      throw std::invalid_argument("config: fault.blade must be 1, 2 or 3");
    if (mode == Mode::OfflineTune && !fault) throw std::invalid_argument("config: offline_tune needs a fault");
    if (fdi.noise_interpretation != "variance" && fdi.noise_interpretation != "std")
      throw std::invalid_argument("config: fdi.noise_interpretation must be 'variance' or 'std'");
    if (fdi.noise < 0.0) throw std::invalid_argument("config: fdi.noise must be >= 0");
    if (fdi.params.confirm_samples < 1) throw std::invalid_argument("config: fdi.confirm_samples must be >= 1");
    if (prbs.amplitude < 0.0 || !(prbs.cutoff_hz > 0.0) || prbs.hold < 1)
      throw std::invalid_argument("config: bad prbs settings");
    if (!(metrics.window > 0.0) || metrics.window > duration)
      throw std::invalid_argument("config: metrics.window must lie in (0, duration]");
    if (metrics.convergence_consecutive < 1 || metrics.settle_periods < 0)
      throw std::invalid_argument("config: bad convergence settings");
    plant.validate();
    sprc.validate();
  }
};

namespace detail {

inline void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string("config: '") + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw std::invalid_argument(std::string("config: unknown key '") + key + "' in " + where);
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline Matrix diag_from(const json& j, int n, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n) throw std::invalid_argument(std::string("config: ") + what + " needs " + std::to_string(n) + " entries");
  Matrix M = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) M(i, i) = v[i];
  return M;
}

inline std::vector<double> diag_of(const Matrix& M) {
  std::vector<double> v(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) v[i] = M(i, i);
  return v;
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using detail::get_if;
  detail::check_keys(j, "root",
                     {"mode", "load_case", "load_case_params", "fault", "Ts", "duration", "fault_time", "seed", "plant",
                      "actuator", "fdi", "sprc", "prbs", "metrics", "tune", "output"});
  RunConfig c;
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("load_case")) c.load_case = plant::parse_load_case(j.at("load_case").get<std::string>());
  if (j.contains("load_case_params")) {
    const auto& l = j.at("load_case_params");
    detail::check_keys(l, "load_case_params", {"wind_speed", "disturbance_amplitude", "collective_setpoint", "stuck_angle"});
    plant::LoadCase lc = plant::load_case_params(c.load_case);
    get_if(l, "wind_speed", lc.wind_speed);
    get_if(l, "disturbance_amplitude", lc.disturbance_amplitude);
    get_if(l, "collective_setpoint", lc.collective_setpoint);
    get_if(l, "stuck_angle", lc.stuck_angle);
    c.load_case_override = lc;
  }
  if (j.contains("fault")) {
    const auto& f = j.at("fault");
    if (f.is_null()) {
      c.fault.reset();
    } else {
      detail::check_keys(f, "fault", {"blade", "stuck_angle"});
      FaultConfig fc;
      get_if(f, "blade", fc.blade);
      if (f.contains("stuck_angle") && !f.at("stuck_angle").is_null()) fc.stuck_angle = f.at("stuck_angle").get<double>();
      c.fault = fc;
    }
  }
  get_if(j, "Ts", c.Ts);
  get_if(j, "duration", c.duration);
  get_if(j, "fault_time", c.fault_time);
  get_if(j, "seed", c.seed);
  c.plant.Ts = c.Ts;
  if (j.contains("plant")) {
    const auto& p = j.at("plant");
    detail::check_keys(p, "plant",
                       {"rotor_period_samples", "time_constant", "dc_gain", "coupling", "noise_fraction", "noise_enabled",
                        "disturbance_enabled", "pitch_min", "pitch_max", "initial_azimuth"});
    get_if(p, "rotor_period_samples", c.plant.rotor_period_samples);
    get_if(p, "time_constant", c.plant.time_constant);
    get_if(p, "dc_gain", c.plant.dc_gain);
    get_if(p, "coupling", c.plant.coupling);
    get_if(p, "noise_fraction", c.plant.noise_fraction);
    get_if(p, "noise_enabled", c.plant.noise_enabled);
    get_if(p, "disturbance_enabled", c.plant.disturbance_enabled);
    get_if(p, "pitch_min", c.plant.pitch_min);
    get_if(p, "pitch_max", c.plant.pitch_max);
    get_if(p, "initial_azimuth", c.plant.initial_azimuth);
  }
  c.sprc.period = c.plant.rotor_period_samples;
  if (j.contains("actuator")) {
    const auto& a = j.at("actuator");
    detail::check_keys(a, "actuator", {"omega", "damping"});
    get_if(a, "omega", c.actuator.omega);
    get_if(a, "damping", c.actuator.damping);
  }
  if (j.contains("fdi")) {
    const auto& f = j.at("fdi");
    detail::check_keys(f, "fdi",
                       {"pole_radius", "delta_margin", "noise", "noise_interpretation", "noise_enabled", "eta_y_sigmas",
                        "eps_x0", "confirm_samples"});
    get_if(f, "pole_radius", c.fdi.params.pole_radius);
    get_if(f, "delta_margin", c.fdi.params.delta_margin);
    get_if(f, "noise", c.fdi.noise);
    get_if(f, "noise_interpretation", c.fdi.noise_interpretation);
    get_if(f, "noise_enabled", c.fdi.noise_enabled);
    get_if(f, "eta_y_sigmas", c.fdi.params.eta_y_sigmas);
    get_if(f, "eps_x0", c.fdi.params.eps_x0);
    get_if(f, "confirm_samples", c.fdi.params.confirm_samples);
  }
  if (j.contains("sprc")) {
    const auto& s = j.at("sprc");
    detail::check_keys(s, "sprc",
                       {"P", "p", "forgetting", "rls_init_scale", "Q_diag", "R_diag", "sigma", "beta",
                        "control_start_periods", "reseed_factor_scale", "dare_tol", "dare_max_iter"});
    get_if(s, "P", c.sprc.period);
    get_if(s, "p", c.sprc.past_window);
    get_if(s, "forgetting", c.sprc.forgetting);
    get_if(s, "rls_init_scale", c.sprc.rls_init_scale);
    if (s.contains("Q_diag")) c.sprc.Q = detail::diag_from(s.at("Q_diag"), sprc::kLiftedStates, "sprc.Q_diag");
    if (s.contains("R_diag")) c.sprc.R = detail::diag_from(s.at("R_diag"), sprc::kBasis, "sprc.R_diag");
    get_if(s, "sigma", c.sprc.sigma);
    get_if(s, "beta", c.sprc.beta);
    get_if(s, "control_start_periods", c.sprc.control_start_periods);
    get_if(s, "reseed_factor_scale", c.sprc.reseed_factor_scale);
    get_if(s, "dare_tol", c.sprc.dare_tol);
    get_if(s, "dare_max_iter", c.sprc.dare_max_iter);
  }
  if (j.contains("prbs")) {
    const auto& p = j.at("prbs");
    detail::check_keys(p, "prbs", {"amplitude", "cutoff_hz", "hold", "in_baseline"});
    get_if(p, "amplitude", c.prbs.amplitude);
    get_if(p, "cutoff_hz", c.prbs.cutoff_hz);
    get_if(p, "hold", c.prbs.hold);
    get_if(p, "in_baseline", c.prbs.in_baseline);
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    detail::check_keys(m, "metrics",
                       {"window", "settle_periods", "convergence_eps", "convergence_floor", "convergence_consecutive",
                        "psd_segment"});
    get_if(m, "window", c.metrics.window);
    get_if(m, "settle_periods", c.metrics.settle_periods);
    get_if(m, "convergence_eps", c.metrics.convergence_eps);
    get_if(m, "convergence_floor", c.metrics.convergence_floor);
    get_if(m, "convergence_consecutive", c.metrics.convergence_consecutive);
    get_if(m, "psd_segment", c.metrics.psd_segment);
  }
  if (j.contains("tune")) {
    const auto& t = j.at("tune");
    detail::check_keys(t, "tune", {"max_duration"});
    get_if(t, "max_duration", c.tune.max_duration);
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::check_keys(o, "output", {"csv", "report", "bank"});
    get_if(o, "csv", c.output.csv);
    get_if(o, "report", c.output.report);
    get_if(o, "bank", c.output.bank);
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path);
  return parse_config(json::parse(is, nullptr, true, /*ignore_comments=*/true));
}

// Sections that shape the closed-loop behaviour seen by the tuner.
inline json tuning_json(const RunConfig& c) {
  const auto lc = c.load_case_params();
  json j;
  j["Ts"] = c.Ts;
  j["load_case_params"] = {{"wind_speed", lc.wind_speed},
                           {"disturbance_amplitude", lc.disturbance_amplitude},
                           {"collective_setpoint", lc.collective_setpoint}};
  j["plant"] = {{"rotor_period_samples", c.plant.rotor_period_samples},
                {"time_constant", c.plant.time_constant},
                {"dc_gain", c.plant.dc_gain},
                {"coupling", c.plant.coupling},
                {"noise_fraction", c.plant.noise_fraction},
                {"noise_enabled", c.plant.noise_enabled},
                {"disturbance_enabled", c.plant.disturbance_enabled},
                {"pitch_min", c.plant.pitch_min},
                {"pitch_max", c.plant.pitch_max},
                {"initial_azimuth", c.plant.initial_azimuth}};
  j["actuator"] = {{"omega", c.actuator.omega}, {"damping", c.actuator.damping}};
  j["sprc"] = {{"P", c.sprc.period},
               {"p", c.sprc.past_window},
               {"forgetting", c.sprc.forgetting},
               {"rls_init_scale", c.sprc.rls_init_scale},
               {"Q_diag", detail::diag_of(c.sprc.Q)},
               {"R_diag", detail::diag_of(c.sprc.R)},
               {"sigma", c.sprc.sigma},
               {"beta", c.sprc.beta},
               {"control_start_periods", c.sprc.control_start_periods}};
  j["prbs"] = {{"amplitude", c.prbs.amplitude}, {"cutoff_hz", c.prbs.cutoff_hz}, {"hold", c.prbs.hold}};
  return j;
}

inline std::string config_hash(const RunConfig& c) { return supervisor::hex64(supervisor::fnv1a(tuning_json(c).dump())); }

inline json config_to_json(const RunConfig& c) {
  json j = tuning_json(c);
  j.erase("load_case_params");
  j["mode"] = to_string(c.mode);
  j["load_case"] = plant::to_string(c.load_case);
  if (c.load_case_override) {
    const auto& l = *c.load_case_override;
    j["load_case_params"] = {{"wind_speed", l.wind_speed},
                             {"disturbance_amplitude", l.disturbance_amplitude},
                             {"collective_setpoint", l.collective_setpoint},
                             {"stuck_angle", l.stuck_angle}};
  }
  if (c.fault) {
    j["fault"] = {{"blade", c.fault->blade}};
    if (c.fault->stuck_angle) j["fault"]["stuck_angle"] = *c.fault->stuck_angle;
  } else {
    j["fault"] = nullptr;
  }
  j["duration"] = c.duration;
  j["fault_time"] = c.fault_time;
  j["seed"] = c.seed;
  j["sprc"]["reseed_factor_scale"] = c.sprc.reseed_factor_scale;
  j["sprc"]["dare_tol"] = c.sprc.dare_tol;
  j["sprc"]["dare_max_iter"] = c.sprc.dare_max_iter;
  j["prbs"]["in_baseline"] = c.prbs.in_baseline;
  j["fdi"] = {{"pole_radius", c.fdi.params.pole_radius},
              {"delta_margin", c.fdi.params.delta_margin},
              {"noise", c.fdi.noise},
              {"noise_interpretation", c.fdi.noise_interpretation},
              {"noise_enabled", c.fdi.noise_enabled},
              {"eta_y_sigmas", c.fdi.params.eta_y_sigmas},
              {"eps_x0", c.fdi.params.eps_x0},
              {"confirm_samples", c.fdi.params.confirm_samples}};
  j["metrics"] = {{"window", c.metrics.window},
                  {"settle_periods", c.metrics.settle_periods},
                  {"convergence_eps", c.metrics.convergence_eps},
                  {"convergence_floor", c.metrics.convergence_floor},
                  {"convergence_consecutive", c.metrics.convergence_consecutive},
                  {"psd_segment", c.metrics.psd_segment}};
  j["tune"] = {{"max_duration", c.tune.max_duration}};
  j["output"] = {{"csv", c.output.csv}, {"report", c.output.report}, {"bank", c.output.bank}};
  return j;
}

// ---------------------------------------------------------------------------
// Time series

inline constexpr int kCsvVersion = 1;

namespace col {
enum : int {
  k = 0, t, azimuth,
  uref1, uref2, uref3,
  utilde1, utilde2, utilde3,
  umeas1, umeas2, umeas3,
  y1, y2, y3,
  r1, r2, r3,
  rbar1, rbar2, rbar3,
  dfd,
  theta1s, theta1c, theta2s, theta2c, theta3s, theta3c,
  sprc1, sprc2, sprc3,
  idres1, idres2, idres3,
  count
};
}  // namespace col

inline const std::array<const char*, col::count>& column_names() {
  static const std::array<const char*, col::count> names = {
      "k", "t", "azimuth", "uref1", "uref2", "uref3", "utilde1", "utilde2", "utilde3", "umeas1", "umeas2", "umeas3",
      "y1", "y2", "y3", "r1", "r2", "r3", "rbar1", "rbar2", "rbar3", "dFD", "theta1s", "theta1c", "theta2s",
      "theta2c", "theta3s", "theta3c", "sprc1", "sprc2", "sprc3", "idres1", "idres2", "idres3"};
  return names;
}

using Row = std::array<double, col::count>;

struct SeriesMeta {
  Mode mode = Mode::Baseline;
  plant::LoadCaseId load_case = plant::LoadCaseId::LC1;
  int fault_blade = 0;  // 0: healthy run
  long k0 = 0;
  long switch_sample = -1;
  int P = 625;
  double Ts = 0.01;
  std::uint64_t seed = 0;
  double pitch_min = -5.0;
  double pitch_max = 90.0;
};

struct TimeSeries {
  SeriesMeta meta;
  std::vector<Row> rows;

  std::size_t size() const { return rows.size(); }
  std::vector<double> column(int c, std::size_t begin = 0, std::size_t end = std::numeric_limits<std::size_t>::max()) const {
    end = std::min(end, rows.size());
    std::vector<double> v;
    if (begin >= end) return v;
    v.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) v.push_back(rows[i][c]);
    return v;
  }
};

inline std::string meta_line(const SeriesMeta& m) {
  std::ostringstream os;
  os << "# sprcfd-csv v" << kCsvVersion << " mode=" << to_string(m.mode) << " lc=" << plant::to_string(m.load_case)
     << " fault_blade=" << m.fault_blade << " k0=" << m.k0 << " switch=" << m.switch_sample << " P=" << m.P
     << " Ts=" << std::setprecision(17) << m.Ts << " seed=" << m.seed << " pitch_min=" << m.pitch_min
     << " pitch_max=" << m.pitch_max;
  return os.str();
}

inline void write_csv(std::ostream& os, const TimeSeries& s) {
  os << meta_line(s.meta) << '\n';
  const auto& names = column_names();
  for (int c = 0; c < col::count; ++c) os << (c ? "," : "") << names[c];
  os << '\n';
  os << std::setprecision(17);
  for (const auto& r : s.rows) {
    for (int c = 0; c < col::count; ++c) {
      if (c) os << ',';
      if (c == col::k || c == col::dfd)
        os << static_cast<long long>(r[c]);
      else
        os << r[c];
    }
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const TimeSeries& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_csv(os, s);
}

inline TimeSeries read_csv(std::istream& is) {
  TimeSeries s;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# sprcfd-csv v", 0) != 0) throw std::runtime_error("csv: missing header line");
  {
    std::istringstream hs(line.substr(2));
    std::string tok;
    hs >> tok;  // sprcfd-csv
    hs >> tok;
    if (tok != "v" + std::to_string(kCsvVersion)) throw std::runtime_error("csv: unsupported version " + tok);
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "mode") s.meta.mode = parse_mode(val);
      else if (key == "lc") s.meta.load_case = plant::parse_load_case(val);
      else if (key == "fault_blade") s.meta.fault_blade = std::stoi(val);
      else if (key == "k0") s.meta.k0 = std::stol(val);
      else if (key == "switch") s.meta.switch_sample = std::stol(val);
      else if (key == "P") s.meta.P = std::stoi(val);
      else if (key == "Ts") s.meta.Ts = std::stod(val);
      else if (key == "seed") s.meta.seed = std::stoull(val);
      else if (key == "pitch_min") s.meta.pitch_min = std::stod(val);
      else if (key == "pitch_max") s.meta.pitch_max = std::stod(val);
    }
  }
  if (!std::getline(is, line)) throw std::runtime_error("csv: missing column header");
  {
    std::istringstream hs(line);
    std::string name;
    int c = 0;
    while (std::getline(hs, name, ',')) {
      if (c >= col::count || name != column_names()[c]) throw std::runtime_error("csv: unexpected column '" + name + "'");
      ++c;
    }
    if (c != col::count) throw std::runtime_error("csv: wrong column count");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Row r{};
    const char* p = line.c_str();
    for (int c = 0; c < col::count; ++c) {
      char* end = nullptr;
      r[c] = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("csv: malformed row");
      p = end;
      if (c + 1 < col::count) {
        if (*p != ',') throw std::runtime_error("csv: malformed row");
        ++p;
      }
    }
    s.rows.push_back(r);
  }
  return s;
}

inline TimeSeries read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_csv(is);
}

// ---------------------------------------------------------------------------
// Metrics

inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("variance: need at least two samples");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size());
}

struct ReductionMetrics {
  Triple per_blade{};             // %, NaN for the excluded blade
  double cumulative = 0.0;        // % over included blades
  std::array<bool, kBlades> included{true, true, true};
};

// 100 (1 - var(run) / var(base)) per blade and on the summed variances of
// the included blades. `exclude_blade` is 1-based, 0 keeps all blades.
inline ReductionMetrics load_reduction_metrics(const std::array<std::vector<double>, kBlades>& y_run,
                                               const std::array<std::vector<double>, kBlades>& y_base,
                                               int exclude_blade = 0) {
  ReductionMetrics m;
  double run_sum = 0.0;
  double base_sum = 0.0;
  for (int l = 0; l < kBlades; ++l) {
    if (y_run[l].size() != y_base[l].size()) throw std::invalid_argument("load_reduction_metrics: window length mismatch");
    if (l + 1 == exclude_blade) {
      m.included[l] = false;
      m.per_blade[l] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double vr = variance(y_run[l]);
    const double vb = variance(y_base[l]);
    if (!(vb > 0.0)) throw std::invalid_argument("load_reduction_metrics: zero baseline variance");
    m.per_blade[l] = 100.0 * (1.0 - vr / vb);
    run_sum += vr;
    base_sum += vb;
  }
  if (!(base_sum > 0.0)) throw std::invalid_argument("load_reduction_metrics: zero baseline variance");
  m.cumulative = 100.0 * (1.0 - run_sum / base_sum);
  return m;
}

struct ConvergenceResult {
  std::optional<long> periods;     // relative to the start period
  std::optional<long> period;      // absolute period index j*
  bool degenerate = false;         // every increment in the window was zero
  double final_increment = 0.0;
  long start_period = 0;
  long eligible_period = 0;
};

// First j >= eligible with |theta_{j+1} - theta_j| < eps max(|theta_j|, floor)
// for `consecutive` periods in a row; theta[j] is the value in force during period j.
inline ConvergenceResult convergence_time(const std::vector<Vector>& theta, long start_period, long eligible_period,
                                          double eps, double floor, int consecutive) {
  ConvergenceResult out;
  out.start_period = start_period;
  out.eligible_period = eligible_period;
  const long n = static_cast<long>(theta.size());
  bool all_zero = true;
  long run = 0;
  for (long j = std::max(start_period, 0L); j + 1 < n; ++j) {
    const double inc = (theta[j + 1] - theta[j]).norm();
    if (inc != 0.0) all_zero = false;
    out.final_increment = inc;
    if (j < eligible_period) continue;
    const bool ok = inc < eps * std::max(theta[j].norm(), floor);
    run = ok ? run + 1 : 0;
    if (run == consecutive && !out.periods) {
      out.period = j - consecutive + 1;
      out.periods = *out.period - start_period;
    }
  }
  out.degenerate = all_zero && n - std::max(start_period, 0L) > 1;
  return out;
}

struct BladeReport {
  double var_healthy = std::numeric_limits<double>::quiet_NaN();
  double var_window = 0.0;
  double psd_1p = 0.0;
  long saturated = 0;
};

struct RunReport {
  SeriesMeta meta;
  int d_fd = 0;
  std::optional<long> k_d;
  std::optional<long> detection_delay;
  bool false_alarm = false;       // confirmed decision before the fault (or without one)
  long raw_crossings_pre_fault = 0;
  long raw_crossings_total = 0;
  std::array<BladeReport, kBlades> blades;
  double cumulative_var_window = 0.0;  // healthy blades
  double cumulative_psd_1p = 0.0;
  ConvergenceResult convergence;
  std::size_t window_begin = 0;
  std::size_t window_end = 0;
  std::size_t psd_segment = 0;
};

// theta in force during each period, stacked over the blades in `blades`.
inline std::vector<Vector> theta_per_period(const TimeSeries& s, const std::vector<int>& blades) {
  std::vector<Vector> out;
  const auto P = static_cast<std::size_t>(s.meta.P);
  for (std::size_t i = 0; i < s.rows.size(); i += P) {
    Vector v(2 * static_cast<Eigen::Index>(blades.size()));
    for (std::size_t b = 0; b < blades.size(); ++b) {
      v(2 * b) = s.rows[i][col::theta1s + 2 * blades[b]];
      v(2 * b + 1) = s.rows[i][col::theta1c + 2 * blades[b]];
    }
    out.push_back(v);
  }
  return out;
}

inline std::vector<int> healthy_blades(const SeriesMeta& m) {
  std::vector<int> b;
  for (int l = 0; l < kBlades; ++l)
    if (l + 1 != m.fault_blade) b.push_back(l);
  return b;
}

// Everything here is derived from the time series alone.
inline RunReport compute_report(const TimeSeries& s, const MetricsConfig& mc) {
  RunReport rep;
  rep.meta = s.meta;
  const std::size_t n = s.rows.size();
  const long P = s.meta.P;
  const double fs = 1.0 / s.meta.Ts;
  const bool has_fault = s.meta.fault_blade != 0;
  const long k0 = has_fault ? s.meta.k0 : static_cast<long>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = s.rows[i];
    if (rep.d_fd == 0 && r[col::dfd] != 0.0) {
      rep.d_fd = static_cast<int>(r[col::dfd]);
      rep.k_d = static_cast<long>(r[col::k]);
    }
    for (int l = 0; l < kBlades; ++l) {
      if (std::abs(r[col::r1 + l]) > r[col::rbar1 + l]) {
        ++rep.raw_crossings_total;
        if (static_cast<long>(r[col::k]) < k0) ++rep.raw_crossings_pre_fault;
      }
      const double u = r[col::utilde1 + l];
      if (u < s.meta.pitch_min || u > s.meta.pitch_max) ++rep.blades[l].saturated;
    }
  }
  if (rep.k_d) {
    if (*rep.k_d < k0) rep.false_alarm = true;
    if (has_fault) rep.detection_delay = *rep.k_d - s.meta.k0;
  }

  const auto wlen = static_cast<std::size_t>(std::lround(mc.window / s.meta.Ts));
  rep.window_end = n;
  rep.window_begin = n > wlen ? n - wlen : 0;
  const std::size_t seg = mc.psd_segment > 0 ? static_cast<std::size_t>(mc.psd_segment) : static_cast<std::size_t>(4 * P);
  rep.psd_segment = seg;
  const double f1p = 1.0 / (static_cast<double>(P) * s.meta.Ts);
  const auto healthy = healthy_blades(s.meta);
  for (int l = 0; l < kBlades; ++l) {
    auto& b = rep.blades[l];
    const auto yw = s.column(col::y1 + l, rep.window_begin, rep.window_end);
    b.var_window = variance(yw);
    if (yw.size() >= 2 * seg) {
      const auto psd = numerics::psd_estimate(yw, fs, seg);
      b.psd_1p = psd.power[psd.bin(f1p)];
    }
    if (has_fault) {
      const long hw = std::min<long>(static_cast<long>(wlen), s.meta.k0);
      if (hw >= 2) b.var_healthy = variance(s.column(col::y1 + l, static_cast<std::size_t>(s.meta.k0 - hw),
                                                     static_cast<std::size_t>(s.meta.k0)));
    }
  }
  for (int l : healthy) {
    rep.cumulative_var_window += rep.blades[l].var_window;
    rep.cumulative_psd_1p += rep.blades[l].psd_1p;
  }

  const auto theta = theta_per_period(s, healthy);
  const long ref = s.meta.switch_sample >= 0 ? s.meta.switch_sample : (has_fault ? s.meta.k0 : 0);
  const long start = has_fault ? s.meta.k0 / P : 0;
  const long eligible = (ref + P - 1) / P + mc.settle_periods;
  rep.convergence = convergence_time(theta, start, eligible, mc.convergence_eps, mc.convergence_floor,
                                     mc.convergence_consecutive);
  return rep;
}

inline json report_to_json(const RunReport& r) {
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["mode"] = to_string(r.meta.mode);
  j["load_case"] = plant::to_string(r.meta.load_case);
  j["seed"] = r.meta.seed;
  j["fault_blade"] = r.meta.fault_blade;
  j["k0"] = r.meta.k0;
  j["switch_sample"] = r.meta.switch_sample >= 0 ? json(r.meta.switch_sample) : json(nullptr);
  j["detection"] = {{"d_fd", r.d_fd},
                    {"k_d", opt(r.k_d)},
                    {"delay_samples", opt(r.detection_delay)},
                    {"false_alarm", r.false_alarm},
                    {"raw_crossings_pre_fault", r.raw_crossings_pre_fault},
                    {"raw_crossings_total", r.raw_crossings_total}};
  auto blades = json::array();
  for (int l = 0; l < kBlades; ++l) {
    const auto& b = r.blades[l];
    blades.push_back({{"blade", l + 1},
                      {"var_healthy", num(b.var_healthy)},
                      {"var_window", b.var_window},
                      {"psd_1p", b.psd_1p},
                      {"saturated_samples", b.saturated}});
  }
  j["blades"] = blades;
  j["window"] = {{"begin", r.window_begin}, {"end", r.window_end}, {"psd_segment", r.psd_segment}};
  j["cumulative_var_window"] = r.cumulative_var_window;
  j["cumulative_psd_1p"] = r.cumulative_psd_1p;
  j["convergence"] = {{"periods", opt(r.convergence.periods)},
                      {"period", opt(r.convergence.period)},
                      {"start_period", r.convergence.start_period},
                      {"eligible_period", r.convergence.eligible_period},
                      {"degenerate", r.convergence.degenerate},
                      {"final_increment", r.convergence.final_increment}};
  return j;
}

// ---------------------------------------------------------------------------
// Simulation loop

struct RunEvents {
  long dare_failures = 0;
  long rls_degenerate = 0;
  std::array<long, kBlades> saturations{0, 0, 0};
  std::optional<supervisor::SwitchEvent> switch_event;
  std::optional<long> ambiguous_at;
  std::vector<std::string> log;
};

inline json events_to_json(const RunEvents& e) {
  json j;
  j["dare_failures"] = e.dare_failures;
  j["rls_degenerate_events"] = e.rls_degenerate;
  j["plant_saturations"] = e.saturations;
  j["ambiguous_at"] = e.ambiguous_at ? json(*e.ambiguous_at) : json(nullptr);
  if (e.switch_event)
    j["switch"] = {{"applied", e.switch_event->applied},
                   {"k_d", e.switch_event->k_d},
                   {"blade", e.switch_event->blade},
                   {"message", e.switch_event->message}};
  else
    j["switch"] = nullptr;
  j["log"] = e.log;
  return j;
}

// One closed-loop run. Value type: copying forks the simulation.
class Simulator {
 public:
  Simulator(const RunConfig& cfg, std::shared_ptr<const supervisor::PretunedBank> bank = nullptr)
      : cfg_(cfg),
        lc_(cfg.load_case_params()),
        hash_(config_hash(cfg)),
        bank_(std::move(bank)),
        plant_(cfg.plant, lc_, cfg.seed),
        actuators_(numerics::discretize_second_order(cfg.actuator.omega, cfg.actuator.damping, cfg.Ts),
                   lc_.collective_setpoint, cfg.fault_descriptor()),
        fdi_(actuators_.model(), fdi_params(cfg), lc_.collective_setpoint),
        prbs_(cfg.prbs.amplitude, cfg.prbs.cutoff_hz, cfg.Ts, cfg.prbs.hold, cfg.seed),
        pitch_rng_(derive_seed(cfg.seed, streams::kPitchNoise)),
        total_(cfg.samples()) {
    cfg_.validate();
    if (cfg_.mode != Mode::Baseline) {
      controller_.emplace(cfg_.sprc);
      if (cfg_.mode == Mode::OfflineTune) controller_->freeze(cfg_.fault->blade - 1);
    }
    if (cfg_.mode == Mode::Proposed && cfg_.fault && !bank_)
      throw std::invalid_argument("proposed mode with a fault needs a pretuned bank");
    series_.meta.mode = cfg_.mode;
    series_.meta.load_case = cfg_.load_case;
    series_.meta.fault_blade = cfg_.fault ? cfg_.fault->blade : 0;
    series_.meta.k0 = cfg_.fault ? cfg_.fault_sample() : 0;
    series_.meta.P = cfg_.period();
    series_.meta.Ts = cfg_.Ts;
    series_.meta.seed = cfg_.seed;
    series_.meta.pitch_min = cfg_.plant.pitch_min;
    series_.meta.pitch_max = cfg_.plant.pitch_max;
    series_.rows.reserve(static_cast<std::size_t>(total_));
  }

  static fdi::FdiParams fdi_params(const RunConfig& cfg) {
    auto p = cfg.fdi.params;
    p.noise_std = cfg.fdi.noise_std();
    return p;
  }

  const RunConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }
  long sample() const { return k_; }
  long total() const { return total_; }
  bool finished() const { return k_ >= total_; }
  const TimeSeries& series() const { return series_; }
  TimeSeries&& take_series() { return std::move(series_); }
  const fdi::FdiBank& fdi() const { return fdi_; }
  const std::optional<sprc::SprcController>& controller() const { return controller_; }
  std::optional<sprc::SprcController>& controller() { return controller_; }
  bool switched() const { return series_.meta.switch_sample >= 0; }

  // Turns a monitoring run into a switching one (or back) from the next sample.
  void set_mode(Mode m) {
    if ((m == Mode::Baseline) != (cfg_.mode == Mode::Baseline) || m == Mode::OfflineTune || cfg_.mode == Mode::OfflineTune)
      throw std::invalid_argument("set_mode: only sprc_only <-> proposed is supported");
    if (m == Mode::Proposed && cfg_.fault && !bank_) throw std::invalid_argument("set_mode: proposed mode needs a bank");
    cfg_.mode = m;
    series_.meta.mode = m;
    maybe_switch();
  }

  void step() {
    const long k = k_;
    Triple sprc_out{};
    if (controller_) sprc_out = controller_->output(k);
    Triple exc{};
    if (cfg_.mode != Mode::Baseline || cfg_.prbs.in_baseline) exc = prbs_.next();
    const Triple u_ref = supervisor::compose_pitch_command(lc_, sprc_out, exc);
    const Triple u_tilde = actuators_.step(u_ref, k);
    Triple u_meas = u_tilde;
    if (cfg_.fdi.noise_enabled) {
      const double sd = cfg_.fdi.noise_std();
      for (auto& v : u_meas) v += sd * pitch_noise_(pitch_rng_);
    }
    const Triple y = plant_.step(u_tilde);
    const auto fd = fdi_.step(u_ref, u_meas, k);
    if (controller_) controller_->observe(k, u_tilde, y);

    Row r{};
    r[col::k] = static_cast<double>(k);
    r[col::t] = static_cast<double>(k) * cfg_.Ts;
    r[col::azimuth] = plant_.azimuth_at(k);
    for (int l = 0; l < kBlades; ++l) {
      r[col::uref1 + l] = u_ref[l];
      r[col::utilde1 + l] = u_tilde[l];
      r[col::umeas1 + l] = u_meas[l];
      r[col::y1 + l] = y[l];
      r[col::r1 + l] = fd.residual[l];
      r[col::rbar1 + l] = fd.threshold[l];
      r[col::sprc1 + l] = sprc_out[l];
      if (controller_) {
        r[col::theta1s + 2 * l] = theta_used_[l](0);
        r[col::theta1c + 2 * l] = theta_used_[l](1);
        r[col::idres1 + l] = controller_->identification_residual()[l];
      }
    }
    r[col::dfd] = fdi_.decision().d_fd;
    series_.rows.push_back(r);

    ++k_;
    if (controller_)
      for (int l = 0; l < kBlades; ++l) theta_used_[l] = controller_->law(l).theta;

    maybe_switch();
  }

  void run_until(long k_end) {
    k_end = std::min(k_end, total_);
    while (k_ < k_end) step();
  }

  void run() { run_until(total_); }

  RunEvents events() const {
    RunEvents e = events_;
    if (controller_) {
      e.dare_failures = controller_->dare_failures();
      e.rls_degenerate = controller_->markov().degenerate_events();
    }
    for (int l = 0; l < kBlades; ++l) e.saturations[l] = plant_.saturation_count(l);
    e.ambiguous_at = fdi_.ambiguous_at();
    return e;
  }

 private:
  void maybe_switch() {
    if (cfg_.mode != Mode::Proposed || !controller_ || switch_checked_ || fdi_.decision().d_fd == 0) return;
    switch_checked_ = true;
    auto ev = supervisor::on_detection(fdi_.decision(), *bank_, cfg_.load_case, hash_, *controller_);
    if (ev.applied) {
      series_.meta.switch_sample = ev.k_d;
      for (int l = 0; l < kBlades; ++l) theta_used_[l] = controller_->law(l).theta;
    }
    events_.log.push_back("k=" + std::to_string(ev.k_d) + ": " + ev.message);
    events_.switch_event = ev;
  }

  RunConfig cfg_;
  plant::LoadCase lc_;
  std::string hash_;
  std::shared_ptr<const supervisor::PretunedBank> bank_;
  plant::Plant plant_;
  actuator::ActuatorBank actuators_;
  fdi::FdiBank fdi_;
  sprc::Prbs prbs_;
  std::optional<sprc::SprcController> controller_;
  std::mt19937_64 pitch_rng_;
  std::normal_distribution<double> pitch_noise_;
  std::array<sprc::Vector2, kBlades> theta_used_{sprc::Vector2::Zero(), sprc::Vector2::Zero(), sprc::Vector2::Zero()};
  bool switch_checked_ = false;
  long k_ = 0;
  long total_ = 0;
  TimeSeries series_;
  RunEvents events_;
};

struct SimulationResult {
  TimeSeries series;
  RunEvents events;
  RunReport report;
};

inline SimulationResult finish(Simulator& sim) {
  SimulationResult out;
  out.events = sim.events();
  out.series = sim.take_series();
  out.report = compute_report(out.series, sim.config().metrics);
  return out;
}

inline SimulationResult run_simulation(const RunConfig& cfg, std::shared_ptr<const supervisor::PretunedBank> bank = nullptr) {
  if (cfg.mode == Mode::OfflineTune) throw std::invalid_argument("run_simulation: use offline_tune for tuning runs");
  Simulator sim(cfg, std::move(bank));
  sim.run();
  return finish(sim);
}

// ---------------------------------------------------------------------------
// Offline tuning

struct TuneResult {
  supervisor::BankEntry entry;
  std::vector<double> increments;  // relative theta increment per period
};

class TuneError : public std::runtime_error {
 public:
  TuneError(const std::string& what, std::vector<double> increments)
      : std::runtime_error(what), increments_(std::move(increments)) {}
  const std::vector<double>& increments() const { return increments_; }

 private:
  std::vector<double> increments_;
};

// Closed loop with the fault active from the first sample, run until the
// healthy-blade theta settles; returns the (Xi, theta) snapshot at that point.
inline TuneResult offline_tune(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.mode = Mode::OfflineTune;
  if (!cfg.fault) throw std::invalid_argument("offline_tune: config has no fault");
  cfg.duration = cfg.tune.max_duration;
  cfg.fault_time = 0.0;
  cfg.validate();
  Simulator sim(cfg);
  const long P = cfg.period();
  const int fb = cfg.fault->blade - 1;
  const double eps = cfg.metrics.convergence_eps;
  const double floor = cfg.metrics.convergence_floor;
  const int need = cfg.metrics.convergence_consecutive;

  auto stacked = [&]() {
    Vector v(2 * (kBlades - 1));
    int i = 0;
    for (int l = 0; l < kBlades; ++l) {
      if (l == fb) continue;
      v.segment<2>(2 * i++) = sim.controller()->law(l).theta;
    }
    return v;
  };

  TuneResult res;
  Vector prev = stacked();
  int run = 0;
  while (!sim.finished()) {
    sim.run_until(sim.sample() + P);
    const Vector cur = stacked();
    const long j = sim.sample() / P;  // periods completed
    const double inc = (cur - prev).norm();
    const double rel = inc / std::max(prev.norm(), floor);
    res.increments.push_back(rel);
    const bool active = j > cfg.sprc.control_start_periods;
    run = (active && inc != 0.0 && rel < eps) ? run + 1 : 0;
    prev = cur;
    if (run >= need) {
      auto& e = res.entry;
      const auto& c = *sim.controller();
      e.fault_index = cfg.fault->blade;
      e.load_case = cfg.load_case;
      e.config_hash = config_hash(cfg);
      e.stuck_angle = cfg.fault_descriptor()->stuck_angle;
      e.P = cfg.sprc.period;
      e.p = cfg.sprc.past_window;
      e.forgetting = cfg.sprc.forgetting;
      e.converged_samples = sim.sample();
      e.converged_periods = j;
      for (int l = 0; l < kBlades; ++l) {
        e.xi[l] = c.markov().row(l);
        e.theta[l] = c.law(l).theta;
      }
      return res;
    }
  }
  std::ostringstream os;
  os << "offline_tune: theta did not settle within " << cfg.tune.max_duration << " s (last relative increment "
     << (res.increments.empty() ? 0.0 : res.increments.back()) << ", eps " << eps << ")";
  throw TuneError(os.str(), res.increments);
}

// ---------------------------------------------------------------------------
// Matched-seed comparison

struct Comparison {
  RunReport baseline;
  RunReport sprc_only;
  RunReport proposed;
  ReductionMetrics sprc_only_reduction;
  ReductionMetrics proposed_reduction;
  double sprc_only_psd_ratio = 0.0;
  double proposed_psd_ratio = 0.0;
};

inline std::array<std::vector<double>, kBlades> window_loads(const TimeSeries& s, std::size_t begin, std::size_t end) {
  std::array<std::vector<double>, kBlades> y;
  for (int l = 0; l < kBlades; ++l) y[l] = s.column(col::y1 + l, begin, end);
  return y;
}

inline Comparison compare_series(const TimeSeries& base, const TimeSeries& sprc_only, const TimeSeries& proposed,
                                 const MetricsConfig& mc) {
  Comparison c;
  c.baseline = compute_report(base, mc);
  c.sprc_only = compute_report(sprc_only, mc);
  c.proposed = compute_report(proposed, mc);
  const auto wb = c.baseline.window_begin;
  const auto we = c.baseline.window_end;
  const auto yb = window_loads(base, wb, we);
  const int fb = base.meta.fault_blade;
  c.sprc_only_reduction = load_reduction_metrics(window_loads(sprc_only, wb, we), yb, fb);
  c.proposed_reduction = load_reduction_metrics(window_loads(proposed, wb, we), yb, fb);
  if (c.baseline.cumulative_psd_1p > 0.0) {
    c.sprc_only_psd_ratio = c.sprc_only.cumulative_psd_1p / c.baseline.cumulative_psd_1p;
    c.proposed_psd_ratio = c.proposed.cumulative_psd_1p / c.baseline.cumulative_psd_1p;
  }
  return c;
}

inline json comparison_to_json(const Comparison& c) {
  auto red = [](const ReductionMetrics& m) {
    json pb = json::array();
    for (int l = 0; l < kBlades; ++l) pb.push_back(m.included[l] ? json(m.per_blade[l]) : json(nullptr));
    return json{{"per_blade", pb}, {"cumulative", m.cumulative}};
  };
  json j;
  j["baseline"] = report_to_json(c.baseline);
  j["sprc_only"] = report_to_json(c.sprc_only);
  j["proposed"] = report_to_json(c.proposed);
  j["reduction"] = {{"sprc_only", red(c.sprc_only_reduction)}, {"proposed", red(c.proposed_reduction)}};
  j["psd_1p_ratio"] = {{"sprc_only", c.sprc_only_psd_ratio}, {"proposed", c.proposed_psd_ratio}};
  return j;
}

inline std::string format_comparison(const Comparison& c) {
  std::ostringstream os;
  auto pct = [](double v) {
    std::ostringstream s;
    if (std::isnan(v)) s << "     -";
    else s << std::fixed << std::setprecision(2) << std::setw(7) << v;
    return s.str();
  };
  auto conv = [](const ConvergenceResult& r) {
    if (r.degenerate) return std::string("n/a");
    return r.periods ? std::to_string(*r.periods) : std::string("none");
  };
  os << "load case " << plant::to_string(c.baseline.meta.load_case) << ", seed " << c.baseline.meta.seed
     << ", faulty blade " << c.baseline.meta.fault_blade << "\n";
  os << "mode        blade1%  blade2%  blade3%  cumul%   1P-ratio  conv[periods]  d_fd  k_d\n";
  auto line = [&](const char* name, const ReductionMetrics* m, double ratio, const RunReport& r) {
    os << std::left << std::setw(10) << name << std::right;
    for (int l = 0; l < kBlades; ++l) os << "  " << (m ? pct(m->per_blade[l]) : pct(0.0));
    os << "  " << (m ? pct(m->cumulative) : pct(0.0)) << "  " << std::fixed << std::setprecision(3) << std::setw(8)
       << ratio << "  " << std::setw(13) << conv(r.convergence) << "  " << std::setw(4) << r.d_fd << "  "
       << (r.k_d ? std::to_string(*r.k_d) : std::string("-")) << "\n";
  };
  line("baseline", nullptr, 1.0, c.baseline);
  line("sprc_only", &c.sprc_only_reduction, c.sprc_only_psd_ratio, c.sprc_only);
  line("proposed", &c.proposed_reduction, c.proposed_psd_ratio, c.proposed);
  return os.str();
}

inline std::string format_report(const RunReport& r) {
  std::ostringstream os;
  os << "mode " << to_string(r.meta.mode) << ", " << plant::to_string(r.meta.load_case) << ", seed " << r.meta.seed;
  if (r.meta.fault_blade) os << ", fault on blade " << r.meta.fault_blade << " at k0=" << r.meta.k0;
  os << "\n";
  os << "detection: d_fd=" << r.d_fd << " k_d=" << (r.k_d ? std::to_string(*r.k_d) : "-")
     << " false_alarm=" << (r.false_alarm ? "yes" : "no") << " raw_crossings_pre_fault=" << r.raw_crossings_pre_fault
     << "\n";
  os << "blade  var_healthy     var_window      psd_1p          saturated\n";
  for (int l = 0; l < kBlades; ++l) {
    const auto& b = r.blades[l];
    os << std::setw(5) << l + 1 << "  " << std::scientific << std::setprecision(4) << std::setw(14) << b.var_healthy
       << "  " << std::setw(14) << b.var_window << "  " << std::setw(14) << b.psd_1p << "  " << std::defaultfloat
       << b.saturated << "\n";
  }
  os << "theta convergence: "
     << (r.convergence.periods ? std::to_string(*r.convergence.periods) + " periods" : std::string("none"))
     << (r.convergence.degenerate ? " (degenerate: no updates)" : "") << "\n";
  return os.str();
}

}  // namespace sprcfd::harness
