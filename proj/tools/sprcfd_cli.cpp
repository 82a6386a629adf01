#include "sprcfd/sprcfd.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

using namespace sprcfd;
using harness::RunConfig;

namespace {

struct Overrides {
  std::string mode;
  std::string load_case;
  std::vector<std::uint64_t> seeds;
};

RunConfig with_overrides(RunConfig cfg, const Overrides& o) {
  if (!o.mode.empty()) cfg.mode = harness::parse_mode(o.mode);
  if (!o.load_case.empty()) cfg.load_case = plant::parse_load_case(o.load_case);
  if (!o.seeds.empty()) cfg.seed = o.seeds.front();
  cfg.validate();
  return cfg;
}

std::shared_ptr<const supervisor::PretunedBank> load_bank(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const supervisor::PretunedBank>(supervisor::PretunedBank::load(path));
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

int cmd_tune(const std::string& config, const Overrides& o, std::vector<std::string> cases, std::string bank_path) {
  RunConfig base = with_overrides(harness::load_config(config), o);
  if (bank_path.empty()) bank_path = base.output.bank;
  if (bank_path.empty()) throw std::runtime_error("tune: no bank path (use --bank or output.bank)");
  if (cases.empty()) cases.push_back(plant::to_string(base.load_case));
  supervisor::PretunedBank bank;
  {
    std::ifstream probe(bank_path);
    if (probe) bank = supervisor::PretunedBank::load(bank_path);
  }
  for (const auto& name : cases) {
    RunConfig cfg = base;
    cfg.load_case = plant::parse_load_case(name);
    const auto res = harness::offline_tune(cfg);
    bank.put(res.entry);
    std::cout << name << ": blade " << res.entry.fault_index << " stuck at " << res.entry.stuck_angle
              << " deg, settled after " << res.entry.converged_periods << " periods (" << res.entry.converged_samples
              << " samples), config " << res.entry.config_hash << "\n";
  }
  bank.save(bank_path);
  std::cout << "bank written to " << bank_path << "\n";
  return 0;
}

int cmd_run(const std::string& config, const Overrides& o, const std::string& bank_path, std::string csv,
            std::string report) {
  RunConfig cfg = with_overrides(harness::load_config(config), o);
  if (csv.empty()) csv = cfg.output.csv;
  if (report.empty()) report = cfg.output.report;
  const auto bank = load_bank(bank_path.empty() ? cfg.output.bank : bank_path);
  auto result = harness::run_simulation(cfg, bank);
  std::cout << harness::format_report(result.report);
  for (const auto& line : result.events.log) std::cout << line << "\n";
  if (!csv.empty()) harness::write_csv(csv, result.series);
  if (!report.empty()) {
    auto j = harness::report_to_json(result.report);
    j["events"] = harness::events_to_json(result.events);
    j["config"] = harness::config_to_json(cfg);
    write_json(report, j);
  }
  return 0;
}

int cmd_compare(const std::string& config, const Overrides& o, const std::string& bank_path, const std::string& out) {
  RunConfig base = with_overrides(harness::load_config(config), o);
  const auto bank = load_bank(bank_path.empty() ? base.output.bank : bank_path);
  std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : o.seeds;
  nlohmann::json all = nlohmann::json::array();
  for (auto seed : seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.mode = harness::Mode::Baseline;
    const auto b = harness::run_simulation(cfg);
    cfg.mode = harness::Mode::SprcOnly;
    const auto s = harness::run_simulation(cfg);
    cfg.mode = harness::Mode::Proposed;
    const auto p = harness::run_simulation(cfg, bank);
    const auto c = harness::compare_series(b.series, s.series, p.series, base.metrics);
    std::cout << harness::format_comparison(c) << "\n";
    all.push_back(harness::comparison_to_json(c));
  }
  if (!out.empty()) write_json(out, all);
  return 0;
}

int cmd_psd(const std::string& csv, const std::string& column, int segment, double window, const std::string& out) {
  const auto s = harness::read_csv(csv);
  const auto& names = harness::column_names();
  int c = -1;
  for (int i = 0; i < harness::col::count; ++i)
    if (column == names[i]) c = i;
  if (c < 0) throw std::runtime_error("psd: unknown column '" + column + "'");
  const std::size_t n = s.size();
  const auto w = window > 0.0 ? static_cast<std::size_t>(std::lround(window / s.meta.Ts)) : n;
  const std::size_t begin = n > w ? n - w : 0;
  const auto x = s.column(c, begin, n);
  const std::size_t seg = segment > 0 ? static_cast<std::size_t>(segment) : static_cast<std::size_t>(4 * s.meta.P);
  const auto psd = numerics::psd_estimate(x, 1.0 / s.meta.Ts, seg);
  const double f1p = 1.0 / (s.meta.P * s.meta.Ts);
  std::cout << column << ": window " << x.size() << " samples, segment " << seg << ", df " << psd.resolution()
            << " Hz\n";
  std::cout << "1P (" << f1p << " Hz) density " << psd.power[psd.bin(f1p)] << ", total variance " << psd.integral()
            << "\n";
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out);
    os << "freq," << column << "\n" << std::setprecision(12);
    for (std::size_t i = 0; i < psd.freqs.size(); ++i) os << psd.freqs[i] << ',' << psd.power[i] << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-tolerant repetitive pitch control on a three-blade rotor surrogate"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config;
  std::string bank;
  std::string csv;
  std::string report;
  std::string out;
  std::vector<std::string> cases;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", ov.mode, "override mode");
    sub->add_option("--load-case", ov.load_case, "override load case (LC1, LC2, LC3)");
  };

  auto* tune = app.add_subcommand("tune", "offline tuning: build the pretuned bank");
  add_common(tune);
  tune->add_option("--bank", bank, "bank file to create or update");
  tune->add_option("--cases", cases, "load cases to tune (default: the config's)");

  auto* run = app.add_subcommand("run", "single closed-loop simulation");
  add_common(run);
  run->add_option("--seed", ov.seeds, "override seed")->expected(1);
  run->add_option("--bank", bank, "pretuned bank");
  run->add_option("--csv", csv, "time-series output");
  run->add_option("--report", report, "JSON report output");

  auto* cmp = app.add_subcommand("compare", "matched-seed baseline / sprc_only / proposed sweep");
  add_common(cmp);
  cmp->add_option("--seeds", ov.seeds, "seeds to sweep");
  cmp->add_option("--bank", bank, "pretuned bank");
  cmp->add_option("--out", out, "JSON output");

  auto* psd = app.add_subcommand("psd", "Welch PSD of one CSV column");
  std::string column = "y1";
  int segment = 0;
  double window = 200.0;
  psd->add_option("--csv", csv, "time-series CSV")->required()->check(CLI::ExistingFile);
  psd->add_option("--column", column, "column name");
  psd->add_option("--segment", segment, "segment length in samples (default 4P)");
  psd->add_option("--window", window, "trailing window in seconds (0: whole run)");
  psd->add_option("--out", out, "CSV output of the spectrum");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*tune) return cmd_tune(config, ov, cases, bank);
    if (*run) return cmd_run(config, ov, bank, csv, report);
    if (*cmp) return cmd_compare(config, ov, bank, out);
    if (*psd) return cmd_psd(csv, column, segment, window, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
