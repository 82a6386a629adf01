#pragma once

// Switching supervisor: a bank of offline-tuned (Xi, theta) snapshots, one per
// fault scenario, and the warm start applied when the diagnoser isolates a
// faulty blade.
//
// Bank file layout (JSON, format "sprcfd-bank", version 1):
//   { "format": "sprcfd-bank", "version": 1,
//     "entries": [ { "fault_index": 3, "load_case": "LC3", "config_hash": "<16 hex>",
//                    "stuck_angle": 10.0, "P": 625, "p": 100, "forgetting": 0.99999,
//                    "converged_samples": 56250, "converged_periods": 90,
//                    "xi":    [[2p numbers], [2p numbers], [2p numbers]],
//                    "theta": [[s, c], [s, c], [s, c]] } ] }
// Doubles are written with round-trip precision.

#include "sprcfd/common.hpp"
#include "sprcfd/fdi.hpp"
#include "sprcfd/plant.hpp"
#include "sprcfd/sprc.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sprcfd::supervisor {

inline constexpr int kBankVersion = 1;

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

struct BankEntry {
  int fault_index = 0;  // 1-based blade
  plant::LoadCaseId load_case = plant::LoadCaseId::LC1;
  std::string config_hash;
  double stuck_angle = 0.0;
  int P = 0;
  int p = 0;
  double forgetting = 0.0;
  long converged_samples = 0;
  long converged_periods = 0;
  std::array<Vector, kBlades> xi;
  std::array<sprc::Vector2, kBlades> theta;
};

inline nlohmann::json to_json(const BankEntry& e) {
  nlohmann::json j;
  j["fault_index"] = e.fault_index;
  j["load_case"] = plant::to_string(e.load_case);
  j["config_hash"] = e.config_hash;
  j["stuck_angle"] = e.stuck_angle;
  j["P"] = e.P;
  j["p"] = e.p;
  j["forgetting"] = e.forgetting;
  j["converged_samples"] = e.converged_samples;
  j["converged_periods"] = e.converged_periods;
  auto xi = nlohmann::json::array();
  auto th = nlohmann::json::array();
  for (int l = 0; l < kBlades; ++l) {
    xi.push_back(std::vector<double>(e.xi[l].data(), e.xi[l].data() + e.xi[l].size()));
    th.push_back({e.theta[l](0), e.theta[l](1)});
  }
  j["xi"] = xi;
  j["theta"] = th;
  return j;
}

inline BankEntry entry_from_json(const nlohmann::json& j) {
  BankEntry e;
  e.fault_index = j.at("fault_index").get<int>();
  e.load_case = plant::parse_load_case(j.at("load_case").get<std::string>());
  e.config_hash = j.at("config_hash").get<std::string>();
  e.stuck_angle = j.at("stuck_angle").get<double>();
  e.P = j.at("P").get<int>();
  e.p = j.at("p").get<int>();
  e.forgetting = j.at("forgetting").get<double>();
  e.converged_samples = j.at("converged_samples").get<long>();
  e.converged_periods = j.at("converged_periods").get<long>();
  const auto& xi = j.at("xi");
  const auto& th = j.at("theta");
  if (xi.size() != kBlades || th.size() != kBlades) throw std::runtime_error("bank entry: expected three blades");
  for (int l = 0; l < kBlades; ++l) {
    const auto row = xi[l].get<std::vector<double>>();
    if (static_cast<int>(row.size()) != 2 * e.p) throw std::runtime_error("bank entry: xi row length != 2p");
    e.xi[l] = Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(row.size()));
    const auto t = th[l].get<std::vector<double>>();
    if (t.size() != 2) throw std::runtime_error("bank entry: theta must have two coefficients");
    e.theta[l] = sprc::Vector2(t[0], t[1]);
  }
  if (e.fault_index < 1 || e.fault_index > kBlades) throw std::runtime_error("bank entry: bad fault index");
  return e;
}

class PretunedBank {
 public:
  const std::vector<BankEntry>& entries() const { return entries_; }

  // Inserts or replaces the entry with the same key.
  void put(const BankEntry& e) {
    for (auto& x : entries_) {
      if (x.fault_index == e.fault_index && x.load_case == e.load_case && x.config_hash == e.config_hash) {
        x = e;
        return;
      }
    }
    entries_.push_back(e);
  }

  const BankEntry* find(int fault_index, plant::LoadCaseId lc, const std::string& config_hash) const {
    for (const auto& x : entries_)
      if (x.fault_index == fault_index && x.load_case == lc && x.config_hash == config_hash) return &x;
    return nullptr;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "sprcfd-bank";
    j["version"] = kBankVersion;
    auto arr = nlohmann::json::array();
    for (const auto& e : entries_) arr.push_back(supervisor::to_json(e));
    j["entries"] = arr;
    return j;
  }

  static PretunedBank from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "sprcfd-bank") throw std::runtime_error("bank: not an sprcfd-bank file");
    if (j.value("version", 0) != kBankVersion) throw std::runtime_error("bank: unsupported version");
    PretunedBank b;
    for (const auto& e : j.at("entries")) b.put(entry_from_json(e));
    return b;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("bank: cannot write " + path);
    os << to_json().dump(1) << '\n';
  }

  static PretunedBank load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("bank: cannot read " + path);
    return from_json(nlohmann::json::parse(is));
  }

 private:
  std::vector<BankEntry> entries_;
};

struct SwitchEvent {
  bool applied = false;
  long k_d = 0;
  int blade = 0;
  std::string message;
};

// Warm start on isolation. Returns an event describing what happened; the
// controller is untouched when no decision is latched or the bank has no entry.
inline SwitchEvent on_detection(const fdi::FdDecision& decision, const PretunedBank& bank, plant::LoadCaseId lc,
                                const std::string& config_hash, sprc::SprcController& controller) {
  SwitchEvent ev;
  if (decision.d_fd == 0 || !decision.k_d) return ev;
  ev.k_d = *decision.k_d;
  ev.blade = decision.d_fd;
  const BankEntry* e = bank.find(decision.d_fd, lc, config_hash);
  if (e == nullptr) {
    ev.message = "no pretuned entry for blade " + std::to_string(decision.d_fd) + " / " + plant::to_string(lc) +
                 "; continuing without switch";
    return ev;
  }
  if (e->p != controller.params().past_window || e->P != controller.params().period) {
    ev.message = "pretuned entry dimensions do not match the controller; continuing without switch";
    return ev;
  }
  controller.freeze(decision.d_fd - 1);
  controller.warm_start(e->xi, e->theta);
  ev.applied = true;
  ev.message = "switched to pretuned entry for blade " + std::to_string(decision.d_fd);
  return ev;
}

// collective + SPRC + excitation, per blade.
inline Triple compose_pitch_command(const plant::LoadCase& lc, const Triple& sprc_out, const Triple& prbs) {
  Triple u{};
  for (int l = 0; l < kBlades; ++l) u[l] = lc.collective_setpoint + sprc_out[l] + prbs[l];
  return u;
}

}  // namespace sprcfd::supervisor
