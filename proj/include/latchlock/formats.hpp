#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "attack.hpp"
#include "constraints.hpp"
#include "key.hpp"
#include "locking.hpp"
#include "netlist.hpp"
#include "paths.hpp"
#include "sim.hpp"
#include "timing.hpp"

namespace latchlock {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.3.0";

/// Schema version of each JSON artifact; bumped on incompatible change.
inline Json schema_versions() {
  return Json{{"key", 1}, {"delays", 1}, {"trace", 1}, {"manifest", 1}, {"attack_result", 1}, {"stats", 1}};
}

class FormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string bits_to_string(const std::vector<std::uint8_t>& v) {
  std::string s;
  for (auto b : v) s += b ? '1' : '0';
  return s;
}

inline std::vector<std::uint8_t> bits_from_string(const std::string& s, std::size_t width, const char* what) {
  if (s.size() != width)
    throw FormatError(std::string(what) + ": expected " + std::to_string(width) + " bits, got " + std::to_string(s.size()));
  std::vector<std::uint8_t> v;
  for (char c : s) {
    if (c != '0' && c != '1') throw FormatError(std::string(what) + ": not a bit string");
    v.push_back(c == '1');
  }
  return v;
}

// ---- keys -----------------------------------------------------------------

inline Json key_to_json(const Netlist& n, const KeyVector& k) {
  Json latches = Json::object();
  for (CellId c : n.keyed_latches()) latches[n.cell(c).name] = {n.cell(c).key0, n.cell(c).key1};
  return Json{{"key", k.to_string()}, {"latches", latches}};
}

inline KeyVector key_from_json(const Json& j, const Netlist& n) {
  if (!j.is_object() || !j.contains("key")) throw FormatError("key file: missing \"key\"");
  auto k = KeyVector::from_string(j.at("key").get<std::string>());
  check_key(n, k);
  if (j.contains("latches")) {
    for (auto& [name, idx] : j.at("latches").items()) {
      auto c = n.find_cell(name);
      if (!c || n.cell(*c).kind != CellKind::KLatch) throw FormatError("key file: '" + name + "' is not a keyed latch");
      if (idx.size() != 2 || idx[0].get<int>() != n.cell(*c).key0 || idx[1].get<int>() != n.cell(*c).key1)
        throw FormatError("key file: key indices of '" + name + "' do not match the netlist");
    }
  }
  return k;
}

// ---- delays ---------------------------------------------------------------

struct DelayFile {
  DelayModel model;
  std::optional<ClockSpec> clock;
};

inline DelayFile delays_from_json(const Json& j) {
  DelayFile f;
  if (j.contains("period_ps")) f.clock = ClockSpec{j.at("period_ps").get<Delay>()};
  if (j.contains("default")) {
    for (auto& [kind, d] : j.at("default").items()) {
      if (kind == "D_LATCH" || kind == "d_latch") {
        f.model.d_latch = d.get<Delay>();
        continue;
      }
      if (kind == "COMB" || kind == "combinational") {
        f.model.combinational = d.get<Delay>();
        continue;
      }
      auto k = kind_from_name(kind);
      if (!k) throw FormatError("delay file: unknown cell kind '" + kind + "'");
      f.model.per_kind[*k] = d.get<Delay>();
    }
  }
  if (j.contains("cells"))
    for (auto& [name, d] : j.at("cells").items()) f.model.per_cell[name] = d.get<Delay>();
  f.model.check();
  if (f.clock) f.clock->check();
  return f;
}

inline Json delays_to_json(const DelayModel& dm, std::optional<ClockSpec> clk) {
  Json j = Json::object();
  if (clk) j["period_ps"] = clk->period;
  Json def{{"combinational", dm.combinational}, {"d_latch", dm.d_latch}};
  for (auto& [k, d] : dm.per_kind) def[std::string(kind_name(k))] = d;
  j["default"] = def;
  Json cells = Json::object();
  for (auto& [c, d] : dm.per_cell) cells[c] = d;
  j["cells"] = cells;
  return j;
}

// ---- traces ---------------------------------------------------------------

inline Json trace_to_json(const std::vector<TraceStep>& steps, std::uint64_t state_seed) {
  Json arr = Json::array();
  for (const auto& s : steps)
    arr.push_back(Json{{"phase", s.phase == Phase::High ? "H" : "L"},
                       {"reset", s.reset ? 1 : 0},
                       {"in", bits_to_string(s.inputs)},
                       {"out", bits_to_string(s.outputs)}});
  return Json{{"steps", arr}, {"state_seed", state_seed}};
}

inline Trace trace_from_json(const Json& j, const Netlist& n) {
  Trace t;
  if (!j.contains("steps")) throw FormatError("trace: missing \"steps\"");
  for (const auto& s : j.at("steps")) {
    TraceStep st;
    std::string ph = s.value("phase", "H");
    if (ph != "H" && ph != "L") throw FormatError("trace: phase must be \"H\" or \"L\"");
    st.phase = ph == "H" ? Phase::High : Phase::Low;
    st.reset = s.value("reset", 0) != 0;
    st.inputs = bits_from_string(s.value("in", std::string()), n.inputs().size(), "trace input");
    t.steps.push_back(std::move(st));
  }
  t.state_seed = j.value("state_seed", std::uint64_t{0});
  if (j.contains("initial_state"))
    for (auto& [name, v] : j.at("initial_state").items()) t.initial_state[name] = v.get<int>() != 0;
  return t;
}

// ---- lock outputs ---------------------------------------------------------

inline Json manifest_to_json(const LockResult& r, const LockConfig& cfg) {
  Json latches = Json::array();
  for (const auto& m : r.manifest)
    latches.push_back(Json{{"name", m.name}, {"mode", mode_name(m.mode)}, {"origin", origin_name(m.origin)}});
  const auto& s = r.stats;
  return Json{
      {"config", {{"key_bits", cfg.key_bits}, {"decoy_ratio", cfg.decoy_ratio}, {"seed", cfg.seed}, {"retime", cfg.retime}}},
      {"clock_period_ps", r.clock.period},
      {"group", r.group},
      {"latches", latches},
      {"stats",
       {{"gates_before", s.gates_before},
        {"gates_after", s.gates_after},
        {"critical_before_ps", s.critical_before},
        {"critical_after_ps", s.critical_after},
        {"converted", s.converted},
        {"delay_decoys", s.delay_decoys},
        {"logic_decoys", s.logic_decoys},
        {"decoys_requested", s.decoys_requested},
        {"retime_moves", s.retime_moves},
        {"decoy_ratio", s.decoy_ratio}}}};
}

// ---- attack ---------------------------------------------------------------

inline Json attack_to_json(const AttackResult& r, std::uint64_t state_seed) {
  Json j{{"status", status_name(r.status)}};
  j["key"] = r.status == AttackStatus::Solved ? Json(r.key.to_string()) : Json(nullptr);
  Json st = Json::object();
  for (auto& [name, v] : r.initial_state) st[name] = v;
  j["initial_state"] = st;
  if (r.surviving) j["surviving_pair"] = {r.surviving->k0.to_string(), r.surviving->k1.to_string()};
  j["statistics"] = {{"dis_count", r.stats.dis_count},
                     {"final_depth", r.stats.final_depth},
                     {"trace_frames", r.stats.trace_frames},
                     {"bounded_termination", r.stats.bounded_termination}};
  j["trace"] = trace_to_json(r.trace, state_seed);
  // timing lives apart so the rest stays reproducible byte for byte
  j["timing"] = {{"wall_seconds", r.stats.wall_seconds}, {"solver_seconds", r.stats.solver_seconds},
                 {"validation_seconds", r.stats.validation_seconds}};
  return j;
}

// ---- stats ----------------------------------------------------------------

inline Json netlist_stats(const Netlist& n) {
  std::map<std::string, std::size_t> kinds;
  for (const auto& c : n.cells()) ++kinds[std::string(kind_name(c.kind))];
  Json k = Json::object();
  for (auto& [name, cnt] : kinds) k[name] = cnt;
  return Json{{"name", n.name()},
              {"inputs", n.inputs().size()},
              {"outputs", n.outputs().size()},
              {"key_inputs", n.num_keys()},
              {"cells", n.num_cells()},
              {"flip_flops", n.flip_flops().size()},
              {"latches", n.latches().size()},
              {"keyed_latches", n.keyed_latches().size()},
              {"nets", n.num_nets()},
              {"by_kind", k}};
}

inline std::string counts_csv_header() { return "bits,loop_count,timing_count,intersection\n"; }
inline std::string counts_csv_row(const KeyCounts& c) {
  std::ostringstream os;
  os << c.bits << ',' << c.loop << ',' << c.timing << ',' << c.both << '\n';
  return os.str();
}

// ---- files ----------------------------------------------------------------

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

}  // namespace latchlock
