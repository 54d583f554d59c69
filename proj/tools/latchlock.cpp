// Command-line front end: lock, attack, count-keys, simulate, verify, stats.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <latchlock/latchlock.hpp>

namespace ll = latchlock;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kTimeout = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void diagnose(const char* kind, const std::string& message, int line = 0) {
  ll::Json j{{"error", kind}, {"message", message}};
  if (line > 0) j["line"] = line;
  std::cerr << j.dump() << "\n";
}

ll::Netlist load_netlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ll::FormatError("cannot open " + path);
  std::string stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.find('.'));
  return ll::parse_bench(in, stem);
}

ll::DelayFile load_delays(const std::string& path) {
  if (path.empty()) return {};
  return ll::delays_from_json(ll::read_json_file(path));
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    ll::write_text_file(path, text);
}

std::string dump(const ll::Json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latch-based logic locking: insertion, key constraints, and sequential attack"};
  app.require_subcommand(1);
  app.set_version_flag("--version", [] {
    return std::string("latchlock ") + ll::kVersion + "\nschemas " + ll::schema_versions().dump();
  });
  int jobs = 1;
  app.add_option("--jobs", jobs, "Worker cap (runs are single-threaded)")->check(CLI::PositiveNumber);

  // lock
  auto* lock = app.add_subcommand("lock", "Insert keyed latches and decoys");
  std::string lock_in, lock_out, lock_key, lock_manifest, lock_delays;
  ll::LockConfig cfg;
  bool no_retime = false;
  lock->add_option("--in", lock_in, "Original BENCH netlist")->required()->check(CLI::ExistingFile);
  lock->add_option("--bits", cfg.key_bits, "Key bits (even)")->required();
  lock->add_option("--ratio", cfg.decoy_ratio, "Decoy latches per converted latch");
  lock->add_option("--seed", cfg.seed, "Seed for selection, retiming and decoys")->required();
  lock->add_option("--delays", lock_delays, "Delay annotation JSON")->check(CLI::ExistingFile);
  lock->add_option("--out", lock_out, "Locked BENCH output")->required();
  lock->add_option("--key", lock_key, "Key JSON output")->required();
  lock->add_option("--manifest", lock_manifest, "Manifest JSON output");
  lock->add_option("--check-cycles", cfg.check_cycles, "Simulation cycles for the self-check");
  lock->add_flag("--no-retime", no_retime, "Skip latch retiming");

  // attack
  auto* attack = app.add_subcommand("attack", "Oracle-guided sequential attack");
  std::string at_net, at_oracle, at_key, at_delays, at_out;
  ll::AttackBudgets budgets;
  std::uint64_t at_seed = 0;
  attack->add_option("--net", at_net, "Locked BENCH netlist")->required()->check(CLI::ExistingFile);
  attack->add_option("--oracle-net", at_oracle, "Netlist run as the oracle")->required()->check(CLI::ExistingFile);
  attack->add_option("--oracle-key", at_key, "Key JSON for the oracle")->required()->check(CLI::ExistingFile);
  attack->add_option("--delays", at_delays, "Delay annotation JSON (period_ps required)")->required()->check(CLI::ExistingFile);
  attack->add_option("--budget-s", budgets.wall_seconds, "Wall-clock budget in seconds");
  attack->add_option("--max-depth", budgets.max_depth, "Frames searched past the trace");
  attack->add_option("--state-seed", at_seed, "Seed for the oracle's power-up state");
  attack->add_option("--out", at_out, "Result JSON output");

  // count-keys
  auto* count = app.add_subcommand("count-keys", "Count keys satisfying loop and timing constraints");
  std::string ck_net, ck_in, ck_delays, ck_out, ck_bits;
  std::size_t ck_max = 24;
  std::uint64_t ck_seed = 1;
  count->add_option("--net", ck_net, "Locked BENCH netlist")->check(CLI::ExistingFile);
  count->add_option("--in", ck_in, "Original netlist to lock at each width of --bits")->check(CLI::ExistingFile);
  count->add_option("--bits", ck_bits, "Comma-separated key widths for --in");
  count->add_option("--seed", ck_seed, "Lock seed for --in");
  count->add_option("--delays", ck_delays, "Delay annotation JSON")->check(CLI::ExistingFile);
  count->add_option("--bits-max", ck_max, "Largest key width to enumerate");
  count->add_option("--out", ck_out, "CSV output");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a trace through a netlist");
  std::string sim_net, sim_key, sim_trace, sim_out;
  simulate->add_option("--net", sim_net, "BENCH netlist")->required()->check(CLI::ExistingFile);
  simulate->add_option("--key", sim_key, "Key JSON")->check(CLI::ExistingFile);
  simulate->add_option("--trace", sim_trace, "Trace JSON (outputs ignored)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "Completed trace JSON output");

  // verify
  auto* verify = app.add_subcommand("verify", "Compare a locked netlist with its original by simulation");
  std::string v_orig, v_locked, v_key;
  int v_cycles = 1000, v_seeds = 10;
  verify->add_option("--orig", v_orig, "Original netlist")->required()->check(CLI::ExistingFile);
  verify->add_option("--locked", v_locked, "Locked netlist")->required()->check(CLI::ExistingFile);
  verify->add_option("--key", v_key, "Key JSON")->required()->check(CLI::ExistingFile);
  verify->add_option("--cycles", v_cycles, "Clock cycles per stimulus seed");
  verify->add_option("--seeds", v_seeds, "Stimulus seeds (64 lanes each)");

  // stats
  auto* stats = app.add_subcommand("stats", "Cell, flip-flop, latch and key counts");
  std::string st_net;
  stats->add_option("--net", st_net, "BENCH netlist")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    diagnose("usage", e.what());
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*lock) {
      auto n = load_netlist(lock_in);
      auto d = load_delays(lock_delays);
      cfg.retime = !no_retime;
      auto r = ll::lock(n, cfg, d.model, d.clock);
      emit(lock_out, ll::write_bench(r.locked));
      emit(lock_key, dump(ll::key_to_json(r.locked, r.correct_key)));
      if (!lock_manifest.empty()) emit(lock_manifest, dump(ll::manifest_to_json(r, cfg)));
      return kOk;
    }
    if (*attack) {
      auto n = load_netlist(at_net);
      auto on = load_netlist(at_oracle);
      auto ok = ll::key_from_json(ll::read_json_file(at_key), on);
      auto d = load_delays(at_delays);
      if (!d.clock) throw UsageError("the delay file must give period_ps for an attack");
      ll::OracleSession oracle(on, ok, at_seed);
      auto r = ll::run_attack(n, d.model, *d.clock, oracle, budgets);
      emit(at_out, dump(ll::attack_to_json(r, at_seed)));
      if (r.status == ll::AttackStatus::Timeout) {
        diagnose("timeout", "attack budget exhausted after " + std::to_string(r.stats.dis_count) + " DIS");
        return kTimeout;
      }
      if (r.status == ll::AttackStatus::Infeasible) {
        diagnose("infeasible", "no key agrees with the oracle trace");
        return kValidation;
      }
      return kOk;
    }
    if (*count) {
      auto d = load_delays(ck_delays);
      std::string csv = ll::counts_csv_header();
      auto count_one = [&](const ll::Netlist& n, std::optional<ll::ClockSpec> clk, const ll::Netlist& timing_ref) {
        ll::ClockSpec c = clk ? *clk : ll::default_clock(timing_ref, d.model);
        auto cs = ll::gen_constraints(n, d.model, c);
        csv += ll::counts_csv_row(ll::count_valid_keys(n, cs, ck_max));
      };
      if (!ck_net.empty() == !ck_in.empty()) throw UsageError("give exactly one of --net and --in");
      if (!ck_net.empty()) {
        auto n = load_netlist(ck_net);
        if (!d.clock) throw UsageError("--net needs a delay file with period_ps");
        count_one(n, d.clock, n);
      } else {
        auto orig = load_netlist(ck_in);
        std::stringstream ss(ck_bits.empty() ? std::string("8,12,16,20") : ck_bits);
        for (std::string tok; std::getline(ss, tok, ',');) {
          ll::LockConfig c;
          c.key_bits = std::stoi(tok);
          c.seed = ck_seed;
          auto r = ll::lock(orig, c, d.model, d.clock);
          count_one(r.locked, r.clock, orig);
        }
      }
      emit(ck_out, csv);
      return kOk;
    }
    if (*simulate) {
      auto n = load_netlist(sim_net);
      ll::KeyVector k(n.num_keys());
      if (!sim_key.empty()) k = ll::key_from_json(ll::read_json_file(sim_key), n);
      else if (n.num_keys() > 0) throw UsageError("--key is required for a keyed netlist");
      auto t = ll::simulate(n, k, ll::trace_from_json(ll::read_json_file(sim_trace), n));
      emit(sim_out, dump(ll::trace_to_json(t.steps, t.state_seed)));
      return kOk;
    }
    if (*verify) {
      auto a = load_netlist(v_orig);
      auto b = load_netlist(v_locked);
      auto k = ll::key_from_json(ll::read_json_file(v_key), b);
      auto m = ll::compare_by_simulation(a, ll::KeyVector(a.num_keys()), b, k, v_cycles, v_seeds);
      std::cout << dump(ll::Json{{"mismatches", m}, {"cycles", v_cycles}, {"seeds", v_seeds}, {"lanes", 64}});
      if (m != 0) {
        diagnose("mismatch", std::to_string(m) + " output mismatches");
        return kValidation;
      }
      return kOk;
    }
    if (*stats) {
      std::cout << dump(ll::netlist_stats(load_netlist(st_net)));
      return kOk;
    }
  } catch (const UsageError& e) {
    diagnose("usage", e.what());
    return kUsage;
  } catch (const ll::NetlistError& e) {
    diagnose("netlist", e.what(), e.line());
    return kValidation;
  } catch (const ll::LockError& e) {
    diagnose("lock", e.what());
    return kValidation;
  } catch (const ll::AttackError& e) {
    diagnose("attack", e.what());
    return kValidation;
  } catch (const std::invalid_argument& e) {
    diagnose("validation", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    diagnose("internal", e.what());
    return kValidation;
  }
  return kUsage;
}
