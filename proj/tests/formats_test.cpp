#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace latchlock;

TEST(Formats, BitStrings) {
  std::vector<std::uint8_t> v{1, 0, 0, 1, 1};
  EXPECT_EQ(bits_to_string(v), "10011");
  EXPECT_EQ(bits_from_string("10011", 5, "x"), v);
  EXPECT_THROW(bits_from_string("1001", 5, "x"), FormatError);
  EXPECT_THROW(bits_from_string("10a11", 5, "x"), FormatError);
  EXPECT_EQ(bits_to_string({}), "");
}

TEST(Formats, KeyRoundTrip) {
  auto r = lock(testutil::corpus("s27"), LockConfig{.key_bits = 8, .seed = 4}, DelayModel{});
  auto j = key_to_json(r.locked, r.correct_key);
  EXPECT_EQ(key_from_json(Json::parse(j.dump()), r.locked), r.correct_key);
  // tampered latch indices are caught
  auto bad = j;
  auto first = bad["latches"].begin();
  (*first)[0] = 99;
  EXPECT_THROW(key_from_json(bad, r.locked), FormatError);
  EXPECT_THROW(key_from_json(Json{{"key", "0101"}}, r.locked), std::exception);
  EXPECT_THROW(key_from_json(Json::object(), r.locked), FormatError);
}

TEST(Formats, DelayRoundTrip) {
  DelayModel dm;
  dm.combinational = 12;
  dm.d_latch = 25;
  dm.per_kind[CellKind::Xor] = 18;
  dm.per_cell["G11"] = 40;
  auto j = delays_to_json(dm, ClockSpec{250});
  auto f = delays_from_json(Json::parse(j.dump()));
  ASSERT_TRUE(f.clock);
  EXPECT_EQ(f.clock->period, 250);
  EXPECT_EQ(f.model.combinational, 12);
  EXPECT_EQ(f.model.d_latch, 25);
  EXPECT_EQ(f.model.per_kind.at(CellKind::Xor), 18);
  EXPECT_EQ(f.model.per_cell.at("G11"), 40);
  EXPECT_FALSE(delays_from_json(Json{{"default", {{"D_LATCH", 30}}}}).clock);
  EXPECT_EQ(delays_from_json(Json{{"default", {{"D_LATCH", 30}}}}).model.d_latch, 30);
  EXPECT_THROW(delays_from_json(Json{{"default", {{"WIDGET", 3}}}}), FormatError);
  EXPECT_THROW(delays_from_json(Json{{"cells", {{"g", -5}}}}), std::invalid_argument);
  EXPECT_THROW(delays_from_json(Json{{"period_ps", 0}}), std::invalid_argument);
}

TEST(Formats, TraceRoundTrip) {
  auto n = testutil::corpus("s27");
  Rng rng(2, "fmt");
  auto steps = testutil::random_steps(n.inputs().size(), 6, rng, true);
  Simulator sim(n, KeyVector());
  sim.clear_state();
  for (auto& s : steps) s.outputs = sim.step(s.phase, s.inputs, s.reset);
  auto j = trace_to_json(steps, 77);
  auto t = trace_from_json(Json::parse(j.dump()), n);
  EXPECT_EQ(t.state_seed, 77u);
  ASSERT_EQ(t.steps.size(), steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    EXPECT_EQ(t.steps[i].phase, steps[i].phase);
    EXPECT_EQ(t.steps[i].reset, steps[i].reset);
    EXPECT_EQ(t.steps[i].inputs, steps[i].inputs);
  }
  EXPECT_THROW(trace_from_json(Json{{"steps", {{{"phase", "X"}, {"in", "0000"}}}}}, n), FormatError);
  EXPECT_THROW(trace_from_json(Json{{"steps", {{{"in", "00"}}}}}, n), FormatError);
  EXPECT_THROW(trace_from_json(Json::object(), n), FormatError);
  auto withstate = trace_from_json(Json{{"steps", Json::array()}, {"initial_state", {{"G5", 1}}}}, n);
  EXPECT_EQ(withstate.initial_state.at("G5"), 1);
}

TEST(Formats, ManifestAndAttackShape) {
  auto n = testutil::corpus("s27");
  LockConfig cfg{.key_bits = 4, .seed = 1};
  auto r = lock(n, cfg, DelayModel{});
  auto m = manifest_to_json(r, cfg);
  EXPECT_EQ(m["config"]["key_bits"], 4);
  EXPECT_EQ(m["latches"].size(), 2u);
  EXPECT_EQ(m["clock_period_ps"], r.clock.period);
  OracleSession oracle(r.locked, r.correct_key, 3);
  auto res = run_attack(r.locked, DelayModel{}, r.clock, oracle);
  auto a = attack_to_json(res, 3);
  EXPECT_EQ(a["status"], "solved");
  EXPECT_EQ(a["key"], res.key.to_string());
  EXPECT_EQ(a["trace"]["steps"].size(), res.trace.size());
  EXPECT_TRUE(a.contains("timing"));
  auto st = netlist_stats(r.locked);
  EXPECT_EQ(st["keyed_latches"], 2);
  EXPECT_EQ(st["key_inputs"], 4);
}

TEST(Formats, CountsCsv) {
  KeyCounts c;
  c.bits = 8;
  c.total = 256;
  c.loop = 100;
  c.timing = 90;
  c.both = 81;
  EXPECT_EQ(counts_csv_header(), "bits,loop_count,timing_count,intersection\n");
  EXPECT_EQ(counts_csv_row(c), "8,100,90,81\n");
}

TEST(Formats, MissingFileIsReported) {
  EXPECT_THROW(read_json_file("/nonexistent/file.json"), FormatError);
}
