#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "netlist.hpp"

namespace latchlock {

/// Keyed-latch programming, decoded from its (k0, k1) pair.
///   00: held in reset, output constant 0 (logic decoy)
///   01: transparent while the clock is high
///   10: transparent while the clock is low
///   11: clock held high, always transparent (delay decoy)
enum class LatchMode : std::uint8_t { LogicDecoy = 0, PosPhase = 1, NegPhase = 2, Clear = 3 };

inline constexpr LatchMode decode_mode(bool k0, bool k1) {
  return static_cast<LatchMode>((k0 ? 2 : 0) | (k1 ? 1 : 0));
}
inline constexpr std::pair<bool, bool> encode_mode(LatchMode m) {
  auto v = static_cast<unsigned>(m);
  return {(v & 2u) != 0, (v & 1u) != 0};
}

inline constexpr std::string_view mode_name(LatchMode m) {
  switch (m) {
    case LatchMode::LogicDecoy: return "logic_decoy";
    case LatchMode::PosPhase: return "pos";
    case LatchMode::NegPhase: return "neg";
    case LatchMode::Clear: return "clear";
  }
  return "?";
}

enum class Phase : std::uint8_t { High, Low };

/// Control signals of the latch clock/reset block for one mode and clock level.
struct LatchControl {
  bool reset;
  bool clock;
};
inline constexpr LatchControl latch_control(LatchMode m, bool clk) {
  switch (m) {
    case LatchMode::LogicDecoy: return {true, false};
    case LatchMode::PosPhase: return {false, clk};
    case LatchMode::NegPhase: return {false, !clk};
    case LatchMode::Clear: return {false, true};
  }
  return {false, false};
}

inline constexpr bool transparent_in(LatchMode m, Phase p) {
  return latch_control(m, p == Phase::High).clock && !latch_control(m, p == Phase::High).reset;
}

inline constexpr bool is_state_mode(LatchMode m) { return m == LatchMode::PosPhase || m == LatchMode::NegPhase; }

/// Ordered key bits; index i programs Netlist::key_inputs()[i].
class KeyVector {
 public:
  KeyVector() = default;
  explicit KeyVector(std::size_t n) : bits_(n, 0) {}
  explicit KeyVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

  static KeyVector from_string(std::string_view s) {
    KeyVector k(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '0' && s[i] != '1') throw std::invalid_argument("key string must contain only 0/1");
      k.bits_[i] = s[i] == '1';
    }
    return k;
  }
  static KeyVector from_index(std::uint64_t v, std::size_t n) {
    KeyVector k(n);
    for (std::size_t i = 0; i < n; ++i) k.bits_[i] = (v >> i) & 1u;
    return k;
  }
  std::uint64_t to_index() const {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bits_.size() && i < 64; ++i) v |= std::uint64_t(bits_[i] != 0) << i;
    return v;
  }

  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
    return s;
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_.at(i) != 0; }
  void set(std::size_t i, bool v) { bits_.at(i) = v; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  bool operator==(const KeyVector& o) const { return bits_ == o.bits_; }
  bool operator!=(const KeyVector& o) const { return !(*this == o); }

 private:
  std::vector<std::uint8_t> bits_;
};

inline void check_key(const Netlist& n, const KeyVector& k) {
  if (k.size() != n.num_keys())
    throw std::invalid_argument("key has " + std::to_string(k.size()) + " bits, netlist expects " +
                                std::to_string(n.num_keys()));
}

/// Mode of every cell under `key`; non-KLATCH latches get their fixed phase,
/// other cells an unused PosPhase placeholder.
inline std::vector<LatchMode> latch_modes(const Netlist& n, const KeyVector& key) {
  check_key(n, key);
  std::vector<LatchMode> m(n.num_cells(), LatchMode::PosPhase);
  for (CellId c = 0; c < n.num_cells(); ++c) {
    const auto& cell = n.cell(c);
    if (cell.kind == CellKind::KLatch)
      m[c] = decode_mode(key[cell.key0], key[cell.key1]);
    else if (cell.kind == CellKind::LatchN)
      m[c] = LatchMode::NegPhase;
  }
  return m;
}

/// Latches acting as wires in phase `p` under `modes`.
inline std::vector<CellId> transparent_latches(const Netlist& n, const std::vector<LatchMode>& modes, Phase p) {
  std::vector<CellId> t;
  for (CellId c = 0; c < n.num_cells(); ++c)
    if (is_latch(n.cell(c).kind) && transparent_in(modes[c], p)) t.push_back(c);
  return t;
}

}  // namespace latchlock
