#pragma once

// Deterministic three-player network: pairwise secure classical channels
// with synchronous round delivery, ownership-tracked transfer of quantum
// subsystems, lazily drawn joint outcomes and a global event log.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cvbroadcast/bits.hpp"
#include "cvbroadcast/gaussian.hpp"
#include "cvbroadcast/measurement.hpp"

namespace cvb {

enum class PlayerId : std::uint8_t { S = 0, R0 = 1, R1 = 2 };

inline constexpr std::array<PlayerId, 3> kPlayers{PlayerId::S, PlayerId::R0, PlayerId::R1};

constexpr std::size_t index_of(PlayerId p) { return static_cast<std::size_t>(p); }
constexpr Mode own_mode(PlayerId p) { return static_cast<Mode>(static_cast<std::size_t>(p)); }
std::string_view to_string(PlayerId p);

std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 stream keyed by (seed, label, index). Satisfies
// UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();
  double uniform();  // [0, 1)

 private:
  std::uint64_t state_;
};

struct SubsystemRef {
  std::size_t state = 0;
  Mode mode = Mode::S;
};

// Classical payloads.
struct IndexSet {
  std::vector<std::size_t> indices;
};
struct OutcomeAnnouncement {
  std::vector<std::size_t> indices;
  std::vector<Mode> modes;
  std::vector<std::optional<double>> values;  // nullopt: no result reported
};
struct Flag {
  bool value = true;
};
struct BroadcastBit {
  Bit value = Bit::Zero;
};
struct IndexDemand {
  std::vector<std::size_t> indices;  // runs asked about; may be empty
  std::optional<Bit> value;          // trit value the reply should select
};
struct FlagExchange {
  std::optional<Bit> value;  // nullopt is the undecided flag
};
struct IndexReply {
  std::vector<std::size_t> indices;
};

using Payload = std::variant<IndexSet, OutcomeAnnouncement, Flag, BroadcastBit, IndexDemand, FlagExchange, IndexReply>;

std::string_view kind_of(const Payload& p);
// Canonical text form hashed into the event digest.
std::string canonical_text(const Payload& p);

struct Message {
  PlayerId from = PlayerId::S;
  PlayerId to = PlayerId::S;
  std::string phase;
  std::string step;
  Payload payload;
};

struct Event {
  std::uint64_t seq = 0;
  std::uint64_t round = 0;
  std::string phase;
  std::string step;
  std::string kind;
  std::optional<PlayerId> from;
  std::optional<PlayerId> to;
  std::string digest;
  std::size_t size = 0;
  std::optional<std::uint64_t> ref;  // receive events: seq of the matching send
  std::string detail;
};

std::string digest_of(std::string_view text);

// Returns the outcome triple of state i; called at most once per state.
using OutcomeSource = std::function<OutcomeTriple(std::size_t)>;

class Network {
 public:
  // All 3 * n_states subsystems start with `preparer`.
  Network(std::size_t n_states, PlayerId preparer, OutcomeSource source);

  std::size_t n_states() const { return n_states_; }
  std::uint64_t round() const { return round_; }

  // Queued until end_round().
  void send(Message m);
  // Sends the same payload to both other players.
  void publish(PlayerId from, const std::string& phase, const std::string& step, const Payload& payload);
  void end_round();
  // Drains the inbox of `who` in delivery order.
  std::vector<Message> receive(PlayerId who);

  PlayerId owner(const SubsystemRef& ref) const;
  bool measured(const SubsystemRef& ref) const;
  // OwnershipViolation unless `from` owns every ref and none is measured.
  void transfer(PlayerId from, PlayerId to, const std::vector<SubsystemRef>& refs, const std::string& phase,
                const std::string& step);
  // Local displacement of owned, unmeasured subsystems: `offset` is added to
  // their position outcomes.
  void displace(PlayerId who, const std::vector<SubsystemRef>& refs, double offset, const std::string& phase,
                const std::string& step);
  std::vector<double> measure(PlayerId who, const std::vector<SubsystemRef>& refs, const std::string& phase,
                              const std::string& step);

  // Non-message entries: test results, flags, decisions.
  void note(const std::string& phase, const std::string& step, const std::string& kind, std::optional<PlayerId> who,
            const std::string& detail);

  std::size_t measured_count() const;
  const std::vector<Event>& events() const { return events_; }

 private:
  std::size_t slot(const SubsystemRef& ref) const;
  Event& log(const std::string& phase, const std::string& step, const std::string& kind,
             std::optional<PlayerId> from, std::optional<PlayerId> to);

  std::size_t n_states_;
  OutcomeSource source_;
  std::vector<PlayerId> owner_;
  std::vector<char> measured_;
  std::vector<double> offset_;
  std::vector<std::optional<OutcomeTriple>> drawn_;
  std::vector<std::pair<std::uint64_t, Message>> pending_;
  std::array<std::vector<std::pair<std::uint64_t, Message>>, 3> inbox_;
  std::vector<Event> events_;
  std::uint64_t round_ = 0;
};

// Every receive event matches exactly one earlier send addressed to the
// reader, and no send is read twice.
bool check_secrecy(const std::vector<Event>& events, std::string* problem = nullptr);

}  // namespace cvb
