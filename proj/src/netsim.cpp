#include "cvbroadcast/netsim.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string join_indices(const std::vector<std::size_t>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

std::string bit_text(const std::optional<Bit>& b) { return b ? std::to_string(value_of(*b)) : "bot"; }

}  // namespace

std::string_view to_string(PlayerId p) {
  switch (p) {
    case PlayerId::S: return "S";
    case PlayerId::R0: return "R0";
    case PlayerId::R1: return "R1";
  }
  return "?";
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_of(std::string_view text) { return fmt::format("{:016x}", fnv1a64(text)); }

RngStream::RngStream(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t key = splitmix(s);
  s = key ^ fnv1a64(label);
  key = splitmix(s);
  s = key ^ (index * 0xd1b54a32d192ed03ULL);
  state_ = splitmix(s);
}

RngStream::result_type RngStream::operator()() { return splitmix(state_); }

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::string_view kind_of(const Payload& p) {
  struct Visitor {
    std::string_view operator()(const IndexSet&) const { return "index_set"; }
    std::string_view operator()(const OutcomeAnnouncement&) const { return "outcome_announcement"; }
    std::string_view operator()(const Flag&) const { return "flag"; }
    std::string_view operator()(const BroadcastBit&) const { return "broadcast_bit"; }
    std::string_view operator()(const IndexDemand&) const { return "index_demand"; }
    std::string_view operator()(const FlagExchange&) const { return "flag_exchange"; }
    std::string_view operator()(const IndexReply&) const { return "index_reply"; }
  };
  return std::visit(Visitor{}, p);
}

std::string canonical_text(const Payload& p) {
  struct Visitor {
    std::string operator()(const IndexSet& m) const { return "I:" + join_indices(m.indices); }
    std::string operator()(const OutcomeAnnouncement& m) const {
      std::string out = "O:";
      for (std::size_t i = 0; i < m.indices.size(); ++i) {
        out += fmt::format("{}/{}/", m.indices[i], index_of(m.modes[i]));
        out += m.values[i] ? fmt::format("{:.17g};", *m.values[i]) : std::string("none;");
      }
      return out;
    }
    std::string operator()(const Flag& m) const { return m.value ? "F:1" : "F:0"; }
    std::string operator()(const BroadcastBit& m) const { return fmt::format("B:{}", value_of(m.value)); }
    std::string operator()(const IndexDemand& m) const {
      return "D:" + bit_text(m.value) + ":" + join_indices(m.indices);
    }
    std::string operator()(const FlagExchange& m) const { return "X:" + bit_text(m.value); }
    std::string operator()(const IndexReply& m) const { return "R:" + join_indices(m.indices); }
  };
  return std::visit(Visitor{}, p);
}

namespace {

std::size_t payload_size(const Payload& p) {
  if (const auto* s = std::get_if<IndexSet>(&p)) return s->indices.size();
  if (const auto* o = std::get_if<OutcomeAnnouncement>(&p)) return o->indices.size();
  if (const auto* d = std::get_if<IndexDemand>(&p)) return d->indices.size();
  if (const auto* r = std::get_if<IndexReply>(&p)) return r->indices.size();
  return 1;
}

}  // namespace

Network::Network(std::size_t n_states, PlayerId preparer, OutcomeSource source)
    : n_states_(n_states),
      source_(std::move(source)),
      owner_(3 * n_states, preparer),
      measured_(3 * n_states, 0),
      offset_(3 * n_states, 0.0),
      drawn_(n_states) {}

std::size_t Network::slot(const SubsystemRef& ref) const {
  if (ref.state >= n_states_) {
    throw StructuralError(fmt::format("state {} out of range ({} states)", ref.state, n_states_));
  }
  return 3 * ref.state + index_of(ref.mode);
}

Event& Network::log(const std::string& phase, const std::string& step, const std::string& kind,
                    std::optional<PlayerId> from, std::optional<PlayerId> to) {
  Event e;
  e.seq = events_.size();
  e.round = round_;
  e.phase = phase;
  e.step = step;
  e.kind = kind;
  e.from = from;
  e.to = to;
  events_.push_back(std::move(e));
  return events_.back();
}

void Network::send(Message m) {
  if (m.from == m.to) throw StructuralError("a player cannot message itself");
  const std::string text = canonical_text(m.payload);
  Event& e = log(m.phase, m.step, "send:" + std::string(kind_of(m.payload)), m.from, m.to);
  e.digest = digest_of(text);
  e.size = payload_size(m.payload);
  pending_.emplace_back(e.seq, std::move(m));
}

void Network::publish(PlayerId from, const std::string& phase, const std::string& step, const Payload& payload) {
  for (PlayerId to : kPlayers) {
    if (to != from) send(Message{from, to, phase, step, payload});
  }
}

void Network::end_round() {
  for (auto& [seq, m] : pending_) inbox_[index_of(m.to)].emplace_back(seq, std::move(m));
  pending_.clear();
  ++round_;
}

std::vector<Message> Network::receive(PlayerId who) {
  auto& box = inbox_[index_of(who)];
  std::vector<Message> out;
  out.reserve(box.size());
  for (auto& [seq, m] : box) {
    Event& e = log(m.phase, m.step, "receive:" + std::string(kind_of(m.payload)), m.from, who);
    e.digest = events_[seq].digest;
    e.size = events_[seq].size;
    e.ref = seq;
    out.push_back(std::move(m));
  }
  box.clear();
  return out;
}

PlayerId Network::owner(const SubsystemRef& ref) const { return owner_[slot(ref)]; }

bool Network::measured(const SubsystemRef& ref) const { return measured_[slot(ref)] != 0; }

void Network::transfer(PlayerId from, PlayerId to, const std::vector<SubsystemRef>& refs, const std::string& phase,
                       const std::string& step) {
  std::string text;
  for (const auto& r : refs) {
    const std::size_t k = slot(r);
    if (owner_[k] != from) {
      throw OwnershipViolation(fmt::format("{} does not own subsystem {}/{}", to_string(from), r.state,
                                           index_of(r.mode)));
    }
    if (measured_[k]) {
      throw OwnershipViolation(fmt::format("subsystem {}/{} was already measured", r.state, index_of(r.mode)));
    }
    text += fmt::format("{}/{};", r.state, index_of(r.mode));
  }
  for (const auto& r : refs) owner_[slot(r)] = to;
  Event& e = log(phase, step, "quantum_transfer", from, to);
  e.digest = digest_of(text);
  e.size = refs.size();
}

void Network::displace(PlayerId who, const std::vector<SubsystemRef>& refs, double offset, const std::string& phase,
                       const std::string& step) {
  for (const auto& r : refs) {
    const std::size_t k = slot(r);
    if (owner_[k] != who || measured_[k]) {
      throw OwnershipViolation(fmt::format("{} cannot act on subsystem {}/{}", to_string(who), r.state,
                                           index_of(r.mode)));
    }
    offset_[k] += offset;
  }
  Event& e = log(phase, step, "displace", who, std::nullopt);
  e.size = refs.size();
  e.detail = fmt::format("{:.12g}", offset);
}

std::vector<double> Network::measure(PlayerId who, const std::vector<SubsystemRef>& refs, const std::string& phase,
                                     const std::string& step) {
  std::vector<double> out;
  out.reserve(refs.size());
  std::string text;
  for (const auto& r : refs) {
    const std::size_t k = slot(r);
    if (owner_[k] != who) {
      throw OwnershipViolation(fmt::format("{} does not own subsystem {}/{}", to_string(who), r.state,
                                           index_of(r.mode)));
    }
    if (measured_[k]) {
      throw OwnershipViolation(fmt::format("subsystem {}/{} measured twice", r.state, index_of(r.mode)));
    }
    measured_[k] = 1;
    auto& triple = drawn_[r.state];
    if (!triple) triple = source_(r.state);
    out.push_back((*triple)[index_of(r.mode)] + offset_[k]);
    text += fmt::format("{}/{};", r.state, index_of(r.mode));
  }
  Event& e = log(phase, step, "measure", who, std::nullopt);
  e.digest = digest_of(text);
  e.size = refs.size();
  return out;
}

void Network::note(const std::string& phase, const std::string& step, const std::string& kind,
                   std::optional<PlayerId> who, const std::string& detail) {
  Event& e = log(phase, step, kind, who, std::nullopt);
  e.detail = detail;
}

std::size_t Network::measured_count() const {
  return static_cast<std::size_t>(std::count(measured_.begin(), measured_.end(), 1));
}

bool check_secrecy(const std::vector<Event>& events, std::string* problem) {
  std::map<std::uint64_t, bool> sends;  // seq -> already read
  auto fail = [&](std::string why) {
    if (problem) *problem = std::move(why);
    return false;
  };
  for (const Event& e : events) {
    if (e.kind.rfind("send:", 0) == 0) {
      if (!e.to || !e.from || *e.to == *e.from) return fail(fmt::format("send {} has no distinct peer", e.seq));
      sends.emplace(e.seq, false);
    } else if (e.kind.rfind("receive:", 0) == 0) {
      if (!e.ref || !e.to) return fail(fmt::format("receive {} lacks a reference", e.seq));
      auto it = sends.find(*e.ref);
      if (it == sends.end()) return fail(fmt::format("receive {} matches no earlier send", e.seq));
      if (it->second) return fail(fmt::format("send {} was read twice", *e.ref));
      const Event& s = events[*e.ref];
      if (s.to != e.to || s.from != e.from || s.digest != e.digest) {
        return fail(fmt::format("receive {} by {} does not match send {}", e.seq, to_string(*e.to), s.seq));
      }
      it->second = true;
    }
  }
  return true;
}

}  // namespace cvb
