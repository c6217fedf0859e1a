#include "cvbroadcast/primitive.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

std::optional<Bit> sign_bin(double outcome, double reference, const AcceptanceWindow& window, bool is_sender,
                            BitConvention convention) {
  const bool accepted = is_sender ? window.sender_accepts(outcome) : window.receiver_accepts(outcome, reference);
  if (!accepted) return std::nullopt;
  return bit_for_sign(outcome, convention);
}

Trit pair_to_trit(Bit first, Bit second) {
  if (first == Bit::One && second == Bit::Zero) return Trit::Zero;
  if (first == Bit::Zero && second == Bit::One) return Trit::One;
  if (first == Bit::One && second == Bit::One) return Trit::Two;
  return Trit::U;
}

std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::Ok: return "ok";
    case RecordStatus::DiscardedU: return "discarded_u";
    case RecordStatus::Inconsistent: return "inconsistent";
  }
  return "?";
}

RecordStatus classify(const TritTriple& t) {
  const auto count = [&](Trit v) { return std::count(t.begin(), t.end(), v); };
  if (count(Trit::Zero) == 1 && count(Trit::One) == 1 && count(Trit::Two) == 1) return RecordStatus::Ok;
  if (count(Trit::U) == 1 && count(Trit::Two) == 2) return RecordStatus::DiscardedU;
  return RecordStatus::Inconsistent;
}

std::vector<PrimitiveRecord> assemble_primitive(const std::vector<BitTriple>& runs) {
  if (runs.size() % 2 != 0) {
    throw StructuralError(fmt::format("cannot pair an odd number of runs ({})", runs.size()));
  }
  std::vector<PrimitiveRecord> out;
  out.reserve(runs.size() / 2);
  for (std::size_t m = 0; 2 * m < runs.size(); ++m) {
    PrimitiveRecord rec;
    rec.index = m;
    for (std::size_t p = 0; p < 3; ++p) rec.trits[p] = pair_to_trit(runs[2 * m][p], runs[2 * m + 1][p]);
    rec.status = classify(rec.trits);
    out.push_back(rec);
  }
  return out;
}

std::vector<Trit> pair_bits(const std::vector<Bit>& bits) {
  if (bits.size() % 2 != 0) {
    throw StructuralError(fmt::format("cannot pair an odd number of bits ({})", bits.size()));
  }
  std::vector<Trit> out;
  out.reserve(bits.size() / 2);
  for (std::size_t m = 0; 2 * m < bits.size(); ++m) out.push_back(pair_to_trit(bits[2 * m], bits[2 * m + 1]));
  return out;
}

std::string records_to_csv(const std::vector<PrimitiveRecord>& records) {
  std::string out = "index,t_S,t_R0,t_R1,status\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{}\n", r.index, to_string(r.trits[0]), to_string(r.trits[1]),
                       to_string(r.trits[2]), to_string(r.status));
  }
  return out;
}

double predicted_discard_rate(const JointSignProbabilities& conditionals) {
  const auto cond = conditionals.normalized() ? conditionals : conditional_probabilities(conditionals);
  double rate = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      // A u appears when some player reads bit 0 in both runs.
      const std::size_t both_one = i | j;
      if (both_one != 7u) rate += cond.weight(i) * cond.weight(j);
    }
  }
  return rate;
}

}  // namespace cvb
