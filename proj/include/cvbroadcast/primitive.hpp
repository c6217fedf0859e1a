#pragma once

// Sign binning of accepted outcomes and assembly of the trit records that
// realize the random-permutation primitive.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvbroadcast/bits.hpp"
#include "cvbroadcast/measurement.hpp"

namespace cvb {

// Bit for an accepted outcome; nullopt if the magnitude falls outside the
// window. For receivers `reference` is the sender's announced magnitude.
std::optional<Bit> sign_bin(double outcome, double reference, const AcceptanceWindow& window, bool is_sender,
                            BitConvention convention = BitConvention::PositiveIsZero);

// (1,0)->0, (0,1)->1, (1,1)->2, (0,0)->u
Trit pair_to_trit(Bit first, Bit second);

enum class RecordStatus { Ok, DiscardedU, Inconsistent };

std::string_view to_string(RecordStatus s);

using BitTriple = std::array<Bit, 3>;    // indexed by player (S, R0, R1)
using TritTriple = std::array<Trit, 3>;

struct PrimitiveRecord {
  std::size_t index = 0;  // position in the pairing order
  TritTriple trits{};
  RecordStatus status = RecordStatus::Ok;
};

RecordStatus classify(const TritTriple& t);

// Pairs runs (2m, 2m+1). Odd length throws StructuralError.
std::vector<PrimitiveRecord> assemble_primitive(const std::vector<BitTriple>& runs);

// Single-player view of the same pairing.
std::vector<Trit> pair_bits(const std::vector<Bit>& bits);

// index,t_S,t_R0,t_R1,status
std::string records_to_csv(const std::vector<PrimitiveRecord>& records);

// Probability that a record assembled from two independent runs carries a u,
// given the per-run conditional pattern distribution.
double predicted_discard_rate(const JointSignProbabilities& conditionals);

}  // namespace cvb
