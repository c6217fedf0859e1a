#pragma once

// Serialized artifacts of protocol runs: the JSON-lines transcript and the
// verdict CSV, plus a seeded ensemble runner.

#include <cstdint>
#include <string>
#include <vector>

#include "cvbroadcast/protocol.hpp"
#include "cvbroadcast/scenarios.hpp"

namespace cvb {

// First line: header with seed, scenario and config. Then one event per line.
std::string transcript_jsonl(const ProtocolConfig& config, const std::string& scenario,
                             const std::vector<Event>& events);

inline constexpr const char* kVerdictCsvHeader = "seed,scenario,outcome,decision_R0,decision_R1,aborted";

std::string verdict_csv_row(std::uint64_t seed, const std::string& scenario, const Verdict& v);

struct EnsembleRun {
  std::uint64_t seed = 0;
  Verdict verdict;
  std::string transcript;  // empty unless requested
};

struct EnsembleSummary {
  std::size_t runs = 0;
  std::size_t broadcast = 0;
  std::size_t all_honest_abort = 0;
  std::size_t detected = 0;
  std::size_t failures = 0;
  std::size_t contradictory = 0;  // honest receivers holding different bits
};

// Runs seeds first_seed .. first_seed + count - 1 with `threads` workers;
// results are ordered by seed.
std::vector<EnsembleRun> run_ensemble(const ProtocolConfig& base, const Scenario& scenario, std::uint64_t first_seed,
                                      std::size_t count, unsigned threads, bool keep_transcripts);

EnsembleSummary summarize(const std::vector<EnsembleRun>& runs);

// Comment line, header and one row per run.
std::string verdict_csv(const std::string& scenario, const std::vector<EnsembleRun>& runs);

}  // namespace cvb
