#include "cvbroadcast/transcript.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "cvbroadcast/version.hpp"

namespace cvb {

namespace {

std::string decision_text(const std::optional<Bit>& b) { return b ? std::to_string(value_of(*b)) : "bot"; }

}  // namespace

std::string transcript_jsonl(const ProtocolConfig& config, const std::string& scenario,
                             const std::vector<Event>& events) {
  nlohmann::ordered_json header;
  header["type"] = "header";
  header["tool"] = kToolName;
  header["version"] = kToolVersion;
  header["seed"] = config.seed;
  header["scenario"] = scenario;
  header["config"] = config.to_json();
  std::string out = header.dump() + "\n";
  for (const Event& e : events) {
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["round"] = e.round;
    j["phase"] = e.phase;
    j["step"] = e.step;
    j["kind"] = e.kind;
    j["from"] = e.from ? nlohmann::ordered_json(std::string(to_string(*e.from))) : nlohmann::ordered_json();
    j["to"] = e.to ? nlohmann::ordered_json(std::string(to_string(*e.to))) : nlohmann::ordered_json();
    j["digest"] = e.digest;
    j["size"] = e.size;
    if (e.ref) j["ref"] = *e.ref;
    if (!e.detail.empty()) j["detail"] = e.detail;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string verdict_csv_row(std::uint64_t seed, const std::string& scenario, const Verdict& v) {
  return fmt::format("{},{},{},{},{},{}", seed, scenario, v.label(), decision_text(v.decisions[0]),
                     decision_text(v.decisions[1]), v.aborted ? 1 : 0);
}

std::vector<EnsembleRun> run_ensemble(const ProtocolConfig& base, const Scenario& scenario, std::uint64_t first_seed,
                                      std::size_t count, unsigned threads, bool keep_transcripts) {
  base.validate();
  make_scenario(scenario);  // reject unknown names before spawning workers
  const ProtocolModel model = ProtocolModel::compute(base);
  const std::string label = scenario_label(scenario);
  std::vector<EnsembleRun> runs(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_lock;

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        ProtocolConfig c = base;
        c.seed = first_seed + k;
        auto out = run_protocol(c, model, make_scenario(scenario));
        runs[k].seed = c.seed;
        runs[k].verdict = out.verdict;
        if (keep_transcripts) runs[k].transcript = transcript_jsonl(c, label, out.events);
      } catch (...) {
        std::lock_guard<std::mutex> guard(error_lock);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return runs;
}

EnsembleSummary summarize(const std::vector<EnsembleRun>& runs) {
  EnsembleSummary s;
  for (const auto& r : runs) {
    ++s.runs;
    switch (r.verdict.outcome) {
      case Outcome::BroadcastAchieved: ++s.broadcast; break;
      case Outcome::AllHonestAbort: ++s.all_honest_abort; break;
      case Outcome::DetectedAndAborted: ++s.detected; break;
      case Outcome::Failure:
        ++s.failures;
        if (r.verdict.reason == "contradictory_decisions") ++s.contradictory;
        break;
    }
  }
  return s;
}

std::string verdict_csv(const std::string& scenario, const std::vector<EnsembleRun>& runs) {
  std::string out = fmt::format("# {} {} simulate\n{}\n", kToolName, kToolVersion, kVerdictCsvHeader);
  for (const auto& r : runs) out += verdict_csv_row(r.seed, scenario, r.verdict) + "\n";
  return out;
}

}  // namespace cvb
