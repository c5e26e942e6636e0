#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bess/analysis.hpp"
#include "bess/simulation.hpp"

namespace bess {

std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

/// Writes through a sibling temporary file and renames it into place.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Files of one run, written together with a manifest.
class OutputSet {
public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(std::string name, std::string content);
  const std::filesystem::path& directory() const { return dir_; }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  /// Writes every file, then manifest.json listing them with their hashes.
  /// `manifest` supplies the run fields (subcommand, config hash, seed).
  void commit(nlohmann::json manifest) const;

private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct NamedRun {
  std::string name;
  const SimulationResult* sim = nullptr;
};

/// Per-day metrics of one or more runs, then one summary row per run.
std::string metrics_csv(const std::vector<NamedRun>& runs, const std::string& start_time);
nlohmann::json metrics_json(const std::vector<NamedRun>& runs, const std::string& start_time);

std::string ledger_csv(const LedgerReport& report);
std::string sweep_csv(const std::vector<DepthSweepReport>& reports);
std::string scatter_csv(const std::array<EfficiencyScatter, 2>& scatter);
std::string median_csv(const std::array<EfficiencyScatter, 2>& scatter);
std::string steps_csv(const SimulationResult& sim, const std::string& start_time);
std::string allocation_csv(const SimulationResult& sim, const std::string& start_time);
std::string pso_trace_csv(const SimulationResult& sim);
std::string plans_csv(const std::vector<NamedRun>& runs, const std::string& start_time);

} // namespace bess
