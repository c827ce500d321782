#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitgrid/scoring.hpp"
#include "traitgrid/session.hpp"

namespace traitgrid {

// Scripted subjects. "idle" never moves; the other ten each exaggerate one behaviour.
inline constexpr std::array<std::string_view, 11> kPersonaNames{
    "explorer", "direct", "hermit", "socialite", "blocker", "yielder",
    "planner",  "rusher", "rager",  "solver",    "idle"};

// Personas whose seed-0 runs form the shipped baseline population.
inline constexpr std::array<std::string_view, 9> kBaselinePersonas{
    "explorer", "hermit", "socialite", "blocker", "yielder", "planner", "rusher", "rager", "solver"};

bool is_persona(std::string_view name);

struct PersonaSession {
  TelemetryLog telemetry;
  CommandLog commands;
  std::uint64_t final_hash = 0;
};

// Plays one full unthrottled session. Throws UnknownPersona.
PersonaSession play_persona(std::string_view name, std::uint64_t seed, std::shared_ptr<const LevelCatalog> catalog,
                            const SessionConfig& base = {});

struct PersonaRun {
  PersonaSession session;
  FactorReport report;
};

// Plays the persona and scores it against a private copy of `population`,
// which is updated with this run first. Throws UnknownPersona.
PersonaRun run_persona(std::string_view name, std::uint64_t seed, std::shared_ptr<const LevelCatalog> catalog,
                       const ScoringParams& params, const PopulationStore& population = {});

// Seed-0 runs of the baseline personas, appended to `store`.
void bootstrap_population(PopulationStore& store, std::shared_ptr<const LevelCatalog> catalog,
                          const ScoringParams& params, std::uint64_t seed = 0);

// Scores a telemetry file the same way finalize does. Throws ParseError, IncompleteLog.
FactorReport score_log(const std::filesystem::path& path, const LevelCatalog& catalog, const ScoringParams& params,
                       PopulationStore& store);

struct FactorStats {
  Factor factor = Factor::Openness;
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::array<std::size_t, 10> deciles{};  // calibrated score histogram, [0,10), ..., [90,100]
};

struct StatsTable {
  std::vector<FactorStats> rows;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Calibrated-score distribution per factor. Throws EmptyPopulation.
StatsTable export_stats(const PopulationStore& store, const CalibrationParams& cal);

}  // namespace traitgrid
