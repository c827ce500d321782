#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support/fixtures.hpp"
#include "traitgrid/error.hpp"
#include "traitgrid/harness.hpp"

using namespace traitgrid;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& stem) {
  static int counter = 0;
  return fs::temp_directory_path() /
         ("tg_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + stem);
}

const PersonaRun& cached_run(const std::string& name, std::uint64_t seed) {
  static std::map<std::pair<std::string, std::uint64_t>, PersonaRun> cache;
  const auto key = std::make_pair(name, seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, run_persona(name, seed, tgtest::shipped_catalog(), tgtest::shipped_params(),
                                        tgtest::baseline_store()))
             .first;
  }
  return it->second;
}

double raw(const PersonaRun& r, Factor f) { return r.report.factor(f).raw; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TRAITGRID_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Harness, UnknownPersonaIsRejected) {
  EXPECT_FALSE(is_persona("nobody"));
  EXPECT_TRUE(is_persona("idle"));
  try {
    play_persona("nobody", 1, tgtest::shipped_catalog());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownPersona);
  }
  EXPECT_THROW(run_persona("nobody", 1, tgtest::shipped_catalog(), tgtest::shipped_params()), Error);
}

TEST(Harness, PersonasAreDeterministicPerSeed) {
  for (std::string_view name : {"explorer", "rager"}) {
    const PersonaSession a = play_persona(name, 3, tgtest::shipped_catalog());
    const PersonaSession b = play_persona(name, 3, tgtest::shipped_catalog());
    EXPECT_EQ(a.final_hash, b.final_hash) << name;
    EXPECT_EQ(a.telemetry.to_ndjson(), b.telemetry.to_ndjson()) << name;
    EXPECT_EQ(a.commands.to_ndjson(), b.commands.to_ndjson()) << name;
  }
}

TEST(Harness, SocialiteOutscoresHermitOnExtraversion) {
  EXPECT_GT(raw(cached_run("socialite", 7), Factor::Extraversion), raw(cached_run("hermit", 7), Factor::Extraversion));
}

TEST(Harness, ExplorerVisitsEveryHiddenCell) {
  const PersonaRun& r = cached_run("explorer", 7);
  const FeatureVector fv = extract_features(r.session.telemetry, *tgtest::shipped_catalog());
  const LevelFeatures& l3 = fv.level("L3");
  ASSERT_GT(l3.hidden_cells_total, 0);
  EXPECT_EQ(l3.hidden_cells_visited, l3.hidden_cells_total);
  EXPECT_EQ(fv.difficulty_accepted, fv.difficulty_offered);
  EXPECT_GT(fv.difficulty_offered, 0);
}

TEST(Harness, RagerIdlesAfterTheTrap) {
  const FeatureVector fv = extract_features(cached_run("rager", 7).session.telemetry, *tgtest::shipped_catalog());
  const LevelFeatures& l1 = fv.level("L1");
  const LevelFeatures& l6 = fv.level("L6");
  ASSERT_TRUE(l1.played);
  ASSERT_TRUE(l6.played);
  ASSERT_GT(l1.subject_points, 0);
  // Baseline rescaled by total emission (rate times ticks) of each level.
  const double baseline =
      static_cast<double>(l1.subject_points) * (l6.total_rate * l6.ticks) / (l1.total_rate * l1.ticks);
  EXPECT_LT(static_cast<double>(l6.subject_points), 0.5 * baseline);
}

TEST(Harness, ExplorerHasTheTopOpennessAmongBaselinePersonas) {
  const double explorer = raw(cached_run("explorer", 0), Factor::Openness);
  for (std::string_view name : kBaselinePersonas) {
    if (name == "explorer") continue;
    EXPECT_GT(explorer, raw(cached_run(std::string(name), 0), Factor::Openness)) << name;
  }
}

TEST(Harness, IdleSitsAtTheFloor) {
  const PersonaRun& r = cached_run("idle", 7);
  EXPECT_FALSE(r.report.active);
  for (const auto& f : r.report.factors) {
    EXPECT_EQ(f.raw, 0.0) << to_code(f.factor);
    EXPECT_EQ(f.score, 0.0) << to_code(f.factor);
  }
}

TEST(Harness, EachPersonaRunsWithinTenSeconds) {
  for (std::string_view name : kPersonaNames) {
    const auto t0 = std::chrono::steady_clock::now();
    const PersonaSession s = play_persona(name, 11, tgtest::shipped_catalog());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 10.0) << name;
    EXPECT_FALSE(s.telemetry.events().empty()) << name;
  }
}

TEST(ScoreLog, MatchesTheFinalizeReport) {
  const PersonaSession persona = play_persona("yielder", 5, tgtest::shipped_catalog());
  SessionManager mgr(tgtest::shipped_catalog(), tgtest::shipped_params(), tgtest::baseline_store().detached(), {});
  const std::string id = mgr.create_session(persona.commands.participant, persona.commands.seed);
  const auto s = mgr.session(id);
  s->drain();
  for (const auto& c : persona.commands.commands) {
    while (s->session_tick() < c.at && !s->complete()) s->advance();
    s->handle_message(c.message);
  }
  while (!s->complete()) s->advance();
  EXPECT_EQ(s->final_hash(), persona.final_hash);

  PopulationStore before = mgr.population();
  const FactorReport finalized = mgr.finalize(id);
  const fs::path path = temp_file("telemetry.ndjson");
  s->telemetry().save(path);
  const FactorReport rescored = score_log(path, *tgtest::shipped_catalog(), tgtest::shipped_params(), before);
  EXPECT_EQ(rescored.to_json(), finalized.to_json());
  fs::remove(path);
}

TEST(ScoreLog, TruncatedFileIsIncomplete) {
  const PersonaSession persona = play_persona("direct", 2, tgtest::shipped_catalog());
  const std::string text = persona.telemetry.to_ndjson();
  const fs::path path = temp_file("truncated.ndjson");
  std::ofstream(path, std::ios::binary) << text.substr(0, text.size() / 2);
  PopulationStore store = tgtest::baseline_store().detached();
  try {
    score_log(path, *tgtest::shipped_catalog(), tgtest::shipped_params(), store);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteLog);
  }
  fs::remove(path);
}

TEST(ScoreLog, EmptyActivityLogGivesAFloorReport) {
  const PersonaSession idle = play_persona("idle", 4, tgtest::shipped_catalog());
  const fs::path path = temp_file("idle.ndjson");
  idle.telemetry.save(path);
  PopulationStore store = tgtest::baseline_store().detached();
  const FactorReport r = score_log(path, *tgtest::shipped_catalog(), tgtest::shipped_params(), store);
  ASSERT_EQ(r.factors.size(), 5u);
  for (const auto& f : r.factors) {
    EXPECT_EQ(f.raw, 0.0);
    EXPECT_EQ(f.score, 0.0);
  }
  fs::remove(path);
}

TEST(Stats, BaselineHasFiveRowsOfNine) {
  const StatsTable t = export_stats(tgtest::baseline_store(), tgtest::shipped_params().calibration);
  ASSERT_EQ(t.rows.size(), 5u);
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.count, 9u);
    std::size_t total = 0;
    for (std::size_t d : r.deciles) total += d;
    EXPECT_EQ(total, 9u);
    EXPECT_LE(r.min, r.mean);
    EXPECT_LE(r.mean, r.max);
    EXPECT_GE(r.min, 0.0);
    EXPECT_LE(r.max, 100.0);
  }
  EXPECT_EQ(t.to_json().size(), 5u);
  EXPECT_NE(t.to_text().find("Openness"), std::string::npos);
}

TEST(Stats, SingleEntryIsDegenerate) {
  PopulationStore store;
  report(play_persona("socialite", 1, tgtest::shipped_catalog()).telemetry, *tgtest::shipped_catalog(),
         tgtest::shipped_params(), store);
  const StatsTable t = export_stats(store, tgtest::shipped_params().calibration);
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.count, 1u);
    EXPECT_EQ(r.min, r.max);
    EXPECT_EQ(r.min, r.mean);
  }
}

TEST(Stats, EmptyStoreIsRejected) {
  try {
    export_stats(PopulationStore{}, CalibrationParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyPopulation);
  }
}

TEST(Cli, ExitCodes) {
  const fs::path log = temp_file("cli.ndjson");
  const fs::path commands = temp_file("cli_commands.ndjson");
  const fs::path population = temp_file("cli_population.ndjson");
  EXPECT_EQ(run_cli("--population " + population.string() + " bootstrap"), 0);
  EXPECT_EQ(run_cli("--population " + population.string() + " --seed 3 run --persona rusher --telemetry-out " +
                    log.string() + " --commands-out " + commands.string()),
            0);
  EXPECT_EQ(run_cli("--population " + population.string() + " score --log " + log.string()), 0);
  EXPECT_EQ(run_cli("features --log " + log.string()), 0);
  EXPECT_EQ(run_cli("--population " + population.string() + " --json stats"), 0);
  EXPECT_EQ(run_cli("replay --commands " + commands.string()), 0);
  EXPECT_EQ(run_cli("route --level L2"), 0);

  EXPECT_EQ(run_cli("--population " + population.string() + " run --persona nobody"), 1);
  EXPECT_EQ(run_cli("score --log " + (log.string() + ".missing")), 1);
  EXPECT_EQ(run_cli("--tick-rate 99 route"), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);

  std::ofstream(log, std::ios::binary | std::ios::trunc) << "{\"broken\":";
  EXPECT_EQ(run_cli("score --log " + log.string()), 1);
  for (const auto& p : {log, commands, population}) fs::remove(p);
}
