// traitgrid command line: headless persona runs, log scoring, population
// statistics, replay, route search and the live gateway.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "traitgrid/error.hpp"
#include "traitgrid/harness.hpp"
#include "traitgrid/scenario.hpp"
#include "traitgrid/scoring.hpp"
#include "traitgrid/session.hpp"

#ifdef TRAITGRID_HAVE_GATEWAY
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include "traitgrid/gateway.hpp"
#endif

namespace fs = std::filesystem;
using namespace traitgrid;

namespace {

struct GlobalOptions {
  std::string config;
  std::string catalog;
  std::string params;
  std::string population;
  std::optional<std::uint64_t> seed;
  std::optional<int> tick_rate;
  bool json = false;
};

struct Context {
  SessionConfig cfg;
  std::shared_ptr<const LevelCatalog> catalog;
  ScoringParams params;
};

Context load_context(const GlobalOptions& g) {
  Context ctx;
  if (!g.config.empty()) ctx.cfg = load_session_config(g.config);
  if (!g.catalog.empty()) ctx.cfg.catalog_path = g.catalog;
  if (!g.params.empty()) ctx.cfg.params_path = g.params;
  if (!g.population.empty()) ctx.cfg.population_path = g.population;
  if (g.seed) ctx.cfg.rng_seed = *g.seed;
  if (g.tick_rate) ctx.cfg.tick_rate = *g.tick_rate;
  if (ctx.cfg.catalog_path.empty()) ctx.cfg.catalog_path = fs::path(TRAITGRID_DEFAULT_DATA_DIR) / "catalog";
  if (ctx.cfg.params_path.empty()) {
    const fs::path shipped = fs::path(TRAITGRID_DEFAULT_DATA_DIR) / "params.json";
    if (fs::exists(shipped)) ctx.cfg.params_path = shipped;
  }
  ctx.cfg.validate();
  ctx.catalog = std::make_shared<const LevelCatalog>(load_catalog(ctx.cfg.catalog_path));
  ctx.params = ctx.cfg.params_path.empty() ? default_params(*ctx.catalog) : load_params(ctx.cfg.params_path, *ctx.catalog);
  return ctx;
}

// The persistent store when configured (bootstrapped on first use), else an
// in-memory baseline.
PopulationStore open_population(const Context& ctx) {
  PopulationStore store;
  if (!ctx.cfg.population_path.empty()) store = PopulationStore::open(ctx.cfg.population_path);
  if (store.empty()) bootstrap_population(store, ctx.catalog, ctx.params);
  return store;
}

void print_report(const FactorReport& r, bool as_json) {
  if (as_json) {
    std::cout << r.to_json().dump(2) << '\n';
  } else {
    std::cout << r.to_table();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traitgrid: game-based five-factor assessment toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--catalog", g.catalog, "Level catalog directory");
  app.add_option("--params", g.params, "Scoring parameter file");
  app.add_option("--population", g.population, "Population store (NDJSON, append-only)");
  app.add_option("--seed", g.seed, "Session RNG seed");
  app.add_option("--tick-rate", g.tick_rate, "Ticks per second for live sessions (1-30)");
  app.add_flag("--json", g.json, "Print JSON instead of a table");

  auto* run = app.add_subcommand("run", "Play one persona headlessly and score it");
  std::string persona;
  std::string telemetry_out;
  std::string commands_out;
  bool record = false;
  run->add_option("--persona", persona, "Persona name")->required();
  run->add_option("--telemetry-out", telemetry_out, "Write the telemetry log here");
  run->add_option("--commands-out", commands_out, "Write the command log here");
  run->add_flag("--record", record, "Append the result to the population store");

  auto* score = app.add_subcommand("score", "Score a telemetry log");
  std::string log_path;
  score->add_option("--log", log_path, "Telemetry NDJSON file")->required();
  score->add_flag("--record", record, "Append the result to the population store");

  auto* features = app.add_subcommand("features", "Print the feature vector extracted from a telemetry log");
  features->add_option("--log", log_path, "Telemetry NDJSON file")->required();

  auto* stats = app.add_subcommand("stats", "Per-factor distribution of the population store");

  auto* bootstrap = app.add_subcommand("bootstrap", "Seed the population store with the baseline persona runs");

  auto* replay_cmd = app.add_subcommand("replay", "Re-run a command log and print the final hash");
  std::string replay_in;
  replay_cmd->add_option("--commands", replay_in, "Command log NDJSON file")->required();
  replay_cmd->add_option("--telemetry-out", telemetry_out, "Write the replayed telemetry here");

  auto* route = app.add_subcommand("route", "Search the best subject route on a level");
  std::string route_level = "L2";
  int max_wait = 0;
  route->add_option("--level", route_level, "Level id");
  route->add_option("--max-wait", max_wait, "Largest initial wait to try");

  auto* serve = app.add_subcommand("serve", "Run the live HTTP/WebSocket session gateway");
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const Context ctx = load_context(g);

    if (*run) {
      if (!is_persona(persona)) throw Error(ErrorCode::UnknownPersona, persona);
      PopulationStore store = open_population(ctx);
      const PersonaSession s = play_persona(persona, ctx.cfg.rng_seed, ctx.catalog, ctx.cfg);
      if (!telemetry_out.empty()) s.telemetry.save(telemetry_out);
      if (!commands_out.empty()) s.commands.save(commands_out);
      PopulationStore scratch = store.detached();
      const FactorReport rep = report(s.telemetry, *ctx.catalog, ctx.params, record ? store : scratch);
      print_report(rep, g.json);
      if (!g.json) std::cout << "final hash " << hash_hex(s.final_hash) << '\n';
      return 0;
    }
    if (*score) {
      PopulationStore store = open_population(ctx);
      PopulationStore scratch = store.detached();
      print_report(score_log(log_path, *ctx.catalog, ctx.params, record ? store : scratch), g.json);
      return 0;
    }
    if (*features) {
      std::cout << extract_features(TelemetryLog::load(log_path), *ctx.catalog).to_json().dump(2) << '\n';
      return 0;
    }
    if (*stats) {
      PopulationStore store = ctx.cfg.population_path.empty() ? open_population(ctx)
                                                              : PopulationStore::open(ctx.cfg.population_path);
      const StatsTable t = export_stats(store, ctx.params.calibration);
      if (g.json) {
        std::cout << t.to_json().dump(2) << '\n';
      } else {
        std::cout << t.to_text();
      }
      return 0;
    }
    if (*bootstrap) {
      if (ctx.cfg.population_path.empty()) throw Error(ErrorCode::BadConfig, "bootstrap needs --population");
      PopulationStore store = PopulationStore::open(ctx.cfg.population_path);
      if (!store.empty()) {
        std::cout << "population already has " << store.session_count() << " sessions\n";
        return 0;
      }
      bootstrap_population(store, ctx.catalog, ctx.params);
      std::cout << "recorded " << store.session_count() << " baseline sessions\n";
      return 0;
    }
    if (*replay_cmd) {
      const ReplayResult r = replay(CommandLog::load(replay_in), ctx.catalog);
      if (!telemetry_out.empty()) {
        std::ofstream out(telemetry_out, std::ios::binary | std::ios::trunc);
        out << r.telemetry;
      }
      if (g.json) {
        std::cout << nlohmann::json{{"final_hash", hash_hex(r.final_hash)}, {"complete", r.complete}}.dump() << '\n';
      } else {
        std::cout << "final hash " << hash_hex(r.final_hash) << (r.complete ? "" : " (incomplete)") << '\n';
      }
      return 0;
    }
    if (*route) {
      const LevelSpec* spec = ctx.catalog->find_level(route_level);
      if (!spec) throw Error(ErrorCode::InvalidSpec, "unknown level " + route_level);
      const RouteSearchResult r = search_optimal_route(*spec, max_wait);
      std::cout << nlohmann::json{{"level", route_level},
                                  {"route", r.route},
                                  {"wait", r.wait},
                                  {"points", r.points},
                                  {"candidates", r.candidates}}
                       .dump()
                << '\n';
      return 0;
    }
    if (*serve) {
#ifdef TRAITGRID_HAVE_GATEWAY
      auto manager = std::make_shared<SessionManager>(ctx.catalog, ctx.params, open_population(ctx), ctx.cfg);
      GatewayServer server(manager, GatewayOptions{host, port, 2, true});
      const auto bound = server.start();
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      boost::asio::io_context signals_ctx;
      boost::asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
      signals.async_wait([&](const auto&, int) { server.stop(); });
      signals_ctx.run();
      return 0;
#else
      throw Error(ErrorCode::BadConfig, "built without the gateway");
#endif
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
