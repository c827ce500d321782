#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitgrid/scenario.hpp"
#include "traitgrid/telemetry.hpp"

namespace traitgrid {

struct FactorParams {
  Factor factor = Factor::Openness;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;  // team-influence exponent
  double theta = 0.0;
  double s_max = 1.0;
  std::vector<double> lambdas;  // one weight per instrument, in catalog order

  // Throws ParamMismatch.
  void validate() const;
};

struct CalibrationParams {
  double k = 8.0;
  double x0 = 0.5;

  // Throws ParamMismatch.
  void validate() const;
};

struct ScoringParams {
  std::map<Factor, FactorParams> factors;
  CalibrationParams calibration;
};

// Default exponents, lambdas taken from the catalog instruments, and
// s_max = sum of lambda * cap per factor.
ScoringParams default_params(const LevelCatalog& catalog);

// Reads {"calibration": {k, x0}, "factors": {"O": {alpha, beta, gamma, theta, s_max}}}
// over the catalog defaults. Every key is optional. Throws BadConfig, ParamMismatch.
ScoringParams params_from_json(const nlohmann::json& j, const LevelCatalog& catalog);
ScoringParams load_params(const std::filesystem::path& path, const LevelCatalog& catalog);
nlohmann::json to_json(const FactorParams& p);

// Weighted sum of per-instrument terms divided by s_max. A term whose S_P is
// zero contributes zero. Throws ParamMismatch when the score count differs
// from the lambda count or a score is malformed.
double factor_raw(std::span<const ScenarioScore> scores, const FactorParams& p);

double logistic(double z);

// Endpoint-corrected logistic on x = min(1, raw / max_ever); max_ever == 0 maps to 0.
double calibrate(double raw, double max_ever, const CalibrationParams& cal);

struct PopulationRecord {
  std::string timestamp;
  std::string session_id;
  std::string participant;
  Factor factor = Factor::Openness;
  double raw = 0.0;
};

// Append-only multiset of raw factor values. When bound to a file every
// append is written through as one NDJSON line.
class PopulationStore {
 public:
  PopulationStore() = default;

  // Loads an existing file (or starts empty) and binds appends to it. Throws ParseError.
  static PopulationStore open(const std::filesystem::path& path);

  void append(const PopulationRecord& record);
  const std::vector<PopulationRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  double max_ever(Factor f) const;
  std::vector<double> values(Factor f) const;
  // Mid-rank percentile of `raw` among stored values, in [0, 100].
  double percentile(Factor f, double raw) const;

  bool has_session(const std::string& session_id) const;
  bool has_participant(const std::string& participant) const;
  std::size_t session_count() const { return sessions_.size(); }

  // Unbound copy, for scoring against a snapshot without touching the file.
  PopulationStore detached() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  std::vector<PopulationRecord> records_;
  std::map<Factor, double> max_ever_;
  std::set<std::string> sessions_;
  std::set<std::string> participants_;
  std::optional<std::filesystem::path> path_;

  void index(const PopulationRecord& record);
};

// Throws EmptyPopulation when the store has no value for the factor.
double calibrate(double raw, Factor f, const PopulationStore& store, const CalibrationParams& cal);

// store' with one record per factor. Non-finite or negative raws throw ParamMismatch.
PopulationStore update_population(PopulationStore store, const std::string& session_id,
                                  const std::string& participant, const std::map<Factor, double>& raws);

struct FactorResult {
  Factor factor = Factor::Openness;
  double raw = 0.0;
  double normalized = 0.0;  // min(1, raw / max_ever)
  double score = 0.0;       // calibrated, in [0, 100]
  double percentile = 0.0;  // secondary column
  double max_ever = 0.0;
  int psi = 0;
  FactorParams params;
  std::vector<ScenarioScore> scenarios;
};

struct FactorReport {
  std::string session_id;
  std::string participant;
  bool abandoned = false;
  bool active = false;
  CalibrationParams calibration;
  std::vector<FactorResult> factors;  // kFactors order

  const FactorResult& factor(Factor f) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Raw factor values only; no population needed.
std::map<Factor, std::vector<ScenarioScore>> factor_inputs(const FeatureVector& features,
                                                           const LevelCatalog& catalog);
std::map<Factor, double> compute_raws(const FeatureVector& features, const LevelCatalog& catalog,
                                      const ScoringParams& params);

// extract_features -> scenario_scores -> factor_raw -> calibrate against `store` as-is.
FactorReport compose_report(const TelemetryLog& log, const LevelCatalog& catalog, const ScoringParams& params,
                            const PopulationStore& store);

// Adds the session to the store unless it is already there, then composes the
// report. Running it twice on the same log yields the same report.
FactorReport report(const TelemetryLog& log, const LevelCatalog& catalog, const ScoringParams& params,
                    PopulationStore& store);

}  // namespace traitgrid
