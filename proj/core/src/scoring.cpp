#include "traitgrid/scoring.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "traitgrid/error.hpp"

namespace traitgrid {

using nlohmann::json;

void FactorParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(alpha) || alpha < 0.0) throw Error(ErrorCode::ParamMismatch, "alpha must be >= 0");
  if (!finite(beta) || beta < 0.0) throw Error(ErrorCode::ParamMismatch, "beta must be >= 0");
  if (!finite(gamma) || gamma < 0.0) throw Error(ErrorCode::ParamMismatch, "gamma must be >= 0");
  if (!finite(theta)) throw Error(ErrorCode::ParamMismatch, "theta must be finite");
  if (!finite(s_max) || s_max <= 0.0) throw Error(ErrorCode::ParamMismatch, "s_max must be > 0");
  if (lambdas.empty()) throw Error(ErrorCode::ParamMismatch, "at least one instrument weight is required");
  for (double l : lambdas) {
    if (!finite(l) || l < 0.0) throw Error(ErrorCode::ParamMismatch, "instrument weights must be >= 0");
  }
}

void CalibrationParams::validate() const {
  if (!std::isfinite(k) || k <= 0.0) throw Error(ErrorCode::ParamMismatch, "k must be > 0");
  if (!(x0 > 0.0 && x0 < 1.0)) throw Error(ErrorCode::ParamMismatch, "x0 must lie in (0, 1)");
}

ScoringParams default_params(const LevelCatalog& catalog) {
  ScoringParams out;
  for (Factor f : kFactors) {
    FactorParams p;
    p.factor = f;
    p.s_max = 0.0;
    for (const ScenarioInstrument* ins : catalog.instruments_for(f)) {
      p.lambdas.push_back(ins->weight);
      p.s_max += ins->weight * ins->cap;
    }
    if (p.s_max <= 0.0) p.s_max = 1.0;
    out.factors[f] = p;
  }
  return out;
}

ScoringParams params_from_json(const json& j, const LevelCatalog& catalog) {
  ScoringParams out = default_params(catalog);
  try {
    if (j.contains("calibration")) {
      const json& c = j.at("calibration");
      out.calibration.k = c.value("k", out.calibration.k);
      out.calibration.x0 = c.value("x0", out.calibration.x0);
    }
    if (j.contains("factors")) {
      for (const auto& [key, v] : j.at("factors").items()) {
        const auto f = parse_factor(key);
        if (!f) throw Error(ErrorCode::BadConfig, "unknown factor '" + key + "'");
        FactorParams& p = out.factors[*f];
        p.alpha = v.value("alpha", p.alpha);
        p.beta = v.value("beta", p.beta);
        p.gamma = v.value("gamma", p.gamma);
        p.theta = v.value("theta", p.theta);
        p.s_max = v.value("s_max", p.s_max);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("scoring params: ") + e.what());
  }
  out.calibration.validate();
  for (const auto& [f, p] : out.factors) p.validate();
  return out;
}

ScoringParams load_params(const std::filesystem::path& path, const LevelCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot open params file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  return params_from_json(j, catalog);
}

json to_json(const FactorParams& p) {
  return json{{"alpha", p.alpha}, {"beta", p.beta},   {"gamma", p.gamma},
              {"theta", p.theta}, {"s_max", p.s_max}, {"lambdas", p.lambdas}};
}

double factor_raw(std::span<const ScenarioScore> scores, const FactorParams& p) {
  if (scores.size() != p.lambdas.size()) {
    throw Error(ErrorCode::ParamMismatch, "expected " + std::to_string(p.lambdas.size()) + " scenario scores, got " +
                                              std::to_string(scores.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const ScenarioScore& s = scores[i];
    if (!std::isfinite(s.player_score) || !std::isfinite(s.team_score) || s.player_score < 0.0 ||
        s.team_score < 0.0 || s.team_size < 1) {
      throw Error(ErrorCode::ParamMismatch, "malformed scenario score " + s.instrument_id);
    }
    if (s.player_score == 0.0) continue;
    const double total = s.player_score + s.team_score;
    const double gain = std::pow(s.player_score / std::pow(1.0 + s.team_score, p.gamma), p.alpha);
    const double damp = std::pow(1.0 - s.player_score / (1.0 + total), p.beta);
    sum += p.lambdas[i] * gain * damp * std::pow(static_cast<double>(s.team_size), p.theta);
  }
  return sum / p.s_max;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double calibrate(double raw, double max_ever, const CalibrationParams& cal) {
  if (!(max_ever > 0.0) || !(raw > 0.0)) return 0.0;
  const double x = std::min(1.0, raw / max_ever);
  const double lo = logistic(-cal.k * cal.x0);
  const double hi = logistic(cal.k * (1.0 - cal.x0));
  const double score = 100.0 * (logistic(cal.k * (x - cal.x0)) - lo) / (hi - lo);
  return std::clamp(score, 0.0, 100.0);
}

namespace {

json record_to_json(const PopulationRecord& r) {
  return json{{"ts", r.timestamp},
              {"session", r.session_id},
              {"participant", r.participant},
              {"factor", to_code(r.factor)},
              {"raw", r.raw}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

PopulationStore PopulationStore::open(const std::filesystem::path& path) {
  PopulationStore store;
  std::ifstream in(path);
  if (in) {
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        PopulationRecord r;
        r.timestamp = j.value("ts", "");
        r.session_id = j.at("session").get<std::string>();
        r.participant = j.value("participant", "");
        const auto f = parse_factor(j.at("factor").get<std::string>());
        if (!f) throw Error(ErrorCode::ParseError, "unknown factor");
        r.factor = *f;
        r.raw = j.at("raw").get<double>();
        store.records_.push_back(r);
        store.index(r);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }
  store.path_ = path;
  return store;
}

void PopulationStore::index(const PopulationRecord& r) {
  auto [it, inserted] = max_ever_.try_emplace(r.factor, r.raw);
  if (!inserted) it->second = std::max(it->second, r.raw);
  sessions_.insert(r.session_id);
  if (!r.participant.empty()) participants_.insert(r.participant);
}

void PopulationStore::append(const PopulationRecord& record) {
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw Error(ErrorCode::BadConfig, "cannot append to population file " + path_->string());
    out << record_to_json(record).dump() << '\n';
  }
  records_.push_back(record);
  index(record);
}

double PopulationStore::max_ever(Factor f) const {
  const auto it = max_ever_.find(f);
  return it == max_ever_.end() ? 0.0 : it->second;
}

std::vector<double> PopulationStore::values(Factor f) const {
  std::vector<double> out;
  for (const auto& r : records_) {
    if (r.factor == f) out.push_back(r.raw);
  }
  return out;
}

double PopulationStore::percentile(Factor f, double raw) const {
  std::size_t below = 0;
  std::size_t equal = 0;
  std::size_t n = 0;
  for (const auto& r : records_) {
    if (r.factor != f) continue;
    ++n;
    if (r.raw < raw) {
      ++below;
    } else if (r.raw == raw) {
      ++equal;
    }
  }
  if (n == 0) return 0.0;
  return 100.0 * (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) / static_cast<double>(n);
}

bool PopulationStore::has_session(const std::string& session_id) const { return sessions_.contains(session_id); }

bool PopulationStore::has_participant(const std::string& participant) const {
  return participants_.contains(participant);
}

PopulationStore PopulationStore::detached() const {
  PopulationStore copy = *this;
  copy.path_.reset();
  return copy;
}

double calibrate(double raw, Factor f, const PopulationStore& store, const CalibrationParams& cal) {
  if (store.values(f).empty()) {
    throw Error(ErrorCode::EmptyPopulation, "no population values for " + std::string(to_name(f)));
  }
  return calibrate(raw, store.max_ever(f), cal);
}

PopulationStore update_population(PopulationStore store, const std::string& session_id,
                                  const std::string& participant, const std::map<Factor, double>& raws) {
  for (const auto& [f, raw] : raws) {
    if (!std::isfinite(raw) || raw < 0.0) {
      throw Error(ErrorCode::ParamMismatch, "raw value for " + std::string(to_name(f)) + " must be finite and >= 0");
    }
  }
  const std::string ts = utc_now();
  for (const auto& [f, raw] : raws) store.append({ts, session_id, participant, f, raw});
  return store;
}

const FactorResult& FactorReport::factor(Factor f) const {
  for (const auto& r : factors) {
    if (r.factor == f) return r;
  }
  throw Error(ErrorCode::IllegalState, "report has no " + std::string(to_name(f)) + " entry");
}

json FactorReport::to_json() const {
  json j;
  j["session_id"] = session_id;
  j["participant"] = participant;
  j["abandoned"] = abandoned;
  j["active"] = active;
  j["calibration"] = {{"k", calibration.k}, {"x0", calibration.x0}};
  j["factors"] = json::array();
  for (const auto& r : factors) {
    json scen = json::array();
    for (const auto& s : r.scenarios) {
      scen.push_back({{"instrument", s.instrument_id},
                      {"S_P", s.player_score},
                      {"S_t", s.team_score},
                      {"S_T", s.total_score},
                      {"tau", s.team_size},
                      {"lambda", s.weight},
                      {"cap", s.cap}});
    }
    j["factors"].push_back({{"factor", to_code(r.factor)},
                            {"name", to_name(r.factor)},
                            {"raw", r.raw},
                            {"normalized", r.normalized},
                            {"score", r.score},
                            {"percentile", r.percentile},
                            {"max_ever", r.max_ever},
                            {"psi", r.psi},
                            {"params", traitgrid::to_json(r.params)},
                            {"scenarios", scen}});
  }
  return j;
}

std::string FactorReport::to_table() const {
  std::ostringstream out;
  out << "session " << session_id;
  if (!participant.empty()) out << " (" << participant << ")";
  if (abandoned) out << " [abandoned]";
  if (!active) out << " [inactive]";
  out << '\n';
  out << std::left << std::setw(18) << "factor" << std::right << std::setw(12) << "raw" << std::setw(10) << "score"
      << std::setw(12) << "percentile" << std::setw(6) << "psi" << '\n';
  out << std::fixed;
  for (const auto& r : factors) {
    out << std::left << std::setw(18) << to_name(r.factor) << std::right << std::setw(12) << std::setprecision(6)
        << r.raw << std::setw(10) << std::setprecision(2) << r.score << std::setw(12) << std::setprecision(1)
        << r.percentile << std::setw(6) << r.psi << '\n';
  }
  return out.str();
}

std::map<Factor, std::vector<ScenarioScore>> factor_inputs(const FeatureVector& features, const LevelCatalog& catalog) {
  std::map<Factor, std::vector<ScenarioScore>> out;
  for (Factor f : kFactors) {
    std::vector<ScenarioInstrument> instruments;
    for (const ScenarioInstrument* ins : catalog.instruments_for(f)) instruments.push_back(*ins);
    out[f] = scenario_scores(features, instruments);
  }
  return out;
}

std::map<Factor, double> compute_raws(const FeatureVector& features, const LevelCatalog& catalog,
                                      const ScoringParams& params) {
  std::map<Factor, double> raws;
  for (const auto& [f, scores] : factor_inputs(features, catalog)) raws[f] = factor_raw(scores, params.factors.at(f));
  return raws;
}

namespace {

FactorReport compose(const TelemetryLog& log, const FeatureVector& features, const LevelCatalog& catalog,
                     const ScoringParams& params, const PopulationStore& store) {
  FactorReport rep;
  rep.session_id = log.header().session_id;
  rep.participant = log.header().participant;
  rep.abandoned = features.abandoned;
  rep.active = features.active;
  rep.calibration = params.calibration;
  for (auto& [f, scores] : factor_inputs(features, catalog)) {
    FactorResult r;
    r.factor = f;
    r.params = params.factors.at(f);
    r.raw = factor_raw(scores, r.params);
    r.max_ever = store.max_ever(f);
    r.normalized = r.max_ever > 0.0 ? std::min(1.0, r.raw / r.max_ever) : 0.0;
    r.score = calibrate(r.raw, f, store, params.calibration);
    r.percentile = store.percentile(f, r.raw);
    r.psi = static_cast<int>(scores.size());
    r.scenarios = std::move(scores);
    rep.factors.push_back(std::move(r));
  }
  return rep;
}

}  // namespace

FactorReport compose_report(const TelemetryLog& log, const LevelCatalog& catalog, const ScoringParams& params,
                            const PopulationStore& store) {
  return compose(log, extract_features(log, catalog), catalog, params, store);
}

FactorReport report(const TelemetryLog& log, const LevelCatalog& catalog, const ScoringParams& params,
                    PopulationStore& store) {
  const FeatureVector features = extract_features(log, catalog);
  if (!store.has_session(log.header().session_id)) {
    store = update_population(std::move(store), log.header().session_id, log.header().participant,
                              compute_raws(features, catalog, params));
  }
  return compose(log, features, catalog, params, store);
}

}  // namespace traitgrid
