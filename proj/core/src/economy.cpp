#include "traitgrid/economy.hpp"

#include <numeric>

#include "traitgrid/error.hpp"

namespace traitgrid {

std::vector<PlayerId> TeamConfig::partners_of(PlayerId player) const {
  if (player == subject_id) return {subject_team.begin(), subject_team.end()};
  if (subject_team.contains(player)) return {subject_id};
  return {};
}

Millipoints TeamLedger::balance(PlayerId p) const {
  const auto it = balances.find(p);
  return it == balances.end() ? 0 : it->second;
}

Millipoints TeamLedger::total_balance() const {
  return std::accumulate(balances.begin(), balances.end(), Millipoints{0},
                         [](Millipoints acc, const auto& kv) { return acc + kv.second; });
}

Millipoints TeamLedger::total_gross() const {
  return std::accumulate(gross.begin(), gross.end(), Millipoints{0},
                         [](Millipoints acc, const auto& kv) { return acc + kv.second; });
}

TeamConfig select_team(const TeamConfig& current, const std::set<PlayerId>& member_ids,
                       const std::set<PlayerId>& ai_players, bool level_in_progress) {
  if (level_in_progress) throw Error(ErrorCode::SelectionLocked, "teams can only change between levels");
  for (PlayerId id : member_ids) {
    if (id == current.subject_id || !ai_players.contains(id)) {
      throw Error(ErrorCode::UnknownPlayer, "player " + std::to_string(id) + " is not an AI in this session");
    }
  }
  TeamConfig next = current;
  next.subject_team = member_ids;
  return next;
}

TeamLedger settle(const std::map<PlayerId, Millipoints>& earnings, const TeamConfig& cfg, TeamLedger ledger, int tick) {
  for (const auto& [player, earned] : earnings) {
    if (earned < 0) throw Error(ErrorCode::ParamMismatch, "negative earnings for player " + std::to_string(player));
    ledger.gross[player] += earned;
    ledger.balances[player] += earned;
  }
  for (const auto& [player, earned] : earnings) {
    const std::vector<PlayerId> partners = cfg.partners_of(player);
    if (partners.empty() || earned == 0) continue;
    const Millipoints deducted = earned * TeamConfig::kShareNumerator / TeamConfig::kShareDenominator;
    if (deducted == 0) continue;
    const auto n = static_cast<Millipoints>(partners.size());
    const Millipoints each = deducted / n;
    Millipoints remainder = deducted % n;
    ledger.balances[player] -= deducted;
    for (PlayerId to : partners) {
      const Millipoints amount = each + (remainder > 0 ? 1 : 0);
      if (remainder > 0) --remainder;
      if (amount == 0) continue;
      ledger.balances[to] += amount;
      ledger.transfers.push_back({tick, player, to, amount});
    }
  }
  return ledger;
}

}  // namespace traitgrid
