#pragma once

#include <map>
#include <set>
#include <vector>

#include "traitgrid/level.hpp"

namespace traitgrid {

// Team membership is reciprocal between the subject and each chosen AI only.
struct TeamConfig {
  PlayerId subject_id = kSubjectId;
  std::set<PlayerId> subject_team;

  // Fixed share of each tick's earnings paid out to partners.
  static constexpr Millipoints kShareNumerator = 1;
  static constexpr Millipoints kShareDenominator = 4;

  // Team size including the subject.
  int tau() const { return 1 + static_cast<int>(subject_team.size()); }
  std::vector<PlayerId> partners_of(PlayerId player) const;

  friend bool operator==(const TeamConfig&, const TeamConfig&) = default;
};

struct Transfer {
  int tick = 0;
  PlayerId from = 0;
  PlayerId to = 0;
  Millipoints amount = 0;

  friend bool operator==(const Transfer&, const Transfer&) = default;
};

struct TeamLedger {
  std::map<PlayerId, Millipoints> balances;
  std::map<PlayerId, Millipoints> gross;
  std::vector<Transfer> transfers;

  Millipoints balance(PlayerId p) const;
  Millipoints total_balance() const;
  Millipoints total_gross() const;
};

// Replaces the subject's team. `ai_players` is every AI in the session.
// Throws UnknownPlayer, SelectionLocked (when a level is in progress).
TeamConfig select_team(const TeamConfig& current, const std::set<PlayerId>& member_ids,
                       const std::set<PlayerId>& ai_players, bool level_in_progress);

// Books one tick of gross earnings and the resulting partner transfers.
// Deduction is floor(earned / 4), split equally, remainder one millipoint at a
// time to partners in ascending id order.
TeamLedger settle(const std::map<PlayerId, Millipoints>& earnings, const TeamConfig& cfg, TeamLedger ledger,
                  int tick = 0);

}  // namespace traitgrid
