//! Prize ledger (accounting only).
//!
//! Schedule: the user at leaderboard rank r has weight 1/r. The pool is split
//! in proportion to weight; any user whose share exceeds the per-user cap is
//! paid the cap and the remainder is split again among the rest, until no
//! share exceeds the cap. Amounts are floored to whole cents, so the ledger
//! never pays out more than the pool.

use serde::{Deserialize, Serialize};

use super::LeaderboardEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrizeConfig {
    pub per_user_cap_cents: u64,
}

impl Default for PrizeConfig {
    fn default() -> Self {
        PrizeConfig {
            per_user_cap_cents: 2_500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub rank: usize,
    pub user_id: String,
    pub amount_cents: u64,
}

pub fn settle(leaderboard: &[LeaderboardEntry], pool_cents: u64, config: &PrizeConfig) -> Vec<LedgerEntry> {
    let cap = config.per_user_cap_cents;
    let n = leaderboard.len();
    let mut amounts: Vec<Option<u64>> = vec![None; n];
    let mut remaining = pool_cents;
    loop {
        let open: Vec<usize> = (0..n).filter(|&i| amounts[i].is_none()).collect();
        if open.is_empty() {
            break;
        }
        let total_weight: f64 = open.iter().map(|&i| 1.0 / (i + 1) as f64).sum();
        let share = |i: usize| remaining as f64 * (1.0 / (i + 1) as f64) / total_weight;
        // weights fall with rank, so capped users always form a prefix of `open`
        let capped: Vec<usize> = open.iter().copied().filter(|&i| share(i) >= cap as f64).collect();
        if capped.is_empty() {
            for &i in &open {
                amounts[i] = Some(share(i).floor() as u64);
            }
            break;
        }
        for i in capped {
            let paid = cap.min(remaining);
            amounts[i] = Some(paid);
            remaining -= paid;
        }
    }
    leaderboard
        .iter()
        .zip(amounts)
        .map(|(e, amount)| LedgerEntry {
            rank: e.rank,
            user_id: e.user_id.clone(),
            amount_cents: amount.unwrap_or(0),
        })
        .collect()
}
