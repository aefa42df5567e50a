//! Privacy-budget accounting with sequential composition and hard blocking.
//!
//! The total privacy cost of a sequence of ε-DP releases is the sum of their
//! ε values, so the ledger simply adds spends and refuses any spend that
//! would push the total past the budget. Arithmetic is exact: budgets and
//! spends are stored as integer micro-epsilon units (1e-6 granularity), so
//! ten spends of 0.1 from a budget of 1.0 exhaust it exactly and the block
//! point is deterministic. Requested epsilons are rounded to the nearest
//! micro-unit on entry; that quantum is the accounting granularity.
//!
//! `try_spend` is atomic (checked and appended under one lock), so racing
//! threads can never oversubscribe the budget. Denied spends are kept in a
//! separate audit trail rather than in the entry list, so they are
//! observable without being double counted.

use crate::error::{Error, Result};
use crate::mechanisms::Epsilon;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::RwLock;

/// Micro-epsilon units per 1.0 of ε.
pub const MICRO_PER_EPSILON: u64 = 1_000_000;

/// Convert ε to integer micro-units, rounding to nearest. Errors when the
/// value rounds to zero (below ledger granularity) or overflows.
pub fn epsilon_to_micro(eps: Epsilon) -> Result<u64> {
    let scaled = eps.get() * MICRO_PER_EPSILON as f64;
    if scaled >= u64::MAX as f64 {
        return Err(Error::invalid(format!(
            "epsilon {} overflows the micro-unit ledger",
            eps.get()
        )));
    }
    let micro = scaled.round() as u64;
    if micro == 0 {
        return Err(Error::invalid(format!(
            "epsilon {} is below the ledger granularity of 1e-6",
            eps.get()
        )));
    }
    Ok(micro)
}

pub fn micro_to_epsilon(micro: u64) -> f64 {
    micro as f64 / MICRO_PER_EPSILON as f64
}

/// One accepted spend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub descriptor: String,
    pub epsilon_micro: u64,
    /// Logical monotonic timestamp: strictly increasing over all ledger
    /// events (accepted and denied), persisted across restarts.
    pub timestamp: u64,
}

/// One refused spend, kept out of the entry list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeniedSpend {
    pub descriptor: String,
    pub epsilon_micro: u64,
    pub timestamp: u64,
}

#[derive(Debug, Default)]
struct LedgerState {
    spent_micro: u64,
    clock: u64,
    entries: Vec<LedgerEntry>,
    denied: Vec<DeniedSpend>,
}

/// Append-only budget ledger enforcing Σ spends <= total.
#[derive(Debug)]
pub struct BudgetLedger {
    total_micro: u64,
    state: RwLock<LedgerState>,
}

impl BudgetLedger {
    /// Create an empty ledger holding `total` of budget.
    pub fn new(total: Epsilon) -> Result<Self> {
        Ok(Self {
            total_micro: epsilon_to_micro(total)?,
            state: RwLock::new(LedgerState::default()),
        })
    }

    /// Atomically spend `eps` (quantized to micro-units) under `descriptor`.
    ///
    /// On success the quantized epsilon actually charged is returned and an
    /// entry is appended. On failure the ledger's entries are unchanged, the
    /// attempt lands in the audit trail, and the caller must not release the
    /// query result. A spend succeeds iff spent + eps <= total, exactly.
    pub fn try_spend(&self, eps: Epsilon, descriptor: &str) -> Result<Epsilon> {
        if descriptor.contains('\t') || descriptor.contains('\n') {
            return Err(Error::invalid(
                "ledger descriptors must not contain tabs or newlines",
            ));
        }
        let micro = epsilon_to_micro(eps)?;
        let mut state = self.state.write().unwrap();
        state.clock += 1;
        let timestamp = state.clock;
        let new_total = state.spent_micro.saturating_add(micro);
        if new_total > self.total_micro {
            let remaining = self.total_micro - state.spent_micro;
            state.denied.push(DeniedSpend {
                descriptor: descriptor.to_string(),
                epsilon_micro: micro,
                timestamp,
            });
            return Err(Error::BudgetExhausted {
                requested: micro_to_epsilon(micro),
                remaining: micro_to_epsilon(remaining),
            });
        }
        state.spent_micro = new_total;
        state.entries.push(LedgerEntry {
            descriptor: descriptor.to_string(),
            epsilon_micro: micro,
            timestamp,
        });
        Epsilon::new(micro_to_epsilon(micro))
    }

    /// Remaining budget, floored at zero.
    pub fn remaining(&self) -> f64 {
        let state = self.state.read().unwrap();
        micro_to_epsilon(self.total_micro - state.spent_micro)
    }

    pub fn total(&self) -> f64 {
        micro_to_epsilon(self.total_micro)
    }

    pub fn spent(&self) -> f64 {
        micro_to_epsilon(self.state.read().unwrap().spent_micro)
    }

    pub fn spent_micro(&self) -> u64 {
        self.state.read().unwrap().spent_micro
    }

    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.state.read().unwrap().entries.clone()
    }

    pub fn denied(&self) -> Vec<DeniedSpend> {
        self.state.read().unwrap().denied.clone()
    }

    /// Line-oriented audit log: a header with the total, then one line per
    /// event (`entry` or `denied`) carrying descriptor, micro-epsilon, and
    /// the monotonic timestamp, tab separated.
    pub fn serialize(&self) -> String {
        let state = self.state.read().unwrap();
        let mut out = String::new();
        out.push_str("dpwb-ledger\tv1\n");
        let _ = writeln!(out, "total\t{}", self.total_micro);
        let mut events: Vec<(u64, String)> = Vec::new();
        for e in &state.entries {
            events.push((
                e.timestamp,
                format!(
                    "entry\t{}\t{}\t{}",
                    e.descriptor, e.epsilon_micro, e.timestamp
                ),
            ));
        }
        for d in &state.denied {
            events.push((
                d.timestamp,
                format!(
                    "denied\t{}\t{}\t{}",
                    d.descriptor, d.epsilon_micro, d.timestamp
                ),
            ));
        }
        events.sort_by_key(|(ts, _)| *ts);
        for (_, line) in events {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.serialize()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Parse a ledger previously produced by [`BudgetLedger::serialize`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.starts_with("dpwb-ledger\t") => {}
            _ => return Err(Error::invalid("not a dpwb ledger file")),
        }
        let total_micro = match lines.next() {
            Some((_, line)) => line
                .strip_prefix("total\t")
                .and_then(|v| v.parse::<u64>().ok())
                .ok_or_else(|| Error::invalid("ledger missing total line"))?,
            None => return Err(Error::invalid("ledger missing total line")),
        };
        let mut state = LedgerState::default();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(Error::invalid(format!(
                    "ledger line {}: expected 4 tab-separated fields",
                    idx + 1
                )));
            }
            let micro: u64 = parts[2]
                .parse()
                .map_err(|_| Error::invalid(format!("ledger line {}: bad epsilon", idx + 1)))?;
            let timestamp: u64 = parts[3]
                .parse()
                .map_err(|_| Error::invalid(format!("ledger line {}: bad timestamp", idx + 1)))?;
            match parts[0] {
                "entry" => {
                    state.spent_micro = state.spent_micro.saturating_add(micro);
                    state.entries.push(LedgerEntry {
                        descriptor: parts[1].to_string(),
                        epsilon_micro: micro,
                        timestamp,
                    });
                }
                "denied" => state.denied.push(DeniedSpend {
                    descriptor: parts[1].to_string(),
                    epsilon_micro: micro,
                    timestamp,
                }),
                other => {
                    return Err(Error::invalid(format!(
                        "ledger line {}: unknown record type '{other}'",
                        idx + 1
                    )))
                }
            }
            state.clock = state.clock.max(timestamp);
        }
        if state.spent_micro > total_micro {
            return Err(Error::invalid(
                "ledger is inconsistent: spends exceed the budget",
            ));
        }
        Ok(Self {
            total_micro,
            state: RwLock::new(state),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }
}
