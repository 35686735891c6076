//! The two-domain mix proposal and its forward/backward probability ratio.
//!
//! A move picks a nonempty domain d1 uniformly, then a second domain d2: a
//! single-item d1 always picks another nonempty domain; a multi-item d1 picks
//! the first empty slot with probability p_empty, otherwise a random other
//! nonempty domain. Items of the union are then assigned to the two slots by
//! fair coins, resampled until the bipartition changes and both sides respect
//! the item cap.
//!
//! Up to ordering, the probability of selecting the pair {d1, d2} is
//!   both nonempty:  [2 - p_empty (I(|J1|>1) + I(|J2|>1))] / (m (m - 1))
//!   d2 empty:        p_empty / m
//! with m the number of nonempty domains, and since every valid item split is
//! equally likely the proposal ratio p_f / p_b depends only on these pair
//! probabilities.

use rand::Rng;

use crate::error::{Error, Result};

/// One proposed change to a class group's partition.
#[derive(Clone, Debug)]
pub struct ProposalOutcome {
    /// Touched slots.
    pub d1: u32,
    pub d2: u32,
    /// Items proposed for slot d1 (may be empty on a merge into d2).
    pub items_d1: Vec<usize>,
    /// Items proposed for slot d2.
    pub items_d2: Vec<usize>,
    /// ln(p_f / p_b); the acceptance ratio uses its negation.
    pub log_forward_over_backward: f64,
}

/// Inputs describing the current partition, independent of sampler state.
pub struct ProposalContext<'a> {
    /// Sorted nonempty slot ids.
    pub active: &'a [u32],
    /// Items of each active slot, aligned with `active`.
    pub items: &'a [Vec<usize>],
    /// Total slot count D.
    pub slots: u32,
    pub p_empty: f64,
    pub max_items: u32,
}

const MIX_ATTEMPTS: usize = 1000;

fn first_empty_slot(active: &[u32], slots: u32) -> Option<u32> {
    let mut expect = 0u32;
    for &a in active {
        if a > expect {
            return Some(expect);
        }
        expect = a + 1;
    }
    if expect < slots {
        Some(expect)
    } else {
        None
    }
}

fn pair_log_weight(p_empty: f64, multi1: bool, multi2: bool) -> f64 {
    (2.0 - p_empty * (multi1 as u8 as f64) - p_empty * (multi2 as u8 as f64)).ln()
}

/// Draws a proposal from the current partition, or `NoValidProposal` when no
/// admissible mix exists.
pub fn propose_swap<R: Rng + ?Sized>(
    ctx: &ProposalContext,
    rng: &mut R,
) -> Result<ProposalOutcome> {
    let m = ctx.active.len();
    if m == 0 {
        return Err(Error::NoValidProposal);
    }
    let pick1 = rng.gen_range(0..m);
    let d1 = ctx.active[pick1];
    let items1 = &ctx.items[pick1];
    let empty = first_empty_slot(ctx.active, ctx.slots);

    // Second domain: single-item d1 always targets a nonempty domain.
    let pick_other_nonempty = |rng: &mut R| -> Option<usize> {
        if m < 2 {
            return None;
        }
        let k = rng.gen_range(0..m - 1);
        Some(if k >= pick1 { k + 1 } else { k })
    };
    let (d2, items2, d2_was_empty) = if items1.len() == 1 {
        match pick_other_nonempty(rng) {
            Some(idx) => (ctx.active[idx], ctx.items[idx].clone(), false),
            None => return Err(Error::NoValidProposal),
        }
    } else if rng.gen::<f64>() < ctx.p_empty {
        match empty {
            Some(slot) => (slot, Vec::new(), true),
            // All slots occupied: fall back to a nonempty partner.
            None => match pick_other_nonempty(rng) {
                Some(idx) => (ctx.active[idx], ctx.items[idx].clone(), false),
                None => return Err(Error::NoValidProposal),
            },
        }
    } else {
        match pick_other_nonempty(rng) {
            Some(idx) => (ctx.active[idx], ctx.items[idx].clone(), false),
            None => match empty {
                Some(slot) => (slot, Vec::new(), true),
                None => return Err(Error::NoValidProposal),
            },
        }
    };

    // Mix the union; resample until the bipartition changes and the item cap
    // holds on both sides.
    let mut union: Vec<usize> = items1.iter().chain(items2.iter()).copied().collect();
    union.sort_unstable();
    let cap = ctx.max_items as usize;
    let mut side1 = Vec::with_capacity(union.len());
    let mut side2 = Vec::with_capacity(union.len());
    let mut found = false;
    for _ in 0..MIX_ATTEMPTS {
        side1.clear();
        side2.clear();
        for &item in &union {
            if rng.gen::<bool>() {
                side1.push(item);
            } else {
                side2.push(item);
            }
        }
        if side1.len() > cap || side2.len() > cap {
            continue;
        }
        let unchanged =
            (side1 == *items1 && side2 == items2) || (side1 == items2 && side2 == *items1);
        if !unchanged {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::NoValidProposal);
    }

    let multi = |v: &[usize]| v.len() > 1;
    let log_ratio = if d2_was_empty {
        // Split: the backward move mixes two nonempty domains among m + 1.
        (ctx.p_empty * (m as f64 + 1.0)).ln()
            - pair_log_weight(ctx.p_empty, multi(&side1), multi(&side2))
    } else if side1.is_empty() || side2.is_empty() {
        // Merge: the backward move splits via the empty-slot branch.
        pair_log_weight(ctx.p_empty, multi(items1), multi(&items2)) - (ctx.p_empty * m as f64).ln()
    } else {
        pair_log_weight(ctx.p_empty, multi(items1), multi(&items2))
            - pair_log_weight(ctx.p_empty, multi(&side1), multi(&side2))
    };

    Ok(ProposalOutcome {
        d1,
        d2,
        items_d1: side1,
        items_d2: side2,
        log_forward_over_backward: log_ratio,
    })
}
