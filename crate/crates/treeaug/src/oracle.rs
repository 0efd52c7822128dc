//! Ground-truth companions to the solver: an exact optimum for small
//! instances, a simple 2-approximation baseline, a combinatorial lower
//! bound, and the LP relaxation (export and rational feasibility check).

use std::collections::HashMap;

use num_rational::Rational64;
use num_traits::{One, Zero};

use crate::anatomy::{is_overlapping_pair, maximal_links};
use crate::contract::ContractedTree;
use crate::error::{assert_inv, TapError};
use crate::instance::{
    expand_to_input, input_pairs_of, shadow_close, validate_feasible, verify_cover, LinkId,
    NodeId, TapInstance,
};

/// Edge-count cap for the exact search (mask width).
pub const EXACT_EDGE_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactMode {
    /// Branch over maximal closed links only (sound: every link is covered
    /// by a maximal one whose path contains it).
    Maximal,
    /// Branch over every closed link; cross-check mode for tiny instances.
    AllLinks,
}

#[derive(Debug, Clone)]
pub struct PickedCover {
    pub input_links: Vec<usize>,
    pub pairs: Vec<(NodeId, NodeId)>,
}

impl PickedCover {
    pub fn size(&self) -> usize {
        self.input_links.len()
    }
}

/// Fewest leaves any cover needs: each link covers at most two leaf edges.
pub fn leaf_lower_bound(inst: &TapInstance) -> usize {
    (inst.tree.leaves().len() + 1) / 2
}

/// Exact optimum by branching on the lowest uncovered edge over an edge
/// bitmask, with memoization. Instances beyond [`EXACT_EDGE_LIMIT`] edges
/// get a bracket error instead, as does an optimum above `max_size`.
pub fn exact_opt(
    inst: &TapInstance,
    mode: ExactMode,
    max_size: Option<usize>,
) -> Result<PickedCover, TapError> {
    let closed_store;
    let closed = if inst.closed {
        inst
    } else {
        closed_store = shadow_close(inst);
        &closed_store
    };
    validate_feasible(closed)?;
    let tree = &closed.tree;
    let edge_count = tree.n - 1;
    if edge_count > EXACT_EDGE_LIMIT {
        return Err(TapError::ExactBudget {
            lower: leaf_lower_bound(closed),
            upper: two_approx(closed)?.size(),
        });
    }
    // Edge bits, ascending child id (the root has no edge).
    let mut bit = vec![usize::MAX; tree.n];
    let mut next = 0usize;
    for v in 0..tree.n {
        if v != tree.root {
            bit[v] = next;
            next += 1;
        }
    }
    let cands: Vec<LinkId> = match mode {
        ExactMode::Maximal => maximal_links(closed),
        ExactMode::AllLinks => (0..closed.links.len()).collect(),
    };
    let masks: Vec<u32> = cands
        .iter()
        .map(|&lid| {
            let l = closed.link(lid);
            tree.path_edges(l.u, l.w)
                .into_iter()
                .fold(0u32, |acc, c| acc | 1 << bit[c])
        })
        .collect();
    let by_edge: Vec<Vec<usize>> = (0..edge_count)
        .map(|e| {
            (0..cands.len())
                .filter(|&i| masks[i] & (1 << e) != 0)
                .collect()
        })
        .collect();

    const UNREACHABLE: u32 = u32::MAX / 2;
    fn best(
        mask: u32,
        masks: &[u32],
        by_edge: &[Vec<usize>],
        memo: &mut HashMap<u32, u32>,
    ) -> u32 {
        if mask == 0 {
            return 0;
        }
        if let Some(&v) = memo.get(&mask) {
            return v;
        }
        let e = mask.trailing_zeros() as usize;
        let mut out = UNREACHABLE;
        for &i in &by_edge[e] {
            let sub = best(mask & !masks[i], masks, by_edge, memo);
            out = out.min(sub.saturating_add(1));
        }
        memo.insert(mask, out);
        out
    }

    let full: u32 = if edge_count == 32 {
        u32::MAX
    } else {
        (1u32 << edge_count) - 1
    };
    let mut memo = HashMap::new();
    let opt = best(full, &masks, &by_edge, &mut memo);
    assert_inv(opt < UNREACHABLE, || {
        "feasible instance has no exact cover".into()
    })?;
    if let Some(cap) = max_size {
        if (opt as usize) > cap {
            return Err(TapError::ExactBudget {
                lower: opt as usize,
                upper: two_approx(closed)?.size(),
            });
        }
    }

    // Reconstruct deterministically: smallest candidate id first.
    let mut picked: Vec<LinkId> = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let e = mask.trailing_zeros() as usize;
        let here = best(mask, &masks, &by_edge, &mut memo);
        let mut advanced = false;
        for &i in &by_edge[e] {
            let rest = mask & !masks[i];
            if best(rest, &masks, &by_edge, &mut memo).saturating_add(1) == here {
                picked.push(cands[i]);
                mask = rest;
                advanced = true;
                break;
            }
        }
        assert_inv(advanced, || "exact reconstruction stalled".into())?;
    }

    let input_links = expand_to_input(closed, &picked);
    // Input links are closed links too, so deduplication in the expansion
    // can never drop below the optimum.
    assert_inv(input_links.len() == opt as usize, || {
        format!(
            "expansion changed the exact size: {} -> {}",
            opt,
            input_links.len()
        )
    })?;
    let pairs = input_pairs_of(closed, &input_links);
    verify_cover(closed, &pairs)?;
    Ok(PickedCover { input_links, pairs })
}

/// Baseline 2-approximation: repeatedly link the smallest current leaf to
/// its highest linked ancestor and contract that path.
pub fn two_approx(inst: &TapInstance) -> Result<PickedCover, TapError> {
    let closed_store;
    let closed = if inst.closed {
        inst
    } else {
        closed_store = shadow_close(inst);
        &closed_store
    };
    validate_feasible(closed)?;
    let mut t = ContractedTree::new(closed);
    let mut picked: Vec<LinkId> = Vec::new();
    while !t.is_single_node() {
        let leaf = t.leaves()[0];
        let up = t.up_current(leaf)?;
        let lid = t.link_with_image(leaf, up).ok_or_else(|| {
            TapError::Assertion(format!("no link realizes the up image of {leaf:?}"))
        })?;
        picked.push(lid);
        t.contract("two-approx", &[lid])?;
    }
    picked.sort_unstable();
    picked.dedup();
    let input_links = expand_to_input(closed, &picked);
    let pairs = input_pairs_of(closed, &input_links);
    verify_cover(closed, &pairs)?;
    Ok(PickedCover { input_links, pairs })
}

/// The LP variable name for the link joining `u` and `w`.
pub fn lp_var(u: NodeId, w: NodeId) -> String {
    format!("x_{}_{}", u.min(w), u.max(w))
}

/// The LP relaxation, one variable per closed link: cover each tree edge
/// with total weight at least 1; overlapping link pairs (paths sharing an
/// edge, one path ending on the other) sum to at most 1. Export only.
pub fn export_lp(inst: &TapInstance) -> String {
    let closed_store;
    let closed = if inst.closed {
        inst
    } else {
        closed_store = shadow_close(inst);
        &closed_store
    };
    let tree = &closed.tree;
    let mut out = String::new();
    out.push_str("\\ tree augmentation LP relaxation\n");
    out.push_str("Minimize\n obj: ");
    let terms: Vec<String> = closed
        .links
        .iter()
        .map(|l| lp_var(l.u, l.w))
        .collect();
    out.push_str(&terms.join(" + "));
    out.push_str("\nSubject To\n");
    for child in 0..tree.n {
        if child == tree.root {
            continue;
        }
        let row: Vec<String> = closed
            .links
            .iter()
            .filter(|l| crate::instance::covers(tree, l.u, l.w, child))
            .map(|l| lp_var(l.u, l.w))
            .collect();
        out.push_str(&format!(" cov_{}: {} >= 1\n", child, row.join(" + ")));
    }
    for a in 0..closed.links.len() {
        for b in a + 1..closed.links.len() {
            if is_overlapping_pair(closed, a, b) {
                let la = closed.link(a);
                let lb = closed.link(b);
                out.push_str(&format!(
                    " ovl_{a}_{b}: {} + {} <= 1\n",
                    lp_var(la.u, la.w),
                    lp_var(lb.u, lb.w)
                ));
            }
        }
    }
    out.push_str("Bounds\n");
    for l in &closed.links {
        out.push_str(&format!(" 0 <= {} <= 1\n", lp_var(l.u, l.w)));
    }
    out.push_str("End\n");
    out
}

/// Evaluates a rational point against the same rows the export writes.
/// Errors only on a length mismatch; returns whether every row holds.
pub fn check_lp_feasible(inst: &TapInstance, x: &[Rational64]) -> Result<bool, TapError> {
    let closed_store;
    let closed = if inst.closed {
        inst
    } else {
        closed_store = shadow_close(inst);
        &closed_store
    };
    if x.len() != closed.links.len() {
        return Err(TapError::Invalid(format!(
            "point has {} coordinates for {} links",
            x.len(),
            closed.links.len()
        )));
    }
    let zero = Rational64::zero();
    let one = Rational64::one();
    if x.iter().any(|v| *v < zero || *v > one) {
        return Ok(false);
    }
    let tree = &closed.tree;
    for child in 0..tree.n {
        if child == tree.root {
            continue;
        }
        let sum: Rational64 = closed
            .links
            .iter()
            .filter(|l| crate::instance::covers(tree, l.u, l.w, child))
            .map(|l| x[l.id])
            .sum();
        if sum < one {
            return Ok(false);
        }
    }
    for a in 0..closed.links.len() {
        for b in a + 1..closed.links.len() {
            if is_overlapping_pair(closed, a, b) && x[a] + x[b] > one {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
