//! The full solve pipeline with its 3/2 size guarantee.
//!
//! Close the link set under sub-paths, compute the leaf anatomy and a
//! maximum leaf matching, preprocess stuck structures, then alternate
//! greedy saturation with one certified subtree contraction per iteration
//! until the tree collapses to a point. Structural invariants are checked
//! in-execution (on by default up to 200 nodes); the returned pick always
//! passes an independent cover verification.

use serde_json::Value;

use crate::anatomy::compute_anatomy;
use crate::contract::ContractedTree;
use crate::deficient::pick_final_cover;
use crate::error::TapError;
use crate::greedy::saturate_greedy;
use crate::instance::{
    expand_to_input, input_pairs_of, shadow_close, validate_feasible, verify_cover, LinkId,
    NodeId, TapInstance,
};
use crate::matching::build_m;
use crate::preprocess::{preprocess_buds, preprocess_two_stems};

/// Node-count threshold below which assertions default to on.
pub const ASSERT_DEFAULT_MAX_N: usize = 200;

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Force assertions on or off; `None` enables them up to
    /// [`ASSERT_DEFAULT_MAX_N`] nodes.
    pub assert: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    /// Main-loop passes (each runs one saturation, then possibly one pick).
    pub iterations: usize,
    pub greedy_count: usize,
    pub prep_two_stem_count: usize,
    pub prep_bud_count: usize,
    pub final_picks: usize,
    pub latch_count: usize,
    pub swap_count: usize,
}

#[derive(Debug, Clone)]
pub struct CoverSolution {
    /// Picked input links, as indices into the instance's input order.
    pub input_links: Vec<usize>,
    /// Picked input links as node pairs, ascending.
    pub pairs: Vec<(NodeId, NodeId)>,
    /// Picked closed-link ids (before mapping to inputs).
    pub closed_links: Vec<LinkId>,
    /// Machine-readable event log of every step taken.
    pub trace: Vec<Value>,
    pub stats: SolveStats,
}

impl CoverSolution {
    pub fn size(&self) -> usize {
        self.input_links.len()
    }
}

/// Solves the instance (raw or closed) and returns a verified cover.
pub fn solve(inst: &TapInstance, opts: &SolveOptions) -> Result<CoverSolution, TapError> {
    let closed;
    let closed_ref = if inst.closed {
        inst
    } else {
        closed = shadow_close(inst);
        &closed
    };
    validate_feasible(closed_ref)?;
    let do_assert = opts.assert.unwrap_or(closed_ref.tree.n <= ASSERT_DEFAULT_MAX_N);

    let anatomy = compute_anatomy(closed_ref)?;
    let m = build_m(closed_ref, &anatomy);
    let stems: Vec<NodeId> = anatomy.stems.iter().map(|s| s.s).collect();
    let mut t = ContractedTree::new(closed_ref);
    let mut picked: Vec<LinkId> = Vec::new();
    let mut trace: Vec<Value> = Vec::new();
    let mut stats = SolveStats::default();

    stats.prep_two_stem_count =
        preprocess_two_stems(closed_ref, &mut t, &anatomy, &m, &mut picked, &mut trace)?;
    if do_assert {
        t.audit_stem_hits(&stems)?;
    }
    stats.prep_bud_count =
        preprocess_buds(closed_ref, &mut t, &anatomy, &m, &mut picked, &mut trace, do_assert)?;
    if do_assert {
        t.audit_stem_hits(&stems)?;
    }

    while !t.is_single_node() {
        stats.iterations += 1;
        stats.greedy_count += saturate_greedy(&mut t, &m, &mut picked, &mut trace, do_assert)?;
        if t.is_single_node() {
            break;
        }
        let (_v, cover) = pick_final_cover(&t, &m, &anatomy, &mut trace, do_assert)?;
        stats.final_picks += 1;
        picked.extend(cover.iter().copied());
        t.contract("alg2", &cover)?;
        if do_assert {
            t.audit_stem_hits(&stems)?;
        }
    }
    // Full-history audit of the stem rule, always.
    t.audit_stem_hits(&stems)?;

    stats.latch_count = trace.iter().filter(|e| e["kind"] == "latch").count();
    stats.swap_count = trace.iter().filter(|e| e["kind"] == "mnew-swap").count();

    picked.sort_unstable();
    picked.dedup();
    let input_links = expand_to_input(closed_ref, &picked);
    let pairs = input_pairs_of(closed_ref, &input_links);
    // Independent verification on the input link set.
    verify_cover(closed_ref, &pairs)?;

    Ok(CoverSolution {
        input_links,
        pairs,
        closed_links: picked,
        trace,
        stats,
    })
}
