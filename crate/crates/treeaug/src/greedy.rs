//! Greedy contraction steps: find a small set of links whose current paths
//! form a connected region earning at least one credit more than the set's
//! size, and keep contracting such sets until none remains.
//!
//! Candidates are restricted to maximal image links (one canonical link per
//! pair): replacing a link by one whose path contains it preserves region
//! connectivity and never lowers the credit, so a payable set exists among
//! maximal links whenever one exists at all.

use std::collections::BTreeSet;

use serde_json::json;

use crate::contract::{CNode, ContractedTree};
use crate::credits::{node_credit_half, region_credit_half};
use crate::error::{assert_inv, TapError};
use crate::instance::LinkId;
use crate::matching::Matching;

/// Largest set size the search considers.
pub const MAX_PICK: usize = 5;

#[derive(Debug, Clone)]
pub struct GreedyPick {
    /// Chosen closed link ids, ascending.
    pub links: Vec<LinkId>,
    /// Exact credit of the contracted region, in half-units.
    pub credit_half: i64,
}

struct Search<'t, 'a> {
    t: &'t ContractedTree<'a>,
    ids: Vec<LinkId>,
    pathsets: Vec<BTreeSet<CNode>>,
    m_pairs: BTreeSet<(CNode, CNode)>,
    pair_paths: Vec<BTreeSet<CNode>>,
    /// Descending prefix sums of the per-candidate credit upper bounds.
    ub_prefix: Vec<i64>,
}

impl<'t, 'a> Search<'t, 'a> {
    fn new(t: &'t ContractedTree<'a>, m: &Matching) -> Option<Self> {
        let ids = t.maximal_image_links();
        if ids.is_empty() {
            return None;
        }
        let pathsets: Vec<BTreeSet<CNode>> = ids
            .iter()
            .map(|&lid| {
                let (a, b) = t.image(lid).expect("maximal links have images");
                t.current_path(a, b).into_iter().collect()
            })
            .collect();
        let m_pairs = t.m_image(m);
        let pair_paths: Vec<BTreeSet<CNode>> = m_pairs
            .iter()
            .map(|&(p, q)| t.current_path(p, q).into_iter().collect())
            .collect();
        let ub: Vec<i64> = pathsets
            .iter()
            .map(|ps| {
                let nodes: i64 = ps.iter().map(|&c| node_credit_half(t, &m_pairs, c)).sum();
                let pairs = pair_paths
                    .iter()
                    .filter(|pp| pp.intersection(ps).next().is_some())
                    .count() as i64;
                nodes + 3 * pairs
            })
            .collect();
        let mut sorted = ub;
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut ub_prefix = vec![0i64];
        for v in sorted {
            ub_prefix.push(ub_prefix.last().unwrap() + v);
        }
        Some(Search {
            t,
            ids,
            pathsets,
            m_pairs,
            pair_paths,
            ub_prefix,
        })
    }

    /// Upper bound on the credit any superset of the current region can
    /// reach: node credits present plus every matched pair that touches the
    /// region (counted as if it will end up fully inside).
    fn region_credit_ub(&self, region: &BTreeSet<CNode>) -> i64 {
        let nodes: i64 = region
            .iter()
            .map(|&c| node_credit_half(self.t, &self.m_pairs, c))
            .sum();
        let pairs = self
            .pair_paths
            .iter()
            .filter(|pp| pp.intersection(region).next().is_some())
            .count() as i64;
        nodes + 3 * pairs
    }

    /// Can some extension of the current set by 1..=room candidates become
    /// payable? Adding t links costs 2(|S|+t+1) half-units; the extra links
    /// contribute at most the top-t candidate upper bounds.
    fn viable(&self, set_len: usize, region: &BTreeSet<CNode>, room: usize) -> bool {
        let base = self.region_credit_ub(region);
        (1..=room).any(|extra| {
            let top = self.ub_prefix[extra.min(self.ub_prefix.len() - 1)];
            base + top >= 2 * (set_len + extra + 1) as i64
        })
    }

    fn dfs(
        &self,
        k: usize,
        seed: usize,
        set: &mut Vec<usize>,
        region: &BTreeSet<CNode>,
        banned: &[bool],
        hits: &mut Vec<(Vec<LinkId>, i64)>,
    ) {
        if set.len() == k {
            let credit = region_credit_half(self.t, &self.m_pairs, region);
            if credit >= 2 * (k as i64 + 1) {
                let mut ids: Vec<LinkId> = set.iter().map(|&i| self.ids[i]).collect();
                ids.sort_unstable();
                hits.push((ids, credit));
            }
            return;
        }
        if !self.viable(set.len(), region, k - set.len()) {
            return;
        }
        let ext: Vec<usize> = (seed + 1..self.ids.len())
            .filter(|&i| {
                !banned[i]
                    && !set.contains(&i)
                    && self.pathsets[i].intersection(region).next().is_some()
            })
            .collect();
        let mut banned = banned.to_vec();
        for &e in &ext {
            let mut bigger = region.clone();
            bigger.extend(self.pathsets[e].iter().copied());
            set.push(e);
            self.dfs(k, seed, set, &bigger, &banned, hits);
            set.pop();
            // Later branches may not reuse this extension: each connected
            // set is enumerated exactly once.
            banned[e] = true;
        }
    }
}

/// Smallest payable set of maximal image links, ties broken by ascending
/// link-id sequence; `None` when no set of size at most [`MAX_PICK`] pays.
pub fn find_greedy_contraction(t: &ContractedTree, m: &Matching) -> Option<GreedyPick> {
    let search = Search::new(t, m)?;
    for k in 1..=MAX_PICK {
        let mut hits: Vec<(Vec<LinkId>, i64)> = Vec::new();
        let banned = vec![false; search.ids.len()];
        for seed in 0..search.ids.len() {
            let mut set = vec![seed];
            search.dfs(k, seed, &mut set, &search.pathsets[seed], &banned, &mut hits);
        }
        if let Some((links, credit_half)) = hits.into_iter().min() {
            return Some(GreedyPick { links, credit_half });
        }
    }
    None
}

/// Contracts payable sets until none is left. Returns how many contractions
/// ran; verifies the two saturation invariants afterwards when asserting:
/// surviving matched image links run through original nodes only, and no
/// image link joins two exposed leaves.
pub fn saturate_greedy(
    t: &mut ContractedTree,
    m: &Matching,
    picked: &mut Vec<LinkId>,
    trace: &mut Vec<serde_json::Value>,
    do_assert: bool,
) -> Result<usize, TapError> {
    let mut count = 0usize;
    while let Some(pick) = find_greedy_contraction(t, m) {
        t.contract("greedy", &pick.links)?;
        let ev = t.history.last().unwrap();
        trace.push(json!({
            "kind": "greedy",
            "links": pick.links,
            "credit_half": pick.credit_half,
            "cost_half": 2 * (pick.links.len() as i64 + 1),
            "hit": ev.hit,
            "compound": ev.compound,
        }));
        picked.extend(pick.links.iter().copied());
        count += 1;
    }
    if do_assert {
        check_saturated(t, m)?;
    }
    Ok(count)
}

/// The two invariants that hold once no payable set remains.
pub fn check_saturated(t: &ContractedTree, m: &Matching) -> Result<(), TapError> {
    // (1) Surviving matched image links have fully original current paths:
    // a compound on the path would make the single link payable.
    for &lid in &m.links {
        if let Some((a, b)) = t.image(lid) {
            for c in t.current_path(a, b) {
                assert_inv(matches!(c, CNode::Orig(_)), || {
                    format!(
                        "saturation invariant: matched link {lid} runs through compound {c:?}"
                    )
                })?;
            }
        }
    }
    // (2) No image link joins two exposed leaves: such a link pays for
    // itself.
    let m_pairs = t.m_image(m);
    let leaves: BTreeSet<CNode> = t.leaves().into_iter().collect();
    let exposed: BTreeSet<CNode> = leaves
        .iter()
        .copied()
        .filter(|&l| !m_pairs.iter().any(|&(p, q)| p == l || q == l))
        .collect();
    for (&(a, b), &lid) in &t.image_pair_index() {
        assert_inv(!(exposed.contains(&a) && exposed.contains(&b)), || {
            format!(
                "saturation invariant: link {lid} joins exposed leaves {a:?} and {b:?}"
            )
        })?;
    }
    Ok(())
}
