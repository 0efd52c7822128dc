//! Preprocessing on the fresh tree, before the main loop.
//!
//! Step 1 finds "stuck" two-stem subtrees — semiclosed subtrees with exactly
//! two stems and four leaves whose structure provably starves the greedy
//! search — and contracts each with a fitting cover of at most three links.
//!
//! Step 2 contracts, for every bud whose three leaves are all unmatched, the
//! bud's up-link together with the buddy link; the three exposed leaves pay
//! for the two links.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use crate::anatomy::Anatomy;
use crate::contract::{CNode, ContractedTree};
use crate::credits::integral_credit_half;
use crate::error::{assert_inv, TapError};
use crate::instance::{LinkId, NodeId, TapInstance};
use crate::matching::Matching;
use crate::semiclosed::is_semiclosed;

/// A stuck two-stem subtree found by step 1.
#[derive(Debug, Clone)]
pub struct TwoStemBlock {
    pub v: NodeId,
    pub stems: (NodeId, NodeId),
    /// Fitting cover of the subtree, at most three links, paths inside.
    pub cover: Vec<LinkId>,
}

/// Footprint of a link within a subtree: the subtree edges (named by child)
/// its path covers.
fn footprint(
    inst: &TapInstance,
    sub: &BTreeSet<NodeId>,
    v: NodeId,
    lid: LinkId,
) -> BTreeSet<NodeId> {
    let l = inst.link(lid);
    inst.tree
        .path_edges(l.u, l.w)
        .into_iter()
        .filter(|child| *child != v && sub.contains(child))
        .collect()
}

/// Smallest cover of the subtree's edges using at most `k` of the candidate
/// footprints, branching on the lowest uncovered edge.
fn cover_exists(
    edges: &BTreeSet<NodeId>,
    cands: &[(BTreeSet<NodeId>, LinkId)],
    k: usize,
    chosen: &mut Vec<LinkId>,
) -> bool {
    let Some(&lowest) = edges.iter().next() else {
        return true;
    };
    if k == 0 {
        return false;
    }
    for (fp, lid) in cands {
        if !fp.contains(&lowest) {
            continue;
        }
        let rest: BTreeSet<NodeId> = edges.difference(fp).copied().collect();
        chosen.push(*lid);
        if cover_exists(&rest, cands, k - 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Clips a link to the subtree: the extreme nodes of its path inside form a
/// closed link by shadow closure.
fn clip_to_subtree(
    inst: &TapInstance,
    sub: &BTreeSet<NodeId>,
    lid: LinkId,
) -> Result<LinkId, TapError> {
    let l = inst.link(lid);
    let inside: Vec<NodeId> = inst
        .tree
        .path(l.u, l.w)
        .into_iter()
        .filter(|x| sub.contains(x))
        .collect();
    assert_inv(inside.len() >= 2, || {
        format!("link {lid} clips to fewer than two subtree nodes")
    })?;
    let (a, b) = (inside[0], *inside.last().unwrap());
    inst.link_by_pair(a, b).ok_or_else(|| {
        TapError::Assertion(format!(
            "clipped pair ({a},{b}) of link {lid} is missing from the closure"
        ))
    })
}

/// Checks every condition of the stuck two-stem structure at `v` and, when
/// they all hold, returns the block with its fitting cover.
pub fn detect_two_stem_block(
    inst: &TapInstance,
    t: &ContractedTree,
    anatomy: &Anatomy,
    m: &Matching,
    v: NodeId,
) -> Option<TwoStemBlock> {
    let tree = &inst.tree;
    let sub: BTreeSet<NodeId> = tree.subtree(v).into_iter().collect();
    let leaves_in: Vec<NodeId> = anatomy
        .leaves
        .iter()
        .copied()
        .filter(|l| sub.contains(l))
        .collect();
    if leaves_in.len() != 4 {
        return None;
    }
    let stems_in: Vec<NodeId> = anatomy
        .stems
        .iter()
        .map(|s| s.s)
        .filter(|s| sub.contains(s))
        .collect();
    if stems_in.len() != 2 {
        return None;
    }
    let (s1, s2) = (stems_in[0], stems_in[1]);
    let stem_leaves: BTreeSet<NodeId> = anatomy
        .stems
        .iter()
        .filter(|s| s.s == s1 || s.s == s2)
        .flat_map(|s| [s.leaves.0, s.leaves.1])
        .collect();
    if stem_leaves != leaves_in.iter().copied().collect() {
        return None;
    }
    let m_pairs = t.m_image(m);
    if !is_semiclosed(t, &m_pairs, CNode::Orig(v)) {
        return None;
    }

    let l1: BTreeSet<NodeId> = anatomy
        .stems
        .iter()
        .find(|s| s.s == s1)
        .map(|s| [s.leaves.0, s.leaves.1].into_iter().collect())
        .unwrap();
    let l2: BTreeSet<NodeId> = anatomy
        .stems
        .iter()
        .find(|s| s.s == s2)
        .map(|s| [s.leaves.0, s.leaves.1].into_iter().collect())
        .unwrap();
    // Cross links join a leaf of one stem to a leaf of the other.
    let cross: Vec<LinkId> = inst
        .links
        .iter()
        .filter(|l| {
            (l1.contains(&l.u) && l2.contains(&l.w)) || (l2.contains(&l.u) && l1.contains(&l.w))
        })
        .map(|l| l.id)
        .collect();
    // (i) Exactly one matched link inside the subtree, and it is a cross link.
    let m_inside: Vec<LinkId> = m
        .links
        .iter()
        .copied()
        .filter(|&lid| {
            let l = inst.link(lid);
            sub.contains(&l.u) && sub.contains(&l.w)
        })
        .collect();
    if m_inside.len() != 1 || !cross.contains(&m_inside[0]) {
        return None;
    }
    // (ii) Exactly two of the four leaves are exposed.
    let exposed: Vec<NodeId> = leaves_in
        .iter()
        .copied()
        .filter(|&l| m.is_exposed(l))
        .collect();
    if exposed.len() != 2 {
        return None;
    }
    // (iii) Some leaf touches every cross link.
    let hub = leaves_in.iter().copied().any(|z| {
        cross.iter().all(|&lid| {
            let l = inst.link(lid);
            l.u == z || l.w == z
        })
    });
    if !hub {
        return None;
    }

    // Candidate links: any link covering at least one subtree edge, deduped
    // by footprint (smallest id per footprint).
    let sub_edges: BTreeSet<NodeId> = sub.iter().copied().filter(|&x| x != v).collect();
    let mut by_fp: BTreeMap<BTreeSet<NodeId>, LinkId> = BTreeMap::new();
    for l in &inst.links {
        let fp = footprint(inst, &sub, v, l.id);
        if !fp.is_empty() {
            by_fp.entry(fp).or_insert(l.id);
        }
    }
    let cands: Vec<(BTreeSet<NodeId>, LinkId)> =
        by_fp.into_iter().map(|(fp, lid)| (fp, lid)).collect();

    // (iv) Some cover of the subtree's edges by at most three links exists.
    let mut chosen: Vec<LinkId> = Vec::new();
    if !cover_exists(&sub_edges, &cands, 3, &mut chosen) {
        return None;
    }

    // (v) ... but no cover of the escape form: one link from inside to an
    // outside leaf plus at most two links with both ends inside.
    let outside_leaves: BTreeSet<NodeId> = anatomy
        .leaves
        .iter()
        .copied()
        .filter(|l| !sub.contains(l))
        .collect();
    let mut escape_cands: Vec<(BTreeSet<NodeId>, LinkId)> = Vec::new();
    let mut internal_cands: Vec<(BTreeSet<NodeId>, LinkId)> = Vec::new();
    let mut seen_escape: BTreeSet<BTreeSet<NodeId>> = BTreeSet::new();
    let mut seen_internal: BTreeSet<BTreeSet<NodeId>> = BTreeSet::new();
    for l in &inst.links {
        let fp = footprint(inst, &sub, v, l.id);
        if fp.is_empty() {
            continue;
        }
        let ins = (sub.contains(&l.u), sub.contains(&l.w));
        match ins {
            (true, true) => {
                if seen_internal.insert(fp.clone()) {
                    internal_cands.push((fp, l.id));
                }
            }
            (true, false) if outside_leaves.contains(&l.w) => {
                if seen_escape.insert(fp.clone()) {
                    escape_cands.push((fp, l.id));
                }
            }
            (false, true) if outside_leaves.contains(&l.u) => {
                if seen_escape.insert(fp.clone()) {
                    escape_cands.push((fp, l.id));
                }
            }
            _ => {}
        }
    }
    for (efp, _) in &escape_cands {
        let rest: BTreeSet<NodeId> = sub_edges.difference(efp).copied().collect();
        let mut c = Vec::new();
        if cover_exists(&rest, &internal_cands, 2, &mut c) {
            return None;
        }
    }

    // Fitting cover: clip the found cover's links into the subtree.
    let mut cover: Vec<LinkId> = Vec::new();
    for lid in chosen {
        let clipped = clip_to_subtree(inst, &sub, lid).ok()?;
        if !cover.contains(&clipped) {
            cover.push(clipped);
        }
    }
    cover.sort_unstable();
    Some(TwoStemBlock {
        v,
        stems: (s1.min(s2), s1.max(s2)),
        cover,
    })
}

/// All maximal stuck two-stem blocks of the fresh tree, ascending by root.
pub fn find_two_stem_blocks(
    inst: &TapInstance,
    t: &ContractedTree,
    anatomy: &Anatomy,
    m: &Matching,
) -> Vec<TwoStemBlock> {
    let mut all: Vec<TwoStemBlock> = (0..inst.tree.n)
        .filter_map(|v| detect_two_stem_block(inst, t, anatomy, m, v))
        .collect();
    let roots: Vec<NodeId> = all.iter().map(|b| b.v).collect();
    all.retain(|b| {
        !roots
            .iter()
            .any(|&other| other != b.v && inst.tree.is_ancestor(other, b.v))
    });
    all.sort_by_key(|b| b.v);
    all
}

/// Step 1: contract every maximal stuck two-stem block with its fitting
/// cover. Returns how many blocks were contracted.
pub fn preprocess_two_stems(
    inst: &TapInstance,
    t: &mut ContractedTree,
    anatomy: &Anatomy,
    m: &Matching,
    picked: &mut Vec<LinkId>,
    trace: &mut Vec<serde_json::Value>,
) -> Result<usize, TapError> {
    let blocks = find_two_stem_blocks(inst, t, anatomy, m);
    for b in &blocks {
        t.contract("prep1", &b.cover)?;
        let ev = t.history.last().unwrap();
        // The fitting cover contracts the whole subtree.
        assert_inv(
            ev.hit == inst.tree.subtree(b.v),
            || format!("two-stem block at {} did not contract exactly its subtree", b.v),
        )?;
        trace.push(json!({
            "kind": "prep1",
            "v": b.v,
            "stems": [b.stems.0, b.stems.1],
            "links": b.cover,
            "hit": ev.hit,
            "compound": ev.compound,
        }));
        picked.extend(b.cover.iter().copied());
    }
    Ok(blocks.len())
}

/// Step 2: for each bud whose triple of leaves is entirely unmatched,
/// contract the up-link of the bud together with its buddy link. Triples
/// already swallowed by an earlier contraction are skipped; when a bud and
/// its co-leaf name the same triple, the labeling whose up node is higher
/// wins (ties to the smaller leaf id).
pub fn preprocess_buds(
    inst: &TapInstance,
    t: &mut ContractedTree,
    anatomy: &Anatomy,
    m: &Matching,
    picked: &mut Vec<LinkId>,
    trace: &mut Vec<serde_json::Value>,
    do_assert: bool,
) -> Result<usize, TapError> {
    // Normalize: one labeling per leaf-triple set.
    let mut by_set: BTreeMap<[NodeId; 3], Vec<usize>> = BTreeMap::new();
    for (i, bud) in anatomy.buds.iter().enumerate() {
        let mut key = [bud.b0, bud.b1, bud.b2];
        key.sort_unstable();
        by_set.entry(key).or_default().push(i);
    }
    let mut chosen: Vec<usize> = Vec::new();
    for (_, labelings) in by_set {
        let pick = labelings
            .iter()
            .copied()
            .min_by_key(|&i| {
                let b = &anatomy.buds[i];
                let up = anatomy.up[&b.b0];
                // Higher up node first (smaller depth), then smaller leaf id.
                (inst.tree.depth[up], b.b0)
            })
            .unwrap();
        chosen.push(pick);
    }
    chosen.sort_by_key(|&i| anatomy.buds[i].b0);

    let mut count = 0usize;
    for i in chosen {
        let bud = &anatomy.buds[i];
        if !(m.is_exposed(bud.b0) && m.is_exposed(bud.b1) && m.is_exposed(bud.b2)) {
            continue;
        }
        // Skip triples already absorbed by earlier contractions.
        let still_leaf = |x: NodeId| t.cnode_of(x) == CNode::Orig(x);
        if !(still_leaf(bud.b0) && still_leaf(bud.b1) && still_leaf(bud.b2)) {
            continue;
        }
        let up = anatomy.up[&bud.b0];
        let up_link = inst.link_by_pair(bud.b0, up).ok_or_else(|| {
            TapError::Assertion(format!("up link ({},{}) missing from closure", bud.b0, up))
        })?;
        let links = [up_link.min(bud.buddy), up_link.max(bud.buddy)];
        let credit_half = integral_credit_half(t, m, &links);
        if do_assert {
            // Three exposed leaves pay for two links: 6 half-units >= 2*(2+1).
            assert_inv(credit_half >= 6, || {
                format!(
                    "bud triple ({},{},{}) credit {credit_half} half-units below cost",
                    bud.b0, bud.b1, bud.b2
                )
            })?;
        }
        t.contract("prep2", &links)?;
        let ev = t.history.last().unwrap();
        trace.push(json!({
            "kind": "prep2",
            "triple": [bud.b0, bud.b1, bud.b2],
            "links": links,
            "credit_half": credit_half,
            "hit": ev.hit,
            "compound": ev.compound,
        }));
        picked.extend(links);
        count += 1;
    }
    Ok(count)
}
