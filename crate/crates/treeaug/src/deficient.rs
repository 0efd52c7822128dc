//! Deficient subtree certificates and the final-cover pick of each solver
//! iteration.
//!
//! After greedy saturation the minimally semiclosed subtree may still be
//! "deficient": its canonical cover from the matching cannot pay for itself.
//! Two certified shapes are handled:
//!
//! - four-leaf subtrees around a surviving stem, repaired by temporarily
//!   contracting a latch link in a scratch copy of the tree,
//! - three-leaf subtrees in that scratch tree, repaired by swapping one
//!   matched pair for a link to the exposed leaf.
//!
//! The pick routine runs both repairs, takes the minimally semiclosed
//! subtree of the scratch tree under the swapped matching, builds its
//! canonical cover plus the latches inside, and returns that cover mapped
//! back to the main tree — verifying it is a fitting cover there of the
//! same size as the unrepaired canonical cover would have been.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use crate::anatomy::Anatomy;
use crate::contract::{CNode, ContractedTree};
use crate::error::{assert_inv, TapError};
use crate::instance::LinkId;
use crate::matching::Matching;
use crate::semiclosed::{gamma, is_fitting_cover, is_semiclosed, minimally_semiclosed};

/// Certificate of a deficient three-leaf subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreeLeafCert {
    pub v: CNode,
    /// Exposed leaf; a link joins it to `b1`.
    pub a: CNode,
    /// Matched leaf kept in the swap.
    pub b1: CNode,
    /// Ceiling: matched leaf with a link leaving the subtree; exposed after
    /// the swap.
    pub b2: CNode,
}

/// Certificate of a deficient four-leaf subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourLeafCert {
    pub v: CNode,
    /// The surviving stem (original node).
    pub s: crate::instance::NodeId,
    /// Stem leaf outside the matched pair (exposed).
    pub a: CNode,
    /// Stem leaf inside the matched pair.
    pub b1: CNode,
    /// Other end of the matched pair.
    pub b2: CNode,
    /// Fourth leaf, exposed; the latch joins it to the stem.
    pub c: CNode,
    /// Canonical link whose image is (c, s).
    pub latch: LinkId,
}

fn canon(a: CNode, b: CNode) -> (CNode, CNode) {
    (a.min(b), a.max(b))
}

fn has_exit(
    t: &ContractedTree,
    index: &BTreeMap<(CNode, CNode), LinkId>,
    v: CNode,
    from: CNode,
) -> bool {
    index.keys().any(|&(p, q)| {
        (p == from && !t.is_ancestor(v, q)) || (q == from && !t.is_ancestor(v, p))
    })
}

/// Checks the three-leaf certificate conditions for the subtree at `v`.
pub fn detect_three_leaf(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
    index: &BTreeMap<(CNode, CNode), LinkId>,
    v: CNode,
) -> Option<ThreeLeafCert> {
    if v == t.root {
        return None;
    }
    let inside = |c: CNode| t.is_ancestor(v, c);
    let leaves: Vec<CNode> = t.leaves().into_iter().filter(|&l| inside(l)).collect();
    if leaves.len() != 3 {
        return None;
    }
    if !is_semiclosed(t, m_pairs, v) {
        return None;
    }
    let pairs_in: Vec<(CNode, CNode)> = m_pairs
        .iter()
        .copied()
        .filter(|&(p, q)| inside(p) && inside(q))
        .collect();
    if pairs_in.len() != 1 {
        return None;
    }
    let (x, y) = pairs_in[0];
    let a = leaves.iter().copied().find(|&l| l != x && l != y)?;

    // Branching structure: with three leaves either one node has three
    // children or two nested nodes have two each.
    let branch: Vec<(CNode, usize)> = t
        .subtree(v)
        .into_iter()
        .map(|c| (c, t.children_of(c).len()))
        .filter(|&(_, k)| k >= 2)
        .collect();
    let valid = |b1: CNode, b2: CNode| {
        index.contains_key(&canon(a, b1)) && has_exit(t, index, v, b2)
    };
    match branch.as_slice() {
        [(_, 3)] => {
            // Both labelings can satisfy the conditions; the ceiling is the
            // end whose highest linked ancestor sits higher (ties to the
            // smaller representative).
            let xy = valid(x, y);
            let yx = valid(y, x);
            match (xy, yx) {
                (true, false) => Some(ThreeLeafCert { v, a, b1: x, b2: y }),
                (false, true) => Some(ThreeLeafCert { v, a, b1: y, b2: x }),
                (true, true) => {
                    let up_x = t.up_current(x).ok()?;
                    let up_y = t.up_current(y).ok()?;
                    let ceiling = if up_x == up_y {
                        if t.repr(x) <= t.repr(y) {
                            x
                        } else {
                            y
                        }
                    } else if t.is_ancestor(up_x, up_y) {
                        x
                    } else {
                        y
                    };
                    let b1 = if ceiling == x { y } else { x };
                    Some(ThreeLeafCert { v, a, b1, b2: ceiling })
                }
                (false, false) => None,
            }
        }
        [(u1, 2), (u2, 2)] => {
            let (_, q) = if t.is_ancestor(*u1, *u2) {
                (*u1, *u2)
            } else if t.is_ancestor(*u2, *u1) {
                (*u2, *u1)
            } else {
                return None;
            };
            // The leaf not under the lower branch node must be matched.
            let b1 = leaves.iter().copied().find(|&l| !t.is_ancestor(q, l))?;
            let b2 = if b1 == x {
                y
            } else if b1 == y {
                x
            } else {
                return None;
            };
            if a == b1 || a == b2 {
                return None;
            }
            if valid(b1, b2) {
                Some(ThreeLeafCert { v, a, b1, b2 })
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Checks the four-leaf certificate conditions for the subtree at `v`.
pub fn detect_four_leaf(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
    index: &BTreeMap<(CNode, CNode), LinkId>,
    anatomy: &Anatomy,
    v: CNode,
) -> Option<FourLeafCert> {
    if v == t.root {
        return None;
    }
    let inside = |c: CNode| t.is_ancestor(v, c);
    let leaves: BTreeSet<CNode> = t.leaves().into_iter().filter(|&l| inside(l)).collect();
    if leaves.len() != 4 {
        return None;
    }
    if !is_semiclosed(t, m_pairs, v) {
        return None;
    }
    // Exactly one stem whose whole original subtree survives uncontracted.
    let live_stems: Vec<&crate::anatomy::Stem> = anatomy
        .stems
        .iter()
        .filter(|st| {
            // Originality first: a swallowed stem node is no longer a tree
            // node, so the ancestry probe would be unanswerable for it.
            t.inst
                .tree
                .subtree(st.s)
                .into_iter()
                .all(|x| t.cnode_of(x) == CNode::Orig(x))
                && inside(CNode::Orig(st.s))
        })
        .collect();
    let [stem] = live_stems.as_slice() else {
        return None;
    };
    let s = stem.s;
    let stem_leaves = [CNode::Orig(stem.leaves.0), CNode::Orig(stem.leaves.1)];

    let pairs_in: Vec<(CNode, CNode)> = m_pairs
        .iter()
        .copied()
        .filter(|&(p, q)| inside(p) && inside(q))
        .collect();
    let [(p1, p2)] = pairs_in.as_slice() else {
        return None;
    };
    let in_stem = |c: CNode| t.is_ancestor(CNode::Orig(s), c);
    let (b1, b2) = match (in_stem(*p1), in_stem(*p2)) {
        (true, false) => (*p1, *p2),
        (false, true) => (*p2, *p1),
        _ => return None,
    };
    let a = stem_leaves.into_iter().find(|&l| l != b1)?;
    let c = leaves
        .iter()
        .copied()
        .find(|&l| l != a && l != b1 && l != b2)?;
    if !leaves.contains(&b2) {
        return None;
    }
    // The fourth leaf is exposed (the only pair inside is (b1,b2), and
    // semiclosedness keeps straddling pairs away), and latches to the stem.
    if m_pairs.iter().any(|&(p, q)| p == c || q == c) {
        return None;
    }
    let p = t.lca(CNode::Orig(s), c);
    if !t.is_ancestor(p, b2) {
        return None;
    }
    let latch = *index.get(&canon(c, CNode::Orig(s)))?;
    if !has_exit(t, index, v, b2) {
        return None;
    }
    Some(FourLeafCert { v, s, a, b1, b2, c, latch })
}

/// Keeps only certificates whose subtree is not contained in another's;
/// the survivors are pairwise disjoint. Ascending by representative.
fn retain_maximal<C>(certs: Vec<C>, root_of: impl Fn(&C) -> CNode, t: &ContractedTree) -> Vec<C> {
    let roots: Vec<CNode> = certs.iter().map(&root_of).collect();
    let mut out: Vec<C> = certs
        .into_iter()
        .filter(|c| {
            let v = root_of(c);
            !roots.iter().any(|&o| o != v && t.is_ancestor(o, v))
        })
        .collect();
    out.sort_by_key(|c| t.repr(root_of(c)));
    out
}

pub fn maximal_three_leaf_certs(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
) -> Vec<ThreeLeafCert> {
    let index = t.image_pair_index();
    let certs: Vec<ThreeLeafCert> = t
        .nodes
        .iter()
        .filter_map(|&v| detect_three_leaf(t, m_pairs, &index, v))
        .collect();
    retain_maximal(certs, |c| c.v, t)
}

pub fn maximal_four_leaf_certs(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
    anatomy: &Anatomy,
) -> Vec<FourLeafCert> {
    let index = t.image_pair_index();
    let certs: Vec<FourLeafCert> = t
        .nodes
        .iter()
        .filter_map(|&v| detect_four_leaf(t, m_pairs, &index, anatomy, v))
        .collect();
    retain_maximal(certs, |c| c.v, t)
}

/// Picks the subtree to contract this iteration and its cover.
///
/// Returns the subtree root `v` (a node of `t`) and the cover's closed link
/// ids; the caller contracts them. Verifies along the way that the scratch
/// tree's canonical cover fits, that the returned cover fits `t`'s subtree
/// at `v`, and that its size equals the canonical cover of `v` under the
/// original matching.
pub fn pick_final_cover<'a>(
    t: &ContractedTree<'a>,
    m: &Matching,
    anatomy: &Anatomy,
    trace: &mut Vec<serde_json::Value>,
    do_assert: bool,
) -> Result<(CNode, Vec<LinkId>), TapError> {
    let m_pairs = t.m_image(m);

    // Four-leaf repairs: latch-contract in a scratch copy.
    let four = maximal_four_leaf_certs(t, &m_pairs, anatomy);
    let mut scratch = t.clone();
    let mut latch_comps: Vec<(CNode, LinkId)> = Vec::new();
    for cert in &four {
        let comp = scratch.contract_latched(&[cert.latch])?;
        let ev = scratch.history.last().unwrap();
        trace.push(json!({
            "kind": "latch",
            "v": t.repr(cert.v),
            "stem": cert.s,
            "link": cert.latch,
            "hit": ev.hit,
        }));
        latch_comps.push((comp, cert.latch));
    }

    let scratch_pairs = scratch.m_image(m);

    // Three-leaf repairs: swap the matched pair for the link to the exposed
    // leaf. Certificates are detected before any swap is applied.
    let three = maximal_three_leaf_certs(&scratch, &scratch_pairs);
    let mut new_pairs = scratch_pairs.clone();
    for cert in &three {
        let removed = canon(cert.b1, cert.b2);
        let added = canon(cert.a, cert.b1);
        assert_inv(new_pairs.remove(&removed), || {
            format!("swap pair {removed:?} vanished before its turn")
        })?;
        assert_inv(new_pairs.insert(added), || {
            format!("swap pair {added:?} already present")
        })?;
        trace.push(json!({
            "kind": "mnew-swap",
            "v": scratch.repr(cert.v),
            "removed": [scratch.repr(removed.0), scratch.repr(removed.1)],
            "added": [scratch.repr(added.0), scratch.repr(added.1)],
        }));
    }
    if do_assert {
        // The swapped matching is still a matching, and each ceiling came
        // out exposed.
        let mut ends: BTreeSet<CNode> = BTreeSet::new();
        for &(p, q) in &new_pairs {
            assert_inv(ends.insert(p) && ends.insert(q), || {
                format!("swapped matching reuses an endpoint at ({p:?},{q:?})")
            })?;
        }
        for cert in &three {
            assert_inv(!ends.contains(&cert.b2), || {
                format!("ceiling {:?} still matched after its swap", cert.b2)
            })?;
        }
    }

    // The minimally semiclosed subtree of the scratch tree under the
    // swapped matching is the pick; it is never a latch compound.
    let v = minimally_semiclosed(&scratch, &new_pairs);
    assert_inv(!scratch.is_latched(v), || {
        format!("pick {v:?} is a latch compound")
    })?;
    let g = gamma(&scratch, &new_pairs, v)?;
    if do_assert {
        assert_inv(is_fitting_cover(&scratch, v, &g), || {
            format!("canonical cover of {v:?} does not fit its subtree in the scratch tree")
        })?;
    }
    let index = scratch.image_pair_index();
    let mut cover: Vec<LinkId> = Vec::new();
    for &(p, q) in &g {
        let lid = *index.get(&(p, q)).ok_or_else(|| {
            TapError::Assertion(format!("cover pair ({p:?},{q:?}) has no link image"))
        })?;
        cover.push(lid);
    }
    // Latches whose compound lies in the picked subtree join the cover.
    let mut latch_ids: Vec<LinkId> = Vec::new();
    for &(comp, lid) in &latch_comps {
        if scratch.is_ancestor(v, comp) {
            assert_inv(!cover.contains(&lid), || {
                format!("latch link {lid} collided with a canonical cover link")
            })?;
            latch_ids.push(lid);
        }
    }
    cover.extend(latch_ids.iter().copied());
    cover.sort_unstable();
    cover.dedup();

    // Back on the main tree: the pick is a real node there, its subtree is
    // semiclosed under the original matching, and the cover fits it with
    // exactly the size the unrepaired canonical cover would have had.
    assert_inv(t.nodes.contains(&v), || {
        format!("pick {v:?} is not a node of the main tree")
    })?;
    if do_assert {
        assert_inv(is_semiclosed(t, &m_pairs, v), || {
            format!("picked subtree {v:?} is not semiclosed under the original matching")
        })?;
        let unrepaired = gamma(t, &m_pairs, v)?;
        assert_inv(unrepaired.len() == cover.len(), || {
            format!(
                "cover size {} differs from canonical size {} at {v:?}",
                cover.len(),
                unrepaired.len()
            )
        })?;
        let mut images: BTreeSet<(CNode, CNode)> = BTreeSet::new();
        for &lid in &cover {
            let (p, q) = t.image(lid).ok_or_else(|| {
                TapError::Assertion(format!("cover link {lid} has no image on the main tree"))
            })?;
            images.insert((p, q));
        }
        assert_inv(is_fitting_cover(t, v, &images), || {
            format!("cover does not fit the picked subtree {v:?} on the main tree")
        })?;
    }
    trace.push(json!({
        "kind": "alg2-pick",
        "v": t.repr(v),
        "links": cover,
        "latches": latch_ids,
    }));
    Ok((v, cover))
}
