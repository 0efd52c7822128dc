//! Semiclosed subtrees of the current tree and the canonical cover built
//! from a matching.
//!
//! A rooted subtree of the current tree is semiclosed with respect to the
//! matching's image when (i) every matched pair has zero or two ends inside
//! it and (ii) every link incident to an exposed leaf inside it has both
//! ends inside it. The canonical cover of such a subtree takes the matched
//! pairs inside plus, for each exposed leaf, the link to its highest linked
//! ancestor; on a minimally semiclosed subtree this covers exactly the
//! subtree's edges.

use std::collections::BTreeSet;

use crate::contract::{CNode, ContractedTree};
use crate::error::{assert_inv, TapError};

/// Checks conditions (i) and (ii) for the subtree rooted at `v`.
pub fn is_semiclosed(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
    v: CNode,
) -> bool {
    let inside = |c: CNode| t.is_ancestor(v, c);
    for &(p, q) in m_pairs {
        if inside(p) != inside(q) {
            return false;
        }
    }
    // Exposed leaves inside must keep all their links inside.
    for leaf in t.leaves() {
        if !inside(leaf) {
            continue;
        }
        let exposed = !m_pairs.iter().any(|&(p, q)| p == leaf || q == leaf);
        if !exposed {
            continue;
        }
        for (&(a, b), _) in &t.image_pair_index() {
            let other = if a == leaf {
                b
            } else if b == leaf {
                a
            } else {
                continue;
            };
            if !inside(other) {
                return false;
            }
        }
    }
    true
}

/// First semiclosed subtree in the bottom-up scan order (ascending height,
/// ties deepest first, then smallest representative). Heights strictly
/// decrease downward along semiclosed subtrees, so the first hit is minimal;
/// the whole tree is always semiclosed, so a hit exists.
pub fn minimally_semiclosed(t: &ContractedTree, m_pairs: &BTreeSet<(CNode, CNode)>) -> CNode {
    for v in t.rooted_subtrees() {
        if is_semiclosed(t, m_pairs, v) {
            return v;
        }
    }
    unreachable!("the root subtree is always semiclosed");
}

/// The canonical cover of a semiclosed subtree: matched pairs inside plus
/// one up-link per exposed leaf inside. Errors when an exposed leaf's
/// up node falls outside the subtree (i.e. `v` was not semiclosed).
pub fn gamma(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
    v: CNode,
) -> Result<BTreeSet<(CNode, CNode)>, TapError> {
    let inside = |c: CNode| t.is_ancestor(v, c);
    let mut cover: BTreeSet<(CNode, CNode)> = BTreeSet::new();
    for &(p, q) in m_pairs {
        if inside(p) && inside(q) {
            cover.insert((p, q));
        }
    }
    for leaf in t.leaves() {
        if !inside(leaf) {
            continue;
        }
        if m_pairs.iter().any(|&(p, q)| p == leaf || q == leaf) {
            continue;
        }
        let up = t.up_current(leaf)?;
        assert_inv(inside(up), || {
            format!(
                "up node {:?} of exposed leaf {:?} escapes the semiclosed subtree {:?}",
                up, leaf, v
            )
        })?;
        cover.insert((up.min(leaf), up.max(leaf)));
    }
    Ok(cover)
}

/// A fitting cover of the subtree rooted at `v`: every pair's current path
/// stays inside the subtree and the path edges cover the subtree's edges
/// exactly.
pub fn is_fitting_cover(
    t: &ContractedTree,
    v: CNode,
    pairs: &BTreeSet<(CNode, CNode)>,
) -> bool {
    let subtree: BTreeSet<CNode> = t.subtree(v).into_iter().collect();
    let mut covered: BTreeSet<CNode> = BTreeSet::new();
    for &(p, q) in pairs {
        if !subtree.contains(&p) || !subtree.contains(&q) {
            return false;
        }
        let path = t.current_path(p, q);
        if path.iter().any(|c| !subtree.contains(c)) {
            return false;
        }
        covered.extend(t.current_path_edges(p, q));
    }
    let mut wanted = subtree;
    wanted.remove(&v);
    covered == wanted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anatomy::compute_anatomy;
    use crate::instance::{parse_instance, shadow_close, TapInstance};
    use crate::matching::build_m;

    fn two_stems() -> TapInstance {
        shadow_close(
            &parse_instance(
                "tap 1\nnodes 7\nroot 0\nedge 0 1\nedge 0 2\nedge 1 3\nedge 1 4\nedge 2 5\nedge 2 6\nlink 3 4\nlink 5 6\nlink 4 5\nlink 4 6\nlink 4 0\n",
            )
            .unwrap(),
        )
    }

    #[test]
    fn star_stem_minimal_is_root() {
        let inst = shadow_close(
            &parse_instance(
                "tap 1\nnodes 4\nroot 0\nedge 0 1\nedge 1 2\nedge 1 3\nlink 2 3\nlink 2 0\n",
            )
            .unwrap(),
        );
        let anatomy = compute_anatomy(&inst).unwrap();
        let m = build_m(&inst, &anatomy);
        let t = ContractedTree::new(&inst);
        let pairs = t.m_image(&m);
        // Leaf 2 keeps a link to the root, so no proper subtree is semiclosed.
        assert!(!is_semiclosed(&t, &pairs, CNode::Orig(1)));
        assert!(!is_semiclosed(&t, &pairs, CNode::Orig(2)));
        assert!(is_semiclosed(&t, &pairs, CNode::Orig(0)));
        assert_eq!(minimally_semiclosed(&t, &pairs), CNode::Orig(0));
        let g = gamma(&t, &pairs, CNode::Orig(0)).unwrap();
        let expect: BTreeSet<_> = [
            (CNode::Orig(0), CNode::Orig(2)),
            (CNode::Orig(1), CNode::Orig(3)),
        ]
        .into_iter()
        .collect();
        assert_eq!(g, expect);
        assert!(is_fitting_cover(&t, CNode::Orig(0), &g));
    }

    #[test]
    fn matched_pair_straddling_blocks_semiclosedness() {
        let inst = two_stems();
        let anatomy = compute_anatomy(&inst).unwrap();
        let m = build_m(&inst, &anatomy);
        let t = ContractedTree::new(&inst);
        let pairs = t.m_image(&m);
        // The pair (4,5) has one end under node 1 and one under node 2.
        assert!(!is_semiclosed(&t, &pairs, CNode::Orig(1)));
        assert!(!is_semiclosed(&t, &pairs, CNode::Orig(2)));
        assert_eq!(minimally_semiclosed(&t, &pairs), CNode::Orig(0));
        let g = gamma(&t, &pairs, CNode::Orig(0)).unwrap();
        let expect: BTreeSet<_> = [
            (CNode::Orig(4), CNode::Orig(5)),
            (CNode::Orig(1), CNode::Orig(3)),
            (CNode::Orig(0), CNode::Orig(6)),
        ]
        .into_iter()
        .collect();
        assert_eq!(g, expect);
        assert!(is_fitting_cover(&t, CNode::Orig(0), &g));
    }

    #[test]
    fn fitting_cover_rejects_escape_and_gaps() {
        let inst = two_stems();
        let t = ContractedTree::new(&inst);
        // Gap: covering only one branch.
        let partial: BTreeSet<_> = [(CNode::Orig(1), CNode::Orig(3))].into_iter().collect();
        assert!(!is_fitting_cover(&t, CNode::Orig(0), &partial));
        // Escape: a pair reaching outside the subtree.
        let escape: BTreeSet<_> = [
            (CNode::Orig(3), CNode::Orig(4)),
            (CNode::Orig(0), CNode::Orig(4)),
        ]
        .into_iter()
        .collect();
        assert!(!is_fitting_cover(&t, CNode::Orig(1), &escape));
        // Exact: twin covers the stem subtree edges except the stem's own
        // parent edge; subtree at 1 has edges {3,4}.
        let twin: BTreeSet<_> = [(CNode::Orig(3), CNode::Orig(4))].into_iter().collect();
        assert!(is_fitting_cover(&t, CNode::Orig(1), &twin));
    }

    #[test]
    fn single_leaf_subtree_is_never_semiclosed() {
        let inst = two_stems();
        let anatomy = compute_anatomy(&inst).unwrap();
        let m = build_m(&inst, &anatomy);
        let t = ContractedTree::new(&inst);
        let pairs = t.m_image(&m);
        for leaf in t.leaves() {
            assert!(!is_semiclosed(&t, &pairs, leaf));
        }
    }
}
