//! Credit accounting for contraction steps, in integer half-units so no
//! floating point is involved: one credit = 2 half-units, a matched pair of
//! leaves carries 3 half-units.
//!
//! A contraction candidate earns, over the union N of its links' current
//! paths:
//! - 3 half-units per distinct matched image pair whose whole current path
//!   lies in N,
//! - 2 half-units per compound node in N (latched compounds carry none),
//! - 2 half-units per matching-exposed original leaf in N,
//! - 2 half-units when the root lies in N and is still an original node
//!   (once the root is absorbed into a compound, only the compound's own
//!   half-units count).

use std::collections::BTreeSet;

use crate::contract::{CNode, ContractedTree};
use crate::instance::LinkId;
use crate::matching::Matching;

/// Half-units carried by a single current node, given the current matched
/// image pairs.
pub fn node_credit_half(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
    c: CNode,
) -> i64 {
    match c {
        CNode::Comp(_) => {
            if t.is_latched(c) {
                0
            } else {
                2
            }
        }
        CNode::Orig(_) => {
            if c == t.root {
                return 2;
            }
            let is_leaf = t.children_of(c).is_empty();
            let exposed = !m_pairs.iter().any(|&(a, b)| a == c || b == c);
            if is_leaf && exposed {
                2
            } else {
                0
            }
        }
    }
}

/// Half-units earned by contracting exactly the region `n` (a set of current
/// nodes): node credits plus matched pairs fully inside.
pub fn region_credit_half(
    t: &ContractedTree,
    m_pairs: &BTreeSet<(CNode, CNode)>,
    region: &BTreeSet<CNode>,
) -> i64 {
    let mut total: i64 = region
        .iter()
        .map(|&c| node_credit_half(t, m_pairs, c))
        .sum();
    for &(p, q) in m_pairs {
        if region.contains(&p)
            && region.contains(&q)
            && t.current_path(p, q).iter().all(|c| region.contains(c))
        {
            total += 3;
        }
    }
    total
}

/// Half-units earned by contracting the union of the given links' current
/// paths.
pub fn integral_credit_half(t: &ContractedTree, m: &Matching, links: &[LinkId]) -> i64 {
    let m_pairs = t.m_image(m);
    let mut region: BTreeSet<CNode> = BTreeSet::new();
    for &lid in links {
        if let Some((a, b)) = t.image(lid) {
            region.extend(t.current_path(a, b));
        }
    }
    region_credit_half(t, &m_pairs, &region)
}
