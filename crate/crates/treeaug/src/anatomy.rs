//! Structural anatomy of a closed instance: leaves and their `up` nodes,
//! stems with twin links, buds with buddy links and their special node sets,
//! the node partition, link classes, and maximal links.
//!
//! Everything here is computed once on the original tree and stays fixed for
//! the whole solver run; contracted-tree queries live in `contract`.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{assert_inv, TapError};
use crate::instance::{LinkId, NodeId, TapInstance};

/// A stem: a non-root node with exactly two children and exactly two leaf
/// descendants joined by a link (the twin link).
#[derive(Debug, Clone)]
pub struct Stem {
    pub s: NodeId,
    /// The two leaves of the stem's subtree, ascending.
    pub leaves: (NodeId, NodeId),
    pub twin: LinkId,
}

/// A bud `b0`: a leaf such that some rooted subtree has exactly three leaves
/// {b0, b1, b2}, where b0 and b1 are the leaves of a stem below up(b0) and
/// the buddy link b1-b2 exists.
#[derive(Debug, Clone)]
pub struct Bud {
    pub b0: NodeId,
    pub b1: NodeId,
    pub b2: NodeId,
    pub stem: NodeId,
    pub buddy: LinkId,
    /// Deepest common ancestor of the stem and b2.
    pub q: NodeId,
    /// Nodes of P(b0, up(b0)) minus P(stem, q) minus {b0}: the ancestors of
    /// b0 that are linked to b0 but sit off the buddy-link path.
    pub r_special: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Anatomy {
    pub leaves: Vec<NodeId>,
    /// For each leaf: its linked ancestor nearest the root.
    pub up: HashMap<NodeId, NodeId>,
    pub stems: Vec<Stem>,
    pub buds: Vec<Bud>,
    /// Node partition: stems, leaves, special rest, non-special rest.
    pub stem_set: BTreeSet<NodeId>,
    pub r_special: BTreeSet<NodeId>,
    pub r_nonspcl: BTreeSet<NodeId>,
    /// Link classes: twin and buddy links, and everything else.
    pub e_twin: BTreeSet<LinkId>,
    pub e_buddy: BTreeSet<LinkId>,
    pub e_reg: Vec<LinkId>,
}

impl Anatomy {
    pub fn stem_of_leaf(&self, leaf: NodeId) -> Option<&Stem> {
        self.stems
            .iter()
            .find(|st| st.leaves.0 == leaf || st.leaves.1 == leaf)
    }

    pub fn bud_of(&self, b0: NodeId) -> Option<&Bud> {
        self.buds.iter().find(|b| b.b0 == b0)
    }
}

/// Computes the anatomy of a shadow-closed, feasible instance.
pub fn compute_anatomy(inst: &TapInstance) -> Result<Anatomy, TapError> {
    let tree = &inst.tree;
    let n = tree.n;
    let leaves = tree.leaves();
    let leaf_set: HashSet<NodeId> = leaves.iter().copied().collect();

    // Incidence lists over the closed link set.
    let mut inc: Vec<Vec<LinkId>> = vec![Vec::new(); n];
    for l in &inst.links {
        inc[l.u].push(l.id);
        inc[l.w].push(l.id);
    }

    // up(v): linked ancestor of v nearest the root.
    let mut up = HashMap::new();
    for &v in &leaves {
        let mut best: Option<NodeId> = None;
        for &lid in &inc[v] {
            let l = &inst.links[lid];
            let other = if l.u == v { l.w } else { l.u };
            if tree.is_ancestor(other, v)
                && best.map_or(true, |b| tree.depth[other] < tree.depth[b])
            {
                best = Some(other);
            }
        }
        let Some(b) = best else {
            return Err(TapError::Assertion(format!(
                "leaf {v} has no linked ancestor; instance not closed or not feasible"
            )));
        };
        up.insert(v, b);
    }

    // Leaf counts per subtree, bottom-up.
    let mut leaf_count = vec![0usize; n];
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(tree.depth[v]));
    for &v in &order {
        if leaf_set.contains(&v) {
            leaf_count[v] = 1;
        } else {
            leaf_count[v] = tree.children[v].iter().map(|&c| leaf_count[c]).sum();
        }
    }

    // Stems.
    let mut stems = Vec::new();
    for s in 0..n {
        if s == tree.root || tree.children[s].len() != 2 || leaf_count[s] != 2 {
            continue;
        }
        let subtree_leaves: Vec<NodeId> = tree
            .subtree(s)
            .into_iter()
            .filter(|v| leaf_set.contains(v))
            .collect();
        let (l1, l2) = (subtree_leaves[0], subtree_leaves[1]);
        if let Some(twin) = inst.link_by_pair(l1, l2) {
            stems.push(Stem {
                s,
                leaves: (l1, l2),
                twin,
            });
        }
    }
    let stem_set: BTreeSet<NodeId> = stems.iter().map(|st| st.s).collect();
    let mut stem_of_leaf: HashMap<NodeId, usize> = HashMap::new();
    for (i, st) in stems.iter().enumerate() {
        for leaf in [st.leaves.0, st.leaves.1] {
            assert_inv(stem_of_leaf.insert(leaf, i).is_none(), || {
                format!("leaf {leaf} belongs to two stems")
            })?;
        }
    }
    // Stems correspond one-to-one with their twin links.
    let twin_ids: BTreeSet<LinkId> = stems.iter().map(|st| st.twin).collect();
    assert_inv(twin_ids.len() == stems.len(), || {
        "twin links are not in bijection with stems".into()
    })?;

    // Buds.
    let mut buds = Vec::new();
    for &b0 in &leaves {
        let Some(&si) = stem_of_leaf.get(&b0) else { continue };
        let st = &stems[si];
        let b1 = if st.leaves.0 == b0 { st.leaves.1 } else { st.leaves.0 };
        let up0 = up[&b0];
        // up(b0) must sit at or above the stem.
        if !tree.is_ancestor(up0, st.s) {
            continue;
        }
        // Lowest ancestor of up(b0) whose subtree reaches three leaves; leaf
        // sets along the ancestor chain are nested, so the third leaf is
        // unique if it exists at all.
        let mut v = up0;
        loop {
            if leaf_count[v] >= 3 {
                break;
            }
            match tree.parent[v] {
                Some(p) => v = p,
                None => break,
            }
        }
        if leaf_count[v] != 3 {
            continue;
        }
        let lv: Vec<NodeId> = tree
            .subtree(v)
            .into_iter()
            .filter(|x| leaf_set.contains(x))
            .collect();
        let b2 = match lv.iter().find(|&&x| x != b0 && x != b1) {
            Some(&x) => x,
            None => continue,
        };
        let Some(buddy) = inst.link_by_pair(b1, b2) else { continue };
        let q = tree.lca(st.s, b2);
        let on_sq: HashSet<NodeId> = tree.path(st.s, q).into_iter().collect();
        let r_special: Vec<NodeId> = tree
            .path(b0, up0)
            .into_iter()
            .filter(|&x| x != b0 && !on_sq.contains(&x))
            .collect();

        // Cross-check against the link-based characterization: the special
        // nodes are exactly the partners of b0 off the buddy-link path, and
        // each is a single-child ancestor of b0.
        let buddy_path: HashSet<NodeId> = tree.path(b1, b2).into_iter().collect();
        let mut via_links: Vec<NodeId> = inc[b0]
            .iter()
            .map(|&lid| {
                let l = &inst.links[lid];
                if l.u == b0 {
                    l.w
                } else {
                    l.u
                }
            })
            .filter(|x| !buddy_path.contains(x))
            .collect();
        via_links.sort_unstable();
        let mut by_path = r_special.clone();
        by_path.sort_unstable();
        assert_inv(by_path == via_links, || {
            format!("special-node characterizations disagree for bud {b0}: {by_path:?} vs {via_links:?}")
        })?;
        for &x in &r_special {
            assert_inv(tree.children[x].len() == 1 && tree.is_ancestor(x, b0), || {
                format!("special node {x} of bud {b0} is not a single-child ancestor")
            })?;
        }

        buds.push(Bud {
            b0,
            b1,
            b2,
            stem: st.s,
            buddy,
            q,
            r_special,
        });
    }
    // Buds correspond one-to-one with their buddy links.
    let buddy_ids: BTreeSet<LinkId> = buds.iter().map(|b| b.buddy).collect();
    assert_inv(buddy_ids.len() == buds.len(), || {
        "buddy links are not in bijection with buds".into()
    })?;
    assert_inv(buddy_ids.is_disjoint(&twin_ids), || {
        "a link is both twin and buddy".into()
    })?;

    // Special sets are disjoint across buds of different stems.
    for i in 0..buds.len() {
        for j in i + 1..buds.len() {
            if buds[i].stem == buds[j].stem {
                continue;
            }
            let a: HashSet<NodeId> = buds[i].r_special.iter().copied().collect();
            if buds[j].r_special.iter().any(|x| a.contains(x)) {
                return Err(TapError::Assertion(format!(
                    "special node sets of buds {} and {} overlap",
                    buds[i].b0, buds[j].b0
                )));
            }
        }
    }

    let r_special: BTreeSet<NodeId> = buds.iter().flat_map(|b| b.r_special.iter().copied()).collect();
    let r_nonspcl: BTreeSet<NodeId> = (0..n)
        .filter(|v| !stem_set.contains(v) && !leaf_set.contains(v) && !r_special.contains(v))
        .collect();

    let e_twin = twin_ids;
    let e_buddy = buddy_ids;
    let e_reg: Vec<LinkId> = inst
        .links
        .iter()
        .map(|l| l.id)
        .filter(|id| !e_twin.contains(id) && !e_buddy.contains(id))
        .collect();
    // The three classes partition the link set.
    assert_inv(e_twin.len() + e_buddy.len() + e_reg.len() == inst.links.len(), || {
        "link classes do not partition the link set".into()
    })?;

    Ok(Anatomy {
        leaves,
        up,
        stems,
        buds,
        stem_set,
        r_special,
        r_nonspcl,
        e_twin,
        e_buddy,
        e_reg,
    })
}

/// Two links overlap when their paths share a tree edge and an endpoint of
/// one lies on the other's path.
pub fn is_overlapping_pair(inst: &TapInstance, a: LinkId, b: LinkId) -> bool {
    let tree = &inst.tree;
    let la = inst.link(a);
    let lb = inst.link(b);
    let ea: HashSet<NodeId> = tree.path_edges(la.u, la.w).into_iter().collect();
    if !tree.path_edges(lb.u, lb.w).iter().any(|e| ea.contains(e)) {
        return false;
    }
    let pa: HashSet<NodeId> = tree.path(la.u, la.w).into_iter().collect();
    let pb: HashSet<NodeId> = tree.path(lb.u, lb.w).into_iter().collect();
    pa.contains(&lb.u) || pa.contains(&lb.w) || pb.contains(&la.u) || pb.contains(&la.w)
}

/// Links whose path is not strictly contained in another link's path.
///
/// On a closed link set, a link is dominated iff it can be extended by one
/// tree edge past an endpoint and still be a link, so a neighbor scan
/// suffices.
pub fn maximal_links(inst: &TapInstance) -> Vec<LinkId> {
    let tree = &inst.tree;
    let neighbors = |v: NodeId| -> Vec<NodeId> {
        let mut out = tree.children[v].clone();
        if let Some(p) = tree.parent[v] {
            out.push(p);
        }
        out
    };
    let mut out = Vec::new();
    'links: for l in &inst.links {
        let on_path: HashSet<NodeId> = tree.path(l.u, l.w).into_iter().collect();
        for (end, other) in [(l.u, l.w), (l.w, l.u)] {
            for z in neighbors(end) {
                if !on_path.contains(&z) && inst.link_by_pair(z, other).is_some() {
                    continue 'links;
                }
            }
        }
        out.push(l.id);
    }
    out
}
