//! The current (contracted) tree: original nodes and compound nodes formed by
//! contracting connected unions of link paths.
//!
//! Containers are tracked by an eagerly-compressed union-find (a flat
//! container array) plus an explicit member registry per compound. The tree
//! structure (parents, depths, traversal order) is rebuilt from scratch after
//! every contraction; at the scales this library targets that is cheap and
//! keeps every query simple.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{assert_inv, TapError};
use crate::instance::{LinkId, NodeId, TapInstance};
use crate::matching::Matching;

/// A node of the current tree: an untouched original node or a compound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CNode {
    Orig(NodeId),
    Comp(u32),
}

/// One contraction, as recorded in the solver history.
#[derive(Debug, Clone)]
pub struct ContractionEvent {
    pub kind: &'static str,
    /// Closed-link ids whose current paths were contracted.
    pub links: Vec<LinkId>,
    /// All original nodes swallowed by the new compound (the hit set).
    pub hit: Vec<NodeId>,
    pub compound: u32,
}

#[derive(Debug, Clone)]
pub struct ContractedTree<'a> {
    pub inst: &'a TapInstance,
    /// Container of each original node.
    container: Vec<CNode>,
    /// Member lists per compound id, each sorted ascending.
    pub members: Vec<Vec<NodeId>>,
    /// Compounds that exist only in an auxiliary latch-contracted tree; they
    /// carry no credit.
    pub latched: BTreeSet<u32>,

    // Structure, rebuilt after every contraction.
    pub nodes: Vec<CNode>,
    pub root: CNode,
    parent: BTreeMap<CNode, CNode>,
    children: BTreeMap<CNode, Vec<CNode>>,
    depth: BTreeMap<CNode, usize>,
    height: BTreeMap<CNode, usize>,
    tin: BTreeMap<CNode, usize>,
    tout: BTreeMap<CNode, usize>,

    pub history: Vec<ContractionEvent>,
}

impl<'a> ContractedTree<'a> {
    pub fn new(inst: &'a TapInstance) -> Self {
        let mut t = ContractedTree {
            inst,
            container: (0..inst.tree.n).map(CNode::Orig).collect(),
            members: Vec::new(),
            latched: BTreeSet::new(),
            nodes: Vec::new(),
            root: CNode::Orig(inst.tree.root),
            parent: BTreeMap::new(),
            children: BTreeMap::new(),
            depth: BTreeMap::new(),
            height: BTreeMap::new(),
            tin: BTreeMap::new(),
            tout: BTreeMap::new(),
            history: Vec::new(),
        };
        t.rebuild().expect("fresh tree is consistent");
        t
    }

    pub fn cnode_of(&self, v: NodeId) -> CNode {
        self.container[v]
    }

    /// Smallest original node inside `c`; used as the deterministic
    /// representative id.
    pub fn repr(&self, c: CNode) -> NodeId {
        match c {
            CNode::Orig(v) => v,
            CNode::Comp(cid) => self.members[cid as usize][0],
        }
    }

    pub fn members_of(&self, c: CNode) -> Vec<NodeId> {
        match c {
            CNode::Orig(v) => vec![v],
            CNode::Comp(cid) => self.members[cid as usize].clone(),
        }
    }

    pub fn is_compound(&self, c: CNode) -> bool {
        matches!(c, CNode::Comp(_))
    }

    pub fn is_latched(&self, c: CNode) -> bool {
        matches!(c, CNode::Comp(cid) if self.latched.contains(&cid))
    }

    pub fn is_single_node(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn parent_of(&self, c: CNode) -> Option<CNode> {
        self.parent.get(&c).copied()
    }

    pub fn children_of(&self, c: CNode) -> &[CNode] {
        self.children.get(&c).map_or(&[], |v| v.as_slice())
    }

    pub fn depth_of(&self, c: CNode) -> usize {
        self.depth[&c]
    }

    pub fn height_of(&self, c: CNode) -> usize {
        self.height[&c]
    }

    pub fn is_ancestor(&self, a: CNode, b: CNode) -> bool {
        self.tin[&a] <= self.tin[&b] && self.tout[&b] <= self.tout[&a]
    }

    pub fn lca(&self, a: CNode, b: CNode) -> CNode {
        let mut x = a;
        let mut y = b;
        while self.depth[&x] > self.depth[&y] {
            x = self.parent[&x];
        }
        while self.depth[&y] > self.depth[&x] {
            y = self.parent[&y];
        }
        while x != y {
            x = self.parent[&x];
            y = self.parent[&y];
        }
        x
    }

    /// Current image of a closed link; `None` when both ends share a
    /// container (the link vanished inside a compound).
    pub fn image(&self, lid: LinkId) -> Option<(CNode, CNode)> {
        let l = self.inst.link(lid);
        let a = self.container[l.u];
        let b = self.container[l.w];
        if a == b {
            None
        } else {
            Some((a.min(b), a.max(b)))
        }
    }

    /// All distinct non-internal image pairs, each with the smallest closed
    /// link id producing it. Ascending by that id.
    pub fn image_pair_index(&self) -> BTreeMap<(CNode, CNode), LinkId> {
        let mut idx = BTreeMap::new();
        for l in &self.inst.links {
            if let Some(p) = self.image(l.id) {
                idx.entry(p).or_insert(l.id);
            }
        }
        idx
    }

    /// Smallest closed link id whose image equals the given pair.
    pub fn link_with_image(&self, a: CNode, b: CNode) -> Option<LinkId> {
        let key = (a.min(b), a.max(b));
        let mut best = None;
        for l in &self.inst.links {
            if self.image(l.id) == Some(key) {
                best = Some(l.id);
                break; // links scanned ascending; first hit is smallest
            }
        }
        best
    }

    /// Nodes on the current-tree path between two containers, path order.
    pub fn current_path(&self, a: CNode, b: CNode) -> Vec<CNode> {
        let mut x = a;
        let mut y = b;
        let mut up = Vec::new();
        let mut down = Vec::new();
        while self.depth[&x] > self.depth[&y] {
            up.push(x);
            x = self.parent[&x];
        }
        while self.depth[&y] > self.depth[&x] {
            down.push(y);
            y = self.parent[&y];
        }
        while x != y {
            up.push(x);
            down.push(y);
            x = self.parent[&x];
            y = self.parent[&y];
        }
        up.push(x);
        down.reverse();
        up.extend(down);
        up
    }

    /// Current-tree edges on the path, each named by its child node.
    pub fn current_path_edges(&self, a: CNode, b: CNode) -> Vec<CNode> {
        self.current_path(a, b)
            .into_iter()
            .filter(|&c| {
                // lca is the unique path node that is an ancestor of both.
                !(self.is_ancestor(c, a) && self.is_ancestor(c, b))
            })
            .collect()
    }

    /// Leaves of the current tree (no children; the root never counts).
    pub fn leaves(&self) -> Vec<CNode> {
        self.nodes
            .iter()
            .copied()
            .filter(|&c| c != self.root && self.children_of(c).is_empty())
            .collect()
    }

    /// Image of the matching: distinct current pairs of matched links whose
    /// ends are not merged.
    pub fn m_image(&self, m: &Matching) -> BTreeSet<(CNode, CNode)> {
        m.links.iter().filter_map(|&lid| self.image(lid)).collect()
    }

    /// A leaf is exposed when no matched link's image touches it.
    pub fn is_m_exposed(&self, m: &Matching, leaf: CNode) -> bool {
        !self.m_image(m).iter().any(|&(a, b)| a == leaf || b == leaf)
    }

    /// Linked ancestor of `leaf` nearest the root: the up node lifted to the
    /// current tree. Errors when the leaf has no incident image link.
    pub fn up_current(&self, leaf: CNode) -> Result<CNode, TapError> {
        let mut best: Option<CNode> = None;
        for l in &self.inst.links {
            if let Some((a, b)) = self.image(l.id) {
                let other = if a == leaf {
                    b
                } else if b == leaf {
                    a
                } else {
                    continue;
                };
                if self.is_ancestor(other, leaf)
                    && best.map_or(true, |c| self.depth[&other] < self.depth[&c])
                {
                    best = Some(other);
                }
            }
        }
        best.ok_or_else(|| {
            TapError::Assertion(format!(
                "leaf {:?} has no incident image link (infeasible state)",
                leaf
            ))
        })
    }

    /// Nodes of the current subtree below `v`, in traversal order.
    pub fn subtree(&self, v: CNode) -> Vec<CNode> {
        let mut out = vec![v];
        let mut head = 0;
        while head < out.len() {
            let u = out[head];
            head += 1;
            out.extend(self.children_of(u).iter().copied());
        }
        out
    }

    /// All current nodes ordered for the bottom-up minimality scan: by
    /// ascending subtree height, ties by maximum depth, then by smallest
    /// representative id.
    pub fn rooted_subtrees(&self) -> Vec<CNode> {
        let mut vs = self.nodes.clone();
        vs.sort_by_key(|&v| (self.height[&v], std::cmp::Reverse(self.depth[&v]), self.repr(v)));
        vs
    }

    /// Contracts the union of the current paths of `links` into one new
    /// compound. The paths must jointly span a connected region: every
    /// current edge inside the contracted region has to lie on one of the
    /// paths, since a contracted edge counts as covered by the picked links.
    /// Returns the new compound's node.
    pub fn contract(&mut self, kind: &'static str, links: &[LinkId]) -> Result<CNode, TapError> {
        let mut union: BTreeSet<CNode> = BTreeSet::new();
        let mut path_edges: BTreeSet<CNode> = BTreeSet::new();
        for &lid in links {
            if let Some((a, b)) = self.image(lid) {
                union.extend(self.current_path(a, b));
                path_edges.extend(self.current_path_edges(a, b));
            }
        }
        assert_inv(!union.is_empty(), || {
            format!("contraction of {links:?} has an empty path union")
        })?;
        // The union induces a subtree with |union|-1 edges; the path edges
        // span it exactly when their count matches. Fewer means the union is
        // disconnected or stitched together by an edge no path covers.
        assert_inv(path_edges.len() == union.len() - 1, || {
            format!(
                "contraction of {links:?} does not span its region: {} path edges over {} nodes",
                path_edges.len(),
                union.len()
            )
        })?;

        let mut hit: Vec<NodeId> = union.iter().flat_map(|&c| self.members_of(c)).collect();
        hit.sort_unstable();
        let cid = self.members.len() as u32;
        for &v in &hit {
            self.container[v] = CNode::Comp(cid);
        }
        self.members.push(hit.clone());
        self.history.push(ContractionEvent {
            kind,
            links: links.to_vec(),
            hit,
            compound: cid,
        });
        self.rebuild()?;
        self.check_compound_leaves()?;
        Ok(CNode::Comp(cid))
    }

    /// Contracts for the auxiliary latch tree; the new compound is marked as
    /// latched (no credit, never a valid pick).
    pub fn contract_latched(&mut self, links: &[LinkId]) -> Result<CNode, TapError> {
        let c = self.contract("latch", links)?;
        if let CNode::Comp(cid) = c {
            self.latched.insert(cid);
        }
        Ok(c)
    }

    fn rebuild(&mut self) -> Result<(), TapError> {
        let tree = &self.inst.tree;
        let nodes: BTreeSet<CNode> = (0..tree.n).map(|v| self.container[v]).collect();
        let root = self.container[tree.root];

        // Quotient edges from the original parent relation.
        let mut parent: BTreeMap<CNode, CNode> = BTreeMap::new();
        let mut edge_count = 0usize;
        for v in 0..tree.n {
            let Some(p) = tree.parent[v] else { continue };
            let a = self.container[v];
            let b = self.container[p];
            if a == b {
                continue;
            }
            match parent.get(&a) {
                None => {
                    parent.insert(a, b);
                    edge_count += 1;
                }
                Some(&prev) => {
                    assert_inv(prev == b, || {
                        format!("node {a:?} acquired two parents after contraction")
                    })?;
                }
            }
        }
        assert_inv(edge_count + 1 == nodes.len(), || {
            format!(
                "quotient is not a tree: {} nodes, {} edges",
                nodes.len(),
                edge_count
            )
        })?;
        assert_inv(!parent.contains_key(&root), || "root acquired a parent".into())?;

        let mut children: BTreeMap<CNode, Vec<CNode>> = BTreeMap::new();
        for &c in &nodes {
            children.insert(c, Vec::new());
        }
        for (&c, &p) in &parent {
            children.get_mut(&p).unwrap().push(c);
        }
        for ch in children.values_mut() {
            ch.sort_by_key(|&c| self.repr(c));
        }

        // Depth/height and Euler intervals by DFS from the root.
        let mut depth = BTreeMap::new();
        let mut height = BTreeMap::new();
        let mut tin = BTreeMap::new();
        let mut tout = BTreeMap::new();
        let mut timer = 0usize;
        let mut stack: Vec<(CNode, usize, bool)> = vec![(root, 0, false)];
        let mut visited = 0usize;
        while let Some((c, d, post)) = stack.pop() {
            if post {
                let h = children[&c]
                    .iter()
                    .map(|ch| height[ch] + 1)
                    .max()
                    .unwrap_or(0);
                height.insert(c, h);
                tout.insert(c, timer);
                timer += 1;
                continue;
            }
            visited += 1;
            depth.insert(c, d);
            tin.insert(c, timer);
            timer += 1;
            stack.push((c, d, true));
            for &ch in children[&c].iter().rev() {
                stack.push((ch, d + 1, false));
            }
        }
        assert_inv(visited == nodes.len(), || {
            "quotient tree is disconnected".into()
        })?;

        self.nodes = {
            let mut v: Vec<CNode> = nodes.iter().copied().collect();
            v.sort_by_key(|&c| self.repr(c));
            v
        };
        self.root = root;
        self.parent = parent;
        self.children = children;
        self.depth = depth;
        self.height = height;
        self.tin = tin;
        self.tout = tout;
        Ok(())
    }

    /// A compound that is a leaf of the current tree must contain the whole
    /// original subtree of every original node inside it.
    fn check_compound_leaves(&self) -> Result<(), TapError> {
        let tree = &self.inst.tree;
        for &c in &self.nodes {
            let CNode::Comp(cid) = c else { continue };
            if c == self.root || !self.children_of(c).is_empty() {
                continue;
            }
            let members: HashSet<NodeId> =
                self.members[cid as usize].iter().copied().collect();
            for &u in &self.members[cid as usize] {
                for &ch in &tree.children[u] {
                    assert_inv(members.contains(&ch), || {
                        format!(
                            "compound leaf {cid} contains {u} but not its child {ch}"
                        )
                    })?;
                }
            }
        }
        Ok(())
    }

    /// Links whose current path is not strictly contained in another link's
    /// current path: one canonical (smallest) link id per image pair,
    /// ascending. Candidates for the greedy search.
    pub fn maximal_image_links(&self) -> Vec<LinkId> {
        let index = self.image_pair_index();
        let pairs: HashSet<(CNode, CNode)> = index.keys().copied().collect();
        let mut out: Vec<LinkId> = Vec::new();
        'pairs: for (&(a, b), &lid) in &index {
            let on_path: HashSet<CNode> = self.current_path(a, b).into_iter().collect();
            for (end, other) in [(a, b), (b, a)] {
                let mut nbrs: Vec<CNode> = self.children_of(end).to_vec();
                if let Some(p) = self.parent.get(&end) {
                    nbrs.push(*p);
                }
                for z in nbrs {
                    if !on_path.contains(&z) && pairs.contains(&(z.min(other), z.max(other))) {
                        continue 'pairs;
                    }
                }
            }
            out.push(lid);
        }
        out.sort_unstable();
        out
    }

    /// Audits the whole contraction history against the stem rule: the first
    /// contraction that hits any node of a stem's subtree must hit the stem
    /// itself.
    pub fn audit_stem_hits(&self, stems: &[NodeId]) -> Result<(), TapError> {
        let tree = &self.inst.tree;
        for &s in stems {
            let sub: HashSet<NodeId> = tree.subtree(s).into_iter().collect();
            for ev in &self.history {
                if ev.hit.iter().any(|v| sub.contains(v)) {
                    assert_inv(ev.hit.contains(&s), || {
                        format!(
                            "contraction #{} ({}) hit subtree of stem {s} without hitting the stem",
                            ev.compound, ev.kind
                        )
                    })?;
                    break;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{parse_instance, shadow_close, TapInstance};

    fn star_stem() -> TapInstance {
        shadow_close(
            &parse_instance("tap 1\nnodes 4\nroot 0\nedge 0 1\nedge 1 2\nedge 1 3\nlink 2 3\nlink 2 0\n")
                .unwrap(),
        )
    }

    #[test]
    fn fresh_tree_mirrors_instance() {
        let inst = star_stem();
        let t = ContractedTree::new(&inst);
        assert_eq!(t.nodes.len(), 4);
        assert_eq!(t.root, CNode::Orig(0));
        assert_eq!(t.leaves(), vec![CNode::Orig(2), CNode::Orig(3)]);
        assert_eq!(
            t.current_path(CNode::Orig(2), CNode::Orig(3)),
            vec![CNode::Orig(2), CNode::Orig(1), CNode::Orig(3)]
        );
        assert_eq!(
            t.current_path_edges(CNode::Orig(2), CNode::Orig(0)),
            vec![CNode::Orig(2), CNode::Orig(1)]
        );
    }

    #[test]
    fn contract_twin_then_root_link() {
        let inst = star_stem();
        let mut t = ContractedTree::new(&inst);
        let uw = inst.link_by_pair(2, 3).unwrap();
        let c = t.contract("greedy", &[uw]).unwrap();
        assert_eq!(t.nodes.len(), 2);
        assert_eq!(t.members_of(c), vec![1, 2, 3]);
        assert_eq!(t.repr(c), 1);
        // The twin link is now internal; the root links share one image.
        assert_eq!(t.image(uw), None);
        let ur = inst.link_by_pair(0, 2).unwrap();
        let sr = inst.link_by_pair(0, 1).unwrap();
        assert_eq!(t.image(ur), t.image(sr));
        assert_eq!(t.link_with_image(CNode::Orig(0), c), Some(ur.min(sr)));
        // up of the compound leaf is the root.
        assert_eq!(t.up_current(c).unwrap(), CNode::Orig(0));
        let ur2 = t.contract("greedy", &[ur]).unwrap();
        assert!(t.is_single_node());
        assert_eq!(t.members_of(ur2), vec![0, 1, 2, 3]);
        assert_eq!(t.history.len(), 2);
        assert_eq!(t.history[0].hit, vec![1, 2, 3]);
        assert_eq!(t.history[1].hit, vec![0, 1, 2, 3]);
    }

    #[test]
    fn disconnected_union_is_rejected() {
        // Two separate branches: contracting two far-apart pendant links must fail.
        let inst = shadow_close(
            &parse_instance(
                "tap 1\nnodes 5\nroot 0\nedge 0 1\nedge 1 2\nedge 0 3\nedge 3 4\nlink 1 2\nlink 3 4\nlink 2 4\n",
            )
            .unwrap(),
        );
        let mut t = ContractedTree::new(&inst);
        let a = inst.link_by_pair(1, 2).unwrap();
        let b = inst.link_by_pair(3, 4).unwrap();
        match t.contract("greedy", &[a, b]) {
            Err(TapError::Assertion(msg)) => assert!(msg.contains("does not span")),
            other => panic!("expected disconnected union error, got {other:?}"),
        }
    }

    #[test]
    fn maximal_image_links_shrink_after_contraction() {
        let inst = star_stem();
        let mut t = ContractedTree::new(&inst);
        let uw = inst.link_by_pair(2, 3).unwrap();
        let ur = inst.link_by_pair(0, 2).unwrap();
        assert_eq!(t.maximal_image_links(), vec![uw, ur]);
        t.contract("greedy", &[uw]).unwrap();
        // Only one image pair remains, represented by its smallest link id.
        let max = t.maximal_image_links();
        assert_eq!(max.len(), 1);
        assert_eq!(max[0], ur.min(inst.link_by_pair(0, 1).unwrap()));
    }

    #[test]
    fn ancestor_and_subtree_order() {
        let inst = star_stem();
        let t = ContractedTree::new(&inst);
        assert!(t.is_ancestor(CNode::Orig(0), CNode::Orig(3)));
        assert!(t.is_ancestor(CNode::Orig(1), CNode::Orig(1)));
        assert!(!t.is_ancestor(CNode::Orig(2), CNode::Orig(1)));
        // Bottom-up order: leaves first (deepest first among ties), root last.
        let order = t.rooted_subtrees();
        assert_eq!(order.last(), Some(&CNode::Orig(0)));
        assert_eq!(order[0], CNode::Orig(2));
    }

    #[test]
    fn stem_hit_audit() {
        let inst = star_stem();
        let mut t = ContractedTree::new(&inst);
        let uw = inst.link_by_pair(2, 3).unwrap();
        t.contract("greedy", &[uw]).unwrap();
        // First hit of stem 1's subtree includes the stem itself: fine.
        t.audit_stem_hits(&[1]).unwrap();

        // Stem with a chain below it: node 1 has children 5 and 3, leaves 2
        // (below 5) and 3. Contracting the shadow (2,5) hits the stem's
        // subtree while missing the stem, which the audit must reject.
        let inst2 = shadow_close(
            &parse_instance(
                "tap 1\nnodes 6\nroot 0\nedge 0 1\nedge 1 5\nedge 5 2\nedge 1 3\nedge 0 4\nlink 2 3\nlink 3 4\n",
            )
            .unwrap(),
        );
        let mut bad = ContractedTree::new(&inst2);
        let inner = inst2.link_by_pair(2, 5).unwrap();
        bad.contract("greedy", &[inner]).unwrap();
        assert!(matches!(bad.audit_stem_hits(&[1]), Err(TapError::Assertion(_))));
        // Hitting the stem first makes later inner hits legal.
        let mut good = ContractedTree::new(&inst2);
        let twin = inst2.link_by_pair(2, 3).unwrap();
        good.contract("greedy", &[twin]).unwrap();
        good.contract("greedy", &[inst2.link_by_pair(3, 4).unwrap()])
            .unwrap();
        good.audit_stem_hits(&[1]).unwrap();
    }
}
