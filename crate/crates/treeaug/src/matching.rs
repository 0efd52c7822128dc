//! Maximum matching on general graphs (Edmonds' blossom algorithm) and the
//! solver's fixed leaf matching: a maximum matching over leaf-to-leaf regular
//! links (twin and buddy links excluded).
//!
//! The search scans vertices and adjacency lists in ascending order, so a
//! given instance always produces the same matching.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::anatomy::Anatomy;
use crate::instance::{LinkId, NodeId, TapInstance};

/// Maximum matching of the graph on vertices `0..n`; `mate[v]` is `v`'s
/// partner. O(V^3). Self-loops are ignored, parallel edges collapsed.
pub fn maximum_matching(n: usize, edges: &[(usize, usize)]) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u != v {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }

    const NONE: usize = usize::MAX;
    let mut mate = vec![NONE; n];
    let mut p = vec![NONE; n];
    let mut base: Vec<usize> = (0..n).collect();

    // Deepest common blossom base of v and to in the alternating forest.
    let lca = |mate: &[usize], base: &[usize], p: &[usize], v: usize, to: usize| -> usize {
        let mut seen = vec![false; n];
        let mut x = v;
        loop {
            x = base[x];
            seen[x] = true;
            if mate[x] == NONE {
                break;
            }
            x = p[mate[x]];
        }
        let mut y = to;
        loop {
            y = base[y];
            if seen[y] {
                return y;
            }
            y = p[mate[y]];
        }
    };

    fn mark_path(
        mate: &[usize],
        base: &[usize],
        p: &mut [usize],
        blossom: &mut [bool],
        mut v: usize,
        b: usize,
        mut child: usize,
    ) {
        while base[v] != b {
            blossom[base[v]] = true;
            blossom[base[mate[v]]] = true;
            p[v] = child;
            child = mate[v];
            v = p[mate[v]];
        }
    }

    for start in 0..n {
        if mate[start] != NONE {
            continue;
        }
        // BFS for an augmenting path from `start`.
        for i in 0..n {
            p[i] = NONE;
            base[i] = i;
        }
        let mut used = vec![false; n];
        used[start] = true;
        let mut q = VecDeque::new();
        q.push_back(start);
        let mut finish = NONE;
        'bfs: while let Some(v) = q.pop_front() {
            for &to in &adj[v] {
                if base[v] == base[to] || mate[v] == to {
                    continue;
                }
                if to == start || (mate[to] != NONE && p[mate[to]] != NONE) {
                    // Odd cycle: contract the blossom.
                    let curbase = lca(&mate, &base, &p, v, to);
                    let mut blossom = vec![false; n];
                    mark_path(&mate, &base, &mut p, &mut blossom, v, curbase, to);
                    mark_path(&mate, &base, &mut p, &mut blossom, to, curbase, v);
                    for i in 0..n {
                        if blossom[base[i]] {
                            base[i] = curbase;
                            if !used[i] {
                                used[i] = true;
                                q.push_back(i);
                            }
                        }
                    }
                } else if p[to] == NONE {
                    p[to] = v;
                    if mate[to] == NONE {
                        finish = to;
                        break 'bfs;
                    }
                    used[mate[to]] = true;
                    q.push_back(mate[to]);
                }
            }
        }
        // Flip matched/unmatched edges along the found path.
        let mut v = finish;
        while v != NONE {
            let pv = p[v];
            let ppv = mate[pv];
            mate[v] = pv;
            mate[pv] = v;
            v = ppv;
        }
    }

    mate.into_iter()
        .map(|m| if m == NONE { None } else { Some(m) })
        .collect()
}

/// The solver's fixed matching M over original leaves.
#[derive(Debug, Clone)]
pub struct Matching {
    /// Matched links, ascending link id.
    pub links: Vec<LinkId>,
    /// leaf -> partner leaf, both directions.
    pub mate: HashMap<NodeId, NodeId>,
    /// Leaves left unmatched by M, ascending.
    pub exposed: Vec<NodeId>,
}

impl Matching {
    pub fn is_exposed(&self, leaf: NodeId) -> bool {
        !self.mate.contains_key(&leaf)
    }
}

/// Maximum matching of (leaves, regular leaf-to-leaf links).
pub fn build_m(inst: &TapInstance, anatomy: &Anatomy) -> Matching {
    let leaves = &anatomy.leaves;
    let index: HashMap<NodeId, usize> = leaves.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut edges = Vec::new();
    for &lid in &anatomy.e_reg {
        let l = inst.link(lid);
        if let (Some(&a), Some(&b)) = (index.get(&l.u), index.get(&l.w)) {
            edges.push((a, b));
        }
    }
    let mate_idx = maximum_matching(leaves.len(), &edges);
    let mut links = BTreeSet::new();
    let mut mate = HashMap::new();
    let mut exposed = Vec::new();
    for (i, &v) in leaves.iter().enumerate() {
        match mate_idx[i] {
            Some(j) => {
                let partner = leaves[j];
                mate.insert(v, partner);
                let lid = inst
                    .link_by_pair(v, partner)
                    .expect("matched pair must be a link");
                links.insert(lid);
            }
            None => exposed.push(v),
        }
    }
    Matching {
        links: links.into_iter().collect(),
        mate,
        exposed,
    }
}
