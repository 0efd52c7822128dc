//! Problem instances: a rooted spanning tree plus candidate links.
//!
//! A link set `F` covers the tree when every tree edge lies on the tree path
//! of at least one link of `F`. All solver stages work on the shadow-closed
//! link set (every sub-path of a link's path is itself a link); solutions are
//! mapped back to input links before they are reported.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TapError;

pub type NodeId = usize;
pub type LinkId = usize;

/// Rooted tree on nodes `0..n`, stored via parent pointers.
#[derive(Debug, Clone)]
pub struct RootedTree {
    pub n: usize,
    pub root: NodeId,
    pub parent: Vec<Option<NodeId>>,
    pub children: Vec<Vec<NodeId>>,
    pub depth: Vec<usize>,
}

impl RootedTree {
    /// Builds the tree from an undirected edge list, orienting it away from
    /// `root`. Rejects self-loops, duplicate edges, out-of-range ids, wrong
    /// edge counts and disconnected input.
    pub fn from_edges(n: usize, root: NodeId, edges: &[(NodeId, NodeId)]) -> Result<Self, TapError> {
        if n < 2 {
            return Err(TapError::Invalid(format!("need at least 2 nodes, got {n}")));
        }
        if root >= n {
            return Err(TapError::Invalid(format!("root {root} out of range (n={n})")));
        }
        if edges.len() != n - 1 {
            return Err(TapError::Invalid(format!(
                "expected {} tree edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        let mut seen = HashMap::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(TapError::Invalid(format!("edge ({u}, {v}) out of range (n={n})")));
            }
            if u == v {
                return Err(TapError::Invalid(format!("self-loop tree edge ({u}, {v})")));
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key, ()).is_some() {
                return Err(TapError::Invalid(format!("duplicate tree edge ({u}, {v})")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut parent = vec![None; n];
        let mut depth = vec![0usize; n];
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        visited[root] = true;
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &v in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = Some(u);
                    depth[v] = depth[u] + 1;
                    order.push(v);
                }
            }
        }
        if order.len() != n {
            return Err(TapError::Invalid("tree edges do not connect all nodes".into()));
        }
        let mut children = vec![Vec::new(); n];
        for v in 0..n {
            if let Some(p) = parent[v] {
                children[p].push(v);
            }
        }
        for ch in &mut children {
            ch.sort_unstable();
        }
        Ok(RootedTree {
            n,
            root,
            parent,
            children,
            depth,
        })
    }

    /// Undirected tree edges as (parent, child) pairs, ordered by child id.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n).filter_map(|v| self.parent[v].map(|p| (p, v)))
    }

    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        // Walks up from b; fine at the scales this library targets.
        let mut x = b;
        loop {
            if x == a {
                return true;
            }
            match self.parent[x] {
                Some(p) => x = p,
                None => return false,
            }
        }
    }

    pub fn lca(&self, u: NodeId, w: NodeId) -> NodeId {
        let (mut a, mut b) = (u, w);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    /// Nodes on the tree path from `u` to `w`, inclusive, in path order.
    pub fn path(&self, u: NodeId, w: NodeId) -> Vec<NodeId> {
        let l = self.lca(u, w);
        let mut up = Vec::new();
        let mut x = u;
        while x != l {
            up.push(x);
            x = self.parent[x].unwrap();
        }
        up.push(l);
        let mut down = Vec::new();
        let mut y = w;
        while y != l {
            down.push(y);
            y = self.parent[y].unwrap();
        }
        down.reverse();
        up.extend(down);
        up
    }

    /// Tree edges on the path from `u` to `w`, each named by its child node.
    pub fn path_edges(&self, u: NodeId, w: NodeId) -> Vec<NodeId> {
        let l = self.lca(u, w);
        let mut out = Vec::new();
        let mut x = u;
        while x != l {
            out.push(x);
            x = self.parent[x].unwrap();
        }
        let mut y = w;
        while y != l {
            out.push(y);
            y = self.parent[y].unwrap();
        }
        out
    }

    /// Leaves: nodes with no child. The root is never a leaf.
    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.n)
            .filter(|&v| v != self.root && self.children[v].is_empty())
            .collect()
    }

    /// Nodes of the subtree rooted at `v`, ascending.
    pub fn subtree(&self, v: NodeId) -> Vec<NodeId> {
        let mut out = vec![v];
        let mut head = 0;
        while head < out.len() {
            let u = out[head];
            head += 1;
            out.extend(self.children[u].iter().copied());
        }
        out.sort_unstable();
        out
    }
}

/// Where a closed link came from: the k-th input link verbatim, or a shadow
/// (sub-path) of the k-th input link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkOrigin {
    Input(usize),
    ShadowOf(usize),
}

impl LinkOrigin {
    pub fn input_index(self) -> usize {
        match self {
            LinkOrigin::Input(k) | LinkOrigin::ShadowOf(k) => k,
        }
    }
}

/// One candidate link. Endpoints are stored with `u < w`; there is exactly one
/// `Link` per node pair.
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub id: LinkId,
    pub u: NodeId,
    pub w: NodeId,
    pub origin: LinkOrigin,
}

impl Link {
    pub fn pair(&self) -> (NodeId, NodeId) {
        (self.u, self.w)
    }
}

#[derive(Debug, Clone)]
pub struct TapInstance {
    pub tree: RootedTree,
    pub links: Vec<Link>,
    /// Input link pairs in input order (duplicates collapsed onto the first
    /// occurrence by `by_pair`, but the original list is kept for output).
    pub input_pairs: Vec<(NodeId, NodeId)>,
    /// Node pair -> link id, canonical (u < w) keys.
    pub by_pair: HashMap<(NodeId, NodeId), LinkId>,
    pub closed: bool,
}

fn canon(u: NodeId, w: NodeId) -> (NodeId, NodeId) {
    (u.min(w), u.max(w))
}

impl TapInstance {
    pub fn new(tree: RootedTree, input_pairs: Vec<(NodeId, NodeId)>) -> Result<Self, TapError> {
        let n = tree.n;
        let mut links = Vec::new();
        let mut by_pair = HashMap::new();
        for (k, &(u, w)) in input_pairs.iter().enumerate() {
            if u >= n || w >= n {
                return Err(TapError::Invalid(format!("link ({u}, {w}) out of range (n={n})")));
            }
            if u == w {
                return Err(TapError::Invalid(format!("self-loop link ({u}, {w})")));
            }
            let key = canon(u, w);
            // Multigraph collapse: exactly one link per node pair, first
            // occurrence wins.
            by_pair.entry(key).or_insert_with(|| {
                let id = links.len();
                links.push(Link {
                    id,
                    u: key.0,
                    w: key.1,
                    origin: LinkOrigin::Input(k),
                });
                id
            });
        }
        Ok(TapInstance {
            tree,
            links,
            input_pairs,
            by_pair,
            closed: false,
        })
    }

    pub fn n(&self) -> usize {
        self.tree.n
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn link_by_pair(&self, u: NodeId, w: NodeId) -> Option<LinkId> {
        self.by_pair.get(&canon(u, w)).copied()
    }
}

/// Does the link (u, w) cover the tree edge `(parent(child), child)`?
pub fn covers(tree: &RootedTree, u: NodeId, w: NodeId, child: NodeId) -> bool {
    // The edge above `child` lies on the u-w path iff exactly one endpoint is
    // inside child's subtree.
    let in_u = tree.is_ancestor(child, u);
    let in_w = tree.is_ancestor(child, w);
    in_u != in_w
}

/// Adds every sub-path link of every input link (shadow closure). Idempotent;
/// each node pair keeps one link, whose origin is the input link with that
/// exact pair if one exists, otherwise the lowest-indexed input link whose
/// path contains the pair.
pub fn shadow_close(inst: &TapInstance) -> TapInstance {
    let tree = inst.tree.clone();
    let mut links: Vec<Link> = Vec::new();
    let mut by_pair: HashMap<(NodeId, NodeId), LinkId> = HashMap::new();

    // Pass 1: input links in input order.
    for (k, &(u, w)) in inst.input_pairs.iter().enumerate() {
        let key = canon(u, w);
        by_pair.entry(key).or_insert_with(|| {
            let id = links.len();
            links.push(Link {
                id,
                u: key.0,
                w: key.1,
                origin: LinkOrigin::Input(k),
            });
            id
        });
    }
    // Pass 2: shadows, attributed to the lowest-indexed containing input link.
    for (k, &(u, w)) in inst.input_pairs.iter().enumerate() {
        let path = tree.path(u, w);
        for i in 0..path.len() {
            for j in i + 1..path.len() {
                let key = canon(path[i], path[j]);
                by_pair.entry(key).or_insert_with(|| {
                    let id = links.len();
                    links.push(Link {
                        id,
                        u: key.0,
                        w: key.1,
                        origin: LinkOrigin::ShadowOf(k),
                    });
                    id
                });
            }
        }
    }
    TapInstance {
        tree,
        links,
        input_pairs: inst.input_pairs.clone(),
        by_pair,
        closed: true,
    }
}

/// Every tree edge must be covered by some link.
pub fn validate_feasible(inst: &TapInstance) -> Result<(), TapError> {
    let tree = &inst.tree;
    let mut covered = vec![false; tree.n];
    for l in &inst.links {
        for c in tree.path_edges(l.u, l.w) {
            covered[c] = true;
        }
    }
    for v in 0..tree.n {
        if v != tree.root && !covered[v] {
            return Err(TapError::Infeasible {
                u: tree.parent[v].unwrap(),
                v,
            });
        }
    }
    Ok(())
}

/// Checks that `pairs` are all input links and together cover every tree edge.
pub fn verify_cover(inst: &TapInstance, pairs: &[(NodeId, NodeId)]) -> Result<(), TapError> {
    let tree = &inst.tree;
    let input: std::collections::HashSet<(NodeId, NodeId)> =
        inst.input_pairs.iter().map(|&(u, w)| canon(u, w)).collect();
    let mut covered = vec![false; tree.n];
    for &(u, w) in pairs {
        if !input.contains(&canon(u, w)) {
            return Err(TapError::NotAnInputLink { u, v: w });
        }
        for c in tree.path_edges(u, w) {
            covered[c] = true;
        }
    }
    for v in 0..tree.n {
        if v != tree.root && !covered[v] {
            return Err(TapError::Uncovered {
                u: tree.parent[v].unwrap(),
                v,
            });
        }
    }
    Ok(())
}

/// Maps a set of closed-link ids to input link indices (each closed link is
/// the image or shadow of a concrete input link; covering power only grows).
pub fn expand_to_input(inst: &TapInstance, picked: &[LinkId]) -> Vec<usize> {
    let mut out: Vec<usize> = picked
        .iter()
        .map(|&id| inst.links[id].origin.input_index())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Input pairs for a set of input link indices, ordered.
pub fn input_pairs_of(inst: &TapInstance, input_ids: &[usize]) -> Vec<(NodeId, NodeId)> {
    input_ids
        .iter()
        .map(|&k| {
            let (u, w) = inst.input_pairs[k];
            canon(u, w)
        })
        .collect()
}

const GEN_ATTEMPTS: usize = 64;

/// Random feasible instance: node `i` attaches to a uniform parent among
/// `0..i` (root 0), then every non-tree pair becomes a link with probability
/// `density`. Regenerates (same RNG stream) until feasible. Deterministic per
/// seed.
pub fn generate_random(n: usize, density: f64, seed: u64) -> Result<TapInstance, TapError> {
    if n < 2 {
        return Err(TapError::Invalid(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(TapError::Invalid(format!("density {density} not in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GEN_ATTEMPTS {
        let mut edges = Vec::with_capacity(n - 1);
        for i in 1..n {
            let p = rng.gen_range(0..i);
            edges.push((p, i));
        }
        let tree = RootedTree::from_edges(n, 0, &edges)?;
        let mut pairs = Vec::new();
        for u in 0..n {
            for w in u + 1..n {
                if tree.parent[w] == Some(u) || tree.parent[u] == Some(w) {
                    continue;
                }
                if rng.gen_bool(density) {
                    pairs.push((u, w));
                }
            }
        }
        let inst = TapInstance::new(tree, pairs)?;
        if validate_feasible(&inst).is_ok() {
            return Ok(inst);
        }
    }
    Err(TapError::GenerationFailed {
        n,
        density,
        attempts: GEN_ATTEMPTS,
    })
}

/// Parses the plain-text instance format:
///
/// ```text
/// tap 1
/// nodes <n>
/// root <r>
/// edge <u> <v>    # n-1 times
/// link <u> <v>    # any number
/// ```
///
/// `#` starts a comment; blank lines are ignored.
pub fn parse_instance(text: &str) -> Result<TapInstance, TapError> {
    let mut n: Option<usize> = None;
    let mut root: Option<usize> = None;
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
    let mut saw_header = false;

    let err = |line: usize, msg: String| TapError::Parse { line, msg };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let mut tok = line.split_whitespace();
        let Some(head) = tok.next() else { continue };
        let mut num = |what: &str| -> Result<usize, TapError> {
            tok.next()
                .ok_or_else(|| err(line_no, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|_| err(line_no, format!("bad {what}")))
        };
        match head {
            "tap" => {
                let v = num("format version")?;
                if v != 1 {
                    return Err(err(line_no, format!("unsupported format version {v}")));
                }
                saw_header = true;
            }
            "nodes" => n = Some(num("node count")?),
            "root" => root = Some(num("root id")?),
            "edge" => {
                let u = num("edge endpoint")?;
                let v = num("edge endpoint")?;
                edges.push((u, v));
            }
            "link" => {
                let u = num("link endpoint")?;
                let v = num("link endpoint")?;
                pairs.push((u, v));
            }
            other => return Err(err(line_no, format!("unknown directive '{other}'"))),
        }
        if tok.next().is_some() {
            return Err(err(line_no, "trailing tokens".into()));
        }
    }
    if !saw_header {
        return Err(TapError::Parse {
            line: 1,
            msg: "missing 'tap 1' header".into(),
        });
    }
    let n = n.ok_or(TapError::Parse {
        line: 1,
        msg: "missing 'nodes' line".into(),
    })?;
    let root = root.ok_or(TapError::Parse {
        line: 1,
        msg: "missing 'root' line".into(),
    })?;
    let tree = RootedTree::from_edges(n, root, &edges)?;
    TapInstance::new(tree, pairs)
}

/// Canonical text form; `parse_instance` round-trips it.
pub fn format_instance(inst: &TapInstance) -> String {
    let mut out = String::new();
    out.push_str("tap 1\n");
    out.push_str(&format!("nodes {}\n", inst.tree.n));
    out.push_str(&format!("root {}\n", inst.tree.root));
    for (p, v) in inst.tree.edges() {
        out.push_str(&format!("edge {p} {v}\n"));
    }
    for &(u, w) in &inst.input_pairs {
        out.push_str(&format!("link {u} {w}\n"));
    }
    out
}

/// Formats a solution: the picked input links plus a size trailer.
pub fn format_solution(pairs: &[(NodeId, NodeId)]) -> String {
    let mut out = String::new();
    for &(u, w) in pairs {
        out.push_str(&format!("link {u} {w}\n"));
    }
    out.push_str(&format!("size {}\n", pairs.len()));
    out
}

/// Parses a solution file: `link u v` lines, optional `size k` trailer
/// (validated when present).
pub fn parse_solution(text: &str) -> Result<Vec<(NodeId, NodeId)>, TapError> {
    let mut pairs = Vec::new();
    let mut stated = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let mut tok = line.split_whitespace();
        let Some(head) = tok.next() else { continue };
        let mut num = || -> Result<usize, TapError> {
            tok.next()
                .ok_or(TapError::Parse {
                    line: line_no,
                    msg: "missing number".into(),
                })?
                .parse::<usize>()
                .map_err(|_| TapError::Parse {
                    line: line_no,
                    msg: "bad number".into(),
                })
        };
        match head {
            "link" => {
                let u = num()?;
                let w = num()?;
                pairs.push((u, w));
            }
            "size" => stated = Some(num()?),
            other => {
                return Err(TapError::Parse {
                    line: line_no,
                    msg: format!("unknown directive '{other}'"),
                })
            }
        }
    }
    if let Some(k) = stated {
        if k != pairs.len() {
            return Err(TapError::Parse {
                line: 0,
                msg: format!("size trailer says {k} but {} links listed", pairs.len()),
            });
        }
    }
    Ok(pairs)
}
