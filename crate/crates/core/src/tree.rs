//! The growing rooted tree with a root self-loop.
//!
//! Leaves added by one growth event form a bundle stored with a multiplicity.
//! A bundle occupies one child slot of its parent whose weight is the
//! cohort size at birth and never changes; members that later become
//! materialized vertices stay reachable through that slot. This keeps every
//! per-vertex prefix sum append-only.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::count::ExtCount;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertexRef {
    /// A materialized vertex, by dense id.
    Vertex(usize),
    /// An anonymous member of a leaf bundle.
    Member(usize),
}

impl std::fmt::Display for VertexRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VertexRef::Vertex(v) => write!(f, "v{v}"),
            VertexRef::Member(b) => write!(f, "b{b}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("stale reference {0}")]
    StaleReference(VertexRef),
    #[error("growth count must be at least 1")]
    EmptyGrowth,
    #[error("snapshot parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TreeSpec {
    SingleVertex,
    SingleEdge,
    /// Vertices `0..=max id`, rooted at `root`.
    Edges { root: usize, edges: Vec<(usize, usize)> },
}

/// Relative tolerance of the invariant audit once counts pass 2^53.
const AUDIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Child {
    Vertex(usize),
    Bundle(usize),
}

#[derive(Clone, Debug)]
pub struct Vertex {
    parent: Option<usize>,
    depth: u64,
    birth: ExtCount,
    origin: Option<usize>,
    children: Vec<Child>,
    /// Cumulative slot weights, aligned with `children`.
    prefix: Vec<f64>,
    child_weight: ExtCount,
    unit: bool,
}

impl Vertex {
    fn new(parent: Option<usize>, depth: u64, birth: ExtCount, origin: Option<usize>) -> Self {
        Vertex {
            parent,
            depth,
            birth,
            origin,
            children: Vec::new(),
            prefix: Vec::new(),
            child_weight: ExtCount::ZERO,
            unit: true,
        }
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn birth(&self) -> ExtCount {
        self.birth
    }

    /// The bundle this vertex was materialized from, if any.
    pub fn origin(&self) -> Option<usize> {
        self.origin
    }

    /// Graph degree (self-loop excluded).
    pub fn degree(&self) -> ExtCount {
        self.child_weight + u64::from(self.parent.is_some())
    }

    fn push_child(&mut self, child: Child, weight: ExtCount) {
        let last = self.prefix.last().copied().unwrap_or(0.0);
        self.children.push(child);
        self.prefix.push(last + weight.to_f64());
        self.child_weight += weight;
        self.unit &= weight == ExtCount::ONE;
    }
}

#[derive(Clone, Debug)]
pub struct Bundle {
    parent: usize,
    cohort: ExtCount,
    multiplicity: ExtCount,
    birth: ExtCount,
    materialized: Vec<usize>,
}

impl Bundle {
    pub fn parent(&self) -> usize {
        self.parent
    }

    pub fn multiplicity(&self) -> ExtCount {
        self.multiplicity
    }

    pub fn cohort(&self) -> ExtCount {
        self.cohort
    }

    pub fn birth(&self) -> ExtCount {
        self.birth
    }

    pub fn materialized(&self) -> &[usize] {
        &self.materialized
    }

    /// Member at offset `j` in `[0, cohort)` of the slot: the first
    /// `multiplicity` offsets are anonymous members, the rest are the
    /// materialized vertices.
    fn pick(&self, b: usize, j: f64) -> VertexRef {
        let mat = self.materialized.len();
        if mat == 0 {
            return VertexRef::Member(b);
        }
        let threshold = self.multiplicity.to_f64();
        if j < threshold {
            VertexRef::Member(b)
        } else {
            let k = ((j - threshold).floor() as usize).min(mat - 1);
            VertexRef::Vertex(self.materialized[k])
        }
    }
}

/// One recorded growth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthEvent {
    pub time: ExtCount,
    pub parent: usize,
    pub leaf_count: ExtCount,
    pub new_bundle: usize,
    /// `(bundle, vertex)` when the growth site was a bundle member.
    pub materialized: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkTarget {
    SelfLoop,
    Vertex(usize),
    Bundle(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkOption {
    pub target: WalkTarget,
    pub weight: ExtCount,
}

#[derive(Clone, Copy, Debug)]
enum HalfEdgeOwner {
    Vertex(usize),
    Bundle(usize),
}

#[derive(Clone, Debug)]
pub struct CompressedTree {
    root: usize,
    vertices: Vec<Vertex>,
    bundles: Vec<Bundle>,
    live_bundles: usize,
    vertex_count: ExtCount,
    leaf_count: ExtCount,
    /// Append-only blocks of walk half-edges (degree plus the root loop).
    blocks: Vec<(HalfEdgeOwner, ExtCount)>,
    block_prefix: Vec<f64>,
    /// Per-vertex walk data, kept small for cache locality.
    hot: Vec<Hot>,
    /// Materialized neighbours of each vertex other than its parent.
    others: Vec<Vec<u32>>,
}

/// Step data of one vertex: live bundle mass below it, the vertex one step
/// up (itself at the root) and its number of other materialized neighbours.
#[derive(Clone, Copy, Debug)]
struct Hot {
    mass: f64,
    up: u32,
    others: u32,
}

impl CompressedTree {
    pub fn init(spec: &TreeSpec) -> Result<Self, TreeError> {
        match spec {
            TreeSpec::SingleVertex => Self::from_edges(1, 0, &[]),
            TreeSpec::SingleEdge => Self::from_edges(2, 0, &[(0, 1)]),
            TreeSpec::Edges { root, edges } => {
                let n = edges
                    .iter()
                    .map(|&(a, b)| a.max(b) + 1)
                    .max()
                    .unwrap_or(1)
                    .max(root + 1);
                Self::from_edges(n, *root, edges)
            }
        }
    }

    fn empty(root: usize) -> Self {
        CompressedTree {
            root,
            vertices: Vec::new(),
            bundles: Vec::new(),
            live_bundles: 0,
            vertex_count: ExtCount::ZERO,
            leaf_count: ExtCount::ZERO,
            blocks: Vec::new(),
            block_prefix: Vec::new(),
            hot: Vec::new(),
            others: Vec::new(),
        }
    }

    fn from_edges(n: usize, root: usize, edges: &[(usize, usize)]) -> Result<Self, TreeError> {
        let parent = orient(n, root, edges)?;
        let births = vec![ExtCount::ZERO; n];
        Self::from_parents(root, &parent, &births, &[])
    }

    /// Builds a tree from materialized parent links (`None` only at the
    /// root) plus live bundles `(parent, multiplicity, birth)`.
    fn from_parents(
        root: usize,
        parent: &[Option<usize>],
        births: &[ExtCount],
        bundles: &[(usize, ExtCount, ExtCount)],
    ) -> Result<Self, TreeError> {
        let n = parent.len();
        let mut kids = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                kids[*p].push(v);
            }
        }
        let mut tree = CompressedTree::empty(root);
        tree.vertices = (0..n)
            .map(|v| Vertex::new(parent[v], 0, births[v], None))
            .collect();
        tree.vertex_count = ExtCount::from_u64(n as u64);
        tree.hot = (0..n)
            .map(|v| Hot {
                mass: 0.0,
                up: parent[v].unwrap_or(v) as u32,
                others: 0,
            })
            .collect();
        tree.others = vec![Vec::new(); n];
        // depths in BFS order
        let mut queue = VecDeque::from([root]);
        let mut seen = 1;
        while let Some(v) = queue.pop_front() {
            for &c in &kids[v] {
                tree.vertices[c].depth = tree.vertices[v].depth + 1;
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != n {
            return Err(TreeError::InvalidTree("not connected".into()));
        }
        tree.push_block(HalfEdgeOwner::Vertex(root), ExtCount::ONE);
        for v in 0..n {
            for &c in &kids[v] {
                tree.vertices[v].push_child(Child::Vertex(c), ExtCount::ONE);
                tree.add_other(v, c);
                tree.push_block(HalfEdgeOwner::Vertex(v), ExtCount::ONE);
                tree.push_block(HalfEdgeOwner::Vertex(c), ExtCount::ONE);
            }
        }
        for &(p, mult, birth) in bundles {
            if p >= n {
                return Err(TreeError::InvalidTree(format!("bundle parent {p} out of range")));
            }
            if mult.is_zero() {
                return Err(TreeError::InvalidTree("empty bundle".into()));
            }
            tree.attach_bundle(p, mult, birth);
        }
        tree.leaf_count = ExtCount::ZERO;
        for v in &tree.vertices {
            if v.degree() == ExtCount::ONE {
                tree.leaf_count += 1;
            }
        }
        for b in &tree.bundles {
            tree.leaf_count += b.multiplicity;
        }
        Ok(tree)
    }

    fn add_other(&mut self, v: usize, u: usize) {
        self.others[v].push(u as u32);
        self.hot[v].others += 1;
    }

    fn push_block(&mut self, owner: HalfEdgeOwner, weight: ExtCount) {
        let last = self.block_prefix.last().copied().unwrap_or(0.0);
        self.blocks.push((owner, weight));
        self.block_prefix.push(last + weight.to_f64());
    }

    fn attach_bundle(&mut self, parent: usize, count: ExtCount, time: ExtCount) -> usize {
        let b = self.bundles.len();
        self.bundles.push(Bundle {
            parent,
            cohort: count,
            multiplicity: count,
            birth: time,
            materialized: Vec::new(),
        });
        self.live_bundles += 1;
        self.vertices[parent].push_child(Child::Bundle(b), count);
        self.hot[parent].mass += count.to_f64();
        self.push_block(HalfEdgeOwner::Vertex(parent), count);
        self.push_block(HalfEdgeOwner::Bundle(b), count);
        self.vertex_count += count;
        b
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn bundle(&self, b: usize) -> &Bundle {
        &self.bundles[b]
    }

    pub fn materialized_count(&self) -> usize {
        self.vertices.len()
    }

    /// Every bundle ever created, including exhausted ones.
    pub fn bundle_slots(&self) -> usize {
        self.bundles.len()
    }

    pub fn live_bundles(&self) -> impl Iterator<Item = (usize, &Bundle)> {
        self.bundles
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.multiplicity.is_zero())
    }

    pub fn live_bundle_count(&self) -> usize {
        self.live_bundles
    }

    /// Total number of vertices including bundle members.
    pub fn vertex_count(&self) -> ExtCount {
        self.vertex_count
    }

    pub fn edge_count(&self) -> ExtCount {
        self.vertex_count.saturating_sub(ExtCount::ONE)
    }

    /// Number of degree-one vertices.
    pub fn leaf_count(&self) -> ExtCount {
        self.leaf_count
    }

    /// States of the lumped chain: one per materialized vertex, one per live bundle.
    pub fn lumped_state_count(&self) -> usize {
        self.vertices.len() + self.live_bundles
    }

    pub fn is_valid(&self, at: VertexRef) -> bool {
        match at {
            VertexRef::Vertex(v) => v < self.vertices.len(),
            VertexRef::Member(b) => b < self.bundles.len() && !self.bundles[b].multiplicity.is_zero(),
        }
    }

    fn check(&self, at: VertexRef) -> Result<(), TreeError> {
        if self.is_valid(at) {
            Ok(())
        } else {
            Err(TreeError::StaleReference(at))
        }
    }

    pub fn degree(&self, at: VertexRef) -> ExtCount {
        match at {
            VertexRef::Vertex(v) => self.vertices[v].degree(),
            VertexRef::Member(_) => ExtCount::ONE,
        }
    }

    /// Graph degree plus one at the root for the loop.
    pub fn walk_degree(&self, at: VertexRef) -> ExtCount {
        match at {
            VertexRef::Vertex(v) => self.vertices[v].child_weight + 1,
            VertexRef::Member(_) => ExtCount::ONE,
        }
    }

    pub fn birth(&self, at: VertexRef) -> ExtCount {
        match at {
            VertexRef::Vertex(v) => self.vertices[v].birth,
            VertexRef::Member(b) => self.bundles[b].birth,
        }
    }

    pub fn distance_to_root(&self, at: VertexRef) -> u64 {
        match at {
            VertexRef::Vertex(v) => self.vertices[v].depth,
            VertexRef::Member(b) => self.vertices[self.bundles[b].parent].depth + 1,
        }
    }

    /// Attaches `count` new leaves under `at`, materializing `at` first if it
    /// is a bundle member.
    pub fn grow(&mut self, at: VertexRef, count: ExtCount, time: ExtCount) -> Result<GrowthEvent, TreeError> {
        self.check(at)?;
        if count.is_zero() {
            return Err(TreeError::EmptyGrowth);
        }
        let (parent, materialized) = match at {
            VertexRef::Vertex(v) => (v, None),
            VertexRef::Member(b) => {
                let v = self.materialize(b);
                (v, Some((b, v)))
            }
        };
        if self.vertices[parent].degree() == ExtCount::ONE {
            self.leaf_count = self.leaf_count.saturating_sub(ExtCount::ONE);
        }
        let new_bundle = self.attach_bundle(parent, count, time);
        self.leaf_count += count;
        if self.vertices[parent].degree() == ExtCount::ONE {
            self.leaf_count += 1;
        }
        Ok(GrowthEvent {
            time,
            parent,
            leaf_count: count,
            new_bundle,
            materialized,
        })
    }

    /// Turns one anonymous member of bundle `b` into a materialized vertex.
    pub fn materialize(&mut self, b: usize) -> usize {
        let bundle = &mut self.bundles[b];
        assert!(!bundle.multiplicity.is_zero(), "materializing an empty bundle");
        let id = self.vertices.len();
        bundle.multiplicity = bundle.multiplicity.saturating_sub(ExtCount::ONE);
        if bundle.multiplicity.is_zero() {
            self.live_bundles -= 1;
        }
        bundle.materialized.push(id);
        let parent = bundle.parent;
        let birth = bundle.birth;
        let depth = self.vertices[parent].depth + 1;
        self.vertices.push(Vertex::new(Some(parent), depth, birth, Some(b)));
        let h = &mut self.hot[parent];
        h.mass = (h.mass - 1.0).max(0.0);
        self.hot.push(Hot {
            mass: 0.0,
            up: parent as u32,
            others: 0,
        });
        self.others.push(Vec::new());
        self.add_other(parent, id);
        id
    }

    /// Options of the uniform neighbour choice at `at`.
    pub fn walk_options(&self, at: VertexRef) -> Vec<WalkOption> {
        match at {
            VertexRef::Member(b) => vec![WalkOption {
                target: WalkTarget::Vertex(self.bundles[b].parent),
                weight: ExtCount::ONE,
            }],
            VertexRef::Vertex(v) => {
                let vx = &self.vertices[v];
                let mut out = Vec::with_capacity(vx.children.len() + 1);
                out.push(WalkOption {
                    target: match vx.parent {
                        Some(p) => WalkTarget::Vertex(p),
                        None => WalkTarget::SelfLoop,
                    },
                    weight: ExtCount::ONE,
                });
                for &c in &vx.children {
                    match c {
                        Child::Vertex(u) => out.push(WalkOption {
                            target: WalkTarget::Vertex(u),
                            weight: ExtCount::ONE,
                        }),
                        Child::Bundle(b) => {
                            let bundle = &self.bundles[b];
                            if !bundle.multiplicity.is_zero() {
                                out.push(WalkOption {
                                    target: WalkTarget::Bundle(b),
                                    weight: bundle.multiplicity,
                                });
                            }
                            for &u in &bundle.materialized {
                                out.push(WalkOption {
                                    target: WalkTarget::Vertex(u),
                                    weight: ExtCount::ONE,
                                });
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// One step of the walk from `at` on the current tree.
    #[inline]
    pub fn random_neighbor<R: Rng + ?Sized>(&self, at: VertexRef, rng: &mut R) -> VertexRef {
        let v = match at {
            VertexRef::Member(b) => return VertexRef::Vertex(self.bundles[b].parent),
            VertexRef::Vertex(v) => v,
        };
        let vx = &self.vertices[v];
        let up = match vx.parent {
            Some(p) => VertexRef::Vertex(p),
            None => VertexRef::Vertex(v),
        };
        if vx.unit {
            let i = rng.random_range(0..=vx.children.len());
            if i == 0 {
                return up;
            }
            return match vx.children[i - 1] {
                Child::Vertex(u) => VertexRef::Vertex(u),
                Child::Bundle(b) => self.bundles[b].pick(b, 0.0),
            };
        }
        let total = vx.prefix.last().copied().unwrap_or(0.0) + 1.0;
        let u = rng.random::<f64>() * total;
        if u < 1.0 {
            return up;
        }
        let x = u - 1.0;
        let slot = vx.prefix.partition_point(|&s| s <= x).min(vx.children.len() - 1);
        let before = if slot == 0 { 0.0 } else { vx.prefix[slot - 1] };
        match vx.children[slot] {
            Child::Vertex(u) => VertexRef::Vertex(u),
            Child::Bundle(b) => self.bundles[b].pick(b, x - before),
        }
    }

    /// A bundle member below `v`, chosen proportionally to multiplicity.
    fn random_member<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> VertexRef {
        loop {
            if let m @ VertexRef::Member(_) = self.random_neighbor(VertexRef::Vertex(v), rng) {
                return m;
            }
        }
    }

    /// Position after `steps` steps of the walk from `at`.
    ///
    /// Same law as `steps` calls of [`random_neighbor`](Self::random_neighbor).
    /// A step into an anonymous leaf forces the step back, so such round
    /// trips are taken without resolving which leaf; where leaves carry at
    /// least half the walk weight, the run of round trips before the next
    /// other move is drawn at once as a geometric count.
    pub fn walk<R: Rng + ?Sized>(&self, mut at: VertexRef, mut steps: u64, rng: &mut R) -> VertexRef {
        while steps > 0 {
            let v = match at {
                VertexRef::Member(b) => {
                    at = VertexRef::Vertex(self.bundles[b].parent);
                    steps -= 1;
                    continue;
                }
                VertexRef::Vertex(v) => v,
            };
            let h = self.hot[v];
            let m = h.mass;
            let total = m + 1.0 + f64::from(h.others);
            let x = if m >= 0.5 * total {
                // P(G >= g) = q^g leaf round trips before the first other move
                let u = 1.0 - rng.random::<f64>();
                let g = (u.ln() / (m / total).ln()).floor();
                if 2.0 * g >= steps as f64 {
                    at = if steps % 2 == 0 {
                        VertexRef::Vertex(v)
                    } else {
                        self.random_member(v, rng)
                    };
                    break;
                }
                steps -= 2 * g as u64;
                rng.random_range(0..=h.others)
            } else {
                let u = rng.random::<f64>() * total;
                if u < m {
                    if steps == 1 {
                        at = self.random_member(v, rng);
                        break;
                    }
                    steps -= 2;
                    continue;
                }
                ((u - m) as u32).min(h.others)
            };
            at = VertexRef::Vertex(if x == 0 {
                h.up as usize
            } else {
                self.others[v][x as usize - 1] as usize
            });
            steps -= 1;
        }
        at
    }

    /// Draw from the stationary law of the walk on the current tree: mass
    /// proportional to walk degree.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> VertexRef {
        let total = *self.block_prefix.last().expect("root loop block");
        let x = rng.random::<f64>() * total;
        let i = self.block_prefix.partition_point(|&s| s <= x).min(self.blocks.len() - 1);
        let before = if i == 0 { 0.0 } else { self.block_prefix[i - 1] };
        match self.blocks[i].0 {
            HalfEdgeOwner::Vertex(v) => VertexRef::Vertex(v),
            HalfEdgeOwner::Bundle(b) => self.bundles[b].pick(b, x - before),
        }
    }

    /// Total walk weight `2|E| + 1`.
    pub fn total_walk_weight(&self) -> ExtCount {
        self.edge_count() + self.edge_count() + 1
    }

    /// Vertex count by graph degree (self-loop excluded).
    pub fn degree_histogram(&self) -> BTreeMap<ExtCount, ExtCount> {
        let mut hist = BTreeMap::new();
        for v in &self.vertices {
            *hist.entry(v.degree()).or_insert(ExtCount::ZERO) += 1;
        }
        let mut members = ExtCount::ZERO;
        for (_, b) in self.live_bundles() {
            members += b.multiplicity;
        }
        if !members.is_zero() {
            *hist.entry(ExtCount::ONE).or_insert(ExtCount::ZERO) += members;
        }
        hist
    }

    /// Plain-text snapshot: `root <id>`, then `parent child birth` for each
    /// materialized non-root vertex, then `bundle parent multiplicity birth`
    /// for each live bundle.
    pub fn export_snapshot(&self) -> String {
        let mut out = format!("root {}\n", self.root);
        for (v, vx) in self.vertices.iter().enumerate() {
            if let Some(p) = vx.parent {
                let _ = writeln!(out, "{p} {v} {}", vx.birth);
            }
        }
        for (_, b) in self.live_bundles() {
            let _ = writeln!(out, "bundle {} {} {}", b.parent, b.multiplicity, b.birth);
        }
        out
    }

    pub fn import_snapshot(text: &str) -> Result<Self, TreeError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let perr = |line: usize, msg: &str| TreeError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (i0, head) = lines.next().ok_or_else(|| perr(0, "empty snapshot"))?;
        let root: usize = head
            .strip_prefix("root ")
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| perr(i0, "expected `root <id>`"))?;
        let mut links = Vec::new();
        let mut bundles = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.first() == Some(&"bundle") {
                if f.len() != 4 {
                    return Err(perr(i, "expected `bundle parent multiplicity birth`"));
                }
                let p: usize = f[1].parse().map_err(|_| perr(i, "bad parent"))?;
                let m: ExtCount = f[2].parse().map_err(|_| perr(i, "bad multiplicity"))?;
                let t: ExtCount = f[3].parse().map_err(|_| perr(i, "bad birth"))?;
                bundles.push((p, m, t));
            } else {
                if f.len() != 3 {
                    return Err(perr(i, "expected `parent child birth`"));
                }
                let p: usize = f[0].parse().map_err(|_| perr(i, "bad parent"))?;
                let c: usize = f[1].parse().map_err(|_| perr(i, "bad child"))?;
                let t: ExtCount = f[2].parse().map_err(|_| perr(i, "bad birth"))?;
                links.push((p, c, t));
            }
        }
        let n = links
            .iter()
            .map(|&(p, c, _)| p.max(c) + 1)
            .max()
            .unwrap_or(1)
            .max(root + 1);
        let mut parent = vec![None; n];
        let mut births = vec![ExtCount::ZERO; n];
        for &(p, c, t) in &links {
            if c == root || parent[c].is_some() || p == c {
                return Err(TreeError::InvalidTree(format!("vertex {c} has two parents")));
            }
            parent[c] = Some(p);
            births[c] = t;
        }
        if parent.iter().enumerate().any(|(v, p)| v != root && p.is_none()) {
            return Err(TreeError::InvalidTree("vertex without parent".into()));
        }
        Self::from_parents(root, &parent, &births, &bundles)
    }

    /// Audits every structural invariant; returns a description of the
    /// first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut members = ExtCount::ZERO;
        let mut live = 0;
        for (b, bundle) in self.bundles.iter().enumerate() {
            let expect = bundle.multiplicity + bundle.materialized.len() as u64;
            if !expect.approx_eq(&bundle.cohort, AUDIT_TOL) {
                return Err(format!("bundle {b} lost members"));
            }
            if !bundle.multiplicity.is_zero() {
                live += 1;
                members += bundle.multiplicity;
            }
        }
        if live != self.live_bundles {
            return Err("live bundle count out of sync".into());
        }
        let total = members + self.vertices.len() as u64;
        if !total.approx_eq(&self.vertex_count, AUDIT_TOL) {
            return Err(format!("vertex count {} != {}", self.vertex_count, total));
        }
        let mut degree_sum = ExtCount::ZERO;
        for (v, vx) in self.vertices.iter().enumerate() {
            match vx.parent {
                None if v != self.root => return Err(format!("vertex {v} has no parent")),
                None => {
                    if vx.depth != 0 {
                        return Err("root depth nonzero".into());
                    }
                }
                Some(p) => {
                    if vx.depth != self.vertices[p].depth + 1 {
                        return Err(format!("depth of {v} inconsistent"));
                    }
                }
            }
            let mut w = ExtCount::ZERO;
            for &c in &vx.children {
                w += match c {
                    Child::Vertex(u) => {
                        if self.vertices[u].parent != Some(v) {
                            return Err(format!("child {u} of {v} points elsewhere"));
                        }
                        ExtCount::ONE
                    }
                    Child::Bundle(b) => self.bundles[b].cohort,
                };
            }
            if !w.approx_eq(&vx.child_weight, AUDIT_TOL) {
                return Err(format!("child weight of {v} out of sync"));
            }
            let (mut mass, mut others) = (ExtCount::ZERO, 0usize);
            for &c in &vx.children {
                match c {
                    Child::Vertex(_) => others += 1,
                    Child::Bundle(b) => {
                        mass += self.bundles[b].multiplicity;
                        others += self.bundles[b].materialized.len();
                    }
                }
            }
            let h = self.hot[v];
            if others != self.others[v].len()
                || others != h.others as usize
                || h.up as usize != vx.parent.unwrap_or(v)
                || !ExtCount::from_f64(h.mass).approx_eq(&mass, 1e-9)
            {
                return Err(format!("walk shortcut data of {v} out of sync"));
            }
            degree_sum += vx.degree();
        }
        degree_sum += members;
        let edges = self.edge_count();
        if !degree_sum.approx_eq(&(edges + edges), AUDIT_TOL) {
            return Err(format!("degree sum {degree_sum} != 2 * {edges}"));
        }
        let hist = self.degree_histogram();
        let mut hv = ExtCount::ZERO;
        for c in hist.values() {
            hv += *c;
        }
        if !hv.approx_eq(&self.vertex_count, AUDIT_TOL) {
            return Err("degree histogram does not cover all vertices".into());
        }
        if !hist
            .get(&ExtCount::ONE)
            .copied()
            .unwrap_or_default()
            .approx_eq(&self.leaf_count, AUDIT_TOL)
        {
            return Err("leaf count out of sync".into());
        }
        Ok(())
    }
}

/// Parent links for an edge list rooted at `root`.
fn orient(n: usize, root: usize, edges: &[(usize, usize)]) -> Result<Vec<Option<usize>>, TreeError> {
    if root >= n {
        return Err(TreeError::InvalidTree("root out of range".into()));
    }
    if edges.len() + 1 != n {
        return Err(TreeError::InvalidTree(format!(
            "{} edges cannot span {n} vertices",
            edges.len()
        )));
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a == b {
            return Err(TreeError::InvalidTree(format!("self-loop at {a}")));
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if seen[u] {
                if parent[v] != Some(u) {
                    return Err(TreeError::InvalidTree("cycle".into()));
                }
                continue;
            }
            seen[u] = true;
            parent[u] = Some(v);
            count += 1;
            queue.push_back(u);
        }
    }
    if count != n {
        return Err(TreeError::InvalidTree("disconnected".into()));
    }
    Ok(parent)
}
