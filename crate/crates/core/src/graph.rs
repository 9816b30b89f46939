//! Bipartite user–source interaction graph, modularity, greedy agglomerative
//! community detection and random-walk controversy.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::InteractionDataset;
use crate::stats::derive_seed;

/// Dense node index. In graphs built from a dataset, users come first in
/// registry order, followed by sources.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeighting {
    /// Edge weight is the interaction count.
    #[default]
    Counts,
    /// Every edge has weight 1.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    labels: Vec<String>,
    n_users: usize,
    adjacency: Vec<Vec<(NodeId, f64)>>,
    edges: Vec<(NodeId, NodeId, f64)>,
}

impl InteractionGraph {
    /// One node per user and source, one edge per positive count.
    pub fn build(ds: &InteractionDataset) -> Self {
        let n_users = ds.n_users();
        let mut labels = ds.users().to_vec();
        labels.extend(ds.sources().iter().cloned());
        let mut edges = Vec::new();
        for u in 0..n_users {
            for (m, &c) in ds.row(u).iter().enumerate() {
                if c > 0 {
                    edges.push((u, n_users + m, c as f64));
                }
            }
        }
        Self::assemble(labels, n_users, edges)
    }

    /// General undirected graph over `labels.len()` nodes. Parallel edges are
    /// summed.
    pub fn from_edges(labels: Vec<String>, edges: &[(NodeId, NodeId, f64)]) -> Result<Self> {
        let n = labels.len();
        let mut merged: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Inconsistent(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            if a == b {
                return Err(Error::Inconsistent(format!("self-loop on node {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Inconsistent(format!("edge ({a}, {b}) has weight {w}")));
            }
            *merged.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        let edges = merged.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        Ok(Self::assemble(labels, n, edges))
    }

    fn assemble(labels: Vec<String>, n_users: usize, edges: Vec<(NodeId, NodeId, f64)>) -> Self {
        let mut adjacency = vec![Vec::new(); labels.len()];
        for &(a, b, w) in &edges {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in adjacency.iter_mut() {
            list.sort_by_key(|&(v, _)| v);
        }
        Self {
            labels,
            n_users,
            adjacency,
            edges,
        }
    }

    /// Copy of the graph with every edge weight replaced per `weighting`.
    pub fn reweighted(&self, weighting: EdgeWeighting) -> Self {
        match weighting {
            EdgeWeighting::Counts => self.clone(),
            EdgeWeighting::Binary => {
                let edges = self.edges.iter().map(|&(a, b, _)| (a, b, 1.0)).collect();
                Self::assemble(self.labels.clone(), self.n_users, edges)
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of leading user nodes; equals `n_nodes` for general graphs.
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[(NodeId, NodeId, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: NodeId) -> f64 {
        self.adjacency[v].iter().map(|&(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|&(_, _, w)| w).sum()
    }
}

/// Convenience alias for [`InteractionGraph::build`].
pub fn build_graph(ds: &InteractionDataset) -> InteractionGraph {
    InteractionGraph::build(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    X,
    Y,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::X => 0,
            Side::Y => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Side::X => Side::Y,
            Side::Y => Side::X,
        }
    }
}

/// Total assignment of nodes to two sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    sides: Vec<Side>,
}

impl Partition {
    pub fn new(sides: Vec<Side>) -> Self {
        Self { sides }
    }

    /// Nodes labelled `true` go to `X`.
    pub fn from_mask(in_x: &[bool]) -> Self {
        Self::new(in_x.iter().map(|&x| if x { Side::X } else { Side::Y }).collect())
    }

    pub fn len(&self) -> usize {
        self.sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }

    pub fn side(&self, v: NodeId) -> Side {
        self.sides[v]
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    /// Node counts on `X` and `Y`.
    pub fn sizes(&self) -> (usize, usize) {
        let x = self.sides.iter().filter(|&&s| s == Side::X).count();
        (x, self.sides.len() - x)
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.sides.iter().map(|s| s.other()).collect())
    }

    pub fn members(&self, side: Side) -> Vec<NodeId> {
        (0..self.sides.len()).filter(|&v| self.sides[v] == side).collect()
    }

    /// Reference partition of a two-community dataset's graph: sources by
    /// their community, users by the community holding most of their
    /// interactions (ties go to `positive_community`), which lands on `X`.
    pub fn by_predominant_community(ds: &InteractionDataset, positive_community: &str) -> Result<Self> {
        if ds.n_communities() != 2 {
            return Err(Error::Unsupported(format!(
                "a two-sided reference partition needs exactly 2 communities, dataset has {}",
                ds.n_communities()
            )));
        }
        let pos = ds.community_index(positive_community)?;
        let mut in_x: Vec<bool> = (0..ds.n_users())
            .map(|u| {
                let t = ds.community_totals(u);
                t[pos] >= t[1 - pos]
            })
            .collect();
        in_x.extend((0..ds.n_sources()).map(|m| ds.community_of(m) == pos));
        Ok(Self::from_mask(&in_x))
    }

    /// Fraction of nodes on which the two partitions agree, under whichever
    /// side labelling matches better.
    pub fn agreement(&self, other: &Partition) -> Result<f64> {
        if self.len() != other.len() || self.is_empty() {
            return Err(Error::Inconsistent("partitions cover different node sets".into()));
        }
        let same = self.sides.iter().zip(&other.sides).filter(|(a, b)| a == b).count();
        let frac = same as f64 / self.len() as f64;
        Ok(frac.max(1.0 - frac))
    }

    fn labels(&self) -> Vec<usize> {
        self.sides.iter().map(|s| s.index()).collect()
    }
}

/// Newman modularity of a two-sided partition.
pub fn modularity(g: &InteractionGraph, p: &Partition) -> Result<f64> {
    if p.len() != g.n_nodes() {
        return Err(Error::Inconsistent(format!(
            "partition covers {} nodes, graph has {}",
            p.len(),
            g.n_nodes()
        )));
    }
    modularity_of_labels(g, &p.labels())
}

/// `Q = Σ_s (e_ss − a_s²)` for an arbitrary community labelling.
pub fn modularity_of_labels(g: &InteractionGraph, labels: &[usize]) -> Result<f64> {
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::Degenerate("graph has no edge weight".into()));
    }
    let k = labels.iter().max().map_or(0, |&l| l + 1);
    let mut inside = vec![0.0; k];
    let mut ends = vec![0.0; k];
    for &(a, b, w) in g.edges() {
        ends[labels[a]] += w;
        ends[labels[b]] += w;
        if labels[a] == labels[b] {
            inside[labels[a]] += w;
        }
    }
    Ok((0..k)
        .map(|s| inside[s] / m - (ends[s] / (2.0 * m)).powi(2))
        .sum())
}

/// Outcome of greedy agglomerative modularity maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityDetection {
    /// Two-way partition taken from the merge sequence at two communities.
    /// `X` holds the community of node 0.
    pub partition: Partition,
    /// Community per node at the level where greedy merging stops improving
    /// modularity, numbered by first appearance.
    pub best_labels: Vec<usize>,
    pub n_communities: usize,
    /// Modularity at the best level.
    pub modularity: f64,
    /// Modularity of the two-way partition.
    pub modularity_two_sides: f64,
    /// Modularity after each merge of the improving prefix, starting with
    /// the all-singletons level.
    pub q_trace: Vec<f64>,
}

/// Greedy agglomerative modularity maximization in the style of
/// Clauset-Newman-Moore.
///
/// Starting from singletons, repeatedly merge the pair of adjacent
/// communities with the largest `ΔQ = 2(e_ij − a_i a_j)`; ties go to the pair
/// with the smallest ids. The best level is the last one before `ΔQ` turns
/// non-positive. Merging continues past it, joining non-adjacent communities
/// once components are exhausted, until two communities remain.
pub fn greedy_modularity(g: &InteractionGraph) -> Result<CommunityDetection> {
    let n = g.n_nodes();
    if n < 2 {
        return Err(Error::Degenerate("community detection needs at least 2 nodes".into()));
    }
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::Degenerate("graph has no edge weight".into()));
    }

    // e[i][j] = w_ij / 2m per ordered pair of distinct communities
    let mut e: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for &(a, b, w) in g.edges() {
        *e[a].entry(b).or_insert(0.0) += w / (2.0 * m);
        *e[b].entry(a).or_insert(0.0) += w / (2.0 * m);
    }
    let mut a: Vec<f64> = (0..n).map(|v| g.degree(v) / (2.0 * m)).collect();
    let mut alive = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut q = -a.iter().map(|x| x * x).sum::<f64>();
    let mut q_trace = vec![q];
    let mut improving = true;
    let mut best_owner = owner.clone();
    let mut best_q = q;
    let mut remaining = n;

    while remaining > 2 {
        let (i, j, dq) = best_merge(&e, &a, &alive);
        if improving && dq <= 0.0 {
            improving = false;
        }
        // fold j into i, i < j
        let row_j = std::mem::take(&mut e[j]);
        for (&k, &w) in &row_j {
            if k == i {
                continue;
            }
            *e[i].entry(k).or_insert(0.0) += w;
            let back = e[k].remove(&j).unwrap_or(0.0);
            *e[k].entry(i).or_insert(0.0) += back;
        }
        e[i].remove(&j);
        a[i] += a[j];
        a[j] = 0.0;
        alive[j] = false;
        for o in owner.iter_mut() {
            if *o == j {
                *o = i;
            }
        }
        remaining -= 1;
        q += dq;
        if improving {
            q_trace.push(q);
            best_q = q;
            best_owner.clone_from(&owner);
        }
    }
    if improving && remaining == 2 {
        // the final merge to a single community may still improve Q
        let (_, _, dq) = best_merge(&e, &a, &alive);
        if dq > 0.0 {
            best_owner = vec![0; n];
            best_q = q + dq;
            q_trace.push(best_q);
        }
    }

    let best_labels = first_appearance(&best_owner);
    let n_communities = best_labels.iter().max().map_or(0, |&l| l + 1);
    let partition = Partition::new(owner.iter().map(|&o| if o == owner[0] { Side::X } else { Side::Y }).collect());
    let modularity_two_sides = modularity(g, &partition)?;
    // recompute from scratch to avoid drift in the accumulated sum
    let modularity = modularity_of_labels(g, &best_labels)?;
    debug_assert!((modularity - best_q).abs() < 1e-9);
    Ok(CommunityDetection {
        partition,
        best_labels,
        n_communities,
        modularity,
        modularity_two_sides,
        q_trace,
    })
}

/// Best merge among live communities: adjacent pairs by `ΔQ`, or, when no
/// two communities share an edge, the non-adjacent pair with the smallest
/// `a_i a_j`.
fn best_merge(e: &[BTreeMap<usize, f64>], a: &[f64], alive: &[bool]) -> (usize, usize, f64) {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..e.len() {
        if !alive[i] {
            continue;
        }
        for (&j, &eij) in e[i].range(i + 1..) {
            let dq = 2.0 * (eij - a[i] * a[j]);
            if best.is_none_or(|(_, _, b)| dq > b) {
                best = Some((i, j, dq));
            }
        }
    }
    if let Some(b) = best {
        return b;
    }
    let live: Vec<usize> = (0..a.len()).filter(|&i| alive[i]).collect();
    let mut pick = (live[0], live[1], f64::NEG_INFINITY);
    for (x, &i) in live.iter().enumerate() {
        for &j in &live[x + 1..] {
            let dq = -2.0 * a[i] * a[j];
            if dq > pick.2 {
                pick = (i, j, dq);
            }
        }
    }
    pick
}

fn first_appearance(owner: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    owner
        .iter()
        .map(|&o| {
            let next = map.len();
            *map.entry(o).or_insert(next)
        })
        .collect()
}

/// Two-way partition from [`greedy_modularity`].
pub fn detect_communities(g: &InteractionGraph) -> Result<Partition> {
    Ok(greedy_modularity(g)?.partition)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwcConfig {
    /// Authoritative nodes per side. `None` uses `max(1, ⌈5% of side size⌉)`.
    pub k_authoritative: Option<usize>,
    pub walks_per_side: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for RwcConfig {
    fn default() -> Self {
        Self {
            k_authoritative: None,
            walks_per_side: 10_000,
            max_steps: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwcResult {
    pub rwc: f64,
    pub p_xx: f64,
    pub p_xy: f64,
    pub p_yx: f64,
    pub p_yy: f64,
    pub k_x: usize,
    pub k_y: usize,
    /// Walks restarted because they exceeded `max_steps` or started where no
    /// authoritative node is reachable.
    pub resampled_walks: u64,
}

/// Random-walk controversy of a two-sided partition.
///
/// Walks start at uniformly drawn non-authoritative nodes of a side, move to
/// weight-proportional random neighbors, and stop at the first authoritative
/// node of either side. `RWC = P_XX·P_YY − P_XY·P_YX`, where `P_AB` is the
/// fraction of walks from `A` ending on `B`.
pub fn rwc(g: &InteractionGraph, p: &Partition, cfg: &RwcConfig) -> Result<RwcResult> {
    if p.len() != g.n_nodes() {
        return Err(Error::Inconsistent(format!(
            "partition covers {} nodes, graph has {}",
            p.len(),
            g.n_nodes()
        )));
    }
    if cfg.walks_per_side == 0 || cfg.max_steps == 0 {
        return Err(Error::InvalidConfig("walks_per_side and max_steps must be positive".into()));
    }
    if cfg.k_authoritative == Some(0) {
        return Err(Error::InvalidConfig("k_authoritative must be at least 1".into()));
    }

    let mut authority: Vec<Option<Side>> = vec![None; g.n_nodes()];
    let mut starts = [Vec::new(), Vec::new()];
    let mut ks = [0; 2];
    for side in [Side::X, Side::Y] {
        let members = p.members(side);
        if members.is_empty() {
            return Err(Error::Degenerate(format!("side {side:?} is empty")));
        }
        let k = cfg
            .k_authoritative
            .unwrap_or_else(|| ((members.len() as f64 * 0.05).ceil() as usize).max(1));
        if k >= members.len() {
            return Err(Error::Degenerate(format!(
                "side {side:?} has {} nodes, leaving none to start walks from {k} authoritative",
                members.len()
            )));
        }
        let mut ranked = members;
        ranked.sort_by(|&u, &v| g.degree(v).total_cmp(&g.degree(u)).then(u.cmp(&v)));
        for &v in &ranked[..k] {
            authority[v] = Some(side);
        }
        let mut rest = ranked[k..].to_vec();
        rest.sort_unstable();
        starts[side.index()] = rest;
        ks[side.index()] = k;
    }

    let reachable = reaches_authority(g, &authority);
    let cumulative: Vec<Vec<f64>> = (0..g.n_nodes())
        .map(|v| {
            let mut acc = 0.0;
            g.neighbors(v)
                .iter()
                .map(|&(_, w)| {
                    acc += w;
                    acc
                })
                .collect()
        })
        .collect();
    let walker = Walker {
        g,
        authority: &authority,
        reachable: &reachable,
        cumulative: &cumulative,
        max_steps: cfg.max_steps,
        budget: cfg.walks_per_side.saturating_mul(10) as u64,
    };

    let mut fractions = [[0.0; 2]; 2];
    let mut resampled = 0u64;
    for side in [Side::X, Side::Y] {
        let from = &starts[side.index()];
        // key the RNG streams on the side's content, not its name, so that
        // relabelling the sides reproduces the same walks
        let key = from[0] as u64;
        let outcomes = (0..cfg.walks_per_side)
            .into_par_iter()
            .map(|w| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, key, w as u64));
                walker.walk(from, &mut rng)
            })
            .collect::<Vec<_>>();
        let mut ends = [0u64; 2];
        for o in outcomes {
            let (end, retries) = o?;
            ends[end.index()] += 1;
            resampled += retries;
        }
        for t in 0..2 {
            fractions[side.index()][t] = ends[t] as f64 / cfg.walks_per_side as f64;
        }
    }

    let [[p_xx, p_xy], [p_yx, p_yy]] = fractions;
    Ok(RwcResult {
        rwc: p_xx * p_yy - p_xy * p_yx,
        p_xx,
        p_xy,
        p_yx,
        p_yy,
        k_x: ks[0],
        k_y: ks[1],
        resampled_walks: resampled,
    })
}

/// Nodes from which some authoritative node is reachable.
fn reaches_authority(g: &InteractionGraph, authority: &[Option<Side>]) -> Vec<bool> {
    let mut seen: Vec<bool> = authority.iter().map(|a| a.is_some()).collect();
    let mut stack: Vec<NodeId> = (0..g.n_nodes()).filter(|&v| seen[v]).collect();
    while let Some(v) = stack.pop() {
        for &(u, _) in g.neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

struct Walker<'a> {
    g: &'a InteractionGraph,
    authority: &'a [Option<Side>],
    reachable: &'a [bool],
    cumulative: &'a [Vec<f64>],
    max_steps: usize,
    budget: u64,
}

impl Walker<'_> {
    /// Side of the authoritative node where the walk ended, and how many
    /// attempts were discarded first.
    fn walk(&self, from: &[NodeId], rng: &mut ChaCha8Rng) -> Result<(Side, u64)> {
        let mut retries = 0u64;
        loop {
            let mut v = from[rng.random_range(0..from.len())];
            if self.reachable[v] {
                for _ in 0..self.max_steps {
                    let cum = &self.cumulative[v];
                    let total = *cum.last().expect("reachable nodes have neighbors");
                    let r = rng.random::<f64>() * total;
                    let idx = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
                    v = self.g.neighbors(v)[idx].0;
                    if let Some(side) = self.authority[v] {
                        return Ok((side, retries));
                    }
                }
            }
            retries += 1;
            if retries > self.budget {
                return Err(Error::Degenerate(format!(
                    "random walk gave up after {retries} attempts without reaching an authoritative node"
                )));
            }
        }
    }
}
