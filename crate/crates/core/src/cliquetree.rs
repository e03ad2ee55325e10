//! Strongly triangulated clique trees with designated cliques for CD CPDs.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Network, VarId};

/// Undirected adjacency over all variables of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoralGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl MoralGraph {
    pub fn with_nodes(n: usize) -> Self {
        MoralGraph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn add_edge(&mut self, a: VarId, b: VarId) {
        if a != b {
            self.adj[a.0].insert(b.0);
            self.adj[b.0].insert(a.0);
        }
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.adj[a.0].contains(&b.0)
    }

    pub fn neighbors(&self, v: VarId) -> impl Iterator<Item = VarId> + '_ {
        self.adj[v.0].iter().map(|&i| VarId(i))
    }

    /// Each edge once, as `(low, high)`.
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        let mut out = Vec::new();
        for (a, nbrs) in self.adj.iter().enumerate() {
            for &b in nbrs.range(a + 1..) {
                out.push((VarId(a), VarId(b)));
            }
        }
        out
    }

    /// Connects every pair in `vars`.
    pub fn add_clique(&mut self, vars: &[VarId]) {
        for (i, &a) in vars.iter().enumerate() {
            for &b in &vars[i + 1..] {
                self.add_edge(a, b);
            }
        }
    }
}

/// Parent-child edges plus co-parent edges for every family, CD families included.
pub fn moralize(net: &Network) -> MoralGraph {
    let mut g = MoralGraph::with_nodes(net.len());
    for cpd in net.cpds() {
        g.add_clique(&cpd.family());
    }
    g
}

/// Connected components of the continuous-only induced subgraph, each sorted,
/// ordered by their smallest member.
pub fn continuous_components(net: &Network, g: &MoralGraph) -> Vec<Vec<VarId>> {
    let mut seen = vec![false; net.len()];
    let mut out = Vec::new();
    for start in net.ids() {
        if net.is_discrete(start) || seen[start.0] {
            continue;
        }
        let mut comp = vec![start];
        seen[start.0] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for u in g.neighbors(v) {
                if !net.is_discrete(u) && !seen[u.0] {
                    seen[u.0] = true;
                    comp.push(u);
                    queue.push_back(u);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

/// Discrete variables adjacent to some member of `component`.
pub fn discrete_neighbors(net: &Network, g: &MoralGraph, component: &[VarId]) -> Vec<VarId> {
    let set: BTreeSet<VarId> = component
        .iter()
        .flat_map(|&v| g.neighbors(v))
        .filter(|&u| net.is_discrete(u))
        .collect();
    set.into_iter().collect()
}

/// Continuous variables first, then discrete; min-fill within each block, lowest id on ties.
pub fn strong_elimination_order(net: &Network, g: &MoralGraph) -> Vec<VarId> {
    eliminate(net, g).0
}

/// Order plus the elimination clique of each step.
fn eliminate(net: &Network, g: &MoralGraph) -> (Vec<VarId>, Vec<Vec<VarId>>) {
    let mut adj = g.adj.clone();
    let mut alive: BTreeSet<usize> = (0..net.len()).collect();
    let mut order = Vec::with_capacity(net.len());
    let mut cliques = Vec::with_capacity(net.len());
    for discrete_block in [false, true] {
        loop {
            let best = alive
                .iter()
                .copied()
                .filter(|&v| net.is_discrete(VarId(v)) == discrete_block)
                .min_by_key(|&v| (fill_in(&adj, v), v));
            let Some(v) = best else { break };
            let nbrs: Vec<usize> = adj[v].iter().copied().collect();
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
            for &a in &nbrs {
                adj[a].remove(&v);
            }
            alive.remove(&v);
            let mut clique: Vec<VarId> = nbrs.iter().map(|&i| VarId(i)).collect();
            clique.push(VarId(v));
            clique.sort();
            order.push(VarId(v));
            cliques.push(clique);
        }
    }
    (order, cliques)
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nbrs: Vec<usize> = adj[v].iter().copied().collect();
    let mut count = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !adj[a].contains(&b) {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeMode {
    /// Designated clique holds the whole continuous component and its discrete neighbors.
    #[default]
    Exact,
    /// Designated clique holds the CD CPDs' continuous parents and their discrete neighbors.
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeLimits {
    pub max_entries: usize,
    pub max_continuous: usize,
}

impl Default for TreeLimits {
    fn default() -> Self {
        TreeLimits {
            max_entries: 1 << 14,
            max_continuous: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clique {
    /// Sorted by id.
    pub vars: Vec<VarId>,
    pub discrete: Vec<VarId>,
    pub continuous: Vec<VarId>,
    /// Indices of the non-CD CPDs initialized here.
    pub cpds: Vec<usize>,
}

impl Clique {
    pub fn contains(&self, v: VarId) -> bool {
        self.vars.binary_search(&v).is_ok()
    }

    pub fn contains_all(&self, vs: &[VarId]) -> bool {
        vs.iter().all(|&v| self.contains(v))
    }
}

/// A continuous connected component together with its CD bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub continuous: Vec<VarId>,
    pub discrete_neighbors: Vec<VarId>,
    /// CD CPDs whose continuous parents lie in this component, in declaration order.
    pub cd_cpds: Vec<usize>,
    /// Set the designated clique must contain.
    pub required: Vec<VarId>,
    pub designated: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueTree {
    pub cliques: Vec<Clique>,
    /// Parent of each clique toward the strong root.
    pub parent: Vec<Option<usize>>,
    /// Separator between each clique and its parent.
    pub separator: Vec<Vec<VarId>>,
    pub root: usize,
    pub components: Vec<Component>,
    pub elimination_order: Vec<VarId>,
    pub mode: TreeMode,
}

fn sorted_union(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    let s: BTreeSet<VarId> = a.iter().chain(b).copied().collect();
    s.into_iter().collect()
}

fn is_subset(a: &[VarId], b: &[VarId]) -> bool {
    a.iter().all(|v| b.binary_search(v).is_ok())
}

fn intersect(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    a.iter().copied().filter(|v| b.binary_search(v).is_ok()).collect()
}

pub fn build_clique_tree(net: &Network, mode: TreeMode) -> Result<CliqueTree> {
    build_clique_tree_with(net, mode, TreeLimits::default())
}

pub fn build_clique_tree_with(net: &Network, mode: TreeMode, limits: TreeLimits) -> Result<CliqueTree> {
    let moral = moralize(net);
    let mut components: Vec<Component> = continuous_components(net, &moral)
        .into_iter()
        .map(|c| {
            let dn = discrete_neighbors(net, &moral, &c);
            Component {
                continuous: c,
                discrete_neighbors: dn,
                cd_cpds: vec![],
                required: vec![],
                designated: None,
            }
        })
        .collect();
    for ci in net.cd_cpds() {
        let cpd = &net.cpds()[ci];
        let first = cpd.continuous_parents()[0];
        let comp = components
            .iter_mut()
            .find(|c| c.continuous.binary_search(&first).is_ok())
            .expect("every continuous variable is in a component");
        comp.cd_cpds.push(ci);
    }

    let mut seeded = moral.clone();
    for comp in components.iter_mut().filter(|c| !c.cd_cpds.is_empty()) {
        comp.required = match mode {
            TreeMode::Exact => sorted_union(&comp.continuous, &comp.discrete_neighbors),
            TreeMode::Approximate => {
                let parents: BTreeSet<VarId> = comp
                    .cd_cpds
                    .iter()
                    .flat_map(|&ci| net.cpds()[ci].continuous_parents().to_vec())
                    .collect();
                let parents: Vec<VarId> = parents.into_iter().collect();
                let dn = discrete_neighbors(net, &moral, &parents);
                sorted_union(&parents, &dn)
            }
        };
        seeded.add_clique(&comp.required);
    }

    let (order, elim_cliques) = eliminate(net, &seeded);
    let n = order.len();
    let mut pos = vec![0; net.len()];
    for (i, v) in order.iter().enumerate() {
        pos[v.0] = i;
    }

    // elimination tree: parent is the clique of the earliest-eliminated remaining neighbor
    let mut parent: Vec<Option<usize>> = (0..n)
        .map(|i| {
            elim_cliques[i]
                .iter()
                .filter(|v| **v != order[i])
                .map(|v| pos[v.0])
                .min()
        })
        .collect();
    let mut vars: Vec<Option<Vec<VarId>>> = elim_cliques.into_iter().map(Some).collect();

    // contract non-maximal cliques into a containing neighbor
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            let Some(ci) = vars[i].clone() else { continue };
            let mut target = None;
            if let Some(p) = parent[i] {
                if is_subset(&ci, vars[p].as_ref().unwrap()) {
                    target = Some(p);
                }
            }
            if target.is_none() {
                target = (0..n).find(|&k| {
                    parent[k] == Some(i) && is_subset(&ci, vars[k].as_ref().unwrap())
                });
            }
            let Some(t) = target else { continue };
            for k in 0..n {
                if k != t && parent[k] == Some(i) {
                    parent[k] = Some(t);
                }
            }
            if parent[i] != Some(t) {
                // t was a child of i and takes its place
                parent[t] = parent[i];
            }
            vars[i] = None;
            parent[i] = None;
            changed = true;
        }
    }

    let live: Vec<usize> = (0..n).filter(|&i| vars[i].is_some()).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, &i) in live.iter().enumerate() {
        new_index[i] = k;
    }
    let mut cliques: Vec<Clique> = live
        .iter()
        .map(|&i| {
            let vs = vars[i].clone().unwrap();
            Clique {
                discrete: vs.iter().copied().filter(|&v| net.is_discrete(v)).collect(),
                continuous: vs.iter().copied().filter(|&v| !net.is_discrete(v)).collect(),
                vars: vs,
                cpds: vec![],
            }
        })
        .collect();
    let mut tree_parent: Vec<Option<usize>> = live.iter().map(|&i| parent[i].map(|p| new_index[p])).collect();

    // the last-eliminated variable's clique is the strong root; other forest roots hang off it
    let last = *order.last().expect("network has variables");
    let root = (0..cliques.len())
        .rev()
        .find(|&k| tree_parent[k].is_none() && cliques[k].contains(last))
        .expect("root clique exists");
    for (k, p) in tree_parent.iter_mut().enumerate() {
        if p.is_none() && k != root {
            *p = Some(root);
        }
    }
    let separator: Vec<Vec<VarId>> = (0..cliques.len())
        .map(|k| match tree_parent[k] {
            Some(p) => intersect(&cliques[k].vars, &cliques[p].vars),
            None => vec![],
        })
        .collect();

    for c in &cliques {
        let entries: usize = c.discrete.iter().map(|&v| net.cardinality(v)).product();
        if entries > limits.max_entries || c.continuous.len() > limits.max_continuous {
            return Err(Error::TreeTooLarge {
                entries,
                continuous: c.continuous.len(),
                variables: net.names(&c.vars),
            });
        }
    }

    for comp in components.iter_mut().filter(|c| !c.cd_cpds.is_empty()) {
        comp.designated = cliques.iter().position(|c| c.contains_all(&comp.required));
        debug_assert!(comp.designated.is_some());
    }
    for (ci, cpd) in net.cpds().iter().enumerate() {
        if cpd.is_cd() {
            continue;
        }
        let mut family = cpd.family();
        family.sort();
        let best = (0..cliques.len())
            .filter(|&k| cliques[k].contains_all(&family))
            .min_by_key(|&k| (cliques[k].vars.len(), k))
            .expect("triangulation preserves families");
        cliques[best].cpds.push(ci);
    }

    Ok(CliqueTree {
        cliques,
        parent: tree_parent,
        separator,
        root,
        components,
        elimination_order: order,
        mode,
    })
}

impl CliqueTree {
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn children(&self, k: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parent[c] == Some(k)).collect()
    }

    /// Cliques with every child before its parent; the root comes last.
    pub fn collect_order(&self) -> Vec<usize> {
        let mut out = self.distribute_order();
        out.reverse();
        out
    }

    /// Root first, then breadth-first toward the leaves.
    pub fn distribute_order(&self) -> Vec<usize> {
        let mut out = vec![self.root];
        let mut i = 0;
        while i < out.len() {
            let k = out[i];
            out.extend(self.children(k));
            i += 1;
        }
        out
    }

    /// Smallest clique containing all of `vars` (lowest index on ties).
    pub fn smallest_containing(&self, vars: &[VarId]) -> Option<usize> {
        (0..self.len())
            .filter(|&k| self.cliques[k].contains_all(vars))
            .min_by_key(|&k| (self.cliques[k].vars.len(), k))
    }

    /// First clique containing `v`.
    pub fn first_containing(&self, v: VarId) -> Option<usize> {
        (0..self.len()).find(|&k| self.cliques[k].contains(v))
    }

    /// Designated clique of the component holding CD CPD `cpd`.
    pub fn designated_for(&self, cpd: usize) -> Option<usize> {
        self.components
            .iter()
            .find(|c| c.cd_cpds.contains(&cpd))
            .and_then(|c| c.designated)
    }

    /// For every variable, the cliques containing it form a connected subtree.
    pub fn has_running_intersection(&self, n_vars: usize) -> bool {
        (0..n_vars).all(|v| {
            let v = VarId(v);
            let holders: Vec<usize> = (0..self.len()).filter(|&k| self.cliques[k].contains(v)).collect();
            // a subtree has exactly one member whose parent is outside it
            holders.is_empty()
                || holders
                    .iter()
                    .filter(|&&k| match self.parent[k] {
                        Some(p) => !self.cliques[p].contains(v),
                        None => true,
                    })
                    .count()
                    == 1
        })
    }

    /// Every edge toward the root satisfies `C \ S` all continuous or `S` all discrete.
    pub fn is_strong(&self, net: &Network) -> bool {
        (0..self.len()).all(|k| {
            if self.parent[k].is_none() {
                return true;
            }
            let sep = &self.separator[k];
            let rest_continuous = self.cliques[k]
                .vars
                .iter()
                .filter(|v| sep.binary_search(v).is_err())
                .all(|&v| !net.is_discrete(v));
            rest_continuous || sep.iter().all(|&v| net.is_discrete(v))
        })
    }

    /// Text report of cliques, separators and designated cliques.
    pub fn dump(&self, net: &Network) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode: {:?}", self.mode);
        let order: Vec<&str> = self.elimination_order.iter().map(|&v| net.name(v)).collect();
        let _ = writeln!(s, "elimination order: {}", order.join(", "));
        let _ = writeln!(s, "strong root: C{}", self.root);
        for (k, c) in self.cliques.iter().enumerate() {
            let entries: usize = c.discrete.iter().map(|&v| net.cardinality(v)).product();
            let _ = writeln!(
                s,
                "C{k}: {{{}}}  ({} entries, {} continuous)",
                net.names(&c.vars),
                entries,
                c.continuous.len()
            );
            if let Some(p) = self.parent[k] {
                let _ = writeln!(s, "  parent C{p}, separator {{{}}}", net.names(&self.separator[k]));
            }
            if !c.cpds.is_empty() {
                let names: Vec<&str> = c.cpds.iter().map(|&i| net.name(net.cpds()[i].child())).collect();
                let _ = writeln!(s, "  cpds: {}", names.join(", "));
            }
        }
        for comp in &self.components {
            let _ = write!(s, "component {{{}}}", net.names(&comp.continuous));
            let _ = write!(s, " DN {{{}}}", net.names(&comp.discrete_neighbors));
            if let Some(d) = comp.designated {
                let names: Vec<&str> = comp.cd_cpds.iter().map(|&i| net.name(net.cpds()[i].child())).collect();
                let _ = write!(s, " designated C{d} for {}", names.join(", "));
            }
            let _ = writeln!(s);
        }
        s
    }
}
