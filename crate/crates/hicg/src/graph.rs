//! Per-session heterogeneous item graphs, the per-batch union graph, its
//! connected components, and contrastive pair sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::Session;

/// Directed multigraph over a session's unique items. Edges carry a relation
/// id derived from the behavior-type pair of the transition that produced
/// them; adjacency is kept per relation and direction, row-normalized.
#[derive(Debug, Clone)]
pub struct HeteroSessionGraph {
    pub n_types: usize,
    /// Item index per node, in order of first appearance.
    pub nodes: Vec<usize>,
    /// Behavior position -> node index.
    pub behavior_to_node: Vec<usize>,
    /// (src node, dst node, relation) -> multiplicity, before normalization.
    pub edge_mult: BTreeMap<(usize, usize, usize), u32>,
    /// Row-normalized outgoing adjacency per relation (rows = source node).
    pub adj_out: Vec<Array2<f64>>,
    /// Row-normalized incoming adjacency per relation (rows = target node,
    /// columns = source node).
    pub adj_in: Vec<Array2<f64>>,
}

impl HeteroSessionGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_relations(&self) -> usize {
        self.n_types * self.n_types
    }

    /// Relation id for a (source type, target type) transition.
    pub fn relation_id(n_types: usize, src_type: usize, dst_type: usize) -> usize {
        src_type * n_types + dst_type
    }

    /// Total edge multiplicity across relations; equals `s_T - 1` for the
    /// session the graph was built from.
    pub fn total_multiplicity(&self) -> u32 {
        self.edge_mult.values().sum()
    }

    /// Relations that actually carry at least one edge.
    pub fn present_relations(&self) -> Vec<usize> {
        let mut present: BTreeSet<usize> = BTreeSet::new();
        for &(_, _, r) in self.edge_mult.keys() {
            present.insert(r);
        }
        present.into_iter().collect()
    }

    /// Edge-list dump: `src_item<TAB>dst_item<TAB>src_type<TAB>dst_type<TAB>weight`
    /// with the outgoing-normalized weight.
    pub fn dump_edges(&self) -> String {
        let mut out = String::new();
        for &(src, dst, r) in self.edge_mult.keys() {
            let (src_type, dst_type) = (r / self.n_types, r % self.n_types);
            let w = self.adj_out[r][[src, dst]];
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                self.nodes[src], self.nodes[dst], src_type, dst_type, w
            ));
        }
        out
    }
}

/// Build the heterogeneous graph for one session.
///
/// Nodes are the unique items by first appearance. Every consecutive behavior
/// pair `(b_t, b_{t+1})` contributes a directed edge `item_t -> item_{t+1}`
/// under the relation `(type_t, type_{t+1})`; repeats accumulate
/// multiplicity. Each adjacency row is multiplicity divided by the node's
/// total multiplicity in that relation and direction.
pub fn build_session_graph(session: &Session, n_types: usize) -> HeteroSessionGraph {
    let mut nodes: Vec<usize> = Vec::new();
    let mut node_of_item: HashMap<usize, usize> = HashMap::new();
    let mut behavior_to_node = Vec::with_capacity(session.len());
    for b in &session.behaviors {
        let idx = *node_of_item.entry(b.item).or_insert_with(|| {
            nodes.push(b.item);
            nodes.len() - 1
        });
        behavior_to_node.push(idx);
    }

    let mut edge_mult: BTreeMap<(usize, usize, usize), u32> = BTreeMap::new();
    for w in session.behaviors.windows(2) {
        let src = node_of_item[&w[0].item];
        let dst = node_of_item[&w[1].item];
        let r = HeteroSessionGraph::relation_id(n_types, w[0].btype, w[1].btype);
        *edge_mult.entry((src, dst, r)).or_insert(0) += 1;
    }

    let n = nodes.len();
    let n_relations = n_types * n_types;
    let mut adj_out = vec![Array2::<f64>::zeros((n, n)); n_relations];
    let mut adj_in = vec![Array2::<f64>::zeros((n, n)); n_relations];
    for (&(src, dst, r), &m) in &edge_mult {
        adj_out[r][[src, dst]] += m as f64;
        adj_in[r][[dst, src]] += m as f64;
    }
    for adj in adj_out.iter_mut().chain(adj_in.iter_mut()) {
        for mut row in adj.rows_mut() {
            let total: f64 = row.sum();
            if total > 0.0 {
                row.mapv_inplace(|x| x / total);
            }
        }
    }

    HeteroSessionGraph {
        n_types,
        nodes,
        behavior_to_node,
        edge_mult,
        adj_out,
        adj_in,
    }
}

/// Type-erased undirected union of a batch's session graphs.
#[derive(Debug, Clone)]
pub struct UnionGraph {
    /// All items appearing in the batch, ascending.
    pub nodes: Vec<usize>,
    /// Undirected edges with endpoints ordered (min, max), deduplicated.
    pub edges: Vec<(usize, usize)>,
    /// Item -> component label (smallest item index in the component).
    pub component_id: HashMap<usize, usize>,
}

/// Disjoint partition of the batch's items into connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPartition {
    /// Each component's items ascending; components ordered by their label.
    pub components: Vec<Vec<usize>>,
    /// All items in the batch, ascending.
    pub batch_nodes: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Merge the batch's session graphs into one undirected, type-erased graph.
/// Sessions that share items end up in the same connected component.
pub fn build_union_graph(sessions: &[Session], n_types: usize) -> UnionGraph {
    let mut node_set: BTreeSet<usize> = BTreeSet::new();
    let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for s in sessions {
        let g = build_session_graph(s, n_types);
        for item in &g.nodes {
            node_set.insert(*item);
        }
        for &(src, dst, _) in g.edge_mult.keys() {
            let (a, b) = (g.nodes[src], g.nodes[dst]);
            edge_set.insert((a.min(b), a.max(b)));
        }
    }

    let nodes: Vec<usize> = node_set.into_iter().collect();
    let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut uf = UnionFind::new(nodes.len());
    for &(a, b) in &edge_set {
        uf.union(local[&a], local[&b]);
    }

    // Label each component by its smallest item index.
    let mut label_of_root: HashMap<usize, usize> = HashMap::new();
    for (i, &item) in nodes.iter().enumerate() {
        let root = uf.find(i);
        label_of_root
            .entry(root)
            .and_modify(|l| *l = (*l).min(item))
            .or_insert(item);
    }
    let mut component_id = HashMap::new();
    for (i, &item) in nodes.iter().enumerate() {
        component_id.insert(item, label_of_root[&uf.find(i)]);
    }

    UnionGraph {
        nodes,
        edges: edge_set.into_iter().collect(),
        component_id,
    }
}

/// Group the union graph's nodes into their connected components.
pub fn connected_components(g: &UnionGraph) -> ComponentPartition {
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &item in &g.nodes {
        by_label.entry(g.component_id[&item]).or_default().push(item);
    }
    ComponentPartition {
        components: by_label.into_values().collect(),
        batch_nodes: g.nodes.clone(),
    }
}

/// One contrastive entry: an anchor item, its sampled positive from the same
/// component, and the component's shared negative set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClEntry {
    pub anchor: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
    pub component: usize,
}

/// All contrastive entries sampled from one batch partition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CLBatch {
    pub entries: Vec<ClEntry>,
}

impl CLBatch {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All item indices referenced anywhere in the batch.
    pub fn referenced_items(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for e in &self.entries {
            out.insert(e.anchor);
            out.insert(e.positive);
            out.extend(e.negatives.iter().copied());
        }
        out
    }
}

/// Sample one uniform element from `pool` excluding `skip`.
fn sample_excluding<R: Rng>(pool: &[usize], skip: usize, rng: &mut R) -> usize {
    loop {
        let candidate = pool[rng.random_range(0..pool.len())];
        if candidate != skip {
            return candidate;
        }
    }
}

/// Partial Fisher-Yates: `k` distinct elements drawn without replacement.
fn sample_without_replacement<R: Rng>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let mut pool = pool.to_vec();
    let k = k.min(pool.len());
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Generate contrastive pairs from a component partition.
///
/// For each component `P` with at least two items and a nonempty complement:
/// every item of `P` becomes an anchor with one positive drawn uniformly from
/// `P` minus itself; the component shares a negative set of
/// `max(1, ceil(beta * |complement|))` items drawn without replacement from
/// the batch items outside `P`.
pub fn sample_cl_pairs<R: Rng>(
    partition: &ComponentPartition,
    beta: f64,
    rng: &mut R,
) -> Result<CLBatch> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config(format!(
            "negative-sampling ratio must satisfy 0 < beta <= 1, got {beta}"
        )));
    }
    let mut entries = Vec::new();
    for component in &partition.components {
        if component.len() < 2 {
            continue;
        }
        let in_component: BTreeSet<usize> = component.iter().copied().collect();
        let complement: Vec<usize> = partition
            .batch_nodes
            .iter()
            .copied()
            .filter(|i| !in_component.contains(i))
            .collect();
        if complement.is_empty() {
            continue;
        }
        let n_neg = ((beta * complement.len() as f64).ceil() as usize).max(1);
        let negatives = sample_without_replacement(&complement, n_neg, rng);
        let label = component[0];
        for &anchor in component {
            let positive = sample_excluding(component, anchor, rng);
            entries.push(ClEntry {
                anchor,
                positive,
                negatives: negatives.clone(),
                component: label,
            });
        }
    }
    Ok(CLBatch { entries })
}
