//! The neural scorer: item embeddings, gated graph propagation over the
//! typed session graph, intra-/inter-behavior attention, long-term
//! preference readout and full-catalog scoring.
//!
//! All computation happens on an [`autodiff::Tape`], so both inference and
//! training share one forward path.

pub mod checkpoint;

use std::collections::BTreeMap;

use rand::Rng;

use crate::autodiff::{softmax_value, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::eval::ScoreVector;
use crate::graph::{build_session_graph, HeteroSessionGraph};
use crate::ingest::{Behavior, Session};

/// Structural hyperparameters the tensor shapes depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_items: usize,
    pub n_types: usize,
    /// Embedding width d.
    pub d: usize,
    /// Gated propagation steps.
    pub steps: usize,
}

impl ModelConfig {
    pub fn n_relations(&self) -> usize {
        self.n_types * self.n_types
    }

    /// Width of the concatenated relation messages feeding the gates.
    pub fn message_width(&self) -> usize {
        2 * self.n_relations() * self.d
    }

    /// Every tensor key with its shape, in canonical order.
    pub fn shapes(&self) -> Vec<(String, (usize, usize))> {
        let d = self.d;
        let dp = self.message_width();
        let mut out = vec![("embedding".to_string(), (self.n_items, d))];
        for r in 0..self.n_relations() {
            for dir in ["out", "in"] {
                out.push((format!("msg.{dir}.r{r}.w"), (d, d)));
                out.push((format!("msg.{dir}.r{r}.b"), (1, d)));
            }
        }
        for gate in ["update", "reset", "cand"] {
            out.push((format!("gate.{gate}.w"), (dp, d)));
            out.push((format!("gate.{gate}.u"), (d, d)));
            out.push((format!("gate.{gate}.b"), (1, d)));
        }
        for t in 0..self.n_types {
            out.push((format!("attn.intra.t{t}.w1"), (d, d)));
            out.push((format!("attn.intra.t{t}.w2"), (d, d)));
            out.push((format!("attn.intra.t{t}.v"), (d, 1)));
            out.push((format!("attn.intra.t{t}.b"), (1, d)));
        }
        for (name, shape) in [
            ("attn.inter.w3", (d, d)),
            ("attn.inter.w4", (d, d)),
            ("attn.inter.v", (d, 1)),
            ("attn.inter.b", (1, d)),
            ("attn.long.w5", (d, d)),
            ("attn.long.w6", (d, d)),
            ("attn.long.v", (d, 1)),
            ("attn.long.b", (1, d)),
        ] {
            out.push((name.to_string(), shape));
        }
        out.push(("out.w".to_string(), (2 * d, d)));
        out
    }
}

/// Named parameter tensors plus the config they were shaped for.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, Matrix>,
}

impl ModelParams {
    /// Initialize every tensor uniformly in [-1/sqrt(d), 1/sqrt(d)].
    pub fn init<R: Rng>(config: ModelConfig, rng: &mut R) -> ModelParams {
        let bound = 1.0 / (config.d as f64).sqrt();
        let mut tensors = BTreeMap::new();
        for (name, (rows, cols)) in config.shapes() {
            let t = Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound));
            tensors.insert(name, t);
        }
        ModelParams { config, tensors }
    }

    pub fn get(&self, name: &str) -> &Matrix {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter tensor `{name}`"))
    }

    pub fn embedding(&self) -> &Matrix {
        self.get("embedding")
    }

    /// Check that tensors exactly match the declared shapes and are finite.
    pub fn validate(&self) -> Result<()> {
        let shapes = self.config.shapes();
        if shapes.len() != self.tensors.len() {
            return Err(Error::data(format!(
                "parameter count mismatch: expected {}, got {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for (name, shape) in shapes {
            let t = self
                .tensors
                .get(&name)
                .ok_or_else(|| Error::data(format!("missing parameter tensor `{name}`")))?;
            if t.dim() != shape {
                return Err(Error::data(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    t.dim(),
                    shape
                )));
            }
            if !t.iter().all(|x| x.is_finite()) {
                return Err(Error::numeric(format!("tensor `{name}` contains non-finite values")));
            }
        }
        Ok(())
    }

    /// Squared L2 norm over all tensors, accumulated in key order.
    pub fn squared_norm(&self) -> f64 {
        self.tensors
            .values()
            .map(|t| t.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }
}

/// Dropout configuration for one forward pass.
pub enum DropoutMode<'a> {
    Off,
    /// Inverted dropout on the node states after propagation.
    Sample { rate: f64, rng: &'a mut dyn rand::RngCore },
}

/// Node states after propagation, with the graph they belong to.
#[derive(Debug)]
pub struct NodeStates<'g> {
    pub h: Var,
    pub graph: &'g HeteroSessionGraph,
}

/// Per-type interest with its attention weights.
pub struct TypeInterest {
    pub btype: usize,
    pub alpha: Var,
    pub q: Var,
}

/// Everything the forward pass produces, for inspection and scoring.
pub struct ForwardOut {
    pub logits: Var,
    pub interests: Vec<TypeInterest>,
    pub inter_alpha: Var,
    pub current_interest: Var,
    pub long_alpha: Var,
    pub long_term: Var,
    pub representation: Var,
}

/// Gather embedding rows for the given items. Panics on an out-of-range
/// index: that is a caller logic error, not an input condition.
pub fn lookup_embeddings(tape: &mut Tape, embedding: Var, items: &[usize]) -> Var {
    let n = tape.value(embedding).nrows();
    for &i in items {
        assert!(i < n, "item index {i} out of range for embedding table of {n}");
    }
    tape.gather_rows(embedding, items)
}

/// One forward evaluation of a session prefix against bound parameters.
pub struct SessionForward<'p> {
    pub params: &'p ModelParams,
    pub graph: HeteroSessionGraph,
    behaviors: Vec<Behavior>,
}

impl<'p> SessionForward<'p> {
    pub fn new(params: &'p ModelParams, prefix: &[Behavior]) -> SessionForward<'p> {
        assert!(!prefix.is_empty(), "session prefix must be nonempty");
        let session = Session {
            session_id: String::new(),
            behaviors: prefix.to_vec(),
        };
        let graph = build_session_graph(&session, params.config.n_types);
        SessionForward {
            params,
            graph,
            behaviors: prefix.to_vec(),
        }
    }

    fn bind(&self, tape: &mut Tape, name: &str) -> Var {
        tape.param(name, self.params.get(name))
    }

    /// Gated propagation over the typed adjacency for `steps` rounds.
    ///
    /// Each node's message is the column-concatenation, over every
    /// (relation, direction) pair, of the normalized-adjacency mix of
    /// neighbor states pushed through that relation's projection; a gated
    /// recurrent update then mixes the message into the node state.
    pub fn ggnn_propagate(&self, tape: &mut Tape, steps: usize) -> Result<NodeStates<'_>> {
        if steps == 0 {
            return Err(Error::config("propagation steps must be >= 1".to_string()));
        }
        let cfg = &self.params.config;
        let embedding = self.bind(tape, "embedding");
        let mut h = lookup_embeddings(tape, embedding, &self.graph.nodes);
        let n = self.graph.n_nodes();

        let present: std::collections::BTreeSet<usize> =
            self.graph.present_relations().into_iter().collect();

        for _ in 0..steps {
            let mut blocks = Vec::with_capacity(2 * cfg.n_relations());
            for r in 0..cfg.n_relations() {
                for (dir, adj) in [("out", &self.graph.adj_out), ("in", &self.graph.adj_in)] {
                    let w = self.bind(tape, &format!("msg.{dir}.r{r}.w"));
                    let b = self.bind(tape, &format!("msg.{dir}.r{r}.b"));
                    if present.contains(&r) {
                        let a = tape.constant(adj[r].clone());
                        let mixed = tape.matmul(a, h);
                        let projected = tape.matmul(mixed, w);
                        blocks.push(tape.add_row(projected, b));
                    } else {
                        // No edges in this relation: the adjacency mix is
                        // zero, leaving just the bias.
                        let _ = w;
                        blocks.push(tape.broadcast_rows(b, n));
                    }
                }
            }
            let a = tape.concat_cols(&blocks);

            let gate = |tape: &mut Tape, name: &str, input: Var, state: Var| {
                let w = tape.param(&format!("gate.{name}.w"), self.params.get(&format!("gate.{name}.w")));
                let u = tape.param(&format!("gate.{name}.u"), self.params.get(&format!("gate.{name}.u")));
                let b = tape.param(&format!("gate.{name}.b"), self.params.get(&format!("gate.{name}.b")));
                let aw = tape.matmul(input, w);
                let hu = tape.matmul(state, u);
                let pre = tape.add(aw, hu);
                tape.add_row(pre, b)
            };

            let z_pre = gate(tape, "update", a, h);
            let z = tape.sigmoid(z_pre);
            let r_pre = gate(tape, "reset", a, h);
            let r = tape.sigmoid(r_pre);
            let rh = tape.mul(r, h);
            let c_pre = gate(tape, "cand", a, rh);
            let c = tape.tanh(c_pre);

            let keep = tape.one_minus(z);
            let kept = tape.mul(keep, h);
            let new = tape.mul(z, c);
            h = tape.add(kept, new);
        }

        Ok(NodeStates {
            h,
            graph: &self.graph,
        })
    }

    /// Apply inverted dropout to node states (training only).
    pub fn apply_dropout<'g>(
        &self,
        tape: &mut Tape,
        states: NodeStates<'g>,
        mode: &mut DropoutMode<'_>,
    ) -> NodeStates<'g> {
        match mode {
            DropoutMode::Off => states,
            DropoutMode::Sample { rate, rng } => {
                let dim = tape.value(states.h).dim();
                let keep = 1.0 - *rate;
                let mask = Matrix::from_shape_fn(dim, |_| {
                    if rng.random::<f64>() < *rate {
                        0.0
                    } else {
                        1.0 / keep
                    }
                });
                let mask = tape.constant(mask);
                let h = tape.mul(states.h, mask);
                NodeStates {
                    h,
                    graph: states.graph,
                }
            }
        }
    }

    /// State of the node carrying the most recent behavior.
    pub fn anchor(&self, tape: &mut Tape, states: &NodeStates<'_>) -> Var {
        let node = *states.graph.behavior_to_node.last().unwrap();
        tape.row(states.h, node)
    }

    /// Additive attention with a sigmoid nonlinearity over the given node
    /// rows, anchored on `anchor`. Parameter names come in the order
    /// [anchor projection, row projection, score vector, bias].
    /// Returns (weights, weighted sum).
    fn attend(&self, tape: &mut Tape, anchor: Var, rows: Var, names: [&str; 4]) -> (Var, Var) {
        let m = tape.value(rows).nrows();
        let w1 = self.bind(tape, names[0]);
        let w2 = self.bind(tape, names[1]);
        let v = self.bind(tape, names[2]);
        let b = self.bind(tape, names[3]);
        let anchor_part = tape.matmul(anchor, w1);
        let anchor_wide = tape.broadcast_rows(anchor_part, m);
        let row_part = tape.matmul(rows, w2);
        let pre = tape.add(anchor_wide, row_part);
        let pre = tape.add_row(pre, b);
        let act = tape.sigmoid(pre);
        let scores = tape.matmul(act, v); // (m x 1)
        let alpha = tape.softmax(scores);
        let alpha_row = tape.transpose(alpha);
        let mix = tape.matmul(alpha_row, rows); // (1 x d)
        (alpha, mix)
    }

    /// Attention over the behaviors of one type; `None` when the session has
    /// no behavior of that type (the type is masked out downstream).
    pub fn intra_behavior_attention(
        &self,
        tape: &mut Tape,
        states: &NodeStates<'_>,
        anchor: Var,
        btype: usize,
    ) -> Option<TypeInterest> {
        let positions: Vec<usize> = self
            .behaviors
            .iter()
            .enumerate()
            .filter(|(_, b)| b.btype == btype)
            .map(|(t, _)| states.graph.behavior_to_node[t])
            .collect();
        if positions.is_empty() {
            return None;
        }
        let rows = tape.gather_rows(states.h, &positions);
        let (alpha, q) = self.attend(
            tape,
            anchor,
            rows,
            [
                &format!("attn.intra.t{btype}.w1"),
                &format!("attn.intra.t{btype}.w2"),
                &format!("attn.intra.t{btype}.v"),
                &format!("attn.intra.t{btype}.b"),
            ],
        );
        Some(TypeInterest { btype, alpha, q })
    }

    /// Attention over the present per-type interests; absent types carry no
    /// mass because they are never stacked.
    pub fn inter_behavior_attention(
        &self,
        tape: &mut Tape,
        anchor: Var,
        interests: &[TypeInterest],
    ) -> (Var, Var) {
        assert!(!interests.is_empty(), "at least one behavior type must be present");
        let qs: Vec<Var> = interests.iter().map(|i| i.q).collect();
        let stacked = tape.stack_rows(&qs);
        self.attend(
            tape,
            anchor,
            stacked,
            ["attn.inter.w3", "attn.inter.w4", "attn.inter.v", "attn.inter.b"],
        )
    }

    /// Soft attention over all behaviors regardless of type.
    pub fn long_term_preference(
        &self,
        tape: &mut Tape,
        states: &NodeStates<'_>,
        anchor: Var,
    ) -> (Var, Var) {
        let positions: Vec<usize> = states.graph.behavior_to_node.clone();
        let rows = tape.gather_rows(states.h, &positions);
        self.attend(
            tape,
            anchor,
            rows,
            ["attn.long.w5", "attn.long.w6", "attn.long.v", "attn.long.b"],
        )
    }

    /// Project the concatenated (current interest, long-term preference)
    /// pair down to the session representation.
    pub fn session_representation(&self, tape: &mut Tape, current: Var, long_term: Var) -> Var {
        let w = self.bind(tape, "out.w");
        let cat = tape.concat_cols(&[current, long_term]);
        tape.matmul(cat, w)
    }

    /// Dot-product logits of the representation against every item
    /// embedding.
    pub fn score_items(&self, tape: &mut Tape, representation: Var) -> Var {
        let embedding = self.bind(tape, "embedding");
        tape.matmul_transb(representation, embedding)
    }

    /// Full forward pass: propagate, attend per type, cross types, read the
    /// long-term preference and score the catalog.
    pub fn run(&self, tape: &mut Tape, mut dropout: DropoutMode<'_>) -> Result<ForwardOut> {
        let cfg = &self.params.config;
        let states = self.ggnn_propagate(tape, cfg.steps)?;
        let states = self.apply_dropout(tape, states, &mut dropout);
        let anchor = self.anchor(tape, &states);

        let mut interests = Vec::new();
        for btype in 0..cfg.n_types {
            if let Some(interest) = self.intra_behavior_attention(tape, &states, anchor, btype) {
                interests.push(interest);
            }
        }
        let (inter_alpha, current_interest) =
            self.inter_behavior_attention(tape, anchor, &interests);
        let (long_alpha, long_term) = self.long_term_preference(tape, &states, anchor);
        let representation = self.session_representation(tape, current_interest, long_term);
        let logits = self.score_items(tape, representation);

        Ok(ForwardOut {
            logits,
            interests,
            inter_alpha,
            current_interest,
            long_alpha,
            long_term,
            representation,
        })
    }
}

/// Deterministic inference: forward in eval mode, softmax over the catalog.
pub fn predict(params: &ModelParams, prefix: &[Behavior]) -> Result<ScoreVector> {
    if prefix.is_empty() {
        return Err(Error::data("cannot score an empty prefix".to_string()));
    }
    let mut tape = Tape::new();
    let fwd = SessionForward::new(params, prefix);
    let out = fwd.run(&mut tape, DropoutMode::Off)?;
    let logits = tape.value(out.logits);
    if !logits.iter().all(|x| x.is_finite()) {
        return Err(Error::numeric("non-finite logits during scoring".to_string()));
    }
    let probs = softmax_value(logits);
    Ok(ScoreVector(probs.row(0).to_vec()))
}
