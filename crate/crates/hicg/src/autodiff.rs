//! Small reverse-mode automatic differentiation tape over `Array2<f64>`.
//!
//! Every tensor is a 2-d array; scalars are 1x1 and row vectors 1xN. A tape
//! is built per training batch: parameters are bound once by name, ops append
//! nodes, and `backward` walks the nodes in reverse accumulating gradients
//! into the parameter leaves. Evaluation order is fixed by construction
//! order, so results are bit-reproducible.

use std::collections::BTreeMap;

use ndarray::{concatenate, Array2, Axis};

pub type Matrix = Array2<f64>;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    /// a @ b
    MatMul(Var, Var),
    /// a @ b^T
    MatMulTransB(Var, Var),
    /// elementwise a + b, same shape
    Add(Var, Var),
    /// (n x d) + broadcast (1 x d)
    AddRow(Var, Var),
    /// elementwise a * b, same shape
    Mul(Var, Var),
    /// 1 - a
    OneMinus(Var),
    /// c * a
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    /// [a_1 | a_2 | ...] along columns; all inputs share the row count
    ConcatCols(Vec<Var>),
    /// stack row vectors into a matrix
    StackRows(Vec<Var>),
    /// rows `indices` of the input, duplicates allowed
    GatherRows(Var, Vec<usize>),
    /// repeat a (1 x d) row n times
    BroadcastRows(Var),
    Transpose(Var),
    /// softmax over a vector shaped (1 x n) or (n x 1)
    Softmax(Var),
    /// rows scaled to unit L2 norm (plus epsilon)
    NormalizeRows(Var),
    /// -log softmax(logits)[label] for a (1 x n) logits row, clamped at CAP
    NegLogSoftmax(Var, usize),
    /// elementwise sum of several same-shaped inputs
    AddN(Vec<Var>),
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Clamp for the cross-entropy term: -ln(1e-12).
pub const LOSS_CLAMP: f64 = 27.631021115928547;

const NORM_EPS: f64 = 1e-12;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.dim(), (1, 1), "expected scalar node");
        m[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant with no parameter binding.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Bind a named parameter once; repeated binds return the same node so
    /// gradient contributions accumulate in one place.
    pub fn param(&mut self, name: &str, value: &Matrix) -> Var {
        if let Some(&v) = self.params.get(name) {
            return v;
        }
        let v = self.push(Op::Leaf, value.clone());
        self.params.insert(name.to_string(), v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn matmul_transb(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(Op::MatMulTransB(a, b), value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim());
        let value = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), value)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1);
        assert_eq!(self.value(a).ncols(), self.value(row).ncols());
        let value = self.value(a) + self.value(row);
        self.push(Op::AddRow(a, row), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim());
        let value = self.value(a) * self.value(b);
        self.push(Op::Mul(a, b), value)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| 1.0 - x);
        self.push(Op::OneMinus(a), value)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).mapv(|x| c * x);
        self.push(Op::Scale(a, c), value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(stable_sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|&v| self.value(v).view()).collect();
        let value = concatenate(Axis(1), &views).expect("column concat shape mismatch");
        self.push(Op::ConcatCols(parts.to_vec()), value)
    }

    pub fn stack_rows(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty());
        let views: Vec<_> = rows.iter().map(|&v| self.value(v).view()).collect();
        let value = concatenate(Axis(0), &views).expect("row stack shape mismatch");
        self.push(Op::StackRows(rows.to_vec()), value)
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Var {
        let src = self.value(a);
        let mut value = Matrix::zeros((indices.len(), src.ncols()));
        for (out_row, &i) in indices.iter().enumerate() {
            value.row_mut(out_row).assign(&src.row(i));
        }
        self.push(Op::GatherRows(a, indices.to_vec()), value)
    }

    pub fn row(&mut self, a: Var, index: usize) -> Var {
        self.gather_rows(a, &[index])
    }

    pub fn broadcast_rows(&mut self, row: Var, n: usize) -> Var {
        assert_eq!(self.value(row).nrows(), 1);
        let src = self.value(row);
        let mut value = Matrix::zeros((n, src.ncols()));
        for mut r in value.rows_mut() {
            r.assign(&src.row(0));
        }
        self.push(Op::BroadcastRows(row), value)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(Op::Transpose(a), value)
    }

    /// Softmax over a vector-shaped node, with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let m = self.value(a);
        assert!(m.nrows() == 1 || m.ncols() == 1, "softmax wants a vector");
        let value = softmax_value(m);
        self.push(Op::Softmax(a), value)
    }

    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut value = src.clone();
        for mut row in value.rows_mut() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt() + NORM_EPS;
            row.mapv_inplace(|x| x / norm);
        }
        self.push(Op::NormalizeRows(a), value)
    }

    /// Cross-entropy of a (1 x n) logits row against `label`, computed as a
    /// fused log-softmax and clamped at [`LOSS_CLAMP`].
    pub fn neg_log_softmax(&mut self, logits: Var, label: usize) -> Var {
        let m = self.value(logits);
        assert_eq!(m.nrows(), 1);
        assert!(label < m.ncols());
        let raw = -log_softmax_pick(m, label);
        let value = Matrix::from_elem((1, 1), raw.min(LOSS_CLAMP));
        self.push(Op::NegLogSoftmax(logits, label), value)
    }

    pub fn add_n(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let mut value = self.value(parts[0]).clone();
        for &p in &parts[1..] {
            value += self.value(p);
        }
        self.push(Op::AddN(parts.to_vec()), value)
    }

    /// Mean of scalar nodes.
    pub fn mean_scalars(&mut self, parts: &[Var]) -> Var {
        let sum = self.add_n(parts);
        self.scale(sum, 1.0 / parts.len() as f64)
    }

    /// Run backpropagation from a scalar root. Returns the gradient of every
    /// bound parameter, keyed by name.
    pub fn backward(&self, root: Var) -> BTreeMap<String, Matrix> {
        assert_eq!(self.value(root).dim(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::from_elem((1, 1), 1.0));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g); // keep for parameter extraction
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = g.dot(&self.nodes[b.0].value.t());
                    let db = self.nodes[a.0].value.t().dot(&g);
                    accumulate(&mut grads, a.0, da);
                    accumulate(&mut grads, b.0, db);
                }
                Op::MatMulTransB(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = g.dot(&self.nodes[b.0].value);
                    let db = g.t().dot(&self.nodes[a.0].value);
                    accumulate(&mut grads, a.0, da);
                    accumulate(&mut grads, b.0, db);
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a.0, g.clone());
                    accumulate(&mut grads, b.0, g);
                }
                Op::AddRow(a, row) => {
                    let (a, row) = (*a, *row);
                    let drow = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, a.0, g);
                    accumulate(&mut grads, row.0, drow);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = &g * &self.nodes[b.0].value;
                    let db = &g * &self.nodes[a.0].value;
                    accumulate(&mut grads, a.0, da);
                    accumulate(&mut grads, b.0, db);
                }
                Op::OneMinus(a) => {
                    let a = *a;
                    accumulate(&mut grads, a.0, g.mapv(|x| -x));
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    accumulate(&mut grads, a.0, g.mapv(|x| c * x));
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    let y = &self.nodes[i].value;
                    let da = &g * &(y * &y.mapv(|v| 1.0 - v));
                    accumulate(&mut grads, a.0, da);
                }
                Op::Tanh(a) => {
                    let a = *a;
                    let y = &self.nodes[i].value;
                    let da = &g * &y.mapv(|v| 1.0 - v * v);
                    accumulate(&mut grads, a.0, da);
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let mut col = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.ncols();
                        let slice = g.slice(ndarray::s![.., col..col + w]).to_owned();
                        accumulate(&mut grads, p.0, slice);
                        col += w;
                    }
                }
                Op::StackRows(rows) => {
                    let rows = rows.clone();
                    let mut at = 0;
                    for r in rows {
                        let h = self.nodes[r.0].value.nrows();
                        let slice = g.slice(ndarray::s![at..at + h, ..]).to_owned();
                        accumulate(&mut grads, r.0, slice);
                        at += h;
                    }
                }
                Op::GatherRows(a, indices) => {
                    let a = *a;
                    let indices = indices.clone();
                    let mut da = Matrix::zeros(self.nodes[a.0].value.dim());
                    for (out_row, &src_row) in indices.iter().enumerate() {
                        let mut target = da.row_mut(src_row);
                        target += &g.row(out_row);
                    }
                    accumulate(&mut grads, a.0, da);
                }
                Op::BroadcastRows(row) => {
                    let row = *row;
                    let drow = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, row.0, drow);
                }
                Op::Transpose(a) => {
                    let a = *a;
                    accumulate(&mut grads, a.0, g.t().to_owned());
                }
                Op::Softmax(a) => {
                    let a = *a;
                    let y = &self.nodes[i].value;
                    let dot: f64 = (&g * y).sum();
                    let da = y * &g - y.mapv(|v| v * dot);
                    accumulate(&mut grads, a.0, da);
                }
                Op::NormalizeRows(a) => {
                    let a = *a;
                    let x = &self.nodes[a.0].value;
                    let mut da = Matrix::zeros(x.dim());
                    for r in 0..x.nrows() {
                        let xr = x.row(r);
                        let gr = g.row(r);
                        let norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let nu = norm + NORM_EPS;
                        let gx: f64 = gr.iter().zip(xr.iter()).map(|(a, b)| a * b).sum();
                        for c in 0..x.ncols() {
                            let mut v = gr[c] / nu;
                            if norm > 0.0 {
                                v -= xr[c] * gx / (nu * nu * norm);
                            }
                            da[[r, c]] = v;
                        }
                    }
                    accumulate(&mut grads, a.0, da);
                }
                Op::NegLogSoftmax(logits, label) => {
                    let (logits, label) = (*logits, *label);
                    let upstream = g[[0, 0]];
                    // Clamped loss has zero gradient.
                    let raw = -log_softmax_pick(&self.nodes[logits.0].value, label);
                    if raw < LOSS_CLAMP {
                        let mut da = softmax_value(&self.nodes[logits.0].value);
                        da[[0, label]] -= 1.0;
                        accumulate(&mut grads, logits.0, da.mapv(|x| x * upstream));
                    }
                }
                Op::AddN(parts) => {
                    let parts = parts.clone();
                    for p in parts {
                        accumulate(&mut grads, p.0, g.clone());
                    }
                }
            }
        }

        let mut out = BTreeMap::new();
        for (name, var) in &self.params {
            let g = grads[var.0]
                .take()
                .unwrap_or_else(|| Matrix::zeros(self.nodes[var.0].value.dim()));
            out.insert(name.clone(), g);
        }
        out
    }
}

fn accumulate(grads: &mut [Option<Matrix>], idx: usize, delta: Matrix) {
    match &mut grads[idx] {
        Some(g) => *g += &delta,
        slot @ None => *slot = Some(delta),
    }
}

pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of a vector-shaped matrix with max subtraction.
pub fn softmax_value(m: &Matrix) -> Matrix {
    let max = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = m.mapv(|x| (x - max).exp());
    let sum: f64 = exp.sum();
    exp.mapv(|x| x / sum)
}

fn log_softmax_pick(m: &Matrix, label: usize) -> f64 {
    let max = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
    m[[0, label]] - lse
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    /// Central finite differences of `f` w.r.t. the named parameter,
    /// evaluated entry by entry.
    fn finite_diff<F: Fn(&BTreeMap<String, Matrix>) -> f64>(
        f: &F,
        params: &BTreeMap<String, Matrix>,
        name: &str,
        step: f64,
    ) -> Matrix {
        let base = &params[name];
        let mut grad = Matrix::zeros(base.dim());
        for r in 0..base.nrows() {
            for c in 0..base.ncols() {
                let mut plus = params.clone();
                plus.get_mut(name).unwrap()[[r, c]] += step;
                let mut minus = params.clone();
                minus.get_mut(name).unwrap()[[r, c]] -= step;
                grad[[r, c]] = (f(&plus) - f(&minus)) / (2.0 * step);
            }
        }
        grad
    }

    fn check_gradients<F>(build: F, params: BTreeMap<String, Matrix>, tol: f64)
    where
        F: Fn(&mut Tape, &BTreeMap<String, Matrix>) -> Var,
    {
        let eval = |p: &BTreeMap<String, Matrix>| -> f64 {
            let mut tape = Tape::new();
            let root = build(&mut tape, p);
            tape.scalar(root)
        };

        let mut tape = Tape::new();
        let root = build(&mut tape, &params);
        let grads = tape.backward(root);

        for name in params.keys() {
            let fd = finite_diff(&eval, &params, name, 1e-5);
            let an = &grads[name];
            let num: f64 = (an - &fd).iter().map(|x| x * x).sum::<f64>().sqrt();
            let den: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-8);
            assert!(
                num / den < tol,
                "gradient mismatch for {name}: rel err {}",
                num / den
            );
        }
    }

    #[test]
    fn matmul_chain_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = BTreeMap::new();
        params.insert("a".to_string(), random_matrix(&mut rng, 3, 4));
        params.insert("b".to_string(), random_matrix(&mut rng, 4, 2));
        params.insert("c".to_string(), random_matrix(&mut rng, 3, 2));
        check_gradients(
            |tape, p| {
                let a = tape.param("a", &p["a"]);
                let b = tape.param("b", &p["b"]);
                let c = tape.param("c", &p["c"]);
                let ab = tape.matmul(a, b);
                let s = tape.mul(ab, c);
                let t = tape.tanh(s);
                let ones = tape.constant(Matrix::from_elem((3, 2), 1.0));
                let prod = tape.mul(t, ones);
                // reduce to scalar: sum = ones^T row trick via matmul
                let colsum = tape.constant(Matrix::from_elem((2, 1), 1.0));
                let rowsum = tape.constant(Matrix::from_elem((1, 3), 1.0));
                let v = tape.matmul(prod, colsum);
                tape.matmul(rowsum, v)
            },
            params,
            1e-6,
        );
    }

    #[test]
    fn gate_shaped_expression_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = BTreeMap::new();
        params.insert("h".to_string(), random_matrix(&mut rng, 2, 3));
        params.insert("w".to_string(), random_matrix(&mut rng, 3, 3));
        params.insert("u".to_string(), random_matrix(&mut rng, 3, 3));
        params.insert("bias".to_string(), random_matrix(&mut rng, 1, 3));
        check_gradients(
            |tape, p| {
                let h = tape.param("h", &p["h"]);
                let w = tape.param("w", &p["w"]);
                let u = tape.param("u", &p["u"]);
                let bias = tape.param("bias", &p["bias"]);
                let hw = tape.matmul(h, w);
                let hu = tape.matmul(h, u);
                let pre = tape.add(hw, hu);
                let pre = tape.add_row(pre, bias);
                let z = tape.sigmoid(pre);
                let zc = tape.one_minus(z);
                let mix = tape.mul(zc, h);
                let rowsum = tape.constant(Matrix::from_elem((1, 2), 1.0));
                let colsum = tape.constant(Matrix::from_elem((3, 1), 1.0));
                let v = tape.matmul(mix, colsum);
                tape.matmul(rowsum, v)
            },
            params,
            1e-6,
        );
    }

    #[test]
    fn gather_concat_softmax_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = BTreeMap::new();
        params.insert("e".to_string(), random_matrix(&mut rng, 5, 3));
        params.insert("v".to_string(), random_matrix(&mut rng, 3, 1));
        check_gradients(
            |tape, p| {
                let e = tape.param("e", &p["e"]);
                let v = tape.param("v", &p["v"]);
                // duplicate gathers exercise scatter accumulation
                let rows = tape.gather_rows(e, &[0, 2, 2, 4]);
                let scores = tape.matmul(rows, v); // (4 x 1)
                let alpha = tape.softmax(scores);
                let alpha_t = tape.transpose(alpha);
                let mix = tape.matmul(alpha_t, rows); // (1 x 3)
                let more = tape.concat_cols(&[mix, mix]); // (1 x 6)
                let sig = tape.sigmoid(more);
                let colsum = tape.constant(Matrix::from_elem((6, 1), 0.5));
                tape.matmul(sig, colsum)
            },
            params,
            1e-6,
        );
    }

    #[test]
    fn normalize_rows_and_nls_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = BTreeMap::new();
        params.insert("e".to_string(), random_matrix(&mut rng, 4, 3));
        check_gradients(
            |tape, p| {
                let e = tape.param("e", &p["e"]);
                let anchor = tape.row(e, 0);
                let cands = tape.gather_rows(e, &[1, 2, 3]);
                let anchor_n = tape.normalize_rows(anchor);
                let cands_n = tape.normalize_rows(cands);
                let sims = tape.matmul_transb(anchor_n, cands_n); // (1 x 3)
                let logits = tape.scale(sims, 1.0 / 0.2);
                tape.neg_log_softmax(logits, 0)
            },
            params,
            1e-6,
        );
    }

    #[test]
    fn stack_and_broadcast_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = BTreeMap::new();
        params.insert("a".to_string(), random_matrix(&mut rng, 1, 3));
        params.insert("b".to_string(), random_matrix(&mut rng, 1, 3));
        check_gradients(
            |tape, p| {
                let a = tape.param("a", &p["a"]);
                let b = tape.param("b", &p["b"]);
                let stacked = tape.stack_rows(&[a, b]); // 2 x 3
                let wide = tape.broadcast_rows(a, 2); // 2 x 3
                let prod = tape.mul(stacked, wide);
                let s = tape.scale(prod, 0.7);
                let rowsum = tape.constant(Matrix::from_elem((1, 2), 1.0));
                let colsum = tape.constant(Matrix::from_elem((3, 1), 1.0));
                let v = tape.matmul(s, colsum);
                tape.matmul(rowsum, v)
            },
            params,
            1e-6,
        );
    }

    #[test]
    fn softmax_matches_direct_computation() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0, 3.0]]);
        let y = tape.softmax(x);
        let v = tape.value(y);
        let e: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|x| (x - 3.0).exp()).collect();
        let z: f64 = e.iter().sum();
        for (a, b) in v.iter().zip(e.iter()) {
            assert!((a - b / z).abs() < 1e-12);
        }
        assert!((v.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neg_log_softmax_handles_uniform_case() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::zeros((1, 4)));
        let loss = tape.neg_log_softmax(x, 2);
        assert!((tape.scalar(loss) - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn param_binding_is_deduplicated() {
        let mut tape = Tape::new();
        let m = Matrix::zeros((2, 2));
        let a = tape.param("w", &m);
        let b = tape.param("w", &m);
        assert_eq!(a, b);
    }

    #[test]
    fn unused_param_gets_zero_gradient() {
        let mut tape = Tape::new();
        let used = tape.param("used", &Matrix::from_elem((1, 1), 2.0));
        let _unused = tape.param("unused", &Matrix::from_elem((2, 3), 1.0));
        let root = tape.scale(used, 3.0);
        let grads = tape.backward(root);
        assert_eq!(grads["unused"], Matrix::zeros((2, 3)));
        assert_eq!(grads["used"][[0, 0]], 3.0);
    }
}
