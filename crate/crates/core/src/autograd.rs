//! Minimal reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters enter
//! as borrowed leaves tagged with their index in the weight table, so
//! [`Tape::backward`] returns gradients laid out like the weights.

use std::borrow::Cow;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self { rows: 1, cols: data.len(), data }
    }

    pub fn column(data: Vec<f64>) -> Self {
        Self { rows: data.len(), cols: 1, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_assign(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }
}

/// `c = alpha * op(a) * op(b) + beta * c`, where `op` optionally transposes.
pub fn gemm(alpha: f64, a: &Mat, ta: bool, b: &Mat, tb: bool, beta: f64, c: &mut Mat) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "inner dimensions");
    assert_eq!((c.rows, c.cols), (m, n), "output shape");
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: strides and extents describe the live buffers checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut c = Mat::zeros(a.rows, b.cols);
    gemm(1.0, a, false, b, false, 0.0, &mut c);
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Gelu(Var),
    Silu(Var),
    LayerNorm(Var, Vec<f64>),
    Softmax(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Mse(Var, Mat),
}

struct Node<'w> {
    value: Cow<'w, Mat>,
    op: Op,
    param: Option<usize>,
}

pub const LN_EPS: f64 = 1e-6;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub struct Tape<'w> {
    nodes: Vec<Node<'w>>,
    param_vars: Vec<Option<Var>>,
}

impl<'w> Tape<'w> {
    pub fn new(n_params: usize) -> Self {
        Self { nodes: Vec::with_capacity(512), param_vars: vec![None; n_params] }
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op, param: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(m, Op::Leaf)
    }

    /// Leaf for weight tensor `id`; registered once per tape.
    pub fn param(&mut self, id: usize, m: &'w Mat) -> Var {
        if let Some(v) = self.param_vars[id] {
            return v;
        }
        self.nodes.push(Node { value: Cow::Borrowed(m), op: Op::Leaf, param: Some(id) });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = matmul(self.value(a), self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(x.rows, y.rows);
        gemm(1.0, x, false, y, true, 0.0, &mut out);
        self.push(out, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((x.rows, x.cols), (y.rows, y.cols), "add shapes");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p + q).collect();
        let out = Mat::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (x, r) = (self.value(a), self.value(row));
        assert_eq!((r.rows, r.cols), (1, x.cols), "row broadcast shape");
        let mut out = x.clone();
        for chunk in out.data.chunks_mut(x.cols) {
            for (o, b) in chunk.iter_mut().zip(&r.data) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let (x, r) = (self.value(a), self.value(row));
        assert_eq!((r.rows, r.cols), (1, x.cols), "row broadcast shape");
        let mut out = x.clone();
        for chunk in out.data.chunks_mut(x.cols) {
            for (o, b) in chunk.iter_mut().zip(&r.data) {
                *o *= b;
            }
        }
        self.push(out, Op::MulRow(a, row))
    }

    /// Scales row `i` of `a` by `col[i]`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (x, c) = (self.value(a), self.value(col));
        assert_eq!((c.rows, c.cols), (x.rows, 1), "column broadcast shape");
        let mut out = x.clone();
        for (chunk, s) in out.data.chunks_mut(x.cols).zip(&c.data) {
            for o in chunk {
                *o *= s;
            }
        }
        self.push(out, Op::MulCol(a, col))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((x.rows, x.cols), (y.rows, y.cols), "mul shapes");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let out = Mat::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|v| v + c);
        self.push(out, Op::AddConst(a))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()));
        self.push(out, Op::Gelu(a))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x / (1.0 + (-x).exp()));
        self.push(out, Op::Silu(a))
    }

    /// Per-row normalization to zero mean and unit variance, no affine part.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        let mut rstd = Vec::with_capacity(x.rows);
        for row in out.data.chunks_mut(x.cols) {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let r = 1.0 / (var + LN_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * r;
            }
            rstd.push(r);
        }
        self.push(out, Op::LayerNorm(a, rstd))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for row in out.data.chunks_mut(x.cols) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.push(out, Op::Softmax(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.cols, "column slice out of range");
        let mut out = Mat::zeros(x.rows, len);
        for r in 0..x.rows {
            out.data[r * len..(r + 1) * len].copy_from_slice(&x.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let x = self.value(p);
            assert_eq!(x.rows, rows, "concat row counts");
            for r in 0..rows {
                out.data[r * cols + off..r * cols + off + x.cols].copy_from_slice(x.row(r));
            }
            off += x.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Mean squared error against a constant target, as a 1x1 matrix.
    pub fn mse(&mut self, a: Var, target: Mat) -> Var {
        let x = self.value(a);
        assert_eq!(x.len(), target.len(), "mse lengths");
        let loss = x.data.iter().zip(&target.data).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64;
        self.push(Mat::from_vec(1, 1, vec![loss]), Op::Mse(a, target))
    }

    /// Gradients of the scalar `loss` for every registered parameter, indexed
    /// like the weight table. Unused parameters get `None`.
    pub fn backward(&self, loss: Var) -> Vec<Option<Mat>> {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar");
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Mat::from_vec(1, 1, vec![1.0]));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.param.is_some() {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(&node.op, &node.value, g, &mut grads);
        }
        let mut out = vec![None; self.param_vars.len()];
        for (id, var) in self.param_vars.iter().enumerate() {
            if let Some(v) = var {
                out[id] = grads[v.0].take();
            }
        }
        out
    }

    fn propagate(&self, op: &Op, y: &Mat, g: Mat, grads: &mut [Option<Mat>]) {
        let val = |v: &Var| self.value(*v);
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, w) = (val(a), val(b));
                accumulate_gemm(grads, *a, &g, false, w, true, x.rows, x.cols);
                accumulate_gemm(grads, *b, x, true, &g, false, w.rows, w.cols);
            }
            Op::MatMulBt(a, b) => {
                let (x, w) = (val(a), val(b));
                accumulate_gemm(grads, *a, &g, false, w, false, x.rows, x.cols);
                accumulate_gemm(grads, *b, &g, true, x, false, w.rows, w.cols);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g);
            }
            Op::AddRow(a, row) => {
                accumulate(grads, *row, col_sums(&g));
                accumulate(grads, *a, g);
            }
            Op::MulRow(a, row) => {
                let (x, r) = (val(a), val(row));
                let mut gx = g.clone();
                let mut gr = Mat::zeros(1, r.cols);
                for ((gxr, gr_row), xr) in gx.data.chunks_mut(r.cols).zip(g.data.chunks(r.cols)).zip(x.data.chunks(r.cols)) {
                    for j in 0..r.cols {
                        gxr[j] *= r.data[j];
                        gr.data[j] += gr_row[j] * xr[j];
                    }
                }
                accumulate(grads, *a, gx);
                accumulate(grads, *row, gr);
            }
            Op::MulCol(a, col) => {
                let (x, c) = (val(a), val(col));
                let mut gx = g.clone();
                let mut gc = Mat::zeros(c.rows, 1);
                for i in 0..x.rows {
                    let (gr, xr) = (&g.data[i * x.cols..(i + 1) * x.cols], x.row(i));
                    gc.data[i] = gr.iter().zip(xr).map(|(p, q)| p * q).sum();
                    for v in &mut gx.data[i * x.cols..(i + 1) * x.cols] {
                        *v *= c.data[i];
                    }
                }
                accumulate(grads, *a, gx);
                accumulate(grads, *col, gc);
            }
            Op::Mul(a, b) => {
                let (x, w) = (val(a), val(b));
                let ga = Mat::from_vec(g.rows, g.cols, g.data.iter().zip(&w.data).map(|(p, q)| p * q).collect());
                let gb = Mat::from_vec(g.rows, g.cols, g.data.iter().zip(&x.data).map(|(p, q)| p * q).collect());
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Scale(a, s) => accumulate(grads, *a, g.map(|v| v * s)),
            Op::AddConst(a) => accumulate(grads, *a, g),
            Op::Gelu(a) => {
                let x = val(a);
                let data = g
                    .data
                    .iter()
                    .zip(&x.data)
                    .map(|(&gv, &xv)| {
                        let u = GELU_C * (xv + 0.044715 * xv * xv * xv);
                        let th = u.tanh();
                        let du = GELU_C * (1.0 + 3.0 * 0.044715 * xv * xv);
                        gv * (0.5 * (1.0 + th) + 0.5 * xv * (1.0 - th * th) * du)
                    })
                    .collect();
                accumulate(grads, *a, Mat::from_vec(g.rows, g.cols, data));
            }
            Op::Silu(a) => {
                let x = val(a);
                let data = g
                    .data
                    .iter()
                    .zip(&x.data)
                    .map(|(&gv, &xv)| {
                        let s = 1.0 / (1.0 + (-xv).exp());
                        gv * s * (1.0 + xv * (1.0 - s))
                    })
                    .collect();
                accumulate(grads, *a, Mat::from_vec(g.rows, g.cols, data));
            }
            Op::LayerNorm(a, rstd) => {
                let mut gx = Mat::zeros(y.rows, y.cols);
                let n = y.cols as f64;
                for i in 0..y.rows {
                    let (gr, yr) = (&g.data[i * y.cols..(i + 1) * y.cols], y.row(i));
                    let mg = gr.iter().sum::<f64>() / n;
                    let mgy = gr.iter().zip(yr).map(|(p, q)| p * q).sum::<f64>() / n;
                    for j in 0..y.cols {
                        gx.data[i * y.cols + j] = rstd[i] * (gr[j] - mg - yr[j] * mgy);
                    }
                }
                accumulate(grads, *a, gx);
            }
            Op::Softmax(a) => {
                let mut gx = Mat::zeros(y.rows, y.cols);
                for i in 0..y.rows {
                    let (gr, yr) = (&g.data[i * y.cols..(i + 1) * y.cols], y.row(i));
                    let dot: f64 = gr.iter().zip(yr).map(|(p, q)| p * q).sum();
                    for j in 0..y.cols {
                        gx.data[i * y.cols + j] = yr[j] * (gr[j] - dot);
                    }
                }
                accumulate(grads, *a, gx);
            }
            Op::SliceCols(a, start) => {
                let x = val(a);
                let mut gx = Mat::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    gx.data[r * x.cols + start..r * x.cols + start + g.cols].copy_from_slice(g.row(r));
                }
                accumulate(grads, *a, gx);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = val(p).cols;
                    let mut gp = Mat::zeros(g.rows, w);
                    for r in 0..g.rows {
                        gp.data[r * w..(r + 1) * w].copy_from_slice(&g.row(r)[off..off + w]);
                    }
                    accumulate(grads, *p, gp);
                    off += w;
                }
            }
            Op::Mse(a, target) => {
                let x = val(a);
                let k = 2.0 * g.data[0] / x.len() as f64;
                let data = x.data.iter().zip(&target.data).map(|(p, q)| k * (p - q)).collect();
                accumulate(grads, *a, Mat::from_vec(x.rows, x.cols, data));
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate_gemm(grads: &mut [Option<Mat>], v: Var, a: &Mat, ta: bool, b: &Mat, tb: bool, rows: usize, cols: usize) {
    match &mut grads[v.0] {
        Some(acc) => gemm(1.0, a, ta, b, tb, 1.0, acc),
        slot => {
            let mut m = Mat::zeros(rows, cols);
            gemm(1.0, a, ta, b, tb, 0.0, &mut m);
            *slot = Some(m);
        }
    }
}

fn col_sums(g: &Mat) -> Mat {
    let mut out = Mat::zeros(1, g.cols);
    for row in g.data.chunks(g.cols) {
        for (o, v) in out.data.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Checks every op's backward against central differences on a small graph.
    fn check(build: impl Fn(&mut Tape, Var, Var) -> Var, sa: (usize, usize), sb: (usize, usize)) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rand_mat(&mut rng, sa.0, sa.1);
        let b = rand_mat(&mut rng, sb.0, sb.1);
        let eval = |a: &Mat, b: &Mat| {
            let mut t = Tape::new(2);
            let (va, vb) = (t.param(0, a), t.param(1, b));
            let out = build(&mut t, va, vb);
            let n = t.value(out).len();
            let target = Mat::from_vec(t.value(out).rows, t.value(out).cols, (0..n).map(|i| (i as f64 * 0.37).sin()).collect());
            let loss = t.mse(out, target);
            (t.value(loss).data[0], t.backward(loss))
        };
        let (_, grads) = eval(&a, &b);
        for (id, base) in [(0, &a), (1, &b)] {
            let g = grads[id].as_ref().expect("parameter reached");
            for k in 0..base.len() {
                let h = 1e-6;
                let mut p = base.clone();
                p.data[k] += h;
                let mut m = base.clone();
                m.data[k] -= h;
                let (lp, lm) = if id == 0 { (eval(&p, &b).0, eval(&m, &b).0) } else { (eval(&a, &p).0, eval(&a, &m).0) };
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - g.data[k]).abs() < 1e-6 * (1.0 + fd.abs()), "param {id} elem {k}: fd {fd} vs {}", g.data[k]);
            }
        }
    }

    #[test]
    fn matmul_grads() {
        check(|t, a, b| t.matmul(a, b), (3, 4), (4, 2));
        check(|t, a, b| t.matmul_bt(a, b), (3, 4), (5, 4));
    }

    #[test]
    fn broadcast_grads() {
        check(|t, a, b| t.add_row(a, b), (3, 4), (1, 4));
        check(|t, a, b| t.mul_row(a, b), (3, 4), (1, 4));
        check(|t, a, b| t.mul_col(a, b), (3, 4), (3, 1));
        check(|t, a, b| { let s = t.add(a, b); t.mul(s, b) }, (3, 4), (3, 4));
    }

    #[test]
    fn nonlinearity_grads() {
        check(|t, a, b| { let x = t.gelu(a); let y = t.silu(b); let y = t.scale(y, 0.7); let z = t.add(x, y); t.add_const(z, 0.3) }, (2, 5), (2, 5));
        check(|t, a, b| { let x = t.add(a, b); let n = t.layer_norm(x); t.mul(n, b) }, (3, 6), (3, 6));
        check(|t, a, b| { let x = t.softmax_rows(a); t.mul(x, b) }, (3, 6), (3, 6));
    }

    #[test]
    fn structural_grads() {
        check(|t, a, b| { let s = t.slice_cols(a, 1, 3); t.concat_cols(&[s, b]) }, (2, 5), (2, 2));
    }

    #[test]
    fn param_registered_once() {
        let m = Mat::zeros(2, 2);
        let mut t = Tape::new(1);
        assert_eq!(t.param(0, &m), t.param(0, &m));
    }

    #[test]
    fn gemm_transposes() {
        let a = Mat::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]);
        let b = Mat::from_vec(2, 3, vec![1., 0., 1., 0., 1., 0.]);
        let mut c = Mat::zeros(2, 2);
        gemm(1.0, &a, false, &b, true, 0.0, &mut c);
        assert_eq!(c.data, vec![4., 2., 10., 5.]);
        assert_eq!(matmul(&a.transpose(), &b).data, {
            let mut d = Mat::zeros(3, 3);
            gemm(1.0, &a, true, &b, false, 0.0, &mut d);
            d.data
        });
    }
}
