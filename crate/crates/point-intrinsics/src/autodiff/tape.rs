//! The tape: forward ops record nodes, `backward` replays them in reverse.

use super::{AutodiffError, Result, Scalar, Tensor};

/// Handle to a value on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct Node<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
    op: Op<T>,
}

enum Op<T: Scalar> {
    Leaf,
    Linear { input: Var, weight: Var, bias: Var },
    Relu { input: Var },
    Tanh { input: Var },
    MaxPoolPoints { input: Var, argmax: Vec<usize> },
    ConcatFeatures { a: Var, b: Var },
    RepeatGlobal { input: Var },
    Mse { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Div { a: Var, b: Var },
    Scale { input: Var, factor: T },
    Abs { input: Var },
    ClampMin { input: Var, min: T },
    Sum { input: Var },
    Mean { input: Var },
    GatherRows { input: Var, rows: Vec<usize> },
    SelectColumns { input: Var, cols: Vec<usize> },
    NormalizeRows { input: Var, degenerate: Vec<usize> },
}

/// Gradients of one backward pass, indexed by `Var`.
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss w.r.t. `var`; `None` if no path reached it.
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Gradient with missing entries materialized as zeros of `numel`.
    pub fn get_or_zeros(&self, var: Var, numel: usize) -> Vec<T> {
        match self.get(var) {
            Some(g) => g.to_vec(),
            None => vec![T::ZERO; numel],
        }
    }
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &[T] {
        &self.nodes[var.0].data
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        &self.nodes[var.0].shape
    }

    /// Copies a tensor onto the tape as a leaf.
    pub fn leaf(&mut self, tensor: &Tensor<T>) -> Var {
        self.push(tensor.shape().to_vec(), tensor.data().to_vec(), Op::Leaf)
    }

    /// Creates a leaf directly from shape and data.
    pub fn constant(&mut self, shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Var> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(AutodiffError::ShapeMismatch(format!(
                "constant: shape {shape:?} vs {} elements",
                data.len()
            )));
        }
        Ok(self.push(shape, data, Op::Leaf))
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { shape, data, op });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(
        &mut self,
        shape: Vec<usize>,
        data: Vec<T>,
        op: Op<T>,
        name: &'static str,
    ) -> Result<Var> {
        if !data.iter().all(|v| v.is_finite()) {
            return Err(AutodiffError::NonFinite { op: name });
        }
        Ok(self.push(shape, data, op))
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = &self.nodes[v.0].shape;
        if s.len() != 2 {
            return Err(AutodiffError::Dimension(format!("{op}: expected 2-D tensor, got {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    // ── Model ops ───────────────────────────────────────────────────────

    /// out[i,j] = Σ_k input[i,k]·weight[k,j] + bias[j]
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (n, c_in) = self.dims2(input, "linear")?;
        let (wk, c_out) = self.dims2(weight, "linear")?;
        if wk != c_in {
            return Err(AutodiffError::ShapeMismatch(format!(
                "linear: input {n}×{c_in} vs weight {wk}×{c_out}"
            )));
        }
        if self.nodes[bias.0].data.len() != c_out {
            return Err(AutodiffError::ShapeMismatch(format!(
                "linear: bias has {} elements, expected {c_out}",
                self.nodes[bias.0].data.len()
            )));
        }
        let mut out = vec![T::ZERO; n * c_out];
        T::gemm(
            n,
            c_in,
            c_out,
            T::ONE,
            &self.nodes[input.0].data,
            c_in as isize,
            1,
            &self.nodes[weight.0].data,
            c_out as isize,
            1,
            T::ZERO,
            &mut out,
            c_out as isize,
            1,
        );
        let b = &self.nodes[bias.0].data;
        for row in out.chunks_exact_mut(c_out) {
            for (o, &bj) in row.iter_mut().zip(b) {
                *o += bj;
            }
        }
        self.push_checked(vec![n, c_out], out, Op::Linear { input, weight, bias }, "linear")
    }

    /// Elementwise max(0, x); subgradient at 0 is 0.
    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let data: Vec<T> =
            self.nodes[input.0].data.iter().map(|&x| if x > T::ZERO { x } else { T::ZERO }).collect();
        let shape = self.nodes[input.0].shape.clone();
        self.push_checked(shape, data, Op::Relu { input }, "relu")
    }

    pub fn tanh(&mut self, input: Var) -> Result<Var> {
        let data: Vec<T> = self.nodes[input.0].data.iter().map(|&x| x.tanh()).collect();
        let shape = self.nodes[input.0].shape.clone();
        self.push_checked(shape, data, Op::Tanh { input }, "tanh")
    }

    /// Columnwise max over points; ties resolve to the lowest row index.
    pub fn max_pool_points(&mut self, input: Var) -> Result<(Var, Vec<usize>)> {
        let (n, c) = self.dims2(input, "max_pool_points")?;
        if n == 0 {
            return Err(AutodiffError::Dimension("max_pool_points: empty point dimension".into()));
        }
        let x = &self.nodes[input.0].data;
        let mut out = x[..c].to_vec();
        let mut argmax = vec![0usize; c];
        for i in 1..n {
            for j in 0..c {
                let v = x[i * c + j];
                if v > out[j] {
                    out[j] = v;
                    argmax[j] = i;
                }
            }
        }
        let var = self.push_checked(
            vec![1, c],
            out,
            Op::MaxPoolPoints { input, argmax: argmax.clone() },
            "max_pool_points",
        )?;
        Ok((var, argmax))
    }

    /// Rowwise concatenation [a | b].
    pub fn concat_features(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ca) = self.dims2(a, "concat_features")?;
        let (nb, cb) = self.dims2(b, "concat_features")?;
        if na != nb {
            return Err(AutodiffError::Dimension(format!(
                "concat_features: point counts differ ({na} vs {nb})"
            )));
        }
        let mut out = Vec::with_capacity(na * (ca + cb));
        for i in 0..na {
            out.extend_from_slice(&self.nodes[a.0].data[i * ca..(i + 1) * ca]);
            out.extend_from_slice(&self.nodes[b.0].data[i * cb..(i + 1) * cb]);
        }
        self.push_checked(vec![na, ca + cb], out, Op::ConcatFeatures { a, b }, "concat_features")
    }

    /// Repeats a 1×c global feature to n×c.
    pub fn repeat_global(&mut self, global: Var, n: usize) -> Result<Var> {
        let (g, c) = self.dims2(global, "repeat_global")?;
        if g != 1 {
            return Err(AutodiffError::Dimension(format!("repeat_global: expected 1×c, got {g}×{c}")));
        }
        if n == 0 {
            return Err(AutodiffError::Dimension("repeat_global: n must be ≥ 1".into()));
        }
        let row = self.nodes[global.0].data.clone();
        let mut out = Vec::with_capacity(n * c);
        for _ in 0..n {
            out.extend_from_slice(&row);
        }
        self.push_checked(vec![n, c], out, Op::RepeatGlobal { input: global }, "repeat_global")
    }

    /// Mean over all elements of (a−b)²; scalar output.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mse")?;
        let xa = &self.nodes[a.0].data;
        let xb = &self.nodes[b.0].data;
        let n = T::from_usize(xa.len());
        let mut acc = T::ZERO;
        for (&va, &vb) in xa.iter().zip(xb) {
            let d = va - vb;
            acc += d * d;
        }
        self.push_checked(vec![1], vec![acc / n], Op::Mse { a, b }, "mse")
    }

    // ── Elementwise / structural ops ────────────────────────────────────

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(AutodiffError::ShapeMismatch(format!(
                "{op}: {:?} vs {:?}",
                self.nodes[a.0].shape, self.nodes[b.0].shape
            )));
        }
        Ok(())
    }

    fn zip_ew(
        &mut self,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
        name: &'static str,
    ) -> Result<Var> {
        self.same_shape(a, b, name)?;
        let data: Vec<T> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push_checked(shape, data, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_ew(a, b, |x, y| x + y, Op::Add { a, b }, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_ew(a, b, |x, y| x - y, Op::Sub { a, b }, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_ew(a, b, |x, y| x * y, Op::Mul { a, b }, "mul")
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_ew(a, b, |x, y| x / y, Op::Div { a, b }, "div")
    }

    pub fn scale(&mut self, input: Var, factor: T) -> Result<Var> {
        let data: Vec<T> = self.nodes[input.0].data.iter().map(|&x| x * factor).collect();
        let shape = self.nodes[input.0].shape.clone();
        self.push_checked(shape, data, Op::Scale { input, factor }, "scale")
    }

    pub fn abs(&mut self, input: Var) -> Result<Var> {
        let data: Vec<T> = self.nodes[input.0].data.iter().map(|&x| x.abs()).collect();
        let shape = self.nodes[input.0].shape.clone();
        self.push_checked(shape, data, Op::Abs { input }, "abs")
    }

    pub fn clamp_min(&mut self, input: Var, min: T) -> Result<Var> {
        let data: Vec<T> =
            self.nodes[input.0].data.iter().map(|&x| if x > min { x } else { min }).collect();
        let shape = self.nodes[input.0].shape.clone();
        self.push_checked(shape, data, Op::ClampMin { input, min }, "clamp_min")
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let mut acc = T::ZERO;
        for &x in &self.nodes[input.0].data {
            acc += x;
        }
        self.push_checked(vec![1], vec![acc], Op::Sum { input }, "sum")
    }

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let n = T::from_usize(self.nodes[input.0].data.len());
        let mut acc = T::ZERO;
        for &x in &self.nodes[input.0].data {
            acc += x;
        }
        self.push_checked(vec![1], vec![acc / n], Op::Mean { input }, "mean")
    }

    /// out[i, :] = input[rows[i], :]
    pub fn gather_rows(&mut self, input: Var, rows: &[usize]) -> Result<Var> {
        let (n, c) = self.dims2(input, "gather_rows")?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(AutodiffError::Dimension(format!(
                "gather_rows: row {bad} out of bounds for {n} rows"
            )));
        }
        let x = &self.nodes[input.0].data;
        let mut out = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            out.extend_from_slice(&x[r * c..(r + 1) * c]);
        }
        self.push_checked(
            vec![rows.len(), c],
            out,
            Op::GatherRows { input, rows: rows.to_vec() },
            "gather_rows",
        )
    }

    /// out[i, j] = input[i, cols[j]]
    pub fn select_columns(&mut self, input: Var, cols: &[usize]) -> Result<Var> {
        let (n, c) = self.dims2(input, "select_columns")?;
        if let Some(&bad) = cols.iter().find(|&&j| j >= c) {
            return Err(AutodiffError::Dimension(format!(
                "select_columns: column {bad} out of bounds for {c} columns"
            )));
        }
        let x = &self.nodes[input.0].data;
        let mut out = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            for &j in cols {
                out.push(x[i * c + j]);
            }
        }
        self.push_checked(
            vec![n, cols.len()],
            out,
            Op::SelectColumns { input, cols: cols.to_vec() },
            "select_columns",
        )
    }

    /// Rowwise L2 normalization. Rows with norm below `eps` are replaced by
    /// `fallback` and receive zero gradient; their indices are returned.
    pub fn normalize_rows(&mut self, input: Var, eps: T, fallback: &[T]) -> Result<(Var, Vec<usize>)> {
        let (n, c) = self.dims2(input, "normalize_rows")?;
        if fallback.len() != c {
            return Err(AutodiffError::ShapeMismatch(format!(
                "normalize_rows: fallback has {} elements, expected {c}",
                fallback.len()
            )));
        }
        let x = &self.nodes[input.0].data;
        let mut out = Vec::with_capacity(n * c);
        let mut degenerate = Vec::new();
        for i in 0..n {
            let row = &x[i * c..(i + 1) * c];
            let mut sq = T::ZERO;
            for &v in row {
                sq += v * v;
            }
            let norm = sq.sqrt();
            if norm < eps {
                degenerate.push(i);
                out.extend_from_slice(fallback);
            } else {
                out.extend(row.iter().map(|&v| v / norm));
            }
        }
        let var = self.push_checked(
            vec![n, c],
            out,
            Op::NormalizeRows { input, degenerate: degenerate.clone() },
            "normalize_rows",
        )?;
        Ok((var, degenerate))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Gradients accumulate along every
    /// path; input values are never mutated.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(AutodiffError::Dimension(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::ONE]);

        for id in (0..=loss.0).rev() {
            let Some(d_out) = grads[id].clone() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Linear { input, weight, bias } => {
                    let (n, c_in) = (self.nodes[input.0].shape[0], self.nodes[input.0].shape[1]);
                    let c_out = self.nodes[weight.0].shape[1];
                    // d_input = d_out @ Wᵀ
                    {
                        let g = ensure(&mut grads, input.0, n * c_in);
                        T::gemm(
                            n,
                            c_out,
                            c_in,
                            T::ONE,
                            &d_out,
                            c_out as isize,
                            1,
                            &self.nodes[weight.0].data,
                            1,
                            c_out as isize,
                            T::ONE,
                            g,
                            c_in as isize,
                            1,
                        );
                    }
                    // d_weight = inputᵀ @ d_out
                    {
                        let g = ensure(&mut grads, weight.0, c_in * c_out);
                        T::gemm(
                            c_in,
                            n,
                            c_out,
                            T::ONE,
                            &self.nodes[input.0].data,
                            1,
                            c_in as isize,
                            &d_out,
                            c_out as isize,
                            1,
                            T::ONE,
                            g,
                            c_out as isize,
                            1,
                        );
                    }
                    // d_bias = column sums of d_out
                    let g = ensure(&mut grads, bias.0, c_out);
                    for row in d_out.chunks_exact(c_out) {
                        for (gj, &dj) in g.iter_mut().zip(row) {
                            *gj += dj;
                        }
                    }
                }
                Op::Relu { input } => {
                    let x = &self.nodes[input.0].data;
                    let g = ensure(&mut grads, input.0, x.len());
                    for ((gi, &xi), &di) in g.iter_mut().zip(x).zip(&d_out) {
                        if xi > T::ZERO {
                            *gi += di;
                        }
                    }
                }
                Op::Tanh { input } => {
                    let y = &node.data;
                    let g = ensure(&mut grads, input.0, y.len());
                    for ((gi, &yi), &di) in g.iter_mut().zip(y).zip(&d_out) {
                        *gi += di * (T::ONE - yi * yi);
                    }
                }
                Op::MaxPoolPoints { input, argmax } => {
                    let c = node.shape[1];
                    let g = ensure(&mut grads, input.0, self.nodes[input.0].data.len());
                    for (j, &row) in argmax.iter().enumerate() {
                        g[row * c + j] += d_out[j];
                    }
                }
                Op::ConcatFeatures { a, b } => {
                    let ca = self.nodes[a.0].shape[1];
                    let cb = self.nodes[b.0].shape[1];
                    let n = node.shape[0];
                    {
                        let ga = ensure(&mut grads, a.0, n * ca);
                        for i in 0..n {
                            for j in 0..ca {
                                ga[i * ca + j] += d_out[i * (ca + cb) + j];
                            }
                        }
                    }
                    let gb = ensure(&mut grads, b.0, n * cb);
                    for i in 0..n {
                        for j in 0..cb {
                            gb[i * cb + j] += d_out[i * (ca + cb) + ca + j];
                        }
                    }
                }
                Op::RepeatGlobal { input } => {
                    let c = node.shape[1];
                    let g = ensure(&mut grads, input.0, c);
                    for row in d_out.chunks_exact(c) {
                        for (gj, &dj) in g.iter_mut().zip(row) {
                            *gj += dj;
                        }
                    }
                }
                Op::Mse { a, b } => {
                    let xa = &self.nodes[a.0].data;
                    let xb = &self.nodes[b.0].data;
                    let scale = d_out[0] * T::from_f64(2.0) / T::from_usize(xa.len());
                    {
                        let ga = ensure(&mut grads, a.0, xa.len());
                        for ((gi, &va), &vb) in ga.iter_mut().zip(xa).zip(xb) {
                            *gi += scale * (va - vb);
                        }
                    }
                    let gb = ensure(&mut grads, b.0, xb.len());
                    for ((gi, &va), &vb) in gb.iter_mut().zip(xa).zip(xb) {
                        *gi += -scale * (va - vb);
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, a.0, &d_out);
                    accumulate(&mut grads, b.0, &d_out);
                }
                Op::Sub { a, b } => {
                    accumulate(&mut grads, a.0, &d_out);
                    let ga = ensure(&mut grads, b.0, d_out.len());
                    for (gi, &di) in ga.iter_mut().zip(&d_out) {
                        *gi += -di;
                    }
                }
                Op::Mul { a, b } => {
                    let xa = &self.nodes[a.0].data;
                    let xb = &self.nodes[b.0].data;
                    {
                        let ga = ensure(&mut grads, a.0, xa.len());
                        for ((gi, &vb), &di) in ga.iter_mut().zip(xb).zip(&d_out) {
                            *gi += di * vb;
                        }
                    }
                    let gb = ensure(&mut grads, b.0, xb.len());
                    for ((gi, &va), &di) in gb.iter_mut().zip(xa).zip(&d_out) {
                        *gi += di * va;
                    }
                }
                Op::Div { a, b } => {
                    let xb = &self.nodes[b.0].data;
                    let y = &node.data;
                    {
                        let ga = ensure(&mut grads, a.0, xb.len());
                        for ((gi, &vb), &di) in ga.iter_mut().zip(xb).zip(&d_out) {
                            *gi += di / vb;
                        }
                    }
                    let gb = ensure(&mut grads, b.0, xb.len());
                    for (((gi, &vb), &yi), &di) in gb.iter_mut().zip(xb).zip(y).zip(&d_out) {
                        *gi += -di * yi / vb;
                    }
                }
                Op::Scale { input, factor } => {
                    let g = ensure(&mut grads, input.0, d_out.len());
                    for (gi, &di) in g.iter_mut().zip(&d_out) {
                        *gi += di * *factor;
                    }
                }
                Op::Abs { input } => {
                    let x = &self.nodes[input.0].data;
                    let g = ensure(&mut grads, input.0, x.len());
                    for ((gi, &xi), &di) in g.iter_mut().zip(x).zip(&d_out) {
                        if xi > T::ZERO {
                            *gi += di;
                        } else if xi < T::ZERO {
                            *gi += -di;
                        }
                    }
                }
                Op::ClampMin { input, min } => {
                    let x = &self.nodes[input.0].data;
                    let g = ensure(&mut grads, input.0, x.len());
                    for ((gi, &xi), &di) in g.iter_mut().zip(x).zip(&d_out) {
                        if xi > *min {
                            *gi += di;
                        }
                    }
                }
                Op::Sum { input } => {
                    let n = self.nodes[input.0].data.len();
                    let g = ensure(&mut grads, input.0, n);
                    for gi in g.iter_mut() {
                        *gi += d_out[0];
                    }
                }
                Op::Mean { input } => {
                    let n = self.nodes[input.0].data.len();
                    let scale = d_out[0] / T::from_usize(n);
                    let g = ensure(&mut grads, input.0, n);
                    for gi in g.iter_mut() {
                        *gi += scale;
                    }
                }
                Op::GatherRows { input, rows } => {
                    let c = node.shape[1];
                    let g = ensure(&mut grads, input.0, self.nodes[input.0].data.len());
                    for (i, &r) in rows.iter().enumerate() {
                        for j in 0..c {
                            g[r * c + j] += d_out[i * c + j];
                        }
                    }
                }
                Op::SelectColumns { input, cols } => {
                    let c_in = self.nodes[input.0].shape[1];
                    let n = node.shape[0];
                    let g = ensure(&mut grads, input.0, self.nodes[input.0].data.len());
                    for i in 0..n {
                        for (k, &j) in cols.iter().enumerate() {
                            g[i * c_in + j] += d_out[i * cols.len() + k];
                        }
                    }
                }
                Op::NormalizeRows { input, degenerate } => {
                    let c = node.shape[1];
                    let n = node.shape[0];
                    let x = &self.nodes[input.0].data;
                    let y = &node.data;
                    let g = ensure(&mut grads, input.0, x.len());
                    let mut deg = degenerate.iter().peekable();
                    for i in 0..n {
                        if deg.peek() == Some(&&i) {
                            deg.next();
                            continue;
                        }
                        let xr = &x[i * c..(i + 1) * c];
                        let yr = &y[i * c..(i + 1) * c];
                        let dr = &d_out[i * c..(i + 1) * c];
                        let mut sq = T::ZERO;
                        for &v in xr {
                            sq += v * v;
                        }
                        let norm = sq.sqrt();
                        let mut dot = T::ZERO;
                        for (&di, &yi) in dr.iter().zip(yr) {
                            dot += di * yi;
                        }
                        for j in 0..c {
                            g[i * c + j] += (dr[j] - yr[j] * dot) / norm;
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn ensure<T: Scalar>(grads: &mut [Option<Vec<T>>], id: usize, numel: usize) -> &mut Vec<T> {
    grads[id].get_or_insert_with(|| vec![T::ZERO; numel])
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], id: usize, delta: &[T]) {
    let g = ensure(grads, id, delta.len());
    for (gi, &di) in g.iter_mut().zip(delta) {
        *gi += di;
    }
}
