//! Shared compute kernels.
//!
//! Both the autodiff tape and the no-grad inference paths call these
//! functions, so the two paths produce bit-identical values.
//!
//! Determinism contract: every output element is accumulated sequentially in
//! a fixed order with `f32::mul_add`, and parallelism only ever splits work
//! across independent output rows. Results are therefore identical for any
//! thread count, and across machines (fma rounding is exact by definition).

use rayon::prelude::*;

/// Below this many multiply-adds a serial loop beats the fork/join overhead.
const PAR_THRESHOLD: usize = 1 << 16;

/// Activation applied by the fused linear kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Act {
    None,
    Relu,
    Leaky(f32),
}

impl Act {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Act::None => x,
            Act::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Act::Leaky(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
        }
    }

    /// Derivative recovered from the *output* value. Valid because every
    /// supported activation preserves the sign of its input.
    #[inline]
    pub fn derivative_from_output(self, out: f32) -> f32 {
        match self {
            Act::None => 1.0,
            Act::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Act::Leaky(s) => {
                if out > 0.0 {
                    1.0
                } else {
                    s
                }
            }
        }
    }
}

/// One fused tile pass: acc = bias tile, k-sequential FMAs, activation,
/// store. Accumulation order per output element is identical for every tile
/// width, so the tier choice never changes results.
macro_rules! row_tile {
    ($w:literal, $crow:expr, $arow:expr, $b:expr, $bias:expr, $n:expr, $jc:expr, $act:expr) => {{
        let mut acc = [0.0f32; $w];
        acc.copy_from_slice(&$bias[$jc..$jc + $w]);
        for (p, &av) in $arow.iter().enumerate() {
            let brow: &[f32; $w] = $b[p * $n + $jc..p * $n + $jc + $w].try_into().unwrap();
            for j in 0..$w {
                acc[j] = brow[j].mul_add(av, acc[j]);
            }
        }
        for v in acc.iter_mut() {
            *v = $act.apply(*v);
        }
        $crow[$jc..$jc + $w].copy_from_slice(&acc);
    }};
}

fn linear_row(crow: &mut [f32], arow: &[f32], b: &[f32], bias: &[f32], n: usize, act: Act) {
    let mut jc = 0;
    while jc + 64 <= n {
        row_tile!(64, crow, arow, b, bias, n, jc, act);
        jc += 64;
    }
    if jc + 32 <= n {
        row_tile!(32, crow, arow, b, bias, n, jc, act);
        jc += 32;
    }
    if jc + 16 <= n {
        row_tile!(16, crow, arow, b, bias, n, jc, act);
        jc += 16;
    }
    if jc + 8 <= n {
        row_tile!(8, crow, arow, b, bias, n, jc, act);
        jc += 8;
    }
    if jc < n {
        let width = n - jc;
        let mut acc = [0.0f32; 8];
        let acc = &mut acc[..width];
        acc.copy_from_slice(&bias[jc..]);
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n + jc..p * n + jc + width];
            for (a, &bv) in acc.iter_mut().zip(brow) {
                *a = bv.mul_add(av, *a);
            }
        }
        for v in acc.iter_mut() {
            *v = act.apply(*v);
        }
        crow[jc..].copy_from_slice(acc);
    }
}

/// Fused affine + activation: out[m x n] = act(A[m x k] @ B[k x n] + bias).
#[allow(clippy::too_many_arguments)]
pub fn linear_act(
    a: &[f32],
    b: &[f32],
    bias: &[f32],
    m: usize,
    k: usize,
    n: usize,
    act: Act,
    out: &mut [f32],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(bias.len(), n);
    debug_assert_eq!(out.len(), m * n);
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        let rows_per_task = (1usize << 18).div_ceil(k * n).max(8);
        out.par_chunks_mut(n)
            .with_min_len(rows_per_task)
            .zip(a.par_chunks(k).with_min_len(rows_per_task))
            .for_each(|(crow, arow)| linear_row(crow, arow, b, bias, n, act));
    } else {
        for (crow, arow) in out.chunks_mut(n).zip(a.chunks(k)) {
            linear_row(crow, arow, b, bias, n, act);
        }
    }
}

/// C[m x n] = A[m x k] @ B[k x n].
pub fn matmul(a: &[f32], b: &[f32], m: usize, k: usize, n: usize, out: &mut [f32]) {
    let bias = vec![0.0f32; n];
    linear_act(a, b, &bias, m, k, n, Act::None, out);
}

/// out[k x n] = A^T @ G for A[m x k], G[m x n].
///
/// Streams both inputs once, accumulating the k x n output in cache via
/// outer products. Work splits over a fixed number of row blocks (never the
/// thread count) and partials reduce in block order, so results do not
/// depend on parallelism.
pub fn matmul_at_b(a: &[f32], g: &[f32], m: usize, k: usize, n: usize, out: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(g.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    const BLOCKS: usize = 16;
    if m * k * n >= PAR_THRESHOLD && m >= BLOCKS {
        let block = m.div_ceil(BLOCKS);
        let mut partials = vec![vec![0.0f32; k * n]; BLOCKS];
        partials.par_iter_mut().enumerate().for_each(|(b, dst)| {
            let lo = b * block;
            let hi = ((b + 1) * block).min(m);
            if lo < hi {
                at_b_block(a, g, lo..hi, k, n, dst);
            }
        });
        out.fill(0.0);
        for dst in &partials {
            for (o, &v) in out.iter_mut().zip(dst) {
                *o += v;
            }
        }
    } else {
        out.fill(0.0);
        at_b_block(a, g, 0..m, k, n, out);
    }
}

/// Accumulate sum_i a[i][p] * g[i][j] over `rows` into dst[k x n].
/// Tiles of dst live in register accumulators across the whole i loop; each
/// element still accumulates strictly in i order, so tiling does not change
/// the result.
fn at_b_block(a: &[f32], g: &[f32], rows: std::ops::Range<usize>, k: usize, n: usize, dst: &mut [f32]) {
    const PB: usize = 4; // dst rows per tile
    const JB: usize = 32; // dst cols per tile
    let mut p0 = 0;
    while p0 < k {
        let pb = PB.min(k - p0);
        let mut j0 = 0;
        while j0 < n {
            let jb = JB.min(n - j0);
            let mut acc = [[0.0f32; JB]; PB];
            if pb == PB && jb == JB {
                for i in rows.clone() {
                    let grow: &[f32; JB] = g[i * n + j0..i * n + j0 + JB].try_into().unwrap();
                    let abase = i * k + p0;
                    for (pp, accrow) in acc.iter_mut().enumerate() {
                        let av = a[abase + pp];
                        for j in 0..JB {
                            accrow[j] = grow[j].mul_add(av, accrow[j]);
                        }
                    }
                }
            } else {
                for i in rows.clone() {
                    let grow = &g[i * n + j0..i * n + j0 + jb];
                    let abase = i * k + p0;
                    for (pp, accrow) in acc.iter_mut().enumerate().take(pb) {
                        let av = a[abase + pp];
                        for (acc_v, &gv) in accrow[..jb].iter_mut().zip(grow) {
                            *acc_v = gv.mul_add(av, *acc_v);
                        }
                    }
                }
            }
            for pp in 0..pb {
                let drow = &mut dst[(p0 + pp) * n + j0..(p0 + pp) * n + j0 + jb];
                for (d, &v) in drow.iter_mut().zip(&acc[pp][..jb]) {
                    *d += v;
                }
            }
            j0 += jb;
        }
        p0 += pb;
    }
}

/// out[c x r] = transpose of a[r x c].
pub fn transpose(a: &[f32], r: usize, c: usize, out: &mut [f32]) {
    debug_assert_eq!(a.len(), r * c);
    debug_assert_eq!(out.len(), r * c);
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
}

pub fn add(a: &[f32], b: &[f32], out: &mut [f32]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x + y;
    }
}

pub fn sub(a: &[f32], b: &[f32], out: &mut [f32]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x - y;
    }
}

pub fn mul(a: &[f32], b: &[f32], out: &mut [f32]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x * y;
    }
}

/// Row-broadcast bias add: out[r][c] = a[r][c] + bias[c].
pub fn add_bias(a: &[f32], bias: &[f32], rows: usize, cols: usize, out: &mut [f32]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(bias.len(), cols);
    for (orow, arow) in out.chunks_mut(cols).zip(a.chunks(cols)) {
        for ((o, &x), &b) in orow.iter_mut().zip(arow).zip(bias) {
            *o = x + b;
        }
    }
}

pub fn relu(a: &[f32], out: &mut [f32]) {
    for (o, &x) in out.iter_mut().zip(a) {
        *o = if x > 0.0 { x } else { 0.0 };
    }
}

pub fn leaky_relu(a: &[f32], slope: f32, out: &mut [f32]) {
    for (o, &x) in out.iter_mut().zip(a) {
        *o = if x > 0.0 { x } else { slope * x };
    }
}

/// Column-wise max over each consecutive block of `seg` rows.
/// Returns the argmax row (first maximal row on ties) per output element.
pub fn segment_max(
    a: &[f32],
    rows: usize,
    cols: usize,
    seg: usize,
    out: &mut [f32],
    argmax: &mut [u32],
) {
    debug_assert_eq!(rows % seg, 0);
    let segments = rows / seg;
    debug_assert_eq!(out.len(), segments * cols);
    debug_assert_eq!(argmax.len(), segments * cols);
    for s in 0..segments {
        let o = &mut out[s * cols..(s + 1) * cols];
        let am = &mut argmax[s * cols..(s + 1) * cols];
        let base = s * seg;
        o.copy_from_slice(&a[base * cols..base * cols + cols]);
        for idx in am.iter_mut() {
            *idx = base as u32;
        }
        for r in base + 1..base + seg {
            let arow = &a[r * cols..(r + 1) * cols];
            for j in 0..cols {
                if arow[j] > o[j] {
                    o[j] = arow[j];
                    am[j] = r as u32;
                }
            }
        }
    }
}

/// Each input row repeated `reps` times consecutively.
pub fn repeat_rows(a: &[f32], rows: usize, cols: usize, reps: usize, out: &mut [f32]) {
    debug_assert_eq!(out.len(), rows * reps * cols);
    for r in 0..rows {
        let src = &a[r * cols..(r + 1) * cols];
        for i in 0..reps {
            let dst = &mut out[(r * reps + i) * cols..(r * reps + i + 1) * cols];
            dst.copy_from_slice(src);
        }
    }
}

/// Column-range concatenation of matrices with equal row counts.
pub fn concat_cols(parts: &[(&[f32], usize)], rows: usize, out: &mut [f32]) {
    let total: usize = parts.iter().map(|(_, c)| c).sum();
    debug_assert_eq!(out.len(), rows * total);
    for r in 0..rows {
        let orow = &mut out[r * total..(r + 1) * total];
        let mut off = 0;
        for &(vals, c) in parts {
            orow[off..off + c].copy_from_slice(&vals[r * c..(r + 1) * c]);
            off += c;
        }
    }
}

pub fn slice_cols(a: &[f32], rows: usize, cols: usize, start: usize, end: usize, out: &mut [f32]) {
    let w = end - start;
    debug_assert_eq!(out.len(), rows * w);
    for r in 0..rows {
        out[r * w..(r + 1) * w].copy_from_slice(&a[r * cols + start..r * cols + end]);
    }
}

/// Mean of all elements, accumulated in f64, rounded to f32 once.
pub fn mean_all(a: &[f32]) -> f32 {
    let sum: f64 = a.iter().map(|&v| v as f64).sum();
    (sum / a.len() as f64) as f32
}

/// Mean squared difference, accumulated in f64.
pub fn mse(a: &[f32], b: &[f32]) -> f32 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y) as f64;
            d * d
        })
        .sum();
    (sum / a.len() as f64) as f32
}

/// out = alpha * a + beta * b, elementwise.
pub fn axpby(alpha: f32, a: &[f32], beta: f32, b: &[f32], out: &mut [f32]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = alpha.mul_add(x, beta * y);
    }
}
