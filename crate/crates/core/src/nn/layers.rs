//! Forward and reverse passes for the individual layer kinds.
//!
//! Every backward routine accumulates parameter gradients into caller-owned
//! matrices and returns the cotangent with respect to the layer input, so
//! gradients can flow through unrolled multi-network chains.

use alloc::vec;
use alloc::vec::Vec;

use crate::mat::{matmul, matmul_nt, matmul_tn_acc, Mat};

#[inline]
fn add_bias(m: &mut Mat, bias: &Mat) {
    let cols = m.cols();
    debug_assert_eq!(bias.cols(), cols);
    let b = bias.as_slice();
    for i in 0..m.rows() {
        for (v, &bv) in m.row_mut(i).iter_mut().zip(b) {
            *v += bv;
        }
    }
}

#[inline]
fn relu_inplace(m: &mut Mat) {
    for v in m.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes cotangent entries where the cached pre-activation was not positive.
#[inline]
fn relu_mask(cot: &mut Mat, pre: &Mat) {
    for (g, &z) in cot.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

pub(crate) struct EdgeConvCache {
    pub input: Mat,
    /// Flat `n * graph_k` neighbor indices.
    pub nbrs: Vec<usize>,
    pub graph_k: usize,
    /// Pre-activations of the two edge-MLP layers, `(n * graph_k) x out`.
    pub z1: Mat,
    pub z2: Mat,
    /// Flat `n * out` row indices into `z2` chosen by the max aggregation.
    pub argmax: Vec<usize>,
}

fn gather_edges(input: &Mat, nbrs: &[usize], graph_k: usize) -> Mat {
    let n = input.rows();
    let c = input.cols();
    let mut edges = Mat::zeros(n * graph_k, 2 * c);
    for i in 0..n {
        let fi = input.row(i);
        for s in 0..graph_k {
            let j = nbrs[i * graph_k + s];
            let row = edges.row_mut(i * graph_k + s);
            let fj = &input.as_slice()[j * c..(j + 1) * c];
            row[..c].copy_from_slice(fi);
            for (slot, (&a, &b)) in row[c..].iter_mut().zip(fj.iter().zip(fi)) {
                *slot = a - b;
            }
        }
    }
    edges
}

/// Edge convolution: `[f_i, f_j - f_i]` through a shared two-layer ReLU
/// perceptron, then a per-feature max over each point's neighbors. Ties on
/// the max go to the first neighbor slot.
pub(crate) fn edgeconv_forward(
    input: &Mat,
    nbrs: &[usize],
    graph_k: usize,
    w1: &Mat,
    b1: &Mat,
    w2: &Mat,
    b2: &Mat,
) -> (Mat, EdgeConvCache) {
    let n = input.rows();
    let out_w = w2.cols();
    let edges = gather_edges(input, nbrs, graph_k);

    let mut z1 = matmul(&edges, w1);
    add_bias(&mut z1, b1);
    let mut h1 = z1.clone();
    relu_inplace(&mut h1);

    let mut z2 = matmul(&h1, w2);
    add_bias(&mut z2, b2);

    let mut out = Mat::zeros(n, out_w);
    let mut argmax = vec![0usize; n * out_w];
    for i in 0..n {
        for f in 0..out_w {
            let mut best_r = i * graph_k;
            let mut best = z2.get(best_r, f).max(0.0);
            for s in 1..graph_k {
                let r = i * graph_k + s;
                let v = z2.get(r, f).max(0.0);
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
            out.set(i, f, best);
            argmax[i * out_w + f] = best_r;
        }
    }

    let cache = EdgeConvCache {
        input: input.clone(),
        nbrs: nbrs.to_vec(),
        graph_k,
        z1,
        z2,
        argmax,
    };
    (out, cache)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn edgeconv_backward(
    cache: &EdgeConvCache,
    w1: &Mat,
    w2: &Mat,
    g_out: &Mat,
    g_w1: &mut Mat,
    g_b1: &mut Mat,
    g_w2: &mut Mat,
    g_b2: &mut Mat,
) -> Mat {
    let n = cache.input.rows();
    let c = cache.input.cols();
    let k = cache.graph_k;
    let out_w = g_out.cols();

    // Max aggregation routes each output's cotangent to its arg-max edge;
    // the outer ReLU gate is `z2 > 0` at that edge.
    let mut g_z2 = Mat::zeros(n * k, out_w);
    for i in 0..n {
        for f in 0..out_w {
            let r = cache.argmax[i * out_w + f];
            if cache.z2.get(r, f) > 0.0 {
                let cur = g_z2.get(r, f);
                g_z2.set(r, f, cur + g_out.get(i, f));
            }
        }
    }

    let mut h1 = cache.z1.clone();
    relu_inplace(&mut h1);
    matmul_tn_acc(&h1, &g_z2, g_w2);
    let sums2 = g_z2.col_sums();
    for (a, &b) in g_b2.as_mut_slice().iter_mut().zip(sums2.as_slice()) {
        *a += b;
    }

    let mut g_z1 = matmul_nt(&g_z2, w2);
    relu_mask(&mut g_z1, &cache.z1);

    let edges = gather_edges(&cache.input, &cache.nbrs, k);
    matmul_tn_acc(&edges, &g_z1, g_w1);
    let sums1 = g_z1.col_sums();
    for (a, &b) in g_b1.as_mut_slice().iter_mut().zip(sums1.as_slice()) {
        *a += b;
    }

    let g_edges = matmul_nt(&g_z1, w1);
    let mut g_input = Mat::zeros(n, c);
    for i in 0..n {
        for s in 0..k {
            let r = i * k + s;
            let j = cache.nbrs[r];
            let ge = g_edges.row(r);
            for a in 0..c {
                let first = ge[a];
                let second = ge[c + a];
                let gi = g_input.get(i, a);
                g_input.set(i, a, gi + first - second);
                let gj = g_input.get(j, a);
                g_input.set(j, a, gj + second);
            }
        }
    }
    g_input
}

pub(crate) struct PointwiseCache {
    pub input: Mat,
    pub z: Mat,
    pub relu: bool,
}

/// Shared per-point linear layer, optionally followed by ReLU.
pub(crate) fn pointwise_forward(input: &Mat, w: &Mat, b: &Mat, relu: bool) -> (Mat, PointwiseCache) {
    let mut z = matmul(input, w);
    add_bias(&mut z, b);
    let mut out = z.clone();
    if relu {
        relu_inplace(&mut out);
    }
    let cache = PointwiseCache {
        input: input.clone(),
        z,
        relu,
    };
    (out, cache)
}

pub(crate) fn pointwise_backward(
    cache: &PointwiseCache,
    w: &Mat,
    g_out: &Mat,
    g_w: &mut Mat,
    g_b: &mut Mat,
) -> Mat {
    let mut g_z = g_out.clone();
    if cache.relu {
        relu_mask(&mut g_z, &cache.z);
    }
    matmul_tn_acc(&cache.input, &g_z, g_w);
    let sums = g_z.col_sums();
    for (a, &b) in g_b.as_mut_slice().iter_mut().zip(sums.as_slice()) {
        *a += b;
    }
    matmul_nt(&g_z, w)
}

pub(crate) struct PoolCache {
    pub in_rows: usize,
    /// Per-feature row index of the maximum (first row on ties).
    pub argmax: Vec<usize>,
}

/// Global per-feature max over all points, producing a single row.
pub(crate) fn global_max_pool_forward(input: &Mat) -> (Mat, PoolCache) {
    let n = input.rows();
    let c = input.cols();
    let mut out = Mat::zeros(1, c);
    let mut argmax = vec![0usize; c];
    out.row_mut(0).copy_from_slice(input.row(0));
    for i in 1..n {
        let row = input.row(i);
        for f in 0..c {
            if row[f] > out.get(0, f) {
                out.set(0, f, row[f]);
                argmax[f] = i;
            }
        }
    }
    (
        out,
        PoolCache {
            in_rows: n,
            argmax,
        },
    )
}

pub(crate) fn global_max_pool_backward(cache: &PoolCache, width: usize, g_out: &Mat) -> Mat {
    let mut g_input = Mat::zeros(cache.in_rows, width);
    for f in 0..width {
        g_input.set(cache.argmax[f], f, g_out.get(0, f));
    }
    g_input
}

pub(crate) struct HeadCache {
    pub input: Mat,
    pub out: Mat,
}

/// Linear layer followed by a logistic sigmoid.
pub(crate) fn sigmoid_head_forward(input: &Mat, w: &Mat, b: &Mat) -> (Mat, HeadCache) {
    let mut z = matmul(input, w);
    add_bias(&mut z, b);
    let mut out = z;
    for v in out.as_mut_slice() {
        *v = crate::fx::sigmoid(*v);
    }
    (
        out.clone(),
        HeadCache {
            input: input.clone(),
            out,
        },
    )
}

pub(crate) fn sigmoid_head_backward(
    cache: &HeadCache,
    w: &Mat,
    g_out: &Mat,
    g_w: &mut Mat,
    g_b: &mut Mat,
) -> Mat {
    let mut g_z = g_out.clone();
    for (g, &y) in g_z.as_mut_slice().iter_mut().zip(cache.out.as_slice()) {
        *g *= y * (1.0 - y);
    }
    matmul_tn_acc(&cache.input, &g_z, g_w);
    let sums = g_z.col_sums();
    for (a, &b) in g_b.as_mut_slice().iter_mut().zip(sums.as_slice()) {
        *a += b;
    }
    matmul_nt(&g_z, w)
}
