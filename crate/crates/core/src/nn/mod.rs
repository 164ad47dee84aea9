//! Minimal dense/graph network substrate: parameter storage, forwards,
//! exact reverse-mode gradients, Adam, and the binary model codec.
//!
//! Everything is `f64`. Forwards are deterministic functions of
//! `(parameters, input)`; max aggregations route gradients to the first
//! arg-max element on ties, so backwards are deterministic too.

mod adam;
mod codec;
mod layers;

pub use adam::{adam_step, AdamState};
pub use codec::{decode_nets, encode_nets, ModelBundle};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{knn_exhaustive, SpatialIndex, KNN_INDEX_THRESHOLD};
use crate::mat::Mat;
use crate::Result;
use layers::{EdgeConvCache, HeadCache, PointwiseCache, PoolCache};

/// Layer kinds understood by the substrate (and the model file format).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    EdgeConv,
    PointwiseMlp,
    GlobalMaxPool,
    SigmoidHead,
}

impl LayerKind {
    pub fn code(self) -> u32 {
        match self {
            LayerKind::EdgeConv => 0,
            LayerKind::PointwiseMlp => 1,
            LayerKind::GlobalMaxPool => 2,
            LayerKind::SigmoidHead => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(LayerKind::EdgeConv),
            1 => Some(LayerKind::PointwiseMlp),
            2 => Some(LayerKind::GlobalMaxPool),
            3 => Some(LayerKind::SigmoidHead),
            _ => None,
        }
    }
}

/// Shape of one layer. `graph_k` is only meaningful for edge convolutions
/// and is zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_width: usize,
    pub out_width: usize,
    pub graph_k: usize,
}

impl LayerSpec {
    pub fn edgeconv(in_width: usize, out_width: usize, graph_k: usize) -> Self {
        LayerSpec {
            kind: LayerKind::EdgeConv,
            in_width,
            out_width,
            graph_k,
        }
    }

    pub fn pointwise(in_width: usize, out_width: usize) -> Self {
        LayerSpec {
            kind: LayerKind::PointwiseMlp,
            in_width,
            out_width,
            graph_k: 0,
        }
    }

    pub fn global_max_pool(width: usize) -> Self {
        LayerSpec {
            kind: LayerKind::GlobalMaxPool,
            in_width: width,
            out_width: width,
            graph_k: 0,
        }
    }

    pub fn sigmoid_head(in_width: usize, out_width: usize) -> Self {
        LayerSpec {
            kind: LayerKind::SigmoidHead,
            in_width,
            out_width,
            graph_k: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.in_width == 0 || self.out_width == 0 {
            return Err(Error::InvalidConfig("layer widths must be at least 1".into()));
        }
        match self.kind {
            LayerKind::EdgeConv => {
                if self.graph_k == 0 {
                    return Err(Error::InvalidConfig(
                        "edgeconv needs graph_k >= 1".into(),
                    ));
                }
            }
            LayerKind::GlobalMaxPool => {
                if self.in_width != self.out_width {
                    return Err(Error::InvalidConfig(
                        "global max pool cannot change width".into(),
                    ));
                }
                if self.graph_k != 0 {
                    return Err(Error::InvalidConfig("graph_k only applies to edgeconv".into()));
                }
            }
            _ => {
                if self.graph_k != 0 {
                    return Err(Error::InvalidConfig("graph_k only applies to edgeconv".into()));
                }
            }
        }
        Ok(())
    }

    /// Expected parameter names and shapes for this layer, in declaration
    /// order.
    fn param_shapes(&self, layer_idx: usize) -> Vec<(String, usize, usize)> {
        let l = layer_idx;
        match self.kind {
            LayerKind::EdgeConv => alloc::vec![
                (alloc::format!("l{l}.w1"), 2 * self.in_width, self.out_width),
                (alloc::format!("l{l}.b1"), 1, self.out_width),
                (alloc::format!("l{l}.w2"), self.out_width, self.out_width),
                (alloc::format!("l{l}.b2"), 1, self.out_width),
            ],
            LayerKind::PointwiseMlp | LayerKind::SigmoidHead => alloc::vec![
                (alloc::format!("l{l}.w"), self.in_width, self.out_width),
                (alloc::format!("l{l}.b"), 1, self.out_width),
            ],
            LayerKind::GlobalMaxPool => Vec::new(),
        }
    }
}

/// A named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Mat,
}

/// Named parameter arrays with a deterministic iteration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|p| p.name == name) {
            return Err(Error::InvalidConfig(alloc::format!(
                "duplicate parameter name {name}"
            )));
        }
        self.entries.push(Param { name, value });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.entries
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.entries
            .iter_mut()
            .find(|p| p.name == name)
            .map(|p| &mut p.value)
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = (&str, &mut Mat)> {
        self.entries
            .iter_mut()
            .map(|p| (p.name.as_str(), &mut p.value))
    }

    /// Total number of scalars across all parameters.
    pub fn total_len(&self) -> usize {
        self.entries.iter().map(|p| p.value.as_slice().len()).sum()
    }

    /// A store with identical names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamStore {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: Mat::zeros(p.value.rows(), p.value.cols()),
                })
                .collect(),
        }
    }

    /// True when both stores match bit for bit (names, shapes, values).
    pub fn bitwise_eq(&self, other: &ParamStore) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.name == b.name
                    && a.value.same_shape(&b.value)
                    && a.value
                        .as_slice()
                        .iter()
                        .zip(b.value.as_slice())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    fn aligned_with(&self, other: &ParamStore) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.value.same_shape(&b.value))
    }
}

enum LayerCache {
    EdgeConv(EdgeConvCache),
    Pointwise(PointwiseCache),
    GlobalMaxPool(PoolCache),
    SigmoidHead(HeadCache),
}

/// Cached intermediates from one [`Net::forward`] call.
pub struct NetCache {
    layers: Vec<LayerCache>,
    input_rows: usize,
}

/// Gradients from one [`Net::backward`] call.
pub struct NetGrads {
    /// Gradient for every parameter, shaped like the net's store.
    pub params: ParamStore,
    /// Cotangent with respect to the input points.
    pub input: Vec<[f64; 3]>,
}

/// A layer list plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    layers: Vec<LayerSpec>,
    params: ParamStore,
}

impl Net {
    /// Wraps existing parameters, validating layer chaining and shapes.
    pub fn with_params(layers: Vec<LayerSpec>, params: ParamStore) -> Result<Self> {
        validate_layers(&layers)?;
        let expected: Vec<(String, usize, usize)> = layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.param_shapes(i))
            .collect();
        if expected.len() != params.entries().len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "expected {} parameters, got {}",
                expected.len(),
                params.entries().len()
            )));
        }
        for ((name, rows, cols), param) in expected.iter().zip(params.entries()) {
            if *name != param.name
                || param.value.rows() != *rows
                || param.value.cols() != *cols
            {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "parameter {} has shape {}x{}, expected {name} {rows}x{cols}",
                    param.name,
                    param.value.rows(),
                    param.value.cols()
                )));
            }
        }
        Ok(Net { layers, params })
    }

    /// Fresh net with weights uniform in `(-sqrt(1/fan_in), sqrt(1/fan_in))`
    /// and zero biases, drawn in declaration order from `rng`.
    pub fn init(layers: Vec<LayerSpec>, rng: &mut crate::Rng) -> Result<Self> {
        use rand::Rng as _;
        validate_layers(&layers)?;
        let mut params = ParamStore::new();
        for (i, layer) in layers.iter().enumerate() {
            for (name, rows, cols) in layer.param_shapes(i) {
                let is_bias = name.contains(".b");
                let mut m = Mat::zeros(rows, cols);
                if !is_bias {
                    let bound = crate::fx::sqrt(1.0 / rows as f64);
                    for v in m.as_mut_slice() {
                        *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
                    }
                }
                params.add(name, m)?;
            }
        }
        Ok(Net { layers, params })
    }

    /// A zero-parameter net of the same architecture (useful as an identity
    /// filter: zero output everywhere).
    pub fn zeroed(layers: Vec<LayerSpec>) -> Result<Self> {
        validate_layers(&layers)?;
        let mut params = ParamStore::new();
        for (i, layer) in layers.iter().enumerate() {
            for (name, rows, cols) in layer.param_shapes(i) {
                params.add(name, Mat::zeros(rows, cols))?;
            }
        }
        Ok(Net { layers, params })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.total_len()
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width
    }

    pub fn out_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width
    }

    /// Runs the net on patch points, returning the output and the caches
    /// needed by [`Net::backward`].
    ///
    /// Neighbor graphs for edge convolutions are computed once per call from
    /// the input positions (one graph per distinct `graph_k`); the graph is
    /// static within the call and carries no gradient.
    pub fn forward(&self, points: &[[f64; 3]]) -> Result<(Mat, NetCache)> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if self.in_width() != 3 {
            return Err(Error::ShapeMismatch(
                "first layer must consume 3-wide input".into(),
            ));
        }
        let n = points.len();
        let mut graphs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for layer in &self.layers {
            if layer.kind == LayerKind::EdgeConv && !graphs.contains_key(&layer.graph_k) {
                graphs.insert(layer.graph_k, build_graph(points, layer.graph_k)?);
            }
        }

        let mut x = Mat::from_points(points);
        let mut caches = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            debug_assert_eq!(x.cols(), layer.in_width);
            match layer.kind {
                LayerKind::EdgeConv => {
                    let nbrs = &graphs[&layer.graph_k];
                    let (out, cache) = layers::edgeconv_forward(
                        &x,
                        nbrs,
                        layer.graph_k,
                        self.param(li, "w1"),
                        self.param(li, "b1"),
                        self.param(li, "w2"),
                        self.param(li, "b2"),
                    );
                    x = out;
                    caches.push(LayerCache::EdgeConv(cache));
                }
                LayerKind::PointwiseMlp => {
                    // Hidden pointwise layers use ReLU; a final pointwise
                    // layer is a plain linear output.
                    let relu = li != last;
                    let (out, cache) = layers::pointwise_forward(
                        &x,
                        self.param(li, "w"),
                        self.param(li, "b"),
                        relu,
                    );
                    x = out;
                    caches.push(LayerCache::Pointwise(cache));
                }
                LayerKind::GlobalMaxPool => {
                    let (out, cache) = layers::global_max_pool_forward(&x);
                    x = out;
                    caches.push(LayerCache::GlobalMaxPool(cache));
                }
                LayerKind::SigmoidHead => {
                    let (out, cache) = layers::sigmoid_head_forward(
                        &x,
                        self.param(li, "w"),
                        self.param(li, "b"),
                    );
                    x = out;
                    caches.push(LayerCache::SigmoidHead(cache));
                }
            }
        }
        Ok((
            x,
            NetCache {
                layers: caches,
                input_rows: n,
            },
        ))
    }

    /// Exact reverse-mode gradients for `sum(out * out_cot)` with respect to
    /// every parameter and to the input points.
    pub fn backward(&self, cache: &NetCache, out_cot: &Mat) -> Result<NetGrads> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(
                "cache does not match this net".into(),
            ));
        }
        let mut grads = self.params.zeros_like();
        let mut cot = out_cot.clone();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            match (&cache.layers[li], layer.kind) {
                (LayerCache::EdgeConv(c), LayerKind::EdgeConv) => {
                    let w1 = self.param(li, "w1").clone();
                    let w2 = self.param(li, "w2").clone();
                    let [g_w1, g_b1, g_w2, g_b2] =
                        grads_edgeconv_mut(&mut grads, li);
                    cot = layers::edgeconv_backward(c, &w1, &w2, &cot, g_w1, g_b1, g_w2, g_b2);
                }
                (LayerCache::Pointwise(c), LayerKind::PointwiseMlp) => {
                    let w = self.param(li, "w").clone();
                    let [g_w, g_b] = grads_linear_mut(&mut grads, li);
                    cot = layers::pointwise_backward(c, &w, &cot, g_w, g_b);
                }
                (LayerCache::GlobalMaxPool(c), LayerKind::GlobalMaxPool) => {
                    cot = layers::global_max_pool_backward(c, layer.in_width, &cot);
                }
                (LayerCache::SigmoidHead(c), LayerKind::SigmoidHead) => {
                    let w = self.param(li, "w").clone();
                    let [g_w, g_b] = grads_linear_mut(&mut grads, li);
                    cot = layers::sigmoid_head_backward(c, &w, &cot, g_w, g_b);
                }
                _ => {
                    return Err(Error::ShapeMismatch(
                        "cache does not match this net".into(),
                    ))
                }
            }
        }
        debug_assert_eq!(cot.rows(), cache.input_rows);
        Ok(NetGrads {
            params: grads,
            input: cot.to_points(),
        })
    }

    fn param(&self, layer: usize, part: &str) -> &Mat {
        self.params
            .get(&alloc::format!("l{layer}.{part}"))
            .expect("validated at construction")
    }
}

fn grads_edgeconv_mut(grads: &mut ParamStore, li: usize) -> [&mut Mat; 4] {
    let names = [
        alloc::format!("l{li}.w1"),
        alloc::format!("l{li}.b1"),
        alloc::format!("l{li}.w2"),
        alloc::format!("l{li}.b2"),
    ];
    let mut found: [Option<&mut Mat>; 4] = [None, None, None, None];
    for (name, mat) in grads.values_mut() {
        if let Some(pos) = names.iter().position(|n| n == name) {
            found[pos] = Some(mat);
        }
    }
    found.map(|m| m.expect("gradient store shaped like params"))
}

fn grads_linear_mut(grads: &mut ParamStore, li: usize) -> [&mut Mat; 2] {
    let names = [alloc::format!("l{li}.w"), alloc::format!("l{li}.b")];
    let mut found: [Option<&mut Mat>; 2] = [None, None];
    for (name, mat) in grads.values_mut() {
        if let Some(pos) = names.iter().position(|n| n == name) {
            found[pos] = Some(mat);
        }
    }
    found.map(|m| m.expect("gradient store shaped like params"))
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::InvalidConfig("net needs at least one layer".into()));
    }
    for layer in layers {
        layer.validate()?;
    }
    for pair in layers.windows(2) {
        if pair[0].out_width != pair[1].in_width {
            return Err(Error::ShapeMismatch(alloc::format!(
                "layer output width {} does not feed width {}",
                pair[0].out_width,
                pair[1].in_width
            )));
        }
    }
    Ok(())
}

fn build_graph(points: &[[f64; 3]], graph_k: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if graph_k > n {
        return Err(Error::KTooLarge {
            k: graph_k,
            available: n,
        });
    }
    let mut flat = Vec::with_capacity(n * graph_k);
    if n > KNN_INDEX_THRESHOLD {
        let index = SpatialIndex::build(points);
        for &p in points {
            flat.extend(index.nearest_k(p, graph_k));
        }
    } else {
        for &p in points {
            flat.extend(knn_exhaustive(points, p, graph_k));
        }
    }
    Ok(flat)
}

/// Standalone edge convolution on explicit neighbor lists (the building
/// block [`Net::forward`] uses with a shared per-call graph).
pub fn edgeconv_forward(
    features: &Mat,
    neighbors: &[Vec<usize>],
    w1: &Mat,
    b1: &Mat,
    w2: &Mat,
    b2: &Mat,
) -> Result<Mat> {
    let n = features.rows();
    if neighbors.len() != n {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} neighbor lists for {} points",
            neighbors.len(),
            n
        )));
    }
    let k = neighbors.first().map_or(0, Vec::len);
    if k == 0 || neighbors.iter().any(|l| l.len() != k) {
        return Err(Error::ShapeMismatch(
            "neighbor lists must share a positive length".into(),
        ));
    }
    let mut flat = Vec::with_capacity(n * k);
    for list in neighbors {
        for &j in list {
            if j >= n {
                return Err(Error::IndexOutOfBounds { index: j, len: n });
            }
            flat.push(j);
        }
    }
    if w1.rows() != 2 * features.cols() || w1.cols() != w2.rows() || w2.rows() != w2.cols() {
        return Err(Error::ShapeMismatch("edgeconv weight shapes".into()));
    }
    let (out, _) = layers::edgeconv_forward(features, &flat, k, w1, b1, w2, b2);
    Ok(out)
}

/// Default neighbor count for edge convolutions.
pub const DEFAULT_GRAPH_K: usize = 16;

/// Layer stack of a velocity module: per-point 3D displacement rates.
pub fn velocity_layers(graph_k: usize) -> Vec<LayerSpec> {
    alloc::vec![
        LayerSpec::edgeconv(3, 32, graph_k),
        LayerSpec::edgeconv(32, 64, graph_k),
        LayerSpec::pointwise(64, 64),
        LayerSpec::pointwise(64, 3),
    ]
}

/// Layer stack of a distance module: one scalar in `(0, 1)` per patch.
pub fn distance_layers(graph_k: usize) -> Vec<LayerSpec> {
    alloc::vec![
        LayerSpec::edgeconv(3, 32, graph_k),
        LayerSpec::pointwise(32, 64),
        LayerSpec::global_max_pool(64),
        LayerSpec::sigmoid_head(64, 1),
    ]
}

#[cfg(test)]
mod tests;
