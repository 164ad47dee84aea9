use super::*;
use crate::mat::Mat;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

pub(crate) fn random_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = crate::rng_from_seed(seed);
    (0..n)
        .map(|_| {
            [
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ]
        })
        .collect()
}

fn random_cot(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = crate::rng_from_seed(seed);
    let data = (0..rows * cols)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    Mat::from_vec(rows, cols, data).unwrap()
}

fn weighted_output(net: &Net, pts: &[[f64; 3]], cot: &Mat) -> f64 {
    let (out, _) = net.forward(pts).unwrap();
    out.as_slice()
        .iter()
        .zip(cot.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

pub(crate) fn max_rel_err(analytic: &ParamStore, fd: &ParamStore) -> f64 {
    let mut worst = 0.0f64;
    for (a, b) in analytic.entries().iter().zip(fd.entries()) {
        for (&x, &y) in a.value.as_slice().iter().zip(b.value.as_slice()) {
            let denom = x.abs().max(y.abs()).max(1e-6);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

/// Central finite differences over every parameter, h = 1e-5.
pub(crate) fn fd_param_grads(net: &Net, pts: &[[f64; 3]], cot: &Mat) -> ParamStore {
    let h = 1e-5;
    let mut fd = net.params().zeros_like();
    let names: Vec<alloc::string::String> = net
        .params()
        .entries()
        .iter()
        .map(|p| p.name.clone())
        .collect();
    for name in &names {
        let len = net.params().get(name).unwrap().as_slice().len();
        for idx in 0..len {
            let mut plus = net.clone();
            plus.params_mut().get_mut(name).unwrap().as_mut_slice()[idx] += h;
            let mut minus = net.clone();
            minus.params_mut().get_mut(name).unwrap().as_mut_slice()[idx] -= h;
            let g = (weighted_output(&plus, pts, cot) - weighted_output(&minus, pts, cot))
                / (2.0 * h);
            fd.get_mut(name).unwrap().as_mut_slice()[idx] = g;
        }
    }
    fd
}

fn tiny_velocity_net(seed: u64) -> Net {
    let layers = vec![
        LayerSpec::edgeconv(3, 4, 3),
        LayerSpec::edgeconv(4, 5, 3),
        LayerSpec::pointwise(5, 4),
        LayerSpec::pointwise(4, 3),
    ];
    Net::init(layers, &mut crate::rng_from_seed(seed)).unwrap()
}

fn tiny_distance_net(seed: u64) -> Net {
    let layers = vec![
        LayerSpec::edgeconv(3, 4, 3),
        LayerSpec::pointwise(4, 6),
        LayerSpec::global_max_pool(6),
        LayerSpec::sigmoid_head(6, 1),
    ];
    Net::init(layers, &mut crate::rng_from_seed(seed)).unwrap()
}

#[test]
fn zero_weight_edgeconv_outputs_zeros() {
    let feats = Mat::from_vec(3, 2, vec![1.0, -2.0, 0.5, 3.0, 2.0, 1.0]).unwrap();
    let nbrs = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
    let out = edgeconv_forward(
        &feats,
        &nbrs,
        &Mat::zeros(4, 5),
        &Mat::zeros(1, 5),
        &Mat::zeros(5, 5),
        &Mat::zeros(1, 5),
    )
    .unwrap();
    assert!(out.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn edgeconv_matches_hand_computation() {
    // Width-1 features, one neighbor each: point 0 sees [1, 2] -> z1 = 5.5,
    // z2 = -3.5 -> relu -> 0; point 1 sees [3, -2] -> z1 = -0.5 -> relu -> 0,
    // z2 = 2 -> 2.
    let feats = Mat::from_vec(2, 1, vec![1.0, 3.0]).unwrap();
    let nbrs = vec![vec![1], vec![0]];
    let w1 = Mat::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
    let b1 = Mat::from_vec(1, 1, vec![0.5]).unwrap();
    let w2 = Mat::from_vec(1, 1, vec![-1.0]).unwrap();
    let b2 = Mat::from_vec(1, 1, vec![2.0]).unwrap();
    let out = edgeconv_forward(&feats, &nbrs, &w1, &b1, &w2, &b2).unwrap();
    assert_eq!(out.as_slice(), &[0.0, 2.0]);
}

#[test]
fn edgeconv_is_permutation_equivariant() {
    let feats = random_points(6, 31);
    let mat = Mat::from_points(&feats);
    let nbrs: Vec<Vec<usize>> = (0..6).map(|i| vec![(i + 1) % 6, (i + 2) % 6]).collect();
    let mut rng = crate::rng_from_seed(32);
    let w1 = random_cot(6, 4, 33);
    let b1 = random_cot(1, 4, 34);
    let w2 = random_cot(4, 4, 35);
    let b2 = random_cot(1, 4, 36);
    let base = edgeconv_forward(&mat, &nbrs, &w1, &b1, &w2, &b2).unwrap();

    // Apply a random permutation to points and remap neighbor indices.
    let mut perm: Vec<usize> = (0..6).collect();
    for i in (1..6).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut inv = vec![0usize; 6];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let permuted_feats: Vec<[f64; 3]> = perm.iter().map(|&old| feats[old]).collect();
    let permuted_nbrs: Vec<Vec<usize>> = perm
        .iter()
        .map(|&old| nbrs[old].iter().map(|&j| inv[j]).collect())
        .collect();
    let permuted = edgeconv_forward(
        &Mat::from_points(&permuted_feats),
        &permuted_nbrs,
        &w1,
        &b1,
        &w2,
        &b2,
    )
    .unwrap();
    for (new, &old) in perm.iter().enumerate() {
        assert_eq!(permuted.row(new), base.row(old));
    }
}

#[test]
fn edgeconv_output_invariant_to_neighbor_order() {
    let feats = Mat::from_points(&random_points(8, 41));
    let nbrs: Vec<Vec<usize>> = (0..8).map(|i| vec![(i + 1) % 8, (i + 3) % 8, (i + 5) % 8]).collect();
    let shuffled: Vec<Vec<usize>> = nbrs
        .iter()
        .map(|l| vec![l[2], l[0], l[1]])
        .collect();
    let w1 = random_cot(6, 5, 42);
    let b1 = random_cot(1, 5, 43);
    let w2 = random_cot(5, 5, 44);
    let b2 = random_cot(1, 5, 45);
    let a = edgeconv_forward(&feats, &nbrs, &w1, &b1, &w2, &b2).unwrap();
    let b = edgeconv_forward(&feats, &shuffled, &w1, &b1, &w2, &b2).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
}

#[test]
fn zero_net_outputs_zeros_of_correct_shape() {
    let net = Net::zeroed(velocity_layers(4)).unwrap();
    let pts = random_points(12, 51);
    let (out, _) = net.forward(&pts).unwrap();
    assert_eq!(out.rows(), 12);
    assert_eq!(out.cols(), 3);
    assert!(out.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn single_pointwise_layer_matches_hand_computation() {
    // A lone pointwise layer is the final layer, hence no activation.
    let net = Net::with_params(vec![LayerSpec::pointwise(3, 2)], {
        let mut p = ParamStore::new();
        p.add(
            "l0.w",
            Mat::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, -1.0]).unwrap(),
        )
        .unwrap();
        p.add("l0.b", Mat::from_vec(1, 2, vec![0.5, -0.5]).unwrap())
            .unwrap();
        p
    })
    .unwrap();
    let pts = [[1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [-1.0, 1.0, 2.0]];
    let (out, _) = net.forward(&pts).unwrap();
    // Row i = [x + z + 0.5, y - z - 0.5]
    assert_eq!(out.row(0), &[4.5, -1.5]);
    assert_eq!(out.row(1), &[0.5, -0.5]);
    assert_eq!(out.row(2), &[1.5, -1.5]);
}

#[test]
fn forward_is_deterministic() {
    let net = tiny_velocity_net(7);
    let pts = random_points(16, 8);
    let (a, _) = net.forward(&pts).unwrap();
    let (b, _) = net.forward(&pts).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
}

#[test]
fn zero_cotangent_gives_zero_gradients() {
    let net = tiny_velocity_net(9);
    let pts = random_points(16, 10);
    let (out, cache) = net.forward(&pts).unwrap();
    let grads = net
        .backward(&cache, &Mat::zeros(out.rows(), out.cols()))
        .unwrap();
    assert!(grads
        .params
        .entries()
        .iter()
        .all(|p| p.value.as_slice().iter().all(|&v| v == 0.0)));
    assert!(grads.input.iter().all(|p| *p == [0.0, 0.0, 0.0]));
}

#[test]
fn backward_is_additive_over_cotangents() {
    let net = tiny_velocity_net(11);
    let pts = random_points(16, 12);
    let (out, cache) = net.forward(&pts).unwrap();
    let c1 = random_cot(out.rows(), out.cols(), 13);
    let c2 = random_cot(out.rows(), out.cols(), 14);
    let mut c12 = c1.clone();
    for (a, &b) in c12.as_mut_slice().iter_mut().zip(c2.as_slice()) {
        *a += b;
    }
    let g1 = net.backward(&cache, &c1).unwrap();
    let g2 = net.backward(&cache, &c2).unwrap();
    let g12 = net.backward(&cache, &c12).unwrap();
    for ((a, b), s) in g1
        .params
        .entries()
        .iter()
        .zip(g2.params.entries())
        .zip(g12.params.entries())
    {
        for ((&x, &y), &z) in a
            .value
            .as_slice()
            .iter()
            .zip(b.value.as_slice())
            .zip(s.value.as_slice())
        {
            assert!((x + y - z).abs() <= 1e-12 * (x.abs() + y.abs()).max(1.0));
        }
    }
}

#[test]
fn velocity_net_gradients_match_finite_differences() {
    let net = tiny_velocity_net(21);
    let pts = random_points(16, 22);
    let (out, cache) = net.forward(&pts).unwrap();
    let cot = random_cot(out.rows(), out.cols(), 23);
    let analytic = net.backward(&cache, &cot).unwrap();
    let fd = fd_param_grads(&net, &pts, &cot);
    let err = max_rel_err(&analytic.params, &fd);
    assert!(err <= 1e-4, "max rel err {err}");
}

#[test]
fn distance_net_gradients_match_finite_differences() {
    let net = tiny_distance_net(25);
    let pts = random_points(16, 26);
    let (out, cache) = net.forward(&pts).unwrap();
    let cot = random_cot(out.rows(), out.cols(), 27);
    let analytic = net.backward(&cache, &cot).unwrap();
    let fd = fd_param_grads(&net, &pts, &cot);
    let err = max_rel_err(&analytic.params, &fd);
    assert!(err <= 1e-4, "max rel err {err}");
}

#[test]
fn input_gradients_match_finite_differences() {
    // Input cotangents drive the unrolled multi-step losses; check them the
    // same way as parameter gradients. The neighbor graph is frozen from the
    // unperturbed positions so the comparison differentiates the smooth path.
    let net = tiny_velocity_net(28);
    let pts = random_points(16, 29);
    let (out, cache) = net.forward(&pts).unwrap();
    let cot = random_cot(out.rows(), out.cols(), 30);
    let analytic = net.backward(&cache, &cot).unwrap();

    let h = 1e-6;
    for i in 0..pts.len() {
        for a in 0..3 {
            let mut plus = pts.to_vec();
            plus[i][a] += h;
            let mut minus = pts.to_vec();
            minus[i][a] -= h;
            let fd = (weighted_output(&net, &plus, &cot)
                - weighted_output(&net, &minus, &cot))
                / (2.0 * h);
            let an = analytic.input[i][a];
            let denom = an.abs().max(fd.abs()).max(1e-4);
            assert!(
                (an - fd).abs() / denom <= 2e-3,
                "input grad point {i} axis {a}: analytic {an}, fd {fd}"
            );
        }
    }
}

#[test]
fn default_architectures_have_documented_parameter_counts() {
    let vm = Net::zeroed(velocity_layers(DEFAULT_GRAPH_K)).unwrap();
    let dm = Net::zeroed(distance_layers(DEFAULT_GRAPH_K)).unwrap();
    assert_eq!(vm.param_count(), 13_955);
    assert_eq!(dm.param_count(), 3_457);
}

#[test]
fn net_validates_width_chaining() {
    let err = Net::zeroed(vec![
        LayerSpec::edgeconv(3, 8, 4),
        LayerSpec::pointwise(16, 3),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch(_)));
}

mod adam_tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut p = ParamStore::new();
        p.add("w", Mat::from_vec(1, 1, vec![v]).unwrap()).unwrap();
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = scalar_store(0.7);
        let grads = scalar_store(0.0);
        let mut st = AdamState::new(&params, 0.1);
        adam_step(&mut params, &grads, &mut st).unwrap();
        assert_eq!(params.get("w").unwrap().get(0, 0), 0.7);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn first_step_matches_closed_form() {
        // With bias correction the first step is -lr * g / (|g| + eps).
        let mut params = scalar_store(0.0);
        let grads = scalar_store(1.0);
        let mut st = AdamState::new(&params, 0.1);
        adam_step(&mut params, &grads, &mut st).unwrap();
        let got = params.get("w").unwrap().get(0, 0);
        assert!((got + 0.1).abs() < 1e-7, "got {got}");
    }

    #[test]
    fn matches_reference_implementation_and_is_nonlinear_in_lr() {
        // Independent reference Adam over a fixed gradient sequence.
        struct Reference {
            m: f64,
            v: f64,
            t: u32,
        }
        impl Reference {
            fn step(&mut self, p: &mut f64, g: f64, lr: f64) {
                self.t += 1;
                self.m = 0.9 * self.m + 0.1 * g;
                self.v = 0.999 * self.v + 0.001 * g * g;
                let mh = self.m / (1.0 - 0.9f64.powi(self.t as i32));
                let vh = self.v / (1.0 - 0.999f64.powi(self.t as i32));
                *p -= lr * mh / (vh.sqrt() + 1e-8);
            }
        }

        let gs = [1.0, -0.3, 0.8, 0.05, -1.2];
        let mut params = scalar_store(0.25);
        let mut st = AdamState::new(&params, 0.01);
        let mut reference = Reference { m: 0.0, v: 0.0, t: 0 };
        let mut rp = 0.25;
        for &g in &gs {
            adam_step(&mut params, &scalar_store(g), &mut st).unwrap();
            reference.step(&mut rp, g, 0.01);
            let got = params.get("w").unwrap().get(0, 0);
            assert!((got - rp).abs() <= 1e-12, "got {got}, reference {rp}");
        }

        // Two unit steps at lr differ from one step at 2*lr.
        let mut two = scalar_store(0.0);
        let mut st2 = AdamState::new(&two, 0.1);
        adam_step(&mut two, &scalar_store(1.0), &mut st2).unwrap();
        adam_step(&mut two, &scalar_store(1.0), &mut st2).unwrap();
        let mut one = scalar_store(0.0);
        let mut st1 = AdamState::new(&one, 0.2);
        adam_step(&mut one, &scalar_store(1.0), &mut st1).unwrap();
        assert!(
            (two.get("w").unwrap().get(0, 0) - one.get("w").unwrap().get(0, 0)).abs() > 1e-6
        );
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = scalar_store(0.0);
        let mut other = ParamStore::new();
        other
            .add("w", Mat::from_vec(1, 2, vec![0.0, 0.0]).unwrap())
            .unwrap();
        let mut st = AdamState::new(&params, 0.1);
        assert!(matches!(
            adam_step(&mut params, &other, &mut st),
            Err(Error::ShapeMismatch(_))
        ));
    }
}

mod codec_tests {
    use super::*;

    fn bundle() -> ModelBundle {
        let mut rng = crate::rng_from_seed(77);
        let vm0 = Net::init(velocity_layers(4), &mut rng).unwrap();
        let vm1 = Net::init(velocity_layers(4), &mut rng).unwrap();
        let dm = Net::init(distance_layers(4), &mut rng).unwrap();
        ModelBundle {
            couplings: 2,
            euler_steps: 3,
            patch_k: 64,
            nets: vec![
                ("vm0".into(), vm0),
                ("vm1".into(), vm1),
                ("dm".into(), dm),
            ],
        }
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let b = bundle();
        let bytes = encode_nets(&b);
        let back = decode_nets(&bytes).unwrap();
        assert_eq!(back.couplings, 2);
        assert_eq!(back.euler_steps, 3);
        assert_eq!(back.patch_k, 64);
        assert_eq!(back.nets.len(), 3);
        for ((an, a), (bn, bnet)) in b.nets.iter().zip(&back.nets) {
            assert_eq!(an, bn);
            assert_eq!(a.layers(), bnet.layers());
            assert!(a.params().bitwise_eq(bnet.params()));
        }
        // And encoding the decoded bundle reproduces the bytes.
        assert_eq!(encode_nets(&back), bytes);
    }

    #[test]
    fn truncation_is_reported_as_truncated() {
        let bytes = encode_nets(&bundle());
        for cut in [3usize, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert_eq!(decode_nets(&bytes[..cut]).unwrap_err(), Error::Truncated);
        }
    }

    #[test]
    fn bad_magic_is_distinct_from_truncation() {
        let mut bytes = encode_nets(&bundle());
        bytes[0] = b'X';
        assert_eq!(decode_nets(&bytes).unwrap_err(), Error::BadMagic);
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut bytes = encode_nets(&bundle());
        bytes[4] = 9;
        assert_eq!(decode_nets(&bytes).unwrap_err(), Error::UnsupportedVersion(9));
    }

    #[test]
    fn trailing_bytes_are_malformed() {
        let mut bytes = encode_nets(&bundle());
        bytes.push(0);
        assert!(matches!(
            decode_nets(&bytes).unwrap_err(),
            Error::Malformed(_)
        ));
    }
}
