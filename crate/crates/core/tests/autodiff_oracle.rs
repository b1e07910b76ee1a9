//! Finite-difference oracle for the reverse-mode gradients.
//!
//! The oracle is an independent f64 transcription of the same network math
//! (no shared code with the tape). Central differences with h = 1e-3 on the
//! f64 function give reference gradients accurate to ~1e-9, which the f32
//! tape must match within relative 1e-3 (absolute floor 1e-6).

use pcdiff_core::autodiff::Graph;
use pcdiff_core::optim::ParamStore;
use pcdiff_core::rng::Rng;
use pcdiff_core::tensor::Tensor;

const H: f64 = 1e-3;
const REL_TOL: f64 = 1e-3;
const ABS_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, PartialEq)]
enum Act {
    Relu,
    Leaky,
}

/// Description of one random test network.
#[derive(Clone)]
struct NetSpec {
    rows: usize,
    seg: usize,
    d_in: usize,
    hidden: Vec<usize>,
    act: Act,
    pool: bool,
    mse_loss: bool,
}

struct NetData {
    x: Vec<f64>,
    target: Vec<f64>,
    weights: Vec<(String, Vec<usize>, Vec<f64>)>,
}

fn random_spec(rng: &mut Rng) -> NetSpec {
    let seg = 2 + rng.below(3); // 2..=4 points per segment
    let segments = 1 + rng.below(3);
    let d_in = 2 + rng.below(7); // up to 8 inputs
    let depth = 1 + rng.below(2);
    let hidden = (0..depth).map(|_| 2 + rng.below(6)).collect();
    NetSpec {
        rows: seg * segments,
        seg,
        d_in,
        hidden,
        act: if rng.below(2) == 0 { Act::Relu } else { Act::Leaky },
        pool: rng.below(2) == 0,
        mse_loss: rng.below(2) == 0,
    }
}

fn random_data(spec: &NetSpec, rng: &mut Rng) -> NetData {
    let x: Vec<f64> = (0..spec.rows * spec.d_in)
        .map(|_| rng.uniform_range(-1.0, 1.0))
        .collect();
    let mut weights = Vec::new();
    let mut prev = spec.d_in;
    for (i, &h) in spec.hidden.iter().enumerate() {
        let w: Vec<f64> = (0..prev * h)
            .map(|_| rng.uniform_range(-0.8, 0.8))
            .collect();
        let b: Vec<f64> = (0..h).map(|_| rng.uniform_range(-0.3, 0.3)).collect();
        weights.push((format!("l{i}.w"), vec![prev, h], w));
        weights.push((format!("l{i}.b"), vec![1, h], b));
        prev = h;
    }
    let out_rows = if spec.pool { spec.rows / spec.seg } else { spec.rows };
    let target: Vec<f64> = (0..out_rows * prev)
        .map(|_| rng.uniform_range(-1.0, 1.0))
        .collect();
    NetData { x, target, weights }
}

// -- independent f64 reference ------------------------------------------

fn ref_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

fn ref_forward(spec: &NetSpec, data: &NetData, weights: &[(String, Vec<usize>, Vec<f64>)]) -> f64 {
    let mut h = data.x.clone();
    let mut rows = spec.rows;
    let mut width = spec.d_in;
    for layer in 0..spec.hidden.len() {
        let (_, wshape, w) = &weights[layer * 2];
        let (_, _, b) = &weights[layer * 2 + 1];
        let fan_out = wshape[1];
        let mut lin = ref_matmul(&h, w, rows, width, fan_out);
        for r in 0..rows {
            for c in 0..fan_out {
                lin[r * fan_out + c] += b[c];
            }
        }
        for v in lin.iter_mut() {
            *v = match spec.act {
                Act::Relu => {
                    if *v > 0.0 {
                        *v
                    } else {
                        0.0
                    }
                }
                Act::Leaky => {
                    if *v > 0.0 {
                        *v
                    } else {
                        0.1 * *v
                    }
                }
            };
        }
        h = lin;
        width = fan_out;
    }
    if spec.pool {
        let segments = rows / spec.seg;
        let mut pooled = vec![f64::NEG_INFINITY; segments * width];
        for s in 0..segments {
            for r in s * spec.seg..(s + 1) * spec.seg {
                for c in 0..width {
                    let v = h[r * width + c];
                    if v > pooled[s * width + c] {
                        pooled[s * width + c] = v;
                    }
                }
            }
        }
        h = pooled;
        rows = segments;
    }
    if spec.mse_loss {
        let n = (rows * width) as f64;
        h.iter()
            .zip(&data.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n
    } else {
        h.iter().sum::<f64>() / (rows * width) as f64
    }
}

fn fd_gradients(spec: &NetSpec, data: &NetData) -> Vec<(String, Vec<f64>)> {
    let mut grads = Vec::new();
    for wi in 0..data.weights.len() {
        let (name, _, values) = &data.weights[wi];
        let mut g = vec![0.0; values.len()];
        for (j, gj) in g.iter_mut().enumerate() {
            let mut plus = data.weights.clone();
            plus[wi].2[j] += H;
            let mut minus = data.weights.clone();
            minus[wi].2[j] -= H;
            *gj = (ref_forward(spec, data, &plus) - ref_forward(spec, data, &minus)) / (2.0 * H);
        }
        grads.push((name.clone(), g));
    }
    grads
}

// -- tape version of the same network ------------------------------------

fn tape_gradients(spec: &NetSpec, data: &NetData) -> Vec<(String, Vec<f64>)> {
    let mut store = ParamStore::new();
    for (name, shape, values) in &data.weights {
        let v32: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        store.insert(name, Tensor::new(shape.clone(), v32).unwrap());
    }
    let mut g = Graph::new();
    let x32: Vec<f32> = data.x.iter().map(|&v| v as f32).collect();
    let mut node = g.input(Tensor::new(vec![spec.rows, spec.d_in], x32).unwrap());
    for layer in 0..spec.hidden.len() {
        let w = g.param(&store, &format!("l{layer}.w")).unwrap();
        let b = g.param(&store, &format!("l{layer}.b")).unwrap();
        let lin = g.matmul(node, w).unwrap();
        let lin = g.add_bias(lin, b).unwrap();
        node = match spec.act {
            Act::Relu => g.relu(lin),
            Act::Leaky => g.leaky_relu(lin, 0.1),
        };
    }
    if spec.pool {
        node = g.segment_max(node, spec.seg).unwrap();
    }
    let loss = if spec.mse_loss {
        let t32: Vec<f32> = data.target.iter().map(|&v| v as f32).collect();
        let shape = g.value(node).shape().to_vec();
        let target = g.input(Tensor::new(shape, t32).unwrap());
        g.mse(node, target).unwrap()
    } else {
        g.mean_all(node)
    };
    g.backward(loss, &mut store).unwrap();
    data.weights
        .iter()
        .map(|(name, _, _)| {
            let grad = store.grad(name).unwrap();
            (
                name.clone(),
                grad.values().iter().map(|&v| v as f64).collect(),
            )
        })
        .collect()
}

fn assert_match(name: &str, analytic: &[f64], reference: &[f64], context: &str) {
    for (i, (&a, &r)) in analytic.iter().zip(reference).enumerate() {
        let err = (a - r).abs();
        let tol = ABS_FLOOR.max(REL_TOL * a.abs().max(r.abs()));
        assert!(
            err <= tol,
            "{context}: {name}[{i}] tape {a} vs fd {r} (err {err}, tol {tol})"
        );
    }
}

#[test]
fn twenty_random_networks_match_central_differences() {
    let mut rng = Rng::new(0x5eed);
    for case in 0..20 {
        let spec = random_spec(&mut rng);
        let data = random_data(&spec, &mut rng);
        let reference = fd_gradients(&spec, &data);
        let analytic = tape_gradients(&spec, &data);
        for ((name, a), (rname, r)) in analytic.iter().zip(&reference) {
            assert_eq!(name, rname);
            assert_match(name, a, r, &format!("network {case}"));
        }
    }
}

#[test]
fn two_layer_perceptron_eight_inputs() {
    // The canonical case: 8 inputs, two layers, scalar output.
    let mut rng = Rng::new(8891);
    let spec = NetSpec {
        rows: 4,
        seg: 4,
        d_in: 8,
        hidden: vec![6, 5],
        act: Act::Relu,
        pool: false,
        mse_loss: true,
    };
    let data = random_data(&spec, &mut rng);
    let reference = fd_gradients(&spec, &data);
    let analytic = tape_gradients(&spec, &data);
    for ((name, a), (_, r)) in analytic.iter().zip(&reference) {
        assert_match(name, a, r, "two-layer perceptron");
    }
}

/// Every remaining primitive (concat, slice, repeat, mul, add, sub) in one
/// graph, checked against a dedicated f64 transcription.
#[test]
fn kitchen_sink_graph_matches_oracle() {
    let mut rng = Rng::new(777);
    let rows = 6usize;
    let d = 4usize;
    let latent = 3usize;
    let x: Vec<f64> = (0..rows * d).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let w: Vec<f64> = (0..(d + latent) * 5)
        .map(|_| rng.uniform_range(-0.7, 0.7))
        .collect();
    let zmat: Vec<f64> = (0..2 * latent).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let gain: Vec<f64> = (0..rows * 2).map(|_| rng.uniform_range(0.5, 1.5)).collect();
    let shift: Vec<f64> = (0..rows * 2).map(|_| rng.uniform_range(-0.2, 0.2)).collect();

    // f64 forward: concat(x, repeat(z)), linear, leaky, slice cols 1..3,
    // elementwise (h * gain - shift) added back, then mean.
    let forward = |w: &[f64], zmat: &[f64]| -> f64 {
        let mut cat = vec![0.0; rows * (d + latent)];
        for r in 0..rows {
            for c in 0..d {
                cat[r * (d + latent) + c] = x[r * d + c];
            }
            let z_row = r / 3; // rows/2 segments of 3 rows each
            for c in 0..latent {
                cat[r * (d + latent) + d + c] = zmat[z_row * latent + c];
            }
        }
        let lin = ref_matmul(&cat, w, rows, d + latent, 5);
        let act: Vec<f64> = lin
            .iter()
            .map(|&v| if v > 0.0 { v } else { 0.1 * v })
            .collect();
        let mut sliced = vec![0.0; rows * 2];
        for r in 0..rows {
            sliced[r * 2] = act[r * 5 + 1];
            sliced[r * 2 + 1] = act[r * 5 + 2];
        }
        let mixed: Vec<f64> = sliced
            .iter()
            .zip(&gain)
            .zip(&shift)
            .map(|((&s, &g), &sh)| s * g - sh + s)
            .collect();
        mixed.iter().sum::<f64>() / mixed.len() as f64
    };

    // FD reference for both parameter tensors.
    let fd = |which: usize| -> Vec<f64> {
        let base: &[f64] = if which == 0 { &w } else { &zmat };
        let mut g = vec![0.0; base.len()];
        for j in 0..base.len() {
            let mut plus = base.to_vec();
            plus[j] += H;
            let mut minus = base.to_vec();
            minus[j] -= H;
            g[j] = if which == 0 {
                (forward(&plus, &zmat) - forward(&minus, &zmat)) / (2.0 * H)
            } else {
                (forward(&w, &plus) - forward(&w, &minus)) / (2.0 * H)
            };
        }
        g
    };

    let mut store = ParamStore::new();
    store.insert(
        "w",
        Tensor::new(
            vec![d + latent, 5],
            w.iter().map(|&v| v as f32).collect(),
        )
        .unwrap(),
    );
    store.insert(
        "z",
        Tensor::new(vec![2, latent], zmat.iter().map(|&v| v as f32).collect()).unwrap(),
    );

    let mut g = Graph::new();
    let xn = g.input(Tensor::new(vec![rows, d], x.iter().map(|&v| v as f32).collect()).unwrap());
    let zn = g.param(&store, "z").unwrap();
    let z_rows = g.repeat_rows(zn, 3).unwrap();
    let cat = g.concat_cols(&[xn, z_rows]).unwrap();
    let wn = g.param(&store, "w").unwrap();
    let lin = g.matmul(cat, wn).unwrap();
    let act = g.leaky_relu(lin, 0.1);
    let sliced = g.slice_cols(act, 1, 3).unwrap();
    let gn = g.input(Tensor::new(vec![rows, 2], gain.iter().map(|&v| v as f32).collect()).unwrap());
    let sn =
        g.input(Tensor::new(vec![rows, 2], shift.iter().map(|&v| v as f32).collect()).unwrap());
    let prod = g.mul(sliced, gn).unwrap();
    let diff = g.sub(prod, sn).unwrap();
    let mixed = g.add(diff, sliced).unwrap();
    let loss = g.mean_all(mixed);
    g.backward(loss, &mut store).unwrap();

    let tape_w: Vec<f64> = store.grad("w").unwrap().values().iter().map(|&v| v as f64).collect();
    let tape_z: Vec<f64> = store.grad("z").unwrap().values().iter().map(|&v| v as f64).collect();
    assert_match("w", &tape_w, &fd(0), "kitchen sink");
    assert_match("z", &tape_z, &fd(1), "kitchen sink");
}
