//! Training-path oracles: the end-to-end loss gradient against an f64
//! re-implementation of the model, and the desk-scale loss-decrease smoke.

use pcdiff_core::autodiff::Graph;
use pcdiff_core::kernels::Act;
use pcdiff_core::data::{gen_lines, normalize};
use pcdiff_core::diffusion::{timestep_embedding, train_dpm, Dpm, TrainConfig, TEMB_DIM};
use pcdiff_core::rng::Rng;
use pcdiff_core::tensor::Tensor;
use pcdiff_core::NormStats;

// Smaller step than the generic autodiff oracle: the pooled max and relu
// kinks sit densely in this composite function, and a wide step straddles
// them often enough to contaminate the estimate.
const H: f64 = 1e-4;

/// Independent f64 transcription of the full train-step function:
/// loss = mse(w, dec(x_t, temb, enc(x0))). Parameters come in by name so
/// finite differences can perturb one component at a time.
struct Shadow {
    n: usize,
    d: usize,
    latent: usize,
    enc_hidden: Vec<usize>,
    dec_hidden: Vec<usize>,
    x0: Vec<f64>,
    xt: Vec<f64>,
    w: Vec<f64>,
    temb: Vec<f64>,
}

impl Shadow {
    fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
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

    fn linear(
        params: &std::collections::BTreeMap<String, Vec<f64>>,
        name: &str,
        x: &[f64],
        rows: usize,
        fan_in: usize,
        fan_out: usize,
    ) -> Vec<f64> {
        let w = &params[&format!("{name}.w")];
        let b = &params[&format!("{name}.b")];
        let mut out = Self::matmul(x, w, rows, fan_in, fan_out);
        for r in 0..rows {
            for c in 0..fan_out {
                out[r * fan_out + c] += b[c];
            }
        }
        out
    }

    fn loss(&self, params: &std::collections::BTreeMap<String, Vec<f64>>) -> f64 {
        // Encoder: relu MLP, max pool over all rows, linear head.
        let mut h = self.x0.clone();
        let mut width = self.d;
        for (i, &hw) in self.enc_hidden.iter().enumerate() {
            h = Self::linear(params, &format!("enc.l{i}"), &h, self.n, width, hw);
            for v in h.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            width = hw;
        }
        let mut pooled = vec![f64::NEG_INFINITY; width];
        for r in 0..self.n {
            for c in 0..width {
                pooled[c] = pooled[c].max(h[r * width + c]);
            }
        }
        let z = Self::linear(params, "enc.head", &pooled, 1, width, self.latent);

        // Decoder: leaky MLP over [xt | temb | z].
        let in_width = self.d + TEMB_DIM + self.latent;
        let mut cat = vec![0.0; self.n * in_width];
        for r in 0..self.n {
            for c in 0..self.d {
                cat[r * in_width + c] = self.xt[r * self.d + c];
            }
            for c in 0..TEMB_DIM {
                cat[r * in_width + self.d + c] = self.temb[c];
            }
            for c in 0..self.latent {
                cat[r * in_width + self.d + TEMB_DIM + c] = z[c];
            }
        }
        let mut h = cat;
        let mut width = in_width;
        for (i, &hw) in self.dec_hidden.iter().enumerate() {
            h = Self::linear(params, &format!("dec.l{i}"), &h, self.n, width, hw);
            for v in h.iter_mut() {
                if *v < 0.0 {
                    *v *= 0.1;
                }
            }
            width = hw;
        }
        let eps_hat = Self::linear(params, "dec.out", &h, self.n, width, self.d);

        let count = (self.n * self.d) as f64;
        self.w
            .iter()
            .zip(&eps_hat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / count
    }
}

#[test]
fn training_loss_gradient_matches_finite_differences() {
    // 1 event, T = 4, tiny widths.
    let n = 6usize;
    let d = 3usize;
    let t_steps = 4usize;
    let latent = 4usize;
    let enc_hidden = vec![5, 6];
    let dec_hidden = vec![7, 7];

    let dpm = Dpm::init(
        d,
        enc_hidden.clone(),
        dec_hidden.clone(),
        latent,
        t_steps,
        (1e-3, 0.05),
        NormStats {
            center: vec![0.0; 3],
            scale: 1.0,
            clamped: false,
        },
        "gradcheck",
        31,
    )
    .unwrap();

    let mut rng = Rng::new(77);
    let x0: Vec<f32> = (0..n * d).map(|_| rng.uniform_range(-1.0, 1.0) as f32).collect();
    let noise: Vec<f32> = (0..n * d).map(|_| rng.normal_f32()).collect();
    let t = 3usize;
    let ab = dpm.schedule.alpha_bar(t);
    let (cx, cw) = (ab.sqrt() as f32, (1.0 - ab).sqrt() as f32);
    let xt: Vec<f32> = x0
        .iter()
        .zip(&noise)
        .map(|(&x, &w)| cx * x + cw * w)
        .collect();
    let temb = timestep_embedding(t, t_steps);

    // Tape gradients.
    let mut params = dpm.params.clone();
    let mut g = Graph::new();
    let x0_node = g.input(Tensor::new(vec![n, d], x0.clone()).unwrap());
    let xt_node = g.input(Tensor::new(vec![n, d], xt.clone()).unwrap());
    let w_node = g.input(Tensor::new(vec![n, d], noise.clone()).unwrap());
    let temb_node = g.input(Tensor::new(vec![1, TEMB_DIM], temb.to_vec()).unwrap());
    // The exact graph shape train_dpm records (fused linear ops).
    let z = {
        let mut node = x0_node;
        for i in 0..enc_hidden.len() {
            let w = g.param(&params, &format!("enc.l{i}.w")).unwrap();
            let b = g.param(&params, &format!("enc.l{i}.b")).unwrap();
            node = g.linear(node, w, b, Act::Relu).unwrap();
        }
        let pooled = g.segment_max(node, n).unwrap();
        let w = g.param(&params, "enc.head.w").unwrap();
        let b = g.param(&params, "enc.head.b").unwrap();
        g.linear(pooled, w, b, Act::None).unwrap()
    };
    let eps_hat = {
        let temb_rows = g.repeat_rows(temb_node, n).unwrap();
        let z_rows = g.repeat_rows(z, n).unwrap();
        let mut node = g.concat_cols(&[xt_node, temb_rows, z_rows]).unwrap();
        for i in 0..dec_hidden.len() {
            let w = g.param(&params, &format!("dec.l{i}.w")).unwrap();
            let b = g.param(&params, &format!("dec.l{i}.b")).unwrap();
            node = g.linear(node, w, b, Act::Leaky(0.1)).unwrap();
        }
        let w = g.param(&params, "dec.out.w").unwrap();
        let b = g.param(&params, "dec.out.b").unwrap();
        g.linear(node, w, b, Act::None).unwrap()
    };
    let loss_node = g.mse(w_node, eps_hat).unwrap();
    g.backward(loss_node, &mut params).unwrap();

    // Shadow f64 copy of every parameter.
    let mut shadow_params: std::collections::BTreeMap<String, Vec<f64>> = params
        .iter()
        .map(|(name, t)| (name.clone(), t.values().iter().map(|&v| v as f64).collect()))
        .collect();
    let shadow = Shadow {
        n,
        d,
        latent,
        enc_hidden,
        dec_hidden,
        x0: x0.iter().map(|&v| v as f64).collect(),
        xt: xt.iter().map(|&v| v as f64).collect(),
        w: noise.iter().map(|&v| v as f64).collect(),
        temb: temb.iter().map(|&v| v as f64).collect(),
    };

    // Sanity: the shadow reproduces the tape's loss.
    let tape_loss = g.value(loss_node).values()[0] as f64;
    let shadow_loss = shadow.loss(&shadow_params);
    assert!(
        (tape_loss - shadow_loss).abs() < 1e-5 * shadow_loss.max(1.0),
        "tape loss {tape_loss} vs shadow {shadow_loss}"
    );

    let names: Vec<String> = shadow_params.keys().cloned().collect();
    for name in names {
        let tape_grad: Vec<f64> = params
            .grad(&name)
            .unwrap()
            .values()
            .iter()
            .map(|&v| v as f64)
            .collect();
        let n_vals = shadow_params[&name].len();
        for j in 0..n_vals {
            let orig = shadow_params[&name][j];
            shadow_params.get_mut(&name).unwrap()[j] = orig + H;
            let plus = shadow.loss(&shadow_params);
            shadow_params.get_mut(&name).unwrap()[j] = orig - H;
            let minus = shadow.loss(&shadow_params);
            shadow_params.get_mut(&name).unwrap()[j] = orig;
            let fd = (plus - minus) / (2.0 * H);
            let a = tape_grad[j];
            let tol = 1e-6f64.max(1e-3 * a.abs().max(fd.abs()));
            assert!(
                (a - fd).abs() <= tol,
                "{name}[{j}]: tape {a} vs fd {fd}"
            );
        }
    }
}

#[test]
fn desk_scale_smoke_loss_falls_by_twenty_percent() {
    // 200 line events, T = 64, F = 64, 2000 iterations; the mean loss over
    // the last 100 iterations must drop below 0.8x the first 100.
    let (ds, _) = normalize(&gen_lines(200, 64, 5, true).unwrap()).unwrap();
    let cfg = TrainConfig {
        batch: 16,
        iters: 2000,
        t_steps: 64,
        latent_dim: 64,
        beta_start: None,
        beta_end: None,
        lr_initial: 0.001,
        lr_final: 0.0001,
        enc_hidden: vec![16, 32],
        dec_hidden: vec![32, 32],
    };
    let result = train_dpm(&ds, &cfg, 17).unwrap();
    let first: f32 = result.losses[..100].iter().sum::<f32>() / 100.0;
    let last: f32 = result.losses[result.losses.len() - 100..].iter().sum::<f32>() / 100.0;
    assert!(
        last < 0.8 * first,
        "expected 20% improvement: first-100 mean {first}, last-100 mean {last}"
    );
}
