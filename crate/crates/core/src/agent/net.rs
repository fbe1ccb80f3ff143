use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Dense layer, weights row-major `[n_out][n_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    /// He-initialised weights, zero biases.
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let mut l = Self {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        };
        for row in 0..n_out {
            l.init_row(row, rng);
        }
        l
    }

    fn init_row<R: Rng + ?Sized>(&mut self, row: usize, rng: &mut R) {
        let normal = Normal::new(0.0, (2.0 / self.n_in as f64).sqrt()).expect("valid std");
        for x in &mut self.w[row * self.n_in..(row + 1) * self.n_in] {
            *x = normal.sample(rng);
        }
        self.b[row] = 0.0;
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.w[r * self.n_in..(r + 1) * self.n_in]
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.b[r] + dot(self.row(r), x);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relu(x: &mut [f64]) {
    for v in x {
        *v = v.max(0.0);
    }
}

/// Hidden activations for one input.
#[derive(Debug, Clone)]
struct Trace {
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
}

/// Parameter gradients, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: [Layer; 3],
}

/// `in -> hidden -> hidden -> out` MLP with ReLU hidden units and a linear
/// output per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub layers: [Layer; 3],
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(n_in: usize, hidden: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            layers: [
                Layer::new(n_in, hidden, rng),
                Layer::new(hidden, hidden, rng),
                Layer::new(hidden, n_out, rng),
            ],
        }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[2].n_out
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].n_out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let h = self.hidden();
        let mut z1 = vec![0.0; h];
        self.layers[0].affine(x, &mut z1);
        let mut h1 = z1.clone();
        relu(&mut h1);
        let mut z2 = vec![0.0; h];
        self.layers[1].affine(&h1, &mut z2);
        let mut h2 = z2.clone();
        relu(&mut h2);
        Trace { z1, h1, z2, h2 }
    }

    /// Q-values of every action.
    pub fn q_values(&self, x: &[f64]) -> Vec<f64> {
        let t = self.trace(x);
        let mut out = vec![0.0; self.n_out()];
        self.layers[2].affine(&t.h2, &mut out);
        out
    }

    pub fn q_value(&self, x: &[f64], action: usize) -> f64 {
        let t = self.trace(x);
        self.layers[2].b[action] + dot(self.layers[2].row(action), &t.h2)
    }

    /// `max_a Q(x, a)` for each input row, via one matrix product.
    pub fn max_q_batch(&self, xs: &[[f64; 3]]) -> Vec<f64> {
        let h = self.hidden();
        let a = self.n_out();
        let m = xs.len();
        if m == 0 {
            return Vec::new();
        }
        let mut h2 = Vec::with_capacity(m * h);
        for x in xs {
            h2.extend(self.trace(x).h2);
        }
        let out_layer = &self.layers[2];
        let mut q = vec![0.0; m * a];
        for row in q.chunks_mut(a) {
            row.copy_from_slice(&out_layer.b);
        }
        // q (m x a) += h2 (m x h) * w3^T (h x a)
        unsafe {
            matrixmultiply::dgemm(
                m,
                h,
                a,
                1.0,
                h2.as_ptr(),
                h as isize,
                1,
                out_layer.w.as_ptr(),
                1,
                h as isize,
                1.0,
                q.as_mut_ptr(),
                a as isize,
                1,
            );
        }
        q.chunks(a)
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Mean squared error `mean_j (y_j - Q(x_j, a_j))^2`.
    pub fn loss(&self, batch: &[([f64; 3], usize, f64)]) -> f64 {
        batch
            .iter()
            .map(|(x, a, y)| (y - self.q_value(x, *a)).powi(2))
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Loss and its gradient. Only the output rows of the taken actions get
    /// a gradient at the last layer.
    pub fn gradients(&self, batch: &[([f64; 3], usize, f64)]) -> (f64, Gradients) {
        let zero = |l: &Layer| Layer {
            n_in: l.n_in,
            n_out: l.n_out,
            w: vec![0.0; l.w.len()],
            b: vec![0.0; l.b.len()],
        };
        let mut g = Gradients {
            layers: [zero(&self.layers[0]), zero(&self.layers[1]), zero(&self.layers[2])],
        };
        let h = self.hidden();
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for (x, a, y) in batch {
            let t = self.trace(x);
            let l3 = &self.layers[2];
            let q = l3.b[*a] + dot(l3.row(*a), &t.h2);
            let err = q - y;
            loss += err * err;
            let dq = 2.0 * err / n;
            g.layers[2].b[*a] += dq;
            for k in 0..h {
                g.layers[2].w[a * h + k] += dq * t.h2[k];
            }
            let dz2: Vec<f64> = (0..h)
                .map(|k| if t.z2[k] > 0.0 { dq * l3.w[a * h + k] } else { 0.0 })
                .collect();
            let l2 = &self.layers[1];
            let mut dh1 = vec![0.0; h];
            for (r, &d) in dz2.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.layers[1].b[r] += d;
                let grow = &mut g.layers[1].w[r * h..(r + 1) * h];
                for k in 0..h {
                    grow[k] += d * t.h1[k];
                    dh1[k] += d * l2.w[r * h + k];
                }
            }
            let n_in = self.n_in();
            for r in 0..h {
                if t.z1[r] <= 0.0 {
                    continue;
                }
                let d = dh1[r];
                g.layers[0].b[r] += d;
                for k in 0..n_in {
                    g.layers[0].w[r * n_in + k] += d * x[k];
                }
            }
        }
        (loss / n, g)
    }

    /// `params -= lr * grad`.
    pub fn apply(&mut self, g: &Gradients, lr: f64) {
        if lr == 0.0 {
            return;
        }
        for (l, gl) in self.layers.iter_mut().zip(&g.layers) {
            for (w, d) in l.w.iter_mut().zip(&gl.w) {
                *w -= lr * d;
            }
            for (b, d) in l.b.iter_mut().zip(&gl.b) {
                *b -= lr * d;
            }
        }
    }

    /// Rebuilds the output layer: new action `i` takes old row
    /// `mapping[i]`, or fresh weights when `None`.
    pub fn remap_outputs<R: Rng + ?Sized>(&mut self, mapping: &[Option<usize>], rng: &mut R) {
        let old = &self.layers[2];
        let h = old.n_in;
        let mut new = Layer {
            n_in: h,
            n_out: mapping.len(),
            w: vec![0.0; h * mapping.len()],
            b: vec![0.0; mapping.len()],
        };
        for (i, m) in mapping.iter().enumerate() {
            match m {
                Some(j) => {
                    new.w[i * h..(i + 1) * h].copy_from_slice(old.row(*j));
                    new.b[i] = old.b[*j];
                }
                None => new.init_row(i, rng),
            }
        }
        self.layers[2] = new;
    }

    /// Every parameter in a fixed order: per layer, weights then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(&l.w);
            v.extend_from_slice(&l.b);
        }
        v
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|x| x.is_finite()))
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend_from_slice(&l.w);
            v.extend_from_slice(&l.b);
        }
        v
    }
}

/// Largest relative difference between backprop and central finite
/// differences (h = 1e-5) over every parameter of a small random network
/// and batch.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = QNetwork::new(3, 6, 5, &mut rng);
    // zero biases put dead inputs exactly on the ReLU kink
    for l in &mut net.layers {
        for b in &mut l.b {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let batch: Vec<([f64; 3], usize, f64)> = (0..4)
        .map(|_| {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            (x, rng.random_range(0..5), rng.random_range(-2.0..2.0))
        })
        .collect();
    let (_, g) = net.gradients(&batch);
    let analytic = g.flat();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.param_count() {
        let mut plus = net.clone();
        *plus.params_mut().nth(i).expect("index in range") += h;
        let mut minus = net.clone();
        *minus.params_mut().nth(i).expect("index in range") -= h;
        let fd = (plus.loss(&batch) - minus.loss(&batch)) / (2.0 * h);
        let denom = fd.abs().max(analytic[i].abs()).max(1e-6);
        worst = worst.max((fd - analytic[i]).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backprop_matches_finite_differences() {
        for seed in 0..20 {
            let e = gradient_check(seed);
            assert!(e < 1e-4, "seed {seed}: relative error {e}");
        }
    }

    #[test]
    fn output_layer_gradient_is_linear_regression_gradient() {
        // the last layer is linear in h2: dL/dw = 2 (w.h2 + b - y) h2
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = QNetwork::new(3, 4, 2, &mut rng);
        let x = [0.3, -0.2, 0.9];
        let (_, g) = net.gradients(&[(x, 1, 0.25)]);
        let t = net.trace(&x);
        let q = net.q_value(&x, 1);
        for k in 0..4 {
            assert!((g.layers[2].w[4 + k] - 2.0 * (q - 0.25) * t.h2[k]).abs() < 1e-12);
            assert_eq!(g.layers[2].w[k], 0.0);
        }
    }

    #[test]
    fn exact_targets_give_zero_loss_and_no_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = QNetwork::new(3, 8, 4, &mut rng);
        let x = [0.1, 0.5, 0.2];
        let b = vec![(x, 2, net.q_value(&x, 2))];
        let before = net.clone();
        let (loss, g) = net.gradients(&b);
        net.apply(&g, 0.1);
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn batched_max_matches_per_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::new(3, 16, 37, &mut rng);
        let xs: Vec<[f64; 3]> = (0..9).map(|i| [i as f64 * 0.1, 0.5 - i as f64 * 0.05, 0.3]).collect();
        let fast = net.max_q_batch(&xs);
        for (x, m) in xs.iter().zip(fast) {
            let slow = net.q_values(x).into_iter().fold(f64::NEG_INFINITY, f64::max);
            assert!((m - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn remap_keeps_surviving_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = QNetwork::new(3, 8, 6, &mut rng);
        let x = [0.2, 0.4, 0.6];
        let before = net.q_values(&x);
        net.remap_outputs(&[Some(5), None, Some(0)], &mut rng);
        let after = net.q_values(&x);
        assert_eq!(after.len(), 3);
        assert_eq!(after[0], before[5]);
        assert_eq!(after[2], before[0]);
    }
}
