//! Fully connected network with analytic input gradients and the parameter
//! gradient of an input-gradient penalty.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    /// Linear hidden units; used for closed-form test configurations.
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// First derivative expressed through the unit output `h`.
    fn d1(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative expressed through the unit output `h`.
    fn d2(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * h * (1.0 - h * h),
            Activation::Identity => 0.0,
        }
    }
}

/// Parameter gradients (or any per-parameter quantity) shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            w: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            b: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }
}

/// MLP `d -> h1 -> ... -> 1` with a linear output unit.
///
/// `weights[k]` has shape `(sizes[k], sizes[k + 1])` so a batch propagates as
/// `Z = H W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

struct Tape {
    /// `h[0]` is the input batch, `h[l]` the output of hidden layer `l`.
    h: Vec<Array2<f64>>,
    /// `s[l] = σ'(z_l)`; `s[0]` is unused.
    s: Vec<Array2<f64>>,
    y: Array1<f64>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize], activation: Activation) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1, "sizes must end in 1");
        let weights = sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Self {
            sizes: sizes.to_vec(),
            activation,
            weights,
            biases,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, activation);
        for w in &mut net.weights {
            let (fan_in, fan_out) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    fn hidden_layers(&self) -> usize {
        self.sizes.len() - 2
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn tape(&self, x: ArrayView2<f64>) -> Tape {
        let nh = self.hidden_layers();
        let act = self.activation;
        let mut h = Vec::with_capacity(nh + 1);
        let mut s = Vec::with_capacity(nh + 1);
        h.push(x.to_owned());
        s.push(Array2::zeros((0, 0)));
        for l in 0..nh {
            let mut z = h[l].dot(&self.weights[l]);
            z += &self.biases[l];
            z.mapv_inplace(|v| act.apply(v));
            s.push(z.mapv(|v| act.d1(v)));
            h.push(z);
        }
        let y = h[nh].dot(&self.weights[nh]).column(0).to_owned() + self.biases[nh][0];
        Tape { h, s, y }
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.tape(x).y
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward_batch(xv)[0]
    }

    /// `dy/dz_l` for every hidden layer (index 1..=nh), built output-first.
    fn output_sensitivities(&self, t: &Tape) -> Vec<Array2<f64>> {
        let nh = self.hidden_layers();
        let mut d = vec![Array2::zeros((0, 0)); nh + 1];
        if nh == 0 {
            return d;
        }
        let wo = self.weights[nh].column(0);
        d[nh] = &t.s[nh] * &wo;
        for l in (1..nh).rev() {
            d[l] = d[l + 1].dot(&self.weights[l].t()) * &t.s[l];
        }
        d
    }

    fn input_gradient_from(&self, t: &Tape, d: &[Array2<f64>]) -> Array2<f64> {
        if self.hidden_layers() == 0 {
            let wo = self.weights[0].column(0);
            let mut g = Array2::zeros(t.h[0].raw_dim());
            g += &wo;
            g
        } else {
            d[1].dot(&self.weights[0].t())
        }
    }

    pub fn input_gradient_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let t = self.tape(x);
        let d = self.output_sensitivities(&t);
        self.input_gradient_from(&t, &d)
    }

    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.input_gradient_batch(xv).row(0).to_vec()
    }

    /// Standard backprop of per-sample output adjoints `ybar`, plus optional
    /// extra pre-activation adjoints per hidden layer.
    fn backprop(&self, t: &Tape, ybar: &Array1<f64>, extra: &[Option<Array2<f64>>], g: &mut Grads) {
        let nh = self.hidden_layers();
        let yb = ybar.view().insert_axis(Axis(1));
        g.w[nh] += &t.h[nh].t().dot(&yb);
        g.b[nh][0] += ybar.sum();
        if nh == 0 {
            return;
        }
        let wo = self.weights[nh].column(0);
        let mut zbar = yb.dot(&wo.insert_axis(Axis(0))) * &t.s[nh];
        if let Some(e) = &extra[nh] {
            zbar += e;
        }
        for l in (1..=nh).rev() {
            g.w[l - 1] += &t.h[l - 1].t().dot(&zbar);
            g.b[l - 1] += &zbar.sum_axis(Axis(0));
            if l > 1 {
                let mut next = zbar.dot(&self.weights[l - 1].t()) * &t.s[l - 1];
                if let Some(e) = &extra[l - 1] {
                    next += e;
                }
                zbar = next;
            }
        }
    }

    /// Value and parameter gradient of `L = Σ_b loss(y_b) + λ/B Σ_b ‖∇_x y_b‖²`
    /// where `ybar` holds `∂loss/∂y_b`. The penalty is differentiated exactly
    /// (second-order backprop). Returns the predictions and the penalty value.
    pub fn grads_exact(&self, x: ArrayView2<f64>, ybar_of: impl Fn(&Array1<f64>) -> Array1<f64>, lambda: f64, g: &mut Grads) -> (Array1<f64>, f64) {
        let t = self.tape(x);
        let ybar = ybar_of(&t.y);
        let nh = self.hidden_layers();
        let mut extra: Vec<Option<Array2<f64>>> = vec![None; nh + 1];
        let mut penalty = 0.0;
        if lambda > 0.0 {
            let batch = x.nrows() as f64;
            let d = self.output_sensitivities(&t);
            let gx = self.input_gradient_from(&t, &d);
            penalty = lambda / batch * gx.iter().map(|v| v * v).sum::<f64>();
            let gbar = gx * (2.0 * lambda / batch);
            if nh == 0 {
                let cs = gbar.sum_axis(Axis(0));
                g.w[0].column_mut(0).zip_mut_with(&cs, |a, b| *a += b);
            } else {
                let act = self.activation;
                let mut dbar = gbar.dot(&self.weights[0]);
                g.w[0] += &gbar.t().dot(&d[1]);
                for l in 1..=nh {
                    let sbar;
                    if l < nh {
                        let e = d[l + 1].dot(&self.weights[l].t());
                        sbar = &dbar * &e;
                        let ebar = &dbar * &t.s[l];
                        g.w[l] += &ebar.t().dot(&d[l + 1]);
                        dbar = ebar.dot(&self.weights[l]);
                    } else {
                        let wo = self.weights[nh].column(0);
                        sbar = &dbar * &wo;
                        let cs = (&dbar * &t.s[nh]).sum_axis(Axis(0));
                        g.w[nh].column_mut(0).zip_mut_with(&cs, |a, b| *a += b);
                    }
                    let dd = t.h[l].mapv(|h| act.d2(h));
                    extra[l] = Some(sbar * dd);
                }
            }
        }
        self.backprop(&t, &ybar, &extra, g);
        (t.y, penalty)
    }

    /// Same objective as [`Mlp::grads_exact`] with the input gradient replaced by
    /// central differences of step `h`; the penalty's parameter gradient then
    /// only needs first-order backprop over the perturbed batch.
    pub fn grads_fd(&self, x: ArrayView2<f64>, ybar_of: impl Fn(&Array1<f64>) -> Array1<f64>, lambda: f64, h: f64, g: &mut Grads) -> (Array1<f64>, f64) {
        let t = self.tape(x);
        let ybar = ybar_of(&t.y);
        let extra: Vec<Option<Array2<f64>>> = vec![None; self.hidden_layers() + 1];
        self.backprop(&t, &ybar, &extra, g);
        if lambda <= 0.0 {
            return (t.y, 0.0);
        }
        let (bsz, dim) = x.dim();
        let mut xp = Array2::zeros((2 * dim * bsz, dim));
        for b in 0..bsz {
            for i in 0..dim {
                for (k, sign) in [(0, 1.0), (1, -1.0)] {
                    let mut row = xp.row_mut((b * dim + i) * 2 + k);
                    row.assign(&x.row(b));
                    row[i] += sign * h;
                }
            }
        }
        let tp = self.tape(xp.view());
        let scale = 2.0 * lambda / bsz as f64 / (2.0 * h);
        let mut pbar = Array1::zeros(tp.y.len());
        let mut penalty = 0.0;
        for r in 0..bsz * dim {
            let gi = (tp.y[2 * r] - tp.y[2 * r + 1]) / (2.0 * h);
            penalty += gi * gi;
            pbar[2 * r] = scale * gi;
            pbar[2 * r + 1] = -scale * gi;
        }
        self.backprop(&tp, &pbar, &extra, g);
        (t.y, lambda / bsz as f64 * penalty)
    }

    /// Penalty value `λ/B Σ‖∇_x y‖²` with analytic input gradients.
    pub fn gradient_penalty(&self, x: ArrayView2<f64>, lambda: f64) -> f64 {
        let gx = self.input_gradient_batch(x);
        lambda / x.nrows() as f64 * gx.iter().map(|v| v * v).sum::<f64>()
    }

    /// Penalty value with central-difference input gradients.
    pub fn gradient_penalty_fd(&self, x: ArrayView2<f64>, lambda: f64, h: f64) -> f64 {
        let mut total = 0.0;
        for row in x.rows() {
            let mut xr = row.to_vec();
            for i in 0..xr.len() {
                let x0 = xr[i];
                xr[i] = x0 + h;
                let fp = self.forward(&xr);
                xr[i] = x0 - h;
                let fm = self.forward(&xr);
                xr[i] = x0;
                let gi = (fp - fm) / (2.0 * h);
                total += gi * gi;
            }
        }
        lambda / x.nrows() as f64 * total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use ndarray::Array2;

    fn random_net(seed: u64, sizes: &[usize]) -> Mlp {
        let mut rng = rng_from(seed);
        let mut net = Mlp::glorot(sizes, Activation::Tanh, &mut rng);
        for b in &mut net.biases {
            b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        net
    }

    fn random_batch(seed: u64, n: usize, d: usize) -> Array2<f64> {
        let mut rng = rng_from(seed);
        Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
    }

    fn total_objective(net: &Mlp, x: &Array2<f64>, lambda: f64) -> f64 {
        let y = net.forward_batch(x.view());
        0.5 * y.iter().map(|v| v * v).sum::<f64>() + net.gradient_penalty(x.view(), lambda)
    }

    #[test]
    fn constant_net_outputs_bias() {
        let mut net = Mlp::zeros(&[3, 4, 1], Activation::Tanh);
        net.biases[1][0] = 2.5;
        assert_eq!(net.forward(&[0.1, 0.7, 0.3]), 2.5);
        assert_eq!(net.input_gradient(&[0.1, 0.7, 0.3]), vec![0.0; 3]);
    }

    #[test]
    fn linear_net_is_affine() {
        let mut net = Mlp::zeros(&[3, 1], Activation::Tanh);
        net.weights[0].column_mut(0).assign(&ndarray::arr1(&[1.0, -2.0, 0.5]));
        net.biases[0][0] = 0.25;
        assert_eq!(net.forward(&[1.0, 1.0, 2.0]), 1.0 - 2.0 + 1.0 + 0.25);
        assert_eq!(net.input_gradient(&[0.3, 0.3, 0.3]), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        for seed in 0..20 {
            let net = random_net(seed, &[5, 8, 6, 1]);
            let x: Vec<f64> = random_batch(seed + 100, 1, 5).row(0).to_vec();
            let g = net.input_gradient(&x);
            for i in 0..5 {
                let h = 1e-5;
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (net.forward(&xp) - net.forward(&xm)) / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-4 * fd.abs().max(1e-3), "{} vs {}", g[i], fd);
            }
        }
    }

    #[test]
    fn exact_parameter_gradient_matches_finite_differences() {
        for (seed, sizes) in [(1u64, vec![3, 5, 1]), (2, vec![4, 6, 5, 1]), (3, vec![2, 1]), (4, vec![3, 4, 3, 4, 1])] {
            let net = random_net(seed, &sizes);
            let x = random_batch(seed + 7, 6, sizes[0]);
            let lambda = 0.3;
            let mut g = Grads::zeros_like(&net);
            net.grads_exact(x.view(), |y| y.clone(), lambda, &mut g);
            let h = 1e-6;
            for k in 0..net.weights.len() {
                for idx in 0..net.weights[k].len() {
                    let (r, c) = (idx / net.weights[k].ncols(), idx % net.weights[k].ncols());
                    let mut np = net.clone();
                    np.weights[k][[r, c]] += h;
                    let mut nm = net.clone();
                    nm.weights[k][[r, c]] -= h;
                    let fd = (total_objective(&np, &x, lambda) - total_objective(&nm, &x, lambda)) / (2.0 * h);
                    let an = g.w[k][[r, c]];
                    assert!((an - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "w{k}[{r},{c}] {an} vs {fd}");
                }
                for j in 0..net.biases[k].len() {
                    let mut np = net.clone();
                    np.biases[k][j] += h;
                    let mut nm = net.clone();
                    nm.biases[k][j] -= h;
                    let fd = (total_objective(&np, &x, lambda) - total_objective(&nm, &x, lambda)) / (2.0 * h);
                    let an = g.b[k][j];
                    assert!((an - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "b{k}[{j}] {an} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn fd_penalty_agrees_with_exact() {
        let net = random_net(9, &[5, 16, 16, 1]);
        let x = random_batch(10, 32, 5);
        let exact = net.gradient_penalty(x.view(), 5e-2);
        let fd = net.gradient_penalty_fd(x.view(), 5e-2, 1e-4);
        assert!((exact - fd).abs() < 1e-3 * exact.max(1.0));

        let mut ge = Grads::zeros_like(&net);
        let mut gf = Grads::zeros_like(&net);
        let (_, pe) = net.grads_exact(x.view(), |y| y.clone(), 5e-2, &mut ge);
        let (_, pf) = net.grads_fd(x.view(), |y| y.clone(), 5e-2, 1e-4, &mut gf);
        assert!((pe - pf).abs() < 1e-3 * pe.max(1.0));
        for (a, b) in ge.w.iter().zip(&gf.w) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-4 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let net = random_net(4, &[5, 7, 1]);
        let x = random_batch(5, 9, 5);
        let yb = net.forward_batch(x.view());
        for (i, row) in x.rows().into_iter().enumerate() {
            assert_eq!(net.forward(&row.to_vec()), yb[i]);
        }
    }
}
