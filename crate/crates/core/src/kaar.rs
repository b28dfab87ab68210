//! Kernelized mAAR (mKAAR).
//!
//! The dual form of mAAR: with `K` the Gram matrix of all signals so far
//! (the current one last) and `k` its last column,
//!
//! `r_i = (Y~_1, .., Y-_i, .., Y~_{d-1}) A^{-1} (k, .., 2k, .., k)'`,
//! `A = aI + (I + J) ⊗ K`,
//!
//! where `Y-_j = -2 (y_t^j - y_t^d)_{t<T}` padded with 0 and `Y~_j` is the
//! same padded with 1. With the dot-product kernel this reproduces mAAR.

use nalgebra::{DMatrix, DMatrixView, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::structured::{GrowingCholesky, StackedResponse, StructuredSystem};
use crate::substitution::{solve_substitution, GeneralizedPrediction};
use crate::types::{Forecaster, ProbabilityVector, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    /// `x . x'`
    Dot,
    /// `exp(-|x - x'|^2 / (2 sigma^2))`
    Rbf { sigma: f64 },
    /// `(x . x' + offset)^degree`
    Poly { degree: u32, offset: f64 },
}

impl Kernel {
    pub fn rbf(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("rbf width must be positive, got {sigma}")));
        }
        Ok(Kernel::Rbf { sigma })
    }

    pub fn poly(degree: u32, offset: f64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
        }
        if !offset.is_finite() {
            return Err(Error::NonFinite("polynomial offset"));
        }
        Ok(Kernel::Poly { degree, offset })
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            Kernel::Dot => x.iter().zip(z).map(|(a, b)| a * b).sum(),
            Kernel::Rbf { sigma } => {
                let sq: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Poly { degree, offset } => {
                let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
                (dot + offset).powi(degree as i32)
            }
        }
    }

    pub fn gram(&self, signals: &[Signal]) -> DMatrix<f64> {
        let t = signals.len();
        let mut g = DMatrix::zeros(t, t);
        for i in 0..t {
            for j in 0..=i {
                let v = self.eval_unchecked(signals[i].as_slice(), signals[j].as_slice());
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

pub fn kernel_eval(k: &Kernel, x: &Signal, z: &Signal) -> Result<f64> {
    check_len(x.dim(), z.dim())?;
    Ok(k.eval_unchecked(x.as_slice(), z.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaarState {
    pub signals: Vec<Signal>,
    pub labels: Vec<ProbabilityVector>,
    pub kernel: Kernel,
    pub a: f64,
    pub d: usize,
}

#[derive(Debug, Clone)]
struct Factors {
    single: GrowingCholesky,
    full: GrowingCholesky,
}

#[derive(Debug, Clone)]
pub struct Kaar {
    n: usize,
    state: KaarState,
    /// Over-allocated; the leading `len x len` block is live.
    gram: DMatrix<f64>,
    /// `-2 (y^j - y^d)` per stored trial, one vector per class `j < d`.
    ybar: Vec<Vec<f64>>,
    factors: Option<Factors>,
}

impl Kaar {
    pub fn new(n: usize, d: usize, a: f64, kernel: Kernel) -> Result<Self> {
        crate::maar::MaarConfig::new(n, d, a)?;
        Ok(Self {
            n,
            state: KaarState { signals: Vec::new(), labels: Vec::new(), kernel, a, d },
            gram: DMatrix::zeros(0, 0),
            ybar: vec![Vec::new(); d - 1],
            factors: None,
        })
    }

    /// Extend Cholesky factors of `aI + K` and `aI + dK` by one row per
    /// trial instead of refactorizing.
    pub fn with_incremental_factors(mut self) -> Self {
        if self.factors.is_none() {
            let mut f = Factors { single: GrowingCholesky::new(), full: GrowingCholesky::new() };
            for t in 0..self.len() {
                let col = self.gram.column(t).rows(0, t + 1).into_owned();
                self.push_factor_rows(&mut f, &col).expect("regularized Gram is positive definite");
            }
            self.factors = Some(f);
        }
        self
    }

    pub fn state(&self) -> &KaarState {
        &self.state
    }

    pub fn len(&self) -> usize {
        self.state.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.signals.is_empty()
    }

    /// Gram matrix of the stored signals.
    pub fn gram(&self) -> DMatrixView<'_, f64> {
        let t = self.len();
        self.gram.view((0, 0), (t, t))
    }

    /// Kernel values of `x` against history, with `K(x, x)` last.
    fn kernel_column(&self, x: &Signal) -> DVector<f64> {
        let t = self.len();
        let k = &self.state.kernel;
        let mut col = DVector::zeros(t + 1);
        for (s, xs) in self.state.signals.iter().enumerate() {
            col[s] = k.eval_unchecked(xs.as_slice(), x.as_slice());
        }
        col[t] = k.eval_unchecked(x.as_slice(), x.as_slice());
        col
    }

    fn factor_columns(&self, col: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (a, d) = (self.state.a, self.state.d as f64);
        let last = col.len() - 1;
        let mut single = col.clone();
        single[last] += a;
        let mut full = col * d;
        full[last] += a;
        (single, full)
    }

    fn push_factor_rows(&self, f: &mut Factors, col: &DVector<f64>) -> Result<()> {
        let (single, full) = self.factor_columns(col);
        let (row, delta) = f.single.border(&single)?;
        f.single.push(&row, delta);
        let (row, delta) = f.full.border(&full)?;
        f.full.push(&row, delta);
        Ok(())
    }

    fn response(&self, col: &DVector<f64>) -> Result<StackedResponse> {
        let d = self.state.d;
        match &self.factors {
            Some(f) => {
                let (single, full) = self.factor_columns(col);
                let (rs, ds) = f.single.border(&single)?;
                let (rf, df) = f.full.border(&full)?;
                let sys = StructuredSystem::from_parts(d, f.single.bordered(rs, ds), f.full.bordered(rf, df));
                Ok(sys.stacked_response(col))
            }
            None => {
                let t = self.len();
                let mut k = DMatrix::zeros(t + 1, t + 1);
                k.view_mut((0, 0), (t, t)).copy_from(&self.gram());
                k.set_column(t, col);
                k.set_row(t, &col.transpose());
                let sys = StructuredSystem::factor(self.state.a, d, &k)?;
                Ok(sys.stacked_response(col))
            }
        }
    }

    pub fn generalized_prediction(&self, x: &Signal) -> Result<GeneralizedPrediction> {
        check_len(self.n, x.dim())?;
        let d = self.state.d;
        let t = self.len();
        let col = self.kernel_column(x);
        let resp = self.response(&col)?;

        // sum_j Y-_j + (d - 2) e_T
        let mut total = DVector::zeros(t + 1);
        for yb in &self.ybar {
            for (s, v) in yb.iter().enumerate() {
                total[s] += v;
            }
        }
        total[t] = (d - 2) as f64;
        let shared = total.dot(&resp.common);

        let mut r = Vec::with_capacity(d);
        for yb in &self.ybar {
            let own: f64 = yb.iter().zip(resp.own.iter()).map(|(a, b)| a * b).sum();
            r.push(shared + own);
        }
        r.push(0.0);
        GeneralizedPrediction::new(r)
    }

    pub fn update_state(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        check_len(self.n, x.dim())?;
        check_len(self.state.d, y.dim())?;
        let col = self.kernel_column(x);
        if let Some(mut f) = self.factors.take() {
            let pushed = self.push_factor_rows(&mut f, &col);
            self.factors = Some(f);
            pushed?;
        }
        let t = self.len();
        if t == self.gram.nrows() {
            let cap = (2 * t).max(16);
            let g = std::mem::replace(&mut self.gram, DMatrix::zeros(0, 0));
            self.gram = g.resize(cap, cap, 0.0);
        }
        for s in 0..=t {
            self.gram[(s, t)] = col[s];
            self.gram[(t, s)] = col[s];
        }

        let yd = y.as_slice()[self.state.d - 1];
        for (j, yb) in self.ybar.iter_mut().enumerate() {
            yb.push(-2.0 * (y.as_slice()[j] - yd));
        }
        self.state.signals.push(x.clone());
        self.state.labels.push(y.clone());
        Ok(())
    }
}

impl Forecaster for Kaar {
    fn classes(&self) -> usize {
        self.state.d
    }

    fn signal_dim(&self) -> usize {
        self.n
    }

    fn predict(&self, x: &Signal) -> Result<ProbabilityVector> {
        Ok(solve_substitution(&self.generalized_prediction(x)?))
    }

    fn update(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        self.update_state(x, y)
    }
}

/// `ln det (aI + (I + J) ⊗ K)` through the two `T x T` factorizations.
pub fn kernel_log_det(a: f64, d: usize, gram: &DMatrix<f64>) -> Result<f64> {
    Ok(StructuredSystem::factor(a, d, gram)?.log_det())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maar::{Maar, MaarConfig};
    use crate::types::{vertex_to_probability, Vertex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    fn vertex(i: usize, d: usize) -> ProbabilityVector {
        vertex_to_probability(Vertex(i), d).unwrap()
    }

    #[test]
    fn kernel_values() {
        let x = sig(&[1.0, 2.0]);
        assert_eq!(kernel_eval(&Kernel::Dot, &x, &x).unwrap(), 5.0);
        assert_eq!(kernel_eval(&Kernel::rbf(1.0).unwrap(), &x, &x).unwrap(), 1.0);
        let p = Kernel::poly(2, 1.0).unwrap();
        assert_eq!(kernel_eval(&p, &sig(&[1.0]), &sig(&[2.0])).unwrap(), 9.0);
        assert!(kernel_eval(&Kernel::Dot, &x, &sig(&[1.0])).is_err());
        assert!(Kernel::rbf(0.0).is_err());
        assert!(Kernel::poly(0, 1.0).is_err());
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Signal> = (0..12)
            .map(|_| sig(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect();
        for k in [Kernel::Dot, Kernel::rbf(0.7).unwrap(), Kernel::poly(3, 1.0).unwrap()] {
            let g = k.gram(&xs);
            assert_eq!(g, g.transpose());
            let eig = g.symmetric_eigenvalues();
            assert!(eig.iter().all(|&l| l > -1e-9 * eig.amax()));
        }
    }

    #[test]
    fn first_trial_forecasts() {
        // The last class is the reference of the parametrization, so only
        // the other classes are interchangeable a priori.
        for k in [Kernel::Dot, Kernel::rbf(2.0).unwrap(), Kernel::poly(2, 1.0).unwrap()] {
            let m = Kaar::new(2, 4, 0.3, k).unwrap();
            let p = m.predict(&sig(&[0.4, -1.3])).unwrap();
            let p = p.as_slice();
            assert!((p[0] - p[1]).abs() < 1e-15 && (p[1] - p[2]).abs() < 1e-15);
            let two = Kaar::new(2, 2, 0.3, k).unwrap();
            assert_eq!(two.predict(&sig(&[0.4, -1.3])).unwrap().as_slice(), &[0.5, 0.5]);
        }
        let m = Kaar::new(2, 4, 0.3, Kernel::Dot).unwrap();
        let p = m.predict(&sig(&[0.0, 0.0])).unwrap();
        assert!(p.as_slice().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn dot_kernel_reproduces_maar() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, d, a) = (3, 4, 0.8);
        let mut lin = Maar::new(MaarConfig::new(n, d, a).unwrap());
        let mut ker = Kaar::new(n, d, a, Kernel::Dot).unwrap();
        for _ in 0..40 {
            let x = sig(&(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            let p = lin.predict(&x).unwrap();
            let q = ker.predict(&x).unwrap();
            for (u, v) in p.as_slice().iter().zip(q.as_slice()) {
                assert!((u - v).abs() < 1e-10);
            }
            let y = vertex(rng.random_range(1..=d), d);
            lin.update(&x, &y).unwrap();
            ker.update(&x, &y).unwrap();
        }
    }

    #[test]
    fn incremental_factors_match_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let k = Kernel::rbf(0.9).unwrap();
        let mut direct = Kaar::new(2, 3, 0.05, k).unwrap();
        let mut fast = Kaar::new(2, 3, 0.05, k).unwrap().with_incremental_factors();
        for _ in 0..60 {
            let x = sig(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let p = direct.generalized_prediction(&x).unwrap();
            let q = fast.generalized_prediction(&x).unwrap();
            for (u, v) in p.as_slice().iter().zip(q.as_slice()) {
                assert!((u - v).abs() < 1e-8 * u.abs().max(1.0));
            }
            let y = vertex(rng.random_range(1..=3), 3);
            direct.update(&x, &y).unwrap();
            fast.update(&x, &y).unwrap();
        }
    }

    #[test]
    fn duplicate_training_point_concentrates_on_its_label() {
        // Brute-force evaluation of the dual formula at d = 2, T = 2.
        let k = Kernel::rbf(0.3).unwrap();
        let x1 = sig(&[0.5]);
        let a = 0.01;
        let mut m = Kaar::new(1, 2, a, k).unwrap();
        m.update(&x1, &vertex(1, 2)).unwrap();
        // K = [[1,1],[1,1]], A = aI + 2K, Y- = (-2, 0), k = (1, 1)
        let amat = DMatrix::from_row_slice(2, 2, &[a + 2.0, 2.0, 2.0, a + 2.0]);
        let w = amat.lu().solve(&DVector::from_vec(vec![2.0, 2.0])).unwrap();
        let r1 = -2.0 * w[0];
        let got = m.generalized_prediction(&x1).unwrap();
        assert!((got.as_slice()[0] - r1).abs() < 1e-10);
        let p = m.predict(&x1).unwrap();
        // two-point substitution: gamma_1 = (2 - r_1) / 4 = 1/2 + 1/(a + 4)
        assert!((p.as_slice()[0] - (0.5 + 1.0 / (a + 4.0))).abs() < 1e-12);
    }

    #[test]
    fn update_appends_and_replays() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let k = Kernel::poly(2, 1.0).unwrap();
        let mut a = Kaar::new(2, 3, 1.0, k).unwrap();
        let mut stream = Vec::new();
        for t in 0..10 {
            let x = sig(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let y = vertex(rng.random_range(1..=3), 3);
            a.update(&x, &y).unwrap();
            stream.push((x, y));
            assert_eq!(a.len(), t + 1);
            assert_eq!(a.state().labels.len(), t + 1);
        }
        let mut b = Kaar::new(2, 3, 1.0, k).unwrap();
        for (x, y) in &stream {
            b.update(x, y).unwrap();
        }
        let probe = sig(&[0.1, 0.2]);
        assert_eq!(a.predict(&probe).unwrap(), b.predict(&probe).unwrap());
        assert_eq!(a.gram().nrows(), 10);
    }
}
