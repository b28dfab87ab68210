//! Multi-dimensional Aggregating Algorithm for Regression (mAAR).
//!
//! Competes with the linear experts `xi^i = 1/d + alpha_i' x` for
//! `i < d` (the last component takes up the remainder). The mixture over
//! experts under a Gaussian prior has a closed form: the shifted
//! generalized prediction is `r_i = -b_i' A^{-1} z_i` with
//! `A = aI + (I + J) ⊗ C`, and the forecast is obtained by substitution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::structured::{
    sherman_morrison_update, CholeskySolver, RankOneSolver, SpdSolver, StackedResponse, StructuredSystem,
};
use crate::substitution::{solve_substitution, GeneralizedPrediction};
use crate::types::{Forecaster, ProbabilityVector, Signal};

pub use crate::structured::solve_structured;

/// Trials between full refactorizations when inverses are updated in place.
pub const REFRESH_INTERVAL: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaarConfig {
    /// Signal dimension.
    pub n: usize,
    /// Number of classes.
    pub d: usize,
    /// Ridge (prior scale).
    pub a: f64,
}

impl MaarConfig {
    pub fn new(n: usize, d: usize, a: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("signal dimension must be >= 1".into()));
        }
        if d < 2 {
            return Err(Error::InvalidParameter(format!("need d >= 2 classes, got {d}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("ridge must be positive, got {a}")));
        }
        Ok(Self { n, d, a })
    }
}

/// How the two `n x n` systems are solved at prediction time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum InverseMode {
    /// Refactorize from `C + x x'` on every trial.
    #[default]
    Direct,
    /// Keep explicit inverses and apply rank-one corrections.
    ShermanMorrison,
}

/// Sufficient statistics: `C = sum x x'` and the stacked vector
/// `h_i = -2 sum (y^i - y^d) x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaarState {
    pub c: DMatrix<f64>,
    pub h: DVector<f64>,
    pub t: usize,
}

impl MaarState {
    pub fn zeros(cfg: &MaarConfig) -> Self {
        Self {
            c: DMatrix::zeros(cfg.n, cfg.n),
            h: DVector::zeros(cfg.n * (cfg.d - 1)),
            t: 0,
        }
    }

    fn h_block(&self, n: usize, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.h.rows(i * n, n)
    }
}

#[derive(Debug, Clone)]
struct Inverses {
    single: DMatrix<f64>,
    full: DMatrix<f64>,
    single_log_det: f64,
    full_log_det: f64,
    since_refresh: usize,
}

#[derive(Debug, Clone)]
pub struct Maar {
    cfg: MaarConfig,
    state: MaarState,
    inverses: Option<Inverses>,
}

impl Maar {
    pub fn new(cfg: MaarConfig) -> Self {
        Self { state: MaarState::zeros(&cfg), cfg, inverses: None }
    }

    pub fn with_mode(cfg: MaarConfig, mode: InverseMode) -> Self {
        let mut m = Self::new(cfg);
        if mode == InverseMode::ShermanMorrison {
            m.inverses = Some(m.fresh_inverses().expect("aI is positive definite"));
        }
        m
    }

    pub fn config(&self) -> &MaarConfig {
        &self.cfg
    }

    pub fn state(&self) -> &MaarState {
        &self.state
    }

    pub fn mode(&self) -> InverseMode {
        if self.inverses.is_some() {
            InverseMode::ShermanMorrison
        } else {
            InverseMode::Direct
        }
    }

    fn fresh_inverses(&self) -> Result<Inverses> {
        let (a, d, n) = (self.cfg.a, self.cfg.d as f64, self.cfg.n);
        let eye = DMatrix::<f64>::identity(n, n);
        let single = CholeskySolver::new(&eye * a + &self.state.c)?;
        let full = CholeskySolver::new(&eye * a + &self.state.c * d)?;
        let invert = |s: &CholeskySolver| {
            let mut inv = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                inv.set_column(j, &s.solve(&e));
            }
            inv
        };
        Ok(Inverses {
            single: invert(&single),
            full: invert(&full),
            single_log_det: single.log_det(),
            full_log_det: full.log_det(),
            since_refresh: 0,
        })
    }

    fn response(&self, x: &DVector<f64>) -> Result<StackedResponse> {
        let d = self.cfg.d;
        match &self.inverses {
            None => {
                let c = &self.state.c + x * x.transpose();
                Ok(StructuredSystem::factor(self.cfg.a, d, &c)?.stacked_response(x))
            }
            Some(inv) => {
                let single = RankOneSolver::new(&inv.single, x, 1.0);
                let full = RankOneSolver::new(&inv.full, x, d as f64);
                Ok(StructuredSystem::from_parts(d, single, full).stacked_response(x))
            }
        }
    }

    /// Shifted generalized prediction `r` with `r_d = 0`. Read-only.
    pub fn generalized_prediction(&self, x: &Signal) -> Result<GeneralizedPrediction> {
        check_len(self.cfg.n, x.dim())?;
        let (n, d) = (self.cfg.n, self.cfg.d);
        let xv = DVector::from_column_slice(x.as_slice());
        let resp = self.response(&xv)?;

        let mut total = DVector::zeros(n);
        for j in 0..d - 1 {
            total += self.state.h_block(n, j);
        }
        total += &xv * (d - 2) as f64;
        let shared = total.dot(&resp.common);

        let mut r = Vec::with_capacity(d);
        for i in 0..d - 1 {
            r.push(shared + self.state.h_block(n, i).dot(&resp.own));
        }
        r.push(0.0);
        GeneralizedPrediction::new(r)
    }

    /// Applies `C += x x'` and `h_i -= 2 (y^i - y^d) x`.
    pub fn update_state(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        check_len(self.cfg.n, x.dim())?;
        check_len(self.cfg.d, y.dim())?;
        let (n, d) = (self.cfg.n, self.cfg.d);
        let xv = DVector::from_column_slice(x.as_slice());
        self.state.c.ger(1.0, &xv, &xv, 1.0);
        let yd = y.as_slice()[d - 1];
        for i in 0..d - 1 {
            let w = -2.0 * (y.as_slice()[i] - yd);
            if w != 0.0 {
                self.state.h.rows_mut(i * n, n).axpy(w, &xv, 1.0);
            }
        }
        self.state.t += 1;

        if let Some(inv) = self.inverses.as_mut() {
            inv.since_refresh += 1;
            if inv.since_refresh >= REFRESH_INTERVAL {
                self.inverses = Some(self.fresh_inverses()?);
            } else {
                let dd = d as f64;
                inv.single_log_det += (1.0 + xv.dot(&(&inv.single * &xv))).ln();
                inv.full_log_det += (1.0 + dd * xv.dot(&(&inv.full * &xv))).ln();
                sherman_morrison_update(&mut inv.single, &xv, 1.0);
                sherman_morrison_update(&mut inv.full, &xv, dd);
            }
        }
        Ok(())
    }
}

impl Forecaster for Maar {
    fn classes(&self) -> usize {
        self.cfg.d
    }

    fn signal_dim(&self) -> usize {
        self.cfg.n
    }

    fn predict(&self, x: &Signal) -> Result<ProbabilityVector> {
        Ok(solve_substitution(&self.generalized_prediction(x)?))
    }

    fn update(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        self.update_state(x, y)
    }
}
