//! Component-wise Aggregating Algorithm for Regression (cAAR).
//!
//! Each class probability is forecast separately by a one-dimensional AAR
//! over experts `1/d + alpha_i' x` (learning rate 2 for outcomes in [0, 1]):
//!
//! `gamma^i = 1/d + (E_i + (d-2)/(2d) x)' (aI + sum_{t<=T} x_t x_t')^{-1} x`
//!
//! with `E_i = sum_{t<T} (y_t^i - 1/d) x_t`. The raw vector sums to
//! `1 + (d-2)/2 * x'(..)^{-1}x`, so it is projected onto the simplex, which
//! never increases the Brier loss.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::maar::{InverseMode, MaarConfig, REFRESH_INTERVAL};
use crate::projection::project_to_simplex;
use crate::structured::{sherman_morrison_update, CholeskySolver, SpdSolver};
use crate::types::{Forecaster, ProbabilityVector, Signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaarState {
    /// `sum x x'`
    pub b_core: DMatrix<f64>,
    /// Column `i` is `E_i = sum (y^i - 1/d) x`.
    pub e: DMatrix<f64>,
    pub t: usize,
}

impl CaarState {
    pub fn zeros(cfg: &MaarConfig) -> Self {
        Self {
            b_core: DMatrix::zeros(cfg.n, cfg.n),
            e: DMatrix::zeros(cfg.n, cfg.d),
            t: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct RidgeInverse {
    inv: DMatrix<f64>,
    since_refresh: usize,
}

#[derive(Debug, Clone)]
pub struct Caar {
    cfg: MaarConfig,
    state: CaarState,
    /// `(aI + b_core)^{-1}`, kept in sync when present.
    inverse: Option<RidgeInverse>,
}

impl Caar {
    /// Incrementally updated inverse with periodic refresh.
    pub fn new(cfg: MaarConfig) -> Self {
        Self::with_mode(cfg, InverseMode::ShermanMorrison)
    }

    pub fn with_mode(cfg: MaarConfig, mode: InverseMode) -> Self {
        let inverse = match mode {
            InverseMode::Direct => None,
            InverseMode::ShermanMorrison => Some(RidgeInverse {
                inv: DMatrix::identity(cfg.n, cfg.n) / cfg.a,
                since_refresh: 0,
            }),
        };
        Self { state: CaarState::zeros(&cfg), cfg, inverse }
    }

    pub fn config(&self) -> &MaarConfig {
        &self.cfg
    }

    pub fn state(&self) -> &CaarState {
        &self.state
    }

    fn ridge_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.cfg.n, self.cfg.n) * self.cfg.a + &self.state.b_core
    }

    /// `(aI + B + x x')^{-1} x`, shared by all components.
    fn shared_factor(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.inverse {
            Some(ri) => {
                let inv_x = &ri.inv * x;
                Ok(&inv_x / (1.0 + x.dot(&inv_x)))
            }
            None => {
                let b = self.ridge_matrix() + x * x.transpose();
                Ok(CholeskySolver::new(b)?.solve(x))
            }
        }
    }

    /// Per-component forecasts before projection.
    pub fn raw_forecast(&self, x: &Signal) -> Result<Vec<f64>> {
        check_len(self.cfg.n, x.dim())?;
        let d = self.cfg.d;
        let xv = DVector::from_column_slice(x.as_slice());
        let w = self.shared_factor(&xv)?;
        let drift = (d as f64 - 2.0) / (2.0 * d as f64) * xv.dot(&w);
        Ok((0..d)
            .map(|i| 1.0 / d as f64 + self.state.e.column(i).dot(&w) + drift)
            .collect())
    }

    pub fn update_state(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        check_len(self.cfg.n, x.dim())?;
        check_len(self.cfg.d, y.dim())?;
        let d = self.cfg.d;
        let xv = DVector::from_column_slice(x.as_slice());
        self.state.b_core.ger(1.0, &xv, &xv, 1.0);
        for (i, &yi) in y.as_slice().iter().enumerate() {
            let w = yi - 1.0 / d as f64;
            if w != 0.0 {
                self.state.e.column_mut(i).axpy(w, &xv, 1.0);
            }
        }
        self.state.t += 1;

        if self.inverse.is_some() {
            let refresh = {
                let ri = self.inverse.as_mut().expect("checked");
                ri.since_refresh += 1;
                ri.since_refresh >= REFRESH_INTERVAL
            };
            if refresh {
                let solver = CholeskySolver::new(self.ridge_matrix())?;
                let n = self.cfg.n;
                let mut inv = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = DVector::zeros(n);
                    e[j] = 1.0;
                    inv.set_column(j, &solver.solve(&e));
                }
                self.inverse = Some(RidgeInverse { inv, since_refresh: 0 });
            } else {
                let ri = self.inverse.as_mut().expect("checked");
                sherman_morrison_update(&mut ri.inv, &xv, 1.0);
            }
        }
        Ok(())
    }
}

impl Forecaster for Caar {
    fn classes(&self) -> usize {
        self.cfg.d
    }

    fn signal_dim(&self) -> usize {
        self.cfg.n
    }

    fn predict(&self, x: &Signal) -> Result<ProbabilityVector> {
        project_to_simplex(&self.raw_forecast(x)?)
    }

    fn update(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        self.update_state(x, y)
    }
}
