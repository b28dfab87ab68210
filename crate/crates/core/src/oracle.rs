//! Slow reference computations used only by tests.
//!
//! Everything here works from the definitions (expert predictions, losses,
//! Gaussian priors) with plain `std` arithmetic and shares no code with the
//! forecasters it checks. Integration tests include this file by path.

#![allow(dead_code)]

/// Past trials as `(signal, outcome)` pairs.
#[derive(Debug, Clone, Default)]
pub struct History {
    pub trials: Vec<(Vec<f64>, Vec<f64>)>,
}

impl History {
    pub fn new(trials: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        Self { trials }
    }
}

/// Prediction of the linear expert `alpha` (blocks of length `n`, `d - 1`
/// of them) on signal `x`.
pub fn expert_prediction(alpha: &[f64], x: &[f64], d: usize) -> Vec<f64> {
    let n = x.len();
    let mut xi = Vec::with_capacity(d);
    let mut rest = 1.0;
    for i in 0..d - 1 {
        let mut v = 1.0 / d as f64;
        for k in 0..n {
            v += alpha[i * n + k] * x[k];
        }
        rest -= v;
        xi.push(v);
    }
    xi.push(rest);
    xi
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Cumulative Brier loss of a linear expert.
pub fn expert_loss(alpha: &[f64], hist: &History, d: usize) -> f64 {
    hist.trials
        .iter()
        .map(|(x, y)| sq_dist(y, &expert_prediction(alpha, x, d)))
        .sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Hessian, gradient at zero and value at zero of a quadratic `q`, read off
/// by evaluating it at unit probes.
pub fn probe_quadratic(q: &dyn Fn(&[f64]) -> f64, p: usize) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let c0 = q(&vec![0.0; p]);
    let unit = |j: usize, s: f64| {
        let mut v = vec![0.0; p];
        v[j] = s;
        v
    };
    let plus: Vec<f64> = (0..p).map(|j| q(&unit(j, 1.0))).collect();
    let minus: Vec<f64> = (0..p).map(|j| q(&unit(j, -1.0))).collect();
    let g: Vec<f64> = (0..p).map(|j| 0.5 * (plus[j] - minus[j])).collect();
    let mut h = vec![vec![0.0; p]; p];
    for j in 0..p {
        h[j][j] = plus[j] + minus[j] - 2.0 * c0;
        for k in 0..j {
            let mut v = vec![0.0; p];
            v[j] = 1.0;
            v[k] = 1.0;
            let hjk = q(&v) - plus[j] - plus[k] + c0;
            h[j][k] = hjk;
            h[k][j] = hjk;
        }
    }
    (h, g, c0)
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Conjugate gradients for `M x = rhs` with `M` symmetric positive
/// (semi)definite, followed by a few rounds of iterative refinement
/// against the true residual.
pub fn conjugate_gradient(m: &[Vec<f64>], rhs: &[f64], tol: f64) -> Vec<f64> {
    let mut x = cg_pass(m, rhs, tol);
    for _ in 0..3 {
        let res: Vec<f64> = rhs.iter().zip(mat_vec(m, &x)).map(|(b, mx)| b - mx).collect();
        if dot(&res, &res).sqrt() <= tol {
            break;
        }
        for (xk, ck) in x.iter_mut().zip(cg_pass(m, &res, tol)) {
            *xk += ck;
        }
    }
    x
}

fn cg_pass(m: &[Vec<f64>], rhs: &[f64], tol: f64) -> Vec<f64> {
    let p = rhs.len();
    let mut x = vec![0.0; p];
    let mut r = rhs.to_vec();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..(20 * p + 100) {
        if rr.sqrt() <= tol {
            break;
        }
        let md = mat_vec(m, &dir);
        let curv = dot(&dir, &md);
        if curv <= 0.0 {
            break;
        }
        let step = rr / curv;
        for k in 0..p {
            x[k] += step * dir[k];
            r[k] -= step * md[k];
        }
        let rr_new = dot(&r, &r);
        for k in 0..p {
            dir[k] = r[k] + (rr_new / rr) * dir[k];
        }
        rr = rr_new;
    }
    x
}

fn is_positive_definite(m: &[Vec<f64>]) -> bool {
    let p = m.len();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// Minimizes `alpha' A alpha + b' alpha + c` iteratively.
pub fn numeric_quadratic_min(a: &[Vec<f64>], b: &[f64], c: f64) -> Result<(Vec<f64>, f64), String> {
    if !is_positive_definite(a) {
        return Err("matrix is not positive definite".into());
    }
    let two_a: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|v| 2.0 * v).collect()).collect();
    let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
    let x = conjugate_gradient(&two_a, &neg_b, 1e-12);
    let value = dot(&x, &mat_vec(a, &x)) + dot(b, &x) + c;
    Ok((x, value))
}

/// Minimum of a convex quadratic given as a closure in `p` variables.
pub fn minimize_quadratic_fn(q: &dyn Fn(&[f64]) -> f64, p: usize) -> (Vec<f64>, f64) {
    let (h, g, _) = probe_quadratic(q, p);
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let x = conjugate_gradient(&h, &neg_g, 1e-12);
    let value = q(&x);
    (x, value)
}

/// `ln ∫ exp(-eta q(alpha)) d alpha` over `R^p` (p <= 3) for a positive
/// definite quadratic `q`, by a tensor trapezoid grid spanning twelve
/// marginal standard deviations either side of the mode.
pub fn log_gaussian_integral(q: &dyn Fn(&[f64]) -> f64, p: usize, eta: f64) -> Result<f64, String> {
    if p == 0 || p > 3 {
        return Err(format!("quadrature dimension {p} outside 1..=3"));
    }
    let (h, g, _) = probe_quadratic(q, p);
    let half_h: Vec<Vec<f64>> = h.iter().map(|row| row.iter().map(|v| 0.5 * v).collect()).collect();
    let (center, _) = numeric_quadratic_min(&half_h, &g, 0.0)?;
    let q_center = q(&center);

    // Covariance of exp(-eta q) is (eta H)^{-1}.
    let mut sigma = vec![0.0; p];
    let mut nodes = vec![0usize; p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let col = conjugate_gradient(&h, &e, 1e-14);
        let marginal = (col[j] / eta).sqrt();
        let conditional = 1.0 / (eta * h[j][j]).sqrt();
        sigma[j] = marginal;
        nodes[j] = if p <= 2 {
            2001
        } else {
            let want = (48.0 * marginal / conditional).ceil() as usize + 1;
            want.clamp(121, 481) | 1
        };
    }
    let axes: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let half = 12.0 * sigma[j];
            let steps = nodes[j] - 1;
            (0..nodes[j])
                .map(|k| center[j] - half + 2.0 * half * k as f64 / steps as f64)
                .collect()
        })
        .collect();
    let cell: f64 = (0..p).map(|j| 24.0 * sigma[j] / (nodes[j] - 1) as f64).product();

    // q(alpha) - q(center) = 0.5 (alpha - c)' H (alpha - c) for a quadratic.
    let mut sum = 0.0;
    let mut delta = vec![0.0; p];
    let mut visit = |delta: &[f64]| {
        let mut quad = 0.0;
        for (hj, dj) in h.iter().zip(delta) {
            quad += dj * dot(hj, delta);
        }
        sum += (-0.5 * eta * quad).exp();
    };
    match p {
        1 => {
            for &u in &axes[0] {
                delta[0] = u - center[0];
                visit(&delta);
            }
        }
        2 => {
            for &u in &axes[0] {
                for &v in &axes[1] {
                    delta[0] = u - center[0];
                    delta[1] = v - center[1];
                    visit(&delta);
                }
            }
        }
        _ => {
            for &u in &axes[0] {
                for &v in &axes[1] {
                    for &w in &axes[2] {
                        delta[0] = u - center[0];
                        delta[1] = v - center[1];
                        delta[2] = w - center[2];
                        visit(&delta);
                    }
                }
            }
        }
    }
    Ok((sum * cell).ln() - eta * q_center)
}

fn check_dims(hist: &History, x_t: &[f64], d: usize) -> Result<usize, String> {
    let p = x_t.len() * (d - 1);
    if p > 3 {
        return Err(format!("parameter dimension {p} exceeds 3"));
    }
    for (x, y) in &hist.trials {
        if x.len() != x_t.len() || y.len() != d {
            return Err("inconsistent history dimensions".into());
        }
    }
    Ok(p)
}

fn vertex(i: usize, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

/// Log-integrals `ln ∫ exp(-eta (a|alpha|^2 + L_{T-1}(alpha) + loss(y{v}, xi_T)))`
/// for every vertex `v`, plus the history-only integral.
fn vertex_log_integrals(hist: &History, x_t: &[f64], d: usize, a: f64, eta: f64) -> Result<(Vec<f64>, f64), String> {
    let p = check_dims(hist, x_t, d)?;
    let base = |alpha: &[f64]| a * dot(alpha, alpha) + expert_loss(alpha, hist, d);
    let mut logs = Vec::with_capacity(d);
    for v in 0..d {
        let y = vertex(v, d);
        let q = |alpha: &[f64]| base(alpha) + sq_dist(&y, &expert_prediction(alpha, x_t, d));
        logs.push(log_gaussian_integral(&q, p, eta)?);
    }
    let hist_log = log_gaussian_integral(&base, p, eta)?;
    Ok((logs, hist_log))
}

/// Shifted generalized prediction of the Aggregating Algorithm over linear
/// experts with Gaussian prior `exp(-a eta |alpha|^2)`, normalized so the
/// last entry is zero. The outcome dimension is taken from the history, or
/// from `d_hint` when the history is empty.
pub fn quadrature_r_with_dim(hist: &History, x_t: &[f64], d: usize, a: f64, eta: f64) -> Result<Vec<f64>, String> {
    let (logs, _) = vertex_log_integrals(hist, x_t, d, a, eta)?;
    let last = logs[d - 1];
    Ok(logs.iter().map(|l| -(l - last) / eta).collect())
}

pub fn quadrature_r(hist: &History, x_t: &[f64], a: f64, eta: f64) -> Result<Vec<f64>, String> {
    let d = hist
        .trials
        .first()
        .map(|(_, y)| y.len())
        .ok_or("empty history; use quadrature_r_with_dim")?;
    quadrature_r_with_dim(hist, x_t, d, a, eta)
}

/// Absolute generalized prediction `g_T(y{v})` under normalized weights.
pub fn quadrature_g(hist: &History, x_t: &[f64], d: usize, a: f64, eta: f64) -> Result<Vec<f64>, String> {
    let (logs, hist_log) = vertex_log_integrals(hist, x_t, d, a, eta)?;
    Ok(logs.iter().map(|l| -(l - hist_log) / eta).collect())
}

/// Per-component forecast of the component-wise algorithm for class `i`
/// (0-based), from the one-dimensional substitution
/// `gamma = 1/2 + (g(0) - g(1)) / 2` with learning rate `eta`.
pub fn quadrature_component(hist: &History, x_t: &[f64], i: usize, d: usize, a: f64, eta: f64) -> Result<f64, String> {
    let n = x_t.len();
    if n > 3 {
        return Err(format!("signal dimension {n} exceeds 3"));
    }
    let centre = 1.0 / d as f64;
    let past = |beta: &[f64]| {
        a * dot(beta, beta)
            + hist
                .trials
                .iter()
                .map(|(x, y)| {
                    let e = y[i] - centre - dot(beta, x);
                    e * e
                })
                .sum::<f64>()
    };
    let with_outcome = |omega: f64| {
        move |beta: &[f64]| {
            let e = omega - centre - dot(beta, x_t);
            past(beta) + e * e
        }
    };
    let l0 = log_gaussian_integral(&with_outcome(0.0), n, eta)?;
    let l1 = log_gaussian_integral(&with_outcome(1.0), n, eta)?;
    // g(w) = -(1/eta) ln I_w + const
    Ok(0.5 + (l1 - l0) / (2.0 * eta))
}

/// Euclidean projection onto the simplex by enumerating every support set.
pub fn qp_projection(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    assert!((1..=12).contains(&d));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|&i| mask & (1 << i) != 0).collect();
        let tau = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut p = vec![0.0; d];
        let mut feasible = true;
        for &i in &support {
            p[i] = v[i] - tau;
            if p[i] < 0.0 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist = sq_dist(&p, v);
        if best.as_ref().is_none_or(|(b, _)| dist < *b) {
            best = Some((dist, p));
        }
    }
    best.expect("some support set is feasible").1
}

/// Best regularized linear expert: `min_alpha L(alpha) + reg |alpha|^2`.
pub fn best_linear_objective(hist: &History, n: usize, d: usize, reg: f64) -> (Vec<f64>, f64) {
    let f = |alpha: &[f64]| expert_loss(alpha, hist, d) + reg * dot(alpha, alpha);
    minimize_quadratic_fn(&f, n * (d - 1))
}

/// Best regularized kernel expert over representer coefficients, with the
/// Gram matrix supplied by the caller. Returns the objective value.
pub fn best_kernel_objective(gram: &[Vec<f64>], ys: &[Vec<f64>], d: usize, reg: f64) -> f64 {
    let t = gram.len();
    let m = d - 1;
    let centre = 1.0 / d as f64;
    let f = |c: &[f64]| {
        let mut total = 0.0;
        let mut fvals = vec![vec![0.0; t]; m];
        for i in 0..m {
            let ci = &c[i * t..(i + 1) * t];
            fvals[i] = mat_vec(gram, ci);
            total += reg * dot(ci, &fvals[i]);
        }
        for s in 0..t {
            let mut rest = 1.0;
            for i in 0..m {
                let xi = centre + fvals[i][s];
                rest -= xi;
                total += (ys[s][i] - xi).powi(2);
            }
            total += (ys[s][m] - rest).powi(2);
        }
        total
    };
    minimize_quadratic_fn(&f, t * m).1
}

#[cfg(test)]
mod tests {
    // Unused when included by a harness-less test target.
    #[allow(unused_imports)]
    use super::*;

    #[test]
    fn gaussian_integral_one_dimensional() {
        // min a^2 + 2a at -1, value -1.
        let (x, v) = numeric_quadratic_min(&[vec![1.0]], &[2.0], 0.0).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-12);
        assert!((v + 1.0).abs() < 1e-12);
        // F(I, 2, 3) = -b'A^{-1}z = -6
        let plus = numeric_quadratic_min(&[vec![1.0]], &[5.0], 0.0).unwrap().1;
        let minus = numeric_quadratic_min(&[vec![1.0]], &[-1.0], 0.0).unwrap().1;
        assert!((plus - minus + 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(numeric_quadratic_min(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn gaussian_integral_closed_form_1d() {
        // ∫ exp(-(a^2 + b a + c)) = exp(-(c - b^2/4)) sqrt(pi)
        for (b, c) in [(0.0, 0.0), (1.5, -0.3), (-4.0, 2.0)] {
            let q = |x: &[f64]| x[0] * x[0] + b * x[0] + c;
            let got = log_gaussian_integral(&q, 1, 1.0).unwrap();
            let want = -(c - b * b / 4.0) + std::f64::consts::PI.sqrt().ln();
            assert!(((got - want).exp() - 1.0).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn gaussian_integral_3d() {
        let h = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let q = |x: &[f64]| {
            let mut s = 0.3 * x[0] - x[2] + 0.7;
            for i in 0..3 {
                for j in 0..3 {
                    s += 0.5 * h[i][j] * x[i] * x[j];
                }
            }
            s
        };
        let got = log_gaussian_integral(&q, 3, 1.0).unwrap();
        // Closed form: exp(-Q0) (2 pi)^{3/2} / sqrt(det H)
        let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
        let hv: Vec<Vec<f64>> = h.iter().map(|r| r.to_vec()).collect();
        let half: Vec<Vec<f64>> = hv.iter().map(|r| r.iter().map(|v| 0.5 * v).collect()).collect();
        let (_, q0) = numeric_quadratic_min(&half, &[0.3, 0.0, -1.0], 0.7).unwrap();
        let want = -q0 + 1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        assert!((got - want).abs() < 1e-7, "{got} vs {want}");
    }

    #[test]
    fn empty_history_zero_signal_gives_zero_r() {
        let r = quadrature_r_with_dim(&History::default(), &[0.0], 3, 1.0, 1.0).unwrap();
        for v in r {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn projection_enumeration() {
        let p = qp_projection(&[0.8, 0.4, -0.2]);
        assert!((p[0] - 0.7).abs() < 1e-12 && (p[1] - 0.3).abs() < 1e-12 && p[2] == 0.0);
        let p = qp_projection(&[0.2, 0.3, 0.5]);
        assert!((p[0] - 0.2).abs() < 1e-12);
    }
}
