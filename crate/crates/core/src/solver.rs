//! Matrix-free Krylov and inverse-iteration kernels in a weighted inner
//! product.
//!
//! Every operator handled here is self-adjoint with respect to
//! `<x, y>_M = sum_i w_i x_i y_i`, where `w` are the control volumes of the
//! unknowns. Entries outside the operator's support are kept at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_calculus::{weighted_dot, Reduction};

/// Tolerances for the linear solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative residual target `||b - Ax|| <= tol ||b||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed-order reductions; results are bit-reproducible.
    pub deterministic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            deterministic: true,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(Error::InvalidConfig(format!(
                "tolerance {} outside (0, 1e-2]",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn reduction(&self) -> Reduction {
        if self.deterministic {
            Reduction::Sequential
        } else {
            Reduction::Parallel
        }
    }
}

/// A symmetric positive (semi-)definite operator on flat vectors.
pub(crate) trait LinearOperator {
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn weights(&self) -> &[f64];
    fn support(&self) -> &[bool];
    /// Diagonal of the operator, zero off the support.
    fn diagonal(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// Stopping rule for [`pcg`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stop {
    pub rtol: f64,
    /// Absolute floor for right-hand sides at rounding level.
    pub atol: f64,
    pub max_iter: usize,
    pub mode: Reduction,
}

impl Stop {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        Self {
            rtol: cfg.tol,
            atol: 0.0,
            max_iter: cfg.max_iter,
            mode: cfg.reduction(),
        }
    }
}

/// Jacobi-preconditioned conjugate gradients in the `M` inner product.
///
/// `project`, when given, is an `M`-orthogonal projector onto the subspace
/// the solve lives in (e.g. the complement of constants for a Neumann
/// problem); it is applied to the right side and to every search direction.
pub(crate) fn pcg(
    op: &dyn LinearOperator,
    b: &[f64],
    x0: Option<Vec<f64>>,
    project: Option<&dyn Fn(&mut [f64])>,
    stop: Stop,
) -> Result<(Vec<f64>, CgReport)> {
    let w = op.weights();
    let mode = stop.mode;
    let dot = |a: &[f64], c: &[f64]| weighted_dot(a, c, w, mode);
    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let sup = op.support();

    let mut b = b.to_vec();
    for (v, &s) in b.iter_mut().zip(sup) {
        if !s {
            *v = 0.0;
        }
    }
    if let Some(p) = project {
        p(&mut b);
    }
    let bnorm = dot(&b, &b).sqrt();
    let target = (stop.rtol * bnorm).max(stop.atol);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };

    let mut x = match x0 {
        Some(mut x) => {
            if let Some(p) = project {
                p(&mut x);
            }
            x
        }
        None => vec![0.0; b.len()],
    };
    let residual_of = |x: &[f64]| -> Vec<f64> {
        let ax = op.apply(x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if let Some(p) = project {
            p(&mut r);
        }
        r
    };

    let mut r = residual_of(&x);
    let mut rnorm = dot(&r, &r).sqrt();
    let mut history = vec![rnorm / scale];
    let mut it = 0;
    let precond = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        if let Some(p) = project {
            p(&mut z);
        }
        z
    };
    // restart from the true residual when the recurrence drifts
    for _restart in 0..8 {
        if rnorm <= target {
            return Ok((
                x,
                CgReport {
                    iterations: it,
                    residual: rnorm / scale,
                    history,
                },
            ));
        }
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while it < stop.max_iter {
            let mut ap = op.apply(&p);
            if let Some(pr) = project {
                pr(&mut ap);
            }
            let pap = dot(&p, &ap);
            if !(pap > 0.0 && rz.is_finite()) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            it += 1;
            rnorm = dot(&r, &r).sqrt();
            history.push(rnorm / scale);
            if rnorm <= target {
                break;
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        r = residual_of(&x);
        rnorm = dot(&r, &r).sqrt();
        if let Some(last) = history.last_mut() {
            *last = rnorm / scale;
        }
        if rnorm > target && it >= stop.max_iter {
            break;
        }
    }
    if rnorm <= target {
        return Ok((
            x,
            CgReport {
                iterations: it,
                residual: rnorm / scale,
                history,
            },
        ));
    }
    Err(Error::NotConverged {
        iterations: it,
        residual: rnorm / scale,
        history,
    })
}

/// Settings for [`inverse_iteration`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    /// Target for `||A x - lambda x|| / (lambda ||x||)`.
    pub tol: f64,
    pub max_outer: usize,
    /// Inner solve limits; the inner tolerance adapts to the eigen-residual
    /// and never goes below `inner.tol`.
    pub inner: SolverConfig,
    /// Seed of the random start vector.
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_outer: 400,
            inner: SolverConfig {
                tol: 1e-12,
                ..SolverConfig::default()
            },
            seed: 0x5eed,
        }
    }
}

impl EigenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidConfig(format!("eigen tolerance {} outside (0, 1)", self.tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("max_outer must be at least 1".into()));
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct EigenPair {
    pub lambda: f64,
    /// `M`-normalized eigenvector.
    pub vector: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub residual: f64,
}

/// Smallest eigenpair of `op` on the subspace kept by the projections.
///
/// `inner_project` is a cheap `M`-orthogonal projector used inside every CG
/// step; `outer_project` is applied once per outer step (it may itself
/// involve a linear solve) and must map into the constrained subspace.
pub(crate) fn inverse_iteration(
    op: &dyn LinearOperator,
    inner_project: Option<&dyn Fn(&mut [f64])>,
    outer_project: Option<&dyn Fn(&mut [f64]) -> Result<()>>,
    cfg: &EigenConfig,
) -> Result<EigenPair> {
    let w = op.weights();
    let mode = cfg.inner.reduction();
    let dot = |a: &[f64], b: &[f64]| weighted_dot(a, b, w, mode);
    let sup = op.support();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Vec<f64> = sup
        .iter()
        .map(|&s| if s { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let constrain = |x: &mut Vec<f64>| -> Result<()> {
        if let Some(p) = inner_project {
            p(x);
        }
        if let Some(p) = outer_project {
            p(x)?;
        }
        let n = dot(x, x).sqrt();
        if n == 0.0 {
            return Err(Error::InvalidConfig("constrained subspace is trivial".into()));
        }
        x.iter_mut().for_each(|v| *v /= n);
        Ok(())
    };
    constrain(&mut x)?;

    let mut ax = op.apply(&x);
    let mut lambda = dot(&x, &ax);
    let mut residual = f64::INFINITY;
    let mut history = Vec::new();
    let mut inner_total = 0;
    for outer in 1..=cfg.max_outer {
        let inner_tol = (0.05 * residual).clamp(cfg.inner.tol, 1e-2);
        let stop = Stop {
            rtol: inner_tol,
            atol: 0.0,
            max_iter: cfg.inner.max_iter,
            mode,
        };
        let guess = if lambda > 0.0 {
            Some(x.iter().map(|v| v / lambda).collect())
        } else {
            None
        };
        let (mut y, rep) = pcg(op, &x, guess, inner_project, stop)?;
        inner_total += rep.iterations;
        constrain(&mut y)?;
        x = y;
        ax = op.apply(&x);
        lambda = dot(&x, &ax);
        let mut r: Vec<f64> = ax.iter().zip(&x).map(|(a, x)| a - lambda * x).collect();
        if let Some(p) = inner_project {
            p(&mut r);
        }
        residual = dot(&r, &r).sqrt() / lambda.abs().max(f64::MIN_POSITIVE);
        history.push(residual);
        if residual <= cfg.tol {
            return Ok(EigenPair {
                lambda,
                vector: x,
                outer_iterations: outer,
                inner_iterations: inner_total,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_outer,
        residual,
        history,
    })
}

/// `M`-orthogonal projector onto the complement of a set of indicator
/// vectors with pairwise disjoint supports (constants, slab indicators).
pub(crate) fn indicator_projector<'a>(
    groups: &'a [Vec<usize>],
    weights: &'a [f64],
) -> impl Fn(&mut [f64]) + 'a {
    let masses: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&i| weights[i]).sum())
        .collect();
    move |x: &mut [f64]| {
        for (g, &m) in groups.iter().zip(&masses) {
            if m == 0.0 {
                continue;
            }
            let mean = g.iter().map(|&i| weights[i] * x[i]).sum::<f64>() / m;
            for &i in g {
                x[i] -= mean;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Dirichlet Laplacian on n interior points, unit weights.
    struct Lap1d {
        n: usize,
        w: Vec<f64>,
        s: Vec<bool>,
        neumann: bool,
    }

    impl Lap1d {
        fn new(n: usize, neumann: bool) -> Self {
            Self {
                n,
                w: vec![1.0; n],
                s: vec![true; n],
                neumann,
            }
        }
    }

    impl LinearOperator for Lap1d {
        fn apply(&self, x: &[f64]) -> Vec<f64> {
            let n = self.n;
            (0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else if self.neumann { x[i] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else if self.neumann { x[i] } else { 0.0 };
                    2.0 * x[i] - l - r
                })
                .collect()
        }
        fn weights(&self) -> &[f64] {
            &self.w
        }
        fn support(&self) -> &[bool] {
            &self.s
        }
        fn diagonal(&self) -> Vec<f64> {
            (0..self.n)
                .map(|i| if self.neumann && (i == 0 || i + 1 == self.n) { 1.0 } else { 2.0 })
                .collect()
        }
    }

    fn stop(rtol: f64) -> Stop {
        Stop {
            rtol,
            atol: 0.0,
            max_iter: 1000,
            mode: Reduction::Sequential,
        }
    }

    #[test]
    fn cg_solves_dirichlet_problem() {
        let op = Lap1d::new(50, false);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x, rep) = pcg(&op, &b, None, None, stop(1e-12)).unwrap();
        let ax = op.apply(&x);
        let err: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10, "{err}");
        assert!(rep.iterations <= 50);
    }

    #[test]
    fn cg_on_neumann_problem_with_projection() {
        let op = Lap1d::new(40, true);
        let groups = vec![(0..40).collect::<Vec<_>>()];
        let w = vec![1.0; 40];
        let proj = indicator_projector(&groups, &w);
        let b: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let (x, _) = pcg(&op, &b, None, Some(&proj), stop(1e-12)).unwrap();
        assert!(x.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn cg_reports_history_on_failure() {
        let op = Lap1d::new(200, false);
        let b = vec![1.0; 200];
        let s = Stop {
            max_iter: 3,
            ..stop(1e-14)
        };
        match pcg(&op, &b, None, None, s) {
            Err(Error::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert!(history.len() >= 3);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let op = Lap1d::new(10, false);
        let (x, rep) = pcg(&op, &[0.0; 10], None, None, stop(1e-10)).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn inverse_iteration_finds_smallest_dirichlet_mode() {
        let n = 30;
        let op = Lap1d::new(n, false);
        let pair = inverse_iteration(&op, None, None, &EigenConfig::default()).unwrap();
        let exact = 4.0 * (std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
        assert!((pair.lambda - exact).abs() < 1e-9 * exact, "{} vs {exact}", pair.lambda);
        let norm: f64 = pair.vector.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deflated_neumann_mode() {
        let n = 30;
        let op = Lap1d::new(n, true);
        let groups = vec![(0..n).collect::<Vec<_>>()];
        let w = vec![1.0; n];
        let proj = indicator_projector(&groups, &w);
        let pair = inverse_iteration(&op, Some(&proj), None, &EigenConfig::default()).unwrap();
        let exact = 4.0 * (std::f64::consts::PI / (2.0 * n as f64)).sin().powi(2);
        assert!((pair.lambda - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::with_tol(0.5).validate().is_err());
        assert!(SolverConfig::with_tol(0.0).validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
