//! Checks tying the DPP to its continuum limit
//!
//! ```text
//! -1/2 Δ∞ u + u - v = 0,   -(κ/2) Δ v + v - u = 0,   κ = 1/(N+2).
//! ```

mod convergence;
mod reference;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{norm, Lattice};
use crate::error::{Error, Result};
use crate::game::{sample_ball, Running};

pub use convergence::{convergence_study, limit_diffusion, ConvergenceMode, ConvergenceRow, ConvergenceTable};
pub use reference::{solve_reference_1d, solve_reference_1d_with, Diffusion, ReferenceSolution1D};

/// Gradients shorter than this are treated as vanishing.
pub const GRADIENT_THRESHOLD: f64 = 1e-8;

/// `(1/|B_1|) ∫_{B_1} z_j^2 dz = 1 / (N + 2)`.
pub fn kappa(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    Ok(1.0 / (n as f64 + 2.0))
}

/// Monte Carlo estimate of `(1/|B_1|) ∫_{B_1} z_1^2 dz` from `samples` uniform
/// points of the unit ball; returns the mean and its standard error.
pub fn kappa_monte_carlo(n: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n == 0 || samples < 2 {
        return Err(Error::InvalidParameter(format!("kappa_monte_carlo(n = {n}, samples = {samples})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = vec![0.0; n];
    let mut acc = Running::default();
    for _ in 0..samples {
        let z = sample_ball(&mut rng, &origin, 1.0);
        acc.push(z[0] * z[0]);
    }
    Ok((acc.mean, acc.std_error()))
}

/// Mean of `((y - x)_1 / eps)^2` over the stencil of an interior node.
pub fn stencil_kappa(lattice: &Lattice, node: usize) -> Result<f64> {
    stencil_kappa_axis(lattice, node, 0)
}

pub fn stencil_kappa_axis(lattice: &Lattice, node: usize, axis: usize) -> Result<f64> {
    if axis >= lattice.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let stencil =
        lattice.stencil(node).ok_or_else(|| Error::InvalidParameter(format!("node {node} is not interior")))?;
    let x = lattice.node(node)[axis];
    let eps = lattice.epsilon();
    let sum: f64 = stencil.iter().map(|&j| ((lattice.node(j as usize)[axis] - x) / eps).powi(2)).sum();
    Ok(sum / stencil.len() as f64)
}

/// Smooth test functions with closed-form derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TestFunction {
    /// `b . x + c`
    Affine { b: Vec<f64>, c: f64 },
    /// `1/2 x^T Q x + b . x + c` with `Q` symmetric, row-major.
    Quadratic { q: Vec<f64>, b: Vec<f64>, c: f64 },
    /// `|x|^p`
    NormPower { p: f64 },
    /// `x_1 x_2 ... x_N`
    CoordinateProduct,
}

impl TestFunction {
    /// `1/2 |x|^2` in dimension `n`.
    pub fn half_norm_squared(n: usize) -> Self {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        TestFunction::Quadratic { q, b: vec![0.0; n], c: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Affine { b, c } => dot(b, x) + c,
            TestFunction::Quadratic { q, b, c } => {
                let n = x.len();
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += x[i] * q[i * n + j] * x[j];
                    }
                }
                0.5 * s + dot(b, x) + c
            }
            TestFunction::NormPower { p } => norm(x).powf(*p),
            TestFunction::CoordinateProduct => x.iter().product(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        match self {
            TestFunction::Affine { b, .. } => b.clone(),
            TestFunction::Quadratic { q, b, .. } => {
                (0..n).map(|i| b[i] + (0..n).map(|j| q[i * n + j] * x[j]).sum::<f64>()).collect()
            }
            TestFunction::NormPower { p } => {
                let r = norm(x);
                if r == 0.0 {
                    return vec![0.0; n];
                }
                let s = p * r.powf(p - 2.0);
                x.iter().map(|xi| s * xi).collect()
            }
            TestFunction::CoordinateProduct => {
                (0..n).map(|i| (0..n).filter(|&k| k != i).map(|k| x[k]).product()).collect()
            }
        }
    }

    /// Row-major `N x N` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        match self {
            TestFunction::Affine { .. } => vec![0.0; n * n],
            TestFunction::Quadratic { q, .. } => q.clone(),
            TestFunction::NormPower { p } => {
                let r = norm(x);
                let mut h = vec![0.0; n * n];
                if r == 0.0 {
                    return h;
                }
                let s = p * r.powf(p - 2.0);
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i * n + j] = s * (delta + (p - 2.0) * x[i] * x[j] / (r * r));
                    }
                }
                h
            }
            TestFunction::CoordinateProduct => {
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            h[i * n + j] = (0..n).filter(|&k| k != i && k != j).map(|k| x[k]).product();
                        }
                    }
                }
                h
            }
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let h = self.hessian(x);
        (0..n).map(|i| h[i * n + i]).sum()
    }

    /// `<D^2 φ ∇φ, ∇φ> / |∇φ|^2`, or `None` where the gradient vanishes.
    pub fn infinity_laplacian(&self, x: &[f64]) -> Option<f64> {
        let g = self.gradient(x);
        let gn = norm(&g);
        if gn < GRADIENT_THRESHOLD {
            return None;
        }
        let n = x.len();
        let h = self.hessian(x);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g[i] * h[i * n + j] * g[j];
            }
        }
        Some(s / (gn * gn))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Defects of the rearranged DPP against the limit operators at `x`:
///
/// ```text
/// r1 = |(ψ - φ)(x) + (1 - eps^2)(1/2 max φ + 1/2 min φ - φ(x)) / eps^2 - (1/2 Δ∞φ - φ + ψ)(x)|
/// r2 = |(φ - ψ)(x) + (1 - eps^2)(mean ψ - ψ(x)) / eps^2 - ((κ_s/2) Δψ - ψ + φ)(x)|
/// ```
///
/// with max, min and mean over the lattice stencil shape centered at `x` and
/// `κ_s` the second moment of that stencil.
pub fn consistency_residual(
    phi: &TestFunction,
    psi: &TestFunction,
    x: &[f64],
    epsilon: f64,
    lattice: &Lattice,
) -> Result<(f64, f64)> {
    if x.len() != lattice.dim() {
        return Err(Error::DimensionMismatch { expected: lattice.dim(), got: x.len() });
    }
    if (epsilon - lattice.epsilon()).abs() > 1e-12 * epsilon {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} differs from the lattice epsilon {}",
            lattice.epsilon()
        )));
    }
    let g = norm(&phi.gradient(x));
    let inf_lap = phi.infinity_laplacian(x).ok_or(Error::DegenerateGradient(g))?;
    let h = lattice.h();
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut sum = 0.0;
    let mut second = 0.0;
    let mut y = vec![0.0; x.len()];
    let offsets = lattice.stencil_offsets();
    for off in offsets {
        for k in 0..x.len() {
            y[k] = x[k] + off[k] as f64 * h;
        }
        let p = phi.eval(&y);
        hi = hi.max(p);
        lo = lo.min(p);
        sum += psi.eval(&y);
        second += (off[0] as f64 * h / epsilon).powi(2);
    }
    let count = offsets.len() as f64;
    let kappa_s = second / count;
    let eps2 = epsilon * epsilon;
    let (p0, s0) = (phi.eval(x), psi.eval(x));
    let d1 = (s0 - p0) + (1.0 - eps2) * (0.5 * hi + 0.5 * lo - p0) / eps2;
    let l1 = 0.5 * inf_lap - p0 + s0;
    let d2 = (p0 - s0) + (1.0 - eps2) * (sum / count - s0) / eps2;
    let l2 = 0.5 * kappa_s * psi.laplacian(x) - s0 + p0;
    Ok(((d1 - l1).abs(), (d2 - l2).abs()))
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric row-major matrix.
pub fn extreme_eigenvalues(hessian: &[f64], n: usize) -> Result<(f64, f64)> {
    if hessian.len() != n * n || n == 0 {
        return Err(Error::ShapeMismatch { expected: n * n, got: hessian.len() });
    }
    let m = DMatrix::from_row_slice(n, n, hessian);
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Lower and upper envelopes `(F_*, F^*)` of the board-1 operator
/// `F(p, Y, u, v) = -1/2 <Y p/|p|, p/|p|> + u - v`. They coincide away from
/// `p = 0`; at `p = 0` they use `λ_max(Y)` and `λ_min(Y)`.
pub fn board_one_envelopes(gradient: &[f64], hessian: &[f64], u: f64, v: f64) -> Result<(f64, f64)> {
    let n = gradient.len();
    if hessian.len() != n * n {
        return Err(Error::ShapeMismatch { expected: n * n, got: hessian.len() });
    }
    let g = norm(gradient);
    if g >= GRADIENT_THRESHOLD {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gradient[i] * hessian[i * n + j] * gradient[j];
            }
        }
        let f = -0.5 * s / (g * g) + u - v;
        return Ok((f, f));
    }
    let (lmin, lmax) = extreme_eigenvalues(hessian, n)?;
    Ok((-0.5 * lmax + u - v, -0.5 * lmin + u - v))
}

/// Board-2 operator `-(κ/2) tr Y + v - u`.
pub fn board_two_operator(kappa: f64, hessian: &[f64], n: usize, u: f64, v: f64) -> Result<f64> {
    if hessian.len() != n * n {
        return Err(Error::ShapeMismatch { expected: n * n, got: hessian.len() });
    }
    let tr: f64 = (0..n).map(|i| hessian[i * n + i]).sum();
    Ok(-0.5 * kappa * tr + v - u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, PayoffData};

    fn fd_check(f: &TestFunction, x: &[f64]) {
        let n = x.len();
        let s = 1e-4;
        let g = f.gradient(x);
        let h = f.hessian(x);
        for i in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += s;
            xm[i] -= s;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * s);
            assert!((fd - g[i]).abs() < 1e-6, "{f:?} grad {i}");
            let gp = f.gradient(&xp);
            let gm = f.gradient(&xm);
            for j in 0..n {
                let fd = (gp[j] - gm[j]) / (2.0 * s);
                assert!((fd - h[j * n + i]).abs() < 1e-6, "{f:?} hess {i}{j}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = [0.3, -0.4, 0.7];
        fd_check(&TestFunction::Affine { b: vec![1.0, 2.0, -3.0], c: 0.5 }, &x);
        fd_check(
            &TestFunction::Quadratic {
                q: vec![2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 3.0],
                b: vec![0.1, 0.0, -1.0],
                c: 2.0,
            },
            &x,
        );
        fd_check(&TestFunction::NormPower { p: 3.0 }, &x);
        fd_check(&TestFunction::NormPower { p: 1.5 }, &x);
        fd_check(&TestFunction::CoordinateProduct, &x);
    }

    #[test]
    fn kappa_closed_form() {
        assert_eq!(kappa(1).unwrap(), 1.0 / 3.0);
        assert_eq!(kappa(2).unwrap(), 0.25);
        assert!(kappa(0).is_err());
    }

    #[test]
    fn kappa_monte_carlo_near_closed_form() {
        for n in 1..=3 {
            let (m, se) = kappa_monte_carlo(n, 200_000, 7).unwrap();
            assert!((m - kappa(n).unwrap()).abs() < 4.0 * se);
        }
        assert_eq!(kappa_monte_carlo(2, 1000, 1).unwrap(), kappa_monte_carlo(2, 1000, 1).unwrap());
    }

    #[test]
    fn stencil_kappa_1d_by_hand() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let lat = Lattice::build(&d, &PayoffData::constant(0.0), 0.025, 0.1).unwrap();
        let n = lat.node_at_point(&[0.5]).unwrap();
        // offsets -4..=4 in units of eps/4
        let hand: f64 = (-4..=4).map(|k: i32| (k as f64 / 4.0).powi(2)).sum::<f64>() / 9.0;
        assert!((stencil_kappa(&lat, n).unwrap() - hand).abs() < 1e-15);
        assert!(stencil_kappa(&lat, 0).is_err());
    }

    #[test]
    fn half_norm_squared_probe() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = PayoffData::constant(0.0);
        let phi = TestFunction::half_norm_squared(2);
        for eps in [0.2, 0.1] {
            let lat = Lattice::build(&d, &p, eps / 8.0, eps).unwrap();
            let (r1, _) = consistency_residual(&phi, &phi, &[0.5, 0.0], eps, &lat).unwrap();
            assert!((r1 - eps * eps / 2.0).abs() < 1e-12);
        }
        let lat = Lattice::build(&d, &p, 0.025, 0.2).unwrap();
        assert!(matches!(consistency_residual(&phi, &phi, &[0.0, 0.0], 0.2, &lat), Err(Error::DegenerateGradient(_))));
        assert!(consistency_residual(&phi, &phi, &[0.5, 0.0], 0.1, &lat).is_err());
    }

    #[test]
    fn envelopes_use_extreme_eigenvalues() {
        let y = [1.0, 0.0, 0.0, -3.0];
        let (lo, hi) = board_one_envelopes(&[0.0, 0.0], &y, 0.5, 0.25).unwrap();
        assert!((lo - (-0.5 + 0.25)).abs() < 1e-12);
        assert!((hi - (1.5 + 0.25)).abs() < 1e-12);
        let (a, b) = board_one_envelopes(&[0.0, 2.0], &y, 0.5, 0.25).unwrap();
        assert_eq!(a, b);
        assert!((a - (1.5 + 0.25)).abs() < 1e-12);
        let (lmin, lmax) = extreme_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((lmin - 1.0).abs() < 1e-12 && (lmax - 3.0).abs() < 1e-12);
        assert!((board_two_operator(0.25, &y, 2, 1.0, 0.0).unwrap() - (0.25 - 1.0)).abs() < 1e-12);
    }
}
