use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diffusion coefficients of the 1D system `-c_u u'' + u - v = 0`,
/// `-c_v v'' + v - u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diffusion {
    pub c_u: f64,
    pub c_v: f64,
}

impl Default for Diffusion {
    /// `c_u = 1/2`, `c_v = κ/2` with `κ = 1/3`.
    fn default() -> Self {
        Self::from_kappa(1.0 / 3.0)
    }
}

impl Diffusion {
    pub fn from_kappa(kappa: f64) -> Self {
        Self { c_u: 0.5, c_v: 0.5 * kappa }
    }

    /// Coefficients for jump weights `a` (board 1) and `b` (board 2):
    /// `c_u = 1/(2a)`, `c_v = κ/(2b)`.
    pub fn with_jump_weights(kappa: f64, a: f64, b: f64) -> Self {
        Self { c_u: 0.5 / a, c_v: 0.5 * kappa / b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution1D {
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub diffusion: Diffusion,
    /// Max residual of the difference equations multiplied by `H^2`.
    pub residual: f64,
}

impl ReferenceSolution1D {
    /// Piecewise linear interpolation of `(u, v)` at `x` in the interval.
    pub fn interpolate(&self, x: f64) -> (f64, f64) {
        let n = self.grid.len() - 1;
        let (a, b) = (self.grid[0], self.grid[n]);
        let t = ((x - a) / (b - a) * n as f64).clamp(0.0, n as f64);
        let i = (t.floor() as usize).min(n - 1);
        let w = t - i as f64;
        ((1.0 - w) * self.u[i] + w * self.u[i + 1], (1.0 - w) * self.v[i] + w * self.v[i + 1])
    }
}

/// Reference with `κ = 1/3`. `f` and `g` are the Dirichlet values at the
/// interval ends.
pub fn solve_reference_1d(
    interval: (f64, f64),
    f: (f64, f64),
    g: (f64, f64),
    mesh_n: usize,
) -> Result<ReferenceSolution1D> {
    solve_reference_1d_with(interval, f, g, mesh_n, Diffusion::default())
}

/// Central differences on `mesh_n` cells; the 2x2 block tridiagonal system is
/// solved by block elimination.
pub fn solve_reference_1d_with(
    interval: (f64, f64),
    f: (f64, f64),
    g: (f64, f64),
    mesh_n: usize,
    diffusion: Diffusion,
) -> Result<ReferenceSolution1D> {
    let (a, b) = interval;
    if mesh_n < 100 {
        return Err(Error::InvalidParameter(format!("mesh_n = {mesh_n}, need at least 100")));
    }
    if !(a < b) {
        return Err(Error::InvalidDomain(format!("interval ({a}, {b})")));
    }
    if !(diffusion.c_u > 0.0 && diffusion.c_v > 0.0) {
        return Err(Error::InvalidParameter(format!("{diffusion:?}")));
    }
    let n = mesh_n;
    let hh = (b - a) / n as f64;
    let h2 = hh * hh;
    let (cu, cv) = (diffusion.c_u, diffusion.c_v);
    // Row i (interior node i = 1..n-1), scaled by H^2:
    //   -cu u_{i-1} + (2cu + H^2) u_i - cu u_{i+1} - H^2 v_i = 0
    //   -cv v_{i-1} + (2cv + H^2) v_i - cv v_{i+1} - H^2 u_i = 0
    let diag = Mat2([[2.0 * cu + h2, -h2], [-h2, 2.0 * cv + h2]]);
    let off = [cu, cv];
    let m = n - 1;
    let mut rhs = vec![[0.0; 2]; m];
    rhs[0][0] += cu * f.0;
    rhs[0][1] += cv * g.0;
    rhs[m - 1][0] += cu * f.1;
    rhs[m - 1][1] += cv * g.1;

    // Forward sweep: D'_i = D - L D'^{-1}_{i-1} U, with L = U = -diag(off).
    let mut dprime = Vec::with_capacity(m);
    let mut rprime = Vec::with_capacity(m);
    for i in 0..m {
        if i == 0 {
            dprime.push(diag);
            rprime.push(rhs[0]);
        } else {
            let inv = dprime[i - 1].inverse().expect("block pivot is positive definite");
            let mut d = diag;
            // L inv U with L = U = -diag(off)
            for r in 0..2 {
                for c in 0..2 {
                    d.0[r][c] -= off[r] * inv.0[r][c] * off[c];
                }
            }
            let y = inv.apply(rprime[i - 1]);
            let r = [rhs[i][0] + off[0] * y[0], rhs[i][1] + off[1] * y[1]];
            dprime.push(d);
            rprime.push(r);
        }
    }
    let mut sol = vec![[0.0; 2]; m];
    for i in (0..m).rev() {
        let mut r = rprime[i];
        if i + 1 < m {
            r[0] += off[0] * sol[i + 1][0];
            r[1] += off[1] * sol[i + 1][1];
        }
        sol[i] = dprime[i].inverse().expect("block pivot is positive definite").apply(r);
    }

    let grid: Vec<f64> = (0..=n).map(|i| if i == n { b } else { a + i as f64 * hh }).collect();
    let mut u = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    u.push(f.0);
    v.push(g.0);
    for s in &sol {
        u.push(s[0]);
        v.push(s[1]);
    }
    u.push(f.1);
    v.push(g.1);

    let mut residual: f64 = 0.0;
    for i in 1..n {
        let ru = -cu * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + h2 * (u[i] - v[i]);
        let rv = -cv * (v[i - 1] - 2.0 * v[i] + v[i + 1]) + h2 * (v[i] - u[i]);
        residual = residual.max(ru.abs()).max(rv.abs());
    }
    Ok(ReferenceSolution1D { grid, u, v, diffusion, residual })
}

#[derive(Debug, Clone, Copy)]
struct Mat2([[f64; 2]; 2]);

impl Mat2 {
    fn inverse(&self) -> Option<Mat2> {
        let [[a, b], [c, d]] = self.0;
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2([[d / det, -b / det], [-c / det, a / det]]))
    }

    fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [self.0[0][0] * x[0] + self.0[0][1] * x[1], self.0[1][0] * x[0] + self.0[1][1] * x[1]]
    }
}
