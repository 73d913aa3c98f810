//! Uniform node-centered meshes on `[inner, outer]` and the three-point
//! Laplacian, in cartesian or radially symmetric form.
//!
//! Fields are plain `Vec<f64>` / `&[f64]` with one value per node. The
//! boundary nodes carry Dirichlet data; operators return 0 there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Cartesian,
    Radial,
}

/// Computational interval. For `Radial`, `n` is the space dimension and
/// the coordinate is the distance to the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub kind: Kind,
    #[serde(default = "default_dim")]
    pub n: u32,
    pub inner: f64,
    pub outer: f64,
}

fn default_dim() -> u32 {
    1
}

impl Geometry {
    pub fn cartesian(inner: f64, outer: f64) -> Self {
        Geometry { kind: Kind::Cartesian, n: 1, inner, outer }
    }

    pub fn radial(n: u32, inner: f64, outer: f64) -> Self {
        Geometry { kind: Kind::Radial, n, inner, outer }
    }

    /// Effective dimension entering the `(n-1)/r` drift term.
    pub fn dim(&self) -> u32 {
        match self.kind {
            Kind::Cartesian => 1,
            Kind::Radial => self.n,
        }
    }
}

/// JSON header written next to every set of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub kind: Kind,
    pub n: u32,
    pub inner: f64,
    pub outer: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub geometry: Geometry,
    pub n_cells: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    mid: f64,
    weights: Vec<f64>,
}

/// Dirichlet values used for the ghost-free stencil at the two ends.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dirichlet {
    pub inner: f64,
    pub outer: f64,
}

impl Dirichlet {
    pub const ZERO: Dirichlet = Dirichlet { inner: 0.0, outer: 0.0 };
}

pub fn build_grid(geometry: Geometry, n_cells: usize) -> Result<Grid> {
    if n_cells < 4 {
        return Err(Error::Grid(format!("need at least 4 cells, got {n_cells}")));
    }
    if !(geometry.inner.is_finite() && geometry.outer.is_finite()) {
        return Err(Error::Grid("non-finite endpoints".into()));
    }
    if geometry.inner >= geometry.outer {
        return Err(Error::Grid(format!(
            "inner {} must be below outer {}",
            geometry.inner, geometry.outer
        )));
    }
    if geometry.kind == Kind::Radial {
        if !(1..=3).contains(&geometry.n) {
            return Err(Error::Grid(format!("radial dimension {} not in 1..=3", geometry.n)));
        }
        if geometry.inner <= 0.0 {
            return Err(Error::Grid("radial grids need inner > 0".into()));
        }
    }
    let h = (geometry.outer - geometry.inner) / n_cells as f64;
    let mut nodes: Vec<f64> = (0..=n_cells).map(|i| geometry.inner + i as f64 * h).collect();
    nodes[n_cells] = geometry.outer;

    let drift = (geometry.dim() - 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let mut lo = Vec::with_capacity(n_cells + 1);
    let mut hi = Vec::with_capacity(n_cells + 1);
    let mut weights = Vec::with_capacity(n_cells + 1);
    for &r in &nodes {
        let c = if drift > 0.0 { drift / (2.0 * r * h) } else { 0.0 };
        lo.push(inv_h2 - c);
        hi.push(inv_h2 + c);
        weights.push(if drift > 0.0 { r.powi(drift as i32) } else { 1.0 });
    }
    if lo.iter().any(|&w| w <= 0.0) {
        return Err(Error::Grid("spacing too coarse for the radial drift term".into()));
    }
    Ok(Grid { geometry, n_cells, h, nodes, lo, hi, mid: 2.0 * inv_h2, weights })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> usize {
        self.n_cells
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            kind: self.geometry.kind,
            n: self.geometry.dim(),
            inner: self.geometry.inner,
            outer: self.geometry.outer,
            n_cells: self.n_cells,
        }
    }

    /// Stencil coefficients `(lo, mid, hi)` at node `i`:
    /// `(Δ_h u)_i = lo·u_{i-1} - mid·u_i + hi·u_{i+1}`.
    #[inline]
    pub fn stencil(&self, i: usize) -> (f64, f64, f64) {
        (self.lo[i], self.mid, self.hi[i])
    }

    /// Measure weight of node `i`: `r^{n-1}` for radial grids, 1 otherwise.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `Δ_h u` at an interior node.
    #[inline]
    pub fn laplacian_at(&self, u: &[f64], i: usize) -> f64 {
        self.lo[i] * u[i - 1] - self.mid * u[i] + self.hi[i] * u[i + 1]
    }

    /// Discrete Laplacian with the boundary entries of `u` replaced by
    /// `bc`. Output is 0 at the two boundary nodes.
    pub fn laplacian(&self, u: &[f64], bc: Dirichlet) -> Vec<f64> {
        assert_eq!(u.len(), self.len(), "field length does not match grid");
        let last = self.last();
        let mut out = vec![0.0; u.len()];
        for i in 1..last {
            let left = if i == 1 { bc.inner } else { u[i - 1] };
            let right = if i + 1 == last { bc.outer } else { u[i + 1] };
            out[i] = self.lo[i] * left - self.mid * u[i] + self.hi[i] * right;
        }
        out
    }

    /// Weighted sum `Σ w_i u_i h` over interior nodes.
    pub fn integrate_interior(&self, u: &[f64]) -> f64 {
        (1..self.last()).map(|i| self.weights[i] * u[i]).sum::<f64>() * self.h
    }

    /// Weighted sum `Σ w_i |u_i| h` over all nodes.
    pub fn l1(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weights).map(|(v, w)| w * v.abs()).sum::<f64>() * self.h
    }

    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.geometry.inner) / self.h).round();
        k.clamp(0.0, self.n_cells as f64) as usize
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Thomas algorithm for `sub_i x_{i-1} + diag_i x_i + sup_i x_{i+1} = rhs_i`.
/// `sub[0]` and `sup[n-1]` are ignored; the solution overwrites `rhs`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    if sub.len() != n || diag.len() != n || sup.len() != n {
        return Err(Error::Parameter("tridiagonal bands differ in length".into()));
    }
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Parameter("singular tridiagonal system".into()));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i - 1];
        if beta == 0.0 {
            return Err(Error::Parameter("singular tridiagonal system".into()));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

impl Grid {
    /// Solve `-Δ_h φ = source` on nodes `1..end` with `φ_0 = inner` and
    /// `φ_end = 0`; nodes past `end` are 0.
    pub fn dirichlet_solve(&self, source: f64, inner: f64, end: usize) -> Result<Vec<f64>> {
        if end < 2 || end > self.last() {
            return Err(Error::Parameter(format!("Dirichlet end node {end} out of range")));
        }
        let k = end - 1;
        let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![source; k]);
        for j in 0..k {
            let (lo, mid, hi) = self.stencil(j + 1);
            sub[j] = -lo;
            diag[j] = mid;
            sup[j] = -hi;
        }
        rhs[0] += self.lo[1] * inner;
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs)?;
        let mut phi = vec![0.0; self.len()];
        phi[0] = inner;
        phi[1..end].copy_from_slice(&rhs);
        Ok(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_partition() {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), 4).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = build_grid(Geometry::radial(2, 1.0, 3.0), 8).unwrap();
        assert_eq!(g.h, 0.25);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(build_grid(Geometry::cartesian(2.0, 1.0), 10).is_err());
        assert!(build_grid(Geometry::cartesian(0.0, 1.0), 3).is_err());
        assert!(build_grid(Geometry::radial(4, 1.0, 2.0), 10).is_err());
    }

    #[test]
    fn quadratic_exact_on_cartesian() {
        let g = build_grid(Geometry::cartesian(-1.0, 2.0), 30).unwrap();
        let u = g.sample(|x| x * x);
        let bc = Dirichlet { inner: u[0], outer: u[g.last()] };
        let lap = g.laplacian(&u, bc);
        for v in &lap[1..g.last()] {
            assert_abs_diff_eq!(*v, 2.0, epsilon = 1e-9);
        }
        assert_eq!(lap[0], 0.0);
        assert_eq!(lap[g.last()], 0.0);
    }

    #[test]
    fn radial_model_functions() {
        for &cells in &[40usize, 80] {
            let g = build_grid(Geometry::radial(3, 1.0, 3.0), cells).unwrap();
            let u = g.sample(|r| r * r);
            let lap = g.laplacian(&u, Dirichlet { inner: u[0], outer: u[cells] });
            for v in &lap[1..cells] {
                assert_abs_diff_eq!(*v, 6.0, epsilon = 1e-8);
            }
        }
        let mut errs = Vec::new();
        for &cells in &[40usize, 80] {
            let g = build_grid(Geometry::radial(2, 1.0, 3.0), cells).unwrap();
            let u = g.sample(f64::ln);
            let lap = g.laplacian(&u, Dirichlet { inner: u[0], outer: u[cells] });
            errs.push(lap[1..cells].iter().fold(0.0f64, |a, v| a.max(v.abs())));
        }
        assert!(errs[0] < 1e-2);
        // second order: halving h cuts the error by about 4
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn header_round_trip() {
        let g = build_grid(Geometry::radial(2, 1.0, 3.0), 8).unwrap();
        let s = serde_json::to_string(&g.header()).unwrap();
        assert_eq!(s, r#"{"kind":"radial","n":2,"inner":1.0,"outer":3.0,"n_cells":8}"#);
        let back: GridHeader = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g.header());
    }

    #[test]
    fn dirichlet_solve_matches_quadratic() {
        let g = build_grid(Geometry::cartesian(0.0, 2.0), 40).unwrap();
        let end = g.nearest(1.0);
        let phi = g.dirichlet_solve(2.0, 1.0, end).unwrap();
        for i in 0..=end {
            let x = g.nodes[i];
            assert_abs_diff_eq!(phi[i], 1.0 - x * x, epsilon = 1e-12);
        }
        assert!(phi[end + 1..].iter().all(|&v| v == 0.0));
    }
}
