//! Closed-form radial solutions of the limit problem: annulus pressure
//! profiles, the front ODE `R' = (∂_r φ_R)_- / (1 - ρE)`, the stall time
//! and the contracting smooth-fit branch, and radial barriers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::SourceCoefficient;

/// Step of the front integrator.
pub const RK4_DT: f64 = 1e-3;

/// Tolerance on the barrier inequalities checked at construction.
pub const BARRIER_TOL: f64 = 1e-8;

/// Solution of `-Δφ = λ` on `inner < r < R` with `φ(inner) = f`,
/// `φ(R) = 0`, in dimension `n`:
/// `φ = -λ r²/(2n) + a·g(r) + b` with `g = r, ln r, 1/r` for `n = 1, 2, 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n: u32,
    pub inner: f64,
    pub radius: f64,
    pub lambda: f64,
    pub f: f64,
    pub a: f64,
    pub b: f64,
}

fn basis(n: u32, r: f64) -> (f64, f64, f64) {
    match n {
        1 => (r, 1.0, 0.0),
        2 => (r.ln(), 1.0 / r, -1.0 / (r * r)),
        _ => (1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r)),
    }
}

pub fn annulus_profile(radius: f64, lambda: f64, f: f64, n: u32, inner: f64) -> Result<RadialProfile> {
    if !(1..=3).contains(&n) {
        return Err(Error::Parameter(format!("dimension {n} not in 1..=3")));
    }
    if n > 1 && inner <= 0.0 {
        return Err(Error::Parameter("radial profiles need inner > 0".into()));
    }
    if !(radius - inner > 1e-12 * inner.abs().max(1.0)) {
        return Err(Error::Parameter(format!("front {radius} must lie beyond inner {inner}")));
    }
    let psi = |r: f64| -lambda * r * r / (2.0 * n as f64);
    let (gi, _, _) = basis(n, inner);
    let (gr, _, _) = basis(n, radius);
    let a = (f - psi(inner) + psi(radius)) / (gi - gr);
    let b = -psi(radius) - a * gr;
    let prof = RadialProfile { n, inner, radius, lambda, f, a, b };
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Parameter("degenerate annulus".into()));
    }
    Ok(prof)
}

impl RadialProfile {
    pub fn value(&self, r: f64) -> f64 {
        -self.lambda * r * r / (2.0 * self.n as f64) + self.a * basis(self.n, r).0 + self.b
    }

    pub fn derivative(&self, r: f64) -> f64 {
        -self.lambda * r / self.n as f64 + self.a * basis(self.n, r).1
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        -self.lambda / self.n as f64 + self.a * basis(self.n, r).2
    }

    /// `∂_r φ` at the front.
    pub fn front_slope(&self) -> f64 {
        self.derivative(self.radius)
    }

    /// `-Δφ - λ` at `r`.
    pub fn residual(&self, r: f64) -> f64 {
        let lap = self.second_derivative(r) + (self.n as f64 - 1.0) / r * self.derivative(r);
        -lap - self.lambda
    }

    /// Largest `|-Δφ - λ|` over `samples` equispaced radii, relative to
    /// `max(1, |λ|)`.
    pub fn max_residual(&self, samples: usize) -> f64 {
        let scale = self.lambda.abs().max(1.0);
        (0..samples)
            .map(|k| self.inner + (self.radius - self.inner) * (k as f64 + 0.5) / samples as f64)
            .fold(0.0f64, |a, r| a.max(self.residual(r).abs() / scale))
    }
}

/// `(∂_r φ)_- / (1 - ρE)`: only a negative slope pushes the front out.
pub fn free_boundary_speed(slope: f64, rho_e: f64) -> Result<f64> {
    if !(rho_e < 1.0) {
        return Err(Error::Parameter(format!("external density {rho_e} must stay below 1")));
    }
    Ok((-slope).max(0.0) / (1.0 - rho_e))
}

/// Radius where the profile meets 0 with zero slope, for `λ < 0`.
pub fn smooth_fit_radius(n: u32, inner: f64, f: f64, lambda: f64) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::RootFind {
            lo: inner,
            hi: f64::INFINITY,
            reason: format!("no smooth fit for λ = {lambda} ≥ 0"),
        });
    }
    let slope = |r: f64| annulus_profile(r, lambda, f, n, inner).map(|p| p.front_slope());
    let mut lo = inner + 1e-9 * inner.abs().max(1.0);
    let mut hi = inner + (2.0 * f / lambda.abs()).sqrt().max(1e-6);
    let mut grow = 0;
    while slope(hi)? < 0.0 {
        lo = hi;
        hi = inner + 2.0 * (hi - inner);
        grow += 1;
        if grow > 200 {
            return Err(Error::RootFind { lo, hi, reason: "no sign change".into() });
        }
    }
    if slope(lo)? >= 0.0 {
        return Err(Error::RootFind { lo, hi, reason: "slope non-negative at inner".into() });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Expanding,
    Contracting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSample {
    pub t: f64,
    pub radius: f64,
    pub branch: Branch,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTrajectory {
    pub samples: Vec<RadialSample>,
    pub t_star: Option<f64>,
}

impl RadialTrajectory {
    /// Front radius at `t` by linear interpolation between samples.
    pub fn radius_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        match s.iter().position(|x| x.t >= t) {
            None => s.last().map_or(f64::NAN, |x| x.radius),
            Some(0) => s[0].radius,
            Some(k) => {
                let (a, b) = (&s[k - 1], &s[k]);
                if b.t == a.t {
                    return b.radius;
                }
                let w = (t - a.t) / (b.t - a.t);
                a.radius + w * (b.radius - a.radius)
            }
        }
    }
}

/// Radial scenario: dimension, inner radius, injection pressure and a
/// spatially constant λ(t).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSetup {
    pub n: u32,
    pub inner: f64,
    pub f: f64,
    pub lambda: SourceCoefficient,
}

impl RadialSetup {
    fn lambda_at(&self, t: f64) -> f64 {
        self.lambda.scalar(t).expect("spatially constant λ")
    }

    /// Front slope of `φ_R` under the λ active at `t`.
    pub fn slope(&self, radius: f64, t: f64) -> Result<f64> {
        Ok(annulus_profile(radius, self.lambda_at(t), self.f, self.n, self.inner)?.front_slope())
    }

    fn check(&self, t_end: f64) -> Result<()> {
        if !self.lambda.is_spatially_constant() {
            return Err(Error::Parameter("radial oracle needs λ constant in space".into()));
        }
        let values: Vec<f64> = self
            .lambda
            .stages()
            .iter()
            .filter(|s| s.t_start < t_end)
            .map(|s| s.value.at(0))
            .collect();
        if values.iter().any(|&v| v > 0.0) {
            return Err(Error::Parameter("radial oracle needs λ ≤ 0".into()));
        }
        let up = values.windows(2).all(|w| w[1] >= w[0]);
        let down = values.windows(2).all(|w| w[1] <= w[0]);
        if !(up || down) {
            return Err(Error::Parameter("radial oracle needs λ monotone on [0, T]".into()));
        }
        if !(self.f > 0.0) {
            return Err(Error::Parameter("injection pressure must be positive".into()));
        }
        Ok(())
    }
}

/// Integrate the front from `r0` up to `t_end`. `rho0` is the initial
/// external density as a function of radius; `scale` multiplies the front
/// speed (1 for the true front, other values build barriers).
pub fn integrate_radial_scaled(
    setup: &RadialSetup,
    r0: f64,
    rho0: &dyn Fn(f64) -> f64,
    t_end: f64,
    dt: f64,
    scale: f64,
) -> Result<RadialTrajectory> {
    setup.check(t_end)?;
    if !(r0 > setup.inner) {
        return Err(Error::Parameter(format!("initial front {r0} must exceed inner {}", setup.inner)));
    }
    let speed = |r: f64, t: f64, lam: f64| -> Result<f64> {
        let prof = annulus_profile(r, lam, setup.f, setup.n, setup.inner)?;
        let rho_e = rho0(r) * setup.lambda.integral(0, 0.0, t).exp();
        Ok(scale * free_boundary_speed(prof.front_slope(), rho_e)?)
    };
    let mut t = 0.0;
    let mut r = r0;
    let mut branch = Branch::Expanding;
    let mut t_star = None;
    let slope0 = setup.slope(r, 0.0)?;
    if slope0 >= 0.0 {
        branch = Branch::Contracting;
        t_star = Some(0.0);
        r = r.min(smooth_fit_radius(setup.n, setup.inner, setup.f, setup.lambda_at(0.0))?);
    }
    let mut samples = vec![RadialSample { t, radius: r, branch, slope: setup.slope(r, 0.0)? }];
    while t < t_end {
        let stop = setup.lambda.next_switch(t).map_or(t_end, |s| s.min(t_end));
        let h = (stop - t).min(dt);
        let t_new = if stop - (t + h) <= 1e-12 * stop.max(1.0) { stop } else { t + h };
        let h = t_new - t;
        let lam = setup.lambda_at(t);
        if branch == Branch::Expanding {
            let rk = |r: f64, h: f64| -> Result<f64> {
                let k1 = speed(r, t, lam)?;
                let k2 = speed(r + 0.5 * h * k1, t + 0.5 * h, lam)?;
                let k3 = speed(r + 0.5 * h * k2, t + 0.5 * h, lam)?;
                let k4 = speed(r + h * k3, t + h, lam)?;
                Ok(r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
            };
            let r_new = rk(r, h)?;
            let within = annulus_profile(r_new, lam, setup.f, setup.n, setup.inner)?.front_slope();
            if within >= 0.0 {
                // stall inside the stage: bisect on the sub-step length
                let (mut a, mut b) = (0.0, h);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    let s = annulus_profile(rk(r, mid)?, lam, setup.f, setup.n, setup.inner)?.front_slope();
                    if s < 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                t_star = Some(t + b);
                branch = Branch::Contracting;
                r = smooth_fit_radius(setup.n, setup.inner, setup.f, lam)?;
            } else {
                r = r_new;
                let after = setup.slope(r, t_new)?;
                if after >= 0.0 {
                    t_star = Some(t_new);
                    branch = Branch::Contracting;
                }
            }
        }
        t = t_new;
        if branch == Branch::Contracting {
            r = r.min(smooth_fit_radius(setup.n, setup.inner, setup.f, setup.lambda_at(t))?);
        }
        samples.push(RadialSample { t, radius: r, branch, slope: setup.slope(r, t)? });
    }
    Ok(RadialTrajectory { samples, t_star })
}

/// Front trajectory with the default RK4 step.
pub fn integrate_radial(
    setup: &RadialSetup,
    r0: f64,
    rho0: &dyn Fn(f64) -> f64,
    t_end: f64,
) -> Result<RadialTrajectory> {
    integrate_radial_scaled(setup, r0, rho0, t_end, RK4_DT, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierKind {
    Sub,
    Super,
}

/// Radial barrier `φ(·,t) = φ_{R(t)}` whose front moves at `scale` times
/// the free-boundary speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub kind: BarrierKind,
    pub scale: f64,
    pub trajectory: RadialTrajectory,
    /// Largest violation of the interior and front inequalities.
    pub defect: f64,
}

pub fn make_barrier(
    kind: BarrierKind,
    setup: &RadialSetup,
    r0: f64,
    rho0: &dyn Fn(f64) -> f64,
    t_end: f64,
    scale: f64,
) -> Result<Barrier> {
    let trajectory = integrate_radial_scaled(setup, r0, rho0, t_end, RK4_DT, scale)?;
    let mut defect = 0.0f64;
    for s in &trajectory.samples {
        let lam = setup.lambda_at(s.t);
        let prof = annulus_profile(s.radius, lam, setup.f, setup.n, setup.inner)?;
        // interior: -Δφ ≤ λ (sub) or ≥ λ (super); equality holds in closed form
        defect = defect.max(prof.max_residual(50));
        let grad = s.slope.abs();
        let rho_e = rho0(s.radius) * setup.lambda.integral(0, 0.0, s.t).exp();
        let v = match s.branch {
            Branch::Expanding => scale * free_boundary_speed(s.slope, rho_e)?,
            Branch::Contracting => 0.0,
        };
        let lhs = (1.0 - rho_e) * v;
        let gap = match kind {
            BarrierKind::Sub => lhs - grad,
            BarrierKind::Super => grad - lhs,
        };
        defect = defect.max(gap);
    }
    if defect > BARRIER_TOL {
        return Err(Error::Barrier(format!(
            "{kind:?} barrier with speed scale {scale} violates its inequalities by {defect:e}"
        )));
    }
    Ok(Barrier { kind, scale, trajectory, defect })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub kind: BarrierKind,
    pub frames: usize,
    pub violations: usize,
    /// Largest amount by which the barrier front crosses the saturated
    /// front (positive means a violation beyond the allowance).
    pub worst_gap: f64,
    pub allowance: f64,
    pub holds: bool,
}

/// Compare the barrier front with measured saturated fronts `(t, front)`.
/// Sub-barriers must stay inside, super-barriers outside, within `2h`.
pub fn check_inclusion(barrier: &Barrier, fronts: &[(f64, f64)], h: f64) -> InclusionReport {
    let allowance = 2.0 * h;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for &(t, front) in fronts {
        let rb = barrier.trajectory.radius_at(t);
        let gap = match barrier.kind {
            BarrierKind::Sub => rb - front - allowance,
            BarrierKind::Super => front - rb - allowance,
        };
        worst = worst.max(gap);
        if gap > 0.0 {
            violations += 1;
        }
    }
    InclusionReport {
        kind: barrier.kind,
        frames: fronts.len(),
        violations,
        worst_gap: worst,
        allowance,
        holds: violations == 0,
    }
}
