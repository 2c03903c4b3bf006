//! Field-line realization of the invariant: analytic divergence-free fields
//! in solid tori, adaptive tracing with closure detection, Cesàro estimates
//! of asymptotic pairwise linking, and the triple-sampling estimator of M.
//!
//! Fields are axisymmetric about each tube's own axis, in flux-function
//! form: B = s·∇ψ×∇φ + g(r)·ê_φ with ψ = ½((r−R₀)² + z²). Both parts are
//! divergence-free identically (not merely to solver tolerance), the flux
//! surfaces are exact circles ρ = const in the (r, z) half-plane, and the
//! rotation number on a surface has the closed form
//! ι(ρ) = (κ/s)/√(R₀²−ρ²) for the κ/r transit profile, which the tests use
//! as the closure oracle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::curves::{fit_curve, Curve3, Link3};
use crate::error::{Error, Result};
use crate::geom::{triple, Vec3};
use crate::quadrature::rng::CounterRng;
use crate::quadrature::Estimate;
use crate::terms::assemble_m;
use crate::Config;

/// Toroidal transit profile of a tube field.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transit {
    /// B_φ = c: constant toroidal speed, every line a circle.
    Uniform(f64),
    /// B_φ = κ/r: the flux-form profile with analytic rotation number.
    FluxForm(f64),
}

/// One solid-torus tube with an analytic divergence-free field.
#[derive(Clone, Debug)]
pub struct Tube {
    pub center: Vec3,
    /// Unit normal of the tube's plane (the torus axis).
    pub axis: Vec3,
    pub major_radius: f64,
    pub minor_radius: f64,
    pub transit: Transit,
    /// Strength of the poloidal flux-function part; 0 gives pure transit.
    pub poloidal_strength: f64,
    /// Field scale factor applied so the toroidal flux equals `flux`.
    pub flux: f64,
    u: Vec3,
    v: Vec3,
}

impl Tube {
    pub fn new(
        center: Vec3,
        axis: Vec3,
        major_radius: f64,
        minor_radius: f64,
        transit: Transit,
        poloidal_strength: f64,
        flux: f64,
    ) -> Result<Self> {
        if minor_radius <= 0.0 || major_radius <= minor_radius {
            return Err(Error::Field(format!(
                "need 0 < minor {minor_radius} < major {major_radius}"
            )));
        }
        let axis = axis.normalized();
        let u = axis.any_orthonormal();
        let v = axis.cross(u);
        Ok(Tube { center, axis, major_radius, minor_radius, transit, poloidal_strength, flux, u, v })
    }

    /// Build from a circular center curve (a pure degree-1 Fourier circle).
    pub fn from_center_curve(
        curve: &Curve3,
        minor_radius: f64,
        transit: Transit,
        poloidal_strength: f64,
        flux: f64,
    ) -> Result<Self> {
        if curve.order() != 1 {
            return Err(Error::Field(
                "field construction requires a circular center line (one Fourier mode)".into(),
            ));
        }
        let c1 = curve.cos_coeffs()[0];
        let s1 = curve.sin_coeffs()[0];
        if (c1.norm() - s1.norm()).abs() > 1e-12 * c1.norm() || c1.dot(s1).abs() > 1e-12 {
            return Err(Error::Field("center line is an ellipse, not a circle".into()));
        }
        let axis = c1.cross(s1).normalized();
        Tube::new(curve.constant(), axis, c1.norm(), minor_radius, transit, poloidal_strength, flux)
    }

    /// The center circle as a Curve3, oriented along increasing toroidal angle.
    pub fn center_curve(&self) -> Curve3 {
        Curve3::circle(self.center, self.major_radius, self.u, self.v)
    }

    /// Local coordinates (r, z, θ): cylinder radius, height, toroidal angle.
    #[inline]
    fn local(&self, x: Vec3) -> (f64, f64, f64) {
        let d = x - self.center;
        let z = d.dot(self.axis);
        let pu = d.dot(self.u);
        let pv = d.dot(self.v);
        let r = pu.hypot(pv);
        (r, z, pv.atan2(pu))
    }

    /// Squared distance from the flux-surface center: ρ² = (r−R₀)² + z².
    pub fn rho2(&self, x: Vec3) -> f64 {
        let (r, z, _) = self.local(x);
        (r - self.major_radius).powi(2) + z * z
    }

    pub fn contains(&self, x: Vec3) -> bool {
        self.rho2(x) <= self.minor_radius * self.minor_radius
    }

    /// Toroidal angle of x about the tube axis.
    pub fn theta(&self, x: Vec3) -> f64 {
        self.local(x).2
    }

    /// Unscaled field in local cylindrical components (B_r, B_φ, B_z).
    #[inline]
    fn field_local(&self, r: f64, z: f64) -> (f64, f64, f64) {
        let s = self.poloidal_strength;
        let b_r = -s * z / r;
        let b_z = s * (r - self.major_radius) / r;
        let b_phi = match self.transit {
            Transit::Uniform(c) => c,
            Transit::FluxForm(kappa) => kappa / r,
        };
        (b_r, b_phi, b_z)
    }

    /// Field at a point (zero outside the tube). Divergence-free by
    /// construction; `scale` fixes the toroidal flux.
    pub fn field(&self, x: Vec3) -> Vec3 {
        if !self.contains(x) {
            return Vec3::ZERO;
        }
        let d = x - self.center;
        let z = d.dot(self.axis);
        let pu = d.dot(self.u);
        let pv = d.dot(self.v);
        let r = pu.hypot(pv);
        let e_r = (self.u * pu + self.v * pv) / r;
        let e_phi = self.axis.cross(e_r);
        let (br, bphi, bz) = self.field_local(r, z);
        (e_r * br + e_phi * bphi + self.axis * bz) * self.scale()
    }

    /// Toroidal flux of the unscaled field through the cross-section disk.
    pub fn natural_flux(&self) -> f64 {
        let rho = self.minor_radius;
        match self.transit {
            Transit::Uniform(c) => c * std::f64::consts::PI * rho * rho,
            Transit::FluxForm(kappa) => {
                // ∫∫ (κ/r) dA over (r−R₀)²+z² ≤ ρ²  =  2πκ (R₀ − √(R₀²−ρ²))
                let r0 = self.major_radius;
                TAU * kappa * (r0 - (r0 * r0 - rho * rho).sqrt())
            }
        }
    }

    fn scale(&self) -> f64 {
        self.flux / self.natural_flux()
    }

    /// Analytic rotation number ι(ρ) = Δφ/2π per poloidal turn for the
    /// flux-form transit; None for pure transit or zero poloidal part.
    pub fn rotation_number(&self, rho: f64) -> Option<f64> {
        match self.transit {
            Transit::FluxForm(kappa) if self.poloidal_strength != 0.0 => {
                let r0 = self.major_radius;
                Some(kappa / (self.poloidal_strength * (r0 * r0 - rho * rho).sqrt()))
            }
            _ => None,
        }
    }

    /// Deterministic flux-uniform sample on the θ = θ₀ cross-section disk:
    /// density proportional to the toroidal field component.
    pub fn sample_section(&self, rng: CounterRng, theta0: f64) -> Vec3 {
        let rho_max = self.minor_radius;
        // Rejection bound for B_φ over the disk; 1/r peaks at the inner edge.
        let bound = match self.transit {
            Transit::Uniform(_) => 1.0,
            Transit::FluxForm(_) => self.major_radius / (self.major_radius - rho_max),
        };
        let e_r = self.u * theta0.cos() + self.v * theta0.sin();
        for k in 0..10_000u64 {
            let a = rng.uniform(3 * k);
            let b = rng.uniform(3 * k + 1);
            let rho = rho_max * a.sqrt();
            let chi = TAU * b;
            let r = self.major_radius + rho * chi.cos();
            let z = rho * chi.sin();
            let w = match self.transit {
                Transit::Uniform(_) => 1.0,
                Transit::FluxForm(_) => (self.major_radius / r) / bound,
            };
            if rng.uniform(3 * k + 2) <= w {
                return self.center + e_r * r + self.axis * z;
            }
        }
        // rejection acceptance is bounded well away from zero
        self.center + e_r * self.major_radius
    }
}

/// A system of 1–3 disjoint tubes.
#[derive(Clone, Debug)]
pub struct FieldSystem {
    pub tubes: Vec<Tube>,
}

impl FieldSystem {
    pub fn new(tubes: Vec<Tube>) -> Result<Self> {
        if tubes.is_empty() || tubes.len() > 3 {
            return Err(Error::Field(format!("need 1–3 tubes, got {}", tubes.len())));
        }
        Ok(FieldSystem { tubes })
    }

    pub fn tube_containing(&self, x: Vec3) -> Option<usize> {
        self.tubes.iter().position(|t| t.contains(x))
    }

    pub fn field(&self, x: Vec3) -> Vec3 {
        let mut b = Vec3::ZERO;
        for t in &self.tubes {
            b += t.field(x);
        }
        b
    }

    /// Numerical divergence at a point by central differences; the analytic
    /// construction makes this vanish to rounding.
    pub fn divergence(&self, x: Vec3, h: f64) -> f64 {
        let dx = Vec3::new(h, 0.0, 0.0);
        let dy = Vec3::new(0.0, h, 0.0);
        let dz = Vec3::new(0.0, 0.0, h);
        ((self.field(x + dx).x - self.field(x - dx).x)
            + (self.field(x + dy).y - self.field(x - dy).y)
            + (self.field(x + dz).z - self.field(x - dz).z))
            / (2.0 * h)
    }
}

/// One traced field line.
#[derive(Clone, Debug)]
pub struct TraceResult {
    /// Uniform-time resample of the trajectory: (time, position).
    pub points: Vec<(f64, Vec3)>,
    pub closed: bool,
    /// First-return period when closed.
    pub period: Option<f64>,
    /// Completed toroidal transits at closure.
    pub transits: u32,
    /// |g^{t₀}(x₀) − x₀| at the detected closure.
    pub closure_error: f64,
}

const MAX_TRANSITS: u32 = 256;

/// Trace the field line from x0 with adaptive RK45 (Dormand–Prince).
///
/// Closure is detected on the Poincaré section through x0's toroidal angle:
/// at each full-turn section crossing the interpolated crossing point is
/// compared against x0 with tolerance `closure_tol` (absolute). Tracing runs
/// until closure, time `t_max`, or the transit cap.
pub fn trace(field: &FieldSystem, x0: Vec3, t_max: f64, tol: f64) -> Result<TraceResult> {
    let tube_idx = field
        .tube_containing(x0)
        .ok_or_else(|| Error::Trace("start point is outside every tube".into()))?;
    let tube = &field.tubes[tube_idx];
    let closure_tol = 1e-7 * 2.0 * (tube.major_radius + tube.minor_radius);

    let f = |x: Vec3| field.field(x);
    let mut steps: Vec<(f64, Vec3, Vec3)> = Vec::with_capacity(4096);
    let mut t = 0.0;
    let mut x = x0;
    let mut k1 = f(x);
    if k1.norm() == 0.0 {
        return Err(Error::Trace("field vanishes at the start point".into()));
    }
    steps.push((t, x, k1));

    let theta0 = tube.theta(x0);
    let mut theta_prev = 0.0_f64; // unwrapped angle relative to θ₀
    let mut transits = 0u32;
    let mut closed = false;
    let mut period = None;
    let mut closure_error = f64::INFINITY;

    let mut h = 1e-3 * tube.major_radius / k1.norm().max(1e-12);
    let h_max = 0.05 * tube.major_radius / k1.norm().max(1e-12);

    while t < t_max && transits < MAX_TRANSITS && !closed {
        h = h.min(t_max - t).min(h_max);
        let (x_new, err, k1_new) = dopri_step(&f, x, k1, h);
        let scale = tol * (1.0 + x.norm());
        if err > scale && h > 1e-12 {
            h *= (0.9 * (scale / err).powf(0.2)).clamp(0.2, 1.0);
            continue;
        }
        let t_new = t + h;
        // drift check
        let rho2 = tube.rho2(x_new);
        let lim = tube.minor_radius * tube.minor_radius;
        if rho2 > lim * (1.0 + 1e-6) {
            return Err(Error::Trace(format!(
                "trajectory exited the tube (drift {:.3e})",
                rho2.sqrt() - tube.minor_radius
            )));
        }

        // toroidal angle bookkeeping (unwrapped, relative to θ₀)
        let dtheta = wrap_angle(tube.theta(x_new) - theta0 - wrap_angle(theta_prev));
        let theta_new = theta_prev + dtheta;
        if theta_prev.div_euclid(TAU) != theta_new.div_euclid(TAU) && theta_new > theta_prev {
            // crossed the section going forward: refine the crossing
            let target = theta_new.div_euclid(TAU) * TAU;
            let tc = refine_crossing(tube, theta0, target, (t, x, k1), (t_new, x_new, k1_new), theta_prev);
            let xc = hermite((t, x, k1), (t_new, x_new, k1_new), tc);
            transits += 1;
            let miss = xc.dist(x0);
            closure_error = closure_error.min(miss);
            if miss < closure_tol {
                closed = true;
                period = Some(tc);
            }
        }
        theta_prev = theta_new;
        t = t_new;
        x = x_new;
        k1 = k1_new;
        steps.push((t, x, k1));
        h *= if err > 0.0 { (0.9 * (scale / err).powf(0.2)).clamp(0.2, 5.0) } else { 2.0 };
    }

    // uniform dense resample (for linking sums and curve fits)
    let t_end = period.unwrap_or(t);
    let n_dense = 4096;
    let mut points = Vec::with_capacity(n_dense);
    let mut seg = 0usize;
    for k in 0..n_dense {
        let tk = t_end * k as f64 / n_dense as f64;
        while seg + 1 < steps.len() - 1 && steps[seg + 1].0 < tk {
            seg += 1;
        }
        let a = steps[seg];
        let b = steps[seg + 1];
        points.push((tk, hermite(a, b, tk)));
    }
    Ok(TraceResult { points, closed, period, transits, closure_error })
}

/// One Dormand–Prince 5(4) step; returns (x_new, error_estimate, k_last)
/// with the FSAL derivative reused as the next step's k1.
fn dopri_step<F: Fn(Vec3) -> Vec3>(f: &F, x: Vec3, k1: Vec3, h: f64) -> (Vec3, f64, Vec3) {
    let k2 = f(x + k1 * (h * 1.0 / 5.0));
    let k3 = f(x + k1 * (h * 3.0 / 40.0) + k2 * (h * 9.0 / 40.0));
    let k4 = f(x + k1 * (h * 44.0 / 45.0) - k2 * (h * 56.0 / 15.0) + k3 * (h * 32.0 / 9.0));
    let k5 = f(x
        + k1 * (h * 19372.0 / 6561.0)
        - k2 * (h * 25360.0 / 2187.0)
        + k3 * (h * 64448.0 / 6561.0)
        - k4 * (h * 212.0 / 729.0));
    let k6 = f(x
        + k1 * (h * 9017.0 / 3168.0)
        - k2 * (h * 355.0 / 33.0)
        + k3 * (h * 46732.0 / 5247.0)
        + k4 * (h * 49.0 / 176.0)
        - k5 * (h * 5103.0 / 18656.0));
    let x5 = x
        + k1 * (h * 35.0 / 384.0)
        + k3 * (h * 500.0 / 1113.0)
        + k4 * (h * 125.0 / 192.0)
        - k5 * (h * 2187.0 / 6784.0)
        + k6 * (h * 11.0 / 84.0);
    let k7 = f(x5);
    let x4 = x
        + k1 * (h * 5179.0 / 57600.0)
        + k3 * (h * 7571.0 / 16695.0)
        + k4 * (h * 393.0 / 640.0)
        - k5 * (h * 92097.0 / 339200.0)
        + k6 * (h * 187.0 / 2100.0)
        + k7 * (h * 1.0 / 40.0);
    ((x5), (x5 - x4).norm(), k7)
}

/// Cubic Hermite interpolation between two accepted steps.
fn hermite(a: (f64, Vec3, Vec3), b: (f64, Vec3, Vec3), t: f64) -> Vec3 {
    let h = b.0 - a.0;
    if h <= 0.0 {
        return a.1;
    }
    let s = ((t - a.0) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    a.1 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + a.2 * (h * (s3 - 2.0 * s2 + s))
        + b.1 * (-2.0 * s3 + 3.0 * s2)
        + b.2 * (h * (s3 - s2))
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a % TAU;
    if w > std::f64::consts::PI {
        w -= TAU;
    } else if w < -std::f64::consts::PI {
        w += TAU;
    }
    w
}

/// Bisection for the section-crossing time inside one step.
fn refine_crossing(
    tube: &Tube,
    theta0: f64,
    target: f64,
    a: (f64, Vec3, Vec3),
    b: (f64, Vec3, Vec3),
    theta_at_a: f64,
) -> f64 {
    let angle_at = |t: f64| -> f64 {
        let x = hermite(a, b, t);
        theta_at_a + wrap_angle(tube.theta(x) - theta0 - wrap_angle(theta_at_a))
    };
    let (mut lo, mut hi) = (a.0, b.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if angle_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Running Cesàro average with checkpoints and a Richardson-in-1/T
/// extrapolated limit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CesaroEstimate {
    /// (T, value at T) at monotone checkpoints.
    pub checkpoints: Vec<(f64, f64)>,
    pub extrapolated: f64,
    /// Max deviation among the last 3 checkpoints.
    pub spread: f64,
    /// Min/max over the checkpoint window (the multivalued bounds).
    pub lower: f64,
    pub upper: f64,
}

impl CesaroEstimate {
    fn from_checkpoints(checkpoints: Vec<(f64, f64)>) -> Self {
        let k = checkpoints.len();
        // Richardson on 1/T using the last up-to-4 checkpoints:
        // least-squares fit of v = c0 + c1/T.
        let tail = &checkpoints[k.saturating_sub(4)..];
        let n = tail.len() as f64;
        let (mut su, mut sv, mut suu, mut suv) = (0.0, 0.0, 0.0, 0.0);
        for &(t, v) in tail {
            let u = 1.0 / t;
            su += u;
            sv += v;
            suu += u * u;
            suv += u * v;
        }
        let denom = n * suu - su * su;
        let extrapolated = if denom.abs() > 1e-300 {
            (sv * suu - su * suv) / denom
        } else {
            tail.last().map(|&(_, v)| v).unwrap_or(0.0)
        };
        let last3 = &checkpoints[k.saturating_sub(3)..];
        let spread = last3
            .iter()
            .map(|&(_, v)| v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let all = checkpoints
            .iter()
            .map(|&(_, v)| v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        CesaroEstimate {
            checkpoints,
            extrapolated,
            spread: spread.1 - spread.0,
            lower: all.0,
            upper: all.1,
        }
    }
}

/// Asymptotic pairwise linking of the lines through x0 and y0 (in different
/// tubes): the chord-closed Gauss double integral of the truncated
/// trajectories, flux-normalized and divided by T², at geometric
/// checkpoints, then extrapolated in 1/T.
pub fn asymptotic_linking(
    field: &FieldSystem,
    x0: Vec3,
    y0: Vec3,
    t_max: f64,
    tol: f64,
) -> Result<CesaroEstimate> {
    let ta = field
        .tube_containing(x0)
        .ok_or_else(|| Error::Trace("x0 outside tubes".into()))?;
    let tb = field
        .tube_containing(y0)
        .ok_or_else(|| Error::Trace("y0 outside tubes".into()))?;
    if ta == tb {
        return Err(Error::Trace("points must lie in two different tubes".into()));
    }
    let tr_a = trace(field, x0, t_max, tol)?;
    let tr_b = trace(field, y0, t_max, tol)?;
    let flux = field.tubes[ta].flux * field.tubes[tb].flux;

    // For closed lines the time average over full periods recovers the
    // integer linking scaled by flux; the period product restores the time
    // normalization of the Cesàro average.
    let norm = match (tr_a.period, tr_b.period) {
        (Some(pa), Some(pb)) => pa * pb,
        _ => 1.0,
    };

    let n_checks = 8;
    let mut checkpoints = Vec::with_capacity(n_checks);
    for k in 1..=n_checks {
        let frac = k as f64 / n_checks as f64;
        let ga = truncated_polyline(&tr_a, frac);
        let gb = truncated_polyline(&tr_b, frac);
        let t_a = last_time(&tr_a, frac);
        let t_b = last_time(&tr_b, frac);
        let g = polyline_gauss(&ga, &gb);
        checkpoints.push((t_a.max(t_b), flux * norm * g / (t_a * t_b)));
    }
    Ok(CesaroEstimate::from_checkpoints(checkpoints))
}

fn last_time(tr: &TraceResult, frac: f64) -> f64 {
    let n = ((tr.points.len() as f64 * frac) as usize).clamp(2, tr.points.len());
    tr.points[n - 1].0.max(1e-12)
}

/// First `frac` of the trajectory, closed by a straight chord back to the
/// start (subdivided so the chord's Gauss contribution is resolved).
fn truncated_polyline(tr: &TraceResult, frac: f64) -> Vec<Vec3> {
    let n = ((tr.points.len() as f64 * frac) as usize).clamp(2, tr.points.len());
    let mut pts: Vec<Vec3> = tr.points[..n].iter().map(|&(_, p)| p).collect();
    let first = pts[0];
    let last = *pts.last().unwrap();
    let chord = first - last;
    let pieces = 64;
    for k in 1..pieces {
        pts.push(last + chord * (k as f64 / pieces as f64));
    }
    pts
}

/// Discrete Gauss linking sum over two closed polylines.
fn polyline_gauss(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut acc = 0.0;
    let na = a.len();
    let nb = b.len();
    for i in 0..na {
        let a0 = a[i];
        let a1 = a[(i + 1) % na];
        let da = a1 - a0;
        let am = (a0 + a1) * 0.5;
        for j in 0..nb {
            let b0 = b[j];
            let b1 = b[(j + 1) % nb];
            let db = b1 - b0;
            let bm = (b0 + b1) * 0.5;
            let r = am - bm;
            let d2 = r.norm2();
            if d2 < 1e-20 {
                continue;
            }
            acc += triple(da, db, r) / (d2 * d2.sqrt());
        }
    }
    acc / (4.0 * std::f64::consts::PI)
}

/// Result of the triple-sampling ergodic estimator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErgodicM {
    pub estimate: Estimate,
    pub per_triple: Vec<Estimate>,
    pub skipped_triples: u64,
}

/// Estimate M by sampling ordered triples of closed field lines (one per
/// tube, starting points flux-uniform on the cross-sections), fitting a
/// Fourier curve to each line, and averaging the curve-formula invariant
/// over the triples.
pub fn ergodic_m(
    field: &FieldSystem,
    n_triples: u64,
    config: &Config,
    trace_tol: f64,
) -> Result<ErgodicM> {
    if field.tubes.len() != 3 {
        return Err(Error::Field("ergodic M needs exactly 3 tubes".into()));
    }
    let mut per_triple = Vec::new();
    let mut skipped = 0u64;
    for k in 0..n_triples {
        let mut curves = Vec::with_capacity(3);
        let mut ok = true;
        for (ti, tube) in field.tubes.iter().enumerate() {
            let rng = CounterRng::stream(config.seed, "ergodic.start").substream(k * 3 + ti as u64);
            let x0 = tube.sample_section(rng, 0.0);
            // generous time budget: a few dozen transits at the local speed
            let speed = field.field(x0).norm().max(1e-9);
            let t_max = 64.0 * TAU * (tube.major_radius + tube.minor_radius) / speed;
            match trace(field, x0, t_max, trace_tol) {
                Ok(tr) if tr.closed => match fit_closed_line(&tr) {
                    Ok(c) => curves.push(c),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                },
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            skipped += 1;
            continue;
        }
        let link = Link3::new(curves.remove(0), curves.remove(0), curves.remove(0))?;
        let triple_config = Config {
            seed: CounterRng::stream(config.seed, "ergodic.triple").substream(k).key(),
            ..config.clone()
        };
        let breakdown = assemble_m(&link, &triple_config)?;
        per_triple.push(breakdown.m);
    }
    if skipped as f64 > 0.05 * n_triples as f64 {
        return Err(Error::Trace(format!(
            "{skipped}/{n_triples} sampled lines failed to close; field violates the Return Condition"
        )));
    }
    let n = per_triple.len() as f64;
    let mean = per_triple.iter().map(|e| e.value).sum::<f64>() / n;
    // variance of the mean: between-triple sample variance plus the average
    // propagated per-triple variance
    let between = per_triple.iter().map(|e| (e.value - mean).powi(2)).sum::<f64>()
        / ((n - 1.0).max(1.0) * n);
    let within = per_triple.iter().map(|e| e.stderr * e.stderr).sum::<f64>() / (n * n);
    let estimate = Estimate {
        value: mean,
        stderr: (between + within).sqrt(),
        n_samples: per_triple.iter().map(|e| e.n_samples).sum(),
        n_excluded_singular: per_triple.iter().map(|e| e.n_excluded_singular).sum(),
        converged: per_triple.iter().all(|e| e.converged),
        seed: config.seed,
    };
    Ok(ErgodicM { estimate, per_triple, skipped_triples: skipped })
}

/// Fit a Fourier curve to a closed traced line, with a fidelity check
/// against the dense samples.
pub fn fit_closed_line(tr: &TraceResult) -> Result<Curve3> {
    let period = tr
        .period
        .ok_or_else(|| Error::Trace("cannot fit an unclosed line".into()))?;
    let n = tr.points.len();
    let sample_at = |theta: f64| -> Vec3 {
        let tt = theta.rem_euclid(TAU) / TAU * period;
        // linear interpolation on the dense uniform grid
        let pos = tt / period * n as f64;
        let k = (pos as usize).min(n - 1);
        let frac = pos - k as f64;
        let a = tr.points[k].1;
        let b = tr.points[(k + 1) % n].1;
        a + (b - a) * frac
    };
    let mut order = 24;
    loop {
        let fit = fit_curve(sample_at, order, (4 * order).next_power_of_two())?;
        let worst = (0..256)
            .map(|k| {
                let th = TAU * k as f64 / 256.0;
                fit.point(th).dist(sample_at(th))
            })
            .fold(0.0, f64::max);
        let scale = fit.diameter().max(1e-9);
        if worst <= 1e-6 * scale || order >= 96 {
            if worst > 1e-6 * scale {
                return Err(Error::Trace(format!(
                    "Fourier fit residual {worst:.3e} exceeds fidelity budget"
                )));
            }
            return Ok(fit);
        }
        order *= 2;
    }
}

// ---------------------------------------------------------------------------
// JSON schema "linkm-field-v1"

pub const FIELD_SCHEMA: &str = "linkm-field-v1";

#[derive(Serialize, Deserialize)]
struct TubeJson {
    center: serde_json::Value,
    minor_radius: f64,
    transit: Transit,
    poloidal_strength: f64,
    flux: f64,
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    schema: String,
    tubes: Vec<TubeJson>,
}

impl FieldSystem {
    pub fn to_json_string(&self) -> String {
        let tubes = self
            .tubes
            .iter()
            .map(|t| {
                let c = t.center_curve();
                let link_doc: serde_json::Value =
                    serde_json::from_str(&curve_to_json(&c)).expect("valid");
                TubeJson {
                    center: link_doc,
                    minor_radius: t.minor_radius,
                    transit: t.transit,
                    poloidal_strength: t.poloidal_strength,
                    flux: t.flux,
                }
            })
            .collect();
        serde_json::to_string_pretty(&FieldJson { schema: FIELD_SCHEMA.into(), tubes })
            .expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<FieldSystem> {
        let doc: FieldJson = serde_json::from_str(s)?;
        if doc.schema != FIELD_SCHEMA {
            return Err(Error::Schema(format!(
                "expected schema {FIELD_SCHEMA:?}, got {:?}",
                doc.schema
            )));
        }
        let tubes = doc
            .tubes
            .iter()
            .map(|tj| {
                let curve = curve_from_json(&tj.center)?;
                Tube::from_center_curve(
                    &curve,
                    tj.minor_radius,
                    tj.transit,
                    tj.poloidal_strength,
                    tj.flux,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        FieldSystem::new(tubes)
    }
}

fn curve_to_json(c: &Curve3) -> String {
    // reuse the link component schema for a single curve
    let axis = |f: fn(Vec3) -> f64, v: &[Vec3]| v.iter().map(|&x| f(x)).collect::<Vec<_>>();
    serde_json::json!({
        "constant": [c.constant().x, c.constant().y, c.constant().z],
        "cos": [axis(|v| v.x, c.cos_coeffs()), axis(|v| v.y, c.cos_coeffs()), axis(|v| v.z, c.cos_coeffs())],
        "sin": [axis(|v| v.x, c.sin_coeffs()), axis(|v| v.y, c.sin_coeffs()), axis(|v| v.z, c.sin_coeffs())],
    })
    .to_string()
}

fn curve_from_json(v: &serde_json::Value) -> Result<Curve3> {
    let get = |name: &str| -> Result<Vec<Vec<f64>>> {
        serde_json::from_value(v[name].clone()).map_err(Error::Json)
    };
    let constant: Vec<f64> = serde_json::from_value(v["constant"].clone()).map_err(Error::Json)?;
    let cos = get("cos")?;
    let sin = get("sin")?;
    if cos.len() != 3 || sin.len() != 3 || constant.len() != 3 {
        return Err(Error::Schema("curve arrays must have 3 axes".into()));
    }
    let order = cos[0].len();
    let assemble = |arrs: &[Vec<f64>]| -> Vec<Vec3> {
        (0..order).map(|k| Vec3::new(arrs[0][k], arrs[1][k], arrs[2][k])).collect()
    };
    Curve3::new(Vec3::new(constant[0], constant[1], constant[2]), assemble(&cos), assemble(&sin))
}
