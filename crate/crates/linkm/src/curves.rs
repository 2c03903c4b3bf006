//! Closed parametrized curves and 3-component links.
//!
//! Curves are truncated Fourier series with period 2π, so tangents are exact
//! analytic derivatives and all periodic quadratures converge spectrally.
//! Polygonal approximations appear only inside the crossing-sign oracle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{RigidMotion, Vec3};
use crate::quadrature::rng::CounterRng;

/// Grid used for disjointness / tangent validation.
pub const VALIDATION_GRID: usize = 4096;

/// One closed space curve given by a truncated Fourier series per axis:
/// x(t) = constant + Σ_k cos_k·cos(kt) + sin_k·sin(kt), k = 1..=order.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve3 {
    constant: Vec3,
    cos: Vec<Vec3>,
    sin: Vec<Vec3>,
}

impl Curve3 {
    /// Build from per-order coefficient vectors (equal lengths).
    pub fn new(constant: Vec3, cos: Vec<Vec3>, sin: Vec<Vec3>) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::InvalidCurve(format!(
                "cos/sin order mismatch: {} vs {}",
                cos.len(),
                sin.len()
            )));
        }
        let c = Curve3 { constant, cos, sin };
        c.validate_tangent()?;
        Ok(c)
    }

    /// Circle of `radius` centered at `center` in the plane spanned by `u`, `v`
    /// (orthonormal): center + r(u cos t + v sin t).
    pub fn circle(center: Vec3, radius: f64, u: Vec3, v: Vec3) -> Self {
        Curve3 {
            constant: center,
            cos: vec![u * radius],
            sin: vec![v * radius],
        }
    }

    pub fn order(&self) -> usize {
        self.cos.len()
    }

    pub fn constant(&self) -> Vec3 {
        self.constant
    }

    pub fn cos_coeffs(&self) -> &[Vec3] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[Vec3] {
        &self.sin
    }

    /// Point and exact analytic tangent at parameter `t` (reduced mod 2π by
    /// the trig functions themselves).
    #[inline]
    pub fn eval(&self, t: f64) -> (Vec3, Vec3) {
        let mut p = self.constant;
        let mut d = Vec3::ZERO;
        // e^{ikt} by rotation recurrence.
        let (base_s, base_c) = t.sin_cos();
        let (mut s, mut c) = (base_s, base_c);
        for k in 0..self.cos.len() {
            let kf = (k + 1) as f64;
            p += self.cos[k] * c + self.sin[k] * s;
            d += (self.sin[k] * c - self.cos[k] * s) * kf;
            let c2 = c * base_c - s * base_s;
            s = s * base_c + c * base_s;
            c = c2;
        }
        (p, d)
    }

    #[inline]
    pub fn point(&self, t: f64) -> Vec3 {
        self.eval(t).0
    }

    /// Uniform parameter nodes t_k = 2πk/n.
    pub fn sample(&self, n: usize) -> Vec<(Vec3, Vec3)> {
        (0..n).map(|k| self.eval(TAU * k as f64 / n as f64)).collect()
    }

    /// Loose curve diameter: max pairwise distance on a coarse grid.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Vec3> = (0..64).map(|k| self.point(TAU * k as f64 / 64.0)).collect();
        let mut d = 0.0_f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                d = d.max(pts[i].dist(pts[j]));
            }
        }
        d
    }

    /// Sup of |ẋ| on the validation grid; a Lipschitz constant for the curve.
    pub fn max_speed(&self) -> f64 {
        (0..VALIDATION_GRID)
            .map(|k| self.eval(TAU * k as f64 / VALIDATION_GRID as f64).1.norm())
            .fold(0.0, f64::max)
    }

    fn validate_tangent(&self) -> Result<()> {
        if self.cos.is_empty() {
            return Err(Error::InvalidCurve("curve has no oscillating modes".into()));
        }
        let min_speed = (0..VALIDATION_GRID)
            .map(|k| self.eval(TAU * k as f64 / VALIDATION_GRID as f64).1.norm())
            .fold(f64::INFINITY, f64::min);
        if min_speed <= 1e-9 {
            return Err(Error::InvalidCurve(format!(
                "tangent nearly vanishes (min |ẋ| = {min_speed:.3e})"
            )));
        }
        Ok(())
    }

    /// Apply a rigid motion exactly on the coefficients.
    pub fn transform(&self, m: &RigidMotion) -> Curve3 {
        Curve3 {
            constant: m.apply(self.constant),
            cos: self.cos.iter().map(|&v| m.apply_linear(v)).collect(),
            sin: self.sin.iter().map(|&v| m.apply_linear(v)).collect(),
        }
    }

    /// Reverse orientation (t ↦ -t): sine coefficients flip sign.
    pub fn reversed(&self) -> Curve3 {
        Curve3 {
            constant: self.constant,
            cos: self.cos.clone(),
            sin: self.sin.iter().map(|&v| -v).collect(),
        }
    }
}

/// Fit a truncated Fourier series to a smooth 2π-periodic map by discrete
/// projection on `samples` uniform nodes (samples > 2·order).
pub fn fit_curve<F: FnMut(f64) -> Vec3>(mut f: F, order: usize, samples: usize) -> Result<Curve3> {
    assert!(samples > 2 * order + 1, "undersampled fit");
    let pts: Vec<Vec3> = (0..samples).map(|k| f(TAU * k as f64 / samples as f64)).collect();
    let mut constant = Vec3::ZERO;
    for &p in &pts {
        constant += p;
    }
    constant = constant / samples as f64;
    let mut cos = vec![Vec3::ZERO; order];
    let mut sin = vec![Vec3::ZERO; order];
    let h = TAU / samples as f64;
    for m in 1..=order {
        let (ds, dc) = (m as f64 * h).sin_cos();
        let (mut s, mut c) = (0.0_f64, 1.0_f64);
        let mut ac = Vec3::ZERO;
        let mut as_ = Vec3::ZERO;
        for &p in &pts {
            ac += p * c;
            as_ += p * s;
            let c2 = c * dc - s * ds;
            s = s * dc + c * ds;
            c = c2;
        }
        cos[m - 1] = ac * (2.0 / samples as f64);
        sin[m - 1] = as_ * (2.0 / samples as f64);
    }
    Curve3::new(constant, cos, sin)
}

/// Reparametrize a curve by t ↦ shift + ∫₀ᵗ speed, rescaled so one circuit of
/// the new parameter is one circuit of the old, then refit as a Fourier
/// series. Same image, different parametrization.
pub fn reparametrize<F: Fn(f64) -> f64>(
    curve: &Curve3,
    shift: f64,
    speed_profile: F,
    order: usize,
) -> Result<Curve3> {
    let n = (8 * order.max(16)).next_power_of_two();
    let speeds: Vec<f64> = (0..n)
        .map(|k| speed_profile(TAU * k as f64 / n as f64))
        .collect();
    if speeds.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidCurve("speed profile must be positive".into()));
    }
    let cum = crate::quadrature::spectral_cumulative(&speeds);
    let total = cum[n];
    // warp(u) interpolated spectrally from its node values.
    let warp_nodes: Vec<f64> = (0..=n).map(|k| shift + TAU * cum[k] / total).collect();
    let warp = |u: f64| -> f64 {
        // piecewise cubic Hermite through the dense node table; derivative
        // is proportional to the (smooth, positive) speed profile.
        let un = (u.rem_euclid(TAU)) / TAU * n as f64;
        let k = (un.floor() as usize).min(n - 1);
        let frac = un - k as f64;
        let h = TAU / n as f64;
        let d0 = TAU * speeds[k] / total * h;
        let d1 = TAU * speeds[(k + 1) % n] / total * h;
        let (p0, p1) = (warp_nodes[k], warp_nodes[k + 1]);
        let f2 = frac * frac;
        let f3 = f2 * frac;
        (2.0 * f3 - 3.0 * f2 + 1.0) * p0
            + (f3 - 2.0 * f2 + frac) * d0
            + (-2.0 * f3 + 3.0 * f2) * p1
            + (f3 - f2) * d1
            + TAU * (u.div_euclid(TAU))
    };
    fit_curve(|u| curve.point(warp(u)), order, (4 * order + 8).next_power_of_two())
}

/// Ordered triple of disjoint closed curves; indices are cyclic mod 3.
#[derive(Clone, Debug)]
pub struct Link3 {
    components: [Curve3; 3],
    min_separation: f64,
}

impl Link3 {
    pub fn new(c1: Curve3, c2: Curve3, c3: Curve3) -> Result<Self> {
        let components = [c1, c2, c3];
        let min_separation = validate_disjoint(&components)?;
        Ok(Link3 { components, min_separation })
    }

    pub fn components(&self) -> &[Curve3; 3] {
        &self.components
    }

    /// Component by 0-based index, cyclically (index mod 3).
    pub fn component(&self, i: usize) -> &Curve3 {
        &self.components[i % 3]
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// Loose overall diameter of the link.
    pub fn diameter(&self) -> f64 {
        let mut pts = Vec::new();
        for c in &self.components {
            for k in 0..32 {
                pts.push(c.point(TAU * k as f64 / 32.0));
            }
        }
        let mut d = 0.0_f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                d = d.max(pts[i].dist(pts[j]));
            }
        }
        d
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::ZERO;
        for comp in &self.components {
            c += comp.constant();
        }
        c / 3.0
    }

    pub fn transform(&self, m: &RigidMotion) -> Result<Link3> {
        Link3::new(
            self.components[0].transform(m),
            self.components[1].transform(m),
            self.components[2].transform(m),
        )
    }

    pub fn mirror_z(&self) -> Link3 {
        // A mirrored valid link is still valid; separation is preserved.
        self.transform(&RigidMotion::mirror_z()).expect("mirror preserves separation")
    }

    /// Deterministic family of smoothly perturbed, mutually isotopic links.
    /// Perturbations are low-order Fourier modes with sup-norm at most
    /// `amplitude`; `amplitude` must stay below min_separation/4 so no
    /// crossing changes can occur.
    pub fn isotopy_family(&self, seed: u64, amplitude: f64, count: usize) -> Result<Vec<Link3>> {
        if amplitude > self.min_separation / 4.0 {
            return Err(Error::InvalidLink(format!(
                "perturbation amplitude {amplitude} exceeds min_separation/4 = {}",
                self.min_separation / 4.0
            )));
        }
        let mut family = Vec::with_capacity(count);
        for member in 0..count {
            let mut comps = Vec::with_capacity(3);
            for (ci, comp) in self.components.iter().enumerate() {
                let rng = CounterRng::stream(seed, "isotopy").substream((member * 3 + ci) as u64);
                const MODES: usize = 3;
                // 2 vectors (cos, sin) per mode, 3 components each.
                let mut coeffs = [[Vec3::ZERO; 2]; MODES];
                let mut sup = 0.0;
                for (m, pair) in coeffs.iter_mut().enumerate() {
                    for (j, v) in pair.iter_mut().enumerate() {
                        *v = rng.gaussian3((m * 2 + j) as u64);
                        sup += v.norm();
                    }
                }
                // Normalize so the sup-norm bound is exact even in the worst phase.
                let scale = if sup > 0.0 { amplitude / sup } else { 0.0 };
                if scale == 0.0 {
                    comps.push(comp.clone());
                    continue;
                }
                let order = comp.order().max(MODES);
                let mut cos = comp.cos_coeffs().to_vec();
                let mut sin = comp.sin_coeffs().to_vec();
                cos.resize(order, Vec3::ZERO);
                sin.resize(order, Vec3::ZERO);
                for (m, pair) in coeffs.iter().enumerate() {
                    cos[m] += pair[0] * scale;
                    sin[m] += pair[1] * scale;
                }
                comps.push(Curve3::new(comp.constant(), cos, sin)?);
            }
            let link = Link3::new(comps.remove(0), comps.remove(0), comps.remove(0))?;
            if link.min_separation < self.min_separation / 2.0 {
                return Err(Error::InvalidLink(
                    "perturbed member violated the separation budget".into(),
                ));
            }
            family.push(link);
        }
        Ok(family)
    }
}

/// Pairwise min distance over a dense grid, minus a Lipschitz safety margin.
fn validate_disjoint(comps: &[Curve3; 3]) -> Result<f64> {
    let n = VALIDATION_GRID;
    let mut min_sep = f64::INFINITY;
    let grids: Vec<Vec<Vec3>> = comps
        .iter()
        .map(|c| (0..n).map(|k| c.point(TAU * k as f64 / n as f64)).collect())
        .collect();
    let speeds: Vec<f64> = comps.iter().map(Curve3::max_speed).collect();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let mut dmin = f64::INFINITY;
            for a in &grids[i] {
                for b in &grids[j] {
                    dmin = dmin.min(a.dist(*b));
                }
            }
            // Between grid nodes each curve moves at most max_speed·h/2.
            let margin = (speeds[i] + speeds[j]) * (TAU / n as f64) / 2.0;
            let safe = dmin - margin;
            if safe <= 0.0 {
                return Err(Error::InvalidLink(format!(
                    "components {} and {} are too close (grid min {dmin:.3e}, margin {margin:.3e})",
                    i + 1,
                    j + 1
                )));
            }
            min_sep = min_sep.min(safe);
        }
    }
    Ok(min_sep)
}

/// Named analytic test links.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Hopf pair in components 1, 2 plus a distant unlinked circle.
    HopfPlusFarCircle,
    /// Three mutually perpendicular ellipses; pairwise linking all zero.
    Borromean,
    /// Three coplanar circles with centers ≥ 10 radii apart.
    UnlinkSeparated,
    /// Components 1, 2 are the two strands of a (2, 2k) torus link
    /// (lk = k) plus a distant circle.
    Torus22k(u32),
    /// Open chain: 1-2 and 2-3 Hopf-linked, 1-3 unlinked.
    Chain3,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Preset> {
        let name = name.trim().to_ascii_lowercase();
        if let Some(rest) = name.strip_prefix("torus_2_2k:") {
            let k: u32 = rest
                .parse()
                .map_err(|_| Error::UnknownPreset(name.clone()))?;
            return Ok(Preset::Torus22k(k));
        }
        match name.as_str() {
            "hopf_plus_far_circle" | "hopf" => Ok(Preset::HopfPlusFarCircle),
            "borromean" => Ok(Preset::Borromean),
            "unlink_separated" | "unlink" => Ok(Preset::UnlinkSeparated),
            "torus_2_2k" => Ok(Preset::Torus22k(2)),
            "chain_3" | "chain" => Ok(Preset::Chain3),
            _ => Err(Error::UnknownPreset(name)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Preset::HopfPlusFarCircle => "hopf_plus_far_circle".into(),
            Preset::Borromean => "borromean".into(),
            Preset::UnlinkSeparated => "unlink_separated".into(),
            Preset::Torus22k(k) => format!("torus_2_2k:{k}"),
            Preset::Chain3 => "chain_3".into(),
        }
    }

    pub fn all_basic() -> Vec<Preset> {
        vec![
            Preset::HopfPlusFarCircle,
            Preset::Borromean,
            Preset::UnlinkSeparated,
            Preset::Torus22k(2),
            Preset::Chain3,
        ]
    }
}

pub fn preset(p: Preset) -> Link3 {
    let ex = Vec3::new(1.0, 0.0, 0.0);
    let ey = Vec3::new(0.0, 1.0, 0.0);
    let ez = Vec3::new(0.0, 0.0, 1.0);
    let link = match p {
        Preset::HopfPlusFarCircle => {
            let l1 = Curve3::circle(Vec3::ZERO, 1.0, ex, ey);
            let l2 = Curve3::circle(Vec3::new(1.0, 0.0, 0.0), 1.0, ex, ez);
            let l3 = Curve3::circle(Vec3::new(25.0, 0.0, 0.0), 1.0, ex, ey);
            Link3::new(l1, l2, l3)
        }
        Preset::Borromean => {
            // Ellipses with semiaxes (1, 0.6) in the xy, yz, zx planes;
            // each passes twice through the next one's spanning disk.
            let (a, b) = (1.0, 0.6);
            let l1 = Curve3::new(Vec3::ZERO, vec![ex * a], vec![ey * b]).unwrap();
            let l2 = Curve3::new(Vec3::ZERO, vec![ey * a], vec![ez * b]).unwrap();
            let l3 = Curve3::new(Vec3::ZERO, vec![ez * a], vec![ex * b]).unwrap();
            Link3::new(l1, l2, l3)
        }
        Preset::UnlinkSeparated => {
            let l1 = Curve3::circle(Vec3::ZERO, 1.0, ex, ey);
            let l2 = Curve3::circle(Vec3::new(12.0, 0.0, 0.0), 1.0, ex, ey);
            let l3 = Curve3::circle(Vec3::new(24.0, 0.0, 0.0), 1.0, ex, ey);
            Link3::new(l1, l2, l3)
        }
        Preset::Torus22k(k) => {
            let k = k.max(1);
            // Two parallel (1, k)-curves on the torus (R, r): they close after
            // one longitude and wind k times around the core; lk = k.
            let (big_r, small_r) = (2.0, 0.7);
            let strand = |phase: f64| {
                let pts = move |t: f64| {
                    let w = k as f64 * t + phase;
                    let rr = big_r + small_r * w.cos();
                    Vec3::new(rr * t.cos(), rr * t.sin(), small_r * w.sin())
                };
                fit_curve(pts, 2 * k as usize + 4, 16 * (k as usize + 2)).unwrap()
            };
            let l1 = strand(0.0);
            let l2 = strand(std::f64::consts::PI);
            let l3 = Curve3::circle(Vec3::new(30.0, 0.0, 0.0), 1.0, ex, ey);
            Link3::new(l1, l2, l3)
        }
        Preset::Chain3 => {
            let l1 = Curve3::circle(Vec3::ZERO, 1.0, ex, ey);
            let l2 = Curve3::circle(Vec3::new(1.25, 0.0, 0.0), 1.0, ex, ez);
            let l3 = Curve3::circle(Vec3::new(2.5, 0.0, 0.0), 1.0, ex, ey);
            Link3::new(l1, l2, l3)
        }
    };
    link.expect("presets are valid by construction")
}

// ---------------------------------------------------------------------------
// JSON schema "linkm-curve-v1": arrays indexed [axis][order].

#[derive(Serialize, Deserialize)]
struct CurveJson {
    constant: [f64; 3],
    cos: [Vec<f64>; 3],
    sin: [Vec<f64>; 3],
}

#[derive(Serialize, Deserialize)]
struct LinkJson {
    schema: String,
    components: Vec<CurveJson>,
}

pub const LINK_SCHEMA: &str = "linkm-curve-v1";

impl Curve3 {
    fn to_json(&self) -> CurveJson {
        let axis = |f: fn(Vec3) -> f64, v: &[Vec3]| v.iter().map(|&c| f(c)).collect::<Vec<_>>();
        CurveJson {
            constant: [self.constant.x, self.constant.y, self.constant.z],
            cos: [
                axis(|v| v.x, &self.cos),
                axis(|v| v.y, &self.cos),
                axis(|v| v.z, &self.cos),
            ],
            sin: [
                axis(|v| v.x, &self.sin),
                axis(|v| v.y, &self.sin),
                axis(|v| v.z, &self.sin),
            ],
        }
    }

    fn from_json(j: &CurveJson) -> Result<Curve3> {
        let order = j.cos[0].len();
        for arr in j.cos.iter().chain(j.sin.iter()) {
            if arr.len() != order {
                return Err(Error::Schema("ragged coefficient arrays".into()));
            }
        }
        let assemble = |arrs: &[Vec<f64>; 3]| -> Vec<Vec3> {
            (0..order)
                .map(|k| Vec3::new(arrs[0][k], arrs[1][k], arrs[2][k]))
                .collect()
        };
        Curve3::new(
            Vec3::new(j.constant[0], j.constant[1], j.constant[2]),
            assemble(&j.cos),
            assemble(&j.sin),
        )
    }
}

impl Link3 {
    pub fn to_json_string(&self) -> String {
        let doc = LinkJson {
            schema: LINK_SCHEMA.into(),
            components: self.components.iter().map(Curve3::to_json).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Link3> {
        let doc: LinkJson = serde_json::from_str(s)?;
        if doc.schema != LINK_SCHEMA {
            return Err(Error::Schema(format!(
                "expected schema {LINK_SCHEMA:?}, got {:?}",
                doc.schema
            )));
        }
        if doc.components.len() != 3 {
            return Err(Error::Schema(format!(
                "expected exactly 3 components, got {}",
                doc.components.len()
            )));
        }
        let mut comps = doc
            .components
            .iter()
            .map(Curve3::from_json)
            .collect::<Result<Vec<_>>>()?;
        Link3::new(comps.remove(0), comps.remove(0), comps.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_circle() -> Curve3 {
        Curve3::circle(Vec3::ZERO, 1.0, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0))
    }

    #[test]
    fn unit_circle_eval() {
        let c = unit_circle();
        let (p, d) = c.eval(0.0);
        assert!(p.dist(Vec3::new(1.0, 0.0, 0.0)) < 1e-15);
        assert!(d.dist(Vec3::new(0.0, 1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn eval_is_periodic() {
        let link = preset(Preset::Borromean);
        for c in link.components() {
            for k in 0..17 {
                let t = 0.37 + k as f64;
                let (p1, d1) = c.eval(t);
                let (p2, d2) = c.eval(t + TAU);
                assert!(p1.dist(p2) < 1e-12);
                assert!(d1.dist(d2) < 1e-12);
            }
        }
    }

    #[test]
    fn degree_two_eval_matches_direct_sum() {
        // Independent oracle: direct termwise summation without recurrences.
        let cos = vec![Vec3::new(1.0, 0.2, -0.3), Vec3::new(0.1, -0.4, 0.25)];
        let sin = vec![Vec3::new(0.0, 1.1, 0.2), Vec3::new(-0.3, 0.05, 0.6)];
        let c = Curve3::new(Vec3::new(0.5, -1.0, 2.0), cos.clone(), sin.clone()).unwrap();
        let t = std::f64::consts::FRAC_PI_2;
        let mut p = Vec3::new(0.5, -1.0, 2.0);
        let mut d = Vec3::ZERO;
        for k in 1..=2usize {
            let kt = k as f64 * t;
            p += cos[k - 1] * kt.cos() + sin[k - 1] * kt.sin();
            d += (sin[k - 1] * kt.cos() - cos[k - 1] * kt.sin()) * k as f64;
        }
        let (pe, de) = c.eval(t);
        assert!(pe.dist(p) < 1e-14);
        assert!(de.dist(d) < 1e-14);
    }

    #[test]
    fn transform_identity_and_rotation() {
        let link = preset(Preset::Chain3);
        let id = link.transform(&RigidMotion::identity()).unwrap();
        for (a, b) in link.components().iter().zip(id.components()) {
            assert_eq!(a, b);
        }
        let rot = RigidMotion::rotation_z(std::f64::consts::FRAC_PI_2);
        let r = unit_circle().transform(&rot);
        assert!(r.point(0.0).dist(Vec3::new(0.0, 1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn transform_preserves_separation() {
        let link = preset(Preset::Borromean);
        let m = RigidMotion::new(
            crate::geom::Mat3::rotation_axis(Vec3::new(1.0, 1.0, 0.3), 0.7),
            Vec3::new(5.0, -2.0, 1.0),
            1.0,
        )
        .unwrap();
        let t = link.transform(&m).unwrap();
        let rel = (t.min_separation() - link.min_separation()).abs() / link.min_separation();
        assert!(rel < 1e-10, "rel {rel}");
    }

    #[test]
    fn mirror_of_circle_same_point_set() {
        let c = unit_circle().transform(&RigidMotion::mirror_z());
        // circle lies in z=0, so the point set is unchanged
        for k in 0..32 {
            let t = TAU * k as f64 / 32.0;
            assert!(c.point(t).dist(unit_circle().point(t)) < 1e-15);
        }
    }

    #[test]
    fn presets_are_disjoint() {
        for p in Preset::all_basic() {
            let link = preset(p);
            assert!(link.min_separation() > 0.05, "{p:?}: {}", link.min_separation());
        }
    }

    #[test]
    fn unlink_centers_far() {
        let l = preset(Preset::UnlinkSeparated);
        let c1 = l.component(0).constant();
        let c2 = l.component(1).constant();
        assert!(c1.dist(c2) >= 10.0);
    }

    #[test]
    fn reparametrize_shift_only() {
        let c = unit_circle();
        let r = reparametrize(&c, std::f64::consts::PI, |_| 1.0, 4).unwrap();
        assert!(r.point(0.0).dist(c.point(std::f64::consts::PI)) < 1e-10);
    }

    #[test]
    fn reparametrize_preserves_image() {
        let link = preset(Preset::Borromean);
        let c = link.component(0);
        let r = reparametrize(c, 0.8, |t| 1.0 + 0.4 * t.sin(), 24).unwrap();
        // dense one-sided Hausdorff check in both directions
        let dense: Vec<Vec3> = (0..512).map(|k| c.point(TAU * k as f64 / 512.0)).collect();
        let dense_r: Vec<Vec3> = (0..512).map(|k| r.point(TAU * k as f64 / 512.0)).collect();
        let haus = |a: &[Vec3], b: &[Vec3]| -> f64 {
            a.iter()
                .map(|p| b.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        let d = haus(&dense, &dense_r).max(haus(&dense_r, &dense));
        // grid spacing ~ 2π/512 bounds the one-sided distance of true equality
        assert!(d < 2.0 * TAU / 512.0, "hausdorff {d}");
    }

    #[test]
    fn reparametrize_rejects_bad_speed() {
        let c = unit_circle();
        assert!(reparametrize(&c, 0.0, |t| t.sin(), 8).is_err());
    }

    #[test]
    fn isotopy_family_amplitude_zero() {
        let link = preset(Preset::Chain3);
        let fam = link.isotopy_family(9, 0.0, 3).unwrap();
        for m in &fam {
            for (a, b) in m.components().iter().zip(link.components()) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn isotopy_family_bounded_and_separated() {
        let link = preset(Preset::Borromean);
        let amp = link.min_separation() / 5.0;
        let fam = link.isotopy_family(1234, amp, 5).unwrap();
        assert_eq!(fam.len(), 5);
        for m in &fam {
            assert!(m.min_separation() >= link.min_separation() / 2.0);
            for (orig, pert) in link.components().iter().zip(m.components()) {
                let worst = (0..256)
                    .map(|k| {
                        let t = TAU * k as f64 / 256.0;
                        orig.point(t).dist(pert.point(t))
                    })
                    .fold(0.0, f64::max);
                assert!(worst <= amp * (1.0 + 1e-12), "worst {worst} vs amp {amp}");
            }
        }
    }

    #[test]
    fn isotopy_family_rejects_excessive_amplitude() {
        let link = preset(Preset::Borromean);
        assert!(link.isotopy_family(1, link.min_separation(), 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let link = preset(Preset::Torus22k(3));
        let s = link.to_json_string();
        let back = Link3::from_json_str(&s).unwrap();
        for (a, b) in link.components().iter().zip(back.components()) {
            for k in 0..64 {
                let t = TAU * k as f64 / 64.0;
                assert!(a.point(t).dist(b.point(t)) < 1e-12);
            }
        }
    }

    #[test]
    fn json_rejects_bad_schema() {
        let s = r#"{"schema":"other","components":[]}"#;
        assert!(Link3::from_json_str(s).is_err());
    }
}
