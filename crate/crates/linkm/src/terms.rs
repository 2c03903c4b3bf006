//! Every named contribution to the invariant M and its assembly.
//!
//! With lk(i,j) the integer pairwise linking numbers and A_i the curve
//! potentials, the invariant is
//!
//!   M = W + Σ b-terms + Σ off-diagonal c and d terms + Σ f-terms + e,
//!
//! where W is a Gauss pair integral of lk-weighted α-fields over ℝ³×ℝ³, the
//! b-terms are volume integrals ⟨A_u, A_v, A^φ_w⟩, the c/d-terms are nested
//! periodic curve integrals carrying the scalar potentials, the f-terms are
//! products of a gauge-averaged circulation factor with the shared volume
//! integral ∫⟨A_1,A_2,A_3⟩, and e is that volume integral squared with an
//! lk prefactor. Diagonal c and d terms cancel pairwise and stay out of the
//! sum; they are still computed so that the cancellation can be checked.
//!
//! Terms whose integer prefactor vanishes are skipped as exact zeros before
//! any sampling, which makes the unlink and Borromean values exact rather
//! than statistical.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::curves::Link3;
use crate::error::Result;
use crate::gauge::{circulation_density, Gauge, ScalarPotentialTable};
use crate::geom::{triple, Vec3};
use crate::linking::LinkingMatrix;
use crate::potentials::{resample_series, CurvePotential};
use crate::quadrature::mc::{mc_volume, SamplerSpec, Sample};
use crate::quadrature::rng::CounterRng;
use crate::quadrature::{refine_doubling, spectral_cumulative, Estimate};

const PI4: f64 = 4.0 * std::f64::consts::PI;

/// The three cyclic component pairs, in canonical order.
const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Shared evaluation context for one link.
pub struct MContext<'a> {
    pub link: &'a Link3,
    pub lkm: LinkingMatrix,
    pub config: &'a Config,
    /// Plain curve potentials at the Monte Carlo order.
    pots: [CurvePotential; 3],
    /// Mean-zero scalar potential tables at the phi grid.
    pub phi: [ScalarPotentialTable; 3],
    /// φ-weighted curve potentials at the Monte Carlo order.
    phi_pots: [CurvePotential; 3],
    sampler: SamplerSpec,
}

impl<'a> MContext<'a> {
    pub fn new(link: &'a Link3, config: &'a Config) -> Result<Self> {
        let lkm = LinkingMatrix::compute(link, config.linking_tol)?;
        let order = config.potential_order;
        let pots = [
            CurvePotential::new(link.component(0), order, config.kernel),
            CurvePotential::new(link.component(1), order, config.kernel),
            CurvePotential::new(link.component(2), order, config.kernel),
        ];
        let phi =
            ScalarPotentialTable::build_all(link, &lkm, Gauge::MeanZero, config.phi_grid, config.kernel)?;
        let mut phi_pots = Vec::with_capacity(3);
        for i in 0..3 {
            let weights = resample_series(phi[i].node_values(), order);
            phi_pots.push(CurvePotential::new_weighted(
                link.component(i),
                order,
                weights,
                config.kernel,
            )?);
        }
        let phi_pots: [CurvePotential; 3] =
            phi_pots.try_into().expect("exactly three components");
        let sampler = SamplerSpec::for_link(link, config.sigma_tube_factor, config.tube_weight);
        Ok(MContext { link, lkm, config, pots, phi, phi_pots, sampler })
    }

    /// lk of the pair opposite component i (the pair not containing i).
    fn lk_opp(&self, i: usize) -> f64 {
        self.lkm.lk_f(i + 1, i + 2)
    }

    /// Prefactor of the α-field pair (a, a+1) in the main field.
    fn pair_coeff(&self, pair: (usize, usize)) -> f64 {
        self.lk_opp(pair.0) * self.lk_opp(pair.1)
    }

    fn mark(&self, label: &str) -> CounterRng {
        CounterRng::stream(self.config.seed, label)
    }

    fn target(&self, value: f64) -> f64 {
        self.config.target_stderr * value.abs().max(1.0)
    }

    fn finish_mc(&self, mut e: Estimate) -> Estimate {
        e.converged = e.stderr <= self.target(e.value);
        e
    }
}

// ---------------------------------------------------------------------------
// Labels

/// The nine b-term labels, canonical order. Entries are (i, u, v): the term
/// carries A^φ of component i and the plain potentials of u then v, with
/// 0-based indices.
pub fn b_labels() -> [(usize, usize, usize); 9] {
    // adjacent family: (i; i,j) for j = i+1, i+2 — the plain pair is the
    // cyclic pair containing {i, j}; then the cyclic family (i; i+1, i+2).
    [
        (0, 0, 1),
        (0, 2, 0),
        (1, 1, 2),
        (1, 0, 1),
        (2, 2, 0),
        (2, 1, 2),
        (0, 1, 2),
        (1, 2, 0),
        (2, 0, 1),
    ]
}

/// Human-readable 1-based label like "1;1,2" for a b-term entry.
pub fn b_label_name(entry: (usize, usize, usize)) -> String {
    let (i, u, v) = entry;
    format!("{};{},{}", i + 1, u + 1, v + 1)
}

fn b_prefactor(ctx: &MContext, entry: (usize, usize, usize)) -> f64 {
    let (i, u, v) = entry;
    if (u, v) == ((i + 1) % 3, (i + 2) % 3) {
        // cyclic family: −(1,2)(2,3)(3,1)
        -(ctx.lkm.lk_f(0, 1) * ctx.lkm.lk_f(1, 2) * ctx.lkm.lk_f(2, 0))
    } else {
        // adjacent family (i; i,j): −lk_opp(i)² · lk_opp(j)
        let j = if (u, v) == (i % 3, (i + 1) % 3) { (i + 1) % 3 } else { (i + 2) % 3 };
        -(ctx.lk_opp(i).powi(2) * ctx.lk_opp(j))
    }
}

/// c/d labels: (a, b) means the integral runs over component b carrying φ_b,
/// against the field of component a; b = a (diagonal) or b = a+1.
pub fn cd_labels() -> [(usize, usize); 6] {
    [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)]
}

pub fn cd_label_name(entry: (usize, usize)) -> String {
    format!("{};{}", entry.0 + 1, entry.1 + 1)
}

fn cd_prefactor(ctx: &MContext, entry: (usize, usize), negative_diag: bool) -> f64 {
    let (a, b) = entry;
    if a == b {
        let p = ctx.lk_opp(a).powi(2);
        if negative_diag {
            -p
        } else {
            p
        }
    } else {
        let p = ctx.lk_opp(a) * ctx.lk_opp(b);
        if negative_diag {
            p
        } else {
            2.0 * p
        }
    }
}

// ---------------------------------------------------------------------------
// Main term W

/// Gauss pair kernel ⟨u, v, x−y⟩ / (4π ‖x−y‖³).
#[inline]
fn gauss_pair_kernel(u: Vec3, v: Vec3, x: Vec3, y: Vec3) -> Option<f64> {
    let r = x - y;
    let d2 = r.norm2();
    if d2 < 1e-26 {
        return None;
    }
    Some(triple(u, v, r) / (PI4 * d2 * d2.sqrt()))
}

/// Canonical W block list: 3 square blocks then 3 cross blocks.
fn w_blocks() -> [((usize, usize), (usize, usize)); 6] {
    [
        (PAIRS[0], PAIRS[0]),
        (PAIRS[1], PAIRS[1]),
        (PAIRS[2], PAIRS[2]),
        (PAIRS[0], PAIRS[1]),
        (PAIRS[0], PAIRS[2]),
        (PAIRS[1], PAIRS[2]),
    ]
}

/// The main term: the Gauss double integral of the lk-weighted α-field pair
/// over ℝ³×ℝ³, as the sum of 3 square and 3 cross blocks. Blocks with a
/// vanishing prefactor are skipped exactly; the rest share one sample stream
/// (the α-fields are evaluated once per sample and reused across blocks, and
/// the total's standard error comes from the summed per-sample integrand, so
/// cross-block correlation is handled exactly).
pub fn term_w(ctx: &MContext, budget: u64) -> (Estimate, BTreeMap<String, Estimate>, Vec<String>) {
    let mut blocks = BTreeMap::new();
    let mut skipped = Vec::new();
    let coeffs: Vec<f64> = w_blocks()
        .iter()
        .map(|&(p, q)| {
            let c = ctx.pair_coeff(p) * ctx.pair_coeff(q);
            if p == q {
                c
            } else {
                2.0 * c
            }
        })
        .collect();
    let active: Vec<usize> = (0..6)
        .filter(|&k| coeffs[k] != 0.0 || !ctx.config.short_circuit)
        .collect();
    for (k, &(p, q)) in w_blocks().iter().enumerate() {
        if !active.contains(&k) {
            blocks.insert(block_name(p, q), Estimate::exact_zero());
            skipped.push(block_name(p, q));
        }
    }
    if active.is_empty() {
        return (Estimate::exact_zero(), blocks, skipped);
    }

    // Which components feed at least one active block.
    let mut needed = [false; 3];
    for &k in &active {
        let (p, q) = w_blocks()[k];
        for c in [p.0, p.1, q.0, q.1] {
            needed[c] = true;
        }
    }

    let stream = ctx.mark("term.W");
    let spec = &ctx.sampler;
    let n = budget.max(4);
    const BLOCK: u64 = 2048;
    let nblocks = n.div_ceil(BLOCK);
    // per sample block: sums and sum-squares for each active W block + total
    let width = active.len() + 1;
    let partials: Vec<(Vec<f64>, Vec<f64>, u64, u64)> = {
        use rayon::prelude::*;
        (0..nblocks)
            .into_par_iter()
            .map(|bi| {
                let mut sums = vec![0.0; width];
                let mut sums2 = vec![0.0; width];
                let mut excluded = 0u64;
                let mut count = 0u64;
                let lo = bi * BLOCK;
                let hi = ((bi + 1) * BLOCK).min(n);
                'sample: for i in lo..hi {
                    let rng = stream.substream(i);
                    let (x, y) = draw_pair(spec, stream, rng, i);
                    count += 1;
                    let qd = pair_density(spec, x, y);
                    // evaluate the needed potentials at x and y
                    let mut ax = [Vec3::ZERO; 3];
                    let mut ay = [Vec3::ZERO; 3];
                    for c in 0..3 {
                        if needed[c] {
                            match (ctx.pots[c].eval(x), ctx.pots[c].eval(y)) {
                                (Ok(vx), Ok(vy)) => {
                                    ax[c] = vx;
                                    ay[c] = vy;
                                }
                                _ => {
                                    excluded += 1;
                                    continue 'sample;
                                }
                            }
                        }
                    }
                    let alpha = |a: [Vec3; 3], p: (usize, usize)| a[p.0].cross(a[p.1]);
                    let mut total = 0.0;
                    for (slot, &k) in active.iter().enumerate() {
                        let (p, q) = w_blocks()[k];
                        let Some(g) = gauss_pair_kernel(alpha(ax, p), alpha(ay, q), x, y) else {
                            excluded += 1;
                            continue 'sample;
                        };
                        let w = coeffs[k] * g / qd;
                        sums[slot] += w;
                        sums2[slot] += w * w;
                        total += w;
                    }
                    sums[width - 1] += total;
                    sums2[width - 1] += total * total;
                }
                (sums, sums2, excluded, count)
            })
            .collect()
    };

    let (sums, sums2, excluded, count) = reduce_vec_partials(&partials, width);
    let nf = count as f64;
    let make = |sum: f64, sum2: f64| -> Estimate {
        let mean = sum / nf;
        let var = (sum2 / nf - mean * mean).max(0.0);
        Estimate {
            value: mean,
            stderr: (var / nf).sqrt(),
            n_samples: count,
            n_excluded_singular: excluded,
            converged: true,
            seed: stream.key(),
        }
    };
    for (slot, &k) in active.iter().enumerate() {
        let (p, q) = w_blocks()[k];
        blocks.insert(block_name(p, q), make(sums[slot], sums2[slot]));
    }
    let total = ctx.finish_mc(make(sums[width - 1], sums2[width - 1]));
    (total, blocks, skipped)
}

/// Fixed-order reduction over per-block vector partials.
fn reduce_vec_partials(
    partials: &[(Vec<f64>, Vec<f64>, u64, u64)],
    width: usize,
) -> (Vec<f64>, Vec<f64>, u64, u64) {
    let mut sums = vec![0.0; width];
    let mut sums2 = vec![0.0; width];
    let mut excluded = 0u64;
    let mut count = 0u64;
    for (s, s2, ex, c) in partials {
        for k in 0..width {
            sums[k] += s[k];
            sums2[k] += s2[k];
        }
        excluded += ex;
        count += c;
    }
    (sums, sums2, excluded, count)
}

fn block_name(p: (usize, usize), q: (usize, usize)) -> String {
    format!("({},{})x({},{})", p.0 + 1, p.1 + 1, q.0 + 1, q.1 + 1)
}

/// Pair draw shared with the mc module's scheme: even sample indices are
/// independent pairs, odd ones antithetic close pairs.
fn draw_pair(spec: &SamplerSpec, stream: CounterRng, rng: CounterRng, i: u64) -> (Vec3, Vec3) {
    if i % 2 == 0 {
        (spec.draw_at(rng.substream(1)), spec.draw_at(rng.substream(2)))
    } else {
        let group = (i - 1) / 4;
        let shared = stream.substream(0x8000_0000_0000_0000 | group);
        let x = spec.draw_at(shared.substream(1));
        let r = shared.uniform(40) * spec.pair_radius;
        let dir = shared.unit_vector(41);
        let sgn = if i % 4 == 1 { 1.0 } else { -1.0 };
        (x, x + dir * (r * sgn))
    }
}

fn pair_density(spec: &SamplerSpec, x: Vec3, y: Vec3) -> f64 {
    spec.pair_density_at(x, y)
}

// ---------------------------------------------------------------------------
// b-terms

/// One b-term on its own stream: prefactor × ∫ ⟨A_u, A_v, A^φ_i⟩ dx.
pub fn term_b(ctx: &MContext, entry: (usize, usize, usize), budget: u64) -> Estimate {
    let pref = b_prefactor(ctx, entry);
    if ctx.config.short_circuit && (pref == 0.0 || ctx.phi[entry.0].is_identically_zero()) {
        return Estimate::exact_zero();
    }
    let (i, u, v) = entry;
    let stream = ctx.mark(&format!("term.b.{}", b_label_name(entry)));
    let e = mc_volume(
        |x| {
            let (Ok(au), Ok(av), Ok(aphi)) =
                (ctx.pots[u].eval(x), ctx.pots[v].eval(x), ctx.phi_pots[i].eval(x))
            else {
                return Sample::Singular;
            };
            Sample::Value(pref * triple(au, av, aphi))
        },
        &ctx.sampler,
        stream,
        budget,
    );
    ctx.finish_mc(e)
}

/// All nine b-terms sharing one sample stream; potentials are evaluated once
/// per sample and reused, and the prefactor-weighted sum's error is taken
/// from the summed per-sample integrand.
pub fn b_terms_joint(
    ctx: &MContext,
    budget: u64,
) -> (BTreeMap<String, Estimate>, Estimate, Vec<String>) {
    let labels = b_labels();
    let prefs: Vec<f64> = labels.iter().map(|&l| b_prefactor(ctx, l)).collect();
    let mut out = BTreeMap::new();
    let mut skipped = Vec::new();
    let active: Vec<usize> = (0..9)
        .filter(|&k| {
            let structurally_zero = prefs[k] == 0.0 || ctx.phi[labels[k].0].is_identically_zero();
            let keep = !structurally_zero || !ctx.config.short_circuit;
            if !keep {
                out.insert(b_label_name(labels[k]), Estimate::exact_zero());
                skipped.push(b_label_name(labels[k]));
            }
            keep
        })
        .collect();
    if active.is_empty() {
        return (out, Estimate::exact_zero(), skipped);
    }

    let mut needed_plain = [false; 3];
    let mut needed_phi = [false; 3];
    for &k in &active {
        let (i, u, v) = labels[k];
        needed_plain[u] = true;
        needed_plain[v] = true;
        needed_phi[i] = true;
    }

    let stream = ctx.mark("term.b.joint");
    let n = budget.max(4);
    const BLOCK: u64 = 2048;
    let nblocks = n.div_ceil(BLOCK);
    let width = active.len() + 1;
    let partials: Vec<(Vec<f64>, Vec<f64>, u64, u64)> = {
        use rayon::prelude::*;
        (0..nblocks)
            .into_par_iter()
            .map(|bi| {
                let mut sums = vec![0.0; width];
                let mut sums2 = vec![0.0; width];
                let mut excluded = 0u64;
                let mut count = 0u64;
                let lo = bi * BLOCK;
                let hi = ((bi + 1) * BLOCK).min(n);
                'sample: for s in lo..hi {
                    let rng = stream.substream(s);
                    let x = ctx.sampler.draw_at(rng);
                    count += 1;
                    let q = ctx.sampler.density(x);
                    let mut plain = [Vec3::ZERO; 3];
                    let mut phiv = [Vec3::ZERO; 3];
                    for c in 0..3 {
                        if needed_plain[c] {
                            match ctx.pots[c].eval(x) {
                                Ok(val) => plain[c] = val,
                                Err(_) => {
                                    excluded += 1;
                                    continue 'sample;
                                }
                            }
                        }
                        if needed_phi[c] {
                            match ctx.phi_pots[c].eval(x) {
                                Ok(val) => phiv[c] = val,
                                Err(_) => {
                                    excluded += 1;
                                    continue 'sample;
                                }
                            }
                        }
                    }
                    let mut total = 0.0;
                    for (slot, &k) in active.iter().enumerate() {
                        let (i, u, v) = labels[k];
                        let w = prefs[k] * triple(plain[u], plain[v], phiv[i]) / q;
                        sums[slot] += w;
                        sums2[slot] += w * w;
                        total += w;
                    }
                    sums[width - 1] += total;
                    sums2[width - 1] += total * total;
                }
                (sums, sums2, excluded, count)
            })
            .collect()
    };

    let (sums, sums2, excluded, count) = reduce_vec_partials(&partials, width);
    let nf = count as f64;
    let make = |sum: f64, sum2: f64| -> Estimate {
        let mean = sum / nf;
        let var = (sum2 / nf - mean * mean).max(0.0);
        Estimate {
            value: mean,
            stderr: (var / nf).sqrt(),
            n_samples: count,
            n_excluded_singular: excluded,
            converged: true,
            seed: stream.key(),
        }
    };
    for (slot, &k) in active.iter().enumerate() {
        out.insert(b_label_name(labels[k]), ctx.finish_mc(make(sums[slot], sums2[slot])));
    }
    let total = ctx.finish_mc(make(sums[width - 1], sums2[width - 1]));
    (out, total, skipped)
}

// ---------------------------------------------------------------------------
// c- and d-terms (nested periodic rules)

/// Writhe-type contracted kernel for one curve:
/// ⟨ẋ(t), ẋ(s), x(t)−x(s)⟩ / (4π‖x(t)−x(s)‖³); bounded as s → t.
fn diag_kernel(samples: &[(Vec3, Vec3)], t_idx: usize, s: &(Vec3, Vec3)) -> f64 {
    let (pt, dt) = samples[t_idx];
    let (ps, ds) = *s;
    let r = pt - ps;
    let d2 = r.norm2();
    if d2 < 1e-26 {
        return 0.0;
    }
    triple(dt, ds, r) / (PI4 * d2 * d2.sqrt())
}

/// c_{a;b} = prefactor × ∮ φ_b (ẋ_b, A^φ_a) dx_b.
///
/// Off-diagonal (b = a+1): the weighted potential of a is smooth along
/// component b; plain nested trapezoid with node doubling.
/// Diagonal (b = a): the two integrals contract into the bounded writhe-type
/// kernel; the inner rule runs on a half-offset grid so nodes never collide.
pub fn term_c(ctx: &MContext, entry: (usize, usize), start_order: usize) -> Result<(Estimate, bool)> {
    term_cd(ctx, entry, false, start_order)
}

/// d_{a;b} = prefactor × ∮ φ_b² (ẋ_b, A_a) dx_b (plain potential, φ squared).
pub fn term_d(ctx: &MContext, entry: (usize, usize), start_order: usize) -> Result<(Estimate, bool)> {
    term_cd(ctx, entry, true, start_order)
}

fn term_cd(
    ctx: &MContext,
    entry: (usize, usize),
    is_d: bool,
    start_order: usize,
) -> Result<(Estimate, bool)> {
    let (a, b) = entry;
    let pref = cd_prefactor(ctx, entry, is_d);
    // d uses only φ_b; c also carries the φ_a-weighted potential.
    let phi_zero = ctx.phi[b].is_identically_zero()
        || (!is_d && ctx.phi[a].is_identically_zero());
    if ctx.config.short_circuit && (pref == 0.0 || phi_zero) {
        return Ok((Estimate::exact_zero(), true));
    }

    let exponent = ctx.config.kernel;
    let value_at = |n: usize| -> Result<f64> {
        let curve_b = ctx.link.component(b);
        let h = TAU / n as f64;
        if a == b {
            // contracted diagonal rule; inner grid offset by h/2
            let outer: Vec<(Vec3, Vec3)> = (0..n).map(|k| curve_b.eval(k as f64 * h)).collect();
            let inner: Vec<(Vec3, Vec3)> =
                (0..n).map(|k| curve_b.eval((k as f64 + 0.5) * h)).collect();
            let phi_outer = resample_series(ctx.phi[b].node_values(), n);
            let phi_inner: Vec<f64> = (0..n)
                .map(|k| ctx.phi[b].interpolate((k as f64 + 0.5) * h))
                .collect();
            let mut acc = 0.0;
            for t in 0..n {
                let mut inner_acc = 0.0;
                for s in 0..n {
                    let g = diag_kernel(&outer, t, &inner[s]);
                    inner_acc += if is_d { g } else { phi_inner[s] * g };
                }
                inner_acc *= h;
                let w = if is_d { phi_outer[t] * phi_outer[t] } else { phi_outer[t] };
                acc += w * inner_acc;
            }
            Ok(acc * h)
        } else {
            // smooth nested rule: A-potential of a evaluated along b
            let phi_b = resample_series(ctx.phi[b].node_values(), n);
            let pot_a = if is_d {
                CurvePotential::new(ctx.link.component(a), ctx.config.phi_grid, exponent)
            } else {
                let w = ctx.phi[a].node_values().to_vec();
                CurvePotential::new_weighted(ctx.link.component(a), ctx.config.phi_grid, w, exponent)?
            };
            let mut acc = 0.0;
            for k in 0..n {
                let (p, d) = curve_b.eval(k as f64 * h);
                let f = d.dot(pot_a.eval(p)?);
                let w = if is_d { phi_b[k] * phi_b[k] } else { phi_b[k] };
                acc += w * f;
            }
            Ok(acc * h)
        }
    };

    let mut err: Option<crate::error::Error> = None;
    let (value, delta, _n, converged) = refine_doubling(
        |n| match value_at(n) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        start_order,
        2048,
        1e-9,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok((
        Estimate {
            value: pref * value,
            stderr: pref.abs() * delta,
            n_samples: 0,
            n_excluded_singular: 0,
            converged,
            seed: 0,
        },
        false,
    ))
}

// ---------------------------------------------------------------------------
// f-terms and e

/// The shared volume factor ∫ ⟨A_1, A_2, A_3⟩ dx, computed once per link.
pub fn volume_factor(ctx: &MContext, budget: u64) -> Estimate {
    let stream = ctx.mark("term.V");
    let e = mc_volume(
        |x| {
            let (Ok(a1), Ok(a2), Ok(a3)) =
                (ctx.pots[0].eval(x), ctx.pots[1].eval(x), ctx.pots[2].eval(x))
            else {
                return Sample::Singular;
            };
            Sample::Value(triple(a1, a2, a3))
        },
        &ctx.sampler,
        stream,
        budget,
    );
    ctx.finish_mc(e)
}

/// Marked-point-averaged circulation factor of the i-th f-term:
/// the average over marked points s of
/// ∮ [a_{i+2}(t) φ^s_{i+1,i}(t) − a_{i+1}(t) φ^s_{i+2,i}(t)] dt,
/// where a_j(t) = ẋ_i·A_j and φ^s_{j,i} is the multivalued potential branch
/// vanishing at s. Returns (average, spread over marked points, refinement
/// delta).
pub fn f_curve_factor(ctx: &MContext, i: usize) -> Result<(f64, f64, f64)> {
    let eval_at = |grid: usize| -> Result<(f64, f64)> {
        let a_plus = circulation_density(ctx.link, i, i + 1, grid, ctx.config.kernel)?;
        let a_minus = circulation_density(ctx.link, i, i + 2, grid, ctx.config.kernel)?;
        let lift_plus = spectral_cumulative(&a_plus);
        let lift_minus = spectral_cumulative(&a_minus);
        let p_plus = lift_plus[grid];
        let p_minus = lift_minus[grid];
        let h = TAU / grid as f64;
        let marked = ctx.config.marked_point_grid.min(grid);
        let stride = grid / marked;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for m in 0..marked {
            let s_idx = m * stride;
            let mut k_s = 0.0;
            for t in 0..grid {
                let jump_plus = if t < s_idx { p_plus } else { 0.0 };
                let jump_minus = if t < s_idx { p_minus } else { 0.0 };
                let phi_plus = lift_plus[t] - lift_plus[s_idx] + jump_plus;
                let phi_minus = lift_minus[t] - lift_minus[s_idx] + jump_minus;
                k_s += a_minus[t] * phi_plus - a_plus[t] * phi_minus;
            }
            k_s *= h;
            lo = lo.min(k_s);
            hi = hi.max(k_s);
            acc += k_s;
        }
        Ok((acc / marked as f64, hi - lo))
    };
    let (coarse, _) = eval_at(ctx.config.phi_grid / 2)?;
    let (fine, spread) = eval_at(ctx.config.phi_grid)?;
    Ok((fine, spread, (fine - coarse).abs()))
}

/// f_i = −2 × (marked-point-averaged circulation factor) × (volume factor).
pub fn term_f(ctx: &MContext, i: usize, volume: Estimate) -> Result<(Estimate, f64)> {
    let (avg, spread, delta) = f_curve_factor(ctx, i)?;
    let factor = Estimate {
        value: avg,
        stderr: delta,
        n_samples: 0,
        n_excluded_singular: 0,
        converged: true,
        seed: 0,
    };
    Ok((factor.mul(volume).scale(-2.0), spread))
}

/// e = −2 (1,2)(2,3)(3,1) × (volume factor)², exactly 0 when any lk is 0.
pub fn term_e(ctx: &MContext, volume: Estimate) -> Estimate {
    let pref = ctx.lkm.lk_f(0, 1) * ctx.lkm.lk_f(1, 2) * ctx.lkm.lk_f(2, 0);
    if pref == 0.0 {
        return Estimate::exact_zero();
    }
    volume.mul(volume).scale(-2.0 * pref)
}

// ---------------------------------------------------------------------------
// Assembly

/// All named contributions plus the assembled sum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermBreakdown {
    pub lk: LinkingMatrix,
    pub w: Estimate,
    pub w_blocks: BTreeMap<String, Estimate>,
    pub b: BTreeMap<String, Estimate>,
    pub c: BTreeMap<String, Estimate>,
    pub d: BTreeMap<String, Estimate>,
    pub f: [Estimate; 3],
    /// Spread of the f curve factor over fixed marked points, per component.
    pub f_spread: [f64; 3],
    pub e: Estimate,
    pub volume_factor: Estimate,
    /// The assembled invariant with propagated standard error.
    pub m: Estimate,
    /// Labels skipped as exact zeros, with the reason.
    pub skipped: BTreeMap<String, String>,
}

impl TermBreakdown {
    pub fn diagonal_identity_sigma(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..3 {
            let key = format!("{};{}", i + 1, i + 1);
            let c = self.c[&key];
            let d = self.d[&key];
            let denom = c.stderr.hypot(d.stderr);
            let miss = (c.value + d.value).abs();
            worst = worst.max(if denom == 0.0 {
                if miss == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                miss / denom
            });
        }
        worst
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Compute every term of the invariant and assemble the sum
/// W + Σ b + Σ_i (c_{i,i+1} + d_{i,i+1} + f_i) + e, with errors propagated in
/// quadrature. Diagonal c/d terms are evaluated for the cancellation check
/// but excluded from the sum.
pub fn assemble_m(link: &Link3, config: &Config) -> Result<TermBreakdown> {
    let ctx = MContext::new(link, config)?;
    let budget = config.mc_budget;
    let mut skipped = BTreeMap::new();

    let (w, w_blocks, w_skipped) = term_w(&ctx, budget);
    for name in w_skipped {
        skipped.insert(format!("W.{name}"), "vanishing lk prefactor".into());
    }

    let (b, b_total, b_skipped) = b_terms_joint(&ctx, budget);
    for name in b_skipped {
        skipped.insert(format!("b.{name}"), "vanishing lk prefactor or zero φ".into());
    }

    let mut c = BTreeMap::new();
    let mut d = BTreeMap::new();
    for entry in cd_labels() {
        let (ce, c_skip) = term_c(&ctx, entry, 256)?;
        let (de, d_skip) = term_d(&ctx, entry, 256)?;
        if c_skip {
            skipped.insert(
                format!("c.{}", cd_label_name(entry)),
                "vanishing lk prefactor or zero φ".into(),
            );
        }
        if d_skip {
            skipped.insert(
                format!("d.{}", cd_label_name(entry)),
                "vanishing lk prefactor or zero φ".into(),
            );
        }
        c.insert(cd_label_name(entry), ce);
        d.insert(cd_label_name(entry), de);
    }

    // Shared volume factor: needed by e and the f-terms. When every pairwise
    // linking number vanishes the e-prefactor is zero and the f-terms are
    // skipped with it (see the skip note below), so the factor itself can be
    // skipped too.
    let all_lk_zero = PAIRS.iter().all(|&(i, j)| ctx.lkm.lk(i, j) == 0);
    let volume = if config.short_circuit && all_lk_zero {
        skipped.insert("V".into(), "all pairwise lk zero".into());
        Estimate::exact_zero()
    } else {
        volume_factor(&ctx, budget)
    };

    let mut f = [Estimate::exact_zero(); 3];
    let mut f_spread = [0.0; 3];
    if config.short_circuit && all_lk_zero {
        for i in 0..3 {
            skipped.insert(format!("f.{}", i + 1), "all pairwise lk zero".into());
        }
    } else {
        for i in 0..3 {
            let (fe, spread) = term_f(&ctx, i, volume)?;
            f[i] = fe;
            f_spread[i] = spread;
        }
    }

    let e = term_e(&ctx, volume);
    if e.value == 0.0 && e.n_samples == 0 {
        skipped.insert("e".into(), "vanishing lk prefactor".into());
    }

    // Assemble: W + Σb + Σ off-diagonal c,d + Σf + e.
    let mut m = w.add(b_total);
    for (a, bb) in PAIRS {
        m = m.add(c[&format!("{};{}", a + 1, bb + 1)]);
        m = m.add(d[&format!("{};{}", a + 1, bb + 1)]);
    }
    for fe in &f {
        m = m.add(*fe);
    }
    m = m.add(e);

    Ok(TermBreakdown {
        lk: ctx.lkm.clone(),
        w,
        w_blocks,
        b,
        c,
        d,
        f,
        f_spread,
        e,
        volume_factor: volume,
        m,
        skipped,
    })
}
