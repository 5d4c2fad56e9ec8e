//! Askey-Wilson measures and the large-`N` layer built on them.
//!
//! For real parameters `(a, b, c, d)` and `q in (-1, 1)` the measure has a
//! continuous part on `[-1, 1]`,
//!
//! ```text
//! f(y) = K / (2 pi sqrt(1 - y^2)) * |(e^{2 i th}; q)_inf|^2 / |(a e^{i th}, b e^{i th}, c e^{i th}, d e^{i th}; q)_inf|^2
//! K    = (q, ab, ac, ad, bc, bd, cd; q)_inf / (abcd; q)_inf,       y = cos th,
//! ```
//!
//! plus atoms at `(x q^j + 1/(x q^j)) / 2` for every parameter `x` with
//! `|x q^j| > 1`. Integrals are computed in `th`, where the `sqrt(1 - y^2)`
//! cancels against `dy = -sin th dth`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::StripParams;
use crate::error::{Error, Result};
use crate::mpa::{derive_params, DerivedParams};

/// Distance from the atom threshold `|x q^j| = 1` treated as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-9;

/// Relative precision of truncated infinite products.
const PRODUCT_EPS: f64 = 1e-17;

/// `(z; q)_n`, or `(z; q)_inf` for `n = None`.
pub fn qpochhammer(z: f64, q: f64, n: Option<usize>) -> f64 {
    match n {
        Some(n) => {
            let mut acc = 1.0;
            let mut zq = z;
            for _ in 0..n {
                acc *= 1.0 - zq;
                zq *= q;
            }
            acc
        }
        None => {
            let mut acc = 1.0;
            let mut zq = z;
            let aq = q.abs();
            loop {
                acc *= 1.0 - zq;
                zq *= q;
                // remaining factors change the product by at most |zq| / (1 - |q|)
                if zq.abs() <= PRODUCT_EPS * (1.0 - aq) || zq == 0.0 {
                    break;
                }
            }
            acc
        }
    }
}

/// Complex `(z; q)_inf`.
pub fn qpochhammer_complex(z: Complex64, q: f64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut zq = z;
    let aq = q.abs();
    loop {
        acc *= Complex64::new(1.0, 0.0) - zq;
        zq *= q;
        if zq.norm() <= PRODUCT_EPS * (1.0 - aq) || zq.norm() == 0.0 {
            break;
        }
    }
    acc
}

fn qp_many(zs: &[f64], q: f64) -> f64 {
    zs.iter().map(|&z| qpochhammer(z, q, None)).product()
}

/// Point mass of an Askey-Wilson measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
    /// Parameter generating the atom and its index `j`.
    pub generator: f64,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AWMeasure {
    pub params: [f64; 4],
    pub q: f64,
    pub atoms: Vec<Atom>,
    norm: f64,
}

/// How close a measure came to the atom threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degeneracy {
    /// Error out within [`DEGENERATE_GAP`] of the threshold.
    Strict,
    /// Proceed and report the smallest gap seen.
    Lenient,
}

fn admissible(p: [f64; 4], q: f64) -> Result<()> {
    if !(q > -1.0 && q < 1.0) {
        return Err(Error::Inadmissible(format!("q = {q} must lie in (-1, 1)")));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Inadmissible("parameters must be finite".into()));
    }
    let [a, b, c, d] = p;
    let checks = [
        ("ac", a * c),
        ("ad", a * d),
        ("bc", b * c),
        ("bd", b * d),
        ("q ac", q * a * c),
        ("q ad", q * a * d),
        ("q bc", q * b * c),
        ("q bd", q * b * d),
        ("abcd", a * b * c * d),
        ("q abcd", q * a * b * c * d),
    ];
    for (name, v) in checks {
        if v >= 1.0 {
            return Err(Error::Inadmissible(format!("{name} = {v} lies in [1, inf)")));
        }
    }
    Ok(())
}

/// Masses of the atoms generated by `p[0]`, with `p[1..]` the other parameters.
fn atoms_of_first(p: [f64; 4], q: f64) -> Vec<Atom> {
    let [a, b, c, d] = p;
    let mut out = Vec::new();
    if a.abs() <= 1.0 {
        return out;
    }
    // b/a etc. stay finite because |a| > 1
    let p0 = qp_many(&[1.0 / (a * a), b * c, b * d, c * d], q) / qp_many(&[b / a, c / a, d / a, a * b * c * d], q);
    let mut ratio = 1.0;
    let mut aq = a;
    let mut j = 0;
    while aq.abs() > 1.0 {
        if j > 0 {
            let k = j - 1;
            let qk = q.powi(k as i32);
            // step j-1 -> j of (a^2, ab, ac, ad; q)_j / (q, qa/b, qa/c, qa/d; q)_j (q/(abcd))^j,
            // written so that zero parameters need no division
            let mut step = (1.0 - a * a * qk) / (1.0 - qk * q) * (q / a);
            for x in [b, c, d] {
                step *= (1.0 - a * x * qk) / (x - qk * q * a);
            }
            ratio *= step;
        }
        let weight = (1.0 - a * a * q.powi(2 * j as i32)) / (1.0 - a * a);
        out.push(Atom {
            position: 0.5 * (aq + 1.0 / aq),
            mass: p0 * ratio * weight,
            generator: a,
            j,
        });
        aq *= q;
        j += 1;
        if j > 10_000 {
            break;
        }
    }
    out
}

impl AWMeasure {
    /// Continuous density with respect to `dth` on `[0, pi]`.
    pub fn theta_density(&self, th: f64) -> f64 {
        let e = Complex64::from_polar(1.0, th);
        let num = qpochhammer_complex(e * e, self.q).norm_sqr();
        let den: f64 = self.params.iter().map(|&x| qpochhammer_complex(e * x, self.q).norm_sqr()).product();
        self.norm / (2.0 * PI) * num / den
    }

    /// Continuous density with respect to `dy` on `(-1, 1)`.
    pub fn density(&self, y: f64) -> f64 {
        if y <= -1.0 || y >= 1.0 {
            return 0.0;
        }
        self.theta_density(y.acos()) / (1.0 - y * y).sqrt()
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Mass of the continuous part.
    pub fn continuous_mass(&self, quad: &Quadrature) -> Result<f64> {
        Ok(quad.integrate(|th| self.theta_density(th), 0.0)?.value)
    }

    pub fn total_mass(&self, quad: &Quadrature) -> Result<f64> {
        Ok(self.continuous_mass(quad)? + self.atom_mass())
    }

    /// Largest point of the support.
    pub fn support_max(&self) -> f64 {
        self.atoms.iter().map(|a| a.position).fold(1.0, f64::max)
    }

    /// Smallest point of the support.
    pub fn support_min(&self) -> f64 {
        self.atoms.iter().map(|a| a.position).fold(-1.0, f64::min)
    }
}

/// Askey-Wilson measure; fails near the atom threshold.
pub fn aw_measure(a: f64, b: f64, c: f64, d: f64, q: f64) -> Result<AWMeasure> {
    aw_measure_with(a, b, c, d, q, Degeneracy::Strict).map(|(m, _)| m)
}

/// Askey-Wilson measure together with the smallest gap `||x q^j| - 1|`.
pub fn aw_measure_with(a: f64, b: f64, c: f64, d: f64, q: f64, mode: Degeneracy) -> Result<(AWMeasure, f64)> {
    let p = [a, b, c, d];
    admissible(p, q)?;
    let mut min_gap = f64::INFINITY;
    for &x in &p {
        if x == 0.0 {
            continue;
        }
        let mut xq = x.abs();
        for _ in 0..10_000 {
            let gap = (xq - 1.0).abs();
            min_gap = min_gap.min(gap);
            if gap < DEGENERATE_GAP && mode == Degeneracy::Strict {
                return Err(Error::NearDegenerateAtom { chi: x, gap });
            }
            if xq < 1.0 - DEGENERATE_GAP {
                break;
            }
            xq *= q.abs();
        }
    }
    let norm = qp_many(&[q, a * b, a * c, a * d, b * c, b * d, c * d], q) / qpochhammer(a * b * c * d, q, None);
    let mut atoms = Vec::new();
    for i in 0..4 {
        let mut perm = p;
        perm.swap(0, i);
        atoms.extend(atoms_of_first(perm, q));
    }
    Ok((AWMeasure { params: p, q, atoms, norm }, min_gap))
}

/// Adaptive composite Gauss-Legendre on `[0, pi]`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub max_panels: usize,
    rule: GaussLegendre,
}

/// Integral value and the panels it was computed on.
#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: Vec<(f64, f64)>,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(1e-10)
    }
}

impl Quadrature {
    pub fn new(rel_tol: f64) -> Self {
        Self { rel_tol, max_panels: 20_000, rule: GaussLegendre::new(NonZeroUsize::new(20).unwrap()) }
    }

    /// Integrates `f` over `[0, pi]` until the estimated error is below
    /// `rel_tol * (|value| + extra)`, where `extra` accounts for mass
    /// outside the integral (atoms).
    pub fn integrate(&self, f: impl Fn(f64) -> f64, extra: f64) -> Result<QuadResult> {
        let eval = |a: f64, b: f64| {
            let whole = self.rule.integrate(a, b, &f);
            let m = 0.5 * (a + b);
            let halves = self.rule.integrate(a, m, &f) + self.rule.integrate(m, b, &f);
            (halves, (whole - halves).abs())
        };
        let n0 = 16;
        let mut panels: Vec<(f64, f64, f64, f64)> = (0..n0)
            .map(|i| {
                let (a, b) = (PI * i as f64 / n0 as f64, PI * (i + 1) as f64 / n0 as f64);
                let (v, e) = eval(a, b);
                (a, b, v, e)
            })
            .collect();
        loop {
            let value: f64 = panels.iter().map(|p| p.2).sum();
            let error: f64 = panels.iter().map(|p| p.3).sum();
            if error <= self.rel_tol * (value.abs() + extra.abs()) || error == 0.0 {
                panels.sort_by(|x, y| x.0.total_cmp(&y.0));
                return Ok(QuadResult { value, error, panels: panels.iter().map(|p| (p.0, p.1)).collect() });
            }
            if panels.len() >= self.max_panels {
                return Err(Error::Quadrature { tol: self.rel_tol, panels: panels.len(), estimate: value });
            }
            let (worst, _) = panels
                .iter()
                .enumerate()
                .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
                .expect("at least one panel");
            let (a, b, _, _) = panels.swap_remove(worst);
            let m = 0.5 * (a + b);
            for (lo, hi) in [(a, m), (m, b)] {
                let (v, e) = eval(lo, hi);
                panels.push((lo, hi, v, e));
            }
        }
    }

    /// Integrates `f` on a fixed panel set; smooth in any parameter of `f`.
    pub fn integrate_on(&self, panels: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for &(a, b) in panels {
            let m = 0.5 * (a + b);
            total += self.rule.integrate(a, m, &f) + self.rule.integrate(m, b, &f);
        }
        total
    }
}

/// `E[(1 + s + 2 sqrt(s) Y)^N]` split into its parts, all scaled by `M^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledExpectation {
    /// `N ln M`.
    pub log_scale: f64,
    pub continuous: f64,
    /// Contribution of each atom, in the order of [`AWMeasure::atoms`].
    pub atoms: Vec<f64>,
}

impl ScaledExpectation {
    pub fn scaled_total(&self) -> f64 {
        self.continuous + self.atoms.iter().sum::<f64>()
    }

    pub fn ln(&self) -> f64 {
        self.log_scale + self.scaled_total().ln()
    }

    pub fn value(&self) -> f64 {
        self.ln().exp()
    }

    pub fn continuous_share(&self) -> f64 {
        self.continuous / self.scaled_total()
    }

    pub fn largest_atom_share(&self) -> f64 {
        self.atoms.iter().copied().fold(0.0, f64::max) / self.scaled_total()
    }
}

fn scaled_expectation(
    m: &AWMeasure,
    n: usize,
    s: f64,
    quad: &Quadrature,
    panels: Option<&[(f64, f64)]>,
) -> Result<(ScaledExpectation, Vec<(f64, f64)>)> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Parameter(format!("r t = {s} must be positive")));
    }
    let g = |y: f64| 1.0 + s + 2.0 * s.sqrt() * y;
    let top = g(m.support_max());
    let low = g(m.support_min());
    if low < 0.0 {
        return Err(Error::Parameter(format!("integrand is not positive on the support (min {low})")));
    }
    let nf = n as f64;
    let pow = |y: f64| (g(y) / top).powf(nf);
    let atoms: Vec<f64> = m.atoms.iter().map(|a| a.mass * pow(a.position)).collect();
    let atom_total: f64 = atoms.iter().sum();
    let f = |th: f64| m.theta_density(th) * pow(th.cos());
    let (continuous, panels) = match panels {
        Some(p) => (quad.integrate_on(p, f), p.to_vec()),
        None => {
            let r = quad.integrate(f, atom_total)?;
            (r.value, r.panels)
        }
    };
    Ok((ScaledExpectation { log_scale: nf * top.ln(), continuous, atoms }, panels))
}

/// `E[(1 + r t + 2 sqrt(r t) Y)^N]` for `Y ~ measure`.
pub fn aw_expectation(measure: &AWMeasure, n: usize, r: f64, t: f64, quad: &Quadrature) -> Result<f64> {
    Ok(aw_expectation_parts(measure, n, r * t, quad)?.value())
}

pub fn aw_expectation_parts(measure: &AWMeasure, n: usize, s: f64, quad: &Quadrature) -> Result<ScaledExpectation> {
    Ok(scaled_expectation(measure, n, s, quad, None)?.0)
}

/// Region of the `(A, C)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Fan,
    Shock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    MaximalCurrent,
    HighDensity,
    LowDensity,
    Boundary,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Fan => "fan",
            Region::Shock => "shock",
        }
    }
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::MaximalCurrent => "maximal-current",
            Phase::HighDensity => "high-density",
            Phase::LowDensity => "low-density",
            Phase::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r: f64,
    pub region: Region,
    /// `None` in the shock region.
    pub phase: Option<Phase>,
    pub limit_density: Option<f64>,
    /// Both candidate limits when the high- and low-density conditions
    /// hold at once.
    pub candidates: Vec<f64>,
}

/// Phase classification from `(A, C, r)`.
pub fn classify(a: f64, c: f64, r: f64) -> PhaseReport {
    let sr = r.sqrt();
    let mut rep = PhaseReport { a, c, r, region: Region::Fan, phase: None, limit_density: None, candidates: vec![] };
    if a * c >= 1.0 {
        rep.region = Region::Shock;
        return rep;
    }
    let hd = a > 1.0 / sr;
    let ld = c > sr;
    let (phase, limit) = match (hd, ld) {
        (false, false) => (Phase::MaximalCurrent, Some(sr / (1.0 + sr))),
        (true, false) => (Phase::HighDensity, Some(a * r / (1.0 + a * r))),
        (false, true) => (Phase::LowDensity, Some(r / (r + c))),
        (true, true) => {
            // needs A C > 1, so only reachable through rounding
            rep.candidates = vec![a * r / (1.0 + a * r), r / (r + c)];
            (Phase::Boundary, None)
        }
    };
    rep.phase = Some(phase);
    rep.limit_density = limit;
    rep
}

/// Phase classification of strip parameters.
pub fn phase_limit(params: &StripParams) -> PhaseReport {
    let d = derive_params(params);
    classify(d.a, d.c, d.r)
}

/// Smallest `||x| - q^{-l}|` over the tilted parameters and `l <= 200`.
pub fn technical_gap(d: &DerivedParams) -> f64 {
    let mut best = f64::INFINITY;
    for x in [d.tilde_a, d.tilde_b, d.tilde_c, d.tilde_d] {
        let x = x.abs();
        if x == 0.0 {
            continue;
        }
        let mut target = 1.0;
        for _ in 0..=200 {
            best = best.min((x - target).abs());
            if target > 2.0 * x {
                break;
            }
            target /= d.q;
        }
    }
    best
}

/// Partition function `Z_N(t)` of the strip on the horizontal path.
#[derive(Debug, Clone)]
pub struct Partition {
    pub derived: DerivedParams,
    /// `(1 - theta1) / (theta2 (1 - q))`.
    pub prefactor: f64,
    pub quad: Quadrature,
    /// Smallest distance of the tilted parameters to `q^{-l}`.
    pub technical_gap: f64,
}

impl Partition {
    /// Fails in the shock region. Near the technical set the tolerance is
    /// relaxed to `1e-8` and a warning is logged.
    pub fn new(params: &StripParams, quad: Quadrature) -> Result<Self> {
        params.validate_theorem()?;
        let derived = derive_params(params);
        let ac = derived.a * derived.c;
        if ac >= 1.0 {
            return Err(Error::ShockRegion { ac });
        }
        let gap = technical_gap(&derived);
        let mut quad = quad;
        if gap < DEGENERATE_GAP {
            log::warn!("tilted boundary parameter within {gap:e} of q^-l; results are less accurate");
            quad.rel_tol = quad.rel_tol.max(1e-8);
        }
        let prefactor = (1.0 - params.theta1) / (params.theta2 * (1.0 - derived.q));
        Ok(Self { derived, prefactor, quad, technical_gap: gap })
    }

    fn measure(&self, t: f64) -> Result<AWMeasure> {
        let d = &self.derived;
        let st = t.sqrt();
        let (m, _) = aw_measure_with(d.tilde_a * st, d.tilde_b * st, d.tilde_c / st, d.tilde_d / st, d.q, Degeneracy::Lenient)?;
        Ok(m)
    }

    /// Parts of `E[(1 + r t + 2 sqrt(r t) Y)^N]` (without the prefactor).
    pub fn parts(&self, n: usize, t: f64) -> Result<ScaledExpectation> {
        aw_expectation_parts(&self.measure(t)?, n, self.derived.r * t, &self.quad)
    }

    pub fn log_z(&self, n: usize, t: f64) -> Result<f64> {
        Ok(n as f64 * self.prefactor.ln() + self.parts(n, t)?.ln())
    }

    pub fn z(&self, n: usize, t: f64) -> Result<f64> {
        Ok(self.log_z(n, t)?.exp())
    }

    /// `d/dt ln Z_N(t) / N` at `t = 1`: central differences with step `h`
    /// and `h/2`, one Richardson step, all on the panel set chosen at `t = 1`.
    pub fn mean_density(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroWidth);
        }
        let (_, panels) = scaled_expectation(&self.measure(1.0)?, n, self.derived.r, &self.quad, None)?;
        let log_e = |t: f64| -> Result<f64> {
            let (e, _) = scaled_expectation(&self.measure(t)?, n, self.derived.r * t, &self.quad, Some(&panels))?;
            Ok(e.ln())
        };
        let h = 1e-5;
        let diff = |h: f64| -> Result<f64> { Ok((log_e(1.0 + h)? - log_e(1.0 - h)?) / (2.0 * h)) };
        let (d1, d2) = (diff(h)?, diff(h / 2.0)?);
        Ok((4.0 * d2 - d1) / 3.0 / n as f64)
    }
}

pub fn partition_z(n: usize, t: f64, params: &StripParams) -> Result<f64> {
    Partition::new(params, Quadrature::default())?.z(n, t)
}

pub fn log_partition_z(n: usize, t: f64, params: &StripParams) -> Result<f64> {
    Partition::new(params, Quadrature::default())?.log_z(n, t)
}

pub fn mean_density(n: usize, params: &StripParams) -> Result<f64> {
    Partition::new(params, Quadrature::default())?.mean_density(n)
}

/// Strip parameters with prescribed `(q, r, A, B, C, D)`, inverting the
/// derivation `params -> DerivedParams`.
pub fn strip_params_from_boundary(q: f64, r: f64, a: f64, b: f64, c: f64, d: f64) -> Result<StripParams> {
    if !(q > 0.0 && q < 1.0 && r > 0.0 && r < 1.0) {
        return Err(Error::Parameter(format!("q = {q} and r = {r} must lie in (0, 1)")));
    }
    if !(a >= 0.0 && c >= 0.0 && b > -1.0 && b <= 0.0 && d > -1.0 && d <= 0.0) {
        return Err(Error::Parameter("need A, C >= 0 and B, D in (-1, 0]".into()));
    }
    let beta = (1.0 - q) / ((1.0 + a) * (1.0 + b));
    let delta = -a * b * beta;
    let alpha = (1.0 - q) / ((1.0 + c) * (1.0 + d));
    let gamma = -c * d * alpha;
    let theta2 = (1.0 - r) / (1.0 - r * q);
    let theta1 = q * theta2;
    let s = 1.0 / (1.0 + theta2 * (beta / (1.0 - theta2) + delta / (1.0 - theta1)));
    let pb = beta * theta2 * s / (1.0 - theta2);
    let pd = delta * theta2 * s / (1.0 - theta1);
    let pa = alpha * theta2 / (1.0 - theta1);
    let pc = gamma * theta2 / (1.0 - theta2);
    StripParams::theorem(pa, pb, pc, pd, theta1, theta2)
}
