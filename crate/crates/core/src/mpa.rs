//! Matrix product ansatz.
//!
//! Words in the DEHP algebra
//!
//! ```text
//! DE = q ED + D + E,   <W|E = (<W| + gamma <W|D) / alpha,   D|V> = (|V> + delta E|V>) / beta
//! ```
//!
//! are evaluated abstractly with `<W|V> = 1`. The right module spanned by
//! `E^k|V>` is closed under `D` and `E`, so a word acting on `|V>` reduces to
//! a coefficient vector over that basis, and `<W|E^k|V>` satisfies a linear
//! recursion. No concrete representation of `D`, `E` is built.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dynamics::{power_of_q, Configuration, StripParams};
use crate::error::{Error, Result};
use crate::exact::{AsepRates, Distribution, DEFAULT_CAP};
use crate::lattice::{DownRightPath, EdgeKind};

/// Parameters derived from the strip weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub q: f64,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub tilde_a: f64,
    pub tilde_b: f64,
    pub tilde_c: f64,
    pub tilde_d: f64,
}

/// Roots `(kappa_plus, kappa_minus)` of `u k^2 - (1 - q - u + v) k - v = 0`.
pub fn kappa(u: f64, v: f64, q: f64) -> (f64, f64) {
    let s = 1.0 - q - u + v;
    if v == 0.0 {
        return (s.max(0.0) / u, s.min(0.0) / u);
    }
    let disc = (s * s + 4.0 * u * v).sqrt();
    // avoid cancellation: compute the larger-magnitude root first
    if s >= 0.0 {
        let kp = (s + disc) / (2.0 * u);
        (kp, -v / (u * kp))
    } else {
        let km = (s - disc) / (2.0 * u);
        (-v / (u * km), km)
    }
}

pub fn kappa_plus(u: f64, v: f64, q: f64) -> f64 {
    kappa(u, v, q).0
}

pub fn kappa_minus(u: f64, v: f64, q: f64) -> f64 {
    kappa(u, v, q).1
}

impl DerivedParams {
    /// Derivation from ASEP rates with `L = q`, `R = 1` and tilt `r`.
    pub fn from_rates(rates: &AsepRates, r: f64) -> Self {
        let q = rates.l / rates.r;
        let (a, b) = kappa(rates.beta, rates.delta, q);
        let (c, d) = kappa(rates.alpha, rates.gamma, q);
        let sr = r.sqrt();
        Self {
            q,
            r,
            alpha: rates.alpha,
            beta: rates.beta,
            gamma: rates.gamma,
            delta: rates.delta,
            a,
            b,
            c,
            d,
            tilde_a: a * sr,
            tilde_b: b * sr,
            tilde_c: c / sr,
            tilde_d: d / sr,
        }
    }

    pub fn rates(&self) -> AsepRates {
        AsepRates { alpha: self.alpha, beta: self.beta, gamma: self.gamma, delta: self.delta, l: self.q, r: 1.0 }
    }
}

pub fn derive_params(params: &StripParams) -> DerivedParams {
    DerivedParams::from_rates(&AsepRates::from_strip(params), params.r())
}

/// `sum c_{n,m} E^n D^m`, keyed by `(n, m)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalForm {
    terms: BTreeMap<(usize, usize), f64>,
    q: f64,
}

/// A letter of a DEHP word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    D,
    E,
}

impl NormalForm {
    pub fn one(q: f64) -> Self {
        Self { terms: BTreeMap::from([((0, 0), 1.0)]), q }
    }

    /// Normal-orders a word by repeated use of `DE = q ED + D + E`.
    pub fn from_word(word: &[Letter], q: f64) -> Self {
        let mut nf = Self::one(q);
        let mut g_cache = vec![];
        for &l in word {
            nf = match l {
                Letter::D => nf.mul_d(),
                Letter::E => nf.mul_e(&mut g_cache),
            };
        }
        nf
    }

    pub fn terms(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.terms
    }

    fn mul_d(&self) -> Self {
        let terms = self.terms.iter().map(|(&(n, m), &c)| ((n, m + 1), c)).collect();
        Self { terms, q: self.q }
    }

    /// `g[m]` is the normal form of `D^m E`.
    fn g(cache: &mut Vec<BTreeMap<(usize, usize), f64>>, m: usize, q: f64) {
        while cache.len() <= m {
            let k = cache.len();
            let mut next = BTreeMap::new();
            if k == 0 {
                next.insert((1, 0), 1.0);
            } else {
                // D^k E = q (D^{k-1} E) D + D^k + D^{k-1} E
                for (&(n, j), &c) in &cache[k - 1] {
                    *next.entry((n, j + 1)).or_insert(0.0) += q * c;
                    *next.entry((n, j)).or_insert(0.0) += c;
                }
                *next.entry((0, k)).or_insert(0.0) += 1.0;
            }
            cache.push(next);
        }
    }

    fn mul_e(&self, cache: &mut Vec<BTreeMap<(usize, usize), f64>>) -> Self {
        let mut terms = BTreeMap::new();
        for (&(n, m), &c) in &self.terms {
            Self::g(cache, m, self.q);
            for (&(gn, gm), &gc) in &cache[m] {
                *terms.entry((n + gn, gm)).or_insert(0.0) += c * gc;
            }
        }
        Self { terms, q: self.q }
    }
}

/// Evaluator of `<W| . |V>` on the right module spanned by `E^k|V>`.
///
/// Not thread-safe by design: each task owns its evaluator and memo tables.
#[derive(Debug, Clone)]
pub struct DehpEvaluator {
    q: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
    /// `d[k]` holds the coordinates of `D E^k |V>` (length `k + 2`).
    d: Vec<Vec<f64>>,
    /// `w[n] = <W|E^n|V>`.
    w: Vec<f64>,
}

impl DehpEvaluator {
    /// Fails with [`Error::Singular`] when `alpha beta` is within
    /// `1e-12 alpha beta` of `q^l gamma delta`.
    pub fn new(rates: &AsepRates) -> Result<Self> {
        rates.validate()?;
        let q = rates.l / rates.r;
        let ab = rates.alpha * rates.beta;
        let gd = rates.gamma * rates.delta;
        if gd > 0.0 {
            if let Some(l) = power_of_q(ab / gd, q, 1e-12 * ab / gd) {
                return Err(Error::Singular { l });
            }
        }
        let d0 = vec![1.0 / rates.beta, rates.delta / rates.beta];
        Ok(Self {
            q,
            alpha: rates.alpha,
            beta: rates.beta,
            gamma: rates.gamma,
            delta: rates.delta,
            d: vec![d0],
            w: vec![1.0],
        })
    }

    pub fn from_strip(params: &StripParams) -> Result<Self> {
        Self::new(&AsepRates::from_strip(params))
    }

    fn ensure_d(&mut self, k: usize) {
        while self.d.len() <= k {
            let j = self.d.len();
            let prev = &self.d[j - 1];
            // D E^j = q E (D E^{j-1}) + D E^{j-1} + E^j
            let mut next = vec![0.0; j + 2];
            for (i, &c) in prev.iter().enumerate() {
                next[i + 1] += self.q * c;
                next[i] += c;
            }
            next[j] += 1.0;
            self.d.push(next);
        }
    }

    fn ensure_w(&mut self, n: usize) {
        while self.w.len() <= n {
            let j = self.w.len() - 1;
            self.ensure_d(j);
            // alpha w_{j+1} = w_j + gamma <W| D E^j |V>
            let dj = &self.d[j];
            let partial: f64 = dj[..=j].iter().zip(&self.w).map(|(c, w)| c * w).sum();
            let top = dj[j + 1];
            let next = (self.w[j] + self.gamma * partial) / (self.alpha - self.gamma * top);
            self.w.push(next);
        }
    }

    /// Applies `D` to a right-module vector.
    pub fn apply_d(&mut self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return vec![];
        }
        self.ensure_d(x.len() - 1);
        let mut out = vec![0.0; x.len() + 1];
        for (k, &c) in x.iter().enumerate() {
            if c != 0.0 {
                for (o, &dk) in out.iter_mut().zip(&self.d[k]) {
                    *o += c * dk;
                }
            }
        }
        out
    }

    /// Applies `E` to a right-module vector.
    pub fn apply_e(x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len() + 1);
        out.push(0.0);
        out.extend_from_slice(x);
        out
    }

    /// `<W| x`.
    pub fn functional(&mut self, x: &[f64]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        self.ensure_w(x.len() - 1);
        x.iter().zip(&self.w).map(|(a, b)| a * b).sum()
    }

    /// `<W|E^n|V>`.
    pub fn w(&mut self, n: usize) -> f64 {
        self.ensure_w(n);
        self.w[n]
    }

    /// `<W| word |V>`, applying letters right to left.
    pub fn word(&mut self, word: &[Letter]) -> f64 {
        let mut x = vec![1.0];
        for &l in word.iter().rev() {
            x = match l {
                Letter::D => self.apply_d(&x),
                Letter::E => Self::apply_e(&x),
            };
        }
        self.functional(&x)
    }

    /// `<W| sum c_{n,m} E^n D^m |V>`.
    pub fn normal_form(&mut self, nf: &NormalForm) -> f64 {
        let mut by_m: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (&(n, m), &c) in nf.terms() {
            by_m.entry(m).or_default().push((n, c));
        }
        let mut total = 0.0;
        let mut x = vec![1.0];
        let mut cur = 0;
        for (m, terms) in by_m {
            while cur < m {
                x = self.apply_d(&x);
                cur += 1;
            }
            for (n, c) in terms {
                self.ensure_w(n + x.len() - 1);
                total += c * x.iter().enumerate().map(|(k, v)| v * self.w[n + k]).sum::<f64>();
            }
        }
        total
    }

    pub fn rates(&self) -> AsepRates {
        AsepRates { alpha: self.alpha, beta: self.beta, gamma: self.gamma, delta: self.delta, l: self.q, r: 1.0 }
    }
}

/// `<W| word |V>` with letters applied right to left.
pub fn dehp_value(word: &[Letter], rates: &AsepRates) -> Result<f64> {
    Ok(DehpEvaluator::new(rates)?.word(word))
}

/// The same value computed on the left module spanned by `<W|D^k`.
///
/// Transposition maps the algebra to itself with `D <-> E` and
/// `(alpha, gamma) <-> (beta, delta)`, so this runs the right-module
/// recursion on the reversed, letter-swapped word.
pub fn dehp_value_left(word: &[Letter], rates: &AsepRates) -> Result<f64> {
    let swapped = AsepRates {
        alpha: rates.beta,
        beta: rates.alpha,
        gamma: rates.delta,
        delta: rates.gamma,
        ..*rates
    };
    let rev: Vec<Letter> = word
        .iter()
        .rev()
        .map(|l| match l {
            Letter::D => Letter::E,
            Letter::E => Letter::D,
        })
        .collect();
    dehp_value(&rev, &swapped)
}

/// Edge operators of the strip ansatz in terms of `D`, `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripOp {
    DUp,
    DRight,
    EUp,
    ERight,
}

impl StripOp {
    pub fn for_edge(kind: EdgeKind, occupied: bool) -> Self {
        match (kind, occupied) {
            (EdgeKind::Up, true) => StripOp::DUp,
            (EdgeKind::Up, false) => StripOp::EUp,
            (EdgeKind::Right, true) => StripOp::DRight,
            (EdgeKind::Right, false) => StripOp::ERight,
        }
    }
}

/// Strip ansatz evaluator: `D^up = s_D D`, `E^up = s_E E`,
/// `D^right = D^up + I`, `E^right = E^up - I`, with
/// `s_D = (1 - theta2)/theta2` and `s_E = (1 - theta1)/theta2`.
#[derive(Debug, Clone)]
pub struct StripAnsatz {
    eval: DehpEvaluator,
    sd: f64,
    se: f64,
}

impl StripAnsatz {
    pub fn new(params: &StripParams) -> Result<Self> {
        params.validate_theorem()?;
        Ok(Self {
            eval: DehpEvaluator::from_strip(params)?,
            sd: (1.0 - params.theta2) / params.theta2,
            se: (1.0 - params.theta1) / params.theta2,
        })
    }

    pub fn apply(&mut self, op: StripOp, x: &[f64]) -> Vec<f64> {
        let (mut y, shift) = match op {
            StripOp::DUp | StripOp::DRight => (self.eval.apply_d(x), 1.0),
            StripOp::EUp | StripOp::ERight => (DehpEvaluator::apply_e(x), -1.0),
        };
        let s = if matches!(op, StripOp::DUp | StripOp::DRight) { self.sd } else { self.se };
        y.iter_mut().for_each(|v| *v *= s);
        if matches!(op, StripOp::DRight | StripOp::ERight) {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += shift * xi;
            }
        }
        y
    }

    /// `<W| ops |V>`.
    pub fn value(&mut self, ops: &[StripOp]) -> f64 {
        let mut x = vec![1.0];
        for &op in ops.iter().rev() {
            x = self.apply(op, &x);
        }
        self.eval.functional(&x)
    }

    /// Unnormalized weights of all configurations on `path`, little-endian.
    pub fn weights(&mut self, path: &DownRightPath) -> Vec<f64> {
        let n = path.width();
        let mut out = vec![0.0; 1 << n];
        let labels = path.labels().to_vec();
        self.fill(&labels, n, vec![1.0], 0, &mut out);
        out
    }

    fn fill(&mut self, labels: &[EdgeKind], site: usize, x: Vec<f64>, index: usize, out: &mut [f64]) {
        if site == 0 {
            out[index] = self.eval.functional(&x);
            return;
        }
        let i = site - 1;
        for occ in [false, true] {
            let y = self.apply(StripOp::for_edge(labels[i], occ), &x);
            self.fill(labels, i, y, index | (usize::from(occ) << i), out);
        }
    }

    /// `ln <W|(E^up + t D^up)^N|V>` with running rescaling.
    pub fn log_partition_horizontal(&mut self, n: usize, t: f64) -> f64 {
        let mut x = vec![1.0];
        let mut log_scale = 0.0;
        for _ in 0..n {
            let dx = self.eval.apply_d(&x);
            let ex = DehpEvaluator::apply_e(&x);
            x = dx.iter().zip(&ex).map(|(d, e)| t * self.sd * d + self.se * e).collect();
            let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                x.iter_mut().for_each(|v| *v /= m);
                log_scale += m.ln();
            }
        }
        log_scale + self.eval.functional(&x).ln()
    }
}

fn normalize(width: usize, weights: Vec<f64>) -> Result<Distribution> {
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Normalizer(total));
    }
    if let Some(w) = weights.iter().find(|&&w| w < -1e-12 * total) {
        return Err(Error::Parameter(format!("matrix ansatz produced a negative weight {w}")));
    }
    Distribution::from_weights(width, weights.into_iter().map(|w| w.max(0.0)).collect())
}

/// Stationary law on `path` from the matrix ansatz.
pub fn mpa_measure(path: &DownRightPath, params: &StripParams) -> Result<Distribution> {
    if path.width() > DEFAULT_CAP {
        return Err(Error::OverCap { n: path.width(), cap: DEFAULT_CAP });
    }
    let mut ansatz = StripAnsatz::new(params)?;
    normalize(path.width(), ansatz.weights(path))
}

/// Stationary law of the open ASEP from `<W| prod (tau D + (1 - tau) E) |V>`.
pub fn asep_mpa_measure(n: usize, rates: &AsepRates) -> Result<Distribution> {
    if n > DEFAULT_CAP {
        return Err(Error::OverCap { n, cap: DEFAULT_CAP });
    }
    let mut ev = DehpEvaluator::new(rates)?;
    let weights = (0..1usize << n)
        .map(|idx| {
            let word: Vec<Letter> =
                (0..n).map(|i| if idx >> i & 1 == 1 { Letter::D } else { Letter::E }).collect();
            ev.word(&word)
        })
        .collect();
    normalize(n, weights)
}

/// Product measure with `p_up` on up edges and `p_right` on right edges.
pub fn product_measure(path: &DownRightPath, p_up: f64, p_right: f64) -> Distribution {
    let n = path.width();
    let weights = (0..1usize << n)
        .map(|idx| {
            path.labels()
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let p = if k == EdgeKind::Up { p_up } else { p_right };
                    if idx >> i & 1 == 1 {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product()
        })
        .collect();
    Distribution::from_weights(n, weights).expect("product weights sum to 1")
}

/// Whether [`bernoulli_special`] insists on `theta1 < theta2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BernoulliMode {
    #[default]
    Theorem,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernoulliSolution {
    pub theta1: f64,
    pub p_up: f64,
    pub p_right: f64,
}

/// The `theta1` making the stationary law a product measure, with its marginals.
pub fn bernoulli_special(a: f64, b: f64, c: f64, d: f64, theta2: f64, mode: BernoulliMode) -> Result<BernoulliSolution> {
    StripParams::new(a, b, c, d, 0.5, theta2)?;
    let x = (a + d - a * b - a * d) * (b + c - b * c - a * b);
    let y = (a + d - a * d - c * d) * (b + c - b * c - c * d);
    if x == 0.0 || y == 0.0 {
        return Err(Error::Parameter("Bernoulli condition degenerate: a side vanishes".into()));
    }
    let theta1 = 1.0 - (1.0 - theta2) * y / x;
    if !(theta1 > 0.0 && theta1 < 1.0) {
        return Err(Error::Parameter(format!("no valid theta1: solved value {theta1} is outside (0, 1)")));
    }
    if mode == BernoulliMode::Theorem && theta1 >= theta2 {
        return Err(Error::Parameter(format!(
            "solved theta1 = {theta1} is not below theta2 = {theta2}"
        )));
    }
    let den = a + b + c + d - (a + c) * (b + d);
    Ok(BernoulliSolution {
        theta1,
        p_up: (a + d - a * b - a * d) / den,
        p_right: (a + d - a * d - c * d) / den,
    })
}

/// Stationary laws for `a = b = c = d = 1`, where particle parity is conserved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityMeasures {
    pub p_up: f64,
    pub p_right: f64,
    pub even: Distribution,
    pub odd: Distribution,
}

pub fn parity_bernoulli(theta1: f64, theta2: f64, path: &DownRightPath) -> Result<ParityMeasures> {
    for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Parameter(format!("{name} = {v} must lie in [0, 1)")));
        }
    }
    let (s1, s2) = ((1.0 - theta1).sqrt(), (1.0 - theta2).sqrt());
    let p_up = s2 / (s1 + s2);
    let p_right = s1 / (s1 + s2);
    let full = product_measure(path, p_up, p_right);
    let restrict = |parity: u32| {
        let w = full
            .probs()
            .iter()
            .enumerate()
            .map(|(i, &p)| if i.count_ones() % 2 == parity { p } else { 0.0 })
            .collect();
        Distribution::from_weights(path.width(), w)
    };
    Ok(ParityMeasures { p_up, p_right, even: restrict(0)?, odd: restrict(1)? })
}

/// `k`-particle law proportional to `q^{-sum m_j}` over occupied sites `m_j` (1-based).
pub fn qvolume_measure(n: usize, k: usize, q: f64) -> Result<Distribution> {
    if k > n {
        return Err(Error::Parameter(format!("particle number k = {k} exceeds N = {n}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Parameter(format!("q = {q} must lie in (0, 1)")));
    }
    if n > DEFAULT_CAP {
        return Err(Error::OverCap { n, cap: DEFAULT_CAP });
    }
    // weight relative to the leftmost placement keeps exponents small
    let base: usize = (1..=k).sum();
    let weights = (0..1usize << n)
        .map(|idx| {
            if idx.count_ones() as usize != k {
                return 0.0;
            }
            let sites: usize = Configuration::from_index(idx, n)
                .bits()
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == 1)
                .map(|(i, _)| i + 1)
                .sum();
            q.powi(-((sites - base) as i32))
        })
        .collect();
    Distribution::from_weights(n, weights)
}
