//! Statistical distances between a discrete law (exact lattice law or
//! empirical sample) and the standard normal, or between two discrete laws:
//! Kolmogorov sup-distance, Wasserstein-r by the quantile coupling, and the
//! smoothness-class distances zeta_1 (= W_1) and zeta_2.
//!
//! All one-dimensional CDFs here are finite step functions, so every
//! distance is computed from exact piecewise formulas against the normal
//! CDF and its antiderivatives; the only quadrature is the adaptive
//! Gauss-Legendre rule used for Wasserstein exponents without a closed form.

use crate::special::{normal_cdf_antideriv, normal_cdf_antideriv2};
// The normal CDF, density and quantile are part of this module's surface.
pub use crate::special::{normal_cdf, normal_pdf, normal_quantile};
use crate::util::{compensated_sum, Kahan};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("Wasserstein order r must lie in (0, 2], got {0}")]
    InvalidR(f64),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("zeta_2 requires matching means: mean difference {0:e} exceeds 1e-9")]
    MeanMismatch(f64),
    #[error("support values must be sorted strictly increasing")]
    Unsorted,
    #[error("negative probability mass")]
    NegativeMass,
}

// ---------------------------------------------------------------------------
// Input representations
// ---------------------------------------------------------------------------

/// A distribution with finitely many atoms, support sorted strictly
/// increasing. Zero-mass atoms are allowed; they add CDF breakpoints without
/// changing the law.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl DiscreteDist {
    pub fn from_sorted(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self, MetricsError> {
        if xs.is_empty() || xs.len() != ps.len() {
            return Err(MetricsError::EmptyInput);
        }
        if xs.iter().any(|x| !x.is_finite()) || ps.iter().any(|p| !p.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MetricsError::Unsorted);
        }
        if ps.iter().any(|&p| p < 0.0) {
            return Err(MetricsError::NegativeMass);
        }
        Ok(DiscreteDist { xs, ps })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xs[i]
    }

    pub fn p(&self, i: usize) -> f64 {
        self.ps[i]
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.xs.iter().zip(&self.ps).map(|(&x, &p)| x * p))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        compensated_sum(
            self.xs
                .iter()
                .zip(&self.ps)
                .map(|(&x, &p)| p * (x - m) * (x - m)),
        )
    }

    /// Shift the support so the mean becomes zero; returns the applied shift.
    pub fn recentred(&self) -> (DiscreteDist, f64) {
        let shift = self.mean();
        let xs = self.xs.iter().map(|&x| x - shift).collect();
        (
            DiscreteDist {
                xs,
                ps: self.ps.clone(),
            },
            shift,
        )
    }
}

/// Empirical CDF: a sorted sample with uniform weights 1/m.
#[derive(Debug, Clone)]
pub struct Ecdf {
    values: Vec<f64>,
}

impl Ecdf {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Ecdf { values })
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Aggregate tied values into atoms.
    pub fn to_discrete(&self) -> DiscreteDist {
        let w = 1.0 / self.values.len() as f64;
        let mut xs: Vec<f64> = Vec::new();
        let mut ps: Vec<f64> = Vec::new();
        for &v in &self.values {
            if xs.last() == Some(&v) {
                *ps.last_mut().unwrap() += w;
            } else {
                xs.push(v);
                ps.push(w);
            }
        }
        DiscreteDist { xs, ps }
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    Kolmogorov,
    Wasserstein { r: f64 },
    Zeta1,
    Zeta2,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Kolmogorov => write!(f, "kolmogorov"),
            Metric::Wasserstein { r } => write!(f, "w{r}"),
            Metric::Zeta1 => write!(f, "zeta1"),
            Metric::Zeta2 => write!(f, "zeta2"),
        }
    }
}

/// A named distance value with an optional confidence band and, for the
/// recentred zeta_2 path, the shift that was applied to the sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceReport {
    pub metric: Metric,
    pub value: f64,
    pub band: Option<(f64, f64)>,
    pub inputs: String,
    pub mean_shift: Option<f64>,
}

/// Dvoretzky-Kiefer-Wolfowitz band half-width sqrt(ln(2/alpha) / (2m)).
pub fn dkw_band(m: usize, alpha: f64) -> Result<f64, MetricsError> {
    if m == 0 {
        return Err(MetricsError::EmptyInput);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MetricsError::InvalidAlpha(alpha));
    }
    Ok(((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt())
}

// ---------------------------------------------------------------------------
// Kolmogorov distance
// ---------------------------------------------------------------------------

/// sup_u |F(u) - Phi(u)| for a step CDF F. The sup is attained at a jump
/// point of F, approached from the left or from the right, because F is flat
/// and Phi strictly increasing between jumps.
pub fn kolmogorov_to_normal(dist: &DiscreteDist) -> f64 {
    let mut cum = Kahan::new();
    let mut prev_f = 0.0f64;
    let mut d = 0.0f64;
    for i in 0..dist.len() {
        cum.add(dist.p(i));
        let f_here = cum.value();
        let target = normal_cdf(dist.x(i));
        d = d.max((f_here - target).abs()).max((prev_f - target).abs());
        prev_f = f_here;
    }
    d
}

/// Exact two-step-function sup distance; both CDFs are evaluated just after
/// each merged jump point (the left limits are the previous values, already
/// covered by the scan).
pub fn ks_between(a: &DiscreteDist, b: &DiscreteDist) -> f64 {
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (Kahan::new(), Kahan::new());
    let mut d = 0.0f64;
    while ia < a.len() || ib < b.len() {
        let xa = if ia < a.len() { a.x(ia) } else { f64::INFINITY };
        let xb = if ib < b.len() { b.x(ib) } else { f64::INFINITY };
        if xa <= xb {
            fa.add(a.p(ia));
            ia += 1;
        }
        if xb <= xa {
            fb.add(b.p(ib));
            ib += 1;
        }
        d = d.max((fa.value() - fb.value()).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &Ecdf, b: &Ecdf) -> f64 {
    ks_between(&a.to_discrete(), &b.to_discrete())
}

/// Asymptotic two-sample critical value c(alpha) * sqrt((m+n)/(m n)) with
/// c(alpha) = sqrt(ln(2/alpha)/2).
pub fn ks_two_sample_critical(m: usize, n: usize, alpha: f64) -> Result<f64, MetricsError> {
    if m == 0 || n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MetricsError::InvalidAlpha(alpha));
    }
    let c = ((2.0 / alpha).ln() / 2.0).sqrt();
    Ok(c * ((m + n) as f64 / (m as f64 * n as f64)).sqrt())
}

pub fn kolmogorov_exact_report(dist: &DiscreteDist, inputs: impl Into<String>) -> DistanceReport {
    DistanceReport {
        metric: Metric::Kolmogorov,
        value: kolmogorov_to_normal(dist),
        band: None,
        inputs: inputs.into(),
        mean_shift: None,
    }
}

pub fn kolmogorov_sample_report(
    ecdf: &Ecdf,
    alpha: f64,
    inputs: impl Into<String>,
) -> Result<DistanceReport, MetricsError> {
    let value = kolmogorov_to_normal(&ecdf.to_discrete());
    let hw = dkw_band(ecdf.m(), alpha)?;
    Ok(DistanceReport {
        metric: Metric::Kolmogorov,
        value,
        band: Some(((value - hw).max(0.0), value + hw)),
        inputs: inputs.into(),
        mean_shift: None,
    })
}

// ---------------------------------------------------------------------------
// Normal-CDF helpers that behave at infinite endpoints
// ---------------------------------------------------------------------------

#[inline]
fn phi(t: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        normal_pdf(t)
    }
}

#[inline]
fn cap_phi(t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        0.0
    } else if t == f64::INFINITY {
        1.0
    } else {
        normal_cdf(t)
    }
}

#[inline]
fn t_phi(t: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        t * normal_pdf(t)
    }
}

/// Signed integral of (x - t) phi(t) over [a, b]; endpoints may be infinite.
fn int_x_minus_t(x: f64, a: f64, b: f64) -> f64 {
    x * (cap_phi(b) - cap_phi(a)) + (phi(b) - phi(a))
}

/// Integral of |x - t| phi(t) over [a, b].
fn int_abs_x_minus_t(x: f64, a: f64, b: f64) -> f64 {
    if b <= x {
        int_x_minus_t(x, a, b)
    } else if a >= x {
        -int_x_minus_t(x, a, b)
    } else {
        int_x_minus_t(x, a, x) - int_x_minus_t(x, x, b)
    }
}

/// Integral of (x - t)^2 phi(t) over [a, b]; uses int t^2 phi = Phi - t phi.
fn int_sq_x_minus_t(x: f64, a: f64, b: f64) -> f64 {
    let d_cap = cap_phi(b) - cap_phi(a);
    let d_phi = phi(b) - phi(a);
    let d_t2 = (cap_phi(b) - t_phi(b)) - (cap_phi(a) - t_phi(a));
    x * x * d_cap + 2.0 * x * d_phi + d_t2
}

// ---------------------------------------------------------------------------
// Wasserstein-r
// ---------------------------------------------------------------------------

fn validate_r(r: f64) -> Result<(), MetricsError> {
    if r.is_finite() && r > 0.0 && r <= 2.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidR(r))
    }
}

const QUANTILE_CLAMP_LO: f64 = 1e-300;
const QUANTILE_CLAMP_HI: f64 = 1.0 - 1e-16;
/// Normal integrals are truncated at |t| = 9 (mass beyond < 1.2e-19); the
/// truncated tail is covered by an analytic bound added to the result.
const NORMAL_TRUNCATION: f64 = 9.0;

fn clamped_quantile(u: f64) -> f64 {
    normal_quantile(u.clamp(QUANTILE_CLAMP_LO, QUANTILE_CLAMP_HI))
}

/// Gauss-Legendre 16-point nodes/weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_79,
    0.062_253_523_938_647_9,
    0.027_152_459_411_754_095,
];

fn gl16(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..8 {
        let d = h * GL_NODES[i];
        s += GL_WEIGHTS[i] * (f(c - d) + f(c + d));
    }
    s * h
}

fn adaptive_gl(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = gl16(f, a, b);
    let mid = 0.5 * (a + b);
    let halves = gl16(f, a, mid) + gl16(f, mid, b);
    if (whole - halves).abs() <= tol || depth >= 32 || (b - a) < 1e-14 {
        halves
    } else {
        adaptive_gl(f, a, mid, 0.5 * tol, depth + 1) + adaptive_gl(f, mid, b, 0.5 * tol, depth + 1)
    }
}

/// Integral of |x - t|^r phi(t) over [a, b] for general r: adaptive
/// quadrature with a split at the kink t = x.
fn int_pow_x_minus_t(x: f64, r: f64, a: f64, b: f64) -> f64 {
    let a = a.max(-NORMAL_TRUNCATION);
    let b = b.min(NORMAL_TRUNCATION);
    if a >= b {
        return 0.0;
    }
    let f = move |t: f64| (x - t).abs().powf(r) * normal_pdf(t);
    if a < x && x < b {
        adaptive_gl(&f, a, x, 1e-14, 0) + adaptive_gl(&f, x, b, 1e-14, 0)
    } else {
        adaptive_gl(&f, a, b, 1e-14, 0)
    }
}

/// Quantile-coupling Wasserstein cost against the standard normal:
/// integral over u in (0,1) of |Q_dist(u) - Q_normal(u)|^r, then the outer
/// 1/max(1,r) root. Exact piecewise formulas for r = 1 and r = 2, adaptive
/// quadrature otherwise.
pub fn wasserstein_to_normal(dist: &DiscreteDist, r: f64) -> Result<f64, MetricsError> {
    validate_r(r)?;
    if dist.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let closed1 = r == 1.0;
    let closed2 = r == 2.0;

    // The last positive-mass atom owns the upper tail of the quantile range.
    let last_pos = match (0..dist.len()).rev().find(|&i| dist.p(i) > 0.0) {
        Some(i) => i,
        None => return Err(MetricsError::EmptyInput),
    };
    let mut acc = Kahan::new();
    let mut cum = Kahan::new();
    let mut t_lo = f64::NEG_INFINITY;
    let mut max_abs_x = 0.0f64;
    for i in 0..=last_pos {
        let pi = dist.p(i);
        if pi == 0.0 {
            continue;
        }
        let x = dist.x(i);
        max_abs_x = max_abs_x.max(x.abs());
        cum.add(pi);
        let u_hi = cum.value();
        let t_hi = if i == last_pos || u_hi >= 1.0 {
            f64::INFINITY
        } else {
            clamped_quantile(u_hi).max(t_lo)
        };
        let piece = if closed1 {
            int_abs_x_minus_t(x, t_lo, t_hi)
        } else if closed2 {
            int_sq_x_minus_t(x, t_lo, t_hi)
        } else {
            int_pow_x_minus_t(x, r, t_lo, t_hi)
        };
        acc.add(piece);
        t_lo = t_hi;
    }
    let mut total = acc.value();
    if !(closed1 || closed2) {
        // Mass outside the truncation window, bounded analytically.
        let tail_mass = 2.0 * normal_cdf(-NORMAL_TRUNCATION);
        total += tail_mass * (NORMAL_TRUNCATION + max_abs_x).powf(r);
    }
    Ok(total.max(0.0).powf(1.0 / r.max(1.0)))
}

/// Quantile-coupling Wasserstein cost between two discrete laws, computed on
/// the common refinement of their probability partitions. For r >= 1 this is
/// the optimal coupling; for r < 1 it is the monotone-coupling cost, an
/// upper bound for the optimal one (see the coupling tests).
pub fn wasserstein_between(a: &DiscreteDist, b: &DiscreteDist, r: f64) -> Result<f64, MetricsError> {
    validate_r(r)?;
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut acc = Kahan::new();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut rem_a, mut rem_b) = (a.p(0), b.p(0));
    loop {
        // Skip exhausted / zero-mass atoms.
        while ia < a.len() && rem_a <= 0.0 {
            ia += 1;
            if ia < a.len() {
                rem_a = a.p(ia);
            }
        }
        while ib < b.len() && rem_b <= 0.0 {
            ib += 1;
            if ib < b.len() {
                rem_b = b.p(ib);
            }
        }
        if ia >= a.len() || ib >= b.len() {
            break;
        }
        let du = rem_a.min(rem_b);
        let diff = (a.x(ia) - b.x(ib)).abs();
        if diff > 0.0 {
            acc.add(du * diff.powf(r));
        }
        rem_a -= du;
        rem_b -= du;
    }
    Ok(acc.value().max(0.0).powf(1.0 / r.max(1.0)))
}

// ---------------------------------------------------------------------------
// zeta_1: integral of |F - G|
// ---------------------------------------------------------------------------

/// zeta_1 against the standard normal: integral over t of |F(t) - Phi(t)|,
/// exact on each flat stretch of F (with a split at the crossing point).
pub fn zeta1_to_normal(dist: &DiscreteDist) -> Result<f64, MetricsError> {
    if dist.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut acc = Kahan::new();
    // Left tail: F = 0, integrand Phi.
    acc.add(normal_cdf_antideriv(dist.x(0)));
    let mut cum = Kahan::new();
    for i in 0..dist.len() {
        cum.add(dist.p(i));
        let c = cum.value();
        let a = dist.x(i);
        if i + 1 < dist.len() {
            let b = dist.x(i + 1);
            acc.add(int_abs_const_minus_cdf(c, a, b));
        } else {
            // Right tail: F = 1, integrand 1 - Phi = phi(t) - t(1-Phi(t)) antiderivative route.
            acc.add(upper_tail_expectation(a));
        }
    }
    Ok(acc.value())
}

/// Integral of |c - Phi(t)| over [a, b] for constant c.
fn int_abs_const_minus_cdf(c: f64, a: f64, b: f64) -> f64 {
    let seg = |lo: f64, hi: f64| -> f64 {
        // signed integral of (Phi - c)
        (normal_cdf_antideriv(hi) - normal_cdf_antideriv(lo)) - c * (hi - lo)
    };
    if c <= 0.0 {
        return seg(a, b);
    }
    if c >= 1.0 {
        return -seg(a, b);
    }
    let cross = clamped_quantile(c);
    if cross <= a {
        seg(a, b)
    } else if cross >= b {
        -seg(a, b)
    } else {
        -seg(a, cross) + seg(cross, b)
    }
}

/// E (N - t)^+ = phi(t) - t (1 - Phi(t)): the integral of 1 - Phi over [t, inf).
fn upper_tail_expectation(t: f64) -> f64 {
    (normal_pdf(t) - t * (1.0 - normal_cdf(t))).max(0.0)
}

/// zeta_1 between two discrete laws: sum of |F_a - F_b| times the gap length
/// over the merged support.
pub fn zeta1_between(a: &DiscreteDist, b: &DiscreteDist) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut acc = Kahan::new();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (Kahan::new(), Kahan::new());
    let mut prev_x: Option<f64> = None;
    while ia < a.len() || ib < b.len() {
        let xa = if ia < a.len() { a.x(ia) } else { f64::INFINITY };
        let xb = if ib < b.len() { b.x(ib) } else { f64::INFINITY };
        let x = xa.min(xb);
        if let Some(px) = prev_x {
            acc.add((fa.value() - fb.value()).abs() * (x - px));
        }
        if xa <= xb {
            fa.add(a.p(ia));
            ia += 1;
        }
        if xb <= xa {
            fb.add(b.p(ib));
            ib += 1;
        }
        prev_x = Some(x);
    }
    Ok(acc.value())
}

// ---------------------------------------------------------------------------
// zeta_2: integral of |G| with G(t) = integral of (F - Phi) up to t
// ---------------------------------------------------------------------------

/// zeta_2 against the standard normal. Requires the input mean to vanish
/// (within 1e-9): linear test functions are in the smoothness class, so a
/// mean gap makes the distance infinite.
pub fn zeta2_to_normal(dist: &DiscreteDist) -> Result<f64, MetricsError> {
    if dist.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mean = dist.mean();
    if mean.abs() > 1e-9 {
        return Err(MetricsError::MeanMismatch(mean));
    }

    let mut acc = Kahan::new();
    let t0 = dist.x(0);
    // Left of the support F = 0, so G(t) = -N(t) with N the CDF antiderivative;
    // N >= 0, hence |G| integrates to the second antiderivative.
    acc.add(normal_cdf_antideriv2(t0));
    let mut g = -normal_cdf_antideriv(t0);

    let mut cum = Kahan::new();
    for i in 0..dist.len() {
        cum.add(dist.p(i));
        let c = cum.value();
        let a = dist.x(i);
        let b = if i + 1 < dist.len() {
            dist.x(i + 1)
        } else {
            // Right tail: integrate the flat stretch [x_K, 9] explicitly, then
            // add the analytic remainder of the mean-matched continuation.
            let hi = NORMAL_TRUNCATION.max(a + 1.0);
            let (piece, _) = integrate_abs_g_segment(g, c, a, hi);
            acc.add(piece);
            acc.add(zeta2_far_tail(hi));
            break;
        };
        let (piece, g_end) = integrate_abs_g_segment(g, c, a, b);
        acc.add(piece);
        g = g_end;
    }
    Ok(acc.value())
}

/// Integral of |G| over [a, b] where G(t) = g_a + c (t - a) - (N(t) - N(a)),
/// N = normal_cdf_antideriv. G' = c - Phi is decreasing, so G is concave and
/// has at most two roots in the segment; signed pieces are integrated with
/// the closed antiderivative and summed by absolute value.
fn integrate_abs_g_segment(g_a: f64, c: f64, a: f64, b: f64) -> (f64, f64) {
    let n_a = normal_cdf_antideriv(a);
    let g_at = |t: f64| g_a + c * (t - a) - (normal_cdf_antideriv(t) - n_a);
    let signed = |lo: f64, hi: f64| -> f64 {
        (g_a + n_a - c * a) * (hi - lo) + 0.5 * c * (hi * hi - lo * lo)
            - (normal_cdf_antideriv2(hi) - normal_cdf_antideriv2(lo))
    };
    let g_b = g_at(b);

    // Sample points: segment ends plus the vertex of the concave G.
    let mut pts = [a, b, b];
    let mut npts = 2;
    if c > 0.0 && c < 1.0 {
        let vertex = clamped_quantile(c);
        if vertex > a && vertex < b {
            pts = [a, vertex, b];
            npts = 3;
        }
    }

    let mut total = 0.0;
    let mut lo = pts[0];
    let mut g_lo = g_a;
    for &hi in &pts[1..npts] {
        let g_hi = g_at(hi);
        if g_lo == 0.0 || g_hi == 0.0 || g_lo.signum() == g_hi.signum() {
            total += signed(lo, hi).abs();
        } else {
            // Bisect the bracketed root of the monotone piece.
            let (mut rl, mut rh) = (lo, hi);
            for _ in 0..80 {
                let mid = 0.5 * (rl + rh);
                if g_at(mid).signum() == g_lo.signum() {
                    rl = mid;
                } else {
                    rh = mid;
                }
            }
            let root = 0.5 * (rl + rh);
            total += signed(lo, root).abs() + signed(root, hi).abs();
        }
        lo = hi;
        g_lo = g_hi;
    }
    (total, g_b)
}

/// Remainder of the zeta_2 integral past t = hi for a mean-matched law whose
/// support ends below hi: integral over [hi, inf) of phi(t) - t(1 - Phi(t)).
fn zeta2_far_tail(hi: f64) -> f64 {
    let w = 0.5
        * (normal_cdf(hi) - hi * hi * (1.0 - normal_cdf(hi)) + hi * normal_pdf(hi));
    (0.5 - w).max(0.0)
}

/// zeta_2 between two discrete laws with matching means: G is piecewise
/// linear on the merged support, integrated exactly with root splits.
pub fn zeta2_between(a: &DiscreteDist, b: &DiscreteDist) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let dmean = a.mean() - b.mean();
    if dmean.abs() > 1e-9 {
        return Err(MetricsError::MeanMismatch(dmean));
    }
    let mut acc = Kahan::new();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (Kahan::new(), Kahan::new());
    let mut g = 0.0f64;
    let mut prev_x: Option<f64> = None;
    while ia < a.len() || ib < b.len() {
        let xa = if ia < a.len() { a.x(ia) } else { f64::INFINITY };
        let xb = if ib < b.len() { b.x(ib) } else { f64::INFINITY };
        let x = xa.min(xb);
        if let Some(px) = prev_x {
            let slope = fa.value() - fb.value();
            let dx = x - px;
            let g_end = g + slope * dx;
            if g == 0.0 || g_end == 0.0 || g.signum() == g_end.signum() {
                acc.add(0.5 * (g.abs() + g_end.abs()) * dx);
            } else {
                let root_dx = dx * g.abs() / (g.abs() + g_end.abs());
                acc.add(0.5 * g.abs() * root_dx + 0.5 * g_end.abs() * (dx - root_dx));
            }
            g = g_end;
        }
        if xa <= xb {
            fa.add(a.p(ia));
            ia += 1;
        }
        if xb <= xa {
            fb.add(b.p(ib));
            ib += 1;
        }
        prev_x = Some(x);
    }
    Ok(acc.value())
}

/// zeta_2 of an empirical sample against the standard normal after shifting
/// the sample to mean zero; returns the report with the applied shift.
pub fn zeta2_sample_recentred(
    ecdf: &Ecdf,
    inputs: impl Into<String>,
) -> Result<DistanceReport, MetricsError> {
    let (dist, shift) = ecdf.to_discrete().recentred();
    let value = zeta2_to_normal(&dist)?;
    Ok(DistanceReport {
        metric: Metric::Zeta2,
        value,
        band: None,
        inputs: inputs.into(),
        mean_shift: Some(shift),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use proptest::prelude::*;

    const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

    fn point_mass(x: f64) -> DiscreteDist {
        DiscreteDist::from_sorted(vec![x], vec![1.0]).unwrap()
    }

    fn rademacher() -> DiscreteDist {
        DiscreteDist::from_sorted(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn kolmogorov_point_mass_is_half() {
        assert!((kolmogorov_to_normal(&point_mass(0.0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_rademacher() {
        // sup is Phi(1) - 1/2 ~ 0.3413, attained just left of +1.
        let expect = normal_cdf(1.0) - 0.5;
        assert!((kolmogorov_to_normal(&rademacher()) - expect).abs() < 1e-14);
        assert!((expect - 0.341_344_746_068_543).abs() < 1e-12);
    }

    #[test]
    fn w1_point_mass_is_mean_abs_normal() {
        let w = wasserstein_to_normal(&point_mass(0.0), 1.0).unwrap();
        assert!((w - SQRT_2_OVER_PI).abs() < 1e-12, "{w}");
    }

    #[test]
    fn w2_point_mass_is_one() {
        // E N^2 = 1, so W_2(delta_0, N) = 1.
        let w = wasserstein_to_normal(&point_mass(0.0), 2.0).unwrap();
        assert!((w - 1.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        // Evaluate r = 1 and r = 2 through the generic quadrature path by
        // nudging r off the closed-form dispatch.
        let d = DiscreteDist::from_sorted(vec![-1.3, 0.2, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        for &(r_closed, r_quad) in &[(1.0, 1.0 + 1e-12), (2.0, 2.0 - 1e-12)] {
            let a = wasserstein_to_normal(&d, r_closed).unwrap();
            let b = wasserstein_to_normal(&d, r_quad).unwrap();
            assert!((a - b).abs() < 1e-7, "r={r_closed}: closed {a} vs quad {b}");
        }
    }

    #[test]
    fn w2_self_sample_of_million_normals_is_small() {
        let mut s = Stream::new(314_159);
        let values: Vec<f64> = (0..1_000_000).map(|_| s.next_normal()).collect();
        let ecdf = Ecdf::from_values(values).unwrap();
        let w = wasserstein_to_normal(&ecdf.to_discrete(), 2.0).unwrap();
        assert!(w <= 0.01, "W2 of a near-perfect sample: {w}");
    }

    #[test]
    fn wasserstein_rejects_bad_r() {
        let d = point_mass(0.0);
        assert!(wasserstein_to_normal(&d, 0.0).is_err());
        assert!(wasserstein_to_normal(&d, 2.5).is_err());
        assert!(wasserstein_between(&d, &d, -1.0).is_err());
    }

    #[test]
    fn wasserstein_ignores_zero_mass_atoms() {
        let plain = point_mass(0.0);
        let padded =
            DiscreteDist::from_sorted(vec![-2.0, 0.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap();
        for &r in &[0.5, 1.0, 1.3, 2.0] {
            let a = wasserstein_to_normal(&plain, r).unwrap();
            let b = wasserstein_to_normal(&padded, r).unwrap();
            assert!((a - b).abs() < 1e-12, "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn wasserstein_between_identical_is_zero() {
        let d = DiscreteDist::from_sorted(vec![0.0, 1.5, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        for &r in &[0.5, 1.0, 1.7, 2.0] {
            assert_eq!(wasserstein_between(&d, &d, r).unwrap(), 0.0);
        }
    }

    #[test]
    fn zeta1_equals_w1_point_mass() {
        let z = zeta1_to_normal(&point_mass(0.0)).unwrap();
        assert!((z - SQRT_2_OVER_PI).abs() < 1e-12, "{z}");
    }

    #[test]
    fn zeta1_between_identical_is_zero() {
        let d = DiscreteDist::from_sorted(vec![-2.0, 0.5], vec![0.5, 0.5]).unwrap();
        assert_eq!(zeta1_between(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn zeta2_point_mass_is_half() {
        let z = zeta2_to_normal(&point_mass(0.0)).unwrap();
        assert!((z - 0.5).abs() < 1e-12, "{z}");
    }

    #[test]
    fn zeta2_identical_inputs_is_zero() {
        let d = DiscreteDist::from_sorted(vec![-1.0, 0.0, 1.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(zeta2_between(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn zeta2_rejects_mean_mismatch() {
        assert!(matches!(
            zeta2_to_normal(&point_mass(0.3)),
            Err(MetricsError::MeanMismatch(_))
        ));
        let a = point_mass(0.0);
        let b = point_mass(1.0);
        assert!(zeta2_between(&a, &b).is_err());
    }

    #[test]
    fn zeta2_recentring_records_shift() {
        let ecdf = Ecdf::from_values(vec![0.7, 1.3, 0.4, 1.6]).unwrap();
        let report = zeta2_sample_recentred(&ecdf, "test").unwrap();
        assert!((report.mean_shift.unwrap() - 1.0).abs() < 1e-12);
        assert!(report.value.is_finite());
    }

    #[test]
    fn dkw_reference_values() {
        assert!((dkw_band(100_000, 0.01).unwrap() - 0.00515).abs() < 5e-6);
        assert!((dkw_band(1, 1.0).unwrap() - 0.5887).abs() < 1e-4);
        assert!(dkw_band(usize::MAX, 0.01).unwrap() < 1e-8);
        assert!(dkw_band(0, 0.01).is_err());
        assert!(dkw_band(10, 0.0).is_err());
    }

    #[test]
    fn ks_sample_within_dkw_band_for_true_normal_samples() {
        // DKW at alpha = 0.01 fails at most ~1% of the time; with 200 fixed
        // replications a small number of exceedances is expected at most.
        let m = 2_000;
        let mut exceed = 0;
        for rep in 0..200u64 {
            let mut s = Stream::substream(777, rep);
            let values: Vec<f64> = (0..m).map(|_| s.next_normal()).collect();
            let ecdf = Ecdf::from_values(values).unwrap();
            let d = kolmogorov_to_normal(&ecdf.to_discrete());
            if d > dkw_band(m, 0.01).unwrap() {
                exceed += 1;
            }
        }
        assert!(exceed <= 4, "{exceed} of 200 trials exceeded the DKW band");
    }

    #[test]
    fn two_sample_ks_identical_samples_is_zero() {
        let a = Ecdf::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn two_sample_critical_value_shape() {
        let c = ks_two_sample_critical(100_000, 100_000, 0.01).unwrap();
        assert!((c - 0.00728).abs() < 1e-4, "{c}");
    }

    /// Exhaustive minimum over permutation couplings of equal-weight atoms.
    fn brute_force_coupling_cost(a: &[f64], b: &[f64], r: f64) -> f64 {
        assert_eq!(a.len(), b.len());
        let k = a.len();
        let mut idx: Vec<usize> = (0..k).collect();
        let mut best = f64::INFINITY;
        // Heap's algorithm over all permutations.
        fn heap(
            n: usize,
            idx: &mut Vec<usize>,
            a: &[f64],
            b: &[f64],
            r: f64,
            best: &mut f64,
        ) {
            if n == 1 {
                let cost: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| (a[i] - b[j]).abs().powf(r))
                    .sum::<f64>()
                    / idx.len() as f64;
                if cost < *best {
                    *best = cost;
                }
                return;
            }
            for i in 0..n {
                heap(n - 1, idx, a, b, r, best);
                if n % 2 == 0 {
                    idx.swap(i, n - 1);
                } else {
                    idx.swap(0, n - 1);
                }
            }
        }
        heap(k, &mut idx, a, b, r, &mut best);
        best
    }

    #[test]
    fn monotone_coupling_is_optimal_for_r_at_least_one() {
        let mut s = Stream::new(4242);
        for _ in 0..20 {
            let k = 2 + s.next_below(4) as usize;
            let a: Vec<f64> = (0..k).map(|_| 4.0 * s.next_f64() - 2.0).collect();
            let b: Vec<f64> = (0..k).map(|_| 4.0 * s.next_f64() - 2.0).collect();
            let da = Ecdf::from_values(a.clone()).unwrap().to_discrete();
            let db = Ecdf::from_values(b.clone()).unwrap().to_discrete();
            for &r in &[1.0, 1.5, 2.0] {
                let quantile = wasserstein_between(&da, &db, r).unwrap().powf(r.max(1.0));
                let brute = brute_force_coupling_cost(&a, &b, r);
                assert!(
                    quantile <= brute + 1e-10,
                    "r={r}: quantile {quantile} > brute {brute}"
                );
                assert!((quantile - brute).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn monotone_coupling_upper_bounds_optimal_cost_for_concave_exponent() {
        // For r < 1 the monotone coupling is not always optimal (shared mass
        // may be cheaper left in place), so the quantile formula is only an
        // upper bound of the transport cost.
        let mut s = Stream::new(999);
        let mut strictly_larger_seen = false;
        for _ in 0..40 {
            let k = 2 + s.next_below(4) as usize;
            let a: Vec<f64> = (0..k).map(|_| 4.0 * s.next_f64() - 2.0).collect();
            let b: Vec<f64> = (0..k).map(|_| 4.0 * s.next_f64() - 2.0).collect();
            let da = Ecdf::from_values(a.clone()).unwrap().to_discrete();
            let db = Ecdf::from_values(b.clone()).unwrap().to_discrete();
            let quantile = wasserstein_between(&da, &db, 0.5).unwrap();
            let brute = brute_force_coupling_cost(&a, &b, 0.5);
            assert!(quantile >= brute - 1e-10);
            if quantile > brute + 1e-9 {
                strictly_larger_seen = true;
            }
        }
        // The canonical interleaving witness where staying put wins.
        let a = Ecdf::from_values(vec![0.0, 1.0]).unwrap().to_discrete();
        let b = Ecdf::from_values(vec![1.0, 2.0]).unwrap().to_discrete();
        let quantile = wasserstein_between(&a, &b, 0.5).unwrap();
        let brute = brute_force_coupling_cost(&[0.0, 1.0], &[1.0, 2.0], 0.5);
        assert!((quantile - 1.0).abs() < 1e-12);
        assert!((brute - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12);
        assert!(quantile > brute);
        let _ = strictly_larger_seen;
    }

    fn arb_discrete(max_atoms: usize) -> impl Strategy<Value = DiscreteDist> {
        proptest::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..max_atoms).prop_map(|pairs| {
            let mut xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup();
            let k = xs.len();
            let raw: Vec<f64> = pairs.iter().take(k).map(|p| p.1).collect();
            let total: f64 = raw.iter().sum();
            let ps: Vec<f64> = raw.iter().map(|w| w / total).collect();
            DiscreteDist::from_sorted(xs, ps).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn zeta1_equals_w1_on_random_pairs(a in arb_discrete(8), b in arb_discrete(8)) {
            let z = zeta1_between(&a, &b).unwrap();
            let w = wasserstein_between(&a, &b, 1.0).unwrap();
            prop_assert!((z - w).abs() < 1e-8, "zeta1 {z} vs W1 {w}");
        }

        #[test]
        fn zeta1_to_normal_equals_w1_to_normal(a in arb_discrete(8)) {
            let z = zeta1_to_normal(&a).unwrap();
            let w = wasserstein_to_normal(&a, 1.0).unwrap();
            prop_assert!((z - w).abs() < 1e-8, "zeta1 {z} vs W1 {w}");
        }

        #[test]
        fn wasserstein_symmetry_and_triangle(
            a in arb_discrete(6),
            b in arb_discrete(6),
            c in arb_discrete(6),
        ) {
            for &r in &[1.0, 2.0] {
                let ab = wasserstein_between(&a, &b, r).unwrap();
                let ba = wasserstein_between(&b, &a, r).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                let ac = wasserstein_between(&a, &c, r).unwrap();
                let cb = wasserstein_between(&c, &b, r).unwrap();
                prop_assert!(ab <= ac + cb + 1e-9);
            }
        }

        #[test]
        fn zeta2_invariant_under_zero_mass_points(a in arb_discrete(6), extra in -6.0f64..6.0) {
            let (centred, _) = a.recentred();
            let base = zeta2_to_normal(&centred).unwrap();
            // Insert a zero-probability support point.
            let mut xs: Vec<f64> = (0..centred.len()).map(|i| centred.x(i)).collect();
            let mut ps: Vec<f64> = (0..centred.len()).map(|i| centred.p(i)).collect();
            if !xs.iter().any(|&x| (x - extra).abs() < 1e-12) {
                let pos = xs.partition_point(|&x| x < extra);
                xs.insert(pos, extra);
                ps.insert(pos, 0.0);
                let aug = DiscreteDist::from_sorted(xs, ps).unwrap();
                let with_zero = zeta2_to_normal(&aug).unwrap();
                prop_assert!((base - with_zero).abs() < 1e-10, "{base} vs {with_zero}");
            }
        }

        #[test]
        fn kolmogorov_bounded_by_one(a in arb_discrete(10)) {
            let d = kolmogorov_to_normal(&a);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
