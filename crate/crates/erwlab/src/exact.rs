//! Deterministic oracle layer: coefficient sequences, exact moment
//! recursions, martingale variance, and the exact lattice law of the walk
//! position by dynamic programming.
//!
//! Conventions. The walk position after n steps is T_n with |T_n| <= n and
//! T_n = n (mod 2). The deterministic sequences are
//!
//!   gamma_k = 1 + (2p-1)/k,
//!   a_1 = 1,  a_{k+1} = a_k / gamma_k  (equivalently Gamma(n)Gamma(2p)/Gamma(n+2p-1)),
//!   v_n = sum_{i<=n} a_i^2,
//!
//! and M_n = a_n T_n - (2q-1) is a mean-zero martingale. a_n is held in log
//! space (it decays like n^{1-2p}, which under/overflows a plain product long
//! before n = 1e6) and v_n is accumulated with compensated summation.

use crate::metrics::DiscreteDist;
use crate::special::ln_gamma;
use crate::util::{compensated_sum, Kahan};
use thiserror::Error;

/// Largest n accepted by the O(n^2) dynamic program.
pub const DP_BUDGET: usize = 30_000;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("memory parameter p must lie in (0, 1], got {0}")]
    InvalidP(f64),
    #[error("first-step probability q must lie in (0, 1], got {0}")]
    InvalidQ(f64),
    #[error("n must be at least 1")]
    EmptyRange,
    #[error("dynamic program budget exceeded: n = {n}, budget {budget}")]
    DpBudget { n: usize, budget: usize },
    #[error("index {n} outside table range 1..={n_max}")]
    IndexOutOfRange { n: usize, n_max: usize },
    #[error("state T = {t_prev} invalid before step {k}: need |T| <= k-1 and T = k-1 (mod 2)")]
    InvalidState { t_prev: i64, k: usize },
    #[error("coefficient table was built for p = {built}, operation asked for p = {asked}")]
    MismatchedP { built: f64, asked: f64 },
}

pub(crate) fn validate_p(p: f64) -> Result<(), ExactError> {
    if p.is_finite() && p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(ExactError::InvalidP(p))
    }
}

pub(crate) fn validate_q(q: f64) -> Result<(), ExactError> {
    if q.is_finite() && q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(ExactError::InvalidQ(q))
    }
}

// ---------------------------------------------------------------------------
// Coefficient sequences
// ---------------------------------------------------------------------------

/// The sequences gamma_k, a_k (in log space) and v_k up to a fixed n_max.
#[derive(Debug, Clone)]
pub struct Coeffs {
    p: f64,
    gamma: Vec<f64>,
    log_a: Vec<f64>,
    v: Vec<f64>,
}

impl Coeffs {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_max(&self) -> usize {
        self.log_a.len()
    }

    /// gamma_k for k in 1..=n_max.
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma[k - 1]
    }

    /// a_n for n in 1..=n_max.
    pub fn a(&self, n: usize) -> f64 {
        self.log_a[n - 1].exp()
    }

    pub fn log_a(&self, n: usize) -> f64 {
        self.log_a[n - 1]
    }

    /// v_n for n in 1..=n_max.
    pub fn v(&self, n: usize) -> f64 {
        self.v[n - 1]
    }

    pub fn check_covers(&self, n: usize) -> Result<(), ExactError> {
        if n >= 1 && n <= self.n_max() {
            Ok(())
        } else {
            Err(ExactError::IndexOutOfRange {
                n,
                n_max: self.n_max(),
            })
        }
    }
}

pub fn build_coeffs(p: f64, n_max: usize) -> Result<Coeffs, ExactError> {
    validate_p(p)?;
    if n_max < 1 {
        return Err(ExactError::EmptyRange);
    }
    let lambda = 2.0 * p - 1.0;
    let mut gamma = Vec::with_capacity(n_max);
    let mut log_a = Vec::with_capacity(n_max);
    let mut v = Vec::with_capacity(n_max);

    let mut log_acc = Kahan::new();
    let mut v_acc = Kahan::new();
    for k in 1..=n_max {
        let g = 1.0 + lambda / k as f64;
        gamma.push(g);
        let la = log_acc.value();
        log_a.push(la);
        let a = la.exp();
        v_acc.add(a * a);
        v.push(v_acc.value());
        // a_{k+1} = a_k / gamma_k
        log_acc.add(-g.ln());
    }
    Ok(Coeffs { p, gamma, log_a, v })
}

/// a_n by the closed Gamma-function form, evaluated in log space.
/// Agreement with the product form is a correctness check, not a tolerance
/// knob: both express the same exact quantity.
pub fn gamma_form_a(p: f64, n: usize) -> f64 {
    let n = n as f64;
    (ln_gamma(n) + ln_gamma(2.0 * p) - ln_gamma(n + 2.0 * p - 1.0)).exp()
}

/// Limits of the normalizing sequences at n = n_max of the table:
/// `a_ratio` -> 1 for every p; `v_ratio` -> 1 for p < 3/4 (power law) and for
/// p = 3/4 (log law). For p > 3/4 the v_n limit is finite, not a growth law,
/// so no ratio is reported.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticReport {
    pub a_ratio: f64,
    pub v_ratio: Option<f64>,
}

pub fn asymptotic_check(coeffs: &Coeffs) -> AsymptoticReport {
    let p = coeffs.p;
    let n = coeffs.n_max();
    let nf = n as f64;
    let a_ratio = (coeffs.log_a(n) + (2.0 * p - 1.0) * nf.ln() - ln_gamma(2.0 * p)).exp();
    let v_ratio = if p < 0.75 {
        // v_n / (n^(3-4p) * Gamma(2p)^2 / (3-4p))
        let log_target = (3.0 - 4.0 * p) * nf.ln() + 2.0 * ln_gamma(2.0 * p)
            - (3.0 - 4.0 * p).ln();
        Some((coeffs.v(n).ln() - log_target).exp())
    } else if p == 0.75 {
        Some(coeffs.v(n) / (std::f64::consts::FRAC_PI_4 * nf.ln()))
    } else {
        None
    };
    AsymptoticReport { a_ratio, v_ratio }
}

// ---------------------------------------------------------------------------
// Exact lattice distribution
// ---------------------------------------------------------------------------

/// Exact probability mass of T_n on the lattice {-n, -n+2, ..., n}.
/// Entry i corresponds to the lattice point 2i - n, so only points of the
/// correct parity are representable at all.
#[derive(Debug, Clone)]
pub struct LatticeDist {
    n: usize,
    mass: Vec<f64>,
}

impl LatticeDist {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Lattice point of entry i.
    pub fn point(&self, i: usize) -> i64 {
        2 * i as i64 - self.n as i64
    }

    /// Probability of T_n = t; zero off the lattice.
    pub fn prob(&self, t: i64) -> f64 {
        let shifted = t + self.n as i64;
        if shifted < 0 || shifted % 2 != 0 {
            return 0.0;
        }
        let i = (shifted / 2) as usize;
        if i < self.mass.len() {
            self.mass[i]
        } else {
            0.0
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| (self.point(i), m))
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.mass.iter().copied())
    }

    /// E T_n^order.
    pub fn moment(&self, order: u32) -> f64 {
        compensated_sum(
            self.points()
                .map(|(t, m)| m * (t as f64).powi(order as i32)),
        )
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        compensated_sum(self.points().map(|(t, mass)| {
            let d = t as f64 - m;
            mass * d * d
        }))
    }

    /// Pushforward through a strictly increasing map of the lattice point.
    /// Zero-mass points are dropped.
    pub fn map_to_discrete(&self, f: impl Fn(f64) -> f64) -> DiscreteDist {
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for (t, m) in self.points() {
            if m > 0.0 {
                xs.push(f(t as f64));
                ps.push(m);
            }
        }
        DiscreteDist::from_sorted(xs, ps).expect("increasing map of a lattice law")
    }

    pub fn to_discrete(&self) -> DiscreteDist {
        self.map_to_discrete(|t| t)
    }
}

/// Exact law of T_n by forward dynamic programming over the lattice.
/// From state t at step k the walk moves to t+1 with probability
/// (1 + (2p-1) t / k) / 2, the one-step law implied by
/// E[T_{k+1} | F_k] = gamma_k T_k.
pub fn dp_distribution(p: f64, q: f64, n: usize) -> Result<LatticeDist, ExactError> {
    let mut sweep = dp_distribution_sweep(p, q, &[n])?;
    Ok(sweep.pop().expect("one checkpoint"))
}

/// One DP sweep to max(checkpoints), snapshotting the law at each requested
/// level. Checkpoints must be nonempty, sorted and deduplicated by the caller
/// or not; they are normalized here. Shares the O(n^2) work across a grid.
pub fn dp_distribution_sweep(
    p: f64,
    q: f64,
    checkpoints: &[usize],
) -> Result<Vec<LatticeDist>, ExactError> {
    validate_p(p)?;
    validate_q(q)?;
    let mut levels: Vec<usize> = checkpoints.to_vec();
    levels.sort_unstable();
    levels.dedup();
    if levels.is_empty() || levels[0] == 0 {
        return Err(ExactError::EmptyRange);
    }
    let n_top = *levels.last().unwrap();
    if n_top > DP_BUDGET {
        return Err(ExactError::DpBudget {
            n: n_top,
            budget: DP_BUDGET,
        });
    }

    let lambda = 2.0 * p - 1.0;
    let mut cur = vec![0.0f64; n_top + 1];
    let mut next = vec![0.0f64; n_top + 1];
    // Level 1: {-1: 1-q, +1: q}.
    cur[0] = 1.0 - q;
    cur[1] = q;

    let mut out = Vec::with_capacity(levels.len());
    let mut want = levels.iter().copied().peekable();
    for k in 1..=n_top {
        if want.peek() == Some(&k) {
            want.next();
            out.push(LatticeDist {
                n: k,
                mass: cur[..=k].to_vec(),
            });
        }
        if k == n_top {
            break;
        }
        let kf = k as f64;
        for slot in next[..=k + 1].iter_mut() {
            *slot = 0.0;
        }
        for i in 0..=k {
            let m = cur[i];
            if m == 0.0 {
                continue;
            }
            let t = (2 * i as i64 - k as i64) as f64;
            let up = 0.5 * (1.0 + lambda * t / kf);
            next[i + 1] += m * up;
            next[i] += m * (1.0 - up);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Moment recursions and martingale variance
// ---------------------------------------------------------------------------

/// Exact moments E T_k, E T_k^2, E T_k^3 from the one-step conditional
/// identities, the weighted quadratic functional
/// E zeta_k = sum_{j<k} a_{j+1}^2 E(T_j/j)^2, and Var(M_k).
#[derive(Debug, Clone)]
pub struct MomentTable {
    m1: Vec<f64>,
    m2: Vec<f64>,
    m3: Vec<f64>,
    e_zeta: Vec<f64>,
    var_m: Vec<f64>,
}

impl MomentTable {
    pub fn n_max(&self) -> usize {
        self.m1.len()
    }

    pub fn m1(&self, k: usize) -> f64 {
        self.m1[k - 1]
    }

    pub fn m2(&self, k: usize) -> f64 {
        self.m2[k - 1]
    }

    pub fn m3(&self, k: usize) -> f64 {
        self.m3[k - 1]
    }

    pub fn e_zeta(&self, k: usize) -> f64 {
        self.e_zeta[k - 1]
    }

    pub fn var_m(&self, k: usize) -> f64 {
        self.var_m[k - 1]
    }
}

/// Drives the recursions
///   E T_k     = gamma_{k-1} E T_{k-1}                      (E T_1 = 2q-1)
///   E T_k^2   = (2 gamma_{k-1} - 1) E T_{k-1}^2 + 1        (E T_1^2 = 1)
///   E T_k^3   = (3 gamma_{k-1} - 2) E T_{k-1}^3
///               + (gamma_{k-1} + 2) E T_{k-1}              (E T_1^3 = 2q-1)
/// and assembles Var(M_n) = v_n - (2q-1)^2 - (2p-1)^2 E zeta_n, which equals
/// a_n^2 E T_n^2 - (2q-1)^2 and is bounded by v_n.
pub fn moment_recursions(p: f64, q: f64, n_max: usize) -> Result<MomentTable, ExactError> {
    validate_p(p)?;
    validate_q(q)?;
    if n_max < 1 {
        return Err(ExactError::EmptyRange);
    }
    let coeffs = build_coeffs(p, n_max)?;
    let mu = 2.0 * q - 1.0;
    let lambda = 2.0 * p - 1.0;

    let mut m1 = Vec::with_capacity(n_max);
    let mut m2 = Vec::with_capacity(n_max);
    let mut m3 = Vec::with_capacity(n_max);
    let mut e_zeta = Vec::with_capacity(n_max);
    let mut var_m = Vec::with_capacity(n_max);

    m1.push(mu);
    m2.push(1.0);
    m3.push(mu);
    e_zeta.push(0.0);
    var_m.push(1.0 - mu * mu);

    let mut zeta_acc = Kahan::new();
    for k in 2..=n_max {
        let g = coeffs.gamma(k - 1);
        let prev1 = m1[k - 2];
        let prev2 = m2[k - 2];
        let prev3 = m3[k - 2];
        m1.push(g * prev1);
        m2.push((2.0 * g - 1.0) * prev2 + 1.0);
        m3.push((3.0 * g - 2.0) * prev3 + (g + 2.0) * prev1);
        let a_k = coeffs.a(k);
        let j = (k - 1) as f64;
        zeta_acc.add(a_k * a_k * prev2 / (j * j));
        let ez = zeta_acc.value();
        e_zeta.push(ez);
        var_m.push(coeffs.v(k) - mu * mu - lambda * lambda * ez);
    }

    Ok(MomentTable {
        m1,
        m2,
        m3,
        e_zeta,
        var_m,
    })
}

// ---------------------------------------------------------------------------
// Conditional third/fourth moments of the martingale difference
// ---------------------------------------------------------------------------

/// Conditional third and fourth moments of Delta M_k = M_k - M_{k-1} given
/// T_{k-1} = t_prev:
///
///   E[dM^3 | T] = 2 (2p-1) a_k^3 ( -T/(k-1) + (2p-1)^2 T^3/(k-1)^3 )
///   E[dM^4 | T] = a_k^4 + a_k^4 (2p-1)^2 ( 2 T^2/(k-1)^2 - 3 (2p-1)^2 T^4/(k-1)^4 )
///
/// with the first-step convention T_0/0 = 1.
pub fn conditional_dm34(
    p: f64,
    a_k: f64,
    t_prev: i64,
    k: usize,
) -> Result<(f64, f64), ExactError> {
    validate_p(p)?;
    if k == 0 {
        return Err(ExactError::EmptyRange);
    }
    let ratio = if k == 1 {
        1.0
    } else {
        let bound = (k - 1) as i64;
        if t_prev.abs() > bound || (t_prev - bound).rem_euclid(2) != 0 {
            return Err(ExactError::InvalidState { t_prev, k });
        }
        t_prev as f64 / bound as f64
    };
    let lambda = 2.0 * p - 1.0;
    let r2 = ratio * ratio;
    let a3 = a_k * a_k * a_k;
    let a4 = a3 * a_k;
    let third = 2.0 * lambda * a3 * (-ratio + lambda * lambda * r2 * ratio);
    let fourth = a4 + a4 * lambda * lambda * (2.0 * r2 - 3.0 * lambda * lambda * r2 * r2);
    Ok((third, fourth))
}

/// Conditional second moment of Delta M_k given T_{k-1} = t_prev:
/// a_k^2 (1 - (2p-1)^2 T^2/(k-1)^2), same first-step convention.
pub fn conditional_dm2(p: f64, a_k: f64, t_prev: i64, k: usize) -> Result<f64, ExactError> {
    validate_p(p)?;
    if k == 0 {
        return Err(ExactError::EmptyRange);
    }
    let ratio = if k == 1 {
        1.0
    } else {
        let bound = (k - 1) as i64;
        if t_prev.abs() > bound || (t_prev - bound).rem_euclid(2) != 0 {
            return Err(ExactError::InvalidState { t_prev, k });
        }
        t_prev as f64 / bound as f64
    };
    let lambda = 2.0 * p - 1.0;
    Ok(a_k * a_k * (1.0 - lambda * lambda * ratio * ratio))
}

// ---------------------------------------------------------------------------
// Exact law of the normalized statistic (sigma^2 = 0 case)
// ---------------------------------------------------------------------------

/// Pushforward of the exact lattice law through
/// t -> (a_n t - (2q-1)) / sqrt(v_n): the exact law of the normalized
/// position statistic when every step has size 1.
pub fn exact_statistic_dist(
    p: f64,
    q: f64,
    n: usize,
    coeffs: &Coeffs,
) -> Result<DiscreteDist, ExactError> {
    if coeffs.p() != p {
        return Err(ExactError::MismatchedP {
            built: coeffs.p(),
            asked: p,
        });
    }
    coeffs.check_covers(n)?;
    let dist = dp_distribution(p, q, n)?;
    Ok(statistic_pushforward(&dist, q, n, coeffs))
}

/// Same pushforward applied to an already-computed lattice law (used when a
/// DP sweep serves a whole grid of n values).
pub fn statistic_pushforward(
    dist: &LatticeDist,
    q: f64,
    n: usize,
    coeffs: &Coeffs,
) -> DiscreteDist {
    let a_n = coeffs.a(n);
    let root_v = coeffs.v(n).sqrt();
    let mu = 2.0 * q - 1.0;
    dist.map_to_discrete(|t| (a_n * t - mu) / root_v)
}
