//! Experiment drivers: convergence-rate fits against the theoretical bounds,
//! iterated-logarithm envelope scans, and superdiffusive-regime diagnostics.
//!
//! The theorems under test are upper bounds with unquantified constants, so
//! every rate check is slope-based: distances are computed on a geometric n
//! grid, log distance is regressed on log n, and the fitted slope is compared
//! with the dominant decay exponent of the bound under v_n ~ n^(3-4p)
//! (p < 3/4) or v_n ~ (pi/4) log n (p = 3/4).

use crate::exact::{
    build_coeffs, dp_distribution_sweep, statistic_pushforward, ExactError, DP_BUDGET,
};
use crate::metrics::{
    dkw_band, kolmogorov_to_normal, wasserstein_to_normal, zeta1_to_normal, zeta2_to_normal,
    Ecdf, Metric, MetricsError,
};
use crate::process::{
    geometric_checkpoints, lil_path_statistic, sample_statistic, simulate_collapsed,
    Normalization, ProcessError, Regime, WalkParams, LIL_BURN_IN,
};
use crate::rng::Stream;
use crate::util::{compensated_sum, mean, median};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::SQRT_2;
use thiserror::Error;

/// Distances this small are numerical noise and are excluded from fits.
pub const DISTANCE_FLOOR: f64 = 1e-12;
/// Monte Carlo distances are only trusted above 3 DKW half-widths.
pub const MC_FLOOR_MULTIPLE: f64 = 3.0;
const MC_ALPHA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no CLT rate exists for p = {0} > 3/4 (the normalized walk converges to a non-Gaussian limit)")]
    NoCltRate(f64),
    #[error("rho is required when the step variance is positive")]
    RhoRequired,
    #[error("rho = {rho} outside (0, {cap}] for {metric}")]
    RhoForMetric { rho: f64, metric: String, cap: f64 },
    #[error("E Z^(2+rho) is infinite at rho = {rho} for this step law")]
    MomentTooHeavy { rho: f64 },
    #[error("exact mode requires constant steps (sigma^2 = 0)")]
    ExactModeNeedsConstant,
    #[error("rate grid needs at least 4 points, got {0}")]
    GridTooSmall(usize),
    #[error("degenerate fit: only {usable} of {total} grid distances above the noise floor")]
    DegenerateFit { usable: usize, total: usize },
    #[error("superdiffusive diagnostic needs n >= 4, got {0}")]
    NTooSmall(u64),
    #[error("LIL scan applies to p <= 3/4, got p = {0}")]
    LilRegimeGuard(f64),
}

impl ExperimentError {
    /// Stable process exit code class: 2 config, 3 budget, 4 numerical floor.
    pub fn exit_class(&self) -> i32 {
        match self {
            ExperimentError::Exact(ExactError::DpBudget { .. }) => 3,
            ExperimentError::Process(ProcessError::Exact(ExactError::DpBudget { .. })) => 3,
            ExperimentError::DegenerateFit { .. } => 4,
            _ => 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Theoretical decay exponents
// ---------------------------------------------------------------------------

/// Dominant decay exponent of a theorem's bound, with the p = 3/4 case
/// flagged logarithmic (exponent zero, 1/v_n ~ 4/(pi log n)).
#[derive(Debug, Clone, Serialize)]
pub struct TheoryRate {
    pub exponent: f64,
    pub logarithmic: bool,
    pub rate_terms: String,
}

pub fn theory_exponent(
    p: f64,
    metric: Metric,
    rho: Option<f64>,
    sigma2_zero: bool,
) -> Result<TheoryRate, ExperimentError> {
    crate::exact::validate_p(p)?;
    if p > 0.75 {
        return Err(ExperimentError::NoCltRate(p));
    }
    let rho_checked = |cap: f64, name: &str| -> Result<f64, ExperimentError> {
        let rho = rho.ok_or(ExperimentError::RhoRequired)?;
        if rho > 0.0 && rho <= cap {
            Ok(rho)
        } else {
            Err(ExperimentError::RhoForMetric {
                rho,
                metric: name.to_string(),
                cap,
            })
        }
    };

    // Effective zeta order: W_r for r <= 1 coincides with zeta_r.
    let (n_exponent, v_power, rate_terms) = match metric {
        Metric::Kolmogorov => {
            if sigma2_zero {
                (0.5, 1.0, "n^{-1/2} + v_n^{-1}".to_string())
            } else {
                let rho = rho_checked(1.0, "kolmogorov")?;
                (rho / 2.0, 1.0, format!("n^{{-{rho}/2}} + v_n^{{-1}}"))
            }
        }
        Metric::Zeta1 | Metric::Zeta2 => {
            let r: f64 = if metric == Metric::Zeta1 { 1.0 } else { 2.0 };
            if sigma2_zero {
                (r / 2.0, 1.0, format!("n^{{-{r}/2}} + v_n^{{-1}}"))
            } else {
                let rho = rho_checked(1.0, "zeta")?;
                let e = r.min(rho) / 2.0;
                (e, 1.0, format!("n^{{-min({r},{rho})/2}} + v_n^{{-1}}"))
            }
        }
        Metric::Wasserstein { r } if r <= 1.0 => {
            // Kantorovich-Rubinstein: W_r = zeta_r here.
            if sigma2_zero {
                (r / 2.0, 1.0, format!("n^{{-{r}/2}} + v_n^{{-1}}"))
            } else {
                let rho = rho_checked(1.0, "wasserstein")?;
                let e = r.min(rho) / 2.0;
                (e, 1.0, format!("n^{{-min({r},{rho})/2}} + v_n^{{-1}}"))
            }
        }
        Metric::Wasserstein { r } => {
            if sigma2_zero {
                (0.5, 1.0 / r, format!("n^{{-1/2}} + v_n^{{-1/{r}}}"))
            } else {
                let rho = rho_checked(r, "wasserstein")?;
                (
                    rho / (2.0 * r),
                    1.0 / r,
                    format!("n^{{-{rho}/(2 {r})}} + v_n^{{-1/{r}}}"),
                )
            }
        }
    };

    if p == 0.75 {
        return Ok(TheoryRate {
            exponent: 0.0,
            logarithmic: true,
            rate_terms: format!("{rate_terms} with v_n ~ (pi/4) log n"),
        });
    }
    let v_exponent = (3.0 - 4.0 * p) * v_power;
    Ok(TheoryRate {
        exponent: n_exponent.min(v_exponent),
        logarithmic: false,
        rate_terms,
    })
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

/// Ordinary least squares of y on x: (slope, intercept, slope standard error).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let k = xs.len() as f64;
    let x_bar = mean(xs);
    let y_bar = mean(ys);
    let sxx = compensated_sum(xs.iter().map(|&x| (x - x_bar) * (x - x_bar)));
    let sxy = compensated_sum(
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| (x - x_bar) * (y - y_bar)),
    );
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let stderr = if xs.len() > 2 {
        let ss_res = compensated_sum(xs.iter().zip(ys).map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        }));
        (ss_res / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

// ---------------------------------------------------------------------------
// Rate fitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RateMode {
    Exact,
    MonteCarlo { m: u64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridPoint {
    pub n: u64,
    pub distance: f64,
    pub band: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub metric: Metric,
    pub p: f64,
    pub q: f64,
    pub sigma2: f64,
    pub mode: RateMode,
    pub theory: TheoryRate,
    /// Grid points that survived the noise floor, increasing in n.
    pub grid: Vec<GridPoint>,
    pub dropped: usize,
    /// Absent at p = 3/4, where the rate is logarithmic and a power-law fit
    /// is meaningless.
    pub fitted: Option<FitResult>,
}

fn metric_distance_exact(
    dist: &crate::metrics::DiscreteDist,
    metric: Metric,
) -> Result<f64, ExperimentError> {
    Ok(match metric {
        Metric::Kolmogorov => kolmogorov_to_normal(dist),
        Metric::Wasserstein { r } => wasserstein_to_normal(dist, r)?,
        Metric::Zeta1 => zeta1_to_normal(dist)?,
        Metric::Zeta2 => zeta2_to_normal(dist)?,
    })
}

fn metric_distance_sample(ecdf: &Ecdf, metric: Metric) -> Result<f64, ExperimentError> {
    Ok(match metric {
        Metric::Kolmogorov => kolmogorov_to_normal(&ecdf.to_discrete()),
        Metric::Wasserstein { r } => wasserstein_to_normal(&ecdf.to_discrete(), r)?,
        Metric::Zeta1 => zeta1_to_normal(&ecdf.to_discrete())?,
        // Raw empirical means are O(m^-1/2) noise; recentre before zeta_2.
        Metric::Zeta2 => zeta2_to_normal(&ecdf.to_discrete().recentred().0)?,
    })
}

/// Moment-finiteness guard for the rate comparison (orders above 1 appear
/// only through W_r, where rho may reach r).
fn moment_order_is_finite(law: &crate::process::StepLaw, order: f64) -> bool {
    match law {
        crate::process::StepLaw::Pareto { alpha, .. } => order < *alpha,
        _ => true,
    }
}

/// Distances to the standard normal on an n grid plus a log-log slope fit.
/// Exact mode pushes the DP lattice law through the normalization; Monte
/// Carlo mode samples the CLT statistic with m replicas per grid point.
pub fn rate_fit(
    params: &WalkParams,
    metric: Metric,
    n_grid: &[u64],
    mode: RateMode,
    master_seed: u64,
    rho: Option<f64>,
) -> Result<RateReport, ExperimentError> {
    let mut grid: Vec<u64> = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 4 {
        return Err(ExperimentError::GridTooSmall(grid.len()));
    }
    let sigma2 = params.step_law().sigma2();
    let sigma2_zero = sigma2 == 0.0;
    let theory = theory_exponent(params.p(), metric, rho, sigma2_zero)?;
    if let Some(rho) = rho {
        if !moment_order_is_finite(params.step_law(), 2.0 + rho) {
            return Err(ExperimentError::MomentTooHeavy { rho });
        }
    }

    let points: Vec<GridPoint> = match mode {
        RateMode::Exact => {
            if !sigma2_zero {
                return Err(ExperimentError::ExactModeNeedsConstant);
            }
            let top = *grid.last().unwrap() as usize;
            if top > DP_BUDGET {
                return Err(ExactError::DpBudget {
                    n: top,
                    budget: DP_BUDGET,
                }
                .into());
            }
            let levels: Vec<usize> = grid.iter().map(|&n| n as usize).collect();
            let coeffs = build_coeffs(params.p(), top)?;
            let sweep = dp_distribution_sweep(params.p(), params.q(), &levels)?;
            sweep
                .iter()
                .map(|lattice| {
                    let stat = statistic_pushforward(lattice, params.q(), lattice.n(), &coeffs);
                    let d = metric_distance_exact(&stat, metric)?;
                    Ok(GridPoint {
                        n: lattice.n() as u64,
                        distance: d,
                        band: None,
                    })
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?
        }
        RateMode::MonteCarlo { m } => grid
            .iter()
            .map(|&n| {
                let point_seed = Stream::substream(master_seed, n).next_u64();
                let sample =
                    sample_statistic(params, n, m, point_seed, Normalization::CltCentered)?;
                let ecdf = sample.ecdf();
                let d = metric_distance_sample(&ecdf, metric)?;
                let hw = dkw_band(m as usize, MC_ALPHA)?;
                Ok(GridPoint {
                    n,
                    distance: d,
                    band: Some(((d - hw).max(0.0), d + hw)),
                })
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?,
    };

    let floor = match mode {
        RateMode::Exact => DISTANCE_FLOOR,
        RateMode::MonteCarlo { m } => {
            DISTANCE_FLOOR.max(MC_FLOOR_MULTIPLE * dkw_band(m as usize, MC_ALPHA)?)
        }
    };
    let total = points.len();
    let usable: Vec<GridPoint> = points
        .into_iter()
        .filter(|gp| gp.distance > floor)
        .collect();
    if usable.len() < 4 {
        return Err(ExperimentError::DegenerateFit {
            usable: usable.len(),
            total,
        });
    }

    let fitted = if theory.logarithmic {
        None
    } else {
        let xs: Vec<f64> = usable.iter().map(|gp| (gp.n as f64).ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|gp| gp.distance.ln()).collect();
        let (slope, _icept, stderr) = linear_fit(&xs, &ys);
        Some(FitResult { slope, stderr })
    };

    Ok(RateReport {
        metric,
        p: params.p(),
        q: params.q(),
        sigma2,
        mode,
        theory,
        dropped: total - usable.len(),
        grid: usable,
        fitted,
    })
}

// ---------------------------------------------------------------------------
// Law of the iterated logarithm scan
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LilReport {
    pub regime: Regime,
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub n_max: u64,
    pub n_traj: u64,
    pub burn_in: u64,
    /// Almost-sure envelope for max_n |S_n| / sqrt(2 n log log n) below the
    /// critical point (1/sqrt(3-4p) + sigma), or 1 at p = 3/4 for the
    /// triple-log normalization.
    pub bound: f64,
    /// Per-trajectory maxima of the normalized statistic past burn-in,
    /// indexed by trajectory.
    pub maxima: Vec<f64>,
    pub exceed_fraction: f64,
    pub max_of_maxima: f64,
    pub median_of_maxima: f64,
}

/// Simulates n_traj collapsed trajectories on the geometric checkpoint grid
/// and reports, per trajectory, the maximum of |S_n|/sqrt(2 n log log n)
/// (p < 3/4) or |S_n|/sqrt(2 n log n logloglog n) (p = 3/4) past burn-in.
pub fn lil_scan(
    params: &WalkParams,
    n_max: u64,
    n_traj: u64,
    master_seed: u64,
    burn_in: u64,
) -> Result<LilReport, ExperimentError> {
    let regime = params.regime();
    if regime == Regime::Superdiffusive {
        return Err(ExperimentError::LilRegimeGuard(params.p()));
    }
    if n_max < LIL_BURN_IN || n_traj == 0 {
        return Err(ProcessError::EmptyWalk.into());
    }
    let burn_in = burn_in.max(LIL_BURN_IN);
    let checkpoints = geometric_checkpoints(n_max);

    let maxima: Vec<f64> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let seed = Stream::substream(master_seed, i).next_u64();
            let traj = simulate_collapsed(params, n_max, seed, &checkpoints)?;
            let path = lil_path_statistic(&traj, regime)?;
            let mut best = 0.0f64;
            for (n, value) in path {
                if n >= burn_in {
                    best = best.max(value / SQRT_2);
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let sigma = params.step_law().sigma2().sqrt();
    let bound = match regime {
        Regime::Diffusive => 1.0 / (3.0 - 4.0 * params.p()).sqrt() + sigma,
        Regime::Critical => 1.0,
        Regime::Superdiffusive => unreachable!(),
    };
    let exceed = maxima.iter().filter(|&&v| v > bound).count();
    Ok(LilReport {
        regime,
        p: params.p(),
        q: params.q(),
        sigma,
        n_max,
        n_traj,
        burn_in,
        bound,
        exceed_fraction: exceed as f64 / n_traj as f64,
        max_of_maxima: maxima.iter().cloned().fold(0.0, f64::max),
        median_of_maxima: median(&maxima),
        maxima,
    })
}

// ---------------------------------------------------------------------------
// Superdiffusive diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SuperdiffusiveReport {
    pub p: f64,
    pub q: f64,
    pub n: u64,
    pub m: u64,
    /// Sample of the limit proxy S_n / n^(2p-1): first two moments.
    pub l_mean: f64,
    pub l_sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// z-score of the excess kurtosis against the normal null (se ~ sqrt(24/m)).
    pub kurtosis_z: f64,
    /// Kolmogorov distance of the standardized sample to the standard normal
    /// (i.e. to the moment-matched normal before standardization).
    pub ks_to_normal: f64,
    /// 3 DKW half-widths at alpha = 0.01: the resolution floor of ks_to_normal.
    pub ks_floor: f64,
    /// Medians over replicas of |M_{2k} - M_k| at k = n/4 and k = n/2;
    /// a decreasing pair evidences the almost-sure convergence of M_n.
    pub martingale_increments: [(u64, f64); 2],
    /// Set when the sampled proxy is a point mass (p = q = 1 corner); the
    /// KS distance is then reported at its 0.5 floor.
    pub degenerate: bool,
}

pub fn superdiffusive_diagnostic(
    params: &WalkParams,
    n: u64,
    m: u64,
    master_seed: u64,
) -> Result<SuperdiffusiveReport, ExperimentError> {
    if params.regime() != Regime::Superdiffusive {
        return Err(ProcessError::RegimeMismatch {
            requested: Regime::Superdiffusive,
            actual: params.regime(),
            p: params.p(),
        }
        .into());
    }
    if n < 4 {
        return Err(ExperimentError::NTooSmall(n));
    }
    if m == 0 {
        return Err(ProcessError::NoReplicas.into());
    }

    let k1 = n / 4;
    let k2 = n / 2;
    let checkpoints = [k1, k2, n];
    let coeffs = build_coeffs(params.p(), n as usize)?;
    let mu = 2.0 * params.q() - 1.0;
    let scale = (n as f64).powf(2.0 * params.p() - 1.0);

    // Per replica: the limit proxy and the two martingale increments.
    let rows: Vec<(f64, f64, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let seed = Stream::substream(master_seed, i).next_u64();
            let traj = simulate_collapsed(params, n, seed, &checkpoints)?;
            let m_at = |k: u64| -> f64 {
                let cp = traj.checkpoint(k).expect("requested checkpoint");
                coeffs.a(k as usize) * cp.t as f64 - mu
            };
            let l = traj.checkpoint(n).expect("terminal checkpoint").s / scale;
            Ok((l, (m_at(k2) - m_at(k1)).abs(), (m_at(n) - m_at(k2)).abs()))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let ls: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let inc1: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let inc2: Vec<f64> = rows.iter().map(|r| r.2).collect();

    let l_mean = mean(&ls);
    let mf = m as f64;
    let m2 = compensated_sum(ls.iter().map(|&x| (x - l_mean).powi(2))) / mf;
    let m3 = compensated_sum(ls.iter().map(|&x| (x - l_mean).powi(3))) / mf;
    let m4 = compensated_sum(ls.iter().map(|&x| (x - l_mean).powi(4))) / mf;
    let l_sd = m2.sqrt();

    let degenerate = l_sd == 0.0;
    let (skewness, excess_kurtosis, kurtosis_z, ks) = if degenerate {
        (0.0, 0.0, 0.0, 0.5)
    } else {
        let g1 = m3 / m2.powf(1.5);
        let g2 = m4 / (m2 * m2) - 3.0;
        let z = g2 / (24.0 / mf).sqrt();
        let standardized: Vec<f64> = ls.iter().map(|&x| (x - l_mean) / l_sd).collect();
        let ecdf = Ecdf::from_values(standardized)?;
        (g1, g2, z, kolmogorov_to_normal(&ecdf.to_discrete()))
    };

    Ok(SuperdiffusiveReport {
        p: params.p(),
        q: params.q(),
        n,
        m,
        l_mean,
        l_sd,
        skewness,
        excess_kurtosis,
        kurtosis_z,
        ks_to_normal: ks,
        ks_floor: MC_FLOOR_MULTIPLE * dkw_band(m as usize, MC_ALPHA)?,
        martingale_increments: [(k1, median(&inc1)), (k2, median(&inc2))],
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::StepLaw;

    fn constant(p: f64, q: f64) -> WalkParams {
        WalkParams::new(p, q, StepLaw::constant()).unwrap()
    }

    #[test]
    fn kolmogorov_exponents_follow_the_crossover() {
        let half = theory_exponent(0.5, Metric::Kolmogorov, None, true).unwrap();
        assert_eq!(half.exponent, 0.5);
        assert!(!half.logarithmic);
        let seven_tenths = theory_exponent(0.7, Metric::Kolmogorov, None, true).unwrap();
        assert!((seven_tenths.exponent - 0.2).abs() < 1e-12);
        // Breakpoint at p = 5/8 exactly: sqrt(n) rate below, v_n rate above.
        for k in 0..=100 {
            let p = 0.01 + 0.73 * k as f64 / 100.0;
            let e = theory_exponent(p, Metric::Kolmogorov, None, true)
                .unwrap()
                .exponent;
            if p <= 0.625 {
                assert_eq!(e, 0.5, "p={p}");
            } else {
                assert!((e - (3.0 - 4.0 * p)).abs() < 1e-12, "p={p}");
            }
        }
    }

    #[test]
    fn wasserstein_exponent_example() {
        // W_2 with rho = 2 and positive variance at p = 1/2: min(2/4, 1/2).
        let rate =
            theory_exponent(0.5, Metric::Wasserstein { r: 2.0 }, Some(2.0), false).unwrap();
        assert_eq!(rate.exponent, 0.5);
    }

    #[test]
    fn zeta2_exponent_at_half() {
        let rate = theory_exponent(0.5, Metric::Zeta2, None, true).unwrap();
        assert_eq!(rate.exponent, 1.0); // min(2/2, 3-4p) = min(1, 1)
    }

    #[test]
    fn critical_p_is_logarithmic() {
        let rate = theory_exponent(0.75, Metric::Kolmogorov, None, true).unwrap();
        assert!(rate.logarithmic);
        assert_eq!(rate.exponent, 0.0);
    }

    #[test]
    fn superdiffusive_p_has_no_rate() {
        assert!(matches!(
            theory_exponent(0.9, Metric::Kolmogorov, None, true),
            Err(ExperimentError::NoCltRate(_))
        ));
    }

    #[test]
    fn rho_guards() {
        assert!(matches!(
            theory_exponent(0.5, Metric::Kolmogorov, None, false),
            Err(ExperimentError::RhoRequired)
        ));
        assert!(matches!(
            theory_exponent(0.5, Metric::Kolmogorov, Some(1.5), false),
            Err(ExperimentError::RhoForMetric { .. })
        ));
        // W_r affords rho up to r.
        assert!(theory_exponent(0.5, Metric::Wasserstein { r: 1.5 }, Some(1.4), false).is_ok());
        assert!(
            theory_exponent(0.5, Metric::Wasserstein { r: 1.5 }, Some(1.6), false).is_err()
        );
    }

    #[test]
    fn linear_fit_recovers_exact_power_law() {
        // distance = 3 n^{-1/2} gives slope exactly -1/2 in log-log.
        let ns = [64u64, 128, 256, 512, 1024];
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = ns
            .iter()
            .map(|&n| (3.0 * (n as f64).powf(-0.5)).ln())
            .collect();
        let (slope, intercept, stderr) = linear_fit(&xs, &ys);
        assert!((slope + 0.5).abs() < 1e-12);
        assert!((intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(stderr < 1e-12);
    }

    #[test]
    fn exact_rate_fit_small_grid() {
        let params = constant(0.5, 0.5);
        let grid = [64, 128, 256, 512, 1024];
        let report = rate_fit(
            &params,
            Metric::Kolmogorov,
            &grid,
            RateMode::Exact,
            0,
            None,
        )
        .unwrap();
        let fit = report.fitted.unwrap();
        assert!(
            fit.slope > -0.65 && fit.slope < -0.35,
            "slope {} stderr {}",
            fit.slope,
            fit.stderr
        );
        assert_eq!(report.grid.len(), 5);
        assert!(report
            .grid
            .windows(2)
            .all(|w| w[0].n < w[1].n && w[0].distance > w[1].distance));
    }

    #[test]
    fn rate_fit_guards() {
        let params = constant(0.5, 0.5);
        assert!(matches!(
            rate_fit(&params, Metric::Kolmogorov, &[8, 16, 32], RateMode::Exact, 0, None),
            Err(ExperimentError::GridTooSmall(3))
        ));
        let heavy = WalkParams::new(0.5, 0.5, StepLaw::exponential()).unwrap();
        assert!(matches!(
            rate_fit(&heavy, Metric::Kolmogorov, &[8, 16, 32, 64], RateMode::Exact, 0, Some(1.0)),
            Err(ExperimentError::ExactModeNeedsConstant)
        ));
        assert!(matches!(
            rate_fit(
                &params,
                Metric::Kolmogorov,
                &[8, 16, 32, 40_000],
                RateMode::Exact,
                0,
                None
            ),
            Err(ExperimentError::Exact(ExactError::DpBudget { .. }))
        ));
    }

    #[test]
    fn lil_scan_rejects_superdiffusive_p() {
        let params = constant(0.8, 0.5);
        assert!(matches!(
            lil_scan(&params, 1000, 4, 7, 100),
            Err(ExperimentError::LilRegimeGuard(_))
        ));
    }

    #[test]
    fn lil_scan_is_seed_deterministic() {
        let params = constant(0.5, 0.5);
        let a = lil_scan(&params, 4096, 16, 99, 64).unwrap();
        let b = lil_scan(&params, 4096, 16, 99, 64).unwrap();
        assert_eq!(a.maxima, b.maxima);
        assert_eq!(a.bound, 1.0); // 1/sqrt(3-4p) + sigma with sigma = 0
    }

    #[test]
    fn superdiffusive_guard_is_total() {
        for &p in &[0.3, 0.5, 0.7, 0.75] {
            let params = constant(p, 0.5);
            assert!(superdiffusive_diagnostic(&params, 100, 10, 1).is_err(), "p={p}");
        }
    }

    #[test]
    fn superdiffusive_degenerate_corner() {
        let params = constant(1.0, 1.0);
        let rep = superdiffusive_diagnostic(&params, 64, 50, 5).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.ks_to_normal, 0.5);
        assert_eq!(rep.l_mean, 1.0);
        assert_eq!(rep.l_sd, 0.0);
    }
}
