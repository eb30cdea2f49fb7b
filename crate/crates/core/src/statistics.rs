//! Correlation decay, Green-Kubo variance, and an empirical central limit
//! check for equilibrium states.
//!
//! Correlations are computed spectrally, by powers of the transfer matrix
//! acting on psi h, never by sampling trajectories; that realizes
//!   C(n) = integral of phi . (lambda^-n L^n (psi h)) d nu  -  (mean phi)(mean psi)
//! and keeps round-off flat in n. Orbits appear only in the empirical CLT,
//! where sampling is the point; there the forward orbit is generated as a
//! reversed mu-stationary backward chain, which injects fresh randomness at
//! every step instead of shedding mantissa bits the way forward iteration of
//! an expanding map does.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;

use crate::circle::wrap;
use crate::dynamics::{CircleMap, PotentialSpec};
use crate::error::Error;
use crate::grid::GridFunction;
use crate::operator::{SpectralSolution, TransferMatrix};
use crate::Result;

/// Double-precision accumulation limit for correlation fits.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Variances at or below this scale count as zero for the empirical CLT;
/// coboundary observables land here (up to the interpolation floor of the
/// collocation grid) and admit no meaningful normal rescaling.
pub const ZERO_VARIANCE_TOL: f64 = 1e-8;

/// Correlation values C(0), ..., C(n_max) of a pair of observables.
#[derive(Clone, Debug)]
pub struct CorrelationSeries {
    pub phi_id: String,
    pub psi_id: String,
    pub values: Vec<f64>,
}

impl CorrelationSeries {
    pub fn value(&self, n: usize) -> f64 {
        self.values[n]
    }
}

/// C(n) = sum_i phi(x_i) (lambda^-n M^n (psi h))_i nu_i - mean(phi) mean(psi),
/// means taken against the equilibrium weights.
pub fn correlation(
    matrix: &TransferMatrix,
    sol: &SpectralSolution,
    phi: &GridFunction,
    psi: &GridFunction,
    n_max: usize,
) -> CorrelationSeries {
    let n = matrix.n();
    assert_eq!(phi.len(), n);
    assert_eq!(psi.len(), n);
    let mean_phi = sol.mu_integral(phi.values());
    let mean_psi = sol.mu_integral(psi.values());
    let product = mean_phi * mean_psi;
    let mut w: Vec<f64> = psi
        .values()
        .iter()
        .zip(sol.h.values())
        .map(|(&a, &b)| a * b)
        .collect();
    let mut values = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        if step > 0 {
            w = matrix.apply(&w);
            for x in &mut w {
                *x /= sol.lambda;
            }
        }
        let integral: f64 = phi
            .values()
            .iter()
            .zip(w.iter().zip(&sol.nu))
            .map(|(&p, (&wi, &nui))| p * wi * nui)
            .sum();
        values.push(integral - product);
    }
    CorrelationSeries {
        phi_id: String::new(),
        psi_id: String::new(),
        values,
    }
}

/// Geometric fit C(n) ~ K tau^n by least squares on log |C(n)|.
#[derive(Clone, Debug)]
pub struct DecayFit {
    pub tau: f64,
    pub k: f64,
    pub r2: f64,
    /// Entries that sat above the noise floor and entered the fit.
    pub points: usize,
}

pub fn fit_decay_rate(values: &[f64], floor: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &c)| libm::fabs(c) > floor)
        .map(|(n, &c)| (n as f64, libm::log(libm::fabs(c))))
        .collect();
    if pts.len() < 5 {
        return Err(Error::AllBelowFloor);
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    let mean_y = sy / m;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in &pts {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit { tau: libm::exp(slope), k: libm::exp(intercept), r2, points: pts.len() })
}

/// Green-Kubo variance of a centered observable with its autocovariance
/// series and the fitted truncation-error estimate.
#[derive(Clone, Debug)]
pub struct CltVariance {
    pub sigma2: f64,
    /// Autocovariances C_vv(0..=j).
    pub series: Vec<f64>,
    /// 2 K tau^(J+1) / (1 - tau) from the geometric fit, when one exists.
    pub truncation_error: Option<f64>,
}

/// sigma^2 = C_vv(0) + 2 sum_{j=1..J} C_vv(j) with v = phi - mean(phi).
pub fn clt_variance(
    matrix: &TransferMatrix,
    sol: &SpectralSolution,
    phi: &GridFunction,
    j: usize,
) -> Result<CltVariance> {
    assert!(j >= 1);
    let mean = sol.mu_integral(phi.values());
    let v = phi.map(|x| x - mean);
    let series = correlation(matrix, sol, &v, &v, j).values;
    let sigma2 = series[0] + 2.0 * series[1..].iter().sum::<f64>();
    if sigma2 < -1e-10 {
        return Err(Error::NegativeVariance(sigma2));
    }
    let truncation_error = fit_decay_rate(&series, NOISE_FLOOR).ok().and_then(|fit| {
        if fit.tau < 1.0 {
            Some(2.0 * fit.k * libm::pow(fit.tau, (j + 1) as f64) / (1.0 - fit.tau))
        } else {
            None
        }
    });
    Ok(CltVariance { sigma2, series, truncation_error })
}

/// Empirical CLT outcome.
#[derive(Clone, Debug)]
pub struct CltResult {
    pub sigma2: f64,
    /// Kolmogorov-Smirnov distance of the normalized Birkhoff sums against
    /// the centered normal with variance sigma2.
    pub ks: f64,
    pub samples: usize,
    pub orbit_len: usize,
    pub seed: u64,
}

fn normal_cdf(t: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + libm::erf(t / (sigma * libm::sqrt(2.0))))
}

/// Draw orbits from the equilibrium state and compare S_n v / sqrt(n) with
/// the normal law of variance sigma2.
///
/// The initial point is drawn from the discrete weights by inverse-CDF
/// sampling with uniform jitter inside the cell; the orbit itself is built
/// backwards through the inverse branches with the stationary weights
/// e^{phi(y)} h(y) / (lambda h(x)) and then read in reverse, which is a
/// forward orbit of the map.
#[allow(clippy::too_many_arguments)]
pub fn clt_empirical(
    map: &CircleMap,
    pot: &PotentialSpec,
    sol: &SpectralSolution,
    observable: impl Fn(f64) -> f64,
    sigma2: f64,
    orbit_len: usize,
    samples: usize,
    seed: u64,
) -> Result<CltResult> {
    if sigma2 <= ZERO_VARIANCE_TOL {
        return Err(Error::ZeroVariance);
    }
    assert!(orbit_len >= 1 && samples >= 1);
    let n = sol.mu.len();
    let mean = {
        let obs_grid: Vec<f64> = (0..n).map(|i| observable(i as f64 / n as f64)).collect();
        obs_grid.iter().zip(&sol.mu).map(|(&a, &b)| a * b).sum::<f64>()
    };
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in &sol.mu {
        acc += w;
        cdf.push(acc);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let deg = map.degree();
    let mut stats = Vec::with_capacity(samples);
    let mut branch_weights = alloc::vec![0.0_f64; deg];
    for _ in 0..samples {
        let u: f64 = rng.random();
        let cell = cdf.partition_point(|&c| c < u).min(n - 1);
        let jitter: f64 = rng.random();
        let mut z = wrap((cell as f64 + jitter - 0.5) / n as f64);
        let mut sum = observable(z) - mean;
        for _ in 1..orbit_len {
            let preimages = map.inverse_branches(z)?;
            let mut total = 0.0;
            for (b, &y) in preimages.iter().enumerate() {
                let w = libm::exp(pot.eval(y)) * sol.h.eval(y);
                branch_weights[b] = w;
                total += w;
            }
            let mut pick: f64 = rng.random::<f64>() * total;
            let mut chosen = deg - 1;
            for (b, &w) in branch_weights.iter().enumerate() {
                if pick < w {
                    chosen = b;
                    break;
                }
                pick -= w;
            }
            z = preimages[chosen];
            sum += observable(z) - mean;
        }
        stats.push(sum / libm::sqrt(orbit_len as f64));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let sigma = libm::sqrt(sigma2);
    let m = stats.len() as f64;
    let mut ks = 0.0_f64;
    for (i, &s) in stats.iter().enumerate() {
        let f = normal_cdf(s, sigma);
        ks = ks.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    Ok(CltResult { sigma2, ks, samples, orbit_len, seed })
}

/// S_n phi (x) = sum_{j=0..n-1} phi(f^j x); the empty sum is zero.
pub fn birkhoff_sum(map: &CircleMap, phi: impl Fn(f64) -> f64, x: f64, n: usize) -> f64 {
    let mut z = wrap(x);
    let mut total = 0.0;
    for _ in 0..n {
        total += phi(z);
        z = map.eval(z);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_matrix, solve_spectrum, DEFAULT_MAX_ITER, DEFAULT_TOL};

    const TAU: f64 = core::f64::consts::PI * 2.0;

    fn doubling_solution(n: usize) -> (TransferMatrix, SpectralSolution) {
        let map = CircleMap::doubling();
        let pot = PotentialSpec::constant(0.0);
        let m = build_matrix(&map, &pot, n).unwrap();
        let sol = solve_spectrum(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        (m, sol)
    }

    #[test]
    fn fourier_mode_correlations_vanish_after_time_zero() {
        let (m, sol) = doubling_solution(512);
        let phi = GridFunction::from_fn(512, |x| libm::cos(TAU * x));
        let series = correlation(&m, &sol, &phi, &phi, 12);
        assert!((series.value(0) - 0.5).abs() < 1e-12);
        for n in 1..=12 {
            assert!(series.value(n).abs() < 1e-10, "C({n}) = {}", series.value(n));
        }
    }

    #[test]
    fn constant_observable_has_zero_correlations() {
        let (m, sol) = doubling_solution(256);
        let phi = GridFunction::from_fn(256, |x| 0.3 + libm::sin(TAU * x));
        let one = GridFunction::constant(256, 1.0);
        let series = correlation(&m, &sol, &phi, &one, 10);
        for n in 0..=10 {
            assert!(series.value(n).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_at_time_zero_matches_direct_quadrature() {
        let map = CircleMap::manneville_pomeau(0.5).unwrap();
        let pot = PotentialSpec::fourier(&[(0.05, 0.7)]);
        let n = 512;
        let m = build_matrix(&map, &pot, n).unwrap();
        let sol = solve_spectrum(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let phi = GridFunction::from_fn(n, |x| libm::cos(TAU * x));
        let psi = GridFunction::from_fn(n, |x| 0.4 + libm::sin(2.0 * TAU * x));
        let series = correlation(&m, &sol, &phi, &psi, 3);
        let direct: f64 = (0..n)
            .map(|i| phi.values()[i] * psi.values()[i] * sol.mu[i])
            .sum::<f64>()
            - sol.mu_integral(phi.values()) * sol.mu_integral(psi.values());
        assert!((series.value(0) - direct).abs() < 1e-12);
    }

    #[test]
    fn exact_geometric_series_fits_perfectly() {
        let values: Vec<f64> = (0..20).map(|n| 3.0 * libm::pow(0.5, n as f64)).collect();
        let fit = fit_decay_rate(&values, NOISE_FLOOR).unwrap();
        assert!((fit.tau - 0.5).abs() < 1e-12);
        assert!((fit.k - 3.0).abs() < 1e-12);
        assert!(fit.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn vanishing_series_reports_floor() {
        let (m, sol) = doubling_solution(256);
        let phi = GridFunction::from_fn(256, |x| libm::cos(TAU * x));
        let series = correlation(&m, &sol, &phi, &phi, 20);
        // C(0) = 1/2 is the only entry above the floor
        assert!(matches!(
            fit_decay_rate(&series.values[1..], NOISE_FLOOR),
            Err(Error::AllBelowFloor)
        ));
    }

    #[test]
    fn intermittent_decay_rate_tracks_the_spectral_gap() {
        let map = CircleMap::manneville_pomeau(0.25).unwrap();
        let pot = PotentialSpec::constant(0.0);
        let n = 1024;
        let m = build_matrix(&map, &pot, n).unwrap();
        let sol = solve_spectrum(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let obs = GridFunction::from_fn(n, |x| libm::cos(TAU * x) + 0.3 * libm::cos(2.0 * TAU * x));
        let series = correlation(&m, &sol, &obs, &obs, 20);
        let fit = fit_decay_rate(&series.values[1..], NOISE_FLOOR).unwrap();
        assert!(fit.r2 > 0.95, "r2 {}", fit.r2);
        assert!(fit.tau <= sol.tau_sub + 0.05, "tau {} vs gap {}", fit.tau, sol.tau_sub);
        // past the initial transient the decay is a single geometric mode;
        // there the fit is a genuine envelope up to small fit noise
        let tail_start = 6;
        let tail = &series.values[tail_start..];
        let tail_fit = fit_decay_rate(tail, NOISE_FLOOR).unwrap();
        assert!((tail_fit.tau - sol.tau_sub).abs() < 0.1, "tail rate {}", tail_fit.tau);
        for (k, &c) in tail.iter().enumerate() {
            if libm::fabs(c) > NOISE_FLOOR {
                let envelope = tail_fit.k * libm::pow(tail_fit.tau, k as f64);
                assert!(
                    libm::fabs(c) <= 3.0 * envelope,
                    "C({}) escapes the settled fit",
                    tail_start + k
                );
            }
        }
    }

    #[test]
    fn green_kubo_variance_of_the_first_mode_is_half() {
        let (m, sol) = doubling_solution(1024);
        let phi = GridFunction::from_fn(1024, |x| libm::cos(TAU * x));
        let out = clt_variance(&m, &sol, &phi, 40).unwrap();
        assert!((out.sigma2 - 0.5).abs() < 1e-10, "sigma2 {}", out.sigma2);
    }

    #[test]
    fn coboundary_variance_collapses_under_refinement() {
        // u o f - u with u = cos(2 pi x): the interpolation floor of the
        // Green-Kubo sum shrinks like (1 - cos(2 pi / N)) / 2
        let u = |x: f64| libm::cos(TAU * x);
        let mut prev = f64::INFINITY;
        for &n in &[256usize, 1024, 4096] {
            let (m, sol) = doubling_solution(n);
            let map = CircleMap::doubling();
            let phi = GridFunction::from_fn(n, |x| u(map.eval(x)) - u(x));
            let out = clt_variance(&m, &sol, &phi, 40).unwrap();
            let floor = (1.0 - libm::cos(TAU / n as f64)) / 2.0;
            assert!(out.sigma2 < 4.0 * floor, "n = {n}: {}", out.sigma2);
            assert!(out.sigma2 < prev);
            prev = out.sigma2;
        }
    }

    #[test]
    fn intermittent_variance_is_positive_and_stable_in_truncation() {
        let map = CircleMap::manneville_pomeau(0.25).unwrap();
        let pot = PotentialSpec::constant(0.0);
        let n = 1024;
        let m = build_matrix(&map, &pot, n).unwrap();
        let sol = solve_spectrum(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let phi = GridFunction::from_fn(n, |x| libm::cos(TAU * x) + 0.3 * libm::cos(2.0 * TAU * x));
        let v30 = clt_variance(&m, &sol, &phi, 30).unwrap();
        let v60 = clt_variance(&m, &sol, &phi, 60).unwrap();
        assert!(v30.sigma2 > 0.0);
        assert!((v30.sigma2 - v60.sigma2).abs() < 1e-9, "{} vs {}", v30.sigma2, v60.sigma2);
        // the reported truncation estimate dominates the actual tail
        let err = v30.truncation_error.unwrap();
        assert!((v30.sigma2 - v60.sigma2).abs() <= err.max(1e-12));
    }

    #[test]
    fn variance_is_centered_and_quadratic() {
        let map = CircleMap::manneville_pomeau(0.5).unwrap();
        let pot = PotentialSpec::fourier(&[(0.02, 0.1)]);
        let n = 512;
        let m = build_matrix(&map, &pot, n).unwrap();
        let sol = solve_spectrum(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let phi = GridFunction::from_fn(n, |x| libm::cos(TAU * x) + 0.2 * libm::sin(2.0 * TAU * x));
        let base = clt_variance(&m, &sol, &phi, 40).unwrap().sigma2;
        let shifted = clt_variance(&m, &sol, &phi.map(|v| v + 3.7), 40).unwrap().sigma2;
        assert!((base - shifted).abs() < 1e-12);
        let scaled = clt_variance(&m, &sol, &phi.map(|v| 2.0 * v), 40).unwrap().sigma2;
        assert!((scaled - 4.0 * base).abs() < 1e-10);
    }

    #[test]
    fn short_orbits_are_visibly_non_gaussian() {
        let map = CircleMap::doubling();
        let pot = PotentialSpec::constant(0.0);
        let (_, sol) = doubling_solution(256);
        // n = 1: the statistic is the observable itself, an arcsine-type law
        let out = clt_empirical(&map, &pot, &sol, |x| libm::cos(TAU * x), 0.5, 1, 20_000, 7).unwrap();
        assert!(out.ks > 0.1, "ks {}", out.ks);
    }

    #[test]
    fn longer_orbits_approach_the_normal_law() {
        let map = CircleMap::doubling();
        let pot = PotentialSpec::constant(0.0);
        let (_, sol) = doubling_solution(512);
        let out =
            clt_empirical(&map, &pot, &sol, |x| libm::cos(TAU * x), 0.5, 200, 20_000, 13).unwrap();
        assert!(out.ks < 0.03, "ks {}", out.ks);
    }

    #[test]
    fn zero_variance_is_rejected() {
        let map = CircleMap::doubling();
        let pot = PotentialSpec::constant(0.0);
        let (_, sol) = doubling_solution(128);
        assert!(matches!(
            clt_empirical(&map, &pot, &sol, |x| x, 1e-14, 10, 10, 1),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn birkhoff_sums_match_hand_computation() {
        let map = CircleMap::doubling();
        assert_eq!(birkhoff_sum(&map, |x| x, 0.3, 0), 0.0);
        assert!((birkhoff_sum(&map, |_| 1.5, 0.123, 7) - 10.5).abs() < 1e-12);
        // period-two orbit 1/3 -> 2/3 -> 1/3
        let s2 = birkhoff_sum(&map, |x| libm::cos(TAU * x), 1.0 / 3.0, 2);
        assert!((s2 - (-1.0)).abs() < 1e-12);
    }
}
