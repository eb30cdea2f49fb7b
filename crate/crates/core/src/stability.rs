//! Stability of the spectral data under perturbations: deterministic
//! parameter sweeps of pressure and density, matching of preimage trees of
//! nearby maps, the Lipschitz-norm discontinuity of the operator itself, and
//! the integrated operator of a random perturbation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;

use crate::circle::{dist, signed, wrap};
use crate::dynamics::{CircleMap, PotentialSpec};
use crate::error::Error;
use crate::grid::GridFunction;
use crate::operator::{build_matrix, solve_spectrum, SpectralSolution, TransferMatrix};
use crate::Result;

/// A finitely supported measure on (map, potential) pairs; weights are
/// normalized at construction.
pub struct PerturbationMeasure {
    atoms: Vec<(CircleMap, PotentialSpec, f64)>,
    radius: f64,
    center_id: String,
}

impl PerturbationMeasure {
    pub fn new(
        mut atoms: Vec<(CircleMap, PotentialSpec, f64)>,
        radius: f64,
        center_id: String,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("perturbation needs at least one atom".into()));
        }
        if atoms.iter().any(|(_, _, w)| *w < 0.0) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 = atoms.iter().map(|(_, _, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights must not all vanish".into()));
        }
        for (_, _, w) in &mut atoms {
            *w /= total;
        }
        Ok(PerturbationMeasure { atoms, radius, center_id })
    }

    pub fn atoms(&self) -> &[(CircleMap, PotentialSpec, f64)] {
        &self.atoms
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center_id(&self) -> &str {
        &self.center_id
    }
}

/// Matrix of the integrated operator: the weighted entrywise sum of the
/// atom matrices.
pub fn integrated_operator(theta: &PerturbationMeasure, n: usize) -> Result<TransferMatrix> {
    let mut built = Vec::with_capacity(theta.atoms.len());
    for (map, pot, w) in &theta.atoms {
        built.push((*w, build_matrix(map, pot, n)?));
    }
    let parts: Vec<(f64, &TransferMatrix)> = built.iter().map(|(w, m)| (*w, m)).collect();
    TransferMatrix::weighted_sum(&parts)
}

pub fn integrated_spectrum(
    theta: &PerturbationMeasure,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralSolution> {
    let matrix = integrated_operator(theta, n)?;
    solve_spectrum(&matrix, tol, max_iter)
}

/// One row of a deterministic parameter sweep.
#[derive(Clone, Debug)]
pub struct SweepRowData {
    pub t: f64,
    pub lambda: f64,
    pub pressure: f64,
    /// Sup distance of the density to the reference density.
    pub h_sup_diff: f64,
    /// Finite-difference proxies for the C^1 and C^2 distance of densities.
    pub h_d1_diff: f64,
    pub h_d2_diff: f64,
    /// Integrals of the fixed test dictionary against the conformal weights.
    pub weak_star: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub rows: Vec<(f64, Result<SweepRowData>)>,
    pub reference: SweepRowData,
}

/// Fixed dictionary of eight trigonometric test functions.
pub fn weak_star_dictionary(n: usize) -> Vec<GridFunction> {
    let tau = 2.0 * core::f64::consts::PI;
    let mut dict = Vec::with_capacity(8);
    for k in 1..=4usize {
        dict.push(GridFunction::from_fn(n, move |x| libm::cos(tau * k as f64 * x)));
        dict.push(GridFunction::from_fn(n, move |x| libm::sin(tau * k as f64 * x)));
    }
    dict
}

fn finite_difference_sup_diff(a: &GridFunction, b: &GridFunction, order: usize) -> f64 {
    let n = a.len() as f64;
    let len = a.len();
    let mut worst = 0.0_f64;
    for i in 0..len {
        let ip = (i + 1) % len;
        let im = (i + len - 1) % len;
        let (da, db) = match order {
            1 => (
                (a.values()[ip] - a.values()[im]) * n / 2.0,
                (b.values()[ip] - b.values()[im]) * n / 2.0,
            ),
            2 => (
                (a.values()[ip] - 2.0 * a.values()[i] + a.values()[im]) * n * n,
                (b.values()[ip] - 2.0 * b.values()[i] + b.values()[im]) * n * n,
            ),
            _ => panic!("order must be 1 or 2"),
        };
        worst = worst.max(libm::fabs(da - db));
    }
    worst
}

fn sweep_row(
    t: f64,
    pair: &(CircleMap, PotentialSpec),
    reference_h: &GridFunction,
    dict: &[GridFunction],
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<SweepRowData> {
    let (map, pot) = pair;
    let matrix = build_matrix(map, pot, n)?;
    let sol = solve_spectrum(&matrix, tol, max_iter)?;
    let weak_star = dict.iter().map(|g| sol.nu_integral(g.values())).collect();
    Ok(SweepRowData {
        t,
        lambda: sol.lambda,
        pressure: sol.pressure(),
        h_sup_diff: sol.h.sup_diff(reference_h),
        h_d1_diff: finite_difference_sup_diff(&sol.h, reference_h, 1),
        h_d2_diff: finite_difference_sup_diff(&sol.h, reference_h, 2),
        weak_star,
    })
}

/// Solve the family along the given parameters and compare each row against
/// the unperturbed solution at t = 0. Rows that fail to solve are marked
/// failed without aborting the sweep.
pub fn pressure_density_sweep(
    family: impl Fn(f64) -> Result<(CircleMap, PotentialSpec)>,
    ts: &[f64],
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<SweepTable> {
    let dict = weak_star_dictionary(n);
    let base_pair = family(0.0)?;
    let base_matrix = build_matrix(&base_pair.0, &base_pair.1, n)?;
    let base_sol = solve_spectrum(&base_matrix, tol, max_iter)?;
    let reference_h = base_sol.h.clone();
    let reference = sweep_row(0.0, &base_pair, &reference_h, &dict, n, tol, max_iter)?;
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let row = family(t)
            .and_then(|pair| sweep_row(t, &pair, &reference_h, &dict, n, tol, max_iter));
        rows.push((t, row));
    }
    Ok(SweepTable { rows, reference })
}

/// Branch-matched preimage trees of two map sequences, with per-level
/// distances checked against  L^n d(x,y) + sum_j L^(n-j+1) |f_j - g_j|_0.
#[derive(Clone, Debug)]
pub struct PreimageMatch {
    /// Worst paired distance at each level 1..=n.
    pub level_max: Vec<f64>,
    /// Paired distances at the deepest level, one per branch word.
    pub final_distances: Vec<f64>,
    /// The matching bound at the deepest level.
    pub bound: f64,
    /// Uniform inverse Lipschitz constant used in the bound.
    pub lip: f64,
    /// Sup distances |f_j - g_j|_0.
    pub sup_diffs: Vec<f64>,
    pub holds: bool,
}

/// Sup distance between two maps on a scan grid.
pub fn sup_map_distance(f: &CircleMap, g: &CircleMap, grid: usize) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..grid {
        let x = i as f64 / grid as f64;
        worst = worst.max(dist(f.eval(x), g.eval(x)));
    }
    worst
}

pub fn paired_preimages(
    f_seq: &[&CircleMap],
    g_seq: &[&CircleMap],
    x: f64,
    y: f64,
    n: usize,
) -> Result<PreimageMatch> {
    if n == 0 || n > 8 {
        return Err(Error::InvalidParameter("matching depth must lie in 1..=8".into()));
    }
    if f_seq.len() < n || g_seq.len() < n {
        return Err(Error::InvalidParameter("map sequences shorter than the depth".into()));
    }
    let deg = f_seq[0].degree();
    if f_seq.iter().chain(g_seq.iter()).any(|m| m.degree() != deg) {
        return Err(Error::InvalidParameter("degrees must agree for branch matching".into()));
    }
    // uniform inverse Lipschitz constant over both sequences
    let mut lip = 0.0_f64;
    for m in f_seq[..n].iter().chain(g_seq[..n].iter()) {
        lip = lip.max(m.sup_inverse_lipschitz(4096)?);
    }
    let mut sup_diffs = Vec::with_capacity(n);
    for j in 0..n {
        sup_diffs.push(sup_map_distance(f_seq[j], g_seq[j], 4096));
    }
    // closeness radius from the branch-domain geometry
    let width_min = f_seq[..n]
        .iter()
        .chain(g_seq[..n].iter())
        .map(|m| m.branch_width_min())
        .fold(f64::INFINITY, f64::min);
    let hat_delta = 0.5 * width_min;
    if dist(x, y) >= hat_delta {
        return Err(Error::TooFar { level: 0, distance: dist(x, y), limit: hat_delta });
    }

    let mut pairs = alloc::vec![(wrap(x), wrap(y))];
    let mut level_max = Vec::with_capacity(n);
    for level in 1..=n {
        let (f, g) = (f_seq[level - 1], g_seq[level - 1]);
        let mut next = Vec::with_capacity(pairs.len() * deg);
        let mut worst = 0.0_f64;
        for &(a, b) in &pairs {
            let fa = f.inverse_branches(a)?;
            let gb = g.inverse_branches(b)?;
            for k in 0..deg {
                let d = dist(fa[k], gb[k]);
                worst = worst.max(d);
                next.push((fa[k], gb[k]));
            }
        }
        if worst >= hat_delta {
            return Err(Error::TooFar { level, distance: worst, limit: hat_delta });
        }
        level_max.push(worst);
        pairs = next;
    }
    let mut bound = libm::pow(lip, n as f64) * dist(x, y);
    for (j, &sd) in sup_diffs.iter().enumerate() {
        bound += libm::pow(lip, (n - j) as f64) * sd;
    }
    let final_distances: Vec<f64> = pairs.iter().map(|&(a, b)| dist(a, b)).collect();
    let worst_final = final_distances.iter().copied().fold(0.0_f64, f64::max);
    let holds = worst_final <= bound * (1.0 + 1e-12) + 1e-12;
    Ok(PreimageMatch { level_max, final_distances, bound, lip, sup_diffs, holds })
}

/// Number of branch-paired preimage pairs of (x, y) with both members inside
/// the contraction region. The auxiliary covering lemma promises at most q
/// of them whenever d(x, y) < delta.
pub fn count_preimages_in_region(map: &CircleMap, x: f64, y: f64, delta: f64) -> Result<usize> {
    debug_assert!(dist(x, y) < delta, "points must be delta-close");
    let _ = delta;
    let xs = map.inverse_branches(x)?;
    let ys = map.inverse_branches(y)?;
    Ok(xs
        .iter()
        .zip(&ys)
        .filter(|(&a, &b)| map.in_contraction_region(a) && map.in_contraction_region(b))
        .count())
}

/// The tent observable of the discontinuity demonstration: |s| up to 1/8,
/// linear down to zero at 1/5, zero beyond, in the signed coordinate.
pub fn tent_observable(x: f64) -> f64 {
    let s = libm::fabs(signed(x));
    if s <= 0.125 {
        s
    } else if s < 0.2 {
        (0.2 - s) * (0.125 / 0.075)
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct DiscontinuityRow {
    pub n: u32,
    /// Grid Lipschitz constant of (L_n - L) tent.
    pub lip: f64,
    /// Sup norm of (L_n - L) tent.
    pub sup: f64,
}

/// Evaluate (L_g - L_f) tent on a grid with zero potential, returning its
/// grid Lipschitz constant and sup norm.
pub fn operator_difference_on_tent(
    f: &CircleMap,
    g: &CircleMap,
    grid: usize,
) -> Result<(f64, f64)> {
    let mut values = Vec::with_capacity(grid);
    for i in 0..grid {
        let x = i as f64 / grid as f64;
        let mut v = 0.0;
        for y in g.inverse_branches(x)? {
            v += tent_observable(y);
        }
        for y in f.inverse_branches(x)? {
            v -= tent_observable(y);
        }
        values.push(v);
    }
    let diff = GridFunction::new(values);
    Ok((diff.grid_lipschitz(), diff.sup_norm()))
}

/// The shifted-doubling family converges to the doubling map uniformly, yet
/// the operator difference keeps unit Lipschitz norm: the sup column decays
/// like 1/(10 n) while the Lipschitz column stays at 1.
pub fn lip_discontinuity_demo(n_list: &[u32], grid: usize) -> Result<Vec<DiscontinuityRow>> {
    let base = CircleMap::doubling();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let moved = CircleMap::shifted_doubling(n)?;
        let (lip, sup) = operator_difference_on_tent(&base, &moved, grid)?;
        rows.push(DiscontinuityRow { n, lip, sup });
    }
    Ok(rows)
}

/// One row of the random-perturbation stability sweep.
#[derive(Clone, Debug)]
pub struct StabilityRow {
    pub epsilon: f64,
    pub lambda: f64,
    /// |lambda_eps - lambda_0|.
    pub lambda_gap: f64,
    pub h_sup_diff: f64,
    pub tau_sub: f64,
    pub atom_lambda_gap_max: f64,
}

/// Spectral data of uniformly weighted random supports shrinking onto the
/// center. The same seeded offsets in [-1, 1] are reused across every
/// epsilon so the supports shrink linearly onto the center pair.
pub fn random_stability_sweep(
    family: impl Fn(f64) -> Result<(CircleMap, PotentialSpec)>,
    epsilons: &[f64],
    support_size: usize,
    seed: u64,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<StabilityRow>> {
    if support_size == 0 {
        return Err(Error::InvalidParameter("support must not be empty".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> = (0..support_size)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    let center = family(0.0)?;
    let center_matrix = build_matrix(&center.0, &center.1, n)?;
    let center_sol = solve_spectrum(&center_matrix, tol, max_iter)?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut atoms = Vec::with_capacity(support_size);
        let mut atom_gap = 0.0_f64;
        for &u in &offsets {
            let (map, pot) = family(u * eps)?;
            if eps > 0.0 {
                let m = build_matrix(&map, &pot, n)?;
                let s = solve_spectrum(&m, tol, max_iter)?;
                atom_gap = atom_gap.max(libm::fabs(s.lambda - center_sol.lambda));
            }
            atoms.push((map, pot, 1.0));
        }
        let theta = PerturbationMeasure::new(atoms, eps, String::from(center.0.id()))?;
        let sol = integrated_spectrum(&theta, n, tol, max_iter)?;
        rows.push(StabilityRow {
            epsilon: eps,
            lambda: sol.lambda,
            lambda_gap: libm::fabs(sol.lambda - center_sol.lambda),
            h_sup_diff: sol.h.sup_diff(&center_sol.h),
            tau_sub: sol.tau_sub,
            atom_lambda_gap_max: atom_gap,
        });
    }
    Ok(rows)
}

/// Convenience builders for the jitter families the sweeps draw from.
///
/// The potential follows the map: -t log|Df_alpha|. With t = 0 the leading
/// eigenvalue is pinned at the degree for every member, so a nonzero t is
/// what makes the spectral response to the jitter visible.
pub fn mp_alpha_family(
    alpha0: f64,
    potential_t: f64,
) -> impl Fn(f64) -> Result<(CircleMap, PotentialSpec)> {
    move |d: f64| {
        let map = CircleMap::manneville_pomeau(alpha0 + d)?;
        let pot = PotentialSpec::geometric(&map, potential_t)?;
        Ok((map, pot))
    }
}

pub fn pitchfork_family(
    potential_t: f64,
) -> impl Fn(f64) -> Result<(CircleMap, PotentialSpec)> {
    move |t: f64| {
        let map = CircleMap::pitchfork(t)?;
        let pot = PotentialSpec::geometric_centered(&map, potential_t)?;
        Ok((map, pot))
    }
}

pub fn fourier_jitter_family(
    base: Vec<(f64, f64)>,
) -> impl Fn(f64) -> Result<(CircleMap, PotentialSpec)> {
    move |d: f64| {
        let map = CircleMap::doubling();
        let coeffs: Vec<(f64, f64)> =
            base.iter().map(|&(a, th)| (a * (1.0 + d), th)).collect();
        Ok((map, PotentialSpec::fourier(&coeffs)))
    }
}
