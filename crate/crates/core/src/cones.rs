//! Projective cones of positive observables and the Birkhoff machinery on
//! them: the positive-cone metric, the explicit metric of the locally
//! Hoelder cone, membership tests for Hoelder and smooth cones, diameter
//! bounds, and measured invariance/contraction of the transfer operator.

use alloc::vec::Vec;

use rand::Rng;

use crate::circle::{dist, DIAM};
use crate::dynamics::{CircleMap, PotentialSpec};
use crate::error::Error;
use crate::grid::GridFunction;
use crate::operator::apply_operator;
use crate::Result;

/// Parameters of the cone; r = 0 is the locally Hoelder cone with aperture
/// kappa over pairs closer than delta, r >= 1 the smooth cone whose order-s
/// aperture is kappa / c_consts[s-1].
#[derive(Clone, Debug)]
pub struct ConeParams {
    pub kappa: f64,
    pub delta: f64,
    pub alpha: f64,
    pub r: usize,
    /// c^(r)_s for s = 1..=r; empty when r = 0. c^(r)_r = 1.
    pub c_consts: Vec<f64>,
}

impl ConeParams {
    pub fn holder(kappa: f64, delta: f64, alpha: f64) -> Self {
        ConeParams { kappa, delta, alpha, r: 0, c_consts: Vec::new() }
    }

    pub fn smooth(kappa: f64, delta: f64, alpha: f64, c_consts: Vec<f64>) -> Result<Self> {
        let r = c_consts.len();
        if r == 0 {
            return Err(Error::InvalidParameter("smooth cone needs at least order 1".into()));
        }
        if libm::fabs(c_consts[r - 1] - 1.0) > 1e-12 {
            return Err(Error::InvalidParameter("top-order cone constant must be 1".into()));
        }
        if c_consts.iter().any(|&c| c <= 0.0) {
            return Err(Error::InvalidParameter("cone constants must be positive".into()));
        }
        Ok(ConeParams { kappa, delta, alpha, r, c_consts })
    }
}

/// Sups of |D^s f^{-1}| for s = 1..=order, computed from the forward
/// derivatives along a scan grid: Df^{-1} = 1/Df and
/// D^2 f^{-1} = -D^2 f / (Df)^3, both evaluated at the preimage sweep.
pub fn inverse_derivative_sups(map: &CircleMap, grid: usize, order: usize) -> Result<Vec<f64>> {
    if order > 2 {
        return Err(Error::InvalidParameter("inverse derivatives available up to order 2".into()));
    }
    let mut sup1 = 0.0_f64;
    let mut sup2 = 0.0_f64;
    for i in 0..grid {
        let y = i as f64 / grid as f64;
        let d1 = map.derivative(y)?;
        if d1 == 0.0 {
            return Err(Error::InvalidParameter("derivative vanishes".into()));
        }
        sup1 = sup1.max(1.0 / libm::fabs(d1));
        if order >= 2 {
            let d2 = map.derivative2(y)?;
            if !d2.is_finite() {
                return Err(Error::MissingDerivative { order: 2 });
            }
            sup2 = sup2.max(libm::fabs(d2) / libm::fabs(d1 * d1 * d1));
        }
    }
    let mut out = alloc::vec![sup1];
    if order >= 2 {
        out.push(sup2);
    }
    Ok(out[..order].to_vec())
}

/// Triangle of smooth-cone constants c^(rho)_s for rho = 1..=r, s = 1..=rho.
///
/// c^(rho)_rho = 1; the next constant dominates the rho! chain-rule terms
/// through sup |D^rho f^{-1}|; lower orders follow the recursion
/// c^(rho)_{rho-t} = c^(rho)_{rho-t+1} c^(rho-1)_{rho-t}.
pub fn cr_constants(
    deg: usize,
    q: usize,
    l: f64,
    sigma: f64,
    eps_phi: f64,
    inv_sups: &[f64],
    r: usize,
) -> Result<Vec<Vec<f64>>> {
    if r == 0 {
        return Ok(Vec::new());
    }
    if inv_sups.len() < r {
        return Err(Error::MissingDerivative { order: r });
    }
    let mut triangle: Vec<Vec<f64>> = Vec::with_capacity(r);
    triangle.push(alloc::vec![1.0]);
    let mut factorial = 1.0_f64;
    for rho in 2..=r {
        factorial = 1.0;
        for k in 2..=rho {
            factorial *= k as f64;
        }
        let xi = crate::hypotheses::compute_xi_r(deg, q, l, sigma, eps_phi, rho)?;
        let dsup = inv_sups[rho - 1];
        let mut pow_best = 0.0_f64;
        let mut p = 1.0_f64;
        for _ in 1..rho {
            p *= dsup;
            pow_best = pow_best.max(p);
        }
        let mut c = alloc::vec![0.0_f64; rho];
        c[rho - 1] = 1.0;
        c[rho - 2] = factorial / (1.0 - xi) * libm::exp(eps_phi) * pow_best;
        for t in 2..rho {
            // c^(rho)_{rho-t} = c^(rho)_{rho-t+1} * c^(rho-1)_{rho-t}
            c[rho - 1 - t] = c[rho - t] * triangle[rho - 2][rho - 1 - t];
        }
        triangle.push(c);
    }
    let _ = factorial;
    Ok(triangle)
}

/// Projective metric of the positive cone on sample vectors:
/// log( sup(a/b) / inf(a/b) ).
pub fn theta_plus_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len());
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for (&x, &y) in a.iter().zip(b) {
        if x <= 0.0 || y <= 0.0 {
            return Err(Error::NonPositiveInput);
        }
        let r = x / y;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(libm::log(hi / lo))
}

pub fn theta_plus(g1: &GridFunction, g2: &GridFunction) -> Result<f64> {
    theta_plus_slices(g1.values(), g2.values())
}

/// Explicit metric data of the locally Hoelder cone.
#[derive(Clone, Debug)]
pub struct ThetaKappa {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub theta_plus: f64,
}

/// Sampled evaluation of the cone metric: the infimum A and supremum B of
///   [kappa d(x,y)^alpha g2(z) - (g2(x) - g2(y))] /
///   [kappa d(x,y)^alpha g1(z) - (g1(x) - g1(y))]
/// over ordered pairs 0 < d(x,y) < delta and base points z, on a stride
/// lattice refined locally around the incumbent optima. The sampled value
/// never exceeds the true metric.
pub fn theta_kappa(
    g1: &GridFunction,
    g2: &GridFunction,
    params: &ConeParams,
    budget: usize,
) -> Result<ThetaKappa> {
    let n = g1.len();
    assert_eq!(n, g2.len());
    let tp = theta_plus(g1, g2)?;
    // stride so that pairs x z triples stay within budget
    let frac = (2.0 * params.delta).min(1.0);
    let target = (budget as f64 / frac.max(1e-6)).max(8.0);
    let lattice = libm::pow(target, 1.0 / 3.0) as usize;
    let stride = (n / lattice.max(4)).max(1);

    let v1 = g1.values();
    let v2 = g2.values();
    let quot = |i: usize, j: usize, z: usize| -> Result<f64> {
        let d = dist(i as f64 / n as f64, j as f64 / n as f64);
        let w = params.kappa * libm::pow(d, params.alpha);
        let den = w * v1[z] - (v1[i] - v1[j]);
        let num = w * v2[z] - (v2[i] - v2[j]);
        if den <= 0.0 || num <= 0.0 {
            return Err(Error::NotInCone);
        }
        Ok(num / den)
    };

    let max_gap_f = params.delta * n as f64;
    let in_range = |gap: usize| -> bool {
        let g = gap.min(n - gap);
        g >= 1 && (g as f64) < max_gap_f
    };

    let mut a = f64::INFINITY;
    let mut b = 0.0_f64;
    let mut arg_a = (0usize, 0usize, 0usize);
    let mut arg_b = (0usize, 0usize, 0usize);
    let mut i = 0;
    while i < n {
        let mut gap = stride;
        while gap < n {
            if in_range(gap) {
                let j = (i + gap) % n;
                let mut z = 0;
                while z < n {
                    let r = quot(i, j, z)?;
                    if r < a {
                        a = r;
                        arg_a = (i, j, z);
                    }
                    if r > b {
                        b = r;
                        arg_b = (i, j, z);
                    }
                    // swapped pair (j, i) flips the difference signs
                    let rs = quot(j, i, z)?;
                    if rs < a {
                        a = rs;
                        arg_a = (j, i, z);
                    }
                    if rs > b {
                        b = rs;
                        arg_b = (j, i, z);
                    }
                    z += stride;
                }
            }
            gap += stride;
        }
        i += stride;
    }

    // local refinement in a stride-wide window around each incumbent
    let refine = |center: (usize, usize, usize), want_min: bool, a: &mut f64, b: &mut f64| -> Result<()> {
        let w = stride.min(24);
        for di in 0..=2 * w {
            let i = (center.0 + n + di - w) % n;
            for dj in 0..=2 * w {
                let j = (center.1 + n + dj - w) % n;
                if i == j {
                    continue;
                }
                let gap = (j + n - i) % n;
                if !in_range(gap.min(n - gap).max(1)) {
                    continue;
                }
                let d = dist(i as f64 / n as f64, j as f64 / n as f64);
                if d <= 0.0 || d >= params.delta {
                    continue;
                }
                for dz in 0..=2 * w {
                    let z = (center.2 + n + dz - w) % n;
                    let r = quot(i, j, z)?;
                    if want_min && r < *a {
                        *a = r;
                    }
                    if !want_min && r > *b {
                        *b = r;
                    }
                }
            }
        }
        Ok(())
    };
    refine(arg_a, true, &mut a, &mut b)?;
    refine(arg_b, false, &mut a, &mut b)?;

    if !(a.is_finite() && b.is_finite()) || a <= 0.0 {
        return Err(Error::NotInCone);
    }
    Ok(ThetaKappa { a, b, theta: libm::log(b / a), theta_plus: tp })
}

/// Membership in the locally Hoelder cone: positive and with local seminorm
/// at most kappa inf g.
#[derive(Clone, Debug)]
pub struct Membership {
    pub member: bool,
    /// |g|_{alpha,delta} / inf g (infinite when g is not positive).
    pub ratio: f64,
}

pub fn cone_membership(g: &GridFunction, params: &ConeParams) -> Membership {
    let inf = g.min_value();
    if inf <= 0.0 {
        return Membership { member: false, ratio: f64::INFINITY };
    }
    let ratio = g.holder_seminorm(params.alpha, params.delta) / inf;
    Membership { member: ratio <= params.kappa, ratio }
}

/// Per-order membership in the smooth cone: |D^s g|_0 / inf g against
/// kappa / c^(r)_s.
#[derive(Clone, Debug)]
pub struct CrMembership {
    pub member: bool,
    pub ratios: Vec<f64>,
    pub bounds: Vec<f64>,
}

pub fn cone_membership_cr(
    g: &GridFunction,
    derivatives: &[GridFunction],
    params: &ConeParams,
) -> Result<CrMembership> {
    if params.r == 0 || derivatives.len() < params.r {
        return Err(Error::MissingDerivative { order: params.r.max(1) });
    }
    let inf = g.min_value();
    if inf <= 0.0 {
        return Ok(CrMembership {
            member: false,
            ratios: alloc::vec![f64::INFINITY; params.r],
            bounds: params.c_consts.iter().map(|&c| params.kappa / c).collect(),
        });
    }
    let mut ratios = Vec::with_capacity(params.r);
    let mut bounds = Vec::with_capacity(params.r);
    let mut member = true;
    for s in 1..=params.r {
        let ratio = derivatives[s - 1].sup_norm() / inf;
        let bound = params.kappa / params.c_consts[s - 1];
        member = member && ratio <= bound;
        ratios.push(ratio);
        bounds.push(bound);
    }
    Ok(CrMembership { member, ratios, bounds })
}

/// Projective diameter bound of the image cone with contraction factor
/// lambda_hat: 2 log[(1 + m lambda_hat kappa diam^alpha)(1 + lambda_hat) /
/// (1 - lambda_hat)].
pub fn diameter_bound(kappa: f64, lambda_hat: f64, m: usize, alpha: f64) -> Result<f64> {
    if !(lambda_hat > 0.0 && lambda_hat < 1.0) {
        return Err(Error::InvalidContraction(lambda_hat));
    }
    let inner = (1.0 + m as f64 * lambda_hat * kappa * libm::pow(DIAM, alpha)) * (1.0 + lambda_hat)
        / (1.0 - lambda_hat);
    Ok(2.0 * libm::log(inner))
}

/// A positive trigonometric polynomial 1 + sum a_k cos(2 pi k x + th_k) with
/// analytic derivatives, used to sample cone members.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    pub modes: Vec<(usize, f64, f64)>,
}

impl TrigPoly {
    pub fn eval(&self, x: f64) -> f64 {
        let tau = 2.0 * core::f64::consts::PI;
        1.0 + self
            .modes
            .iter()
            .map(|&(k, a, th)| a * libm::cos(tau * k as f64 * x + th))
            .sum::<f64>()
    }

    pub fn d1(&self, x: f64) -> f64 {
        let tau = 2.0 * core::f64::consts::PI;
        self.modes
            .iter()
            .map(|&(k, a, th)| -a * tau * k as f64 * libm::sin(tau * k as f64 * x + th))
            .sum()
    }

    pub fn d2(&self, x: f64) -> f64 {
        let tau = 2.0 * core::f64::consts::PI;
        self.modes
            .iter()
            .map(|&(k, a, th)| {
                let w = tau * k as f64;
                -a * w * w * libm::cos(w * x + th)
            })
            .sum()
    }

    pub fn sample(&self, n: usize) -> GridFunction {
        GridFunction::from_fn(n, |x| self.eval(x))
    }

    pub fn sample_d(&self, n: usize, order: usize) -> GridFunction {
        match order {
            1 => GridFunction::from_fn(n, |x| self.d1(x)),
            2 => GridFunction::from_fn(n, |x| self.d2(x)),
            _ => panic!("order must be 1 or 2"),
        }
    }

    fn scaled(&self, factor: f64) -> TrigPoly {
        TrigPoly { modes: self.modes.iter().map(|&(k, a, th)| (k, a * factor, th)).collect() }
    }
}

/// Random strict cone member with at least the requested relative margin:
/// the analytic seminorm bounds are scaled to (1 - margin) kappa.
pub fn random_cone_member(rng: &mut impl Rng, params: &ConeParams, margin: f64) -> TrigPoly {
    let mut modes = Vec::new();
    for k in 1..=5usize {
        let a = (rng.random::<f64>() * 2.0 - 1.0) / (k * k) as f64;
        let th = rng.random::<f64>() * 2.0 * core::f64::consts::PI;
        modes.push((k, a, th));
    }
    let raw = TrigPoly { modes };
    let tau = 2.0 * core::f64::consts::PI;
    let sum_abs: f64 = raw.modes.iter().map(|&(_, a, _)| libm::fabs(a)).sum();
    let lip: f64 = raw.modes.iter().map(|&(k, a, _)| libm::fabs(a) * tau * k as f64).sum();
    // Hoelder seminorm bound over pairs closer than delta
    let sem = lip * libm::pow(params.delta.min(DIAM), 1.0 - params.alpha);
    // budget: seminorm / inf <= (1 - margin) kappa, plus smooth-order budgets
    let target = (1.0 - margin) * params.kappa;
    let mut scale_bound = f64::INFINITY;
    // keep inf g >= 0.7 regardless
    scale_bound = scale_bound.min(0.3 / sum_abs.max(1e-12));
    // seminorm/inf is increasing in the scale; solve sem*s / (1 - sum_abs*s) = target
    let s_holder = target / (sem + target * sum_abs).max(1e-300);
    scale_bound = scale_bound.min(s_holder);
    for s in 1..=params.r {
        let dsup: f64 = raw
            .modes
            .iter()
            .map(|&(k, a, _)| libm::fabs(a) * libm::pow(tau * k as f64, s as f64))
            .sum();
        let bound = (1.0 - margin) * params.kappa / params.c_consts[s - 1];
        let s_r = bound / (dsup + bound * sum_abs).max(1e-300);
        scale_bound = scale_bound.min(s_r);
    }
    raw.scaled(scale_bound)
}

/// Seeded batch of strict cone-member pairs sampled on a grid.
pub fn random_cone_pairs(
    params: &ConeParams,
    count: usize,
    n: usize,
    margin: f64,
    seed: u64,
) -> Vec<(GridFunction, GridFunction)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                random_cone_member(&mut rng, params, margin).sample(n),
                random_cone_member(&mut rng, params, margin).sample(n),
            )
        })
        .collect()
}

/// Value and derivatives of (L g)(x) at a point, via the chain rule along
/// the inverse branches. Needs potential derivatives up to the order asked.
pub fn apply_with_derivatives(
    map: &CircleMap,
    pot: &PotentialSpec,
    obs: &TrigPoly,
    x: f64,
    order: usize,
) -> Result<(f64, f64, f64)> {
    let preimages = map.inverse_branches(x)?;
    let mut v0 = 0.0;
    let mut v1 = 0.0;
    let mut v2 = 0.0;
    for y in preimages {
        let w = libm::exp(pot.eval(y));
        let g = obs.eval(y);
        v0 += w * g;
        if order >= 1 {
            let yp = 1.0 / map.derivative(y)?;
            let dphi = pot.d1(y)?;
            let dg = obs.d1(y);
            v1 += w * (dg + g * dphi) * yp;
            if order >= 2 {
                let d2f = map.derivative2(y)?;
                if !d2f.is_finite() {
                    return Err(Error::MissingDerivative { order: 2 });
                }
                let ypp = -d2f * yp * yp * yp;
                let d2phi = pot.d2(y)?;
                let d2g = obs.d2(y);
                let first = d2g + 2.0 * dphi * dg + g * (d2phi + dphi * dphi);
                v2 += w * (first * yp * yp + (dg + g * dphi) * ypp);
            }
        }
    }
    Ok((v0, v1, v2))
}

/// Measured cone invariance: the worst output-aperture over random strict
/// cone members, divided by kappa. Below 1 means the operator mapped the
/// sampled cone strictly inside itself.
#[derive(Clone, Debug)]
pub struct InvarianceEstimate {
    pub lambda_hat: f64,
    pub pass: bool,
    pub samples: usize,
}

pub fn verify_invariance(
    map: &CircleMap,
    pot: &PotentialSpec,
    params: &ConeParams,
    n_grid: usize,
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceEstimate> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n_samples {
        let member = random_cone_member(&mut rng, params, 0.2);
        if params.r == 0 {
            let g = member.sample(n_grid);
            let lg = apply_operator(map, pot, &g)?;
            let out = cone_membership(&lg, params);
            if !out.ratio.is_finite() {
                return Err(Error::NotInCone);
            }
            worst = worst.max(out.ratio / params.kappa);
        } else {
            let mut value = Vec::with_capacity(n_grid);
            let mut d1 = Vec::with_capacity(n_grid);
            let mut d2 = Vec::with_capacity(n_grid);
            for i in 0..n_grid {
                let x = i as f64 / n_grid as f64;
                let (v0, v1, v2) = apply_with_derivatives(map, pot, &member, x, params.r)?;
                value.push(v0);
                d1.push(v1);
                d2.push(v2);
            }
            let g = GridFunction::new(value);
            let inf = g.min_value();
            if inf <= 0.0 {
                return Err(Error::NotInCone);
            }
            let mut derivs = alloc::vec![GridFunction::new(d1)];
            if params.r >= 2 {
                derivs.push(GridFunction::new(d2));
            }
            for s in 1..=params.r {
                let ratio = derivs[s - 1].sup_norm() / inf;
                worst = worst.max(ratio * params.c_consts[s - 1] / params.kappa);
            }
        }
    }
    Ok(InvarianceEstimate { lambda_hat: worst, pass: worst < 1.0, samples: n_samples })
}

/// Per-pair trace of the projective contraction measurement.
#[derive(Clone, Debug)]
pub struct ContractionTrace {
    pub theta_start: f64,
    /// Birkhoff factors Theta(L g1, L g2) / Theta(g1, g2) per iteration.
    pub factors: Vec<f64>,
    /// Cone-metric distances of the iterate pairs.
    pub theta_seq: Vec<f64>,
    /// Theta+ distances of the iterate pairs.
    pub theta_plus_seq: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    pub traces: Vec<ContractionTrace>,
    /// Largest measured contraction factor across pairs and iterations.
    pub max_factor: f64,
    /// Theoretical factor 1 - e^-Delta.
    pub bound: f64,
}

/// Iterate pairs of strict cone members under the operator and compare the
/// measured projective contraction against 1 - e^-Delta.
pub fn contraction_check(
    map: &CircleMap,
    pot: &PotentialSpec,
    params: &ConeParams,
    delta_diam: f64,
    pairs: &[(GridFunction, GridFunction)],
    n_iter: usize,
    budget: usize,
) -> Result<ContractionReport> {
    let bound = 1.0 - libm::exp(-delta_diam);
    let mut traces = Vec::with_capacity(pairs.len());
    let mut max_factor = 0.0_f64;
    for (g1, g2) in pairs {
        let mut a = g1.clone();
        let mut b = g2.clone();
        let mut theta_prev = theta_kappa(&a, &b, params, budget)?.theta;
        let theta_start = theta_prev;
        let mut factors = Vec::with_capacity(n_iter);
        let mut theta_seq = Vec::with_capacity(n_iter);
        let mut theta_plus_seq = Vec::with_capacity(n_iter);
        for _ in 0..n_iter {
            a = apply_operator(map, pot, &a)?;
            b = apply_operator(map, pot, &b)?;
            // projective quantities ignore scale; normalize to dodge overflow
            let sa = a.sup_norm();
            let sb = b.sup_norm();
            a = a.map(|v| v / sa);
            b = b.map(|v| v / sb);
            let tk = theta_kappa(&a, &b, params, budget)?;
            if theta_prev > 1e-13 {
                let factor = tk.theta / theta_prev;
                max_factor = max_factor.max(factor);
                factors.push(factor);
            }
            theta_seq.push(tk.theta);
            theta_plus_seq.push(tk.theta_plus);
            theta_prev = tk.theta;
        }
        traces.push(ContractionTrace { theta_start, factors, theta_seq, theta_plus_seq });
    }
    Ok(ContractionReport { traces, max_factor, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{CircleMap, PotentialSpec};
    use rand::SeedableRng;

    const TAU: f64 = core::f64::consts::PI * 2.0;

    #[test]
    fn theta_plus_examples() {
        let g = GridFunction::from_fn(128, |x| 1.5 + libm::sin(TAU * x));
        assert_eq!(theta_plus(&g, &g).unwrap(), 0.0);
        let g3 = g.map(|v| 3.0 * v);
        assert!(theta_plus(&g3, &g).unwrap().abs() < 1e-15);
        let one = GridFunction::constant(128, 1.0);
        let shifted = GridFunction::from_fn(128, |x| 2.0 + libm::cos(TAU * x));
        // ratio of 1/(2 + cos) ranges over [1/3, 1]
        assert!((theta_plus(&one, &shifted).unwrap() - libm::log(3.0)).abs() < 1e-12);
        let bad = GridFunction::from_fn(128, |x| libm::cos(TAU * x));
        assert!(matches!(theta_plus(&bad, &one), Err(Error::NonPositiveInput)));
    }

    #[test]
    fn theta_kappa_degenerate_pairs() {
        let params = ConeParams::holder(50.0, 0.5, 1.0);
        let g = GridFunction::from_fn(96, |x| 1.0 + 0.2 * libm::cos(TAU * x));
        let tk = theta_kappa(&g, &g, &params, 100_000).unwrap();
        assert!(tk.theta.abs() < 1e-12);
        assert!((tk.a - 1.0).abs() < 1e-12 && (tk.b - 1.0).abs() < 1e-12);
        let g2 = g.map(|v| 2.5 * v);
        let tk = theta_kappa(&g, &g2, &params, 100_000).unwrap();
        assert!(tk.theta.abs() < 1e-12);
        // constants: quotient is identically the ratio of levels
        let one = GridFunction::constant(96, 1.0);
        let two = GridFunction::constant(96, 2.0);
        let tk = theta_kappa(&one, &two, &params, 100_000).unwrap();
        assert!((tk.a - 2.0).abs() < 1e-12 && (tk.b - 2.0).abs() < 1e-12);
        assert!(tk.theta.abs() < 1e-12);
    }

    #[test]
    fn theta_kappa_dominates_theta_plus_and_is_symmetric() {
        let params = ConeParams::holder(60.0, 0.4, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..6 {
            let p1 = random_cone_member(&mut rng, &params, 0.2);
            let p2 = random_cone_member(&mut rng, &params, 0.2);
            let g1 = p1.sample(128);
            let g2 = p2.sample(128);
            let t12 = theta_kappa(&g1, &g2, &params, 200_000).unwrap();
            let t21 = theta_kappa(&g2, &g1, &params, 200_000).unwrap();
            assert!(t12.theta_plus <= t12.theta + 1e-12);
            assert!((t12.theta - t21.theta).abs() < 1e-9);
            assert!(t12.a <= t12.b);
        }
    }

    #[test]
    fn theta_kappa_triangle_inequality_on_samples() {
        let params = ConeParams::holder(60.0, 0.4, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let a = random_cone_member(&mut rng, &params, 0.2).sample(96);
            let b = random_cone_member(&mut rng, &params, 0.2).sample(96);
            let c = random_cone_member(&mut rng, &params, 0.2).sample(96);
            let ab = theta_kappa(&a, &b, &params, 100_000).unwrap().theta;
            let bc = theta_kappa(&b, &c, &params, 100_000).unwrap().theta;
            let ac = theta_kappa(&a, &c, &params, 100_000).unwrap().theta;
            // sampled distances are lower bounds, so allow sampling slack
            assert!(ac <= ab + bc + 0.05, "{ac} > {ab} + {bc}");
        }
    }

    #[test]
    fn membership_ratio_matches_analytic_lipschitz() {
        let params = ConeParams::holder(2.0 * core::f64::consts::PI + 0.01, 0.5, 1.0);
        let one = GridFunction::constant(256, 1.0);
        let m = cone_membership(&one, &params);
        assert!(m.member && m.ratio == 0.0);
        // 2 + cos has Lipschitz constant 2 pi and infimum 1
        let g = GridFunction::from_fn(512, |x| 2.0 + libm::cos(TAU * x));
        let m = cone_membership(&g, &params);
        assert!(m.member);
        assert!((m.ratio - TAU).abs() < 0.01);
        let tight = ConeParams::holder(6.2, 0.5, 1.0);
        assert!(!cone_membership(&g, &tight).member);
        // positivity failure
        let signed = GridFunction::from_fn(256, |x| libm::cos(TAU * x));
        let m = cone_membership(&signed, &params);
        assert!(!m.member && m.ratio.is_infinite());
    }

    #[test]
    fn smooth_membership_per_order() {
        let params = ConeParams::smooth(10.0, 0.5, 1.0, alloc::vec![4.0, 1.0]).unwrap();
        let g = GridFunction::constant(128, 2.0);
        let zero = GridFunction::constant(128, 0.0);
        let m = cone_membership_cr(&g, &[zero.clone(), zero.clone()], &params).unwrap();
        assert!(m.member);
        assert_eq!(m.ratios, alloc::vec![0.0, 0.0]);
        assert_eq!(m.bounds, alloc::vec![2.5, 10.0]);
        // order-1 condition at c = 1: |Dg| <= kappa inf g
        let p1 = ConeParams::smooth(1.0, 0.5, 1.0, alloc::vec![1.0]).unwrap();
        let poly = TrigPoly { modes: alloc::vec![(1, 0.1, 0.0)] };
        let g = poly.sample(256);
        let d1 = poly.sample_d(256, 1);
        let m = cone_membership_cr(&g, &[d1], &p1).unwrap();
        let expected = 0.1 * TAU / 0.9;
        assert!((m.ratios[0] - expected).abs() < 1e-3);
        assert!(m.member == (m.ratios[0] <= 1.0));
    }

    #[test]
    fn smooth_cone_constants_from_map_data() {
        // doubling with a mild potential budget: c2_1 = 2 (1 - Xi_2)^-1 e^eps
        // sup|D^2 f^-1| and the top constant is 1
        let map = CircleMap::doubling();
        let sups = inverse_derivative_sups(&map, 512, 2).unwrap();
        assert!((sups[0] - 0.5).abs() < 1e-15);
        assert_eq!(sups[1], 0.0); // affine branches
        let tri = cr_constants(2, 0, 1.0, 2.0, 0.01, &sups, 2).unwrap();
        assert_eq!(tri[0], alloc::vec![1.0]);
        assert_eq!(tri[1][1], 1.0);
        assert_eq!(tri[1][0], 0.0); // exact: no curvature, no order-1 penalty
        // the intermittent family is only C^(1+alpha): its second inverse
        // derivative is unbounded at the neutral point and must be refused
        let mp = CircleMap::manneville_pomeau(0.5).unwrap();
        assert!(matches!(
            inverse_derivative_sups(&mp, 2048, 2),
            Err(Error::MissingDerivative { order: 2 })
        ));
        // a curved C^2 family gets a positive constant matching the direct formula
        let pf = CircleMap::pitchfork(0.8).unwrap();
        let sups = inverse_derivative_sups(&pf, 2048, 2).unwrap();
        assert!(sups[1] > 0.0);
        let eps = 0.002;
        let tri = cr_constants(2, 0, 1.0, 1.2, eps, &sups, 2).unwrap();
        let xi2 = crate::hypotheses::compute_xi_r(2, 0, 1.0, 1.2, eps, 2).unwrap();
        let direct = 2.0 / (1.0 - xi2) * libm::exp(eps) * sups[1];
        assert!((tri[1][0] - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn cr_recursion_consistency_at_order_three() {
        // synthetic inverse-derivative sups exercise the generic recursion:
        // c^(3)_1 must equal c^(3)_2 * c^(2)_1
        let sups = [0.5, 0.3, 0.2];
        let tri = cr_constants(2, 0, 1.0, 2.0, 0.01, &sups, 3).unwrap();
        assert_eq!(tri[2][2], 1.0);
        let c3_2 = tri[2][1];
        let c2_1 = tri[1][0];
        assert!((tri[2][0] - c3_2 * c2_1).abs() <= 1e-15 * (c3_2 * c2_1).abs());
    }

    #[test]
    fn diameter_bound_formula() {
        // frozen arithmetic: 2 log((1 + 5*0.5*10*0.5) * 3) = 2 log 40.5
        let d = diameter_bound(10.0, 0.5, 5, 1.0).unwrap();
        assert!((d - 2.0 * libm::log(40.5)).abs() < 1e-12);
        assert!((d - 7.402_603_948_224_987).abs() < 1e-10);
        // shrinking contraction factor shrinks the diameter to zero
        let tiny = diameter_bound(10.0, 1e-9, 5, 1.0).unwrap();
        assert!(tiny < 1e-6);
        assert!(matches!(diameter_bound(10.0, 1.0, 5, 1.0), Err(Error::InvalidContraction(_))));
        assert!(matches!(diameter_bound(10.0, 0.0, 5, 1.0), Err(Error::InvalidContraction(_))));
    }

    #[test]
    fn random_members_respect_the_margin() {
        let params = ConeParams::holder(8.0, 0.3, 0.75, );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_cone_member(&mut rng, &params, 0.2);
            let g = p.sample(256);
            let m = cone_membership(&g, &params);
            assert!(m.member);
            assert!(m.ratio <= 0.82 * params.kappa, "ratio {} too close to kappa", m.ratio);
            assert!(g.min_value() >= 0.65);
        }
    }

    #[test]
    fn doubling_contracts_fourier_mode_apertures_by_half() {
        let map = CircleMap::doubling();
        let pot = PotentialSpec::constant(0.0);
        let params = ConeParams::holder(20.0, 0.5, 1.0);
        // first mode is annihilated outright
        let g1 = TrigPoly { modes: alloc::vec![(1, 0.1, 0.0)] }.sample(256);
        let out = apply_operator(&map, &pot, &g1).unwrap();
        let ratio_out = cone_membership(&out, &params).ratio;
        assert!(ratio_out <= 1e-10);
        // second mode halves its aperture: L(1 + a cos 4 pi x) = 2 + 2a cos 2 pi x
        let g2 = TrigPoly { modes: alloc::vec![(2, 0.1, 0.0)] }.sample(256);
        let ratio_in = cone_membership(&g2, &params).ratio;
        let out = apply_operator(&map, &pot, &g2).unwrap();
        let ratio_out = cone_membership(&out, &params).ratio;
        assert!(ratio_out <= 0.5 * ratio_in + 1e-9, "{ratio_out} vs half of {ratio_in}");
    }

    #[test]
    fn invariance_estimate_below_one_for_passing_pairs() {
        let map = CircleMap::doubling();
        let pot = PotentialSpec::constant(0.0);
        let params = ConeParams::holder(30.0, 0.5, 1.0);
        let est = verify_invariance(&map, &pot, &params, 256, 12, 42).unwrap();
        assert!(est.pass, "lambda_hat {}", est.lambda_hat);
        assert!(est.lambda_hat < 0.7);
        // smooth version on the doubling map at order 1
        let smooth = ConeParams::smooth(30.0, 0.5, 1.0, alloc::vec![1.0]).unwrap();
        let est = verify_invariance(&map, &pot, &smooth, 256, 12, 42).unwrap();
        assert!(est.pass);
        assert!(est.lambda_hat <= 0.51, "order-1 contraction is the branch slope");
    }

    #[test]
    fn invariance_on_intermittent_pair_with_small_potential() {
        let map = CircleMap::manneville_pomeau(0.25).unwrap();
        let pot = PotentialSpec::fourier(&[(0.001, 0.2)]);
        let params = ConeParams::holder(1000.0, 0.5, 1.0);
        let est = verify_invariance(&map, &pot, &params, 256, 10, 11).unwrap();
        assert!(est.pass, "lambda_hat {}", est.lambda_hat);
    }

    #[test]
    fn normalized_iterates_straddle_the_density() {
        // with both arguments normalized against the conformal weights,
        // the best bounding multiples of (h, iterate) straddle 1
        let map = CircleMap::doubling();
        let pot = PotentialSpec::fourier(&[(0.05, 0.3), (0.02, 1.1)]);
        let params = ConeParams::holder(40.0, 0.5, 1.0);
        let n = 256;
        let matrix = crate::operator::build_matrix(&map, &pot, n).unwrap();
        let sol = crate::operator::solve_spectrum(&matrix, 1e-12, 20_000).unwrap();
        let normalize = |g: &GridFunction| {
            let s: f64 = g.values().iter().zip(&sol.nu).map(|(&a, &b)| a * b).sum();
            g.map(|v| v / s)
        };
        let h = normalize(&sol.h);
        let mut g = TrigPoly { modes: alloc::vec![(1, 0.08, 0.4), (3, 0.02, 2.0)] }.sample(n);
        for k in 0..6 {
            g = GridFunction::new(matrix.apply(g.values()).iter().map(|v| v / sol.lambda).collect());
            let gn = normalize(&g);
            let tk = theta_kappa(&h, &gn, &params, 150_000).unwrap();
            assert!(tk.a <= 1.0 + 1e-6, "iterate {k}: A = {}", tk.a);
            assert!(tk.b >= 1.0 - 1e-6, "iterate {k}: B = {}", tk.b);
        }
    }

    #[test]
    fn contraction_factors_stay_below_birkhoff_bound() {
        let map = CircleMap::doubling();
        let pot = PotentialSpec::constant(0.0);
        let params = ConeParams::holder(30.0, 0.5, 1.0);
        let est = verify_invariance(&map, &pot, &params, 128, 8, 5).unwrap();
        let delta = diameter_bound(params.kappa, est.lambda_hat.max(1e-6), 5, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut pairs = Vec::new();
        for _ in 0..3 {
            let a = random_cone_member(&mut rng, &params, 0.2).sample(128);
            let b = random_cone_member(&mut rng, &params, 0.2).sample(128);
            pairs.push((a, b));
        }
        // identical pair contributes nothing
        let g = pairs[0].0.clone();
        pairs.push((g.clone(), g));
        let report = contraction_check(&map, &pot, &params, delta, &pairs, 5, 100_000).unwrap();
        assert!(report.max_factor <= report.bound + 0.01, "{} vs {}", report.max_factor, report.bound);
        assert!(report.max_factor < 1.0);
        for trace in &report.traces {
            for (k, tp) in trace.theta_plus_seq.iter().enumerate() {
                // iterate distances sit inside the diameter envelope
                assert!(*tp <= delta * libm::pow(report.bound, k as f64) + 1e-9);
            }
        }
    }
}
