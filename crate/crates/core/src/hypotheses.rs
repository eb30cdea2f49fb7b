//! Quantitative verification of the standing hypotheses on a (map, potential)
//! pair: coexistence of expansion and mild contraction (H1), covering of the
//! contraction region by few injectivity domains (H2), smallness of the
//! potential (P and its differentiable variant P'), and the constant
//! relations that make the transfer operator contract a projective cone.
//!
//! Checks never error on failure; each produces a [`ConditionRecord`] whose
//! margin says how far the inequality is from breaking. Margins estimated on
//! a grid carry a refinement flag when a doubled grid moves them by more than
//! their own size.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::circle::DIAM;
use crate::dynamics::{build_partition, CircleMap, CoverSpec, PotentialSpec};
use crate::error::Error;
use crate::Result;

/// Outcome of one checked inequality, lhs < rhs (or <= when `strict` is
/// false). `margin = rhs - lhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    /// Comparison is strict (`lhs < rhs`) rather than closed.
    pub strict: bool,
    /// Margin moved by more than its own size under grid refinement.
    pub refinement_uncertain: bool,
}

impl ConditionRecord {
    fn closed(name: &str, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        ConditionRecord {
            name: String::from(name),
            lhs,
            rhs,
            margin,
            pass: margin >= 0.0,
            strict: false,
            refinement_uncertain: false,
        }
    }

    fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        ConditionRecord {
            name: String::from(name),
            lhs,
            rhs,
            margin,
            pass: margin > 0.0,
            strict: true,
            refinement_uncertain: false,
        }
    }

    fn with_refinement(mut self, margin_refined: f64) -> Self {
        self.refinement_uncertain =
            libm::fabs(margin_refined - self.margin) > libm::fabs(self.margin);
        self
    }
}

/// Configuration for [`evaluate`].
#[derive(Clone, Debug)]
pub struct HypothesisConfig {
    /// Grid size for sup/inf/seminorm estimation.
    pub grid: usize,
    /// Radius below which the local Hoelder seminorm is measured.
    pub delta: f64,
    /// Hoelder exponent; `None` takes the potential's own exponent.
    pub alpha: Option<f64>,
    /// Itinerary frequency parameter in (0, 1).
    pub gamma: f64,
    /// Hyperbolic-time exponent; `None` picks half the admissible maximum.
    pub c: Option<f64>,
    /// Differentiability order for the smooth cone conditions (0, 1 or 2).
    pub r: usize,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        HypothesisConfig { grid: 4096, delta: 0.5, alpha: None, gamma: 0.9, c: None, r: 0 }
    }
}

/// Everything the checker measured, with one record per condition.
#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub deg: usize,
    pub q: usize,
    /// Cardinality of the partition generated by the cover.
    pub p: usize,
    pub l: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub c: f64,
    pub c_max: f64,
    pub eps_phi: f64,
    pub eps_phi_prime: f64,
    pub xi_r: f64,
    pub m: usize,
    pub delta: f64,
    pub alpha: f64,
    pub r: usize,
    pub records: Vec<ConditionRecord>,
    pub pass: bool,
}

impl HypothesisReport {
    pub fn record(&self, name: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// The existence-level gate: expansion geometry (H1, H2, the
    /// expansion/contraction balance) plus the variation bound
    /// sup phi - inf phi < log deg - log q. Weaker than `pass`, which also
    /// demands the cone-contraction budgets (P)/(P').
    pub fn pass_existence(&self) -> bool {
        ["H1", "H2", "eq-relation-expansion", "variation-bound"]
            .iter()
            .all(|name| self.record(name).is_none_or(|r| r.pass))
    }
}

/// Covering number bound: m = s + 2 where s balls of radius delta/3 cover the
/// circle.
pub fn global_holder_factor(delta: f64) -> usize {
    assert!(delta > 0.0);
    let s = libm::ceil(3.0 / (2.0 * delta)) as usize;
    s + 2
}

/// A function (C, alpha)-Hoelder on balls of radius delta is
/// (C (1 + r^alpha), alpha)-Hoelder on balls of radius (1 + r) delta.
pub fn extend_holder_constant(c: f64, r: f64, alpha: f64) -> f64 {
    assert!(r > 0.0 && r <= 1.0);
    c * (1.0 + libm::pow(r, alpha))
}

/// Average backward-contraction factor
/// Q = ((deg - q) sigma^-alpha + q L^alpha (1 + (L-1)^alpha)) / deg.
pub fn relation_potential_q(deg: usize, q: usize, l: f64, sigma: f64, alpha: f64) -> f64 {
    let d = deg as f64;
    let expanding = (d - q as f64) * libm::pow(sigma, -alpha);
    let contracting = q as f64 * libm::pow(l, alpha) * (1.0 + libm::pow(l - 1.0, alpha));
    (expanding + contracting) / d
}

/// Largest eps > 0 with  e^eps Q + eps 2 m L^alpha diam^alpha < 1, found by
/// bisection to 1e-10 and capped strictly below log(deg) - log(q) when
/// q >= 1.
pub fn compute_epsilon_phi(
    deg: usize,
    q: usize,
    l: f64,
    sigma: f64,
    alpha: f64,
    m: usize,
) -> Result<f64> {
    let qq = relation_potential_q(deg, q, l, sigma, alpha);
    if qq >= 1.0 {
        return Err(Error::Infeasible(format!(
            "average backward contraction Q = {qq} >= 1"
        )));
    }
    let cap = if q >= 1 {
        libm::log(deg as f64) - libm::log(q as f64)
    } else {
        f64::INFINITY
    };
    if cap <= 0.0 {
        return Err(Error::Infeasible(
            "q = deg leaves no admissible potential variation".into(),
        ));
    }
    let slope = 2.0 * m as f64 * libm::pow(l, alpha) * libm::pow(DIAM, alpha);
    let objective = |e: f64| libm::exp(e) * qq + e * slope;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while objective(hi) < 1.0 && hi < 64.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if objective(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.min(cap * (1.0 - 1e-12)))
}

/// Xi_r = e^eps_phi (q L^r + (deg - q) / sigma) / deg.
pub fn compute_xi_r(
    deg: usize,
    q: usize,
    l: f64,
    sigma: f64,
    eps_phi: f64,
    r: usize,
) -> Result<f64> {
    let d = deg as f64;
    let xi =
        libm::exp(eps_phi) * (q as f64 * libm::pow(l, r as f64) + (d - q as f64) / sigma) / d;
    if xi >= 1.0 {
        return Err(Error::Infeasible(format!("Xi_{r} = {xi} >= 1")));
    }
    Ok(xi)
}

/// Largest eps' with (1 + eps') e^eps_phi Q < 1 (closed form).
pub fn compute_epsilon_phi_prime(eps_phi: f64, q_factor: f64) -> Result<f64> {
    let base = libm::exp(eps_phi) * q_factor;
    if base >= 1.0 {
        return Err(Error::Infeasible(format!(
            "e^eps_phi Q = {base} >= 1 admits no positive derivative budget"
        )));
    }
    Ok(1.0 / base - 1.0)
}

/// (H1) on a grid: 1/|Df| < 1/sigma off the contraction region, closed
/// comparison since the grid can sit exactly on the boundary value. Returns
/// the record and the measured inverse Lipschitz bound L on the region.
pub fn check_h1(map: &CircleMap, sigma: f64, grid: usize) -> Result<(ConditionRecord, f64)> {
    let mut sup_outside = 0.0_f64;
    let mut sup_inside = f64::NEG_INFINITY;
    for i in 0..grid {
        let x = i as f64 / grid as f64;
        let d = libm::fabs(map.derivative(x)?);
        if d <= 0.0 {
            return Err(Error::InvalidParameter(format!("derivative vanishes at {x}")));
        }
        let inv = 1.0 / d;
        if map.in_contraction_region(x) {
            sup_inside = sup_inside.max(inv);
        } else {
            sup_outside = sup_outside.max(inv);
        }
    }
    for arc in map.contraction_region() {
        let d = libm::fabs(map.derivative(arc.lo())?);
        if d > 0.0 {
            sup_inside = sup_inside.max(1.0 / d);
        }
    }
    // empty sup convention: L = 1 for a uniformly expanding map
    let l = if sup_inside.is_finite() { sup_inside.max(1.0) } else { 1.0 };
    let record = ConditionRecord::closed("H1", sup_outside, 1.0 / sigma);
    Ok((record, l))
}

/// (H2): the contraction region meets q < deg cover arcs.
pub fn check_h2(map: &CircleMap, cover: &CoverSpec) -> ConditionRecord {
    let q = cover.q(map);
    ConditionRecord::strict("H2", q as f64, map.degree() as f64)
}

/// Expansion/contraction balance  sigma^-(1-gamma) L^gamma < e^-2c < 1.
/// Returns the record and the supremum of admissible c.
pub fn check_expansion_relation(sigma: f64, l: f64, gamma: f64, c: f64) -> (ConditionRecord, f64) {
    let lhs = libm::pow(sigma, -(1.0 - gamma)) * libm::pow(l, gamma);
    let rhs = libm::exp(-2.0 * c);
    let mut record = ConditionRecord::strict("eq-relation-expansion", lhs, rhs);
    if rhs >= 1.0 {
        record.pass = false;
    }
    let c_max = if lhs < 1.0 { -libm::log(lhs) / 2.0 } else { 0.0 };
    (record, c_max)
}

/// Grid quantities entering (P) and (P').
#[derive(Clone, Debug)]
pub struct PotentialProfile {
    pub sup: f64,
    pub inf: f64,
    /// Local Hoelder seminorm of e^phi over pairs at distance <= delta.
    pub exp_seminorm_local: f64,
    /// Sup of |D^s phi| for s = 1..=r (empty when r = 0).
    pub derivative_sups: Vec<f64>,
}

pub fn potential_profile(
    pot: &PotentialSpec,
    grid: usize,
    delta: f64,
    alpha: f64,
    r: usize,
) -> Result<PotentialProfile> {
    let samples = crate::grid::GridFunction::from_fn(grid, |x| pot.eval(x));
    let (sup, inf) = (samples.max_value(), samples.min_value());
    let exp_samples = samples.map(libm::exp);
    let exp_seminorm_local = exp_samples.holder_seminorm(alpha, delta);
    let mut derivative_sups = Vec::new();
    for s in 1..=r {
        let mut worst = 0.0_f64;
        for i in 0..grid {
            let x = i as f64 / grid as f64;
            let v = match s {
                1 => pot.d1(x)?,
                2 => pot.d2(x)?,
                _ => return Err(Error::InvalidParameter("r must be at most 2".into())),
            };
            worst = worst.max(libm::fabs(v));
        }
        derivative_sups.push(worst);
    }
    Ok(PotentialProfile { sup, inf, exp_seminorm_local, derivative_sups })
}

/// (P): sup phi - inf phi < eps_phi and m |e^phi|_{alpha,delta} < eps_phi
/// e^{inf phi}. The record reports the binding inequality.
pub fn check_p(profile: &PotentialProfile, eps_phi: f64, m: usize) -> ConditionRecord {
    let variation = profile.sup - profile.inf;
    let seminorm_global = m as f64 * profile.exp_seminorm_local;
    let margin_var = eps_phi - variation;
    let margin_sem = eps_phi * libm::exp(profile.inf) - seminorm_global;
    let mut record = if margin_var <= margin_sem {
        ConditionRecord::strict("P", variation, eps_phi)
    } else {
        ConditionRecord::strict("P", seminorm_global, eps_phi * libm::exp(profile.inf))
    };
    record.pass = margin_var > 0.0 && margin_sem > 0.0;
    record
}

/// (P'): sup phi - inf phi < eps_phi and max_{s<=r} |D^s phi|_0 < eps'_phi.
pub fn check_p_prime(profile: &PotentialProfile, eps_phi: f64, eps_prime: f64) -> ConditionRecord {
    let variation = profile.sup - profile.inf;
    let dmax = profile.derivative_sups.iter().copied().fold(0.0_f64, f64::max);
    let margin_var = eps_phi - variation;
    let margin_d = eps_prime - dmax;
    let mut record = if margin_var <= margin_d {
        ConditionRecord::strict("P'", variation, eps_phi)
    } else {
        ConditionRecord::strict("P'", dmax, eps_prime)
    };
    record.pass = margin_var > 0.0 && margin_d > 0.0;
    record
}

/// Number of length-n itineraries over p symbols in which symbols <= q occur
/// strictly more than gamma n times. Exact below n = 40, log-space above.
pub fn count_itineraries(gamma: f64, n: usize, q: usize, p: usize) -> f64 {
    assert!(q <= p && p >= 1 && n >= 1);
    let k_min = (libm::floor(gamma * n as f64) as usize) + 1;
    if q == 0 || k_min > n {
        return 0.0;
    }
    if n <= 40 {
        let (qf, rf) = (q as f64, (p - q) as f64);
        if rf == 0.0 {
            // only the k = n term survives
            return libm::pow(qf, n as f64);
        }
        let mut total = 0.0_f64;
        let mut binom = 1.0_f64; // C(n, 0)
        let mut term_pow = libm::pow(rf, n as f64); // q^0 (p-q)^n
        for k in 0..=n {
            if k >= k_min {
                total += binom * term_pow;
            }
            if k < n {
                binom = binom * (n - k) as f64 / (k + 1) as f64;
                term_pow = term_pow * qf / rf;
            }
        }
        total
    } else {
        libm::exp(log_count_itineraries(gamma, n, q, p))
    }
}

/// log of [`count_itineraries`] via a log-sum-exp over the binomial terms.
pub fn log_count_itineraries(gamma: f64, n: usize, q: usize, p: usize) -> f64 {
    assert!(q <= p && p >= 1 && n >= 1);
    let k_min = (libm::floor(gamma * n as f64) as usize) + 1;
    if q == 0 || k_min > n {
        return f64::NEG_INFINITY;
    }
    let mut ln_fact = Vec::with_capacity(n + 1);
    ln_fact.push(0.0_f64);
    for k in 1..=n {
        ln_fact.push(ln_fact[k - 1] + libm::log(k as f64));
    }
    let ln_q = libm::log(q as f64);
    let ln_r = if p > q { libm::log((p - q) as f64) } else { f64::NEG_INFINITY };
    let mut terms: Vec<f64> = Vec::new();
    for k in k_min..=n {
        if p == q && k < n {
            continue;
        }
        let ln_binom = ln_fact[n] - ln_fact[k] - ln_fact[n - k];
        let tail = if n > k { (n - k) as f64 * ln_r } else { 0.0 };
        terms.push(ln_binom + k as f64 * ln_q + tail);
    }
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&t| libm::exp(t - peak)).sum();
    peak + libm::log(sum)
}

/// (1/n) log of the itinerary count at n = n_max, the finite-n estimate of
/// the combinatorial growth rate c_gamma.
pub fn c_gamma_estimate(gamma: f64, q: usize, p: usize, n_max: usize) -> f64 {
    let lc = log_count_itineraries(gamma, n_max, q, p);
    if lc == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        lc / n_max as f64
    }
}

/// Run every check on a (map, potential, cover) triple.
pub fn evaluate(
    map: &CircleMap,
    pot: &PotentialSpec,
    cover: &CoverSpec,
    cfg: &HypothesisConfig,
) -> Result<HypothesisReport> {
    if cfg.r > 2 {
        return Err(Error::InvalidParameter(
            "differentiability order r must be at most 2".into(),
        ));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(Error::InvalidParameter("gamma must lie in (0, 1)".into()));
    }
    let alpha = cfg.alpha.unwrap_or_else(|| pot.alpha());
    let m = global_holder_factor(cfg.delta);
    let partition = build_partition(cover, map)?;
    let deg = map.degree();
    let q = partition.q;

    let mut records = Vec::new();

    let (h1, l) = check_h1(map, map.sigma(), cfg.grid)?;
    let (h1_refined, _) = check_h1(map, map.sigma(), 2 * cfg.grid)?;
    records.push(h1.with_refinement(h1_refined.margin));

    records.push(check_h2(map, cover));

    let (_, c_max) = check_expansion_relation(map.sigma(), l, cfg.gamma, 0.0);
    let c = cfg.c.unwrap_or(0.5 * c_max);
    let (c_rec, _) = check_expansion_relation(map.sigma(), l, cfg.gamma, c);
    records.push(c_rec);

    let q_factor = relation_potential_q(deg, q, l, map.sigma(), alpha);
    records.push(ConditionRecord::strict("eq-relation-potential", q_factor, 1.0));

    let eps_phi = compute_epsilon_phi(deg, q, l, map.sigma(), alpha, m).unwrap_or(0.0);
    let slope = 2.0 * m as f64 * libm::pow(l, alpha) * libm::pow(DIAM, alpha);
    let vep_lhs = if eps_phi > 0.0 {
        libm::exp(eps_phi) * q_factor + eps_phi * slope
    } else {
        q_factor.max(1.0)
    };
    let mut vep = ConditionRecord::strict("eq-vep", vep_lhs, 1.0);
    vep.pass = vep.pass && eps_phi > 0.0;
    records.push(vep);

    if q >= 1 {
        let probe = potential_profile(pot, cfg.grid, cfg.delta, alpha, 0)?;
        let variation = probe.sup - probe.inf;
        let bound = libm::log(deg as f64) - libm::log(q as f64);
        records.push(ConditionRecord::strict("variation-bound", variation, bound));
    }

    let profile = potential_profile(pot, cfg.grid, cfg.delta, alpha, cfg.r)?;
    let profile_refined = potential_profile(pot, 2 * cfg.grid, cfg.delta, alpha, cfg.r)?;
    records.push(
        check_p(&profile, eps_phi, m)
            .with_refinement(check_p(&profile_refined, eps_phi, m).margin),
    );

    let xi_r = compute_xi_r(deg, q, l, map.sigma(), eps_phi, cfg.r).unwrap_or(f64::INFINITY);
    let xi_finite = if xi_r.is_finite() { xi_r } else { f64::MAX };
    records.push(ConditionRecord::strict("xi-r", xi_finite, 1.0));

    let eps_prime = compute_epsilon_phi_prime(eps_phi, q_factor).unwrap_or(0.0);
    let vepp_lhs = libm::exp(eps_phi) * q_factor;
    let mut vepp = ConditionRecord::strict("eq-vepp", vepp_lhs, 1.0);
    vepp.pass = vepp.pass && eps_prime > 0.0;
    records.push(vepp);

    if cfg.r >= 1 {
        records.push(
            check_p_prime(&profile, eps_phi, eps_prime)
                .with_refinement(check_p_prime(&profile_refined, eps_phi, eps_prime).margin),
        );
    }

    let pass = records.iter().all(|r| r.pass);
    Ok(HypothesisReport {
        deg,
        q,
        p: partition.cardinality(),
        l,
        sigma: map.sigma(),
        gamma: cfg.gamma,
        c,
        c_max,
        eps_phi,
        eps_phi_prime: eps_prime,
        xi_r,
        m,
        delta: cfg.delta,
        alpha,
        r: cfg.r,
        records,
        pass,
    })
}
