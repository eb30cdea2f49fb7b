//! Full-branch piecewise-monotone expanding circle maps, potentials, and
//! covers by injectivity domains.
//!
//! Every map here is a local homeomorphism of the circle whose branches each
//! map their domain onto the whole circle, so every point has exactly
//! `deg(f)` preimages, one per branch. Branches are represented through
//! monotone lifts: branch k carries a strictly increasing function with
//! lift(hi) = lift(lo) + 1, and the circle value is the lift reduced mod 1.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::circle::{wrap, CircleArc, IntervalSet};
use crate::error::Error;
use crate::Result;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const INVERSION_TOL: f64 = 1e-13;
const INVERSION_CAP: usize = 200;

/// One monotone branch of a circle map, given by its lift.
#[derive(Clone)]
pub struct Branch {
    lo: f64,
    hi: f64,
    lift_lo: f64,
    lift: RealFn,
    d1: Option<RealFn>,
    d2: Option<RealFn>,
    /// Analytic inverse: circle point -> preimage in [lo, hi), when known.
    inverse: Option<RealFn>,
}

impl Branch {
    pub fn new(lo: f64, hi: f64, lift_lo: f64, lift: RealFn) -> Self {
        Branch { lo, hi, lift_lo, lift, d1: None, d2: None, inverse: None }
    }

    pub fn with_d1(mut self, d1: RealFn) -> Self {
        self.d1 = Some(d1);
        self
    }

    pub fn with_d2(mut self, d2: RealFn) -> Self {
        self.d2 = Some(d2);
        self
    }

    pub fn with_inverse(mut self, inverse: RealFn) -> Self {
        self.inverse = Some(inverse);
        self
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Value of the monotone lift at y in [lo, hi].
    pub fn lift_value(&self, y: f64) -> f64 {
        (self.lift)(y)
    }

    fn lift_eval(&self, y: f64) -> f64 {
        (self.lift)(y)
    }

    /// Representative of the circle point x in [lift_lo, lift_lo + 1).
    fn lift_target(&self, x: f64) -> f64 {
        x + libm::ceil(self.lift_lo - x)
    }

    /// Preimage of the circle point x under this branch.
    fn invert(&self, x: f64) -> Result<f64> {
        if let Some(inv) = &self.inverse {
            let y = inv(x);
            return Ok(y.clamp(self.lo, self.hi));
        }
        let target = self.lift_target(x);
        let mut lo = self.lo;
        let mut hi = self.hi;
        let mut y = 0.5 * (lo + hi);
        for _ in 0..INVERSION_CAP {
            let val = self.lift_eval(y) - target;
            if libm::fabs(val) <= INVERSION_TOL {
                return Ok(y.clamp(self.lo, self.hi));
            }
            if val > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let mut next = f64::NAN;
            if let Some(d1) = &self.d1 {
                let dv = d1(y);
                if dv.is_finite() && dv > 1e-12 {
                    next = y - val / dv;
                }
            }
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            y = next;
        }
        Err(Error::NumericFailure { what: "branch inversion", x })
    }
}

/// Built-in map families the toolkit knows how to build and perturb.
#[derive(Clone, Debug, PartialEq)]
pub enum MapFamily {
    Doubling,
    ShiftedDoubling { n: u32 },
    MannevillePomeau { alpha: f64 },
    Pitchfork { t: f64 },
    Custom,
}

/// Full-branch piecewise-monotone expanding circle map.
///
/// `sigma` is the expansion constant: outside the contraction region the
/// inverse branches contract by at least 1/sigma. `lip` bounds the inverse
/// Lipschitz constant 1/|Df| on the contraction region (1 when it is empty).
#[derive(Clone)]
pub struct CircleMap {
    id: String,
    family: MapFamily,
    endpoints: Vec<f64>,
    branches: Vec<Branch>,
    contraction: Vec<CircleArc>,
    sigma: f64,
    lip: f64,
    log_df_alpha: f64,
}

impl CircleMap {
    pub fn from_branches(
        id: String,
        family: MapFamily,
        branches: Vec<Branch>,
        contraction: Vec<CircleArc>,
        sigma: f64,
    ) -> Result<Self> {
        if sigma <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "expansion constant must exceed 1, got {sigma}"
            )));
        }
        if branches.len() < 2 {
            return Err(Error::InvalidParameter("need at least two branches".into()));
        }
        let mut endpoints: Vec<f64> = branches.iter().map(|b| b.lo).collect();
        endpoints.push(1.0);
        if endpoints[0] != 0.0 {
            return Err(Error::InvalidParameter("first branch must start at 0".into()));
        }
        for w in endpoints.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter("branch endpoints must increase".into()));
            }
        }
        for (k, b) in branches.iter().enumerate() {
            let expected_hi = endpoints[k + 1];
            if libm::fabs(b.hi - expected_hi) > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "branch {k} does not end where branch {} starts",
                    k + 1
                )));
            }
            let span = b.lift_eval(b.hi) - b.lift_eval(b.lo);
            if libm::fabs(span - 1.0) > 1e-8 {
                return Err(Error::InvalidParameter(format!(
                    "branch {k} is not a full branch (lift span {span})"
                )));
            }
            // monotonicity spot check
            let mut prev = b.lift_eval(b.lo);
            for j in 1..=64 {
                let y = b.lo + b.width() * j as f64 / 64.0;
                let v = b.lift_eval(y);
                if v <= prev {
                    return Err(Error::InvalidParameter(format!(
                        "branch {k} is not strictly increasing near y = {y}"
                    )));
                }
                prev = v;
            }
        }
        let mut map = CircleMap {
            id,
            family,
            endpoints,
            branches,
            contraction,
            sigma,
            lip: 1.0,
            log_df_alpha: 1.0,
        };
        map.lip = map.computed_lip();
        Ok(map)
    }

    /// The angle-doubling map x -> 2x mod 1.
    pub fn doubling() -> Self {
        affine_degree_two("doubling", MapFamily::Doubling, 0.0)
            .expect("doubling map is always valid")
    }

    /// The family x -> 2(x + 1/(10 n)) mod 1 of shifted doublings.
    pub fn shifted_doubling(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("shift index must be positive".into()));
        }
        let shift = 1.0 / (5.0 * n as f64);
        affine_degree_two(
            &format!("shifted_doubling({n})"),
            MapFamily::ShiftedDoubling { n },
            shift,
        )
    }

    /// x -> 2x + s mod 1 for an arbitrary shift s.
    pub fn doubling_shifted_by(s: f64) -> Result<Self> {
        affine_degree_two(&format!("doubling+{s}"), MapFamily::Custom, s)
    }

    /// The intermittent family with an indifferent fixed point at 0:
    /// x (1 + 2^a x^a) on the first half, 2x - 1 on the second.
    ///
    /// The contraction region is the maximal arc at 0 on which
    /// 1/|Df| >= 1/sigma, computed in closed form.
    pub fn manneville_pomeau(alpha: f64) -> Result<Self> {
        Self::manneville_pomeau_with_sigma(alpha, 1.25)
    }

    pub fn manneville_pomeau_with_sigma(alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "intermittency exponent must lie in (0, 1), got {alpha}"
            )));
        }
        if !(sigma > 1.0 && sigma < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "expansion constant for the intermittent family must lie in (1, 2), got {sigma}"
            )));
        }
        let c = libm::pow(2.0, alpha);
        let lift0: RealFn = Arc::new(move |x| x * (1.0 + c * libm::pow(x, alpha)));
        let d1_0: RealFn = Arc::new(move |x| 1.0 + c * (1.0 + alpha) * libm::pow(x, alpha));
        let d2_0: RealFn = Arc::new(move |x| c * (1.0 + alpha) * alpha * libm::pow(x, alpha - 1.0));
        let branch0 = Branch::new(0.0, 0.5, 0.0, lift0).with_d1(d1_0).with_d2(d2_0);
        let branch1 = affine_branch(0.5, 1.0, 2.0, -1.0);
        // Df(x) = sigma at x = ((sigma - 1)/(2^a (1+a)))^(1/a)
        let x_star = libm::pow((sigma - 1.0) / (c * (1.0 + alpha)), 1.0 / alpha);
        let contraction = alloc::vec![CircleArc::from_endpoints(0.0, x_star)];
        let mut map = CircleMap::from_branches(
            format!("manneville_pomeau({alpha})"),
            MapFamily::MannevillePomeau { alpha },
            alloc::vec![branch0, branch1],
            contraction,
            sigma,
        )?;
        map.log_df_alpha = alpha;
        Ok(map)
    }

    /// Smooth one-parameter deformation of the doubling map supported inside
    /// the first branch domain; t = 0 is the doubling map itself and the
    /// bump's slope is normalized so that Df = 2 + t b'(x) with max |b'| = 1.
    pub fn pitchfork(t: f64) -> Result<Self> {
        Self::pitchfork_with_sigma(t, 1.5)
    }

    pub fn pitchfork_with_sigma(t: f64, sigma: f64) -> Result<Self> {
        const T_MAX: f64 = 1.9;
        if libm::fabs(t) > T_MAX || t.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "deformation size must satisfy |t| <= {T_MAX}, got {t}"
            )));
        }
        let lift0: RealFn = Arc::new(move |x| 2.0 * x + t * bump(x));
        let d1_0: RealFn = Arc::new(move |x| 2.0 + t * bump_d1(x));
        let d2_0: RealFn = Arc::new(move |x| t * bump_d2(x));
        let branch0 = Branch::new(0.0, 0.5, 0.0, lift0).with_d1(d1_0).with_d2(d2_0);
        let branch1 = affine_branch(0.5, 1.0, 2.0, -1.0);
        let mut map = CircleMap::from_branches(
            format!("pitchfork({t})"),
            MapFamily::Pitchfork { t },
            alloc::vec![branch0, branch1],
            Vec::new(),
            sigma,
        )?;
        map.contraction = map.scan_contraction_region(8192);
        map.lip = map.computed_lip();
        Ok(map)
    }

    /// Replace the contraction region by an explicitly supplied one.
    pub fn with_contraction_region(mut self, arcs: Vec<CircleArc>) -> Self {
        self.contraction = arcs;
        self.lip = self.computed_lip();
        self
    }

    /// Change the expansion constant and recompute the contraction region as
    /// the closure of { x : 1/|Df(x)| >= 1/sigma } on a fine grid.
    pub fn with_expansion_constant(mut self, sigma: f64) -> Result<Self> {
        if sigma <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "expansion constant must exceed 1, got {sigma}"
            )));
        }
        self.sigma = sigma;
        self.contraction = self.scan_contraction_region(8192);
        self.lip = self.computed_lip();
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn family(&self) -> &MapFamily {
        &self.family
    }

    pub fn degree(&self) -> usize {
        self.branches.len()
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn branch_width_min(&self) -> f64 {
        self.branches
            .iter()
            .map(Branch::width)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Inverse Lipschitz bound on the contraction region (1 when empty).
    pub fn lip(&self) -> f64 {
        self.lip
    }

    /// Hoelder exponent of log|Df| along branches (1 for smooth families).
    pub fn log_df_alpha(&self) -> f64 {
        self.log_df_alpha
    }

    pub fn contraction_region(&self) -> &[CircleArc] {
        &self.contraction
    }

    pub fn in_contraction_region(&self, x: f64) -> bool {
        self.contraction.iter().any(|a| a.contains(x))
    }

    /// Index of the branch whose domain contains x.
    pub fn branch_index(&self, x: f64) -> usize {
        let x = wrap(x);
        // endpoints are sorted; find the last endpoint <= x
        match self.endpoints.binary_search_by(|e| e.total_cmp(&x)) {
            Ok(k) => k.min(self.branches.len() - 1),
            Err(k) => k - 1,
        }
    }

    pub fn branch(&self, k: usize) -> &Branch {
        &self.branches[k]
    }

    /// Forward evaluation f(x), reduced mod 1.
    pub fn eval(&self, x: f64) -> f64 {
        let x = wrap(x);
        let b = &self.branches[self.branch_index(x)];
        wrap(b.lift_eval(x))
    }

    pub fn iterate(&self, x: f64, n: usize) -> f64 {
        let mut y = wrap(x);
        for _ in 0..n {
            y = self.eval(y);
        }
        y
    }

    /// Df(x) from the branch containing x.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let x = wrap(x);
        let b = &self.branches[self.branch_index(x)];
        match &b.d1 {
            Some(d) => Ok(d(x)),
            None => Err(Error::MissingDerivative { order: 1 }),
        }
    }

    pub fn derivative2(&self, x: f64) -> Result<f64> {
        let x = wrap(x);
        let b = &self.branches[self.branch_index(x)];
        match &b.d2 {
            Some(d) => Ok(d(x)),
            None => Err(Error::MissingDerivative { order: 2 }),
        }
    }

    pub fn has_derivatives(&self, order: usize) -> bool {
        self.branches.iter().all(|b| match order {
            0 => true,
            1 => b.d1.is_some(),
            2 => b.d1.is_some() && b.d2.is_some(),
            _ => false,
        })
    }

    /// Preimage of x under branch k.
    pub fn inverse_branch(&self, k: usize, x: f64) -> Result<f64> {
        self.branches[k].invert(wrap(x))
    }

    /// All deg(f) preimages of x, ordered by branch index.
    pub fn inverse_branches(&self, x: f64) -> Result<Vec<f64>> {
        let x = wrap(x);
        self.branches.iter().map(|b| b.invert(x)).collect()
    }

    /// Global sup of 1/|Df| over a scan grid (with branch endpoints), used as
    /// the uniform inverse Lipschitz constant in perturbation bounds.
    pub fn sup_inverse_lipschitz(&self, samples: usize) -> Result<f64> {
        let mut worst = 0.0_f64;
        for i in 0..samples {
            let x = i as f64 / samples as f64;
            let d = libm::fabs(self.derivative(x)?);
            if d <= 0.0 {
                return Err(Error::InvalidParameter(format!("derivative vanishes at {x}")));
            }
            worst = worst.max(1.0 / d);
        }
        for b in &self.branches {
            let d = libm::fabs(self.derivative(b.lo)?);
            worst = worst.max(1.0 / d);
        }
        Ok(worst)
    }

    fn computed_lip(&self) -> f64 {
        let mut worst = 1.0_f64;
        for arc in &self.contraction {
            let steps = 512;
            for j in 0..=steps {
                let x = wrap(arc.lo() + arc.len() * j as f64 / steps as f64);
                if let Ok(d) = self.derivative(x) {
                    let d = libm::fabs(d);
                    if d > 0.0 {
                        worst = worst.max(1.0 / d);
                    }
                }
            }
        }
        worst
    }

    /// Maximal runs of { Df <= sigma } on a fine grid, refined by bisection
    /// inside the branch containing each boundary.
    fn scan_contraction_region(&self, n: usize) -> Vec<CircleArc> {
        let slow = |x: f64| -> bool {
            match self.derivative(x) {
                Ok(d) => libm::fabs(d) <= self.sigma,
                Err(_) => false,
            }
        };
        let flags: Vec<bool> = (0..n).map(|i| slow(i as f64 / n as f64)).collect();
        if flags.iter().all(|&f| !f) {
            return Vec::new();
        }
        if flags.iter().all(|&f| f) {
            return alloc::vec![CircleArc::full()];
        }
        let refine = |mut inside: f64, mut outside: f64| -> f64 {
            // keep the bisection inside one branch
            if self.branch_index(inside) != self.branch_index(outside) {
                return inside;
            }
            for _ in 0..60 {
                let mid = 0.5 * (inside + outside);
                if slow(mid) {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            0.5 * (inside + outside)
        };
        let h = 1.0 / n as f64;
        let mut arcs = Vec::new();
        // walk circularly and emit [entry, exit) runs
        let mut starts = Vec::new();
        for i in 0..n {
            let prev = flags[(i + n - 1) % n];
            if flags[i] && !prev {
                starts.push(i);
            }
        }
        for &s in &starts {
            let mut e = s;
            while flags[(e + 1) % n] {
                e = (e + 1) % n;
                if e == s {
                    break;
                }
            }
            let lo_in = s as f64 * h;
            let lo_out = wrap((s as f64 - 1.0) * h);
            let hi_in = e as f64 * h;
            let hi_out = wrap((e as f64 + 1.0) * h);
            let lo = refine(lo_in, lo_out);
            let hi = refine(hi_in, hi_out);
            arcs.push(CircleArc::from_endpoints(lo, hi));
        }
        arcs
    }
}

fn affine_branch(lo: f64, hi: f64, slope: f64, intercept: f64) -> Branch {
    let lift: RealFn = Arc::new(move |x| slope * x + intercept);
    let d1: RealFn = Arc::new(move |_| slope);
    let d2: RealFn = Arc::new(|_| 0.0);
    let lift_lo = slope * lo + intercept;
    let inverse: RealFn = Arc::new(move |x: f64| {
        let target = x + libm::ceil(lift_lo - x);
        (target - intercept) / slope
    });
    Branch::new(lo, hi, lift_lo, lift)
        .with_d1(d1)
        .with_d2(d2)
        .with_inverse(inverse)
}

fn affine_degree_two(id: &str, family: MapFamily, shift: f64) -> Result<CircleMap> {
    // f(x) = 2x + shift mod 1 with branch cut at 1/2
    let b0 = affine_branch(0.0, 0.5, 2.0, shift);
    let b1 = affine_branch(0.5, 1.0, 2.0, shift - 1.0);
    CircleMap::from_branches(String::from(id), family, alloc::vec![b0, b1], Vec::new(), 2.0)
}

// C^2 bump supported on [1/8, 3/8], normalized so max |bump'| = 1.
// bump(x) = sin^4(4 pi (x - 1/8)) / (3 sqrt(3) pi).

fn bump_norm() -> f64 {
    3.0 * libm::sqrt(3.0) * core::f64::consts::PI
}

fn bump(x: f64) -> f64 {
    let x = wrap(x);
    if !(0.125..=0.375).contains(&x) {
        return 0.0;
    }
    let s = libm::sin(4.0 * core::f64::consts::PI * (x - 0.125));
    s * s * s * s / bump_norm()
}

fn bump_d1(x: f64) -> f64 {
    let x = wrap(x);
    if !(0.125..=0.375).contains(&x) {
        return 0.0;
    }
    let th = 4.0 * core::f64::consts::PI * (x - 0.125);
    let (s, c) = (libm::sin(th), libm::cos(th));
    16.0 * core::f64::consts::PI * s * s * s * c / bump_norm()
}

fn bump_d2(x: f64) -> f64 {
    let x = wrap(x);
    if !(0.125..=0.375).contains(&x) {
        return 0.0;
    }
    let th = 4.0 * core::f64::consts::PI * (x - 0.125);
    let (s, c) = (libm::sin(th), libm::cos(th));
    let pi2 = core::f64::consts::PI * core::f64::consts::PI;
    64.0 * pi2 * (3.0 * s * s * c * c - s * s * s * s) / bump_norm()
}

/// Built-in potential families.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialFamily {
    Constant { c: f64 },
    /// -t log|Df|; `centered` subtracts -t log(deg) so the potential vanishes
    /// identically on constant-slope maps.
    Geometric { t: f64, centered: bool },
    /// sum of a_k cos(2 pi k x + theta_k), k = 1..
    Fourier { coeffs: Vec<(f64, f64)> },
    Custom,
}

/// A potential with evaluators and optional derivative evaluators.
#[derive(Clone)]
pub struct PotentialSpec {
    id: String,
    family: PotentialFamily,
    eval: RealFn,
    d1: Option<RealFn>,
    d2: Option<RealFn>,
    alpha: f64,
}

impl PotentialSpec {
    pub fn constant(c: f64) -> Self {
        let z: RealFn = Arc::new(|_| 0.0);
        PotentialSpec {
            id: format!("constant({c})"),
            family: PotentialFamily::Constant { c },
            eval: Arc::new(move |_| c),
            d1: Some(z.clone()),
            d2: Some(z),
            alpha: 1.0,
        }
    }

    /// The geometric potential -t log|Df|.
    pub fn geometric(map: &CircleMap, t: f64) -> Result<Self> {
        Self::geometric_inner(map, t, false)
    }

    /// -t (log|Df| - log deg(f)); identically zero on the doubling map, so
    /// perturbation sweeps built from it converge to the zero potential.
    pub fn geometric_centered(map: &CircleMap, t: f64) -> Result<Self> {
        Self::geometric_inner(map, t, true)
    }

    fn geometric_inner(map: &CircleMap, t: f64, centered: bool) -> Result<Self> {
        if !map.has_derivatives(1) {
            return Err(Error::MissingDerivative { order: 1 });
        }
        let offset = if centered {
            t * libm::log(map.degree() as f64)
        } else {
            0.0
        };
        let m = map.clone();
        let eval: RealFn = Arc::new(move |x| {
            -t * libm::log(libm::fabs(m.derivative(x).expect("validated at construction"))) + offset
        });
        // derivative of the potential needs bounded D^2 f
        let d2_profile = scan_d2(map, 4096);
        let (d1, d2): (Option<RealFn>, Option<RealFn>) = match d2_profile {
            D2Profile::Zero => {
                let z: RealFn = Arc::new(|_| 0.0);
                (Some(z.clone()), Some(z))
            }
            D2Profile::Bounded => {
                let m = map.clone();
                let d1: RealFn = Arc::new(move |x| {
                    let df = m.derivative(x).expect("validated");
                    let d2f = m.derivative2(x).expect("validated");
                    -t * d2f / df
                });
                (Some(d1), None)
            }
            D2Profile::UnboundedOrMissing => (None, None),
        };
        Ok(PotentialSpec {
            id: format!("geometric(t={t}, centered={centered})@{}", map.id()),
            family: PotentialFamily::Geometric { t, centered },
            eval,
            d1,
            d2,
            alpha: map.log_df_alpha(),
        })
    }

    /// Trigonometric polynomial sum of a_k cos(2 pi k x + theta_k).
    pub fn fourier(coeffs: &[(f64, f64)]) -> Self {
        let cs: Vec<(f64, f64)> = coeffs.to_vec();
        let cs1 = cs.clone();
        let cs2 = cs.clone();
        let tau = 2.0 * core::f64::consts::PI;
        let eval: RealFn = Arc::new(move |x| {
            cs.iter()
                .enumerate()
                .map(|(i, &(a, th))| a * libm::cos(tau * (i + 1) as f64 * x + th))
                .sum()
        });
        let d1: RealFn = Arc::new(move |x| {
            cs1.iter()
                .enumerate()
                .map(|(i, &(a, th))| {
                    let k = (i + 1) as f64;
                    -a * tau * k * libm::sin(tau * k * x + th)
                })
                .sum()
        });
        let d2: RealFn = Arc::new(move |x| {
            cs2.iter()
                .enumerate()
                .map(|(i, &(a, th))| {
                    let k = (i + 1) as f64;
                    -a * tau * k * tau * k * libm::cos(tau * k * x + th)
                })
                .sum()
        });
        PotentialSpec {
            id: format!("fourier({} modes)", coeffs.len()),
            family: PotentialFamily::Fourier { coeffs: coeffs.to_vec() },
            eval,
            d1: Some(d1),
            d2: Some(d2),
            alpha: 1.0,
        }
    }

    pub fn from_parts(
        id: String,
        eval: RealFn,
        d1: Option<RealFn>,
        d2: Option<RealFn>,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hoelder exponent must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(PotentialSpec { id, family: PotentialFamily::Custom, eval, d1, d2, alpha })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(wrap(x))
    }

    pub fn d1(&self, x: f64) -> Result<f64> {
        match &self.d1 {
            Some(d) => Ok(d(wrap(x))),
            None => Err(Error::MissingDerivative { order: 1 }),
        }
    }

    pub fn d2(&self, x: f64) -> Result<f64> {
        match &self.d2 {
            Some(d) => Ok(d(wrap(x))),
            None => Err(Error::MissingDerivative { order: 2 }),
        }
    }

    pub fn has_derivatives(&self, order: usize) -> bool {
        match order {
            0 => true,
            1 => self.d1.is_some(),
            2 => self.d1.is_some() && self.d2.is_some(),
            _ => false,
        }
    }

    /// Hoelder exponent of the potential.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Grid estimates of (sup, inf) over n sample points.
    pub fn sup_inf(&self, n: usize) -> (f64, f64) {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for i in 0..n {
            let v = self.eval(i as f64 / n as f64);
            sup = sup.max(v);
            inf = inf.min(v);
        }
        (sup, inf)
    }
}

enum D2Profile {
    Zero,
    Bounded,
    UnboundedOrMissing,
}

fn scan_d2(map: &CircleMap, n: usize) -> D2Profile {
    if !map.has_derivatives(2) {
        return D2Profile::UnboundedOrMissing;
    }
    let mut max_abs = 0.0_f64;
    for i in 0..n {
        match map.derivative2(i as f64 / n as f64) {
            Ok(v) if v.is_finite() => max_abs = max_abs.max(libm::fabs(v)),
            _ => return D2Profile::UnboundedOrMissing,
        }
    }
    if max_abs == 0.0 {
        D2Profile::Zero
    } else {
        D2Profile::Bounded
    }
}

/// A finite list of arcs, each inside one branch domain, meant to cover the
/// circle; the arcs that meet the contraction region come first.
#[derive(Clone, Debug)]
pub struct CoverSpec {
    arcs: Vec<CircleArc>,
}

impl CoverSpec {
    pub fn new(arcs: Vec<CircleArc>) -> Self {
        CoverSpec { arcs }
    }

    pub fn arcs(&self) -> &[CircleArc] {
        &self.arcs
    }

    /// Cover adapted to the map: branch domains, split so that the
    /// contraction region is swallowed by few padded arcs.
    pub fn adapted(map: &CircleMap) -> Self {
        let a_set = region_set(map.contraction_region());
        let pad = (map.branch_width_min() / 8.0).min(0.005);
        let mut meets: Vec<CircleArc> = Vec::new();
        let mut clear: Vec<CircleArc> = Vec::new();
        for k in 0..map.degree() {
            let (lo, hi) = (map.endpoints()[k], map.endpoints()[k + 1]);
            let dom = IntervalSet::from_parts(alloc::vec![(lo, hi)]);
            let a_in = dom.intersect(&a_set);
            if a_in.is_empty() {
                clear.push(CircleArc::from_endpoints(lo, hi));
                continue;
            }
            let padded = IntervalSet::from_parts(
                a_in.parts()
                    .iter()
                    .map(|&(a, b)| ((a - pad).max(lo), (b + pad).min(hi)))
                    .collect(),
            );
            for &(a, b) in padded.parts() {
                meets.push(CircleArc::from_endpoints(a, b));
            }
            for &(a, b) in dom.subtract(&padded).parts() {
                if b - a > 1e-12 {
                    clear.push(CircleArc::from_endpoints(a, b));
                }
            }
        }
        meets.extend(clear);
        CoverSpec { arcs: meets }
    }

    /// Number of cover arcs meeting the contraction region.
    pub fn q(&self, map: &CircleMap) -> usize {
        let a_set = region_set(map.contraction_region());
        self.arcs
            .iter()
            .filter(|arc| IntervalSet::from_arc(arc).intersects(&a_set))
            .count()
    }

    /// Checks the cover: arcs must cover the circle and each arc must sit
    /// inside a single branch domain.
    pub fn validate(&self, map: &CircleMap) -> Result<()> {
        let mut union = IntervalSet::empty();
        for arc in &self.arcs {
            union = union.union(&IntervalSet::from_arc(arc));
        }
        if !union.covers_circle(1e-9) {
            return Err(Error::CoverGap { uncovered: 1.0 - union.total_len() });
        }
        for arc in &self.arcs {
            let pieces = arc.intervals();
            if pieces.len() > 1 {
                // a wrapping arc cannot sit inside one branch domain unless
                // the map had a branch through 0, which our convention forbids
                return Err(Error::InvalidParameter(format!(
                    "cover arc starting at {} wraps across 0",
                    arc.lo()
                )));
            }
            let (a, b) = pieces[0];
            let fits = (0..map.degree()).any(|k| {
                map.endpoints()[k] <= a + 1e-12 && b <= map.endpoints()[k + 1] + 1e-12
            });
            if !fits {
                return Err(Error::InvalidParameter(format!(
                    "cover arc [{a}, {b}) is not contained in one injectivity domain"
                )));
            }
        }
        Ok(())
    }

    /// Same arcs, reordered so those meeting the contraction region come
    /// first (the enumeration the partition construction expects).
    pub fn reorder_contraction_first(&self, map: &CircleMap) -> CoverSpec {
        let a_set = region_set(map.contraction_region());
        let (meets, clear): (Vec<_>, Vec<_>) = self
            .arcs
            .iter()
            .copied()
            .partition(|arc| IntervalSet::from_arc(arc).intersects(&a_set));
        let mut arcs = meets;
        arcs.extend(clear);
        CoverSpec { arcs }
    }
}

fn region_set(arcs: &[CircleArc]) -> IntervalSet {
    let mut set = IntervalSet::empty();
    for a in arcs {
        set = set.union(&IntervalSet::from_arc(a));
    }
    set
}

/// One cell of the partition generated by a cover.
#[derive(Clone, Debug)]
pub struct PartitionPiece {
    pub set: IntervalSet,
    /// Index of the cover arc the piece was carved from.
    pub source: usize,
    pub meets_contraction: bool,
}

/// Partition of the circle into domains of injectivity, built from a cover by
/// successive subtraction: P_1 = U_1 and P_{i+1} = U_{i+1} minus the earlier
/// cells; empty cells are dropped.
#[derive(Clone, Debug)]
pub struct Partition {
    pub pieces: Vec<PartitionPiece>,
    /// Number of cover arcs meeting the contraction region.
    pub q: usize,
}

impl Partition {
    pub fn cardinality(&self) -> usize {
        self.pieces.len()
    }
}

pub fn build_partition(cover: &CoverSpec, map: &CircleMap) -> Result<Partition> {
    cover.validate(map)?;
    let ordered = cover.reorder_contraction_first(map);
    let q = ordered.q(map);
    let a_set = region_set(map.contraction_region());
    let mut used = IntervalSet::empty();
    let mut pieces = Vec::new();
    for (i, arc) in ordered.arcs().iter().enumerate() {
        let cell = IntervalSet::from_arc(arc).subtract(&used);
        if cell.total_len() <= 1e-15 {
            continue;
        }
        used = used.union(&cell);
        let meets = cell.intersects(&a_set);
        pieces.push(PartitionPiece { set: cell, source: i, meets_contraction: meets });
    }
    Ok(Partition { pieces, q })
}
