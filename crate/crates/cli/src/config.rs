//! Experiment configuration: a TOML file with typed sections. The exact
//! schema is documented in the repository README; unknown keys are rejected
//! so typos surface as errors instead of silently falling back to defaults.

use serde::Deserialize;

use thermogap_core::circle::CircleArc;
use thermogap_core::dynamics::{CircleMap, PotentialSpec};
use thermogap_core::hypotheses::HypothesisConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub correlations: CorrelationsConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub cones: ConesConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub random_stability: RandomStabilityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// doubling | shifted_doubling | manneville_pomeau | pitchfork
    pub family: String,
    /// Shift index for shifted_doubling.
    pub n: Option<u32>,
    /// Intermittency exponent for manneville_pomeau.
    pub alpha: Option<f64>,
    /// Deformation size for pitchfork.
    pub t: Option<f64>,
    /// Expansion-constant override.
    pub sigma: Option<f64>,
    /// Explicit contraction region as [lo, hi] arcs.
    pub contraction_region: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// constant | geometric | geometric_centered | fourier
    pub family: String,
    pub c: Option<f64>,
    pub t: Option<f64>,
    /// Fourier modes as [amplitude, phase] for k = 1, 2, ...
    pub coefficients: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Collocation grid size; a power of two so refinement studies nest.
    pub grid: usize,
    /// Grid for hypothesis estimation.
    pub check_grid: usize,
    /// Hoelder exponent override; absent means the potential's own.
    pub alpha: Option<f64>,
    pub delta: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Hyperbolic-time exponent; absent picks half the admissible maximum.
    pub c: Option<f64>,
    pub r: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Option<u64>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            grid: 1024,
            check_grid: 4096,
            alpha: None,
            delta: 0.5,
            kappa: 50.0,
            gamma: 0.9,
            c: None,
            r: 0,
            tol: 1e-12,
            max_iter: 20_000,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationsConfig {
    pub n_max: usize,
    /// Observable as Fourier modes [amplitude, phase].
    pub observable: Vec<[f64; 2]>,
    /// Second observable; defaults to the first.
    pub observable_psi: Option<Vec<[f64; 2]>>,
}

impl Default for CorrelationsConfig {
    fn default() -> Self {
        CorrelationsConfig {
            n_max: 40,
            observable: vec![[1.0, 0.0], [0.3, 0.0]],
            observable_psi: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltConfig {
    /// Green-Kubo truncation.
    pub j: usize,
    pub orbit_len: usize,
    pub samples: usize,
    pub observable: Vec<[f64; 2]>,
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig { j: 40, orbit_len: 1000, samples: 100_000, observable: vec![[1.0, 0.0]] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConesConfig {
    /// Samples for the invariance estimate.
    pub samples: usize,
    /// Pairs for the contraction measurement.
    pub pairs: usize,
    pub iterations: usize,
    /// Triple budget for the metric sampler.
    pub budget: usize,
    /// Relative membership margin of generated members.
    pub margin: f64,
}

impl Default for ConesConfig {
    fn default() -> Self {
        ConesConfig { samples: 20, pairs: 10, iterations: 6, budget: 200_000, margin: 0.2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    pub n_max: usize,
    pub floor: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { n_max: 60, floor: 1e-14 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// pitchfork | mp_alpha | constant_shift | fourier_scale
    pub family: String,
    pub ts: Vec<f64>,
    /// Geometric coefficient riding along parametrized map families.
    pub potential_t: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            family: "pitchfork".to_string(),
            ts: vec![0.04, 0.02, 0.01, 0.005],
            potential_t: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomStabilityConfig {
    /// mp_alpha | pitchfork_t | fourier_amp
    pub family: String,
    pub epsilons: Vec<f64>,
    pub support: usize,
    pub potential_t: f64,
}

impl Default for RandomStabilityConfig {
    fn default() -> Self {
        RandomStabilityConfig {
            family: "mp_alpha".to_string(),
            epsilons: vec![0.02, 0.01, 0.005],
            support: 5,
            potential_t: 0.05,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".to_string() }
    }
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Structural diagnostics; an empty list means the config is runnable
    /// for the given subcommand.
    pub fn diagnostics(&self, subcommand: &str) -> Vec<String> {
        let mut out = Vec::new();
        let known_maps = ["doubling", "shifted_doubling", "manneville_pomeau", "pitchfork"];
        if !known_maps.contains(&self.map.family.as_str()) {
            out.push(format!("map.family: unknown family '{}'", self.map.family));
        }
        match self.map.family.as_str() {
            "shifted_doubling" if self.map.n.is_none() => {
                out.push("map.n: shifted_doubling needs a shift index".to_string());
            }
            "manneville_pomeau" => match self.map.alpha {
                None => out.push("map.alpha: manneville_pomeau needs an exponent".to_string()),
                Some(a) if !(a > 0.0 && a < 1.0) => {
                    out.push(format!("map.alpha: exponent {a} outside (0, 1)"));
                }
                _ => {}
            },
            "pitchfork" if self.map.t.is_none() => {
                out.push("map.t: pitchfork needs a deformation size".to_string());
            }
            _ => {}
        }
        if let Some(s) = self.map.sigma {
            if s <= 1.0 {
                out.push(format!("map.sigma: expansion constant {s} must exceed 1"));
            }
        }
        let known_pots = ["constant", "geometric", "geometric_centered", "fourier"];
        if !known_pots.contains(&self.potential.family.as_str()) {
            out.push(format!("potential.family: unknown family '{}'", self.potential.family));
        }
        match self.potential.family.as_str() {
            "geometric" | "geometric_centered" if self.potential.t.is_none() => {
                out.push("potential.t: geometric potentials need a coefficient".to_string());
            }
            "fourier" if self.potential.coefficients.is_none() => {
                out.push("potential.coefficients: fourier potential needs modes".to_string());
            }
            _ => {}
        }
        if !self.numerics.grid.is_power_of_two() {
            out.push(format!(
                "numerics.grid: {} is not a power of two (refinement studies need nesting)",
                self.numerics.grid
            ));
        }
        if let Some(a) = self.numerics.alpha {
            if !(a > 0.0 && a <= 1.0) {
                out.push(format!("numerics.alpha: Hoelder exponent {a} outside (0, 1]"));
            }
        }
        if !(self.numerics.delta > 0.0 && self.numerics.delta <= 0.5) {
            out.push(format!("numerics.delta: radius {} outside (0, 1/2]", self.numerics.delta));
        }
        if !(self.numerics.gamma > 0.0 && self.numerics.gamma < 1.0) {
            out.push(format!("numerics.gamma: {} outside (0, 1)", self.numerics.gamma));
        }
        if self.numerics.r > 2 {
            out.push(format!("numerics.r: differentiability order {} exceeds 2", self.numerics.r));
        }
        let sampling = ["clt", "cones", "density", "random-stability"];
        if sampling.contains(&subcommand) && self.numerics.seed.is_none() {
            out.push(format!("numerics.seed: {subcommand} samples randomly and needs a seed"));
        }
        if subcommand == "sweep" {
            let known = ["pitchfork", "mp_alpha", "constant_shift", "fourier_scale"];
            if !known.contains(&self.sweep.family.as_str()) {
                out.push(format!("sweep.family: unknown family '{}'", self.sweep.family));
            }
            if self.sweep.ts.is_empty() {
                out.push("sweep.ts: parameter list is empty".to_string());
            }
        }
        if subcommand == "random-stability" {
            let known = ["mp_alpha", "pitchfork_t", "fourier_amp"];
            if !known.contains(&self.random_stability.family.as_str()) {
                out.push(format!(
                    "random_stability.family: unknown family '{}'",
                    self.random_stability.family
                ));
            }
            if self.random_stability.support == 0 {
                out.push("random_stability.support: must be positive".to_string());
            }
        }
        out
    }

    pub fn build_map(&self) -> Result<CircleMap, String> {
        let err = |e: thermogap_core::Error| format!("map: {e}");
        let mut map = match self.map.family.as_str() {
            "doubling" => CircleMap::doubling(),
            "shifted_doubling" => {
                CircleMap::shifted_doubling(self.map.n.ok_or("map.n missing")?).map_err(err)?
            }
            "manneville_pomeau" => {
                let alpha = self.map.alpha.ok_or("map.alpha missing")?;
                match self.map.sigma {
                    Some(s) => CircleMap::manneville_pomeau_with_sigma(alpha, s).map_err(err)?,
                    None => CircleMap::manneville_pomeau(alpha).map_err(err)?,
                }
            }
            "pitchfork" => {
                let t = self.map.t.ok_or("map.t missing")?;
                match self.map.sigma {
                    Some(s) => CircleMap::pitchfork_with_sigma(t, s).map_err(err)?,
                    None => CircleMap::pitchfork(t).map_err(err)?,
                }
            }
            other => return Err(format!("unknown map family '{other}'")),
        };
        if let Some(s) = self.map.sigma {
            if matches!(self.map.family.as_str(), "doubling" | "shifted_doubling") {
                map = map.with_expansion_constant(s).map_err(err)?;
            }
        }
        if let Some(arcs) = &self.map.contraction_region {
            let arcs = arcs
                .iter()
                .map(|&[lo, hi]| CircleArc::from_endpoints(lo, hi))
                .collect();
            map = map.with_contraction_region(arcs);
        }
        Ok(map)
    }

    pub fn build_potential(&self, map: &CircleMap) -> Result<PotentialSpec, String> {
        let err = |e: thermogap_core::Error| format!("potential: {e}");
        match self.potential.family.as_str() {
            "constant" => Ok(PotentialSpec::constant(self.potential.c.unwrap_or(0.0))),
            "geometric" => PotentialSpec::geometric(map, self.potential.t.ok_or("potential.t missing")?)
                .map_err(err),
            "geometric_centered" => {
                PotentialSpec::geometric_centered(map, self.potential.t.ok_or("potential.t missing")?)
                    .map_err(err)
            }
            "fourier" => {
                let coeffs: Vec<(f64, f64)> = self
                    .potential
                    .coefficients
                    .as_ref()
                    .ok_or("potential.coefficients missing")?
                    .iter()
                    .map(|&[a, th]| (a, th))
                    .collect();
                Ok(PotentialSpec::fourier(&coeffs))
            }
            other => Err(format!("unknown potential family '{other}'")),
        }
    }

    pub fn hypothesis_config(&self) -> HypothesisConfig {
        HypothesisConfig {
            grid: self.numerics.check_grid,
            delta: self.numerics.delta,
            alpha: self.numerics.alpha,
            gamma: self.numerics.gamma,
            c: self.numerics.c,
            r: self.numerics.r,
        }
    }

    /// Observable built from Fourier modes [amplitude, phase].
    pub fn observable_fn(modes: &[[f64; 2]]) -> impl Fn(f64) -> f64 + '_ {
        move |x: f64| {
            let tau = std::f64::consts::TAU;
            modes
                .iter()
                .enumerate()
                .map(|(i, &[a, th])| a * (tau * (i + 1) as f64 * x + th).cos())
                .sum()
        }
    }
}
