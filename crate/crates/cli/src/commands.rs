//! One function per subcommand. Each returns the process exit code:
//! 0 on success, 1 on numeric failure, 2 when a subcommand that needs the
//! hypothesis gate sees it fail.

use serde::Serialize;

use thermogap_core::cones::{
    contraction_check, diameter_bound, random_cone_pairs, verify_invariance, ConeParams,
};
use thermogap_core::dynamics::{CircleMap, CoverSpec, PotentialSpec};
use thermogap_core::grid::GridFunction;
use thermogap_core::hypotheses::{self, HypothesisReport};
use thermogap_core::operator::{build_matrix, convergence_report, solve_spectrum};
use thermogap_core::stability::{
    lip_discontinuity_demo, mp_alpha_family, pitchfork_family, pressure_density_sweep,
    random_stability_sweep, weak_star_dictionary, SweepRowData,
};
use thermogap_core::statistics::{clt_empirical, clt_variance, correlation, fit_decay_rate, NOISE_FLOOR};

use crate::config::ExperimentConfig;
use crate::output::OutputSink;

pub struct RunContext {
    pub config: ExperimentConfig,
    pub sink: OutputSink,
    pub threads: usize,
    pub seed_override: Option<u64>,
}

impl RunContext {
    fn seed(&self) -> Option<u64> {
        self.seed_override.or(self.config.numerics.seed)
    }

    fn seed_required(&self) -> Result<u64, String> {
        self.seed().ok_or_else(|| "numerics.seed is required for sampling".to_string())
    }

    fn pair(&self) -> Result<(CircleMap, PotentialSpec), String> {
        let map = self.config.build_map()?;
        let pot = self.config.build_potential(&map)?;
        Ok((map, pot))
    }

    fn hypotheses(
        &self,
        map: &CircleMap,
        pot: &PotentialSpec,
    ) -> Result<HypothesisReport, String> {
        let cover = CoverSpec::adapted(map);
        hypotheses::evaluate(map, pot, &cover, &self.config.hypothesis_config())
            .map_err(|e| format!("hypothesis evaluation: {e}"))
    }
}

#[derive(Serialize)]
struct RecordJson {
    name: String,
    lhs: f64,
    rhs: f64,
    margin: f64,
    pass: bool,
    strict: bool,
    refinement_uncertain: bool,
}

#[derive(Serialize)]
struct CheckJson {
    map: String,
    potential: String,
    pass: bool,
    pass_existence: bool,
    deg: usize,
    q: usize,
    p: usize,
    l: f64,
    sigma: f64,
    gamma: f64,
    c: f64,
    c_max: f64,
    eps_phi: f64,
    eps_phi_prime: f64,
    xi_r: f64,
    m: usize,
    delta: f64,
    alpha: f64,
    r: usize,
    records: Vec<RecordJson>,
}

fn record_json(report: &HypothesisReport) -> Vec<RecordJson> {
    report
        .records
        .iter()
        .map(|r| RecordJson {
            name: r.name.clone(),
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            pass: r.pass,
            strict: r.strict,
            refinement_uncertain: r.refinement_uncertain,
        })
        .collect()
}

pub fn run_check(ctx: &RunContext) -> Result<i32, String> {
    let (map, pot) = ctx.pair()?;
    let report = ctx.hypotheses(&map, &pot)?;
    println!("hypothesis report for {} with {}", map.id(), pot.id());
    println!(
        "  deg={} q={} p={} L={:.6} sigma={} gamma={} c={:.6} eps_phi={:.6} eps'={:.6} Xi_r={:.6} m={}",
        report.deg,
        report.q,
        report.p,
        report.l,
        report.sigma,
        report.gamma,
        report.c,
        report.eps_phi,
        report.eps_phi_prime,
        report.xi_r,
        report.m
    );
    println!("  {:<26} {:>14} {:>14} {:>14}  result", "condition", "lhs", "rhs", "margin");
    for r in &report.records {
        let flag = if r.refinement_uncertain { " (refine!)" } else { "" };
        println!(
            "  {:<26} {:>14.6e} {:>14.6e} {:>14.6e}  {}{}",
            r.name,
            r.lhs,
            r.rhs,
            r.margin,
            if r.pass { "pass" } else { "FAIL" },
            flag
        );
    }
    println!("  overall: {}", if report.pass { "pass" } else { "FAIL" });
    let payload = CheckJson {
        map: map.id().to_string(),
        potential: pot.id().to_string(),
        pass: report.pass,
        pass_existence: report.pass_existence(),
        deg: report.deg,
        q: report.q,
        p: report.p,
        l: report.l,
        sigma: report.sigma,
        gamma: report.gamma,
        c: report.c,
        c_max: report.c_max,
        eps_phi: report.eps_phi,
        eps_phi_prime: report.eps_phi_prime,
        xi_r: report.xi_r,
        m: report.m,
        delta: report.delta,
        alpha: report.alpha,
        r: report.r,
        records: record_json(&report),
    };
    ctx.sink
        .write_json("check", ctx.seed(), payload)
        .map_err(|e| e.to_string())?;
    Ok(if report.pass { 0 } else { 2 })
}

#[derive(Serialize)]
struct SpectrumJson {
    map: String,
    potential: String,
    grid: usize,
    lambda: f64,
    pressure: f64,
    tau_sub: f64,
    residual: f64,
    iterations: usize,
    hypothesis_pass: bool,
    hypothesis_warning: bool,
}

pub fn run_spectrum(ctx: &RunContext) -> Result<i32, String> {
    let (map, pot) = ctx.pair()?;
    let report = ctx.hypotheses(&map, &pot)?;
    let n = ctx.config.numerics.grid;
    let matrix = build_matrix(&map, &pot, n).map_err(|e| e.to_string())?;
    let mut sol = solve_spectrum(&matrix, ctx.config.numerics.tol, ctx.config.numerics.max_iter)
        .map_err(|e| e.to_string())?;
    sol.hypothesis_warning = !report.pass;
    let payload = SpectrumJson {
        map: map.id().to_string(),
        potential: pot.id().to_string(),
        grid: n,
        lambda: sol.lambda,
        pressure: sol.pressure(),
        tau_sub: sol.tau_sub,
        residual: sol.residual,
        iterations: sol.iterations,
        hypothesis_pass: report.pass,
        hypothesis_warning: sol.hypothesis_warning,
    };
    ctx.sink.write_json("spectrum", ctx.seed(), payload).map_err(|e| e.to_string())?;
    ctx.sink
        .write_csv(
            "spectrum.csv",
            "x,h,nu,mu",
            (0..n).map(|i| {
                format!(
                    "{},{},{},{}",
                    i as f64 / n as f64,
                    sol.h.values()[i],
                    sol.nu[i],
                    sol.mu[i]
                )
            }),
        )
        .map_err(|e| e.to_string())?;
    let density_points: Vec<(f64, f64)> =
        (0..n).map(|i| (i as f64 / n as f64, sol.h.values()[i])).collect();
    ctx.sink
        .write_plot("density_profile.svg", "invariant density h", &density_points, false)
        .map_err(|e| e.to_string())?;
    Ok(0)
}

#[derive(Serialize)]
struct DensityJson {
    lambda_hat: f64,
    delta: f64,
    tau: f64,
    r1: f64,
    bound_holds: bool,
    n_max: usize,
}

pub fn run_density(ctx: &RunContext) -> Result<i32, String> {
    let (map, pot) = ctx.pair()?;
    let report = ctx.hypotheses(&map, &pot)?;
    if !report.pass_existence() {
        eprintln!("hypothesis gate failed; density convergence needs a passing pair");
        return Ok(2);
    }
    let seed = ctx.seed_required()?;
    let nc = &ctx.config.numerics;
    let alpha = nc.alpha.unwrap_or_else(|| pot.alpha());
    let params = ConeParams::holder(nc.kappa, nc.delta, alpha);
    let est = verify_invariance(&map, &pot, &params, nc.grid.min(512), 20, seed)
        .map_err(|e| e.to_string())?;
    let delta = diameter_bound(nc.kappa, est.lambda_hat.clamp(1e-9, 1.0 - 1e-12), report.m, alpha)
        .map_err(|e| e.to_string())?;
    let r1 = 1.0 + report.m as f64 * nc.kappa * thermogap_core::DIAM.powf(alpha);
    let matrix = build_matrix(&map, &pot, nc.grid).map_err(|e| e.to_string())?;
    let sol = solve_spectrum(&matrix, nc.tol, nc.max_iter).map_err(|e| e.to_string())?;
    let conv = convergence_report(
        &matrix,
        &sol,
        r1,
        delta,
        ctx.config.density.n_max,
        ctx.config.density.floor,
    );
    let payload = DensityJson {
        lambda_hat: est.lambda_hat,
        delta: conv.delta,
        tau: conv.tau,
        r1: conv.r1,
        bound_holds: conv.bound_holds,
        n_max: ctx.config.density.n_max,
    };
    ctx.sink.write_json("density", ctx.seed(), payload).map_err(|e| e.to_string())?;
    ctx.sink
        .write_csv(
            "density.csv",
            "n,sup_error,theta_plus,bound",
            conv.sup_errors.iter().enumerate().map(|(j, &e)| {
                format!("{j},{e},{},{}", conv.theta_plus[j], conv.bounds[j])
            }),
        )
        .map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64)> = conv
        .sup_errors
        .iter()
        .enumerate()
        .map(|(j, &e)| (j as f64, e))
        .collect();
    ctx.sink
        .write_plot("density_convergence.svg", "sup error of normalized iterates", &pts, true)
        .map_err(|e| e.to_string())?;
    Ok(0)
}

#[derive(Serialize)]
struct ConesJson {
    lambda_hat: f64,
    invariance_pass: bool,
    delta: f64,
    birkhoff_bound: f64,
    max_factor: f64,
    pairs: usize,
    iterations: usize,
}

pub fn run_cones(ctx: &RunContext) -> Result<i32, String> {
    let (map, pot) = ctx.pair()?;
    let report = ctx.hypotheses(&map, &pot)?;
    if !report.pass_existence() {
        eprintln!("hypothesis gate failed; cone measurements need a passing pair");
        return Ok(2);
    }
    let seed = ctx.seed_required()?;
    let nc = &ctx.config.numerics;
    let cc = &ctx.config.cones;
    let alpha = nc.alpha.unwrap_or_else(|| pot.alpha());
    let params = ConeParams::holder(nc.kappa, nc.delta, alpha);
    let n = nc.grid.min(512);
    let est = verify_invariance(&map, &pot, &params, n, cc.samples, seed)
        .map_err(|e| e.to_string())?;
    let delta = diameter_bound(nc.kappa, est.lambda_hat.clamp(1e-9, 1.0 - 1e-12), report.m, alpha)
        .map_err(|e| e.to_string())?;
    let pairs: Vec<(GridFunction, GridFunction)> =
        random_cone_pairs(&params, cc.pairs, n, cc.margin, seed ^ 0x9e3779b97f4a7c15);
    let contraction =
        contraction_check(&map, &pot, &params, delta, &pairs, cc.iterations, cc.budget)
            .map_err(|e| e.to_string())?;
    let payload = ConesJson {
        lambda_hat: est.lambda_hat,
        invariance_pass: est.pass,
        delta,
        birkhoff_bound: contraction.bound,
        max_factor: contraction.max_factor,
        pairs: cc.pairs,
        iterations: cc.iterations,
    };
    ctx.sink.write_json("cones", ctx.seed(), payload).map_err(|e| e.to_string())?;
    // worst distances across pairs, per iteration
    let rows = (0..cc.iterations).map(|k| {
        let tp_max = contraction
            .traces
            .iter()
            .map(|t| t.theta_plus_seq[k])
            .fold(0.0_f64, f64::max);
        let theta_max = contraction
            .traces
            .iter()
            .map(|t| t.theta_seq[k])
            .fold(0.0_f64, f64::max);
        format!("{},{},{},{}", k + 1, tp_max, theta_max, contraction.bound)
    });
    ctx.sink
        .write_csv("cones.csv", "n,theta_plus,theta_kappa,bound", rows)
        .map_err(|e| e.to_string())?;
    Ok(0)
}

#[derive(Serialize)]
struct CorrelationsJson {
    phi_id: String,
    psi_id: String,
    n_max: usize,
    c0: f64,
    tau_fit: Option<f64>,
    k_fit: Option<f64>,
    r2: Option<f64>,
    all_below_floor: bool,
    tau_sub: f64,
}

pub fn run_correlations(ctx: &RunContext) -> Result<i32, String> {
    let (map, pot) = ctx.pair()?;
    let report = ctx.hypotheses(&map, &pot)?;
    if !report.pass_existence() {
        eprintln!("hypothesis gate failed; correlations need a passing pair");
        return Ok(2);
    }
    let nc = &ctx.config.numerics;
    let cc = &ctx.config.correlations;
    let matrix = build_matrix(&map, &pot, nc.grid).map_err(|e| e.to_string())?;
    let sol = solve_spectrum(&matrix, nc.tol, nc.max_iter).map_err(|e| e.to_string())?;
    let phi_f = ExperimentConfig::observable_fn(&cc.observable);
    let phi = GridFunction::from_fn(nc.grid, &phi_f);
    let psi = match &cc.observable_psi {
        Some(modes) => GridFunction::from_fn(nc.grid, ExperimentConfig::observable_fn(modes)),
        None => phi.clone(),
    };
    let mut series = correlation(&matrix, &sol, &phi, &psi, cc.n_max);
    series.phi_id = format!("fourier{:?}", cc.observable);
    series.psi_id = match &cc.observable_psi {
        Some(m) => format!("fourier{m:?}"),
        None => series.phi_id.clone(),
    };
    let fit = fit_decay_rate(&series.values[1..], NOISE_FLOOR);
    let payload = CorrelationsJson {
        phi_id: series.phi_id.clone(),
        psi_id: series.psi_id.clone(),
        n_max: cc.n_max,
        c0: series.value(0),
        tau_fit: fit.as_ref().ok().map(|f| f.tau),
        k_fit: fit.as_ref().ok().map(|f| f.k),
        r2: fit.as_ref().ok().map(|f| f.r2),
        all_below_floor: fit.is_err(),
        tau_sub: sol.tau_sub,
    };
    ctx.sink.write_json("correlations", ctx.seed(), payload).map_err(|e| e.to_string())?;
    ctx.sink
        .write_csv(
            "correlations.csv",
            "n,c_n",
            series.values.iter().enumerate().map(|(n, &c)| format!("{n},{c}")),
        )
        .map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64)> = series
        .values
        .iter()
        .enumerate()
        .map(|(n, &c)| (n as f64, c.abs()))
        .collect();
    ctx.sink
        .write_plot("correlations.svg", "|C(n)|", &pts, true)
        .map_err(|e| e.to_string())?;
    Ok(0)
}

#[derive(Serialize)]
struct CltJson {
    sigma2: f64,
    truncation_j: usize,
    truncation_error: Option<f64>,
    ks: Option<f64>,
    samples: usize,
    orbit_len: usize,
    zero_variance: bool,
}

pub fn run_clt(ctx: &RunContext) -> Result<i32, String> {
    let (map, pot) = ctx.pair()?;
    let report = ctx.hypotheses(&map, &pot)?;
    if !report.pass_existence() {
        eprintln!("hypothesis gate failed; the CLT needs a passing pair");
        return Ok(2);
    }
    let seed = ctx.seed_required()?;
    let nc = &ctx.config.numerics;
    let cc = &ctx.config.clt;
    let matrix = build_matrix(&map, &pot, nc.grid).map_err(|e| e.to_string())?;
    let sol = solve_spectrum(&matrix, nc.tol, nc.max_iter).map_err(|e| e.to_string())?;
    let obs_f = ExperimentConfig::observable_fn(&cc.observable);
    let phi = GridFunction::from_fn(nc.grid, &obs_f);
    let gk = clt_variance(&matrix, &sol, &phi, cc.j).map_err(|e| e.to_string())?;
    let empirical = clt_empirical(
        &map,
        &pot,
        &sol,
        &obs_f,
        gk.sigma2,
        cc.orbit_len,
        cc.samples,
        seed,
    );
    let (ks, zero_variance) = match &empirical {
        Ok(r) => (Some(r.ks), false),
        Err(thermogap_core::Error::ZeroVariance) => (None, true),
        Err(e) => return Err(e.to_string()),
    };
    let payload = CltJson {
        sigma2: gk.sigma2,
        truncation_j: cc.j,
        truncation_error: gk.truncation_error,
        ks,
        samples: cc.samples,
        orbit_len: cc.orbit_len,
        zero_variance,
    };
    ctx.sink.write_json("clt", ctx.seed(), payload).map_err(|e| e.to_string())?;
    ctx.sink
        .write_csv(
            "clt.csv",
            "j,autocovariance",
            gk.series.iter().enumerate().map(|(j, &c)| format!("{j},{c}")),
        )
        .map_err(|e| e.to_string())?;
    Ok(0)
}

type BoxedFamily = Box<dyn Fn(f64) -> thermogap_core::Result<(CircleMap, PotentialSpec)> + Send + Sync>;

fn sweep_family(ctx: &RunContext) -> Result<BoxedFamily, String> {
    let sc = &ctx.config.sweep;
    match sc.family.as_str() {
        "pitchfork" => Ok(Box::new(pitchfork_family(sc.potential_t))),
        "mp_alpha" => {
            let alpha0 = ctx.config.map.alpha.ok_or("map.alpha missing for mp_alpha sweep")?;
            Ok(Box::new(mp_alpha_family(alpha0, sc.potential_t)))
        }
        "constant_shift" => {
            let map = ctx.config.build_map()?;
            Ok(Box::new(move |t: f64| Ok((map.clone(), PotentialSpec::constant(t)))))
        }
        "fourier_scale" => {
            let map = ctx.config.build_map()?;
            let coeffs: Vec<(f64, f64)> = ctx
                .config
                .potential
                .coefficients
                .clone()
                .ok_or("potential.coefficients missing for fourier_scale sweep")?
                .iter()
                .map(|&[a, th]| (a, th))
                .collect();
            Ok(Box::new(move |t: f64| {
                let scaled: Vec<(f64, f64)> =
                    coeffs.iter().map(|&(a, th)| (a * (1.0 + t), th)).collect();
                Ok((map.clone(), PotentialSpec::fourier(&scaled)))
            }))
        }
        other => Err(format!("unknown sweep family '{other}'")),
    }
}

fn sweep_row_csv(t: f64, row: &Result<SweepRowData, thermogap_core::Error>) -> String {
    match row {
        Ok(r) => {
            let weak: Vec<String> = r.weak_star.iter().map(|v| v.to_string()).collect();
            format!(
                "{t},ok,{},{},{},{},{},{}",
                r.lambda,
                r.pressure,
                r.h_sup_diff,
                r.h_d1_diff,
                r.h_d2_diff,
                weak.join(",")
            )
        }
        Err(e) => format!("{t},failed: {e},,,,,,,,,,,,"),
    }
}

#[derive(Serialize)]
struct SweepJson {
    family: String,
    rows_total: usize,
    rows_failed: usize,
    pressure_gaps: Vec<f64>,
    h_sup_diffs: Vec<f64>,
}

pub fn run_sweep(ctx: &RunContext) -> Result<i32, String> {
    let family = sweep_family(ctx)?;
    // gate on the family's center
    let (map0, pot0) = family(0.0).map_err(|e| e.to_string())?;
    let cover = CoverSpec::adapted(&map0);
    let report = hypotheses::evaluate(&map0, &pot0, &cover, &ctx.config.hypothesis_config())
        .map_err(|e| e.to_string())?;
    if !report.pass_existence() {
        eprintln!("hypothesis gate failed for the sweep center");
        return Ok(2);
    }
    let nc = &ctx.config.numerics;
    let ts = ctx.config.sweep.ts.clone();
    let table = if ctx.threads > 1 {
        // rows are independent; shard them and merge in order
        let shard = ts.len().div_ceil(ctx.threads);
        let mut merged: Vec<(f64, thermogap_core::Result<SweepRowData>)> = Vec::new();
        let chunks: Vec<&[f64]> = ts.chunks(shard.max(1)).collect();
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|chunk| {
                    let family = &family;
                    scope.spawn(move || {
                        pressure_density_sweep(family, chunk, nc.grid, nc.tol, nc.max_iter)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sweep shard")).collect()
        });
        let mut reference = None;
        for r in results {
            let t = r.map_err(|e| e.to_string())?;
            reference.get_or_insert(t.reference);
            merged.extend(t.rows);
        }
        thermogap_core::stability::SweepTable {
            rows: merged,
            reference: reference.expect("at least one shard"),
        }
    } else {
        pressure_density_sweep(&family, &ts, nc.grid, nc.tol, nc.max_iter)
            .map_err(|e| e.to_string())?
    };
    let rows_failed = table.rows.iter().filter(|(_, r)| r.is_err()).count();
    let pressure_gaps: Vec<f64> = table
        .rows
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .map(|r| (r.pressure - table.reference.pressure).abs())
        .collect();
    let h_sup_diffs: Vec<f64> = table
        .rows
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .map(|r| r.h_sup_diff)
        .collect();
    let payload = SweepJson {
        family: ctx.config.sweep.family.clone(),
        rows_total: table.rows.len(),
        rows_failed,
        pressure_gaps: pressure_gaps.clone(),
        h_sup_diffs,
    };
    ctx.sink.write_json("sweep", ctx.seed(), payload).map_err(|e| e.to_string())?;
    let dict_names: Vec<String> =
        (0..weak_star_dictionary(4).len()).map(|i| format!("weak{}", i + 1)).collect();
    let header = format!(
        "t,status,lambda,pressure,h_sup_diff,h_d1_diff,h_d2_diff,{}",
        dict_names.join(",")
    );
    ctx.sink
        .write_csv(
            "sweep.csv",
            &header,
            table.rows.iter().map(|(t, r)| sweep_row_csv(*t, r)),
        )
        .map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|(t, r)| r.as_ref().ok().map(|row| (*t, (row.pressure - table.reference.pressure).abs())))
        .collect();
    ctx.sink
        .write_plot("sweep_pressure.svg", "|P(t) - P(0)|", &pts, true)
        .map_err(|e| e.to_string())?;
    Ok(0)
}

#[derive(Serialize)]
struct StabilityJson {
    family: String,
    epsilons: Vec<f64>,
    lambda_gaps: Vec<f64>,
    tau_subs: Vec<f64>,
    center_tau_sub: f64,
}

pub fn run_random_stability(ctx: &RunContext) -> Result<i32, String> {
    let seed = ctx.seed_required()?;
    let rc = ctx.config.random_stability.clone();
    let family: BoxedFamily = match rc.family.as_str() {
            "mp_alpha" => {
                let alpha0 =
                    ctx.config.map.alpha.ok_or("map.alpha missing for mp_alpha stability")?;
                Box::new(mp_alpha_family(alpha0, rc.potential_t))
            }
            "pitchfork_t" => {
                let t0 = ctx.config.map.t.unwrap_or(0.0);
                let pt = rc.potential_t;
                Box::new(move |d: f64| {
                    let map = CircleMap::pitchfork(t0 + d)?;
                    let pot = PotentialSpec::geometric_centered(&map, pt)?;
                    Ok((map, pot))
                })
            }
            "fourier_amp" => {
                let coeffs: Vec<(f64, f64)> = ctx
                    .config
                    .potential
                    .coefficients
                    .clone()
                    .ok_or("potential.coefficients missing for fourier_amp stability")?
                    .iter()
                    .map(|&[a, th]| (a, th))
                    .collect();
                Box::new(thermogap_core::stability::fourier_jitter_family(coeffs))
            }
            other => return Err(format!("unknown stability family '{other}'")),
        };
    let (map0, pot0) = family(0.0).map_err(|e| e.to_string())?;
    let cover = CoverSpec::adapted(&map0);
    let report = hypotheses::evaluate(&map0, &pot0, &cover, &ctx.config.hypothesis_config())
        .map_err(|e| e.to_string())?;
    if !report.pass_existence() {
        eprintln!("hypothesis gate failed for the stability center");
        return Ok(2);
    }
    let nc = &ctx.config.numerics;
    let rows = random_stability_sweep(
        &family,
        &rc.epsilons,
        rc.support,
        seed,
        nc.grid,
        nc.tol,
        nc.max_iter,
    )
    .map_err(|e| e.to_string())?;
    let matrix = build_matrix(&map0, &pot0, nc.grid).map_err(|e| e.to_string())?;
    let center = solve_spectrum(&matrix, nc.tol, nc.max_iter).map_err(|e| e.to_string())?;
    let payload = StabilityJson {
        family: rc.family.clone(),
        epsilons: rows.iter().map(|r| r.epsilon).collect(),
        lambda_gaps: rows.iter().map(|r| r.lambda_gap).collect(),
        tau_subs: rows.iter().map(|r| r.tau_sub).collect(),
        center_tau_sub: center.tau_sub,
    };
    ctx.sink.write_json("random-stability", ctx.seed(), payload).map_err(|e| e.to_string())?;
    ctx.sink
        .write_csv(
            "random_stability.csv",
            "epsilon,lambda,lambda_gap,h_sup_diff,tau_sub,atom_lambda_gap_max",
            rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{},{}",
                    r.epsilon, r.lambda, r.lambda_gap, r.h_sup_diff, r.tau_sub, r.atom_lambda_gap_max
                )
            }),
        )
        .map_err(|e| e.to_string())?;
    Ok(0)
}

#[derive(Serialize)]
struct DemoJson {
    lip_min: f64,
    sup_norms: Vec<f64>,
    sup_strictly_decreasing: bool,
}

pub fn run_demo_discontinuity(ctx: &RunContext) -> Result<i32, String> {
    let grid = ctx.config.numerics.grid.max(4096);
    let rows = lip_discontinuity_demo(&[1, 10, 100], grid).map_err(|e| e.to_string())?;
    let lip_min = rows.iter().map(|r| r.lip).fold(f64::INFINITY, f64::min);
    let sups: Vec<f64> = rows.iter().map(|r| r.sup).collect();
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let payload = DemoJson { lip_min, sup_norms: sups, sup_strictly_decreasing: decreasing };
    ctx.sink
        .write_json("demo-discontinuity", ctx.seed(), payload)
        .map_err(|e| e.to_string())?;
    ctx.sink
        .write_csv(
            "demo_discontinuity.csv",
            "n,lip,sup",
            rows.iter().map(|r| format!("{},{},{}", r.n, r.lip, r.sup)),
        )
        .map_err(|e| e.to_string())?;
    Ok(0)
}

pub fn run_validate(ctx: &RunContext, target: &str) -> Result<i32, String> {
    let subcommands = [
        "check",
        "spectrum",
        "density",
        "cones",
        "correlations",
        "clt",
        "sweep",
        "random-stability",
        "demo-discontinuity",
    ];
    let targets: Vec<&str> = if target == "all" {
        subcommands.to_vec()
    } else if subcommands.contains(&target) {
        vec![target]
    } else {
        return Err(format!("unknown validation target '{target}'"));
    };
    let mut diagnostics: Vec<String> = Vec::new();
    for t in targets {
        for d in ctx.config.diagnostics(t) {
            if !diagnostics.contains(&d) {
                diagnostics.push(d);
            }
        }
    }
    for d in &diagnostics {
        println!("{d}");
    }
    if diagnostics.is_empty() {
        println!("config is runnable");
        Ok(0)
    } else {
        Ok(1)
    }
}
