use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lurye_ozf::hyperdominant::{
    augment_zero_excess, birkhoff_decompose, classify, combo_sum, conic_decompose, conic_sum, PermutationCombo,
};
use lurye_ozf::linalg::DenseMatrix;
use lurye_ozf::multiplier_search::{
    nonlinear_certificate, search_fir, verify_fdi, FirMultiplier, NonlinearReport, SearchReport,
};
use lurye_ozf::nonlinearity::{PiecewiseLinear, SectorNonlinearity};
use lurye_ozf::periodic_banded::{
    conic_decompose_periodic, conic_reconstruct, enumerate_basis, pair_in_gtb, BandedOperator, ConicTerm,
    Membership, PeriodicBandedOperator, DEFAULT_BASIS_CAP,
};
use lurye_ozf::signals::{SequencePair, Signal};
use lurye_ozf::simulator::{destabilization_probe, estimate_gain, simulate, GainEstimate, ProbeResult, SimConfig};
use lurye_ozf::sprocedure::{
    build_sigma0, build_sigmak, certificate_search, combined_max_eig, CertificateOutcome, QuadraticForm,
};
use serde::{Deserialize, Serialize};

use crate::config::{read_json, AnalysisConfig, SearchParams};
use crate::{Cli, CliError, Command, Verdict};

const DEFAULT_OUT: &str = "out";

struct Context {
    config: AnalysisConfig,
    out: PathBuf,
}

fn context(cli: &Cli, needs_config: bool) -> Result<Context, CliError> {
    let mut config = match &cli.config {
        Some(path) => AnalysisConfig::load(path)?,
        None if needs_config => return Err(CliError::Usage("this command needs --config".into())),
        None => AnalysisConfig::default(),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    config.apply_seed(seed);
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    config.out = Some(out.clone());
    config.search.grid_points = Some(config.search.grid().points);
    fs::create_dir_all(&out)?;
    if cli.config.is_some() {
        write_json(&out, "resolved_config.json", &config)?;
    }
    Ok(Context { config, out })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub fn run(cli: &Cli) -> Result<Verdict, CliError> {
    match &cli.command {
        Command::Search => search(&context(cli, true)?),
        Command::Verify => verify(&context(cli, true)?),
        Command::Decompose { file, birkhoff } => decompose(&context(cli, false)?, file, *birkhoff),
        Command::CheckPair { v, w, period, band } => check_pair(&context(cli, false)?, v, w, *period, *band),
        Command::Certificate => certificate(&context(cli, true)?),
        Command::Simulate => simulation(&context(cli, true)?),
        Command::Hunt => hunt(&context(cli, true)?),
    }
}

fn search(ctx: &Context) -> Result<Verdict, CliError> {
    let g = ctx.config.plant()?;
    let params = &ctx.config.search;
    let report = search_fir(&g, params.band, &params.grid(), params.mode)?;
    write_json(&ctx.out, "search_report.json", &report)?;
    if report.feasible {
        println!("feasible: margin {:e}", report.margin.unwrap_or_default());
        Ok(Verdict::Positive)
    } else {
        println!(
            "infeasible: certificate verified {}, worst frequency {}",
            report.certificate_verified,
            report.worst_frequency.unwrap_or_default()
        );
        Ok(Verdict::Negative)
    }
}

fn verify(ctx: &Context) -> Result<Verdict, CliError> {
    let g = ctx.config.plant()?;
    let m = ctx
        .config
        .multiplier
        .as_ref()
        .ok_or_else(|| CliError::Usage("verify needs a multiplier in the config".into()))?;
    let params = SearchParams {
        band: m.bandwidth(),
        ..ctx.config.search.clone()
    };
    let report = verify_fdi(m, &g, &params.grid())?;
    write_json(&ctx.out, "verify_report.json", &report)?;
    println!("pass {}: worst value {:e} at omega {}", report.pass, report.worst_value, report.worst_frequency);
    Ok(if report.pass { Verdict::Positive } else { Verdict::Negative })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DecomposeInput {
    Operator(PeriodicBandedOperator),
    Matrix { matrix: Vec<Vec<f64>> },
    Rows(Vec<Vec<f64>>),
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Decomposition {
    /// `M = sum alpha_i (I - P_i)` over banded periodic permutations.
    PeriodicConic { terms: Vec<ConicTerm>, residual: f64 },
    /// `M = sum beta_i (I - P_i)`; `augmented` when a border was added to reach zero excess.
    Conic { terms: PermutationCombo, augmented: bool, residual: f64 },
    /// `A = sum lambda_i P_i`.
    Birkhoff { terms: PermutationCombo, residual: f64 },
}

fn decompose(ctx: &Context, file: &Path, birkhoff: bool) -> Result<Verdict, CliError> {
    let result = match read_json::<DecomposeInput>(file)? {
        DecomposeInput::Operator(m) => {
            let terms = conic_decompose_periodic(&m)?;
            let residual = conic_reconstruct(m.period(), m.bandwidth(), &terms).max_abs_diff(&m);
            Decomposition::PeriodicConic { terms, residual }
        }
        DecomposeInput::Matrix { matrix: rows } | DecomposeInput::Rows(rows) => {
            let a = DenseMatrix::from_rows(rows)?;
            decompose_matrix(&a, birkhoff)?
        }
    };
    let (count, residual) = match &result {
        Decomposition::PeriodicConic { terms, residual } => (terms.len(), *residual),
        Decomposition::Conic { terms, residual, .. } | Decomposition::Birkhoff { terms, residual } => {
            (terms.len(), *residual)
        }
    };
    write_json(&ctx.out, "decomposition.json", &result)?;
    println!("terms {count}, reconstruction residual {residual:e}");
    Ok(Verdict::Positive)
}

fn decompose_matrix(a: &DenseMatrix, birkhoff: bool) -> Result<Decomposition, CliError> {
    let class = classify(a);
    if birkhoff {
        if !class.doubly_stochastic {
            return Err(CliError::Usage("matrix is not doubly stochastic".into()));
        }
        let terms = birkhoff_decompose(a)?;
        let residual = combo_sum(a.n(), &terms).max_abs_diff(a);
        Ok(Decomposition::Birkhoff { terms, residual })
    } else if class.hyperdominant {
        let (target, augmented) = if class.zero_excess {
            (a.clone(), false)
        } else {
            (augment_zero_excess(a)?, true)
        };
        let terms = conic_decompose(&target)?;
        let residual = conic_sum(target.n(), &terms).max_abs_diff(&target);
        Ok(Decomposition::Conic { terms, augmented, residual })
    } else {
        Err(CliError::Usage("matrix is not doubly hyperdominant".into()))
    }
}

#[derive(Serialize)]
struct PairVerdict {
    #[serde(rename = "T")]
    period: usize,
    #[serde(rename = "B")]
    band: usize,
    #[serde(flatten)]
    membership: Membership,
}

fn check_pair(ctx: &Context, v: &Path, w: &Path, period: usize, band: usize) -> Result<Verdict, CliError> {
    let pair = SequencePair::new(read_json::<Signal>(v)?, read_json::<Signal>(w)?);
    let membership = pair_in_gtb(&pair, period, band)?;
    let member = membership.member;
    match &membership.witness {
        None => println!("member: min pairing {:e}", membership.min_value),
        Some(p) => println!(
            "not a member: pairing {:e} for displacement {:?}",
            membership.min_value,
            p.displacement()
        ),
    }
    write_json(&ctx.out, "pair_verdict.json", &PairVerdict { period, band, membership })?;
    Ok(if member { Verdict::Positive } else { Verdict::Negative })
}

#[derive(Serialize)]
struct CertificateReport {
    /// Displacement vectors of the constraint forms, in `alpha` order.
    basis: Vec<Vec<i64>>,
    outcome: CertificateOutcome,
    /// Largest eigenvalue at the returned `alpha`, recomputed.
    verified_max_eig: Option<f64>,
}

fn certificate(ctx: &Context) -> Result<Verdict, CliError> {
    let g = ctx.config.plant()?;
    let p = &ctx.config.certificate;
    let basis: Vec<_> = enumerate_basis(p.period, p.band, DEFAULT_BASIS_CAP)?
        .into_iter()
        .filter(|c| !c.is_identity())
        .collect();
    let sigmas = basis
        .iter()
        .map(|c| build_sigmak(c, p.horizon))
        .collect::<Result<Vec<QuadraticForm>, _>>()?;
    let s0 = build_sigma0(&g, p.gamma, p.horizon)?;
    let outcome = certificate_search(&s0, &sigmas, &p.search)?;
    let verified_max_eig = outcome
        .certificate
        .as_ref()
        .map(|c| combined_max_eig(&s0, &c.alpha, &sigmas))
        .transpose()?;
    let found = outcome.found() && verified_max_eig.is_some_and(|e| e <= p.search.tolerance);
    println!(
        "{}: lambda_max {:e} after {} iterations",
        if found { "certified" } else { "inconclusive" },
        outcome.max_eig,
        outcome.iterations
    );
    let report = CertificateReport {
        basis: basis.iter().map(|c| c.displacement().to_vec()).collect(),
        outcome,
        verified_max_eig,
    };
    write_json(&ctx.out, "certificate.json", &report)?;
    Ok(if found { Verdict::Positive } else { Verdict::Negative })
}

#[derive(Serialize)]
struct SimulationSummary {
    steps: usize,
    peak_gain: f64,
    diverged: bool,
    /// Over the configured input family; a lower bound on the loop gain.
    gain_lower_bound: GainEstimate,
}

fn simulation(ctx: &Context) -> Result<Verdict, CliError> {
    let g = ctx.config.plant()?;
    let s = &ctx.config.simulation;
    let cfg = SimConfig {
        plant: g.clone(),
        nonlinearity: s.nonlinearity.clone(),
        input: s.input.clone(),
        horizon: s.horizon,
        feedthrough: s.feedthrough,
        allow_unstable: s.allow_unstable,
    };
    let result = simulate(&cfg)?;
    let mut csv = String::from("k,e_k,v_k,w_k,gain_tau\n");
    for (k, (v, w)) in result.v.iter().zip(&result.w).enumerate() {
        let gain = result.gain_trace[k].map(|x| x.to_string()).unwrap_or_default();
        writeln!(csv, "{k},{},{v},{w},{gain}", result.e[k]).expect("writing to a string");
    }
    let path = ctx.out.join("trace.csv");
    fs::write(&path, csv)?;
    let estimate = estimate_gain(&g, &s.nonlinearity, &s.family, s.horizon, s.allow_unstable)?;
    let summary = SimulationSummary {
        steps: result.v.len(),
        peak_gain: result.peak_gain,
        diverged: result.diverged,
        gain_lower_bound: estimate,
    };
    write_json(&ctx.out, "simulation_summary.json", &summary)?;
    println!(
        "peak gain {} over {} steps{}; family lower bound {}",
        summary.peak_gain,
        summary.steps,
        if summary.diverged { " (diverged)" } else { "" },
        summary.gain_lower_bound.gamma
    );
    Ok(Verdict::Positive)
}

#[derive(Serialize)]
struct HuntReport {
    incumbent: ProbeResult,
    multiplier: Option<FirMultiplier>,
    /// Search run when no multiplier was configured.
    search: Option<SearchReport>,
    /// Multiplier inequality probed on the incumbent nonlinearity.
    multiplier_check: Option<NonlinearReport>,
}

fn hunt(ctx: &Context) -> Result<Verdict, CliError> {
    let g = ctx.config.plant()?;
    let h = &ctx.config.hunt;
    let (multiplier, search) = match &ctx.config.multiplier {
        Some(m) => (Some(m.clone()), None),
        None => {
            let p = &ctx.config.search;
            let report = search_fir(&g, p.band, &p.grid(), p.mode)?;
            (report.multiplier.clone().filter(|_| report.feasible), Some(report))
        }
    };
    let incumbent = destabilization_probe(&g, &h.family, h.budget)?;
    let psi = SectorNonlinearity::new(None, vec![PiecewiseLinear::linear(0.0)], None)?;
    let multiplier_check = multiplier
        .as_ref()
        .map(|m| nonlinear_certificate(m, &incumbent.worst_n, &psi, &g, ctx.config.search.margin, &h.probe))
        .transpose()?;
    let violated = multiplier_check.as_ref().is_some_and(|r| r.violated);
    println!(
        "incumbent gain {} (lower bound){}{}",
        incumbent.gamma,
        if incumbent.diverged { ", diverged" } else { "" },
        if violated { ", multiplier inequality violated" } else { "" }
    );
    let diverged = incumbent.diverged;
    let report = HuntReport {
        incumbent,
        multiplier,
        search,
        multiplier_check,
    };
    write_json(&ctx.out, "hunt_report.json", &report)?;
    Ok(if diverged { Verdict::Negative } else { Verdict::Positive })
}
