use std::fmt::Write as _;

use anisoeig::harness::{build_comparison, ComparisonOptions, ComparisonReport};
use anisoeig::radial::{solve_radial, RadialProblem};
use anisoeig::rearrangement::{
    decreasing_rearrangement, polya_szego_gap, symmetrize, symmetrized_radius, weight_rearrangement,
};
use anisoeig::solver::{minimize, EigenResult, SolveConfig};
use anisoeig::{NormSpec, ScalarField};
use anyhow::Result;
use serde::Serialize;

use crate::config::{Command, RunConfig, Shape};
use crate::output::{write_margins, write_profiles, OutDir};

/// Whether every requested check passed.
pub struct Outcome {
    pub passed: bool,
    /// The `result.json` text, echoed on stdout.
    pub json: String,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let out = OutDir::create(&cfg.out)?;
    match cfg.command {
        Command::SolveRadial => solve_radial_cmd(cfg, &out),
        Command::SolveDomain => solve_domain_cmd(cfg, &out),
        Command::Symmetrize => symmetrize_cmd(cfg, &out),
        Command::Verify => verify_cmd(cfg, &out),
    }
}

fn solve_config(cfg: &RunConfig) -> SolveConfig {
    let mut s =
        SolveConfig::new(cfg.p, cfg.q, cfg.norm.clone()).with_restarts(cfg.restarts).with_seed(cfg.seed);
    s.max_iters = cfg.max_iters;
    s
}

trait Show {
    fn show(&self) -> String;
}

impl Show for f64 {
    // shortest text that round-trips
    fn show(&self) -> String {
        format!("{self:e}")
    }
}

macro_rules! show_display {
    ($($t:ty),*) => {$(
        impl Show for $t {
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
show_display!(usize, bool, &str, String);

/// Lines of `key: value`, values printed exactly as stored.
#[derive(Default)]
struct Summary(String);

impl Summary {
    fn line(&mut self, key: &str, value: impl Show) -> &mut Self {
        writeln!(self.0, "{key}: {}", value.show()).unwrap();
        self
    }
}

#[derive(Serialize)]
struct RadialRecord<'a> {
    command: Command,
    config: &'a RunConfig,
    norm: &'a NormSpec,
    /// Shooting eigenvalue before normalization.
    raw_eigenvalue: f64,
    lambda: f64,
    radius: f64,
    nodes: usize,
    residual: f64,
    wulff_measure: f64,
    passed: bool,
}

fn solve_radial_cmd(cfg: &RunConfig, out: &OutDir) -> Result<Outcome> {
    let problem = RadialProblem::with_measure(
        cfg.p,
        cfg.q,
        cfg.norm.dim(),
        cfg.norm.wulff_measure(),
        cfg.radial_weight()?,
    )?
    .with_nodes(cfg.nodes)?;
    let sol = solve_radial(&problem, cfg.radius)?;
    let passed = sol.residual.abs() <= 1e-8;
    let record = RadialRecord {
        command: cfg.command,
        config: cfg,
        norm: &cfg.norm,
        raw_eigenvalue: sol.raw_eigenvalue,
        lambda: sol.eigenvalue,
        radius: sol.radius,
        nodes: sol.nodes,
        residual: sol.residual,
        wulff_measure: cfg.norm.wulff_measure(),
        passed,
    };
    let json = out.write_json("result.json", &record)?;
    out.write_with("profiles.csv", |w| sol.profile.write_csv(w))?;
    let mut s = Summary::default();
    s.line("command", "solve-radial")
        .line("raw_eigenvalue", sol.raw_eigenvalue)
        .line("lambda", sol.eigenvalue)
        .line("radius", sol.radius)
        .line("nodes", sol.nodes)
        .line("residual", sol.residual)
        .line("passed", passed);
    out.write_str("summary.txt", &s.0)?;
    Ok(Outcome { passed, json })
}

#[derive(Serialize)]
struct DomainRecord<'a> {
    command: Command,
    config: &'a RunConfig,
    lambda: f64,
    q_norm: f64,
    iterations: usize,
    weak_residual: f64,
    restart_spread: f64,
    restart: usize,
    converged: bool,
    smoothing: f64,
    cells: usize,
    measure: f64,
}

fn domain_record<'a>(cfg: &'a RunConfig, res: &EigenResult) -> DomainRecord<'a> {
    DomainRecord {
        command: cfg.command,
        config: cfg,
        lambda: res.lambda,
        q_norm: res.q_norm,
        iterations: res.iterations,
        weak_residual: res.weak_residual,
        restart_spread: res.restart_spread,
        restart: res.restart,
        converged: res.converged,
        smoothing: res.smoothing,
        cells: res.field.masked_count(),
        measure: res.field.domain_measure(),
    }
}

fn solve_domain_cmd(cfg: &RunConfig, out: &OutDir) -> Result<Outcome> {
    let domain = cfg.domain_field()?;
    let res = minimize(&domain, &solve_config(cfg))?;
    let record = domain_record(cfg, &res);
    let json = out.write_json("result.json", &record)?;
    out.write_with("eigenfunction.csv", |w| res.field.write_csv(w))?;
    out.write_with("history.csv", |w| {
        writeln!(w, "iteration,quotient")?;
        for (k, v) in res.quotient_history.iter().enumerate() {
            writeln!(w, "{k},{v:.16e}")?;
        }
        Ok(())
    })?;
    let mut s = Summary::default();
    s.line("command", "solve-domain")
        .line("lambda", record.lambda)
        .line("iterations", record.iterations)
        .line("weak_residual", record.weak_residual)
        .line("restart_spread", record.restart_spread)
        .line("converged", record.converged)
        .line("cells", record.cells)
        .line("measure", record.measure);
    out.write_str("summary.txt", &s.0)?;
    Ok(Outcome { passed: res.converged, json })
}

#[derive(Serialize)]
struct NormPair {
    r: f64,
    original: f64,
    symmetrized: f64,
}

#[derive(Serialize)]
struct SymmetrizeRecord<'a> {
    command: Command,
    config: &'a RunConfig,
    /// Whether the field came from an eigenfunction solve.
    solved: bool,
    cells: usize,
    measure: f64,
    symmetrized_radius: f64,
    norms: Vec<NormPair>,
    energy: f64,
    symmetrized_energy: f64,
    polya_szego_gap: f64,
    polya_szego_budget: f64,
    passed: bool,
}

fn symmetrize_cmd(cfg: &RunConfig, out: &OutDir) -> Result<Outcome> {
    let domain = cfg.domain_field()?;
    let given = cfg.shape == Shape::Csv && domain.masked_values().iter().any(|&v| v != 0.0);
    let field: ScalarField = if given {
        domain.map_values(|_, _| 0.0)?.with_values(domain.values().iter().map(|v| v.abs()).collect())?
    } else {
        minimize(&domain, &solve_config(cfg))?.field
    };
    let star = symmetrize(&field, &cfg.norm)?;
    let ps = polya_szego_gap(&field, &cfg.norm, cfg.p)?;
    let mut rs = vec![1.0, cfg.q, cfg.p];
    rs.extend(&cfg.r_list);
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    let norms = rs
        .iter()
        .map(|&r| NormPair { r, original: field.weighted_norm(r), symmetrized: star.weighted_norm(r) })
        .collect();
    let passed = ps.gap >= -ps.budget;
    let record = SymmetrizeRecord {
        command: cfg.command,
        config: cfg,
        solved: !given,
        cells: field.masked_count(),
        measure: field.domain_measure(),
        symmetrized_radius: symmetrized_radius(field.domain_measure(), &cfg.norm),
        norms,
        energy: ps.energy,
        symmetrized_energy: ps.symmetrized_energy,
        polya_szego_gap: ps.gap,
        polya_szego_budget: ps.budget,
        passed,
    };
    let json = out.write_json("result.json", &record)?;
    out.write_with("symmetrized.csv", |w| star.write_csv(w))?;
    let fs = decreasing_rearrangement(&field);
    let ms = weight_rearrangement(&field);
    out.write_with("profiles.csv", |w| {
        writeln!(w, "s,f_star,m_star")?;
        for (k, win) in fs.breakpoints().windows(2).enumerate() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", 0.5 * (win[0] + win[1]), fs.values()[k], ms.values()[k])?;
        }
        Ok(())
    })?;
    let mut s = Summary::default();
    s.line("command", "symmetrize")
        .line("cells", record.cells)
        .line("measure", record.measure)
        .line("symmetrized_radius", record.symmetrized_radius)
        .line("energy", record.energy)
        .line("symmetrized_energy", record.symmetrized_energy)
        .line("polya_szego_gap", record.polya_szego_gap)
        .line("polya_szego_budget", record.polya_szego_budget)
        .line("passed", passed);
    out.write_str("summary.txt", &s.0)?;
    Ok(Outcome { passed, json })
}

#[derive(Serialize)]
struct VerifyRecord<'a> {
    command: Command,
    config: &'a RunConfig,
    report: &'a ComparisonReport,
}

#[derive(Serialize)]
struct Constants<'a> {
    q: f64,
    r_list: &'a [f64],
    entries: &'a [anisoeig::harness::ChitiEntry],
}

fn verify_cmd(cfg: &RunConfig, out: &OutDir) -> Result<Outcome> {
    let domain = cfg.domain_field()?;
    let opts = ComparisonOptions { r_list: cfg.r_list.clone(), levels: cfg.levels, radial_nodes: cfg.nodes };
    let report = build_comparison(&domain, &solve_config(cfg), &opts)?;
    let json =
        out.write_json("result.json", &VerifyRecord { command: cfg.command, config: cfg, report: &report })?;
    out.write_json("constants.json", &Constants { q: cfg.q, r_list: &cfg.r_list, entries: &report.chiti })?;
    out.write_with("profiles.csv", |w| write_profiles(w, &report))?;
    out.write_with("margins.csv", |w| write_margins(w, &report))?;
    out.write_with("eigenfunction.csv", |w| report.eigenfunction.write_csv(w))?;
    out.write_with("matched_profile.csv", |w| report.matched_profile.write_csv(w))?;

    let mut s = Summary::default();
    s.line("command", "verify")
        .line("lambda_omega", report.lambda_omega)
        .line("lambda_star", report.lambda_star)
        .line("r_star", report.r_star)
        .line("r_lambda", report.r_lambda)
        .line("clamped", report.clamped)
        .line("tolerance", report.tolerance)
        .line("faber_krahn.margin", report.faber_krahn.margin)
        .line("faber_krahn.passed", report.faber_krahn.passed)
        .line("talenti.min_relative", report.talenti.min_relative)
        .line("talenti.max_relative", report.talenti.max_relative)
        .line("talenti.passed", report.talenti.passed)
        .line("pointwise.min_margin", report.pointwise.min_margin)
        .line("pointwise.endpoint", report.pointwise.endpoint)
        .line("pointwise.passed", report.pointwise.passed);
    for d in &report.domination {
        s.line(&format!("domination[r={}].min_margin", d.r), d.min_margin)
            .line(&format!("domination[r={}].passed", d.r), d.passed);
    }
    for c in &report.chiti {
        if let Some(ci) = c.c_i {
            s.line(&format!("chiti[r={}].c_i", c.r), ci);
        }
        s.line(&format!("chiti[r={}].c_ii", c.r), c.c_ii).line(&format!("chiti[r={}].passed", c.r), c.passed);
    }
    for note in &report.notes {
        s.line("note", note.as_str());
    }
    s.line("passed", report.passed);
    out.write_str("summary.txt", &s.0)?;
    Ok(Outcome { passed: report.passed, json })
}
