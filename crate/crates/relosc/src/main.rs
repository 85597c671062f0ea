//! Command-line driver: scenario ingestion, orchestration of the
//! checkers and solvers, and machine-readable reports.
//!
//! Exit codes: 0 success (or certificate), 1 input error, 2 hypothesis
//! check failed, 3 saddle search exhausted without a certificate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relosc::action::{j_value, PerturbCoeffs, SaddleProblem};
use relosc::config::Config;
use relosc::error::{Error, Result};
use relosc::hypotheses::{check_a1, check_a2, preset_scenario, PresetName};
use relosc::minimize::{multi_start, sampling_radius, GrowthConstants, MinimaReport};
use relosc::potentials::check_admissibility;
use relosc::report::{certificate_json, minima_report_json, Json};
use relosc::saddle::{
    minimax_gap, property_p_witness, saddle_search, PerturbFamily, SaddleStatus,
};
use relosc::trajectory::Trajectory;
use relosc::verify::{convergence_study, el_residual};

#[derive(Parser)]
#[command(name = "relosc", version, about = "Periodic-orbit laboratory for slope-constrained oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kinetic admissibility, growth and level-gap hypotheses, family
    /// pairing probes, and scenario-specific checks.
    Check(RunArgs),
    /// Multi-start minimization at the configured perturbation.
    Solve(RunArgs),
    /// Search the perturbation family for a two-minima certificate.
    Saddle(RunArgs),
    /// Equation residual of the best minimizer plus a refinement study.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config file (JSON); `report.json` from a previous run works too.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Builtin scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and CSV artifacts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Multi-start count override.
    #[arg(long)]
    n_starts: Option<usize>,
    /// Iteration budget override (descent and saddle search).
    #[arg(long)]
    max_iters: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Check(a) => ("check", a),
        Command::Solve(a) => ("solve", a),
        Command::Saddle(a) => ("saddle", a),
        Command::Verify(a) => ("verify", a),
    };
    match run(name, args) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn load_config(args: &RunArgs) -> Result<Config> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            Config::from_json_str(&text)?
        }
        (None, Some(name)) => Config::builtin(name)?,
        (None, None) => {
            return Err(Error::Config {
                path: String::new(),
                message: "pass --config <file> or --scenario <name>".into(),
            })
        }
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_starts {
        cfg.optimizer.n_starts = n;
    }
    if let Some(iters) = args.max_iters {
        cfg.optimizer.max_iters = iters;
        cfg.saddle.max_iters = iters;
    }
    Ok(cfg)
}

struct Prepared {
    problem: SaddleProblem,
    family: PerturbFamily,
    psi: PerturbCoeffs,
    growth: Option<GrowthConstants>,
    growth_note: Option<String>,
    search_radius: f64,
}

fn prepare(cfg: &Config) -> Result<Prepared> {
    let problem = cfg.to_problem()?;
    let family = cfg.to_family()?;
    let psi = cfg.to_psi()?;
    let fallback = cfg.hypotheses.x_radius + problem.kin.slope_bound() * problem.period;
    let (growth, growth_note, mut radius) =
        match relosc::hypotheses::estimate_growth_constants(&problem, cfg.problem.q, &psi, &cfg.growth_options()) {
            Ok(gc) => {
                let origin = Trajectory::constant(&vec![0.0; problem.dim], cfg.grid.node_count, problem.period)?;
                let rho = j_value(&problem, &origin, &psi)?;
                let radius = sampling_radius(&gc, &psi, rho, problem.kin.slope_bound(), problem.period)?;
                (Some(gc), None, radius)
            }
            Err(e) => (None, Some(e.to_string()), fallback),
        };
    if let Some(r) = cfg.optimizer.search_radius {
        radius = r;
    }
    Ok(Prepared {
        problem,
        family,
        psi,
        growth,
        growth_note,
        search_radius: radius,
    })
}

fn growth_json(prep: &Prepared) -> Json {
    match (&prep.growth, &prep.growth_note) {
        (Some(gc), _) => Json::obj(vec![
            ("q", Json::Num(gc.q)),
            ("k", Json::Num(gc.k)),
            ("delta", Json::Num(gc.delta)),
            ("nu", Json::Num(gc.nu)),
            ("eta", Json::Num(gc.eta)),
            ("eta1", Json::Num(gc.eta1)),
        ]),
        (None, Some(note)) => Json::obj(vec![("error", Json::str(note.clone()))]),
        (None, None) => Json::Null,
    }
}

fn write_report(out_dir: &Path, body: Json) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.json"), body.to_json_string())?;
    Ok(())
}

fn report_shell(command: &str, cfg: &Config, prep: &Prepared, exit: u8, results: Json) -> Json {
    Json::obj(vec![
        ("command", Json::str(command)),
        ("exit_code", Json::Int(exit as i64)),
        ("config", cfg.to_json()),
        ("search_radius", Json::Num(prep.search_radius)),
        ("growth_constants", growth_json(prep)),
        ("results", results),
    ])
}

fn run(command: &str, args: &RunArgs) -> Result<u8> {
    let cfg = load_config(args)?;
    let prep = prepare(&cfg)?;
    match command {
        "check" => run_check(&cfg, &prep, &args.out_dir),
        "solve" => run_solve(&cfg, &prep, &args.out_dir),
        "saddle" => run_saddle(&cfg, &prep, &args.out_dir),
        "verify" => run_verify(&cfg, &prep, &args.out_dir),
        _ => unreachable!(),
    }
}

fn run_check(cfg: &Config, prep: &Prepared, out_dir: &Path) -> Result<u8> {
    let p = &prep.problem;
    let mut failed: Vec<String> = Vec::new();
    let mut sections: Vec<(String, Json)> = Vec::new();

    let adm = check_admissibility(&p.kin, p.dim, 80, cfg.seed);
    if !adm.passed() {
        failed.push("kinetic-admissibility".into());
    }
    sections.push((
        "kinetic_admissibility".into(),
        Json::obj(vec![
            ("passed", Json::Bool(adm.passed())),
            (
                "items",
                Json::Arr(
                    adm.items
                        .iter()
                        .map(|i| {
                            Json::obj(vec![
                                ("name", Json::str(i.name)),
                                ("passed", Json::Bool(i.passed)),
                                ("worst", Json::Num(i.worst)),
                                ("detail", Json::str(i.detail.clone())),
                            ])
                        })
                        .collect(),
                ),
            ),
            ("max_grad_fd_discrepancy", Json::Num(adm.max_grad_fd_discrepancy)),
        ]),
    ));

    let a1 = check_a1(p, cfg.problem.q, &cfg.hypotheses.radii, &cfg.growth_options())?;
    if !a1.passed {
        failed.push("a1".into());
    }
    sections.push((
        "a1".into(),
        Json::obj(vec![
            ("passed", Json::Bool(a1.passed)),
            ("q", Json::Num(a1.q)),
            ("f_increasing", Json::Bool(a1.f_increasing)),
            ("f_growth", Json::Bool(a1.f_growth)),
            ("g_bounded", Json::Bool(a1.g_bounded)),
            (
                "trend",
                Json::Arr(
                    a1.rows
                        .iter()
                        .map(|(r, f, g)| {
                            Json::obj(vec![
                                ("radius", Json::Num(*r)),
                                ("f_ratio_min", Json::Num(*f)),
                                ("g_ratio_max", Json::Num(*g)),
                            ])
                        })
                        .collect(),
                ),
            ),
        ]),
    ));

    let a2 = check_a2(p, p.level, &cfg.a2_options())?;
    if !a2.passed {
        failed.push("a2".into());
    }
    sections.push((
        "a2".into(),
        Json::obj(vec![
            ("passed", Json::Bool(a2.passed)),
            ("level", Json::Num(a2.level)),
            ("m_minus", Json::Num(a2.m_minus)),
            ("m_plus", Json::Num(a2.m_plus)),
            ("m_level", Json::Num(a2.m_level)),
            ("margin", Json::Num(a2.margin)),
            ("est_error", Json::Num(a2.est_error)),
            ("method", Json::str(a2.method)),
        ]),
    ));

    // Pairing probes: every nonzero sign pattern must admit a recession
    // direction with positive pairing.
    let cells = prep.family.cells;
    let mut probes: Vec<Vec<f64>> = vec![
        vec![1.0; cells],
        vec![-1.0; cells],
        (0..cells).map(|c| if c % 2 == 0 { 1.0 } else { -1.0 }).collect(),
    ];
    let mut onehot = vec![0.0; cells];
    onehot[0] = -1.0;
    probes.push(onehot);
    let mut witness_ok = true;
    for probe in &probes {
        if property_p_witness(&prep.family, probe).is_none() {
            witness_ok = false;
        }
    }
    if !witness_ok {
        failed.push("property-P".into());
    }
    sections.push((
        "property_P".into(),
        Json::obj(vec![
            ("passed", Json::Bool(witness_ok)),
            ("probes", Json::Int(probes.len() as i64)),
        ]),
    ));

    if let Some(name) = cfg.scenario.as_deref().and_then(PresetName::parse) {
        match preset_scenario(name) {
            Ok(out) => {
                sections.push((
                    "scenario_checks".into(),
                    Json::Arr(
                        out.checks
                            .iter()
                            .map(|c| {
                                Json::obj(vec![
                                    ("id", Json::str(c.id.clone())),
                                    ("passed", Json::Bool(c.passed)),
                                    ("margin", Json::Num(c.margin)),
                                    ("detail", Json::str(c.detail.clone())),
                                ])
                            })
                            .collect(),
                    ),
                ));
            }
            Err(Error::CheckFailed(msg)) => {
                failed.push(format!("scenario:{msg}"));
                sections.push(("scenario_checks".into(), Json::obj(vec![("error", Json::str(msg))])));
            }
            Err(e) => return Err(e),
        }
    }

    let exit = if failed.is_empty() { 0 } else { 2 };
    let mut results = vec![(
        "failed".to_string(),
        Json::Arr(failed.iter().map(|f| Json::str(f.clone())).collect()),
    )];
    results.extend(sections);
    let body = report_shell("check", cfg, prep, exit, Json::Obj(results));
    write_report(out_dir, body)?;
    Ok(exit)
}

fn solve_results(report: &MinimaReport) -> Json {
    minima_report_json(report)
}

fn dump_clusters(out_dir: &Path, report: &MinimaReport) -> Result<()> {
    let labeled: Vec<(usize, &Trajectory)> = report
        .clusters
        .iter()
        .enumerate()
        .map(|(i, c)| (i, &c.representative))
        .collect();
    if !labeled.is_empty() {
        relosc::report::write_trajectories_csv(&out_dir.join("trajectories.csv"), &labeled)?;
    }
    Ok(())
}

fn run_solve(cfg: &Config, prep: &Prepared, out_dir: &Path) -> Result<u8> {
    let ms = cfg.multi_start_options(prep.search_radius);
    let report = multi_start(&prep.problem, &prep.psi, &ms);
    std::fs::create_dir_all(out_dir)?;
    dump_clusters(out_dir, &report)?;
    let body = report_shell("solve", cfg, prep, 0, Json::obj(vec![
        ("solve", solve_results(&report)),
    ]));
    write_report(out_dir, body)?;
    Ok(0)
}

fn run_saddle(cfg: &Config, prep: &Prepared, out_dir: &Path) -> Result<u8> {
    let mut opts = cfg.saddle_options(prep.search_radius);
    opts.growth = prep.growth.clone();
    let outcome = saddle_search(&prep.problem, &prep.family, &opts)?;

    std::fs::create_dir_all(out_dir)?;
    relosc::report::write_trace_csv(&out_dir.join("trace.csv"), &outcome.trace)?;
    dump_clusters(out_dir, &outcome.report)?;

    let mut ascent = cfg.saddle_options(prep.search_radius);
    ascent.max_evals = 4;
    let gap = minimax_gap(
        &prep.problem,
        &prep.family,
        &ascent,
        &cfg.penalty_options(prep.search_radius),
        Some(outcome.m),
    );
    let gap_json = match &gap {
        Ok(g) => Json::obj(vec![
            ("lower", Json::Num(g.lower)),
            ("upper", Json::Num(g.upper)),
            ("strict", Json::Bool(g.strict)),
            ("margin", Json::Num(g.margin)),
            ("level_residual", Json::Num(g.level_residual)),
        ]),
        Err(e) => Json::obj(vec![("error", Json::str(e.to_string()))]),
    };

    let exit = match outcome.status {
        SaddleStatus::Certificate => 0,
        SaddleStatus::NotFound => 3,
    };
    let body = report_shell(
        "saddle",
        cfg,
        prep,
        exit,
        Json::obj(vec![
            (
                "saddle",
                Json::obj(vec![
                    (
                        "status",
                        Json::str(match outcome.status {
                            SaddleStatus::Certificate => "certificate",
                            SaddleStatus::NotFound => "not-found",
                        }),
                    ),
                    ("evals", Json::Int(outcome.evals as i64)),
                    ("m", Json::Num(outcome.m)),
                    ("psi", Json::num_array(outcome.psi.values())),
                    ("psi_mean", Json::Num(outcome.psi.mean())),
                    ("certificate", certificate_json(&outcome.report.certificate)),
                    ("inner", minima_report_json(&outcome.report)),
                ]),
            ),
            ("minimax", gap_json),
        ]),
    );
    write_report(out_dir, body)?;
    Ok(exit)
}

fn run_verify(cfg: &Config, prep: &Prepared, out_dir: &Path) -> Result<u8> {
    let ms = cfg.multi_start_options(prep.search_radius);
    let report = multi_start(&prep.problem, &prep.psi, &ms);
    let Some(best) = report.clusters.first() else {
        return Err(Error::Convergence("no minimizer found to verify".into()));
    };
    let el = el_residual(&prep.problem, &prep.psi, &best.representative)?;

    let n = cfg.grid.node_count;
    let n_list: Vec<usize> = [n / 2, n, n * 2]
        .into_iter()
        .filter(|m| {
            *m >= 2
                && m.is_multiple_of(2)
                && (m.is_multiple_of(cfg.grid.cells) || cfg.grid.cells.is_multiple_of(*m))
        })
        .collect();
    let rows = convergence_study(&prep.problem, &prep.psi, &n_list, &cfg.study_options(prep.search_radius))?;

    std::fs::create_dir_all(out_dir)?;
    relosc::report::write_convergence_csv(&out_dir.join("convergence.csv"), &rows)?;
    dump_clusters(out_dir, &report)?;

    let body = report_shell(
        "verify",
        cfg,
        prep,
        0,
        Json::obj(vec![(
            "verify",
            Json::obj(vec![
                ("best_value", Json::Num(best.value)),
                ("max_residual", Json::Num(el.max)),
                ("phi_total_variation", Json::Num(el.phi_total_variation)),
                (
                    "convergence",
                    Json::Arr(
                        rows.iter()
                            .map(|r| {
                                Json::obj(vec![
                                    ("N", Json::Int(r.node_count as i64)),
                                    ("value", Json::Num(r.value)),
                                    ("residual", Json::Num(r.residual)),
                                ])
                            })
                            .collect(),
                    ),
                ),
            ]),
        )]),
    );
    write_report(out_dir, body)?;
    Ok(0)
}
