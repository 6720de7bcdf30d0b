//! Command-line interface: classification, cell solves, effective
//! tensors, spectra, direct solves, sweeps, and bundled self-checks,
//! all reporting versioned JSON with optional CSV sidecars.

use clap::{Args, Parser, Subcommand};
use homspec::asymptotics::{mvt_check, run_sweep, SweepSettings, TentBump};
use homspec::cellsolve::{
    solve_cell_fourth, solve_cell_mixed, solve_cell_second, CellSolution,
};
use homspec::config::RunConfig;
use homspec::direct::{solve_direct, DirectProblem, POINTS_PER_PERIOD};
use homspec::effective::{
    assemble_a_eff, assemble_a_eff_energy, assemble_b_eff_energy, effective_max_delta,
};
use homspec::error::Error;
use homspec::expr::Expression;
use homspec::fourier::TorusGrid;
use homspec::oscillator::{analytic_ho_oracle, solve_oscillator, TruncatedDomain};
use homspec::regions::{classify, scaling, ParameterPoint, Region};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;

const SCHEMA_VERSION: u64 = 1;

#[derive(Parser)]
#[command(name = "homspec", version, about = "Spectral homogenization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit volatile metadata so identical runs are byte-identical.
    #[arg(long, global = true)]
    no_meta: bool,
    /// Prefix for CSV sidecar files with plottable arrays.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a parameter point and print its scaling exponents.
    Classify {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        beta: String,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Solve the periodic cell problems for the configured region.
    Cell {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Assemble effective tensors with coercivity certificates.
    Effective {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Solve the truncated effective spectral problem.
    Spectrum {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Box half-width override.
        #[arg(long, name = "box")]
        box_half_width: Option<f64>,
        /// Grid points per dimension override.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Solve the original eps-dependent problem directly.
    Direct {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run an eps-sweep tying direct spectra to the effective limit.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0.025)]
        eps0: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Run the bundled self-verification suites.
    Check {
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn parse_scalar(text: &str) -> Result<f64, Error> {
    if let Some((p, q)) = text.split_once('/') {
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational `{text}`")))?;
        let q: f64 = q
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational `{text}`")))?;
        if q == 0.0 {
            return Err(Error::Config(format!("zero denominator in `{text}`")));
        }
        Ok(p / q)
    } else {
        text.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad number `{text}`")))
    }
}

fn emit(cli: &Cli, payload: Value) -> Result<(), Error> {
    let mut root = json!({ "schema_version": SCHEMA_VERSION });
    if !cli.no_meta {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        root["meta"] = json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "unix_time": now,
        });
    }
    root["report"] = payload;
    let text = serde_json::to_string_pretty(&root).expect("serializable report");
    match &cli.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn write_csv(path: &PathBuf, header: &str, rows: &[Vec<f64>]) -> Result<(), Error> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn csv_path(prefix: &PathBuf, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(suffix);
    prefix.with_file_name(name)
}

#[derive(Serialize)]
struct CellFamilyReport {
    family: String,
    correctors: usize,
    residuals: Vec<f64>,
    iterations: Vec<usize>,
    corrector_l2_norms: Vec<f64>,
    max_mean: f64,
}

fn cell_family_report(sol: &CellSolution, family: &str) -> CellFamilyReport {
    CellFamilyReport {
        family: family.to_string(),
        correctors: sol.fields.len(),
        residuals: sol.residuals.clone(),
        iterations: sol.iterations.clone(),
        corrector_l2_norms: sol.fields.iter().map(|f| f.norm_l2()).collect(),
        max_mean: sol.max_mean(),
    }
}

fn cell_csv(cli: &Cli, sol: &CellSolution, family: &str) -> Result<(), Error> {
    let Some(prefix) = &cli.csv else {
        return Ok(());
    };
    let grid = sol.grid;
    for (idx, field) in sol.fields.iter().enumerate() {
        let vals = field.values();
        let mut rows = Vec::with_capacity(vals.len());
        for (flat, v) in vals.iter().enumerate() {
            let y = grid.point(flat);
            let mut row: Vec<f64> = y.to_vec();
            row.push(*v);
            rows.push(row);
        }
        let header = match grid.dim {
            1 => "y1,value",
            _ => "y1,y2,value",
        };
        write_csv(
            &csv_path(prefix, &format!("_{family}_{idx}.csv")),
            header,
            &rows,
        )?;
    }
    Ok(())
}

fn required_families(region: Region) -> (bool, bool, bool) {
    match region {
        Region::R1 => (true, false, false),
        Region::R2 => (true, false, false),
        Region::R4 => (false, true, false),
        Region::R5 => (false, false, true),
        _ => (false, false, false),
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Classify { alpha, beta, dim } => {
            let p = ParameterPoint::new(parse_scalar(alpha)?, parse_scalar(beta)?)?;
            let region = classify(p);
            if !region.is_supported() {
                let payload = json!({
                    "alpha": p.alpha,
                    "beta": p.beta,
                    "region": region,
                    "supported": false,
                });
                emit(cli, payload)?;
                return Err(Error::UnsupportedRegion {
                    alpha: p.alpha,
                    beta: p.beta,
                    region,
                });
            }
            let s = scaling(p, *dim)?;
            emit(
                cli,
                json!({
                    "alpha": p.alpha,
                    "beta": p.beta,
                    "region": region,
                    "supported": true,
                    "scaling": s,
                }),
            )
        }
        Command::Cell { config } => {
            let cfg = RunConfig::load(&config.config)?;
            let spec = cfg.coefficient_spec()?;
            let p = cfg.parameter_point()?;
            let reg = scaling(p, spec.dim)?;
            let stats = spec.find_min_hessian(&spec.domain.center(), 1e-10)?;
            let grid = TorusGrid::new(spec.dim, cfg.solver.cell_modes);
            let (need4, need_m, need2) = required_families(reg.region);
            let mut reports = Vec::new();
            if need4 {
                let sol = solve_cell_fourth(&spec, &stats.minimizer, grid, cfg.solver.cell_tol)?;
                reports.push(cell_family_report(&sol, "fourth"));
                cell_csv(cli, &sol, "fourth")?;
            }
            if need_m {
                let sol = solve_cell_mixed(&spec, &stats.minimizer, grid, cfg.solver.cell_tol)?;
                reports.push(cell_family_report(&sol, "mixed"));
                cell_csv(cli, &sol, "mixed")?;
            }
            if need2 {
                let sol = solve_cell_second(&spec, &stats.minimizer, grid, cfg.solver.cell_tol)?;
                reports.push(cell_family_report(&sol, "second"));
                cell_csv(cli, &sol, "second")?;
            }
            emit(
                cli,
                json!({
                    "region": reg.region,
                    "frozen_point": stats.minimizer,
                    "modes": cfg.solver.cell_modes,
                    "families": reports,
                }),
            )
        }
        Command::Effective { config } => {
            let cfg = RunConfig::load(&config.config)?;
            let spec = cfg.coefficient_spec()?;
            let p = cfg.parameter_point()?;
            let (reg, op) =
                homspec::asymptotics::effective_pipeline(&spec, p, cfg.solver.cell_modes)?;
            emit(
                cli,
                json!({
                    "scaling": reg,
                    "operator": op,
                }),
            )
        }
        Command::Spectrum {
            config,
            k,
            box_half_width,
            grid,
        } => {
            let cfg = RunConfig::load(&config.config)?;
            let spec = cfg.coefficient_spec()?;
            let p = cfg.parameter_point()?;
            let (_, op) =
                homspec::asymptotics::effective_pipeline(&spec, p, cfg.solver.cell_modes)?;
            let dom = TruncatedDomain::new(
                box_half_width.unwrap_or(cfg.solver.box_half_width),
                grid.unwrap_or(cfg.solver.box_points),
            )?;
            let s = solve_oscillator(&op, dom, *k, cfg.stencil_order()?)?;
            if let Some(prefix) = &cli.csv {
                let nodes = dom.nodes();
                let n1 = dom.interior();
                let mut rows = Vec::new();
                match op.dim {
                    1 => {
                        for (i, z) in nodes.iter().enumerate() {
                            let mut row = vec![*z];
                            row.extend(s.vectors.iter().map(|v| v[i]));
                            rows.push(row);
                        }
                    }
                    _ => {
                        for flat in 0..n1 * n1 {
                            let mut row = vec![nodes[flat / n1], nodes[flat % n1]];
                            row.extend(s.vectors.iter().map(|v| v[flat]));
                            rows.push(row);
                        }
                    }
                }
                let mut header = match op.dim {
                    1 => String::from("z"),
                    _ => String::from("z1,z2"),
                };
                for i in 1..=*k {
                    header.push_str(&format!(",v{i}"));
                }
                write_csv(&csv_path(prefix, "_modes.csv"), &header, &rows)?;
            }
            emit(
                cli,
                json!({
                    "eigenvalues": s.values,
                    "residuals": s.residuals,
                    "iterations": s.iterations,
                    "domain": s.domain,
                    "order": s.order,
                }),
            )
        }
        Command::Direct {
            config,
            eps,
            k,
            grid,
        } => {
            let cfg = RunConfig::load(&config.config)?;
            let spec = cfg.coefficient_spec()?;
            let p = cfg.parameter_point()?;
            let needed = (POINTS_PER_PERIOD * spec.domain.diameter() / eps).ceil() as usize;
            let prob = DirectProblem::new(&spec, p, *eps, grid.unwrap_or(needed))?;
            let sol = solve_direct(&prob, *k)?;
            if let Some(prefix) = &cli.csv {
                if spec.dim == 1 {
                    let nodes = prob.nodes(0);
                    let mut rows = Vec::new();
                    for (i, x) in nodes.iter().enumerate() {
                        let mut row = vec![*x];
                        row.extend(sol.vectors.iter().map(|v| v[i]));
                        rows.push(row);
                    }
                    let mut header = String::from("x");
                    for i in 1..=*k {
                        header.push_str(&format!(",u{i}"));
                    }
                    write_csv(&csv_path(prefix, "_direct.csv"), &header, &rows)?;
                }
            }
            emit(
                cli,
                json!({
                    "epsilon": eps,
                    "resolution": prob.resolution,
                    "eigenvalues": sol.values,
                    "shift": sol.shift,
                    "residuals": sol.residuals,
                    "iterations": sol.iterations,
                }),
            )
        }
        Command::Sweep {
            config,
            eps0,
            levels,
            k,
        } => {
            let cfg = RunConfig::load(&config.config)?;
            let spec = cfg.coefficient_spec()?;
            let p = cfg.parameter_point()?;
            let eps_list: Vec<f64> = (0..*levels).map(|j| eps0 / 2f64.powi(j as i32)).collect();
            let settings = SweepSettings {
                k: *k,
                mass: cfg.solver.mass_fraction,
                cell_modes: cfg.solver.cell_modes,
                osc_domain: TruncatedDomain::new(
                    cfg.solver.box_half_width,
                    cfg.solver.box_points,
                )?,
                order: cfg.stencil_order()?,
                resolution_factor: 1.0,
            };
            let sweep = run_sweep(&spec, p, &eps_list, &settings)?;
            if let Some(prefix) = &cli.csv {
                let rows: Vec<Vec<f64>> = sweep
                    .points
                    .iter()
                    .map(|pt| {
                        vec![
                            pt.epsilon,
                            pt.lambda[0],
                            pt.eta_eps[0],
                            sweep.effective_eta[0],
                            pt.errors[0],
                            pt.localization_radius,
                        ]
                    })
                    .collect();
                write_csv(
                    &csv_path(prefix, "_sweep.csv"),
                    "eps,lambda_1,eta_eps_1,eta_1,e_1,radius",
                    &rows,
                )?;
            }
            emit(cli, serde_json::to_value(&sweep).expect("serializable sweep"))
        }
        Command::Check { config } => {
            let cfg = RunConfig::load(&config.config)?;
            let spec = cfg.coefficient_spec()?;
            let p = cfg.parameter_point()?;
            let mut checks: Vec<Value> = Vec::new();
            let mut all_ok = true;
            let mut push = |name: &str, ok: bool, detail: Value| {
                checks.push(json!({ "name": name, "ok": ok, "detail": detail }));
            };

            let hyp = spec.verify_hypotheses(256, cfg.solver.seed)?;
            let hyp_ok = hyp.symmetry_ok && hyp.positivity_ok && hyp.ellipticity_ok;
            all_ok &= hyp_ok;
            push(
                "hypotheses",
                hyp_ok,
                serde_json::to_value(&hyp).expect("serializable"),
            );

            let region = classify(p);
            let supported = region.is_supported();
            all_ok &= supported;
            push("region_supported", supported, json!({ "region": region }));

            if supported {
                let reg = scaling(p, spec.dim)?;
                let stats = spec.find_min_hessian(&spec.domain.center(), 1e-10)?;
                let grid = TorusGrid::new(spec.dim, cfg.solver.cell_modes);
                let x = &stats.minimizer;

                // energy-form cross-checks for the families this region uses
                let (need4, need_m, need2) = required_families(reg.region);
                if need4 {
                    let sol = solve_cell_fourth(&spec, x, grid, cfg.solver.cell_tol)?;
                    let (div, dev) = assemble_a_eff(&sol, &spec, x)?;
                    let en = assemble_a_eff_energy(&sol, &spec, x)?;
                    let delta = effective_max_delta(&div, &en);
                    let ok = delta <= 1e-8 && dev <= 1e-8;
                    all_ok &= ok;
                    push(
                        "fourth_energy_form_equivalence",
                        ok,
                        json!({ "max_delta": delta, "symmetry_deviation": dev }),
                    );
                }
                if need_m || need2 {
                    let (sol, family) = if need_m {
                        (solve_cell_mixed(&spec, x, grid, cfg.solver.cell_tol)?, "mixed")
                    } else {
                        (solve_cell_second(&spec, x, grid, cfg.solver.cell_tol)?, "second")
                    };
                    let (div, dev) = homspec::effective::assemble_b_eff(
                        reg.region,
                        Some(&sol),
                        &spec,
                        x,
                        grid,
                    )?;
                    let en = assemble_b_eff_energy(reg.region, &sol, &spec, x)?;
                    let delta = effective_max_delta(&div, &en);
                    let ok = delta <= 1e-8 && dev <= 1e-8;
                    all_ok &= ok;
                    push(
                        &format!("{family}_energy_form_equivalence"),
                        ok,
                        json!({ "max_delta": delta, "symmetry_deviation": dev }),
                    );
                }

                let (_, op) =
                    homspec::asymptotics::effective_pipeline(&spec, p, cfg.solver.cell_modes)?;
                let coercive = op
                    .tensors
                    .a_coercivity
                    .as_ref()
                    .map(|c| c.min_quotient > 0.0)
                    .unwrap_or(true)
                    && op
                        .tensors
                        .b_coercivity
                        .as_ref()
                        .map(|c| c.min_quotient > 0.0)
                        .unwrap_or(true);
                all_ok &= coercive;
                push(
                    "effective_coercivity",
                    coercive,
                    serde_json::to_value(&op.tensors).expect("serializable"),
                );

                // oscillator versus the closed-form oracle where it applies
                if op.form == homspec::regions::EffectiveForm::SecondOrder {
                    let dom = TruncatedDomain::new(
                        cfg.solver.box_half_width,
                        cfg.solver.box_points,
                    )?;
                    let s = solve_oscillator(&op, dom, 2, cfg.stencil_order()?)?;
                    let b = op.tensors.b_eff.as_ref().expect("second-order tensor");
                    let mut ok = true;
                    let mut worst = 0.0f64;
                    for (i, v) in s.values.iter().enumerate() {
                        let oracle = analytic_ho_oracle(b, &op.tensors.hessian, op.dim, i + 1)?;
                        let d = (v - oracle).abs();
                        worst = worst.max(d);
                        ok &= d <= 1e-4 * oracle.max(1.0);
                    }
                    all_ok &= ok;
                    push("oscillator_oracle", ok, json!({ "max_deviation": worst }));
                }

                // oscillating-integral law on the configured domain
                if spec.dim == 1 {
                    let g = Expression::parse("sin(2*pi*y1)").expect("fixed expression");
                    let lo = spec.domain.lower[0];
                    let hi = spec.domain.upper[0];
                    let width = 0.125 * (hi - lo);
                    let eps0 = 0.1f64;
                    let bump = TentBump {
                        center: lo + 0.5 * (hi - lo) + eps0 / 3.0,
                        width,
                    };
                    let eps: Vec<f64> = (0..4).map(|j| eps0 / 2f64.powi(j)).collect();
                    let rep = mvt_check(&g, bump, bump, (lo, hi), &eps)?;
                    let slope = rep.slope.as_ref().map(|r| r.slope).unwrap_or(f64::NAN);
                    let ok = (1.8..=2.2).contains(&slope);
                    all_ok &= ok;
                    push(
                        "oscillating_integral_law",
                        ok,
                        serde_json::to_value(&rep).expect("serializable"),
                    );
                }
            }

            emit(
                cli,
                json!({
                    "all_ok": all_ok,
                    "checks": checks,
                }),
            )?;
            if all_ok {
                Ok(())
            } else {
                Err(Error::Config("self-check failed".into()))
            }
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 2,
        Error::Config(msg) if msg.contains("self-check failed") => 1,
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
