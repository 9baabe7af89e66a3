mod config;

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use nonkahler::atlas::{distinguish, sample_atlas_fiber, write_atlas_fiber_csv, Cp1Point, Verdict};
use nonkahler::monodromy::gluing_action;
use nonkahler::sphere::{sample_fiber, write_fiber_csv, S2Point};
use nonkahler::transition::{longitude_monodromy, write_trace_csv};
use nonkahler::verify::{run_all, RunConfig};
use nonkahler::weierstrass::{j_from_weierstrass, write_jscan_csv};
use nonkahler::{quotient, Cx, ModuliParams};

use config::{parse_tol_flag, FileConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "nonkahler", version, about = "Construct and numerically verify the glued elliptic surface and its sphere fibration")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Gluing radius, 0 < rho0 < rho1 (default 0.1).
    #[arg(long, global = true)]
    rho0: Option<f64>,
    /// Torus-family radius, rho1 < 1 (default 0.3).
    #[arg(long, global = true)]
    rho1: Option<f64>,
    /// Annulus outer radius, 1 < rho2 < 1/rho1 (default 2).
    #[arg(long, global = true)]
    rho2: Option<f64>,
    /// Master RNG seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample count: every suite for `verify`, rows for `fiber` and `jscan`.
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,
    /// Override one tolerance, e.g. `--tol cr=1e-5`. Repeatable.
    #[arg(long, global = true, value_name = "NAME=VALUE", value_parser = parse_tol_flag)]
    tol: Vec<(String, f64)>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Chart {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Weierstrass,
    Torus,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every verification suite and write the JSON report.
    Verify,
    /// Sample a fiber of the sphere map (`--target`) or of the surface (`--base`).
    Fiber {
        /// Point `re_z,im_z,x` of the unit 2-sphere.
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true, conflicts_with = "base")]
        target: Option<[f64; 3]>,
        /// Base point `re,im` in the chart given by `--chart`.
        #[arg(long, value_parser = parse_cx, allow_hyphen_values = true)]
        base: Option<Cx>,
        #[arg(long, value_enum, default_value = "d1")]
        chart: Chart,
    },
    /// Tabulate the j-invariant of the fibers over a disk of base points.
    Jscan {
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long, value_enum, default_value = "weierstrass")]
        model: Model,
    },
    /// Continue the gluing map around a loop in the overlap and report the winding.
    Monodromy {
        /// Loop radius in the `w` coordinate; defaults to the middle of the overlap.
        #[arg(long)]
        rho: Option<f64>,
        /// Starting fiber coordinate `re,im`; defaults to the middle of the fiber annulus.
        #[arg(long, value_parser = parse_cx, allow_hyphen_values = true)]
        z0: Option<Cx>,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        turns: i32,
        #[arg(long, default_value_t = 256)]
        steps: usize,
    },
    /// Decide whether the configured parameters and `--other` give biholomorphic surfaces.
    Distinguish {
        /// Second parameter triple `rho0,rho1,rho2`.
        #[arg(long, value_parser = parse_triple)]
        other: [f64; 3],
    },
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got '{s}'"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("invalid number '{p}'"))?;
    }
    Ok(out)
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_cx(s: &str) -> Result<Cx, String> {
    let [re, im] = parse_floats::<2>(s)?;
    Ok(Cx::new(re, im))
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Pass,
    Fail,
}

fn emit(out: Option<&Path>, body: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body).context("writing to standard output")?;
            stdout.flush().context("writing to standard output")
        }
    }
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

fn cmd_verify(run: &RunConfig, format: Format, out: Option<&Path>) -> Result<Outcome> {
    let start = Instant::now();
    let report = run_all(run)?;
    let body = match format {
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut s = String::from("suite,name,samples,max_deviation,tolerance,pass,seed\n");
            for suite in &report.suites {
                for c in &suite.checks {
                    s.push_str(&format!(
                        "{},{},{},{:?},{:?},{},{}\n",
                        suite.suite, c.name, c.samples, c.max_deviation, c.tolerance, c.pass, c.seed
                    ));
                }
            }
            s.into_bytes()
        }
    };
    emit(out, &body)?;
    for c in report.checks().filter(|c| !c.pass) {
        eprintln!("FAIL {}: max deviation {:e} > tolerance {:e}", c.name, c.max_deviation, c.tolerance);
    }
    let n = report.checks().count();
    let passed = report.checks().filter(|c| c.pass).count();
    eprintln!("{passed}/{n} checks passed in {:.2?}", start.elapsed());
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_fiber(run: &RunConfig, target: Option<[f64; 3]>, base: Option<(Chart, Cx)>, n: usize, format: Format, out: Option<&Path>) -> Result<Outcome> {
    let mut buf = Vec::new();
    match (target, base) {
        (Some([re, im, x]), None) => {
            let target = S2Point::new(Cx::new(re, im), x)?;
            let fib = sample_fiber(target, n, run.seed)?;
            match format {
                Format::Csv => write_fiber_csv(&mut buf, &fib.points)?,
                Format::Json => buf = json_bytes(&serde_json::to_value(&fib)?),
            }
            emit(out, &buf)?;
            if !fib.is_complete() {
                eprintln!("only {} of {} fiber points converged", fib.points.len(), n);
                return Ok(Outcome::Fail);
            }
        }
        (None, Some((chart, c))) => {
            let point = match chart {
                Chart::D1 => Cp1Point::d1(c, &run.params)?,
                Chart::D2 => Cp1Point::d2(c, &run.params)?,
            };
            let (class, points) = sample_atlas_fiber(&point, n, &run.params, run.seed)?;
            match format {
                Format::Csv => write_atlas_fiber_csv(&mut buf, &class, &points)?,
                Format::Json => buf = json_bytes(&json!({ "fiber": class, "points": points })),
            }
            emit(out, &buf)?;
        }
        _ => bail!("fiber needs exactly one of --target or --base"),
    }
    Ok(Outcome::Pass)
}

fn cmd_jscan(radius: f64, model: Model, n: usize, format: Format, out: Option<&Path>) -> Result<Outcome> {
    if !(radius > 0.0 && radius <= quotient::J_CERTIFIED_RADIUS) {
        bail!("--radius must lie in (0, {}]", quotient::J_CERTIFIED_RADIUS);
    }
    // sunflower layout: evenly spread over the disk, never at the centre
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let tau = Cx::from_polar(radius * ((i as f64 + 0.5) / n as f64).sqrt(), golden * i as f64);
        let j = match model {
            Model::Weierstrass => j_from_weierstrass(tau)?,
            Model::Torus => quotient::j_torus(tau)?,
        };
        rows.push((tau, j));
    }
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_jscan_csv(&mut buf, &rows)?,
        Format::Json => {
            let v: Vec<_> = rows.iter().map(|(t, j)| json!({ "tau": [t.re, t.im], "j": [j.re, j.im] })).collect();
            buf = json_bytes(&json!(v));
        }
    }
    emit(out, &buf)?;
    Ok(Outcome::Pass)
}

fn cmd_monodromy(params: &ModuliParams, rho: Option<f64>, z0: Option<Cx>, turns: i32, steps: usize, format: Format, out: Option<&Path>) -> Result<Outcome> {
    let rho = rho.unwrap_or(0.5 * (params.rho0() + params.rho1()));
    let z0 = z0.unwrap_or(Cx::new(0.5 * (1.0 + params.rho2()), 0.0));
    let m = longitude_monodromy(rho, z0, turns, steps, params)?;
    let expected = gluing_action().repeat(turns).framing;
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_trace_csv(&mut buf, &m.trace)?,
        Format::Json => {
            buf = json_bytes(&json!({
                "rho": rho,
                "z0": [z0.re, z0.im],
                "turns": turns,
                "steps_per_turn": steps,
                "winding": m.winding,
                "expected": expected,
                "consistent": m.winding == expected,
            }))
        }
    }
    emit(out, &buf)?;
    eprintln!("winding {} (framing predicts {expected})", m.winding);
    Ok(if m.winding == expected { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_distinguish(a: &ModuliParams, other: [f64; 3], format: Format, out: Option<&Path>) -> Result<Outcome> {
    if format == Format::Csv {
        bail!("distinguish only writes json");
    }
    let b = ModuliParams::new(other[0], other[1], other[2])?;
    let verdict = distinguish(a, &b)?;
    match &verdict {
        Verdict::Equivalent => eprintln!("equivalent"),
        Verdict::Distinct(certs) => {
            for c in certs {
                eprintln!("distinct: {}", serde_json::to_string(c)?);
            }
        }
    }
    emit(out, &json_bytes(&json!({ "a": a, "b": b, "result": verdict })))?;
    let valid = match &verdict {
        Verdict::Equivalent => true,
        Verdict::Distinct(certs) => certs.iter().all(|c| c.is_valid()),
    };
    Ok(if valid { Outcome::Pass } else { Outcome::Fail })
}

fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        rho: [cli.rho0, cli.rho1, cli.rho2],
        seed: cli.seed,
        samples: match cli.command {
            Command::Verify => cli.samples,
            _ => None,
        },
        tol: cli.tol.clone(),
    };
    let run = config::resolve(&file, &flags)?;
    let out = cli.out.clone().or(file.out.clone());
    let out = out.as_deref();
    match cli.command {
        Command::Verify => cmd_verify(&run, cli.format.unwrap_or(Format::Json), out),
        Command::Fiber { target, base, chart } => {
            let n = cli.samples.unwrap_or(1000);
            cmd_fiber(&run, target, base.map(|b| (chart, b)), n, cli.format.unwrap_or(Format::Csv), out)
        }
        Command::Jscan { radius, model } => {
            let n = cli.samples.unwrap_or(100);
            cmd_jscan(radius, model, n, cli.format.unwrap_or(Format::Csv), out)
        }
        Command::Monodromy { rho, z0, turns, steps } => {
            cmd_monodromy(&run.params, rho, z0, turns, steps, cli.format.unwrap_or(Format::Json), out)
        }
        Command::Distinguish { other } => cmd_distinguish(&run.params, other, cli.format.unwrap_or(Format::Json), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
