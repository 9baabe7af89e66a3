//! Flat `key = value` run configuration. Lines starting with `#` are
//! comments; recognised keys are `rho0`, `rho1`, `rho2`, `seed`, `out`,
//! `samples.<suite>` and `tol.<name>`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use nonkahler::verify::RunConfig;
use nonkahler::ModuliParams;

/// Values read from a config file, all optional so command-line flags can override them.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    pub rho: [Option<f64>; 3],
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub samples: Vec<(String, usize)>,
    pub tol: Vec<(String, f64)>,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse()
        .map_err(|_| anyhow!("line {line}: invalid value '{v}' for '{key}'"))
}

pub fn parse(text: &str) -> Result<FileConfig> {
    let mut cfg = FileConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line}: expected key = value, got '{s}'"))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "rho0" => cfg.rho[0] = Some(parse_num(k, v, line)?),
            "rho1" => cfg.rho[1] = Some(parse_num(k, v, line)?),
            "rho2" => cfg.rho[2] = Some(parse_num(k, v, line)?),
            "seed" => cfg.seed = Some(parse_num(k, v, line)?),
            "out" => cfg.out = Some(PathBuf::from(v)),
            _ => {
                if let Some(name) = k.strip_prefix("samples.") {
                    cfg.samples.push((name.to_string(), parse_num(k, v, line)?));
                } else if let Some(name) = k.strip_prefix("tol.") {
                    cfg.tol.push((name.to_string(), parse_num(k, v, line)?));
                } else {
                    bail!("line {line}: unknown key '{k}'");
                }
            }
        }
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("in config {}", path.display()))
}

/// Parses `NAME=VALUE` as given to `--tol`.
pub fn parse_tol_flag(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let v = v.trim().parse().map_err(|_| format!("invalid tolerance value '{v}'"))?;
    Ok((k.trim().to_string(), v))
}

/// Command-line overrides layered over a [`FileConfig`].
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub rho: [Option<f64>; 3],
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tol: Vec<(String, f64)>,
}

pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<RunConfig> {
    let mut run = RunConfig::default();
    let d = ModuliParams::default();
    let defaults = [d.rho0(), d.rho1(), d.rho2()];
    let rho: Vec<f64> = (0..3)
        .map(|i| flags.rho[i].or(file.rho[i]).unwrap_or(defaults[i]))
        .collect();
    run.params = ModuliParams::new(rho[0], rho[1], rho[2])?;
    run.seed = flags.seed.or(file.seed).unwrap_or(0);
    for (k, n) in &file.samples {
        run.set_samples(k, *n)?;
    }
    if let Some(n) = flags.samples {
        run.set_all_samples(n)?;
    }
    for (k, v) in file.tol.iter().chain(&flags.tol) {
        run.set_tol(k, *v)?;
    }
    Ok(run)
}
