//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 fit did not
//! converge (the report is still written), 5 malformed input data.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::fitting::{extract_ridges, fit_branches, fit_map, FitResult};
use crate::io::config::FitMethod;
use crate::io::{
    read_spectrum_csv, write_branch_csv, write_pgm, write_spectrum_csv, write_thickness_csv,
    ConfigError, DataError, FitReport, RunConfig,
};
use crate::kittel::{kittel_frequency, KittelMaterial};
use crate::oracle::NoiseSpec;
use crate::pipeline::{thickness_pipeline, PipelineOptions, ThicknessRow};
use crate::sweep::{
    anticrossing_gap, compute_branches, compute_map, BranchCurves, SpectrumMap, SystemTemplate,
};

#[derive(Debug, Parser)]
#[command(
    name = "magcouple",
    version,
    about = "Coupled magnon-photon spectra: simulate, inspect and fit"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the noise seed (synth, thickness) or the restart seed (fit).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write a PGM heatmap of |S21| next to `--out`.
    #[arg(long, global = true)]
    pub heatmap: bool,
    /// Multiplies frequencies shown on standard output; files keep model units.
    #[arg(long, global = true)]
    pub freq_scale: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kittel frequencies of every field-dependent mode, or of one material.
    Kittel {
        /// Comma-separated fields in Oe; defaults to the config field grid.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        fields: Vec<f64>,
        /// Preset name (yig, permalloy) used instead of the config modes.
        #[arg(long)]
        material: Option<String>,
    },
    /// Noiseless transmission map.
    Map,
    /// Eigenvalue branches along the field grid, plus measured gaps.
    Branches,
    /// Fit the config's free parameters to a spectrum CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Thickness study: per-thickness maps, fits, gaps and regressions.
    Thickness {
        /// Directory receiving the per-thickness spectrum CSVs (and heatmaps).
        #[arg(long)]
        maps: Option<PathBuf>,
    },
    /// Transmission map with seeded complex Gaussian noise.
    Synth {
        /// Noise standard deviation per component; overrides the config.
        #[arg(long)]
        sigma: Option<f64>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("fit did not converge")]
    NotConverged,
    #[error("data: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::NotConverged => 4,
            CliError::Data(_) => 5,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Diagnostics go to standard error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let c = &cli.common;
    if let Some(s) = c.freq_scale {
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Config(format!(
                "--freq-scale: must be > 0, got {s}"
            )));
        }
    }
    if c.heatmap && c.out.is_none() && !matches!(cli.command, Command::Thickness { maps: Some(_) })
    {
        return Err(CliError::Config("--heatmap needs --out".into()));
    }
    match &cli.command {
        Command::Kittel { fields, material } => cmd_kittel(c, fields, material.as_deref(), stdout),
        Command::Map => cmd_map(c, None, stdout),
        Command::Synth { sigma } => cmd_map(c, Some(*sigma), stdout),
        Command::Branches => cmd_branches(c, stdout),
        Command::Fit { data } => cmd_fit(c, data, stdout),
        Command::Thickness { maps } => cmd_thickness(c, maps.as_deref(), stdout),
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.0)))
}

fn scale(c: &Common, cfg: Option<&RunConfig>) -> f64 {
    c.freq_scale.or(cfg.map(|x| x.freq_scale)).unwrap_or(1.0)
}

/// Writes through `f` to `--out`, or to `stdout` when no path is given.
fn emit<F>(out: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
        }
        None => f(stdout).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn heatmap_path(out: &Path) -> PathBuf {
    out.with_extension("pgm")
}

fn write_heatmap(path: &Path, map: &SpectrumMap) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_pgm(BufWriter::new(file), map).map_err(io_err(path))
}

fn cmd_kittel(
    c: &Common,
    fields: &[f64],
    material: Option<&str>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = match (&c.config, material) {
        (Some(p), _) => Some(load_config(Some(p))?),
        (None, Some(_)) => None,
        (None, None) => {
            return Err(CliError::Config(
                "kittel needs --config or --material".into(),
            ))
        }
    };
    let mut columns: Vec<(String, KittelMaterial)> = Vec::new();
    if let Some(name) = material {
        let m = cfg
            .as_ref()
            .and_then(|cfg| cfg.materials.get(name).copied())
            .or_else(|| KittelMaterial::preset(name))
            .ok_or_else(|| CliError::Config(format!("material: unknown material '{name}'")))?;
        columns.push((name.to_string(), m));
    } else if let Some(cfg) = &cfg {
        let template = cfg.template()?;
        for mode in template.modes() {
            if let Some(m) = mode.material() {
                columns.push((mode.label.clone(), *m));
            }
        }
        if columns.is_empty() {
            return Err(CliError::Config(
                "modes: no mode has a Kittel material".into(),
            ));
        }
    }
    let fields = if !fields.is_empty() {
        fields.to_vec()
    } else if let Some(cfg) = &cfg {
        cfg.field_grid()
    } else {
        return Err(CliError::Config(
            "--fields is required without --config".into(),
        ));
    };
    let s = scale(c, cfg.as_ref());
    let mut table = Vec::with_capacity(fields.len());
    for &h in &fields {
        let mut row = Vec::with_capacity(columns.len());
        for (_, m) in &columns {
            row.push(
                kittel_frequency(m, h).map_err(|e| CliError::Config(format!("--fields: {e}")))?,
            );
        }
        table.push((h, row));
    }
    let header: Vec<&str> = columns.iter().map(|(n, _)| n.as_str()).collect();
    writeln!(stdout, "h_oe\t{}", header.join("\t")).map_err(|e| CliError::Io(e.to_string()))?;
    for (h, row) in &table {
        let cells: Vec<String> = row.iter().map(|w| format!("{:.10}", w * s)).collect();
        writeln!(stdout, "{h}\t{}", cells.join("\t")).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(path) = &c.out {
        emit(Some(path), stdout, |w| {
            writeln!(w, "h_oe,{}", header.join(","))?;
            for (h, row) in &table {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
                writeln!(w, "{h:.16e},{}", cells.join(","))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// `sigma` is `None` for a clean map and `Some(override)` for `synth`.
fn cmd_map(c: &Common, sigma: Option<Option<f64>>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(c.config.as_deref())?;
    let template = cfg.template()?;
    let fields = cfg.field_grid();
    let freqs = cfg.freq_grid(&template)?;
    let mut map = compute_map(&template, &fields, &freqs)?;
    if let Some(sigma) = sigma {
        let base = cfg.noise.unwrap_or(NoiseSpec {
            sigma: 0.0,
            seed: 0,
        });
        if sigma.is_none() && cfg.noise.is_none() {
            return Err(CliError::Config(
                "noise: synth needs a [noise] block or --sigma".into(),
            ));
        }
        let noise = NoiseSpec::new(sigma.unwrap_or(base.sigma), c.seed.unwrap_or(base.seed))
            .map_err(|e| CliError::Config(format!("noise: {e}")))?;
        noise.apply(&mut map);
    }
    emit(c.out.as_deref(), stdout, |w| write_spectrum_csv(w, &map))?;
    if let Some(out) = &c.out {
        if c.heatmap {
            write_heatmap(&heatmap_path(out), &map)?;
        }
        writeln!(
            stdout,
            "wrote {} rows to {}; max |S21| = {:.6}",
            map.values().len(),
            out.display(),
            map.max_abs()
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn cmd_branches(c: &Common, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(c.config.as_deref())?;
    let template = cfg.template()?;
    let curves = compute_branches(&template, &cfg.field_grid())?;
    emit(c.out.as_deref(), stdout, |w| write_branch_csv(w, &curves))?;
    if c.out.is_some() {
        let s = scale(c, Some(&cfg));
        for line in gap_summary(&template, &curves, s) {
            writeln!(stdout, "{line}").map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

/// One line per magnon whose resonator crossing lies inside the field grid.
fn gap_summary(template: &SystemTemplate, curves: &BranchCurves, s: f64) -> Vec<String> {
    let (Some(lo), Some(hi)) = (curves.fields.first(), curves.fields.last()) else {
        return Vec::new();
    };
    let mut lines = Vec::new();
    for m in template.magnon_indices() {
        let label = &template.modes()[m].label;
        let Ok(h) = template.crossing_field(m) else {
            continue;
        };
        if !(h > *lo && h < *hi) {
            continue;
        }
        let half_width = 6.0 * template.feature_scale();
        let window = template
            .crossing_window(m, half_width)
            .map(|(a, b)| (a.max(*lo), b.min(*hi)))
            .unwrap_or((*lo, *hi));
        match anticrossing_gap(curves, window) {
            Ok(r) => lines.push(format!(
                "{label}: gap {:.6} at h_oe = {:.3} (g ~ {:.6})",
                r.gap * s,
                r.h_star,
                r.g_estimate * s
            )),
            Err(e) => lines.push(format!("{label}: no gap measured ({e})")),
        }
    }
    lines
}

fn read_data(path: &Path) -> Result<SpectrumMap, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_spectrum_csv(io::BufReader::new(file)).map_err(|e| match e {
        DataError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })
}

fn cmd_fit(c: &Common, data: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(c.config.as_deref())?;
    let fit_cfg = cfg
        .fit
        .clone()
        .ok_or_else(|| CliError::Config("fit: the config has no [fit] block".into()))?;
    let template = cfg.template()?;
    let (mut problem, unseeded) = cfg.fit_problem(&template)?;
    if let Some(seed) = c.seed {
        problem.options.seed = seed;
    }
    let map = read_data(data)?;
    let freqs = map.freqs();
    let step = if freqs.len() > 1 {
        (freqs[freqs.len() - 1] - freqs[0]) / (freqs.len() - 1) as f64
    } else {
        1.0
    };
    let ridges = extract_ridges(
        &map,
        fit_cfg.n_ridges.unwrap_or(template.len()),
        fit_cfg.min_separation.unwrap_or(3.0 * step),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    problem.seed_initial_guesses(&map, &ridges, &unseeded);
    let data_err = |e: Error| match e {
        Error::DegenerateProblem(_) | Error::DegenerateData(_) | Error::EmptyMap => {
            CliError::Data(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    };
    let result: FitResult = match fit_cfg.method {
        FitMethod::Map => fit_map(&map, &problem),
        FitMethod::Branches => fit_branches(&ridges, &problem),
    }
    .map_err(data_err)?;
    let report = FitReport::new(fit_cfg.method, &result);
    emit(c.out.as_deref(), stdout, |w| {
        w.write_all(report.to_toml().as_bytes())
    })?;
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

fn cmd_thickness(c: &Common, maps: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(c.config.as_deref())?;
    let template = cfg.template()?;
    let (model, crosslink, targets, ts) = cfg.thickness_setup(&template)?;
    let mut options = PipelineOptions::new(cfg.field_grid(), cfg.freq_grid(&template)?);
    options.noise = cfg.noise.map(|n| NoiseSpec {
        seed: c.seed.unwrap_or(n.seed),
        ..n
    });
    if let Some(fit) = &cfg.fit {
        options.n_ridges = fit.n_ridges;
        options.min_separation = fit.min_separation;
    }
    options.keep_maps = maps.is_some();
    let outcome = thickness_pipeline(&template, &model, &crosslink, targets, &ts, &options)
        .map_err(|e| match e {
            Error::DegenerateProblem(_) | Error::DegenerateData(_) => CliError::Data(e.to_string()),
            other => CliError::Config(other.to_string()),
        })?;
    emit(c.out.as_deref(), stdout, |w| {
        write_thickness_csv(w, &outcome.rows)
    })?;

    if let Some(dir) = maps {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for row in &outcome.rows {
            let Some(map) = &row.map else { continue };
            let csv = dir.join(format!("map_t{}.csv", row.t));
            emit(Some(&csv), stdout, |w| write_spectrum_csv(w, map))?;
            if c.heatmap {
                write_heatmap(&heatmap_path(&csv), map)?;
            }
        }
    }

    let mut summary = String::new();
    for (name, fit) in [
        ("g2_vs_t", &outcome.g2_vs_t),
        ("g1_vs_g2", &outcome.g1_vs_g2),
    ] {
        if let Some(f) = fit {
            summary += &format!(
                "[{name}]\nslope = {:e}\nintercept = {:e}\nr_squared = {:e}\n\n",
                f.slope, f.intercept, f.r_squared
            );
        }
    }
    if let Some(out) = &c.out {
        let path = out.with_extension("regression.toml");
        fs::write(&path, &summary).map_err(io_err(&path))?;
        stdout
            .write_all(summary.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?;
    } else {
        // Standard output already carries the table.
        eprint!("{summary}");
    }
    if converged_all(&outcome.rows) {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

fn converged_all(rows: &[ThicknessRow]) -> bool {
    rows.iter().all(|r| r.fit.converged)
}
