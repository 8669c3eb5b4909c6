//! Batch front door: flat `key = value` configs with `[section]` headers,
//! command dispatch, CSV persistence, a gnuplot script over the emitted
//! files, and a manifest with resolved settings and output checksums.

use crate::error::{Error, Result};
use crate::experiments::{
    self, bump_perturbation, ExperimentConfig, FlowMode, GridSpec, Verdict,
};
use crate::flow::{self, chained_rdtf, FlowConfig, Integrator};
use crate::geometry::{BoundaryWeight, RotSymMetric, WeightedNormParams};
use crate::io::{self, fmt_f64};
use crate::spectral::{
    assemble_linearized, empirical_indicial, indicial_roots_scalar, sector_check, spectrum_bound,
    ScalarModelOp,
};
use crate::util;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Flow,
    Spectrum,
    Sector,
    Indicial,
    Experiment,
    GaugeCheck,
}

impl Command {
    fn parse(s: &str) -> Result<Command> {
        Ok(match s {
            "flow" => Command::Flow,
            "spectrum" => Command::Spectrum,
            "sector" => Command::Sector,
            "indicial" => Command::Indicial,
            "experiment" => Command::Experiment,
            "gauge-check" => Command::GaugeCheck,
            other => {
                return Err(Error::Invalid(format!(
                    "unknown command '{other}' (expected flow|spectrum|sector|indicial|experiment|gauge-check)"
                )))
            }
        })
    }

    fn label(&self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Spectrum => "spectrum",
            Command::Sector => "sector",
            Command::Indicial => "indicial",
            Command::Experiment => "experiment",
            Command::GaugeCheck => "gauge-check",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub overrides: Vec<(String, String)>,
}

pub fn parse_args(args: &[String]) -> Result<RunConfig> {
    if args.is_empty() {
        return Err(Error::Invalid(
            "usage: ahflow <command> [--config PATH] [--out DIR] [--set key=value] [--seed N]"
                .into(),
        ));
    }
    let command = Command::parse(&args[0])?;
    let mut config_path = None;
    let mut out_dir = PathBuf::from("out");
    let mut seed = 0u64;
    let mut overrides = Vec::new();
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        let mut expect = |name: &str| -> Result<String> {
            it.next()
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("flag {name} needs a value")))
        };
        match arg.as_str() {
            "--config" => config_path = Some(PathBuf::from(expect("--config")?)),
            "--out" => out_dir = PathBuf::from(expect("--out")?),
            "--seed" => {
                seed = expect("--seed")?
                    .parse()
                    .map_err(|_| Error::Invalid("--seed expects an integer".into()))?
            }
            "--set" => {
                let kv = expect("--set")?;
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Invalid(format!("--set expects key=value, got '{kv}'")))?;
                overrides.push((k.trim().to_string(), v.trim().to_string()));
            }
            other => return Err(Error::Invalid(format!("unknown flag '{other}'"))),
        }
    }
    if let Ok(dir) = std::env::var("RICCI_OUT") {
        out_dir = PathBuf::from(dir);
    }
    Ok(RunConfig {
        command,
        config_path,
        out_dir,
        seed,
        overrides,
    })
}

// ---------------------------------------------------------------------------
// config schema

const KNOWN_KEYS: &[&str] = &[
    "grid.n",
    "grid.r_max",
    "grid.nodes",
    "profile.kind",
    "profile.amplitude",
    "flow.mode",
    "flow.normalized",
    "flow.t_end",
    "flow.dt",
    "flow.cfl_safety",
    "flow.record_every",
    "flow.snapshot_every",
    "flow.integrator",
    "flow.segments",
    "norm.mu",
    "norm.k",
    "experiment.kind",
    "experiment.delta",
    "experiment.deltas",
    "experiment.tau",
    "experiment.eps_target",
    "experiment.fit_guard",
    "experiment.bumps",
    "experiment.amplitudes",
    "spectral.omega",
    "spectral.theta",
    "spectral.samples",
    "spectral.lambda",
    "spectral.gamma_min",
    "spectral.gamma_max",
    "spectral.gamma_step",
    "spectral.epsilon",
    "gauge.tau",
    "gauge.levels",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    File(usize),
    Override,
    Default,
}

impl Origin {
    fn label(&self) -> String {
        match self {
            Origin::File(line) => format!("file:{line}"),
            Origin::Override => "override".into(),
            Origin::Default => "default".into(),
        }
    }

    fn line(&self) -> usize {
        match self {
            Origin::File(line) => *line,
            _ => 0,
        }
    }
}

/// Parsed `key = value` config with every resolved setting and where it came
/// from, so the manifest can echo defaults.
#[derive(Debug, Clone, Default)]
pub struct ParsedConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl ParsedConfig {
    pub fn parse(text: &str) -> Result<ParsedConfig> {
        let mut entries: BTreeMap<String, (String, Origin)> = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Config {
                        line: line_no,
                        msg: format!("malformed section header '{line}'"),
                    });
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("unknown key '{key}'"),
                });
            }
            if let Some((_, prev)) = entries.get(&key) {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!(
                        "duplicate key '{key}' (first set at line {})",
                        prev.line()
                    ),
                });
            }
            entries.insert(key, (v.trim().to_string(), Origin::File(line_no)));
        }
        Ok(ParsedConfig { entries })
    }

    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<()> {
        for (k, v) in overrides {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(Error::Config {
                    line: 0,
                    msg: format!("unknown override key '{k}'"),
                });
            }
            self.entries
                .insert(k.clone(), (v.clone(), Origin::Override));
        }
        Ok(())
    }

    fn raw(&mut self, key: &str, default: &str) -> (String, Origin) {
        self.entries
            .entry(key.to_string())
            .or_insert_with(|| (default.to_string(), Origin::Default))
            .clone()
    }

    pub fn get_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let (v, origin) = self.raw(key, &format!("{default}"));
        v.parse().map_err(|_| Error::Config {
            line: origin.line(),
            msg: format!("key '{key}': expected a number, got '{v}'"),
        })
    }

    pub fn get_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        let (v, origin) = self.raw(key, &format!("{default}"));
        v.parse().map_err(|_| Error::Config {
            line: origin.line(),
            msg: format!("key '{key}': expected an integer, got '{v}'"),
        })
    }

    pub fn get_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        let (v, origin) = self.raw(key, if default { "true" } else { "false" });
        match v.as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config {
                line: origin.line(),
                msg: format!("key '{key}': expected a boolean, got '{other}'"),
            }),
        }
    }

    pub fn get_str(&mut self, key: &str, default: &str) -> (String, Origin) {
        self.raw(key, default)
    }

    pub fn get_f64_list(&mut self, key: &str, default: &str) -> Result<Vec<f64>> {
        let (v, origin) = self.raw(key, default);
        v.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| Error::Config {
                    line: origin.line(),
                    msg: format!("key '{key}': expected comma-separated numbers, got '{v}'"),
                })
            })
            .collect()
    }

    pub fn get_usize_list(&mut self, key: &str, default: &str) -> Result<Vec<usize>> {
        let (v, origin) = self.raw(key, default);
        v.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| Error::Config {
                    line: origin.line(),
                    msg: format!("key '{key}': expected comma-separated integers, got '{v}'"),
                })
            })
            .collect()
    }

    pub fn origin(&self, key: &str) -> Option<Origin> {
        self.entries.get(key).map(|(_, o)| *o)
    }

    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, (v, origin)) in &self.entries {
            let _ = writeln!(s, "{k} = {v}    # {}", origin.label());
        }
        s
    }
}

/// Everything the commands need, resolved from a parsed config.
struct Resolved {
    grid: GridSpec,
    profile_kind: String,
    profile_amplitude: f64,
    mode: FlowMode,
    normalized: bool,
    t_end: f64,
    dt: f64,
    cfl_safety: f64,
    record_every: usize,
    snapshot_every: usize,
    integrator: Integrator,
    mu: f64,
    exp_kind: String,
    delta: f64,
    deltas: Vec<f64>,
    tau: f64,
    eps_target: f64,
    fit_guard: f64,
    bumps: usize,
    amplitudes: Vec<f64>,
    omega: f64,
    theta: f64,
    samples: usize,
    lambda: f64,
    gamma_min: f64,
    gamma_max: f64,
    gamma_step: f64,
    epsilon: f64,
    gauge_tau: f64,
    gauge_levels: Vec<usize>,
    seed: u64,
}

fn resolve(pc: &mut ParsedConfig, seed: u64) -> Result<Resolved> {
    let n_dim = pc.get_usize("grid.n", 3)?;
    let r_max = pc.get_f64("grid.r_max", 8.0)?;
    let n_nodes = pc.get_usize("grid.nodes", 321)?;

    let mu = pc.get_f64("norm.mu", 0.25)?;
    if !(mu > 0.0 && mu < (n_dim as f64 - 1.0)) {
        return Err(Error::Config {
            line: pc.origin("norm.mu").map(|o| o.line()).unwrap_or(0),
            msg: format!(
                "norm.mu must lie in (0, n-1) = (0, {}), got {mu}",
                n_dim - 1
            ),
        });
    }
    let norm_k = pc.get_usize("norm.k", 2)?;
    if norm_k > 2 {
        return Err(Error::Config {
            line: pc.origin("norm.k").map(|o| o.line()).unwrap_or(0),
            msg: format!("norm.k must be 0, 1 or 2, got {norm_k}"),
        });
    }

    let (mode_s, mode_origin) = pc.get_str("flow.mode", "rdtf");
    let segments = pc.get_usize("flow.segments", 4)?;
    let mode = match mode_s.as_str() {
        "rf" => FlowMode::Ricci,
        "rdtf" => FlowMode::DeTurck,
        "chained" => FlowMode::Chained { segments },
        other => {
            return Err(Error::Config {
                line: mode_origin.line(),
                msg: format!("flow.mode must be rf|rdtf|chained, got '{other}'"),
            })
        }
    };
    let (integrator_s, integ_origin) = pc.get_str("flow.integrator", "rk4");
    let integrator = match integrator_s.as_str() {
        "rk4" => Integrator::ExplicitRk4,
        "semi-implicit" => Integrator::SemiImplicit,
        other => {
            return Err(Error::Config {
                line: integ_origin.line(),
                msg: format!("flow.integrator must be rk4|semi-implicit, got '{other}'"),
            })
        }
    };
    let cfl_safety = pc.get_f64("flow.cfl_safety", 0.8)?;
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(Error::Config {
            line: pc.origin("flow.cfl_safety").map(|o| o.line()).unwrap_or(0),
            msg: format!("flow.cfl_safety must lie in (0, 1], got {cfl_safety}"),
        });
    }

    let theta = pc.get_f64("spectral.theta", std::f64::consts::FRAC_PI_3)?;
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Config {
            line: pc.origin("spectral.theta").map(|o| o.line()).unwrap_or(0),
            msg: format!("spectral.theta must lie in (0, pi/2), got {theta}"),
        });
    }

    Ok(Resolved {
        grid: GridSpec {
            n_dim,
            r_max,
            n_nodes,
        },
        profile_kind: pc.get_str("profile.kind", "r2gauss").0,
        profile_amplitude: pc.get_f64("profile.amplitude", 1.0)?,
        mode,
        normalized: pc.get_bool("flow.normalized", true)?,
        t_end: pc.get_f64("flow.t_end", 20.0)?,
        dt: pc.get_f64("flow.dt", 0.0)?,
        cfl_safety,
        record_every: pc.get_usize("flow.record_every", 25)?,
        snapshot_every: pc.get_usize("flow.snapshot_every", 0)?,
        integrator,
        mu,
        exp_kind: pc.get_str("experiment.kind", "convergence").0,
        delta: pc.get_f64("experiment.delta", 1e-2)?,
        deltas: pc.get_f64_list("experiment.deltas", "1e-3,1e-4")?,
        tau: pc.get_f64("experiment.tau", 1.0)?,
        eps_target: pc.get_f64("experiment.eps_target", 1e-3)?,
        fit_guard: pc.get_f64("experiment.fit_guard", 2.0)?,
        bumps: pc.get_usize("experiment.bumps", 5)?,
        amplitudes: pc.get_f64_list("experiment.amplitudes", "0,0.25,0.5,0.75,1")?,
        omega: pc.get_f64("spectral.omega", 0.5)?,
        theta,
        samples: pc.get_usize("spectral.samples", 2048)?,
        lambda: pc.get_f64("spectral.lambda", 0.0)?,
        gamma_min: pc.get_f64("spectral.gamma_min", 0.3)?,
        gamma_max: pc.get_f64("spectral.gamma_max", 5.0)?,
        gamma_step: pc.get_f64("spectral.gamma_step", 0.01)?,
        epsilon: pc.get_f64("spectral.epsilon", 1e-6)?,
        gauge_tau: pc.get_f64("gauge.tau", 1.0)?,
        gauge_levels: pc.get_usize_list("gauge.levels", "81,161,321")?,
        seed,
    })
}

impl Resolved {
    fn profile(&self, r: f64) -> f64 {
        match self.profile_kind.as_str() {
            "zero" => 0.0,
            _ => self.profile_amplitude * r * r * (-r * r).exp(),
        }
    }

    fn sample_profile(&self, grid: &crate::geometry::GridRef) -> Vec<f64> {
        grid.nodes().iter().map(|&r| self.profile(r)).collect()
    }

    fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            grid: self.grid,
            mode: self.mode,
            normalized: self.normalized,
            integrator: self.integrator,
            cfl_safety: self.cfl_safety,
            dt: self.dt,
            t_end: self.t_end,
            record_every: self.record_every,
            mu: self.mu,
            eps_target: self.eps_target,
            fit_floor_guard: self.fit_guard,
            seed: self.seed,
        }
    }

    fn validate_profile_kind(&self, pc: &ParsedConfig) -> Result<()> {
        match self.profile_kind.as_str() {
            "zero" | "r2gauss" => Ok(()),
            other => Err(Error::Config {
                line: pc
                    .origin("profile.kind")
                    .map(|o| o.line())
                    .unwrap_or(0),
                msg: format!("profile.kind must be zero|r2gauss, got '{other}'"),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// output sink with checksums

struct OutputSink {
    dir: PathBuf,
    files: Vec<(String, u64, usize)>,
}

impl OutputSink {
    fn new(dir: &Path) -> Result<OutputSink> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputSink {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.files
            .push((name.to_string(), util::fnv1a64(contents.as_bytes()), contents.len()));
        Ok(())
    }

    fn manifest(
        &mut self,
        run: &RunConfig,
        pc: &ParsedConfig,
        summary_lines: &[String],
    ) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "ahflow manifest");
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", run.command.label());
        let _ = writeln!(s, "seed = {}", run.seed);
        let _ = writeln!(
            s,
            "config_file = {}",
            run.config_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "none".into())
        );
        let _ = writeln!(s, "\n[resolved config]");
        s.push_str(&pc.echo());
        let _ = writeln!(s, "\n[summary]");
        for line in summary_lines {
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s, "\n[outputs]");
        for (name, sum, len) in &self.files {
            let _ = writeln!(s, "{name}  fnv1a64=0x{sum:016x}  bytes={len}");
        }
        std::fs::write(self.dir.join("manifest.txt"), s)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// dispatch

/// Parse args, run the command, persist outputs. Returns the process exit
/// code: 0 when every verdict passes.
pub fn run(args: &[String]) -> Result<i32> {
    let run_cfg = parse_args(args)?;
    dispatch(&run_cfg)
}

pub fn dispatch(run: &RunConfig) -> Result<i32> {
    let text = match &run.config_path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let mut pc = ParsedConfig::parse(&text)?;
    pc.apply_overrides(&run.overrides)?;
    let resolved = resolve(&mut pc, run.seed)?;
    resolved.validate_profile_kind(&pc)?;

    let mut sink = OutputSink::new(&run.out_dir)?;
    let (code, summary) = match run.command {
        Command::Flow => cmd_flow(&resolved, &mut sink)?,
        Command::Spectrum => cmd_spectrum(&resolved, &mut sink)?,
        Command::Sector => cmd_sector(&resolved, &mut sink)?,
        Command::Indicial => cmd_indicial(&resolved, &mut sink)?,
        Command::Experiment => cmd_experiment(&resolved, &mut sink)?,
        Command::GaugeCheck => cmd_gauge_check(&resolved, &mut sink)?,
    };
    sink.manifest(run, &pc, &summary)?;
    Ok(code)
}

fn trajectory_meta(r: &Resolved, cfg_hash: u64) -> String {
    format!(
        "config_hash=0x{cfg_hash:016x} n={} r_max={} nodes={} mu={} mode={}",
        r.grid.n_dim,
        r.grid.r_max,
        r.grid.n_nodes,
        r.mu,
        r.mode.label()
    )
}

fn cmd_flow(r: &Resolved, sink: &mut OutputSink) -> Result<(i32, Vec<String>)> {
    let grid = r.grid.build()?;
    let w = r.sample_profile(&grid);
    let g0 = RotSymMetric::from_profile(&grid, &w, r.mu)?.metric;
    let cfg_hash = r.experiment_config().config_hash();

    let mut fc = FlowConfig {
        normalized: r.normalized,
        dt: r.dt,
        t_end: r.t_end,
        integrator: r.integrator,
        cfl_safety: r.cfl_safety,
        reference: None,
        record_every: r.record_every,
        snapshot_every: r.snapshot_every,
        track_gauge: false,
        diag_mu: r.mu,
    };
    let traj = match r.mode {
        FlowMode::Ricci => flow::run_flow(&g0, &fc)?,
        FlowMode::DeTurck => {
            fc.reference = Some(RotSymMetric::hyperbolic(&grid));
            flow::run_flow(&g0, &fc)?
        }
        FlowMode::Chained { segments } => {
            let segments = segments.max(1);
            let seg = r.t_end / segments as f64;
            let partition: Vec<f64> = (0..=segments).map(|i| i as f64 * seg).collect();
            chained_rdtf(&g0, &partition, &fc, seg * 1.001)?.trajectory
        }
    };

    sink.write(
        "trajectory.csv",
        &io::trajectory_csv_string(&traj, &trajectory_meta(r, cfg_hash)),
    )?;
    for (k, (_t, snap)) in traj.snapshots.iter().enumerate() {
        sink.write(&format!("snapshot_{k:04}.csv"), &io::metric_snapshot_string(snap))?;
    }
    sink.write(
        "plot.gp",
        "set datafile separator ','\n\
         set logscale y\n\
         set xlabel 't'\n\
         set ylabel 'weighted distance to g_h'\n\
         plot 'trajectory.csv' using 1:2 with lines title 'C0_mu', \\\n\
              'trajectory.csv' using 1:3 with lines title 'C2_mu'\n",
    )?;

    let ok = traj.status.is_completed();
    let summary = vec![
        format!("flow,{},final_c0={}", traj.status.label(), fmt_f64(traj.diagnostics.last().map(|d| d.norm_c0_mu).unwrap_or(f64::NAN))),
    ];
    Ok((if ok { 0 } else { 1 }, summary))
}

fn cmd_spectrum(r: &Resolved, sink: &mut OutputSink) -> Result<(i32, Vec<String>)> {
    let grid = r.grid.build()?;
    let gh = RotSymMetric::hyperbolic(&grid);
    let op = assemble_linearized(&gh, &gh, r.epsilon)?;
    let (min_re, eigs) = spectrum_bound(&op)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "# n={} r_max={} nodes={} min_re={} sign={}",
        grid.n_dim(),
        grid.r_max(),
        grid.len(),
        fmt_f64(min_re),
        op.sign_convention().replace(' ', "-")
    );
    s.push_str("re,im\n");
    let mut sorted = eigs.clone();
    sorted.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    for z in &sorted {
        let _ = writeln!(s, "{},{}", fmt_f64(z.re), fmt_f64(z.im));
    }
    sink.write("spectrum.csv", &s)?;
    sink.write(
        "plot.gp",
        "set datafile separator ','\nset xlabel 're'\nset ylabel 'im'\n\
         plot 'spectrum.csv' using 1:2 with points pt 7 ps 0.4 title 'spectrum'\n",
    )?;

    let bound = (grid.n_dim() as f64 - 2.0) - 0.1;
    let ok = min_re >= bound;
    Ok((
        if ok { 0 } else { 1 },
        vec![format!(
            "spectrum,{},min_re={}",
            if ok { "pass" } else { "fail" },
            fmt_f64(min_re)
        )],
    ))
}

fn cmd_sector(r: &Resolved, sink: &mut OutputSink) -> Result<(i32, Vec<String>)> {
    let grid = r.grid.build()?;
    let gh = RotSymMetric::hyperbolic(&grid);
    let op = assemble_linearized(&gh, &gh, r.epsilon)?;
    let p = WeightedNormParams::new(r.mu, 0, grid.n_dim())?;
    let w = BoundaryWeight::sech(&grid);
    let report = sector_check(&op, r.omega, r.theta, r.samples, &p, &w)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "# omega={} theta={} samples={} c={} pass={}",
        fmt_f64(report.omega),
        fmt_f64(report.theta),
        report.samples.len(),
        fmt_f64(report.c),
        report.pass
    );
    s.push_str("re_lambda,im_lambda,res_norm,bound,pass\n");
    for sm in &report.samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(sm.lambda.re),
            fmt_f64(sm.lambda.im),
            fmt_f64(sm.res_norm),
            fmt_f64(sm.bound),
            sm.pass
        );
    }
    sink.write("sector.csv", &s)?;
    sink.write(
        "plot.gp",
        "set datafile separator ','\nset xlabel 're'\nset ylabel 'im'\n\
         plot 'sector.csv' using 1:2 with points pt 7 ps 0.3 title 'samples'\n",
    )?;

    Ok((
        if report.pass { 0 } else { 1 },
        vec![format!(
            "sector,{},c={}",
            if report.pass { "pass" } else { "fail" },
            fmt_f64(report.c)
        )],
    ))
}

fn cmd_indicial(r: &Resolved, sink: &mut OutputSink) -> Result<(i32, Vec<String>)> {
    let grid = r.grid.build()?;
    let pair = indicial_roots_scalar(grid.n_dim(), Complex64::new(r.lambda, 0.0));
    let op = ScalarModelOp::new(&grid);
    let weight = BoundaryWeight::sech(&grid);
    let n_steps = ((r.gamma_max - r.gamma_min) / r.gamma_step).round() as usize;
    let gammas: Vec<f64> = (0..=n_steps)
        .map(|i| r.gamma_min + i as f64 * r.gamma_step)
        .collect();
    let roots = empirical_indicial(&op, &weight, &gammas, r.lambda)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "# n={} lambda={} gamma_minus={} gamma_plus={} beyond_threshold={}",
        grid.n_dim(),
        fmt_f64(r.lambda),
        fmt_f64(pair.gamma_minus.re),
        fmt_f64(pair.gamma_plus.re),
        pair.beyond_threshold
    );
    s.push_str("kind,gamma,decay_gain\n");
    let _ = writeln!(s, "closed_minus,{},", fmt_f64(pair.gamma_minus.re));
    let _ = writeln!(s, "closed_plus,{},", fmt_f64(pair.gamma_plus.re));
    for root in &roots {
        let _ = writeln!(
            s,
            "empirical,{},{}",
            fmt_f64(root.gamma),
            fmt_f64(root.decay_gain)
        );
    }
    sink.write("indicial.csv", &s)?;

    // pass when every detected root matches a closed-form root inside the scan
    let mut ok = true;
    for root in &roots {
        let close = (root.gamma - pair.gamma_plus.re).abs() < 0.05
            || (root.gamma - pair.gamma_minus.re).abs() < 0.05;
        ok &= close;
    }
    ok &= !roots.is_empty();
    Ok((
        if ok { 0 } else { 1 },
        vec![format!(
            "indicial,{},roots_detected={}",
            if ok { "pass" } else { "fail" },
            roots.len()
        )],
    ))
}

fn cmd_experiment(r: &Resolved, sink: &mut OutputSink) -> Result<(i32, Vec<String>)> {
    let cfg = r.experiment_config();
    let grid = r.grid.build()?;
    let w = r.sample_profile(&grid);
    let mut summary_rows = vec!["experiment,verdict,key_metric".to_string()];
    let code;

    match r.exp_kind.as_str() {
        "convergence" => {
            let report = experiments::convergence_experiment(&w, &cfg)?;
            write_stability_csv(sink, "stability.csv", std::slice::from_ref(&report))?;
            write_distance_csv(sink, "distances.csv", &report)?;
            let key = report
                .fit
                .map(|f| format!("omega_fit={}", fmt_f64(f.omega)))
                .unwrap_or_else(|| format!("final={}", fmt_f64(report.final_distance)));
            summary_rows.push(format!("convergence,{},{key}", report.verdict.label()));
            code = if report.verdict == Verdict::Converged { 0 } else { 1 };
        }
        "stability" => {
            let perturbations = standard_bumps(&grid, r.mu, r.bumps);
            let reports = experiments::stability_sweep(&w, &perturbations, r.delta, &cfg)?;
            write_stability_csv(sink, "stability.csv", &reports)?;
            let mut all_ok = true;
            for rep in &reports {
                all_ok &= rep.verdict == Verdict::Converged;
                summary_rows.push(format!(
                    "stability:{},{},final={}",
                    rep.perturbation_id,
                    rep.verdict.label(),
                    fmt_f64(rep.final_distance)
                ));
            }
            code = if all_ok { 0 } else { 1 };
        }
        "dependence" => {
            let g0 = RotSymMetric::from_profile(&grid, &w, r.mu)?.metric;
            let p = bump_perturbation(&grid, r.mu, 1.5, 0.7, true, true);
            let report =
                experiments::continuous_dependence_sweep(&g0, &p, &r.deltas, r.tau, &cfg)?;
            let mut s = String::new();
            let _ = writeln!(
                s,
                "# tau={} config_hash=0x{:016x} {}",
                fmt_f64(report.tau),
                report.config_hash,
                report.grid_meta
            );
            s.push_str("delta,ratio,status\n");
            for i in 0..report.deltas.len() {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_f64(report.deltas[i]),
                    report.ratios[i].map(fmt_f64).unwrap_or_else(|| "nan".into()),
                    report.statuses[i]
                );
            }
            sink.write("dependence.csv", &s)?;
            let pass = report.lipschitz_pass.unwrap_or(false) && !report.degenerate_request;
            summary_rows.push(format!(
                "dependence,{},lipschitz={:?}",
                if pass { "pass" } else { "fail" },
                report.lipschitz_pass
            ));
            code = if pass { 0 } else { 1 };
        }
        "curvature-scan" => {
            let rows = experiments::curvature_condition_scan(&r.amplitudes, &cfg)?;
            let mut s = String::new();
            let _ = writeln!(s, "# config_hash=0x{:016x}", cfg.config_hash());
            s.push_str("amplitude,min_secT,weighted_distance\n");
            for row in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_f64(row.amplitude),
                    fmt_f64(row.min_sec_t),
                    fmt_f64(row.weighted_distance)
                );
            }
            sink.write("scan.csv", &s)?;
            summary_rows.push(format!("curvature-scan,pass,rows={}", rows.len()));
            code = 0;
        }
        other => {
            return Err(Error::Invalid(format!(
                "experiment.kind must be convergence|stability|dependence|curvature-scan, got '{other}'"
            )))
        }
    }

    sink.write("summary.csv", &(summary_rows.join("\n") + "\n"))?;
    sink.write(
        "plot.gp",
        "set datafile separator ','\nset logscale y\n\
         plot 'distances.csv' using 1:2 with lines title 'distance' \n",
    )?;
    Ok((code, summary_rows))
}

fn cmd_gauge_check(r: &Resolved, sink: &mut OutputSink) -> Result<(i32, Vec<String>)> {
    let mut cfg = r.experiment_config();
    cfg.mode = FlowMode::Ricci;
    let profile = |rr: f64| r.profile(rr);
    let report =
        experiments::gauge_consistency_check(&profile, r.gauge_tau, &cfg, &r.gauge_levels)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "# tau={} fitted_order={} config_hash=0x{:016x}",
        fmt_f64(r.gauge_tau),
        fmt_f64(report.fitted_order),
        report.config_hash
    );
    s.push_str("nodes,h,dt,discrepancy\n");
    for level in &report.levels {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            level.n_nodes,
            fmt_f64(level.h),
            fmt_f64(level.dt),
            fmt_f64(level.discrepancy)
        );
    }
    sink.write("gauge.csv", &s)?;
    sink.write(
        "plot.gp",
        "set datafile separator ','\nset logscale xy\n\
         plot 'gauge.csv' using 2:4 with linespoints title 'discrepancy(h)'\n",
    )?;

    let ok = report.fitted_order >= 1.5;
    Ok((
        if ok { 0 } else { 1 },
        vec![format!(
            "gauge-check,{},order={}",
            if ok { "pass" } else { "fail" },
            fmt_f64(report.fitted_order)
        )],
    ))
}

/// The standard five bump profiles used by the stability sweep: centers
/// spread across the collar, placed in one or both tensor components.
pub fn standard_bumps(
    grid: &crate::geometry::GridRef,
    mu: f64,
    count: usize,
) -> Vec<(String, crate::geometry::MetricPerturbation)> {
    let specs = [
        (1.0, 0.5, true, false),
        (2.0, 0.5, false, true),
        (1.5, 0.8, true, true),
        (3.0, 0.6, true, false),
        (2.5, 1.0, false, true),
    ];
    specs
        .iter()
        .cycle()
        .take(count)
        .enumerate()
        .map(|(i, &(c, w, rr, sph))| {
            (
                format!("bump{}(c={c},w={w},rr={rr},sph={sph})", i + 1),
                bump_perturbation(grid, mu, c, w, rr, sph),
            )
        })
        .collect()
}

fn write_stability_csv(
    sink: &mut OutputSink,
    name: &str,
    reports: &[experiments::StabilityReport],
) -> Result<()> {
    let mut s = String::new();
    if let Some(first) = reports.first() {
        let _ = writeln!(
            s,
            "# config_hash=0x{:016x} {}",
            first.config_hash, first.grid_meta
        );
    }
    s.push_str(
        "perturbation,delta,verdict,status,final_distance,min_distance,omega_fit,r_squared,first_entry_half_eps\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.perturbation_id,
            fmt_f64(r.delta),
            r.verdict.label(),
            r.status,
            fmt_f64(r.final_distance),
            fmt_f64(r.min_distance),
            r.fit.map(|f| fmt_f64(f.omega)).unwrap_or_else(|| "nan".into()),
            r.raw_r_squared.map(fmt_f64).unwrap_or_else(|| "nan".into()),
            r.first_entry_half_eps
                .map(fmt_f64)
                .unwrap_or_else(|| "never".into()),
        );
    }
    sink.write(name, &s)
}

fn write_distance_csv(
    sink: &mut OutputSink,
    name: &str,
    report: &experiments::StabilityReport,
) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# config_hash=0x{:016x} {}",
        report.config_hash, report.grid_meta
    );
    s.push_str("t,distance\n");
    for (t, d) in report.times.iter().zip(&report.distances) {
        let _ = writeln!(s, "{},{}", fmt_f64(*t), fmt_f64(*d));
    }
    sink.write(name, &s)
}
