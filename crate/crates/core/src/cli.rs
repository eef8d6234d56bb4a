//! Command-line front end. Parses the run configuration, dispatches to the
//! scenario runners and writes their outputs; no physics lives here.
//!
//! Precedence: positional `key=value` overrides, then `--samples`,
//! `--tolerance` and `--max-step`, beat the `--config` file, which beats the
//! scenario defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{run_scenario, scenario_defaults, RunOptions, ScenarioOutput, SCENARIOS};
use crate::hamiltonian::SystemParams;

/// Keys accepted in a config file besides the `SystemParams` fields.
pub const RUN_KEYS: [&str; 3] = ["samples", "tolerance", "max_step"];

#[derive(Debug, Parser)]
#[command(
    name = "jchm",
    version,
    about = "Two-site Jaynes-Cummings-Hubbard simulator with a knob qubit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Photon hopping with the knob qubit in g and in e.
    KnobSwitch(RunArgs),
    /// Two-polariton spectrum, repulsion, overlaps and drive resonance.
    Spectrum(RunArgs),
    /// Driven oscillation between localized and delocalized two-polariton states.
    PhaseRabi(RunArgs),
    /// Logical exchange in the ON and OFF settings.
    IswapGate(RunArgs),
    /// Exact versus effective Hamiltonian dynamics.
    ValidateDispersive(RunArgs),
    /// Every scenario, one subdirectory each.
    All(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::KnobSwitch(_) => "knob-switch",
            Command::Spectrum(_) => "spectrum",
            Command::PhaseRabi(_) => "phase-rabi",
            Command::IswapGate(_) => "iswap-gate",
            Command::ValidateDispersive(_) => "validate-dispersive",
            Command::All(_) => "all",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::KnobSwitch(a)
            | Command::Spectrum(a)
            | Command::PhaseRabi(a)
            | Command::IswapGate(a)
            | Command::ValidateDispersive(a)
            | Command::All(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Config file with `key = value` lines; `#` starts a comment.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Samples per time series.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Largest tolerated norm drift of the direct integrator.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Largest step of the direct integrator.
    #[arg(long)]
    pub max_step: Option<f64>,
    /// Skip the direct-integration cross-check of the driven run.
    #[arg(long)]
    pub no_cross_check: bool,
    /// Parameter overrides such as `kappa0=0.2`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Fully resolved settings of one scenario run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub params: SystemParams,
    pub out: PathBuf,
    pub options: RunOptions,
}

impl RunConfig {
    /// Config-file text that replays this run.
    pub fn resolved_text(&self) -> String {
        let mut out = format!("# scenario: {}\n", self.scenario);
        for (k, v) in self.params.entries() {
            let _ = writeln!(out, "{k} = {}", crate::dynamics::format_sig(v));
        }
        if let Some(n) = self.options.samples {
            let _ = writeln!(out, "samples = {n}");
        }
        let i = &self.options.integrator;
        let _ = writeln!(out, "tolerance = {}", crate::dynamics::format_sig(i.norm_tolerance));
        let _ = writeln!(out, "max_step = {}", crate::dynamics::format_sig(i.max_step));
        out
    }
}

/// `(key, value)` pairs of a config file, in file order.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("override `{s}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_number(key: &str, value: &str) -> Result<f64> {
    let x: f64 = value
        .parse()
        .map_err(|_| Error::Invalid(format!("value `{value}` for `{key}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Invalid(format!("value for `{key}` is not finite")));
    }
    Ok(x)
}

fn apply(config: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let x = parse_number(key, value)?;
    match key {
        "samples" => {
            if x < 2.0 || x.fract() != 0.0 {
                return Err(Error::Invalid(format!(
                    "`samples` must be an integer >= 2, got {value}"
                )));
            }
            config.options.samples = Some(x as usize);
        }
        "tolerance" => config.options.integrator.norm_tolerance = positive(key, x)?,
        "max_step" => config.options.integrator.max_step = positive(key, x)?,
        _ if SystemParams::KEYS.contains(&key) => config.params.set(key, x)?,
        _ => return Err(Error::Invalid(format!("unknown key `{key}`"))),
    }
    Ok(())
}

fn positive(key: &str, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Invalid(format!("`{key}` must be positive, got {x}")))
    }
}

/// Merge defaults, config file and flags for one scenario.
pub fn parse_config(scenario: &str, args: &RunArgs, out: &Path) -> Result<RunConfig> {
    let mut config = RunConfig {
        scenario: scenario.to_string(),
        params: scenario_defaults(scenario)?,
        out: out.to_path_buf(),
        options: RunOptions::default(),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        for (k, v) in parse_config_text(&text)? {
            apply(&mut config, &k, &v)?;
        }
    }
    if let Some(n) = args.samples {
        apply(&mut config, "samples", &n.to_string())?;
    }
    if let Some(t) = args.tolerance {
        apply(&mut config, "tolerance", &t.to_string())?;
    }
    if let Some(h) = args.max_step {
        apply(&mut config, "max_step", &h.to_string())?;
    }
    for o in &args.overrides {
        let (k, v) = parse_override(o)?;
        apply(&mut config, &k, &v)?;
    }
    if args.no_cross_check {
        config.options.cross_check = false;
    }
    config.params.validate()?;
    Ok(config)
}

/// Resolve the configuration of every scenario the command names.
pub fn resolve(command: &Command) -> Result<Vec<RunConfig>> {
    let args = command.args();
    match command {
        Command::All(_) => SCENARIOS
            .iter()
            .map(|s| parse_config(s, args, &args.out.join(s)))
            .collect(),
        other => Ok(vec![parse_config(other.name(), args, &args.out)?]),
    }
}

/// Run one resolved scenario and write its files.
pub fn execute(config: &RunConfig) -> Result<ScenarioOutput> {
    let mut output = run_scenario(&config.scenario, &config.params, &config.options)?;
    output.write_to(&config.out)?;
    let path = config.out.join("resolved_params.txt");
    std::fs::write(&path, config.resolved_text())?;
    output.report.files.push(path);
    Ok(output)
}

/// Human-readable result lines.
pub fn render(output: &ScenarioOutput) -> String {
    let r = &output.report;
    let mut out = format!("== {} ==\n", r.name);
    for t in &r.targets {
        let _ = writeln!(
            out,
            "{} {:<44} {:>16}  expected {} [{}]",
            if t.passed { "PASS" } else { "FAIL" },
            t.key,
            crate::dynamics::format_sig(t.value),
            t.expectation,
            t.provenance
        );
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

/// Exit status of a parsed command line: 0 when every published target
/// passes, 1 when one fails or a scenario errors, 2 on a configuration error.
pub fn run(cli: &Cli) -> i32 {
    let configs = match resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut status = 0;
    for config in &configs {
        match execute(config) {
            Ok(output) => {
                print!("{}", render(&output));
                if !output.report.published_targets_pass() {
                    status = 1;
                }
            }
            Err(e) => {
                eprintln!("error in {}: {e}", config.scenario);
                status = 1;
            }
        }
    }
    status
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> RunArgs {
        let mut argv = vec!["jchm", "spectrum"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Spectrum(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_resolve() {
        let c = parse_config("spectrum", &args(&[]), Path::new("o")).unwrap();
        assert_eq!(c.params, SystemParams::spectrum());
        assert_eq!(c.options, RunOptions::default());
    }

    #[test]
    fn flag_beats_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.txt");
        std::fs::write(&file, "# comment\nkappa0 = 0.1\nepsilon = 42 # trailing\n").unwrap();
        let f = file.to_str().unwrap();
        let c = parse_config("spectrum", &args(&["--config", f, "kappa0=0.2"]), dir.path()).unwrap();
        assert_eq!(c.params.kappa0, 0.2);
        assert_eq!(c.params.epsilon, 42.0);
    }

    #[test]
    fn bad_values_name_the_key() {
        let e = parse_config("spectrum", &args(&["epsilon=abc"]), Path::new("o")).unwrap_err();
        assert!(e.to_string().contains("epsilon"));
        let e = parse_config("spectrum", &args(&["bogus=1"]), Path::new("o")).unwrap_err();
        assert!(e.to_string().contains("bogus"));
        assert!(parse_config("spectrum", &args(&["w=inf"]), Path::new("o")).is_err());
        assert!(parse_config("spectrum", &args(&["n_max=2.5"]), Path::new("o")).is_err());
        assert!(parse_config("spectrum", &args(&["kappa0"]), Path::new("o")).is_err());
    }

    #[test]
    fn resolved_text_replays() {
        let dir = tempfile::tempdir().unwrap();
        let c = parse_config("phase-rabi", &args(&["--samples", "50", "omega=0.05"]), dir.path()).unwrap();
        let file = dir.path().join("resolved_params.txt");
        std::fs::write(&file, c.resolved_text()).unwrap();
        let replay = parse_config("phase-rabi", &args(&["--config", file.to_str().unwrap()]), dir.path()).unwrap();
        assert_eq!(replay, c);
    }

    #[test]
    fn all_uses_subdirectories() {
        let cli = Cli::try_parse_from(["jchm", "all", "--out", "x"]).unwrap();
        let configs = resolve(&cli.command).unwrap();
        assert_eq!(configs.len(), SCENARIOS.len());
        assert_eq!(configs[1].out, Path::new("x").join("spectrum"));
        assert_eq!(configs[2].params, SystemParams::phase_rabi());
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let e = Cli::try_parse_from(["jchm", "teleport"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
