//! Command-line parsing and CSV/JSON emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::chaosdiag::s_rmt;
use crate::error::{Error, Result};
use crate::harness::{Experiment, Model, Protocol, SweepConfig, SweepOutput, SweepRecord};
use crate::spinops::Spin;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "ergokit", version, about = "Ergotropy sweeps for kicked-top and kicked-Ising Floquet models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Entanglement and daemonic work gain for known states
    Known(RunArgs),
    /// System, measured ancilla and unmeasured auxiliary
    Tripartite(RunArgs),
    /// Coarse-grained protocols at a fixed cell size
    Unknown(RunArgs),
    /// Coarse-grained protocols against the cell size
    CoarseScan(RunArgs),
    /// Work gain against the ancilla dimension
    AncillaScaling(RunArgs),
    /// Level-spacing ratio of the Floquet spectrum
    Spectral(RunArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    KickedTop,
    KickedIsing,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Kick-strength grid `min:max:count` (kicked top)
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub kappa: Option<String>,
    /// Kick-strength grid `min:max:count` (kicked Ising)
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub m: Option<String>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long)]
    pub time_steps: Option<usize>,
    #[arg(long)]
    pub coarse_n: Option<usize>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
    #[arg(long, allow_hyphen_values = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output if absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to the extension of `--out`, else csv
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file holding a sweep configuration; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Invocation {
    pub config: SweepConfig,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Parses `min:max:count`, or a single value.
pub fn parse_grid(key: &str, text: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::config(key, format!("`{text}`: {msg}"));
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad("not a number"));
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, n] => {
            let count: usize = n.trim().parse().map_err(|_| bad("count must be a positive integer"))?;
            if count == 0 {
                return Err(bad("count must be a positive integer"));
            }
            Ok(crate::harness::linspace(num(a)?, num(b)?, count))
        }
        _ => Err(bad("expected min:max:count")),
    }
}

fn read_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("cannot read `{}`: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config("config", format!("`{}`: {e}", path.display())))
}

/// File values first, then flags; validated.
pub fn parse_config(experiment: Experiment, args: &RunArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => SweepConfig::default(),
    };
    cfg.experiment = experiment;
    if let Some(m) = args.model {
        cfg.model = match m {
            ModelArg::KickedTop => Model::KickedTop,
            ModelArg::KickedIsing => Model::KickedIsing,
        };
    }
    match (&args.kappa, &args.m) {
        (Some(_), Some(_)) => return Err(Error::config("m", "give either --kappa or --m, not both")),
        (Some(k), None) => {
            if args.model == Some(ModelArg::KickedIsing) {
                return Err(Error::config("kappa", "--kappa is the kicked-top grid; use --m for kicked-ising"));
            }
            if args.model.is_none() && args.config.is_none() {
                cfg.model = Model::KickedTop;
            }
            if cfg.model != Model::KickedTop {
                return Err(Error::config("kappa", "--kappa is the kicked-top grid; use --m for kicked-ising"));
            }
            cfg.grid = Some(parse_grid("kappa", k)?);
        }
        (None, Some(m)) => {
            if args.model == Some(ModelArg::KickedTop) {
                return Err(Error::config("m", "--m is the kicked-ising grid; use --kappa for kicked-top"));
            }
            if args.model.is_none() {
                cfg.model = Model::KickedIsing;
            }
            cfg.grid = Some(parse_grid("m", m)?);
        }
        (None, None) => {}
    }
    if let Some(v) = args.ensemble {
        cfg.ensemble = v;
    }
    if let Some(v) = args.time_steps {
        cfg.time_steps = v;
    }
    if let Some(v) = args.coarse_n {
        cfg.coarse_n = v;
        if experiment == Experiment::CoarseScan {
            cfg.coarse_grid = Some(vec![v]);
        }
    }
    if let Some(p) = args.protocol {
        cfg.protocol = match p {
            ProtocolArg::One => Protocol::One,
            ProtocolArg::Two => Protocol::Two,
            ProtocolArg::Both => Protocol::Both,
        };
    }
    if args.c1.is_some() {
        cfg.c1 = args.c1;
    }
    if args.c2.is_some() {
        cfg.c2 = args.c2;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve(command: &Command) -> (Experiment, &RunArgs) {
    match command {
        Command::Known(a) => (Experiment::Known, a),
        Command::Tripartite(a) => (Experiment::Tripartite, a),
        Command::Unknown(a) => (Experiment::Unknown, a),
        Command::CoarseScan(a) => (Experiment::CoarseScan, a),
        Command::AncillaScaling(a) => (Experiment::AncillaScaling, a),
        Command::Spectral(a) => (Experiment::Spectral, a),
    }
}

pub fn invocation(cli: &Cli) -> Result<Invocation> {
    let (experiment, args) = resolve(&cli.command);
    let config = parse_config(experiment, args)?;
    let format = args.format.unwrap_or(match args.out.as_ref().and_then(|p| p.extension()) {
        Some(ext) if ext == "json" => Format::Json,
        _ => Format::Csv,
    });
    Ok(Invocation { config, out: args.out.clone(), format })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(usize),
    Empty,
}

/// Column names in output order.
pub fn schema(experiment: Experiment) -> &'static [&'static str] {
    const KNOWN: &[&str] = &["param", "S_lin_mean", "S_lin_se", "W_mean", "W_se", "dW_mean", "dW_se"];
    const TRI: &[&str] = &["param", "c1", "c2", "S_lin_mean", "S_lin_se", "W_mean", "W_se", "dW_mean", "dW_se"];
    const SCALING: &[&str] = &["param", "d_A", "S_lin_mean", "S_lin_se", "W_mean", "W_se", "dW_mean", "dW_se"];
    const UNKNOWN: &[&str] = &[
        "param", "Wrc_mean", "Wrc_se", "Wbar_mean", "Wbar_se", "OE1_mean", "OE1_se", "OE2_mean", "OE2_se", "fid_mean",
        "OE1max_mean", "OE1max_se", "Wapp_mean", "Wapp_se",
    ];
    const COARSE: &[&str] = &[
        "param", "n", "Wrc_mean", "Wrc_se", "Wbar_mean", "Wbar_se", "OE1_mean", "OE1_se", "OE2_mean", "OE2_se", "fid_mean",
        "OE1max_mean", "OE1max_se", "Wapp_mean", "Wapp_se",
    ];
    const SPECTRAL: &[&str] = &["param", "r_full", "r_sector", "levels"];
    match experiment {
        Experiment::Known => KNOWN,
        Experiment::Tripartite => TRI,
        Experiment::AncillaScaling => SCALING,
        Experiment::Unknown => UNKNOWN,
        Experiment::CoarseScan => COARSE,
        Experiment::Spectral => SPECTRAL,
    }
}

pub fn cell(rec: &SweepRecord, column: &str) -> Cell {
    use crate::harness::Stat;
    let f = |v: Option<f64>| v.map_or(Cell::Empty, Cell::Float);
    let st = |v: Option<Stat>, se: bool| f(v.map(|s| if se { s.se } else { s.mean }));
    let i = |v: Option<usize>| v.map_or(Cell::Empty, Cell::Int);
    match column {
        "param" => Cell::Float(rec.param),
        "c1" => f(rec.c1),
        "c2" => f(rec.c2),
        "d_A" => i(rec.d_ancilla),
        "n" => i(rec.coarse_n),
        "levels" => i(rec.levels),
        "S_lin_mean" => st(rec.s_lin, false),
        "S_lin_se" => st(rec.s_lin, true),
        "W_mean" => st(rec.work, false),
        "W_se" => st(rec.work, true),
        "dW_mean" => st(rec.gain, false),
        "dW_se" => st(rec.gain, true),
        "Wrc_mean" => st(rec.w_rc, false),
        "Wrc_se" => st(rec.w_rc, true),
        "Wbar_mean" => st(rec.w_bar, false),
        "Wbar_se" => st(rec.w_bar, true),
        "OE1_mean" => st(rec.oe1, false),
        "OE1_se" => st(rec.oe1, true),
        "OE2_mean" => st(rec.oe2, false),
        "OE2_se" => st(rec.oe2, true),
        "OE1max_mean" => st(rec.oe1_top, false),
        "OE1max_se" => st(rec.oe1_top, true),
        "Wapp_mean" => st(rec.w_applied, false),
        "Wapp_se" => st(rec.w_applied, true),
        "fid_mean" => f(rec.fidelity),
        "r_full" => f(rec.r_full),
        "r_sector" => f(rec.r_sector),
        _ => Cell::Empty,
    }
}

fn cell_text(c: Cell) -> String {
    match c {
        // Display for f64 is the shortest string that round-trips
        Cell::Float(x) => format!("{x}"),
        Cell::Int(n) => n.to_string(),
        Cell::Empty => String::new(),
    }
}

fn cell_json(c: Cell) -> Value {
    match c {
        Cell::Float(x) if x.is_finite() => json!(x),
        Cell::Int(n) => json!(n),
        _ => Value::Null,
    }
}

/// Subsystem dimensions implied by a validated configuration.
pub fn dims_metadata(cfg: &SweepConfig) -> Result<Value> {
    let d_s = cfg.system_dim()?;
    let spin_dim = |j: f64| Spin::new(j).map(|s| s.dim());
    let tri = cfg.experiment == Experiment::Tripartite;
    let (d_a, d_b): (Value, usize) = match cfg.model {
        Model::KickedTop if cfg.experiment == Experiment::AncillaScaling => {
            (json!(cfg.ancilla_spins.iter().map(|&j| spin_dim(j)).collect::<Result<Vec<_>>>()?), 1)
        }
        Model::KickedTop => (json!(spin_dim(cfg.j_ancilla)?), if tri { spin_dim(cfg.j_aux)? } else { 1 }),
        Model::KickedIsing if tri => (json!(2), 2),
        Model::KickedIsing => (json!(1usize << cfg.ancilla_sites.as_ref().map_or(2, Vec::len)), 1),
    };
    let rmt = d_a.as_u64().map(|a| s_rmt(d_s, a as usize * d_b));
    Ok(json!({ "d_S": d_s, "d_A": d_a, "d_B": d_b, "S_RMT": rmt }))
}

pub fn metadata(cfg: &SweepConfig, out: &SweepOutput) -> Result<Value> {
    Ok(json!({
        "toolkit": "ergokit",
        "version": VERSION,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg).map_err(|e| Error::Io(e.to_string()))?,
        "dims": dims_metadata(cfg)?,
        "regressions": serde_json::to_value(&out.regressions).map_err(|e| Error::Io(e.to_string()))?,
    }))
}

/// Serializes a run. CSV carries the metadata as `# key: json` lines above the header.
pub fn render(cfg: &SweepConfig, out: &SweepOutput, format: Format) -> Result<String> {
    let meta = metadata(cfg, out)?;
    let cols = schema(cfg.experiment);
    match format {
        Format::Csv => {
            let mut s = String::new();
            if let Value::Object(m) = &meta {
                for (k, v) in m {
                    s.push_str(&format!("# {k}: {v}\n"));
                }
            }
            s.push_str(&cols.join(","));
            s.push('\n');
            for rec in &out.records {
                let row: Vec<String> = cols.iter().map(|c| cell_text(cell(rec, c))).collect();
                s.push_str(&row.join(","));
                s.push('\n');
            }
            Ok(s)
        }
        Format::Json => {
            let records: Vec<Value> = out
                .records
                .iter()
                .map(|rec| Value::Object(cols.iter().map(|&c| (c.to_string(), cell_json(cell(rec, c)))).collect::<Map<_, _>>()))
                .collect();
            let mut text = serde_json::to_string_pretty(&json!({ "metadata": meta, "records": records }))
                .map_err(|e| Error::Io(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
    }
}

pub fn emit(cfg: &SweepConfig, out: &SweepOutput, format: Format, path: Option<&Path>) -> Result<()> {
    let text = render(cfg, out, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("cannot write `{}`: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

/// Worker count from `ERGOKIT_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("ERGOKIT_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config("ERGOKIT_THREADS", format!("`{v}` is not a positive integer"))),
        },
    }
}

/// Full command-line run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("error: invalid arguments"));
            return 2;
        }
    };
    let result = threads_from_env().and_then(|threads| {
        let inv = invocation(&cli)?;
        let out = match threads {
            Some(n) => crate::harness::run_with_threads(&inv.config, n)?,
            None => crate::harness::run(&inv.config)?,
        };
        emit(&inv.config, &out, inv.format, inv.out.as_deref())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Invocation> {
        let cli = Cli::try_parse_from(std::iter::once("ergokit").chain(args.iter().copied())).expect("clap parse");
        invocation(&cli)
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("kappa", "0:7:29").unwrap().len(), 29);
        assert_eq!(parse_grid("kappa", "0:7:29").unwrap()[28], 7.0);
        assert_eq!(parse_grid("kappa", "2.5").unwrap(), vec![2.5]);
        assert_eq!(parse_grid("kappa", "1:1:1").unwrap(), vec![1.0]);
        for bad in ["0:7", "a:1:2", "0:1:0", "0:1:x"] {
            assert!(matches!(parse_grid("kappa", bad), Err(Error::Config { ref key, .. }) if key == "kappa"));
        }
    }

    #[test]
    fn happy_path() {
        let inv = parse(&["known", "--model", "kicked-top", "--kappa", "0:7:29", "--ensemble", "200", "--seed", "42", "--out", "fig1a.csv"]).unwrap();
        assert_eq!(inv.config.ensemble, 200);
        assert_eq!(inv.config.seed, 42);
        assert_eq!(inv.config.resolved_grid().len(), 29);
        assert_eq!(inv.format, Format::Csv);
        let inv = parse(&["known", "--m", "0:3:5", "--out", "x.json"]).unwrap();
        assert_eq!(inv.config.model, Model::KickedIsing);
        assert_eq!(inv.format, Format::Json);
    }

    #[test]
    fn divisibility_is_checked() {
        let err = parse(&["unknown", "--coarse-n", "3"]).unwrap_err();
        assert!(err.to_string().contains("coarse_n") && err.to_string().contains("divide"), "{err}");
        assert!(parse(&["coarse-scan", "--coarse-n", "3"]).is_err());
        assert!(parse(&["known", "--model", "kicked-ising", "--kappa", "0:1:3"]).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"ensemble": 300, "seed": 7, "time_steps": 4}"#).unwrap();
        let inv = parse(&["known", "--config", path.to_str().unwrap(), "--ensemble", "50"]).unwrap();
        assert_eq!((inv.config.ensemble, inv.config.seed, inv.config.time_steps), (50, 7, 4));
        std::fs::write(&path, r#"{"ensembl": 300}"#).unwrap();
        let err = parse(&["known", "--config", path.to_str().unwrap()]).unwrap_err();
        assert!(err.to_string().contains("ensembl"));
    }

    #[test]
    fn empty_records_give_header_only() {
        let cfg = SweepConfig::default();
        let out = SweepOutput { records: vec![], regressions: vec![] };
        let csv = render(&cfg, &out, Format::Csv).unwrap();
        let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, vec!["param,S_lin_mean,S_lin_se,W_mean,W_se,dW_mean,dW_se"]);
    }

    #[test]
    fn dims_metadata_values() {
        let d = dims_metadata(&SweepConfig::default()).unwrap();
        assert_eq!(d["d_S"], 20);
        assert!((d["S_RMT"].as_f64().unwrap() - 0.6229508).abs() < 1e-6);
        let d = dims_metadata(&SweepConfig { model: Model::KickedIsing, ..Default::default() }).unwrap();
        assert!((d["S_RMT"].as_f64().unwrap() - 0.7354085).abs() < 1e-6);
    }
}
