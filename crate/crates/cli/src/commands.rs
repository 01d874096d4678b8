use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use urnfield::ctime::{
    compare_laws, sample_discrete, sample_embedded, EmbeddingState, RefreshSchedule,
};
use urnfield::io::fmt_f64;
use urnfield::mc::{run_ensemble, run_scan, EnsembleConfig, ScanConfig};
use urnfield::meanfield::{
    sample_field, scan_equilibria, solve_sm, um_stability_margin, write_equilibria_csv,
    write_field_csv, ModelParams,
};
use urnfield::reinforcement::{
    check_mdrem_conditions, check_remainder_bound, check_strong, check_variation_bound,
    ConditionVerdict, MdremOptions,
};
use urnfield::rng::derive_seed;
use urnfield::stats::TestReport;
use urnfield::urn_sim::{run, run_coupled, MultiColorState, SequentialState, Trajectory, UrnState};
use urnfield::{ReinforcementSeq, Result as CoreResult, UrnError};

use crate::output::{emit, json_bytes, Emission};
use crate::{Cli, CliError, CliResult, Command, Format};

#[derive(Debug, Args, Serialize)]
pub struct FieldArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 51)]
    pub resolution: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EquilibriaArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct UmArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub p: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SmArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub p: f64,
    /// Bracket shrink; defaults to min(1/2 - p, p) / 4.
    #[arg(long)]
    pub delta: Option<f64>,
}

/// Reinforcement given as `W(n) = n^m` or as a JSON file.
#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct SeqArgs {
    #[arg(long)]
    pub m: Option<u32>,
    /// JSON reinforcement sequence.
    #[arg(long)]
    pub seq: Option<PathBuf>,
}

impl SeqArgs {
    fn load(&self) -> CliResult<ReinforcementSeq> {
        match (&self.m, &self.seq) {
            (Some(m), None) => Ok(ReinforcementSeq::monomial(*m)?),
            (None, Some(path)) => Ok(ReinforcementSeq::from_json(&std::fs::read_to_string(
                path,
            )?)?),
            _ => Err(UrnError::InvalidArgument("give exactly one of --m and --seq".into()).into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ium,
    Multicolor,
    Sequential,
    Embedding,
    Coupled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Delayed,
    EveryJump,
}

impl From<Schedule> for RefreshSchedule {
    fn from(s: Schedule) -> Self {
        match s {
            Schedule::Delayed => RefreshSchedule::Delayed,
            Schedule::EveryJump => RefreshSchedule::EveryJump,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[command(flatten)]
    pub seq: SeqArgs,
    /// Interaction probability (ium, coupled).
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    /// Number of urns (ium) or balls added per step (multicolor, embedding).
    #[arg(long)]
    pub d: Option<u64>,
    /// Number of colors (multicolor, embedding).
    #[arg(long = "nc", default_value_t = 2)]
    pub nc: usize,
    /// Initial color counts (multicolor, embedding).
    #[arg(long, value_delimiter = ',')]
    pub a: Option<Vec<u64>>,
    /// Initial black counts per urn.
    #[arg(long, value_delimiter = ',')]
    pub b0: Option<Vec<u64>>,
    /// Initial red counts per urn.
    #[arg(long, value_delimiter = ',')]
    pub r0: Option<Vec<u64>>,
    /// Steps (sub-steps for sequential, jumps for embedding).
    #[arg(long)]
    pub steps: u64,
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,
    #[arg(long, value_enum, default_value_t = Schedule::Delayed)]
    pub schedule: Schedule,
}

#[derive(Debug, Args, Serialize)]
pub struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckWArgs {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: u64,
    /// Tail bound below which summability is declared.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedTestArgs {
    #[arg(long = "nc", default_value_t = 2)]
    pub nc: usize,
    #[arg(long, value_delimiter = ',')]
    pub a: Option<Vec<u64>>,
    #[arg(long, default_value_t = 2)]
    pub d: u64,
    #[command(flatten)]
    pub seq: SeqArgs,
    #[arg(long)]
    pub k: u64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Schedule::Delayed)]
    pub schedule: Schedule,
}

struct Ctx<'a> {
    cli: &'a Cli,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn format(&self, default: Format) -> Format {
        self.cli.format.unwrap_or(default)
    }

    fn emit(
        &mut self,
        command: &str,
        config: Value,
        format: Format,
        runtime: Option<f64>,
        data: &[u8],
    ) -> CliResult<()> {
        let e = Emission {
            command,
            config,
            seed: self.cli.seed,
            format,
            runtime_secs: runtime,
        };
        emit(self.cli.out.as_deref(), self.stdout, e, data)
    }
}

fn echo<T: Serialize>(args: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(args)?)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let mut ctx = Ctx { cli, stdout };
    match &cli.command {
        Command::Field(a) => field(&mut ctx, a),
        Command::Equilibria(a) => equilibria(&mut ctx, a),
        Command::Um(a) => um(&mut ctx, a),
        Command::Sm(a) => sm(&mut ctx, a),
        Command::Simulate(a) => simulate(&mut ctx, a),
        Command::Mc(a) => mc(&mut ctx, a),
        Command::Scan(a) => scan(&mut ctx, a),
        Command::CheckW(a) => check_w(&mut ctx, a),
        Command::EmbedTest(a) => embed_test(&mut ctx, a),
    }
}

fn field(ctx: &mut Ctx, a: &FieldArgs) -> CliResult<()> {
    let rows = sample_field(&ModelParams::new(a.m, a.p)?, a.resolution)?;
    let format = ctx.format(Format::Csv);
    let data = match format {
        Format::Csv => csv_bytes(|w| write_field_csv(&rows, w))?,
        Format::Json => json_bytes(&rows)?,
    };
    ctx.emit("field", echo(a)?, format, None, &data)
}

fn equilibria(ctx: &mut Ctx, a: &EquilibriaArgs) -> CliResult<()> {
    let scan = scan_equilibria(&ModelParams::new(a.m, a.p)?, a.grid, a.tol)?;
    let format = ctx.format(Format::Csv);
    let data = match format {
        Format::Csv => csv_bytes(|w| write_equilibria_csv(&scan.equilibria, w))?,
        Format::Json => json_bytes(&scan)?,
    };
    ctx.emit("equilibria", echo(a)?, format, None, &data)
}

fn um(ctx: &mut Ctx, a: &UmArgs) -> CliResult<()> {
    let s = um_stability_margin(&ModelParams::new(a.m, a.p)?)?;
    if !s.agree {
        return Err(CliError::Condition(format!(
            "stability margin {} disagrees with the threshold form (u = {}, rhs = {})",
            s.margin, s.u, s.rhs
        )));
    }
    let format = ctx.format(Format::Json);
    let data = match format {
        Format::Csv => format!(
            "m,p,u_m,lambda_plus,threshold\n{},{},{},{},{}\n",
            a.m,
            fmt_f64(a.p),
            fmt_f64(s.u),
            fmt_f64(s.margin),
            fmt_f64(s.rhs)
        )
        .into_bytes(),
        Format::Json => json_bytes(&json!({
            "m": a.m,
            "p": a.p,
            "u_m": s.u,
            "point": [s.u, 1.0 - s.u],
            "lambda_plus": s.margin,
            "strictly_stable": s.margin < 0.0,
            "threshold": s.rhs,
        }))?,
    };
    ctx.emit("um", echo(a)?, format, None, &data)
}

fn sm(ctx: &mut Ctx, a: &SmArgs) -> CliResult<()> {
    let e = solve_sm(&ModelParams::new(a.m, a.p)?, a.delta)?;
    let format = ctx.format(Format::Json);
    let data = match format {
        Format::Csv => csv_bytes(|w| write_equilibria_csv(&[e], w))?,
        Format::Json => json_bytes(&e)?,
    };
    ctx.emit("sm", echo(a)?, format, None, &data)
}

fn trajectory_bytes(t: &Trajectory, format: Format) -> CliResult<Vec<u8>> {
    match format {
        Format::Csv => csv_bytes(|w| t.write_counts_csv(w)),
        Format::Json => json_bytes(t),
    }
}

fn pair(v: &Option<Vec<u64>>, name: &str) -> CoreResult<[u64; 2]> {
    match v.as_deref() {
        None => Ok([1, 1]),
        Some([x, y]) => Ok([*x, *y]),
        Some(_) => Err(UrnError::InvalidArgument(format!(
            "--{name} needs exactly two counts"
        ))),
    }
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> CliResult<()> {
    let seq = Arc::new(a.seq.load()?);
    let seed = ctx.cli.seed.unwrap_or(0);
    let format = ctx.format(Format::Csv);
    let ones = |n: usize| vec![1u64; n];
    let data = match a.model {
        ModelKind::Ium => {
            let d = a.d.unwrap_or(2) as usize;
            let b0 = a.b0.clone().unwrap_or_else(|| ones(d));
            let r0 = a.r0.clone().unwrap_or_else(|| ones(d));
            let mut s = UrnState::init(d, &b0, &r0, a.p, seq, seed)?;
            trajectory_bytes(&run(&mut s, a.steps, a.record_every)?, format)?
        }
        ModelKind::Multicolor => {
            let init = a.a.clone().unwrap_or_else(|| ones(a.nc));
            let mut s = MultiColorState::init(a.nc, &init, a.d.unwrap_or(1), seq, seed)?;
            trajectory_bytes(&run(&mut s, a.steps, a.record_every)?, format)?
        }
        ModelKind::Sequential => {
            let mut s = SequentialState::init(pair(&a.b0, "b0")?, pair(&a.r0, "r0")?, seq, seed)?;
            trajectory_bytes(&run(&mut s, a.steps, a.record_every)?, format)?
        }
        ModelKind::Embedding => {
            let init = a.a.clone().unwrap_or_else(|| ones(a.nc));
            let mut s = EmbeddingState::with_options(
                a.nc,
                &init,
                a.d.unwrap_or(1),
                seq,
                seed,
                a.schedule.into(),
                false,
            )?;
            trajectory_bytes(&run(&mut s, a.steps, a.record_every)?, format)?
        }
        ModelKind::Coupled => {
            let c = run_coupled(
                pair(&a.b0, "b0")?,
                pair(&a.r0, "r0")?,
                a.p,
                seq,
                seed,
                a.steps,
                a.record_every,
            )?;
            let data = match format {
                Format::Csv => csv_bytes(|w| c.write_csv(w))?,
                Format::Json => json_bytes(&c)?,
            };
            if c.violations > 0 {
                ctx.emit("simulate", echo(a)?, format, None, &data)?;
                return Err(CliError::Condition(format!(
                    "{} coupling violations",
                    c.violations
                )));
            }
            data
        }
    };
    ctx.emit("simulate", echo(a)?, format, None, &data)
}

fn mc(ctx: &mut Ctx, a: &ConfigArgs) -> CliResult<()> {
    let mut cfg = EnsembleConfig::from_json(&read(&a.config)?)?;
    if let Some(seed) = ctx.cli.seed {
        cfg.seed = seed;
    }
    let mut report = run_ensemble(&cfg)?;
    let runtime = report.runtime_secs.take();
    let format = ctx.format(Format::Json);
    let data = match format {
        Format::Csv => csv_bytes(|w| report.write_runs_csv(w))?,
        Format::Json => json_bytes(&report)?,
    };
    ctx.emit("mc", echo(&cfg)?, format, runtime, &data)
}

fn scan(ctx: &mut Ctx, a: &ConfigArgs) -> CliResult<()> {
    let mut cfg = ScanConfig::from_json(&read(&a.config)?)?;
    if let Some(seed) = ctx.cli.seed {
        cfg.base.seed = seed;
    }
    let start = std::time::Instant::now();
    let curve = run_scan(&cfg)?;
    let format = ctx.format(Format::Csv);
    let data = match format {
        Format::Csv => csv_bytes(|w| curve.write_csv(w))?,
        Format::Json => json_bytes(&curve)?,
    };
    ctx.emit(
        "scan",
        echo(&cfg)?,
        format,
        Some(start.elapsed().as_secs_f64()),
        &data,
    )
}

fn read(path: &Path) -> CliResult<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn verdict_value(v: CoreResult<ConditionVerdict>) -> CliResult<Value> {
    match v {
        Ok(v) => Ok(serde_json::to_value(v)?),
        Err(UrnError::InvalidArgument(msg)) => Ok(json!({ "error": msg })),
        Err(e) => Err(e.into()),
    }
}

fn check_w(ctx: &mut Ctx, a: &CheckWArgs) -> CliResult<()> {
    let seq = a.seq.load()?;
    let strong = check_strong(&seq, a.horizon, a.tol)?;
    let variation = verdict_value(check_variation_bound(&seq, a.horizon))?;
    let remainder = verdict_value(check_remainder_bound(&seq, a.horizon))?;
    let (rem_ratio, squared_rem_ratio) =
        match check_mdrem_conditions(&seq, a.horizon, &MdremOptions::default()) {
            Ok((r, s)) => (serde_json::to_value(r)?, serde_json::to_value(s)?),
            Err(UrnError::InvalidArgument(msg)) => {
                (json!({ "error": msg }), json!({ "error": msg }))
            }
            Err(e) => return Err(e.into()),
        };
    let verdicts = json!({
        "strong": strong,
        "variation_bound": variation,
        "remainder_bound": remainder,
        "rem_ratio": rem_ratio,
        "squared_rem_ratio": squared_rem_ratio,
    });
    let format = ctx.format(Format::Json);
    let data = match format {
        Format::Json => json_bytes(&verdicts)?,
        Format::Csv => {
            let mut s = String::from("condition,verdict,estimate\n");
            for key in [
                "strong",
                "variation_bound",
                "remainder_bound",
                "rem_ratio",
                "squared_rem_ratio",
            ] {
                let v = &verdicts[key];
                let verdict = v["verdict"].as_str().unwrap_or("error");
                let estimate = v["estimate"].as_f64().map(fmt_f64).unwrap_or_default();
                s.push_str(&format!("{key},{verdict},{estimate}\n"));
            }
            s.into_bytes()
        }
    };
    ctx.emit("check-w", echo(a)?, format, None, &data)
}

fn embed_test(ctx: &mut Ctx, a: &EmbedTestArgs) -> CliResult<()> {
    let seq = Arc::new(a.seq.load()?);
    let init = a.a.clone().unwrap_or_else(|| vec![1; a.nc]);
    let seed = ctx.cli.seed.unwrap_or(0);
    if a.samples < urnfield::ctime::MIN_SAMPLES {
        return Err(UrnError::InvalidArgument(format!(
            "samples must be at least {}",
            urnfield::ctime::MIN_SAMPLES
        ))
        .into());
    }
    let e = sample_embedded(
        a.nc,
        &init,
        a.d,
        &seq,
        derive_seed(seed, 0),
        a.samples,
        &[a.k],
        a.schedule.into(),
    )?;
    let u = sample_discrete(
        a.nc,
        &init,
        a.d,
        &seq,
        derive_seed(seed, 1),
        a.samples,
        &[a.k],
    )?;
    let report: TestReport = compare_laws(&e.by_k[0], &u.by_k[0])?;
    let format = ctx.format(Format::Json);
    let data = match format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => format!(
            "method,statistic,dof,p_value,n_a,n_b\n{:?},{},{},{},{},{}\n",
            report.method,
            fmt_f64(report.statistic),
            report.dof.map(|d| d.to_string()).unwrap_or_default(),
            fmt_f64(report.p_value),
            report.n_a,
            report.n_b
        )
        .into_bytes(),
    };
    ctx.emit("embed-test", echo(a)?, format, None, &data)
}
