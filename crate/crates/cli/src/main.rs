mod args;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde::de::DeserializeOwned;

use args::{
    Cli, Command, Common, ContentionArgs, FrameArgs, GridArgs, HarvestArgs, KindArg, SweepArgs,
    TsookArgs,
};
use nanomac_core::experiments::{
    self, contention_compare, find_crossovers, harvest_curve_experiment, oracle_grid_check,
    svg_line_plot, tsook_trace, write_point_ledgers, ContentionSpec, ExperimentError, HarvestSpec,
    PointResult, Series, SweepOptions, SweepSpec, Table, TsookSpec,
};
use nanomac_core::frames::{encode_frame, hex_dump, CommandId, MacFrame, ShortAddress};
use nanomac_core::mac::{
    build_beacon, BackoffConfig, CoordinatorState, SlotAccess, SuperframeConfig,
};
use nanomac_core::sim::Event;
use nanomac_core::{EnergyStore, HarvestConfig};

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{flag}: {msg}"))
}

fn flag_for(field: &str) -> &'static str {
    match field {
        "durations" => "--durations",
        "concurrent_slots" => "--slots",
        "packet_scales" => "--scales",
        "superframes_per_point" => "--superframes",
        "harvest_rate_pj_per_min" => "--harvest-rate",
        "slot_access" => "--contention",
        "population" => "--population",
        "request_rates" => "--rates",
        "trials_per_rate" => "--trials",
        "backoff" => "--backoff-exponent",
        "frequencies_hz" => "--frequencies",
        "horizon_s" => "--horizon",
        "sample_step_s" => "--step",
        "sequences" => "--sequences",
        "start_offsets_fs" => "--offsets",
        "distance_mm" => "--distance-mm",
        _ => "--config",
    }
}

fn check(result: Result<(), ExperimentError>) -> Result<(), Failure> {
    match result {
        Ok(()) => Ok(()),
        Err(ExperimentError::InvalidSpec { field, reason }) => Err(usage(flag_for(field), reason)),
        Err(e) => Err(Failure::Runtime(e.into())),
    }
}

/// Parameters from `--config`, or defaults; also reports whether the file
/// set a seed.
fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<(T, bool), Failure> {
    let Some(path) = path else {
        return Ok((T::default(), false));
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage("--config", format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| usage("--config", format!("{}: {e}", path.display())))?;
    let has_seed = value.get("seed").is_some();
    let spec = serde_json::from_value(value)
        .map_err(|e| usage("--config", format!("{}: {e}", path.display())))?;
    Ok((spec, has_seed))
}

fn required_seed(common: &Common, from_config: Option<u64>) -> Result<u64, Failure> {
    common
        .seed
        .or(from_config)
        .ok_or_else(|| usage("--seed", "required (or set \"seed\" in the --config file)"))
}

struct Outputs {
    dir: PathBuf,
    stem: String,
}

impl Outputs {
    fn new(common: &Common, subcommand: &str, seed: u64) -> anyhow::Result<Self> {
        fs::create_dir_all(&common.output_dir)
            .with_context(|| format!("creating {}", common.output_dir.display()))?;
        Ok(Self {
            dir: common.output_dir.clone(),
            stem: format!("{subcommand}-{seed}"),
        })
    }

    fn write(&self, suffix: &str, contents: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(format!("{}{suffix}", self.stem));
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
        Ok(())
    }

    fn csv(&self, table: &Table) -> anyhow::Result<()> {
        self.write(".csv", table.to_csv_string().as_bytes())
    }

    fn trace(&self, events: &[Event]) -> anyhow::Result<()> {
        let mut text = String::from("time_fs,seq,kind,target\n");
        for e in events {
            let _ = writeln!(text, "{e}");
        }
        self.write(".trace", text.as_bytes())
    }

    fn svg(&self, svg: &str) -> anyhow::Result<()> {
        self.write(".svg", svg.as_bytes())
    }
}

fn harvest_curve(a: HarvestArgs) -> Result<(), Failure> {
    let (mut spec, _) = load::<HarvestSpec>(a.common.config.as_deref())?;
    if let Some(f) = a.frequencies {
        spec.frequencies_hz = f;
    }
    if let Some(h) = a.horizon {
        spec.horizon_s = h;
    }
    if let Some(s) = a.step {
        spec.sample_step_s = s;
    }
    check(spec.validate())?;
    let out = Outputs::new(&a.common, "harvest-curve", a.common.seed.unwrap_or(0))?;
    let (table, trace) = harvest_curve_experiment(&spec).map_err(anyhow::Error::from)?;
    out.csv(&table)?;
    if a.trace {
        out.trace(&trace)?;
    }
    if a.svg {
        let series: Vec<Series> = (1..table.header.len())
            .map(|c| Series {
                label: table.header[c].clone(),
                points: table.rows.iter().map(|r| (r[0], r[c])).collect(),
            })
            .collect();
        out.svg(&svg_line_plot(
            "Capacitor charge",
            "time (s)",
            "energy (pJ)",
            &series,
        ))?;
    }
    Ok(())
}

fn sweep_spec(g: &GridArgs) -> Result<SweepSpec, Failure> {
    let (mut spec, has_seed) = load::<SweepSpec>(g.common.config.as_deref())?;
    if let Some(d) = &g.durations {
        spec.durations = d.clone();
    }
    if let Some(m) = &g.slots {
        spec.concurrent_slots = m.clone();
    }
    if let Some(s) = &g.scales {
        spec.packet_scales = s.clone();
    }
    if let Some(n) = g.superframes {
        spec.superframes_per_point = n;
    }
    if let Some(r) = g.harvest_rate {
        spec.harvest_rate_pj_per_min = r;
    }
    if let Some(be) = g.contention {
        spec.slot_access = SlotAccess::Contention(BackoffConfig {
            backoff_exponent: be,
        });
    }
    spec.seed = required_seed(&g.common, has_seed.then_some(spec.seed))?;
    check(spec.validate())?;
    Ok(spec)
}

fn write_sweep_extras(out: &Outputs, a: &SweepArgs, results: &[PointResult]) -> anyhow::Result<()> {
    if a.trace {
        let events: Vec<Event> = results
            .iter()
            .flat_map(|r| r.trace.iter().copied())
            .collect();
        out.trace(&events)?;
    }
    if a.ledger {
        let mut buf = Vec::new();
        write_point_ledgers(&mut buf, results)?;
        out.write("-ledger.csv", &buf)?;
    }
    Ok(())
}

/// One line per group of points sharing everything but the slot count.
fn rate_series(results: &[PointResult], label: impl Fn(&PointResult) -> String) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for r in results {
        let name = label(r);
        let point = (r.point.m as f64, r.success_rate());
        match series.iter_mut().find(|s| s.label == name) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label: name,
                points: vec![point],
            }),
        }
    }
    series
}

fn duration_sweep(a: SweepArgs) -> Result<(), Failure> {
    let spec = sweep_spec(&a.grid)?;
    let out = Outputs::new(&a.grid.common, "duration-sweep", spec.seed)?;
    let options = SweepOptions {
        keep_ledger: a.ledger,
        keep_trace: a.trace,
    };
    let (table, results) =
        experiments::duration_sweep(&spec, options).map_err(anyhow::Error::from)?;
    out.csv(&table)?;
    write_sweep_extras(&out, &a, &results)?;
    if a.svg {
        let series = rate_series(&results, |r| format!("{} min", r.point.duration_minutes));
        out.svg(&svg_line_plot(
            "Completion rate by interval",
            "concurrent slots",
            "success rate",
            &series,
        ))?;
    }
    Ok(())
}

fn packet_size_sweep(a: SweepArgs) -> Result<(), Failure> {
    let spec = sweep_spec(&a.grid)?;
    let out = Outputs::new(&a.grid.common, "packet-size-sweep", spec.seed)?;
    let options = SweepOptions {
        keep_ledger: a.ledger,
        keep_trace: a.trace,
    };
    let (table, results) =
        experiments::packet_size_sweep(&spec, options).map_err(anyhow::Error::from)?;
    out.csv(&table)?;
    write_sweep_extras(&out, &a, &results)?;
    if a.svg {
        let series = rate_series(&results, |r| {
            format!(
                "{} min x{}",
                r.point.duration_minutes,
                experiments::format_sig(r.point.packet_scale)
            )
        });
        out.svg(&svg_line_plot(
            "Completion rate by packet scale",
            "concurrent slots",
            "success rate",
            &series,
        ))?;
    }
    Ok(())
}

fn oracle_check(g: GridArgs) -> Result<(), Failure> {
    let spec = sweep_spec(&g)?;
    let out = Outputs::new(&g.common, "oracle-check", spec.seed)?;
    let report = oracle_grid_check(&spec).map_err(anyhow::Error::from)?;
    out.csv(&report.table)?;
    println!(
        "max deviation {} at duration {} min, scale {}, m {}",
        experiments::format_sig(report.max_deviation),
        report.worst.duration_minutes,
        experiments::format_sig(report.worst.packet_scale),
        report.worst.m
    );
    Ok(())
}

fn contention(a: ContentionArgs) -> Result<(), Failure> {
    let (mut spec, has_seed) = load::<ContentionSpec>(a.common.config.as_deref())?;
    if let Some(n) = a.population {
        spec.population = n;
    }
    if let Some(r) = a.rates {
        spec.request_rates = r;
    }
    if let Some(t) = a.trials {
        spec.trials_per_rate = t;
    }
    if let Some(be) = a.backoff_exponent {
        spec.backoff = BackoffConfig {
            backoff_exponent: be,
        };
    }
    spec.seed = required_seed(&a.common, has_seed.then_some(spec.seed))?;
    check(spec.validate())?;
    let out = Outputs::new(&a.common, "contention-compare", spec.seed)?;
    let (table, rows) = contention_compare(&spec).map_err(anyhow::Error::from)?;
    out.csv(&table)?;
    let crossings: Vec<String> = find_crossovers(&rows)
        .into_iter()
        .map(experiments::format_sig)
        .collect();
    println!(
        "crossover at request rate {}",
        if crossings.is_empty() {
            "none".into()
        } else {
            crossings.join(", ")
        }
    );
    if a.svg {
        let series = vec![
            Series {
                label: "slotted CSMA/CA".into(),
                points: rows
                    .iter()
                    .map(|r| (r.request_rate, r.csma_usable_rate))
                    .collect(),
            },
            Series {
                label: "round robin".into(),
                points: rows
                    .iter()
                    .map(|r| (r.request_rate, r.rr_usable_rate))
                    .collect(),
            },
        ];
        out.svg(&svg_line_plot(
            "Usable slot rate",
            "slot request rate",
            "usable rate",
            &series,
        ))?;
    }
    Ok(())
}

fn tsook(a: TsookArgs) -> Result<(), Failure> {
    let (mut spec, _) = load::<TsookSpec>(a.common.config.as_deref())?;
    if let Some(s) = a.sequences {
        spec.sequences = s;
    }
    if let Some(o) = a.offsets {
        spec.start_offsets_fs = o;
    }
    if let Some(d) = a.distance_mm {
        spec.distance_mm = d;
    }
    let (table, collisions) = match tsook_trace(&spec) {
        Err(ExperimentError::InvalidSpec { field, reason }) => {
            return Err(usage(flag_for(field), reason))
        }
        other => other.map_err(anyhow::Error::from)?,
    };
    let out = Outputs::new(&a.common, "tsook-trace", a.common.seed.unwrap_or(0))?;
    out.csv(&table)?;
    println!("overlapping pulse pairs: {collisions}");
    Ok(())
}

fn frame(a: FrameArgs) -> Result<(), Failure> {
    let frame = match a.kind {
        KindArg::Beacon => {
            let mut c = CoordinatorState::new(
                ShortAddress(0),
                EnergyStore::coordinator(HarvestConfig::default()),
            );
            build_beacon(&mut c, &SuperframeConfig::default())
        }
        KindArg::Data => MacFrame::data(0, ShortAddress(1), ShortAddress(0), [0; 4]),
        KindArg::Ack => MacFrame::ack(0),
        KindArg::Command => MacFrame::command(
            0,
            ShortAddress(1),
            ShortAddress(0),
            CommandId::AssociationRequest,
            [0; 4],
        ),
    };
    let octets = encode_frame(&frame).map_err(anyhow::Error::from)?;
    let dump = hex_dump(&octets);
    print!("{dump}");
    if !dump.ends_with('\n') {
        println!();
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::HarvestCurve(a) => harvest_curve(a),
        Command::DurationSweep(a) => duration_sweep(a),
        Command::PacketSizeSweep(a) => packet_size_sweep(a),
        Command::ContentionCompare(a) => contention(a),
        Command::OracleCheck(a) => oracle_check(a.grid),
        Command::TsookTrace(a) => tsook(a),
        Command::Frame(a) => frame(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads: must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let name = cli.command.name();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {name}: {e:#}");
            ExitCode::from(1)
        }
    }
}
