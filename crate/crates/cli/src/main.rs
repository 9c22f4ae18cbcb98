//! `msid`: subspace identification workflows over segmented data archives.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use msid::modelio::ModelFile;
use msid::report::{DiagnosticsFile, IdentifiabilityJson, ValidationJson};
use msid::{csvio, modelio, report, selection, specio, FormatError};
use msid_core::{
    build_hankel, build_multirecord, check_identifiability, data_pair_count, fit, fit_unchecked,
    greedy_select, markov_distance, predict_validate, predict_validate_bounded,
    regression_windows, Archive, ColumnSelection, Error as CoreError, GreedyStep,
    IdentifiabilityReport, RankConfig, RankMode,
};

#[derive(Parser)]
#[command(
    name = "msid",
    version,
    about = "Multi-record subspace identification toolkit",
    long_about = "Assembles data matrices from archives of non-contiguous input/output \
records, tests whether the records are collectively identifiable, fits a minimal \
state-space model with per-segment initial states, and validates models on held-out \
records.",
    after_help = "Exit codes: 0 success; 1 usage or file errors; 2 identifiability \
failure (the violated condition is named); 3 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic archive from a generator spec and write it as CSV
    Generate(GenerateArgs),
    /// Inventory an archive: record lengths, window counts, standalone verdicts
    Scan(ScanArgs),
    /// Test collective identifiability of a window selection
    Check(CheckArgs),
    /// Grow a window selection greedily and write it to a file
    Select(SelectArgs),
    /// Estimate a state-space model from a window selection
    Fit(FitArgs),
    /// Replay a fitted model against one record and score prediction error
    Validate(ValidateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RankModeArg {
    /// Count singular values above the tolerance floor.
    Threshold,
    /// Cut at the first large adjacent gap (for noisy spectra).
    Gap,
}

#[derive(Args)]
struct RankOpts {
    /// Relative singular-value tolerance for rank decisions
    #[arg(long, default_value_t = 1e-8, value_name = "TOL")]
    rank_tol: f64,
    /// Absolute singular-value floor added to the relative tolerance
    #[arg(long, default_value_t = 0.0, value_name = "TOL")]
    rank_abs_tol: f64,
    /// How numerical rank is read off a spectrum
    #[arg(long, value_enum, default_value_t = RankModeArg::Threshold)]
    rank_mode: RankModeArg,
    /// Adjacent ratio treated as a rank gap in gap mode
    #[arg(long, default_value_t = RankMode::DEFAULT_GAP_RATIO, value_name = "RATIO")]
    gap_ratio: f64,
    /// Known maximal lag of the system; the depth must exceed it
    /// (defaults to the model order)
    #[arg(long, value_name = "LAG")]
    known_lag: Option<usize>,
}

impl RankOpts {
    fn to_config(&self) -> RankConfig {
        let mode = match self.rank_mode {
            RankModeArg::Threshold => RankMode::Threshold,
            RankModeArg::Gap => RankMode::Gap {
                ratio: self.gap_ratio,
            },
        };
        RankConfig {
            rel_tol: self.rank_tol,
            abs_tol: self.rank_abs_tol,
            known_lag: self.known_lag,
            mode,
        }
    }
}

/// Exactly one of `--select FILE` or `--greedy`.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct SelectionOpts {
    /// Selection file of record_id,offset,count lines
    #[arg(long, value_name = "FILE")]
    select: Option<PathBuf>,
    /// Grow the selection greedily in archive order instead
    #[arg(long)]
    greedy: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator spec JSON
    #[arg(long, value_name = "JSON")]
    spec: PathBuf,
    /// Output archive CSV
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Override the generator spec's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScanArgs {
    /// Archive CSV
    #[arg(long, value_name = "CSV")]
    archive: PathBuf,
    /// Block-row depth of the data matrices
    #[arg(long)]
    ell: usize,
    /// Model order to test against
    #[arg(long)]
    order: usize,
    #[command(flatten)]
    rank: RankOpts,
    /// Remove per-channel means at ingestion
    #[arg(long)]
    center: bool,
    /// Emit the report as JSON on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Archive CSV
    #[arg(long, value_name = "CSV")]
    archive: PathBuf,
    /// Block-row depth of the data matrices
    #[arg(long)]
    ell: usize,
    /// Model order to test against
    #[arg(long)]
    order: usize,
    #[command(flatten)]
    selection: SelectionOpts,
    /// Offset step between greedy windows within a record
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    rank: RankOpts,
    /// Remove per-channel means at ingestion
    #[arg(long)]
    center: bool,
    /// Emit the report as JSON on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Archive CSV
    #[arg(long, value_name = "CSV")]
    archive: PathBuf,
    /// Block-row depth of the data matrices
    #[arg(long)]
    ell: usize,
    /// Model order to test against
    #[arg(long)]
    order: usize,
    /// Output selection file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Offset step between windows within a record
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    rank: RankOpts,
    /// Remove per-channel means at ingestion
    #[arg(long)]
    center: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Archive CSV
    #[arg(long, value_name = "CSV")]
    archive: PathBuf,
    /// Block-row depth of the data matrices
    #[arg(long)]
    ell: usize,
    /// Model order to fit
    #[arg(long)]
    order: usize,
    #[command(flatten)]
    selection: SelectionOpts,
    /// Output model JSON
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    /// Diagnostics JSON path (default: model path with .diagnostics.json)
    #[arg(long, value_name = "JSON")]
    diagnostics: Option<PathBuf>,
    /// Singular-value CSV path (default: model path with .sv.csv)
    #[arg(long, value_name = "CSV")]
    sv_out: Option<PathBuf>,
    /// Fit even when the identifiability gate fails (prominent warning)
    #[arg(long)]
    force: bool,
    /// Offset step between greedy windows within a record
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    rank: RankOpts,
    /// Remove per-channel means at ingestion
    #[arg(long)]
    center: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Fitted model JSON
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Archive CSV holding the validation record
    #[arg(long, value_name = "CSV")]
    archive: PathBuf,
    /// Id of the record to validate against
    #[arg(long, value_name = "ID")]
    record: String,
    /// Block-row depth used to size the initial-state window
    #[arg(long)]
    ell: Option<usize>,
    /// Samples used to estimate the record's initial state
    /// (default: min(2*ell, record length))
    #[arg(long, value_name = "K")]
    x0_samples: Option<usize>,
    /// Score only the first K samples (required for unstable models)
    #[arg(long, value_name = "K")]
    horizon: Option<usize>,
    /// Reference model JSON; adds an impulse-response distance
    #[arg(long, value_name = "JSON")]
    truth: Option<PathBuf>,
    #[command(flatten)]
    rank: RankOpts,
    /// Remove per-channel means at ingestion
    #[arg(long)]
    center: bool,
    /// Emit the report as JSON on stdout
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    // Map argument errors to exit code 1; clap's default of 2 would
    // collide with the identifiability exit code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Check(args) => cmd_check(args),
        Command::Select(args) => cmd_select(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

/// 2 for identifiability failures (named condition), 3 for numerical
/// failures, 1 for everything else.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return code_for_core(core);
        }
        if let Some(FormatError::Core(core)) = cause.downcast_ref::<FormatError>() {
            return code_for_core(core);
        }
    }
    1
}

fn code_for_core(err: &CoreError) -> u8 {
    match err {
        CoreError::NotIdentifiable { .. } | CoreError::BlockRowsTooSmall { .. } => 2,
        CoreError::RankDeficient { .. }
        | CoreError::NonFinite { .. }
        | CoreError::IllConditioned { .. }
        | CoreError::UnstableModel { .. } => 3,
        _ => 1,
    }
}

fn load_archive(path: &Path, center: bool) -> Result<Archive, FormatError> {
    let archive = csvio::load_archive_csv_auto(path)?;
    Ok(if center { archive.centered() } else { archive })
}

/// The rank tests are conclusive only when the block-row depth exceeds
/// the known lag (or the order); enforced before any data is touched.
fn ensure_depth(ell: usize, order: usize, cfg: &RankConfig) -> anyhow::Result<()> {
    cfg.validate()?;
    let bound = cfg.block_row_bound(order);
    if ell <= bound {
        return Err(CoreError::BlockRowsTooSmall { ell, bound }.into());
    }
    Ok(())
}

fn resolve_selection(
    archive: &Archive,
    opts: &SelectionOpts,
    order: usize,
    ell: usize,
    stride: usize,
    cfg: &RankConfig,
) -> anyhow::Result<ColumnSelection> {
    if let Some(path) = &opts.select {
        return Ok(ColumnSelection::new(selection::read_selection(path)?));
    }
    let (sel, steps) = greedy_select(archive, order, ell, stride, cfg)?;
    print_greedy_trail(&steps);
    if sel.is_empty() {
        bail!("greedy selection found no usable window in the archive");
    }
    Ok(sel)
}

fn print_greedy_trail(steps: &[GreedyStep]) {
    for step in steps {
        match (&step.report, step.accepted) {
            (None, _) => println!("greedy: record {} too short, skipped", step.record_id),
            (Some(r), true) => println!(
                "greedy: record {} kept (+{} windows) -> rank U {}/{}, rank [U;Y] {}/{}{}",
                step.record_id,
                step.windows,
                r.rank_u,
                r.required_rank_u,
                r.rank_w,
                r.required_rank_w,
                if r.pass { ", pass" } else { "" },
            ),
            (Some(_), false) => {
                println!("greedy: record {} skipped (no rank gain)", step.record_id)
            }
        }
    }
}

fn fmt_spectrum(sv: &[f64]) -> String {
    sv.iter()
        .map(|v| format!("{v:.3e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_identifiability(r: &IdentifiabilityReport, pairs: usize) {
    println!("columns     {} (need >= {})", r.columns, r.required_rank_w);
    println!("data pairs  {pairs}");
    println!(
        "rank U      {} (require {})  sv: {}",
        r.rank_u,
        r.required_rank_u,
        fmt_spectrum(&r.sv_u)
    );
    println!(
        "rank [U;Y]  {} (require {})  sv: {}",
        r.rank_w,
        r.required_rank_w,
        fmt_spectrum(&r.sv_w)
    );
    println!("verdict     {}", r.failure_summary());
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<u8> {
    let file = specio::read_generator_spec(&args.spec)?;
    let mut spec = file.to_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let archive = msid_core::generate(&spec)?;
    csvio::write_archive_csv(&args.out, &archive)?;
    println!(
        "wrote {} records, {} samples ({} inputs, {} outputs, seed {}) to {}",
        archive.len(),
        archive.total_samples(),
        archive.input_dim(),
        archive.output_dim(),
        spec.seed,
        args.out.display()
    );
    Ok(0)
}

#[derive(serde::Serialize)]
struct ScanRow {
    record: String,
    length: usize,
    windows: usize,
    standalone: bool,
    verdict: String,
}

fn cmd_scan(args: ScanArgs) -> anyhow::Result<u8> {
    let cfg = args.rank.to_config();
    ensure_depth(args.ell, args.order, &cfg)?;
    let archive = load_archive(&args.archive, args.center)?;
    let mut rows = Vec::with_capacity(archive.len());
    for rec in archive.records() {
        let windows = if rec.len() >= args.ell {
            rec.len() - args.ell + 1
        } else {
            0
        };
        let (standalone, verdict) = if windows == 0 {
            (
                false,
                format!("too short ({} samples < ell = {})", rec.len(), args.ell),
            )
        } else {
            let data = build_hankel(rec, args.ell, windows)?;
            let report = check_identifiability(&data, args.order, &cfg)?;
            let verdict = if report.pass {
                "identifiable alone".to_string()
            } else {
                report.failure_summary()
            };
            (report.pass, verdict)
        };
        rows.push(ScanRow {
            record: rec.id().to_string(),
            length: rec.len(),
            windows,
            standalone,
            verdict,
        });
    }
    if args.json {
        print!("{}", report::to_json_string(&rows));
    } else {
        let idw = rows
            .iter()
            .map(|r| r.record.len())
            .max()
            .unwrap_or(0)
            .max("record".len());
        println!("{:<idw$}  {:>7}  {:>7}  standalone", "record", "length", "windows");
        for row in &rows {
            println!(
                "{:<idw$}  {:>7}  {:>7}  {}",
                row.record, row.length, row.windows, row.verdict
            );
        }
        let passing = rows.iter().filter(|r| r.standalone).count();
        println!();
        println!(
            "{} of {} records are standalone identifiable at ell = {}, order = {}",
            passing,
            rows.len(),
            args.ell,
            args.order
        );
    }
    Ok(0)
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<u8> {
    let cfg = args.rank.to_config();
    ensure_depth(args.ell, args.order, &cfg)?;
    let archive = load_archive(&args.archive, args.center)?;
    let sel = resolve_selection(
        &archive,
        &args.selection,
        args.order,
        args.ell,
        args.stride,
        &cfg,
    )?;
    let data = build_multirecord(&archive, &sel, args.ell)?;
    let report = check_identifiability(&data, args.order, &cfg)?;
    let pairs = data_pair_count(&sel, args.ell);
    if args.json {
        print!("{}", report::to_json_string(&IdentifiabilityJson::from(&report)));
    } else {
        print_identifiability(&report, pairs);
    }
    Ok(if report.pass { 0 } else { 2 })
}

fn cmd_select(args: SelectArgs) -> anyhow::Result<u8> {
    let cfg = args.rank.to_config();
    ensure_depth(args.ell, args.order, &cfg)?;
    let archive = load_archive(&args.archive, args.center)?;
    let (sel, steps) = greedy_select(&archive, args.order, args.ell, args.stride, &cfg)?;
    print_greedy_trail(&steps);
    if sel.is_empty() {
        eprintln!("no record offered a usable window; nothing written");
        return Ok(2);
    }
    let data = build_multirecord(&archive, &sel, args.ell)?;
    let report = check_identifiability(&data, args.order, &cfg)?;
    selection::write_selection(&args.out, &sel.entries)?;
    println!(
        "wrote {} entries ({} windows) to {}",
        sel.entries.len(),
        sel.total_columns(),
        args.out.display()
    );
    if report.pass {
        println!("selection is identifiable at order {}", args.order);
        Ok(0)
    } else {
        println!("selection does NOT pass: {}", report.failure_summary());
        Ok(2)
    }
}

fn cmd_fit(args: FitArgs) -> anyhow::Result<u8> {
    let cfg = args.rank.to_config();
    ensure_depth(args.ell, args.order, &cfg)?;
    let archive = load_archive(&args.archive, args.center)?;
    let sel = resolve_selection(
        &archive,
        &args.selection,
        args.order,
        args.ell,
        args.stride,
        &cfg,
    )?;
    let data = build_multirecord(&archive, &sel, args.ell)?;
    let windows = regression_windows(&archive, &sel, args.ell)?;
    let result = if args.force {
        fit_unchecked(&data, &windows, args.order, &cfg)?
    } else {
        fit(&data, &windows, args.order, &cfg)?
    };
    if !result.identifiability.pass {
        eprintln!(
            "warning: identifiability gate FAILED: {}",
            result.identifiability.failure_summary()
        );
        eprintln!("warning: fitting anyway (--force); the model may not be unique");
    }
    let model_file = ModelFile::from_model(&result.model, &result.initial_states);
    modelio::write_model(&args.out, &model_file)?;
    let diag_path = args
        .diagnostics
        .clone()
        .unwrap_or_else(|| args.out.with_extension("diagnostics.json"));
    report::write_json(&diag_path, &DiagnosticsFile::from(&result))?;
    let sv_path = args
        .sv_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("sv.csv"));
    report::write_singular_values_csv(
        &sv_path,
        &[
            ("input", result.identifiability.sv_u.as_slice()),
            ("stacked", result.identifiability.sv_w.as_slice()),
            ("projected", result.sv_projected.as_slice()),
            ("regressor", result.regressor_singular_values.as_slice()),
        ],
    )?;
    println!(
        "order {} model from {} windows in {} merged spans (ell = {})",
        args.order,
        data.columns(),
        windows.len(),
        args.ell
    );
    println!(
        "  identifiability: {}",
        result.identifiability.failure_summary()
    );
    println!(
        "  regressor {}x{}, condition {:.3e}, residual {:.3e}",
        result.regressor_shape.0,
        result.regressor_shape.1,
        result.regressor_condition,
        result.residual_norm
    );
    println!(
        "  spectral radius {:.6} ({})",
        result.model.spectral_radius(),
        if result.stable { "stable" } else { "UNSTABLE" }
    );
    println!("  model -> {}", args.out.display());
    println!("  diagnostics -> {}", diag_path.display());
    println!("  singular values -> {}", sv_path.display());
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<u8> {
    let cfg = args.rank.to_config();
    cfg.validate()?;
    let model_file = modelio::read_model(&args.model)?;
    let model = model_file.to_model()?;
    let archive = load_archive(&args.archive, args.center)?;
    let record = archive.get(&args.record).ok_or(CoreError::UnknownRecord {
        record_id: args.record.clone(),
    })?;
    let n = model.state_dim();
    let default_window = 2 * args.ell.unwrap_or(n + 1);
    let x0_samples = args
        .x0_samples
        .unwrap_or_else(|| default_window.min(record.len()));
    let mut rep = match args.horizon {
        Some(h) => predict_validate_bounded(&model, record, x0_samples, h, &cfg)?,
        None => predict_validate(&model, record, x0_samples, &cfg)?,
    };
    if let Some(truth_path) = &args.truth {
        let truth = modelio::read_model(truth_path)?.to_model()?;
        let count = 4 * truth.state_dim().max(n).max(1);
        rep.markov_distance = Some(markov_distance(&truth, &model, count)?);
    }
    if args.json {
        print!("{}", report::to_json_string(&ValidationJson::from(&rep)));
    } else {
        println!(
            "record {}: horizon {} samples, initial state fitted on {}",
            rep.record_id, rep.horizon, rep.x0_samples
        );
        println!("{:<9}  {:>12}  {:>12}", "channel", "rms", "rms x 10^2");
        for (i, rms) in rep.per_channel_rms.iter().enumerate() {
            println!(
                "y{:<8}  {:>12.6e}  {:>12.4}",
                i + 1,
                rms,
                rms * 100.0
            );
        }
        let x0: Vec<String> = rep
            .estimated_initial_state
            .iter()
            .map(|v| format!("{v:.4e}"))
            .collect();
        println!("estimated initial state: [{}]", x0.join(", "));
        if let Some(d) = rep.markov_distance {
            println!("markov distance to reference: {d:.4e}");
        }
    }
    Ok(0)
}
