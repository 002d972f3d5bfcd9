//! Command-line front end for the illumination-estimation library.
//!
//! Every command reads a dataset manifest (or, for `synth`, generates
//! one), runs library routines, and writes a CSV report bundle plus a
//! `run.json` metadata record under `--out`. Outputs are deterministic
//! for a fixed command line: the worker count changes wall time, never
//! bytes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error
//! (unreadable or inconsistent inputs), 4 degenerate result (the run
//! finished but produced nothing usable).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use illumest::dataset::{
    load_folds, load_manifest, synthesize_dataset, write_manifest, DatasetRecord, SyntheticSpec,
};
use illumest::report::{base_metadata, tuple_cell, ReportWriter};
use illumest::tuning::tune_green_stability_estimates;
use illumest::{
    build_grid, compute_estimates, correlation_experiment, cross_validate_evaluated,
    default_method_grids, evaluate_grid, summarize, tune_supervised, write_ppm16, DecodeOptions,
    DiskProvider, Error, ErrorSummary, FoldAssignment, IlluminantEstimate, LoadOptions, Method,
    ParameterGrid, ParameterTuple, Result,
};

#[derive(Parser)]
#[command(
    name = "illumest",
    version,
    about = "Statistics-based illumination estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator over every image in a manifest.
    Estimate(EstimateArgs),
    /// Supervised grid search for the lowest median angular error.
    Tune(TuneArgs),
    /// K-fold cross-validation of the supervised grid search.
    Crossval(CrossvalArgs),
    /// Unsupervised tuning that minimizes green-chromaticity spread.
    Greenstab(GreenstabArgs),
    /// Difference-pair correlation experiment with scatter data.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic diagonal-model dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Dataset manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for the report bundle.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Exclude pixels with any channel at or above this fraction of the
    /// white level.
    #[arg(long, default_value_t = 0.98)]
    saturation: f64,
    /// Exclude pixels with every channel at or below this intensity.
    #[arg(long, default_value_t = 0.0)]
    dark_level: f64,
    /// Override the white level inferred from the file format.
    #[arg(long)]
    white_level: Option<f64>,
}

impl IoArgs {
    fn load_options(&self) -> Result<LoadOptions> {
        if !(self.saturation > 0.0 && self.saturation <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "saturation must be in (0, 1], got {}",
                self.saturation
            )));
        }
        if !self.dark_level.is_finite() || self.dark_level < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dark level must be finite and >= 0, got {}",
                self.dark_level
            )));
        }
        if let Some(w) = self.white_level {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "white level must be positive and finite, got {w}"
                )));
            }
        }
        Ok(LoadOptions {
            decode: DecodeOptions {
                white_level_override: self.white_level,
            },
            saturation_fraction: self.saturation,
            dark_level: self.dark_level,
        })
    }

    fn push_meta(&self, meta: &mut Vec<(String, String)>) {
        meta.push(("manifest".into(), self.manifest.display().to_string()));
        meta.push(("saturation".into(), self.saturation.to_string()));
        meta.push(("dark_level".into(), self.dark_level.to_string()));
        if let Some(w) = self.white_level {
            meta.push(("white_level_override".into(), w.to_string()));
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// Derivative orders to sweep, e.g. "0,1,2".
    #[arg(long, default_value = "0,1,2")]
    n_values: String,
    /// Minkowski norms to sweep, e.g. "1..12,15,20,inf".
    #[arg(long, default_value = "1..12,15,20,inf")]
    p_values: String,
    /// Smoothing scales to sweep, e.g. "0,1,2,3,5,7,9".
    #[arg(long, default_value = "0,1,2,3,5,7,9")]
    sigma_values: String,
}

impl GridArgs {
    fn build(&self) -> Result<ParameterGrid> {
        build_grid(
            &parse_orders(&self.n_values)?,
            &parse_values(&self.p_values, true)?,
            &parse_values(&self.sigma_values, false)?,
        )
    }
}

#[derive(Args)]
struct MethodArgs {
    /// Parameter tuple, e.g. "n=1,p=6,sigma=2" ("p=inf" allowed).
    #[arg(long, conflicts_with_all = ["method", "p", "sigma"])]
    params: Option<String>,
    /// Named method: gray_world, white_patch, shades_of_gray,
    /// general_gray_world, gray_edge_1, or gray_edge_2.
    #[arg(long)]
    method: Option<String>,
    /// Minkowski norm for the named method ("inf" allowed).
    #[arg(long)]
    p: Option<String>,
    /// Smoothing scale for the named method.
    #[arg(long)]
    sigma: Option<f64>,
}

impl MethodArgs {
    fn tuple(&self) -> Result<ParameterTuple> {
        match (&self.params, &self.method) {
            (Some(spec), None) => spec.parse(),
            (None, Some(name)) => {
                let p = self.p.as_deref().map(parse_norm).transpose()?;
                Method::from_parts(name, p, self.sigma)?.params()
            }
            _ => Err(Error::InvalidParameter(
                "exactly one of --params or --method is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Fold file (`image_id,fold` CSV); defaults to the manifest's fold
    /// column.
    #[arg(long)]
    folds: Option<PathBuf>,
}

#[derive(Args)]
struct GreenstabArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Ground-truthed manifest on which to score the chosen tuple.
    #[arg(long)]
    eval_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Minkowski norms swept within each method family.
    #[arg(long, default_value = "1..12,15,20,inf")]
    p_values: String,
    /// Smoothing scales swept within each method family; 0 stays
    /// exclusive to shades-of-gray.
    #[arg(long, default_value = "0,1,2,3,5,7,9")]
    sigma_values: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for images, manifest.csv, and run.json.
    #[arg(long)]
    out: PathBuf,
    /// Number of images.
    #[arg(long, default_value_t = 40)]
    count: usize,
    /// Image width in pixels.
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Image height in pixels.
    #[arg(long, default_value_t = 48)]
    height: usize,
    /// Patches per image, "min,max" inclusive.
    #[arg(long, default_value = "4,12")]
    patches: String,
    /// Reflectance range, "lo,hi" within [0, 1].
    #[arg(long, default_value = "0.05,0.95")]
    reflectance: String,
    /// Illuminant mean chromaticity, "r,g".
    #[arg(long, default_value = "0.36,0.34")]
    illuminant_mean: String,
    /// Illuminant chromaticity spread, "sr,sg".
    #[arg(long, default_value = "0.05,0.01")]
    illuminant_spread: String,
    /// Additive Gaussian noise level in intensity units.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Generator seed; fixes the dataset bit for bit.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Round-robin fold count written to the manifest.
    #[arg(long, default_value_t = 3)]
    fold_count: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) => 2,
        Error::Io { .. }
        | Error::Decode { .. }
        | Error::UnsupportedFormat(_)
        | Error::InvalidImage(_)
        | Error::InvalidInput(_)
        | Error::Manifest { .. }
        | Error::Folds(_) => 3,
        Error::EmptyMask | Error::ZeroSignal | Error::Degenerate(_) => 4,
        Error::Record { source, .. } => exit_code(source),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => with_pool(args.io.workers, || cmd_estimate(&args)),
        Command::Tune(args) => with_pool(args.io.workers, || cmd_tune(&args)),
        Command::Crossval(args) => with_pool(args.io.workers, || cmd_crossval(&args)),
        Command::Greenstab(args) => with_pool(args.io.workers, || cmd_greenstab(&args)),
        Command::Analyze(args) => with_pool(args.io.workers, || cmd_analyze(&args)),
        Command::Synth(args) => cmd_synth(&args),
    }
}

/// Runs `f` inside a worker pool of the requested size. The pool bounds
/// parallelism only; results are identical for any size.
fn with_pool<F>(workers: Option<usize>, f: F) -> Result<()>
where
    F: FnOnce() -> Result<()> + Send,
{
    match workers {
        None => f(),
        Some(0) => Err(Error::InvalidParameter("workers must be >= 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(f),
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let tuple = args.method.tuple()?;
    let options = args.io.load_options()?;
    let records = load_manifest(&args.io.manifest)?;
    let provider = DiskProvider::new(&records, options);
    let grid = ParameterGrid::from_tuples(vec![tuple])?;
    let estimates = compute_estimates(&provider, &grid)?;
    let row = estimates.tuple_row(0);
    if row.iter().all(Option::is_none) {
        return Err(Error::Degenerate(
            "every image pooled to zero signal".into(),
        ));
    }

    let report = ReportWriter::create(&args.io.out)?;
    report.write_estimates(estimates.image_ids(), row)?;
    let mut meta = base_metadata("estimate");
    args.io.push_meta(&mut meta);
    meta.push(("tuple".into(), tuple_cell(&tuple)));
    meta.push(("images".into(), estimates.n_images().to_string()));
    meta.push((
        "zero_signal_images".into(),
        estimates.zero_signal_count(0).to_string(),
    ));
    report.write_metadata(&meta)?;
    Ok(())
}

fn cmd_tune(args: &TuneArgs) -> Result<()> {
    let grid = args.grid.build()?;
    let options = args.io.load_options()?;
    let records = load_manifest(&args.io.manifest)?;
    let gts = ground_truths(&records)?;
    let provider = DiskProvider::new(&records, options);
    let eval = evaluate_grid(&provider, &gts, &grid)?;
    let result = tune_supervised(&eval)?;

    let report = ReportWriter::create(&args.io.out)?;
    report.write_errors(&eval)?;
    report.write_tuning(&result)?;
    let chosen_errors = eval.tuple_errors(result.chosen_index);
    let rows = vec![(tuple_cell(&result.chosen), summarize(&chosen_errors)?)];
    report.write_summary(&rows)?;
    print_summaries(&rows);

    let mut meta = base_metadata("tune");
    args.io.push_meta(&mut meta);
    meta.push(("grid_size".into(), grid.len().to_string()));
    meta.push(("images".into(), eval.n_images().to_string()));
    meta.push(("criterion".into(), "median angular error, degrees".into()));
    meta.push(("chosen".into(), tuple_cell(&result.chosen)));
    meta.push(("criterion_value".into(), result.criterion_value.to_string()));
    report.write_metadata(&meta)?;
    Ok(())
}

fn cmd_crossval(args: &CrossvalArgs) -> Result<()> {
    let grid = args.grid.build()?;
    let options = args.io.load_options()?;
    let records = load_manifest(&args.io.manifest)?;
    let gts = ground_truths(&records)?;
    let folds = match &args.folds {
        Some(path) => {
            let ids: Vec<String> = records.iter().map(|r| r.image_id.clone()).collect();
            FoldAssignment::from_pairs(&load_folds(path)?, &ids)?
        }
        None => FoldAssignment::from_records(&records)?,
    };
    let provider = DiskProvider::new(&records, options);
    let eval = evaluate_grid(&provider, &gts, &grid)?;
    let run = cross_validate_evaluated(&eval, &folds)?;

    let report = ReportWriter::create(&args.io.out)?;
    report.write_errors(&eval)?;
    report.write_fold_choices(&run.fold_choices)?;
    let combined = run.combined();
    let rows = vec![("combined".to_string(), summarize(&combined)?)];
    report.write_summary(&rows)?;
    print_summaries(&rows);

    let mut meta = base_metadata("crossval");
    args.io.push_meta(&mut meta);
    meta.push(("grid_size".into(), grid.len().to_string()));
    meta.push(("images".into(), eval.n_images().to_string()));
    meta.push(("folds".into(), folds.k().to_string()));
    meta.push(("scored_images".into(), combined.len().to_string()));
    report.write_metadata(&meta)?;
    Ok(())
}

fn cmd_greenstab(args: &GreenstabArgs) -> Result<()> {
    let grid = args.grid.build()?;
    let options = args.io.load_options()?;
    let records = load_manifest(&args.io.manifest)?;
    // The provider carries no ground truth, so tuning cannot peek at
    // labels even when the training manifest has them.
    let provider = DiskProvider::new(&records, options.clone());
    let estimates = compute_estimates(&provider, &grid)?;
    let result = tune_green_stability_estimates(&estimates)?;

    let report = ReportWriter::create(&args.io.out)?;
    report.write_tuning(&result)?;
    let mut meta = base_metadata("greenstab");
    args.io.push_meta(&mut meta);
    meta.push(("grid_size".into(), grid.len().to_string()));
    meta.push(("images".into(), estimates.n_images().to_string()));
    meta.push((
        "criterion".into(),
        "sample std of estimate green chromaticity".into(),
    ));
    meta.push(("chosen".into(), tuple_cell(&result.chosen)));
    meta.push(("criterion_value".into(), result.criterion_value.to_string()));

    if let Some(eval_path) = &args.eval_manifest {
        let eval_records = load_manifest(eval_path)?;
        let eval_gts = ground_truths(&eval_records)?;
        let eval_provider = DiskProvider::new(&eval_records, options);
        let single = ParameterGrid::from_tuples(vec![result.chosen])?;
        let eval = evaluate_grid(&eval_provider, &eval_gts, &single)?;
        report.write_errors(&eval)?;
        let rows = vec![(
            tuple_cell(&result.chosen),
            summarize(&eval.tuple_errors(0))?,
        )];
        report.write_summary(&rows)?;
        print_summaries(&rows);
        meta.push(("eval_manifest".into(), eval_path.display().to_string()));
        meta.push(("eval_images".into(), eval.n_images().to_string()));
    }
    report.write_metadata(&meta)?;
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let grids = default_method_grids(
        &parse_values(&args.p_values, true)?,
        &parse_values(&args.sigma_values, false)?,
    )?;
    let options = args.io.load_options()?;
    let records = load_manifest(&args.io.manifest)?;
    let gts = ground_truths(&records)?;
    let ids: Vec<String> = records.iter().map(|r| r.image_id.clone()).collect();
    let provider = DiskProvider::new(&records, options);

    let outcome = correlation_experiment(&provider, &gts, &grids)?;

    let report = ReportWriter::create(&args.io.out)?;
    report.write_pairs(&outcome.pooled)?;
    report.write_method_stats(&outcome.methods)?;
    let gt_cells: Vec<Option<IlluminantEstimate>> = gts.iter().copied().map(Some).collect();
    report.write_chromaticities("gt_chromaticities", &ids, &gt_cells)?;

    let mut meta = base_metadata("analyze");
    args.io.push_meta(&mut meta);
    meta.push(("pooled_pairs".into(), outcome.pooled.len().to_string()));
    meta.push(("pearson".into(), outcome.pearson.to_string()));
    println!(
        "pooled pairs: {}  pearson: {:.4}",
        outcome.pooled.len(),
        outcome.pearson
    );
    for m in &outcome.methods {
        // Scatter data at the method's most stable tuple (lowest green
        // spread, first on ties).
        let Some(best) = m
            .tuple_stats
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite spreads"))
        else {
            continue;
        };
        let single = ParameterGrid::from_tuples(vec![best.0])?;
        let estimates = compute_estimates(&provider, &single)?;
        report.write_chromaticities(
            &format!("estimates_{}", m.method),
            estimates.image_ids(),
            estimates.tuple_row(0),
        )?;
        meta.push((format!("pairs_{}", m.method), m.pairs.len().to_string()));
        meta.push((format!("stable_tuple_{}", m.method), tuple_cell(&best.0)));
    }
    report.write_metadata(&meta)?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (patch_lo, patch_hi) = parse_pair::<usize>(&args.patches, "patches")?;
    let (refl_lo, refl_hi) = parse_pair::<f64>(&args.reflectance, "reflectance")?;
    let (mean_r, mean_g) = parse_pair::<f64>(&args.illuminant_mean, "illuminant mean")?;
    let (spread_r, spread_g) = parse_pair::<f64>(&args.illuminant_spread, "illuminant spread")?;
    if args.fold_count == 0 {
        return Err(Error::InvalidParameter("fold count must be >= 1".into()));
    }
    let spec = SyntheticSpec {
        image_count: args.count,
        width: args.width,
        height: args.height,
        patch_count: (patch_lo, patch_hi),
        reflectance_range: (refl_lo, refl_hi),
        illuminant_mean: (mean_r, mean_g),
        illuminant_spread: (spread_r, spread_g),
        noise_level: args.noise,
        seed: args.seed,
    };
    let data = synthesize_dataset(&spec)?;

    let report = ReportWriter::create(&args.out)?;
    let mut records = Vec::with_capacity(data.len());
    for (i, (image, gt)) in data.iter().enumerate() {
        let name = format!("img_{i:04}.ppm");
        write_ppm16(&args.out.join(&name), image)?;
        records.push(DatasetRecord {
            image_id: format!("img_{i:04}"),
            // Relative, so the directory can be moved as a unit.
            image_path: PathBuf::from(&name),
            mask_path: None,
            ground_truth: Some(*gt),
            fold: Some(i % args.fold_count),
        });
    }
    write_manifest(&args.out.join("manifest.csv"), &records)?;

    let mut meta = base_metadata("synth");
    meta.push(("images".into(), args.count.to_string()));
    meta.push(("width".into(), args.width.to_string()));
    meta.push(("height".into(), args.height.to_string()));
    meta.push(("patches".into(), format!("{patch_lo},{patch_hi}")));
    meta.push(("reflectance".into(), format!("{refl_lo},{refl_hi}")));
    meta.push(("illuminant_mean".into(), format!("{mean_r},{mean_g}")));
    meta.push(("illuminant_spread".into(), format!("{spread_r},{spread_g}")));
    meta.push(("noise".into(), args.noise.to_string()));
    meta.push(("seed".into(), args.seed.to_string()));
    meta.push(("fold_count".into(), args.fold_count.to_string()));
    report.write_metadata(&meta)?;
    Ok(())
}

/// Prints labeled summary rows as an aligned table on stdout.
fn print_summaries(rows: &[(String, ErrorSummary)]) {
    let width = rows
        .iter()
        .map(|(label, _)| label.len())
        .max()
        .unwrap_or(0)
        .max("label".len());
    println!("{:<width$} {}", "label", ErrorSummary::table_header());
    for (label, summary) in rows {
        println!("{label:<width$} {summary}");
    }
}

fn ground_truths(records: &[DatasetRecord]) -> Result<Vec<IlluminantEstimate>> {
    records
        .iter()
        .map(|r| {
            r.ground_truth.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "record '{}' has no ground truth; this command needs labels",
                    r.image_id
                ))
            })
        })
        .collect()
}

/// Parses a comma-separated value list. Tokens are numbers, inclusive
/// integer ranges `a..b`, or (for Minkowski norms) `inf`.
fn parse_values(spec: &str, allow_inf: bool) -> Result<Vec<f64>> {
    let bad = |why: String| Error::InvalidParameter(format!("value list '{spec}': {why}"));
    let mut out = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        if let Some((lo, hi)) = token.split_once("..") {
            let lo: i64 = lo
                .trim()
                .parse()
                .map_err(|_| bad(format!("range start '{lo}' is not an integer")))?;
            let hi: i64 = hi
                .trim()
                .parse()
                .map_err(|_| bad(format!("range end '{hi}' is not an integer")))?;
            if hi < lo {
                return Err(bad(format!("range {lo}..{hi} is descending")));
            }
            out.extend((lo..=hi).map(|v| v as f64));
        } else if allow_inf && token.eq_ignore_ascii_case("inf") {
            out.push(f64::INFINITY);
        } else {
            out.push(
                token
                    .parse::<f64>()
                    .map_err(|_| bad(format!("'{token}' is not a number")))?,
            );
        }
    }
    if out.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(out)
}

fn parse_orders(spec: &str) -> Result<Vec<u8>> {
    parse_values(spec, false)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && (0.0..=2.0).contains(&v) {
                Ok(v as u8)
            } else {
                Err(Error::InvalidParameter(format!(
                    "derivative order must be 0, 1, or 2, got {v}"
                )))
            }
        })
        .collect()
}

fn parse_norm(token: &str) -> Result<f64> {
    if token.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    token
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("norm '{token}' is not a number")))
}

fn parse_pair<T: std::str::FromStr>(spec: &str, what: &str) -> Result<(T, T)> {
    let bad = || Error::InvalidParameter(format!("{what} must be 'a,b', got '{spec}'"));
    let (a, b) = spec.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}
