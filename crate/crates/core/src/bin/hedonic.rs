use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hedonic::design::{build_design_matrix, default_model_spec, ModelSpec};
use hedonic::diagnostics::{
    correlation_matrix, default_correlation_groups, descriptive_stats, pearson, vif, zoning_variance_share_for,
    DEFAULT_CORR_FLAG,
};
use hedonic::inference::DEFAULT_ALPHA;
use hedonic::option_value::{rezone_counterfactual, zone_effect_report, FittedModel};
use hedonic::parcel::{clean, load_parcels, write_parcels, ParcelTable, Schema, Zone};
use hedonic::report::{self, DescribeReport, FitReport, Format, NAMED_PAIRS};
use hedonic::reproduction::check_published_table;
use hedonic::synth::{generate_parcels, TrueModel, ZoneSampling, TARGET_R2};

#[derive(Parser, Debug)]
#[command(
    name = "hedonic",
    version,
    about = "Hedonic log-value regression for assessor parcel data"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Parcel CSV to read.
    #[arg(long, short, global = true, env = "HEDONIC_INPUT")]
    input: Option<PathBuf>,
    /// Write the report here instead of stdout (for `synth`, the parcel CSV).
    #[arg(long, short, global = true, env = "HEDONIC_OUTPUT")]
    output: Option<PathBuf>,
    /// Model spec file; defaults to the 13-regressor model.
    #[arg(long, global = true, env = "HEDONIC_SPEC")]
    spec: Option<PathBuf>,
    /// Two-sided significance level for the star column.
    #[arg(long, global = true, env = "HEDONIC_ALPHA", default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, global = true, env = "HEDONIC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, env = "HEDONIC_FORMAT", value_enum, default_value_t = OutFormat::Text)]
    format: OutFormat,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean the input, fit the model and print the coefficient table.
    Fit {
        /// Also print the consistency check of the published table.
        #[arg(long)]
        reproduction_check: bool,
    },
    /// Descriptive statistics, correlation blocks and variance inflation.
    Describe {
        /// Comma-separated labels forming one correlation block; repeatable.
        /// Replaces the default blocks.
        #[arg(long = "group")]
        groups: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_CORR_FLAG)]
        flag_threshold: f64,
    },
    /// Rezoning counterfactuals for selected parcels.
    Whatif {
        #[arg(long)]
        to_zone: Zone,
        /// Comma-separated parcel ids; all parcels when omitted.
        #[arg(long, value_delimiter = ',')]
        pins: Vec<String>,
        /// Use the published coefficients instead of fitting the input.
        #[arg(long)]
        published: bool,
    },
    /// Share of explained variance attributable to zoning.
    Hypothesis,
    /// Generate a synthetic parcel file with known coefficients.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Truth::Published)]
        truth: Truth,
        #[arg(long, value_enum, default_value_t = Sampling::Stratified)]
        zone_sampling: Sampling,
        /// Noise level chosen so the population R-square hits this value.
        #[arg(long, default_value_t = TARGET_R2, conflicts_with = "noise_sigma")]
        target_r2: f64,
        /// Fixed noise standard deviation on the log scale.
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Check the published t column and fit statistics for consistency.
    ReproductionCheck,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Text,
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Text => Format::Text,
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Truth {
    Published,
    ZoningOnly,
    NoZoning,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sampling {
    Stratified,
    Independent,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        bail!("--alpha must lie in (0, 1), got {}", c.alpha);
    }
    let format = Format::from(c.format);
    match &cli.command {
        Command::Fit { reproduction_check } => cmd_fit(c, format, *reproduction_check),
        Command::Describe { groups, flag_threshold } => cmd_describe(c, format, groups, *flag_threshold),
        Command::Whatif {
            to_zone,
            pins,
            published,
        } => cmd_whatif(c, format, *to_zone, pins, *published),
        Command::Hypothesis => cmd_hypothesis(c, format),
        Command::Synth {
            n,
            truth,
            zone_sampling,
            target_r2,
            noise_sigma,
        } => cmd_synth(c, *n, *truth, *zone_sampling, *target_r2, *noise_sigma),
        Command::ReproductionCheck => emit(c, &report::render_reproduction(&check_published_table(), format)),
    }
}

fn emit(c: &Common, text: &str) -> Result<()> {
    match &c.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_spec(c: &Common) -> Result<ModelSpec> {
    match &c.spec {
        None => Ok(default_model_spec()),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading spec {}", path.display()))?;
            ModelSpec::from_text(&text).with_context(|| format!("parsing spec {}", path.display()))
        }
    }
}

fn load_clean(c: &Common) -> Result<(ParcelTable, hedonic::parcel::CleanReport)> {
    let Some(path) = &c.input else {
        bail!("--input is required (or set HEDONIC_INPUT)");
    };
    let table = load_parcels(path, &Schema::canonical())?;
    let (cleaned, report) = clean(&table);
    if cleaned.is_empty() {
        bail!("no valid rows remain after cleaning {}", path.display());
    }
    Ok((cleaned, report))
}

fn cmd_fit(c: &Common, format: Format, reproduction_check: bool) -> Result<()> {
    let spec = load_spec(c)?;
    let (table, cleaning) = load_clean(c)?;
    let model = FittedModel::fit(&table, &spec, c.alpha)?;
    let report = FitReport {
        cleaning,
        zone_effects: zone_effect_report(&model),
        inference: model.inference,
        reproduction: reproduction_check.then(check_published_table),
    };
    emit(c, &report::render_fit(&report, format))
}

fn cmd_describe(c: &Common, format: Format, groups: &[String], flag_threshold: f64) -> Result<()> {
    let spec = load_spec(c)?;
    let (table, _) = load_clean(c)?;
    let design = build_design_matrix(&table, &spec)?;
    let stats = descriptive_stats(&table, &spec)?;
    let groups: Vec<Vec<String>> = if groups.is_empty() {
        default_correlation_groups()
            .into_iter()
            .map(|g| g.into_iter().filter(|l| design.series(l).is_ok()).collect::<Vec<_>>())
            .filter(|g| g.len() > 1)
            .collect()
    } else {
        groups
            .iter()
            .map(|g| g.split(',').map(|l| l.trim().to_string()).collect())
            .collect()
    };
    let correlations = correlation_matrix(&design, &groups)?;
    let mut flagged_pairs: Vec<(String, String, f64)> = correlations
        .iter()
        .flat_map(|m| m.flagged_pairs(flag_threshold))
        .collect();
    flagged_pairs.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let mut named_pairs = Vec::new();
    for (a, b) in NAMED_PAIRS {
        if let (Ok(x), Ok(y)) = (design.series(a), design.series(b)) {
            named_pairs.push((a.to_string(), b.to_string(), pearson(&x, &y)?));
        }
    }
    // collinear or intercept-free designs still get the other sections
    let vif = vif(&design).ok();
    let report = DescribeReport {
        stats,
        correlations,
        flag_threshold,
        flagged_pairs,
        named_pairs,
        vif,
    };
    emit(c, &report::render_describe(&report, format))
}

fn cmd_whatif(c: &Common, format: Format, to_zone: Zone, pins: &[String], published: bool) -> Result<()> {
    let (table, _) = load_clean(c)?;
    let model = if published {
        FittedModel::published()
    } else {
        FittedModel::fit(&table, &load_spec(c)?, c.alpha)?
    };
    let parcels: Vec<_> = if pins.is_empty() {
        table.rows().iter().collect()
    } else {
        pins.iter()
            .map(|p| {
                table
                    .get(p)
                    .with_context(|| format!("parcel `{p}` not found among valid rows"))
            })
            .collect::<Result<_>>()?
    };
    let reports = parcels
        .into_iter()
        .map(|p| rezone_counterfactual(&model, p, to_zone))
        .collect::<hedonic::Result<Vec<_>>>()?;
    emit(c, &report::render_whatif(&reports, format)?)
}

fn cmd_hypothesis(c: &Common, format: Format) -> Result<()> {
    let spec = load_spec(c)?;
    let (table, _) = load_clean(c)?;
    let share = zoning_variance_share_for(&table, &spec)?;
    emit(c, &report::render_hypothesis(&share, format))
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("log.json")
}

fn cmd_synth(
    c: &Common,
    n: usize,
    truth: Truth,
    sampling: Sampling,
    target_r2: f64,
    noise_sigma: Option<f64>,
) -> Result<()> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let Some(output) = &c.output else {
        bail!("synth needs --output for the parcel CSV");
    };
    let base = match truth {
        Truth::Published => TrueModel::published_defaults(c.seed),
        Truth::ZoningOnly => TrueModel::zoning_only(c.seed),
        Truth::NoZoning => TrueModel::without_zone_effects(c.seed),
    };
    if c.spec.is_some() {
        bail!("synth always generates under the default spec; drop --spec");
    }
    let base = base.with_zone_sampling(match sampling {
        Sampling::Stratified => ZoneSampling::Stratified,
        Sampling::Independent => ZoneSampling::Independent,
    });
    let truth = match noise_sigma {
        Some(sigma) => base.with_noise(sigma),
        None => base.calibrated(target_r2)?,
    };
    let (table, log) = generate_parcels(&truth, n)?;
    write_parcels(&table, output)?;
    let log_path = sidecar(output);
    log.write_json(&log_path)?;
    eprintln!(
        "wrote {} parcels to {} (log {})",
        table.len(),
        output.display(),
        log_path.display()
    );
    Ok(())
}
