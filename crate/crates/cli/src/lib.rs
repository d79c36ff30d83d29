//! The `geovuln` command line: pipeline stages and the layer server.

pub mod config;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use config::PipelineConfig;
use geovuln::geojson::{read_geojson, write_geojson};
use geovuln::geom::FeatureCollection;
use geovuln::precision::PrecisionPolicy;
use geovuln::projection::{reproject_collection, EPSG_WGS84};
use geovuln::raster::{build_overviews, parse_geotiff, write_pyramid, OverviewMethod};
use geovuln::shapefile::read_triplet;
use geovuln::simplify::{
    prune_attributes, quantize_collection, reduction_report, simplify_collection, tolerance_sweep,
    ReductionRow, ReductionTable, Tolerance, REDUCTION_CSV_HEADER,
};
use geovuln::tabular::{
    clean_csv_with, consolidate, drop_statistical_columns, unpivot_double_headers, CleanOptions,
    DenyPattern, Table, GROUP_COLUMN,
};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "geovuln",
    version,
    about = "Geospatial vulnerability data pipeline and layer server"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// JSON pipeline configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shapefile or GeoJSON to simplified 5-decimal GeoJSON, with a reduction report
    Convert(ConvertArgs),
    /// Compare simplification results across tolerances
    Sweep(SweepArgs),
    /// Clean census CSVs and consolidate them into a vulnerability store
    Csv(CsvArgs),
    /// Build an overview pyramid from a GeoTIFF
    Raster(RasterArgs),
    /// Print a vertex-reduction table across layers
    Report(ReportArgs),
    /// Serve a processed data directory over HTTP
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Input .shp (with sibling .shx/.dbf) or .geojson
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Output GeoJSON path (defaults to <output_dir>/<name>.geojson)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// EPSG code of the input coordinates
    #[arg(long)]
    pub crs: Option<u32>,
    /// Simplification tolerance in degrees
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub decimals: Option<u32>,
    /// Attributes to keep, comma separated (default: all)
    #[arg(long, value_delimiter = ',')]
    pub keep: Option<Vec<String>>,
    /// Layer name used in the report (default: input file stem)
    #[arg(long)]
    pub name: Option<String>,
    /// Append the reduction row to this CSV file
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long)]
    pub crs: Option<u32>,
    /// Tolerances in degrees, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub tol: Vec<f64>,
    /// Write the CSV report here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    /// CSV files or directories of CSV files; each file becomes a dataset named by its stem
    #[arg(long = "in", value_name = "PATH", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output vulnerability store JSON
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "GEOID")]
    pub geoid: String,
    /// Statistical column patterns such as suffix:_MOE or prefix:MarginOfError
    #[arg(long = "deny", value_name = "PATTERN")]
    pub deny: Vec<DenyPattern>,
    /// Extra columns kept as text
    #[arg(long = "text-column", value_name = "NAME")]
    pub text_columns: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RasterArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// average or nearest
    #[arg(long)]
    pub method: Option<OverviewMethod>,
    /// Maximum number of overview levels (default: down to 1x1)
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Reduction CSV files written by `convert --report`
    pub files: Vec<PathBuf>,
    /// Explicit rows as NAME=UNFILTERED:FILTERED
    #[arg(long = "counts", value_name = "NAME=U:F")]
    pub counts: Vec<String>,
    /// table or csv
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "GEOVULN_DATA_DIR")]
    pub data_dir: PathBuf,
    #[arg(long, env = "GEOVULN_PORT", default_value_t = geovuln_server::DEFAULT_PORT)]
    pub port: u16,
    /// Directory of static dashboard assets served under /
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Listen on all interfaces instead of loopback only
    #[arg(long)]
    pub public: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    let upper = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.chars().all(|c| c.is_ascii_uppercase()));
    path.with_extension(if upper {
        ext.to_ascii_uppercase()
    } else {
        ext.to_string()
    })
}

fn is_geojson(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("geojson") || e.eq_ignore_ascii_case("json"))
}

/// Reads a layer and returns it in EPSG:4326.
fn read_layer(
    path: &Path,
    crs: Option<u32>,
    err: &mut dyn Write,
) -> Result<FeatureCollection, CliError> {
    let fc = if is_geojson(path) {
        read_geojson(&read_file(path)?).map_err(|e| data(format!("{}: {e}", path.display())))?
    } else {
        let crs = crs.ok_or_else(|| {
            CliError::Usage("a shapefile input needs --crs (or source_crs in --config)".into())
        })?;
        let shp = read_file(path)?;
        let shx_path = sibling(path, "shx");
        let shx = if shx_path.is_file() {
            Some(read_file(&shx_path)?)
        } else {
            None
        };
        let dbf = read_file(&sibling(path, "dbf"))?;
        let (fc, dropped) = read_triplet(&shp, shx.as_deref(), &dbf, crs)
            .map_err(|e| data(format!("{}: {e}", path.display())))?;
        if dropped > 0 {
            let _ = writeln!(err, "warning: {dropped} null shape record(s) skipped");
        }
        fc
    };
    reproject_collection(&fc, EPSG_WGS84).map_err(data)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("layer")
        .to_string()
}

fn convert(
    a: &ConvertArgs,
    cfg: &PipelineConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let tol = a.tol.unwrap_or(cfg.tolerance);
    let tol = Tolerance::new(tol).map_err(|e| CliError::Usage(e.to_string()))?;
    let decimals = a.decimals.unwrap_or(cfg.decimals);
    let policy = PrecisionPolicy::new(decimals).map_err(|e| CliError::Usage(e.to_string()))?;
    let name = a.name.clone().unwrap_or_else(|| stem(&a.input));
    let out_path = match (&a.out, &cfg.output_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join(format!("{name}.geojson")),
        (None, None) => {
            return Err(CliError::Usage(
                "convert needs --out (or output_dir in --config)".into(),
            ))
        }
    };

    let source = read_layer(&a.input, a.crs.or(cfg.source_crs), err)?;
    let keep = a.keep.clone().or_else(|| cfg.keep_attributes.clone());
    let pruned = match &keep {
        Some(k) => prune_attributes(&source, &k.iter().map(String::as_str).collect::<Vec<_>>())
            .map_err(data)?,
        None => source.clone(),
    };
    let simplified = simplify_collection(&pruned, tol);
    let (quantized, warnings) = quantize_collection(&simplified, decimals).map_err(data)?;
    if warnings > 0 {
        let _ = writeln!(
            err,
            "warning: {warnings} ring(s) kept unrounded to stay valid"
        );
    }
    write_file(&out_path, &write_geojson(&quantized, policy).map_err(data)?)?;

    let row = reduction_report(&name, &source, &quantized).map_err(data)?;
    if let Some(report) = &a.report {
        append_report(report, &row)?;
    }
    write!(out, "{}", ReductionTable(vec![row])).map_err(data)
}

fn append_report(path: &Path, row: &ReductionRow) -> Result<(), CliError> {
    let mut text = if path.is_file() {
        String::from_utf8(read_file(path)?).map_err(data)?
    } else {
        format!("{REDUCTION_CSV_HEADER}\n")
    };
    text.push_str(&row.csv_line());
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn sweep(
    a: &SweepArgs,
    cfg: &PipelineConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let fc = read_layer(&a.input, a.crs.or(cfg.source_crs), err)?;
    let mut tols = a.tol.clone();
    for &t in &tols {
        Tolerance::new(t).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    tols.sort_by(f64::total_cmp);
    tols.dedup();
    let report = tolerance_sweep(&fc, &tols).map_err(data)?;
    match &a.out {
        Some(p) => write_file(p, report.to_csv().as_bytes()),
        None => out.write_all(report.to_csv().as_bytes()).map_err(data),
    }
}

fn csv_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

/// Splits an unpivoted table into one table per group value.
fn split_groups(id: &str, t: Table) -> Vec<(String, Table)> {
    let Some(g) = t.column_index(GROUP_COLUMN) else {
        return vec![(id.to_string(), t)];
    };
    let columns: Vec<String> = t
        .columns
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != g)
        .map(|(_, c)| c.clone())
        .collect();
    let mut groups: BTreeMap<String, Vec<Vec<geovuln::Value>>> = BTreeMap::new();
    for row in t.rows {
        let key = row[g].render();
        let rest = row
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != g)
            .map(|(_, v)| v)
            .collect();
        groups.entry(key).or_default().push(rest);
    }
    groups
        .into_iter()
        .map(|(k, rows)| {
            (
                format!("{id}.{k}"),
                Table {
                    columns: columns.clone(),
                    rows,
                },
            )
        })
        .collect()
}

fn csv_cmd(
    a: &CsvArgs,
    cfg: &PipelineConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let deny = if a.deny.is_empty() {
        cfg.deny_patterns.clone()
    } else {
        a.deny.clone()
    };
    let mut options = CleanOptions::default();
    options.text_columns.push(a.geoid.clone());
    options.text_columns.extend(a.text_columns.iter().cloned());

    let mut tables = BTreeMap::new();
    for path in csv_inputs(&a.inputs)? {
        let id = stem(&path);
        let ctx =
            |e: geovuln::tabular::TableError| CliError::Data(format!("{}: {e}", path.display()));
        let text = String::from_utf8(read_file(&path)?)
            .map_err(|_| CliError::Data(format!("{}: not UTF-8 text", path.display())))?;
        let cleaned = clean_csv_with(&text, &options).map_err(ctx)?;
        let dropped = drop_statistical_columns(&cleaned, &deny).map_err(ctx)?;
        let unpivoted = unpivot_double_headers(&dropped, &[a.geoid.as_str()]).map_err(ctx)?;
        for (name, t) in split_groups(&id, unpivoted) {
            if tables.insert(name.clone(), t).is_some() {
                return Err(CliError::Data(format!("duplicate dataset id {name}")));
            }
        }
    }
    let (store, duplicates) = consolidate(&tables, &a.geoid).map_err(data)?;
    if duplicates > 0 {
        let _ = writeln!(
            err,
            "warning: {duplicates} duplicate GEOID row(s); later rows won"
        );
    }
    write_file(&a.out, &store.to_json())?;
    for (id, ds) in &store.datasets {
        writeln!(
            out,
            "{id}: {} records, {} metrics",
            ds.records.len(),
            ds.metrics.len()
        )
        .map_err(data)?;
    }
    Ok(())
}

fn raster_cmd(a: &RasterArgs, cfg: &PipelineConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let method = match a.method {
        Some(m) => m,
        None => cfg.overview_method.parse().map_err(CliError::Usage)?,
    };
    let grid = parse_geotiff(&read_file(&a.input)?)
        .map_err(|e| data(format!("{}: {e}", a.input.display())))?;
    let pyramid = build_overviews(grid, a.levels.unwrap_or(usize::MAX), method);
    let mut bytes = Vec::new();
    write_pyramid(&pyramid, &mut bytes).map_err(data)?;
    write_file(&a.out, &bytes)?;
    for (k, l) in pyramid.levels.iter().enumerate() {
        writeln!(out, "level {k}: {}x{}", l.width, l.height).map_err(data)?;
    }
    Ok(())
}

fn parse_counts(s: &str) -> Result<ReductionRow, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--counts expects NAME=UNFILTERED:FILTERED, got '{s}'"
        ))
    };
    let (name, counts) = s.rsplit_once('=').ok_or_else(bad)?;
    let (u, f) = counts.split_once(':').ok_or_else(bad)?;
    let parse = |v: &str| v.trim().replace(',', "").parse::<u64>().map_err(|_| bad());
    ReductionRow::from_counts(name, parse(u)?, parse(f)?).map_err(data)
}

fn read_report_csv(path: &Path) -> Result<Vec<ReductionRow>, CliError> {
    let text = String::from_utf8(read_file(path)?).map_err(data)?;
    let table = clean_csv_with(
        &text,
        &CleanOptions {
            text_columns: vec!["layer".into()],
        },
    )
    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if table.columns.len() < 3 || table.columns[..3] != ["layer", "unfiltered", "filtered"] {
        return Err(CliError::Data(format!(
            "{}: not a reduction report",
            path.display()
        )));
    }
    table
        .rows
        .iter()
        .map(|r| {
            let count = |v: &geovuln::Value| {
                v.as_f64()
                    .filter(|n| *n >= 0.0 && n.fract() == 0.0)
                    .map(|n| n as u64)
                    .ok_or_else(|| CliError::Data(format!("{}: bad vertex count", path.display())))
            };
            ReductionRow::from_counts(&r[0].render(), count(&r[1])?, count(&r[2])?).map_err(data)
        })
        .collect()
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for f in &a.files {
        rows.extend(read_report_csv(f)?);
    }
    for c in &a.counts {
        rows.push(parse_counts(c)?);
    }
    if rows.is_empty() {
        return Err(CliError::Usage(
            "report needs report files or --counts".into(),
        ));
    }
    let table = ReductionTable(rows);
    match a.format {
        ReportFormat::Table => write!(out, "{table}"),
        ReportFormat::Csv => write!(out, "{}", table.to_csv()),
    }
    .map_err(data)
}

fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let config = geovuln_server::ServerConfig {
        data_dir: a.data_dir.clone(),
        port: a.port,
        host: if a.public {
            [0, 0, 0, 0]
        } else {
            [127, 0, 0, 1]
        },
        assets: a.assets.clone(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(data)?;
    rt.block_on(geovuln_server::serve(config)).map_err(data)
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = (|| {
        let cfg = match &cli.config {
            Some(p) => PipelineConfig::load(p).map_err(CliError::Usage)?,
            None => PipelineConfig::default(),
        };
        match &cli.command {
            Command::Convert(a) => convert(a, &cfg, out, err),
            Command::Sweep(a) => sweep(a, &cfg, out, err),
            Command::Csv(a) => csv_cmd(a, &cfg, out, err),
            Command::Raster(a) => raster_cmd(a, &cfg, out),
            Command::Report(a) => report(a, out),
            Command::Serve(a) => serve(a),
        }
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let (CliError::Usage(m) | CliError::Data(m)) = &e;
            let _ = writeln!(err, "error: {m}");
            e.exit_code()
        }
    }
}
