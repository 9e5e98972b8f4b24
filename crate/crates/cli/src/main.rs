use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use cfss::ingest::{self, CategorizationScheme, DiscretizeOptions};
use cfss::report::{self, ScanReport};
use cfss::simulate::{self, Holding};
use cfss::study::{self, StudyOptions};
use cfss::{fixtures, io, BasisKind, Location, RunConfig, Scenario, ScenarioSpec, SpatialDataset};

#[derive(Parser)]
#[command(name = "cfss", version, about = "Spatial scan statistic for categorical functional data")]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect the most likely cluster and write result.json, mlc.geojson and summary.txt.
    Scan(ScanArgs),
    /// Simulate a scenario dataset as a trajectory CSV.
    Simulate(SimulateArgs),
    /// Replicated simulation study writing metrics.csv and power_curve.csv.
    Study(StudyArgs),
    /// Print the category of one or more concentration values.
    Categorize(CategorizeArgs),
}

/// Settings that override the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// bspline or fourier.
    #[arg(long = "basis")]
    basis_kind: Option<BasisKind>,
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    basis_degree: Option<usize>,
    #[arg(long)]
    variance_threshold: Option<f64>,
    #[arg(long)]
    significance: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.permutations {
            cfg.permutations = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.basis_kind {
            cfg.basis.kind = v;
        }
        if let Some(v) = self.basis_size {
            cfg.basis.size = v;
        }
        if let Some(v) = self.basis_degree {
            cfg.basis.degree = v;
        }
        if let Some(v) = self.variance_threshold {
            cfg.variance_threshold = v;
        }
        if let Some(v) = self.significance {
            cfg.significance = v;
        }
    }
}

#[derive(Args)]
struct ScanArgs {
    /// Daily series `station_id,date,value,x,y`.
    #[arg(long, conflicts_with = "trajectories", required_unless_present = "trajectories")]
    series: Option<PathBuf>,
    /// Trajectories `id,location_id,time,state` (needs --locations).
    #[arg(long, requires = "locations")]
    trajectories: Option<PathBuf>,
    /// Locations `location_id,x,y`.
    #[arg(long)]
    locations: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "cfss-out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Categorization scheme file (Atmo thresholds by default).
    #[arg(long)]
    scheme: Option<PathBuf>,
    #[arg(long)]
    gap_tolerance: Option<usize>,
    /// First day of the window (YYYY-MM-DD).
    #[arg(long)]
    start: Option<NaiveDate>,
    /// Last day of the window, inclusive.
    #[arg(long)]
    end: Option<NaiveDate>,
    /// Treat x,y as longitude,latitude and project them to planar km.
    #[arg(long)]
    lonlat: bool,
    /// Reference latitude of the projection, degrees.
    #[arg(long, default_value_t = 46.5)]
    ref_lat: f64,
    /// Also write fmca_eigen.csv, scores.csv and ranks.csv.
    #[arg(long)]
    dump: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: Scenario,
    /// α for scenarios i and ii, γ for scenario iii.
    #[arg(long)]
    strength: f64,
    #[arg(long, default_value_t = 18.0)]
    horizon: f64,
    #[arg(long, default_value_t = 10)]
    per_location: usize,
    /// Locations CSV; the bundled 94 départements by default.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Cluster ids, as a file or a comma separated list; Île-de-France by default.
    #[arg(long)]
    cluster: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// rate (mean holding 1/λ) or mean (mean holding λ).
    #[arg(long, default_value_t = Holding::Rate)]
    holding: Holding,
    /// Trajectory CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the geometry as a locations CSV.
    #[arg(long)]
    locations_out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Scenarios to run (repeatable); all three by default.
    #[arg(long = "scenario")]
    scenarios: Vec<Scenario>,
    /// Comma separated strengths; the published grid of each scenario by default.
    #[arg(long, value_delimiter = ',')]
    strengths: Vec<f64>,
    /// Basis sizes to compare (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "10")]
    basis_sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value_t = 18.0)]
    horizon: f64,
    #[arg(long, default_value_t = 10)]
    per_location: usize,
    #[arg(long)]
    geometry: Option<PathBuf>,
    #[arg(long)]
    cluster: Option<String>,
    #[arg(long, default_value_t = Holding::Rate)]
    holding: Holding,
    /// Output directory for metrics.csv and power_curve.csv.
    #[arg(long, default_value = "cfss-study")]
    out: PathBuf,
}

#[derive(Args)]
struct CategorizeArgs {
    /// Concentration values.
    #[arg(required = true, allow_negative_numbers = true)]
    values: Vec<f64>,
    #[arg(long)]
    scheme: Option<PathBuf>,
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_path(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn load_scheme(path: Option<&Path>) -> Result<CategorizationScheme> {
    match path {
        Some(p) => CategorizationScheme::from_path(p).with_context(|| format!("reading scheme {}", p.display())),
        None => Ok(CategorizationScheme::atmo()),
    }
}

fn geometry(path: Option<&Path>) -> Result<Vec<Location>> {
    match path {
        Some(p) => io::read_locations(p).with_context(|| format!("reading geometry {}", p.display())),
        None => Ok(fixtures::departements()),
    }
}

fn cluster_ids(spec: Option<&str>) -> Result<Vec<String>> {
    match spec {
        Some(s) => io::read_id_list(s).with_context(|| format!("reading cluster {s}")),
        None => Ok(fixtures::cluster_idf()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn scan(args: ScanArgs) -> Result<u8> {
    let mut cfg = load_config(args.config.as_deref(), &args.overrides)?;
    if let Some(s) = &args.scheme {
        cfg.scheme = Some(s.clone());
    }
    if let Some(g) = args.gap_tolerance {
        cfg.gap_tolerance = g;
    }
    let project = |x: f64, y: f64| {
        if args.lonlat {
            ingest::project_equirectangular(x, y, args.ref_lat)
        } else {
            (x, y)
        }
    };

    let (dataset, dropped): (SpatialDataset, Vec<String>) = if let Some(series) = &args.series {
        let mut records = ingest::read_series(series).with_context(|| format!("reading series {}", series.display()))?;
        for r in &mut records {
            (r.x, r.y) = project(r.x, r.y);
        }
        let scheme = load_scheme(cfg.scheme.as_deref())?;
        let window = match (args.start, args.end) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => bail!("--start and --end must be given together"),
        };
        let opts = DiscretizeOptions {
            window,
            gap_tolerance: cfg.gap_tolerance,
        };
        let d = ingest::discretize_lenient(&records, &scheme, &opts)?;
        for (station, err) in &d.dropped {
            eprintln!("warning: station `{station}` dropped: {err}");
        }
        (d.dataset, d.dropped.into_iter().map(|(s, _)| s).collect())
    } else {
        let traj = args.trajectories.as_ref().expect("clap enforces an input");
        let loc_path = args.locations.as_ref().expect("clap enforces --locations");
        let mut locations =
            io::read_locations(loc_path).with_context(|| format!("reading locations {}", loc_path.display()))?;
        for l in &mut locations {
            (l.x, l.y) = project(l.x, l.y);
        }
        let ds = io::read_trajectories(traj, locations, None)
            .with_context(|| format!("reading trajectories {}", traj.display()))?;
        (ds, Vec::new())
    };

    log::info!(
        "{} locations, {} individuals, horizon {}",
        dataset.locations().len(),
        dataset.n_individuals(),
        dataset.horizon()
    );
    let result = cfss::run_scan(&dataset, &cfg.scan_config())?;
    let rep = ScanReport::new(&dataset, &result, cfg.significance, dropped);
    report::write_reports(&args.out, &dataset, &result, &rep)?;
    if args.dump {
        io::write_eigen_csv(&result.encoding, create(&args.out.join("fmca_eigen.csv"))?)?;
        io::write_matrix_csv(&dataset, &result.encoding.scores, "z", create(&args.out.join("scores.csv"))?)?;
        io::write_matrix_csv(&dataset, &result.ranks.ranks, "r", create(&args.out.join("ranks.csv"))?)?;
    }
    print!("{}", report::summary_text(&dataset, &result, &rep));
    Ok(if rep.significant && !rep.dropped_stations.is_empty() {
        2
    } else {
        0
    })
}

fn simulate_cmd(args: SimulateArgs) -> Result<u8> {
    let locations = geometry(args.geometry.as_deref())?;
    let spec = ScenarioSpec {
        scenario: args.scenario,
        strength: args.strength,
        horizon: args.horizon,
        per_location: args.per_location,
        cluster: cluster_ids(args.cluster.as_deref())?,
        holding: args.holding,
    };
    let dataset = simulate::simulate_dataset(&locations, &spec, args.seed)?;
    io::write_trajectories(&dataset, create(&args.out)?)?;
    if let Some(p) = &args.locations_out {
        io::write_locations(dataset.locations(), create(p)?)?;
    }
    eprintln!(
        "wrote {} trajectories over {} locations to {}",
        dataset.n_individuals(),
        dataset.locations().len(),
        args.out.display()
    );
    Ok(0)
}

fn study_cmd(args: StudyArgs) -> Result<u8> {
    let mut overrides = args.overrides;
    if overrides.permutations.is_none() && args.config.is_none() {
        overrides.permutations = Some(199);
    }
    let cfg = load_config(args.config.as_deref(), &overrides)?;
    if args.replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    let locations = geometry(args.geometry.as_deref())?;
    let cluster = cluster_ids(args.cluster.as_deref())?;
    let scenarios = if args.scenarios.is_empty() {
        Scenario::ALL.to_vec()
    } else {
        args.scenarios.clone()
    };
    let mut grid = Vec::new();
    for sc in scenarios {
        let strengths = if args.strengths.is_empty() {
            sc.grid().to_vec()
        } else {
            args.strengths.clone()
        };
        for s in strengths {
            grid.push(ScenarioSpec {
                scenario: sc,
                strength: s,
                horizon: args.horizon,
                per_location: args.per_location,
                cluster: cluster.clone(),
                holding: args.holding,
            });
        }
    }

    let mut rows = Vec::new();
    for &size in &args.basis_sizes {
        let mut scan = cfg.scan_config();
        scan.basis.size = size;
        let opts = StudyOptions {
            replicates: args.replicates,
            significance: cfg.significance,
            seed: cfg.seed,
            scan,
        };
        rows.extend(study::run_study(&locations, &grid, &opts)?);
    }
    std::fs::create_dir_all(&args.out)?;
    study::write_metrics_csv(&rows, create(&args.out.join("metrics.csv"))?)?;
    study::write_power_curve_csv(&rows, create(&args.out.join("power_curve.csv"))?)?;
    for r in &rows {
        println!(
            "scenario {:<3} strength {:<5} L={:<3} power {:.3}",
            r.scenario.to_string(),
            r.strength,
            r.basis_size,
            r.power
        );
    }
    Ok(0)
}

fn categorize(args: CategorizeArgs) -> Result<u8> {
    let scheme = load_scheme(args.scheme.as_deref())?;
    for v in args.values {
        println!("{v}\t{}", scheme.categorize(v)?);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Scan(a) => scan(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Study(a) => study_cmd(a),
        Command::Categorize(a) => categorize(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
