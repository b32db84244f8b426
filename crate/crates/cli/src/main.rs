//! `occnav` command line: scans, detections, passage classes, scenario runs,
//! maze benchmarks and SVG figures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use occnav::detect::{detect, DetectionParams, InvisibleHuman};
use occnav::gridmap::{load_map, OccupancyGrid, WorldPoint};
use occnav::harness::{
    accuracy_experiment_with, accuracy_on_maps, builtin_map, render_svg, run_scenario, RunRecord, Scenario,
};
use occnav::passage::{classify_passage, PassageLimits};
use occnav::scan::Pose2D;
use serde_json::json;

#[derive(Parser)]
#[command(name = "occnav", version, about = "Invisible-human detection and occlusion-aware local planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Probe {
    /// Map file (`.pgm` with a `.meta` sidecar, anything else is the ASCII grid) or `builtin:NAME`.
    #[arg(long)]
    map: String,
    /// Robot pose as `X,Y,THETA` (meters, radians).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pose)]
    pose: Pose2D,
    /// JSON file with detection parameters; missing keys keep their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectFormat {
    Json,
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one laser scan and print it as `index,angle_rad,range_m` CSV.
    Scan {
        #[arg(long)]
        map: String,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_pose)]
        pose: Pose2D,
    },
    /// Locate invisible humans behind the corners visible from a pose.
    Detect {
        #[command(flatten)]
        probe: Probe,
        #[arg(long, value_enum, default_value = "json")]
        out: DetectFormat,
    },
    /// Classify the passage in front of the robot and print it as JSON.
    Classify {
        #[command(flatten)]
        probe: Probe,
    },
    /// Run a scenario file and write record.csv, path.svg and summary.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Detection accuracy over seeded random mazes (or the given maps).
    Bench {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use these maps instead of generated mazes (repeatable).
        #[arg(long = "map")]
        maps: Vec<String>,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Draw a run record CSV as an SVG figure.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Map drawn under the path.
        #[arg(long)]
        map: Option<String>,
    },
}

/// Planning failures get their own exit code so scripts can tell them from bad input.
enum Outcome {
    Done,
    PlanningFailed(String),
}

fn parse_pose(s: &str) -> Result<Pose2D, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,THETA, got `{s}`"));
    }
    let mut v = [0.0f64; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !slot.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(Pose2D::new(v[0], v[1], v[2]))
}

fn read_map(source: &str) -> Result<OccupancyGrid> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return builtin_map(name).with_context(|| format!("unknown built-in map `{name}`"));
    }
    load_map(source).with_context(|| format!("loading map {source}"))
}

fn read_params(path: Option<&Path>) -> Result<DetectionParams> {
    let Some(path) = path else {
        return Ok(DetectionParams::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let params: DetectionParams =
        serde_json::from_str(&text).with_context(|| format!("parsing detection params {}", path.display()))?;
    if !(params.h_rad > 0.0 && params.epsilon >= 0.0 && params.alpha > 0.0 && params.gap_threshold > 0.0) {
        bail!("detection params must have positive h_rad, alpha and gap_threshold and non-negative epsilon");
    }
    Ok(params)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn detections_json(humans: &[InvisibleHuman]) -> serde_json::Value {
    humans
        .iter()
        .map(|h| {
            json!({
                "x": h.position.x,
                "y": h.position.y,
                "direction": h.direction,
                "corner_x": h.source_corner.x,
                "corner_y": h.source_corner.y,
                "distance": h.distance_to_robot,
            })
        })
        .collect()
}

fn detections_csv(humans: &[InvisibleHuman]) -> String {
    let mut out = String::from("x,y,direction,corner_x,corner_y,distance\n");
    for h in humans {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            h.position.x, h.position.y, h.direction, h.source_corner.x, h.source_corner.y, h.distance_to_robot
        ));
    }
    out
}

/// Detections of one recorded cycle, pointed at the robot as the detector does.
fn row_detections(record: &RunRecord) -> Vec<InvisibleHuman> {
    let Some(row) = record.rows.iter().max_by_key(|r| r.detections.len()) else {
        return Vec::new();
    };
    row.detections
        .iter()
        .map(|&p| InvisibleHuman {
            position: p,
            direction: (row.pose.position - p).angle(),
            source_corner: p,
            corner_index: 0,
            gap_index: 0,
            distance_to_robot: p.distance(row.pose.position),
        })
        .collect()
}

fn simulate(scenario: &Path, out_dir: &Path) -> Result<Outcome> {
    let s = Scenario::load(scenario)?;
    let grid = s.load_grid()?;
    let record = run_scenario(&s)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_file(&out_dir.join("record.csv"), record.to_csv())?;
    let svg = render_svg(
        Some(&grid),
        &record.path(),
        &row_detections(&record),
        s.config.detection.h_rad,
    );
    write_file(&out_dir.join("path.svg"), svg)?;
    let speeds = record.speeds();
    let summary = json!({
        "completed": record.completed,
        "failure": record.failure,
        "cycles": record.rows.len(),
        "path_length": record.path_length(),
        "min_human_distance": record.min_human_distance(),
        "max_speed": speeds.iter().copied().fold(0.0, f64::max),
    });
    write_file(&out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{}: completed={} cycles={} path_length={:.3}",
        scenario.display(),
        record.completed,
        record.rows.len(),
        record.path_length()
    );
    Ok(match record.failure {
        Some(e) => Outcome::PlanningFailed(e),
        None => Outcome::Done,
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Scan { map, pose } => {
            let grid = read_map(&map)?;
            let (scan, _) = detect(&grid, pose, &DetectionParams::default())?;
            print!("{}", scan.to_csv());
        }
        Command::Detect { probe, out } => {
            let grid = read_map(&probe.map)?;
            let params = read_params(probe.params.as_deref())?;
            let (_, humans) = detect(&grid, probe.pose, &params)?;
            match out {
                DetectFormat::Json => println!("{}", serde_json::to_string_pretty(&detections_json(&humans))?),
                DetectFormat::Csv => print!("{}", detections_csv(&humans)),
                DetectFormat::Svg => {
                    let robot = [probe.pose.position];
                    print!("{}", render_svg(Some(&grid), &robot, &humans, params.h_rad));
                }
            }
        }
        Command::Classify { probe } => {
            let grid = read_map(&probe.map)?;
            let params = read_params(probe.params.as_deref())?;
            let (scan, humans) = detect(&grid, probe.pose, &params)?;
            let class = classify_passage(&humans, &scan, &PassageLimits::default());
            println!("{}", serde_json::to_string_pretty(&class)?);
        }
        Command::Simulate { scenario, out_dir } => return simulate(&scenario, &out_dir),
        Command::Bench {
            n,
            seed,
            out,
            maps,
            params,
        } => {
            let params = read_params(params.as_deref())?;
            let report = if maps.is_empty() {
                accuracy_experiment_with(n, seed, &params)?
            } else {
                let grids = maps.iter().map(|m| read_map(m)).collect::<Result<Vec<_>>>()?;
                accuracy_on_maps(&grids, n, seed, &params)?
            };
            match out {
                Some(path) => {
                    write_file(&path, report.to_csv())?;
                    eprintln!(
                        "{} maps, {} detections, accuracy {:.4}, with overlap {:.4}",
                        report.maps.len(),
                        report.total.total(),
                        report.total.accuracy(),
                        report.total.accuracy_with_overlap()
                    );
                }
                None => print!("{}", report.to_csv()),
            }
        }
        Command::Render { input, out, map } => {
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let record = RunRecord::from_csv(&text)?;
            let grid = map.as_deref().map(read_map).transpose()?;
            let path: Vec<WorldPoint> = record.path();
            write_file(&out, render_svg(grid.as_ref(), &path, &[], DetectionParams::default().h_rad))?;
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::PlanningFailed(e)) => {
            eprintln!("planning failure: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
