use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use pralab::defense::Method;
use pralab::harness::{self, Campaign, DefendArgs, ExperimentReport, InputKind};
use pralab::io::KittiDataset;
use pralab::kinematics::ScenarioConfig;
use pralab::laser_safety::LaserParams;
use pralab::sensor_model::{AzimuthInterval, SensorConfig};

/// Removal-attack experiments on LiDAR point clouds.
#[derive(Parser)]
#[command(name = "pralab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON file with the subcommand's settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// KITTI object-detection root (with velodyne/, label_2/, calib/).
    #[arg(long, global = true, env = "PRALAB_KITTI_DIR")]
    dataset: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Removed points per attack angle on a dense ring.
    Capability {
        #[arg(long, default_value = "vlp16")]
        sensor: String,
        #[arg(long, default_value = "apollo")]
        stack: String,
        /// Angles as `lo..hi` (whole degrees, inclusive) or a comma list.
        #[arg(long, default_value = "0..45")]
        angles: String,
        /// Also run the capability-limited attacker from this distance.
        #[arg(long)]
        spoofer_distance: Option<f64>,
    },
    /// Minimum removal angle per target.
    Attack {
        #[arg(long)]
        pedestrians: Option<usize>,
        #[arg(long)]
        vehicles: Option<usize>,
    },
    /// Detector TPR/TNR over benign and attacked scenes.
    Defend {
        #[arg(long)]
        method: String,
        #[arg(long)]
        scenes: Option<usize>,
        /// Attack angles `lo..hi` in whole degrees.
        #[arg(long)]
        angles: Option<String>,
        /// Attack each target with its full-removal angle.
        #[arg(long)]
        full_removal: bool,
        /// Azimuth span watched by the gap detector, `start..end` in degrees.
        #[arg(long)]
        roi: Option<String>,
    },
    /// Approach runs with collision verdicts.
    Simulate {
        /// Scenario grid CSV; the built-in grid when absent.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Eye-safety numbers for the spoofing laser.
    Safety,
    /// Validate and summarize one input file.
    Parse {
        path: PathBuf,
        /// velodyne, labels, calib, packet, csv or pcd; guessed when absent.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value = "hdl64")]
        sensor: String,
    },
}

fn parse_range(text: &str) -> Result<(u32, u32)> {
    let (lo, hi) = text.split_once("..").with_context(|| format!("expected lo..hi, got {text:?}"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn parse_angles(text: &str) -> Result<Vec<f64>> {
    if text.contains("..") {
        let (lo, hi) = parse_range(text)?;
        return Ok((lo..=hi).map(f64::from).collect());
    }
    text.split(',')
        .map(|a| a.trim().parse::<f64>().with_context(|| format!("bad angle {a:?}")))
        .collect()
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

fn run(cli: Cli) -> Result<Vec<ExperimentReport>> {
    let g = &cli.global;
    let dataset = g.dataset.as_ref().map(KittiDataset::new);
    let report = match cli.command {
        Command::Capability {
            sensor,
            stack,
            angles,
            spoofer_distance,
        } => {
            let sensor = SensorConfig::resolve(&sensor)?;
            harness::cmd_capability(&sensor, &stack, &parse_angles(&angles)?, spoofer_distance)?
        }
        Command::Attack { pedestrians, vehicles } => {
            let mut campaign: Campaign = load_config(g.config.as_deref())?;
            if let Some(n) = pedestrians {
                campaign.pedestrians = n;
            }
            if let Some(n) = vehicles {
                campaign.vehicles = n;
            }
            if let Some(seed) = g.seed {
                campaign.seed = seed;
            }
            harness::cmd_attack(&campaign, dataset.as_ref())?
        }
        Command::Defend {
            method,
            scenes,
            angles,
            full_removal,
            roi,
        } => {
            let method: Method = method.parse()?;
            let mut args: DefendArgs = load_config(g.config.as_deref())?;
            if let Some(n) = scenes {
                args.scenes = n;
            }
            if let Some(a) = angles {
                args.angle_range_deg = parse_range(&a)?;
            }
            if let Some(roi) = roi {
                let (lo, hi) = roi.split_once("..").context("expected start..end")?;
                let (lo, hi): (f64, f64) = (lo.trim().parse()?, hi.trim().parse()?);
                args.roi = Some(AzimuthInterval::new(lo, (hi - lo).rem_euclid(360.0)));
            }
            args.full_removal |= full_removal;
            if let Some(seed) = g.seed {
                args.seed = seed;
            }
            harness::cmd_defend(method, &args, dataset.as_ref())?
        }
        Command::Simulate { grid, dt } => {
            let base: ScenarioConfig = load_config(g.config.as_deref())?;
            let text = match &grid {
                Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                None => harness::default_scenario_grid(),
            };
            let scenarios = harness::read_scenario_grid(&text, &base)
                .with_context(|| format!("grid {}", grid.as_deref().map_or("<built-in>".into(), |p| p.display().to_string())))?;
            let (report, timelines) = harness::cmd_simulate(&scenarios, dt, grid.as_deref())?;
            std::fs::create_dir_all(&g.out)?;
            std::fs::write(g.out.join("timelines.csv"), harness::timelines_csv(&timelines))?;
            report
        }
        Command::Safety => {
            let params: LaserParams = load_config(g.config.as_deref())?;
            harness::cmd_safety(&params)?
        }
        Command::Parse { path, kind, sensor } => {
            let kind = kind.map(|k| k.parse::<InputKind>()).transpose()?;
            harness::cmd_parse(&path, kind, &SensorConfig::resolve(&sensor)?)?
        }
    };
    Ok(vec![report])
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.global.out.clone();
    let workers = cli.global.workers;
    let result = harness::with_workers(workers, move || run(cli)).map_err(anyhow::Error::from).and_then(|r| r);
    let reports = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    for report in reports {
        match report.write(&out) {
            Ok((csv, json)) => {
                println!("{}", report.summary);
                for f in &report.soft_failures {
                    eprintln!("warning: {f}");
                }
                eprintln!("wrote {} and {}", csv.display(), json.display());
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    ExitCode::SUCCESS
}
