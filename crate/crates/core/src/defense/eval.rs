use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Detector, Method};
use crate::error::{Error, Result};
use crate::sensor_model::Scan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub method: Method,
    pub attack_scenes: usize,
    pub benign_scenes: usize,
    pub true_positives: usize,
    pub true_negatives: usize,
    /// Scenes on which the detector failed; these count as flagged.
    pub errors: usize,
    pub tpr: f64,
    pub tnr: f64,
    pub mean_runtime_ms: f64,
    pub p95_runtime_ms: f64,
}

/// One detector run on one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneRun {
    pub attacked: bool,
    pub flagged: bool,
    /// The detector returned an error; such scenes count as flagged.
    pub failed: bool,
    pub runtime_ms: f64,
}

pub fn run_scene(detector: &dyn Detector, scan: &Scan, attacked: bool) -> SceneRun {
    let start = Instant::now();
    let outcome = detector.detect(scan);
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let (flagged, failed) = match outcome {
        Ok(v) => (v.is_attack, false),
        Err(_) => (true, true),
    };
    SceneRun {
        attacked,
        flagged,
        failed,
        runtime_ms,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Confusion counts, rates and runtime statistics of a set of runs.
pub fn summarize(method: Method, runs: &[SceneRun]) -> Result<Evaluation> {
    let attack_scenes = runs.iter().filter(|r| r.attacked).count();
    let benign_scenes = runs.len() - attack_scenes;
    if benign_scenes == 0 {
        return Err(Error::EmptySet("benign scenes"));
    }
    if attack_scenes == 0 {
        return Err(Error::EmptySet("attack scenes"));
    }
    let true_positives = runs.iter().filter(|r| r.attacked && r.flagged).count();
    let true_negatives = runs.iter().filter(|r| !r.attacked && !r.flagged).count();
    let mut times: Vec<f64> = runs.iter().map(|r| r.runtime_ms).collect();
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    Ok(Evaluation {
        method,
        attack_scenes,
        benign_scenes,
        true_positives,
        true_negatives,
        errors: runs.iter().filter(|r| r.failed).count(),
        tpr: true_positives as f64 / attack_scenes as f64,
        tnr: true_negatives as f64 / benign_scenes as f64,
        mean_runtime_ms: mean,
        p95_runtime_ms: percentile(&times, 0.95),
    })
}

/// TPR over `attack`, TNR over `benign`, and per-scene runtimes. Scenes run
/// on the current rayon pool, each timed on its own.
pub fn evaluate(detector: &dyn Detector, benign: &[Scan], attack: &[Scan]) -> Result<Evaluation> {
    let runs: Vec<SceneRun> = attack
        .par_iter()
        .map(|s| run_scene(detector, s, true))
        .chain(benign.par_iter().map(|s| run_scene(detector, s, false)))
        .collect();
    summarize(detector.method(), &runs)
}
