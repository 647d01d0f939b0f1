use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::campaign::{cell_seed, plant_cases, PlantCase};
use super::config::{ExperimentConfig, PlantSelection};
use super::report::write_text;
use crate::control::{fit_fopdt, imc_tune, pid_drive};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::optim;
use crate::plant::{crossing_frequency, frequency_response, log_space, ResponseTrace, TransferFunction};
use crate::signals::{self, StepLayout, Waveform};

/// One reference drive and what the plant made of it.
#[derive(Clone, Debug)]
pub struct BaselineRow {
    pub technique: String,
    pub drive: Waveform,
    pub response: ResponseTrace,
    /// Measured against the response's own plateaus, since the impulse
    /// drives settle to a lower ON level than the set point.
    pub metrics: MetricsReport,
}

/// Plant the comparison runs on: the selected one, or the canonical plant
/// when the whole variant suite is selected.
fn baseline_case(cfg: &ExperimentConfig) -> Result<PlantCase> {
    let mut single = cfg.clone();
    if single.plant == PlantSelection::AllVariants {
        single.plant = PlantSelection::Canonical;
    }
    plant_cases(&single)?.into_iter().next().ok_or_else(|| Error::invalid("no plant selected"))
}

/// Step, PISIC, MISIC, raised-cosine and IMC-tuned PID drives, followed by
/// one run of each configured optimizer when enabled.
pub fn run_baselines(cfg: &ExperimentConfig) -> Result<Vec<BaselineRow>> {
    cfg.validate()?;
    let case = baseline_case(cfg)?;
    let b = &cfg.baselines;
    let layout = cfg.layout;
    let impulse_layout = StepLayout { v_on: b.impulse_base_v, ..layout };
    let sim = case.ctx.simulator();
    let sp = case.ctx.set_point();

    let step = signals::step(&layout)?;
    let fopdt = fit_fopdt(&sim.simulate(&step)?, &layout)?;
    let pid = imc_tune(&fopdt, b.tau_c_factor)?;
    let mut drives = vec![
        ("step".to_string(), step),
        ("pisic".to_string(), signals::pisic(&impulse_layout, b.impulse_v, b.impulse_width)?),
        ("misic".to_string(), signals::misic(&impulse_layout, b.impulse_v, &b.misic_pattern, b.impulse_width)?),
        ("raised_cosine".to_string(), signals::raised_cosine_step(&layout, b.rc_beta, b.rc_symbol_period)?),
        ("pid".to_string(), pid_drive(sim, sp, &pid)?),
    ];
    if b.include_optimizers {
        for &algorithm in &cfg.algorithms {
            let seed = cell_seed(cfg.base_seed, algorithm, case.variant, 0);
            let record = optim::run(&case.ctx, &cfg.algo_config(algorithm).with_seed(seed))?;
            drives.push((algorithm.name().to_string(), record.best_waveform));
        }
    }
    drives
        .into_iter()
        .map(|(technique, drive)| {
            let response = sim.simulate(&drive)?;
            let metrics = MetricsReport::against_own_levels(&response, sp)?;
            Ok(BaselineRow { technique, drive, response, metrics })
        })
        .collect()
}

/// `technique,<metric columns>` with one row per technique.
pub fn baselines_csv(rows: &[BaselineRow]) -> String {
    let mut out = format!("technique,{}\n", MetricsReport::CSV_HEADER);
    for row in rows {
        let _ = writeln!(out, "{},{}", row.technique, row.metrics.csv_row());
    }
    out
}

/// `sample,time_ps,drive_v,output` for one technique.
pub fn trace_csv(row: &BaselineRow) -> String {
    let mut out = String::from("sample,time_ps,drive_v,output\n");
    let dt = row.drive.sample_period();
    for (i, (u, y)) in row.drive.samples().iter().zip(&row.response.samples).enumerate() {
        let _ = writeln!(out, "{i},{},{u},{y}", i as f64 * dt * 1e12);
    }
    out
}

/// Writes `baselines.csv` and `waveforms/<technique>.csv`.
pub fn write_baselines(rows: &[BaselineRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let table = dir.join("baselines.csv");
    write_text(&table, &baselines_csv(rows))?;
    let mut written = vec![table];
    for row in rows {
        let path = dir.join("waveforms").join(format!("{}.csv", row.technique));
        write_text(&path, &trace_csv(row))?;
        written.push(path);
    }
    Ok(written)
}

/// Default Bode grid.
pub const FREQRESP_LO_HZ: f64 = 1e7;
pub const FREQRESP_HI_HZ: f64 = 1e11;
pub const FREQRESP_POINTS: usize = 401;

/// `freq_hz,magnitude_db` over `n` log-spaced points.
pub fn freqresp_csv(tf: &TransferFunction, lo: f64, hi: f64, n: usize) -> Result<String> {
    let mut out = String::from("freq_hz,magnitude_db\n");
    for (f, db) in frequency_response(tf, &log_space(lo, hi, n))? {
        let _ = writeln!(out, "{f},{db}");
    }
    Ok(out)
}

/// -3 dB bandwidth on the default grid.
pub fn bandwidth_hz(tf: &TransferFunction) -> Option<f64> {
    crossing_frequency(tf, FREQRESP_LO_HZ, FREQRESP_HI_HZ, -3.0)
}
