//! Machine-readable run reports and plot-ready CSV emission.
//!
//! CSV contract: '.' decimal, comma separator, LF line endings, mandatory
//! header row, numeric fields printed with 17 significant digits so reruns
//! are byte-identical.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{FlatTrajectory, Trajectory};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::reductions::MappedTrajectory;

/// 17-significant-digit scientific form used for every CSV numeric field.
pub fn fmt_num<T: Real>(v: T) -> String {
    format!("{:.16e}", v)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionMetadata {
    pub phase_momentum: &'static str,
    pub j_alpha: &'static str,
    pub runge_lenz: &'static str,
    pub anisotropic_invariant: &'static str,
    pub nonlinear_invariant: &'static str,
    pub reduction: ReductionMetadata,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionMetadata {
    pub position_norm: &'static str,
    pub momentum_divisor: f64,
    pub time_factor: f64,
    pub gamma_divisor: f64,
    pub kepler_energy_divisor: f64,
    /// Measured anisotropic-image coefficient over the printed d_omega^2/4.
    pub cos_coefficient_ratio: f64,
}

pub fn conventions() -> ConventionMetadata {
    let c = crate::reductions::CONSTANTS;
    ConventionMetadata {
        phase_momentum: "velocity form: tangency x.p + eps*x0*p0 = 0, kinetic (p.p + eps*p0^2)/2",
        j_alpha: "J_a = x0*p_a - x_a*p0 (locked by free-motion conservation)",
        runge_lenz: "A_a = (1/R0) sum_b J_b L_ba + gamma*x_a/|x| (sigma = +1); flat limit gamma*x/|x| - p x L",
        anisotropic_invariant: "A = T_ab A_ab + (d_omega^2/2) x.x (flat limit: per-axis energy difference)",
        nonlinear_invariant: "A = T_ab A_ab + eps_el (R0^2 (x.x)^2/x0^2 + R0^4 (x.Tx)^2/x0^4)",
        reduction: ReductionMetadata {
            position_norm: "|x| = u.u",
            momentum_divisor: c.momentum_divisor,
            time_factor: c.time_factor,
            gamma_divisor: c.gamma_divisor,
            kepler_energy_divisor: c.kepler_energy_divisor,
            cos_coefficient_ratio: c.cos_coefficient_ratio,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub initial: f64,
    pub max_abs_drift: f64,
    pub max_rel_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    pub max_surface_residual: f64,
    pub max_tangency_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub a: f64,
    pub b: f64,
    pub paper_a: f64,
    pub paper_b: f64,
    pub max_rel_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorReport {
    pub name: String,
    pub initial: f64,
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
    pub verdict: String,
    /// Present when the deformed-invariant fallback fit ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub kind: String,
    pub oscillator_energy: f64,
    pub gamma_eff: f64,
    pub kepler_energy_expected: f64,
    pub kepler_energy_max_dev: f64,
    pub max_fiber_momentum: f64,
    pub terms_out: Vec<String>,
    /// Measured cos-image coefficient and its ratio to the printed
    /// d_omega^2/4 form (1.0 means agreement with the printed image).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cos_image_coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cos_image_ratio_to_printed: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureReport {
    pub found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub return_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub return_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckRow {
    pub term: String,
    pub geometry: String,
    pub max_rel_err: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub conventions: ConventionMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub generators: Vec<GeneratorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure: Option<ClosureReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub gradcheck: Vec<GradcheckRow>,
    pub verdict: String,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunReport {
            command: command.to_string(),
            schema_version: 1,
            seed,
            config,
            conventions: conventions(),
            energy: None,
            constraints: None,
            generators: Vec::new(),
            reduction: None,
            closure: None,
            gradcheck: Vec::new(),
            verdict: "pass".to_string(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid(format!("report serialization: {e}")))?;
        write_file(path, &(text + "\n"))
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", parent.display())))?;
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::Invalid(format!("write {}: {e}", path.display())))?;
    Ok(())
}

/// Curved trajectory CSV: `t,x1..xd,x0,p1..pd,p0,H,surface_res,tangency_res`.
pub fn trajectory_csv<T: Real>(traj: &Trajectory<T>, dim: usize) -> String {
    let mut out = String::from("t");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",x0");
    for i in 1..=dim {
        out.push_str(&format!(",p{i}"));
    }
    out.push_str(",p0,H,surface_res,tangency_res\n");
    for s in &traj.samples {
        out.push_str(&fmt_num(s.t));
        for v in &s.ph.q.x {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push(',');
        out.push_str(&fmt_num(s.ph.q.x0));
        for v in &s.ph.p {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push(',');
        out.push_str(&fmt_num(s.ph.p0));
        out.push(',');
        out.push_str(&fmt_num(s.energy));
        out.push(',');
        out.push_str(&fmt_num(s.surface_res));
        out.push(',');
        out.push_str(&fmt_num(s.tangency_res));
        out.push('\n');
    }
    out
}

/// Flat trajectory CSV: `t,x1..xd,p1..pd,H`.
pub fn flat_trajectory_csv<T: Real>(traj: &FlatTrajectory<T>, dim: usize) -> String {
    let mut out = String::from("t");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    for i in 1..=dim {
        out.push_str(&format!(",p{i}"));
    }
    out.push_str(",H\n");
    for s in &traj.samples {
        out.push_str(&fmt_num(s.t));
        for v in &s.x {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        for v in &s.p {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push(',');
        out.push_str(&fmt_num(s.energy));
        out.push('\n');
    }
    out
}

/// Mapped (Kepler-side) trajectory CSV: `s,x1..,p1..,H_kepler`.
pub fn mapped_trajectory_csv<T: Real>(mapped: &MappedTrajectory<T>) -> Result<String> {
    let dim = mapped.samples[0].x.len();
    let energies = mapped.kepler_energy_series()?;
    let mut out = String::from("s");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    for i in 1..=dim {
        out.push_str(&format!(",p{i}"));
    }
    out.push_str(",H_kepler\n");
    for (s, e) in mapped.samples.iter().zip(energies) {
        out.push_str(&fmt_num(s.s));
        for v in &s.x {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        for v in &s.p {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push(',');
        out.push_str(&fmt_num(e));
        out.push('\n');
    }
    Ok(out)
}

/// Drift-vs-time CSV for one generator: `t,value,abs_dev,rel_dev`.
pub fn drift_csv<T: Real>(times: &[T], values: &[T], rel_floor: T) -> String {
    let v0 = values[0];
    let mut out = String::from("t,value,abs_dev,rel_dev\n");
    for (t, v) in times.iter().zip(values) {
        let abs = (*v - v0).abs();
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_num(*t),
            fmt_num(*v),
            fmt_num(abs),
            fmt_num(abs / rel_floor)
        ));
    }
    out
}

pub fn gradcheck_csv(rows: &[GradcheckRow]) -> String {
    let mut out = String::from("term,geometry,max_rel_err,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.term,
            r.geometry,
            fmt_num(r.max_rel_err),
            r.pass
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_num_17_digits() {
        assert_eq!(fmt_num(1.0_f64), "1.0000000000000000e0");
        assert_eq!(fmt_num(-0.5_f64), "-5.0000000000000000e-1");
    }

    #[test]
    fn report_round_trips_through_json() {
        let rep = RunReport::new("simulate", serde_json::json!({"a": 1}), Some(7));
        let text = serde_json::to_string(&rep).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["command"], "simulate");
        assert_eq!(back["seed"], 7);
        assert!(back["conventions"]["j_alpha"].as_str().unwrap().contains("x0*p_a"));
    }
}
