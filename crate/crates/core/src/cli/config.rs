//! Experiment configuration: TOML surface syntax, overrides, validation, and
//! construction of the core specs.
//!
//! Indices in config files (`axis`, `alpha`, `beta`) are 1-based to match
//! the usual coordinate labels; they are converted to 0-based internally.

use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::geometry::{Curvature, PhasePoint, SpaceSpec};
use crate::invariants::GeneratorSpec;
use crate::potentials::{Couplings, PotentialTerm, SystemSpec, TMatrix, TermKind};
use crate::reductions::{ReductionKind, ReductionSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// "sphere" | "pseudosphere" | "flat"
    pub kind: String,
    pub dim: usize,
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// Constraint tolerance (relative); optional.
    pub ctol: Option<f64>,
}

fn default_r0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub kind: String,
    #[serde(default)]
    pub omega2: Option<f64>,
    #[serde(default)]
    pub d_omega2: Option<f64>,
    #[serde(default)]
    pub eps_el: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
    /// Diagonal anisotropy matrix entries.
    #[serde(default)]
    pub t_diag: Option<Vec<f64>>,
    /// Full anisotropy matrix (row-major rows).
    #[serde(default)]
    pub t_matrix: Option<Vec<Vec<f64>>>,
    /// 1-based distinguished axis.
    #[serde(default)]
    pub axis: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub momentum_scale: Option<f64>,
    /// Chart-cap fraction of R0 for random positions.
    #[serde(default)]
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
}

fn default_record_every() -> usize {
    1
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_newton_max_iter() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: String,
    #[serde(default)]
    pub alpha: Option<usize>,
    #[serde(default)]
    pub beta: Option<usize>,
    #[serde(default)]
    pub axis: Option<usize>,
    /// Deformed-invariant family coefficients; default (2, 1).
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    /// "ks" | "levi_civita"
    pub kind: String,
    #[serde(default = "default_fiber_tol")]
    pub fiber_tol: f64,
}

fn default_fiber_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    #[serde(default)]
    pub t_min: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    /// Pass bound on relative energy drift.
    #[serde(default)]
    pub energy_drift: Option<f64>,
    /// Pass bound on relative generator drift.
    #[serde(default)]
    pub generator_drift: Option<f64>,
    /// Negative control: the run passes as "expected-fail" when every
    /// generator drifts at least this much.
    #[serde(default)]
    pub expect_drift_at_least: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    #[serde(default = "default_gradcheck_points")]
    pub points: usize,
    #[serde(default = "default_gradcheck_tol")]
    pub tolerance: f64,
}

fn default_gradcheck_points() -> usize {
    100
}

fn default_gradcheck_tol() -> f64 {
    1e-6
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            points: default_gradcheck_points(),
            tolerance: default_gradcheck_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    pub initial: Option<InitialConfig>,
    pub integrator: Option<IntegratorSection>,
    #[serde(default)]
    pub generators: Vec<GeneratorConfig>,
    #[serde(default)]
    pub reduction: Option<ReductionConfig>,
    #[serde(default)]
    pub closure: Option<ClosureConfig>,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub gradcheck: Option<GradcheckConfig>,
    /// Accept anisotropy matrices violating the involution condition
    /// (negative controls only).
    #[serde(default)]
    pub allow_invalid_t: bool,
}

/// Parse a config file after applying `--override key=value` edits to the
/// raw TOML value tree (dotted paths, numeric segments index arrays).
pub fn load_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut value: toml::Value = text
        .parse()
        .map_err(|e| Error::Invalid(format!("config parse error: {e}")))?;
    for (key, val) in overrides {
        apply_override(&mut value, key, val)?;
    }
    let cfg: ExperimentConfig = value
        .try_into()
        .map_err(|e| Error::Invalid(format!("config error: {e}")))?;
    Ok(cfg)
}

fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let parsed: toml::Value = match raw.parse::<toml::Value>() {
        Ok(v) => v,
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let segments: Vec<&str> = key.split('.').collect();
    let mut cursor = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = cursor
                .as_array_mut()
                .ok_or_else(|| Error::Invalid(format!("override path {key}: {seg} is not an array index")))?;
            if idx >= arr.len() {
                return Err(Error::Invalid(format!(
                    "override path {key}: index {idx} out of bounds"
                )));
            }
            if last {
                arr[idx] = parsed;
                return Ok(());
            }
            cursor = &mut arr[idx];
        } else {
            let table = cursor
                .as_table_mut()
                .ok_or_else(|| Error::Invalid(format!("override path {key}: {seg} is not a table key")))?;
            if last {
                table.insert(seg.to_string(), parsed);
                return Ok(());
            }
            cursor = table
                .entry(seg.to_string())
                .or_insert(toml::Value::Table(Default::default()));
        }
    }
    Ok(())
}

/// Parsed `key=value` override argument.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Invalid(format!(
            "override must look like key=value, got {arg:?}"
        ))),
    }
}

fn one_based(idx: usize, dim: usize, what: &str) -> Result<usize> {
    if idx == 0 || idx > dim {
        return Err(Error::Invalid(format!(
            "{what} must be in 1..={dim}, got {idx}"
        )));
    }
    Ok(idx - 1)
}

impl ExperimentConfig {
    pub fn is_flat(&self) -> bool {
        self.space.kind == "flat"
    }

    pub fn build_space(&self) -> Result<SpaceSpec<f64>> {
        let curv = match self.space.kind.as_str() {
            "sphere" => Curvature::Sphere,
            "pseudosphere" => Curvature::Pseudosphere,
            "flat" => return Err(Error::Invalid("flat space has no SpaceSpec".into())),
            other => {
                return Err(Error::Invalid(format!(
                    "space.kind must be sphere|pseudosphere|flat, got {other:?}"
                )))
            }
        };
        let mut sp = SpaceSpec::new(curv, self.space.dim, self.space.r0)?;
        if let Some(ctol) = self.space.ctol {
            sp = sp.with_ctol(ctol);
        }
        Ok(sp)
    }

    fn build_t_matrix(&self, tc: &TermConfig) -> Result<Option<TMatrix<f64>>> {
        let dim = self.space.dim;
        let data: Option<(usize, Vec<f64>)> = if let Some(diag) = &tc.t_diag {
            let n = diag.len();
            let mut m = vec![0.0; n * n];
            for (i, &e) in diag.iter().enumerate() {
                m[i * n + i] = e;
            }
            Some((n, m))
        } else if let Some(rows) = &tc.t_matrix {
            let n = rows.len();
            let mut m = Vec::with_capacity(n * n);
            for row in rows {
                if row.len() != n {
                    return Err(Error::Invalid("t_matrix must be square".into()));
                }
                m.extend_from_slice(row);
            }
            Some((n, m))
        } else {
            None
        };
        match data {
            None => Ok(None),
            Some((n, m)) => {
                if n != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: n,
                    });
                }
                if self.allow_invalid_t {
                    Ok(Some(TMatrix::new_unchecked(n, m)))
                } else {
                    Ok(Some(TMatrix::new(n, m)?))
                }
            }
        }
    }

    fn build_term(&self, tc: &TermConfig) -> Result<PotentialTerm<f64>> {
        let kind = match tc.kind.as_str() {
            "curved_higgs" => TermKind::CurvedHiggs,
            "curved_anisotropic" => TermKind::CurvedAnisotropic,
            "curved_nonlinear" => TermKind::CurvedNonlinear,
            "curved_kepler" => TermKind::CurvedKepler,
            "curved_stark" => TermKind::CurvedStark,
            "curved_cos" => TermKind::CurvedCos,
            "curved_kepler_deformed" => TermKind::CurvedKeplerDeformed,
            "flat_oscillator" => TermKind::FlatOscillator,
            "flat_anisotropic" => TermKind::FlatAnisotropic,
            "flat_quartic" => TermKind::FlatQuartic,
            "flat_kepler" => TermKind::FlatKepler,
            "flat_linear" => TermKind::FlatLinear,
            "flat_cos" => TermKind::FlatCos,
            "monopole_centrifugal" => TermKind::MonopoleCentrifugal,
            other => return Err(Error::Invalid(format!("unknown term kind {other:?}"))),
        };
        let couplings = Couplings {
            omega2: tc.omega2.unwrap_or(0.0),
            d_omega2: tc.d_omega2.unwrap_or(0.0),
            eps_el: tc.eps_el.unwrap_or(0.0),
            gamma: tc.gamma.unwrap_or(0.0),
            s: tc.s.unwrap_or(0.0),
        };
        let mut term = PotentialTerm::new(kind, couplings);
        if kind.needs_t_matrix() {
            match self.build_t_matrix(tc)? {
                Some(t) => term = term.with_t(t),
                None => {
                    return Err(Error::Invalid(format!(
                        "term {} needs t_diag or t_matrix",
                        tc.kind
                    )))
                }
            }
        }
        if let Some(axis) = tc.axis {
            term = term.with_axis(one_based(axis, self.space.dim, "axis")?);
        }
        Ok(term)
    }

    pub fn build_system(&self) -> Result<SystemSpec<f64>> {
        let terms: Vec<PotentialTerm<f64>> = self
            .terms
            .iter()
            .map(|tc| self.build_term(tc))
            .collect::<Result<_>>()?;
        if self.is_flat() {
            SystemSpec::flat(self.space.dim, terms)
        } else {
            SystemSpec::curved(self.build_space()?, terms)
        }
    }

    pub fn build_integrator(&self) -> Result<IntegratorConfig<f64>> {
        let sec = self
            .integrator
            .as_ref()
            .ok_or_else(|| Error::Invalid("missing [integrator] section".into()))?;
        Ok(IntegratorConfig::new(sec.dt, sec.n_steps)?
            .with_record_every(sec.record_every)
            .with_newton(sec.newton_tol, sec.newton_max_iter))
    }

    /// Initial curved phase point, from explicit data or from a seed.
    pub fn build_initial_curved(
        &self,
        space: &SpaceSpec<f64>,
        seed_flag: Option<u64>,
    ) -> Result<PhasePoint<f64>> {
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| Error::Invalid("missing [initial] section".into()))?;
        match (&init.x, &init.p) {
            (Some(x), Some(p)) => PhasePoint::from_spatial(space, x, p),
            (None, None) => {
                let seed = seed_flag
                    .or(init.seed)
                    .ok_or_else(|| Error::Invalid("initial needs x,p or a seed".into()))?;
                let scale = init.momentum_scale.unwrap_or(0.3);
                let cap = init.cap.unwrap_or(crate::geometry::DEFAULT_CHART_CAP);
                Ok(crate::geometry::random_phase_point_capped(
                    space, seed, scale, cap,
                ))
            }
            _ => Err(Error::Invalid(
                "initial needs both x and p, or neither".into(),
            )),
        }
    }

    /// Initial flat state (explicit only).
    pub fn build_initial_flat(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| Error::Invalid("missing [initial] section".into()))?;
        match (&init.x, &init.p) {
            (Some(x), Some(p)) => {
                if x.len() != self.space.dim || p.len() != self.space.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.space.dim,
                        got: x.len(),
                    });
                }
                Ok((x.clone(), p.clone()))
            }
            _ => Err(Error::Invalid(
                "flat systems need explicit initial x and p".into(),
            )),
        }
    }

    /// Couplings inherited by generators: gathered over the system terms.
    pub fn inherited_couplings(&self, system: &SystemSpec<f64>) -> Couplings<f64> {
        let mut c = Couplings::default();
        for term in &system.terms {
            match term.kind {
                TermKind::CurvedHiggs | TermKind::FlatOscillator => {
                    c.omega2 = term.couplings.omega2
                }
                TermKind::CurvedAnisotropic
                | TermKind::FlatAnisotropic
                | TermKind::CurvedCos
                | TermKind::FlatCos => c.d_omega2 = term.couplings.d_omega2,
                TermKind::CurvedNonlinear
                | TermKind::FlatQuartic
                | TermKind::CurvedStark
                | TermKind::FlatLinear => c.eps_el = term.couplings.eps_el,
                TermKind::CurvedKepler | TermKind::FlatKepler => c.gamma = term.couplings.gamma,
                TermKind::CurvedKeplerDeformed => {
                    c.d_omega2 = term.couplings.d_omega2;
                    c.eps_el = term.couplings.eps_el;
                }
                TermKind::MonopoleCentrifugal => c.s = term.couplings.s,
            }
        }
        c
    }

    fn system_t_matrix(&self, system: &SystemSpec<f64>) -> Result<TMatrix<f64>> {
        system
            .terms
            .iter()
            .find_map(|t| t.t.clone())
            .ok_or_else(|| Error::Invalid("no anisotropy matrix in the system terms".into()))
    }

    pub fn build_generators(&self, system: &SystemSpec<f64>) -> Result<Vec<GeneratorSpec<f64>>> {
        let dim = self.space.dim;
        let couplings = self.inherited_couplings(system);
        self.generators
            .iter()
            .map(|gc| {
                let alpha = gc
                    .alpha
                    .map(|a| one_based(a, dim, "alpha"))
                    .transpose()?
                    .unwrap_or(dim - 1);
                let beta = gc.beta.map(|b| one_based(b, dim, "beta")).transpose()?;
                Ok(match gc.kind.as_str() {
                    "j_alpha" => GeneratorSpec::JAlpha { alpha },
                    "l_alphabeta" => GeneratorSpec::LAlphaBeta {
                        alpha,
                        beta: beta.ok_or_else(|| {
                            Error::Invalid("l_alphabeta needs alpha and beta".into())
                        })?,
                    },
                    "higgs_tensor" => GeneratorSpec::HiggsTensor {
                        alpha,
                        beta: beta.unwrap_or(alpha),
                        couplings,
                    },
                    "anisotropic_invariant" => GeneratorSpec::AnisotropicInvariant {
                        couplings,
                        t: self.system_t_matrix(system)?,
                    },
                    "nonlinear_invariant" => GeneratorSpec::NonlinearInvariant {
                        couplings,
                        t: self.system_t_matrix(system)?,
                    },
                    "runge_lenz" => GeneratorSpec::RungeLenz { alpha, couplings },
                    "kepler_deformed_invariant" => GeneratorSpec::KeplerDeformedInvariant {
                        couplings,
                        a: gc.a.unwrap_or(crate::invariants::DEFORMED_PAPER_A),
                        b: gc.b.unwrap_or(crate::invariants::DEFORMED_PAPER_B),
                    },
                    "flat_runge_lenz" => GeneratorSpec::FlatRungeLenz { alpha, couplings },
                    "flat_anisotropic_invariant" => GeneratorSpec::FlatAnisotropicInvariant {
                        couplings,
                        t: self.system_t_matrix(system)?,
                    },
                    "flat_parabolic_invariant" => GeneratorSpec::FlatParabolicInvariant {
                        couplings,
                        axis: gc
                            .axis
                            .map(|a| one_based(a, dim, "axis"))
                            .transpose()?
                            .unwrap_or(dim - 1),
                    },
                    other => {
                        return Err(Error::Invalid(format!(
                            "unknown generator kind {other:?}"
                        )))
                    }
                })
            })
            .collect()
    }

    pub fn build_reduction(&self) -> Result<Option<ReductionSpec<f64>>> {
        match &self.reduction {
            None => Ok(None),
            Some(rc) => {
                let kind = match rc.kind.as_str() {
                    "ks" => ReductionKind::Ks,
                    "levi_civita" => ReductionKind::LeviCivita,
                    other => {
                        return Err(Error::Invalid(format!(
                            "reduction.kind must be ks|levi_civita, got {other:?}"
                        )))
                    }
                };
                Ok(Some(ReductionSpec {
                    kind,
                    fiber_tol: rc.fiber_tol,
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[space]
kind = "sphere"
dim = 2

[[terms]]
kind = "curved_higgs"
omega2 = 1.0

[initial]
x = [0.3, 0.0]
p = [0.0, 0.4]

[integrator]
dt = 1e-3
n_steps = 100
"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = load_config(MINIMAL, &[]).unwrap();
        let sys = cfg.build_system().unwrap();
        assert_eq!(sys.dim(), 2);
        let space = cfg.build_space().unwrap();
        let ph = cfg.build_initial_curved(&space, None).unwrap();
        assert!(space.tangency_residual(&ph) < 1e-14);
        cfg.build_integrator().unwrap();
    }

    #[test]
    fn override_applies_to_nested_path() {
        let cfg = load_config(MINIMAL, &[("terms.0.omega2".into(), "2.5".into())]).unwrap();
        assert_eq!(cfg.terms[0].omega2, Some(2.5));
        let cfg = load_config(MINIMAL, &[("allow_invalid_t".into(), "true".into())]).unwrap();
        assert!(cfg.allow_invalid_t);
    }

    #[test]
    fn invalid_t_rejected_unless_allowed() {
        let text = r#"
[space]
kind = "sphere"
dim = 2

[[terms]]
kind = "curved_anisotropic"
d_omega2 = 0.5
t_diag = [1.0, -0.9]

[initial]
x = [0.1, 0.0]
p = [0.0, 0.1]

[integrator]
dt = 1e-3
n_steps = 10
"#;
        let cfg = load_config(text, &[]).unwrap();
        assert!(matches!(cfg.build_system(), Err(Error::InvalidT(_))));
        let cfg = load_config(text, &[("allow_invalid_t".into(), "true".into())]).unwrap();
        assert!(cfg.build_system().is_ok());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MINIMAL.replace("[integrator]", "[integrator]\nbogus_field = 3");
        let with_bogus = text.replace("dt = 1e-3", "dt = 1e-3");
        assert!(load_config(&with_bogus, &[]).is_err());
    }

    #[test]
    fn parse_override_shapes() {
        assert!(parse_override("a=1").is_ok());
        assert!(parse_override("a.b.c=true").is_ok());
        assert!(parse_override("novalue").is_err());
    }
}
