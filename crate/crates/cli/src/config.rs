//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wigner_core::algebra::AlgebraDescriptor;
use wigner_core::control::{suggest_c, ControlFunction};
use wigner_core::mapgen::{PhaseRule, DEFAULT_MAX_RETRIES};
use wigner_core::module::ModuleDescriptor;
use wigner_core::stability::StabilityParams;

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub algebra: AlgebraSection,
    pub phi: PhiSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub samples: SampleSection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub checks: CheckSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_control: Option<NegativeControl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSection {
    pub block_sizes: Vec<usize>,
    pub rank: usize,
    #[serde(default = "default_extra_rank")]
    pub extra_rank: usize,
    /// Must agree with `block_sizes` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abelian: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CSetting {
    Value(f64),
    Named(CName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CName {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSection {
    pub epsilon: f64,
    pub p: f64,
    pub q: f64,
    #[serde(default = "default_c")]
    pub c: CSetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    Constant,
    Oscillating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub delta: f64,
    pub exponent: f64,
    pub phase_mode: PhaseMode,
    /// Phase frequency of the oscillating mode, `xi(x) = exp(i alpha ln ||x||)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Alternative to `alpha`: the phase repeats after this many steps
    /// `x -> x / c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: usize,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            exponent: 2.0,
            phase_mode: PhaseMode::Oscillating,
            alpha: None,
            period: Some(8.0),
            theta: 0.0,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub points: usize,
    pub orth_pairs: usize,
    pub nonorth_pairs: usize,
    pub probe_pairs: usize,
    pub gate_probes: usize,
    pub norm_min: f64,
    pub norm_max: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            points: 50,
            orth_pairs: 20,
            nonorth_pairs: 20,
            probe_pairs: 100,
            gate_probes: 4,
            norm_min: 0.5,
            norm_max: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub n_max: usize,
    pub cluster_tol: f64,
    pub normality_tol: f64,
    pub rank_tol: f64,
    pub gate_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_start: Option<usize>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        let d = StabilityParams::default();
        Self {
            n_max: d.n_max,
            cluster_tol: d.cluster_tol,
            normality_tol: d.normality_tol,
            rank_tol: d.rank_tol,
            gate_tol: d.gate_tol,
            tail_start: d.tail_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub tol: f64,
    pub orth_margin: f64,
    pub decay_iterations: usize,
    pub invariant_samples: usize,
    pub invariant_tol: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            orth_margin: 0.1,
            decay_iterations: 40,
            invariant_samples: 200,
            invariant_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

/// Deliberate corruption applied after the pipeline, to confirm that the
/// checks catch it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeControl {
    /// Sample point whose `I(x)` is scaled.
    pub point: usize,
    pub image_scale: f64,
}

fn default_extra_rank() -> usize {
    1
}

fn default_c() -> CSetting {
    CSetting::Named(CName::Auto)
}

fn default_max_retries() -> usize {
    DEFAULT_MAX_RETRIES
}

/// Command-line overrides, applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub points: Option<usize>,
}

/// A validated configuration with every derived quantity resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub source: ModuleDescriptor,
    pub phi: ControlFunction,
    pub phase: PhaseRule,
    pub params: StabilityParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.output.dir = d.clone();
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        if let Some(n) = o.points {
            self.samples.points = n;
        }
    }

    /// Checks every precondition and resolves `c = "auto"`.
    pub fn resolve(mut self) -> Result<Resolved, LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        let alg = AlgebraDescriptor::new(self.algebra.block_sizes.clone()).map_err(LabError::config)?;
        if let Some(flag) = self.algebra.abelian {
            if flag != alg.is_abelian() {
                return bad(format!(
                    "abelian = {flag} contradicts block_sizes {:?}",
                    self.algebra.block_sizes
                ));
            }
        }
        let source = ModuleDescriptor::new(alg, self.algebra.rank).map_err(LabError::config)?;

        let PhiSection { epsilon, p, q, c } = self.phi.clone();
        let c = match c {
            CSetting::Named(CName::Auto) => suggest_c(p, q).map_err(LabError::config)?,
            CSetting::Value(v) => v,
        };
        let phi = ControlFunction::power(epsilon, p, q, c).map_err(LabError::config)?;
        self.phi.c = CSetting::Value(c);

        let pert = &self.perturbation;
        if !(pert.delta.is_finite() && pert.delta >= 0.0) {
            return bad(format!("delta must be finite and >= 0, got {}", pert.delta));
        }
        if !pert.exponent.is_finite() {
            return bad(format!("exponent must be finite, got {}", pert.exponent));
        }
        let phase = match pert.phase_mode {
            PhaseMode::Constant => {
                if pert.alpha.is_some() || pert.period.is_some() {
                    return bad("constant phase takes theta only".into());
                }
                PhaseRule::Constant(pert.theta)
            }
            PhaseMode::Oscillating => {
                let alpha = match (pert.alpha, pert.period) {
                    (Some(a), None) => a,
                    (None, Some(n)) if n.is_finite() && n > 0.0 => std::f64::consts::TAU / (n * c.ln().abs()),
                    (None, Some(n)) => return bad(format!("period must be positive, got {n}")),
                    _ => return bad("oscillating phase needs exactly one of alpha, period".into()),
                };
                if !alpha.is_finite() {
                    return bad(format!("alpha must be finite, got {alpha}"));
                }
                PhaseRule::Oscillating { alpha }
            }
        };

        let st = &self.stability;
        let params = StabilityParams {
            c,
            n_max: st.n_max,
            cluster_tol: st.cluster_tol,
            normality_tol: st.normality_tol,
            rank_tol: st.rank_tol,
            gate_tol: st.gate_tol,
            tail_start: st.tail_start,
        };
        params.validate().map_err(LabError::config)?;

        let s = &self.samples;
        if !(s.norm_min > 0.0 && s.norm_min <= s.norm_max && s.norm_max.is_finite()) {
            return bad(format!("need 0 < norm_min <= norm_max, got [{}, {}]", s.norm_min, s.norm_max));
        }
        if s.orth_pairs > 0 && source.rank() < 2 {
            return bad("orthogonal pairs are built from disjoint slots and need rank >= 2".into());
        }
        let ch = &self.checks;
        if !(ch.tol > 0.0 && ch.orth_margin > ch.tol && ch.invariant_tol > 0.0) {
            return bad("check tolerances must be positive with orth_margin > tol".into());
        }
        if ch.decay_iterations == 0 {
            return bad("decay_iterations must be at least 1".into());
        }
        if let Some(nc) = &self.negative_control {
            if nc.point >= s.points {
                return bad(format!("negative_control.point {} out of range", nc.point));
            }
            if !nc.image_scale.is_finite() {
                return bad("negative_control.image_scale must be finite".into());
            }
        }
        Ok(Resolved {
            config: self,
            source,
            phi,
            phase,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 7
        [algebra]
        block_sizes = [2, 1]
        rank = 3
        [phi]
        epsilon = 1e-2
        p = 2.0
        q = 2.0
    "#;

    #[test]
    fn auto_c_resolves() {
        let r = ExperimentConfig::from_toml(MINIMAL).unwrap().resolve().unwrap();
        assert_eq!(r.params.c, 2.0);
        assert_eq!(r.config.phi.c, CSetting::Value(2.0));
        let PhaseRule::Oscillating { alpha } = r.phase else { panic!() };
        assert!((alpha * 2f64.ln() - std::f64::consts::TAU / 8.0).abs() < 1e-15);

        let sub = MINIMAL.replace("p = 2.0", "p = 0.5").replace("q = 2.0", "q = 0.5");
        let r = ExperimentConfig::from_toml(&sub).unwrap().resolve().unwrap();
        assert_eq!(r.params.c, 0.5);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases = [
            MINIMAL.replace("q = 2.0", "q = 0.5"),
            MINIMAL.replace("rank = 3", "rank = 0"),
            MINIMAL.replace("[2, 1]", "[2, 0]"),
            MINIMAL.replace("rank = 3", "rank = 3\nabelian = true"),
            MINIMAL.replace("q = 2.0", "q = 2.0\nc = 0.5"),
            MINIMAL.replace("seed = 7", ""),
            MINIMAL.replace("seed = 7", "seed = 7\nbogus = 1"),
            format!("{MINIMAL}\n[stability]\nn_max = 2"),
            format!("{MINIMAL}\n[negative_control]\npoint = 50\nimage_scale = 1.1"),
        ];
        for text in cases {
            let r = ExperimentConfig::from_toml(&text).and_then(ExperimentConfig::resolve);
            assert!(matches!(r, Err(LabError::Config(_))), "accepted:\n{text}");
        }
    }

    #[test]
    fn overrides_apply() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            points: Some(3),
            format: Some(OutputFormat::Csv),
            out_dir: Some("x".into()),
        });
        assert_eq!((c.seed, c.samples.points), (9, 3));
        assert_eq!(c.output.format, OutputFormat::Csv);
    }
}
