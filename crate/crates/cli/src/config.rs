//! JSON run configuration and its translation into core objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use schwarz_rand::harness::{bound_inputs, class_norms, collective_bound_inputs, BoundInputs};
use schwarz_rand::instances::{
    collective_instance, orthonormal_instance, random_unit_atoms, rkhs_instance, unit_dictionary_instance,
    CollectiveInstance, CollectiveSpec, Instance, Kernel, RkhsInstance, RkhsSpec,
};
use schwarz_rand::solvers::{NoiseSpec, RhsMode, Variant, XiSchedule};
use schwarz_rand::spectral::{hs_norm, make_hs_element, SmoothnessClassReport};
use schwarz_rand::{AmbientVector, DiscreteMeasure, InnerProductSpace, RandomStream};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weights {
    Uniform,
    /// `ρ_j ∝ ratio^j`.
    Geometric { ratio: f64 },
    /// Normalized to sum one.
    Explicit { values: Vec<f64> },
}

impl Weights {
    fn measure(&self, n: usize) -> Result<DiscreteMeasure, CliError> {
        let m = match self {
            Weights::Uniform => DiscreteMeasure::uniform(n),
            Weights::Geometric { ratio } => DiscreteMeasure::geometric(n, *ratio),
            Weights::Explicit { values } => {
                if values.len() != n {
                    return Err(CliError::Config(format!("expected {n} weights, got {}", values.len())));
                }
                DiscreteMeasure::normalized(values.clone())
            }
        };
        m.map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Atoms {
    /// Unit vectors drawn uniformly from the sphere of the space.
    Random { count: usize, seed: u64 },
    /// Rescaled to unit norm.
    Explicit { vectors: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nodes {
    Equispaced { count: usize },
    Explicit { points: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceConfig {
    Orthonormal {
        dim: usize,
        weights: Weights,
    },
    UnitDictionary {
        dim: usize,
        /// Gram matrix of the ambient space; Euclidean when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gram: Option<Vec<Vec<f64>>>,
        atoms: Atoms,
        weights: Weights,
    },
    Rkhs {
        kernel: Kernel,
        nodes: Nodes,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regularizer: Option<f64>,
        weights: Weights,
    },
    Collective {
        dim: usize,
        n: usize,
        atoms: usize,
        seed: u64,
        weights: Weights,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// Random direction in the eigenbasis of `L`, scaled to `‖u‖_{H^s_L} = norm`.
    HsElement {
        s: f64,
        #[serde(default = "one")]
        norm: f64,
        seed: u64,
    },
    Explicit { values: Vec<f64> },
    Basis { index: usize },
    /// `L_K g` for Gaussian `g`, scaled to `‖u‖_{H^{1/2}_L} = 1`. Kernel instances only.
    IntegralImage { seed: u64 },
    /// The stacked orthonormal system. Collective instances only.
    Phi,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiConfig {
    Optimal,
    Prescribed { xi0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    Random,
    Omp,
    Greedy {
        #[serde(default = "one")]
        beta: f64,
    },
    Noisy {
        sigma: f64,
        #[serde(default = "optimal")]
        xi: XiConfig,
    },
}

fn optimal() -> XiConfig {
    XiConfig::Optimal
}

impl SolverConfig {
    pub fn variant(&self) -> Result<Variant, CliError> {
        Ok(match self {
            SolverConfig::Random => Variant::Random,
            SolverConfig::Omp => Variant::Omp,
            SolverConfig::Greedy { beta } => Variant::Greedy { beta: *beta, pool: None },
            SolverConfig::Noisy { sigma, xi } => {
                let schedule = match xi {
                    XiConfig::Optimal => XiSchedule::Optimal,
                    XiConfig::Prescribed { xi0 } => XiSchedule::Prescribed { xi0: *xi0 },
                };
                Variant::Noisy(NoiseSpec::new(*sigma, schedule)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsConfig {
    #[default]
    Direct,
    Functional,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV goes to stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

impl OutputConfig {
    fn is_empty(&self) -> bool {
        self.csv.is_none() && self.json.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    pub target: TargetConfig,
    pub solver: SolverConfig,
    pub m_max: usize,
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub rhs_mode: RhsConfig,
    /// Smoothness index for the interpolation bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "OutputConfig::is_empty")]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that do not need the instance to be built.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        match (&self.instance, &self.target) {
            (InstanceConfig::Collective { .. }, TargetConfig::Phi) => {}
            (InstanceConfig::Collective { .. }, _) => return bad("collective instances take the phi target".into()),
            (_, TargetConfig::Phi) => return bad("the phi target needs a collective instance".into()),
            (InstanceConfig::Rkhs { .. }, TargetConfig::IntegralImage { .. }) => {}
            (_, TargetConfig::IntegralImage { .. }) => {
                return bad("the integral_image target needs an rkhs instance".into())
            }
            _ => {}
        }
        if let TargetConfig::HsElement { s, norm, .. } = self.target {
            if !(s >= 0.0 && s.is_finite()) || !(norm >= 0.0 && norm.is_finite()) {
                return bad(format!("hs_element needs s >= 0 and norm >= 0, got s = {s}, norm = {norm}"));
            }
        }
        if let Some(s) = self.interpolation_s {
            if !(s > 0.0 && s < 0.5) {
                return bad(format!("interpolation_s must lie in (0, 1/2), got {s}"));
            }
        }
        if let SolverConfig::Greedy { beta } = self.solver {
            if !(beta > 0.0 && beta <= 1.0) {
                return bad(format!("greedy beta must lie in (0, 1], got {beta}"));
            }
        }
        if matches!(self.instance, InstanceConfig::Collective { .. }) && self.rhs_mode == RhsConfig::Functional {
            return bad("functional right-hand sides are not available for collective instances".into());
        }
        self.solver.variant()?;
        Ok(())
    }
}

/// An instance with its target, ready to run.
pub struct Built {
    pub instance: Instance,
    pub target: AmbientVector,
    pub rhs_mode: RhsMode,
    pub kind: BuiltKind,
}

pub enum BuiltKind {
    Plain,
    Rkhs(Box<RkhsInstance>),
    Collective(Box<CollectiveInstance>),
}

impl Built {
    pub fn norms(&self, s_list: &[f64]) -> Result<SmoothnessClassReport, CliError> {
        let inst = match &self.kind {
            BuiltKind::Collective(c) => c.instance(),
            _ => &self.instance,
        };
        Ok(class_norms(inst, &self.target, s_list)?)
    }

    pub fn bound_inputs(&self, interpolation_s: Option<f64>) -> Result<BoundInputs, CliError> {
        if let BuiltKind::Collective(c) = &self.kind {
            let dec = c.component_instance().decomposition()?;
            return Ok(collective_bound_inputs(c, &dec)?);
        }
        let mut s_list = vec![0.5];
        s_list.extend(interpolation_s);
        let norms = self.norms(&s_list)?;
        let dec = self.instance.decomposition()?;
        Ok(bound_inputs(&self.instance, &self.target, &norms, Some(&dec), interpolation_s))
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<nalgebra::DMatrix<f64>, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("{what} must be square")));
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn random_coeffs(n: usize, seed: u64) -> Vec<f64> {
    let mut s = RandomStream::new(seed);
    let v: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    let rhs_mode = match cfg.rhs_mode {
        RhsConfig::Direct => RhsMode::Direct,
        RhsConfig::Functional => RhsMode::Functional,
    };
    let (instance, kind) = match &cfg.instance {
        InstanceConfig::Orthonormal { dim, weights } => (orthonormal_instance(*dim, weights.measure(*dim)?)?, BuiltKind::Plain),
        InstanceConfig::UnitDictionary {
            dim,
            gram,
            atoms,
            weights,
        } => {
            let space = match gram {
                Some(g) => InnerProductSpace::new(matrix(g, "gram")?)?,
                None => InnerProductSpace::euclidean(*dim)?,
            };
            if space.dim() != *dim {
                return Err(CliError::Config(format!("gram has dimension {}, expected {dim}", space.dim())));
            }
            let atoms = match atoms {
                Atoms::Random { count, seed } => random_unit_atoms(&space, *count, &mut RandomStream::new(*seed)),
                Atoms::Explicit { vectors } => vectors
                    .iter()
                    .map(|v| {
                        if v.len() != *dim {
                            return Err(CliError::Config(format!("atom of length {}, expected {dim}", v.len())));
                        }
                        let a = AmbientVector::from_vec(v.clone());
                        let n = space.norm(&a);
                        if !(n > 0.0) {
                            return Err(CliError::Config("atoms must be nonzero".into()));
                        }
                        Ok(a / n)
                    })
                    .collect::<Result<_, _>>()?,
            };
            let n = atoms.len();
            (unit_dictionary_instance(space, atoms, weights.measure(n)?)?, BuiltKind::Plain)
        }
        InstanceConfig::Rkhs {
            kernel,
            nodes,
            regularizer,
            weights,
        } => {
            let mut spec = match nodes {
                Nodes::Equispaced { count } => RkhsSpec::equispaced(kernel.clone(), *count),
                Nodes::Explicit { points } => RkhsSpec::new(kernel.clone(), points.clone()),
            };
            spec.regularizer = *regularizer;
            let n = spec.nodes.len();
            let k = rkhs_instance(spec, weights.measure(n)?)?;
            (k.instance().clone(), BuiltKind::Rkhs(Box::new(k)))
        }
        InstanceConfig::Collective {
            dim,
            n,
            atoms,
            seed,
            weights,
        } => {
            let spec = CollectiveSpec::random(*dim, *n, *atoms, &mut RandomStream::new(*seed))?;
            let c = collective_instance(spec, weights.measure(*atoms)?)?;
            (c.instance().clone(), BuiltKind::Collective(Box::new(c)))
        }
    };
    let d = instance.space().dim();
    let target = match &cfg.target {
        TargetConfig::HsElement { s, norm, seed } => {
            let dec = instance.decomposition()?;
            make_hs_element(&dec, *s, &random_coeffs(dec.rank(), *seed))? * *norm
        }
        TargetConfig::Explicit { values } => {
            if values.len() != d {
                return Err(CliError::Config(format!("target of length {}, expected {d}", values.len())));
            }
            AmbientVector::from_vec(values.clone())
        }
        TargetConfig::Basis { index } => {
            if *index >= d {
                return Err(CliError::Config(format!("basis index {index} out of range for dimension {d}")));
            }
            let mut e = AmbientVector::zeros(d);
            e[*index] = 1.0;
            e
        }
        TargetConfig::IntegralImage { seed } => {
            let BuiltKind::Rkhs(k) = &kind else { unreachable!("validated") };
            let mut s = RandomStream::new(*seed);
            let g = AmbientVector::from_fn(d, |_, _| s.standard_normal());
            let lg = k.integral_operator(&g);
            let scale = hs_norm(&lg, 0.5, &instance.decomposition()?)?;
            lg / scale
        }
        TargetConfig::Phi => {
            let BuiltKind::Collective(c) = &kind else { unreachable!("validated") };
            c.target()
        }
    };
    Ok(Built {
        instance,
        target,
        rhs_mode,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../../../configs/orthonormal.json");

    fn all_kinds() -> Vec<RunConfig> {
        let base = RunConfig::from_json(EXAMPLE).unwrap();
        let mut out = vec![base.clone()];
        let mut c = base.clone();
        c.instance = InstanceConfig::UnitDictionary {
            dim: 3,
            gram: Some(vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.0], vec![0.0, 0.0, 1.0]]),
            atoms: Atoms::Explicit {
                vectors: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]],
            },
            weights: Weights::Explicit {
                values: vec![1.0, 2.0, 3.0, 4.0],
            },
        };
        c.target = TargetConfig::Explicit {
            values: vec![0.1, -0.2, 0.3],
        };
        c.solver = SolverConfig::Noisy {
            sigma: 0.1,
            xi: XiConfig::Prescribed { xi0: 1.5 },
        };
        c.rhs_mode = RhsConfig::Functional;
        c.output.json = Some("report.json".into());
        out.push(c);
        let mut c = base.clone();
        c.instance = InstanceConfig::Rkhs {
            kernel: Kernel::Gaussian { width: 0.2 },
            nodes: Nodes::Equispaced { count: 8 },
            regularizer: Some(1e-9),
            weights: Weights::Geometric { ratio: 0.9 },
        };
        c.target = TargetConfig::IntegralImage { seed: 3 };
        c.solver = SolverConfig::Greedy { beta: 0.5 };
        out.push(c);
        let mut c = base;
        c.instance = InstanceConfig::Collective {
            dim: 6,
            n: 2,
            atoms: 9,
            seed: 4,
            weights: Weights::Uniform,
        };
        c.target = TargetConfig::Phi;
        c.solver = SolverConfig::Omp;
        c.threads = Some(2);
        out.push(c);
        out
    }

    #[test]
    fn round_trip_is_identity() {
        for cfg in all_kinds() {
            let text = cfg.to_json();
            let back = RunConfig::from_json(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_json(), text);
            build(&back).unwrap();
        }
    }

    #[test]
    fn example_builds_unit_target() {
        let cfg = RunConfig::from_json(EXAMPLE).unwrap();
        let b = build(&cfg).unwrap();
        let n = b.norms(&[0.5]).unwrap();
        assert!((n.hs(0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let base = RunConfig::from_json(EXAMPLE).unwrap();
        let mut c = base.clone();
        c.runs = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.target = TargetConfig::Phi;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.solver = SolverConfig::Greedy { beta: 1.5 };
        assert!(c.validate().is_err());
        let mut c = base;
        c.target = TargetConfig::Basis { index: 99 };
        assert!(matches!(build(&c), Err(CliError::Config(_))));
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
