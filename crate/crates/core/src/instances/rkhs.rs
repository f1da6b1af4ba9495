use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{unit_dictionary_instance, Instance};
use crate::error::{Error, Result};
use crate::hilbert::{AmbientVector, InnerProductSpace, ZERO_RESIDUAL_TOL};
use crate::measures::{DiscreteMeasure, RandomStream};
use crate::solvers::{alpha, SolverTrajectory};

/// Relative diagonal jitter used when no regularizer is given.
pub const DEFAULT_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(−(x − y)² / (2 width²))`.
    Gaussian { width: f64 },
    /// `min(x, y) + 1`.
    MinPlusOne,
    /// Values `K(x_i, x_j)` given directly; nodes only label rows.
    Grid { values: Vec<Vec<f64>> },
}

impl Kernel {
    /// Kernel value at two points. Grid kernels have no values off the nodes.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            Kernel::Gaussian { width } => Ok((-(x - y).powi(2) / (2.0 * width * width)).exp()),
            Kernel::MinPlusOne => Ok(x.min(y) + 1.0),
            Kernel::Grid { .. } => Err(Error::Unsupported(
                "grid kernels can only be evaluated on their nodes".into(),
            )),
        }
    }

    fn gram(&self, nodes: &[f64]) -> Result<DMatrix<f64>> {
        let n = nodes.len();
        match self {
            Kernel::Grid { values } => {
                if values.len() != n || values.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid(format!("grid kernel must be {n}x{n}")));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| values[i][j]))
            }
            Kernel::Gaussian { width } if !(*width > 0.0) || !width.is_finite() => {
                Err(Error::invalid(format!("gaussian width must be positive, got {width}")))
            }
            _ => {
                let mut g = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] = self.eval(nodes[i], nodes[j])?;
                    }
                }
                Ok(g)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkhsSpec {
    pub kernel: Kernel,
    pub nodes: Vec<f64>,
    /// Absolute jitter on the Gram diagonal; `None` means `1e-10 × max diagonal`.
    #[serde(default)]
    pub regularizer: Option<f64>,
}

impl RkhsSpec {
    pub fn new(kernel: Kernel, nodes: Vec<f64>) -> Self {
        Self {
            kernel,
            nodes,
            regularizer: None,
        }
    }

    /// `count` equispaced nodes on `[0, 1]`.
    pub fn equispaced(kernel: Kernel, count: usize) -> Self {
        let nodes = (0..count)
            .map(|i| if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 })
            .collect();
        Self::new(kernel, nodes)
    }
}

/// Kernel space truncated to `span{K_{x_1}, …, K_{x_N}}`. Vectors are coefficient
/// vectors `c` of `f = Σ c_j K_{x_j}`.
#[derive(Debug, Clone)]
pub struct RkhsInstance {
    spec: RkhsSpec,
    raw_gram: DMatrix<f64>,
    jitter: f64,
    instance: Instance,
}

/// Builds the kernel instance. The regularized kernel `K + τδ` is the reproducing kernel
/// of the truncated space, so point evaluations below use it.
pub fn rkhs_instance(spec: RkhsSpec, measure: DiscreteMeasure) -> Result<RkhsInstance> {
    let n = spec.nodes.len();
    if n == 0 {
        return Err(Error::invalid("kernel instance needs at least one node"));
    }
    if measure.len() != n {
        return Err(Error::invalid(format!("{n} nodes but {} weights", measure.len())));
    }
    if spec.nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("nodes must be finite"));
    }
    let mut sorted = spec.nodes.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("nodes must be distinct"));
    }
    let raw_gram = spec.kernel.gram(&spec.nodes)?;
    let max_diag = raw_gram.diagonal().max();
    let jitter = match spec.regularizer {
        Some(t) if t >= 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::invalid(format!("regularizer must be >= 0, got {t}"))),
        None => DEFAULT_JITTER * max_diag,
    };
    let mut gram = raw_gram.clone();
    for i in 0..n {
        gram[(i, i)] += jitter;
    }
    let space = InnerProductSpace::new(gram)?;
    let atoms = (0..n)
        .map(|i| {
            let mut e = AmbientVector::zeros(n);
            e[i] = 1.0 / space.gram()[(i, i)].sqrt();
            e
        })
        .collect();
    let instance = unit_dictionary_instance(space, atoms, measure)?;
    Ok(RkhsInstance {
        spec,
        raw_gram,
        jitter,
        instance,
    })
}

impl RkhsInstance {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn spec(&self) -> &RkhsSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[f64] {
        &self.spec.nodes
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `[K(x_i, x_j)]` without jitter.
    pub fn raw_gram(&self) -> &DMatrix<f64> {
        &self.raw_gram
    }

    fn kernel_at_nodes(&self, i: usize, j: usize) -> f64 {
        self.raw_gram[(i, j)] + if i == j { self.jitter } else { 0.0 }
    }

    /// `f(x_i)` under the unregularized kernel, summed term by term.
    pub fn evaluate_raw(&self, coeffs: &AmbientVector, i: usize) -> f64 {
        (0..coeffs.len()).map(|j| coeffs[j] * self.raw_gram[(j, i)]).sum()
    }

    /// `f(x_i)` under the regularized kernel, summed term by term.
    pub fn evaluate(&self, coeffs: &AmbientVector, i: usize) -> f64 {
        (0..coeffs.len()).map(|j| coeffs[j] * self.kernel_at_nodes(j, i)).sum()
    }

    /// `f(x)` off the nodes; unavailable for grid kernels.
    pub fn evaluate_at(&self, coeffs: &AmbientVector, x: f64) -> Result<f64> {
        let mut s = 0.0;
        for (c, &xj) in coeffs.iter().zip(&self.spec.nodes) {
            s += c * self.spec.kernel.eval(xj, x)?;
        }
        Ok(s)
    }

    /// Coefficients of `L_K g = Σ ρ_i g(x_i) K_{x_i}`.
    pub fn integral_operator(&self, g: &AmbientVector) -> AmbientVector {
        let rho = self.instance.measure();
        AmbientVector::from_fn(g.len(), |i, _| rho.weight(i) * self.evaluate(g, i))
    }

    /// The randomized iteration written with point evaluations only:
    /// `u⁽ᵐ⁺¹⁾ = α_m u⁽ᵐ⁾ + ξ_m e⁽ᵐ⁾(ω)/K(ω,ω) K_ω`.
    pub fn run_point_evaluation(
        &self,
        target: &AmbientVector,
        m_max: usize,
        stream: &mut RandomStream,
    ) -> Result<SolverTrajectory> {
        let space = self.instance.space();
        space.check(target)?;
        let measure = self.instance.measure();
        let mut iterate = AmbientVector::zeros(target.len());
        let mut traj = SolverTrajectory {
            iterates: None,
            sq_errors: vec![space.sq_norm(target)],
            chosen: Vec::with_capacity(m_max),
            xis: Vec::with_capacity(m_max),
        };
        for m in 0..m_max {
            let w = measure.sample(stream);
            let k_ww = self.kernel_at_nodes(w, w);
            let f_w = self.evaluate(target, w);
            let u_w = self.evaluate(&iterate, w);
            let t = self.evaluate(&(target - &iterate), w) / k_ww;
            let a = alpha(m);
            let err = traj.sq_errors[m].sqrt();
            let xi = if (t.abs() * k_ww.sqrt()) > ZERO_RESIDUAL_TOL * err {
                (f_w - a * u_w) / (t * k_ww)
            } else {
                0.0
            };
            iterate *= a;
            iterate[w] += xi * t;
            traj.sq_errors.push(space.sq_norm(&(target - &iterate)));
            traj.chosen.push(w);
            traj.xis.push(xi);
        }
        Ok(traj)
    }
}
