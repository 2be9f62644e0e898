//! Quantifier front-end: MLPE, (P)CC, (P)ACC and the importance-weighted
//! and neighborhood-aware ACC variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    density_ratio, kernel_density, nacc_features, DensityWeights, Outcomes, PredictionMode, PredictionSet,
    DEFAULT_DENSITY_FLOOR,
};
use crate::graph::Graph;
use crate::kernels::KernelSpec;
use crate::solver::{solve_simplex_lsq, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMethod {
    Mlpe,
    Cc,
    Acc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantifierSpec {
    pub base: BaseMethod,
    /// Soft predictions: CC becomes PCC and ACC becomes PACC.
    #[serde(default)]
    pub probabilistic: bool,
    #[serde(default)]
    pub nacc: bool,
    /// Test-density kernel. Setting either kernel enables importance weighting;
    /// an unset one is the constant kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_q: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_p: Option<KernelSpec>,
    /// Display name override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl QuantifierSpec {
    pub fn new(base: BaseMethod) -> Self {
        Self {
            base,
            probabilistic: false,
            nacc: false,
            kernel_q: None,
            kernel_p: None,
            name: None,
        }
    }

    pub fn mlpe() -> Self {
        Self::new(BaseMethod::Mlpe)
    }

    pub fn cc() -> Self {
        Self::new(BaseMethod::Cc)
    }

    pub fn acc() -> Self {
        Self::new(BaseMethod::Acc)
    }

    pub fn probabilistic(mut self) -> Self {
        self.probabilistic = true;
        self
    }

    pub fn with_nacc(mut self) -> Self {
        self.nacc = true;
        self
    }

    pub fn with_sis(mut self, kernel_q: KernelSpec, kernel_p: Option<KernelSpec>) -> Self {
        self.kernel_q = Some(kernel_q);
        self.kernel_p = kernel_p;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn uses_sis(&self) -> bool {
        self.kernel_q.is_some() || self.kernel_p.is_some()
    }

    pub fn mode(&self) -> PredictionMode {
        if self.probabilistic {
            PredictionMode::Soft
        } else {
            PredictionMode::Hard
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base != BaseMethod::Acc {
            if self.nacc {
                return Err(Error::Config("neighborhood-aware counting requires an ACC base".into()));
            }
            if self.uses_sis() {
                return Err(Error::Config("importance weighting requires an ACC base".into()));
            }
        }
        for k in self.kernel_q.iter().chain(&self.kernel_p) {
            k.validate()?;
        }
        Ok(())
    }

    /// Canonical method name such as `PACC+SIS+NACC`.
    pub fn method_name(&self) -> String {
        let mut s = match (self.base, self.probabilistic) {
            (BaseMethod::Mlpe, _) => return "MLPE".into(),
            (BaseMethod::Cc, false) => "CC".to_string(),
            (BaseMethod::Cc, true) => "PCC".to_string(),
            (BaseMethod::Acc, false) => "ACC".to_string(),
            (BaseMethod::Acc, true) => "PACC".to_string(),
        };
        if self.uses_sis() {
            s.push_str("+SIS");
        }
        if self.nacc {
            s.push_str("+NACC");
        }
        s
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.method_name())
    }
}

impl fmt::Display for QuantifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_name())
    }
}

/// Parses names like `acc`, `pcc`, `pacc+sis+nacc` (case-insensitive).
/// `+sis` uses the default interpolated PPR kernel for `k_q`.
impl FromStr for QuantifierSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let mut parts = lower.split('+');
        let mut spec = match parts.next().unwrap_or("") {
            "mlpe" => Self::mlpe(),
            "cc" => Self::cc(),
            "pcc" => Self::cc().probabilistic(),
            "acc" => Self::acc(),
            "pacc" => Self::acc().probabilistic(),
            other => return Err(Error::Config(format!("unknown quantifier {other:?}"))),
        };
        for part in parts {
            match part {
                "sis" => spec.kernel_q = Some(KernelSpec::ppr_default()),
                "nacc" => spec.nacc = true,
                other => return Err(Error::Config(format!("unknown quantifier modifier {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub solver_iterations: usize,
    pub objective: f64,
    /// Classes whose weighted training support vanished.
    pub zero_support: Vec<usize>,
}

impl Diagnostics {
    fn trivial() -> Self {
        Self {
            converged: true,
            ..Self::default()
        }
    }

    /// Compact flag string for result tables; empty when nothing happened.
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        if !self.converged {
            flags.push("nonconverged".to_string());
        }
        if !self.zero_support.is_empty() {
            let ids: Vec<String> = self.zero_support.iter().map(|c| c.to_string()).collect();
            flags.push(format!("zero_support:{}", ids.join("/")));
        }
        flags.join(";")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceVector {
    pub q: Vec<f64>,
    pub spec: QuantifierSpec,
    pub diagnostics: Diagnostics,
}

impl PrevalenceVector {
    pub fn k(&self) -> usize {
        self.q.len()
    }
}

/// Everything that does not depend on the test sample, computed once.
struct Prepared<'a> {
    spec: &'a QuantifierSpec,
    g: &'a Graph,
    train: &'a [(usize, usize)],
    train_vertices: Vec<usize>,
    preds: &'a PredictionSet,
    features: Option<Vec<(usize, usize)>>,
    train_density: Option<Vec<f64>>,
}

impl<'a> Prepared<'a> {
    fn new(spec: &'a QuantifierSpec, g: &'a Graph, train: &'a [(usize, usize)], preds: &'a PredictionSet) -> Result<Self> {
        spec.validate()?;
        let k = preds.k();
        if let Some(&(_, y)) = train.iter().find(|(_, y)| *y >= k) {
            return Err(Error::Validation(format!("training label {y} out of range for {k} classes")));
        }
        let train_vertices: Vec<usize> = train.iter().map(|&(v, _)| v).collect();
        for &v in &train_vertices {
            g.check_vertex(v)?;
        }
        let needs_train = spec.base == BaseMethod::Mlpe || spec.base == BaseMethod::Acc;
        if needs_train && train.is_empty() {
            return Err(Error::Empty("training set".into()));
        }
        let mut features = None;
        let mut train_density = None;
        if spec.base == BaseMethod::Acc {
            preds.check_covers(&train_vertices)?;
            if spec.nacc {
                features = Some(nacc_features(g, preds)?);
            }
            if spec.uses_sis() {
                let kp = spec.kernel_p.unwrap_or(KernelSpec::Constant);
                train_density = Some(kernel_density(&kp, g, &train_vertices, &train_vertices)?);
            }
        }
        Ok(Self {
            spec,
            g,
            train,
            train_vertices,
            preds,
            features,
            train_density,
        })
    }

    fn quantify(&self, test: &[usize]) -> Result<PrevalenceVector> {
        let k = self.preds.k();
        let spec = self.spec;
        let finish = |q: Vec<f64>, diagnostics: Diagnostics| PrevalenceVector {
            q,
            spec: spec.clone(),
            diagnostics,
        };
        match spec.base {
            BaseMethod::Mlpe => {
                let mut q = vec![0.0; k];
                for &(_, y) in self.train {
                    q[y] += 1.0;
                }
                let n = self.train.len() as f64;
                q.iter_mut().for_each(|x| *x /= n);
                Ok(finish(q, Diagnostics::trivial()))
            }
            BaseMethod::Cc => {
                self.preds.check_covers(test)?;
                let outcomes = Outcomes::new(self.preds, None, spec.mode())?;
                Ok(finish(outcomes.prevalence(test)?, Diagnostics::trivial()))
            }
            BaseMethod::Acc => {
                for &v in test {
                    self.g.check_vertex(v)?;
                }
                self.preds.check_covers(test)?;
                let outcomes = Outcomes::new(self.preds, self.features.as_deref(), spec.mode())?;
                let weights = match &self.train_density {
                    None => DensityWeights::uniform(self.train.len()),
                    Some(p_hat) => {
                        let kq = spec.kernel_q.unwrap_or(KernelSpec::Constant);
                        let q_hat = kernel_density(&kq, self.g, &self.train_vertices, test)?;
                        density_ratio(&q_hat, p_hat, DEFAULT_DENSITY_FLOOR)?
                    }
                };
                let confusion = outcomes.confusion(self.train, &weights)?;
                let observed = outcomes.prevalence(test)?;
                let sol = solve_simplex_lsq(&confusion.matrix, k, &observed, SolverOptions::default())?;
                Ok(finish(
                    sol.q,
                    Diagnostics {
                        converged: sol.converged,
                        solver_iterations: sol.iterations,
                        objective: sol.objective,
                        zero_support: confusion.zero_support,
                    },
                ))
            }
        }
    }
}

/// Estimates the label prevalence of `test`.
///
/// `train` pairs quantifier-training vertices with their true labels; the
/// class count is taken from `preds`.
pub fn quantify(
    spec: &QuantifierSpec,
    g: &Graph,
    train: &[(usize, usize)],
    test: &[usize],
    preds: &PredictionSet,
) -> Result<PrevalenceVector> {
    Prepared::new(spec, g, train, preds)?.quantify(test)
}

/// [`quantify`] over many test samples, sharing the training-side work.
pub fn quantify_batch(
    spec: &QuantifierSpec,
    g: &Graph,
    train: &[(usize, usize)],
    samples: &[Vec<usize>],
    preds: &PredictionSet,
) -> Result<Vec<Result<PrevalenceVector>>> {
    let prepared = Prepared::new(spec, g, train, preds)?;
    Ok(samples.iter().map(|s| prepared.quantify(s)).collect())
}
