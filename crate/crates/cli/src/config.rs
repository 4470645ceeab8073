use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MagnusLinearOrder,
    MagnusNonlinear,
    VdpAveraging,
    VdpLimitCycle,
    NlsAveraging,
    OracleCrosscheck,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::MagnusLinearOrder,
        Experiment::MagnusNonlinear,
        Experiment::VdpAveraging,
        Experiment::VdpLimitCycle,
        Experiment::NlsAveraging,
        Experiment::OracleCrosscheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MagnusLinearOrder => "magnus-linear-order",
            Experiment::MagnusNonlinear => "magnus-nonlinear",
            Experiment::VdpAveraging => "vdp-averaging",
            Experiment::VdpLimitCycle => "vdp-limit-cycle",
            Experiment::NlsAveraging => "nls-averaging",
            Experiment::OracleCrosscheck => "oracle-crosscheck",
        }
    }

    /// Largest expansion order the experiment accepts.
    fn max_order(self) -> usize {
        match self {
            Experiment::MagnusLinearOrder => 6,
            Experiment::MagnusNonlinear | Experiment::OracleCrosscheck => 4,
            Experiment::VdpAveraging | Experiment::VdpLimitCycle => 3,
            Experiment::NlsAveraging => 2,
        }
    }

    fn default_system(self) -> System {
        match self {
            Experiment::NlsAveraging => System::Nls1d,
            _ => System::Vdp,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum System {
    #[serde(rename = "vdp")]
    Vdp,
    #[serde(rename = "nls1d")]
    Nls1d,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Vdp => "vdp",
            System::Nls1d => "nls1d",
        }
    }
}

/// `eps` may be a single value or a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSpec {
    Scalar(f64),
    List(Vec<f64>),
}

impl EpsSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EpsSpec::Scalar(e) => vec![*e],
            EpsSpec::List(v) => v.clone(),
        }
    }
}

/// Raw experiment description, as read from JSON. Everything except
/// `experiment` is optional and falls back to a per-experiment default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<System>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<EpsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            system: None,
            eps: None,
            order: None,
            t_end: None,
            quad_nodes: None,
            tol: None,
            out_dir: None,
            seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills in defaults and checks ranges.
    pub fn resolve(&self) -> Result<Resolved, RunError> {
        let exp = self.experiment;
        let bad = |msg: String| Err(RunError::Config(msg));

        let system = self.system.unwrap_or(exp.default_system());
        let allowed = match exp {
            Experiment::VdpAveraging | Experiment::VdpLimitCycle => system == System::Vdp,
            Experiment::NlsAveraging => system == System::Nls1d,
            _ => true,
        };
        if !allowed {
            return bad(format!("experiment `{exp}` does not run on system `{}`", system.name()));
        }

        let eps = match &self.eps {
            Some(e) => e.values(),
            None => match exp {
                Experiment::MagnusLinearOrder => vec![0.2, 0.1, 0.05, 0.025],
                Experiment::MagnusNonlinear => vec![0.1, 0.05, 0.025],
                Experiment::VdpAveraging => vec![0.05],
                Experiment::VdpLimitCycle => vec![0.1],
                Experiment::NlsAveraging => vec![0.1, 0.05],
                Experiment::OracleCrosscheck => vec![1.0],
            },
        };
        if eps.is_empty() {
            return bad("eps list is empty".into());
        }
        if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("eps must be positive and finite, got {e}"));
        }
        if exp == Experiment::VdpLimitCycle && eps.len() != 1 {
            return bad("vdp-limit-cycle takes a single eps".into());
        }

        let order = self.order.unwrap_or(match exp {
            Experiment::MagnusLinearOrder => 4,
            Experiment::OracleCrosscheck => 3,
            Experiment::NlsAveraging => 1,
            _ => 2,
        });
        if order == 0 || order > exp.max_order() {
            return bad(format!(
                "order for `{exp}` must be in 1..={}, got {order}",
                exp.max_order()
            ));
        }
        if exp == Experiment::OracleCrosscheck && order < 2 {
            return bad("oracle-crosscheck needs order >= 2".into());
        }
        if exp == Experiment::MagnusNonlinear && system == System::Nls1d && order > 2 {
            return bad("magnus-nonlinear on nls1d supports order <= 2".into());
        }

        let t_end = self.t_end.unwrap_or(match exp {
            Experiment::MagnusLinearOrder | Experiment::MagnusNonlinear => 1.0,
            Experiment::OracleCrosscheck => 0.9,
            Experiment::VdpAveraging => 100.0,
            Experiment::VdpLimitCycle => 400.0,
            Experiment::NlsAveraging => 2.0 * std::f64::consts::PI,
        });
        if !(t_end.is_finite() && t_end > 0.0) {
            return bad(format!("t_end must be positive and finite, got {t_end}"));
        }

        let quad_nodes = self.quad_nodes.unwrap_or(match (exp, system) {
            (Experiment::MagnusLinearOrder | Experiment::OracleCrosscheck, _) => 16,
            (_, System::Nls1d) => 32,
            _ => 64,
        });
        if !(2..=512).contains(&quad_nodes) {
            return bad(format!("quad_nodes must be in 2..=512, got {quad_nodes}"));
        }

        let tol = self.tol.unwrap_or(1e-12);
        if !(tol > 0.0 && tol < 1.0) {
            return bad(format!("tol must be in (0, 1), got {tol}"));
        }

        Ok(Resolved {
            experiment: exp,
            system,
            eps,
            order,
            t_end,
            quad_nodes,
            tol,
            out_dir: self
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out").join(exp.name())),
            seed: self.seed.unwrap_or(1),
        })
    }
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub experiment: Experiment,
    pub system: System,
    pub eps: Vec<f64>,
    pub order: usize,
    pub t_end: f64,
    /// Gauss–Legendre nodes per panel.
    pub quad_nodes: usize,
    pub tol: f64,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub seed: u64,
}
