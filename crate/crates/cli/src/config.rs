//! Experiment configuration: a TOML file with nested sections. Unknown keys
//! are rejected so typos cannot silently change a run.

use anyhow::{anyhow, bail, Result};
use reluflow::flow::FlowConfig;
use reluflow::model::{DomainMeasure, NetworkShape, ParamVector, Target, TargetPiece};
use reluflow::rng::{derive_seed, standard_normal, uniform01};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub shape: ShapeCfg,
    pub domain: DomainCfg,
    pub target: TargetCfg,
    pub init: InitCfg,
    pub flow: FlowCfg,
    /// Post-run checks: any of `conservation`, `energy`, `lyapunov`,
    /// `boundedness`, `limsup`, `monotone`.
    #[serde(default)]
    pub checks: Vec<String>,
    pub output: OutputCfg,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeCfg {
    pub d: usize,
    pub hidden: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainCfg {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetCfg {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Alternative to `alpha`/`beta`: explicit pieces `[lo, hi, slope,
    /// intercept]` tiling `[a, b]`.
    pub pieces: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitCfg {
    /// Explicit parameter vector of length `d·H + 2H + 1`.
    pub values: Option<Vec<f64>>,
    pub random: Option<RandomInitCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInitCfg {
    /// `normal` (i.i.d. N(0, scale²)) or `uniform` (i.i.d. on [-scale, scale]).
    #[serde(default = "default_dist")]
    pub dist: String,
    /// Defaults to 1/√H.
    pub scale: Option<f64>,
    pub seed: u64,
}

fn default_dist() -> String {
    "normal".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowCfg {
    pub t_end: f64,
    pub dt_init: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub rk_tol: Option<f64>,
    pub event_tol: Option<f64>,
    pub sample_stride: Option<usize>,
    /// Lyapunov reference level; defaults to the target mean.
    pub xi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    pub dir: std::path::PathBuf,
    /// Write every `stride`-th stored snapshot to the CSV (default 1).
    pub stride: Option<usize>,
}

pub const KNOWN_CHECKS: [&str; 6] = [
    "conservation",
    "energy",
    "lyapunov",
    "boundedness",
    "limsup",
    "monotone",
];

/// Fully validated problem ready to run.
#[derive(Debug)]
pub struct Experiment {
    pub theta0: ParamVector<f64>,
    pub target: Target<f64>,
    pub dom: DomainMeasure<f64>,
    pub flow: FlowConfig<f64>,
    pub xi: Option<f64>,
    pub checks: Vec<String>,
    pub out_dir: std::path::PathBuf,
    pub out_stride: usize,
    pub init_desc: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn build(&self) -> Result<Experiment> {
        if self.shape.d == 0 {
            bail!("shape.d: must be at least 1");
        }
        if self.shape.hidden == 0 {
            bail!("shape.hidden: must be at least 1");
        }
        if self.shape.d != 1 {
            bail!("shape.d: simulate requires d = 1, got {}", self.shape.d);
        }
        let shape = NetworkShape::new(self.shape.d, self.shape.hidden);
        let dom = DomainMeasure::new(self.domain.a, self.domain.b, self.domain.rho)
            .map_err(|e| anyhow!("domain: {e}"))?;
        let target = self.build_target(&dom)?;
        let theta0 = self.build_init(shape)?;
        let init_desc = self.describe_init(shape);
        let flow = self.build_flow()?;
        let mut checks = Vec::new();
        for name in &self.checks {
            if !KNOWN_CHECKS.contains(&name.as_str()) {
                bail!(
                    "checks: unknown check '{name}' (expected one of {})",
                    KNOWN_CHECKS.join(", ")
                );
            }
            checks.push(name.clone());
        }
        let out_stride = self.output.stride.unwrap_or(1);
        if out_stride == 0 {
            bail!("output.stride: must be at least 1");
        }
        Ok(Experiment {
            theta0,
            target,
            dom,
            flow,
            xi: self.flow.xi,
            checks,
            out_dir: self.output.dir.clone(),
            out_stride,
            init_desc,
        })
    }

    fn build_target(&self, dom: &DomainMeasure<f64>) -> Result<Target<f64>> {
        match (&self.target.pieces, self.target.alpha, self.target.beta) {
            (Some(pieces), None, None) => {
                let pieces: Vec<TargetPiece<f64>> = pieces
                    .iter()
                    .map(|&[lo, hi, slope, intercept]| TargetPiece {
                        lo,
                        hi,
                        slope,
                        intercept,
                    })
                    .collect();
                let t = Target::from_pieces(pieces).map_err(|e| anyhow!("target.pieces: {e}"))?;
                if (t.lo() - dom.a()).abs() > 1e-9 || (t.hi() - dom.b()).abs() > 1e-9 {
                    bail!(
                        "target.pieces: must tile the domain [{}, {}]",
                        dom.a(),
                        dom.b()
                    );
                }
                Ok(t)
            }
            (None, Some(alpha), beta) => Ok(Target::affine(alpha, beta.unwrap_or(0.0), dom)),
            (None, None, _) => bail!("target: set either alpha/beta or pieces"),
            _ => bail!("target: alpha/beta and pieces are mutually exclusive"),
        }
    }

    fn build_init(&self, shape: NetworkShape) -> Result<ParamVector<f64>> {
        match (&self.init.values, &self.init.random) {
            (Some(values), None) => ParamVector::new(shape, values.clone())
                .map_err(|e| anyhow!("init.values: {e}")),
            (None, Some(random)) => {
                let scale = random
                    .scale
                    .unwrap_or(1.0 / (shape.hidden() as f64).sqrt());
                if !(scale > 0.0) {
                    bail!("init.random.scale: must be positive");
                }
                let seed = derive_seed(random.seed, 0x1217);
                let values: Vec<f64> = (0..shape.dim())
                    .map(|k| match random.dist.as_str() {
                        "normal" => scale * standard_normal::<f64>(seed, k as u64),
                        "uniform" => scale * (2.0 * uniform01::<f64>(seed, k as u64) - 1.0),
                        _ => f64::NAN,
                    })
                    .collect();
                if values.iter().any(|x| x.is_nan()) {
                    bail!(
                        "init.random.dist: unknown distribution '{}' (normal or uniform)",
                        random.dist
                    );
                }
                ParamVector::new(shape, values).map_err(|e| anyhow!("init.random: {e}"))
            }
            (None, None) => bail!("init: set either values or random"),
            _ => bail!("init: values and random are mutually exclusive"),
        }
    }

    fn describe_init(&self, shape: NetworkShape) -> String {
        match (&self.init.values, &self.init.random) {
            (Some(_), _) => "explicit".to_string(),
            (_, Some(r)) => format!(
                "{}(scale = {}, seed = {})",
                r.dist,
                r.scale
                    .unwrap_or(1.0 / (shape.hidden() as f64).sqrt()),
                r.seed
            ),
            _ => "unset".to_string(),
        }
    }

    fn build_flow(&self) -> Result<FlowConfig<f64>> {
        let mut cfg = FlowConfig::new(self.flow.t_end);
        if let Some(x) = self.flow.dt_init {
            cfg.dt_init = x;
        }
        if let Some(x) = self.flow.dt_min {
            cfg.dt_min = x;
        }
        if let Some(x) = self.flow.dt_max {
            cfg.dt_max = x;
        }
        if let Some(x) = self.flow.rk_tol {
            cfg.rk_tol = x;
        }
        if let Some(x) = self.flow.event_tol {
            cfg.event_tol = x;
        }
        if let Some(x) = self.flow.sample_stride {
            cfg.sample_stride = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[shape]
d = 1
hidden = 1

[domain]
a = 0.0
b = 1.0
rho = 1.0

[target]
alpha = 1.0
beta = 0.0

[init]
values = [1.2, -0.05, 0.9, 0.05]

[flow]
t_end = 10.0

[output]
dir = "out"
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.theta0.values(), &[1.2, -0.05, 0.9, 0.05]);
        assert_eq!(exp.flow.t_end, 10.0);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = GOOD.replace("[flow]\nt_end = 10.0", "[flow]\nt_end = 10.0\nbogus = 1");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn rejects_zero_rk_tol_naming_field() {
        let text = GOOD.replace("t_end = 10.0", "t_end = 10.0\nrk_tol = 0.0");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let err = cfg.build().unwrap_err().to_string();
        assert!(err.contains("rk_tol"), "{err}");
    }

    #[test]
    fn rejects_unknown_check() {
        // Top-level keys must precede tables in TOML.
        let text = format!("checks = [\"magic\"]\n{GOOD}");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let err = cfg.build().unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }

    #[test]
    fn random_init_is_reproducible() {
        let text = GOOD.replace(
            "values = [1.2, -0.05, 0.9, 0.05]",
            "[init.random]\nseed = 7",
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let a = cfg.build().unwrap().theta0;
        let b = cfg.build().unwrap().theta0;
        assert_eq!(a.values(), b.values());
    }
}
