//! Model construction from a key/value config file merged with CLI flags.
//!
//! Config files are plain `key = value` lines (`#` comments allowed) with
//! the keys `kind`, `sigma`, `lambda`, `psi`, `gamma`, `s0`. Every key has
//! a flag equivalent; explicit flags win over the file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use asian_mlp::model::{ModelKind, ModelSpec, TimeWeight};

/// Partially specified model parameters, before merging.
#[derive(Debug, Clone, Default)]
pub struct ModelParams {
    pub kind: Option<String>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub psi: Option<f64>,
    pub gamma: Option<f64>,
    pub s0: Option<f64>,
}

impl ModelParams {
    /// Fill unset fields from a fallback source (file under flags).
    pub fn or(self, fallback: ModelParams) -> ModelParams {
        ModelParams {
            kind: self.kind.or(fallback.kind),
            sigma: self.sigma.or(fallback.sigma),
            lambda: self.lambda.or(fallback.lambda),
            psi: self.psi.or(fallback.psi),
            gamma: self.gamma.or(fallback.gamma),
            s0: self.s0.or(fallback.s0),
        }
    }
}

/// Parse a `key = value` config file.
pub fn parse_config_file(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut params = ModelParams::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), lineno + 1);
        };
        let key = key.trim();
        let value = value.trim();
        let parse_num = || -> Result<f64> {
            value
                .parse::<f64>()
                .with_context(|| format!("{}:{}: bad number for {key}", path.display(), lineno + 1))
        };
        match key {
            "kind" => params.kind = Some(value.to_string()),
            "sigma" => params.sigma = Some(parse_num()?),
            "lambda" => params.lambda = Some(parse_num()?),
            "psi" => params.psi = Some(parse_num()?),
            "gamma" => params.gamma = Some(parse_num()?),
            "s0" => params.s0 = Some(parse_num()?),
            other => bail!("{}:{}: unknown key {other}", path.display(), lineno + 1),
        }
    }
    Ok(params)
}

/// Build a model from merged parameters.
pub fn build_model(params: &ModelParams) -> Result<ModelSpec> {
    let kind_name = params
        .kind
        .as_deref()
        .context("missing model kind (--model or kind= in config)")?;
    let sigma = params.sigma.context("missing sigma")?;
    let s0 = params.s0.context("missing s0")?;
    let need_lambda = || params.lambda.context("missing lambda for time-dependent kind");
    let kind = match kind_name {
        "bachelier" => ModelKind::Bachelier { sigma },
        "tdbachelier" => ModelKind::TimeDepBachelier {
            sigma,
            weight: TimeWeight::Exponential {
                lambda: need_lambda()?,
            },
        },
        "bs" => ModelKind::BlackScholes { sigma },
        "cir" => ModelKind::Cir { sigma },
        "tdcir" => ModelKind::TimeDepCir {
            sigma,
            weight: TimeWeight::Exponential {
                lambda: need_lambda()?,
            },
        },
        "quadratic" => ModelKind::QuadraticTimeDep {
            sigma,
            psi: params.psi.context("missing psi for quadratic kind")?,
            gamma: params.gamma.context("missing gamma for quadratic kind")?,
            lambda: need_lambda()?,
        },
        other => bail!(
            "unknown model kind {other}; expected one of bachelier, tdbachelier, bs, cir, tdcir, quadratic"
        ),
    };
    Ok(ModelSpec::new(kind, s0)?)
}
