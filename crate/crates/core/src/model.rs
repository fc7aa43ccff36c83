//! Problem statements for diffusant penetration with a kinetic moving front.
//!
//! [`PhysicalParameters`] holds the dimensional model (mm, min, gram/mm³).
//! [`nondimensionalize`] maps it onto a [`DimensionlessProblem`] using
//!
//! ```text
//! z = x / x_ref,   τ = t·D / x_ref²,   u = m / m_ref,   h = s / x_ref
//! Bi = β·x_ref / D,                 A0 = x_ref·m_ref·a0 / D
//! ```
//!
//! The solvers only ever see the dimensionless form.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::trace::{Snapshot, SolutionTrace};

/// A real function of one variable given in closed form or as a table.
///
/// Tables are interpolated linearly and are undefined outside their
/// abscissa range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Constant(f64),
    Linear { intercept: f64, slope: f64 },
    Table(Vec<(f64, f64)>),
}

impl Profile {
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            Profile::Constant(c) => Some(*c),
            Profile::Linear { intercept, slope } => Some(intercept + slope * x),
            Profile::Table(points) => interpolate(points, x),
        }
    }

    /// Re-express `f` as `g(x') = f(x'·arg_scale) / value_scale`.
    fn rescale(&self, arg_scale: f64, value_scale: f64) -> Profile {
        match self {
            Profile::Constant(c) => Profile::Constant(c / value_scale),
            Profile::Linear { intercept, slope } => Profile::Linear {
                intercept: intercept / value_scale,
                slope: slope * arg_scale / value_scale,
            },
            Profile::Table(points) => Profile::Table(
                points
                    .iter()
                    .map(|&(x, y)| (x / arg_scale, y / value_scale))
                    .collect(),
            ),
        }
    }

    fn validate(&self, what: &'static str) -> Result<(), ModelError> {
        if let Profile::Table(points) = self {
            validate_table(points, what)?;
        }
        Ok(())
    }
}

/// Boundary concentration over time: a constant or a step function.
///
/// For a table, the value at `t` is the value of the last knot with
/// `t_i <= t` (the first value before the first knot).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

impl Forcing {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::Table(points) => {
                let idx = points.partition_point(|&(ti, _)| ti <= t);
                points[idx.saturating_sub(1)].1
            }
        }
    }

    /// `g(τ) = b(τ·time_scale) / value_scale`
    fn rescale(&self, time_scale: f64, value_scale: f64) -> Forcing {
        match self {
            Forcing::Constant(c) => Forcing::Constant(c / value_scale),
            Forcing::Table(points) => Forcing::Table(
                points
                    .iter()
                    .map(|&(t, v)| (t / time_scale, v / value_scale))
                    .collect(),
            ),
        }
    }

    fn min_value(&self) -> f64 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::Table(points) => points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::Table(points) => points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if let Forcing::Table(points) = self {
            validate_table(points, "forcing")?;
        }
        if !(self.min_value() >= 0.0) {
            return Err(ModelError::Invalid("boundary concentration must be >= 0".into()));
        }
        Ok(())
    }
}

/// Breaking/acceleration term of the front law.
///
/// `Linear(c)` is `σ(h) = c·h`; tables interpolate linearly and are held
/// constant beyond their end points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSpec {
    Linear(f64),
    Table(Vec<(f64, f64)>),
}

impl SigmaSpec {
    pub fn eval(&self, h: f64) -> f64 {
        match self {
            SigmaSpec::Linear(c) => c * h,
            SigmaSpec::Table(points) => {
                let first = points[0];
                let last = points[points.len() - 1];
                if h <= first.0 {
                    first.1
                } else if h >= last.0 {
                    last.1
                } else {
                    interpolate(points, h).unwrap_or(last.1)
                }
            }
        }
    }

    fn rescale(&self, arg_scale: f64, value_scale: f64) -> SigmaSpec {
        match self {
            SigmaSpec::Linear(c) => SigmaSpec::Linear(c * arg_scale / value_scale),
            SigmaSpec::Table(points) => SigmaSpec::Table(
                points
                    .iter()
                    .map(|&(x, y)| (x / arg_scale, y / value_scale))
                    .collect(),
            ),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match self {
            SigmaSpec::Linear(c) if !(*c >= 0.0 && c.is_finite()) => Err(ModelError::Invalid(
                format!("sigma coefficient must be finite and >= 0, got {c}"),
            )),
            SigmaSpec::Linear(_) => Ok(()),
            SigmaSpec::Table(points) => validate_table(points, "sigma"),
        }
    }
}

/// Scale factors that tie a dimensionless problem back to physical units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    /// Length scale (mm).
    pub x_ref: f64,
    /// Concentration scale (gram/mm³).
    pub m_ref: f64,
    /// Diffusivity (mm²/min); fixes the time scale `x_ref²/D`.
    pub diffusivity: f64,
}

impl Scales {
    pub fn time_scale(&self) -> f64 {
        self.x_ref * self.x_ref / self.diffusivity
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParameters {
    /// D (mm²/min)
    pub diffusivity: f64,
    /// β (mm/min)
    pub beta: f64,
    /// a0 (mm⁴/min/gram)
    pub a0: f64,
    /// Henry constant
    pub henry: f64,
    /// s0 (mm)
    pub s0: f64,
    /// m0(x) (gram/mm³)
    pub m0: Profile,
    /// b(t) (gram/mm³)
    pub b: Forcing,
    /// σ(s) (gram/mm³)
    pub sigma: SigmaSpec,
    /// ℓ (mm)
    pub ell: f64,
    /// T_f (min)
    pub final_time: f64,
    pub x_ref: f64,
    pub m_ref: f64,
}

impl PhysicalParameters {
    pub fn scales(&self) -> Scales {
        Scales {
            x_ref: self.x_ref,
            m_ref: self.m_ref,
            diffusivity: self.diffusivity,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("diffusivity", self.diffusivity),
            ("beta", self.beta),
            ("a0", self.a0),
            ("henry", self.henry),
            ("s0", self.s0),
            ("ell", self.ell),
            ("final_time", self.final_time),
            ("x_ref", self.x_ref),
            ("m_ref", self.m_ref),
        ] {
            positive(name, v)?;
        }
        if self.s0 >= self.ell {
            return Err(ModelError::Invalid("s0 must be < ell".into()));
        }
        self.m0.validate("m0")?;
        self.b.validate()?;
        self.sigma.validate()?;
        Ok(())
    }
}

/// The solver-facing problem on `0 < z < h(τ)`, `0 < τ < T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionlessProblem {
    /// Biot number.
    pub bi: f64,
    /// Thiele modulus.
    pub a0: f64,
    pub henry: f64,
    pub h0: f64,
    pub length: f64,
    pub final_time: f64,
    pub u0: Profile,
    /// `b(τ)/m_ref`
    pub forcing: Forcing,
    /// `σ(h)/m_ref`
    pub sigma: SigmaSpec,
    /// Present when the problem came from dimensional inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Scales>,
}

impl DimensionlessProblem {
    pub fn sigma_tilde(&self, h: f64) -> f64 {
        self.sigma.eval(h)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("bi", self.bi)?;
        positive("a0", self.a0)?;
        positive("henry", self.henry)?;
        positive("h0", self.h0)?;
        positive("length", self.length)?;
        positive("final_time", self.final_time).or_else(|e| {
            // T = 0 is a legal (empty) run.
            if self.final_time == 0.0 {
                Ok(())
            } else {
                Err(e)
            }
        })?;
        if self.h0 >= self.length {
            return Err(ModelError::Invalid("h0 must be < L".into()));
        }
        self.u0.validate("u0")?;
        self.forcing.validate()?;
        self.sigma.validate()?;
        Ok(())
    }
}

pub fn nondimensionalize(p: &PhysicalParameters) -> Result<DimensionlessProblem, ModelError> {
    for (name, v) in [
        ("x_ref", p.x_ref),
        ("m_ref", p.m_ref),
        ("diffusivity", p.diffusivity),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ModelError::BadScale { name, value: v });
        }
    }
    p.validate()?;
    let scales = p.scales();
    let problem = DimensionlessProblem {
        bi: p.beta * p.x_ref / p.diffusivity,
        a0: p.x_ref * p.m_ref * p.a0 / p.diffusivity,
        henry: p.henry,
        h0: p.s0 / p.x_ref,
        length: p.ell / p.x_ref,
        final_time: p.final_time / scales.time_scale(),
        u0: p.m0.rescale(p.x_ref, p.m_ref),
        forcing: p.b.rescale(scales.time_scale(), p.m_ref),
        sigma: p.sigma.rescale(p.x_ref, p.m_ref),
        scales: Some(scales),
    };
    problem.validate()?;
    Ok(problem)
}

/// Dimensional length (mm) of a dimensionless one.
pub fn to_length(h: f64, s: &Scales) -> f64 {
    h * s.x_ref
}

/// Dimensional time (min) of a dimensionless one.
pub fn to_time(tau: f64, s: &Scales) -> f64 {
    tau * s.time_scale()
}

pub fn to_concentration(u: f64, s: &Scales) -> f64 {
    u * s.m_ref
}

/// Map a dimensionless trace back to mm, minutes and gram/mm³.
///
/// Mass becomes gram/mm² (concentration times length).
pub fn redimensionalize(
    sol: &SolutionTrace,
    p: &PhysicalParameters,
) -> Result<SolutionTrace, ModelError> {
    if sol.dimensional {
        return Err(ModelError::AlreadyDimensional);
    }
    let scales = p.scales();
    match sol.scales {
        Some(trace) if trace == scales => {}
        Some(trace) => return Err(ModelError::ScaleMismatch { trace, params: scales }),
        None => {
            return Err(ModelError::Invalid(
                "trace carries no scale metadata; it was not produced from dimensional inputs"
                    .into(),
            ))
        }
    }
    let len = |v: &[f64]| v.iter().map(|&x| to_length(x, &scales)).collect::<Vec<_>>();
    let time = |v: &[f64]| v.iter().map(|&x| to_time(x, &scales)).collect::<Vec<_>>();
    let conc = |v: &[f64]| v.iter().map(|&x| to_concentration(x, &scales)).collect::<Vec<_>>();
    let mut out = sol.clone();
    out.tau = time(&sol.tau);
    out.front = len(&sol.front);
    out.mass = sol.mass.iter().map(|&m| m * scales.m_ref * scales.x_ref).collect();
    out.left = conc(&sol.left);
    out.final_time = to_time(sol.final_time, &scales);
    out.snapshots = sol
        .snapshots
        .iter()
        .map(|snap| Snapshot {
            requested: to_time(snap.requested, &scales),
            tau: to_time(snap.tau, &scales),
            h: to_length(snap.h, &scales),
            z: len(&snap.z),
            u: conc(&snap.u),
        })
        .collect();
    out.dimensional = true;
    Ok(out)
}

fn positive(name: &'static str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ModelError::Invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn validate_table(points: &[(f64, f64)], what: &str) -> Result<(), ModelError> {
    if points.is_empty() {
        return Err(ModelError::Invalid(format!("{what} table is empty")));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(ModelError::Invalid(format!("{what} table has non-finite entries")));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(ModelError::Invalid(format!(
            "{what} table abscissae must be strictly increasing"
        )));
    }
    Ok(())
}

fn interpolate(points: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    let idx = points.partition_point(|&(xi, _)| xi <= x);
    if idx == points.len() {
        return Some(last.1);
    }
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}
