//! JSON run spec format. Every default is set here.

use std::path::{Path, PathBuf};

use brwlab::kernels::{KernelSpec, RateKernel, Vertex};
use brwlab::montecarlo::{BracketPolicy, MCConfig, TargetSpec};
use serde::Deserialize;

use crate::error::CliError;

/// Subcommand names as they appear in the optional `command` field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Params,
    Simulate,
    PhaseDiagram,
    Compare,
    Q0Check,
}

/// A kernel given inline or as a path to a kernel JSON file, resolved
/// against the directory of the run spec.
#[derive(Clone, Debug, Deserialize)]
#[serde(try_from = "serde_json::Value")]
pub enum KernelSource {
    Path(PathBuf),
    Inline(KernelSpec),
}

impl TryFrom<serde_json::Value> for KernelSource {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        match v {
            serde_json::Value::String(p) => Ok(Self::Path(p.into())),
            v => serde_json::from_value(v).map(Self::Inline).map_err(|e| format!("kernel: {e}")),
        }
    }
}

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// When present, must name the subcommand being run.
    #[serde(default)]
    pub command: Option<CommandName>,
    #[serde(default)]
    pub kernel: Option<KernelSource>,
    /// The modified kernel for `compare` and `q0-check`.
    #[serde(default)]
    pub kernel_star: Option<KernelSource>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// Start vertex; the origin when absent.
    #[serde(default)]
    pub start: Option<Vertex>,
    /// Defaults: the origin for `simulate`, the difference candidates for
    /// `compare` and `q0-check`.
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub mc: MCConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub phase_diagram: Option<PhaseDiagramConfig>,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaWMethod {
    McBracket,
    /// `min(1/d, λ_s)`; only for trees with a root loop and no patch.
    ClosedForm,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub phi: bool,
    /// First-return series order.
    pub order: usize,
    pub truncation: bool,
    /// Truncation radii; doubling radii within `vertex_cap` when absent.
    pub radii: Option<Vec<usize>>,
    pub vertex_cap: usize,
    pub lambda_w: LambdaWMethod,
    /// Bisection range; `(1/B, 1.1 λ_s)` when absent.
    pub lambda_range: Option<(f64, f64)>,
    pub rounds: u32,
    pub policy: PolicyConfig,
    /// CSV of the first-return coefficients.
    pub series_csv: Option<PathBuf>,
    /// CSV of `Φ` with its tail bound on a grid.
    pub phi_table: Option<PhiTableConfig>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            phi: true,
            order: 64,
            truncation: true,
            radii: None,
            vertex_cap: 1 << 20,
            lambda_w: LambdaWMethod::McBracket,
            lambda_range: None,
            rounds: 12,
            policy: PolicyConfig::default(),
            series_csv: None,
            phi_table: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub threshold: f64,
    pub max_escalations: u32,
    pub trial_cap: u64,
    pub generation_cap: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let p = BracketPolicy::default();
        Self {
            threshold: p.threshold,
            max_escalations: p.max_escalations,
            trial_cap: p.trial_cap,
            generation_cap: p.generation_cap,
        }
    }
}

impl From<PolicyConfig> for BracketPolicy {
    fn from(p: PolicyConfig) -> Self {
        Self {
            threshold: p.threshold,
            max_escalations: p.max_escalations,
            trial_cap: p.trial_cap,
            generation_cap: p.generation_cap,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiTableConfig {
    pub lambdas: Vec<f64>,
    pub csv: PathBuf,
}

/// Loop-rate grid `k_start + i k_step` up to `k_stop`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub d: u32,
    #[serde(default)]
    pub k_start: f64,
    pub k_stop: f64,
    pub k_step: f64,
}

impl PhaseDiagramConfig {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.k_start) && ok(self.k_stop) && self.k_step.is_finite() && self.k_step > 0.0) {
            return Err(CliError::input("phase_diagram needs finite k_start, k_stop >= 0 and k_step > 0"));
        }
        if self.k_stop < self.k_start {
            return Err(CliError::input("phase_diagram k_stop is below k_start"));
        }
        // Half a step of slack so that the end point is not lost to rounding;
        // points are rounded to 12 decimals to drop accumulated binary error.
        let n = ((self.k_stop - self.k_start) / self.k_step + 0.5).floor() as usize;
        Ok((0..=n)
            .map(|i| ((self.k_start + i as f64 * self.k_step) * 1e12).round() / 1e12)
            .collect())
    }
}

/// A run spec with its kernels built.
pub struct Loaded {
    pub spec: RunSpec,
    pub kernel: Option<RateKernel>,
    pub kernel_star: Option<RateKernel>,
}

impl Loaded {
    pub fn kernel(&self) -> Result<&RateKernel, CliError> {
        self.kernel.as_ref().ok_or_else(|| CliError::input("run spec has no \"kernel\""))
    }

    pub fn kernel_star(&self) -> Result<&RateKernel, CliError> {
        self.kernel_star
            .as_ref()
            .ok_or_else(|| CliError::input("run spec has no \"kernel_star\""))
    }

    pub fn start(&self, kernel: &RateKernel) -> Result<Vertex, CliError> {
        let start = self.spec.start.clone().unwrap_or_else(|| kernel.origin());
        if !kernel.contains(&start) {
            return Err(CliError::input(format!("start vertex {start} is not in the kernel")));
        }
        Ok(start)
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        self.spec.lambda.ok_or_else(|| CliError::input("run spec has no \"lambda\""))
    }

    /// `lambdas`, or `lambda` alone.
    pub fn lambda_grid(&self) -> Result<Vec<f64>, CliError> {
        match (&self.spec.lambdas, self.spec.lambda) {
            (Some(grid), _) => Ok(grid.clone()),
            (None, Some(l)) => Ok(vec![l]),
            (None, None) => Err(CliError::input("run spec needs \"lambda\" or \"lambdas\"")),
        }
    }
}

fn check_lambda(l: f64) -> Result<(), CliError> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(CliError::input(format!("lambda values must be finite and positive, got {l}")))
    }
}

fn build_kernel(source: &KernelSource, base: &Path) -> Result<RateKernel, CliError> {
    let spec = match source {
        KernelSource::Inline(s) => s.clone(),
        KernelSource::Path(p) => {
            let path = base.join(p);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::input(format!("cannot read kernel file {}: {e}", path.display())))?;
            KernelSpec::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        }
    };
    spec.build().map_err(CliError::input)
}

/// Parses and validates `text`; relative kernel paths resolve against `base`.
pub fn load(text: &str, base: &Path, command: CommandName) -> Result<Loaded, CliError> {
    let spec: RunSpec = serde_json::from_str(text).map_err(|e| CliError::input(format!("malformed run spec: {e}")))?;
    if let Some(c) = spec.command {
        if c != command {
            return Err(CliError::input(format!("run spec is for {c:?}, not {command:?}")));
        }
    }
    if let Some(l) = spec.lambda {
        check_lambda(l)?;
    }
    if let Some(grid) = &spec.lambdas {
        if grid.is_empty() {
            return Err(CliError::input("\"lambdas\" is empty"));
        }
        for &l in grid {
            check_lambda(l)?;
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::input("\"lambdas\" must be strictly increasing"));
        }
    }
    if !(spec.tol.is_finite() && spec.tol > 0.0) {
        return Err(CliError::input(format!("tol must be finite and positive, got {}", spec.tol)));
    }
    spec.mc.validate().map_err(CliError::input)?;
    let p = &spec.params;
    if p.order == 0 || p.rounds == 0 || p.vertex_cap == 0 {
        return Err(CliError::input("params order, rounds and vertex_cap must be at least 1"));
    }
    if !(p.policy.threshold > 0.0 && p.policy.threshold < 1.0) {
        return Err(CliError::input("params policy threshold must lie in (0, 1)"));
    }
    if let Some(radii) = &p.radii {
        if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::input("params radii must be nonempty and strictly increasing"));
        }
    }
    if let Some(t) = &p.phi_table {
        for &l in &t.lambdas {
            check_lambda(l)?;
        }
    }
    let kernel = spec.kernel.as_ref().map(|k| build_kernel(k, base)).transpose()?;
    let kernel_star = spec.kernel_star.as_ref().map(|k| build_kernel(k, base)).transpose()?;
    Ok(Loaded { spec, kernel, kernel_star })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str) -> Result<Loaded, CliError> {
        load(text, Path::new("."), CommandName::Params)
    }

    #[test]
    fn defaults_fill_in() {
        let l = load_str(r#"{"kernel": {"family": "tree", "d": 3}}"#).unwrap();
        assert_eq!(l.spec.tol, DEFAULT_TOL);
        assert_eq!(l.spec.params.order, 64);
        assert_eq!(l.spec.mc, MCConfig::default());
        let k = l.kernel().unwrap();
        assert_eq!(l.start(k).unwrap(), k.origin());
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "{",
            r#"{"kernel": {"family": "tree"}}"#,
            r#"{"lambdas": [0.2, 0.1]}"#,
            r#"{"lambda": -1}"#,
            r#"{"lambda": 0}"#,
            r#"{"mc": {"trials": 0}}"#,
            r#"{"unknown": 1}"#,
            r#"{"command": "simulate"}"#,
            r#"{"kernel": "does-not-exist.json"}"#,
        ] {
            assert!(matches!(load_str(text), Err(CliError::Input(_))), "{text}");
        }
    }

    #[test]
    fn phase_grid_includes_the_end_point() {
        let c = PhaseDiagramConfig { d: 3, k_start: 0.0, k_stop: 3.0, k_step: 0.1 };
        let g = c.grid().unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[30], 3.0);
    }

    #[test]
    fn target_forms_parse() {
        let l = load_str(r#"{"target": {"origin_ball": 2}}"#).unwrap();
        assert_eq!(l.spec.target, Some(TargetSpec::OriginBall(2)));
        let l = load_str(r#"{"target": {"vertices": [[], [0]]}}"#).unwrap();
        assert_eq!(l.spec.target, Some(TargetSpec::Vertices(vec![Vertex::tree(&[]), Vertex::tree(&[0])])));
    }
}
