//! Classification of a kernel and a finite modification of it from interval
//! estimates of their critical parameters.
//!
//! An alternative is possible when each of its relations can hold for some
//! values in the intervals: equality when they overlap (up to the slack
//! `tol`), `<` when some point of the first is below some point of the
//! second by more than `tol`, `≤` within `tol`.

use serde::Serialize;
use thiserror::Error;

use crate::genfun::{lambda_s_phi, GenFunError};
use crate::kernels::{FiniteKernel, KernelError, RateKernel};
use crate::montecarlo::{SurvivalEstimate, SurvivalReport};
use crate::oracle::{compare_vectors, extinction_avoid, extinction_local, OracleError};
use crate::{Brw, Interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("no alternative fits the estimates: {0}")]
    Contradiction(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("lambda_w interval {lambda_w:?} lies above lambda_s interval {lambda_s:?}")]
    Inconsistent { lambda_w: Interval, lambda_s: Interval },
    #[error(transparent)]
    GenFun(#[from] GenFunError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// How an interval was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PhiRoot,
    SpectralTruncation,
    McBracket,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalEstimate {
    pub lambda_w: Interval,
    pub lambda_s: Interval,
    pub lambda_w_method: Method,
    pub lambda_s_method: Method,
}

impl CriticalEstimate {
    /// Rejects pairs where every admissible `λ_w` exceeds every admissible
    /// `λ_s`, since `λ_w ≤ λ_s` always holds.
    pub fn new(
        lambda_w: Interval,
        lambda_w_method: Method,
        lambda_s: Interval,
        lambda_s_method: Method,
    ) -> Result<Self, PhaseError> {
        if lambda_w.lo > lambda_s.hi {
            return Err(PhaseError::Inconsistent { lambda_w, lambda_s });
        }
        Ok(Self { lambda_w, lambda_s, lambda_w_method, lambda_s_method })
    }

    pub fn closed_form(lambda_w: f64, lambda_s: f64) -> Result<Self, PhaseError> {
        Self::new(Interval::point(lambda_w), Method::ClosedForm, Interval::point(lambda_s), Method::ClosedForm)
    }

    /// `λ_w < λ_s` with separated intervals.
    pub fn has_pure_global_phase(&self, tol: f64) -> bool {
        self.lambda_w.strictly_below(&self.lambda_s, tol)
    }
}

/// The three possible relations between a kernel and a finite modification
/// of it; starred quantities belong to the modification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PhaseClass {
    /// `λ_w = λ_w* ≤ min(λ_s, λ_s*)`.
    Alt1,
    /// `λ_w = λ_s < λ_w* ≤ λ_s*`.
    Alt2,
    /// `λ_w* = λ_s* < λ_w ≤ λ_s`.
    Alt3,
    Undecided(String),
}

/// The single possible alternative, `Undecided` when the intervals leave
/// several open, and an error when none is possible.
pub fn classify_pair(est: &CriticalEstimate, star: &CriticalEstimate, tol: f64) -> Result<PhaseClass, PhaseError> {
    let (w, s, ws, ss) = (&est.lambda_w, &est.lambda_s, &star.lambda_w, &star.lambda_s);
    let alt1 = w.overlaps(ws, tol) && w.possibly_le(s, tol) && w.possibly_le(ss, tol) && ws.possibly_le(ss, tol);
    let alt2 = w.overlaps(s, tol) && w.possibly_lt(ws, tol) && ws.possibly_le(ss, tol);
    let alt3 = ws.overlaps(ss, tol) && ss.possibly_lt(w, tol) && w.possibly_le(s, tol);
    let fits: Vec<&str> = [(alt1, "Alt1"), (alt2, "Alt2"), (alt3, "Alt3")]
        .iter()
        .filter(|(ok, _)| *ok)
        .map(|(_, n)| *n)
        .collect();
    match fits.as_slice() {
        [] => Err(PhaseError::Contradiction(format!(
            "lambda_w {w:?}, lambda_s {s:?}, lambda_w* {ws:?}, lambda_s* {ss:?}, tol {tol}"
        ))),
        ["Alt1"] => Ok(PhaseClass::Alt1),
        ["Alt2"] => Ok(PhaseClass::Alt2),
        ["Alt3"] => Ok(PhaseClass::Alt3),
        many => Ok(PhaseClass::Undecided(format!("intervals fit {}", many.join(" and ")))),
    }
}

/// `λ_s` of the tree `T_d` with loop rate `k` at the root, and the first
/// threshold `(d-2)/√(d-1)` below which the loop does not change it.
pub fn tree_lambda_s_star(d: u32, k: f64) -> f64 {
    let d = f64::from(d);
    if k <= tree_first_threshold(d as u32) {
        return 1.0 / (2.0 * (d - 1.0).sqrt());
    }
    ((d - 2.0) * k + d * (k * k + 4.0).sqrt()) / (2.0 * (d * d + (d - 1.0) * k * k))
}

pub fn tree_first_threshold(d: u32) -> f64 {
    let d = f64::from(d);
    (d - 2.0) / (d - 1.0).sqrt()
}

/// Loop rate `d(d-2)/(d-1)` at which `λ_s*` reaches `1/d`.
pub fn tree_second_threshold(d: u32) -> f64 {
    let d = f64::from(d);
    d * (d - 2.0) / (d - 1.0)
}

/// `λ_w* = min(1/d, λ_s*)`.
pub fn tree_lambda_w_star(d: u32, k: f64) -> f64 {
    (1.0 / f64::from(d)).min(tree_lambda_s_star(d, k))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseDiagramRow {
    pub k_oo: f64,
    pub lambda_w_star: f64,
    pub lambda_s_star: f64,
    pub closed_form: f64,
    pub abs_err: f64,
}

/// Series order used for the root-found `λ_s*`.
pub const PHASE_DIAGRAM_ORDER: usize = 64;

/// For each loop rate, `λ_s*` root-found from the first-return series,
/// `λ_w*` assigned as `1/d` below the second threshold and `λ_s*` from it on,
/// and the closed form for comparison.
pub fn tree_phase_diagram(d: u32, grid: &[f64], tol: f64) -> Result<Vec<PhaseDiagramRow>, PhaseError> {
    grid.iter()
        .map(|&k| {
            let kernel = RateKernel::tree(d, k)?;
            let lambda_s_star = lambda_s_phi(&kernel, &kernel.origin(), PHASE_DIAGRAM_ORDER, tol)?.midpoint();
            let lambda_w_star = if k < tree_second_threshold(d) {
                1.0 / f64::from(d)
            } else {
                lambda_s_star
            };
            let closed_form = tree_lambda_s_star(d, k);
            Ok(PhaseDiagramRow {
                k_oo: k,
                lambda_w_star,
                lambda_s_star,
                closed_form,
                abs_err: (lambda_s_star - closed_form).abs(),
            })
        })
        .collect()
}

/// Behaviour in the finite set `B` of the modified kernel at a given `λ`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    GlobalExt,
    Strong,
    NonStrong,
    /// Above the base `λ_s`: strong exactly when the base is strong there.
    Inherited,
    /// Inside an interval for one of the critical parameters.
    Undecided,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Self::GlobalExt => "global-ext",
            Self::Strong => "strong",
            Self::NonStrong => "non-strong",
            Self::Inherited => "inherited",
            Self::Undecided => "undecided",
        }
    }
}

/// Monte Carlo survival frequencies of the modified kernel at one `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeEvidence {
    pub global: SurvivalEstimate,
    /// Local survival in `B`.
    pub local: SurvivalEstimate,
}

impl From<&SurvivalReport> for RegimeEvidence {
    fn from(r: &SurvivalReport) -> Self {
        Self { global: r.global, local: r.local }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeRow {
    pub lambda: f64,
    pub regime: Regime,
    pub evidence: Option<RegimeEvidence>,
    /// Whether the evidence agrees with the label; `None` when there is no
    /// evidence or the label makes no prediction.
    pub check: Option<bool>,
}

/// Survival frequency below which a λ counts as globally extinct.
pub const EXTINCTION_FREQUENCY: f64 = 1e-3;

fn evidence_agrees(regime: &Regime, e: &RegimeEvidence) -> Option<bool> {
    match regime {
        Regime::GlobalExt => Some(e.global.lo <= EXTINCTION_FREQUENCY),
        Regime::Strong => Some(e.global.lo > 0.0 && e.local.overlaps(&e.global)),
        Regime::NonStrong => Some(e.local.lo > 0.0 && e.local.separated_below(&e.global)),
        Regime::Inherited | Regime::Undecided => None,
    }
}

/// Regimes of the modified kernel along `grid`, for a base kernel with a
/// pure global phase and a modification with a smaller `λ_w`. `evidence`,
/// when given, must have one entry per grid point.
pub fn regime_map(
    base: &CriticalEstimate,
    star: &CriticalEstimate,
    grid: &[f64],
    evidence: Option<&[RegimeEvidence]>,
    tol: f64,
) -> Result<Vec<RegimeRow>, PhaseError> {
    if !base.has_pure_global_phase(tol) {
        return Err(PhaseError::Precondition("base kernel needs lambda_w < lambda_s".into()));
    }
    if !star.lambda_w.strictly_below(&base.lambda_w, tol) {
        return Err(PhaseError::Precondition("modified kernel needs lambda_w* < lambda_w".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PhaseError::Precondition("grid must be strictly increasing".into()));
    }
    if evidence.is_some_and(|e| e.len() != grid.len()) {
        return Err(PhaseError::Precondition("one evidence entry per grid point".into()));
    }
    let (ws, w, s) = (&star.lambda_w, &base.lambda_w, &base.lambda_s);
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let regime = if lambda < ws.lo {
                Regime::GlobalExt
            } else if lambda <= ws.hi {
                Regime::Undecided
            } else if lambda < w.lo {
                Regime::Strong
            } else if lambda <= w.hi {
                Regime::Undecided
            } else if lambda < s.lo {
                Regime::NonStrong
            } else if lambda <= s.hi {
                Regime::Undecided
            } else {
                Regime::Inherited
            };
            let ev = evidence.map(|e| e[i]);
            let check = ev.as_ref().and_then(|e| evidence_agrees(&regime, e));
            RegimeRow { lambda, regime, evidence: ev, check }
        })
        .collect())
}

/// The decided labels along a grid never go back to an earlier regime.
pub fn regimes_monotone(rows: &[RegimeRow]) -> bool {
    let decided: Vec<&Regime> = rows.iter().map(|r| &r.regime).filter(|r| **r != Regime::Undecided).collect();
    decided.windows(2).all(|w| w[0] <= w[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckOutcome {
    Pass,
    Fail,
    NotApplicable,
}

/// When `λ_s · α ≤ 1` for `α` the limsup of the row sums, `λ_w = λ_s`.
/// The hypothesis is tested on `λ_s.hi - tol`, so that `λ_s = 1/α` exactly
/// counts as applicable.
pub fn prop36_check(alpha: f64, est: &CriticalEstimate, tol: f64) -> CheckOutcome {
    if (est.lambda_s.hi - tol) * alpha > 1.0 {
        CheckOutcome::NotApplicable
    } else if est.lambda_w.overlaps(&est.lambda_s, tol) {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalityEntry {
    /// `λ_w* ≤ λ_w` holds up to the intervals.
    pub below_base: bool,
    /// The modification has its own pure global phase, which forces `λ_w* = λ_w`.
    pub equality_required: bool,
    pub equal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalityReport {
    pub entries: Vec<MaximalityEntry>,
    pub outcome: CheckOutcome,
}

/// A kernel with a pure global phase has the largest `λ_w` among its finite
/// modifications, and shares it with every modification that also has one.
pub fn maximality_check(
    base: &CriticalEstimate,
    modified: &[CriticalEstimate],
    tol: f64,
) -> Result<MaximalityReport, PhaseError> {
    if !base.has_pure_global_phase(tol) {
        return Err(PhaseError::Precondition("base kernel needs lambda_w < lambda_s".into()));
    }
    let entries: Vec<MaximalityEntry> = modified
        .iter()
        .map(|m| {
            let equality_required = m.has_pure_global_phase(tol);
            MaximalityEntry {
                below_base: m.lambda_w.lo <= base.lambda_w.hi + tol,
                equality_required,
                equal: m.lambda_w.overlaps(&base.lambda_w, tol),
            }
        })
        .collect();
    let ok = entries.iter().all(|e| e.below_base && (!e.equality_required || e.equal));
    Ok(MaximalityReport {
        entries,
        outcome: if ok { CheckOutcome::Pass } else { CheckOutcome::Fail },
    })
}

/// Non-strong local survival of `base` in a finite set at `λ₀` (positive
/// local frequency, separated below the global one) forces global survival
/// at `λ₀` of every kernel that differs from it on a finite set.
pub fn inherited_survival_check(base: &SurvivalReport, other: &SurvivalReport) -> CheckOutcome {
    let non_strong = base.local.lo > 0.0 && base.local.separated_below(&base.global);
    if !non_strong {
        CheckOutcome::NotApplicable
    } else if other.global.lo > 0.0 {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Q0Report {
    pub max_abs_difference: f64,
    pub equal: bool,
}

/// Kernels that agree outside `a` have the same probability of never
/// visiting `a`. `a` must contain every row where the kernels differ.
pub fn q0_equality_exact(
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    lambda: f64,
    a: &[usize],
    tol: f64,
) -> Result<Q0Report, PhaseError> {
    if k1.vertices() != k2.vertices() {
        return Err(OracleError::VertexSetMismatch.into());
    }
    if let Some(x) = (0..k1.len()).find(|x| !a.contains(x) && k1.row(*x) != k2.row(*x)) {
        return Err(PhaseError::Precondition(format!("kernels differ at vertex {x} outside the set")));
    }
    let b1 = Brw::new(k1.clone(), lambda).map_err(|e| PhaseError::Precondition(e.to_string()))?;
    let b2 = Brw::new(k2.clone(), lambda).map_err(|e| PhaseError::Precondition(e.to_string()))?;
    let c = compare_vectors(&extinction_avoid(&b1, a)?, &extinction_avoid(&b2, a)?, tol)?;
    Ok(Q0Report { max_abs_difference: c.max_abs_difference, equal: c.equal })
}

/// The never-hit estimates of two kernels that agree outside the target
/// estimate the same quantity; their intervals should overlap.
pub fn q0_equality_mc(r1: &SurvivalReport, r2: &SurvivalReport) -> CheckOutcome {
    if r1.never_hit.overlaps(&r2.never_hit) {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail
    }
}

/// Componentwise comparison of `q(·,A)` against `q(·,B)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OrderRelation {
    pub le: bool,
    pub ge: bool,
}

/// The relation between `q(·,A)` and `q(·,B)` on an irreducible kernel.
pub fn extinction_order(kernel: &FiniteKernel, lambda: f64, a: &[usize], b: &[usize], tol: f64) -> Result<OrderRelation, PhaseError> {
    let brw = Brw::new(kernel.clone(), lambda).map_err(|e| PhaseError::Precondition(e.to_string()))?;
    let qa = extinction_local(&brw, a)?;
    let qb = extinction_local(&brw, b)?;
    let c = compare_vectors(&qa, &qb, tol)?;
    Ok(OrderRelation { le: c.le, ge: c.ge })
}
