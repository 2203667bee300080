//! Natural-parameter continuation of equilibria over `q1` with detection of
//! Hopf points (an oscillatory pair crossing the imaginary axis) and of the
//! saddle-node turning point where the tracked branch disappears.

use nalgebra::{Complex, DMatrix};

use super::three_bus::{ThreeBusModel, ThreeBusState, DEFAULT_GUESS};
use crate::error::{Error, Result};
use crate::linalg;

/// Equilibrium with its continuous-time linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub q1: f64,
    pub equilibrium: ThreeBusState,
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
}

impl OperatingPoint {
    pub fn new(model: &ThreeBusModel, q1: f64, guess: &ThreeBusState) -> Result<Self> {
        let equilibrium = model.find_equilibrium(q1, guess)?;
        let jacobian = model.jacobian(&equilibrium, q1);
        let eigenvalues = linalg::eigenvalues(&jacobian)?;
        Ok(Self { q1, equilibrium, jacobian, eigenvalues })
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest real part among eigenvalues with `|imag| > imag_tol`.
    pub fn oscillatory_max_real(&self, imag_tol: f64) -> Option<(f64, f64)> {
        self.eigenvalues
            .iter()
            .filter(|l| l.im.abs() > imag_tol)
            .map(|l| (l.re, l.im.abs()))
            .fold(None, |best: Option<(f64, f64)>, c| match best {
                Some(b) if b.0 >= c.0 => Some(b),
                _ => Some(c),
            })
    }

    pub fn is_stable(&self) -> bool {
        self.max_real_part() < 0.0
    }

    /// Sign of the Jacobian determinant; it flips exactly when a real
    /// eigenvalue crosses zero.
    pub fn determinant_sign(&self) -> f64 {
        self.jacobian.determinant().signum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifurcationKind {
    Hopf,
    SaddleNode,
}

/// A detected bifurcation, bracketed in `q1` to the configured tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Bifurcation {
    pub kind: BifurcationKind,
    /// Last `q1` on the pre-crossing side.
    pub lower: f64,
    /// First `q1` on the post-crossing side (for a turning point: the first
    /// `q1` where the tracked branch is lost).
    pub upper: f64,
    /// True when stability is lost across the bracket.
    pub destabilizing: bool,
    /// Imaginary part of the crossing pair (Hopf only).
    pub frequency: Option<f64>,
}

impl Bifurcation {
    pub fn q1(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepPoint {
    Converged(OperatingPoint),
    Failed { q1: f64, reason: String },
}

impl SweepPoint {
    pub fn q1(&self) -> f64 {
        match self {
            SweepPoint::Converged(p) => p.q1,
            SweepPoint::Failed { q1, .. } => *q1,
        }
    }

    pub fn point(&self) -> Option<&OperatingPoint> {
        match self {
            SweepPoint::Converged(p) => Some(p),
            SweepPoint::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// One entry per grid value, in sweep order.
    pub points: Vec<SweepPoint>,
    /// Bifurcations in order of increasing `q1`.
    pub bifurcations: Vec<Bifurcation>,
}

impl SweepReport {
    pub fn first(&self, kind: BifurcationKind) -> Option<&Bifurcation> {
        self.bifurcations.iter().find(|b| b.kind == kind)
    }

    pub fn converged(&self) -> impl Iterator<Item = &OperatingPoint> {
        self.points.iter().filter_map(SweepPoint::point)
    }

    pub fn failed_count(&self) -> usize {
        self.points.iter().filter(|p| p.point().is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub model: ThreeBusModel,
    pub initial_guess: ThreeBusState,
    /// Width to which bifurcation brackets are refined.
    pub refine_tol: f64,
    /// Eigenvalues with a smaller imaginary part count as real.
    pub oscillatory_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            model: ThreeBusModel::default(),
            initial_guess: DEFAULT_GUESS,
            refine_tol: 1e-4,
            oscillatory_tol: 1e-3,
        }
    }
}

/// Sweep of the default model over `count` evenly spaced values.
pub fn sweep_operating_points(q1_start: f64, q1_end: f64, count: usize) -> Result<SweepReport> {
    sweep_with(&SweepConfig::default(), q1_start, q1_end, count)
}

/// Solves from `seed` and accepts the result only if it lies on the same
/// side of a real-eigenvalue crossing as `reference_sign`.
fn track(
    config: &SweepConfig,
    q1: f64,
    seed: &ThreeBusState,
    reference_sign: Option<f64>,
) -> std::result::Result<OperatingPoint, String> {
    match OperatingPoint::new(&config.model, q1, seed) {
        Ok(p) => match reference_sign {
            Some(s) if p.determinant_sign() != s => {
                Err("a real eigenvalue crossed zero (left the tracked branch)".to_string())
            }
            _ => Ok(p),
        },
        Err(e) => Err(e.to_string()),
    }
}

/// Bisects between an accepted point and a lost `q1` until the bracket is
/// narrower than `tol`. Returns the final bracket and the accepted points
/// visited on the way.
pub fn refine_turning_point(
    config: &SweepConfig,
    good: &OperatingPoint,
    lost_q1: f64,
    tol: f64,
) -> (f64, f64, Vec<OperatingPoint>) {
    let sign = good.determinant_sign();
    let mut last = good.clone();
    let mut bad = lost_q1;
    let mut visited = Vec::new();
    while (bad - last.q1).abs() > tol {
        let mid = 0.5 * (last.q1 + bad);
        match track(config, mid, &last.equilibrium, Some(sign)) {
            Ok(p) => {
                visited.push(p.clone());
                last = p;
            }
            Err(_) => bad = mid,
        }
    }
    (last.q1, bad, visited)
}

fn refine_hopf(
    config: &SweepConfig,
    a: &OperatingPoint,
    b: &OperatingPoint,
) -> Option<Bifurcation> {
    let tol = config.oscillatory_tol;
    let sa = a.oscillatory_max_real(tol)?;
    let sb = b.oscillatory_max_real(tol)?;
    if (sa.0 < 0.0) == (sb.0 < 0.0) {
        return None;
    }
    let destabilizing = sa.0 < 0.0;
    let sign = a.determinant_sign();
    let (mut lo, mut hi) = (a.clone(), b.clone());
    while (hi.q1 - lo.q1).abs() > config.refine_tol {
        let mid = 0.5 * (lo.q1 + hi.q1);
        let Ok(p) = track(config, mid, &lo.equilibrium, Some(sign)) else {
            break;
        };
        match p.oscillatory_max_real(tol) {
            Some((re, _)) if (re < 0.0) == (sa.0 < 0.0) => lo = p,
            Some(_) => hi = p,
            None => break,
        }
    }
    let frequency = hi.oscillatory_max_real(tol).map(|(_, im)| im);
    Some(Bifurcation {
        kind: BifurcationKind::Hopf,
        lower: lo.q1,
        upper: hi.q1,
        destabilizing,
        frequency,
    })
}

/// Continuation over `count` evenly spaced `q1` values from `q1_start` to
/// `q1_end`. Each solve is seeded by the last accepted equilibrium. A point
/// where Newton fails, or where the solution has crossed a real eigenvalue
/// through zero, ends the tracked branch: the loss is bisected to
/// `refine_tol` and reported as a saddle-node, and later grid points are
/// still attempted. Hopf crossings are located among all accepted points
/// (grid and refinement) and bisected to `refine_tol`.
pub fn sweep_with(
    config: &SweepConfig,
    q1_start: f64,
    q1_end: f64,
    count: usize,
) -> Result<SweepReport> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!("sweep needs at least 2 points, got {count}")));
    }
    if !(q1_start.is_finite() && q1_end.is_finite()) || q1_start == q1_end {
        return Err(Error::InvalidArgument("sweep range must be finite and nonempty".into()));
    }
    let grid: Vec<f64> = (0..count)
        .map(|k| q1_start + (q1_end - q1_start) * k as f64 / (count - 1) as f64)
        .collect();

    let mut points = Vec::with_capacity(count);
    let mut accepted: Vec<OperatingPoint> = Vec::new();
    let mut bifurcations = Vec::new();
    let mut last: Option<OperatingPoint> = None;
    let mut branch_lost = false;

    for &q1 in &grid {
        let seed = last.as_ref().map_or(config.initial_guess, |p| p.equilibrium);
        let sign = last.as_ref().map(OperatingPoint::determinant_sign);
        match track(config, q1, &seed, sign) {
            Ok(p) => {
                branch_lost = false;
                accepted.push(p.clone());
                points.push(SweepPoint::Converged(p.clone()));
                last = Some(p);
            }
            Err(reason) => {
                if let (Some(good), false) = (last.as_ref(), branch_lost) {
                    let (lower, upper, visited) =
                        refine_turning_point(config, good, q1, config.refine_tol);
                    accepted.extend(visited);
                    if let Some(p) = accepted.iter().rev().find(|p| p.q1 == lower) {
                        last = Some(p.clone());
                    }
                    bifurcations.push(Bifurcation {
                        kind: BifurcationKind::SaddleNode,
                        lower,
                        upper,
                        destabilizing: true,
                        frequency: None,
                    });
                    branch_lost = true;
                }
                points.push(SweepPoint::Failed { q1, reason });
            }
        }
    }

    let ascending = q1_end > q1_start;
    accepted.sort_by(|a, b| {
        let o = a.q1.total_cmp(&b.q1);
        if ascending { o } else { o.reverse() }
    });
    for pair in accepted.windows(2) {
        if let Some(h) = refine_hopf(config, &pair[0], &pair[1]) {
            bifurcations.push(h);
        }
    }
    bifurcations.sort_by(|a, b| {
        let o = a.lower.total_cmp(&b.lower);
        if ascending { o } else { o.reverse() }
    });
    Ok(SweepReport { points, bifurcations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_at_light_load() {
        let p = OperatingPoint::new(&ThreeBusModel::default(), 1.0, &DEFAULT_GUESS).unwrap();
        assert!(p.is_stable());
        assert!(p.max_real_part() < 0.0);
    }

    #[test]
    fn rejects_degenerate_grid() {
        assert!(sweep_operating_points(1.0, 2.0, 1).is_err());
        assert!(sweep_operating_points(1.0, 1.0, 5).is_err());
    }
}
