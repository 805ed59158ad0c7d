//! Entropy functions, their conjugate transforms `φ°` and φ-divergences
//! between reweightings of a common support.
//!
//! For `D_φ = ρ·KL` the dual transform is `φ°(x) = ρ(1 − e^{−x/ρ})`.
//! Total variation is provided for evaluation only; the Frank-Wolfe
//! solvers need a smooth `φ°` and refuse anything but KL.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::clamp_exponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    Kl,
    Tv,
    Balanced,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::Kl => "KL",
            DivergenceKind::Tv => "TV",
            DivergenceKind::Balanced => "Balanced",
        })
    }
}

/// `ρ·KL`, `ρ·TV`, or the hard (balanced) marginal constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    /// Penalty strength; ignored for `Balanced`.
    pub rho: f64,
}

impl DivergenceSpec {
    pub fn kl(rho: f64) -> Result<Self> {
        Self::new(DivergenceKind::Kl, rho)
    }

    pub fn tv(rho: f64) -> Result<Self> {
        Self::new(DivergenceKind::Tv, rho)
    }

    pub fn balanced() -> Self {
        Self { kind: DivergenceKind::Balanced, rho: f64::INFINITY }
    }

    pub fn new(kind: DivergenceKind, rho: f64) -> Result<Self> {
        if kind != DivergenceKind::Balanced && !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be finite and > 0, got {rho}")));
        }
        Ok(Self { kind, rho })
    }

    pub fn is_smooth(&self) -> bool {
        self.kind == DivergenceKind::Kl
    }
}

impl fmt::Display for DivergenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DivergenceKind::Balanced => write!(f, "Balanced"),
            kind => write!(f, "{}(rho={})", kind, self.rho),
        }
    }
}

/// `φ°(x)` for the given divergence.
///
/// KL: `ρ(1 − exp(−x/ρ))` with the exponent clamped to ±700.
/// TV: `x` on `[−ρ, ρ]`, `ρ` above, `−∞` below. Balanced: `x`.
pub fn phi_circ(spec: &DivergenceSpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("phi_circ of non-finite {x}")));
    }
    Ok(match spec.kind {
        DivergenceKind::Kl => phi_circ_kl(spec.rho, x),
        DivergenceKind::Balanced => x,
        DivergenceKind::Tv => {
            if x > spec.rho {
                spec.rho
            } else if x >= -spec.rho {
                x
            } else {
                f64::NEG_INFINITY
            }
        }
    })
}

#[inline]
pub(crate) fn phi_circ_kl(rho: f64, x: f64) -> f64 {
    -rho * clamp_exponent(-x / rho).exp_m1()
}

fn check_aligned(pi: &[f64], alpha: &[f64]) -> Result<()> {
    if pi.len() != alpha.len() {
        return Err(Error::ShapeMismatch(format!("divergence between {} and {} weights", pi.len(), alpha.len())));
    }
    Ok(())
}

/// `ρ·KL(π|α) = ρ Σ_i [π_i log(π_i/α_i) − π_i + α_i]` with `0 log 0 = 0`.
///
/// Returns `+∞` when `π` is not absolutely continuous w.r.t. `α`.
pub fn kl_divergence(pi: &[f64], alpha: &[f64], rho: f64) -> Result<f64> {
    check_aligned(pi, alpha)?;
    let mut acc = 0.0;
    for (&p, &a) in pi.iter().zip(alpha) {
        if p < 0.0 || a < 0.0 {
            return Err(Error::InvalidParameter("negative weight in KL".into()));
        }
        if p > 0.0 {
            if a == 0.0 {
                return Ok(f64::INFINITY);
            }
            acc += p * (p / a).ln() - p + a;
        } else {
            acc += a;
        }
    }
    Ok(rho * acc.max(0.0))
}

/// `ρ·TV(π|α) = ρ Σ_i |π_i − α_i|`.
pub fn tv_divergence(pi: &[f64], alpha: &[f64], rho: f64) -> Result<f64> {
    check_aligned(pi, alpha)?;
    Ok(rho * pi.iter().zip(alpha).map(|(p, a)| (p - a).abs()).sum::<f64>())
}

/// Solver parameters shared by SUOT, USOT and the barycenter.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbalancedParams {
    /// Penalty on the first (source) marginal.
    pub div1: DivergenceSpec,
    /// Penalty on the second (target) marginal.
    pub div2: DivergenceSpec,
    /// Ground cost exponent, `C(x, y) = |x − y|^p`.
    pub p: f64,
    pub n_projections: usize,
    pub fw_iters: usize,
    /// Optional early stop: halt once the dual objective changes by less
    /// than this between two iterations.
    pub fw_tol: Option<f64>,
    pub seed: u64,
}

impl Default for UnbalancedParams {
    fn default() -> Self {
        Self {
            div1: DivergenceSpec { kind: DivergenceKind::Kl, rho: 1.0 },
            div2: DivergenceSpec { kind: DivergenceKind::Kl, rho: 1.0 },
            p: 2.0,
            n_projections: 500,
            fw_iters: 20,
            fw_tol: None,
            seed: 0,
        }
    }
}

impl UnbalancedParams {
    /// KL penalties on both marginals, other fields at their defaults.
    pub fn kl(rho1: f64, rho2: f64) -> Result<Self> {
        Ok(Self { div1: DivergenceSpec::kl(rho1)?, div2: DivergenceSpec::kl(rho2)?, ..Self::default() })
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_projections(mut self, k: usize) -> Self {
        self.n_projections = k;
        self
    }

    pub fn with_fw_iters(mut self, f: usize) -> Self {
        self.fw_iters = f;
        self
    }

    pub fn with_fw_tol(mut self, tol: Option<f64>) -> Self {
        self.fw_tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn check_p(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {}", self.p)));
        }
        Ok(())
    }

    /// Validates the parameters for the Frank-Wolfe solvers and returns `(ρ1, ρ2)`.
    pub fn fw_rhos(&self) -> Result<(f64, f64)> {
        for d in [&self.div1, &self.div2] {
            if !d.is_smooth() {
                return Err(Error::NonSmoothDivergence(d.to_string()));
            }
            DivergenceSpec::new(d.kind, d.rho)?;
        }
        self.check_p()?;
        if self.fw_iters == 0 {
            return Err(Error::InvalidParameter("fw_iters must be >= 1".into()));
        }
        if let Some(tol) = self.fw_tol {
            if tol.is_nan() || tol < 0.0 {
                return Err(Error::InvalidParameter(format!("fw_tol must be >= 0, got {tol}")));
            }
        }
        Ok((self.div1.rho, self.div2.rho))
    }
}
