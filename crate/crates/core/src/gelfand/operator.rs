use super::{GelfandDiscretization, Tridiagonal};
use crate::error::{LabError, Result};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

/// Declared growth constants: `⟨A v, v⟩ ≥ c₂‖v‖^p` and
/// `‖A v‖_* ≤ a₁ + c₁‖v‖^{p−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConstants {
    pub p: f64,
    pub q: f64,
    pub c1: f64,
    pub c2: f64,
    pub a1: f64,
}

impl OperatorConstants {
    fn with_exponent(p: f64, c1: f64, c2: f64) -> Self {
        OperatorConstants {
            p,
            q: p / (p - 1.0),
            c1,
            c2,
            a1: 0.0,
        }
    }
}

/// Discrete `A(t, ·) : V → V*`, returned in `H`-Riesz coordinates.
pub trait MonotoneOperator: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Constants this operator claims on the given grid.
    fn constants(&self, disc: &GelfandDiscretization) -> OperatorConstants;

    /// Unchecked evaluation; `v` must have length `disc.n()`.
    fn apply(&self, disc: &GelfandDiscretization, t: f64, v: &[f64]) -> Vec<f64>;

    /// Jacobian of `apply` at `v`.
    fn jacobian(&self, disc: &GelfandDiscretization, t: f64, v: &[f64]) -> Tridiagonal;

    /// True when `apply` is linear in `v`.
    fn is_linear(&self) -> bool {
        false
    }

    fn apply_checked(&self, disc: &GelfandDiscretization, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        disc.check_dim(v)?;
        Ok(self.apply(disc, t, v))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LinearLaplacian;

impl MonotoneOperator for LinearLaplacian {
    fn name(&self) -> &'static str {
        "linear_laplacian"
    }

    fn constants(&self, _disc: &GelfandDiscretization) -> OperatorConstants {
        OperatorConstants::with_exponent(2.0, 1.0, 1.0)
    }

    fn apply(&self, disc: &GelfandDiscretization, _t: f64, v: &[f64]) -> Vec<f64> {
        disc.apply_laplacian(v)
    }

    fn jacobian(&self, disc: &GelfandDiscretization, _t: f64, _v: &[f64]) -> Tridiagonal {
        let inv_h2 = 1.0 / (disc.h() * disc.h());
        Tridiagonal::second_difference(disc.n()).scaled_shift(inv_h2, 0.0)
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// Discrete `−(|v′|^{p−2} v′)′` with Dirichlet boundary.
#[derive(Debug, Clone, Copy)]
pub struct PLaplacian {
    p: f64,
}

impl PLaplacian {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "p-Laplacian needs p >= 2, got {p}"
            )));
        }
        Ok(PLaplacian { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn flux(&self, s: f64) -> f64 {
        if self.p == 2.0 {
            s
        } else {
            s.abs().powf(self.p - 2.0) * s
        }
    }

    fn flux_slope(&self, s: f64) -> f64 {
        if self.p == 2.0 {
            1.0
        } else {
            (self.p - 1.0) * s.abs().powf(self.p - 2.0)
        }
    }
}

impl MonotoneOperator for PLaplacian {
    fn name(&self) -> &'static str {
        "p_laplacian"
    }

    /// `c₂ = ℓ^{1−p/2}` from Hölder on the `n + 1` differences and
    /// `c₁ = h^{−(p−2)/2}` from the `ℓ²`-`ℓ^{2(p−1)}` comparison.
    fn constants(&self, disc: &GelfandDiscretization) -> OperatorConstants {
        let p = self.p;
        let c2 = disc.domain_length().powf(1.0 - p / 2.0);
        let c1 = disc.h().powf(-(p - 2.0) / 2.0);
        OperatorConstants::with_exponent(p, c1, c2)
    }

    fn apply(&self, disc: &GelfandDiscretization, _t: f64, v: &[f64]) -> Vec<f64> {
        let d = disc.differences(v);
        let inv_h = 1.0 / disc.h();
        (0..disc.n())
            .map(|i| (self.flux(d[i]) - self.flux(d[i + 1])) * inv_h)
            .collect()
    }

    fn jacobian(&self, disc: &GelfandDiscretization, _t: f64, v: &[f64]) -> Tridiagonal {
        let n = disc.n();
        let inv_h2 = 1.0 / (disc.h() * disc.h());
        let slope: Vec<f64> = disc
            .differences(v)
            .iter()
            .map(|&s| self.flux_slope(s) * inv_h2)
            .collect();
        let diag = (0..n).map(|i| slope[i] + slope[i + 1]).collect();
        let off: Vec<f64> = (1..n).map(|i| -slope[i]).collect();
        Tridiagonal::new(off.clone(), diag, off)
    }

    fn is_linear(&self) -> bool {
        self.p == 2.0
    }
}

/// `A ≡ 0`; monotone and bounded but not coercive.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroOperator;

impl MonotoneOperator for ZeroOperator {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn constants(&self, _disc: &GelfandDiscretization) -> OperatorConstants {
        OperatorConstants::with_exponent(2.0, 0.0, 0.0)
    }

    fn apply(&self, disc: &GelfandDiscretization, _t: f64, _v: &[f64]) -> Vec<f64> {
        vec![0.0; disc.n()]
    }

    fn jacobian(&self, disc: &GelfandDiscretization, _t: f64, _v: &[f64]) -> Tridiagonal {
        let n = disc.n();
        let off = n.saturating_sub(1);
        Tridiagonal::new(vec![0.0; off], vec![0.0; n], vec![0.0; off])
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// Operator block of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl OperatorSpec {
    pub fn named(kind: &str) -> Self {
        OperatorSpec {
            kind: kind.to_string(),
            p: None,
        }
    }

    pub fn p_laplacian(p: f64) -> Self {
        OperatorSpec {
            kind: "p_laplacian".to_string(),
            p: Some(p),
        }
    }
}

type OperatorCtor = fn(&OperatorSpec) -> Result<Arc<dyn MonotoneOperator>>;

/// Name → constructor table for operators.
#[derive(Clone)]
pub struct OperatorRegistry {
    ctors: BTreeMap<String, OperatorCtor>,
}

impl OperatorRegistry {
    pub fn empty() -> Self {
        OperatorRegistry {
            ctors: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("linear_laplacian", |_| Ok(Arc::new(LinearLaplacian)));
        r.register("p_laplacian", |spec| {
            Ok(Arc::new(PLaplacian::new(spec.p.unwrap_or(2.0))?))
        });
        r.register("zero", |_| Ok(Arc::new(ZeroOperator)));
        r
    }

    pub fn register(&mut self, name: &str, ctor: OperatorCtor) {
        self.ctors.insert(name.to_string(), ctor);
    }

    pub fn names(&self) -> Vec<&str> {
        self.ctors.keys().map(String::as_str).collect()
    }

    pub fn build(&self, spec: &OperatorSpec) -> Result<Arc<dyn MonotoneOperator>> {
        let ctor = self
            .ctors
            .get(&spec.kind)
            .ok_or_else(|| LabError::UnknownName {
                kind: "operator",
                name: spec.kind.clone(),
            })?;
        ctor(spec)
    }
}

impl Debug for OperatorRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ctors.keys()).finish()
    }
}
