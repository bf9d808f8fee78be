//! Edge cost models, their calculus, and the behavioral-bias transforms that
//! turn a true cost into a perceived one.
//!
//! Everything here is a pure value type; solvers evaluate these concurrently
//! without synchronization.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::pow;

#[derive(Clone, Debug, PartialEq)]
pub enum CostError {
    /// Load arguments must be nonnegative.
    NegativeLoad(f64),
    /// Operation not defined for this cost kind (e.g. calculus on TABLE).
    Unsupported(&'static str),
    /// Bias or cost parameters outside their declared range.
    InvalidParam(String),
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::NegativeLoad(x) => write!(f, "negative load {x}"),
            CostError::Unsupported(what) => write!(f, "unsupported operation: {what}"),
            CostError::InvalidParam(why) => write!(f, "invalid parameter: {why}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Polynomial helpers (coefficients a_0..a_d, lowest degree first).

pub(crate) fn poly_eval(c: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &a in c.iter().rev() {
        acc = acc * x + a;
    }
    acc
}

pub(crate) fn poly_deriv(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(d, &a)| a * d as f64)
        .collect()
}

/// Antiderivative with zero constant term.
pub(crate) fn poly_antideriv(c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(0.0);
    for (d, &a) in c.iter().enumerate() {
        out.push(a / (d + 1) as f64);
    }
    out
}

pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = core::cmp::max(a.len(), b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

pub(crate) fn poly_scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|&c| c * k).collect()
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Taylor shift: coefficients of p(x + h).
pub(crate) fn poly_shift(c: &[f64], h: f64) -> Vec<f64> {
    // Repeated synthetic division keeps this O(d^2) and stable for small d.
    let mut a = c.to_vec();
    let n = a.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            a[j] = a[j] + h * a[j + 1];
        }
    }
    a
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && c.last() == Some(&0.0) {
        c.pop();
    }
    c
}

// ---------------------------------------------------------------------------

/// A one-dimensional nondecreasing edge latency function.
///
/// `Poly` with nonnegative coefficients is the workhorse: it is standard in
/// the usual sense (nondecreasing, differentiable, `x*c(x)` convex).
#[derive(Clone, Debug, PartialEq)]
pub enum CostModel {
    /// `a_0 + a_1 x + ... + a_d x^d`, all coefficients nonnegative.
    Poly(Vec<f64>),
    /// `scale * (x + shift)^degree`, for generated exhibits.
    ScaledShiftedPower { scale: f64, shift: f64, degree: u32 },
    /// Piecewise-linear table of `(load, cost)` points, nondecreasing, with
    /// constant extension outside the sampled range. Carries no derivative or
    /// integral and is rejected by potential-based solvers.
    Table(Vec<(f64, f64)>),
}

impl CostModel {
    pub fn poly(coeffs: &[f64]) -> Self {
        CostModel::Poly(trim(coeffs.to_vec()))
    }

    pub fn constant(b: f64) -> Self {
        CostModel::Poly(vec![b])
    }

    /// `a * x^d`.
    pub fn monomial(a: f64, d: u32) -> Self {
        let mut c = vec![0.0; d as usize + 1];
        c[d as usize] = a;
        CostModel::Poly(trim(c))
    }

    /// `a x + b`.
    pub fn affine(a: f64, b: f64) -> Self {
        CostModel::Poly(trim(vec![b, a]))
    }

    pub fn validate(&self) -> Result<(), CostError> {
        match self {
            CostModel::Poly(c) => {
                if c.is_empty() {
                    return Err(CostError::InvalidParam("empty coefficient list".into()));
                }
                if c.iter().any(|&a| a < 0.0 || !a.is_finite()) {
                    return Err(CostError::InvalidParam(
                        "polynomial coefficients must be nonnegative and finite".into(),
                    ));
                }
                Ok(())
            }
            CostModel::ScaledShiftedPower { scale, shift, .. } => {
                if *scale < 0.0 || !scale.is_finite() || *shift < 0.0 || !shift.is_finite() {
                    return Err(CostError::InvalidParam(
                        "scale and shift must be nonnegative and finite".into(),
                    ));
                }
                Ok(())
            }
            CostModel::Table(pts) => {
                if pts.is_empty() {
                    return Err(CostError::InvalidParam("empty table".into()));
                }
                for w in pts.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(CostError::InvalidParam(
                            "table x-coordinates must be strictly increasing".into(),
                        ));
                    }
                    if w[1].1 < w[0].1 {
                        return Err(CostError::InvalidParam(
                            "table values must be nondecreasing".into(),
                        ));
                    }
                }
                if pts.iter().any(|p| p.1 < 0.0) {
                    return Err(CostError::InvalidParam("table values must be nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    /// Closed-form polynomial coefficients, when this cost is a polynomial.
    pub fn to_poly(&self) -> Option<Vec<f64>> {
        match self {
            CostModel::Poly(c) => Some(c.clone()),
            CostModel::ScaledShiftedPower { scale, shift, degree } => {
                // Binomial expansion of scale*(x+shift)^degree.
                let mut c = vec![1.0];
                for _ in 0..*degree {
                    c = poly_mul(&c, &[*shift, 1.0]);
                }
                Some(poly_scale(&c, *scale))
            }
            CostModel::Table(_) => None,
        }
    }

    pub fn degree(&self) -> Option<usize> {
        self.to_poly().map(|c| trim(c).len() - 1)
    }

    pub fn eval(&self, x: f64) -> Result<f64, CostError> {
        if x < 0.0 {
            return Err(CostError::NegativeLoad(x));
        }
        Ok(match self {
            CostModel::Poly(c) => poly_eval(c, x),
            CostModel::ScaledShiftedPower { scale, shift, degree } => {
                scale * pow(x + shift, *degree as f64)
            }
            CostModel::Table(pts) => table_eval(pts, x),
        })
    }

    pub fn deriv(&self, x: f64) -> Result<f64, CostError> {
        if x < 0.0 {
            return Err(CostError::NegativeLoad(x));
        }
        match self {
            CostModel::Poly(c) => Ok(poly_eval(&poly_deriv(c), x)),
            CostModel::ScaledShiftedPower { scale, shift, degree } => {
                let d = *degree as f64;
                Ok(scale * d * pow(x + shift, d - 1.0))
            }
            CostModel::Table(_) => Err(CostError::Unsupported("derivative of TABLE cost")),
        }
    }

    /// Definite integral from 0 to `x`.
    pub fn integral(&self, x: f64) -> Result<f64, CostError> {
        if x < 0.0 {
            return Err(CostError::NegativeLoad(x));
        }
        match self {
            CostModel::Poly(c) => Ok(poly_eval(&poly_antideriv(c), x)),
            CostModel::ScaledShiftedPower { scale, shift, degree } => {
                let d = *degree as f64;
                Ok(scale / (d + 1.0) * (pow(x + shift, d + 1.0) - pow(*shift, d + 1.0)))
            }
            CostModel::Table(_) => Err(CostError::Unsupported("integral of TABLE cost")),
        }
    }
}

fn table_eval(pts: &[(f64, f64)], x: f64) -> f64 {
    if x <= pts[0].0 {
        return pts[0].1;
    }
    if x >= pts[pts.len() - 1].0 {
        return pts[pts.len() - 1].1;
    }
    let i = pts.partition_point(|p| p.0 <= x);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Marginal-cost form `c*(x) = c(x) + x c'(x)`.
///
/// For `sum a_d x^d` this is `sum (d+1) a_d x^d`.
pub fn marginal(c: &CostModel) -> Result<CostModel, CostError> {
    let p = c
        .to_poly()
        .ok_or(CostError::Unsupported("marginal cost of TABLE kind"))?;
    let out: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(d, &a)| a * (d + 1) as f64)
        .collect();
    Ok(CostModel::Poly(trim(out)))
}

// ---------------------------------------------------------------------------

/// Variance model for the mean-variance bias. One model for every edge, or a
/// per-edge table.
#[derive(Clone, Debug, PartialEq)]
pub enum VarianceModel {
    Uniform(CostModel),
    PerEdge(BTreeMap<String, CostModel>),
}

impl VarianceModel {
    pub fn for_edge(&self, edge_id: &str) -> Option<&CostModel> {
        match self {
            VarianceModel::Uniform(m) => Some(m),
            VarianceModel::PerEdge(map) => map.get(edge_id),
        }
    }
}

/// A behavioral bias: a transform from a true cost to a perceived one.
#[derive(Clone, Debug, PartialEq)]
pub enum BiasSpec {
    Identity,
    /// Marginal-cost toll weighed by sensitivity `beta >= 0`:
    /// `c(x) + beta * x * c'(x)`.
    Tax { beta: f64 },
    /// Safety margin on the observed load, `r >= 1`: `c(r x)`.
    Pessimism { r: f64 },
    /// Variance penalty `c(x) + gamma * v(x)`. `kappa` is a declared bound
    /// `v(x) <= kappa * c(x)`; it is metadata for the analysis layer and is
    /// downgraded there if the variance model violates it.
    MeanVar {
        gamma: f64,
        variance: VarianceModel,
        kappa: Option<f64>,
    },
    /// Soft capacity: perceived cost ramps up once the load passes
    /// `limit - delta`, exceeding `penalty * c(limit)` at the limit.
    Capacity { limit: f64, delta: f64, penalty: f64 },
    /// Explicit replacement cost per edge; edges absent from the table keep
    /// their true cost.
    Override(BTreeMap<String, CostModel>),
}

impl BiasSpec {
    pub fn validate(&self) -> Result<(), CostError> {
        match self {
            BiasSpec::Identity => Ok(()),
            BiasSpec::Tax { beta } => {
                if *beta < 0.0 || !beta.is_finite() {
                    return Err(CostError::InvalidParam("tax sensitivity must satisfy beta >= 0".into()));
                }
                Ok(())
            }
            BiasSpec::Pessimism { r } => {
                if *r < 1.0 || !r.is_finite() {
                    return Err(CostError::InvalidParam("pessimism must satisfy r >= 1".into()));
                }
                Ok(())
            }
            BiasSpec::MeanVar { gamma, variance, kappa } => {
                if *gamma < 0.0 || !gamma.is_finite() {
                    return Err(CostError::InvalidParam("mean-var weight must satisfy gamma >= 0".into()));
                }
                if let Some(k) = kappa {
                    if *k <= 0.0 || !k.is_finite() {
                        return Err(CostError::InvalidParam("kappa must be positive".into()));
                    }
                }
                match variance {
                    VarianceModel::Uniform(m) => m.validate(),
                    VarianceModel::PerEdge(map) => map.values().try_for_each(|m| m.validate()),
                }
            }
            BiasSpec::Capacity { limit, delta, penalty } => {
                if !(*limit > 0.0) {
                    return Err(CostError::InvalidParam("capacity limit must be positive".into()));
                }
                if !(*delta > 0.0 && *delta < *limit) {
                    return Err(CostError::InvalidParam("delta must lie in (0, limit)".into()));
                }
                if !(*penalty > 0.0) {
                    return Err(CostError::InvalidParam("penalty must be positive".into()));
                }
                Ok(())
            }
            BiasSpec::Override(map) => map.values().try_for_each(|m| m.validate()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum PerceivedForm {
    /// Closed form in the same model family.
    Model(CostModel),
    /// Capacity ramp: `c(x)` below the activation point `t0 = limit - delta`,
    /// then `c(x) * (1 + (y*penalty + 1) * y^2)` with `y = (x - t0)/delta`.
    /// `ramp_poly` is the extra term expanded as a polynomial in `u = x - t0`
    /// when the base is polynomial.
    CapacityRamp {
        base: CostModel,
        t0: f64,
        delta: f64,
        penalty: f64,
        ramp_poly: Option<Vec<f64>>,
    },
}

/// A true cost paired with its perceived form under a bias.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasedCost {
    base: CostModel,
    form: PerceivedForm,
}

impl BiasedCost {
    pub fn base(&self) -> &CostModel {
        &self.base
    }

    /// The perceived cost as a plain `CostModel`, when it has a closed form
    /// in the model family.
    pub fn perceived_model(&self) -> Option<&CostModel> {
        match &self.form {
            PerceivedForm::Model(m) => Some(m),
            PerceivedForm::CapacityRamp { .. } => None,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, CostError> {
        if x < 0.0 {
            return Err(CostError::NegativeLoad(x));
        }
        match &self.form {
            PerceivedForm::Model(m) => m.eval(x),
            PerceivedForm::CapacityRamp { base, t0, delta, penalty, .. } => {
                let c = base.eval(x)?;
                if x <= *t0 {
                    Ok(c)
                } else {
                    let y = (x - t0) / delta;
                    Ok(c * (1.0 + (y * penalty + 1.0) * y * y))
                }
            }
        }
    }

    pub fn deriv(&self, x: f64) -> Result<f64, CostError> {
        if x < 0.0 {
            return Err(CostError::NegativeLoad(x));
        }
        match &self.form {
            PerceivedForm::Model(m) => m.deriv(x),
            PerceivedForm::CapacityRamp { base, t0, ramp_poly, .. } => {
                let d = base.deriv(x)?;
                if x <= *t0 {
                    return Ok(d);
                }
                let ramp = ramp_poly
                    .as_ref()
                    .ok_or(CostError::Unsupported("capacity ramp derivative on TABLE base"))?;
                Ok(d + poly_eval(&poly_deriv(ramp), x - t0))
            }
        }
    }

    /// Definite integral of the perceived cost from 0 to `x`.
    pub fn integral(&self, x: f64) -> Result<f64, CostError> {
        if x < 0.0 {
            return Err(CostError::NegativeLoad(x));
        }
        match &self.form {
            PerceivedForm::Model(m) => m.integral(x),
            PerceivedForm::CapacityRamp { base, t0, ramp_poly, .. } => {
                let below = base.integral(x.min(*t0))?;
                if x <= *t0 {
                    return Ok(below);
                }
                let ramp = ramp_poly
                    .as_ref()
                    .ok_or(CostError::Unsupported("capacity ramp integral on TABLE base"))?;
                let above_base = base.integral(x)? - base.integral(*t0)?;
                let above_ramp = poly_eval(&poly_antideriv(ramp), x - t0);
                Ok(below + above_base + above_ramp)
            }
        }
    }

    pub fn has_integral(&self) -> bool {
        self.integral(1.0).is_ok()
    }
}

/// Apply a non-Override bias. Override needs an edge id; see
/// [`apply_bias_for_edge`].
pub fn apply_bias(c: &CostModel, bias: &BiasSpec) -> Result<BiasedCost, CostError> {
    if matches!(bias, BiasSpec::Override(_)) {
        return Err(CostError::Unsupported(
            "OVERRIDE bias is per-edge; use apply_bias_for_edge",
        ));
    }
    apply_bias_for_edge(c, bias, "")
}

/// Apply a bias to the cost of a specific edge.
pub fn apply_bias_for_edge(
    c: &CostModel,
    bias: &BiasSpec,
    edge_id: &str,
) -> Result<BiasedCost, CostError> {
    bias.validate()?;
    c.validate()?;
    let form = match bias {
        BiasSpec::Identity => PerceivedForm::Model(c.clone()),
        BiasSpec::Tax { beta } => {
            let p = c
                .to_poly()
                .ok_or(CostError::Unsupported("tax bias on TABLE cost"))?;
            let hat: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(d, &a)| a * (1.0 + d as f64 * beta))
                .collect();
            PerceivedForm::Model(CostModel::Poly(trim(hat)))
        }
        BiasSpec::Pessimism { r } => match c {
            CostModel::Table(pts) => {
                // c(r x) on a piecewise-linear table: rescale the knots.
                let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x / r, y)).collect();
                PerceivedForm::Model(CostModel::Table(scaled))
            }
            _ => {
                let p = c.to_poly().expect("poly-backed kinds expand");
                let hat: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(d, &a)| a * pow(*r, d as f64))
                    .collect();
                PerceivedForm::Model(CostModel::Poly(trim(hat)))
            }
        },
        BiasSpec::MeanVar { gamma, variance, .. } => {
            let p = c
                .to_poly()
                .ok_or(CostError::Unsupported("mean-var bias on TABLE cost"))?;
            let v = variance
                .for_edge(edge_id)
                .ok_or_else(|| {
                    CostError::InvalidParam(alloc::format!(
                        "no variance model for edge `{edge_id}`"
                    ))
                })?
                .to_poly()
                .ok_or(CostError::Unsupported("TABLE variance model"))?;
            PerceivedForm::Model(CostModel::Poly(trim(poly_add(&p, &poly_scale(&v, *gamma)))))
        }
        BiasSpec::Capacity { limit, delta, penalty } => {
            let t0 = limit - delta;
            let ramp_poly = c.to_poly().map(|p| {
                // extra(u) = c(u + t0) * (penalty*u/delta + 1) * (u/delta)^2
                let shifted = poly_shift(&p, t0);
                let factor = vec![0.0, 0.0, 1.0 / (delta * delta), penalty / (delta * delta * delta)];
                trim(poly_mul(&shifted, &factor))
            });
            PerceivedForm::CapacityRamp {
                base: c.clone(),
                t0,
                delta: *delta,
                penalty: *penalty,
                ramp_poly,
            }
        }
        BiasSpec::Override(map) => {
            let model = map.get(edge_id).cloned().unwrap_or_else(|| c.clone());
            PerceivedForm::Model(model)
        }
    };
    Ok(BiasedCost {
        base: c.clone(),
        form,
    })
}

/// Smallest `eps` such that `max(hat c / c, c / hat c) <= 1 + eps` on a
/// sampled grid over `domain`. Infinite if one side vanishes where the other
/// does not.
pub fn small_bias_factor(
    c: &CostModel,
    bc: &BiasedCost,
    domain: (f64, f64),
    grid: usize,
) -> Result<f64, CostError> {
    assert!(grid >= 2);
    let (lo, hi) = domain;
    let mut eps: f64 = 0.0;
    for i in 0..grid {
        let x = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        let cv = c.eval(x)?;
        let hv = bc.eval(x)?;
        if cv == 0.0 && hv == 0.0 {
            continue;
        }
        if cv <= 0.0 || hv <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let ratio = if hv > cv { hv / cv } else { cv / hv };
        eps = eps.max(ratio - 1.0);
    }
    Ok(eps)
}

/// Largest observed `v(x)/c(x)` over a sample grid; used to confirm or
/// downgrade a declared kappa bound. `None` when the ratio is unbounded on
/// the grid (variance positive where the cost vanishes).
pub fn observed_kappa(
    c: &CostModel,
    v: &CostModel,
    domain: (f64, f64),
    grid: usize,
) -> Result<Option<f64>, CostError> {
    assert!(grid >= 2);
    let (lo, hi) = domain;
    let mut worst: f64 = 0.0;
    for i in 0..grid {
        let x = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        let cv = c.eval(x)?;
        let vv = v.eval(x)?;
        if vv <= 0.0 {
            continue;
        }
        if cv <= 0.0 {
            return Ok(None);
        }
        worst = worst.max(vv / cv);
    }
    Ok(Some(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use libm::fabs;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        fabs(a - b) <= tol * (1.0 + fabs(a).max(fabs(b)))
    }

    #[test]
    fn eval_deriv_integral_closed_forms() {
        let sq = CostModel::monomial(1.0, 2);
        assert_eq!(sq.eval(3.0).unwrap(), 9.0);
        let aff = CostModel::affine(2.0, 5.0);
        assert_eq!(aff.deriv(7.3).unwrap(), 2.0);
        let lin = CostModel::monomial(1.0, 1);
        assert_eq!(lin.integral(1.0).unwrap(), 0.5);
        assert_eq!(lin.integral(0.0).unwrap(), 0.0);
        assert!(matches!(lin.eval(-1.0), Err(CostError::NegativeLoad(_))));
    }

    #[test]
    fn marginal_forms() {
        assert_eq!(
            marginal(&CostModel::monomial(1.0, 1)).unwrap(),
            CostModel::monomial(2.0, 1)
        );
        assert_eq!(
            marginal(&CostModel::monomial(1.0, 2)).unwrap(),
            CostModel::monomial(3.0, 2)
        );
        assert_eq!(
            marginal(&CostModel::constant(4.0)).unwrap(),
            CostModel::constant(4.0)
        );
        assert!(marginal(&CostModel::Table(vec![(0.0, 1.0)])).is_err());
    }

    #[test]
    fn tax_on_affine() {
        // (1+beta) a x + b
        let bc = apply_bias(&CostModel::affine(2.0, 3.0), &BiasSpec::Tax { beta: 0.5 }).unwrap();
        assert_eq!(
            bc.perceived_model().unwrap(),
            &CostModel::affine(3.0, 3.0)
        );
    }

    #[test]
    fn pessimism_on_quadratic() {
        // r^2 a x^2 + r b x + c
        let c = CostModel::poly(&[4.0, 3.0, 2.0]);
        let bc = apply_bias(&c, &BiasSpec::Pessimism { r: 3.0 }).unwrap();
        assert_eq!(
            bc.perceived_model().unwrap(),
            &CostModel::poly(&[4.0, 9.0, 18.0])
        );
        // r=3 on x^2 -> 9x^2
        let bc = apply_bias(&CostModel::monomial(1.0, 2), &BiasSpec::Pessimism { r: 3.0 }).unwrap();
        assert_eq!(bc.perceived_model().unwrap(), &CostModel::monomial(9.0, 2));
    }

    #[test]
    fn pessimism_on_affine_equals_tax() {
        let c = CostModel::affine(1.7, 0.4);
        let p = apply_bias(&c, &BiasSpec::Pessimism { r: 2.5 }).unwrap();
        let t = apply_bias(&c, &BiasSpec::Tax { beta: 1.5 }).unwrap();
        assert_eq!(p.perceived_model(), t.perceived_model());
    }

    #[test]
    fn tax_one_is_marginal() {
        let c = CostModel::poly(&[1.0, 2.0, 0.5, 0.25]);
        let bc = apply_bias(&c, &BiasSpec::Tax { beta: 1.0 }).unwrap();
        assert_eq!(bc.perceived_model().unwrap(), &marginal(&c).unwrap());
    }

    #[test]
    fn bias_parameter_ranges() {
        let c = CostModel::affine(1.0, 0.0);
        assert!(apply_bias(&c, &BiasSpec::Tax { beta: -0.1 }).is_err());
        assert!(apply_bias(&c, &BiasSpec::Pessimism { r: 0.9 }).is_err());
        let mv = BiasSpec::MeanVar {
            gamma: -1.0,
            variance: VarianceModel::Uniform(CostModel::constant(0.0)),
            kappa: None,
        };
        assert!(apply_bias(&c, &mv).is_err());
    }

    #[test]
    fn override_lookup_falls_back() {
        let mut map = BTreeMap::new();
        map.insert("e1".into(), CostModel::constant(9.0));
        let bias = BiasSpec::Override(map);
        let c = CostModel::affine(1.0, 0.0);
        let hit = apply_bias_for_edge(&c, &bias, "e1").unwrap();
        assert_eq!(hit.eval(0.3).unwrap(), 9.0);
        let miss = apply_bias_for_edge(&c, &bias, "e2").unwrap();
        assert_eq!(miss.eval(0.3).unwrap(), 0.3);
    }

    #[test]
    fn capacity_continuous_and_large_at_limit() {
        let c = CostModel::affine(0.5, 1.0);
        let bias = BiasSpec::Capacity {
            limit: 2.0,
            delta: 0.5,
            penalty: 50.0,
        };
        let bc = apply_bias(&c, &bias).unwrap();
        let t0 = 1.5;
        let below = bc.eval(t0 - 1e-9).unwrap();
        let at = bc.eval(t0).unwrap();
        let above = bc.eval(t0 + 1e-9).unwrap();
        assert!(close(below, at, 1e-6) && close(at, above, 1e-6));
        // c(limit) = 2 >= 1, so the perceived cost at the limit clears M*c(L).
        let climit = c.eval(2.0).unwrap();
        assert!(bc.eval(2.0).unwrap() >= 50.0 * climit);
        // Below activation the bias is invisible.
        assert_eq!(bc.eval(1.0).unwrap(), c.eval(1.0).unwrap());
    }

    #[test]
    fn capacity_calculus_matches_finite_differences() {
        let c = CostModel::poly(&[1.0, 0.5, 0.25]);
        let bias = BiasSpec::Capacity {
            limit: 3.0,
            delta: 1.0,
            penalty: 10.0,
        };
        let bc = apply_bias(&c, &bias).unwrap();
        let h = 1e-6;
        for &x in &[0.5, 1.9, 2.1, 2.5, 3.5] {
            let fd = (bc.eval(x + h).unwrap() - bc.eval(x - h).unwrap()) / (2.0 * h);
            assert!(close(fd, bc.deriv(x).unwrap(), 1e-4), "deriv mismatch at {x}");
            let fdi = (bc.integral(x + h).unwrap() - bc.integral(x - h).unwrap()) / (2.0 * h);
            assert!(close(fdi, bc.eval(x).unwrap(), 1e-4), "integral mismatch at {x}");
        }
    }

    #[test]
    fn small_bias_examples() {
        let c = CostModel::monomial(1.0, 1);
        let id = apply_bias(&c, &BiasSpec::Identity).unwrap();
        assert_eq!(small_bias_factor(&c, &id, (0.0, 10.0), 101).unwrap(), 0.0);

        // TAX(0.1) on c(x)=x: ratio exactly 1.1 everywhere.
        let t = apply_bias(&c, &BiasSpec::Tax { beta: 0.1 }).unwrap();
        let eps = small_bias_factor(&c, &t, (0.0, 10.0), 101).unwrap();
        assert!(close(eps, 0.1, 1e-12));

        // PESSIMISM(2) on x^2: ratio is a constant 4, so eps = 3.
        let sq = CostModel::monomial(1.0, 2);
        let p = apply_bias(&sq, &BiasSpec::Pessimism { r: 2.0 }).unwrap();
        let eps = small_bias_factor(&sq, &p, (0.0, 10.0), 101).unwrap();
        assert!(close(eps, 3.0, 1e-12));
    }

    #[test]
    fn table_eval_interpolates() {
        let t = CostModel::Table(vec![(0.0, 1.0), (1.0, 3.0)]);
        t.validate().unwrap();
        assert_eq!(t.eval(0.5).unwrap(), 2.0);
        assert_eq!(t.eval(5.0).unwrap(), 3.0);
        assert!(t.deriv(0.5).is_err());
    }

    #[test]
    fn scaled_shifted_power_expands() {
        let m = CostModel::ScaledShiftedPower {
            scale: 2.0,
            shift: 1.0,
            degree: 2,
        };
        // 2(x+1)^2 = 2 + 4x + 2x^2
        assert_eq!(m.to_poly().unwrap(), vec![2.0, 4.0, 2.0]);
        assert!(close(m.eval(3.0).unwrap(), 32.0, 1e-12));
    }
}
