//! Applied boundary current and field: the auxiliary fields `h₀`, `f₀`,
//! `f₁`, `f = j_ex f₁ − h_ex f₀`, the forcing field
//! `Z = j_ex ∇f₁ − h_ex ∇f₀ − h_ex ∇⊥h₀`, and regime bookkeeping.

use thiserror::Error;

use crate::elliptic::{solve_helmholtz, BcKind, EllipticError, HelmholtzProblem};
use crate::grid::{discrete_grad, discrete_perp_grad, BoundaryTrace, DomainGrid, EdgeField, NodeField};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriveError {
    #[error("drive strengths must be finite and non-negative (j_ex = {j_ex}, h_ex = {h_ex})")]
    NegativeStrength { j_ex: f64, h_ex: f64 },
    #[error("Fourier series {name} has order {order} > 16")]
    OrderTooHigh { name: &'static str, order: usize },
    #[error("Fourier series {name} has non-finite coefficients")]
    NonFinite { name: &'static str },
    #[error("I·ν has non-zero mean {0}; its boundary trace H cannot be derived")]
    NetFlux(f64),
    #[error("epsilon {0} outside (0, 0.5)")]
    BadEpsilon(f64),
    #[error("j_ex = h_ex = 0: no dominant strength, regime undefined")]
    NoDrive,
    #[error("regime override {0} not in 1..=4")]
    BadRegime(u8),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

/// Truncated Fourier series `a₀ + Σ_k a_kc cos(2πks) + a_ks sin(2πks)` in
/// normalized arclength, coefficients stored as `[a₀, a₁c, a₁s, a₂c, …]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries<T> {
    pub coeffs: Vec<T>,
}

impl<T: Real> FourierSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: T) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == T::zero())
    }

    pub fn eval(&self, s: T) -> T {
        let mut v = self.coeffs.first().copied().unwrap_or(T::zero());
        for (k, pair) in self.coeffs[1.min(self.coeffs.len())..].chunks(2).enumerate() {
            let arg = T::TAU() * T::from_usize_(k + 1) * s;
            v += pair[0] * arg.cos();
            if pair.len() > 1 {
                v += pair[1] * arg.sin();
            }
        }
        v
    }

    fn validate(&self, name: &'static str) -> Result<(), DriveError> {
        if self.order() > 16 {
            return Err(DriveError::OrderTooHigh {
                name,
                order: self.order(),
            });
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(DriveError::NonFinite { name });
        }
        Ok(())
    }

    /// `c + P ∫₀ˢ g`, the trace whose tangential derivative is `g`
    /// (for zero-mean `g`).
    fn integrated(&self, perimeter: T, c: T) -> Result<Self, DriveError> {
        let a0 = self.coeffs.first().copied().unwrap_or(T::zero());
        if a0.abs() > T::lit(1e-14) {
            return Err(DriveError::NetFlux(a0.to_f64_()));
        }
        let mut out = vec![T::zero(); self.coeffs.len().max(1)];
        out[0] = c;
        for (k, pair) in self.coeffs[1.min(self.coeffs.len())..].chunks(2).enumerate() {
            let scale = perimeter / (T::TAU() * T::from_usize_(k + 1));
            let ac = pair[0];
            let as_ = if pair.len() > 1 { pair[1] } else { T::zero() };
            // ∫ cos = sin/(2πk), ∫ sin = −cos/(2πk)
            let base = 1 + 2 * k;
            if out.len() < base + 2 {
                out.resize(base + 2, T::zero());
            }
            out[base] = -as_ * scale;
            out[base + 1] = ac * scale;
        }
        Ok(Self { coeffs: out })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveSpec<T> {
    pub j_ex: T,
    pub h_ex: T,
    /// J·ν on ∂Ω.
    pub j_nu: FourierSeries<T>,
    /// I·ν on ∂Ω.
    pub i_nu: FourierSeries<T>,
    /// Trace of H; `None` means the constant 1 when I ≡ 0, otherwise the
    /// trace with ∂_τH = I·ν and mean 1.
    pub h_trace: Option<FourierSeries<T>>,
}

impl<T: Real> DriveSpec<T> {
    /// No current and no field.
    pub fn none() -> Self {
        Self {
            j_ex: T::zero(),
            h_ex: T::zero(),
            j_nu: FourierSeries::zero(),
            i_nu: FourierSeries::zero(),
            h_trace: None,
        }
    }

    pub fn validate(&self) -> Result<(), DriveError> {
        if !(self.j_ex >= T::zero() && self.h_ex >= T::zero() && self.j_ex.is_finite() && self.h_ex.is_finite()) {
            return Err(DriveError::NegativeStrength {
                j_ex: self.j_ex.to_f64_(),
                h_ex: self.h_ex.to_f64_(),
            });
        }
        self.j_nu.validate("J_nu")?;
        self.i_nu.validate("I_nu")?;
        if let Some(h) = &self.h_trace {
            h.validate("H")?;
        }
        Ok(())
    }

    pub fn effective_h(&self, perimeter: T) -> Result<FourierSeries<T>, DriveError> {
        match &self.h_trace {
            Some(h) => Ok(h.clone()),
            None if self.i_nu.is_zero() => Ok(FourierSeries::constant(T::one())),
            None => self.i_nu.integrated(perimeter, T::one()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PrecomputedFields<T> {
    pub j_ex: T,
    pub h_ex: T,
    pub h0: NodeField<T>,
    pub f0: NodeField<T>,
    pub f1: NodeField<T>,
    pub f: NodeField<T>,
    pub z: EdgeField<T>,
    pub grad_h0: EdgeField<T>,
    pub grad_f0: EdgeField<T>,
    pub grad_f1: EdgeField<T>,
    pub perp_h0: EdgeField<T>,
    pub perp_f0: EdgeField<T>,
    pub perp_f1: EdgeField<T>,
    pub sup_z: T,
}

impl<T: Real> PrecomputedFields<T> {
    /// All fields zero: no current, no applied field.
    pub fn zero(grid: &DomainGrid<T>) -> Self {
        let n = NodeField::filled(grid, T::zero());
        let e = EdgeField::zeros(grid);
        Self {
            j_ex: T::zero(),
            h_ex: T::zero(),
            h0: n.clone(),
            f0: n.clone(),
            f1: n.clone(),
            f: n,
            z: e.clone(),
            grad_h0: e.clone(),
            grad_f0: e.clone(),
            grad_f1: e.clone(),
            perp_h0: e.clone(),
            perp_f0: e.clone(),
            perp_f1: e,
            sup_z: T::zero(),
        }
    }

    /// Same auxiliary fields with `Z` and `f` switched off.
    pub fn current_free(&self) -> Self {
        let mut out = self.clone();
        out.z.x.iter_mut().chain(out.z.y.iter_mut()).for_each(|v| *v = T::zero());
        out.f.data.iter_mut().for_each(|v| *v = T::zero());
        out.sup_z = T::zero();
        out
    }
}

/// Solves for `h₀` (Dirichlet data H), `f₁`, `f₀` (Neumann data J·ν, I·ν)
/// and assembles `f` and `Z`.
pub fn precompute<T: Real>(drive: &DriveSpec<T>, grid: &DomainGrid<T>, tol: T) -> Result<PrecomputedFields<T>, DriveError> {
    drive.validate()?;
    let zero_rhs = NodeField::filled(grid, T::zero());
    let hser = drive.effective_h(grid.perimeter)?;
    let h0 = solve_helmholtz(
        grid,
        &HelmholtzProblem::new(zero_rhs.clone(), BcKind::Dirichlet, BoundaryTrace::from_fn(grid, |s| hser.eval(s)), tol),
    )?;
    let neumann = |ser: &FourierSeries<T>| -> Result<NodeField<T>, DriveError> {
        if ser.is_zero() {
            return Ok(zero_rhs.clone());
        }
        Ok(solve_helmholtz(
            grid,
            &HelmholtzProblem::new(zero_rhs.clone(), BcKind::Neumann, BoundaryTrace::from_fn(grid, |s| ser.eval(s)), tol),
        )?)
    };
    let f1 = neumann(&drive.j_nu)?;
    let f0 = neumann(&drive.i_nu)?;
    Ok(assemble(grid, drive.j_ex, drive.h_ex, h0, f0, f1))
}

/// Builds `f`, `Z` and the gradient fields from solved `h₀, f₀, f₁`.
pub fn assemble<T: Real>(grid: &DomainGrid<T>, j_ex: T, h_ex: T, h0: NodeField<T>, f0: NodeField<T>, f1: NodeField<T>) -> PrecomputedFields<T> {
    let f = NodeField {
        nx: grid.nx,
        ny: grid.ny,
        data: f1.data.iter().zip(&f0.data).map(|(a, b)| j_ex * *a - h_ex * *b).collect(),
    };
    let grad_h0 = discrete_grad(grid, &h0);
    let grad_f0 = discrete_grad(grid, &f0);
    let grad_f1 = discrete_grad(grid, &f1);
    let perp_h0 = discrete_perp_grad(grid, &h0);
    let perp_f0 = discrete_perp_grad(grid, &f0);
    let perp_f1 = discrete_perp_grad(grid, &f1);
    let mut z = EdgeField::zeros(grid);
    for k in 0..z.x.len() {
        z.x[k] = j_ex * grad_f1.x[k] - h_ex * grad_f0.x[k] - h_ex * perp_h0.x[k];
    }
    for k in 0..z.y.len() {
        z.y[k] = j_ex * grad_f1.y[k] - h_ex * grad_f0.y[k] - h_ex * perp_h0.y[k];
    }
    let sup_z = z.max_abs();
    PrecomputedFields {
        j_ex,
        h_ex,
        h0,
        f0,
        f1,
        f,
        z,
        grad_h0,
        grad_f0,
        grad_f1,
        perp_h0,
        perp_f0,
        perp_f1,
        sup_z,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeInfo<T> {
    pub regime: u8,
    pub k_ex: T,
    pub alpha: T,
    pub beta: T,
    /// Acceleration scale |log ε| / k_ex.
    pub lambda: T,
    pub warnings: Vec<String>,
}

/// Classifies the drive. Without an override: regime 1 iff j = h = 1,
/// 2 iff h = 0 < j, 3 iff j = 0 < h, 4 otherwise.
pub fn classify_regime<T: Real>(j_ex: T, h_ex: T, epsilon: T, regime_override: Option<u8>) -> Result<RegimeInfo<T>, DriveError> {
    if !(epsilon > T::zero() && epsilon < T::half()) {
        return Err(DriveError::BadEpsilon(epsilon.to_f64_()));
    }
    if !(j_ex >= T::zero() && h_ex >= T::zero()) {
        return Err(DriveError::NegativeStrength {
            j_ex: j_ex.to_f64_(),
            h_ex: h_ex.to_f64_(),
        });
    }
    let k_ex = j_ex.max(h_ex);
    if k_ex == T::zero() {
        return Err(DriveError::NoDrive);
    }
    let regime = match regime_override {
        Some(r) if (1..=4).contains(&r) => r,
        Some(r) => return Err(DriveError::BadRegime(r)),
        None if j_ex == T::one() && h_ex == T::one() => 1,
        None if h_ex == T::zero() => 2,
        None if j_ex == T::zero() => 3,
        None => 4,
    };
    let log_eps = epsilon.ln().abs();
    let bound = log_eps.powf(T::one() / T::lit(9.0));
    let mut warnings = Vec::new();
    if k_ex >= bound {
        warnings.push(format!(
            "k_ex = {} exceeds |log eps|^(1/9) = {:.4}; asymptotic regime not reached",
            k_ex,
            bound.to_f64_()
        ));
    }
    Ok(RegimeInfo {
        regime,
        k_ex,
        alpha: j_ex / k_ex,
        beta: h_ex / k_ex,
        lambda: log_eps / k_ex,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::node_inner;
    use std::f64::consts::PI;

    fn g(n: usize) -> DomainGrid<f64> {
        DomainGrid::square(1.0, n).unwrap()
    }

    #[test]
    fn fourier_evaluation() {
        let s = FourierSeries::new(vec![0.5, 1.0, 2.0, 0.0, -1.0]);
        let x = 0.3;
        let want = 0.5 + (2.0 * PI * x).cos() + 2.0 * (2.0 * PI * x).sin() - (4.0 * PI * x).sin();
        assert!((s.eval(x) - want).abs() < 1e-14);
        assert_eq!(FourierSeries::<f64>::zero().eval(0.2), 0.0);
        assert!(FourierSeries::new(vec![0.0; 35]).validate("J_nu").is_err());
    }

    #[test]
    fn derived_h_trace_has_matching_tangential_derivative() {
        let i_nu = FourierSeries::<f64>::new(vec![0.0, 0.3, -0.2, 0.1, 0.05]);
        let p = 4.0;
        let h = i_nu.integrated(p, 1.0).unwrap();
        let ds = 1e-6;
        for s in [0.1, 0.37, 0.8] {
            let dh = (h.eval(s + ds) - h.eval(s - ds)) / (2.0 * ds) / p;
            assert!((dh - i_nu.eval(s)).abs() < 1e-7);
        }
        assert!(FourierSeries::new(vec![0.2]).integrated(p, 1.0).is_err());
    }

    #[test]
    fn no_current_gives_meissner_only() {
        let gr = g(33);
        let drive = DriveSpec {
            j_ex: 0.0,
            h_ex: 1.5,
            ..DriveSpec::none()
        };
        let pre = precompute(&drive, &gr, 1e-12).unwrap();
        assert!(pre.f.data.iter().all(|v| *v == 0.0));
        for k in 0..pre.z.x.len() {
            assert!((pre.z.x[k] + 1.5 * pre.perp_h0.x[k]).abs() < 1e-12);
        }
        for j in 1..32 {
            for i in 1..32 {
                let v = pre.h0.at(i, j);
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn f1_integral_matches_perimeter() {
        let gr = g(33);
        let drive = DriveSpec {
            j_ex: 1.0,
            j_nu: FourierSeries::constant(1.0),
            ..DriveSpec::none()
        };
        let pre = precompute(&drive, &gr, 1e-12).unwrap();
        let total = node_inner(&gr, &pre.f1, &NodeField::filled(&gr, 1.0));
        assert!((total - 4.0).abs() < 1e-8);
    }

    #[test]
    fn f_and_z_invariants_and_linearity() {
        let gr = g(33);
        let mk = |j: f64| DriveSpec {
            j_ex: j,
            h_ex: 0.7,
            j_nu: FourierSeries::new(vec![0.0, 1.0]),
            i_nu: FourierSeries::new(vec![0.0, 0.0, 0.5]),
            h_trace: None,
        };
        let a = precompute(&mk(1.0), &gr, 1e-12).unwrap();
        let b = precompute(&mk(2.0), &gr, 1e-12).unwrap();
        for k in 0..a.f.data.len() {
            assert!((a.f.data[k] - (a.f1.data[k] - 0.7 * a.f0.data[k])).abs() < 1e-12);
            assert!((b.f.data[k] - a.f.data[k] - a.f1.data[k]).abs() < 1e-12);
        }
        let rescan = a.z.x.iter().chain(&a.z.y).fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(rescan, a.sup_z);
    }

    #[test]
    fn normal_component_of_z_matches_boundary_data() {
        // on the bottom side ν = (0, −1): Z·ν ≈ j J·ν to O(h) at the first y-edge
        let gr = g(129);
        let drive = DriveSpec {
            j_ex: 2.0,
            j_nu: FourierSeries::new(vec![0.0, 1.0]),
            ..DriveSpec::none()
        };
        let pre = precompute(&drive, &gr, 1e-12).unwrap();
        let s = gr.boundary_arclength();
        for i in 10..118 {
            let zn = -pre.z.y[gr.yedge(i, 0)];
            let want = 2.0 * (2.0 * PI * s[i]).cos();
            assert!((zn - want).abs() < 20.0 * gr.h, "{zn} vs {want}");
        }
    }

    #[test]
    fn f1_converges_at_second_order() {
        let value = |n: usize| {
            let gr = g(n);
            let drive = DriveSpec {
                j_ex: 1.0,
                j_nu: FourierSeries::new(vec![0.0, 1.0]),
                ..DriveSpec::none()
            };
            let pre = precompute(&drive, &gr, 1e-12).unwrap();
            // value at (0.25, 0.5) avoids the symmetric zero at the centre
            pre.f1.at((n - 1) / 4, (n - 1) / 2)
        };
        let (a, b, c, r) = (value(33), value(65), value(129), value(513));
        let order1 = ((a - r) / (b - r)).abs().log2();
        let order2 = ((b - r) / (c - r)).abs().log2();
        assert!(order1 >= 1.8 && order2 >= 1.8, "{order1} {order2}");
    }

    #[test]
    fn regime_classification() {
        let r1 = classify_regime(1.0f64, 1.0, 0.05, None).unwrap();
        assert_eq!(r1.regime, 1);
        assert!((r1.lambda - 2.995_732_273_553_991).abs() < 1e-12);
        assert!(r1.warnings.is_empty());
        let r2 = classify_regime(2.0, 0.0, 0.05, None).unwrap();
        assert_eq!((r2.regime, r2.alpha, r2.beta), (2, 1.0, 0.0));
        assert!((r2.lambda - 0.05f64.ln().abs() / 2.0).abs() < 1e-15);
        let r4 = classify_regime(3.0, 3.0, 0.05, None).unwrap();
        assert_eq!((r4.regime, r4.alpha, r4.beta), (4, 1.0, 1.0));
        assert_eq!(r4.warnings.len(), 1);
        assert!(classify_regime(-1.0, 0.0, 0.05, None).is_err());
        assert!(classify_regime(0.0, 0.0, 0.05, None).is_err());
        assert_eq!(classify_regime(2.0, 0.1, 0.05, Some(2)).unwrap().regime, 2);
    }
}
