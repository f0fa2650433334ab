//! Algebra of the Dirac-Klein-Gordon system: Dirac matrices, the
//! projections `P±`, the β-form `⟨βψ, ψ'⟩` and its null structure, and the
//! map between Cauchy data `(ψ₀, φ₀, φ₁)` and half-wave unknowns.
//!
//! Conventions:
//! - `α = [[0,1],[1,0]]`, `β = [[1,0],[0,-1]]`, `P± = ½[[1,±1],[±1,1]]`.
//! - `⟨u, v⟩_{C²} = v^† u`, conjugate-linear in the second slot, which makes
//!   `⟨βψ, ψ⟩ = |ψ₁|² - |ψ₂|²` real.
//! - `A = -∂²_x + 1`; a Klein-Gordon mass `m ≠ 1` enters only through
//!   `c₀ = 1 - m²` on the right-hand side.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::{ComplexScalarField, GridSpec, Representation};
use crate::{japanese, Error, Result, Sign};

/// Real 2×2 matrix acting on `C²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
pub const ALPHA: Mat2 = Mat2([[0.0, 1.0], [1.0, 0.0]]);
pub const BETA: Mat2 = Mat2([[1.0, 0.0], [0.0, -1.0]]);
pub const P_PLUS: Mat2 = Mat2([[0.5, 0.5], [0.5, 0.5]]);
pub const P_MINUS: Mat2 = Mat2([[0.5, -0.5], [-0.5, 0.5]]);

pub fn projection(sign: Sign) -> Mat2 {
    match sign {
        Sign::Plus => P_PLUS,
        Sign::Minus => P_MINUS,
    }
}

impl Mat2 {
    #[inline]
    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let a = &self.0;
        [
            v[0] * a[0][0] + v[1] * a[0][1],
            v[0] * a[1][0] + v[1] * a[1][1],
        ]
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    pub fn add(&self, other: &Mat2) -> Mat2 {
        let mut out = self.0;
        for (row, orow) in out.iter_mut().zip(other.0) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x += y;
            }
        }
        Mat2(out)
    }

    pub fn scaled(&self, factor: f64) -> Mat2 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|x| *x *= factor);
        Mat2(out)
    }
}

/// Largest deviation, over the listed matrix identities, when both sides
/// are applied to `v` by successive matrix-vector products.
///
/// Identities: `α² = β² = I`, `αβ + βα = 0`, `P±² = P±`, `P±P∓ = 0`,
/// `α = P₊ - P₋`, `P±β = βP∓`, `P₊ + P₋ = I`.
pub fn identity_residual(v: [Complex64; 2]) -> f64 {
    let diff =
        |x: [Complex64; 2], y: [Complex64; 2]| (x[0] - y[0]).norm().max((x[1] - y[1]).norm());
    let zero = [Complex64::new(0.0, 0.0); 2];
    let sum = |x: [Complex64; 2], y: [Complex64; 2]| [x[0] + y[0], x[1] + y[1]];
    let neg = |x: [Complex64; 2]| [-x[0], -x[1]];
    let mut worst = 0.0f64;
    let mut check = |x, y| worst = worst.max(diff(x, y));
    check(ALPHA.apply(ALPHA.apply(v)), v);
    check(BETA.apply(BETA.apply(v)), v);
    check(
        sum(ALPHA.apply(BETA.apply(v)), BETA.apply(ALPHA.apply(v))),
        zero,
    );
    for s in Sign::BOTH {
        let p = projection(s);
        let q = projection(s.flip());
        check(p.apply(p.apply(v)), p.apply(v));
        check(p.apply(q.apply(v)), zero);
        check(p.apply(BETA.apply(v)), BETA.apply(q.apply(v)));
    }
    check(ALPHA.apply(v), sum(P_PLUS.apply(v), neg(P_MINUS.apply(v))));
    check(sum(P_PLUS.apply(v), P_MINUS.apply(v)), v);
    worst
}

/// A `C²`-valued field: two components on one grid, in one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    upper: ComplexScalarField,
    lower: ComplexScalarField,
}

impl SpinorField {
    pub fn new(upper: ComplexScalarField, lower: ComplexScalarField) -> Result<Self> {
        if upper.grid() != lower.grid() {
            return Err(Error::GridMismatch);
        }
        let lower = match upper.rep() {
            Representation::Spectral => lower.into_spectral(),
            Representation::Physical => lower.into_physical(),
        };
        Ok(Self { upper, lower })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            upper: ComplexScalarField::zeros(grid),
            lower: ComplexScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> [Complex64; 2]) -> Self {
        let values: Vec<[Complex64; 2]> = grid.points().into_iter().map(f).collect();
        let upper = values.iter().map(|v| v[0]).collect();
        let lower = values.iter().map(|v| v[1]).collect();
        Self {
            upper: ComplexScalarField::from_physical(grid, upper).expect("grid length"),
            lower: ComplexScalarField::from_physical(grid, lower).expect("grid length"),
        }
    }

    pub fn upper(&self) -> &ComplexScalarField {
        &self.upper
    }

    pub fn lower(&self) -> &ComplexScalarField {
        &self.lower
    }

    pub fn into_components(self) -> (ComplexScalarField, ComplexScalarField) {
        (self.upper, self.lower)
    }

    pub fn grid(&self) -> &GridSpec {
        self.upper.grid()
    }

    pub fn rep(&self) -> Representation {
        self.upper.rep()
    }

    pub fn to_spectral(&self) -> Self {
        Self {
            upper: self.upper.to_spectral(),
            lower: self.lower.to_spectral(),
        }
    }

    pub fn to_physical(&self) -> Self {
        Self {
            upper: self.upper.to_physical(),
            lower: self.lower.to_physical(),
        }
    }

    /// Pointwise action of a constant matrix. Constant matrices commute with
    /// the transform, so this is valid in either representation.
    pub fn map_matrix(&self, mat: &Mat2) -> Self {
        let (u, l) = (self.upper.data(), self.lower.data());
        let (nu, nl): (Vec<_>, Vec<_>) = u
            .iter()
            .zip(l)
            .map(|(&a, &b)| {
                let v = mat.apply([a, b]);
                (v[0], v[1])
            })
            .unzip();
        let grid = *self.grid();
        let rep = self.rep();
        Self {
            upper: ComplexScalarField::with_rep(grid, nu, rep).expect("grid length"),
            lower: ComplexScalarField::with_rep(grid, nl, rep).expect("grid length"),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, Complex64::new(1.0, 0.0))
    }

    pub fn add_scaled(&self, other: &Self, factor: Complex64) -> Result<Self> {
        Ok(Self {
            upper: self.upper.add_scaled(&other.upper, factor)?,
            lower: self.lower.add_scaled(&other.lower, factor)?,
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            upper: self.upper.scale(factor),
            lower: self.lower.scale(factor),
        }
    }

    /// Applies the same scalar symbol to both components.
    pub fn apply_multiplier(&self, symbol: impl Fn(f64) -> Complex64) -> Result<Self> {
        Ok(Self {
            upper: self.upper.apply_multiplier(&symbol)?,
            lower: self.lower.apply_multiplier(&symbol)?,
        })
    }

    pub fn l2_norm(&self) -> f64 {
        self.upper.l2_norm().hypot(self.lower.l2_norm())
    }

    /// `max_x |ψ(x)|` with the Euclidean norm on `C²`.
    pub fn sup_norm(&self) -> f64 {
        let (u, l) = (self.upper.values(), self.lower.values());
        u.iter()
            .zip(&l)
            .map(|(a, b)| a.norm().hypot(b.norm()))
            .fold(0.0, f64::max)
    }

    /// Largest coefficient-wise deviation from the range of `P_sign`.
    pub fn projection_residual(&self, sign: Sign) -> f64 {
        let off = self.map_matrix(&projection(sign.flip()));
        let u = off.upper.data().iter().map(|c| c.norm());
        let l = off.lower.data().iter().map(|c| c.norm());
        u.chain(l).fold(0.0, f64::max)
    }

    pub fn max_coeff(&self) -> f64 {
        self.upper.max_coeff().max(self.lower.max_coeff())
    }
}

/// `P_sign ψ`.
pub fn project(psi: &SpinorField, sign: Sign) -> SpinorField {
    psi.map_matrix(&projection(sign))
}

/// Pointwise `⟨Mψ, ψ'⟩ = ψ'^† M ψ` in physical space.
fn matrix_form(psi: &SpinorField, psi2: &SpinorField, mat: &Mat2) -> Result<ComplexScalarField> {
    if psi.grid() != psi2.grid() {
        return Err(Error::GridMismatch);
    }
    let a = psi.map_matrix(mat).to_physical();
    let b = psi2.to_physical();
    let values = a
        .upper
        .data()
        .iter()
        .zip(a.lower.data())
        .zip(b.upper.data().iter().zip(b.lower.data()))
        .map(|((au, al), (bu, bl))| bu.conj() * au + bl.conj() * al)
        .collect();
    ComplexScalarField::from_physical(*psi.grid(), values)
}

/// Pointwise `⟨βψ, ψ'⟩`, returned in physical representation.
pub fn beta_form(psi: &SpinorField, psi2: &SpinorField) -> Result<ComplexScalarField> {
    matrix_form(psi, psi2, &BETA)
}

/// The four sign components `⟨βP_a ψ, P_b ψ'⟩`.
#[derive(Debug, Clone)]
pub struct NullComponents {
    pub plus_plus: ComplexScalarField,
    pub plus_minus: ComplexScalarField,
    pub minus_plus: ComplexScalarField,
    pub minus_minus: ComplexScalarField,
}

impl NullComponents {
    pub fn get(&self, a: Sign, b: Sign) -> &ComplexScalarField {
        match (a, b) {
            (Sign::Plus, Sign::Plus) => &self.plus_plus,
            (Sign::Plus, Sign::Minus) => &self.plus_minus,
            (Sign::Minus, Sign::Plus) => &self.minus_plus,
            (Sign::Minus, Sign::Minus) => &self.minus_minus,
        }
    }

    /// Sum of the four components, equal to `⟨βψ, ψ'⟩`.
    pub fn total(&self) -> ComplexScalarField {
        let one = Complex64::new(1.0, 0.0);
        self.plus_plus
            .add_scaled(&self.plus_minus, one)
            .and_then(|s| s.add_scaled(&self.minus_plus, one))
            .and_then(|s| s.add_scaled(&self.minus_minus, one))
            .expect("components share a grid")
    }
}

pub fn null_components(psi: &SpinorField, psi2: &SpinorField) -> Result<NullComponents> {
    if psi.grid() != psi2.grid() {
        return Err(Error::GridMismatch);
    }
    let component = |a: Sign, b: Sign| {
        let left = project(psi, a);
        let right = project(psi2, b);
        matrix_form(&left, &right, &BETA)
    };
    Ok(NullComponents {
        plus_plus: component(Sign::Plus, Sign::Plus)?,
        plus_minus: component(Sign::Plus, Sign::Minus)?,
        minus_plus: component(Sign::Minus, Sign::Plus)?,
        minus_minus: component(Sign::Minus, Sign::Minus)?,
    })
}

/// Physical constants of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DkgParams {
    /// Dirac mass `M`.
    pub dirac_mass: f64,
    /// Klein-Gordon mass `m > 0`.
    pub kg_mass: f64,
    /// Coupling `g`.
    pub coupling: f64,
}

impl DkgParams {
    pub fn new(dirac_mass: f64, kg_mass: f64, coupling: f64) -> Result<Self> {
        if !(kg_mass.is_finite() && kg_mass > 0.0) {
            return Err(Error::Config(format!(
                "Klein-Gordon mass must be positive, got {kg_mass}"
            )));
        }
        if !dirac_mass.is_finite() || !coupling.is_finite() {
            return Err(Error::Config(
                "Dirac mass and coupling must be finite".into(),
            ));
        }
        Ok(Self {
            dirac_mass,
            kg_mass,
            coupling,
        })
    }

    /// `c₀ = 1 - m²`.
    pub fn c0(&self) -> f64 {
        1.0 - self.kg_mass * self.kg_mass
    }
}

/// Diagonalized unknowns `(ψ₊, ψ₋, φ₊, φ₋)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfWaveState {
    pub t: f64,
    pub psi_plus: SpinorField,
    pub psi_minus: SpinorField,
    pub phi_plus: ComplexScalarField,
    pub phi_minus: ComplexScalarField,
}

impl HalfWaveState {
    pub fn grid(&self) -> &GridSpec {
        self.psi_plus.grid()
    }

    pub fn to_spectral(&self) -> Self {
        Self {
            t: self.t,
            psi_plus: self.psi_plus.to_spectral(),
            psi_minus: self.psi_minus.to_spectral(),
            phi_plus: self.phi_plus.to_spectral(),
            phi_minus: self.phi_minus.to_spectral(),
        }
    }

    /// `ψ = ψ₊ + ψ₋`.
    pub fn psi(&self) -> SpinorField {
        self.psi_plus.add(&self.psi_minus).expect("same grid")
    }

    /// `∫|ψ|² dx`.
    pub fn charge(&self) -> f64 {
        self.psi().l2_norm().powi(2)
    }

    /// `¼ Σ ⟨ξ⟩² (|φ̂₊|² + |φ̂₋|²) Δξ`, the free Klein-Gordon energy at `m = 1`.
    pub fn phi_energy(&self) -> f64 {
        let grid = *self.grid();
        let (a, b) = (self.phi_plus.coeffs(), self.phi_minus.coeffs());
        0.25 * a
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(m, (x, y))| japanese(grid.xi(m)).powi(2) * (x.norm_sqr() + y.norm_sqr()))
            .sum::<f64>()
            * grid.dxi()
    }

    pub fn max_coeff(&self) -> f64 {
        self.psi_plus
            .max_coeff()
            .max(self.psi_minus.max_coeff())
            .max(self.phi_plus.max_coeff())
            .max(self.phi_minus.max_coeff())
    }

    /// `max(|P₋ψ₊|, |P₊ψ₋|)` over all coefficients, relative to the largest
    /// coefficient of `ψ`.
    pub fn projection_residual(&self) -> f64 {
        let scale = self.psi_plus.max_coeff().max(self.psi_minus.max_coeff());
        let r = self
            .psi_plus
            .projection_residual(Sign::Plus)
            .max(self.psi_minus.projection_residual(Sign::Minus));
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }

    /// `max_x |φ₋(x) - conj(φ₊(x))|` relative to `max_x |φ₊(x)|`.
    pub fn reality_residual(&self) -> f64 {
        let a = self.phi_plus.values();
        let b = self.phi_minus.values();
        let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let r = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (y - x.conj()).norm())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }

    pub fn all_finite(&self) -> bool {
        [
            self.psi_plus.upper(),
            self.psi_plus.lower(),
            self.psi_minus.upper(),
            self.psi_minus.lower(),
            &self.phi_plus,
            &self.phi_minus,
        ]
        .iter()
        .all(|f| {
            f.data()
                .iter()
                .all(|c| c.re.is_finite() && c.im.is_finite())
        })
    }
}

/// Half-wave data from Cauchy data:
/// `ψ±(0) = P±ψ₀`, `φ±(0) = φ₀ ± iA^{-1/2}φ₁`.
pub fn diagonalize(
    psi0: &SpinorField,
    phi0: &ComplexScalarField,
    phi1: &ComplexScalarField,
) -> Result<HalfWaveState> {
    if psi0.grid() != phi0.grid() || phi0.grid() != phi1.grid() {
        return Err(Error::GridMismatch);
    }
    let psi0 = psi0.to_spectral();
    let phi0 = phi0.to_spectral();
    let corr = phi1.apply_multiplier(|xi| Complex64::new(1.0 / japanese(xi), 0.0))?;
    let i = Complex64::i();
    Ok(HalfWaveState {
        t: 0.0,
        psi_plus: project(&psi0, Sign::Plus),
        psi_minus: project(&psi0, Sign::Minus),
        phi_plus: phi0.add_scaled(&corr, i)?,
        phi_minus: phi0.add_scaled(&corr, -i)?,
    })
}

/// Cauchy data recovered from a half-wave state.
#[derive(Debug, Clone)]
pub struct Reconstructed {
    pub psi: SpinorField,
    pub phi: ComplexScalarField,
    pub phi_t: ComplexScalarField,
}

/// Inverts [`diagonalize`]: `ψ = ψ₊ + ψ₋`, `φ = ½(φ₊ + φ₋)` and
/// `φ_t = (2i)^{-1} A^{1/2}(φ₊ - φ₋)`.
pub fn reconstruct(state: &HalfWaveState) -> Reconstructed {
    let half = Complex64::new(0.5, 0.0);
    let phi_plus = state.phi_plus.to_spectral();
    let sum = phi_plus
        .add_scaled(&state.phi_minus, Complex64::new(1.0, 0.0))
        .expect("same grid");
    let diff = phi_plus
        .add_scaled(&state.phi_minus, Complex64::new(-1.0, 0.0))
        .expect("same grid");
    let phi_t = diff
        .apply_multiplier(|xi| Complex64::new(0.0, -0.5 * japanese(xi)))
        .expect("finite symbol");
    Reconstructed {
        psi: state.psi(),
        phi: sum.scale(half),
        phi_t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> GridSpec {
        GridSpec::new(32, 2.0 * PI).unwrap()
    }

    fn random_spinor(grid: GridSpec, rng: &mut ChaCha8Rng) -> SpinorField {
        let mut comp = || {
            let v = (0..grid.n())
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            ComplexScalarField::from_physical(grid, v).unwrap()
        };
        SpinorField::new(comp(), comp()).unwrap()
    }

    fn constant_spinor(v: [Complex64; 2]) -> SpinorField {
        SpinorField::from_fn(grid(), move |_| v)
    }

    fn max_diff(a: &ComplexScalarField, b: &ComplexScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matrix_identities() {
        assert_eq!(ALPHA.mul(&ALPHA), IDENTITY);
        assert_eq!(BETA.mul(&BETA), IDENTITY);
        assert_eq!(ALPHA.mul(&BETA).add(&BETA.mul(&ALPHA)), Mat2([[0.0; 2]; 2]));
        assert_eq!(P_PLUS.mul(&P_PLUS), P_PLUS);
        assert_eq!(P_MINUS.mul(&P_MINUS), P_MINUS);
        assert_eq!(P_PLUS.mul(&P_MINUS), Mat2([[0.0; 2]; 2]));
        assert_eq!(P_PLUS.add(&P_MINUS.scaled(-1.0)), ALPHA);
        assert_eq!(P_PLUS.mul(&BETA), BETA.mul(&P_MINUS));
        assert_eq!(P_MINUS.mul(&BETA), BETA.mul(&P_PLUS));
        assert!(identity_residual([c(0.3, -1.2), c(2.0, 0.7)]) < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let psi = constant_spinor([c(1.0, 0.0), c(0.0, 0.0)]);
        let p = project(&psi, Sign::Plus).to_physical();
        for (u, l) in p.upper().data().iter().zip(p.lower().data()) {
            assert!((u - c(0.5, 0.0)).norm() < 1e-15 && (l - c(0.5, 0.0)).norm() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_spinor(grid(), &mut rng);
        let sum = project(&psi, Sign::Plus)
            .add(&project(&psi, Sign::Minus))
            .unwrap();
        assert!(max_diff(sum.upper(), psi.upper()) < 1e-15);
        assert!(max_diff(sum.lower(), psi.lower()) < 1e-15);
        let zero = project(&project(&psi, Sign::Minus), Sign::Plus);
        assert_eq!(zero.sup_norm(), 0.0);
    }

    #[test]
    fn beta_form_examples() {
        let cases = [
            ([c(1.0, 0.0), c(0.0, 0.0)], 1.0),
            ([c(0.0, 0.0), c(1.0, 0.0)], -1.0),
            ([c(1.0, 0.0), c(1.0, 0.0)], 0.0),
        ];
        for (v, expected) in cases {
            let psi = constant_spinor(v);
            let form = beta_form(&psi, &psi).unwrap();
            for z in form.data() {
                assert!((z - c(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn beta_form_is_real_difference_of_moduli() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = random_spinor(grid(), &mut rng);
        let form = beta_form(&psi, &psi).unwrap();
        let (u, l) = (psi.upper().values(), psi.lower().values());
        for ((z, a), b) in form.data().iter().zip(&u).zip(&l) {
            assert!(z.im.abs() <= 1e-14);
            assert!((z.re - (a.norm_sqr() - b.norm_sqr())).abs() <= 1e-14);
        }
    }

    #[test]
    fn beta_form_grid_mismatch() {
        let other = GridSpec::new(64, 2.0 * PI).unwrap();
        let a = SpinorField::zeros(grid());
        let b = SpinorField::zeros(other);
        assert!(matches!(beta_form(&a, &b), Err(Error::GridMismatch)));
        assert!(matches!(null_components(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn null_component_examples() {
        let e1 = constant_spinor([c(1.0, 0.0), c(0.0, 0.0)]);
        let e2 = constant_spinor([c(0.0, 0.0), c(1.0, 0.0)]);
        let nc = null_components(&e1, &e2).unwrap();
        assert_eq!(nc.plus_plus.sup_norm(), 0.0);
        let nc = null_components(&e1, &e1).unwrap();
        for z in nc.plus_minus.data() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spinor(grid(), &mut rng);
        let b = random_spinor(grid(), &mut rng);
        let nc = null_components(&a, &b).unwrap();
        let scale = a.sup_norm() * b.sup_norm();
        assert!(nc.plus_plus.sup_norm() <= 1e-12 * scale);
        assert!(nc.minus_minus.sup_norm() <= 1e-12 * scale);
        assert!(max_diff(&nc.total(), &beta_form(&a, &b).unwrap()) <= 1e-14 * scale);
    }

    #[test]
    fn diagonalize_cosine_and_sine() {
        let g = grid();
        let k = 3.0;
        let cosine = ComplexScalarField::from_fn(g, |x| c((k * x).cos(), 0.0));
        let sine = ComplexScalarField::from_fn(g, |x| c((k * x).sin(), 0.0));
        let zero = ComplexScalarField::zeros(g);
        let psi0 = SpinorField::zeros(g);

        let st = diagonalize(&psi0, &cosine, &zero).unwrap();
        assert!(max_diff(&st.phi_plus, &cosine) < 1e-14);
        assert!(max_diff(&st.phi_minus, &cosine) < 1e-14);

        let st = diagonalize(&psi0, &zero, &sine).unwrap();
        let w = (k * k + 1.0).powf(-0.5);
        assert!(max_diff(&st.phi_plus, &sine.scale(c(0.0, w))) < 1e-14);
        assert!(max_diff(&st.phi_minus, &sine.scale(c(0.0, -w))) < 1e-14);

        // and back: φ = 0, φ_t = sin(kx)
        let rec = reconstruct(&st);
        assert!(rec.phi.sup_norm() < 1e-14);
        assert!(max_diff(&rec.phi_t, &sine) < 1e-14);
    }

    #[test]
    fn reconstruct_examples() {
        let g = grid();
        let cosine = ComplexScalarField::from_fn(g, |x| c((2.0 * x).cos(), 0.0));
        let st = HalfWaveState {
            t: 0.0,
            psi_plus: SpinorField::zeros(g),
            psi_minus: SpinorField::from_fn(g, |x| [c(x.sin(), 0.0), c(-x.sin(), 0.0)]),
            phi_plus: cosine.clone(),
            phi_minus: cosine.clone(),
        };
        let rec = reconstruct(&st);
        assert!(max_diff(&rec.phi, &cosine) < 1e-14);
        assert!(rec.phi_t.sup_norm() < 1e-14);
        assert!(max_diff(rec.psi.upper(), st.psi_minus.upper()) < 1e-15);
        assert!(max_diff(rec.psi.lower(), st.psi_minus.lower()) < 1e-15);
    }

    #[test]
    fn diagonalize_reconstruct_round_trip() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi0 = random_spinor(g, &mut rng);
        let real = |rng: &mut ChaCha8Rng| {
            let v = (0..g.n())
                .map(|_| c(rng.random_range(-1.0..1.0), 0.0))
                .collect();
            ComplexScalarField::from_physical(g, v).unwrap()
        };
        let phi0 = real(&mut rng);
        let phi1 = real(&mut rng);
        let st = diagonalize(&psi0, &phi0, &phi1).unwrap();
        assert!(st.projection_residual() < 1e-15);
        assert!(st.reality_residual() < 1e-12);
        let rec = reconstruct(&st);
        assert!(max_diff(rec.psi.upper(), psi0.upper()) < 1e-12);
        assert!(max_diff(rec.psi.lower(), psi0.lower()) < 1e-12);
        assert!(max_diff(&rec.phi, &phi0) < 1e-12);
        assert!(max_diff(&rec.phi_t, &phi1) < 1e-12);
        // phi and phi_t come out real
        assert!(rec.phi.values().iter().all(|z| z.im.abs() < 1e-10));
        assert!(rec.phi_t.values().iter().all(|z| z.im.abs() < 1e-10));

        let again = diagonalize(&rec.psi, &rec.phi, &rec.phi_t).unwrap();
        assert!(max_diff(&again.phi_plus, &st.phi_plus) < 1e-12);
        assert!(max_diff(&again.phi_minus, &st.phi_minus) < 1e-12);
        assert!(max_diff(again.psi_plus.upper(), st.psi_plus.upper()) < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(DkgParams::new(1.0, 0.0, 1.0).is_err());
        assert!(DkgParams::new(1.0, -1.0, 1.0).is_err());
        assert!(DkgParams::new(f64::NAN, 1.0, 1.0).is_err());
        assert_eq!(DkgParams::new(0.0, 1.0, 0.0).unwrap().c0(), 0.0);
        assert_eq!(DkgParams::new(0.0, 2.0, 0.0).unwrap().c0(), -3.0);
    }
}
