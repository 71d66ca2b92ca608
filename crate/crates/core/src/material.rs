//! Pointwise constitutive layer: spectral strain split, split energies and
//! stresses, degradation and geometric crack functions with softening-law
//! coefficients, the Rankine driving force, and the history field.
//!
//! Units are N, mm, MPa throughout.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Matrix3, Vector2};

/// Traction-separation softening family embedded in the degradation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SofteningLaw {
    Linear,
    Exponential,
    Hyperbolic,
    Cornelissen,
    /// Standard brittle model: `g = (1 - phi)^2`, `alpha = phi^2`, no
    /// nucleation floor on the history field.
    Brittle,
}

/// Order of the crack surface density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOrder {
    Second,
    Fourth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressState {
    PlaneStress,
    PlaneStrain,
}

/// Elastic and fracture constants plus every derived coefficient the
/// element kernels need.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub e0: f64,
    pub nu: f64,
    pub gc: f64,
    pub ft: f64,
    pub l0: f64,
    pub chi: f64,
    pub softening: SofteningLaw,
    pub order: ModelOrder,
    pub stress_state: StressState,
    lambda: f64,
    mu: f64,
    lch: f64,
    a1: f64,
    n: f64,
    a2: f64,
    a3: f64,
    c_alpha: f64,
    h0: f64,
}

impl MaterialModel {
    /// Builds the model and derives `lambda`, `mu`, `l_ch`, `a1`, the
    /// softening coefficients, `c_alpha`, and the nucleation floor.
    ///
    /// `Brittle` forces `chi = 0` and the quadratic degradation function.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        e0: f64,
        nu: f64,
        gc: f64,
        ft: f64,
        l0: f64,
        chi: f64,
        softening: SofteningLaw,
        order: ModelOrder,
        stress_state: StressState,
    ) -> Result<Self> {
        if e0 <= 0.0 || gc <= 0.0 || ft <= 0.0 || l0 <= 0.0 {
            return Err(Error::Domain(
                "E0, Gc, ft, l0 must all be strictly positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::Domain(format!("Poisson ratio {nu} outside [0, 0.5)")));
        }
        if !(0.0..=2.0).contains(&chi) {
            return Err(Error::Domain(format!("chi = {chi} outside [0, 2]")));
        }
        let chi = if softening == SofteningLaw::Brittle { 0.0 } else { chi };
        let lame_lambda = e0 * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e0 / (2.0 * (1.0 + nu));
        let lambda = match stress_state {
            StressState::PlaneStrain => lame_lambda,
            // plane stress via the modified Lame parameter
            StressState::PlaneStress => 2.0 * lame_lambda * mu / (lame_lambda + 2.0 * mu),
        };
        let lch = e0 * gc / (ft * ft);
        let (n, a2, a3) = softening_coeffs(softening);
        let a1 = match softening {
            SofteningLaw::Brittle => 2.0,
            _ => 4.0 * lch / (std::f64::consts::PI * l0),
        };
        let (_, _, _, c_alpha) = geometric_fn(0.0, chi)?;
        let h0 = match softening {
            SofteningLaw::Brittle => 0.0,
            _ => ft * ft / (2.0 * e0),
        };
        Ok(MaterialModel {
            e0,
            nu,
            gc,
            ft,
            l0,
            chi,
            softening,
            order,
            stress_state,
            lambda,
            mu,
            lch,
            a1,
            n,
            a2,
            a3,
            c_alpha,
            h0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Irwin characteristic length `E0 Gc / ft^2`.
    pub fn lch(&self) -> f64 {
        self.lch
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    /// Softening coefficients `(n, a2, a3)`.
    pub fn softening_abc(&self) -> (f64, f64, f64) {
        (self.n, self.a2, self.a3)
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    /// Nucleation floor of the history field (zero in brittle mode).
    pub fn h_floor(&self) -> f64 {
        self.h0
    }

    /// Geometric crack function at `phi` for this model's `chi`.
    ///
    /// Outside `[0, 1]` the function continues linearly (C¹), so Newton
    /// iterates that transiently overshoot the physical range see an
    /// exact, benign Jacobian.
    pub fn alpha(&self, phi: f64) -> (f64, f64, f64) {
        if phi < 0.0 {
            return (self.chi * phi, self.chi, 0.0);
        }
        if phi > 1.0 {
            let da1 = 2.0 - self.chi;
            return (1.0 + da1 * (phi - 1.0), da1, 0.0);
        }
        let a = self.chi * phi + (1.0 - self.chi) * phi * phi;
        let da = self.chi + 2.0 * (1.0 - self.chi) * phi;
        let dda = 2.0 * (1.0 - self.chi);
        (a, da, dda)
    }

    /// Degradation function and its first two derivatives.
    ///
    /// The cohesive rational form is continued linearly (C¹) outside
    /// `[0, 1]`: its denominator has a pole just below zero for large
    /// `a1`, and transient Newton iterates must not cross it.
    pub fn degradation(&self, phi: f64) -> (f64, f64, f64) {
        if self.softening == SofteningLaw::Brittle {
            let om = 1.0 - phi;
            return (om * om, -2.0 * om, 2.0);
        }
        if phi < 0.0 {
            // g(0) = 1, g'(0) = -a1
            return (1.0 - self.a1 * phi, -self.a1, 0.0);
        }
        if phi > 1.0 {
            // g(1) = 0, g'(1) = 0 for every law (n >= 2)
            return (0.0, 0.0, 0.0);
        }
        let om = 1.0 - phi;
        let u = om.powf(self.n);
        let du = -self.n * om.powf(self.n - 1.0);
        let ddu = self.n * (self.n - 1.0) * om.powf(self.n - 2.0);
        let p = self.a1 * phi * (1.0 + self.a2 * phi + self.a3 * phi * phi);
        let dp = self.a1 * (1.0 + 2.0 * self.a2 * phi + 3.0 * self.a3 * phi * phi);
        let ddp = self.a1 * (2.0 * self.a2 + 6.0 * self.a3 * phi);
        let q = u + p;
        debug_assert!(q > 0.0, "degradation denominator must stay positive");
        let g = u / q;
        let dg = (du * p - u * dp) / (q * q);
        let ddg = ((ddu * p - u * ddp) * q - 2.0 * (du * p - u * dp) * (du + dp)) / (q * q * q);
        (g, dg, ddg)
    }

    /// `#[cfg(test)]`-free hook for the reduction check: overrides `a1`.
    pub fn with_a1(mut self, a1: f64) -> Self {
        self.a1 = a1;
        self
    }
}

/// History and strain carried by one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct QuadPointState {
    /// Running maximum of the crack driving force (MPa).
    pub h: f64,
    pub strain: Matrix2<f64>,
}

impl QuadPointState {
    pub fn initial(mat: &MaterialModel) -> Self {
        QuadPointState {
            h: mat.h_floor(),
            strain: Matrix2::zeros(),
        }
    }
}

pub fn macaulay_plus(x: f64) -> f64 {
    0.5 * (x + x.abs())
}

pub fn macaulay_minus(x: f64) -> f64 {
    0.5 * (x - x.abs())
}

/// Eigen-decomposition of the strain with Macaulay-split tensors.
#[derive(Debug, Clone)]
pub struct StrainSplit {
    pub plus: Matrix2<f64>,
    pub minus: Matrix2<f64>,
    /// Eigenvalues with `e1 >= e2`.
    pub eigvals: [f64; 2],
    pub eigvecs: [Vector2<f64>; 2],
}

/// Closed-form eigen-decomposition of a symmetric 2x2 matrix; returns
/// `(e1, e2, n1, n2)` with `e1 >= e2` and orthonormal eigenvectors.
pub fn eig_sym2(m: &Matrix2<f64>) -> (f64, f64, Vector2<f64>, Vector2<f64>) {
    let a = m[(0, 0)];
    let b = m[(1, 1)];
    let c = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + b);
    let d = 0.5 * (a - b);
    let r = (d * d + c * c).sqrt();
    let e1 = mean + r;
    let e2 = mean - r;
    if r <= f64::EPSILON * (1.0 + mean.abs()) {
        return (e1, e2, Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0));
    }
    // pick the numerically larger pivot for the e1 eigenvector
    let n1 = if d >= 0.0 {
        Vector2::new(d + r, c).normalize()
    } else {
        Vector2::new(c, r - d).normalize()
    };
    let n2 = Vector2::new(-n1[1], n1[0]);
    (e1, e2, n1, n2)
}

/// Splits the strain into tensile and compressive parts sharing its
/// eigenvectors: `eps = plus + minus` exactly.
pub fn split_strain(eps: &Matrix2<f64>) -> StrainSplit {
    let (e1, e2, n1, n2) = eig_sym2(eps);
    let m1 = n1 * n1.transpose();
    let m2 = n2 * n2.transpose();
    let plus = m1 * macaulay_plus(e1) + m2 * macaulay_plus(e2);
    StrainSplit {
        plus,
        minus: eps - plus,
        eigvals: [e1, e2],
        eigvecs: [n1, n2],
    }
}

/// Tensile/compressive elastic energy densities (MPa).
pub fn energy_split(eps: &Matrix2<f64>, mat: &MaterialModel) -> (f64, f64) {
    let split = split_strain(eps);
    let tr = eps.trace();
    let (lambda, mu) = (mat.lambda(), mat.mu());
    let tr_sq = |m: &Matrix2<f64>| (m * m).trace();
    let plus = 0.5 * lambda * macaulay_plus(tr).powi(2) + mu * tr_sq(&split.plus);
    let minus = 0.5 * lambda * macaulay_minus(tr).powi(2) + mu * tr_sq(&split.minus);
    (plus, minus)
}

/// Degraded stress `sigma = g(phi) sigma+ + sigma-` with the split parts.
pub fn stress(
    eps: &Matrix2<f64>,
    phi: f64,
    mat: &MaterialModel,
) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    let split = split_strain(eps);
    let tr = eps.trace();
    let (lambda, mu) = (mat.lambda(), mat.mu());
    let eye = Matrix2::identity();
    let sig_plus = eye * (lambda * macaulay_plus(tr)) + split.plus * (2.0 * mu);
    let sig_minus = eye * (lambda * macaulay_minus(tr)) + split.minus * (2.0 * mu);
    let (g, _, _) = mat.degradation(phi);
    (sig_plus * g + sig_minus, sig_plus, sig_minus)
}

/// Geometric crack function `alpha = chi phi + (1 - chi) phi^2` with its
/// derivatives and the normalization `c_alpha = 4 int_0^1 sqrt(alpha)`.
///
/// `c_alpha` is closed-form for `chi` in {0, 2} and adaptive quadrature
/// otherwise.
pub fn geometric_fn(phi: f64, chi: f64) -> Result<(f64, f64, f64, f64)> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Domain(format!("phi = {phi} outside [0, 1]")));
    }
    if !(0.0..=2.0).contains(&chi) {
        return Err(Error::Domain(format!("chi = {chi} outside [0, 2]")));
    }
    let alpha = chi * phi + (1.0 - chi) * phi * phi;
    let dalpha = chi + 2.0 * (1.0 - chi) * phi;
    let ddalpha = 2.0 * (1.0 - chi);
    let c_alpha = if chi == 0.0 {
        2.0
    } else if chi == 2.0 {
        std::f64::consts::PI
    } else {
        // substitute phi = t^2 to remove the sqrt kink at the origin:
        // 4 int sqrt(alpha) dphi = 8 int t^2 sqrt(chi + (1 - chi) t^2) dt
        8.0 * adaptive_simpson(
            &|t: f64| t * t * (chi + (1.0 - chi) * t * t).sqrt(),
            0.0,
            1.0,
            1e-13,
            40,
        )
    };
    Ok((alpha, dalpha, ddalpha, c_alpha))
}

/// Optimal `(n, a2, a3)` for each softening law.
pub fn softening_coeffs(law: SofteningLaw) -> (f64, f64, f64) {
    match law {
        SofteningLaw::Linear => (2.0, -0.5, 0.0),
        SofteningLaw::Exponential => (2.5, 0.1748, 0.0),
        SofteningLaw::Hyperbolic => (4.0, 0.5397, 0.0),
        SofteningLaw::Cornelissen => (2.0, 1.3868, 0.9106),
        SofteningLaw::Brittle => (2.0, -0.5, 0.0),
    }
}

/// Rankine equivalent stress of the tensile stress tensor: positive part
/// of its major principal value.
pub fn equivalent_stress(eps: &Matrix2<f64>, mat: &MaterialModel) -> f64 {
    let split = split_strain(eps);
    let tr_plus = macaulay_plus(eps.trace());
    let sigma1 = mat.lambda() * tr_plus + 2.0 * mat.mu() * macaulay_plus(split.eigvals[0]);
    macaulay_plus(sigma1)
}

/// Trial driving force `sigma_eq^2 / (2 E0)` (no floor applied).
pub fn driving_force(eps: &Matrix2<f64>, mat: &MaterialModel) -> f64 {
    let s = equivalent_stress(eps, mat);
    s * s / (2.0 * mat.e0)
}

/// Monotone history update: `H := max(H, trial, floor)`.
pub fn update_history(state: &QuadPointState, h_trial: f64, mat: &MaterialModel) -> QuadPointState {
    QuadPointState {
        h: state.h.max(h_trial).max(mat.h_floor()),
        strain: state.strain,
    }
}

/// Eigenvalues closer than this use the symmetric-limit branch of the
/// split projection derivative.
const EIG_DEGENERATE_TOL: f64 = 1e-9;

fn heaviside_plus(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Consistent tangent `d sigma / d eps` at fixed `phi`, as a Voigt 3x3
/// acting on `(eps_xx, eps_yy, gamma_xy)` and producing
/// `(sig_xx, sig_yy, sig_xy)`.
pub fn material_tangent(eps: &Matrix2<f64>, phi: f64, mat: &MaterialModel) -> Matrix3<f64> {
    let (e1, e2, n1, n2) = eig_sym2(eps);
    let h1 = heaviside_plus(e1);
    let h2 = heaviside_plus(e2);
    // Macaulay difference quotient with the symmetric-limit branch
    let theta_plus = if (e1 - e2).abs() < EIG_DEGENERATE_TOL {
        h1
    } else {
        (macaulay_plus(e1) - macaulay_plus(e2)) / (e1 - e2)
    };

    let m1 = n1 * n1.transpose();
    let m2 = n2 * n2.transpose();
    let proj_plus = projection_voigt(&m1, &m2, &n1, &n2, h1, h2, theta_plus);
    let eye_sym = Matrix3::new(
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        0.0, 0.0, 0.5,
    );
    let proj_minus = eye_sym - proj_plus;

    let tr = eps.trace();
    let vol = Matrix3::new(
        1.0, 1.0, 0.0, //
        1.0, 1.0, 0.0, //
        0.0, 0.0, 0.0,
    );
    let hp = heaviside_plus(tr);
    let (lambda, mu) = (mat.lambda(), mat.mu());
    let c_plus = vol * (lambda * hp) + proj_plus * (2.0 * mu);
    let c_minus = vol * (lambda * (1.0 - hp)) + proj_minus * (2.0 * mu);
    let (g, _, _) = mat.degradation(phi);
    c_plus * g + c_minus
}

/// Voigt gradient of the trial driving force,
/// `(dH/de_xx, dH/de_yy, dH/dgamma)`, on the active branch.
pub fn driving_force_gradient(eps: &Matrix2<f64>, mat: &MaterialModel) -> nalgebra::Vector3<f64> {
    let (e1, _, n1, _) = eig_sym2(eps);
    let s = equivalent_stress(eps, mat);
    if s <= 0.0 {
        return nalgebra::Vector3::zeros();
    }
    // sigma_eq = lambda <tr>+ + 2 mu <e1>+, differentiated a.e.
    let tr = eps.trace();
    let mut dsig: Matrix2<f64> = Matrix2::zeros();
    if tr >= 0.0 {
        dsig += Matrix2::identity() * mat.lambda();
    }
    if e1 >= 0.0 {
        dsig += n1 * n1.transpose() * (2.0 * mat.mu());
    }
    let dh = dsig * (s / mat.e0);
    nalgebra::Vector3::new(dh[(0, 0)], dh[(1, 1)], dh[(0, 1)])
}

/// `d eps+ / d eps` in Voigt form.
fn projection_voigt(
    m1: &Matrix2<f64>,
    m2: &Matrix2<f64>,
    n1: &Vector2<f64>,
    n2: &Vector2<f64>,
    h1: f64,
    h2: f64,
    theta: f64,
) -> Matrix3<f64> {
    let mut t = [[[[0.0f64; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let cross = 0.5
                        * (n1[i] * n2[j] + n2[i] * n1[j])
                        * 0.5
                        * (n1[k] * n2[l] + n1[l] * n2[k]);
                    t[i][j][k][l] = h1 * m1[(i, j)] * m1[(k, l)]
                        + h2 * m2[(i, j)] * m2[(k, l)]
                        + 2.0 * theta * cross;
                }
            }
        }
    }
    voigt_from_tensor(&t)
}

/// Maps a minor-symmetric fourth-order tensor to the Voigt 3x3 acting on
/// `(e_xx, e_yy, gamma)`.
fn voigt_from_tensor(t: &[[[[f64; 2]; 2]; 2]; 2]) -> Matrix3<f64> {
    let rows = [(0usize, 0usize), (1, 1), (0, 1)];
    let mut c = Matrix3::zeros();
    for (ri, &(i, j)) in rows.iter().enumerate() {
        for (cj, &(k, l)) in rows.iter().enumerate() {
            c[(ri, cj)] = if cj == 2 {
                0.5 * (t[i][j][k][l] + t[i][j][l][k])
            } else {
                t[i][j][k][l]
            };
        }
    }
    c
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    recurse(f, a, b, simpson(f, a, b), tol, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn concrete(order: ModelOrder, softening: SofteningLaw) -> MaterialModel {
        MaterialModel::new(
            20000.0,
            0.2,
            0.113,
            2.4,
            2.5,
            2.0,
            softening,
            order,
            StressState::PlaneStress,
        )
        .unwrap()
    }

    /// Independent 2x2 symmetric eigensolver: characteristic-polynomial
    /// roots plus a null-space solve.
    fn eig_oracle(m: &Matrix2<f64>) -> (f64, f64, Vector2<f64>) {
        let tr = m.trace();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let e1 = tr / 2.0 + disc;
        let e2 = tr / 2.0 - disc;
        // eigenvector of e1 is orthogonal to the rows of (m - e1 I)
        let r1 = Vector2::new(m[(0, 0)] - e1, m[(0, 1)]);
        let r2 = Vector2::new(m[(1, 0)], m[(1, 1)] - e1);
        let r = if r1.norm() >= r2.norm() { r1 } else { r2 };
        let v = if r.norm() > 1e-300 {
            Vector2::new(-r[1], r[0]).normalize()
        } else {
            Vector2::new(1.0, 0.0)
        };
        (e1, e2, v)
    }

    fn random_strain(rng: &mut impl Rng, scale: f64) -> Matrix2<f64> {
        let a = rng.gen_range(-scale..scale);
        let b = rng.gen_range(-scale..scale);
        let c = rng.gen_range(-scale..scale);
        Matrix2::new(a, c, c, b)
    }

    #[test]
    fn split_simple_cases() {
        let s = split_strain(&Matrix2::new(1.0, 0.0, 0.0, -2.0));
        assert_relative_eq!(s.plus[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.plus[(1, 1)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(s.minus[(1, 1)], -2.0, epsilon = 1e-14);
        assert_relative_eq!(s.minus[(0, 0)], 0.0, epsilon = 1e-14);

        let z = split_strain(&Matrix2::zeros());
        assert_eq!(z.plus, Matrix2::zeros());
        assert_eq!(z.minus, Matrix2::zeros());
    }

    #[test]
    fn split_reconstructs_against_oracle() {
        let eps = Matrix2::new(1.0, 0.3, 0.3, -0.5);
        let (e1, e2, v1) = eig_oracle(&eps);
        let s = split_strain(&eps);
        assert_relative_eq!(s.eigvals[0], e1, epsilon = 1e-12);
        assert_relative_eq!(s.eigvals[1], e2, epsilon = 1e-12);
        assert!((s.eigvecs[0].dot(&v1)).abs() > 1.0 - 1e-12);
        let recon = s.plus + s.minus;
        for i in 0..2 {
            for j in 0..2 {
                assert!((recon[(i, j)] - eps[(i, j)]).abs() <= 1e-12);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let eps = random_strain(&mut rng, 1.0);
            let s = split_strain(&eps);
            let recon = s.plus + s.minus;
            for i in 0..2 {
                for j in 0..2 {
                    assert!((recon[(i, j)] - eps[(i, j)]).abs() <= 1e-12);
                }
            }
            // plus has nonnegative eigenvalues, minus nonpositive
            let (p1, p2, _, _) = eig_sym2(&s.plus);
            let (m1, m2, _, _) = eig_sym2(&s.minus);
            assert!(p1 >= -1e-14 && p2 >= -1e-14);
            assert!(m1 <= 1e-14 && m2 <= 1e-14);
        }
    }

    #[test]
    fn energy_split_sums_to_full() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let eps = random_strain(&mut rng, 2e-3);
            let (wp, wm) = energy_split(&eps, &mat);
            let tr = eps.trace();
            let full = 0.5 * mat.lambda() * tr * tr + mat.mu() * (eps * eps).trace();
            assert_relative_eq!(wp + wm, full, max_relative = 1e-10, epsilon = 1e-18);
        }
        // uniaxial tension has no negative part; biaxial compression no positive part
        let (_, wm) = energy_split(&Matrix2::new(1e-3, 0.0, 0.0, 0.0), &mat);
        assert_eq!(wm, 0.0);
        let (wp, _) = energy_split(&Matrix2::new(-1e-3, 0.0, 0.0, -1e-3), &mat);
        assert_eq!(wp, 0.0);
    }

    #[test]
    fn stress_limits() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        let eps = Matrix2::new(1e-3, 2e-4, 2e-4, -3e-4);
        // phi = 0: full isotropic elasticity
        let (sig, _, _) = stress(&eps, 0.0, &mat);
        let expected = Matrix2::identity() * (mat.lambda() * eps.trace()) + eps * (2.0 * mat.mu());
        assert_relative_eq!(sig[(0, 0)], expected[(0, 0)], max_relative = 1e-12);
        assert_relative_eq!(sig[(0, 1)], expected[(0, 1)], max_relative = 1e-12);
        // phi = 1, pure tension: zero stress
        let (sig, _, _) = stress(&Matrix2::new(1e-3, 0.0, 0.0, 5e-4), 1.0, &mat);
        assert!(sig.norm() <= 1e-16);
        // phi = 1, biaxial compression: compression insensitive
        let epsc = Matrix2::new(-1e-3, 0.0, 0.0, -1e-3);
        let (sig, _, sig_minus) = stress(&epsc, 1.0, &mat);
        assert_relative_eq!(sig[(0, 0)], sig_minus[(0, 0)], max_relative = 1e-14);
        assert_relative_eq!(sig[(1, 1)], sig_minus[(1, 1)], max_relative = 1e-14);
    }

    #[test]
    fn stress_positively_homogeneous() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let eps = random_strain(&mut rng, 1e-3);
            let k = rng.gen_range(0.1..10.0);
            let (s1, _, _) = stress(&eps, 0.35, &mat);
            let (sk, _, _) = stress(&(eps * k), 0.35, &mat);
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(
                        sk[(i, j)],
                        k * s1[(i, j)],
                        max_relative = 1e-10,
                        epsilon = 1e-14
                    );
                }
            }
        }
    }

    #[test]
    fn geometric_function_constants() {
        let (a, _, _, c) = geometric_fn(1.0, 2.0).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c, std::f64::consts::PI, epsilon = 1e-10);
        let (a, _, _, c) = geometric_fn(1.0, 0.0).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c, 2.0, epsilon = 1e-10);
        let (a0, _, _, _) = geometric_fn(0.0, 1.3).unwrap();
        assert_eq!(a0, 0.0);
        assert!(geometric_fn(1.2, 1.0).is_err());
        assert!(geometric_fn(0.5, 2.5).is_err());
    }

    #[test]
    fn geometric_function_general_chi_against_riemann() {
        // chi = 1: alpha = phi, alpha' = 1 everywhere, c_alpha = 8/3
        let (a, da, _, c) = geometric_fn(0.5, 1.0).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-15);
        assert_relative_eq!(da, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c, 8.0 / 3.0, epsilon = 1e-9);
        // brute-force midpoint Riemann oracle for generic chi
        for &chi in &[0.3, 0.7, 1.5] {
            let n = 2_000_000usize;
            let h = 1.0 / n as f64;
            let riemann: f64 = (0..n)
                .map(|i| {
                    let phi = (i as f64 + 0.5) * h;
                    (chi * phi + (1.0 - chi) * phi * phi).sqrt() * h
                })
                .sum::<f64>()
                * 4.0;
            let (_, _, _, c) = geometric_fn(0.0, chi).unwrap();
            assert_relative_eq!(c, riemann, epsilon = 1e-7);
        }
    }

    #[test]
    fn degradation_endpoints_and_reduction() {
        for law in [
            SofteningLaw::Linear,
            SofteningLaw::Exponential,
            SofteningLaw::Hyperbolic,
            SofteningLaw::Cornelissen,
            SofteningLaw::Brittle,
        ] {
            let mat = concrete(ModelOrder::Fourth, law);
            let (g0, _, _) = mat.degradation(0.0);
            let (g1, _, _) = mat.degradation(1.0);
            assert_relative_eq!(g0, 1.0, epsilon = 1e-14);
            assert!(g1.abs() <= 1e-14);
        }
        // (n, a1, a2, a3) = (2, 2, -0.5, 0): denominator collapses to 1
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Linear).with_a1(2.0);
        let mut phi = 0.0;
        while phi <= 1.0 {
            let (g, _, _) = mat.degradation(phi);
            let om = 1.0 - phi;
            assert!((g - om * om).abs() <= 1e-12, "phi = {phi}");
            phi += 1e-3;
        }
    }

    #[test]
    fn degradation_cornelissen_reference_value() {
        // lch = 20000 * 0.113 / 2.4^2, a1 = 4 lch / (pi 2.5)
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        assert_relative_eq!(mat.lch(), 392.3611111111111, max_relative = 1e-13);
        assert_relative_eq!(mat.a1(), 199.82787299315748, max_relative = 1e-12);
        // g(0.5) frozen from a 50-digit evaluation of the same formula
        let (g, _, _) = mat.degradation(0.5);
        assert_relative_eq!(g, 1.3007983362636109e-3, max_relative = 1e-10);
    }

    #[test]
    fn degradation_monotone_and_derivative_consistent() {
        for law in [
            SofteningLaw::Linear,
            SofteningLaw::Exponential,
            SofteningLaw::Hyperbolic,
            SofteningLaw::Cornelissen,
        ] {
            let mat = concrete(ModelOrder::Fourth, law);
            let mut prev = f64::INFINITY;
            let mut phi: f64 = 0.0;
            while phi <= 1.0 + 1e-12 {
                let (g, _, _) = mat.degradation(phi.min(1.0));
                assert!(g < prev + 1e-15, "{law:?} not decreasing at phi = {phi}");
                prev = g;
                phi += 1e-3;
            }
            // derivatives vs central differences
            let h = 1e-6;
            let mut phi = 0.01;
            while phi <= 0.99 {
                let (_, dg, ddg) = mat.degradation(phi);
                let (gp, dgp, _) = mat.degradation(phi + h);
                let (gm, dgm, _) = mat.degradation(phi - h);
                let fd1 = (gp - gm) / (2.0 * h);
                let fd2 = (dgp - dgm) / (2.0 * h);
                assert_relative_eq!(dg, fd1, max_relative = 1e-6, epsilon = 1e-12);
                assert_relative_eq!(ddg, fd2, max_relative = 1e-5, epsilon = 1e-9);
                phi += 0.035;
            }
        }
    }

    #[test]
    fn softening_coefficients_table() {
        assert_eq!(softening_coeffs(SofteningLaw::Linear), (2.0, -0.5, 0.0));
        assert_eq!(softening_coeffs(SofteningLaw::Exponential), (2.5, 0.1748, 0.0));
        assert_eq!(softening_coeffs(SofteningLaw::Hyperbolic), (4.0, 0.5397, 0.0));
        assert_eq!(
            softening_coeffs(SofteningLaw::Cornelissen),
            (2.0, 1.3868, 0.9106)
        );
    }

    #[test]
    fn driving_force_cases() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        // all-compressive strain drives nothing
        let eps = Matrix2::new(-1e-3, 0.0, 0.0, -2e-3);
        assert_eq!(driving_force(&eps, &mat), 0.0);
        // uniaxial stress at sigma1 = ft hits exactly the nucleation floor
        let e = mat.ft / mat.e0;
        let eps = Matrix2::new(e, 0.0, 0.0, -mat.nu * e);
        let h = driving_force(&eps, &mat);
        assert_relative_eq!(h, mat.h_floor(), max_relative = 1e-12);
        // pure shear vs the eigensolver oracle
        let gamma = 1e-3;
        let eps = Matrix2::new(0.0, 0.5 * gamma, 0.5 * gamma, 0.0);
        let (e1, _, _) = eig_oracle(&eps);
        let sig1 = 2.0 * mat.mu() * e1; // trace is zero
        let expected = sig1 * sig1 / (2.0 * mat.e0);
        assert_relative_eq!(driving_force(&eps, &mat), expected, max_relative = 1e-12);
    }

    #[test]
    fn history_update_is_monotone_floor() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        let s0 = QuadPointState::initial(&mat);
        assert_eq!(s0.h, mat.h_floor());
        let s1 = update_history(&s0, 0.0, &mat);
        assert_eq!(s1.h, mat.h_floor());
        let s2 = update_history(&s1, 2.0 * mat.h_floor(), &mat);
        assert_eq!(s2.h, 2.0 * mat.h_floor());
        let s3 = update_history(&s2, 0.5 * mat.h_floor(), &mat);
        assert_eq!(s3.h, s2.h);
        // fold over a random sequence equals the running max
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let trials: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..1e-3)).collect();
        let mut state = QuadPointState::initial(&mat);
        let mut run_max = mat.h_floor();
        for &t in &trials {
            state = update_history(&state, t, &mat);
            run_max = run_max.max(t);
            assert_eq!(state.h, run_max);
        }
        // brittle mode has no floor
        let bm = concrete(ModelOrder::Second, SofteningLaw::Brittle);
        assert_eq!(QuadPointState::initial(&bm).h, 0.0);
    }

    fn plane_stress_matrix(mat: &MaterialModel) -> Matrix3<f64> {
        let f = mat.e0 / (1.0 - mat.nu * mat.nu);
        Matrix3::new(
            f,
            f * mat.nu,
            0.0,
            f * mat.nu,
            f,
            0.0,
            0.0,
            0.0,
            f * (1.0 - mat.nu) / 2.0,
        )
    }

    #[test]
    fn tangent_elastic_limits() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        // phi = 0 at any strain: the isotropic plane-stress matrix
        let c = material_tangent(&Matrix2::new(1e-3, 3e-4, 3e-4, -2e-3), 0.0, &mat);
        let iso = plane_stress_matrix(&mat);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(c[(i, j)], iso[(i, j)], max_relative = 1e-10, epsilon = 1e-9);
            }
        }
        // fully tensile strain: g(phi) times the isotropic matrix
        let phi = 0.4;
        let (g, _, _) = mat.degradation(phi);
        let c = material_tangent(&Matrix2::new(2e-3, 1e-4, 1e-4, 1e-3), phi, &mat);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    c[(i, j)],
                    g * iso[(i, j)],
                    max_relative = 1e-10,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 50 {
            let eps = random_strain(&mut rng, 1e-3);
            let (e1, e2, _, _) = eig_sym2(&eps);
            // stay away from the nonsmooth branch boundaries
            if (e1 - e2).abs() < 1e-5
                || e1.abs() < 1e-5
                || e2.abs() < 1e-5
                || eps.trace().abs() < 1e-5
            {
                continue;
            }
            checked += 1;
            let phi = rng.gen_range(0.0..0.9);
            let c = material_tangent(&eps, phi, &mat);
            let h = 1e-7;
            // columns: perturbations in (e_xx, e_yy, gamma)
            let dirs = [
                Matrix2::new(1.0, 0.0, 0.0, 0.0),
                Matrix2::new(0.0, 0.0, 0.0, 1.0),
                Matrix2::new(0.0, 0.5, 0.5, 0.0),
            ];
            for (j, d) in dirs.iter().enumerate() {
                let (sp, _, _) = stress(&(eps + d * h), phi, &mat);
                let (sm, _, _) = stress(&(eps - d * h), phi, &mat);
                let fd = (sp - sm) / (2.0 * h);
                let fd_v = [fd[(0, 0)], fd[(1, 1)], fd[(0, 1)]];
                for i in 0..3 {
                    let scale = 1.0 + c.abs().max();
                    assert!(
                        (c[(i, j)] - fd_v[i]).abs() <= 1e-5 * scale,
                        "C[{i}][{j}] = {} vs fd {}",
                        c[(i, j)],
                        fd_v[i]
                    );
                }
            }
        }
    }

    #[test]
    fn tangent_symmetric_limit_branch() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        // (near-)equal tensile eigenvalues: finite, g-scaled isotropic
        let eps = Matrix2::new(1e-3, 0.0, 0.0, 1e-3 + 1e-12);
        let c = material_tangent(&eps, 0.3, &mat);
        let (g, _, _) = mat.degradation(0.3);
        let iso = plane_stress_matrix(&mat);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    c[(i, j)],
                    g * iso[(i, j)],
                    max_relative = 1e-9,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn brittle_mode_forces_chi_zero() {
        let mat = MaterialModel::new(
            210000.0,
            0.3,
            2.7e-3,
            2445.0,
            0.015,
            2.0,
            SofteningLaw::Brittle,
            ModelOrder::Fourth,
            StressState::PlaneStrain,
        )
        .unwrap();
        assert_eq!(mat.chi, 0.0);
        assert_eq!(mat.c_alpha(), 2.0);
        let (g, dg, ddg) = mat.degradation(0.25);
        assert_relative_eq!(g, 0.75 * 0.75, epsilon = 1e-15);
        assert_relative_eq!(dg, -1.5, epsilon = 1e-15);
        assert_relative_eq!(ddg, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn characteristic_functions_extend_c1_outside_unit_interval() {
        let mat = concrete(ModelOrder::Fourth, SofteningLaw::Cornelissen);
        let eps = 1e-9;
        // continuity of value and slope across phi = 0 and phi = 1
        let (g0, dg0, _) = mat.degradation(0.0);
        let (gm, dgm, _) = mat.degradation(-eps);
        assert_relative_eq!(gm, g0 - dg0 * eps, max_relative = 1e-9);
        assert_relative_eq!(dgm, dg0, max_relative = 1e-9);
        let (g1, dg1, _) = mat.degradation(1.0);
        let (gp, dgp, _) = mat.degradation(1.0 + eps);
        assert!((gp - g1).abs() <= 1e-9);
        assert!((dgp - dg1).abs() <= 1e-6);
        // no pole below zero for the cohesive law
        let (g, dg, ddg) = mat.degradation(-0.02);
        assert!(g.is_finite() && dg.is_finite() && ddg == 0.0);
        assert!(g > 1.0);
        let (a0, da0, _) = mat.alpha(0.0);
        let (am, dam, _) = mat.alpha(-eps);
        assert_relative_eq!(am, a0 - da0 * eps, max_relative = 1e-9, epsilon = 1e-18);
        assert_relative_eq!(dam, da0, max_relative = 1e-12);
        let (a1v, da1v, _) = mat.alpha(1.0);
        let (ap, dap, _) = mat.alpha(1.0 + eps);
        assert!((ap - a1v).abs() <= 1e-8);
        assert!((dap - da1v).abs() <= 1e-8);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let bad = |e0, nu, chi| {
            MaterialModel::new(
                e0,
                nu,
                0.1,
                2.0,
                2.5,
                chi,
                SofteningLaw::Cornelissen,
                ModelOrder::Fourth,
                StressState::PlaneStress,
            )
        };
        assert!(bad(-1.0, 0.2, 2.0).is_err());
        assert!(bad(1.0, 0.6, 2.0).is_err());
        assert!(bad(1.0, 0.2, 2.7).is_err());
        assert!(bad(1.0, 0.0, 2.0).is_ok());
    }
}
