//! Univariate and tensor-product B-spline bases with first and second
//! derivatives, knot insertion, and the geometry push-forward needed by
//! the C¹ discretization.

use crate::error::{Error, Result};
use nalgebra::Matrix2;

const KNOT_EQ_TOL: f64 = 1e-12;

/// Open knot vector of degree `p >= 2`.
///
/// First and last knots carry multiplicity exactly `p + 1`; interior knots
/// are limited to multiplicity `p - 1` so the basis stays C¹ everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

/// Values and parametric derivatives of the `p + 1` basis functions that
/// are nonzero on one span.
#[derive(Debug, Clone)]
pub struct BasisEval {
    /// Span index: `knots[span] <= xi < knots[span + 1]`.
    pub span: usize,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree < 2 {
            return Err(Error::Domain(format!(
                "knot vector degree must be >= 2, got {degree}"
            )));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::Domain(format!(
                "need at least {} knots for degree {degree}, got {}",
                2 * (degree + 1),
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("knots must be nondecreasing".into()));
        }
        let first = knots[0];
        let last = *knots.last().unwrap();
        if last - first <= 0.0 {
            return Err(Error::Domain("knot range is empty".into()));
        }
        let lead = knots.iter().take_while(|&&k| k == first).count();
        let trail = knots.iter().rev().take_while(|&&k| k == last).count();
        if lead != degree + 1 || trail != degree + 1 {
            return Err(Error::Domain(format!(
                "knot vector must be open: end multiplicities ({lead}, {trail}) != {}",
                degree + 1
            )));
        }
        let kv = KnotVector { degree, knots };
        for (value, mult) in kv.interior_multiplicities() {
            if mult > degree - 1 {
                return Err(Error::Domain(format!(
                    "interior knot {value} has multiplicity {mult} > {} (breaks C1)",
                    degree - 1
                )));
            }
        }
        Ok(kv)
    }

    /// Open knot vector over `[a, b]` whose interior breakpoints are the
    /// (strictly increasing) entries of `breaks`, each with multiplicity 1.
    pub fn from_breaks(degree: usize, a: f64, b: f64, breaks: &[f64]) -> Result<Self> {
        let mut knots = vec![a; degree + 1];
        for &x in breaks {
            if x <= a || x >= b {
                return Err(Error::Domain(format!(
                    "break {x} outside open interval ({a}, {b})"
                )));
            }
            knots.push(x);
        }
        knots.extend(std::iter::repeat(b).take(degree + 1));
        Self::new(degree, knots)
    }

    /// Uniform open knot vector with `n_spans` equal spans on `[a, b]`.
    pub fn open_uniform(degree: usize, n_spans: usize, a: f64, b: f64) -> Result<Self> {
        let breaks: Vec<f64> = (1..n_spans)
            .map(|i| a + (b - a) * i as f64 / n_spans as f64)
            .collect();
        Self::from_breaks(degree, a, b, &breaks)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions: `len(knots) - p - 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn first(&self) -> f64 {
        self.knots[0]
    }

    pub fn last(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Distinct interior knot values with their multiplicities.
    pub fn interior_multiplicities(&self) -> Vec<(f64, usize)> {
        let first = self.first();
        let last = self.last();
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &k in &self.knots {
            if k == first || k == last {
                continue;
            }
            match out.last_mut() {
                Some((v, m)) if (*v - k).abs() <= KNOT_EQ_TOL => *m += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }

    /// Non-empty spans as `(span_index, start, end)`.
    pub fn spans(&self) -> Vec<(usize, f64, f64)> {
        (self.degree..self.num_basis())
            .filter(|&s| self.knots[s + 1] > self.knots[s])
            .map(|s| (s, self.knots[s], self.knots[s + 1]))
            .collect()
    }

    /// Greville abscissa of basis function `i`.
    pub fn greville(&self, i: usize) -> f64 {
        let p = self.degree;
        self.knots[i + 1..i + p + 1].iter().sum::<f64>() / p as f64
    }

    /// Span index `s` with `knots[s] <= xi < knots[s+1]`; the end of the
    /// parametric range maps to the last non-empty span.
    pub fn find_span(&self, xi: f64) -> Result<usize> {
        let n = self.num_basis();
        let p = self.degree;
        if xi < self.first() || xi > self.last() {
            return Err(Error::Domain(format!(
                "parameter {xi} outside knot range [{}, {}]",
                self.first(),
                self.last()
            )));
        }
        if xi >= self.knots[n] {
            return Ok(n - 1);
        }
        let mut lo = p;
        let mut hi = n;
        let mut mid = (lo + hi) / 2;
        while xi < self.knots[mid] || xi >= self.knots[mid + 1] {
            if xi < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2;
        }
        Ok(mid)
    }

    /// Values plus parametric derivatives up to `order` (at most 2) of the
    /// `p + 1` active functions at `xi`. Entry `j` corresponds to basis
    /// function `span - p + j`.
    pub fn basis_and_derivs(&self, xi: f64, order: usize) -> Result<BasisEval> {
        let p = self.degree;
        if order > 2 {
            return Err(Error::Domain(format!(
                "derivative order {order} > 2 is unsupported"
            )));
        }
        if order > p {
            return Err(Error::Domain(format!(
                "derivative order {order} exceeds degree {p}"
            )));
        }
        let span = self.find_span(xi)?;
        let ders = self.ders_basis(span, xi, order);
        Ok(BasisEval {
            span,
            values: ders[0].clone(),
            d1: if order >= 1 { ders[1].clone() } else { vec![0.0; p + 1] },
            d2: if order >= 2 { ders[2].clone() } else { vec![0.0; p + 1] },
        })
    }

    /// Cox–de Boor recursion with derivatives (The NURBS Book, A2.3).
    fn ders_basis(&self, span: usize, xi: f64, order: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let kn = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = xi - kn[span + 1 - j];
            right[j] = kn[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        ders[0].clone_from_slice(
            &(0..=p).map(|j| ndu[j][p]).collect::<Vec<_>>(),
        );
        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0].iter_mut().for_each(|v| *v = 0.0);
            a[1].iter_mut().for_each(|v| *v = 0.0);
            a[0][0] = 1.0;
            for k in 1..=order {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    a[s2][j] =
                        (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][(rk + j as isize) as usize];
                    d += a[s2][j] * ndu[(rk + j as isize) as usize][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=order {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        ders
    }

    /// Knot vector with `xi_new` inserted once, plus the Boehm blending
    /// coefficients for the affected control points.
    fn insert(&self, xi_new: f64) -> Result<(KnotVector, usize, Vec<f64>)> {
        let p = self.degree;
        if xi_new <= self.first() || xi_new >= self.last() {
            return Err(Error::Refinement(format!(
                "insertion point {xi_new} not strictly inside ({}, {})",
                self.first(),
                self.last()
            )));
        }
        let mult = self
            .interior_multiplicities()
            .iter()
            .find(|(v, _)| (v - xi_new).abs() <= KNOT_EQ_TOL)
            .map(|(_, m)| *m)
            .unwrap_or(0);
        if mult + 1 > p - 1 {
            return Err(Error::Refinement(format!(
                "inserting {xi_new} would raise interior multiplicity to {} > {} (breaks C1)",
                mult + 1,
                p - 1
            )));
        }
        let k = self.find_span(xi_new)?;
        // alphas[j] blends old control points (k-p+j-1, k-p+j) into new index k-p+j
        let alphas: Vec<f64> = (1..=p)
            .map(|j| {
                let i = k - p + j;
                (xi_new - self.knots[i]) / (self.knots[i + p] - self.knots[i])
            })
            .collect();
        let mut knots = self.knots.clone();
        knots.insert(k + 1, xi_new);
        Ok((KnotVector { degree: p, knots }, k, alphas))
    }
}

/// Parametric direction of a tensor-product patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Xi,
    Eta,
}

/// Tensor-product spline surface patch in the plane.
///
/// Control points are stored xi-major: `cp(ix, iy) = control_points[ix * n_eta + iy]`.
/// Weights are kept in the data model; every constructor used by the solver
/// builds polynomial (all-ones) patches.
#[derive(Debug, Clone, PartialEq)]
pub struct SplinePatch {
    pub kv_xi: KnotVector,
    pub kv_eta: KnotVector,
    control_points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

/// Geometry and basis data at one parametric point.
#[derive(Debug, Clone)]
pub struct GeometryEval {
    /// Physical coordinates (mm).
    pub xy: [f64; 2],
    /// Jacobian `d x_k / d xi_i` (row k, column i).
    pub jacobian: Matrix2<f64>,
    pub det_j: f64,
    /// Active bivariate basis values; entry `a = lx * (p_eta + 1) + ly`.
    pub n: Vec<f64>,
    /// Physical first derivatives `[d/dx, d/dy]` per active function.
    pub dn_dx: Vec<[f64; 2]>,
    /// Physical second derivatives `[d2/dx2, d2/dy2, d2/dxdy]`.
    pub d2n_dx2: Vec<[f64; 3]>,
    /// Span indices (xi, eta).
    pub spans: (usize, usize),
}

impl SplinePatch {
    pub fn new(
        kv_xi: KnotVector,
        kv_eta: KnotVector,
        control_points: Vec<[f64; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let expect = kv_xi.num_basis() * kv_eta.num_basis();
        if control_points.len() != expect {
            return Err(Error::Geometry(format!(
                "control net has {} points, basis counts require {expect}",
                control_points.len()
            )));
        }
        if weights.len() != expect {
            return Err(Error::Geometry(format!(
                "{} weights for {expect} control points",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Geometry("weights must be positive".into()));
        }
        Ok(SplinePatch {
            kv_xi,
            kv_eta,
            control_points,
            weights,
        })
    }

    /// Axis-aligned rectangular patch whose parametric and physical
    /// coordinates coincide: knots live in mm and control points sit at
    /// Greville abscissae, so the mapping is the identity.
    pub fn rectangle(kv_xi: KnotVector, kv_eta: KnotVector) -> Result<Self> {
        let (nx, ny) = (kv_xi.num_basis(), kv_eta.num_basis());
        let mut cps = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            let gx = kv_xi.greville(ix);
            for iy in 0..ny {
                cps.push([gx, kv_eta.greville(iy)]);
            }
        }
        let weights = vec![1.0; nx * ny];
        Self::new(kv_xi, kv_eta, cps, weights)
    }

    pub fn n_xi(&self) -> usize {
        self.kv_xi.num_basis()
    }

    pub fn n_eta(&self) -> usize {
        self.kv_eta.num_basis()
    }

    pub fn control_point(&self, ix: usize, iy: usize) -> [f64; 2] {
        self.control_points[ix * self.n_eta() + iy]
    }

    pub fn weight(&self, ix: usize, iy: usize) -> f64 {
        self.weights[ix * self.n_eta() + iy]
    }

    /// Greville point of control point `(ix, iy)` mapped to physical space.
    pub fn greville_point(&self, ix: usize, iy: usize) -> Result<[f64; 2]> {
        let eval = self.evaluate(self.kv_xi.greville(ix), self.kv_eta.greville(iy))?;
        Ok(eval.xy)
    }

    /// Physical point of the mapping at `(xi, eta)` without derivatives.
    pub fn map_point(&self, xi: f64, eta: f64) -> Result<[f64; 2]> {
        Ok(self.evaluate(xi, eta)?.xy)
    }

    /// Full geometry evaluation: physical point, Jacobian, and basis
    /// functions pushed to physical derivatives through the inverse
    /// Jacobian, including the geometry-Hessian correction on the
    /// second-derivative chain rule.
    pub fn evaluate(&self, xi: f64, eta: f64) -> Result<GeometryEval> {
        let bx = self.kv_xi.basis_and_derivs(xi, 2)?;
        let by = self.kv_eta.basis_and_derivs(eta, 2)?;
        let (px, py) = (self.kv_xi.degree(), self.kv_eta.degree());
        let n_local = (px + 1) * (py + 1);
        let n_eta = self.n_eta();

        // Rational layer: R_a = w_a N_a / W with W = sum w_a N_a.
        // All parametric derivatives of the numerator and W first.
        let mut w = 0.0;
        let mut dw = [0.0; 2]; // (d/dxi, d/deta)
        let mut d2w = [0.0; 3]; // (xixi, etaeta, xieta)
        let mut raw = vec![[0.0f64; 6]; n_local]; // N, Nxi, Neta, Nxixi, Netaeta, Nxieta
        let mut wts = vec![0.0f64; n_local];
        for lx in 0..=px {
            let gx = bx.span - px + lx;
            for ly in 0..=py {
                let gy = by.span - py + ly;
                let a = lx * (py + 1) + ly;
                let wa = self.weights[gx * n_eta + gy];
                wts[a] = wa;
                let v = [
                    bx.values[lx] * by.values[ly],
                    bx.d1[lx] * by.values[ly],
                    bx.values[lx] * by.d1[ly],
                    bx.d2[lx] * by.values[ly],
                    bx.values[lx] * by.d2[ly],
                    bx.d1[lx] * by.d1[ly],
                ];
                raw[a] = v;
                w += wa * v[0];
                dw[0] += wa * v[1];
                dw[1] += wa * v[2];
                d2w[0] += wa * v[3];
                d2w[1] += wa * v[4];
                d2w[2] += wa * v[5];
            }
        }

        // Rational basis values and parametric derivatives (quotient rule).
        let mut r = vec![0.0f64; n_local];
        let mut dr = vec![[0.0f64; 2]; n_local];
        let mut d2r = vec![[0.0f64; 3]; n_local];
        let w2 = w * w;
        let w3 = w2 * w;
        for a in 0..n_local {
            let wa = wts[a];
            let [n0, nx, ne, nxx, nee, nxe] = raw[a];
            r[a] = wa * n0 / w;
            dr[a] = [
                wa * (nx * w - n0 * dw[0]) / w2,
                wa * (ne * w - n0 * dw[1]) / w2,
            ];
            d2r[a] = [
                wa * (nxx * w2 - 2.0 * nx * dw[0] * w - n0 * d2w[0] * w
                    + 2.0 * n0 * dw[0] * dw[0])
                    / w3,
                wa * (nee * w2 - 2.0 * ne * dw[1] * w - n0 * d2w[1] * w
                    + 2.0 * n0 * dw[1] * dw[1])
                    / w3,
                wa * (nxe * w2 - nx * dw[1] * w - ne * dw[0] * w - n0 * d2w[2] * w
                    + 2.0 * n0 * dw[0] * dw[1])
                    / w3,
            ];
        }

        // Geometry: x = sum R_a P_a, Jacobian, and per-coordinate Hessians.
        let mut xy = [0.0f64; 2];
        let mut jac: Matrix2<f64> = Matrix2::zeros();
        let mut hess: [Matrix2<f64>; 2] = [Matrix2::zeros(), Matrix2::zeros()];
        for lx in 0..=px {
            let gx = bx.span - px + lx;
            for ly in 0..=py {
                let gy = by.span - py + ly;
                let a = lx * (py + 1) + ly;
                let p = self.control_points[gx * n_eta + gy];
                for k in 0..2 {
                    xy[k] += r[a] * p[k];
                    jac[(k, 0)] += dr[a][0] * p[k];
                    jac[(k, 1)] += dr[a][1] * p[k];
                    hess[k][(0, 0)] += d2r[a][0] * p[k];
                    hess[k][(1, 1)] += d2r[a][1] * p[k];
                    hess[k][(0, 1)] += d2r[a][2] * p[k];
                    hess[k][(1, 0)] += d2r[a][2] * p[k];
                }
            }
        }

        let det_j = jac[(0, 0)] * jac[(1, 1)] - jac[(0, 1)] * jac[(1, 0)];
        if !(det_j.abs() > 1e-14) {
            return Err(Error::Geometry(format!(
                "singular Jacobian (det = {det_j:.3e}) at spans ({}, {})",
                bx.span, by.span
            )));
        }
        let jac_inv = Matrix2::new(jac[(1, 1)], -jac[(0, 1)], -jac[(1, 0)], jac[(0, 0)]) / det_j;

        // First derivatives: grad_x R = J^{-T} grad_xi R.
        // Second derivatives: H_xi = J^T H_x J + sum_k (grad_x R)_k H_geo^k,
        // solved for H_x.
        let mut dn_dx = vec![[0.0f64; 2]; n_local];
        let mut d2n_dx2 = vec![[0.0f64; 3]; n_local];
        for a in 0..n_local {
            let gpar = nalgebra::Vector2::new(dr[a][0], dr[a][1]);
            let gphys = jac_inv.transpose() * gpar;
            dn_dx[a] = [gphys[0], gphys[1]];
            let h_par = Matrix2::new(d2r[a][0], d2r[a][2], d2r[a][2], d2r[a][1]);
            let corr = h_par - hess[0] * gphys[0] - hess[1] * gphys[1];
            let h_phys = jac_inv.transpose() * corr * jac_inv;
            d2n_dx2[a] = [h_phys[(0, 0)], h_phys[(1, 1)], 0.5 * (h_phys[(0, 1)] + h_phys[(1, 0)])];
        }

        Ok(GeometryEval {
            xy,
            jacobian: jac,
            det_j,
            n: r,
            dn_dx,
            d2n_dx2,
            spans: (bx.span, by.span),
        })
    }

    /// Insert one knot without changing the mapped geometry (Boehm).
    pub fn insert_knot(&self, direction: Direction, xi_new: f64) -> Result<SplinePatch> {
        let (n_xi, n_eta) = (self.n_xi(), self.n_eta());
        // Blend in homogeneous coordinates so rational patches stay exact.
        let hom = |ix: usize, iy: usize| -> [f64; 3] {
            let p = self.control_points[ix * n_eta + iy];
            let w = self.weights[ix * n_eta + iy];
            [p[0] * w, p[1] * w, w]
        };
        match direction {
            Direction::Xi => {
                let (kv_new, k, alphas) = self.kv_xi.insert(xi_new)?;
                let p = self.kv_xi.degree();
                let mut cps = Vec::with_capacity((n_xi + 1) * n_eta);
                let mut wgt = Vec::with_capacity((n_xi + 1) * n_eta);
                for ix in 0..=n_xi {
                    for iy in 0..n_eta {
                        let h = if ix <= k - p {
                            hom(ix, iy)
                        } else if ix > k {
                            hom(ix - 1, iy)
                        } else {
                            let alpha = alphas[ix - (k - p) - 1];
                            let a = hom(ix - 1, iy);
                            let b = hom(ix, iy);
                            [
                                alpha * b[0] + (1.0 - alpha) * a[0],
                                alpha * b[1] + (1.0 - alpha) * a[1],
                                alpha * b[2] + (1.0 - alpha) * a[2],
                            ]
                        };
                        cps.push([h[0] / h[2], h[1] / h[2]]);
                        wgt.push(h[2]);
                    }
                }
                SplinePatch::new(kv_new, self.kv_eta.clone(), cps, wgt)
            }
            Direction::Eta => {
                let (kv_new, k, alphas) = self.kv_eta.insert(xi_new)?;
                let p = self.kv_eta.degree();
                let mut cps = Vec::with_capacity(n_xi * (n_eta + 1));
                let mut wgt = Vec::with_capacity(n_xi * (n_eta + 1));
                for ix in 0..n_xi {
                    for iy in 0..=n_eta {
                        let h = if iy <= k - p {
                            hom(ix, iy)
                        } else if iy > k {
                            hom(ix, iy - 1)
                        } else {
                            let alpha = alphas[iy - (k - p) - 1];
                            let a = hom(ix, iy - 1);
                            let b = hom(ix, iy);
                            [
                                alpha * b[0] + (1.0 - alpha) * a[0],
                                alpha * b[1] + (1.0 - alpha) * a[1],
                                alpha * b[2] + (1.0 - alpha) * a[2],
                            ]
                        };
                        cps.push([h[0] / h[2], h[1] / h[2]]);
                        wgt.push(h[2]);
                    }
                }
                SplinePatch::new(self.kv_xi.clone(), kv_new, cps, wgt)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bezier_kv() -> KnotVector {
        KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn find_span_single_bezier() {
        let kv = bezier_kv();
        assert_eq!(kv.find_span(0.5).unwrap(), 2);
        assert_eq!(kv.find_span(1.0).unwrap(), 2); // end convention
        assert_eq!(kv.find_span(0.0).unwrap(), 2);
    }

    #[test]
    fn find_span_two_spans() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(kv.find_span(0.7).unwrap(), 3);
        assert_eq!(kv.find_span(0.3).unwrap(), 2);
        assert_eq!(kv.find_span(1.0).unwrap(), 3);
        assert!(kv.find_span(1.5).is_err());
        assert!(kv.find_span(-0.1).is_err());
    }

    #[test]
    fn bezier_values_match_bernstein() {
        // Degree-2 Bernstein at 0.5: (0.25, 0.5, 0.25)
        let kv = bezier_kv();
        let b = kv.basis_and_derivs(0.5, 2).unwrap();
        assert_relative_eq!(b.values[0], 0.25, epsilon = 1e-14);
        assert_relative_eq!(b.values[1], 0.5, epsilon = 1e-14);
        assert_relative_eq!(b.values[2], 0.25, epsilon = 1e-14);
        // Bernstein derivative at 0: (-2, 2, 0)
        let b0 = kv.basis_and_derivs(0.0, 1).unwrap();
        assert_relative_eq!(b0.d1[0], -2.0, epsilon = 1e-14);
        assert_relative_eq!(b0.d1[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(b0.d1[2], 0.0, epsilon = 1e-14);
        // Second derivatives of degree-2 Bernstein: (2, -4, 2), constant
        let b2 = kv.basis_and_derivs(0.3, 2).unwrap();
        assert_relative_eq!(b2.d2[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(b2.d2[1], -4.0, epsilon = 1e-12);
        assert_relative_eq!(b2.d2[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn partition_of_unity_and_derivative_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for degree in [2usize, 3, 4] {
            let kv = KnotVector::from_breaks(degree, 0.0, 3.0, &[0.4, 1.1, 1.7, 2.2, 2.9])
                .unwrap();
            for _ in 0..1000 {
                let xi: f64 = rng.gen_range(0.0..=3.0);
                let b = kv.basis_and_derivs(xi, 2).unwrap();
                let s0: f64 = b.values.iter().sum();
                let s1: f64 = b.d1.iter().sum();
                let s2: f64 = b.d2.iter().sum();
                assert!((s0 - 1.0).abs() <= 1e-12, "sum N = {s0}");
                assert!(s1.abs() <= 1e-9, "sum N' = {s1}");
                assert!(s2.abs() <= 1e-9, "sum N'' = {s2}");
                assert!(b.values.iter().all(|&v| v >= -1e-14));
            }
        }
    }

    #[test]
    fn basis_derivatives_match_finite_differences() {
        let kv = KnotVector::from_breaks(3, 0.0, 2.0, &[0.5, 0.5, 1.3]).unwrap();
        let h = 1e-6;
        for &xi in &[0.21, 0.77, 1.42, 1.9] {
            let b = kv.basis_and_derivs(xi, 2).unwrap();
            let bp = kv.basis_and_derivs(xi + h, 2).unwrap();
            let bm = kv.basis_and_derivs(xi - h, 2).unwrap();
            assert_eq!(b.span, bp.span);
            assert_eq!(b.span, bm.span);
            for j in 0..4 {
                let fd1 = (bp.values[j] - bm.values[j]) / (2.0 * h);
                let fd2 = (bp.values[j] - 2.0 * b.values[j] + bm.values[j]) / (h * h);
                assert_relative_eq!(b.d1[j], fd1, epsilon = 1e-6, max_relative = 1e-6);
                assert!((b.d2[j] - fd2).abs() <= 1e-3 * (1.0 + b.d2[j].abs()));
            }
        }
    }

    #[test]
    fn knot_vector_rejects_bad_input() {
        assert!(KnotVector::new(1, vec![0.0, 0.0, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0]).is_err()); // not open
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.6, 0.4, 1.0, 1.0, 1.0]).is_err());
        // interior multiplicity p (= 2) breaks C1 for degree 2
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0]).is_err());
        // but is fine for degree 3
        assert!(KnotVector::new(
            3,
            vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0]
        )
        .is_ok());
    }

    #[test]
    fn insertion_counts_and_coefficients() {
        // Unit-interval quadratic Bezier "curve" as a degenerate-height patch
        // is awkward; check the univariate rule through a square patch edge.
        let kv = bezier_kv();
        let (kv2, _, _) = kv.insert(0.5).unwrap();
        assert_eq!(kv2.num_basis(), 4);
        assert_eq!(kv2.knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);

        // Boehm coefficients on the 1D control polygon (0, 0.5, 1) -> (0, 0.25, 0.75, 1):
        // realized via a patch whose x-coordinates are that polygon.
        let kv_eta = bezier_kv();
        let cps = vec![
            [0.0, 0.0],
            [0.0, 0.5],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.5, 1.0],
            [1.0, 0.0],
            [1.0, 0.5],
            [1.0, 1.0],
        ];
        let patch = SplinePatch::new(bezier_kv(), kv_eta, cps, vec![1.0; 9]).unwrap();
        let refined = patch.insert_knot(Direction::Xi, 0.5).unwrap();
        assert_eq!(refined.n_xi(), 4);
        let xs: Vec<f64> = (0..4).map(|ix| refined.control_point(ix, 0)[0]).collect();
        assert_relative_eq!(xs[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(xs[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(xs[2], 0.75, epsilon = 1e-15);
        assert_relative_eq!(xs[3], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn insertion_preserves_geometry() {
        let kv_xi = KnotVector::from_breaks(3, 0.0, 2.0, &[0.8]).unwrap();
        let kv_eta = KnotVector::from_breaks(2, 0.0, 1.0, &[0.5]).unwrap();
        let patch = SplinePatch::rectangle(kv_xi, kv_eta).unwrap();
        let mut refined = patch.clone();
        for xi in [0.3, 1.2, 1.7] {
            refined = refined.insert_knot(Direction::Xi, xi).unwrap();
        }
        for eta in [0.25, 0.8] {
            refined = refined.insert_knot(Direction::Eta, eta).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let xi = rng.gen_range(0.0..=2.0);
            let eta = rng.gen_range(0.0..=1.0);
            let a = patch.map_point(xi, eta).unwrap();
            let b = refined.map_point(xi, eta).unwrap();
            assert!((a[0] - b[0]).abs() <= 1e-12);
            assert!((a[1] - b[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn insertion_rejects_multiplicity_violation() {
        let kv_xi = KnotVector::from_breaks(2, 0.0, 1.0, &[0.5]).unwrap();
        let kv_eta = bezier_kv();
        let patch = SplinePatch::rectangle(kv_xi, kv_eta).unwrap();
        // degree 2 allows interior multiplicity at most 1; 0.5 already present
        assert!(patch.insert_knot(Direction::Xi, 0.5).is_err());
    }

    #[test]
    fn identity_patch_geometry() {
        let kv_xi = KnotVector::open_uniform(2, 2, 0.0, 1.0).unwrap();
        let kv_eta = KnotVector::open_uniform(2, 2, 0.0, 1.0).unwrap();
        let patch = SplinePatch::rectangle(kv_xi, kv_eta).unwrap();
        let g = patch.evaluate(0.37, 0.81).unwrap();
        assert_relative_eq!(g.xy[0], 0.37, epsilon = 1e-14);
        assert_relative_eq!(g.xy[1], 0.81, epsilon = 1e-14);
        assert_relative_eq!(g.det_j, 1.0, epsilon = 1e-13);
        assert_relative_eq!(g.jacobian[(0, 0)], 1.0, epsilon = 1e-13);
        assert_relative_eq!(g.jacobian[(0, 1)], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn scaled_patch_derivatives_follow_chain_rule() {
        let l = 25.0;
        let kv_unit_x = KnotVector::open_uniform(3, 3, 0.0, 1.0).unwrap();
        let kv_unit_y = KnotVector::open_uniform(3, 3, 0.0, 1.0).unwrap();
        let unit = SplinePatch::rectangle(kv_unit_x.clone(), kv_unit_y.clone()).unwrap();
        // Same knots, control points scaled by L in x.
        let cps: Vec<[f64; 2]> = (0..unit.n_xi())
            .flat_map(|ix| {
                let kvx = kv_unit_x.clone();
                let kvy = kv_unit_y.clone();
                (0..unit.n_eta())
                    .map(move |iy| [l * kvx.greville(ix), kvy.greville(iy)])
                    .collect::<Vec<_>>()
            })
            .collect();
        let n = unit.n_xi() * unit.n_eta();
        let scaled =
            SplinePatch::new(kv_unit_x, kv_unit_y, cps, vec![1.0; n]).unwrap();
        let gu = unit.evaluate(0.4, 0.6).unwrap();
        let gs = scaled.evaluate(0.4, 0.6).unwrap();
        for a in 0..gu.n.len() {
            assert_relative_eq!(gs.dn_dx[a][0], gu.dn_dx[a][0] / l, epsilon = 1e-12);
            assert_relative_eq!(gs.dn_dx[a][1], gu.dn_dx[a][1], epsilon = 1e-12);
            assert_relative_eq!(gs.d2n_dx2[a][0], gu.d2n_dx2[a][0] / (l * l), epsilon = 1e-12);
            assert_relative_eq!(gs.d2n_dx2[a][1], gu.d2n_dx2[a][1], epsilon = 1e-12);
            assert_relative_eq!(gs.d2n_dx2[a][2], gu.d2n_dx2[a][2] / l, epsilon = 1e-12);
        }
    }

    #[test]
    fn distorted_patch_second_derivatives_match_finite_differences() {
        // Bilinear-distorted quad: control net of a 2x2-span quadratic patch
        // perturbed so the geometry Hessian is nonzero.
        let kv = KnotVector::open_uniform(2, 2, 0.0, 1.0).unwrap();
        let base = SplinePatch::rectangle(kv.clone(), kv.clone()).unwrap();
        let mut cps = Vec::new();
        for ix in 0..base.n_xi() {
            for iy in 0..base.n_eta() {
                let [x, y] = base.control_point(ix, iy);
                // smooth distortion, keeps det J > 0
                cps.push([x + 0.15 * x * y, y - 0.1 * x * x]);
            }
        }
        let n = base.n_xi() * base.n_eta();
        let patch = SplinePatch::new(kv.clone(), kv, cps, vec![1.0; n]).unwrap();

        // Physical-space finite differences require inverting the map; use
        // parametric FD of (physical gradient) instead:
        // d/dxi [dN/dx](xi,eta) = H_x(N) * dx/dxi  (chain rule), so compare
        // J^T-projected Hessian columns against FD of the physical gradient.
        let (xi0, eta0) = (0.63, 0.41);
        let h = 1e-6;
        let g0 = patch.evaluate(xi0, eta0).unwrap();
        let gxp = patch.evaluate(xi0 + h, eta0).unwrap();
        let gxm = patch.evaluate(xi0 - h, eta0).unwrap();
        let gep = patch.evaluate(xi0, eta0 + h).unwrap();
        let gem = patch.evaluate(xi0, eta0 - h).unwrap();
        for a in 0..g0.n.len() {
            let hx = Matrix2::new(
                g0.d2n_dx2[a][0],
                g0.d2n_dx2[a][2],
                g0.d2n_dx2[a][2],
                g0.d2n_dx2[a][1],
            );
            let expected = hx * g0.jacobian; // d(grad_x N)/d(xi_j) in columns
            for (col, (gp, gm)) in [(&gxp, &gxm), (&gep, &gem)].iter().enumerate() {
                for row in 0..2 {
                    let fd = (gp.dn_dx[a][row] - gm.dn_dx[a][row]) / (2.0 * h);
                    let scale = 1.0 + expected[(row, col)].abs();
                    assert!(
                        (expected[(row, col)] - fd).abs() <= 1e-6 * scale,
                        "a={a} row={row} col={col}: {} vs fd {}",
                        expected[(row, col)],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn rational_weights_keep_partition_of_unity() {
        let kv = KnotVector::from_breaks(2, 0.0, 1.0, &[0.4, 0.7]).unwrap();
        let base = SplinePatch::rectangle(kv.clone(), kv).unwrap();
        let n = base.n_xi() * base.n_eta();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let cps: Vec<[f64; 2]> = (0..base.n_xi())
            .flat_map(|ix| {
                (0..base.n_eta())
                    .map(|iy| base.control_point(ix, iy))
                    .collect::<Vec<_>>()
            })
            .collect();
        let patch = SplinePatch::new(base.kv_xi.clone(), base.kv_eta.clone(), cps, weights)
            .unwrap();
        for _ in 0..200 {
            let xi = rng.gen_range(0.0..=1.0);
            let eta = rng.gen_range(0.0..=1.0);
            let g = patch.evaluate(xi, eta).unwrap();
            let s: f64 = g.n.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            let s1x: f64 = g.dn_dx.iter().map(|d| d[0]).sum();
            let s1y: f64 = g.dn_dx.iter().map(|d| d[1]).sum();
            assert!(s1x.abs() <= 1e-9 && s1y.abs() <= 1e-9);
        }
    }
}
