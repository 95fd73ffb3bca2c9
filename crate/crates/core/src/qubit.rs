//! Two-level-system primitives: 2×2 complex matrices, density operators,
//! Bloch vectors, the trace distance and seeded sampling of orthogonal pairs.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Dense 2×2 complex matrix, row-major `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

/// Column 2-vector.
pub type Ket = [C64; 2];

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub const fn zero() -> Self {
        Self([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn sigma_x() -> Self {
        Self([[ZERO, ONE], [ONE, ZERO]])
    }

    pub const fn sigma_y() -> Self {
        Self([[ZERO, C64::new(0.0, -1.0)], [I, ZERO]])
    }

    pub const fn sigma_z() -> Self {
        Self([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]])
    }

    /// σ₊ = |e⟩⟨g| with |e⟩ = (1, 0).
    pub const fn sigma_plus() -> Self {
        Self([[ZERO, ONE], [ZERO, ZERO]])
    }

    /// σ₋ = |g⟩⟨e|.
    pub const fn sigma_minus() -> Self {
        Self([[ZERO, ZERO], [ONE, ZERO]])
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &Ket, b: &Ket) -> Self {
        Self([
            [a[0] * b[0].conj(), a[0] * b[1].conj()],
            [a[1] * b[0].conj(), a[1] * b[1].conj()],
        ])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Self([
            [C64::new(m[0][0], 0.0), C64::new(m[0][1], 0.0)],
            [C64::new(m[1][0], 0.0), C64::new(m[1][1], 0.0)],
        ])
    }

    /// Row-major flat view `[a, b, c, d]`.
    pub fn to_flat(&self) -> [C64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }

    pub fn from_flat(v: &[C64]) -> Self {
        Self([[v[0], v[1]], [v[2], v[3]]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Self([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// `⟨a|M|b⟩`
    pub fn sandwich(&self, a: &Ket, b: &Ket) -> C64 {
        let mb = self.apply(b);
        a[0].conj() * mb[0] + a[1].conj() * mb[1]
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.to_flat().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (*self - self.dagger()).norm_max()
    }

    /// Eigenvalues (ascending) of the Hermitian part of `self`, closed form.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = 0.5 * (self.0[0][1] + self.0[1][0].conj());
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    /// Eigenpairs of a normal matrix (unitary or Hermitian). The first
    /// eigenvector is computed directly, the second is its orthogonal
    /// complement, so the returned basis is exactly orthonormal. Returns the
    /// eigenvalues and the absolute eigenvalue gap.
    pub fn normal_eigen(&self) -> ([C64; 2], [Ket; 2], f64) {
        let m = &self.0;
        let half_tr = 0.5 * self.trace();
        let disc = (half_tr * half_tr - self.det()).sqrt();
        let lam = half_tr + disc;
        let gap = 2.0 * disc.norm();
        let cand1 = [m[0][1], lam - m[0][0]];
        let cand2 = [lam - m[1][1], m[1][0]];
        let n1 = cand1[0].norm_sqr() + cand1[1].norm_sqr();
        let n2 = cand2[0].norm_sqr() + cand2[1].norm_sqr();
        let (v, nrm) = if n1 >= n2 { (cand1, n1) } else { (cand2, n2) };
        let v1 = if nrm < 1e-300 {
            [ONE, ZERO]
        } else {
            let s = 1.0 / nrm.sqrt();
            [v[0] * s, v[1] * s]
        };
        let v2 = orthogonal_complement(&v1);
        let l1 = self.sandwich(&v1, &v1);
        let l2 = self.sandwich(&v2, &v2);
        ([l1, l2], [v1, v2], gap)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (*self - *other).norm_max() <= tol
    }
}

/// Unit vector orthogonal to `v`.
pub fn orthogonal_complement(v: &Ket) -> Ket {
    [-v[1].conj(), v[0].conj()]
}

pub fn inner(a: &Ket, b: &Ket) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

pub fn ket_norm(a: &Ket) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr()).sqrt()
}

/// Multiplies `v` by the global phase that makes its largest-magnitude
/// component real and positive.
pub fn fix_phase(v: &Ket) -> Ket {
    let pivot = if v[0].norm() >= v[1].norm() {
        v[0]
    } else {
        v[1]
    };
    if pivot.norm() == 0.0 {
        return *v;
    }
    let ph = pivot.conj() / pivot.norm();
    [v[0] * ph, v[1] * ph]
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// Real Bloch vector `(x, y, z)` with `ρ = ½(𝟙 + x σx + y σy + z σz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &BlochVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Matrix `½(𝟙 + r·σ)` without positivity checks.
    pub fn to_matrix(&self) -> Mat2 {
        let h = 0.5;
        Mat2::new(
            C64::new(h * (1.0 + self.z), 0.0),
            C64::new(h * self.x, -h * self.y),
            C64::new(h * self.x, h * self.y),
            C64::new(h * (1.0 - self.z), 0.0),
        )
    }

    /// Bloch vector of an arbitrary (not necessarily normalized) Hermitian
    /// matrix: components `Tr(M σ_k)`.
    pub fn from_matrix(m: &Mat2) -> Self {
        let m = &m.0;
        Self {
            x: (m[0][1] + m[1][0]).re,
            y: (m[1][0] - m[0][1]).im,
            z: (m[0][0] - m[1][1]).re,
        }
    }
}

/// Validated qubit density operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(Mat2);

impl DensityMatrix {
    pub fn new(m: Mat2) -> Result<Self> {
        let herm = m.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:.3e})")));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let lmin = m.hermitian_eigenvalues()[0];
        if lmin < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lmin:.3e}"
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by a solver; only symmetrizes, no validation.
    pub fn from_trusted(m: Mat2) -> Self {
        Self(m)
    }

    pub fn excited() -> Self {
        Self(Mat2::from_real([[1.0, 0.0], [0.0, 0.0]]))
    }

    pub fn ground() -> Self {
        Self(Mat2::from_real([[0.0, 0.0], [0.0, 1.0]]))
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat2::identity().scale_re(0.5))
    }

    pub fn pure(psi: &Ket) -> Result<Self> {
        let n = ket_norm(psi);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("ket norm {n}")));
        }
        Self::new(Mat2::outer(psi, psi))
    }

    pub fn from_bloch(r: BlochVector) -> Result<Self> {
        if r.norm() > 1.0 + 1e-10 {
            return Err(Error::InvalidState(format!(
                "Bloch vector norm {} > 1",
                r.norm()
            )));
        }
        Ok(Self(r.to_matrix()))
    }

    pub fn bloch(&self) -> BlochVector {
        BlochVector::from_matrix(&self.0)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.hermitian_eigenvalues()[0]
    }
}

/// `½ Σ |λ|` over the eigenvalues of `a − b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    trace_norm_half(&(a.0 - b.0))
}

/// `½ ‖M‖₁` of a Hermitian matrix (closed form).
pub fn trace_norm_half(m: &Mat2) -> f64 {
    let [l0, l1] = m.hermitian_eigenvalues();
    0.5 * (l0.abs() + l1.abs())
}

/// Checked variant that rejects non-Hermitian arguments.
pub fn trace_distance_checked(a: &Mat2, b: &Mat2) -> Result<f64> {
    let da = DensityMatrix::new(*a)?;
    let db = DensityMatrix::new(*b)?;
    Ok(trace_distance(&da, &db))
}

/// Seeded generator for one task of a parallel run: the master seed picks
/// the key, the task index picks an independent ChaCha stream.
pub fn task_rng(master_seed: u64, task: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(task);
    rng
}

/// Antipodal pure states `½(𝟙 ± n̂·σ)` with `n̂` uniform on the sphere.
pub fn random_orthogonal_pair<R: Rng + ?Sized>(
    rng: &mut R,
) -> (DensityMatrix, DensityMatrix, BlochVector) {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    let n = BlochVector::new(x, y, z);
    let minus = BlochVector::new(-x, -y, -z);
    (
        DensityMatrix(n.to_matrix()),
        DensityMatrix(minus.to_matrix()),
        n,
    )
}

/// Pure-state pair along a given axis.
pub fn antipodal_pair(axis: BlochVector) -> (DensityMatrix, DensityMatrix) {
    let n = axis.norm();
    let u = BlochVector::new(axis.x / n, axis.y / n, axis.z / n);
    (
        DensityMatrix(u.to_matrix()),
        DensityMatrix(BlochVector::new(-u.x, -u.y, -u.z).to_matrix()),
    )
}

/// Matrix elements `⟨u_i|ρ|u_j⟩` in an orthonormal basis.
pub fn floquet_basis_elements(rho: &Mat2, basis: &[Ket; 2]) -> Result<Mat2> {
    let dev = orthonormality_error(basis);
    if dev > 1e-10 {
        return Err(Error::NonOrthonormalBasis(dev));
    }
    Ok(change_basis(rho, basis))
}

/// Unchecked `⟨u_i|M|u_j⟩`.
pub fn change_basis(m: &Mat2, basis: &[Ket; 2]) -> Mat2 {
    let [u0, u1] = basis;
    Mat2::new(
        m.sandwich(u0, u0),
        m.sandwich(u0, u1),
        m.sandwich(u1, u0),
        m.sandwich(u1, u1),
    )
}

/// Inverse of [`change_basis`]: `Σ M_ij |u_i⟩⟨u_j|`.
pub fn from_basis(m: &Mat2, basis: &[Ket; 2]) -> Mat2 {
    let mut out = Mat2::zero();
    for i in 0..2 {
        for j in 0..2 {
            out += Mat2::outer(&basis[i], &basis[j]).scale(m.0[i][j]);
        }
    }
    out
}

pub fn orthonormality_error(basis: &[Ket; 2]) -> f64 {
    let n0 = (inner(&basis[0], &basis[0]).re - 1.0).abs();
    let n1 = (inner(&basis[1], &basis[1]).re - 1.0).abs();
    let o = inner(&basis[0], &basis[1]).norm();
    n0.max(n1).max(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(x: f64, y: f64, z: f64) -> DensityMatrix {
        DensityMatrix::from_bloch(BlochVector::new(x, y, z)).unwrap()
    }

    #[test]
    fn pauli_algebra() {
        let sx = Mat2::sigma_x();
        let sz = Mat2::sigma_z();
        assert!((sx * sx).approx_eq(&Mat2::identity(), 0.0));
        assert!((sz * sz).approx_eq(&Mat2::identity(), 0.0));
        assert_eq!(sx.trace().norm(), 0.0);
        assert_eq!(sz.trace().norm(), 0.0);
        let sy = Mat2::sigma_y();
        assert!(sx
            .commutator(&sy)
            .approx_eq(&sz.scale(C64::new(0.0, 2.0)), 1e-15));
        assert!((Mat2::sigma_plus() + Mat2::sigma_minus()).approx_eq(&sx, 0.0));
    }

    #[test]
    fn trace_distance_examples() {
        let rho = state(0.3, -0.2, 0.1);
        assert_abs_diff_eq!(trace_distance(&rho, &rho), 0.0, epsilon = 1e-15);
        let e = DensityMatrix::excited();
        let g = DensityMatrix::ground();
        assert_abs_diff_eq!(trace_distance(&e, &g), 1.0, epsilon = 1e-15);
        let a = state(0.5, 0.0, 0.0);
        let b = state(-0.5, 0.0, 0.0);
        assert_abs_diff_eq!(trace_distance(&a, &b), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let mut m = DensityMatrix::maximally_mixed().matrix().to_owned();
        m.0[0][1] = C64::new(0.1, 0.0);
        assert!(trace_distance_checked(&m, &Mat2::identity().scale_re(0.5)).is_err());
        assert!(DensityMatrix::new(Mat2::from_real([[1.2, 0.0], [0.0, -0.2]])).is_err());
    }

    #[test]
    fn orthogonal_pairs_are_antipodal_and_reproducible() {
        let mut r1 = task_rng(42, 3);
        let mut r2 = task_rng(42, 3);
        for _ in 0..50 {
            let (a, b, n) = random_orthogonal_pair(&mut r1);
            let (a2, _, _) = random_orthogonal_pair(&mut r2);
            assert_abs_diff_eq!(trace_distance(&a, &b), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-12);
            assert_eq!(a, a2);
        }
        let (x, _, _) = random_orthogonal_pair(&mut task_rng(42, 4));
        let (y, _, _) = random_orthogonal_pair(&mut task_rng(42, 3));
        assert_ne!(x, y);
    }

    #[test]
    fn sphere_sampling_is_unbiased() {
        // each component of a uniform unit vector has variance 1/3
        let n = 10_000;
        let mut rng = task_rng(7, 0);
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let (_, _, v) = random_orthogonal_pair(&mut rng);
            for (s, c) in sums.iter_mut().zip(v.to_array()) {
                *s += c;
            }
        }
        let sigma = (1.0 / 3.0 / n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < 3.0 * sigma, "mean {}", s / n as f64);
        }
    }

    #[test]
    fn basis_change_examples() {
        let basis = [
            [C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
            orthogonal_complement(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]),
        ];
        let mixed =
            floquet_basis_elements(DensityMatrix::maximally_mixed().matrix(), &basis).unwrap();
        assert!(mixed.approx_eq(&Mat2::identity().scale_re(0.5), 1e-15));
        let proj = Mat2::outer(&basis[0], &basis[0]);
        let p = floquet_basis_elements(&proj, &basis).unwrap();
        assert!(p.approx_eq(&Mat2::from_real([[1.0, 0.0], [0.0, 0.0]]), 1e-15));
        let bad = [[ONE, ZERO], [ONE, ZERO]];
        assert!(floquet_basis_elements(&proj, &bad).is_err());
    }

    #[test]
    fn normal_eigen_of_unitary() {
        let theta = 0.7f64;
        let u = Mat2::new(
            C64::new(theta.cos(), 0.0),
            C64::new(0.0, -theta.sin()),
            C64::new(0.0, -theta.sin()),
            C64::new(theta.cos(), 0.0),
        );
        let (vals, vecs, gap) = u.normal_eigen();
        assert!(gap > 0.1);
        assert!(orthonormality_error(&vecs) < 1e-14);
        for k in 0..2 {
            let uv = u.apply(&vecs[k]);
            assert!((uv[0] - vals[k] * vecs[k][0]).norm() < 1e-13);
            assert!((uv[1] - vals[k] * vecs[k][1]).norm() < 1e-13);
        }
    }

    fn bloch_ball() -> impl Strategy<Value = BlochVector> {
        (0.0..1.0f64, -1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, ct, phi)| {
            let st = (1.0 - ct * ct).sqrt();
            let r = r.cbrt();
            BlochVector::new(r * st * phi.cos(), r * st * phi.sin(), r * ct)
        })
    }

    proptest! {
        #[test]
        fn bloch_round_trip(r in bloch_ball()) {
            let rho = DensityMatrix::from_bloch(r).unwrap();
            let back = DensityMatrix::from_bloch(rho.bloch()).unwrap();
            prop_assert!(rho.matrix().approx_eq(back.matrix(), 1e-12));
        }

        #[test]
        fn trace_distance_is_half_bloch_distance(a in bloch_ball(), b in bloch_ball()) {
            let d = trace_distance(&DensityMatrix::from_bloch(a).unwrap(), &DensityMatrix::from_bloch(b).unwrap());
            let e = ((a.x-b.x).powi(2) + (a.y-b.y).powi(2) + (a.z-b.z).powi(2)).sqrt();
            prop_assert!((d - 0.5 * e).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        }

        #[test]
        fn triangle_inequality(a in bloch_ball(), b in bloch_ball(), c in bloch_ball()) {
            let (a, b, c) = (
                DensityMatrix::from_bloch(a).unwrap(),
                DensityMatrix::from_bloch(b).unwrap(),
                DensityMatrix::from_bloch(c).unwrap(),
            );
            prop_assert!(trace_distance(&a, &c) <= trace_distance(&a, &b) + trace_distance(&b, &c) + 1e-10);
            prop_assert!((trace_distance(&a, &b) - trace_distance(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn basis_change_preserves_spectrum(r in bloch_ball(), th in 0.0..3.1f64, ph in 0.0..6.2f64) {
            let u0 = [C64::new(th.cos(), 0.0), C64::from_polar(th.sin(), ph)];
            let basis = [u0, orthogonal_complement(&u0)];
            let rho = DensityMatrix::from_bloch(r).unwrap();
            let m = floquet_basis_elements(rho.matrix(), &basis).unwrap();
            let e0 = rho.matrix().hermitian_eigenvalues();
            let e1 = m.hermitian_eigenvalues();
            prop_assert!((e0[0]-e1[0]).abs() < 1e-12 && (e0[1]-e1[1]).abs() < 1e-12);
            prop_assert!((m.trace() - ONE).norm() < 1e-12);
            prop_assert!(m.hermiticity_error() < 1e-12);
            prop_assert!(from_basis(&m, &basis).approx_eq(rho.matrix(), 1e-12));
        }
    }
}
