//! Linear maps on 2×2 matrices and time-indexed families of them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qubit::{BlochVector, Mat2};

type C64 = Complex64;

/// Superoperator acting on row-major vectorized matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superop(pub [[C64; 4]; 4]);

impl Superop {
    pub fn identity() -> Self {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = C64::new(1.0, 0.0);
        }
        Self(m)
    }

    /// Builds the map from the images of `|i⟩⟨j|` in row-major order.
    pub fn from_columns(cols: &[Mat2; 4]) -> Self {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (c, img) in cols.iter().enumerate() {
            for (r, z) in img.to_flat().into_iter().enumerate() {
                m[r][c] = z;
            }
        }
        Self(m)
    }

    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        let v = rho.to_flat();
        let mut out = [C64::new(0.0, 0.0); 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|c| self.0[r][c] * v[c]).sum();
        }
        Mat2::from_flat(&out)
    }

    /// Dual map applied to `X`: `Tr[Φ†(X) ρ] = Tr[X Φ(ρ)]`.
    pub fn apply_dual(&self, x: &Mat2) -> Mat2 {
        // vec(Φ†(X)) = M† vec(X) in the row-major Hilbert-Schmidt pairing.
        let v = x.to_flat();
        let mut out = [C64::new(0.0, 0.0); 4];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|r| self.0[r][c].conj() * v[r]).sum();
        }
        Mat2::from_flat(&out)
    }

    /// Affine Bloch representation `r ↦ M r + b`.
    pub fn bloch_affine(&self) -> ([[f64; 3]; 3], [f64; 3]) {
        let half = Mat2::identity().scale_re(0.5);
        let b = BlochVector::from_matrix(&self.apply(&half)).to_array();
        let paulis = [Mat2::sigma_x(), Mat2::sigma_y(), Mat2::sigma_z()];
        let mut m = [[0.0; 3]; 3];
        for (k, p) in paulis.iter().enumerate() {
            let img = BlochVector::from_matrix(&self.apply(&p.scale_re(0.5))).to_array();
            for r in 0..3 {
                m[r][k] = img[r];
            }
        }
        (m, b)
    }
}

/// Largest singular value of a real 3×3 matrix.
pub fn spectral_norm3(m: &[[f64; 3]; 3]) -> f64 {
    let a = nalgebra::Matrix3::from_fn(|r, c| m[r][c]);
    a.singular_values().max()
}

/// `Φ_t` sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicalMaps {
    pub times: Vec<f64>,
    pub maps: Vec<Superop>,
}

impl DynamicalMaps {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Bloch contraction matrices `M_t` for every snapshot.
    pub fn bloch_matrices(&self) -> Vec<[[f64; 3]; 3]> {
        self.maps.iter().map(|m| m.bloch_affine().0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_dual() {
        let id = Superop::identity();
        let rho = Mat2::from_real([[0.3, 0.1], [0.1, 0.7]]);
        assert_eq!(id.apply(&rho), rho);
        let (m, b) = id.bloch_affine();
        assert!((spectral_norm3(&m) - 1.0).abs() < 1e-12);
        assert!(b.iter().all(|x| x.abs() < 1e-15));
        // transpose map: trace preserving, dual also identity on 𝟙
        let cols = [
            Mat2::from_real([[1.0, 0.0], [0.0, 0.0]]),
            Mat2::from_real([[0.0, 0.0], [1.0, 0.0]]),
            Mat2::from_real([[0.0, 1.0], [0.0, 0.0]]),
            Mat2::from_real([[0.0, 0.0], [0.0, 1.0]]),
        ];
        let t = Superop::from_columns(&cols);
        assert!(t
            .apply_dual(&Mat2::identity())
            .approx_eq(&Mat2::identity(), 1e-15));
        assert!(t
            .apply(&rho)
            .approx_eq(&Mat2::from_real([[0.3, 0.1], [0.1, 0.7]]), 1e-15));
    }
}
