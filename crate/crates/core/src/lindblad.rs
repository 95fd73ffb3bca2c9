//! Floquet-Lindblad master equation in the interaction picture.
//!
//! All operators and states here are expressed in the Floquet basis
//! `{|u_1(0)⟩, |u_2(0)⟩}`, where `Σ_z`, `Σ_±`, `Σ_x` take their Pauli form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::BathModel;
use crate::error::{Error, Result};
use crate::floquet::{CoefficientTable, FloquetSolution};
use crate::maps::{DynamicalMaps, Superop};
use crate::ode::Dopri5;
use crate::qubit::Mat2;
use crate::trajectory::Trajectory;

type C64 = Complex64;

/// Fourier components below this magnitude are treated as quadrature noise.
pub const COEFF_FLOOR: f64 = 1e-9;

/// Default Σz prefactor `|c¹₁₁| ≈ 1/5`.
pub const C11_DEFAULT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpChannel {
    /// Jump operator in the Floquet basis.
    pub operator: Mat2,
    /// Floquet frequency `ω_F`.
    pub freq: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Generic,
    NonDegenerate,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipatorSpec {
    pub variant: Variant,
    pub channels: Vec<JumpChannel>,
    /// Rates of the secular model, when the variant has them.
    pub rates: Option<SecularRates>,
}

/// Named rates of the two specialized dissipators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularRates {
    pub gamma_down: f64,
    pub gamma_up: f64,
    pub gamma_x: f64,
    pub gamma_z: f64,
    pub c11_abs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTimes {
    pub tau_diag: f64,
    pub tau_offdiag_re: f64,
    pub tau_offdiag_im: f64,
    pub variant: Variant,
}

impl RelaxationTimes {
    pub fn max(&self) -> f64 {
        self.tau_diag
            .max(self.tau_offdiag_re)
            .max(self.tau_offdiag_im)
    }
}

impl DissipatorSpec {
    /// `D[ρ] = Σ γ (AρA† − ½{A†A, ρ})`.
    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        let mut out = Mat2::zero();
        for ch in &self.channels {
            let a = ch.operator;
            let ad = a.dagger();
            let ada = ad * a;
            let term = a * *rho * ad - (ada * *rho + *rho * ada).scale_re(0.5);
            out += term.scale_re(ch.rate);
        }
        out
    }

    /// 4×4 generator acting on row-major vectorized `ρ`.
    pub fn generator(&self) -> [[C64; 4]; 4] {
        let mut g = [[C64::new(0.0, 0.0); 4]; 4];
        for col in 0..4 {
            let mut e = [C64::new(0.0, 0.0); 4];
            e[col] = C64::new(1.0, 0.0);
            let out = self.apply(&Mat2::from_flat(&e)).to_flat();
            for row in 0..4 {
                g[row][col] = out[row];
            }
        }
        g
    }

    /// Stationary state of the generator (unique for the specs built here).
    pub fn steady_state(&self) -> Mat2 {
        // Solve L ρ = 0 with Tr ρ = 1 by replacing one equation.
        let g = self.generator();
        let mut a = nalgebra::Matrix4::<C64>::zeros();
        let mut b = nalgebra::Vector4::<C64>::zeros();
        for r in 0..3 {
            for c in 0..4 {
                a[(r, c)] = g[r][c];
            }
        }
        a[(3, 0)] = C64::new(1.0, 0.0);
        a[(3, 3)] = C64::new(1.0, 0.0);
        b[3] = C64::new(1.0, 0.0);
        match a.lu().solve(&b) {
            Some(x) => Mat2::from_flat(x.as_slice()),
            None => Mat2::identity().scale_re(0.5),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn sigma_z() -> Mat2 {
    Mat2::sigma_z()
}

/// Channel synthesis from the coefficient table: every `(i, j, n)` with
/// `|n| ≤ n_max` contributes `c^n_ij |u_i⟩⟨u_j|` at `ω_F = ε_j − ε_i − nω`;
/// contributions within `bin_tol` of each other are summed coherently. The
/// zero-frequency bin merges the `+0` and `−0` channels and receives
/// `rate(+0) + rate(−0) = 2α/(βω_c)`.
pub fn build_generic(
    table: &CoefficientTable,
    sol: &FloquetSolution,
    bath: &BathModel,
    n_max: i32,
    bin_tol: f64,
) -> DissipatorSpec {
    let omega = sol.drive.omega;
    let eps = sol.mode_energies;
    let n_max = n_max.min(table.n_max);
    let mut terms: Vec<(f64, usize, usize, C64)> = Vec::new();
    for n in -n_max..=n_max {
        for i in 0..2 {
            for j in 0..2 {
                let c = table.get(n, i, j);
                if c.norm() < COEFF_FLOOR {
                    continue;
                }
                terms.push((eps[j] - eps[i] - n as f64 * omega, i, j, c));
            }
        }
    }
    terms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut channels = Vec::new();
    let mut k = 0;
    while k < terms.len() {
        let start = k;
        let mut op = Mat2::zero();
        let mut freq_sum = 0.0;
        while k < terms.len() && terms[k].0 - terms[start].0 <= bin_tol {
            let (f, i, j, c) = terms[k];
            op.0[i][j] += c;
            freq_sum += f;
            k += 1;
        }
        let freq = freq_sum / (k - start) as f64;
        if op.norm_max() < 1e-12 {
            continue;
        }
        let rate = if freq.abs() <= bin_tol {
            bath.rate(0.0) + bath.rate(-0.0)
        } else {
            bath.rate(freq)
        };
        channels.push(JumpChannel {
            operator: op,
            freq,
            rate,
        });
    }
    DissipatorSpec {
        variant: Variant::Generic,
        channels,
        rates: None,
    }
}

/// Dominant harmonic of `c_12` and the transition frequency it implies.
pub fn transition_frequency(table: &CoefficientTable, sol: &FloquetSolution) -> f64 {
    let n_star = table
        .harmonics()
        .max_by(|&a, &b| {
            table
                .get(a, 0, 1)
                .norm()
                .total_cmp(&table.get(b, 0, 1).norm())
                .then(b.abs().cmp(&a.abs()))
        })
        .unwrap_or(0);
    sol.mode_energies[1] - sol.mode_energies[0] - n_star as f64 * sol.drive.omega
}

/// Non-degenerate dissipator: `Σ_+ = |u_1⟩⟨u_2|` at `ω_12`, its adjoint at
/// `−ω_12`, and `c11_abs·Σ_z` with `γz`. `ω_12` is the frequency of the
/// dominant `c_12` harmonic; the channel lowering the higher mode receives
/// `γ↓ = J(Δ)(N(Δ)+1)`.
pub fn build_nondegenerate(
    omega_12: f64,
    drive_omega: f64,
    bath: &BathModel,
    c11_abs: f64,
    threshold: f64,
) -> Result<DissipatorSpec> {
    if omega_12.abs() <= threshold {
        return Err(Error::InvalidParameter(format!(
            "transition frequency {omega_12:.3e} within degeneracy threshold {threshold:.3e}"
        )));
    }
    let r_plus = bath.rate(omega_12);
    let r_minus = bath.rate(-omega_12);
    let (gamma_down, gamma_up) = if omega_12 > 0.0 {
        (r_plus, r_minus)
    } else {
        (r_minus, r_plus)
    };
    let gamma_z = bath.gamma_z(drive_omega);
    let channels = vec![
        JumpChannel {
            operator: Mat2::sigma_plus(),
            freq: omega_12,
            rate: r_plus,
        },
        JumpChannel {
            operator: Mat2::sigma_minus(),
            freq: -omega_12,
            rate: r_minus,
        },
        JumpChannel {
            operator: sigma_z().scale_re(c11_abs),
            freq: drive_omega,
            rate: gamma_z,
        },
    ];
    Ok(DissipatorSpec {
        variant: Variant::NonDegenerate,
        channels,
        rates: Some(SecularRates {
            gamma_down,
            gamma_up,
            gamma_x: 0.0,
            gamma_z,
            c11_abs,
        }),
    })
}

/// Degenerate dissipator: `Σ_x` with `γx = 2α/(βω_c)` and `c11_abs·Σ_z` with `γz`.
pub fn build_degenerate(drive_omega: f64, bath: &BathModel, c11_abs: f64) -> DissipatorSpec {
    let gamma_x = bath.gamma_x();
    let gamma_z = bath.gamma_z(drive_omega);
    DissipatorSpec {
        variant: Variant::Degenerate,
        channels: vec![
            JumpChannel {
                operator: Mat2::sigma_x(),
                freq: 0.0,
                rate: gamma_x,
            },
            JumpChannel {
                operator: sigma_z().scale_re(c11_abs),
                freq: drive_omega,
                rate: gamma_z,
            },
        ],
        rates: Some(SecularRates {
            gamma_down: 0.0,
            gamma_up: 0.0,
            gamma_x,
            gamma_z,
            c11_abs,
        }),
    }
}

/// Closed-form relaxation times of the secular dissipators.
pub fn relaxation_times(spec: &DissipatorSpec) -> Result<RelaxationTimes> {
    let r = spec
        .rates
        .ok_or_else(|| Error::InvalidParameter("relaxation times need a secular spec".into()))?;
    let cz = r.c11_abs * r.c11_abs * r.gamma_z;
    let times = match spec.variant {
        Variant::NonDegenerate => {
            let g = r.gamma_down + r.gamma_up;
            if !(g > 0.0) {
                return Err(Error::InvalidParameter("zero transition rates".into()));
            }
            let off = 1.0 / (0.5 * g + 2.0 * cz);
            RelaxationTimes {
                tau_diag: 1.0 / g,
                tau_offdiag_re: off,
                tau_offdiag_im: off,
                variant: spec.variant,
            }
        }
        Variant::Degenerate => {
            if !(r.gamma_x > 0.0 && cz > 0.0) {
                return Err(Error::InvalidParameter("zero dephasing rates".into()));
            }
            RelaxationTimes {
                tau_diag: 1.0 / r.gamma_x,
                tau_offdiag_re: 1.0 / (2.0 * cz),
                tau_offdiag_im: 1.0 / (2.0 * (r.gamma_x + cz)),
                variant: spec.variant,
            }
        }
        Variant::Generic => {
            return Err(Error::InvalidParameter(
                "relaxation times need a secular spec".into(),
            ))
        }
    };
    Ok(times)
}

/// Integrates `dρ/dt = D[ρ]` from a Floquet-basis initial state. When a
/// Floquet solution is supplied, the lab-frame state is produced as well.
pub fn evolve(
    spec: &DissipatorSpec,
    rho0: &Mat2,
    t_grid: &[f64],
    frame: Option<&FloquetSolution>,
) -> Result<Trajectory> {
    let t0 = *t_grid
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty time grid".into()))?;
    let g = spec.generator();
    let mut y = rho0.to_flat();
    let mut out = Vec::with_capacity(t_grid.len());
    let stats = Dopri5::with_tolerances(1e-10, 1e-13).integrate(
        |_, y, dy| {
            for r in 0..4 {
                dy[r] = g[r][0] * y[0] + g[r][1] * y[1] + g[r][2] * y[2] + g[r][3] * y[3];
            }
        },
        t0,
        &mut y,
        t_grid,
        |_, _, y| {
            out.push(Mat2::from_flat(y));
            true
        },
    )?;
    let lab = frame.map(|sol| {
        t_grid
            .iter()
            .zip(&out)
            .map(|(&t, r)| sol.to_lab_frame(t, r))
            .collect()
    });
    Ok(Trajectory {
        times: t_grid.to_vec(),
        lab,
        floquet: Some(out),
        metadata: serde_json::json!({
            "solver": "lindblad",
            "variant": spec.variant,
            "steps": stats.accepted,
            "rejected": stats.rejected,
        }),
    })
}

/// `Φ_t = exp(t D)` on a uniform grid starting at 0, in the Floquet frame.
pub fn maps(spec: &DissipatorSpec, t_grid: &[f64]) -> Result<DynamicalMaps> {
    let g = spec.generator();
    let gm = nalgebra::Matrix4::<C64>::from_fn(|r, c| g[r][c]);
    let mut out = DynamicalMaps {
        times: Vec::with_capacity(t_grid.len()),
        maps: Vec::with_capacity(t_grid.len()),
    };
    let to_superop = |m: &nalgebra::Matrix4<C64>| {
        let mut a = [[C64::new(0.0, 0.0); 4]; 4];
        for (r, row) in a.iter_mut().enumerate() {
            for (c, z) in row.iter_mut().enumerate() {
                *z = m[(r, c)];
            }
        }
        Superop(a)
    };
    for &t in t_grid {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(
                "map times must be finite and >= 0".into(),
            ));
        }
        out.times.push(t);
        out.maps.push(to_superop(&(gm * C64::new(t, 0.0)).exp()));
    }
    Ok(out)
}

/// Smallest non-zero decay rate of the generator, from the eigenvalues of
/// its Bloch-space restriction.
pub fn slowest_rate(spec: &DissipatorSpec) -> f64 {
    let paulis = [Mat2::sigma_x(), Mat2::sigma_y(), Mat2::sigma_z()];
    let a = nalgebra::Matrix3::<f64>::from_fn(|r, c| {
        0.5 * (paulis[r] * spec.apply(&paulis[c])).trace().re
    });
    a.complex_eigenvalues()
        .iter()
        .map(|z| -z.re)
        .filter(|&r| r > 1e-14)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{auto_n_max, floquet_solve, fourier_coefficients, DriveSpec};
    use approx::assert_relative_eq;

    fn bath() -> BathModel {
        BathModel::default()
    }

    #[test]
    fn degenerate_times_match_closed_form() {
        let spec = build_degenerate(1.0, &bath(), C11_DEFAULT);
        let t = relaxation_times(&spec).unwrap();
        assert_relative_eq!(t.tau_offdiag_re, 115.53, max_relative = 1e-3);
        assert_relative_eq!(t.tau_diag, 5.0, max_relative = 1e-12);
        assert_relative_eq!(t.tau_offdiag_im, 2.447, max_relative = 1e-3);
        assert!(t.tau_offdiag_re / t.tau_diag.max(t.tau_offdiag_im) > 20.0);
    }

    #[test]
    fn nondegenerate_rates() {
        let spec = build_nondegenerate(0.21, 1.0, &bath(), C11_DEFAULT, 0.01).unwrap();
        let r = spec.rates.unwrap();
        assert_relative_eq!(
            r.gamma_up / r.gamma_down,
            (-0.21f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(r.gamma_z, 0.108_198, max_relative = 1e-5);
        let ss = spec.steady_state();
        // Σ_+ lowers |u_2⟩ to |u_1⟩ at positive ω_12, so |u_1⟩ is favoured
        assert_relative_eq!(
            ss.0[1][1].re / ss.0[0][0].re,
            r.gamma_up / r.gamma_down,
            max_relative = 1e-9
        );
        assert!(build_nondegenerate(0.001, 1.0, &bath(), C11_DEFAULT, 0.01).is_err());
    }

    #[test]
    fn degenerate_is_unital() {
        let spec = build_degenerate(1.0, &bath(), C11_DEFAULT);
        let ss = spec.steady_state();
        assert!(ss.approx_eq(&Mat2::identity().scale_re(0.5), 1e-12));
        // pure Σx dephasing keeps the Σx eigenstates fixed
        let spec0 = build_degenerate(1.0, &bath(), 0.0);
        let plus = Mat2::from_real([[0.5, 0.5], [0.5, 0.5]]);
        assert!(spec0.apply(&plus).norm_max() < 1e-15);
    }

    #[test]
    fn evolve_stationary_and_decay() {
        let spec = build_degenerate(1.0, &bath(), C11_DEFAULT);
        let grid: Vec<f64> = (0..=200).map(|k| k as f64).collect();
        let mixed = Mat2::identity().scale_re(0.5);
        let tr = evolve(&spec, &mixed, &grid, None).unwrap();
        for s in tr.floquet.as_ref().unwrap() {
            assert!(s.approx_eq(&mixed, 1e-8));
        }
        let plus = Mat2::from_real([[0.5, 0.5], [0.5, 0.5]]);
        let tr = evolve(&spec, &plus, &grid, None).unwrap();
        let tau = relaxation_times(&spec).unwrap().tau_offdiag_re;
        for (t, s) in tr.times.iter().zip(tr.floquet.as_ref().unwrap()) {
            assert_relative_eq!(s.0[0][1].re, 0.5 * (-t / tau).exp(), max_relative = 1e-7);
        }
        let d = tr.diagnostics();
        assert!(
            d.max_trace_error < 1e-9 && d.max_hermiticity_error < 1e-10 && d.min_eigenvalue > -1e-8
        );
    }

    #[test]
    fn generic_static_limit() {
        let sol = floquet_solve(&DriveSpec::resonant(0.0), 64).unwrap();
        let table = fourier_coefficients(&sol, 4).unwrap();
        let spec = build_generic(&table, &sol, &bath(), 4, 1e-6);
        assert_eq!(spec.channels.len(), 2);
        for ch in &spec.channels {
            assert_relative_eq!(ch.freq.abs(), 1.0, max_relative = 1e-9);
            assert_relative_eq!(ch.rate, bath().rate(ch.freq), max_relative = 1e-12);
            // u_1 = |e⟩, so |u_2⟩⟨u_1| lowers and sits at ω_F = +1
            let lowering = ch.operator.0[1][0].norm() > 0.5;
            assert_eq!(lowering, ch.freq > 0.0);
        }
    }

    #[test]
    fn generic_at_crossing_resembles_degenerate() {
        let search = crate::floquet::CrossingSearch::new(1.0, 4.2, 4.35);
        let star = crate::floquet::find_crossings(&search).unwrap()[0];
        let sol = floquet_solve(&DriveSpec::resonant(star), 512).unwrap();
        let table = fourier_coefficients(&sol, auto_n_max(&sol.drive)).unwrap();
        let spec = build_generic(&table, &sol, &bath(), table.n_max, 1e-3);
        let zero = spec
            .channels
            .iter()
            .find(|c| c.freq.abs() < 1e-3)
            .expect("zero-frequency channel");
        assert_relative_eq!(zero.rate, 0.2, max_relative = 1e-12);
        let a = zero.operator;
        let scale = a.0[0][1].norm();
        assert!((a.0[1][0].norm() - scale).abs() < 1e-6);
        assert!(a.0[0][0].norm() < 1e-6);
    }
}
