//! Floquet analysis of `H_S(t) = (ω₀/2)σz − Ω cos(ωt) σx`.
//!
//! The Hamiltonian satisfies `H(t + T/2) = σz H(t) σz`, hence
//! `U(T) = (σz U(T/2))²`. Floquet modes are taken as eigenvectors of
//! `σz U(T/2)`, which stay well defined and smooth in Ω through the
//! quasienergy crossings (the two modes carry opposite parity there).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Dopri5;
use crate::output::{num, Csv};
use crate::qubit::{change_basis, fix_phase, from_basis, inner, Ket, Mat2};

type C64 = Complex64;

pub const DEFAULT_SAMPLES: usize = 512;
pub const DEFAULT_N_MAX: i32 = 16;

/// Harmonic cutoff large enough for the drive: the mode spectrum extends to
/// roughly `2Ω/ω` harmonics before decaying exponentially.
pub fn auto_n_max(drive: &DriveSpec) -> i32 {
    DEFAULT_N_MAX.max((2.0 * drive.amplitude / drive.omega).ceil() as i32 + 14)
}
pub const DEFAULT_TOL: f64 = 1e-10;
pub const ALIASING_LIMIT: f64 = 1e-3;

fn default_omega() -> f64 {
    1.0
}

/// Drive parameters: splitting `ω₀`, frequency `ω` and amplitude `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    #[serde(default = "default_omega")]
    pub omega0: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(rename = "Omega", default)]
    pub amplitude: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            omega: 1.0,
            amplitude: 0.0,
        }
    }
}

impl DriveSpec {
    /// Drive with `ω₀ = 1`.
    pub fn new(omega: f64, amplitude: f64) -> Self {
        Self {
            omega0: 1.0,
            omega,
            amplitude,
        }
    }

    pub fn resonant(amplitude: f64) -> Self {
        Self::new(1.0, amplitude)
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must be > 0, got {}",
                self.omega
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Omega must be >= 0, got {}",
                self.amplitude
            )));
        }
        if !self.omega0.is_finite() {
            return Err(Error::InvalidParameter("omega0 must be finite".into()));
        }
        Ok(())
    }

    pub fn hamiltonian(&self, t: f64) -> Mat2 {
        let hz = 0.5 * self.omega0;
        let hx = -self.amplitude * (self.omega * t).cos();
        Mat2::from_real([[hz, hx], [hx, -hz]])
    }
}

/// `−i H(t) M` for a row-major 2×2 block.
#[inline]
pub(crate) fn schrodinger_rhs(drive: &DriveSpec, t: f64, y: &[C64], dy: &mut [C64]) {
    let hz = 0.5 * drive.omega0;
    let hx = -drive.amplitude * (drive.omega * t).cos();
    let mi = C64::new(0.0, -1.0);
    for col in 0..2 {
        let a = y[col];
        let b = y[2 + col];
        dy[col] = mi * (a * hz + b * hx);
        dy[2 + col] = mi * (a * hx - b * hz);
    }
}

fn propagator_solver(tol: f64) -> Dopri5 {
    Dopri5::with_tolerances(0.1 * tol, 1e-2 * tol)
}

/// Propagator `U(t1, t0)` from `dU/dt = −iH(t)U`.
pub fn propagate(drive: &DriveSpec, t0: f64, t1: f64, tol: f64) -> Result<Mat2> {
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!("t1 = {t1} < t0 = {t0}")));
    }
    let mut y = Mat2::identity().to_flat();
    propagator_solver(tol).integrate(
        |t, y, dy| schrodinger_rhs(drive, t, y, dy),
        t0,
        &mut y,
        &[t1],
        |_, _, _| true,
    )?;
    Ok(Mat2::from_flat(&y))
}

/// `U(t, 0)` at each of the non-decreasing `times`.
pub fn propagate_samples(drive: &DriveSpec, times: &[f64], tol: f64) -> Result<Vec<Mat2>> {
    let mut y = Mat2::identity().to_flat();
    let mut out = Vec::with_capacity(times.len());
    propagator_solver(tol).integrate(
        |t, y, dy| schrodinger_rhs(drive, t, y, dy),
        0.0,
        &mut y,
        times,
        |_, _, y| {
            out.push(Mat2::from_flat(y));
            true
        },
    )?;
    Ok(out)
}

/// Maps `x` into the half-open zone `[−ω/2, ω/2)`.
pub fn fold(x: f64, omega: f64) -> f64 {
    let mut y = x - omega * ((x + 0.5 * omega) / omega).floor();
    if y >= 0.5 * omega {
        y -= omega;
    }
    if y < -0.5 * omega {
        y += omega;
    }
    y
}

/// Circle distance between two quasienergies modulo `ω`.
pub fn circle_distance(a: f64, b: f64, omega: f64) -> f64 {
    let d = (a - b).rem_euclid(omega);
    d.min(omega - d)
}

/// Closed-system Floquet data for one drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSolution {
    pub drive: DriveSpec,
    /// `(ε₁, ε₂)` in `[−ω/2, ω/2)`.
    pub quasienergies: [f64; 2],
    /// Representatives `ε̃_k ≡ ε_k (mod ω)` used to build the periodic modes.
    /// They equal `quasienergies` except on the zone edge, where mode 1 takes
    /// `+ω/2` so that the static limit has `c^n_12 = δ_{n,0}`.
    pub mode_energies: [f64; 2],
    /// Sample times `t_m = m T / N_t`, `m = 0..N_t`.
    pub times: Vec<f64>,
    /// `modes[k][m] = |u_k(t_m)⟩`.
    pub modes: [Vec<Ket>; 2],
    pub monodromy: Mat2,
    /// True when the half-period map was degenerate and the basis fell back
    /// to the eigenbasis of `H_S(0)`.
    pub degenerate_fallback: bool,
}

impl FloquetSolution {
    pub fn period(&self) -> f64 {
        self.drive.period()
    }

    pub fn samples(&self) -> usize {
        self.times.len()
    }

    /// `|u_k(0)⟩` for both modes.
    pub fn basis(&self) -> [Ket; 2] {
        [self.modes[0][0], self.modes[1][0]]
    }

    pub fn gap(&self) -> f64 {
        circle_distance(
            self.quasienergies[0],
            self.quasienergies[1],
            self.drive.omega,
        )
    }

    /// `|u_k(t)⟩` at an arbitrary time by trigonometric interpolation of the
    /// periodic samples.
    pub fn mode_at(&self, k: usize, t: f64) -> Ket {
        let n = self.samples();
        let tau = t.rem_euclid(self.period());
        let x = self.drive.omega * tau;
        let pos = x * n as f64 / (2.0 * PI);
        if (pos - pos.round()).abs() < 1e-9 {
            return self.modes[k][pos.round() as usize % n];
        }
        let mut out = [C64::new(0.0, 0.0); 2];
        // Dirichlet-kernel interpolation; the Nyquist term is split evenly.
        let half = n / 2;
        for (m, u) in self.modes[k].iter().enumerate() {
            let phi = x - 2.0 * PI * m as f64 / n as f64;
            let w = dirichlet_weight(phi, n, half);
            out[0] += u[0] * w;
            out[1] += u[1] * w;
        }
        out
    }

    /// `U(t) = Σ_k |u_k(t)⟩⟨u_k(0)| e^{−iε_k t}`.
    pub fn unitary_at(&self, t: f64) -> Mat2 {
        let mut u = Mat2::zero();
        for k in 0..2 {
            let ph = C64::new(0.0, -self.mode_energies[k] * t).exp();
            u += Mat2::outer(&self.mode_at(k, t), &self.modes[k][0]).scale(ph);
        }
        u
    }

    /// Floquet-frame (interaction picture) matrix elements of a lab-frame
    /// state: `⟨u_i(0)|U(t)† ρ U(t)|u_j(0)⟩`.
    pub fn to_floquet_frame(&self, t: f64, rho: &Mat2) -> Mat2 {
        let u = [self.mode_at(0, t), self.mode_at(1, t)];
        let mut out = change_basis(rho, &u);
        let d = self.mode_energies[0] - self.mode_energies[1];
        let ph = C64::new(0.0, d * t).exp();
        out.0[0][1] *= ph;
        out.0[1][0] *= ph.conj();
        out
    }

    /// Inverse of [`Self::to_floquet_frame`].
    pub fn to_lab_frame(&self, t: f64, rho_f: &Mat2) -> Mat2 {
        let u = [self.mode_at(0, t), self.mode_at(1, t)];
        let d = self.mode_energies[0] - self.mode_energies[1];
        let ph = C64::new(0.0, -d * t).exp();
        let mut m = *rho_f;
        m.0[0][1] *= ph;
        m.0[1][0] *= ph.conj();
        from_basis(&m, &u)
    }

    /// Swaps the labels of the two modes.
    pub fn swap_labels(&mut self) {
        self.quasienergies.swap(0, 1);
        self.mode_energies.swap(0, 1);
        self.modes.swap(0, 1);
    }
}

/// Real weight of sample `m` in the band-limited interpolant, `phi = ωt − 2πm/N`.
fn dirichlet_weight(phi: f64, n: usize, half: usize) -> C64 {
    let nf = n as f64;
    // reduce first: near ±2π both sines below are tiny and lose precision
    let phi = phi - 2.0 * PI * (phi / (2.0 * PI)).round();
    let s = (0.5 * phi).sin();
    if s.abs() < 1e-14 {
        return C64::new(1.0, 0.0);
    }
    // Σ_{|j|<N/2} e^{ijφ} + cos(Nφ/2) for even N, divided by N.
    let core = if n.is_multiple_of(2) {
        ((half as f64 - 0.5) * phi).sin() / s + (0.5 * nf * phi).cos()
    } else {
        (0.5 * nf * phi).sin() / s
    };
    C64::new(core / nf, 0.0)
}

/// Diagonalizes the one-period map and samples the Floquet modes.
pub fn floquet_solve(drive: &DriveSpec, n_t: usize) -> Result<FloquetSolution> {
    floquet_solve_tol(drive, n_t, DEFAULT_TOL)
}

pub fn floquet_solve_tol(drive: &DriveSpec, n_t: usize, tol: f64) -> Result<FloquetSolution> {
    drive.validate()?;
    if n_t < 64 {
        return Err(Error::InvalidParameter(format!(
            "N_t must be >= 64, got {n_t}"
        )));
    }
    let period = drive.period();
    let times: Vec<f64> = (0..n_t).map(|m| period * m as f64 / n_t as f64).collect();
    let mut out_times = times.clone();
    out_times.push(0.5 * period);
    out_times.push(period);
    out_times.sort_by(f64::total_cmp);
    let all = propagate_samples(drive, &out_times, tol)?;
    let find = |t: f64| -> Mat2 {
        let idx = out_times
            .iter()
            .position(|&s| s == t)
            .expect("requested time present");
        all[idx]
    };
    let u_half = find(0.5 * period);
    let monodromy = find(period);
    let samples: Vec<Mat2> = times.iter().map(|&t| find(t)).collect();

    let half_map = Mat2::sigma_z() * u_half;
    let (_, vecs, gap) = half_map.normal_eigen();
    let (mut basis, degenerate_fallback) = if gap > 1e-10 {
        (vecs, false)
    } else {
        let (_, v, _) = drive.hamiltonian(0.0).normal_eigen();
        (v, true)
    };
    // u₁ is the mode closest to |e⟩; ties resolved by the first component's phase order.
    if basis[1][0].norm() > basis[0][0].norm() + 1e-12 {
        basis.swap(0, 1);
    }
    let basis = [fix_phase(&basis[0]), fix_phase(&basis[1])];
    let mut quasienergies = [0.0; 2];
    for k in 0..2 {
        let lam = monodromy.sandwich(&basis[k], &basis[k]);
        quasienergies[k] = fold(-lam.arg() / period, drive.omega);
    }
    let mut mode_energies = quasienergies;
    let edge = 0.5 * drive.omega;
    for (k, sign) in [(0, 1.0), (1, -1.0)] {
        if circle_distance(mode_energies[k], edge, drive.omega) < 1e-9 {
            mode_energies[k] = sign * edge;
        }
    }
    let modes = [0, 1].map(|k| {
        samples
            .iter()
            .zip(&times)
            .map(|(u, &t)| {
                let v = u.apply(&basis[k]);
                let ph = C64::new(0.0, mode_energies[k] * t).exp();
                [v[0] * ph, v[1] * ph]
            })
            .collect::<Vec<Ket>>()
    });
    Ok(FloquetSolution {
        drive: *drive,
        quasienergies,
        mode_energies,
        times,
        modes,
        monodromy,
        degenerate_fallback,
    })
}

/// Relabels a sequence of solutions (ordered in Ω) so that each mode follows
/// the state with maximal overlap at the previous grid point.
pub fn label_continuation(solutions: &mut [FloquetSolution]) -> Result<()> {
    let threshold = std::f64::consts::FRAC_1_SQRT_2 - 1e-9;
    for m in 1..solutions.len() {
        let prev = solutions[m - 1].basis();
        let cur = solutions[m].basis();
        let o = |a: usize, b: usize| inner(&prev[a], &cur[b]).norm();
        let keep = o(0, 0) + o(1, 1);
        let swap = o(0, 1) + o(1, 0);
        let (a, b) = if swap > keep {
            solutions[m].swap_labels();
            (o(0, 1), o(1, 0))
        } else {
            (o(0, 0), o(1, 1))
        };
        if a < threshold && b < threshold {
            return Err(Error::AmbiguousLabels(m));
        }
    }
    Ok(())
}

/// Fourier components `c^n_{ij}` of `σx` in the Floquet basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub n_max: i32,
    /// `entries[n + n_max][i][j]`, zero-based labels.
    pub entries: Vec<[[C64; 2]; 2]>,
}

impl CoefficientTable {
    pub fn get(&self, n: i32, i: usize, j: usize) -> C64 {
        if n.abs() > self.n_max {
            return C64::new(0.0, 0.0);
        }
        self.entries[(n + self.n_max) as usize][i][j]
    }

    pub fn harmonics(&self) -> impl Iterator<Item = i32> + '_ {
        -self.n_max..=self.n_max
    }

    pub fn parseval_sum(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.iter().flatten())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// `max |c^n_{ij} − (c^{−n}_{ji})*|`.
    pub fn conjugation_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for n in self.harmonics() {
            for i in 0..2 {
                for j in 0..2 {
                    err = err.max((self.get(n, i, j) - self.get(-n, j, i).conj()).norm());
                }
            }
        }
        err
    }

    /// `max |c^n_11 + c^n_22|`.
    pub fn diagonal_relation_error(&self) -> f64 {
        self.harmonics()
            .map(|n| (self.get(n, 0, 0) + self.get(n, 1, 1)).norm())
            .fold(0.0, f64::max)
    }

    /// `max |c^n_12 − (c^n_21)*|`.
    pub fn offdiagonal_relation_error(&self) -> f64 {
        self.harmonics()
            .map(|n| (self.get(n, 0, 1) - self.get(n, 1, 0).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|c^n_{ij}|` over the listed `(n, i, j)` complement.
    pub fn max_excluding(&self, i: usize, j: usize, skip: &[i32]) -> f64 {
        self.harmonics()
            .filter(|n| !skip.contains(n))
            .map(|n| self.get(n, i, j).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["n", "re_c11", "im_c11", "re_c12", "im_c12"]);
        for n in self.harmonics() {
            let (a, b) = (self.get(n, 0, 0), self.get(n, 0, 1));
            csv.push(vec![
                n.to_string(),
                num(a.re),
                num(a.im),
                num(b.re),
                num(b.im),
            ]);
        }
        csv
    }
}

/// Discrete Fourier transform of `⟨u_i(t)|σx|u_j(t)⟩` over one period.
pub fn fourier_coefficients(sol: &FloquetSolution, n_max: i32) -> Result<CoefficientTable> {
    let n_t = sol.samples();
    if n_max < 0 || n_t < 4 * n_max as usize {
        return Err(Error::InvalidParameter(format!(
            "need N_t >= 4 n_max (N_t = {n_t}, n_max = {n_max})"
        )));
    }
    let sx = Mat2::sigma_x();
    let elems: Vec<[[C64; 2]; 2]> = (0..n_t)
        .map(|m| {
            let u = [sol.modes[0][m], sol.modes[1][m]];
            [0, 1].map(|i| [0, 1].map(|j| sx.sandwich(&u[i], &u[j])))
        })
        .collect();
    let entries: Vec<[[C64; 2]; 2]> = (-n_max..=n_max)
        .map(|n| {
            let mut acc = [[C64::new(0.0, 0.0); 2]; 2];
            for (m, e) in elems.iter().enumerate() {
                // reduce the phase index mod N_t to keep the argument small
                let k = (n as i64 * m as i64).rem_euclid(n_t as i64);
                let w = C64::from_polar(1.0, -2.0 * PI * k as f64 / n_t as f64);
                for i in 0..2 {
                    for j in 0..2 {
                        acc[i][j] += e[i][j] * w;
                    }
                }
            }
            acc.map(|r| r.map(|z| z / n_t as f64))
        })
        .collect();
    let table = CoefficientTable { n_max, entries };
    if n_max > 0 {
        let edge = [n_max, -n_max]
            .iter()
            .flat_map(|&n| [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(i, j)| table.get(n, i, j).norm()))
            .fold(0.0, f64::max);
        if edge > ALIASING_LIMIT {
            return Err(Error::Aliasing {
                n_max,
                magnitude: edge,
            });
        }
    }
    Ok(table)
}

/// Quasienergy gap modulo `ω`, from the eigenphases of `U(T)`.
pub fn quasienergy_gap(drive: &DriveSpec) -> Result<f64> {
    drive.validate()?;
    let period = drive.period();
    let u_half = propagate(drive, 0.0, 0.5 * period, DEFAULT_TOL)?;
    let h = Mat2::sigma_z() * u_half;
    let (lam, _, _) = h.normal_eigen();
    // eigenvalues of U(T) are the squares of those of σz U(T/2)
    let rel = (lam[0] * lam[0]) * (lam[1] * lam[1]).conj();
    Ok(rel.arg().abs() / period)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingSearch {
    pub omega: f64,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub detect_below: f64,
    pub refine_tol: f64,
}

impl CrossingSearch {
    pub fn new(omega: f64, start: f64, stop: f64) -> Self {
        Self {
            omega,
            start,
            stop,
            step: 0.01,
            detect_below: 0.05,
            refine_tol: 1e-4,
        }
    }
}

/// Uniform grid `start, start + step, …` up to `stop` (inclusive within
/// rounding). Points are rounded to 12 significant digits so that `4.3`
/// comes out as `4.3` and not `4.300000000000001`.
pub fn amplitude_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n)
        .map(|i| {
            let x = start + step * i as f64;
            format!("{x:.11e}").parse().unwrap_or(x)
        })
        .collect()
}

/// Locates quasienergy crossings in `[start, stop]` at fixed `ω`.
pub fn find_crossings(search: &CrossingSearch) -> Result<Vec<f64>> {
    let s = search;
    if !(s.step > 0.0 && s.stop >= s.start && s.start >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid crossing search range [{}, {}] step {}",
            s.start, s.stop, s.step
        )));
    }
    let grid = amplitude_grid(s.start, s.stop, s.step);
    let gap_at = |a: f64| quasienergy_gap(&DriveSpec::new(s.omega, a));
    let gaps: Vec<f64> = grid.par_iter().map(|&a| gap_at(a)).collect::<Result<_>>()?;
    let mut found: Vec<f64> = Vec::new();
    for i in 0..grid.len() {
        let left = if i > 0 { gaps[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < grid.len() {
            gaps[i + 1]
        } else {
            f64::INFINITY
        };
        if !(gaps[i] < s.detect_below && gaps[i] <= left && gaps[i] < right) {
            continue;
        }
        let lo = if i > 0 { grid[i - 1] } else { grid[i] };
        let hi = if i + 1 < grid.len() {
            grid[i + 1]
        } else {
            grid[i]
        };
        let (x, g) = golden_minimize(gap_at, lo, hi, 1e-9)?;
        if g < s.refine_tol && found.last().is_none_or(|&p| x - p > 0.5 * s.step) {
            found.push(x);
        } else if g >= s.refine_tol {
            log::debug!("avoided crossing near Omega = {x:.4}: gap {g:.3e}");
        }
    }
    Ok(found)
}

fn golden_minimize<F: Fn(f64) -> Result<f64>>(
    f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    Ok((x, fx))
}

/// One quasienergy row per amplitude: `(Ω, ε₁, ε₂, gap)`.
pub fn quasienergy_csv(solutions: &[FloquetSolution]) -> Csv {
    let mut csv = Csv::new(&["Omega", "eps1", "eps2", "gap"]);
    for s in solutions {
        csv.push_numbers(&[
            s.drive.amplitude,
            s.quasienergies[0],
            s.quasienergies[1],
            s.gap(),
        ]);
    }
    csv
}

/// Solves a whole amplitude grid in parallel, then relabels sequentially.
pub fn solve_grid(
    drive: &DriveSpec,
    amplitudes: &[f64],
    n_t: usize,
) -> Result<Vec<FloquetSolution>> {
    let mut sols: Vec<FloquetSolution> = amplitudes
        .par_iter()
        .map(|&a| floquet_solve(&drive.with_amplitude(a), n_t))
        .collect::<Result<_>>()?;
    label_continuation(&mut sols)?;
    Ok(sols)
}
