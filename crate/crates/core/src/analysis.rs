//! Trace-distance backflow, envelope relaxation fits, and amplitude sweeps
//! that compare both against quasienergy crossings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::BathModel;
use crate::error::{Error, Result};
use crate::floquet::{
    auto_n_max, find_crossings, floquet_solve, fourier_coefficients, CrossingSearch, DriveSpec,
    FloquetSolution,
};
use crate::heom::{heom_propagator, HeomDiagnostics, HeomSettings};
use crate::lindblad::{build_generic, slowest_rate};
use crate::maps::{spectral_norm3, DynamicalMaps};
use crate::output::{num, Csv};
use crate::qubit::{
    change_basis, from_basis, random_orthogonal_pair, task_rng, trace_norm_half, BlochVector, Mat2,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDistanceCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub pair: (Mat2, Mat2),
}

/// `D_t = ½‖Φ_t ρᴬ − Φ_t ρᴮ‖₁` for every snapshot.
pub fn trace_distance_curve(maps: &DynamicalMaps, a: &Mat2, b: &Mat2) -> TraceDistanceCurve {
    let values = maps
        .maps
        .iter()
        .map(|m| trace_norm_half(&(m.apply(a) - m.apply(b))).min(1.0))
        .collect();
    TraceDistanceCurve {
        times: maps.times.clone(),
        values,
        pair: (*a, *b),
    }
}

/// Sum of positive increments of a sampled curve.
pub fn positive_increments(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

/// Backflow `∫_{Ḋ>0} Ḋ dt` of one pair, on the curve's own grid.
pub fn blp_measure(curve: &TraceDistanceCurve) -> f64 {
    positive_increments(&curve.values)
}

/// `|M_t n̂|`: trace distance of the antipodal pure pair along `n̂`.
pub fn axis_curve(bloch: &[[[f64; 3]; 3]], n: [f64; 3]) -> Vec<f64> {
    bloch
        .iter()
        .map(|m| {
            let v: [f64; 3] =
                std::array::from_fn(|r| m[r][0] * n[0] + m[r][1] * n[1] + m[r][2] * n[2]);
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonMarkovianityResult {
    pub value: f64,
    pub best_pair: (Mat2, Mat2),
    pub best_bloch_axis: [f64; 3],
    pub best_index: usize,
    pub samples: usize,
}

/// Random search over antipodal pure pairs. Pair `k` is the `k`-th draw of
/// stream `stream` under `seed`, so smaller samples are prefixes of larger
/// ones. Ties go to the lowest index.
pub fn maximize_nonmarkovianity(
    maps: &DynamicalMaps,
    n_pairs: usize,
    seed: u64,
    stream: u64,
) -> Result<NonMarkovianityResult> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be >= 1".into()));
    }
    let mut rng = task_rng(seed, stream);
    let axes: Vec<[f64; 3]> = (0..n_pairs)
        .map(|_| random_orthogonal_pair(&mut rng).2.to_array())
        .collect();
    Ok(best_of_axes(maps, &axes))
}

/// Evaluates the backflow of a fixed list of axes.
pub fn best_of_axes(maps: &DynamicalMaps, axes: &[[f64; 3]]) -> NonMarkovianityResult {
    let bloch = maps.bloch_matrices();
    let values: Vec<f64> = axes
        .par_iter()
        .map(|&n| positive_increments(&axis_curve(&bloch, n)))
        .collect();
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    let n = axes[best];
    let bv = BlochVector::new(n[0], n[1], n[2]);
    let minus = BlochVector::new(-n[0], -n[1], -n[2]);
    NonMarkovianityResult {
        value: values[best],
        best_pair: (bv.to_matrix(), minus.to_matrix()),
        best_bloch_axis: n,
        best_index: best,
        samples: axes.len(),
    }
}

/// Angle in degrees between two unsigned axes.
pub fn axis_angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let c = ((a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb)).abs();
    c.min(1.0).acos().to_degrees()
}

/// Lab-frame Bloch axis of the `Σx` eigenstates at `t = 0`.
pub fn sigma_x_axis(sol: &FloquetSolution) -> [f64; 3] {
    let plus = Mat2::from_real([[0.5, 0.5], [0.5, 0.5]]);
    BlochVector::from_matrix(&from_basis(&plus, &sol.basis())).to_array()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau: f64,
    pub r_squared: f64,
    pub points: usize,
    /// True when too few strict maxima were found and every running-maximum
    /// sample was used instead.
    pub monotone_fallback: bool,
}

/// Fewest envelope samples accepted by [`fit_decay`]. Slow beats near a
/// crossing can leave only two or three maxima in the window, and a line
/// through those says little about the decay.
pub const MIN_ENVELOPE_POINTS: usize = 5;

/// Envelope samples of a non-negative deviation: strict local maxima that
/// also exceed every later value and lie above `floor`. With fewer than
/// [`MIN_ENVELOPE_POINTS`] such maxima, every sample above `floor` that
/// exceeds all later values is returned.
pub fn envelope_points(dev: &[f64], floor: f64) -> (Vec<usize>, bool) {
    let n = dev.len();
    let mut record = vec![false; n];
    let mut running = f64::NEG_INFINITY;
    for k in (0..n).rev() {
        if dev[k] > running {
            record[k] = true;
            running = dev[k];
        }
    }
    let peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&k| record[k] && dev[k] > dev[k - 1] && dev[k] >= dev[k + 1] && dev[k] > floor)
        .collect();
    if peaks.len() >= MIN_ENVELOPE_POINTS {
        return (peaks, false);
    }
    let all = (0..n).filter(|&k| record[k] && dev[k] > floor).collect();
    (all, true)
}

/// Log-linear least-squares fit of the envelope of `dev(t)`.
pub fn fit_decay(times: &[f64], dev: &[f64], floor: f64) -> Result<DecayFit> {
    let (pts, fallback) = envelope_points(dev, floor);
    if pts.len() < MIN_ENVELOPE_POINTS {
        return Err(Error::Fit(format!(
            "{} envelope points above noise floor {floor:.2e}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|&k| times[k]).collect();
    let ys: Vec<f64> = pts.iter().map(|&k| dev[k].ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("envelope points span zero time".into()));
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Fit(format!(
            "envelope does not decay (slope {slope:.3e})"
        )));
    }
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(DecayFit {
        tau: -1.0 / slope,
        r_squared,
        points: pts.len(),
        monotone_fallback: fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementFit {
    pub element: String,
    pub fit: Option<DecayFit>,
    pub note: Option<String>,
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    pub elements: Vec<ElementFit>,
    pub tau: f64,
    pub tau_element: String,
}

type Element = fn(&Mat2) -> f64;

const REFERENCE_PERIODS: usize = 5;
const DYNAMIC_RANGE: f64 = 1e-3;

/// Fits `τ` for the population `ρ₁₁`, `Re ρ₁₂` and `Im ρ₁₂`. The grid must
/// be uniform with `samples_per_period` points per drive period; the
/// periodic reference is the phase-wise mean over the last five periods.
pub fn fit_relaxation_time(
    times: &[f64],
    states: &[Mat2],
    samples_per_period: usize,
) -> Result<RelaxationFit> {
    let m = samples_per_period;
    let n = states.len();
    if m == 0 || n != times.len() || n < (REFERENCE_PERIODS + 2) * m {
        return Err(Error::Fit(format!(
            "need at least {} samples on a uniform grid, got {n}",
            (REFERENCE_PERIODS + 2) * m
        )));
    }
    let ref_start = n - REFERENCE_PERIODS * m;
    let elements: [(&str, Element); 3] = [
        ("rho11", |r| r.0[0][0].re),
        ("re_rho12", |r| r.0[0][1].re),
        ("im_rho12", |r| r.0[0][1].im),
    ];
    let mut fits = Vec::new();
    for (name, get) in elements {
        let x: Vec<f64> = states.iter().map(get).collect();
        let mut reference = vec![0.0; m];
        let mut counts = vec![0usize; m];
        for (k, &v) in x.iter().enumerate().skip(ref_start) {
            reference[k % m] += v;
            counts[k % m] += 1;
        }
        for (r, c) in reference.iter_mut().zip(&counts) {
            *r /= *c as f64;
        }
        let dev: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, v)| (v - reference[k % m]).abs())
            .collect();
        let noise = dev[ref_start..].iter().cloned().fold(0.0, f64::max);
        // skip the first period of bath transients
        let window = m..ref_start;
        // The reference still carries the tail of the decay; stopping three
        // decades below the peak keeps that bias under a fraction of a percent.
        let peak = dev[window.clone()].iter().cloned().fold(0.0, f64::max);
        let floor = (10.0 * noise).max(1e-10).max(DYNAMIC_RANGE * peak);
        let fit = if peak <= (10.0 * noise).max(1e-10) {
            Err(Error::Fit("element not excited above noise floor".into()))
        } else {
            fit_decay(&times[window.clone()], &dev[window], floor)
        };
        let (fit, note) = match fit {
            Ok(f) => (Some(f), None),
            Err(e) => {
                log::debug!("relaxation fit skipped for {name}: {e}");
                (None, Some(e.to_string()))
            }
        };
        fits.push(ElementFit {
            element: name.to_string(),
            fit,
            note,
            noise_floor: floor,
        });
    }
    let best = fits
        .iter()
        .filter_map(|e| e.fit.map(|f| (f.tau, e.element.clone())))
        .fold(None, |acc: Option<(f64, String)>, x| match acc {
            Some(a) if a.0 >= x.0 => Some(a),
            _ => Some(x),
        });
    let (tau, tau_element) = best.ok_or_else(|| Error::Fit("no element could be fitted".into()))?;
    Ok(RelaxationFit {
        elements: fits,
        tau,
        tau_element,
    })
}

/// `⟨u_i(t)|ρ(t)|u_j(t)⟩`: Floquet-basis elements in the co-moving frame,
/// where the asymptotic state is exactly `T`-periodic.
pub fn comoving_states(sol: &FloquetSolution, times: &[f64], lab: &[Mat2]) -> Vec<Mat2> {
    times
        .iter()
        .zip(lab)
        .map(|(&t, r)| change_basis(r, &[sol.mode_at(0, t), sol.mode_at(1, t)]))
        .collect()
}

fn default_n_pairs() -> usize {
    1000
}
fn default_dt_factor() -> usize {
    40
}
fn default_horizon_factor() -> f64 {
    10.0
}
fn default_max_horizon() -> f64 {
    2500.0
}
fn default_min_periods() -> usize {
    20
}
fn default_nm_floor() -> f64 {
    1e-3
}
fn default_fit_floor() -> f64 {
    1e-5
}
fn default_samples() -> usize {
    crate::floquet::DEFAULT_SAMPLES
}
fn default_sweep_heom() -> HeomSettings {
    HeomSettings {
        pade_terms: Some(2),
        ..HeomSettings::default()
    }
}

/// Per-amplitude pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default = "default_n_pairs")]
    pub n_pairs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Trace-distance samples per drive period.
    #[serde(default = "default_dt_factor")]
    pub dt_factor: usize,
    /// Horizon in units of the slowest analytic relaxation time.
    #[serde(default = "default_horizon_factor")]
    pub horizon_factor: f64,
    #[serde(default = "default_max_horizon")]
    pub max_horizon: f64,
    #[serde(default = "default_min_periods")]
    pub min_periods: usize,
    /// Backflow is accumulated until `‖M_t‖₂` drops below this.
    #[serde(default = "default_nm_floor")]
    pub nm_floor: f64,
    /// Propagation stops once `‖M_t‖₂` drops below this.
    #[serde(default = "default_fit_floor")]
    pub fit_floor: f64,
    #[serde(default = "default_samples")]
    pub floquet_samples: usize,
    #[serde(default = "default_sweep_heom")]
    pub heom: HeomSettings,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            n_pairs: default_n_pairs(),
            seed: 0,
            dt_factor: default_dt_factor(),
            horizon_factor: default_horizon_factor(),
            max_horizon: default_max_horizon(),
            min_periods: default_min_periods(),
            nm_floor: default_nm_floor(),
            fit_floor: default_fit_floor(),
            floquet_samples: default_samples(),
            heom: default_sweep_heom(),
        }
    }
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_pairs == 0 {
            return bad("n_pairs must be >= 1");
        }
        if self.dt_factor < 4 {
            return bad("dt_factor must be >= 4");
        }
        if !(self.horizon_factor > 0.0 && self.max_horizon > 0.0) {
            return bad("horizon settings must be positive");
        }
        if !(self.nm_floor > 0.0 && self.fit_floor > 0.0 && self.fit_floor <= self.nm_floor) {
            return bad("need 0 < fit_floor <= nm_floor");
        }
        if self.heom.tier == 0 || !(self.heom.rtol > 0.0 && self.heom.atol > 0.0) {
            return bad("heom tier and tolerances must be positive");
        }
        Ok(())
    }
}

/// Result of the full pipeline at one amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub amplitude: f64,
    pub nonmarkovianity: NonMarkovianityResult,
    pub sigma_x_axis: [f64; 3],
    pub axis_angle_deg: f64,
    pub gap: f64,
    pub tau: f64,
    pub fit: RelaxationFit,
    pub lab_fit: Option<RelaxationFit>,
    pub tau_estimate: f64,
    pub horizon: f64,
    pub nm_horizon: f64,
    pub heom: HeomDiagnostics,
    pub curve: TraceDistanceCurve,
}

/// Initial state for the relaxation fit: Bloch vector `(1,1,1)/√3` in the
/// Floquet basis, so every element is excited.
pub fn fit_initial_state(sol: &FloquetSolution) -> Mat2 {
    let s = 1.0 / 3f64.sqrt();
    from_basis(&BlochVector::new(s, s, s).to_matrix(), &sol.basis())
}

/// Runs propagator, backflow search and relaxation fit at one amplitude.
pub fn sweep_point(
    drive: &DriveSpec,
    bath: &BathModel,
    settings: &SweepSettings,
    index: usize,
) -> Result<SweepPoint> {
    let sol = floquet_solve(drive, settings.floquet_samples)?;
    let table = fourier_coefficients(&sol, auto_n_max(drive))?;
    let generic = build_generic(&table, &sol, bath, table.n_max, 1e-6);
    let c11 = table.get(1, 0, 0).norm();
    let tau_deg = 1.0 / (2.0 * c11 * c11 * bath.gamma_z(drive.omega));
    let tau_estimate = (1.0 / slowest_rate(&generic)).max(tau_deg);
    let period = drive.period();
    let m = settings.dt_factor;
    let min_t = (settings.min_periods + REFERENCE_PERIODS) as f64 * period;
    let horizon = (settings.horizon_factor * tau_estimate)
        .min(settings.max_horizon)
        .max(min_t);
    let steps = (horizon / period * m as f64).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * period / m as f64).collect();

    let floor = settings.fit_floor;
    let (maps, heom) = heom_propagator(drive, bath, &settings.heom, &grid, |t, phi| {
        t < min_t || spectral_norm3(&phi.bloch_affine().0) >= floor
    })?;
    let bloch = maps.bloch_matrices();
    let nm_end = bloch
        .iter()
        .position(|b| spectral_norm3(b) < settings.nm_floor)
        .map_or(maps.len(), |k| k + 1);
    let nm_maps = DynamicalMaps {
        times: maps.times[..nm_end].to_vec(),
        maps: maps.maps[..nm_end].to_vec(),
    };
    let nonmarkovianity =
        maximize_nonmarkovianity(&nm_maps, settings.n_pairs, settings.seed, index as u64)?;
    let (a, b) = nonmarkovianity.best_pair;
    let curve = trace_distance_curve(&nm_maps, &a, &b);
    let x_axis = sigma_x_axis(&sol);

    let rho0 = fit_initial_state(&sol);
    let lab: Vec<Mat2> = maps.maps.iter().map(|phi| phi.apply(&rho0)).collect();
    let flq = comoving_states(&sol, &maps.times, &lab);
    let fit = fit_relaxation_time(&maps.times, &flq, m)?;
    let lab_fit = fit_relaxation_time(&maps.times, &lab, m).ok();
    Ok(SweepPoint {
        index,
        amplitude: drive.amplitude,
        axis_angle_deg: axis_angle_deg(nonmarkovianity.best_bloch_axis, x_axis),
        nonmarkovianity,
        sigma_x_axis: x_axis,
        gap: sol.gap(),
        tau: fit.tau,
        fit,
        lab_fit,
        tau_estimate,
        horizon: *maps.times.last().unwrap_or(&0.0),
        nm_horizon: *nm_maps.times.last().unwrap_or(&0.0),
        heom,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub index: usize,
    pub amplitude: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub omega_grid: Vec<f64>,
    pub n: Vec<f64>,
    pub tau: Vec<f64>,
    pub gap: Vec<f64>,
    pub n_peaks: Vec<f64>,
    pub tau_peaks: Vec<f64>,
    pub crossings: Vec<f64>,
    pub step: f64,
    pub points: Vec<Option<SweepPoint>>,
    pub failures: Vec<SweepFailure>,
}

/// Runs [`sweep_point`] over `amplitudes` (in parallel, merged in grid
/// order), then detects peaks and locates crossings with `search`.
pub fn sweep(
    drive: &DriveSpec,
    amplitudes: &[f64],
    bath: &BathModel,
    settings: &SweepSettings,
    search: &CrossingSearch,
) -> Result<SweepResult> {
    settings.validate()?;
    bath.validate()?;
    drive.validate()?;
    let outcomes: Vec<Result<SweepPoint>> = amplitudes
        .par_iter()
        .enumerate()
        .map(|(k, &a)| {
            let r = sweep_point(&drive.with_amplitude(a), bath, settings, k);
            match &r {
                Ok(p) => log::info!(
                    "Omega = {a:.4}: N = {:.4e}, tau = {:.3}, horizon {:.0} ({:.1} s)",
                    p.nonmarkovianity.value,
                    p.tau,
                    p.horizon,
                    p.heom.wall_seconds
                ),
                Err(e) => log::warn!("Omega = {a:.4} failed: {e}"),
            }
            r
        })
        .collect();
    let mut points = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (k, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(p) => points.push(Some(p)),
            Err(e) => {
                failures.push(SweepFailure {
                    index: k,
                    amplitude: amplitudes[k],
                    error: e.to_string(),
                });
                points.push(None);
            }
        }
    }
    let pick = |f: fn(&SweepPoint) -> f64| -> Vec<f64> {
        points
            .iter()
            .map(|p| p.as_ref().map_or(f64::NAN, f))
            .collect()
    };
    let n = pick(|p| p.nonmarkovianity.value);
    let tau = pick(|p| p.tau);
    let gap = pick(|p| p.gap);
    let n_peaks = detect_peaks(&n)
        .into_iter()
        .map(|k| amplitudes[k])
        .collect();
    let tau_peaks = detect_peaks(&tau)
        .into_iter()
        .map(|k| amplitudes[k])
        .collect();
    let (lo, hi) = amplitudes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| {
            (l.min(a), h.max(a))
        });
    let crossings = if amplitudes.len() > 1 {
        find_crossings(search)?
    } else {
        Vec::new()
    };
    let step = if amplitudes.len() > 1 {
        (hi - lo) / (amplitudes.len() - 1) as f64
    } else {
        0.0
    };
    Ok(SweepResult {
        omega_grid: amplitudes.to_vec(),
        n,
        tau,
        gap,
        n_peaks,
        tau_peaks,
        crossings,
        step,
        points,
        failures,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Modified z-score above which a local maximum counts as a peak.
pub const PEAK_Z: f64 = 3.5;

/// Interior local maxima whose modified z-score `0.6745 (x - median) / MAD`
/// exceeds [`PEAK_Z`]. Non-finite entries are ignored and never count as
/// peaks.
pub fn detect_peaks(values: &[f64]) -> Vec<usize> {
    let mut finite: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    if finite.len() < 3 {
        return Vec::new();
    }
    let med = median(&mut finite);
    let mut dev: Vec<f64> = finite.iter().map(|v| (v - med).abs()).collect();
    let threshold = med + PEAK_Z / 0.6745 * median(&mut dev);
    (1..values.len() - 1)
        .filter(|&k| {
            let (l, c, r) = (values[k - 1], values[k], values[k + 1]);
            c.is_finite() && c > threshold && !(l >= c) && !(r > c)
        })
        .collect()
}

impl SweepResult {
    /// `Omega, N, tau, gap, is_N_peak, is_tau_peak, nearest_crossing`.
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&[
            "Omega",
            "N",
            "tau",
            "gap",
            "is_N_peak",
            "is_tau_peak",
            "nearest_crossing",
        ]);
        let near = self.nearest_crossing();
        for (k, &a) in self.omega_grid.iter().enumerate() {
            let flag = |peaks: &[f64]| if peaks.contains(&a) { "1" } else { "0" }.to_string();
            csv.push(vec![
                num(a),
                num(self.n[k]),
                num(self.tau[k]),
                num(self.gap[k]),
                flag(&self.n_peaks),
                flag(&self.tau_peaks),
                num(near[k]),
            ]);
        }
        csv
    }

    /// Closest crossing to each grid point, `NaN` without crossings.
    pub fn nearest_crossing(&self) -> Vec<f64> {
        self.omega_grid
            .iter()
            .map(|&a| {
                self.crossings
                    .iter()
                    .cloned()
                    .min_by(|x, y| (x - a).abs().total_cmp(&(y - a).abs()))
                    .unwrap_or(f64::NAN)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRow {
    pub crossing: f64,
    pub n_peak: Option<f64>,
    pub tau_peak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub max_distance: f64,
    pub rows: Vec<CorrespondenceRow>,
    pub unmatched_crossings_n: Vec<f64>,
    pub unmatched_crossings_tau: Vec<f64>,
    pub unmatched_n_peaks: Vec<f64>,
    pub unmatched_tau_peaks: Vec<f64>,
}

impl CorrespondenceReport {
    /// Every crossing matched in both families and no stray peaks.
    pub fn one_to_one(&self) -> bool {
        !self.rows.is_empty()
            && self.unmatched_crossings_n.is_empty()
            && self.unmatched_crossings_tau.is_empty()
            && self.unmatched_n_peaks.is_empty()
            && self.unmatched_tau_peaks.is_empty()
    }
}

/// Greedy nearest matching: candidate pairs within `max_distance` are taken
/// in order of increasing distance.
pub fn greedy_match(a: &[f64], b: &[f64], max_distance: f64) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let d = (x - y).abs();
            if d <= max_distance {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let (mut ua, mut ub) = (vec![false; a.len()], vec![false; b.len()]);
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !ua[i] && !ub[j] {
            ua[i] = true;
            ub[j] = true;
            out.push((i, j));
        }
    }
    out.sort();
    out
}

/// Matches crossings to both peak families within `2·ΔΩ`.
pub fn correspondence_report(result: &SweepResult) -> CorrespondenceReport {
    let max_distance = 2.0 * result.step;
    let c = &result.crossings;
    let mn = greedy_match(c, &result.n_peaks, max_distance);
    let mt = greedy_match(c, &result.tau_peaks, max_distance);
    let rows = c
        .iter()
        .enumerate()
        .map(|(i, &x)| CorrespondenceRow {
            crossing: x,
            n_peak: mn.iter().find(|p| p.0 == i).map(|p| result.n_peaks[p.1]),
            tau_peak: mt.iter().find(|p| p.0 == i).map(|p| result.tau_peaks[p.1]),
        })
        .collect::<Vec<_>>();
    let unmatched = |vals: &[f64], used: &[usize]| -> Vec<f64> {
        vals.iter()
            .enumerate()
            .filter(|(k, _)| !used.contains(k))
            .map(|(_, &v)| v)
            .collect()
    };
    let cn: Vec<usize> = mn.iter().map(|p| p.0).collect();
    let ct: Vec<usize> = mt.iter().map(|p| p.0).collect();
    let pn: Vec<usize> = mn.iter().map(|p| p.1).collect();
    let pt: Vec<usize> = mt.iter().map(|p| p.1).collect();
    CorrespondenceReport {
        max_distance,
        unmatched_crossings_n: unmatched(c, &cn),
        unmatched_crossings_tau: unmatched(c, &ct),
        unmatched_n_peaks: unmatched(&result.n_peaks, &pn),
        unmatched_tau_peaks: unmatched(&result.tau_peaks, &pt),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Superop;
    use approx::assert_relative_eq;

    #[test]
    fn increments_by_hand() {
        assert_eq!(positive_increments(&[1.0, 0.2, 0.5, 0.1, 0.3]), 0.5);
        assert_eq!(positive_increments(&[1.0, 0.8, 0.5]), 0.0);
        assert_eq!(positive_increments(&[]), 0.0);
    }

    #[test]
    fn identity_maps_keep_distance() {
        let maps = DynamicalMaps {
            times: vec![0.0, 1.0, 2.0],
            maps: vec![Superop::identity(); 3],
        };
        let a = BlochVector::new(0.0, 0.0, 1.0).to_matrix();
        let b = BlochVector::new(0.6, 0.0, 0.0).to_matrix();
        let c = trace_distance_curve(&maps, &a, &b);
        for v in &c.values {
            assert_relative_eq!(*v, c.values[0], epsilon = 1e-15);
        }
        assert_eq!(blp_measure(&trace_distance_curve(&maps, &a, &a)), 0.0);
        let r = maximize_nonmarkovianity(&maps, 10, 1, 0).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn synthetic_backflow_matches_quadrature() {
        let sampled = |dt: f64| {
            let n = (10.0 / dt).round() as usize;
            let d: Vec<f64> = (0..=n)
                .map(|k| k as f64 * dt)
                .map(|t| (-t).exp() * (1.0 + 0.1 * (10.0 * t).sin()))
                .collect();
            positive_increments(&d)
        };
        // fine-grid integral of max(Ḋ, 0) with the analytic derivative
        let h = 1e-5;
        let exact: f64 = (0..1_000_000)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                let dd = (-t).exp() * (-(1.0 + 0.1 * (10.0 * t).sin()) + (10.0 * t).cos());
                dd.max(0.0) * h
            })
            .sum();
        // backflow windows are ~0.02 wide, so dt = 0.005 undersamples them
        assert_relative_eq!(sampled(0.005), exact, max_relative = 0.05);
        assert_relative_eq!(sampled(0.001), exact, max_relative = 0.01);
    }

    #[test]
    fn pure_exponential_fit() {
        let ts: Vec<f64> = (0..4000).map(|k| k as f64 * 0.01).collect();
        let d: Vec<f64> = ts.iter().map(|t| (-t / 5.0).exp()).collect();
        let f = fit_decay(&ts, &d, 1e-12).unwrap();
        assert!(f.monotone_fallback);
        assert_relative_eq!(f.tau, 5.0, max_relative = 0.01);
        assert!(f.r_squared > 0.999_999);
    }

    #[test]
    fn oscillating_envelope_fit() {
        let ts: Vec<f64> = (0..4000).map(|k| k as f64 * 0.01).collect();
        let d: Vec<f64> = ts
            .iter()
            .map(|t| (-t / 5.0).exp() * (10.0 * t).cos().abs())
            .collect();
        let f = fit_decay(&ts, &d, 1e-8).unwrap();
        assert!(!f.monotone_fallback);
        assert!(f.points > 50);
        assert_relative_eq!(f.tau, 5.0, max_relative = 0.03);
    }

    #[test]
    fn periodic_reference_removed() {
        // ρ11 = ½ + 0.1 cos(ωt) + 0.3 e^{−t/7}, 40 samples per period
        let m = 40;
        let period = 2.0 * std::f64::consts::PI;
        let ts: Vec<f64> = (0..m * 60).map(|k| k as f64 * period / m as f64).collect();
        let states: Vec<Mat2> = ts
            .iter()
            .map(|&t| {
                let p = 0.5 + 0.1 * t.cos() + 0.3 * (-t / 7.0).exp();
                let c = 0.2 * (-t / 30.0).exp();
                Mat2::from_real([[p, c], [c, 1.0 - p]])
            })
            .collect();
        let fit = fit_relaxation_time(&ts, &states, m).unwrap();
        let get = |n: &str| {
            fit.elements
                .iter()
                .find(|e| e.element == n)
                .unwrap()
                .clone()
        };
        assert_relative_eq!(get("rho11").fit.unwrap().tau, 7.0, max_relative = 0.01);
        assert_relative_eq!(get("re_rho12").fit.unwrap().tau, 30.0, max_relative = 0.01);
        assert!(get("im_rho12").fit.is_none());
        assert_eq!(fit.tau_element, "re_rho12");
        assert!(fit_relaxation_time(&ts[..100], &states[..100], m).is_err());
    }

    #[test]
    fn peaks_and_matching() {
        assert!(detect_peaks(&[1.0]).is_empty());
        let v = [0.1, 0.2, 0.9, 0.1, 0.15, 0.1, 0.2, 0.8, 0.1, f64::NAN, 0.15];
        assert_eq!(detect_peaks(&v), vec![2, 7]);
        let m = greedy_match(&[2.68, 4.27], &[2.7, 4.3, 4.2], 0.2);
        assert_eq!(m, vec![(0, 0), (1, 1)]);
        let r = SweepResult {
            omega_grid: vec![],
            n: vec![],
            tau: vec![],
            gap: vec![],
            n_peaks: vec![],
            tau_peaks: vec![],
            crossings: vec![],
            step: 0.1,
            points: vec![],
            failures: vec![],
        };
        let rep = correspondence_report(&r);
        assert!(rep.rows.is_empty() && !rep.one_to_one());
    }

    #[test]
    fn axes_and_angles() {
        assert_relative_eq!(axis_angle_deg([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]), 0.0);
        assert_relative_eq!(axis_angle_deg([1.0, 0.0, 0.0], [0.0, 2.0, 0.0]), 90.0);
        let sol = floquet_solve(&DriveSpec::resonant(0.0), 64).unwrap();
        let ax = sigma_x_axis(&sol);
        assert_relative_eq!(ax[0].abs(), 1.0, epsilon = 1e-9);
    }
}
