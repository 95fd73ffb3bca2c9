//! Hierarchical equations of motion for the driven spin-boson model with
//! coupling operator `σx` and an exponential bath correlation function.
//!
//! Auxiliary density operators are stored scaled, `ρ_n = ρ̃_n Π_l
//! sqrt(n_l! |η_l|^{n_l})`, so that
//!
//! ```text
//! dρ̃_n/dt = −i[H(t), ρ̃_n] − Σ_l n_l γ_l ρ̃_n
//!           − i Σ_l sqrt((n_l+1)|η_l|) [σx, ρ̃_{n+e_l}]
//!           − i Σ_l sqrt(n_l/|η_l|) (η_l σx ρ̃_{n−e_l} − η_l* ρ̃_{n−e_l} σx).
//! ```
//!
//! Exponential terms beyond `explicit_terms` can be folded into a Markovian
//! correction `−(2 Re η_l/γ_l)(ρ − σx ρ σx)` applied to every ADO.

use std::collections::HashMap;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{pade_series, BathModel, ExponentialSeries};
use crate::error::{Error, Result};
use crate::floquet::{DriveSpec, FloquetSolution};
use crate::maps::{DynamicalMaps, Superop};
use crate::ode::{Dopri5, IntegrationStats};
use crate::qubit::Mat2;
use crate::trajectory::Trajectory;

type C64 = Complex64;

fn default_tier() -> usize {
    6
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_max_ados() -> usize {
    2_000_000
}
fn default_coupling_scale() -> f64 {
    0.5
}

/// Solver settings. `explicit_terms = None` keeps every series term in the
/// hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeomSettings {
    #[serde(default = "default_tier")]
    pub tier: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Overrides the bath's Padé order for this run.
    #[serde(default)]
    pub pade_terms: Option<usize>,
    #[serde(default)]
    pub explicit_terms: Option<usize>,
    /// Multiplies the correlation function seen by the hierarchy. The
    /// default 0.5 makes weak-coupling rates equal `J(ω)(1 + N(ω))`.
    #[serde(default = "default_coupling_scale")]
    pub coupling_scale: f64,
    #[serde(default = "default_max_ados")]
    pub max_ados: usize,
}

impl Default for HeomSettings {
    fn default() -> Self {
        Self {
            tier: default_tier(),
            rtol: default_rtol(),
            atol: default_atol(),
            pade_terms: None,
            explicit_terms: None,
            coupling_scale: default_coupling_scale(),
            max_ados: default_max_ados(),
        }
    }
}

/// ADO index set with neighbour tables.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub terms: usize,
    pub tier: usize,
    /// Flattened multi-indices, `terms` entries per ADO.
    pub indices: Vec<u8>,
    pub damping: Vec<f64>,
    /// Start offsets into the link arrays (length `count + 1`).
    up_start: Vec<u32>,
    up_target: Vec<u32>,
    up_factor: Vec<f64>,
    down_start: Vec<u32>,
    down_target: Vec<u32>,
    /// `(a, b)` so that the contribution is `a σx ρ + b ρ σx`.
    down_factor: Vec<(C64, C64)>,
    /// Markovian correction strength `Σ 2 Re η_l / γ_l` over folded terms.
    pub markov_rate: f64,
}

/// Number of multi-indices over `m` terms with total at most `l`: `C(l+m, l)`.
pub fn ado_count(m: usize, l: usize) -> u128 {
    let mut r: u128 = 1;
    for k in 1..=l as u128 {
        r = r * (m as u128 + k) / k;
    }
    r
}

impl Hierarchy {
    pub fn count(&self) -> usize {
        self.damping.len()
    }

    pub fn occupations(&self, a: usize) -> &[u8] {
        &self.indices[a * self.terms..(a + 1) * self.terms]
    }

    pub fn tier_of(&self, a: usize) -> usize {
        self.occupations(a).iter().map(|&x| x as usize).sum()
    }

    pub fn up_neighbours(&self, a: usize) -> &[u32] {
        &self.up_target[self.up_start[a] as usize..self.up_start[a + 1] as usize]
    }

    pub fn down_neighbours(&self, a: usize) -> &[u32] {
        &self.down_target[self.down_start[a] as usize..self.down_start[a + 1] as usize]
    }
}

/// Enumerates all ADOs with tier `≤ tier` for the first `explicit` terms of
/// the series; the remaining terms become the Markovian correction.
pub fn build_hierarchy(
    series: &ExponentialSeries,
    tier: usize,
    explicit: usize,
    max_ados: usize,
) -> Result<Hierarchy> {
    if tier < 1 {
        return Err(Error::InvalidParameter("tier must be >= 1".into()));
    }
    if tier > u8::MAX as usize {
        return Err(Error::InvalidParameter("tier too deep".into()));
    }
    let m = explicit.min(series.len());
    if m == 0 {
        return Err(Error::InvalidParameter(
            "need at least one explicit term".into(),
        ));
    }
    let count = ado_count(m, tier);
    if count > max_ados as u128 {
        return Err(Error::HierarchyTooLarge {
            count: count.min(usize::MAX as u128) as usize,
            limit: max_ados,
        });
    }
    let count = count as usize;

    // Enumerate in graded lexicographic order: tier by tier.
    let mut indices: Vec<u8> = Vec::with_capacity(count * m);
    let mut current = vec![vec![0u8; m]];
    indices.extend_from_slice(&current[0]);
    for _ in 1..=tier {
        let mut next: Vec<Vec<u8>> = Vec::new();
        for idx in &current {
            // raise only at or after the last non-zero slot to avoid repeats
            let first = idx.iter().rposition(|&x| x > 0).unwrap_or(0);
            for l in first..m {
                let mut n = idx.clone();
                n[l] += 1;
                next.push(n);
            }
        }
        for n in &next {
            indices.extend_from_slice(n);
        }
        current = next;
    }
    debug_assert_eq!(indices.len(), count * m);
    let mut lookup: HashMap<&[u8], u32> = HashMap::with_capacity(count);
    for a in 0..count {
        lookup.insert(&indices[a * m..(a + 1) * m], a as u32);
    }

    let eta: Vec<C64> = series.eta[..m].to_vec();
    let gamma: Vec<C64> = series.gamma[..m].to_vec();
    let mi = C64::new(0.0, -1.0);
    let mut damping = Vec::with_capacity(count);
    let (mut up_start, mut up_target, mut up_factor) = (vec![0u32], Vec::new(), Vec::new());
    let (mut down_start, mut down_target, mut down_factor) = (vec![0u32], Vec::new(), Vec::new());
    let mut key = vec![0u8; m];
    for a in 0..count {
        let n = &indices[a * m..(a + 1) * m];
        damping.push(n.iter().zip(&gamma).map(|(&k, g)| k as f64 * g.re).sum());
        for l in 0..m {
            let mag = eta[l].norm();
            if mag < 1e-300 {
                continue;
            }
            key.copy_from_slice(n);
            if key.iter().map(|&x| x as usize).sum::<usize>() < tier {
                key[l] += 1;
                let t = lookup[key.as_slice()];
                up_target.push(t);
                up_factor.push(((n[l] as f64 + 1.0) * mag).sqrt());
                key[l] -= 1;
            }
            if n[l] > 0 {
                key[l] -= 1;
                let t = lookup[key.as_slice()];
                let s = (n[l] as f64 / mag).sqrt();
                down_target.push(t);
                down_factor.push((mi * eta[l] * s, -mi * eta[l].conj() * s));
                key[l] += 1;
            }
        }
        up_start.push(up_target.len() as u32);
        down_start.push(down_target.len() as u32);
    }
    let markov_rate = series.eta[m..]
        .iter()
        .zip(&series.gamma[m..])
        .map(|(e, g)| 2.0 * e.re / g.re)
        .sum();
    Ok(Hierarchy {
        terms: m,
        tier,
        indices,
        damping,
        up_start,
        up_target,
        up_factor,
        down_start,
        down_target,
        down_factor,
        markov_rate,
    })
}

#[inline(always)]
fn qm(r: &[C64; 4]) -> [C64; 4] {
    // σx ρ: swap rows
    [r[2], r[3], r[0], r[1]]
}

#[inline(always)]
fn mq(r: &[C64; 4]) -> [C64; 4] {
    // ρ σx: swap columns
    [r[1], r[0], r[3], r[2]]
}

/// Evaluates the hierarchy right-hand side for `cols` independent columns
/// stored as `y[(ado * cols + col) * 4 + element]`.
pub fn heom_rhs(h: &Hierarchy, drive: &DriveSpec, t: f64, cols: usize, y: &[C64], dy: &mut [C64]) {
    let hz = 0.5 * drive.omega0;
    let hx = -drive.amplitude * (drive.omega * t).cos();
    let mi = C64::new(0.0, -1.0);
    let zero = C64::new(0.0, 0.0);
    let markov = h.markov_rate;
    let load = |a: usize, c: usize| -> [C64; 4] {
        let o = (a * cols + c) * 4;
        [y[o], y[o + 1], y[o + 2], y[o + 3]]
    };
    for a in 0..h.count() {
        let damp = h.damping[a];
        let ups = h.up_start[a] as usize..h.up_start[a + 1] as usize;
        let downs = h.down_start[a] as usize..h.down_start[a + 1] as usize;
        for c in 0..cols {
            let r = load(a, c);
            // −i[H, ρ] with H = [[hz, hx], [hx, −hz]]
            let hr = [
                r[0] * hz + r[2] * hx,
                r[1] * hz + r[3] * hx,
                r[0] * hx - r[2] * hz,
                r[1] * hx - r[3] * hz,
            ];
            let rh = [
                r[0] * hz + r[1] * hx,
                r[0] * hx - r[1] * hz,
                r[2] * hz + r[3] * hx,
                r[2] * hx - r[3] * hz,
            ];
            let mut out = [zero; 4];
            for k in 0..4 {
                out[k] = mi * (hr[k] - rh[k]) - r[k] * damp;
            }
            if markov != 0.0 {
                let q = qm(&mq(&r));
                for k in 0..4 {
                    out[k] -= (r[k] - q[k]) * markov;
                }
            }
            let mut s_up = [zero; 4];
            for k in ups.clone() {
                let u = load(h.up_target[k] as usize, c);
                let f = h.up_factor[k];
                for e in 0..4 {
                    s_up[e] += u[e] * f;
                }
            }
            let (qs, sq) = (qm(&s_up), mq(&s_up));
            let mut s_a = [zero; 4];
            let mut s_b = [zero; 4];
            for k in downs.clone() {
                let d = load(h.down_target[k] as usize, c);
                let (fa, fb) = h.down_factor[k];
                for e in 0..4 {
                    s_a[e] += d[e] * fa;
                    s_b[e] += d[e] * fb;
                }
            }
            let (qa, bq) = (qm(&s_a), mq(&s_b));
            let o = (a * cols + c) * 4;
            for e in 0..4 {
                dy[o + e] = out[e] + mi * (qs[e] - sq[e]) + qa[e] + bq[e];
            }
        }
    }
}

/// Integration record attached to every HEOM result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeomDiagnostics {
    pub ados: usize,
    pub explicit_terms: usize,
    pub pade_terms: usize,
    pub tier: usize,
    pub markov_rate: f64,
    /// Largest top-tier ADO norm relative to the root norm.
    pub top_tier_ratio: f64,
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Not serialized, so outputs stay reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl HeomDiagnostics {
    pub fn converged(&self) -> bool {
        self.top_tier_ratio <= 1e-4
    }
}

struct Prepared {
    hierarchy: Hierarchy,
    settings: HeomSettings,
    pade_terms: usize,
}

fn prepare(bath: &BathModel, settings: &HeomSettings) -> Result<Prepared> {
    bath.validate()?;
    let k = settings.pade_terms.unwrap_or(bath.pade_terms);
    let series = pade_series(bath, k).scaled(settings.coupling_scale);
    let explicit = settings.explicit_terms.unwrap_or(series.len());
    let hierarchy = build_hierarchy(&series, settings.tier, explicit, settings.max_ados)?;
    Ok(Prepared {
        hierarchy,
        settings: *settings,
        pade_terms: k,
    })
}

/// Runs the hierarchy from root initial conditions (one per column) and
/// hands the root blocks to `observe` at each output time.
fn run<G>(
    p: &Prepared,
    drive: &DriveSpec,
    roots: &[Mat2],
    t_grid: &[f64],
    mut observe: G,
) -> Result<HeomDiagnostics>
where
    G: FnMut(usize, f64, &[Mat2]) -> bool,
{
    drive.validate()?;
    let h = &p.hierarchy;
    let cols = roots.len();
    let t0 = *t_grid
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty time grid".into()))?;
    let mut y = vec![C64::new(0.0, 0.0); h.count() * cols * 4];
    for (c, r) in roots.iter().enumerate() {
        y[c * 4..c * 4 + 4].copy_from_slice(&r.to_flat());
    }
    let top: Vec<usize> = (0..h.count()).filter(|&a| h.tier_of(a) == h.tier).collect();
    let mut top_ratio: f64 = 0.0;
    let start = Instant::now();
    let solver = Dopri5::with_tolerances(p.settings.rtol, p.settings.atol);
    let mut roots_out = vec![Mat2::zero(); cols];
    let stats: IntegrationStats = solver.integrate(
        |t, y, dy| heom_rhs(h, drive, t, cols, y, dy),
        t0,
        &mut y,
        t_grid,
        |k, t, y| {
            let mut root_norm: f64 = 0.0;
            for c in 0..cols {
                roots_out[c] = Mat2::from_flat(&y[c * 4..c * 4 + 4]);
                root_norm = root_norm.max(roots_out[c].norm_max());
            }
            let mut top_norm: f64 = 0.0;
            for &a in &top {
                for c in 0..cols {
                    let o = (a * cols + c) * 4;
                    for e in 0..4 {
                        top_norm = top_norm.max(y[o + e].norm());
                    }
                }
            }
            if root_norm > 0.0 {
                top_ratio = top_ratio.max(top_norm / root_norm);
            }
            observe(k, t, &roots_out)
        },
    )?;
    let diag = HeomDiagnostics {
        ados: h.count(),
        explicit_terms: h.terms,
        pade_terms: p.pade_terms,
        tier: h.tier,
        markov_rate: h.markov_rate,
        top_tier_ratio: top_ratio,
        steps: stats.accepted,
        rejected: stats.rejected,
        rhs_evals: stats.rhs_evals,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if !diag.converged() {
        log::warn!(
            "HEOM top-tier ADO norm ratio {:.2e} exceeds 1e-4 (tier {})",
            diag.top_tier_ratio,
            h.tier
        );
    }
    if stats.rejection_ratio() > 0.5 {
        log::warn!(
            "HEOM step rejection ratio {:.2}; consider loosening rtol/atol",
            stats.rejection_ratio()
        );
    }
    Ok(diag)
}

/// Reduced-state trajectory from `rho0`. With a Floquet solution the
/// Floquet-frame elements are recorded too.
pub fn heom_evolve(
    drive: &DriveSpec,
    bath: &BathModel,
    rho0: &Mat2,
    settings: &HeomSettings,
    t_grid: &[f64],
    frame: Option<&FloquetSolution>,
) -> Result<(Trajectory, HeomDiagnostics)> {
    let p = prepare(bath, settings)?;
    let mut states = Vec::with_capacity(t_grid.len());
    let diag = run(&p, drive, &[*rho0], t_grid, |_, _, r| {
        states.push(r[0]);
        true
    })?;
    let floquet = frame.map(|sol| {
        t_grid
            .iter()
            .zip(&states)
            .map(|(&t, r)| sol.to_floquet_frame(t, r))
            .collect()
    });
    let traj = Trajectory {
        times: t_grid.to_vec(),
        lab: Some(states),
        floquet,
        metadata: serde_json::json!({
            "solver": "heom",
            "settings": settings,
            "diagnostics": diag,
        }),
    };
    Ok((traj, diag))
}

fn basis_elements() -> [Mat2; 4] {
    let mut out = [Mat2::zero(); 4];
    for (k, m) in out.iter_mut().enumerate() {
        m.0[k / 2][k % 2] = C64::new(1.0, 0.0);
    }
    out
}

/// Dynamical maps `Φ_t` from evolving the four matrix units through the
/// hierarchy. `keep_going(t, Φ_t)` may end the run early.
pub fn heom_propagator<F>(
    drive: &DriveSpec,
    bath: &BathModel,
    settings: &HeomSettings,
    t_grid: &[f64],
    mut keep_going: F,
) -> Result<(DynamicalMaps, HeomDiagnostics)>
where
    F: FnMut(f64, &Superop) -> bool,
{
    let p = prepare(bath, settings)?;
    let mut maps = DynamicalMaps {
        times: Vec::with_capacity(t_grid.len()),
        maps: Vec::with_capacity(t_grid.len()),
    };
    let diag = run(&p, drive, &basis_elements(), t_grid, |_, t, r| {
        let m = Superop::from_columns(&[r[0], r[1], r[2], r[3]]);
        maps.times.push(t);
        maps.maps.push(m);
        keep_going(t, &m)
    })?;
    Ok((maps, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting() {
        assert_eq!(ado_count(2, 2), 6);
        assert_eq!(ado_count(9, 6), 5005);
        let b = BathModel::default();
        let s = pade_series(&b, 1);
        let h = build_hierarchy(&s, 2, 2, 100).unwrap();
        assert_eq!(h.count(), 6);
        let idx: Vec<Vec<u8>> = (0..6).map(|a| h.occupations(a).to_vec()).collect();
        for want in [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
            assert!(idx.contains(&want.to_vec()));
        }
        let s8 = pade_series(&b, 8);
        let h = build_hierarchy(&s8, 6, 9, 10_000).unwrap();
        assert_eq!(h.count(), 5005);
        for a in 0..h.count() {
            let tier = h.tier_of(a);
            let ups = h.up_neighbours(a).len();
            assert_eq!(ups, if tier < 6 { 9 } else { 0 });
            let nonzero = h.occupations(a).iter().filter(|&&x| x > 0).count();
            assert_eq!(h.down_neighbours(a).len(), nonzero);
        }
        assert!(matches!(
            build_hierarchy(&s8, 6, 9, 1000),
            Err(Error::HierarchyTooLarge { count: 5005, .. })
        ));
    }

    #[test]
    fn decoupled_limit_is_unitary() {
        let s = ExponentialSeries {
            eta: vec![C64::new(0.0, 0.0); 2],
            gamma: vec![C64::new(1.0, 0.0), C64::new(6.0, 0.0)],
        };
        let h = build_hierarchy(&s, 3, 2, 100).unwrap();
        let drive = DriveSpec::resonant(1.3);
        let rho = Mat2::from_real([[0.8, 0.3], [0.3, 0.2]]);
        let mut y = vec![C64::new(0.0, 0.0); h.count() * 4];
        y[..4].copy_from_slice(&rho.to_flat());
        let mut dy = vec![C64::new(0.0, 0.0); y.len()];
        heom_rhs(&h, &drive, 0.4, 1, &y, &mut dy);
        let hm = drive.hamiltonian(0.4);
        let expect = (hm * rho - rho * hm).scale(C64::new(0.0, -1.0));
        assert!(Mat2::from_flat(&dy[..4]).approx_eq(&expect, 1e-15));
        assert!(dy[4..].iter().all(|z| z.norm() == 0.0));
    }
}
