//! Domain types shared by the forward and inverse solvers, with invariant
//! checks and the canonical JSON formats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod io;

/// `J = [[0, -1], [1, 0]]`.
pub const J: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

/// Absolute slack on `det H` when testing nonnegativity.
pub const EPS_PSD: f64 = 1e-12;
/// Positions closer to 0 than this are the atom at the origin.
pub const EPS_ZERO: f64 = 1e-12;
/// Relative tolerance on `det M = 1`, scaled by `1 + |M|^2`.
pub const EPS_DET: f64 = 1e-10;
/// Relative distance below which two atom positions are merged.
pub const EPS_MERGE: f64 = 1e-10;

/// Real symmetric 2×2 matrix `[[h11, h12], [h12, h22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymMat2 {
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl SymMat2 {
    pub const IDENTITY: SymMat2 = SymMat2 { h11: 1.0, h12: 0.0, h22: 1.0 };

    pub const fn new(h11: f64, h12: f64, h22: f64) -> Self {
        SymMat2 { h11, h12, h22 }
    }

    pub const fn diag(h11: f64, h22: f64) -> Self {
        SymMat2 { h11, h12: 0.0, h22 }
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMat2::new(self.h11 * c, self.h12 * c, self.h22 * c)
    }

    pub fn to_array(&self) -> [[f64; 2]; 2] {
        [[self.h11, self.h12], [self.h12, self.h22]]
    }

    /// `H` is a multiple of the projector onto `(0, 1)`.
    pub fn is_lower_projector(&self) -> bool {
        self.h11 == 0.0 && self.h12 == 0.0 && self.h22 > 0.0
    }

    fn is_finite(&self) -> bool {
        self.h11.is_finite() && self.h12.is_finite() && self.h22.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub r0: f64,
    pub r1: f64,
    pub h: SymMat2,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.r1 - self.r0
    }

    pub fn is_empty(&self) -> bool {
        self.r1 <= self.r0
    }
}

/// Piecewise-constant nonnegative Hamiltonian on `[0, ell]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    ell: f64,
    segments: Vec<Segment>,
}

impl Hamiltonian {
    /// Validates tiling, nonnegativity and regularity.
    pub fn new(ell: f64, segments: Vec<Segment>) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::Invalid(format!("ell must be positive, got {ell}")));
        }
        if segments.is_empty() {
            return Err(Error::Tiling("no segments".into()));
        }
        let slack = 1e-12 * ell.max(1.0);
        if segments[0].r0 != 0.0 {
            return Err(Error::Tiling(format!("first segment starts at {}", segments[0].r0)));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.r1 > seg.r0) {
                return Err(Error::Tiling(format!("segment {i} has non-positive length")));
            }
            if i > 0 {
                let gap = seg.r0 - segments[i - 1].r1;
                if gap.abs() > slack {
                    let kind = if gap > 0.0 { "gap" } else { "overlap" };
                    return Err(Error::Tiling(format!("{kind} of {gap:e} before segment {i}")));
                }
            }
            let h = seg.h;
            if !h.is_finite() {
                return Err(Error::Invalid(format!("segment {i} has non-finite entries")));
            }
            if h.h11 < 0.0 || h.h22 < 0.0 || h.det() < -EPS_PSD {
                return Err(Error::NotPsd { index: i, h11: h.h11, h22: h.h22, det: h.det() });
            }
            if !(h.trace() > 0.0) {
                return Err(Error::Invalid(format!("segment {i} has zero trace")));
            }
        }
        let last = segments.last().unwrap().r1;
        if (last - ell).abs() > slack {
            return Err(Error::Tiling(format!("last segment ends at {last}, ell = {ell}")));
        }
        Ok(Hamiltonian { ell, segments })
    }

    /// The free Hamiltonian `H0 = I` on `[0, ell]`.
    pub fn free(ell: f64) -> Result<Self> {
        Self::new(ell, vec![Segment { r0: 0.0, r1: ell, h: SymMat2::IDENTITY }])
    }

    /// Consecutive segments given as `(length, matrix)`, starting at 0.
    pub fn from_pieces(pieces: &[(f64, SymMat2)]) -> Result<Self> {
        let mut r = 0.0;
        let mut segments = Vec::with_capacity(pieces.len());
        for &(len, h) in pieces {
            let r1 = r + len;
            segments.push(Segment { r0: r, r1, h });
            r = r1;
        }
        Self::new(r, segments)
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Matrix value at `r` (right-continuous; the last segment is closed).
    pub fn at(&self, r: f64) -> SymMat2 {
        let idx = self.segments.partition_point(|s| s.r1 <= r).min(self.segments.len() - 1);
        self.segments[idx].h
    }

    /// Entrywise integral `∫_0^r H`.
    pub fn integral(&self, r: f64) -> SymMat2 {
        let mut acc = SymMat2::default();
        for seg in &self.segments {
            if seg.r0 >= r {
                break;
            }
            let len = seg.r1.min(r) - seg.r0;
            acc.h11 += seg.h.h11 * len;
            acc.h12 += seg.h.h12 * len;
            acc.h22 += seg.h.h22 * len;
        }
        acc
    }

    /// Restriction to `[from, ell]`, shifted to start at 0.
    pub fn shifted(&self, from: f64) -> Result<Self> {
        if !(0.0..self.ell).contains(&from) {
            return Err(Error::OutOfRange { r: from, ell: self.ell });
        }
        let pieces: Vec<(f64, SymMat2)> = self
            .segments
            .iter()
            .filter(|s| s.r1 > from)
            .map(|s| (s.r1 - s.r0.max(from), s.h))
            .collect();
        Self::from_pieces(&pieces)
    }

    /// Restriction to `[0, r]`.
    pub fn truncated(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= self.ell) {
            return Err(Error::OutOfRange { r, ell: self.ell });
        }
        let mut segments: Vec<Segment> =
            self.segments.iter().filter(|s| s.r0 < r).copied().collect();
        if let Some(last) = segments.last_mut() {
            last.r1 = r;
        }
        Self::new(r, segments)
    }

    /// No segment is identically diagonal with `h11 = 0` at either end.
    pub fn is_compatible(&self) -> bool {
        !self.segments.first().unwrap().h.is_lower_projector()
            && !self.segments.last().unwrap().h.is_lower_projector()
    }
}

/// Monotone reparametrization `r ↦ t̃(r)` stored as piecewise-linear knots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChange {
    pub knots: Vec<(f64, f64)>,
}

impl TimeChange {
    pub fn map(&self, r: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|&(x, _)| x <= r).clamp(1, k.len() - 1);
        let (x0, y0) = k[i - 1];
        let (x1, y1) = k[i];
        y0 + (y1 - y0) * (r - x0) / (x1 - x0)
    }
}

/// Rescales the independent variable so that `trace H = 2` everywhere.
///
/// The new length of each segment is `len · trace / 2`; the principal
/// spectral measure is unchanged.
pub fn normalize_trace(h: &Hamiltonian) -> Result<(Hamiltonian, TimeChange)> {
    let mut pieces = Vec::with_capacity(h.segments.len());
    let mut knots = vec![(0.0, 0.0)];
    let mut t = 0.0;
    for (i, seg) in h.segments.iter().enumerate() {
        let tr = seg.h.trace();
        if !(tr > 0.0) {
            return Err(Error::Invalid(format!("segment {i} has zero trace")));
        }
        if tr == 2.0 {
            pieces.push((seg.len(), seg.h));
        } else {
            pieces.push((seg.len() * tr / 2.0, seg.h.scaled(2.0 / tr)));
        }
        t += pieces.last().unwrap().0;
        knots.push((seg.r1, t));
    }
    Ok((Hamiltonian::from_pieces(&pieces)?, TimeChange { knots }))
}

/// Point mass `mass · δ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub mass: f64,
}

/// Discrete measure together with the Herglotz constants `b`, `c` of the
/// Weyl function and the window `[-window, window]` it was sampled on.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    zero_index: usize,
    pub window: f64,
    pub herglotz_b: f64,
    pub herglotz_c: f64,
}

impl SpectralMeasure {
    /// Sorts, merges near-coincident positions (summing masses) and checks
    /// that every mass is positive and exactly one atom sits at the origin.
    pub fn new(mut atoms: Vec<Atom>, window: f64, b: f64, c: f64) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::Invalid(format!("window must be positive, got {window}")));
        }
        for a in &atoms {
            if !(a.t.is_finite() && a.mass.is_finite()) {
                return Err(Error::Invalid("non-finite atom".into()));
            }
            if !(a.mass > 0.0) {
                return Err(Error::Invalid(format!("atom at {} has mass {}", a.t, a.mass)));
            }
        }
        atoms.sort_by(|x, y| x.t.total_cmp(&y.t));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(prev) if (a.t - prev.t).abs() <= EPS_MERGE * (1.0 + a.t.abs()) => {
                    prev.mass += a.mass;
                }
                _ => merged.push(a),
            }
        }
        let zeros: Vec<usize> =
            (0..merged.len()).filter(|&i| merged[i].t.abs() < EPS_ZERO).collect();
        if zeros.len() != 1 {
            return Err(Error::Invalid(format!(
                "measure needs exactly one atom at the origin, found {}",
                zeros.len()
            )));
        }
        let zero_index = zeros[0];
        merged[zero_index].t = 0.0;
        Ok(SpectralMeasure { atoms: merged, zero_index, window, herglotz_b: b, herglotz_c: c })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    /// `μ({0})`.
    pub fn mass_at_zero(&self) -> f64 {
        self.atoms[self.zero_index].mass
    }

    pub fn has_zero_atom(&self) -> bool {
        true
    }

    /// Density estimate `π (n - 1) / (t_max - t_min)` of the exponential type
    /// of the underlying de Branges space.
    pub fn estimated_type(&self) -> f64 {
        let n = self.atoms.len();
        let span = self.atoms[n - 1].t - self.atoms[0].t;
        std::f64::consts::PI * (n as f64 - 1.0) / span
    }

    pub fn with_herglotz(mut self, b: f64, c: f64) -> Self {
        self.herglotz_b = b;
        self.herglotz_c = c;
        self
    }
}

/// How the measure is treated outside its sampled window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailModel {
    /// Atoms outside the window are dropped.
    Truncated,
    /// The outermost atoms are continued as a periodic lattice to infinity.
    Lattice,
}

/// Discretization parameters for the inverse problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    /// Sinc basis uses indices `-N..=N`.
    pub pw_truncation: usize,
    pub measure_window: f64,
    /// Strictly increasing bandwidths in `(0, a]`, last entry `a`.
    pub s_grid: Vec<f64>,
    pub r_samples: usize,
    pub zero_scan_step: f64,
    pub tail: TailModel,
    /// Combine truncations `N` and `N/2` to cancel the leading `O(1/N)` error.
    pub extrapolate: bool,
}

impl GridConfig {
    /// Defaults: `N = 256`, window 200, 129 uniform bandwidth samples on
    /// `[0, a]` (the origin is implicit), 257 output samples.
    pub fn new(a: f64) -> Result<Self> {
        Self::with_samples(a, 256, 200.0, 129, 257)
    }

    pub fn with_samples(
        a: f64,
        pw_truncation: usize,
        measure_window: f64,
        s_samples: usize,
        r_samples: usize,
    ) -> Result<Self> {
        if s_samples < 3 {
            return Err(Error::Invalid("need at least 3 bandwidth samples".into()));
        }
        let s_grid = (1..s_samples).map(|i| a * i as f64 / (s_samples - 1) as f64).collect();
        let cfg = GridConfig {
            pw_truncation,
            measure_window,
            s_grid,
            r_samples,
            zero_scan_step: 0.1,
            tail: TailModel::Lattice,
            extrapolate: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Largest bandwidth `a`.
    pub fn a(&self) -> f64 {
        *self.s_grid.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pw_truncation < 8 {
            return Err(Error::Invalid(format!("pw truncation {} < 8", self.pw_truncation)));
        }
        if self.pw_truncation > 2048 {
            return Err(Error::Invalid(format!(
                "pw truncation {} exceeds the dense limit 2048",
                self.pw_truncation
            )));
        }
        if !(self.measure_window > 0.0) {
            return Err(Error::Invalid("measure window must be positive".into()));
        }
        if self.s_grid.is_empty() || !(self.s_grid[0] > 0.0) {
            return Err(Error::Invalid("bandwidth grid must lie in (0, a]".into()));
        }
        if self.s_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("bandwidth grid must be strictly increasing".into()));
        }
        if self.r_samples < 3 {
            return Err(Error::Invalid("need at least 3 output samples".into()));
        }
        if !(self.zero_scan_step > 0.0) {
            return Err(Error::Invalid("zero scan step must be positive".into()));
        }
        Ok(())
    }
}

/// One named residual with its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn record(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> bool {
        let passed = value.is_finite() && value <= tolerance;
        self.checks.push(Check { name: name.into(), value, tolerance, passed });
        passed
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.checks.extend(other.checks);
        self.warnings.extend(other.warnings);
    }
}

/// Output of the recovery algorithm.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// Trace-2 Hamiltonian on a uniform grid of `r_samples - 1` cells.
    pub hamiltonian: Hamiltonian,
    /// `(s, ζ(s))`, starting at `(0, 0)`.
    pub zeta_table: Vec<(f64, f64)>,
    /// `(r, τ(r))` on the uniform output grid.
    pub tau_table: Vec<(f64, f64)>,
    /// `(r, g1(r), g2(r), g(r))` on the output grid.
    pub g_table: Vec<[f64; 4]>,
    pub diagnostics: Diagnostics,
}
