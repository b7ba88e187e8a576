//! Window products and the boundedness criterion behind similarity.
//!
//! For a weight sequence `w` and a scaling constant `c > 0`, define the window
//! product and its scaled form
//!
//! ```text
//! P(k, n) = ∏_{j=1..n} |w_{k+j}|,          v_c(k, n) = cⁿ · P(k, n).
//! ```
//!
//! `c·S_w` is similar to the unweighted shift exactly when `v_c` is bounded
//! above and below away from zero over all `k ∈ ℤ, n ≥ 1`. This module decides
//! that boundedness *exactly* for the periodic-structured kinds and produces
//! either attained extrema with witness windows, or a three-window monotone
//! escape certificate.
//!
//! ## Exact reduction to a finite scan
//!
//! Work in the log domain. Let `σ_k = ln c + ln |w_k|` and let `ℓ` be the
//! discrete antiderivative `ℓ_{k+1} = ℓ_k − σ_k` (so `ℓ_k = ln |d_k|` for the
//! conjugating diagonal of [`crate::similarity`]). Every scaled window is a
//! difference of two `ℓ` values:
//!
//! ```text
//! ln v_c(k, n) = σ_{k+1} + … + σ_{k+n} = ℓ_{k+1} − ℓ_{k+n+1},
//! ```
//!
//! so the supremum and infimum of `v_c` are the extrema of `ℓ_i − ℓ_{i′}` over
//! ordered pairs `i < i′`.
//!
//! For every supported kind, `σ` is periodic far enough left and far enough
//! right: left of `lo` it repeats a pattern of length `q_L` whose per-period
//! sum is `s_L`, right of `hi` one of length `q_R` with sum `s_R` (the
//! explicit stretch `[lo, hi]` holds overrides, the sampled table, or is
//! empty). Two observations reduce the pair search to a finite index range
//! `J = [lo − 2q_L, hi + 1 + 2q_R]`:
//!
//! * **Escape.** If `s_R > 0`, windows lying in the right periodic region
//!   with lengths `q_R, 2q_R, 3q_R, …` have log-values `s_R, 2s_R, 3s_R, …`,
//!   so the supremum diverges; symmetrically `s_L > 0` diverges on the left,
//!   and a negative per-period sum drives the infimum to zero. These give the
//!   monotone escape witnesses.
//! * **Shrinking.** For the bounds that remain (per-period sums `≤ 0` for the
//!   sup, `≥ 0` for the inf), any window containing a full period of a
//!   periodic region can drop that period without decreasing (resp.
//!   increasing) its value: removing it changes the log-value by `−s`. Hence
//!   some optimal window extends less than one full period into each periodic
//!   region. Windows lying entirely inside one periodic region shift, period
//!   by period, onto a copy inside `J`; everything else already touches
//!   `[lo, hi]`. Two periods of padding on each side therefore make the plain
//!   ordered-pair scan over `J` complete, including every ordering of values
//!   from the two periodic regions.
//!
//! The scan itself is linear: `sup(ℓ_i − ℓ_{i′}) = max_{i′} (prefix-max − ℓ_{i′})`.
//!
//! Per-period sums within `±1e-12` of zero (relative to the period and the
//! weight scale) are treated as exactly balanced; the representable weights
//! cannot distinguish slower drifts, and the same tolerance governs the
//! candidate constant below.
//!
//! ## The candidate constant
//!
//! Boundedness forces `c` to cancel the geometric mean rate `g` of the weight
//! moduli, so the only possible constant is `c = 1/g` per periodic side:
//! `Π^{−1/p}` for a pattern with per-period modulus product `Π`. A split
//! sequence is feasible only when its two sides agree on that rate; otherwise
//! no `c` balances both sides and the sequence cannot be similar to a normal
//! operator at any scale.
//!
//! Sampled tables are never analyzed exactly: their stats scan a finite grid
//! up to a horizon and are flagged `exact = false`. The one certificate a
//! sampled sequence can produce is an escape through its constant extension,
//! whose continuation is known.

use crate::weights::{Repr, WeightSequence};

/// Default `|k|` and `n` limit for sampled-table scans.
pub const DEFAULT_HORIZON: u32 = 512;

/// Relative tolerance deciding rate equality and per-period balance.
pub const RATE_EQ_TOL: f64 = 1e-12;

/// Neumaier-compensated running sum; the window scans add thousands of terms
/// of mixed sign and the witnesses must reproduce to 1e-12.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_total(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// One window `(k, n)` and its scaled value, `value = cⁿ·P(k, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowWitness {
    pub k: i64,
    pub n: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscapeDirection {
    /// Values grow without bound (the supremum is `+∞`).
    Diverging,
    /// Values decrease to zero (the infimum is `0`).
    Vanishing,
}

/// Three windows on a fixed residue class whose scaled values move strictly
/// monotonically; successive windows differ by `step` in `n`, so the escape
/// continues forever by periodicity.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeWitness {
    pub c_used: f64,
    pub direction: EscapeDirection,
    pub step: u32,
    pub windows: [WindowWitness; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupBound {
    Attained { value: f64, witness: WindowWitness },
    Divergent(EscapeWitness),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InfBound {
    Attained { value: f64, witness: WindowWitness },
    Vanishing(EscapeWitness),
}

/// Extrema of the scaled windows `cⁿ·P(k, n)` at a fixed `c`.
///
/// When `exact` is true the attained bounds are global and the recorded
/// witnesses attain them; when false (sampled kind) attained values are grid
/// extrema within `horizon` and certify nothing beyond the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub c: f64,
    pub sup: SupBound,
    pub inf: InfBound,
    pub exact: bool,
    pub horizon: Option<u32>,
}

impl WindowStats {
    /// Finite supremum, or `None` when it diverges.
    pub fn sup_scaled(&self) -> Option<f64> {
        match &self.sup {
            SupBound::Attained { value, .. } => Some(*value),
            SupBound::Divergent(_) => None,
        }
    }

    /// Infimum; `0.0` when the windows vanish.
    pub fn inf_scaled(&self) -> f64 {
        match &self.inf {
            InfBound::Attained { value, .. } => *value,
            InfBound::Vanishing(_) => 0.0,
        }
    }

    pub fn is_bounded_above(&self) -> bool {
        matches!(self.sup, SupBound::Attained { .. })
    }

    pub fn is_bounded_below(&self) -> bool {
        matches!(self.inf, InfBound::Attained { .. })
    }

    pub fn escape(&self) -> Option<&EscapeWitness> {
        match (&self.sup, &self.inf) {
            (SupBound::Divergent(e), _) => Some(e),
            (_, InfBound::Vanishing(e)) => Some(e),
            _ => None,
        }
    }
}

/// The only scaling constant that can balance the windows, when one exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CandidateC {
    Feasible(f64),
    /// The two periodic sides demand different constants; no `c` works.
    Infeasible { left_rate: f64, right_rate: f64 },
}

/// `∏_{j=1..n} |w_{k+j}|`, accumulated in the log domain. Long expanding
/// windows can overflow `f64`; use [`window_product_log`] when `n` is large.
pub fn window_product(seq: &WeightSequence, k: i64, n: u32) -> f64 {
    window_product_log(seq, k, n).exp()
}

/// `ln ∏_{j=1..n} |w_{k+j}|`, always finite for valid sequences.
pub fn window_product_log(seq: &WeightSequence, k: i64, n: u32) -> f64 {
    let mut acc = CompensatedSum::default();
    for j in 1..=i64::from(n) {
        acc.add(seq.weight_at(k + j).norm().ln());
    }
    acc.value()
}

/// The candidate scaling constant: the reciprocal geometric mean of the
/// weight moduli per period. For split sequences the two sides must agree to
/// [`RATE_EQ_TOL`] (compared in the log domain, i.e. relatively); the common
/// value used is the geometric mean of the two side rates. For sampled tables
/// the candidate is the reciprocal extension modulus — the asymptotic rate on
/// both sides — which guides the horizon scan but certifies nothing.
pub fn candidate_c(seq: &WeightSequence) -> CandidateC {
    match &seq.repr {
        Repr::Periodic { pattern } => CandidateC::Feasible((-pattern.log_rate()).exp()),
        Repr::Modified { base, .. } => CandidateC::Feasible((-base.log_rate()).exp()),
        Repr::Split { left, right, .. } => {
            let (gl, gr) = (left.log_rate(), right.log_rate());
            if (gl - gr).abs() <= RATE_EQ_TOL * gl.abs().max(gr.abs()).max(1.0) {
                CandidateC::Feasible((-(gl + gr) / 2.0).exp())
            } else {
                CandidateC::Infeasible {
                    left_rate: gl.exp(),
                    right_rate: gr.exp(),
                }
            }
        }
        Repr::Sampled { extension, .. } => CandidateC::Feasible(extension.norm().recip()),
    }
}

/// Extrema of `cⁿ·P(k, n)` over all windows; exact with witnesses for the
/// periodic-structured kinds, horizon-limited ([`DEFAULT_HORIZON`]) for
/// sampled tables.
pub fn scaled_window_stats(seq: &WeightSequence, c: f64) -> WindowStats {
    scaled_window_stats_with_horizon(seq, c, DEFAULT_HORIZON)
}

/// As [`scaled_window_stats`]; `horizon` bounds `|k|` and `n` for the sampled
/// kind and is ignored by the exact kinds.
pub fn scaled_window_stats_with_horizon(seq: &WeightSequence, c: f64, horizon: u32) -> WindowStats {
    assert!(c.is_finite() && c > 0.0, "scaling constant must be positive, got {c}");
    match &seq.repr {
        Repr::Sampled { .. } => horizon_stats(seq, c, horizon),
        _ => exact_stats(seq, c),
    }
}

// ---------------------------------------------------------------------------
// The σ profile: eventually periodic in both directions.

pub(crate) struct LogProfile {
    /// Explicit `σ_k` for `k ∈ [lo, hi]`; empty when `lo > hi`.
    lo: i64,
    hi: i64,
    explicit: Vec<f64>,
    /// `σ_k = left[k mod q_L]` for `k < lo`.
    left: Vec<f64>,
    /// `σ_k = right[k mod q_R]` for `k > hi`.
    right: Vec<f64>,
}

impl LogProfile {
    pub(crate) fn for_sequence(seq: &WeightSequence, ln_c: f64) -> LogProfile {
        let sig = |w: num_complex::Complex64| ln_c + w.norm().ln();
        match &seq.repr {
            Repr::Periodic { pattern } => {
                let s: Vec<f64> = pattern.values().iter().map(|&w| sig(w)).collect();
                LogProfile {
                    lo: 0,
                    hi: -1,
                    explicit: Vec::new(),
                    left: s.clone(),
                    right: s,
                }
            }
            Repr::Modified { base, overrides } => {
                let s: Vec<f64> = base.values().iter().map(|&w| sig(w)).collect();
                if overrides.is_empty() {
                    return LogProfile {
                        lo: 0,
                        hi: -1,
                        explicit: Vec::new(),
                        left: s.clone(),
                        right: s,
                    };
                }
                let lo = *overrides.keys().next().unwrap();
                let hi = *overrides.keys().next_back().unwrap();
                let explicit = (lo..=hi).map(|k| sig(seq.weight_at(k))).collect();
                LogProfile {
                    lo,
                    hi,
                    explicit,
                    left: s.clone(),
                    right: s,
                }
            }
            Repr::Split { left, right, split } => LogProfile {
                lo: *split,
                hi: *split - 1,
                explicit: Vec::new(),
                left: left.values().iter().map(|&w| sig(w)).collect(),
                right: right.values().iter().map(|&w| sig(w)).collect(),
            },
            Repr::Sampled {
                k_min,
                table,
                extension,
            } => LogProfile {
                lo: *k_min,
                hi: *k_min + table.len() as i64 - 1,
                explicit: table.iter().map(|&w| sig(w)).collect(),
                left: vec![sig(*extension)],
                right: vec![sig(*extension)],
            },
        }
    }

    fn sigma(&self, k: i64) -> f64 {
        if k < self.lo {
            self.left[k.rem_euclid(self.left.len() as i64) as usize]
        } else if k > self.hi {
            self.right[k.rem_euclid(self.right.len() as i64) as usize]
        } else {
            self.explicit[(k - self.lo) as usize]
        }
    }

    fn left_period_sum(&self) -> f64 {
        compensated_total(self.left.iter().copied())
    }

    fn right_period_sum(&self) -> f64 {
        compensated_total(self.right.iter().copied())
    }

    /// Balance tolerance for a per-period sum over `q` terms of typical
    /// magnitude `scale`.
    fn balance_tol(pattern: &[f64]) -> f64 {
        let scale = pattern.iter().fold(1.0f64, |m, s| m.max(s.abs()));
        RATE_EQ_TOL * pattern.len() as f64 * scale
    }
}

/// `ℓ` sampled over the finite range that the shrinking argument proves
/// sufficient, normalized so `ℓ_0 = 0` (hence `ℓ_k = ln |d_k|`).
pub(crate) struct EllProfile {
    pub(crate) j0: i64,
    pub(crate) ell: Vec<f64>,
}

pub(crate) fn ell_profile(prof: &LogProfile) -> EllProfile {
    let ql = prof.left.len() as i64;
    let qr = prof.right.len() as i64;
    let start = (prof.lo - 2 * ql).min(0);
    let end = (prof.hi + 1 + 2 * qr).max(0);
    let mut ell = Vec::with_capacity((end - start + 1) as usize);
    let mut acc = CompensatedSum::default();
    ell.push(0.0);
    for k in start..end {
        acc.add(-prof.sigma(k));
        ell.push(acc.value());
    }
    let offset = ell[(0 - start) as usize];
    for v in &mut ell {
        *v -= offset;
    }
    EllProfile { j0: start, ell }
}

fn exact_stats(seq: &WeightSequence, c: f64) -> WindowStats {
    let ln_c = c.ln();
    let prof = LogProfile::for_sequence(seq, ln_c);
    let s_left = prof.left_period_sum();
    let s_right = prof.right_period_sum();
    let z_left = LogProfile::balance_tol(&prof.left);
    let z_right = LogProfile::balance_tol(&prof.right);

    let sup_escape = if s_right > z_right {
        Some(escape_witness(&prof, Side::Right, s_right, c, EscapeDirection::Diverging))
    } else if s_left > z_left {
        Some(escape_witness(&prof, Side::Left, s_left, c, EscapeDirection::Diverging))
    } else {
        None
    };
    let inf_escape = if s_right < -z_right {
        Some(escape_witness(&prof, Side::Right, s_right, c, EscapeDirection::Vanishing))
    } else if s_left < -z_left {
        Some(escape_witness(&prof, Side::Left, s_left, c, EscapeDirection::Vanishing))
    } else {
        None
    };

    let need_pairs = sup_escape.is_none() || inf_escape.is_none();
    let ep = if need_pairs { Some(ell_profile(&prof)) } else { None };

    let sup = match sup_escape {
        Some(e) => SupBound::Divergent(e),
        None => {
            let (value, witness) = attained_sup(ep.as_ref().unwrap());
            SupBound::Attained { value, witness }
        }
    };
    let inf = match inf_escape {
        Some(e) => InfBound::Vanishing(e),
        None => {
            let (value, witness) = attained_inf(ep.as_ref().unwrap());
            InfBound::Attained { value, witness }
        }
    };
    WindowStats {
        c,
        sup,
        inf,
        exact: true,
        horizon: None,
    }
}

enum Side {
    Left,
    Right,
}

/// Maps a period count `m` to the `(k, n)` coordinates of the `m`-th window
/// in an escape family.
type WindowAt = Box<dyn Fn(i64) -> (i64, u32)>;

/// Windows of `m` full periods lying inside one periodic region: log-values
/// are exactly `m·s`, strictly monotone in `m` whenever `s ≠ 0`.
fn escape_witness(
    prof: &LogProfile,
    side: Side,
    s: f64,
    c: f64,
    direction: EscapeDirection,
) -> EscapeWitness {
    let (q, window): (i64, WindowAt) = match side {
        // [lo − m·qL, lo) ends at the explicit region; k = lo − m·qL − 1.
        Side::Left => {
            let ql = prof.left.len() as i64;
            let lo = prof.lo;
            (ql, Box::new(move |m| (lo - m * ql - 1, (m * ql) as u32)))
        }
        // [hi + 1, hi + m·qR] starts right after it; k = hi.
        Side::Right => {
            let qr = prof.right.len() as i64;
            let hi = prof.hi;
            (qr, Box::new(move |m| (hi, (m * qr) as u32)))
        }
    };
    let mk = |m: i64| {
        let (k, n) = window(m);
        WindowWitness {
            k,
            n,
            value: (m as f64 * s).exp(),
        }
    };
    EscapeWitness {
        c_used: c,
        direction,
        step: q as u32,
        windows: [mk(1), mk(2), mk(3)],
    }
}

fn attained_sup(ep: &EllProfile) -> (f64, WindowWitness) {
    let ell = &ep.ell;
    let (mut run_max, mut run_max_at) = (ell[0], 0usize);
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0usize, 1usize);
    for (ip, &v) in ell.iter().enumerate().skip(1) {
        let cand = run_max - v;
        if cand > best {
            best = cand;
            best_pair = (run_max_at, ip);
        }
        if v > run_max {
            run_max = v;
            run_max_at = ip;
        }
    }
    pair_to_witness(ep, best, best_pair)
}

fn attained_inf(ep: &EllProfile) -> (f64, WindowWitness) {
    let ell = &ep.ell;
    let (mut run_min, mut run_min_at) = (ell[0], 0usize);
    let mut best = f64::INFINITY;
    let mut best_pair = (0usize, 1usize);
    for (ip, &v) in ell.iter().enumerate().skip(1) {
        let cand = run_min - v;
        if cand < best {
            best = cand;
            best_pair = (run_min_at, ip);
        }
        if v < run_min {
            run_min = v;
            run_min_at = ip;
        }
    }
    pair_to_witness(ep, best, best_pair)
}

fn pair_to_witness(ep: &EllProfile, ln_value: f64, (i, ip): (usize, usize)) -> (f64, WindowWitness) {
    let value = ln_value.exp();
    (
        value,
        WindowWitness {
            k: ep.j0 + i as i64 - 1,
            n: (ip - i) as u32,
            value,
        },
    )
}

/// Grid scan for sampled tables: all windows with `|k| ≤ horizon`,
/// `1 ≤ n ≤ horizon`, plus the one certificate finite data supports — an
/// escape through the constant extension.
fn horizon_stats(seq: &WeightSequence, c: f64, horizon: u32) -> WindowStats {
    let ln_c = c.ln();
    let h = i64::from(horizon.max(4));
    let mut sup_ln = f64::NEG_INFINITY;
    let mut sup_wit = WindowWitness { k: 0, n: 1, value: 0.0 };
    let mut inf_ln = f64::INFINITY;
    let mut inf_wit = sup_wit;
    for k in -h..=h {
        let mut acc = CompensatedSum::default();
        for n in 1..=h {
            acc.add(ln_c + seq.weight_at(k + n).norm().ln());
            let v = acc.value();
            if v > sup_ln {
                sup_ln = v;
                sup_wit = WindowWitness { k, n: n as u32, value: 0.0 };
            }
            if v < inf_ln {
                inf_ln = v;
                inf_wit = WindowWitness { k, n: n as u32, value: 0.0 };
            }
        }
    }
    sup_wit.value = sup_ln.exp();
    inf_wit.value = inf_ln.exp();

    let (k_past_table, sigma_ext) = match &seq.repr {
        Repr::Sampled {
            k_min,
            table,
            extension,
        } => (
            *k_min + table.len() as i64 - 1,
            ln_c + extension.norm().ln(),
        ),
        _ => unreachable!("horizon_stats is only called for sampled sequences"),
    };
    let z = RATE_EQ_TOL * sigma_ext.abs().max(1.0);
    let ext_escape = |direction| {
        let mk = |m: i64| WindowWitness {
            k: k_past_table,
            n: m as u32,
            value: (m as f64 * sigma_ext).exp(),
        };
        EscapeWitness {
            c_used: c,
            direction,
            step: 1,
            windows: [mk(1), mk(2), mk(3)],
        }
    };

    let sup = if sigma_ext > z {
        SupBound::Divergent(ext_escape(EscapeDirection::Diverging))
    } else {
        SupBound::Attained { value: sup_ln.exp(), witness: sup_wit }
    };
    let inf = if sigma_ext < -z {
        InfBound::Vanishing(ext_escape(EscapeDirection::Vanishing))
    } else {
        InfBound::Attained { value: inf_ln.exp(), witness: inf_wit }
    };
    WindowStats {
        c,
        sup,
        inf,
        exact: false,
        horizon: Some(horizon),
    }
}

/// Exact `sup_k` and `inf_k` of `ln P(k, n)` at fixed `n`, with attaining
/// windows. Pure-side windows repeat with the side's period and every other
/// window touches the explicit stretch, so scanning
/// `k ∈ [lo − n − q_L, hi + q_R]` sees every attainable value.
pub(crate) fn fixed_n_extrema_log(
    seq: &WeightSequence,
    n: u32,
) -> (f64, WindowWitness, f64, WindowWitness) {
    let prof = LogProfile::for_sequence(seq, 0.0);
    let ql = prof.left.len() as i64;
    let qr = prof.right.len() as i64;
    let n_i = i64::from(n.max(1));
    let k_from = prof.lo - n_i - ql;
    let k_to = prof.hi + qr;
    let mut sup_ln = f64::NEG_INFINITY;
    let mut inf_ln = f64::INFINITY;
    let mut sup_wit = WindowWitness { k: 0, n, value: 0.0 };
    let mut inf_wit = sup_wit;
    for k in k_from..=k_to {
        let v = compensated_total((1..=n_i).map(|j| prof.sigma(k + j)));
        if v > sup_ln {
            sup_ln = v;
            sup_wit = WindowWitness { k, n, value: 0.0 };
        }
        if v < inf_ln {
            inf_ln = v;
            inf_wit = WindowWitness { k, n, value: 0.0 };
        }
    }
    sup_wit.value = sup_ln.exp();
    inf_wit.value = inf_ln.exp();
    (sup_ln, sup_wit, inf_ln, inf_wit)
}
