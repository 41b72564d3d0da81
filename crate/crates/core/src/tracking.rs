//! Following modes across a frequency sweep by far-field correlation.
//!
//! At each step every candidate pair (live trace, new mode) is scored by
//! `|F_mᴴ blockdiag(Λ,Λ) F_n|` and pairs are accepted greedily in descending
//! order. Before scoring, each degenerate eigenspace of the new step is
//! rotated onto the traces it continues (orthogonal Procrustes), because the
//! basis inside such a space is otherwise arbitrary.

use crate::error::{Error, Result};
use crate::linalg::{svd, weighted_dot, CMat, C64};
use crate::modes::{characteristic_angle, ModeSet};

/// Mode sets of one sweep on a shared rule, in ascending frequency.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub frequencies: Vec<f64>,
    pub modesets: Vec<ModeSet>,
}

impl SweepResult {
    pub fn new(frequencies: Vec<f64>, modesets: Vec<ModeSet>) -> Result<Self> {
        if frequencies.len() != modesets.len() {
            return Err(Error::DimensionMismatch {
                what: "sweep mode sets".into(),
                expected: frequencies.len(),
                found: modesets.len(),
            });
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("sweep frequencies must be strictly increasing".into()));
        }
        if let Some(first) = modesets.first() {
            for (step, m) in modesets.iter().enumerate().skip(1) {
                if m.rule.points != first.rule.points || m.rule.weights != first.rule.weights {
                    return Err(Error::RuleMismatch { step });
                }
            }
        }
        Ok(SweepResult { frequencies, modesets })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrackingOptions {
    /// Modes with `|t|` below this are not tracked.
    pub min_significance: f64,
    /// Matches weaker than this end the trace; the mode starts a new one.
    pub min_correlation: f64,
    /// Relative eigenvalue distance below which modes share an eigenspace.
    pub degeneracy_tolerance: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        TrackingOptions { min_significance: 1e-3, min_correlation: 0.7, degeneracy_tolerance: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub mode: usize,
    /// Correlation with the previous step; `None` on the first step.
    pub correlation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub id: usize,
    pub steps: Vec<TraceStep>,
    /// Started after the first frequency.
    pub orphan: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackedTraces {
    pub traces: Vec<Trace>,
}

/// `|aᴴ W b|`, clamped into `[0, 1]`.
pub fn correlation(a: &[C64], weights: &[f64], b: &[C64]) -> f64 {
    weighted_dot(a, weights, b).norm().min(1.0)
}

pub fn track(sweep: &SweepResult, options: TrackingOptions) -> Result<TrackedTraces> {
    let mut out = TrackedTraces::default();
    let Some(first) = sweep.modesets.first() else {
        return Ok(out);
    };
    let weights = first.inner_weights();

    // Live traces: (trace index, vector used for the next comparison).
    let mut live: Vec<(usize, Vec<C64>)> = Vec::new();
    for n in significant(first, options.min_significance) {
        out.traces.push(Trace {
            id: out.traces.len(),
            steps: vec![TraceStep { step: 0, mode: n, correlation: None }],
            orphan: false,
        });
        live.push((out.traces.len() - 1, first.far_field(n)));
    }

    for (step, modes) in sweep.modesets.iter().enumerate().skip(1) {
        let candidates = significant(modes, options.min_significance);
        let mut vectors: Vec<Vec<C64>> = candidates.iter().map(|&n| modes.far_field(n)).collect();
        align_degenerate(modes, &candidates, &mut vectors, &live, &weights, options)?;

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (li, (_, prev)) in live.iter().enumerate() {
            for (ci, v) in vectors.iter().enumerate() {
                let c = correlation(prev, &weights, v);
                if c >= options.min_correlation {
                    pairs.push((c, li, ci));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(live[a.1].0.cmp(&live[b.1].0)).then(a.2.cmp(&b.2)));

        let mut live_taken = vec![false; live.len()];
        let mut cand_taken = vec![false; candidates.len()];
        let mut next: Vec<(usize, Vec<C64>)> = Vec::new();
        for (c, li, ci) in pairs {
            if live_taken[li] || cand_taken[ci] {
                continue;
            }
            live_taken[li] = true;
            cand_taken[ci] = true;
            let trace = live[li].0;
            out.traces[trace].steps.push(TraceStep { step, mode: candidates[ci], correlation: Some(c) });
            next.push((trace, vectors[ci].clone()));
        }
        for (ci, &n) in candidates.iter().enumerate() {
            if !cand_taken[ci] {
                out.traces.push(Trace {
                    id: out.traces.len(),
                    steps: vec![TraceStep { step, mode: n, correlation: None }],
                    orphan: true,
                });
                next.push((out.traces.len() - 1, vectors[ci].clone()));
            }
        }
        next.sort_by_key(|e| e.0);
        live = next;
    }
    Ok(out)
}

fn significant(modes: &ModeSet, floor: f64) -> Vec<usize> {
    (0..modes.len()).filter(|&n| modes.eigenvalues[n].norm() >= floor).collect()
}

/// Rotates every degenerate group of candidate vectors onto the live traces
/// that overlap it most.
fn align_degenerate(
    modes: &ModeSet,
    candidates: &[usize],
    vectors: &mut [Vec<C64>],
    live: &[(usize, Vec<C64>)],
    weights: &[f64],
    options: TrackingOptions,
) -> Result<()> {
    let scale = modes.eigenvalues.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let tolerance = options.degeneracy_tolerance * scale;
    let mut assigned = vec![false; candidates.len()];
    for start in 0..candidates.len() {
        if assigned[start] {
            continue;
        }
        let t0 = modes.eigenvalues[candidates[start]];
        let group: Vec<usize> = (start..candidates.len())
            .filter(|&j| !assigned[j] && (modes.eigenvalues[candidates[j]] - t0).norm() <= tolerance)
            .collect();
        group.iter().for_each(|&j| assigned[j] = true);
        let d = group.len();
        if d < 2 || live.len() < d {
            continue;
        }
        // Overlap of each live trace with the group's span.
        let overlaps: Vec<Vec<C64>> =
            live.iter().map(|(_, p)| group.iter().map(|&j| weighted_dot(&vectors[j], weights, p)).collect()).collect();
        let mut ranked: Vec<usize> = (0..live.len()).collect();
        let strength = |i: usize| overlaps[i].iter().map(|z| z.norm_sqr()).sum::<f64>();
        ranked.sort_by(|&a, &b| strength(b).total_cmp(&strength(a)).then(live[a].0.cmp(&live[b].0)));
        let chosen = &ranked[..d];
        // M = Wᴴ Λ P over the chosen predecessors; rotation U Vᴴ.
        let m = CMat::from_fn(d, d, |r, c| overlaps[chosen[c]][r]);
        let (u, _, v) = svd(&m)?;
        let rotation = &u * v.adjoint();
        let dim = vectors[group[0]].len();
        let rotated: Vec<Vec<C64>> = (0..d)
            .map(|c| (0..dim).map(|i| (0..d).map(|r| vectors[group[r]][i] * rotation[(r, c)]).sum()).collect())
            .collect();
        for (slot, &j) in group.iter().enumerate() {
            vectors[j] = rotated[slot].clone();
        }
    }
    Ok(())
}

/// One row of the long-format trace table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub trace_id: usize,
    pub frequency_hz: f64,
    pub t: C64,
    pub alpha: f64,
    pub significance: f64,
    pub correlation: Option<f64>,
}

/// Column order of the exported trace table.
pub const TRACE_COLUMNS: [&str; 7] =
    ["trace_id", "frequency_hz", "re_t", "im_t", "alpha_n", "significance", "correlation"];

pub fn trace_export(traces: &TrackedTraces, sweep: &SweepResult, floor: f64) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for trace in &traces.traces {
        for s in &trace.steps {
            let t = sweep.modesets[s.step].eigenvalues[s.mode];
            rows.push(TraceRow {
                trace_id: trace.id,
                frequency_hz: sweep.frequencies[s.step],
                t,
                alpha: characteristic_angle(t, floor).0,
                significance: t.norm(),
                correlation: s.correlation,
            });
        }
    }
    rows
}
