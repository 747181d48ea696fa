//! Checkable consequences of the CIAG convergence analysis: step-size bounds,
//! linear rates, the delayed-perturbation recurrence and its linear
//! convergence lemma, and the IAG/CIAG rate comparison.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Slack allowed between the simulated tail ratio and `p`.
pub const TAIL_RATIO_SLACK: f64 = 1e-6;
/// Default proportional step-size margin: `γ = (1 − margin)·min-term`.
pub const DEFAULT_MARGIN: f64 = 0.1;

const MAX_HORIZON: usize = 1 << 23;

/// Problem constants entering the step-size bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub hessian_lipschitz: f64,
    /// Delay bound `K`.
    pub k: usize,
    /// `V(s) = ‖θ^s − θ★‖²`.
    pub v_s: f64,
    pub epsilon: f64,
}

impl RateConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::invalid(format!("L must be positive, got {}", self.lipschitz)));
        }
        if !(self.hessian_lipschitz >= 0.0 && self.hessian_lipschitz.is_finite()) {
            return Err(Error::invalid(format!("L_H must be >= 0, got {}", self.hessian_lipschitz)));
        }
        if self.k == 0 {
            return Err(Error::invalid("delay bound K must be positive"));
        }
        if !(self.v_s >= 0.0 && self.v_s.is_finite()) {
            return Err(Error::invalid(format!("V_s must be >= 0, got {}", self.v_s)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// The three candidates whose minimum bounds the constant step size.
/// Terms that do not depend on `L_H` and `V_s` being positive are `+∞`.
pub fn stepsize_terms(c: &RateConstants) -> Result<[f64; 3]> {
    c.validate()?;
    let (mu, l, lh, v) = (c.mu, c.lipschitz, c.hessian_lipschitz, c.v_s);
    let k = c.k as f64;
    let first = 2.0 / (mu + l);
    if lh == 0.0 || v == 0.0 {
        return Ok([first, f64::INFINITY, f64::INFINITY]);
    }
    let sv = v.sqrt();
    let second = (mu * l / (lh * (l * l * sv + 16.0 * lh * lh * v * sv) * (mu + l))).sqrt() / (2.0 * k);
    let k4 = k * k * k * k;
    let inner = l.powi(4) * v + 256.0 * lh.powi(4) * v * v * v;
    let third = (mu * l / (8.0 * k4 * lh * lh * inner * (mu + l))).powf(0.2);
    Ok([first, second, third])
}

/// `min` of [`stepsize_terms`].
pub fn stepsize_min_term(c: &RateConstants) -> Result<f64> {
    Ok(stepsize_terms(c)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// The bound as literally stated, `ε + min{…}`. The feasible region used by
/// the harness is `γ ≤ min{…}` (see [`theorem_step`]); this form is kept for
/// comparison.
pub fn stepsize_bound(c: &RateConstants) -> Result<f64> {
    Ok(c.epsilon + stepsize_min_term(c)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgRate {
    /// `1 − 2γμL/(μ+L)` clamped to `[0, 1)`.
    pub value: f64,
    pub raw: f64,
    pub out_of_range: bool,
}

/// Linear rate of full gradient descent, `1 − 2γμL/(μ+L)`.
pub fn fg_rate(gamma: f64, mu: f64, lipschitz: f64) -> FgRate {
    let raw = 1.0 - 2.0 * gamma * mu * lipschitz / (mu + lipschitz);
    let out_of_range = !(0.0..1.0).contains(&raw);
    let value = raw.clamp(0.0, 1.0 - f64::EPSILON);
    FgRate {
        value,
        raw,
        out_of_range,
    }
}

/// `R(k+1) ≤ p R(k) + Σ_j q_j max_{k′ ∈ [k−M+1, k]} R(k′)^{η_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence {
    pub p: f64,
    pub q: Vec<f64>,
    pub eta: Vec<f64>,
    /// Window length `M`.
    pub window: usize,
    pub r0: f64,
}

impl Recurrence {
    pub fn new(p: f64, q: Vec<f64>, eta: Vec<f64>, window: usize, r0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("p must lie in [0, 1), got {p}")));
        }
        if q.len() != eta.len() {
            return Err(Error::invalid(format!("{} q coefficients but {} exponents", q.len(), eta.len())));
        }
        if q.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("q coefficients must be finite and >= 0"));
        }
        if eta.iter().any(|e| !(*e > 1.0 && e.is_finite())) {
            return Err(Error::invalid("exponents must be finite and > 1"));
        }
        if window == 0 {
            return Err(Error::invalid("window length must be positive"));
        }
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(Error::invalid(format!("R0 must be finite and >= 0, got {r0}")));
        }
        Ok(Self { p, q, eta, window, r0 })
    }

    /// `p + Σ_j q_j R0^{η_j − 1}`; the recurrence contracts linearly at rate
    /// `δ` whenever this is at most `δ`.
    pub fn condition_lhs(&self) -> f64 {
        self.p
            + self
                .q
                .iter()
                .zip(&self.eta)
                .map(|(q, e)| if *q == 0.0 { 0.0 } else { q * self.r0.powf(e - 1.0) })
                .sum::<f64>()
    }
}

/// Tight solution of a [`Recurrence`], held as natural logarithms so that
/// long geometric tails do not underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceTrace {
    pub ln_values: Vec<f64>,
    /// Index of the first value that overflows `f64`, if any.
    pub diverged_at: Option<usize>,
}

impl RecurrenceTrace {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn values(&self) -> Vec<f64> {
        self.ln_values.iter().map(|v| v.exp()).collect()
    }

    pub fn value(&self, k: usize) -> f64 {
        self.ln_values[k].exp()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top.is_infinite() {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Simulates the recurrence with equality and the full window, producing
/// `R(0), …, R(k_max)`. Simulation stops early once a value overflows.
pub fn recurrence_simulate(r: &Recurrence, k_max: usize) -> Result<RecurrenceTrace> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let ln_p = r.p.ln();
    let ln_q: Vec<f64> = r.q.iter().map(|q| q.ln()).collect();
    let mut ln_values = Vec::with_capacity(k_max + 1);
    ln_values.push(r.r0.ln());
    // Indices into ln_values with decreasing values: front is the window max.
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut terms = Vec::with_capacity(r.q.len() + 1);
    for k in 0..k_max {
        let cur = ln_values[k];
        while window.back().is_some_and(|&j| ln_values[j] <= cur) {
            window.pop_back();
        }
        window.push_back(k);
        while window.front().is_some_and(|&j| j + r.window <= k) {
            window.pop_front();
        }
        let ln_w = ln_values[*window.front().expect("window holds k")];
        terms.clear();
        terms.push(ln_p + cur);
        for (lq, e) in ln_q.iter().zip(&r.eta) {
            terms.push(lq + e * ln_w);
        }
        let next = log_sum_exp(&terms);
        ln_values.push(next);
        if next > f64::MAX.ln() {
            return Ok(RecurrenceTrace {
                ln_values,
                diverged_at: Some(k + 1),
            });
        }
    }
    Ok(RecurrenceTrace {
        ln_values,
        diverged_at: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lemma2Verdict {
    Passed,
    /// `p + Σ q_j R0^{η_j−1} > δ`; nothing else is checked.
    ConditionViolated,
    /// `R(k) > δ^{⌈k/M⌉} R0`.
    EnvelopeViolated { k: usize, value: f64, bound: f64 },
    /// The tail ratio stayed above `p + 1e-6` up to the maximal horizon.
    TailRatioViolated { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Report {
    pub condition_lhs: f64,
    pub delta: f64,
    pub verdict: Lemma2Verdict,
    /// Largest `R(k+1)/R(k)` over the last tenth of the horizon.
    pub tail_ratio: Option<f64>,
    pub horizon: usize,
}

impl Lemma2Report {
    pub fn passed(&self) -> bool {
        self.verdict == Lemma2Verdict::Passed
    }
}

fn envelope_violation(r: &Recurrence, trace: &RecurrenceTrace, delta: f64) -> Option<Lemma2Verdict> {
    if r.r0 == 0.0 {
        return trace
            .ln_values
            .iter()
            .position(|v| *v > f64::NEG_INFINITY)
            .map(|k| Lemma2Verdict::EnvelopeViolated {
                k,
                value: trace.value(k),
                bound: 0.0,
            });
    }
    let ln_r0 = r.r0.ln();
    let ln_delta = delta.ln();
    for (k, &v) in trace.ln_values.iter().enumerate() {
        let blocks = k.div_ceil(r.window) as f64;
        let bound = if blocks == 0.0 { ln_r0 } else { ln_r0 + blocks * ln_delta };
        // Relative slack for rounding in the log-domain simulation.
        if v > bound + 1e-12 * (1.0 + bound.abs()) {
            return Some(Lemma2Verdict::EnvelopeViolated {
                k,
                value: v.exp(),
                bound: bound.exp(),
            });
        }
    }
    None
}

fn tail_ratio(trace: &RecurrenceTrace) -> f64 {
    let n = trace.ln_values.len() - 1;
    let start = n - n.div_ceil(10).max(1);
    let mut worst = 0.0_f64;
    for k in start..n {
        let (a, b) = (trace.ln_values[k], trace.ln_values[k + 1]);
        let ratio = if b == f64::NEG_INFINITY { 0.0 } else { (b - a).exp() };
        worst = worst.max(ratio);
    }
    worst
}

/// Checks the linear-convergence lemma on the tight sequence of `r`:
/// the condition `p + Σ q_j R0^{η_j−1} ≤ δ`, then the envelope
/// `R(k) ≤ δ^{⌈k/M⌉} R0` and the asymptotic ratio `R(k+1)/R(k) → ≤ p`.
///
/// The horizon is `max(10M, ⌈10M/ln(1/δ)⌉)`, doubled while the tail ratio
/// still exceeds `p + 1e-6` (exponents near 1 approach `p` slowly).
pub fn lemma2_check(r: &Recurrence, delta: f64) -> Result<Lemma2Report> {
    if !(delta >= r.p && delta < 1.0) {
        return Err(Error::invalid(format!("delta must satisfy p <= delta < 1, got {delta} with p = {}", r.p)));
    }
    let condition_lhs = r.condition_lhs();
    let base = 10 * r.window;
    let mut horizon = if delta > 0.0 {
        base.max((base as f64 / (1.0 / delta).ln()).ceil().min(MAX_HORIZON as f64) as usize)
    } else {
        base
    };
    // A few ulps of slack so that boundary cases such as 0.9 + 0.05 vs 0.95
    // are not rejected by rounding.
    if condition_lhs > delta * (1.0 + 8.0 * f64::EPSILON) {
        return Ok(Lemma2Report {
            condition_lhs,
            delta,
            verdict: Lemma2Verdict::ConditionViolated,
            tail_ratio: None,
            horizon: 0,
        });
    }
    loop {
        let trace = recurrence_simulate(r, horizon)?;
        if let Some(verdict) = envelope_violation(r, &trace, delta) {
            return Ok(Lemma2Report {
                condition_lhs,
                delta,
                verdict,
                tail_ratio: None,
                horizon,
            });
        }
        let ratio = tail_ratio(&trace);
        if ratio <= r.p + TAIL_RATIO_SLACK || horizon >= MAX_HORIZON {
            let verdict = if ratio <= r.p + TAIL_RATIO_SLACK {
                Lemma2Verdict::Passed
            } else {
                Lemma2Verdict::TailRatioViolated { ratio }
            };
            return Ok(Lemma2Report {
                condition_lhs,
                delta,
                verdict,
                tail_ratio: Some(ratio),
                horizon,
            });
        }
        horizon = (horizon * 2).min(MAX_HORIZON);
    }
}

/// Recurrence satisfied by `V(k) = ‖θ^k − θ★‖²` for CIAG with step `γ`:
/// `p = 1 − 2γμL/(μ+L)`, `q = (8γ⁶K⁴L_H²L⁴, 2048γ⁶K⁴L_H⁶, 4γ³K²L_H L², 64γ³K²L_H³)`,
/// `η = (2, 4, 3/2, 5/2)`, `M = 2K+1`, `R0 = V_s`.
pub fn ciag_recurrence_constants(c: &RateConstants, gamma: f64) -> Result<Recurrence> {
    c.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {gamma}")));
    }
    let (mu, l, lh) = (c.mu, c.lipschitz, c.hessian_lipschitz);
    let k = c.k as f64;
    let p = fg_rate(gamma, mu, l).raw;
    let g3 = gamma * gamma * gamma;
    let g6 = g3 * g3;
    let k2 = k * k;
    let k4 = k2 * k2;
    let q = vec![
        g6 * 8.0 * k4 * lh * lh * l.powi(4),
        g6 * 2048.0 * k4 * lh.powi(6),
        g3 * 4.0 * k2 * lh * l * l,
        g3 * 64.0 * k2 * lh.powi(3),
    ];
    Recurrence::new(p, q, vec![2.0, 4.0, 1.5, 2.5], 2 * c.k + 1, c.v_s)
}

/// A step size chosen inside the theorem's feasible region together with the
/// contraction factor it guarantees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremStep {
    pub gamma: f64,
    pub min_term: f64,
    /// `δ = p + Σ q_j V_s^{η_j−1}`: `V(k) ≤ δ^{⌈(k−s)/(2K+1)⌉} V(s)`.
    pub delta: f64,
    /// `1 − δ`.
    pub epsilon: f64,
}

/// `γ = (1 − margin)·min{…}` and the resulting rate. `c.epsilon` is ignored.
pub fn theorem_step(c: &RateConstants, margin: f64) -> Result<TheoremStep> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::invalid(format!("margin must lie in (0, 1), got {margin}")));
    }
    let min_term = stepsize_min_term(&RateConstants { epsilon: 0.0, ..*c })?;
    let gamma = (1.0 - margin) * min_term;
    let delta = ciag_recurrence_constants(c, gamma)?.condition_lhs();
    Ok(TheoremStep {
        gamma,
        min_term,
        delta,
        epsilon: 1.0 - delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateComparison {
    /// `√(Q_H/(Q+1))·√(1/(V0^{1/2} + 16V0^{3/2}/Q_H²))`.
    pub lhs: f64,
    /// `1/49`.
    pub threshold: f64,
    /// Approximate CIAG rate constant `lhs/(K(Q+1))`; an estimate only.
    pub ciag_p_estimate: f64,
    /// IAG rate constant `1/(49K(Q+1))`.
    pub iag_p: f64,
    pub ciag_faster: bool,
}

pub fn iag_vs_ciag_condition(q: f64, q_h: f64, v0: f64, k: usize) -> Result<RateComparison> {
    if !(q > 0.0 && q_h > 0.0 && v0 >= 0.0 && k > 0) {
        return Err(Error::invalid("condition numbers and K must be positive, V0 >= 0"));
    }
    let sv = v0.sqrt();
    let denom = sv + 16.0 * v0 * sv / (q_h * q_h);
    let lhs = (q_h / (q + 1.0)).sqrt() * (1.0 / denom).sqrt();
    let scale = 1.0 / (k as f64 * (q + 1.0));
    let threshold = 1.0 / 49.0;
    Ok(RateComparison {
        lhs,
        threshold,
        ciag_p_estimate: scale * lhs,
        iag_p: scale * threshold,
        ciag_faster: lhs > threshold,
    })
}

/// Both sides of the saturation inequality
/// `V^{1/2} + 16V^{3/2}/Q_H² < (1/(16K²))·(Q_H/(Q+1))·((Q+1)/Q)²`.
pub fn saturation_sides(v_s: f64, k: usize, q: f64, q_h: f64) -> (f64, f64) {
    let sv = v_s.sqrt();
    let lhs = if v_s == 0.0 { 0.0 } else { sv + 16.0 * v_s * sv / (q_h * q_h) };
    let kf = k as f64;
    let ratio = (q + 1.0) / q;
    let rhs = q_h / (q + 1.0) * ratio * ratio / (16.0 * kf * kf);
    (lhs, rhs)
}

/// Whether `V_s` is small enough for the largest step `2/(μ+L)` to be admissible.
pub fn saturation_check(v_s: f64, k: usize, q: f64, q_h: f64) -> bool {
    let (lhs, rhs) = saturation_sides(v_s, k, q, q_h);
    lhs < rhs
}
