//! Recession propagation through a directed export network.
//!
//! Each step rescales exports by the importer's GDP growth,
//! `X_ij(t) = X_ij(t−1) · Y_j(t) / Y_j(t−1)`, and then moves each exporter's
//! GDP by its export share times the relative change of its total exports.
//! Under [`UpdateRule::Multiplicative`]
//!
//! ```text
//! Y_i(t+1) = Y_i(t) · (1 + P_i · (X_i(t) / X_i(t−1) − 1))
//! ```
//!
//! where `P_i = X_i / Y_i` is fixed at initialization.
//!
//! An [`EconomyState`] at time `t` pairs `Y(t)` with the exports set by the
//! previous step, `X(t−1)`. A shock or recovery impulse changes only GDP, so
//! the first step after an impulse sees exports that have not reacted yet.

use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{CountryCode, DirectedFlows, GdpTable, IngestError, TradeFlowRecord};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
/// Residual floor, relative to the limit, below which recovery points are
/// left out of the exponential fit.
pub const FIT_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ShockError {
    #[error("no trade flows for year {0}")]
    EmptyFlows(i32),
    #[error("missing GDP for {year}: {}", .countries.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    MissingGdp {
        year: i32,
        countries: Vec<CountryCode>,
    },
    #[error("epicenter {0} is not in the economy")]
    UnknownEpicenter(CountryCode),
    #[error("invalid shock configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid economy state: {0}")]
    InvalidState(String),
    #[error("states describe different economies")]
    SizeMismatch,
    #[error("GDP or exports left the finite positive domain at step {step}")]
    NonFinite { step: usize },
    #[error("no steady state after {steps} steps")]
    NoConvergence {
        steps: usize,
        trace: Box<SimulationTrace>,
    },
    #[error("trace did not converge")]
    NotConverged,
    #[error("impact ratio needs at least two countries")]
    SingleCountryWorld,
    #[error("epicenter GDP did not change")]
    ZeroEpicenterChange,
    #[error("only {0} recovery points below the limit; need 3")]
    InsufficientPoints(usize),
    #[error("series rises above its limit; not an approach from below")]
    NonPositiveResiduals,
    #[error("fitted recovery rate {0} is not positive")]
    NonPositiveRate(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum UpdateRule {
    /// Percentage GDP change equals export share times percentage export change.
    #[default]
    Multiplicative,
    /// `Y_i(t+1) = Y_i(t) + P_i · (X_i(t)/X_i(t−1) − 1)`, taken literally.
    LiteralAdditive,
}

impl FromStr for UpdateRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multiplicative" => Ok(UpdateRule::Multiplicative),
            "literal" | "literal-additive" => Ok(UpdateRule::LiteralAdditive),
            other => Err(format!("unknown update rule {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockConfig {
    pub epicenter: CountryCode,
    /// Fractional GDP loss imposed on the epicenter, in `(0, 1)`.
    pub shock_fraction: f64,
    /// Convergence threshold on the largest relative per-step GDP change.
    pub tolerance: f64,
    pub max_steps: usize,
    pub update_rule: UpdateRule,
}

impl ShockConfig {
    pub fn new(epicenter: CountryCode, shock_fraction: f64) -> Self {
        ShockConfig {
            epicenter,
            shock_fraction,
            tolerance: DEFAULT_TOLERANCE,
            max_steps: DEFAULT_MAX_STEPS,
            update_rule: UpdateRule::default(),
        }
    }

    fn validate(&self) -> Result<(), ShockError> {
        if !(self.shock_fraction > 0.0 && self.shock_fraction < 1.0) {
            return Err(ShockError::InvalidConfig(format!(
                "shock fraction {} outside (0, 1)",
                self.shock_fraction
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(ShockError::InvalidConfig(format!(
                "tolerance {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EconomyState {
    countries: Vec<CountryCode>,
    gdp: Vec<f64>,
    /// Row-major `X_ij`, exports from `i` to `j`.
    exports: Vec<f64>,
    export_share: Vec<f64>,
}

impl EconomyState {
    /// Builds an initial state; export shares are computed here and never
    /// updated afterwards.
    pub fn new(
        countries: Vec<CountryCode>,
        gdp: Vec<f64>,
        exports: Vec<f64>,
    ) -> Result<Self, ShockError> {
        let n = countries.len();
        if gdp.len() != n || exports.len() != n * n {
            return Err(ShockError::InvalidState("dimension mismatch".into()));
        }
        if gdp.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
            return Err(ShockError::InvalidState(
                "GDP must be finite and positive".into(),
            ));
        }
        if exports.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(ShockError::InvalidState(
                "exports must be finite and nonnegative".into(),
            ));
        }
        if (0..n).any(|i| exports[i * n + i] != 0.0) {
            return Err(ShockError::InvalidState("self-exports must be zero".into()));
        }
        let export_share: Vec<f64> = (0..n)
            .map(|i| exports[i * n..(i + 1) * n].iter().sum::<f64>() / gdp[i])
            .collect();
        for (c, p) in countries.iter().zip(&export_share) {
            if *p >= 1.0 {
                log::warn!("{c} exports exceed its GDP (export share {p})");
            }
        }
        Ok(EconomyState {
            countries,
            gdp,
            exports,
            export_share,
        })
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn gdp(&self) -> &[f64] {
        &self.gdp
    }

    pub fn exports(&self, i: usize, j: usize) -> f64 {
        self.exports[i * self.len() + j]
    }

    pub fn total_exports(&self, i: usize) -> f64 {
        let n = self.len();
        self.exports[i * n..(i + 1) * n].iter().sum()
    }

    /// `P_i`, frozen at initialization.
    pub fn export_share(&self) -> &[f64] {
        &self.export_share
    }

    pub fn world_gdp(&self) -> f64 {
        self.gdp.iter().sum()
    }

    pub fn index_of(&self, country: &CountryCode) -> Option<usize> {
        self.countries.iter().position(|c| c == country)
    }

    fn with_gdp_at(&self, idx: usize, value: f64) -> Self {
        let mut next = self.clone();
        next.gdp[idx] = value;
        next
    }
}

/// Initial state from one year's directed flows and GDP.
pub fn init_state(
    records: &[TradeFlowRecord],
    year: i32,
    gdp: &GdpTable,
) -> Result<EconomyState, ShockError> {
    let flows = DirectedFlows::from_records(records, year).map_err(|e| match e {
        IngestError::EmptyYear(y) => ShockError::EmptyFlows(y),
        other => ShockError::InvalidState(other.to_string()),
    })?;
    init_state_from_flows(&flows, gdp)
}

pub fn init_state_from_flows(
    flows: &DirectedFlows,
    gdp: &GdpTable,
) -> Result<EconomyState, ShockError> {
    let countries = flows.countries().to_vec();
    let mut values = Vec::with_capacity(countries.len());
    let mut missing = Vec::new();
    for c in &countries {
        match gdp.get(flows.year, c) {
            Some(y) => values.push(y),
            None => missing.push(c.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(ShockError::MissingGdp {
            year: flows.year,
            countries: missing,
        });
    }
    EconomyState::new(countries, values, flows.values().to_vec())
}

/// Cuts the epicenter's GDP by the configured fraction.
pub fn apply_shock(state: &EconomyState, config: &ShockConfig) -> Result<EconomyState, ShockError> {
    let e = state
        .index_of(&config.epicenter)
        .ok_or_else(|| ShockError::UnknownEpicenter(config.epicenter.clone()))?;
    Ok(state.with_gdp_at(e, (1.0 - config.shock_fraction) * state.gdp[e]))
}

/// Advances one step: `prev` holds `Y(t−1)`, `cur` holds `Y(t)` and
/// `X(t−1)`; the result holds `Y(t+1)` and `X(t)`.
pub fn step(
    prev: &EconomyState,
    cur: &EconomyState,
    rule: UpdateRule,
) -> Result<EconomyState, ShockError> {
    let n = cur.len();
    if prev.len() != n || prev.export_share != cur.export_share {
        return Err(ShockError::SizeMismatch);
    }
    let growth: Vec<f64> = cur
        .gdp
        .iter()
        .zip(&prev.gdp)
        .map(|(y, yp)| y / yp)
        .collect();
    let mut exports = vec![0.0; n * n];
    let mut gdp = Vec::with_capacity(n);
    for i in 0..n {
        let row = i * n..(i + 1) * n;
        let mut before = 0.0;
        let mut after = 0.0;
        for (j, (x_new, x_old)) in exports[row.clone()]
            .iter_mut()
            .zip(&cur.exports[row])
            .enumerate()
        {
            *x_new = x_old * growth[j];
            before += x_old;
            after += *x_new;
        }
        let y = cur.gdp[i];
        gdp.push(if before > 0.0 {
            let rel = after / before - 1.0;
            match rule {
                UpdateRule::Multiplicative => y * (1.0 + cur.export_share[i] * rel),
                UpdateRule::LiteralAdditive => y + cur.export_share[i] * rel,
            }
        } else {
            y
        });
    }
    if gdp.iter().any(|y| !(y.is_finite() && *y > 0.0)) || exports.iter().any(|x| !x.is_finite()) {
        return Err(ShockError::NonFinite { step: 0 });
    }
    Ok(EconomyState {
        countries: cur.countries.clone(),
        gdp,
        exports,
        export_share: cur.export_share.clone(),
    })
}

/// GDP history of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub countries: Vec<CountryCode>,
    /// `steps[t]` is the GDP vector at time `t`; `t = 0` precedes the impulse.
    pub steps: Vec<Vec<f64>>,
    pub world_gdp: Vec<f64>,
    pub converged: bool,
    /// First time index after the impulse.
    pub impulse_step: usize,
    final_state: EconomyState,
}

impl SimulationTrace {
    /// The last simulated state, from which a recovery can be started.
    pub fn final_state(&self) -> &EconomyState {
        &self.final_state
    }

    /// Number of `step` evaluations performed.
    pub fn iterations(&self) -> usize {
        self.steps.len().saturating_sub(self.impulse_step + 1)
    }
}

fn max_relative_change(next: &[f64], cur: &[f64]) -> f64 {
    next.iter()
        .zip(cur)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max)
}

fn iterate(
    before: EconomyState,
    after: EconomyState,
    config: &ShockConfig,
) -> Result<SimulationTrace, ShockError> {
    let mut steps = vec![before.gdp.clone(), after.gdp.clone()];
    let (mut prev, mut cur) = (before, after);
    let mut converged = false;
    for k in 0..config.max_steps {
        let next = step(&prev, &cur, config.update_rule).map_err(|e| match e {
            ShockError::NonFinite { .. } => ShockError::NonFinite { step: k + 2 },
            other => other,
        })?;
        let change = max_relative_change(&next.gdp, &cur.gdp);
        steps.push(next.gdp.clone());
        prev = std::mem::replace(&mut cur, next);
        if change < config.tolerance {
            converged = true;
            break;
        }
    }
    let trace = SimulationTrace {
        countries: cur.countries.clone(),
        world_gdp: steps.iter().map(|y| y.iter().sum()).collect(),
        steps,
        converged,
        impulse_step: 1,
        final_state: cur,
    };
    if converged {
        Ok(trace)
    } else {
        Err(ShockError::NoConvergence {
            steps: config.max_steps,
            trace: Box::new(trace),
        })
    }
}

/// Shocks the epicenter and iterates to steady state. The epicenter is not
/// held fixed after the impulse.
pub fn run_to_steady(
    initial: &EconomyState,
    config: &ShockConfig,
) -> Result<SimulationTrace, ShockError> {
    config.validate()?;
    let shocked = apply_shock(initial, config)?;
    iterate(initial.clone(), shocked, config)
}

/// Restores the epicenter's GDP to `initial_epicenter_gdp` and iterates the
/// same dynamics to a new steady state.
pub fn run_recovery(
    steady: &EconomyState,
    initial_epicenter_gdp: f64,
    config: &ShockConfig,
) -> Result<SimulationTrace, ShockError> {
    let e = steady
        .index_of(&config.epicenter)
        .ok_or_else(|| ShockError::UnknownEpicenter(config.epicenter.clone()))?;
    if !(initial_epicenter_gdp.is_finite() && initial_epicenter_gdp > 0.0) {
        return Err(ShockError::InvalidConfig(format!(
            "restored GDP {initial_epicenter_gdp}"
        )));
    }
    let restored = steady.with_gdp_at(e, initial_epicenter_gdp);
    iterate(steady.clone(), restored, config)
}

/// Relative change of world GDP between the first and last step.
pub fn world_gdp_change(trace: &SimulationTrace) -> Result<f64, ShockError> {
    if !trace.converged {
        return Err(ShockError::NotConverged);
    }
    let (first, last) = endpoints(trace);
    let delta: f64 = last.iter().zip(first).map(|(b, a)| b - a).sum();
    Ok(delta / first.iter().sum::<f64>())
}

fn endpoints(trace: &SimulationTrace) -> (&[f64], &[f64]) {
    (
        trace.steps.first().expect("trace is nonempty"),
        trace.steps.last().expect("trace is nonempty"),
    )
}

/// Percentage change of the rest of the world over that of the epicenter.
pub fn impact_ratio(trace: &SimulationTrace, epicenter: &CountryCode) -> Result<f64, ShockError> {
    if !trace.converged {
        return Err(ShockError::NotConverged);
    }
    if trace.countries.len() < 2 {
        return Err(ShockError::SingleCountryWorld);
    }
    let e = trace
        .countries
        .iter()
        .position(|c| c == epicenter)
        .ok_or_else(|| ShockError::UnknownEpicenter(epicenter.clone()))?;
    let (first, last) = endpoints(trace);
    let epicenter_change = (last[e] - first[e]) / first[e];
    if epicenter_change == 0.0 {
        return Err(ShockError::ZeroEpicenterChange);
    }
    let rest = |y: &[f64]| -> f64 {
        y.iter()
            .enumerate()
            .filter(|(i, _)| *i != e)
            .map(|(_, v)| v)
            .sum()
    };
    let rest_delta: f64 = (0..first.len())
        .filter(|&i| i != e)
        .map(|i| last[i] - first[i])
        .sum();
    Ok((rest_delta / rest(first)) / epicenter_change)
}

/// Parameters of `W(t) ≈ y_inf − a · exp(−lambda · t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryFit {
    /// Recovery rate per simulation step.
    pub lambda: f64,
    pub a: f64,
    pub y_inf: f64,
}

/// Fits the post-impulse part of a converged recovery trace.
pub fn fit_recovery(trace: &SimulationTrace) -> Result<RecoveryFit, ShockError> {
    if !trace.converged {
        return Err(ShockError::NotConverged);
    }
    fit_exponential_approach(&trace.world_gdp, trace.impulse_step)
}

/// Limit of a series, extrapolated from its last three values when they
/// approach geometrically from below, otherwise the last value.
fn extrapolated_limit(series: &[f64]) -> f64 {
    let last = series[series.len() - 1];
    if series.len() < 3 {
        return last;
    }
    let [w0, w1, w2] = [series[series.len() - 3], series[series.len() - 2], last];
    let (d1, d2) = (w1 - w0, w2 - w1);
    if d1 > 0.0 && d2 > 0.0 && d2 < d1 {
        let ratio = d2 / d1;
        w2 + d2 * ratio / (1.0 - ratio)
    } else {
        last
    }
}

/// Least-squares fit of `ln(y_inf − W(t))` against `t` over `t ≥ first`,
/// using only points whose residual exceeds [`FIT_EPSILON`]` · y_inf`.
pub fn fit_exponential_approach(series: &[f64], first: usize) -> Result<RecoveryFit, ShockError> {
    let window = series.get(first..).unwrap_or(&[]);
    if window.len() < 3 {
        return Err(ShockError::InsufficientPoints(
            window.len().min(series.len()),
        ));
    }
    let y_inf = extrapolated_limit(window);
    let floor = FIT_EPSILON * y_inf.abs();
    if window.iter().any(|w| y_inf - w < -floor) {
        return Err(ShockError::NonPositiveResiduals);
    }
    let points: Vec<(f64, f64)> = window
        .iter()
        .enumerate()
        .filter(|(_, w)| y_inf - **w > floor)
        .map(|(k, w)| ((first + k) as f64, (y_inf - w).ln()))
        .collect();
    if points.len() < 3 {
        return Err(ShockError::InsufficientPoints(points.len()));
    }
    let len = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / len;
    let l_mean = points.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = points
        .iter()
        .map(|(t, l)| (t - t_mean) * (l - l_mean))
        .sum();
    let sxx: f64 = points.iter().map(|(t, _)| (t - t_mean).powi(2)).sum();
    let slope = sxy / sxx;
    let lambda = -slope;
    if !(lambda > 0.0) {
        return Err(ShockError::NonPositiveRate(lambda));
    }
    Ok(RecoveryFit {
        lambda,
        a: (l_mean - slope * t_mean).exp(),
        y_inf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(s: &str) -> CountryCode {
        s.parse().unwrap()
    }

    /// Two equal economies trading 10 each way.
    fn two_country() -> EconomyState {
        EconomyState::new(
            vec![cc("USA"), cc("WLD")],
            vec![100.0, 100.0],
            vec![0.0, 10.0, 10.0, 0.0],
        )
        .unwrap()
    }

    fn config() -> ShockConfig {
        ShockConfig::new(cc("USA"), 0.054)
    }

    /// Independent re-implementation of the recurrence on plain vectors.
    fn oracle(y0: &[f64], x0: &[Vec<f64>], e: usize, s: f64, tol: f64) -> Vec<Vec<f64>> {
        let n = y0.len();
        let p: Vec<f64> = (0..n).map(|i| x0[i].iter().sum::<f64>() / y0[i]).collect();
        let mut yp = y0.to_vec();
        let mut y = y0.to_vec();
        y[e] *= 1.0 - s;
        let mut x = x0.to_vec();
        let mut out = vec![yp.clone(), y.clone()];
        loop {
            let xn: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| x[i][j] * y[j] / yp[j]).collect())
                .collect();
            let yn: Vec<f64> = (0..n)
                .map(|i| {
                    let (a, b): (f64, f64) = (xn[i].iter().sum(), x[i].iter().sum());
                    if b > 0.0 {
                        y[i] * (1.0 + p[i] * (a / b - 1.0))
                    } else {
                        y[i]
                    }
                })
                .collect();
            let ch = (0..n)
                .map(|i| ((yn[i] - y[i]) / y[i]).abs())
                .fold(0.0, f64::max);
            out.push(yn.clone());
            yp = std::mem::replace(&mut y, yn);
            x = xn;
            if ch < tol {
                return out;
            }
        }
    }

    #[test]
    fn export_shares() {
        let s = two_country();
        assert_eq!(s.export_share(), &[0.1, 0.1]);
        let lone = EconomyState::new(
            vec![cc("AAA"), cc("BBB")],
            vec![5.0, 5.0],
            vec![0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(lone.export_share()[1], 0.0);
    }

    #[test]
    fn init_from_records() {
        let rec = |r: &str, p: &str, v| TradeFlowRecord {
            year: 2000,
            reporter: cc(r),
            partner: cc(p),
            export_value: v,
        };
        let flows = [rec("USA", "WLD", 10.0), rec("WLD", "USA", 10.0)];
        let mut gdp = GdpTable::default();
        gdp.insert(2000, cc("USA"), 100.0);
        assert!(matches!(
            init_state(&flows, 2000, &gdp),
            Err(ShockError::MissingGdp { .. })
        ));
        gdp.insert(2000, cc("WLD"), 100.0);
        assert_eq!(init_state(&flows, 2000, &gdp).unwrap(), two_country());
        assert!(matches!(
            init_state(&flows, 1999, &gdp),
            Err(ShockError::EmptyFlows(1999))
        ));
    }

    #[test]
    fn shock_applied_to_epicenter() {
        let shocked = apply_shock(&two_country(), &config()).unwrap();
        assert!((shocked.gdp()[0] - 94.6).abs() < 1e-12);
        assert_eq!(shocked.gdp()[1], 100.0);
        let tiny = ShockConfig::new(cc("USA"), 1e-300);
        assert_eq!(apply_shock(&two_country(), &tiny).unwrap(), two_country());
        let far = ShockConfig::new(cc("FRA"), 0.054);
        assert!(matches!(
            apply_shock(&two_country(), &far),
            Err(ShockError::UnknownEpicenter(_))
        ));
    }

    #[test]
    fn hand_iterates() {
        let s0 = two_country();
        let s1 = apply_shock(&s0, &config()).unwrap();
        let s2 = step(&s0, &s1, UpdateRule::Multiplicative).unwrap();
        assert!((s2.exports(1, 0) - 9.46).abs() < 1e-12);
        assert_eq!(s2.exports(0, 1), 10.0);
        assert!((s2.gdp()[1] - 99.46).abs() < 1e-12);
        assert!((s2.gdp()[0] - 94.6).abs() < 1e-12);
        let s3 = step(&s1, &s2, UpdateRule::Multiplicative).unwrap();
        assert!((s3.exports(0, 1) - 9.946).abs() < 1e-12);
        assert!((s3.gdp()[0] - 94.548916).abs() < 1e-12);
    }

    #[test]
    fn literal_rule_adds_raw_increment() {
        let s0 = two_country();
        let s1 = apply_shock(&s0, &config()).unwrap();
        let s2 = step(&s0, &s1, UpdateRule::LiteralAdditive).unwrap();
        assert!((s2.gdp()[1] - (100.0 + 0.1 * (0.946 - 1.0))).abs() < 1e-12);
    }

    #[test]
    fn converged_two_country_matches_oracle() {
        let trace = run_to_steady(&two_country(), &config()).unwrap();
        let expected = oracle(
            &[100.0, 100.0],
            &[vec![0.0, 10.0], vec![10.0, 0.0]],
            0,
            0.054,
            1e-10,
        );
        assert_eq!(trace.steps.len(), expected.len());
        for (a, b) in trace.steps.iter().zip(&expected) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-9 * y);
            }
        }
        let last = trace.steps.last().unwrap();
        assert!((last[0] - 94.548_400_28).abs() < 1e-6);
        assert!((last[1] - 99.454_574_91).abs() < 1e-6);
        assert!((world_gdp_change(&trace).unwrap() + 0.029_985_124).abs() < 1e-8);
        assert!((impact_ratio(&trace, &cc("USA")).unwrap() - 0.100_048_631).abs() < 1e-8);
    }

    #[test]
    fn zero_trade_never_propagates() {
        let s = EconomyState::new(vec![cc("USA"), cc("WLD")], vec![100.0, 100.0], vec![0.0; 4])
            .unwrap();
        let trace = run_to_steady(&s, &config()).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert!(trace.steps.iter().all(|y| y[1] == 100.0));
        assert_eq!(trace.steps[1], trace.steps[2]);
        assert!((world_gdp_change(&trace).unwrap() + 0.027).abs() < 1e-15);
        assert_eq!(impact_ratio(&trace, &cc("USA")).unwrap(), 0.0);
        let rec = run_recovery(trace.final_state(), 100.0, &config()).unwrap();
        assert_eq!(rec.world_gdp[1], 200.0);
        assert!(matches!(
            fit_recovery(&rec),
            Err(ShockError::InsufficientPoints(_))
        ));
    }

    #[test]
    fn zero_tolerance_never_converges() {
        let cfg = ShockConfig {
            tolerance: 0.0,
            max_steps: 50,
            ..config()
        };
        match run_to_steady(&two_country(), &cfg) {
            Err(ShockError::NoConvergence { steps, trace }) => {
                assert_eq!(steps, 50);
                assert_eq!(trace.steps.len(), 52);
                assert!(!trace.converged);
                assert!(matches!(
                    world_gdp_change(&trace),
                    Err(ShockError::NotConverged)
                ));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        for s in [0.0, 1.0, -0.1, f64::NAN] {
            let cfg = ShockConfig::new(cc("USA"), s);
            assert!(matches!(
                run_to_steady(&two_country(), &cfg),
                Err(ShockError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn recovery_rises_monotonically() {
        let cfg = config();
        let shock = run_to_steady(&two_country(), &cfg).unwrap();
        let rec = run_recovery(shock.final_state(), 100.0, &cfg).unwrap();
        assert!(rec.world_gdp[1..].windows(2).all(|w| w[1] >= w[0]));
        let fit = fit_recovery(&rec).unwrap();
        assert!(fit.lambda > 0.0);
        assert!(fit.y_inf >= *rec.world_gdp.last().unwrap());
    }

    #[test]
    fn recovery_to_same_value_is_flat() {
        let cfg = config();
        let shock = run_to_steady(&two_country(), &cfg).unwrap();
        let steady = shock.final_state();
        let rec = run_recovery(steady, steady.gdp()[0], &cfg).unwrap();
        assert_eq!(rec.iterations(), 1);
        assert!(rec.world_gdp.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn shock_then_restore_is_identity() {
        let s0 = two_country();
        let shocked = apply_shock(&s0, &config()).unwrap();
        assert_eq!(shocked.with_gdp_at(0, s0.gdp()[0]), s0);
    }

    #[test]
    fn fit_exact_exponential() {
        let w: Vec<f64> = (0..=20)
            .map(|t| 100.0 - 5.0 * (-0.3 * f64::from(t)).exp())
            .collect();
        let fit = fit_exponential_approach(&w, 0).unwrap();
        assert!((fit.lambda - 0.3).abs() < 1e-9, "{}", fit.lambda);
        assert!((fit.a - 5.0).abs() < 1e-9, "{}", fit.a);
        assert!((fit.y_inf - 100.0).abs() < 1e-9);
        assert!(matches!(
            fit_exponential_approach(&[1.0; 10], 0),
            Err(ShockError::InsufficientPoints(_))
        ));
        assert!(matches!(
            fit_exponential_approach(&[1.0, 3.0, 2.0, 2.5, 2.2], 0),
            Err(ShockError::NonPositiveResiduals)
        ));
    }

    #[test]
    fn deterministic_traces() {
        let a = run_to_steady(&two_country(), &config()).unwrap();
        let b = run_to_steady(&two_country(), &config()).unwrap();
        for (x, y) in a.world_gdp.iter().zip(&b.world_gdp) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn shock_bounded_by_initial_values() {
        // Three countries, uneven trade, all export shares below one.
        let c = vec![cc("AAA"), cc("BBB"), cc("CCC")];
        let x = vec![0.0, 5.0, 1.0, 4.0, 0.0, 3.0, 2.0, 2.0, 0.0];
        let s = EconomyState::new(c, vec![50.0, 30.0, 20.0], x).unwrap();
        let trace = run_to_steady(&s, &ShockConfig::new(cc("AAA"), 0.2)).unwrap();
        for y in &trace.steps {
            for (v, v0) in y.iter().zip(&trace.steps[0]) {
                assert!(*v > 0.0 && v <= v0);
            }
        }
        assert!(trace.world_gdp.last().unwrap() <= &trace.world_gdp[0]);
    }
}
