//! Static base/peak forward hedges: payoffs, Monte-Carlo expected loss,
//! box-constrained position search and the average-load comparator.

use crate::error::{Error, Result};
use crate::marketdata::{classify_hour, HourClass, HourlySeries, YearMonth};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

/// Smallest admissible base volume.
pub const V_MIN: f64 = 1e-6;
/// Upper bound of both volumes, in fractions of the maximum load.
pub const V_MAX: f64 = 2.0;
/// Payoffs (GBP/MWh x normalized volume) are divided by this before the
/// exponential loss.
pub const PAYOFF_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeTerms {
    pub base: f64,
    pub peak: f64,
    pub delta_base: f64,
    pub delta_peak: f64,
    pub retailer_share: f64,
}

impl HedgeTerms {
    pub fn new(base: f64, peak: f64) -> Result<Self> {
        let t = HedgeTerms {
            base,
            peak,
            delta_base: 0.0,
            delta_peak: 0.0,
            retailer_share: 0.015,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base.is_finite()
            && self.base > 0.0
            && self.peak.is_finite()
            && self.peak >= self.base)
        {
            return Err(Error::InvalidInput(format!(
                "forward prices need 0 < base <= peak (base {}, peak {})",
                self.base, self.peak
            )));
        }
        if !(self.delta_base >= 0.0 && self.delta_peak >= 0.0) {
            return Err(Error::InvalidInput("margins must be nonnegative".into()));
        }
        if !(self.retailer_share > 0.0 && self.retailer_share <= 1.0) {
            return Err(Error::Config(format!(
                "retailer_share {} outside (0, 1]",
                self.retailer_share
            )));
        }
        Ok(())
    }
}

/// Base and peak volumes in fractions of the maximum load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub v_base: f64,
    pub v_peak: f64,
}

impl Position {
    pub fn new(v_base: f64, v_peak: f64) -> Self {
        Position { v_base, v_peak }
    }
}

/// `F~ = F^p - V^b / (V^b + V^p) * (F^p - F^b)`.
pub fn effective_forward(pos: Position, terms: &HedgeTerms) -> Result<f64> {
    let total = pos.v_base + pos.v_peak;
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "effective forward undefined for zero total volume".into(),
        ));
    }
    let f = terms.peak - pos.v_base / total * (terms.peak - terms.base);
    Ok(f.clamp(terms.base, terms.peak))
}

#[inline]
fn payoff_with(
    class: HourClass,
    s: f64,
    l: f64,
    pos: Position,
    terms: &HedgeTerms,
    f_eff: f64,
) -> f64 {
    match class {
        HourClass::OffPeak => (s - terms.base) * (pos.v_base - l) + terms.delta_base * l,
        HourClass::Peak => (s - f_eff) * (pos.v_base + pos.v_peak - l) + terms.delta_peak * l,
    }
}

/// One-hour payoff in GBP per unit of normalized volume.
pub fn hourly_payoff(
    class: HourClass,
    s: f64,
    l: f64,
    pos: Position,
    terms: &HedgeTerms,
) -> Result<f64> {
    if !s.is_finite() || !(l >= 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!("bad spot {s} or load {l}")));
    }
    let f_eff = match class {
        HourClass::Peak => effective_forward(pos, terms)?,
        HourClass::OffPeak => terms.base,
    };
    Ok(payoff_with(class, s, l, pos, terms, f_eff))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioHour {
    pub hour: NaiveDateTime,
    pub class: HourClass,
    pub price: Vec<f64>,
    pub load: Vec<f64>,
}

/// Joint (spot, load) draws per delivery hour. Samples are stored sorted
/// within each hour so every reduction is independent of input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    hours: Vec<ScenarioHour>,
    n_samples: usize,
}

impl ScenarioSet {
    /// Loads below zero are clamped to zero.
    pub fn new(hours: Vec<ScenarioHour>) -> Result<Self> {
        let n = hours.first().map(|h| h.price.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidInput("empty scenario set".into()));
        }
        let mut out = Vec::with_capacity(hours.len());
        for h in hours {
            if h.price.len() != n || h.load.len() != n {
                return Err(Error::InvalidInput(format!(
                    "hour {} has {} price and {} load draws, expected {n}",
                    h.hour,
                    h.price.len(),
                    h.load.len()
                )));
            }
            let mut pairs: Vec<(f64, f64)> = h
                .price
                .iter()
                .zip(&h.load)
                .map(|(s, l)| (*s, l.max(0.0)))
                .collect();
            if pairs.iter().any(|(s, l)| !s.is_finite() || !l.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite draw at {}",
                    h.hour
                )));
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let (price, load) = pairs.into_iter().unzip();
            out.push(ScenarioHour {
                hour: h.hour,
                class: h.class,
                price,
                load,
            });
        }
        Ok(ScenarioSet {
            hours: out,
            n_samples: n,
        })
    }

    /// Hours classified from their timestamps.
    pub fn from_draws(draws: Vec<(NaiveDateTime, Vec<f64>, Vec<f64>)>) -> Result<Self> {
        ScenarioSet::new(
            draws
                .into_iter()
                .map(|(hour, price, load)| ScenarioHour {
                    hour,
                    class: classify_hour(hour),
                    price,
                    load,
                })
                .collect(),
        )
    }

    pub fn hours(&self) -> &[ScenarioHour] {
        &self.hours
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Loss {
    /// `mean(exp(-pi / scale))` per hour.
    Exponential { scale: f64 },
    /// `mean((pi / scale)^2)` per hour.
    Quadratic { scale: f64 },
}

impl Loss {
    pub fn exponential() -> Self {
        Loss::Exponential {
            scale: PAYOFF_SCALE,
        }
    }

    fn scale(self) -> f64 {
        match self {
            Loss::Exponential { scale } | Loss::Quadratic { scale } => scale,
        }
    }
}

/// Sum over hours of the Monte-Carlo mean of `u(-pi)`.
pub fn expected_loss(
    scenarios: &ScenarioSet,
    pos: Position,
    terms: &HedgeTerms,
    loss: Loss,
) -> Result<f64> {
    let scale = loss.scale();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!(
            "loss scale must be positive, got {scale}"
        )));
    }
    let f_eff = if pos.v_base + pos.v_peak > 0.0 {
        effective_forward(pos, terms)?
    } else {
        terms.base
    };
    let n = scenarios.n_samples as f64;
    let inv = 1.0 / scale;
    let mut total = 0.0;
    let mut args = vec![0.0; scenarios.n_samples];
    for h in &scenarios.hours {
        let hour_loss = match loss {
            Loss::Exponential { .. } => {
                let mut max = f64::NEG_INFINITY;
                for (a, (s, l)) in args.iter_mut().zip(h.price.iter().zip(&h.load)) {
                    *a = -payoff_with(h.class, *s, *l, pos, terms, f_eff) * inv;
                    max = max.max(*a);
                }
                let sum: f64 = args.iter().map(|a| (a - max).exp()).sum();
                (max + (sum / n).ln()).exp()
            }
            Loss::Quadratic { .. } => {
                h.price
                    .iter()
                    .zip(&h.load)
                    .map(|(s, l)| (payoff_with(h.class, *s, *l, pos, terms, f_eff) * inv).powi(2))
                    .sum::<f64>()
                    / n
            }
        };
        if !hour_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "expected loss overflows at hour {}",
                h.hour
            )));
        }
        total += hour_loss;
    }
    if !total.is_finite() {
        return Err(Error::Numerical(
            "expected loss overflows in the monthly sum".into(),
        ));
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Points per axis of the initial grid.
    pub grid: usize,
    /// Local searches started from the best grid points.
    pub starts: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            grid: 21,
            starts: 3,
            tolerance: 1e-8,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub position: Position,
    pub loss: f64,
    pub evaluations: usize,
    /// False when a local search hit its iteration cap.
    pub converged: bool,
}

fn clamp_box(p: Position) -> Position {
    Position::new(p.v_base.clamp(V_MIN, V_MAX), p.v_peak.clamp(0.0, V_MAX))
}

struct Evaluator<'a> {
    scenarios: &'a ScenarioSet,
    terms: &'a HedgeTerms,
    loss: Loss,
    count: usize,
}

impl Evaluator<'_> {
    fn eval(&mut self, p: Position) -> Result<f64> {
        self.count += 1;
        expected_loss(self.scenarios, p, self.terms, self.loss)
    }
}

/// Compass search from `start`; returns the point, its loss and whether the
/// step shrank below tolerance.
fn compass(
    ev: &mut Evaluator,
    start: Position,
    f0: f64,
    opts: &OptimizerOptions,
) -> Result<(Position, f64, bool)> {
    let (mut x, mut fx) = (start, f0);
    let mut step = (V_MAX - V_MIN) / (opts.grid.max(2) - 1) as f64;
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
    for _ in 0..opts.max_iterations {
        if step < opts.tolerance {
            return Ok((x, fx, true));
        }
        let mut moved = false;
        for (db, dp) in dirs {
            let cand = clamp_box(Position::new(x.v_base + db * step, x.v_peak + dp * step));
            if cand == x {
                continue;
            }
            let fc = ev.eval(cand)?;
            if fc < fx {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((x, fx, false))
}

/// Golden-section search over one coordinate on `[lo, hi]`.
fn golden(
    ev: &mut Evaluator,
    lo: f64,
    hi: f64,
    tol: f64,
    at: impl Fn(f64) -> Position,
) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = ev.eval(at(c))?;
    let mut fd = ev.eval(at(d))?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ev.eval(at(c))?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ev.eval(at(d))?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Minimizes the expected loss over `V^b in [V_MIN, V_MAX]`,
/// `V^p in [0, V_MAX]`: grid scan, compass searches from the best grid
/// points, then coordinate-wise golden-section polishing. Deterministic.
pub fn optimize_positions(
    scenarios: &ScenarioSet,
    terms: &HedgeTerms,
    loss: Loss,
    opts: &OptimizerOptions,
) -> Result<Optimum> {
    terms.validate()?;
    if opts.grid < 2 || opts.starts == 0 {
        return Err(Error::Config(
            "optimizer needs grid >= 2 and starts >= 1".into(),
        ));
    }
    let mut ev = Evaluator {
        scenarios,
        terms,
        loss,
        count: 0,
    };
    let g = opts.grid;
    let axis = |i: usize, lo: f64| lo + (V_MAX - lo) * i as f64 / (g - 1) as f64;
    let mut grid = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let p = Position::new(axis(i, V_MIN), axis(j, 0.0));
            grid.push((ev.eval(p)?, p));
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<(Position, f64)> = None;
    let mut converged = true;
    for &(f0, p0) in grid.iter().take(opts.starts) {
        let (x, fx, ok) = compass(&mut ev, p0, f0, opts)?;
        converged &= ok;
        if best.is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    let (mut x, mut fx) = best.expect("at least one start");

    let width = 4.0 * (V_MAX - V_MIN) / (g - 1) as f64;
    for _ in 0..20 {
        let before = fx;
        let vp = x.v_peak;
        let (vb, f1) = golden(
            &mut ev,
            (x.v_base - width).max(V_MIN),
            (x.v_base + width).min(V_MAX),
            opts.tolerance,
            |v| Position::new(v, vp),
        )?;
        if f1 < fx {
            x.v_base = vb;
            fx = f1;
        }
        let vb = x.v_base;
        let (vp, f2) = golden(
            &mut ev,
            (x.v_peak - width).max(0.0),
            (x.v_peak + width).min(V_MAX),
            opts.tolerance,
            |v| Position::new(vb, v),
        )?;
        if f2 < fx {
            x.v_peak = vp;
            fx = f2;
        }
        if before - fx <= 1e-15 * fx.abs().max(1.0) {
            break;
        }
    }
    // golden sections never probe the box edges exactly
    for edge in [Position::new(x.v_base, 0.0), Position::new(V_MIN, x.v_peak)] {
        let fe = ev.eval(edge)?;
        if fe < fx {
            x = edge;
            fx = fe;
        }
    }
    Ok(Optimum {
        position: x,
        loss: fx,
        evaluations: ev.count,
        converged,
    })
}

/// The oracle comparator's holding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparator {
    pub position: Position,
    /// Mean peak load was below mean off-peak load and `V^p` was raised to 0.
    pub clamped: bool,
}

/// `V^b` = mean off-peak load, `V^p` = mean peak load minus `V^b`.
pub fn average_load_positions(loads: &[f64], classes: &[HourClass]) -> Result<Comparator> {
    if loads.len() != classes.len() {
        return Err(Error::InvalidInput(
            "loads and classes differ in length".into(),
        ));
    }
    let mean = |c: HourClass| {
        let v: Vec<f64> = loads
            .iter()
            .zip(classes)
            .filter(|(_, k)| **k == c)
            .map(|(l, _)| *l)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let (Some(off), Some(peak)) = (mean(HourClass::OffPeak), mean(HourClass::Peak)) else {
        return Err(Error::Config(
            "comparator needs both peak and off-peak hours".into(),
        ));
    };
    let raw = peak - off;
    Ok(Comparator {
        position: Position::new(off, raw.max(0.0)),
        clamped: raw < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealizedPayoff {
    /// Sum of hourly payoffs in GBP per unit of normalized volume.
    pub normalized: f64,
    pub gbp: f64,
    pub mio_gbp: f64,
}

/// Total payoff over aligned hours, scaled to GBP by the maximum load and
/// the retailer's share.
pub fn payoff_total(
    classes: &[HourClass],
    spot: &[f64],
    load: &[f64],
    pos: Position,
    terms: &HedgeTerms,
    global_max: f64,
) -> Result<RealizedPayoff> {
    if classes.len() != spot.len() || spot.len() != load.len() {
        return Err(Error::InvalidInput("payoff inputs differ in length".into()));
    }
    if !(global_max > 0.0 && global_max.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bad maximum load {global_max}"
        )));
    }
    let mut normalized = 0.0;
    for ((c, s), l) in classes.iter().zip(spot).zip(load) {
        normalized += hourly_payoff(*c, *s, *l, pos, terms)?;
    }
    let gbp = normalized * global_max * terms.retailer_share;
    Ok(RealizedPayoff {
        normalized,
        gbp,
        mio_gbp: gbp / 1e6,
    })
}

/// Realized payoff of `pos` over every hour of `month` on actual spot and
/// normalized load; missing hours are a gap error.
pub fn realized_payoff(
    month: YearMonth,
    spot: &HourlySeries,
    load_normalized: &HourlySeries,
    pos: Position,
    terms: &HedgeTerms,
    global_max: f64,
) -> Result<RealizedPayoff> {
    let hours = month.hours();
    let s = spot.at_hours(&hours)?;
    let l = load_normalized.at_hours(&hours)?;
    let classes: Vec<HourClass> = hours.iter().map(|h| classify_hour(*h)).collect();
    payoff_total(&classes, &s, &l, pos, terms, global_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn terms() -> HedgeTerms {
        HedgeTerms::new(40.0, 60.0).unwrap()
    }

    fn hour(h: u32) -> NaiveDateTime {
        // Wednesday
        NaiveDate::from_ymd_opt(2018, 1, 3)
            .unwrap()
            .and_hms_opt(h, 0, 0)
            .unwrap()
    }

    #[test]
    fn effective_forward_examples() {
        let t = terms();
        assert_eq!(
            effective_forward(Position::new(1.0, 0.0), &t).unwrap(),
            40.0
        );
        assert_eq!(
            effective_forward(Position::new(0.0, 1.0), &t).unwrap(),
            60.0
        );
        assert_eq!(
            effective_forward(Position::new(0.5, 0.5), &t).unwrap(),
            50.0
        );
        assert!(effective_forward(Position::new(0.0, 0.0), &t).is_err());
    }

    proptest! {
        #[test]
        fn effective_forward_bounded(vb in 1e-9f64..5.0, vp in 0.0f64..5.0, fb in 0.1f64..200.0, spread in 0.0f64..100.0) {
            let t = HedgeTerms::new(fb, fb + spread).unwrap();
            let f = effective_forward(Position::new(vb, vp), &t).unwrap();
            prop_assert!(t.base <= f && f <= t.peak);
        }

        #[test]
        fn off_peak_translation(c in -0.5f64..0.5, vb in 0.5f64..1.5, s in 0.0f64..100.0, l in 0.5f64..1.0) {
            let t = terms();
            let a = hourly_payoff(HourClass::OffPeak, s, l, Position::new(vb, 0.2), &t).unwrap();
            let b = hourly_payoff(HourClass::OffPeak, s, l + c, Position::new(vb + c, 0.2), &t).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn payoff_examples() {
        let t = HedgeTerms::new(50.0, 60.0).unwrap();
        let p = Position::new(0.4, 0.0);
        assert!((hourly_payoff(HourClass::OffPeak, 60.0, 0.3, p, &t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            hourly_payoff(HourClass::OffPeak, 90.0, 0.4, p, &t).unwrap(),
            0.0
        );
        let peak = hourly_payoff(HourClass::Peak, 60.0, 0.3, p, &t).unwrap();
        let off = hourly_payoff(HourClass::OffPeak, 60.0, 0.3, p, &t).unwrap();
        assert_eq!(peak, off);
    }

    fn deterministic(class_hour: u32, s: f64, l: f64) -> ScenarioSet {
        ScenarioSet::from_draws(vec![(hour(class_hour), vec![s], vec![l])]).unwrap()
    }

    #[test]
    fn exponential_loss_of_unit_payoff() {
        let t = HedgeTerms::new(50.0, 60.0).unwrap();
        let sc = deterministic(2, 60.0, 0.3);
        let loss = expected_loss(
            &sc,
            Position::new(0.4, 0.0),
            &t,
            Loss::Exponential { scale: 1.0 },
        )
        .unwrap();
        assert!((loss - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn perfect_hedge_costs_one_per_hour() {
        let t = terms();
        let draws = (0..24)
            .map(|h| (hour(h), vec![30.0, 70.0, 55.0], vec![0.6; 3]))
            .collect();
        let sc = ScenarioSet::from_draws(draws).unwrap();
        let loss = expected_loss(&sc, Position::new(0.6, 0.0), &t, Loss::exponential()).unwrap();
        assert!((loss - 24.0).abs() < 1e-12);
    }

    #[test]
    fn enumerated_two_hour_instance() {
        let t = HedgeTerms::new(40.0, 60.0).unwrap();
        let s = [[35.0, 50.0, 80.0], [45.0, 62.0, 70.0]];
        let l = [[0.3, 0.5, 0.7], [0.6, 0.4, 0.8]];
        let sc = ScenarioSet::from_draws(vec![
            (hour(3), s[0].to_vec(), l[0].to_vec()),
            (hour(10), s[1].to_vec(), l[1].to_vec()),
        ])
        .unwrap();
        let p = Position::new(0.5, 0.2);
        // peak F~ = 60 - 0.5/0.7 * 20
        let f_eff = 60.0 - 0.5 / 0.7 * 20.0;
        let mut expect = 0.0;
        for k in 0..3 {
            expect += (-(s[0][k] - 40.0) * (0.5 - l[0][k]) / 10.0).exp() / 3.0;
            expect += (-(s[1][k] - f_eff) * (0.7 - l[1][k]) / 10.0).exp() / 3.0;
        }
        let got = expected_loss(&sc, p, &t, Loss::Exponential { scale: 10.0 }).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn overflow_names_the_hour() {
        let sc = deterministic(2, 1e9, 1.0);
        match expected_loss(
            &sc,
            Position::new(V_MIN, 0.0),
            &terms(),
            Loss::Exponential { scale: 1.0 },
        ) {
            Err(Error::Numerical(m)) => assert!(m.contains("2018-01-03 02:00")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponential_loss_is_monotone_in_payoff() {
        let t = terms();
        let a = deterministic(2, 60.0, 0.3);
        let b = deterministic(2, 59.0, 0.3);
        let p = Position::new(0.5, 0.0);
        assert!(
            expected_loss(&b, p, &t, Loss::exponential()).unwrap()
                > expected_loss(&a, p, &t, Loss::exponential()).unwrap()
        );
    }

    fn random_set(seed: u64, hours: usize, n: usize) -> ScenarioSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = (0..hours)
            .map(|h| {
                let t = hour(0) + chrono::Duration::hours(h as i64);
                let s = (0..n).map(|_| rng.random_range(20.0..90.0)).collect();
                let l = (0..n).map(|_| rng.random_range(0.3..0.9)).collect();
                (t, s, l)
            })
            .collect();
        ScenarioSet::from_draws(draws).unwrap()
    }

    #[test]
    fn reordering_samples_changes_nothing() {
        let sc = random_set(3, 6, 40);
        let shuffled = ScenarioSet::new(
            sc.hours()
                .iter()
                .map(|h| {
                    let mut h = h.clone();
                    h.price.reverse();
                    h.load.reverse();
                    h
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(sc, shuffled);
    }

    #[test]
    fn constant_load_drives_base_to_load() {
        let t = terms();
        // 2018-01-06 is a Saturday: all off-peak; spot straddles F^b
        let flat = ScenarioSet::from_draws(
            (0..24)
                .map(|h| {
                    (
                        hour(0) + chrono::Duration::hours(h + 72),
                        vec![30.0, 50.0],
                        vec![0.55, 0.55],
                    )
                })
                .collect(),
        )
        .unwrap();
        let opt = optimize_positions(&flat, &t, Loss::exponential(), &OptimizerOptions::default())
            .unwrap();
        assert!(
            (opt.position.v_base - 0.55).abs() < 1e-6,
            "{:?}",
            opt.position
        );
        assert!(opt.converged);
    }

    #[test]
    fn comparator_examples() {
        use HourClass::*;
        let c =
            average_load_positions(&[0.4, 0.6, 0.7, 0.9], &[OffPeak, OffPeak, Peak, Peak]).unwrap();
        assert!((c.position.v_base - 0.5).abs() < 1e-12);
        assert!((c.position.v_peak - 0.3).abs() < 1e-12);
        assert!(!c.clamped);
        let flat = average_load_positions(&[0.5; 4], &[OffPeak, Peak, OffPeak, Peak]).unwrap();
        assert_eq!(flat.position, Position::new(0.5, 0.0));
        let low = average_load_positions(&[0.6, 0.4], &[OffPeak, Peak]).unwrap();
        assert!(low.clamped && low.position.v_peak == 0.0);
        assert!(matches!(
            average_load_positions(&[0.6], &[OffPeak]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn realized_scaling_chain() {
        let t = HedgeTerms::new(50.0, 60.0).unwrap();
        let r = payoff_total(
            &[HourClass::OffPeak],
            &[60.0],
            &[0.3],
            Position::new(0.4, 0.0),
            &t,
            50000.0,
        )
        .unwrap();
        assert!((r.gbp - 750.0).abs() < 1e-9);
        assert!((r.mio_gbp - 750e-6).abs() < 1e-15);
    }

    #[test]
    fn realized_needs_every_hour() {
        let m = YearMonth::new(2018, 1).unwrap();
        let hours = m.hours();
        let spot = HourlySeries::new(
            hours[..100].to_vec(),
            vec![50.0; 100],
            crate::marketdata::Unit::GbpPerMwh,
        )
        .unwrap();
        let load = HourlySeries::new(
            hours.clone(),
            vec![0.5; hours.len()],
            crate::marketdata::Unit::Normalized,
        )
        .unwrap();
        assert!(matches!(
            realized_payoff(m, &spot, &load, Position::new(0.5, 0.0), &terms(), 1.0),
            Err(Error::Gap { .. })
        ));
    }
}
