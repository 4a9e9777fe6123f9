//! Browser bindings for the static demo page. Every entry point returns a
//! JSON string, or an error message the page shows as-is.

use chrono::Duration;
use csgp_hedge::gp::{fit, select_inducing, CovarianceMode, FitOptions, GpModel, LbfgsOptions};
use csgp_hedge::gp::{Predictor, TrainingSet};
use csgp_hedge::hedge::{
    average_load_positions, expected_loss, optimize_positions, HedgeTerms, Loss, OptimizerOptions,
    Position, ScenarioSet, V_MAX, V_MIN,
};
use csgp_hedge::kernels::{
    composite_kernel, kernel_eval, CompositeConfig, CoregionalSpec, LeafInit, LeafKind, TaskInput,
};
use csgp_hedge::marketdata::{classify_hour, demand_to_load, hour_range, HourClass, YearMonth};
use csgp_hedge::synthetic::{generate, SynthConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Covariance of one kernel leaf against lag, `points` samples on
/// `[0, max_lag]` hours.
#[wasm_bindgen]
pub fn kernel_profile(
    leaf: &str,
    amplitude: f64,
    lengthscale: f64,
    shape: f64,
    max_lag: f64,
    points: u32,
) -> Result<String, String> {
    let kind: LeafKind = leaf.parse().map_err(err)?;
    if !(max_lag > 0.0) || points < 2 {
        return Err("need max_lag > 0 and at least 2 points".into());
    }
    let spec = composite_kernel(&CompositeConfig {
        leaves: vec![(
            kind,
            LeafInit {
                amplitude,
                lengthscale,
                shape,
            },
        )],
    })
    .map_err(err)?;
    let lags: Vec<f64> = (0..points)
        .map(|i| max_lag * i as f64 / (points - 1) as f64)
        .collect();
    let values = lags
        .iter()
        .map(|r| kernel_eval(&spec, *r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Ok(json!({ "lags": lags, "values": values }).to_string())
}

/// Fits the coregional model to `train_days` of synthetic price and load and
/// forecasts `horizon_hours` ahead. Bands are two predictive SDs.
#[wasm_bindgen]
pub fn posterior_demo(
    seed: u32,
    train_days: u32,
    sparsity: f64,
    horizon_hours: u32,
) -> Result<String, String> {
    if !(1..=28).contains(&train_days) || !(1..=336).contains(&horizon_hours) {
        return Err("train_days must be 1..28 and horizon_hours 1..336".into());
    }
    let month = YearMonth::new(2016, 1).map_err(err)?;
    let market = generate(&SynthConfig::for_months(month, month, seed as u64)).map_err(err)?;
    let load = demand_to_load(&market.demand).map_err(err)?.load;

    let t0 = month.first_day().and_hms_opt(0, 0, 0).expect("midnight");
    let n = train_days as i64 * 24;
    let train_hours = hour_range(t0 - Duration::hours(n), t0);
    let test_hours = hour_range(t0, t0 + Duration::hours(horizon_hours as i64));
    let price = market.spot.at_hours(&train_hours).map_err(err)?;
    let raw_load = load.at_hours(&train_hours).map_err(err)?;
    let max = raw_load.iter().copied().fold(f64::MIN, f64::max);
    let load_n: Vec<f64> = raw_load.iter().map(|l| l / max).collect();
    let train = TrainingSet::from_hourly(&price, &load_n).map_err(err)?;

    let sd: Vec<f64> = train.task_moments().iter().map(|(_, s)| *s).collect();
    let mut model = GpModel::new(
        composite_kernel(&CompositeConfig::default()).map_err(err)?,
        CoregionalSpec::new(
            DMatrix::from_fn(2, 1, |i, _| 0.5 * sd[i]),
            sd.iter().map(|s| 0.5 * s * s).collect(),
        )
        .map_err(err)?,
        sd.iter().map(|s| 0.1 * s * s).collect(),
    )
    .map_err(err)?;
    if sparsity < 1.0 {
        model = model
            .with_inducing(select_inducing(&train, sparsity).map_err(err)?)
            .map_err(err)?;
    }
    let opts = FitOptions {
        restarts: 1,
        seed: seed as u64,
        lbfgs: LbfgsOptions {
            max_iterations: 40,
            ..LbfgsOptions::default()
        },
    };
    let fitted = fit(&model, &train, &opts).map_err(err)?;
    let lml = fitted.fit_info.as_ref().map(|f| f.log_marginal_likelihood);

    // last three training days plus the horizon
    let shown = n.min(72);
    let xs: Vec<f64> = (n - shown..n + horizon_hours as i64)
        .map(|x| x as f64)
        .collect();
    let test: Vec<TaskInput> = (0..2)
        .flat_map(|t| xs.iter().map(move |x| TaskInput::new(t, *x)))
        .collect();
    let pred = Predictor::new(&fitted, &train)
        .and_then(|p| p.predict(&test, CovarianceMode::Diagonal))
        .map_err(err)?;
    let var = pred.covariance.diagonal();
    let k = xs.len();
    let task = |t: usize, actual: Vec<f64>| {
        let mean: Vec<f64> = (0..k).map(|i| pred.mean[t * k + i]).collect();
        let sd: Vec<f64> = (0..k)
            .map(|i| (var[t * k + i] + fitted.noise[t]).sqrt())
            .collect();
        json!({ "mean": mean, "sd": sd, "actual": actual })
    };
    let actual_price: Vec<f64> = price[(n - shown) as usize..]
        .iter()
        .copied()
        .chain(market.spot.at_hours(&test_hours).map_err(err)?)
        .collect();
    let actual_load: Vec<f64> = load_n[(n - shown) as usize..]
        .iter()
        .copied()
        .chain(
            load.at_hours(&test_hours)
                .map_err(err)?
                .into_iter()
                .map(|l| l / max),
        )
        .collect();
    Ok(json!({
        "hours": xs.iter().map(|x| x - n as f64).collect::<Vec<_>>(),
        "price": task(0, actual_price),
        "load": task(1, actual_load),
        "log_marginal_likelihood": lml,
        "inducing_points": fitted.inducing.as_ref().map(Vec::len),
    })
    .to_string())
}

/// Expected exponential loss over a `grid` x `grid` lattice of (V^b, V^p)
/// for one week of simulated hours, with the optimum and the average-load
/// holding. With zero biases both forwards (45 base, 55 peak) are fair: mean
/// peak spot is 55 and mean off-peak spot makes the weekly average 45.
/// `bias_*` shift the expected spot of each class above that.
#[wasm_bindgen]
pub fn hedge_surface(
    bias_base: f64,
    bias_peak: f64,
    price_sd: f64,
    load_corr: f64,
    scale: f64,
    grid: u32,
) -> Result<String, String> {
    if !(2..=81).contains(&grid) {
        return Err("grid must be 2..81".into());
    }
    if !(price_sd >= 0.0) || !(-1.0..=1.0).contains(&load_corr) {
        return Err("need price_sd >= 0 and |load_corr| <= 1".into());
    }
    let terms = HedgeTerms::new(45.0, 55.0).map_err(err)?;
    let start = YearMonth::new(2018, 1)
        .map_err(err)?
        .first_day()
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        + Duration::hours(7 * 24);
    let hours = hour_range(start, start + Duration::hours(168));
    let n_peak = hours
        .iter()
        .filter(|t| classify_hour(**t) == HourClass::Peak)
        .count() as f64;
    let n_off = hours.len() as f64 - n_peak;
    let fair_off = (terms.base * hours.len() as f64 - terms.peak * n_peak) / n_off;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut draws, mut mean_loads, mut classes) = (Vec::new(), Vec::new(), Vec::new());
    for t in hours {
        let class = classify_hour(t);
        let (s0, l0) = match class {
            HourClass::Peak => (terms.peak + bias_peak, 0.7),
            HourClass::OffPeak => (fair_off + bias_base, 0.55),
        };
        let (mut s, mut l) = (Vec::new(), Vec::new());
        for _ in 0..300 {
            let z: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            s.push(s0 + price_sd * z);
            l.push(l0 + 0.06 * (load_corr * z + (1.0 - load_corr * load_corr).sqrt() * e));
        }
        draws.push((t, s, l));
        mean_loads.push(l0);
        classes.push(class);
    }
    let sc = ScenarioSet::from_draws(draws).map_err(err)?;
    let loss = Loss::Exponential { scale };
    let axis = |lo: f64| -> Vec<f64> {
        (0..grid)
            .map(|i| lo + (V_MAX - lo) * i as f64 / (grid - 1) as f64)
            .collect()
    };
    let (vb, vp) = (axis(V_MIN), axis(0.0));
    let surface = vp
        .iter()
        .map(|p| {
            vb.iter()
                .map(|b| expected_loss(&sc, Position::new(*b, *p), &terms, loss))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let opt = optimize_positions(&sc, &terms, loss, &OptimizerOptions::default()).map_err(err)?;
    let cmp = average_load_positions(&mean_loads, &classes).map_err(err)?;
    Ok(json!({
        "v_base": vb,
        "v_peak": vp,
        "loss": surface,
        "optimum": { "v_base": opt.position.v_base, "v_peak": opt.position.v_peak, "loss": opt.loss },
        "comparator": { "v_base": cmp.position.v_base, "v_peak": cmp.position.v_peak },
    })
    .to_string())
}
