//! Expectation-maximization for logistic mixtures.
//!
//! The objective is the mean negative log-likelihood plus the entropy term
//! on the mixing weights. The entropy pressure is applied as additive
//! smoothing of the M-step weights toward uniform, so with `lambda = 0` the
//! procedure is a generalized EM and the mean NLL never increases.

use rand::Rng;

use super::{
    log_sum_exp, logistic_log_pdf, LogisticComponent, MixtureOfLogistics, MolError, S_MIN,
};

/// Newton iterations for each location update.
const LOCATION_NEWTON_STEPS: usize = 5;
const SCALE_NEWTON_STEPS: usize = 40;
const EMPTY_MASS: f64 = 1e-8;
/// Ratio between the MAD and the scale of a logistic law.
const LN_3: f64 = 1.098_612_288_668_109_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub k: usize,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k: 4,
            lambda: 0.01,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub mixture: MixtureOfLogistics,
    /// Mean NLL of the initial mixture followed by the value after each
    /// M-step.
    pub nll_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitOutcome {
    pub fn final_nll(&self) -> f64 {
        *self.nll_trace.last().expect("trace holds the initial value")
    }
}

/// Fits a `k`-component mixture to `samples`.
pub fn fit_em<S, R>(samples: &[S], opts: &FitOptions, rng: &mut R) -> Result<FitOutcome, MolError>
where
    S: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    let k = opts.k.max(1);
    if samples.len() < k || samples.is_empty() {
        return Err(MolError::InsufficientData {
            needed: k.max(1),
            got: samples.len(),
        });
    }
    let dim = samples[0].as_ref().len();
    let data: Vec<&[f64]> = samples.iter().map(|s| s.as_ref()).collect();
    for (i, x) in data.iter().enumerate() {
        if x.len() != dim {
            return Err(MolError::SampleDimension {
                index: i,
                expected: dim,
                found: x.len(),
            });
        }
    }

    let mut state = initialize(&data, k, rng);
    let n = data.len();
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let nll = e_step(&state, &data, &mut resp);
        if let Some(&prev) = trace.last() {
            if prev - nll < opts.tol {
                trace.push(nll);
                converged = true;
                break;
            }
        }
        trace.push(nll);
        if iterations == opts.max_iters {
            break;
        }
        m_step(&mut state, &data, &resp, opts.lambda);
        iterations += 1;
    }

    let components = state
        .mu
        .into_iter()
        .zip(state.s)
        .map(|(mu, s)| LogisticComponent::new(mu, s))
        .collect();
    let mixture = MixtureOfLogistics::new(state.weights, components)?;
    Ok(FitOutcome {
        mixture,
        nll_trace: trace,
        iterations,
        converged,
    })
}

struct State {
    weights: Vec<f64>,
    mu: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
}

impl State {
    fn log_joint(&self, k: usize, x: &[f64]) -> f64 {
        let w = self.weights[k];
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut acc = w.ln();
        for d in 0..x.len() {
            acc += logistic_log_pdf(x[d], self.mu[k][d], self.s[k][d]);
        }
        acc
    }
}

/// Fills responsibilities and returns the mean NLL of the current state.
fn e_step(state: &State, data: &[&[f64]], resp: &mut [f64]) -> f64 {
    let k = state.weights.len();
    let mut total = 0.0;
    let mut row = vec![0.0; k];
    for (i, x) in data.iter().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = state.log_joint(j, x);
        }
        let lse = log_sum_exp(&row);
        total -= lse;
        for j in 0..k {
            resp[i * k + j] = (row[j] - lse).exp();
        }
    }
    total / data.len() as f64
}

fn m_step(state: &mut State, data: &[&[f64]], resp: &[f64], lambda: f64) {
    let k = state.weights.len();
    let n = data.len();
    let dim = data[0].len();
    let mut mass = vec![0.0; k];
    for i in 0..n {
        for j in 0..k {
            mass[j] += resp[i * k + j];
        }
    }

    let lambda = lambda.max(0.0);
    for j in 0..k {
        state.weights[j] = (mass[j] / n as f64 + lambda / k as f64) / (1.0 + lambda);
    }

    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for j in 0..k {
        if mass[j] < EMPTY_MASS {
            continue;
        }
        for i in 0..n {
            ws[i] = resp[i * k + j];
        }
        for d in 0..dim {
            for i in 0..n {
                xs[i] = data[i][d];
            }
            let s = state.s[j][d];
            let mu = update_location(&xs, &ws, state.mu[j][d], s);
            state.mu[j][d] = mu;
            state.s[j][d] = update_scale(&xs, &ws, mu, s);
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&j| mass[j] < EMPTY_MASS).collect();
    if !empty.is_empty() {
        reseed_empty(state, data, &empty);
    }
    normalize(&mut state.weights);
}

/// Weighted logistic log-likelihood of one dimension.
fn weighted_ll(xs: &[f64], ws: &[f64], mu: f64, s: f64) -> f64 {
    xs.iter()
        .zip(ws)
        .map(|(&x, &w)| if w > 0.0 { w * logistic_log_pdf(x, mu, s) } else { 0.0 })
        .sum()
}

/// Newton ascent on the location with step halving, so the weighted
/// likelihood never decreases.
fn update_location(xs: &[f64], ws: &[f64], mu0: f64, s: f64) -> f64 {
    let mut mu = mu0;
    let mut current = weighted_ll(xs, ws, mu, s);
    for _ in 0..LOCATION_NEWTON_STEPS {
        let mut grad = 0.0;
        let mut curv = 0.0;
        for (&x, &w) in xs.iter().zip(ws) {
            let half = 0.5 * (x - mu) / s;
            let t = half.tanh();
            grad += w * t;
            curv += w * (1.0 - t * t);
        }
        if curv <= 0.0 {
            break;
        }
        // d/dmu = sum w tanh(z/2) / s, d2/dmu2 = -sum w sech^2(z/2) / (2 s^2)
        let mut step = 2.0 * s * grad / curv;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = weighted_ll(xs, ws, mu + step, s);
            if candidate >= current {
                mu += step;
                current = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() <= 1e-15 * (1.0 + mu.abs()) {
            break;
        }
    }
    mu
}

/// Maximizes the weighted likelihood over `s >= S_MIN` by Newton iterations
/// on `log s`, safeguarded by bisection on the stationarity condition
/// `sum w (z tanh(z/2) - 1) = 0`, which is decreasing in `s`.
fn update_scale(xs: &[f64], ws: &[f64], mu: f64, s0: f64) -> f64 {
    let total_w: f64 = ws.iter().sum();
    if total_w <= 0.0 {
        return s0;
    }
    let stationarity = |t: f64| -> (f64, f64) {
        let s = t.exp();
        let mut g = -total_w;
        let mut dg = 0.0;
        for (&x, &w) in xs.iter().zip(ws) {
            if w <= 0.0 {
                continue;
            }
            let z = (x - mu) / s;
            let th = (0.5 * z).tanh();
            g += w * z * th;
            dg -= w * z * (th + 0.5 * z * (1.0 - th * th));
        }
        (g, dg)
    };

    let t_min = S_MIN.ln();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut t = s0.max(S_MIN).ln();
    for _ in 0..SCALE_NEWTON_STEPS {
        let (g, dg) = stationarity(t);
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if g <= 0.0 && t <= t_min {
            t = t_min;
            break;
        }
        let mut next = if dg < 0.0 { t - g / dg } else { f64::NAN };
        let inside = next.is_finite() && next > lo && next < hi;
        if !inside {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => t,
            };
        }
        next = next.max(t_min);
        if (next - t).abs() < 1e-12 {
            t = next;
            break;
        }
        t = next;
    }

    let s_new = if t <= t_min { S_MIN } else { t.exp().max(S_MIN) };
    if weighted_ll(xs, ws, mu, s_new) >= weighted_ll(xs, ws, mu, s0) {
        s_new
    } else {
        s0
    }
}

fn normalize(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
}

/// Moves each empty component onto the sample the current mixture explains
/// worst.
fn reseed_empty(state: &mut State, data: &[&[f64]], empty: &[usize]) {
    let k = state.weights.len();
    let live: Vec<usize> = (0..k).filter(|j| !empty.contains(j)).collect();
    let dim = data[0].len();
    let mut taken: Vec<usize> = Vec::new();
    for &j in empty {
        let worst = (0..data.len())
            .filter(|i| !taken.contains(i))
            .map(|i| {
                let row: Vec<f64> = live.iter().map(|&l| state.log_joint(l, data[i])).collect();
                (i, log_sum_exp(&row))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        taken.push(worst);
        state.mu[j] = data[worst].to_vec();
        state.s[j] = (0..dim)
            .map(|d| {
                if live.is_empty() {
                    1.0
                } else {
                    live.iter().map(|&l| state.s[l][d]).sum::<f64>() / live.len() as f64
                }
            })
            .collect();
        state.weights[j] = 1.0 / data.len() as f64;
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-dimension median and MAD-derived logistic scale.
fn robust_location_scale(points: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mu = vec![0.0; dim];
    let mut s = vec![0.0; dim];
    let mut buf = Vec::with_capacity(points.len());
    for d in 0..dim {
        buf.clear();
        buf.extend(points.iter().map(|p| p[d]));
        let m = median(&mut buf);
        for v in buf.iter_mut() {
            *v = (*v - m).abs();
        }
        let mad = median(&mut buf);
        mu[d] = m;
        s[d] = (mad / LN_3).max(S_MIN);
    }
    (mu, s)
}

/// k-means++ seeding in coordinates standardized by the global robust scale,
/// followed by a few median-assignment passes. Scales come from each
/// cluster's MAD.
fn initialize<R: Rng + ?Sized>(data: &[&[f64]], k: usize, rng: &mut R) -> State {
    let n = data.len();
    let dim = data[0].len();
    let (_, global_s) = robust_location_scale(data, dim);
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        (0..dim)
            .map(|d| ((a[d] - b[d]) / global_s[d]).powi(2))
            .sum()
    };

    let mut centers: Vec<Vec<f64>> = vec![data[rng.gen_range(0..n)].to_vec()];
    let mut nearest: Vec<f64> = data.iter().map(|x| dist2(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(data[pick].to_vec());
        for (i, x) in data.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(x, centers.last().unwrap()));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..5 {
        for (i, x) in data.iter().enumerate() {
            assignment[i] = (0..k)
                .min_by(|&a, &b| dist2(x, &centers[a]).total_cmp(&dist2(x, &centers[b])))
                .unwrap();
        }
        for (j, center) in centers.iter_mut().enumerate() {
            let members: Vec<&[f64]> = (0..n)
                .filter(|&i| assignment[i] == j)
                .map(|i| data[i])
                .collect();
            if !members.is_empty() {
                *center = robust_location_scale(&members, dim).0;
            }
        }
    }

    let mut weights = vec![0.0; k];
    let mut mu = Vec::with_capacity(k);
    let mut s = Vec::with_capacity(k);
    for (j, center) in centers.into_iter().enumerate() {
        let members: Vec<&[f64]> = (0..n)
            .filter(|&i| assignment[i] == j)
            .map(|i| data[i])
            .collect();
        weights[j] = (members.len() as f64).max(0.5);
        if members.len() >= 2 {
            let (_, cs) = robust_location_scale(&members, dim);
            s.push(cs);
        } else {
            s.push(global_s.clone());
        }
        mu.push(center);
    }
    normalize(&mut weights);
    State { weights, mu, s }
}
