//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use zit_tweedie::em::TrainingMeta;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel and its embedded 7-point Gauss error estimate.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let s = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    if whole.1 <= tol || depth == 0 {
        return whole.0;
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    adapt(f, a, m, left, 0.5 * tol, depth - 1) + adapt(f, m, b, right, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let f: &dyn Fn(f64) -> f64 = &f;
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    sign * adapt(f, lo, hi, gk15(f, lo, hi), tol, 60)
}

/// Integral over `[0, b]` after `y = s^q`, which removes an endpoint
/// singularity of order `y^(1/q - 1)` or milder.
pub fn integrate_from_zero(f: impl Fn(f64) -> f64, b: f64, q: f64, tol: f64) -> f64 {
    integrate(|s| if s > 0.0 { f(s.powf(q)) * q * s.powf(q - 1.0) } else { 0.0 }, 0.0, b.powf(1.0 / q), tol)
}

/// Central difference with one Richardson extrapolation step.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3 * x.abs().max(1.0);
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

pub fn relative_error(approx: f64, exact: f64) -> f64 {
    let scale = approx.abs().max(exact.abs());
    if scale == 0.0 {
        0.0
    } else {
        (approx - exact).abs() / scale
    }
}

/// Rows `(y, phi, zeta, c)` of the frozen 60-digit series table.
pub fn series_oracle() -> Vec<(f64, f64, f64, f64)> {
    let text = include_str!("../data/series_oracle.csv");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|c| c.trim().parse().expect("numeric cell")).collect();
            (v[0], v[1], v[2], v[3])
        })
        .collect()
}

/// First violation of EM ascent (beyond `slack`) or of per-round boosting descent.
pub fn trace_violation(meta: &TrainingMeta, slack: f64) -> Option<String> {
    for (k, pair) in meta.loglik_trace.windows(2).enumerate() {
        if pair[1] < pair[0] - slack {
            return Some(format!("log-likelihood fell at iteration {}: {} -> {}", k + 1, pair[0], pair[1]));
        }
    }
    for sub in &meta.sub_fits {
        if let Some(k) = sub.train_loss.windows(2).position(|p| p[1] > p[0]) {
            return Some(format!("{} sub-fit in iteration {} rose at round {}", sub.which, sub.iteration, k + 1));
        }
    }
    None
}
