//! Synthetic zero-inflated Tweedie data from random Gaussian-bump functions.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix, FeatureSchema};
use crate::error::{Error, Result};
use crate::tweedie::{gamma_shape, logistic, PowerParam, TweedieParams, ZitParams};

/// Number of bumps in a random function.
pub const N_TERMS: usize = 20;

/// Rows drawn to standardize a random function before rescaling.
pub const REFERENCE_SAMPLE: usize = 10_000;

/// One Gaussian bump `a exp(-(z - m)' V (z - m) / 2)` on a subset of covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTerm {
    pub coefficient: f64,
    pub subset: Vec<usize>,
    pub center: Vec<f64>,
    /// Orthogonal factor `U`, row-major.
    pub rotation: Vec<f64>,
    /// Diagonal of `D`.
    pub eigenvalues: Vec<f64>,
    /// `V = U D U'`, row-major.
    pub precision: Vec<f64>,
}

impl RandomTerm {
    pub fn dim(&self) -> usize {
        self.subset.len()
    }

    /// The bump value `g(z)` in `(0, 1]`.
    pub fn bump(&self, x: &[f64]) -> f64 {
        let k = self.dim();
        let diff: Vec<f64> = self
            .subset
            .iter()
            .zip(&self.center)
            .map(|(&s, &m)| x[s] - m)
            .collect();
        let mut q = 0.0;
        for r in 0..k {
            let row = &self.precision[r * k..(r + 1) * k];
            q += diff[r] * row.iter().zip(&diff).map(|(v, d)| v * d).sum::<f64>();
        }
        (-0.5 * q).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFunctionSpec {
    pub p: usize,
    pub terms: Vec<RandomTerm>,
}

/// Draw a random function of `p` covariates.
pub fn gen_random_function(p: usize, seed: u64) -> Result<RandomFunctionSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_random_function_with(p, &mut rng)
}

pub fn gen_random_function_with<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<RandomFunctionSpec> {
    if p == 0 {
        return Err(Error::invalid("random function needs at least one covariate"));
    }
    let coef = Uniform::new(-1.0, 1.0).expect("valid bounds");
    let size = Exp::new(1.0 / 5.0).expect("valid rate");
    let root = Uniform::new(0.1, 2.0).expect("valid bounds");
    let mut indices: Vec<usize> = (0..p).collect();

    let terms = (0..N_TERMS)
        .map(|_| {
            let coefficient = coef.sample(rng);
            let r: f64 = size.sample(rng);
            let k = subset_size(r, p);
            indices.shuffle(rng);
            let subset = indices[..k].to_vec();
            let center: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let u = random_orthogonal(k, rng);
            let eigenvalues: Vec<f64> = (0..k)
                .map(|_| {
                    let s: f64 = root.sample(rng);
                    s * s
                })
                .collect();
            let v = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigenvalues.clone())) * u.transpose();
            let v = (&v + v.transpose()) * 0.5;
            RandomTerm {
                coefficient,
                subset,
                center,
                rotation: row_major(&u),
                eigenvalues,
                precision: row_major(&v),
            }
        })
        .collect();
    Ok(RandomFunctionSpec { p, terms })
}

/// `min(floor(1.5 + r), p)`.
pub fn subset_size(r: f64, p: usize) -> usize {
    ((1.5 + r).floor() as usize).clamp(1, p)
}

fn random_orthogonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(k, k, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix so Q is Haar distributed
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

pub fn eval_random_function(spec: &RandomFunctionSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.p {
        return Err(Error::LengthMismatch {
            expected: spec.p,
            found: x.len(),
        });
    }
    Ok(spec.terms.iter().map(|t| t.coefficient * t.bump(x)).sum())
}

/// Compound Poisson sum of gamma claims, per unit exposure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompoundPoissonGamma {
    pub poisson_rate: f64,
    pub gamma_shape: f64,
    pub gamma_mean_per_claim: f64,
}

impl CompoundPoissonGamma {
    pub fn gamma_scale(&self) -> f64 {
        self.gamma_mean_per_claim / self.gamma_shape
    }
}

pub fn tweedie_to_cpg(params: &TweedieParams) -> CompoundPoissonGamma {
    let z = params.zeta.value();
    let alpha = gamma_shape(params.zeta);
    let theta = params.phi * (z - 1.0) * params.mu.powf(z - 1.0);
    CompoundPoissonGamma {
        poisson_rate: params.mu.powf(2.0 - z) / (params.phi * (2.0 - z)),
        gamma_shape: alpha,
        gamma_mean_per_claim: alpha * theta,
    }
}

pub fn cpg_to_tweedie(cpg: &CompoundPoissonGamma) -> Result<TweedieParams> {
    let alpha = cpg.gamma_shape;
    let zeta = PowerParam::new((alpha + 2.0) / (alpha + 1.0))?;
    let z = zeta.value();
    let (lambda, tau) = (cpg.poisson_rate, cpg.gamma_mean_per_claim);
    TweedieParams::new(
        lambda * tau,
        lambda.powf(1.0 - z) * tau.powf(2.0 - z) / (2.0 - z),
        zeta,
    )
}

/// One draw from the zero-inflated Tweedie law at exposure `w`.
pub fn sample_zit<R: Rng + ?Sized>(params: &ZitParams, w: f64, rng: &mut R) -> f64 {
    if params.pi > 0.0 && rng.random::<f64>() < params.pi {
        return 0.0;
    }
    let cpg = tweedie_to_cpg(&params.tweedie);
    let rate = cpg.poisson_rate * w;
    let claims: f64 = match Poisson::new(rate) {
        Ok(d) => d.sample(rng),
        Err(_) => 0.0,
    };
    if claims == 0.0 {
        return 0.0;
    }
    let total: f64 = Gamma::new(claims * cpg.gamma_shape, cpg.gamma_scale())
        .expect("positive shape and scale")
        .sample(rng);
    total / w
}

/// A random function standardized on a reference sample, then mapped to
/// `center + scale * standardized`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledFunction {
    pub spec: Option<RandomFunctionSpec>,
    pub center: f64,
    pub scale: f64,
    pub reference_mean: f64,
    pub reference_sd: f64,
}

impl ScaledFunction {
    pub fn constant(value: f64) -> Self {
        Self {
            spec: None,
            center: value,
            scale: 0.0,
            reference_mean: 0.0,
            reference_sd: 1.0,
        }
    }

    /// Standardize `spec` on `REFERENCE_SAMPLE` standard-normal covariate draws.
    pub fn standardized(spec: RandomFunctionSpec, center: f64, scale: f64, reference: &[Vec<f64>]) -> Result<Self> {
        let values = reference
            .iter()
            .map(|x| eval_random_function(&spec, x))
            .collect::<Result<Vec<f64>>>()?;
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        Ok(Self {
            spec: Some(spec),
            center,
            scale,
            reference_mean: mean,
            reference_sd: sd,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match &self.spec {
            Some(spec) if self.scale != 0.0 => {
                let raw = eval_random_function(spec, x)?;
                Ok(self.center + self.scale * (raw - self.reference_mean) / self.reference_sd)
            }
            _ => Ok(self.center),
        }
    }
}

/// True link-scale functions for the mean, dispersion and zero-state probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFunctions {
    pub p: usize,
    pub f_mu: ScaledFunction,
    pub f_phi: ScaledFunction,
    pub f_pi: ScaledFunction,
}

impl TruthFunctions {
    pub fn constant(p: usize, mu: f64, phi: f64, pi: f64) -> Result<Self> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::invalid(format!("pi must lie in (0, 1), got {pi}")));
        }
        Ok(Self {
            p,
            f_mu: ScaledFunction::constant(mu.ln()),
            f_phi: ScaledFunction::constant(phi.ln()),
            f_pi: ScaledFunction::constant(crate::tweedie::logit(pi)),
        })
    }

    pub fn params(&self, x: &[f64], zeta: PowerParam) -> Result<ZitParams> {
        let tweedie = TweedieParams::new(self.f_mu.eval(x)?.exp(), self.f_phi.eval(x)?.exp(), zeta)?;
        ZitParams::new(logistic(self.f_pi.eval(x)?), tweedie)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
#[derive(Default)]
pub enum ExposureLaw {
    #[default]
    Unit,
    Uniform { low: f64, high: f64 },
}


impl ExposureLaw {
    pub fn uniform_default() -> Self {
        ExposureLaw::Uniform { low: 0.5, high: 1.5 }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            ExposureLaw::Unit => Ok(1.0),
            ExposureLaw::Uniform { low, high } => {
                if !(low > 0.0 && high > low) {
                    return Err(Error::invalid(format!("exposure range ({low}, {high}) is not positive and increasing")));
                }
                Ok(rng.random_range(low..high))
            }
        }
    }
}

/// Recipe for random truth functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDesign {
    pub p: usize,
    /// Log mean at the average covariate and its spread.
    pub mu_center: f64,
    pub mu_scale: f64,
    pub phi_center: f64,
    pub phi_scale: f64,
    /// Target average zero-state probability and the logit-scale spread.
    pub mean_pi: f64,
    pub pi_scale: f64,
    pub seed: u64,
}

impl Default for SimulationDesign {
    fn default() -> Self {
        Self {
            p: 10,
            mu_center: 0.5,
            mu_scale: 1.0,
            phi_center: 0.0,
            phi_scale: 0.3,
            mean_pi: 0.3,
            pi_scale: 0.5,
            seed: 0,
        }
    }
}

impl SimulationDesign {
    /// Draw the three random functions and calibrate the zero-state center so
    /// the average probability over the reference sample equals `mean_pi`.
    pub fn truth_functions(&self) -> Result<TruthFunctions> {
        if !(self.mean_pi > 0.0 && self.mean_pi < 1.0) {
            return Err(Error::invalid(format!("mean_pi must lie in (0, 1), got {}", self.mean_pi)));
        }
        self.build(None, self.mean_pi)
    }

    /// Like [`Self::truth_functions`], but the zero-state center is set so the
    /// expected share of observed zeros at unit exposure equals `zero_rate`.
    pub fn truth_functions_for_zero_rate(&self, zeta: PowerParam, zero_rate: f64) -> Result<TruthFunctions> {
        if !(zero_rate > 0.0 && zero_rate < 1.0) {
            return Err(Error::invalid(format!("zero rate must lie in (0, 1), got {zero_rate}")));
        }
        self.build(Some(zeta), zero_rate)
    }

    /// With `zeta` the calibration target is the observed zero share,
    /// otherwise the mean zero-state probability.
    fn build(&self, zeta: Option<PowerParam>, target: f64) -> Result<TruthFunctions> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let reference: Vec<Vec<f64>> = (0..REFERENCE_SAMPLE)
            .map(|_| (0..self.p).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let f_mu = ScaledFunction::standardized(gen_random_function_with(self.p, &mut rng)?, self.mu_center, self.mu_scale, &reference)?;
        let f_phi = ScaledFunction::standardized(gen_random_function_with(self.p, &mut rng)?, self.phi_center, self.phi_scale, &reference)?;
        let mut f_pi = ScaledFunction::standardized(gen_random_function_with(self.p, &mut rng)?, 0.0, self.pi_scale, &reference)?;

        let standardized: Vec<f64> = reference.iter().map(|x| f_pi.eval(x)).collect::<Result<_>>()?;
        let tweedie_zero: Vec<f64> = match zeta {
            Some(z) => reference
                .iter()
                .map(|x| Ok(crate::tweedie::prob_zero(f_mu.eval(x)?.exp(), f_phi.eval(x)?.exp(), z)))
                .collect::<Result<_>>()?,
            None => vec![0.0; reference.len()],
        };
        let level = |c: f64| {
            standardized
                .iter()
                .zip(&tweedie_zero)
                .map(|(s, q)| {
                    let pi = logistic(c + s);
                    pi + (1.0 - pi) * q
                })
                .sum::<f64>()
                / standardized.len() as f64
        };
        if level(-40.0) >= target {
            return Err(Error::invalid(format!(
                "target {target} is below the zero share {:.4} the Tweedie part already produces",
                level(-40.0)
            )));
        }
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if level(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        f_pi.center = 0.5 * (lo + hi);
        Ok(TruthFunctions { p: self.p, f_mu, f_phi, f_pi })
    }
}

/// Per-row ground truth behind a simulated response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub mu: f64,
    pub phi: f64,
    pub pi: f64,
    pub exposure: f64,
}

impl TruthRow {
    pub fn pure_premium(&self) -> f64 {
        (1.0 - self.pi) * self.mu
    }

    /// Probability of an observed zero.
    pub fn zero_probability(&self, zeta: PowerParam) -> f64 {
        self.pi + (1.0 - self.pi) * crate::tweedie::prob_zero(self.mu, self.phi / self.exposure, zeta)
    }
}

/// `n` rows with standard-normal covariates and zero-inflated Tweedie responses.
pub fn make_dataset(
    n: usize,
    truth: &TruthFunctions,
    zeta: PowerParam,
    exposure: ExposureLaw,
    seed: u64,
) -> Result<(Dataset, Vec<TruthRow>)> {
    if n == 0 {
        return Err(Error::invalid("simulated dataset needs at least one row"));
    }
    let p = truth.p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut target = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut table = Vec::with_capacity(n);
    let mut x = vec![0.0; p];
    for _ in 0..n {
        for (j, v) in x.iter_mut().enumerate() {
            *v = rng.sample(StandardNormal);
            columns[j].push(*v);
        }
        let w = exposure.sample(&mut rng)?;
        let params = truth.params(&x, zeta)?;
        target.push(sample_zit(&params, w, &mut rng));
        weights.push(w);
        table.push(TruthRow {
            mu: params.tweedie.mu,
            phi: params.tweedie.phi,
            pi: params.pi,
            exposure: w,
        });
    }
    let features = FeatureMatrix::new(n, columns, Vec::new())?;
    let data = Dataset::new(FeatureSchema::numeric(p), features, target, weights)?;
    Ok((data, table))
}
