//! Synthetic data with a known sparse main-plus-interaction truth.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coef::Coefficients;
use crate::data::{pair_count, DesignData, Pair};
use crate::error::{Error, Result};
use crate::gradient::predict;

/// Where the true interactions sit relative to the true main effects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    /// Interactions only between pairs of true main effects.
    Hierarchical,
    /// Interactions only between pairs of features with no main effect.
    AntiHierarchical,
    /// No interactions.
    MainOnly,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Hierarchical => "hierarchical",
            Setting::AntiHierarchical => "anti_hierarchical",
            Setting::MainOnly => "main_only",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hierarchical" | "hier" | "i" => Ok(Setting::Hierarchical),
            "anti_hierarchical" | "anti" | "ii" => Ok(Setting::AntiHierarchical),
            "main_only" | "main" | "iii" => Ok(Setting::MainOnly),
            other => Err(Error::invalid(format!("unknown setting '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthSpec {
    pub setting: Setting,
    pub n: usize,
    pub p: usize,
    /// Number of nonzero main effects; the interaction settings use as many interactions.
    pub k_main: usize,
    pub seed: u64,
    /// Empirical signal variance over noise variance; `f64::INFINITY` gives noiseless data.
    pub snr: f64,
}

impl TruthSpec {
    pub fn new(setting: Setting, n: usize, p: usize, k_main: usize, seed: u64) -> Self {
        TruthSpec {
            setting,
            n,
            p,
            k_main,
            seed,
            snr: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("n and p must be at least 1"));
        }
        if self.k_main > self.p {
            return Err(Error::invalid(format!("k_main = {} exceeds p = {}", self.k_main, self.p)));
        }
        if !(self.snr > 0.0) {
            return Err(Error::invalid(format!("snr must be positive, got {}", self.snr)));
        }
        let eligible = match self.setting {
            Setting::Hierarchical => pair_count(self.k_main),
            Setting::AntiHierarchical => pair_count(self.p - self.k_main),
            Setting::MainOnly => return Ok(()),
        };
        if eligible < self.k_main {
            return Err(Error::invalid(format!(
                "{} setting needs {} interaction pairs but only {eligible} are eligible",
                self.setting, self.k_main
            )));
        }
        Ok(())
    }
}

/// Generated data and the coefficients that produced it.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub data: DesignData,
    pub truth: Coefficients,
    pub sigma: f64,
}

/// Draws `X` with iid standard normal entries, places the truth, and adds
/// Gaussian noise scaled to the requested signal-to-noise ratio. Nonzero true
/// coefficients are 1. Bit-for-bit reproducible from the seed.
pub fn generate(spec: &TruthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let TruthSpec { n, p, k_main, .. } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let x: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();

    let mut mains = sample(&mut rng, p, k_main).into_vec();
    mains.sort_unstable();
    let mut truth = Coefficients::zeros(p);
    for &i in &mains {
        truth.beta[i] = 1.0;
    }
    let pool: Vec<usize> = match spec.setting {
        Setting::Hierarchical => mains.clone(),
        Setting::AntiHierarchical => (0..p).filter(|i| mains.binary_search(i).is_err()).collect(),
        Setting::MainOnly => Vec::new(),
    };
    if spec.setting != Setting::MainOnly {
        let m = pool.len();
        let candidates: Vec<Pair> = (0..m)
            .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
            .map(|(a, b)| Pair { i: pool[a], j: pool[b] })
            .collect();
        for k in sample(&mut rng, candidates.len(), k_main) {
            truth.set_theta(candidates[k], 1.0);
        }
    }

    let clean = DesignData::new(n, p, x, vec![0.0; n])?;
    let signal = predict(&clean, &truth);
    let mean = signal.iter().sum::<f64>() / n as f64;
    let var = signal.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
    let sigma = if spec.snr.is_infinite() { 0.0 } else { (var / spec.snr).sqrt() };
    let y: Vec<f64> = signal
        .iter()
        .map(|s| {
            let e: f64 = StandardNormal.sample(&mut rng);
            s + sigma * e
        })
        .collect();
    let data = DesignData::new(n, p, clean.x().to_vec(), y)?;
    Ok(Synthetic { data, truth, sigma })
}
