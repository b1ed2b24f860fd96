//! Seeded instance generators: random polytopes, shared-region families and
//! a diet-planning family built on a fixed nutrient table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::Tolerances;
use crate::model::{forward_solve, normalize_rows, preflight, DataItem, Dataset, Dmp};

pub const MAX_ATTEMPTS: usize = 20;
const BOX: f64 = 10.0;

/// Independent random streams per item and purpose.
#[derive(Clone, Copy)]
enum Purpose {
    Region = 0,
    Cost = 1,
    Noise = 2,
}

fn stream(seed: u64, index: usize, attempt: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((index as u64) << 24) | ((attempt as u64) << 8) | purpose as u64);
    rng
}

/// Uniform draw from the unit L1 sphere.
pub fn random_cost(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mags: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = mags.iter().sum();
    mags.into_iter()
        .map(|v| if rng.random_bool(0.5) { v / total } else { -v / total })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Rows per decision-maker, including the `2n` bounding-box rows.
    pub m: usize,
    pub k: usize,
    /// Number of distinct true cost vectors; observation `k` uses vector
    /// `k mod l_hint`.
    pub l_hint: usize,
    pub seed: u64,
    pub noise_amplitude: f64,
    /// One region shared by every decision-maker.
    pub shared: bool,
}

impl SyntheticSpec {
    /// One true cost vector per observation, unit noise, private regions.
    pub fn new(n: usize, m: usize, k: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            m,
            k,
            l_hint: k,
            seed,
            noise_amplitude: 1.0,
            shared: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::InvalidInput("n and K must be positive".into()));
        }
        if self.m < 2 * self.n || self.m < self.n + 1 {
            return Err(Error::InvalidInput(format!(
                "m = {} cannot hold the {} bounding-box rows",
                self.m,
                2 * self.n
            )));
        }
        if self.l_hint == 0 || self.l_hint > self.k {
            return Err(Error::InvalidInput("l_hint must lie in 1..=K".into()));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::InvalidInput("noise amplitude must be a nonnegative number".into()));
        }
        Ok(())
    }
}

/// Random rows through a neighborhood of an interior anchor, plus a box.
fn random_region(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<Dmp> {
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for _ in 0..m - 2 * n {
        let row: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let slack = rng.random_range(0.5..2.0);
        b.push(row.iter().zip(&x0).map(|(r, x)| r * x).sum::<f64>() - slack);
        a.push(row);
    }
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; n];
            row[j] = sign;
            a.push(row);
            b.push(-BOX);
        }
    }
    Dmp::new(a, b)
}

fn observe(dmp: &Dmp, cost: &[f64], noise: f64, rng: &mut ChaCha8Rng, tol: &Tolerances) -> Result<Vec<f64>> {
    let (x, _) = forward_solve(dmp, cost, tol)?;
    Ok(x.into_iter()
        .map(|v| if noise > 0.0 { v + rng.random_range(0.0..=noise) } else { v })
        .collect())
}

fn checked_region(dmp: Dmp, k: usize, tol: &Tolerances) -> Result<Dmp> {
    let dmp = normalize_rows(&dmp, k)?;
    let report = preflight(&dmp, tol)?;
    if !report.full_dimensional {
        return Err(Error::InvalidModel("region has an empty interior".into()));
    }
    Ok(dmp)
}

/// Random-polytope family.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let tol = Tolerances::default();
    let costs: Vec<Vec<f64>> = (0..spec.l_hint)
        .map(|g| random_cost(spec.n, &mut stream(spec.seed, g, 0, Purpose::Cost)))
        .collect();
    let shared = if spec.shared {
        Some(region_with_retries(spec, 0, &tol)?)
    } else {
        None
    };
    let mut items = Vec::with_capacity(spec.k);
    for k in 0..spec.k {
        let dmp = match &shared {
            Some(d) => d.clone(),
            None => region_with_retries(spec, k, &tol)?,
        };
        let mut noise = stream(spec.seed, k, 0, Purpose::Noise);
        let x_hat = observe(&dmp, &costs[k % spec.l_hint], spec.noise_amplitude, &mut noise, &tol)?;
        items.push(DataItem { dmp, x_hat });
    }
    Dataset::new(items)
}

fn region_with_retries(spec: &SyntheticSpec, k: usize, tol: &Tolerances) -> Result<Dmp> {
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream(spec.seed, k, attempt, Purpose::Region);
        match random_region(spec.n, spec.m, &mut rng).and_then(|d| checked_region(d, k, tol)) {
            Ok(d) => return Ok(d),
            Err(e) => last = e.to_string(),
        }
    }
    Err(Error::GeneratorFailed {
        attempts: MAX_ATTEMPTS,
        reason: last,
    })
}

/// Nutrient content per serving of nine food types with daily limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DietTable {
    pub nutrients: Vec<String>,
    pub units: Vec<String>,
    pub foods: Vec<String>,
    /// `values[nutrient][food]`.
    pub values: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    /// `None` where no upper limit applies.
    pub upper: Vec<Option<f64>>,
}

impl DietTable {
    fn nutrient_index(&self, nutrient: &str) -> Option<usize> {
        self.nutrients.iter().position(|n| n == nutrient)
    }

    pub fn value(&self, nutrient: &str, food: &str) -> Option<f64> {
        let i = self.nutrient_index(nutrient)?;
        let j = self.foods.iter().position(|f| f == food)?;
        Some(self.values[i][j])
    }

    pub fn limits(&self, nutrient: &str) -> Option<(f64, Option<f64>)> {
        let i = self.nutrient_index(nutrient)?;
        Some((self.lower[i], self.upper[i]))
    }
}

type TableRow = (&'static str, &'static str, [f64; 9], f64, Option<f64>);

const DIET_ROWS: [TableRow; 13] = [
    ("Energy", "kcal", [91.53, 68.94, 23.51, 65.49, 110.88, 83.28, 80.50, 63.20, 52.16], 1800.00, Some(2500.00)),
    ("Total_Fat", "g", [4.95, 0.71, 1.80, 3.48, 6.84, 4.41, 5.80, 0.94, 0.18], 44.00, Some(78.00)),
    ("Carbohydrate", "g", [6.89, 12.16, 0.25, 0.00, 5.44, 4.68, 0.56, 11.42, 13.59], 220.00, Some(330.00)),
    ("Protein", "g", [4.90, 3.68, 1.59, 7.99, 6.80, 5.93, 6.27, 2.40, 0.41], 56.00, None),
    ("Fiber", "g", [0.00, 0.06, 0.00, 0.00, 0.28, 0.29, 0.00, 1.19, 1.81], 20.00, Some(30.00)),
    ("Vitamin C", "mg", [0.01, 1.76, 0.00, 0.00, 0.17, 0.16, 0.00, 0.02, 11.19], 90.00, Some(2000.00)),
    ("Vitamin B6", "mg", [0.06, 0.03, 0.01, 0.09, 0.11, 0.06, 0.06, 0.03, 0.10], 1.30, Some(100.00)),
    ("Vitamin B12", "mcg", [0.67, 0.39, 0.09, 0.65, 0.11, 0.63, 0.56, 0.00, 0.00], 2.40, None),
    ("Calcium", "mg", [172.09, 125.72, 46.24, 2.21, 5.90, 15.03, 29.00, 27.21, 6.14], 1000.00, Some(2500.00)),
    ("Iron", "mg", [0.05, 0.08, 0.04, 0.75, 0.35, 0.35, 0.73, 0.79, 0.13], 8.00, Some(45.00)),
    ("Copper", "mg", [0.02, 0.04, 0.01, 0.03, 0.03, 0.03, 0.04, 0.05, 0.06], 0.90, Some(10.00)),
    ("Sodium", "mg", [61.02, 48.24, 65.08, 72.32, 211.05, 128.27, 223.50, 125.62, 1.42], 1500.00, Some(2300.00)),
    ("Vitamin A", "mcg", [42.89, 22.24, 12.78, 0.00, 1.33, 9.53, 81.00, 0.01, 13.04], 900.00, Some(3000.00)),
];

pub fn embedded_diet_table() -> DietTable {
    DietTable {
        nutrients: DIET_ROWS.iter().map(|r| r.0.to_string()).collect(),
        units: DIET_ROWS.iter().map(|r| r.1.to_string()).collect(),
        foods: (1..=9).map(|j| format!("food {j}")).collect(),
        values: DIET_ROWS.iter().map(|r| r.2.to_vec()).collect(),
        lower: DIET_ROWS.iter().map(|r| r.3).collect(),
        upper: DIET_ROWS.iter().map(|r| r.4).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DietSpec {
    pub k: usize,
    pub seed: u64,
    /// Limits are perturbed by factors in `[1 - eta_max, 1]` (lower) and
    /// `[1, 1 + eta_max]` (upper).
    pub eta_max: f64,
    /// Possible deviations of the serving cap from `base_serving`.
    pub eta_bar_set: Vec<u32>,
    pub base_serving: u32,
    pub noise_amplitude: f64,
}

impl DietSpec {
    pub fn new(k: usize, seed: u64) -> Self {
        DietSpec {
            k,
            seed,
            eta_max: 0.20,
            eta_bar_set: vec![1, 2, 3, 4],
            base_serving: 8,
            noise_amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("K must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.eta_max) {
            return Err(Error::InvalidInput("eta_max must lie in [0, 1)".into()));
        }
        if self.eta_bar_set.is_empty() || self.eta_bar_set.iter().any(|&e| e >= self.base_serving) {
            return Err(Error::InvalidInput("serving deviations must be nonempty and below the base".into()));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::InvalidInput("noise amplitude must be a nonnegative number".into()));
        }
        Ok(())
    }
}

fn diet_region(table: &DietTable, spec: &DietSpec, rng: &mut ChaCha8Rng) -> Result<Dmp> {
    let n = table.foods.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut labels = Vec::new();
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        a.push(row);
        b.push(0.0);
        labels.push(format!("{} >= 0", table.foods[j]));
    }
    for (i, name) in table.nutrients.iter().enumerate() {
        let f_low = rng.random_range(1.0 - spec.eta_max..=1.0);
        a.push(table.values[i].clone());
        b.push(table.lower[i] * f_low);
        labels.push(format!("{name} lower"));
        if let Some(ul) = table.upper[i] {
            let f_up = rng.random_range(1.0..=1.0 + spec.eta_max);
            a.push(table.values[i].iter().map(|v| -v).collect());
            b.push(-ul * f_up);
            labels.push(format!("{name} upper"));
        }
    }
    for j in 0..n {
        let dev = spec.eta_bar_set[rng.random_range(0..spec.eta_bar_set.len())] as f64;
        let cap = spec.base_serving as f64 + if rng.random_bool(0.5) { dev } else { -dev };
        let mut row = vec![0.0; n];
        row[j] = -1.0;
        a.push(row);
        b.push(-cap);
        labels.push(format!("{} max serving", table.foods[j]));
    }
    Dmp::new(a, b)?.with_labels(labels)
}

/// Diet-planning family: perturbed nutrient limits and serving caps per
/// decision-maker, a random preference, and a noisy optimal diet.
pub fn gen_diet(spec: &DietSpec) -> Result<Dataset> {
    spec.validate()?;
    let table = embedded_diet_table();
    let tol = Tolerances::default();
    let n = table.foods.len();
    let mut items = Vec::with_capacity(spec.k);
    for k in 0..spec.k {
        let mut last = String::new();
        let mut item = None;
        for attempt in 0..MAX_ATTEMPTS {
            let mut region_rng = stream(spec.seed, k, attempt, Purpose::Region);
            let attempt_item = diet_region(&table, spec, &mut region_rng)
                .and_then(|d| checked_region(d, k, &tol))
                .and_then(|dmp| {
                    let cost = random_cost(n, &mut stream(spec.seed, k, attempt, Purpose::Cost));
                    let mut noise = stream(spec.seed, k, attempt, Purpose::Noise);
                    let x_hat = observe(&dmp, &cost, spec.noise_amplitude, &mut noise, &tol)?;
                    Ok(DataItem { dmp, x_hat })
                });
            match attempt_item {
                Ok(it) => {
                    item = Some(it);
                    break;
                }
                Err(e) => last = e.to_string(),
            }
        }
        items.push(item.ok_or(Error::GeneratorFailed {
            attempts: MAX_ATTEMPTS,
            reason: last,
        })?);
    }
    Dataset::new(items)
}

/// Three decision-makers with box regions: the first two share
/// `[0, 1.5] x [0, 1]`, the third has `[0, 2.5]^2`.
pub fn box_example() -> Dataset {
    let boxed = |u1: f64, u2: f64| {
        Dmp::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![-u1, -u2, 0.0, 0.0],
        )
        .expect("box rows are well formed")
    };
    Dataset::new(vec![
        DataItem {
            dmp: boxed(1.5, 1.0),
            x_hat: vec![1.2, 1.0],
        },
        DataItem {
            dmp: boxed(1.5, 1.0),
            x_hat: vec![1.5, 0.6],
        },
        DataItem {
            dmp: boxed(2.5, 2.5),
            x_hat: vec![2.5, 0.3],
        },
    ])
    .expect("example dataset is consistent")
}
