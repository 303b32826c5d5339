//! Synthetic instance generators, the covertype loader and the results CSV.
//!
//! Every generator is a pure function of its `*GenSpec` argument. Randomness comes from
//! `ChaCha8Rng` seeded with its `seed` field; normal draws use the Marsaglia
//! polar method so streams do not depend on a distribution crate's internals.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ScpError};
use crate::problems::{RowMatrix, SparseRegressionData, SskpData, SvmData};

/// Standard normal draws by the Marsaglia polar method; the second value of
/// each accepted pair is cached for the next call.
#[derive(Debug, Clone, Default)]
pub struct PolarGaussian {
    spare: Option<f64>,
}

impl PolarGaussian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * rng.gen::<f64>() - 1.0;
            let v = 2.0 * rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * m);
                return u * m;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseRegGenSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Ridge weight stored on the generated data; callers usually tune it afterwards.
    pub gamma: f64,
}

impl SparseRegGenSpec {
    pub fn new(n: usize, p: usize, k: usize, sigma: f64, seed: u64) -> Self {
        Self { n, p, k, sigma, seed, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRegressionInstance {
    pub train: SparseRegressionData,
    pub validation: SparseRegressionData,
    pub test: SparseRegressionData,
    pub beta: Vec<f64>,
    /// Ascending.
    pub support: Vec<usize>,
}

/// `y = Xβ + ε` with `X_ij ~ N(0,1)`, `β` supported on a uniform `k`-subset
/// with `N(0,1)` entries, and `ε ~ N(0, σ²)`; three splits of `N` rows share `β`.
pub fn gen_sparse_regression(spec: &SparseRegGenSpec) -> Result<SparseRegressionInstance> {
    if spec.n == 0 || spec.k == 0 || spec.k > spec.p {
        return Err(invalid("need N >= 1 and 1 <= k <= p"));
    }
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(invalid("sigma must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = PolarGaussian::new();
    let mut support = rand::seq::index::sample(&mut rng, spec.p, spec.k).into_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; spec.p];
    for &j in &support {
        beta[j] = gauss.sample(&mut rng);
    }
    let mut split = || -> Result<SparseRegressionData> {
        let x: Vec<f64> = (0..spec.n * spec.p).map(|_| gauss.sample(&mut rng)).collect();
        let x = RowMatrix::new(spec.n, spec.p, x)?;
        let y = (0..spec.n)
            .map(|i| {
                let signal: f64 = support.iter().map(|&j| x.get(i, j) * beta[j]).sum();
                signal + spec.sigma * gauss.sample(&mut rng)
            })
            .collect();
        SparseRegressionData::new(x, y, spec.k, spec.gamma)
    };
    let train = split()?;
    let validation = split()?;
    let test = split()?;
    Ok(SparseRegressionInstance { train, validation, test, beta, support })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SskpGenSpec {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub c: f64,
    pub q: f64,
}

impl SskpGenSpec {
    /// Penalty `c = 4` and capacity `q = max(k, 20)`.
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        Self { n, k, seed, c: 4.0, q: k.max(20) as f64 }
    }
}

/// Generated knapsack data with the per-item load distribution behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SskpInstance {
    pub data: SskpData,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// `r_i ~ U[10,20]`, `μ_i ~ U[20,30]`, `σ_i ~ U[5,15]`, `W_i^j ~ N(μ_i, σ_i²)` i.i.d. over scenarios.
pub fn gen_sskp_instance(spec: &SskpGenSpec) -> Result<SskpInstance> {
    if spec.n == 0 || spec.k == 0 {
        return Err(invalid("need N >= 1 and k >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = PolarGaussian::new();
    let r: Vec<f64> = (0..spec.k).map(|_| rng.gen_range(10.0..20.0)).collect();
    let mu: Vec<f64> = (0..spec.k).map(|_| rng.gen_range(20.0..30.0)).collect();
    let sigma: Vec<f64> = (0..spec.k).map(|_| rng.gen_range(5.0..15.0)).collect();
    let mut w = Vec::with_capacity(spec.n * spec.k);
    for _ in 0..spec.n {
        for i in 0..spec.k {
            w.push(mu[i] + sigma[i] * gauss.sample(&mut rng));
        }
    }
    let data = SskpData::new(r, RowMatrix::new(spec.n, spec.k, w)?, spec.c, spec.q)?;
    Ok(SskpInstance { data, mu, sigma })
}

pub fn gen_sskp(spec: &SskpGenSpec) -> Result<SskpData> {
    Ok(gen_sskp_instance(spec)?.data)
}

/// Row count of the canonical UCI covertype file.
pub const COVERTYPE_ROWS: usize = 581_012;
/// Row count quoted in some write-ups of the same dataset.
pub const COVERTYPE_ROWS_QUOTED: usize = 580_012;
const COVERTYPE_FEATURES: usize = 54;

#[derive(Debug, Clone, PartialEq)]
pub struct CovertypeSplit {
    pub train: SvmData,
    pub test: SvmData,
    /// Rows in the file that was read.
    pub rows_loaded: usize,
}

/// Loads the comma-separated covertype table (54 integer features and a
/// label in 1..=7, optionally gzipped), labels class 2 as `+1` and the rest
/// as `−1`, and draws two disjoint uniform subsets of `n` rows each.
pub fn load_covertype(path: &Path, seed: u64, n: usize, c: f64) -> Result<CovertypeSplit> {
    let (features, labels) = read_covertype(path)?;
    let rows = labels.len();
    if rows == COVERTYPE_ROWS_QUOTED {
        log::warn!("{}: {rows} rows, not the canonical {COVERTYPE_ROWS}", path.display());
    } else if rows != COVERTYPE_ROWS {
        log::warn!("{}: unexpected row count {rows}", path.display());
    }
    if n == 0 || 2 * n > rows {
        return Err(invalid(format!("need 1 <= 2N <= {rows} rows for two disjoint samples, got N = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, rows, 2 * n).into_vec();
    let build = |idx: &[usize]| -> Result<SvmData> {
        let mut x = Vec::with_capacity(idx.len() * COVERTYPE_FEATURES);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            let row = &features[i * COVERTYPE_FEATURES..(i + 1) * COVERTYPE_FEATURES];
            x.extend(row.iter().map(|&v| f64::from(v)));
            y.push(if labels[i] == 2 { 1.0 } else { -1.0 });
        }
        SvmData::new(RowMatrix::new(idx.len(), COVERTYPE_FEATURES, x)?, y, c)
    };
    Ok(CovertypeSplit { train: build(&picked[..n])?, test: build(&picked[n..])?, rows_loaded: rows })
}

fn read_covertype(path: &Path) -> Result<(Vec<i32>, Vec<u8>)> {
    let io_err = |source| ScpError::Io { path: path.to_path_buf(), source };
    let mut file = BufReader::new(File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 2];
    let gz = {
        let got = file.get_mut().read(&mut magic).map_err(io_err)?;
        got == 2 && magic == [0x1f, 0x8b]
    };
    let file = File::open(path).map_err(io_err)?;
    let reader: Box<dyn Read> =
        if gz { Box::new(GzDecoder::new(BufReader::new(file))) } else { Box::new(BufReader::new(file)) };
    let mut csv = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = csv.read_record(&mut record).map_err(|e| ScpError::Csv { path: path.to_path_buf(), source: e })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != COVERTYPE_FEATURES + 1 {
            return Err(ScpError::Parse {
                line,
                message: format!("expected {} fields, found {}", COVERTYPE_FEATURES + 1, record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let v: i32 = field.trim().parse().map_err(|_| ScpError::Parse {
                line,
                message: format!("field {} is not an integer: {field:?}", col + 1),
            })?;
            if col < COVERTYPE_FEATURES {
                features.push(v);
            } else if (1..=7).contains(&v) {
                labels.push(v as u8);
            } else {
                return Err(ScpError::Parse { line, message: format!("label {v} outside 1..=7") });
            }
        }
    }
    Ok((features, labels))
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub family: String,
    /// Population size `N`.
    pub population: usize,
    /// `p` for regression and SVM, `k` for the knapsack.
    pub dim: usize,
    /// Support size `k` for regression, 0 for the other families.
    pub sparsity: usize,
    pub sigma: f64,
    pub mode: String,
    /// Per-iteration sample size.
    pub sample_size: usize,
    pub seed: u64,
    pub oracle_seconds: f64,
    pub master_seconds: f64,
    pub total_seconds: f64,
    pub iterations: usize,
    pub objective: f64,
    /// `mape`, `accuracy` or `normalized_objective`.
    pub metric_name: String,
    pub metric: f64,
    pub fingerprint: String,
}

const RESULT_HEADER: [&str; 17] = [
    "experiment",
    "family",
    "population",
    "dim",
    "sparsity",
    "sigma",
    "mode",
    "sample_size",
    "seed",
    "oracle_seconds",
    "master_seconds",
    "total_seconds",
    "iterations",
    "objective",
    "metric_name",
    "metric",
    "fingerprint",
];

/// Writes a header line and one record per row.
pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let csv_err = |source| ScpError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(RESULT_HEADER).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ScpError::Io { path: path.to_path_buf(), source })
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let csv_err = |source| ScpError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// FNV-1a over the little-endian bytes of the ascending indices.
pub fn support_fingerprint(indices: &[usize]) -> String {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for i in sorted {
        for b in (i as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Denominator floor for [`mape`].
pub const MAPE_FLOOR: f64 = 1e-8;

/// `mean |pred − actual| / max(|actual|, 1e-8)`, as a fraction.
pub fn mape(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(invalid(format!("prediction has {} entries, truth has {}", pred.len(), actual.len())));
    }
    if pred.is_empty() {
        return Err(invalid("empty vectors"));
    }
    let total: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs() / a.abs().max(MAPE_FLOOR)).sum();
    Ok(total / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = PolarGaussian::new();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn noiseless_response_is_exact() {
        let inst = gen_sparse_regression(&SparseRegGenSpec::new(50, 12, 3, 0.0, 4)).unwrap();
        for d in [&inst.train, &inst.validation, &inst.test] {
            for i in 0..d.n() {
                let fit: f64 = inst.support.iter().map(|&j| d.x.get(i, j) * inst.beta[j]).sum();
                assert_eq!(fit, d.y[i]);
            }
        }
        assert_eq!(inst.support.len(), 3);
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
        let actual = [2.0, -4.0, 0.5];
        let pred: Vec<f64> = actual.iter().map(|a| 1.1 * a).collect();
        assert!((mape(&pred, &actual).unwrap() - 0.1).abs() < 1e-12);
        assert!(mape(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fingerprint_ignores_order() {
        assert_eq!(support_fingerprint(&[3, 1, 2]), support_fingerprint(&[1, 2, 3]));
        assert_ne!(support_fingerprint(&[1, 2]), support_fingerprint(&[1, 3]));
    }
}
