//! Panel data: `n` individuals, each observed `ell` times in `R^d`.
//!
//! Nodes are flattened individual-major: node `i` (0-based) is repetition
//! `i % ell` of individual `i / ell`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct PanelDataset {
    n: usize,
    ell: usize,
    d: usize,
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PanelDataset {
    /// `values` is laid out as `[individual][repetition][feature]`.
    pub fn new(
        n: usize,
        ell: usize,
        d: usize,
        values: Vec<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Structural(format!(
                "need at least 2 individuals, got {n}"
            )));
        }
        if ell == 0 || d == 0 {
            return Err(Error::Structural(format!(
                "repetitions and dimension must be positive (ell={ell}, d={d})"
            )));
        }
        if values.len() != n * ell * d {
            return Err(Error::Structural(format!(
                "expected {} values for {n}x{ell}x{d}, got {}",
                n * ell * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Structural(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Structural(format!(
                    "{} labels for {n} individuals",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            n,
            ell,
            d,
            values,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn node_count(&self) -> usize {
        self.n * self.ell
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn individual_of(&self, node: usize) -> usize {
        node / self.ell
    }

    /// Feature vector of a flattened node.
    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.d..(node + 1) * self.d]
    }

    pub fn measurement(&self, individual: usize, rep: usize) -> &[f64] {
        self.node(individual * self.ell + rep)
    }

    /// Individuals `range.start..range.end` as a new dataset, keeping labels.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.n || range.start >= range.end {
            return Err(Error::Structural(format!(
                "invalid individual range {range:?} for n={}",
                self.n
            )));
        }
        let stride = self.ell * self.d;
        let values = self.values[range.start * stride..range.end * stride].to_vec();
        let labels = self.labels.as_ref().map(|l| l[range.clone()].to_vec());
        Self::new(range.len(), self.ell, self.d, values, labels)
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| v * factor).collect();
        Self::new(self.n, self.ell, self.d, values, self.labels.clone())
    }
}

/// Reads a panel CSV: header row, then `individual_id, rep_index, x_1..x_d`.
///
/// Individuals are ordered by first appearance; rows of one individual are
/// ordered by their integer `rep_index`.
pub fn load_panel_csv(path: impl AsRef<Path>, n: usize, ell: usize) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel_csv(file, n, ell)
}

pub fn read_panel_csv<R: Read>(reader: R, n: usize, ell: usize) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
        Err(_) => return Err(Error::Structural("missing header row".into())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Structural("empty file".into()));
    }
    if headers.len() < 3 {
        return Err(Error::Structural(format!(
            "expected individual_id, rep_index and at least one feature column, got {} columns",
            headers.len()
        )));
    }
    let d = headers.len() - 2;

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(i64, Vec<f64>)>> = HashMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        // header is row 1
        let row = idx + 2;
        let id = record[0].to_string();
        let rep: i64 = record[1].parse().map_err(|_| Error::Parse {
            row,
            column: 2,
            message: format!("rep_index {:?} is not an integer", &record[1]),
        })?;
        let mut features = Vec::with_capacity(d);
        for col in 0..d {
            let cell = &record[col + 2];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: col + 3,
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: col + 3,
                    message: format!("{cell:?} is not finite"),
                });
            }
            features.push(v);
        }
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push((rep, features));
    }
    if order.is_empty() {
        return Err(Error::Structural("file has no data rows".into()));
    }
    if order.len() != n {
        return Err(Error::Structural(format!(
            "expected {n} individuals, found {}",
            order.len()
        )));
    }

    let mut values = Vec::with_capacity(n * ell * d);
    for id in &order {
        let reps = rows.get_mut(id).expect("id recorded on insert");
        if reps.len() != ell {
            return Err(Error::Structural(format!(
                "individual {id:?} has {} repetitions, expected {ell}",
                reps.len()
            )));
        }
        reps.sort_by_key(|(rep, _)| *rep);
        if reps.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Structural(format!(
                "individual {id:?} has duplicate rep_index values"
            )));
        }
        for (_, features) in reps.iter() {
            values.extend_from_slice(features);
        }
    }
    PanelDataset::new(n, ell, d, values, Some(order))
}

/// Writes the dataset in the layout accepted by [`read_panel_csv`].
pub fn write_panel_csv<W: Write>(ds: &PanelDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["individual_id".to_string(), "rep_index".to_string()];
    header.extend((1..=ds.d).map(|k| format!("x{k}")));
    wtr.write_record(&header)?;
    for i in 0..ds.n {
        let id = match &ds.labels {
            Some(labels) => labels[i].clone(),
            None => (i + 1).to_string(),
        };
        for j in 0..ds.ell {
            let mut record = vec![id.clone(), (j + 1).to_string()];
            record.extend(ds.measurement(i, j).iter().map(|v| v.to_string()));
            wtr.write_record(&record)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Lognormal,
    GaussianMixture,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "lognormal" | "log-normal" => Ok(Family::Lognormal),
            "gaussian_mixture" | "gaussian-mixture" | "mixture" => Ok(Family::GaussianMixture),
            other => Err(Error::Config(format!("unknown family {other:?}"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Lognormal => "lognormal",
            Family::GaussianMixture => "gaussian_mixture",
        })
    }
}

/// Parameters of the two-regime repeated-measures generator.
///
/// Index 0 holds the pre-change regime (individuals `1..=tau`), index 1 the
/// post-change regime. A `beta` entry of length 1 is broadcast to all `d`
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub family: Family,
    /// Within-individual correlation of the latent means.
    pub rho: [f64; 2],
    pub beta: [Vec<f64>; 2],
    /// Spread of the individual-level centers around `beta`.
    pub epsilon: [f64; 2],
    /// Lower bounds of the uniform noise scale, per regime.
    pub nu_lo: [f64; 2],
    /// Upper bounds of the uniform noise scale, per regime.
    pub nu_hi: [f64; 2],
    pub sigma: f64,
    /// Last pre-change individual (1-based).
    pub tau: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    /// One of the four standard simulation settings (1 = null, 2 = within
    /// correlation change, 3 = location shift, 4 = scale change) for a family.
    pub fn setting(family: Family, setting: u8, tau: usize, seed: u64) -> Result<Self> {
        let base = GeneratorConfig {
            family,
            rho: [0.2, 0.2],
            beta: [vec![0.0], vec![0.0]],
            epsilon: [1.0, 1.0],
            nu_lo: [1.0, 1.0],
            nu_hi: [1.2, 1.2],
            sigma: 1.0,
            tau,
            seed,
        };
        let cfg = match (family, setting) {
            (_, 1) => base,
            (Family::Gaussian, 2) => GeneratorConfig { rho: [0.1, 0.3], ..base },
            (Family::Lognormal, 2) => GeneratorConfig { rho: [0.1, 0.6], ..base },
            (Family::GaussianMixture, 2) => GeneratorConfig { rho: [0.1, 0.4], ..base },
            (_, 3) => {
                let shift = match family {
                    Family::Gaussian => 0.3,
                    Family::Lognormal => 0.4,
                    Family::GaussianMixture => 0.45,
                };
                GeneratorConfig {
                    beta: [vec![0.0], vec![shift]],
                    ..base
                }
            }
            (Family::Gaussian, 4) => GeneratorConfig {
                epsilon: [1.0, 1.1],
                nu_lo: [1.0, 1.1],
                nu_hi: [1.1, 1.2],
                ..base
            },
            (Family::Lognormal, 4) => GeneratorConfig {
                epsilon: [1.0, 1.2],
                nu_lo: [1.0, 1.2],
                nu_hi: [1.1, 1.3],
                ..base
            },
            (Family::GaussianMixture, 4) => GeneratorConfig {
                epsilon: [1.0, 1.1],
                nu_lo: [1.0, 1.2],
                nu_hi: [1.1, 1.3],
                ..base
            },
            (_, s) => return Err(Error::Config(format!("unknown setting {s}, expected 1..=4"))),
        };
        Ok(cfg)
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        for k in 0..2 {
            if !(0.0..1.0).contains(&self.rho[k]) {
                return Err(Error::Config(format!(
                    "rho[{k}] = {} must lie in [0, 1)",
                    self.rho[k]
                )));
            }
            if self.beta[k].len() != 1 && self.beta[k].len() != d {
                return Err(Error::Config(format!(
                    "beta[{k}] has length {}, expected 1 or d = {d}",
                    self.beta[k].len()
                )));
            }
            if !(self.epsilon[k] >= 0.0) {
                return Err(Error::Config(format!("epsilon[{k}] must be >= 0")));
            }
            if !(self.nu_lo[k] >= 0.0 && self.nu_lo[k] <= self.nu_hi[k]) {
                return Err(Error::Config(format!(
                    "need 0 <= nu_lo[{k}] <= nu_hi[{k}], got {} and {}",
                    self.nu_lo[k], self.nu_hi[k]
                )));
            }
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma = {} must be >= 0", self.sigma)));
        }
        if self.tau < 1 || self.tau >= n {
            return Err(Error::Config(format!(
                "tau = {} must satisfy 1 <= tau < n = {n}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Lower Cholesky factor of `rho * 11' + (1 - rho) I` of size `ell`.
fn exchangeable_cholesky(rho: f64, ell: usize) -> Result<Vec<f64>> {
    let a = |i: usize, j: usize| if i == j { 1.0 } else { rho };
    let mut l = vec![0.0; ell * ell];
    for j in 0..ell {
        let mut diag = a(j, j);
        for m in 0..j {
            diag -= l[j * ell + m] * l[j * ell + m];
        }
        if diag <= 0.0 {
            return Err(Error::Config(format!(
                "within-individual correlation matrix with rho = {rho} is not positive definite"
            )));
        }
        let diag = diag.sqrt();
        l[j * ell + j] = diag;
        for i in j + 1..ell {
            let mut s = a(i, j);
            for m in 0..j {
                s -= l[i * ell + m] * l[j * ell + m];
            }
            l[i * ell + j] = s / diag;
        }
    }
    Ok(l)
}

/// Draws a dataset from the two-regime generator.
///
/// Individual `i` uses its own stream `stream_rng(seed, i)` and draws, in
/// order: `d` normals for its center, then per feature `ell` normals for the
/// correlated latent means, one uniform for the noise scale, then per
/// repetition (a Bernoulli for the mixture family and) `d` noise normals.
pub fn generate(config: &GeneratorConfig, n: usize, ell: usize, d: usize) -> Result<PanelDataset> {
    if n < 2 || ell == 0 || d == 0 {
        return Err(Error::Config(format!(
            "invalid shape n={n}, ell={ell}, d={d}"
        )));
    }
    config.validate(n, d)?;
    let chol = [
        exchangeable_cholesky(config.rho[0], ell)?,
        exchangeable_cholesky(config.rho[1], ell)?,
    ];
    let stride = ell * d;
    let mut values = vec![0.0; n * stride];
    values
        .par_chunks_mut(stride)
        .enumerate()
        .for_each(|(i, out)| {
            let regime = usize::from(i >= config.tau);
            let mut rng = stream_rng(config.seed, i as u64);
            let beta = &config.beta[regime];
            let center: Vec<f64> = (0..d)
                .map(|c| {
                    let b = if beta.len() == 1 { beta[0] } else { beta[c] };
                    let z: f64 = rng.sample(StandardNormal);
                    b + config.epsilon[regime] * z
                })
                .collect();

            let l = &chol[regime];
            let mut theta = vec![0.0; stride];
            let mut z = vec![0.0; ell];
            for c in 0..d {
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
                for j in 0..ell {
                    let mut s = 0.0;
                    for m in 0..=j {
                        s += l[j * ell + m] * z[m];
                    }
                    theta[j * d + c] = center[c] + config.sigma * s;
                }
            }

            let (lo, hi) = (config.nu_lo[regime], config.nu_hi[regime]);
            let u: f64 = rng.random();
            let omega = lo + (hi - lo) * u;

            for j in 0..ell {
                let first_component = match config.family {
                    Family::GaussianMixture => rng.random_bool(0.5),
                    _ => true,
                };
                for c in 0..d {
                    let eps: f64 = rng.sample(StandardNormal);
                    let mean = theta[j * d + c];
                    out[j * d + c] = match config.family {
                        Family::Gaussian => mean + omega * eps,
                        Family::Lognormal => (mean + omega * eps).exp(),
                        Family::GaussianMixture if first_component => mean + omega * eps,
                        Family::GaussianMixture => mean + 2.0 + (0.5f64).sqrt() * omega * eps,
                    };
                }
            }
        });
    PanelDataset::new(n, ell, d, values, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_of(rows: &[&str]) -> String {
        rows.join("\n") + "\n"
    }

    #[test]
    fn loads_shape_from_csv() {
        let mut rows = vec!["individual_id,rep_index,a,b,c".to_string()];
        for i in 1..=4 {
            for j in 1..=2 {
                rows.push(format!("{i},{j},{},{},{}", i, j, i * j));
            }
        }
        let text = rows.join("\n");
        let ds = read_panel_csv(text.as_bytes(), 4, 2).unwrap();
        assert_eq!((ds.n(), ds.ell(), ds.d()), (4, 2, 3));
        assert_eq!(ds.measurement(2, 1), &[3.0, 2.0, 6.0]);
        assert_eq!(ds.labels().unwrap()[3], "4");
    }

    #[test]
    fn rep_order_follows_rep_index() {
        let text = csv_of(&["id,rep,x", "a,2,20", "a,1,10", "b,1,1", "b,2,2"]);
        let ds = read_panel_csv(text.as_bytes(), 2, 2).unwrap();
        assert_eq!(ds.values(), &[10.0, 20.0, 1.0, 2.0]);
    }

    #[test]
    fn ragged_reps_name_the_individual() {
        let text = csv_of(&[
            "id,rep,x", "1,1,0", "1,2,0", "2,1,0", "2,2,0", "3,1,0", "4,1,0", "4,2,0",
        ]);
        let err = read_panel_csv(text.as_bytes(), 4, 2).unwrap_err();
        match err {
            Error::Structural(msg) => assert!(msg.contains("\"3\""), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_structural() {
        let err = read_panel_csv("".as_bytes(), 4, 2).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err:?}");
        let err = read_panel_csv("id,rep,x\n".as_bytes(), 4, 2).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err:?}");
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let text = csv_of(&["id,rep,x,y", "1,1,0,0", "1,2,0,oops", "2,1,0,0", "2,2,0,0"]);
        match read_panel_csv(text.as_bytes(), 2, 2).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_individual_count() {
        let text = csv_of(&["id,rep,x", "1,1,0", "2,1,0", "3,1,0"]);
        assert!(read_panel_csv(text.as_bytes(), 4, 1).is_err());
    }

    #[test]
    fn new_rejects_bad_shapes() {
        assert!(PanelDataset::new(1, 1, 1, vec![0.0], None).is_err());
        assert!(PanelDataset::new(2, 1, 1, vec![0.0], None).is_err());
        assert!(PanelDataset::new(2, 1, 1, vec![0.0, f64::NAN], None).is_err());
    }

    #[test]
    fn node_mapping_is_individual_major() {
        let ds = PanelDataset::new(3, 2, 1, (0..6).map(f64::from).collect(), None).unwrap();
        assert_eq!(ds.individual_of(0), 0);
        assert_eq!(ds.individual_of(3), 1);
        assert_eq!(ds.node(5), &[5.0]);
    }

    #[test]
    fn null_setting_has_identical_regimes() {
        let cfg = GeneratorConfig::setting(Family::Gaussian, 1, 5, 0).unwrap();
        assert_eq!(cfg.rho, [0.2, 0.2]);
        assert_eq!(cfg.beta[0], cfg.beta[1]);
        assert_eq!(cfg.epsilon, [1.0, 1.0]);
        assert_eq!(cfg.nu_lo, [1.0, 1.0]);
        assert_eq!(cfg.nu_hi, [1.2, 1.2]);
    }

    #[test]
    fn degenerate_variances_give_exact_centers() {
        let cfg = GeneratorConfig {
            family: Family::Gaussian,
            rho: [0.5, 0.3],
            beta: [vec![1.5, -2.0], vec![0.25, 4.0]],
            epsilon: [0.0, 0.0],
            nu_lo: [0.0, 0.0],
            nu_hi: [0.0, 0.0],
            sigma: 0.0,
            tau: 2,
            seed: 11,
        };
        let ds = generate(&cfg, 4, 3, 2).unwrap();
        for i in 0..4 {
            let expect = if i < 2 { [1.5, -2.0] } else { [0.25, 4.0] };
            for j in 0..3 {
                assert_eq!(ds.measurement(i, j), &expect);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for family in [Family::Gaussian, Family::Lognormal, Family::GaussianMixture] {
            let cfg = GeneratorConfig::setting(family, 4, 10, 99).unwrap();
            let a = generate(&cfg, 20, 3, 4).unwrap();
            let b = generate(&cfg, 20, 3, 4).unwrap();
            let bits = |ds: &PanelDataset| ds.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = GeneratorConfig::setting(Family::Gaussian, 1, 5, 0).unwrap();
        cfg.rho[1] = 1.0;
        assert!(matches!(generate(&cfg, 10, 2, 2), Err(Error::Config(_))));
        let mut cfg = GeneratorConfig::setting(Family::Gaussian, 1, 5, 0).unwrap();
        cfg.nu_lo[0] = 2.0;
        assert!(generate(&cfg, 10, 2, 2).is_err());
        let cfg = GeneratorConfig::setting(Family::Gaussian, 1, 10, 0).unwrap();
        assert!(generate(&cfg, 10, 2, 2).is_err());
        assert!(GeneratorConfig::setting(Family::Gaussian, 5, 1, 0).is_err());
    }

    #[test]
    fn cholesky_reproduces_matrix() {
        let ell = 4;
        let l = exchangeable_cholesky(0.3, ell).unwrap();
        for i in 0..ell {
            for j in 0..ell {
                let s: f64 = (0..ell).map(|m| l[i * ell + m] * l[j * ell + m]).sum();
                let expect = if i == j { 1.0 } else { 0.3 };
                assert!((s - expect).abs() < 1e-14);
            }
        }
    }
}
