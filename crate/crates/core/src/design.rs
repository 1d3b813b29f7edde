//! Latin hypercube designs over the unit cube.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::policy::{policy_labels, PolicyVector, N_POLICIES, POLICY_SPECS};
use crate::store;

/// `n` points in `[0, 1]^p`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    labels: Vec<String>,
    n: usize,
    values: Vec<f64>,
}

fn default_labels(p: usize) -> Vec<String> {
    if p == N_POLICIES {
        policy_labels()
    } else {
        (1..=p).map(|j| format!("x{j}")).collect()
    }
}

/// Plain Latin hypercube: per dimension, one point in each stratum
/// `[i/n, (i+1)/n)` with uniform jitter, strata permuted independently.
pub fn lhs_sample(n: usize, p: usize, seed: u64) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lhs_with_rng(n, p, &mut rng)
}

pub(crate) fn lhs_with_rng<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DesignMatrix {
    let mut values = vec![0.0; n * p];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..p {
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            let x = (s as f64 + rng.random::<f64>()) / n as f64;
            // Guard against rounding up into the next stratum.
            values[i * p + j] = x.min((s + 1) as f64 / n as f64 - f64::EPSILON).max(0.0);
        }
    }
    DesignMatrix {
        labels: default_labels(p),
        n,
        values,
    }
}

/// The status-quo point plus each lever alone at its maximum.
pub fn default_augmentation(p: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; p]];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        out.push(e);
    }
    out
}

impl DesignMatrix {
    pub fn new(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = labels.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            labels,
            n: rows.len(),
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(N_POLICIES, Vec::len);
        Self::new(default_labels(p), rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.p().max(1)).take(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Appends `extra` rows, which must lie in the unit cube.
    pub fn augment(&self, extra: &[Vec<f64>]) -> Result<Self> {
        let p = self.p();
        let mut out = self.clone();
        for r in extra {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidConfig(
                    "augmentation points must lie in the unit cube".into(),
                ));
            }
            out.values.extend_from_slice(r);
            out.n += 1;
        }
        Ok(out)
    }

    /// Each row mapped onto the policy ranges.
    pub fn to_policies(&self) -> Result<Vec<PolicyVector>> {
        if self.p() != N_POLICIES {
            return Err(Error::DimensionMismatch {
                expected: N_POLICIES,
                got: self.p(),
            });
        }
        Ok(self.rows().map(PolicyVector::from_normalized).collect())
    }

    /// Writes `row_id` plus one column per label. With `scaled`, policy
    /// designs are written in natural units instead of the unit cube.
    pub fn write_csv(&self, path: &Path, scaled: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row_id".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)
            .map_err(|e| store::csv_err(path, e))?;
        for (i, r) in self.rows().enumerate() {
            let mut rec = vec![i.to_string()];
            if scaled && self.p() == N_POLICIES {
                let pv = PolicyVector::from_normalized(r).to_array();
                rec.extend(pv.iter().map(|v| v.to_string()));
            } else {
                rec.extend(r.iter().map(|v| v.to_string()));
            }
            w.write_record(&rec).map_err(|e| store::csv_err(path, e))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        store::write_atomic(path, &bytes)
    }

    /// Reads a normalized design CSV. A scaled policy design (values outside
    /// the unit cube) is detected by header and converted back.
    pub fn read_csv(path: &Path) -> Result<(Vec<usize>, Self)> {
        let text = store::read_text(path)?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| store::csv_err(path, e))?.clone();
        if headers.get(0) != Some("row_id") {
            return Err(store::csv_msg(path, 1, "first column must be row_id"));
        }
        let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let is_policy = labels.len() == N_POLICIES
            && labels
                .iter()
                .zip(POLICY_SPECS.iter())
                .all(|(l, s)| l == s.name);
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| store::csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let vals = store::parse_record(path, line, &rec)?;
            ids.push(vals[0] as usize);
            rows.push(vals[1..].to_vec());
        }
        if is_policy && rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            for r in &mut rows {
                for (j, v) in r.iter_mut().enumerate() {
                    *v = POLICY_SPECS[j].normalize(*v);
                }
            }
        }
        Ok((ids, Self::new(labels, &rows)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stratified(d: &DesignMatrix) -> bool {
        let n = d.n();
        (0..d.p()).all(|j| {
            let mut counts = vec![0; n];
            for r in d.rows() {
                counts[(r[j] * n as f64).floor() as usize] += 1;
            }
            counts.iter().all(|&c| c == 1)
        })
    }

    #[test]
    fn single_point() {
        let d = lhs_sample(1, 10, 3);
        assert_eq!(d.n(), 1);
        assert!(d.row(0).iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn hundred_points_stratified() {
        assert!(stratified(&lhs_sample(100, 10, 4)));
    }

    #[test]
    fn deterministic() {
        assert_eq!(lhs_sample(50, 10, 9), lhs_sample(50, 10, 9));
        assert_ne!(lhs_sample(50, 10, 9), lhs_sample(50, 10, 10));
    }

    #[test]
    fn headline_augmentation() {
        let d = lhs_sample(1489, 10, 1)
            .augment(&default_augmentation(10))
            .unwrap();
        assert_eq!(d.n(), 1500);
        assert!(d.row(1489).iter().all(|&v| v == 0.0));
        let mut e10 = vec![0.0; 10];
        e10[9] = 1.0;
        assert_eq!(d.row(1499), e10.as_slice());
    }

    #[test]
    fn augment_empty_and_mismatch() {
        let d = lhs_sample(5, 10, 1);
        assert_eq!(d.augment(&[]).unwrap(), d);
        assert!(matches!(
            d.augment(&[vec![0.0; 3]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip_both_forms() {
        let dir = tempfile::tempdir().unwrap();
        let d = lhs_sample(20, 10, 2)
            .augment(&default_augmentation(10))
            .unwrap();
        let p = dir.path().join("d.csv");
        d.write_csv(&p, false).unwrap();
        let (ids, back) = DesignMatrix::read_csv(&p).unwrap();
        assert_eq!(ids, (0..31).collect::<Vec<_>>());
        assert_eq!(back, d);

        d.write_csv(&p, true).unwrap();
        let (_, scaled) = DesignMatrix::read_csv(&p).unwrap();
        for (a, b) in scaled.rows().zip(d.rows()) {
            for j in 0..10 {
                let s = &POLICY_SPECS[j];
                let tol = if s.integer {
                    0.5 / (s.upper - s.lower) + 1e-12
                } else {
                    1e-12
                };
                assert!((a[j] - b[j]).abs() <= tol);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn stratification_and_spread(n in 1usize..200, p in 1usize..12, seed in 0u64..1000) {
            let d = lhs_sample(n, p, seed);
            prop_assert!(stratified(&d));
            if n >= 20 {
                for j in 0..p {
                    let col: Vec<f64> = d.rows().map(|r| r[j]).collect();
                    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(lo <= 0.05 && hi >= 0.95);
                }
            }
        }
    }
}
