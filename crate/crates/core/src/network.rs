//! Stochastic block model graphs, block-weighted adjacency, row normalization
//! and the weight-error measurement `‖W^ab - W‖`.
//!
//! Random graphs use `ChaCha8Rng::seed_from_u64(seed)` and draw one uniform
//! double per unordered pair `(i, j)`, `i < j`, in row-major order. The stream
//! is stable for a given seed within this implementation.

use std::io::{Read, Write};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::InfluenceMatrix;
use crate::error::{check_len, Error, Result};
use crate::linalg::{spectral_norm, Matrix};
use crate::rational::{self, Rational};

/// Community label per agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Communities(Vec<usize>);

impl Communities {
    pub fn new(labels: Vec<usize>) -> Self {
        Communities(labels)
    }

    /// Agents `0..n/2` in community 0, the rest in community 1.
    pub fn two_halves(n: usize) -> Self {
        Communities((0..n).map(|i| usize::from(i >= n / 2)).collect())
    }

    pub fn from_groups(n: usize, groups: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                if i >= n {
                    return Err(Error::OutOfRange(format!("agent {i} outside 0..{n}")));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::OutOfRange(format!("agent {i} in two communities")));
                }
                labels[i] = g;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::OutOfRange(format!("agent {i} in no community")));
        }
        Ok(Communities(labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn label(&self, agent: usize) -> usize {
        self.0[agent]
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn same(&self, i: usize, j: usize) -> bool {
        self.0[i] == self.0[j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    pub communities: Communities,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn two_communities(n: usize, p_in: f64, p_out: f64, seed: u64) -> Self {
        SbmParams {
            n,
            communities: Communities::two_halves(n),
            p_in,
            p_out,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.n, self.communities.len())?;
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::OutOfRange(format!("{name} = {p} not in [0, 1]")));
            }
        }
        Ok(())
    }

    fn probability(&self, i: usize, j: usize) -> f64 {
        if self.communities.same(i, j) {
            self.p_in
        } else {
            self.p_out
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfLoopPolicy {
    /// Zero rows are an error at normalization time.
    #[default]
    Strict,
    /// A zero row gets a unit self-loop before normalization.
    AddUnitSelfLoop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    entries: Vec<Vec<Rational>>,
    pub policy: SelfLoopPolicy,
}

impl Adjacency {
    pub fn new(entries: Vec<Vec<Rational>>) -> Result<Self> {
        let n = entries.len();
        for (i, row) in entries.iter().enumerate() {
            check_len(n, row.len())?;
            if row.iter().any(|v| *v < Rational::zero()) {
                return Err(Error::OutOfRange(format!("negative adjacency weight in row {i}")));
            }
        }
        Ok(Adjacency {
            entries,
            policy: SelfLoopPolicy::Strict,
        })
    }

    pub fn with_policy(mut self, policy: SelfLoopPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.entries
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| rational::to_f64(&self.entries[i][j]))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.entries[i][j] == self.entries[j][i]))
    }
}

/// Symmetric 0/1 adjacency with zero diagonal.
pub fn sbm_generate(params: &SbmParams) -> Result<Adjacency> {
    params.validate()?;
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut entries = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let draw: f64 = rng.gen();
            if draw < params.probability(i, j) {
                entries[i][j] = Rational::one();
                entries[j][i] = Rational::one();
            }
        }
    }
    Adjacency::new(entries)
}

/// `p_in` within communities, `p_out` across, zero diagonal.
pub fn expected_adjacency(params: &SbmParams) -> Result<Adjacency> {
    params.validate()?;
    let p_in = rational::from_f64_decimal(params.p_in)?;
    let p_out = rational::from_f64_decimal(params.p_out)?;
    block_weighted_adjacency(params.n, &p_in, &p_out, &params.communities)
}

/// `a_ij = w_in` for distinct agents in the same community, `w_out` otherwise.
pub fn block_weighted_adjacency(
    n: usize,
    w_in: &Rational,
    w_out: &Rational,
    communities: &Communities,
) -> Result<Adjacency> {
    check_len(n, communities.len())?;
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Rational::zero()
                    } else if communities.same(i, j) {
                        w_in.clone()
                    } else {
                        w_out.clone()
                    }
                })
                .collect()
        })
        .collect();
    Adjacency::new(entries)
}

/// `w_ij = a_ij / Σ_k a_ik`, exactly.
pub fn row_normalize(adj: &Adjacency) -> Result<InfluenceMatrix> {
    let n = adj.dim();
    let mut rows = Vec::with_capacity(n);
    for (i, row) in adj.entries.iter().enumerate() {
        let total: Rational = row.iter().sum();
        if total.is_zero() {
            match adj.policy {
                SelfLoopPolicy::Strict => return Err(Error::ZeroRow { agent: i }),
                SelfLoopPolicy::AddUnitSelfLoop => {
                    let mut unit = vec![Rational::zero(); n];
                    unit[i] = Rational::one();
                    rows.push(unit);
                    continue;
                }
            }
        }
        rows.push(row.iter().map(|a| a / &total).collect());
    }
    InfluenceMatrix::from_rationals(rows)
}

/// `‖W^ab - W‖` (spectral norm).
pub fn weight_error(w: &InfluenceMatrix, w_ab: &InfluenceMatrix) -> Result<f64> {
    check_len(w.dim(), w_ab.dim())?;
    spectral_norm(&w_ab.as_matrix().sub(w.as_matrix())?)
}

/// Dense row-major JSON with `"p/q"` strings.
pub fn write_json_rows<W: Write>(rows: &[Vec<Rational>], out: W) -> Result<()> {
    let text: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(rational::format_rational).collect())
        .collect();
    serde_json::to_writer(out, &text)?;
    Ok(())
}

pub fn read_json_rows<R: Read>(input: R) -> Result<Vec<Vec<Rational>>> {
    let text: Vec<Vec<String>> = serde_json::from_reader(input)?;
    text.iter()
        .map(|r| r.iter().map(|t| rational::parse_rational(t)).collect())
        .collect()
}

/// Decimal CSV, one matrix row per line, no header.
pub fn write_csv_rows<W: Write>(rows: &[Vec<Rational>], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in rows {
        writer.write_record(row.iter().map(|v| format!("{}", rational::to_f64(v))))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads decimal (or `p/q`) cells exactly.
pub fn read_csv_rows<R: Read>(input: R) -> Result<Vec<Vec<Rational>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|cell| {
                rational::parse_rational(cell)
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn sbm_extreme_probabilities() {
        let empty = sbm_generate(&SbmParams::two_communities(6, 0.0, 0.0, 1)).unwrap();
        assert!(empty.rows().iter().flatten().all(Zero::is_zero));
        let full = sbm_generate(&SbmParams::two_communities(3, 1.0, 1.0, 1)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { int(0) } else { int(1) };
                assert_eq!(full.entry(i, j), &expect);
            }
        }
    }

    #[test]
    fn sbm_is_seed_deterministic_and_symmetric() {
        let p = SbmParams::two_communities(30, 0.3, 0.1, 42);
        let a = sbm_generate(&p).unwrap();
        let b = sbm_generate(&p).unwrap();
        assert_eq!(a, b);
        assert!(a.is_symmetric());
        let c = sbm_generate(&SbmParams { seed: 43, ..p }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sbm_rejects_bad_probability() {
        assert!(sbm_generate(&SbmParams::two_communities(4, 1.2, 0.1, 0)).is_err());
    }

    #[test]
    fn row_normalize_examples() {
        let id = Adjacency::new(vec![vec![int(1), int(0)], vec![int(0), int(1)]]).unwrap();
        assert_eq!(row_normalize(&id).unwrap(), InfluenceMatrix::identity(2));

        let weighted = Adjacency::new(vec![vec![int(5), int(3)], vec![int(3), int(5)]]).unwrap();
        let w = row_normalize(&weighted).unwrap();
        assert_eq!(w.exact(0, 0), &ratio(5, 8));
        assert_eq!(w.exact(0, 1), &ratio(3, 8));

        let zero_row = Adjacency::new(vec![vec![int(0), int(0)], vec![int(1), int(1)]]).unwrap();
        assert!(matches!(
            row_normalize(&zero_row),
            Err(Error::ZeroRow { agent: 0 })
        ));
        let looped = row_normalize(&zero_row.with_policy(SelfLoopPolicy::AddUnitSelfLoop)).unwrap();
        assert_eq!(looped.exact(0, 0), &int(1));
        assert_eq!(looped.exact(1, 0), &ratio(1, 2));
    }

    #[test]
    fn rows_sum_to_one_exactly() {
        let adj = sbm_generate(&SbmParams::two_communities(20, 0.6, 0.4, 9))
            .unwrap()
            .with_policy(SelfLoopPolicy::AddUnitSelfLoop);
        let w = row_normalize(&adj).unwrap();
        for row in w.exact_rows() {
            assert!(row.iter().sum::<Rational>().is_one());
        }
    }

    #[test]
    fn expected_adjacency_examples() {
        let p = SbmParams {
            n: 2,
            communities: Communities::new(vec![0, 1]),
            p_in: 0.3,
            p_out: 0.1,
            seed: 0,
        };
        let e = expected_adjacency(&p).unwrap();
        assert_eq!(e.rows(), &[vec![int(0), ratio(1, 10)], vec![ratio(1, 10), int(0)]]);

        let constant = expected_adjacency(&SbmParams::two_communities(4, 0.2, 0.2, 0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { int(0) } else { ratio(1, 5) };
                assert_eq!(constant.entry(i, j), &expect);
            }
        }
    }

    #[test]
    fn block_weighted_four_agents() {
        let a = block_weighted_adjacency(4, &int(5), &int(3), &Communities::two_halves(4)).unwrap();
        let expect = [[0, 5, 3, 3], [5, 0, 3, 3], [3, 3, 0, 5], [3, 3, 5, 0]];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.entry(i, j), &int(expect[i][j]));
            }
        }
        let c = block_weighted_adjacency(4, &int(2), &int(2), &Communities::two_halves(4)).unwrap();
        assert!(c.rows().iter().enumerate().all(|(i, r)| r
            .iter()
            .enumerate()
            .all(|(j, v)| *v == if i == j { int(0) } else { int(2) })));
    }

    #[test]
    fn weight_error_examples() {
        let w = InfluenceMatrix::uniform(3);
        assert_eq!(weight_error(&w, &w).unwrap(), 0.0);
        // A pure diagonal perturbation breaks row sums, so shift mass within
        // one row; the difference has a single nonzero row of norm sqrt(0.02).
        let shifted = InfluenceMatrix::from_rationals(vec![
            vec![ratio(1, 3) + ratio(1, 10), ratio(1, 3) - ratio(1, 10), ratio(1, 3)],
            vec![ratio(1, 3), ratio(1, 3), ratio(1, 3)],
            vec![ratio(1, 3), ratio(1, 3), ratio(1, 3)],
        ])
        .unwrap();
        let e = weight_error(&w, &shifted).unwrap();
        assert!((e - (0.02f64).sqrt()).abs() < 1e-10);
        assert_eq!(e, weight_error(&shifted, &w).unwrap());
    }

    #[test]
    fn communities_from_groups() {
        let c = Communities::from_groups(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(c, Communities::two_halves(4));
        assert!(Communities::from_groups(3, &[vec![0, 1]]).is_err());
        assert!(Communities::from_groups(3, &[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn json_and_csv_io() {
        let rows = vec![vec![ratio(5, 8), ratio(3, 8)], vec![int(0), int(1)]];
        let mut buf = Vec::new();
        write_json_rows(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), r#"[["5/8","3/8"],["0","1"]]"#);
        assert_eq!(read_json_rows(buf.as_slice()).unwrap(), rows);

        let mut csv_buf = Vec::new();
        write_csv_rows(&rows, &mut csv_buf).unwrap();
        assert_eq!(String::from_utf8(csv_buf.clone()).unwrap(), "0.625,0.375\n0,1\n");
        assert_eq!(read_csv_rows(csv_buf.as_slice()).unwrap(), rows);
        assert!(read_csv_rows("0.5,x\n".as_bytes()).is_err());
    }
}
