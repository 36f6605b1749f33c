use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lifetime average performance per library size, including the 1-to-1
/// condition (one policy per task).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityTable {
    entries: Vec<CapacityEntry>,
    one_to_one: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEntry {
    pub n_policies: usize,
    pub lifetime_average: f64,
}

impl CapacityTable {
    /// `one_to_one` names the library size whose entry is the reference.
    pub fn new(entries: Vec<CapacityEntry>, one_to_one: usize) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by_key(|e| e.n_policies);
        if entries.windows(2).any(|w| w[0].n_policies == w[1].n_policies) {
            return Err(Error::Analysis("duplicate library size in capacity table".into()));
        }
        if entries.iter().any(|e| e.n_policies == 0 || !e.lifetime_average.is_finite()) {
            return Err(Error::Analysis("capacity entries need positive sizes and finite averages".into()));
        }
        let reference = entries
            .iter()
            .find(|e| e.n_policies == one_to_one)
            .ok_or_else(|| Error::Analysis(format!("capacity table lacks the {one_to_one}-policy entry")))?;
        if reference.lifetime_average <= 0.0 {
            return Err(Error::Analysis("1-to-1 lifetime average must be positive".into()));
        }
        Ok(Self { entries, one_to_one })
    }

    /// Reads `n_policies,lifetime_average` rows; the largest size is the
    /// 1-to-1 reference unless it is given.
    pub fn read_csv<R: Read>(reader: R, one_to_one: Option<usize>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let entries = rdr
            .deserialize()
            .collect::<Result<Vec<CapacityEntry>, _>>()
            .map_err(|e| Error::Analysis(format!("malformed capacity table: {e}")))?;
        let largest = entries.iter().map(|e| e.n_policies).max();
        let reference = one_to_one
            .or(largest)
            .ok_or_else(|| Error::Analysis("empty capacity table".into()))?;
        Self::new(entries, reference)
    }

    pub fn entries(&self) -> &[CapacityEntry] {
        &self.entries
    }

    pub fn one_to_one(&self) -> CapacityEntry {
        *self
            .entries
            .iter()
            .find(|e| e.n_policies == self.one_to_one)
            .expect("checked at construction")
    }

    /// Tolerance from which each size qualifies: `1 - R(n) / R_1to1`.
    fn breakpoints(&self) -> Vec<(usize, f64)> {
        let r1 = self.one_to_one().lifetime_average;
        self.entries
            .iter()
            .map(|e| (e.n_policies, 1.0 - e.lifetime_average / r1))
            .collect()
    }
}

/// `(n_tau / n_star, n_star)` where `n_star` is the smallest library size
/// with `R >= (1 - eps) * R_1to1`.
pub fn empirical_task_capacity(table: &CapacityTable, n_tau: usize, eps: f64) -> (f64, usize) {
    let r1 = table.one_to_one().lifetime_average;
    let n_star = table
        .entries()
        .iter()
        .find(|e| e.lifetime_average >= (1.0 - eps) * r1)
        .map_or(table.one_to_one, |e| e.n_policies);
    (n_tau as f64 / n_star as f64, n_star)
}

/// Exact integral of the empirical capacity over tolerances in `[0, 1]`.
pub fn integrated_task_capacity(table: &CapacityTable, n_tau: usize) -> f64 {
    let bps = table.breakpoints();
    let mut cuts: Vec<f64> = bps.iter().map(|&(_, b)| b.clamp(0.0, 1.0)).collect();
    cuts.extend([0.0, 1.0]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            // Capacity is constant on [w0, w1): evaluate at the left end.
            let n_star = bps
                .iter()
                .filter(|&&(_, b)| b <= w[0])
                .map(|&(n, _)| n)
                .min()
                .unwrap_or(table.one_to_one);
            (w[1] - w[0]) * n_tau as f64 / n_star as f64
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(values: &[(usize, f64)], one_to_one: usize) -> CapacityTable {
        CapacityTable::new(
            values
                .iter()
                .map(|&(n_policies, lifetime_average)| CapacityEntry {
                    n_policies,
                    lifetime_average,
                })
                .collect(),
            one_to_one,
        )
        .unwrap()
    }

    /// Midpoint-rule integral of the capacity curve.
    fn riemann_itc(t: &CapacityTable, n_tau: usize, n: usize) -> f64 {
        (0..n)
            .map(|k| empirical_task_capacity(t, n_tau, (k as f64 + 0.5) / n as f64).0 / n as f64)
            .sum()
    }

    #[test]
    fn only_reference_qualifies() {
        let t = table(&[(1, 1.0), (2, 2.0), (4, 10.0)], 4);
        assert_eq!(empirical_task_capacity(&t, 4, 0.0), (1.0, 4));
        assert_eq!(empirical_task_capacity(&t, 4, 1.0), (4.0, 1));
        assert!(integrated_task_capacity(&t, 4) <= 4.0);
    }

    #[test]
    fn csv_input() {
        let text = "n_policies,lifetime_average\n1,10\n3,12\n";
        let t = CapacityTable::read_csv(text.as_bytes(), None).unwrap();
        assert_eq!(t.one_to_one().n_policies, 3);
        assert!(CapacityTable::read_csv("n,x\n1,2\n".as_bytes(), None).is_err());
        assert!(CapacityTable::read_csv("n_policies,lifetime_average\n1,2\n".as_bytes(), Some(5)).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_is_monotone(
            values in proptest::collection::btree_map(1usize..30, 1.0f64..200.0, 1..8),
            eps in 0.0f64..=1.0,
        ) {
            let rows: Vec<(usize, f64)> = values.into_iter().collect();
            let reference = rows.last().unwrap().0;
            let t = table(&rows, reference);
            let n_tau = reference;
            let (c, n_star) = empirical_task_capacity(&t, n_tau, eps);
            let r1 = rows.last().unwrap().1;
            let brute = rows.iter().filter(|r| r.1 >= (1.0 - eps) * r1).map(|r| r.0).min().unwrap();
            prop_assert_eq!(n_star, brute);
            prop_assert!((c - n_tau as f64 / brute as f64).abs() < 1e-12);
            let (c2, _) = empirical_task_capacity(&t, n_tau, (eps + 0.1).min(1.0));
            prop_assert!(c2 >= c);
            let itc = integrated_task_capacity(&t, n_tau);
            prop_assert!(itc <= n_tau as f64 + 1e-9);
            prop_assert!((itc - riemann_itc(&t, n_tau, 20_000)).abs() < 0.01 * n_tau as f64);
        }
    }
}
