//! The three mixture experiments: published concentration tables and their
//! train/test sizes.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::{Gas, GasMixture};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableId {
    BinaryEthanol,
    BinaryMethanol,
    Ternary,
}

impl TableId {
    pub const ALL: [TableId; 3] = [TableId::BinaryEthanol, TableId::BinaryMethanol, TableId::Ternary];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::BinaryEthanol => "binary_ethanol",
            TableId::BinaryMethanol => "binary_methanol",
            TableId::Ternary => "ternary",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "binary_ethanol" => Ok(TableId::BinaryEthanol),
            "binary_methanol" => Ok(TableId::BinaryMethanol),
            "ternary" => Ok(TableId::Ternary),
            other => Err(Error::InvalidParameter(format!("unknown table `{other}`"))),
        }
    }
}

const BINARY_ROWS: [(f64, f64); 8] = [
    (100.0, 0.0),
    (99.0, 1.0),
    (90.0, 10.0),
    (50.0, 50.0),
    (50.0, 0.0),
    (49.5, 0.5),
    (45.0, 5.0),
    (25.0, 25.0),
];

const TERNARY_ROWS: [(f64, f64, f64); 8] = [
    (200.0, 0.0, 0.0),
    (198.0, 1.0, 1.0),
    (180.0, 10.0, 10.0),
    (100.0, 50.0, 50.0),
    (100.0, 0.0, 0.0),
    (98.0, 0.5, 0.5),
    (90.0, 5.0, 5.0),
    (50.0, 25.0, 25.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub name: String,
    pub id: Option<TableId>,
    /// Mixture rows as published (acetone first).
    pub rows: Vec<GasMixture>,
    /// Interfering gases of the experiment, in label order.
    pub interferents: Vec<Gas>,
    pub n_train: usize,
    pub n_test: usize,
}

impl ExperimentTable {
    pub fn builtin(id: TableId) -> Self {
        let (rows, interferents, n_train, n_test) = match id {
            TableId::BinaryEthanol => (
                BINARY_ROWS
                    .iter()
                    .map(|&(a, e)| GasMixture::from_array([a, e, 0.0]))
                    .collect(),
                vec![Gas::Ethanol],
                600,
                80,
            ),
            TableId::BinaryMethanol => (
                BINARY_ROWS
                    .iter()
                    .map(|&(a, m)| GasMixture::from_array([a, 0.0, m]))
                    .collect(),
                vec![Gas::Methanol],
                700,
                100,
            ),
            TableId::Ternary => (
                TERNARY_ROWS
                    .iter()
                    .map(|&(a, e, m)| GasMixture::from_array([a, e, m]))
                    .collect(),
                vec![Gas::Ethanol, Gas::Methanol],
                550,
                50,
            ),
        };
        Self {
            name: id.as_str().to_string(),
            id: Some(id),
            rows,
            interferents,
            n_train,
            n_test,
        }
    }

    /// A user-defined table, validated like the built-in ones.
    pub fn custom(
        name: &str,
        rows: Vec<GasMixture>,
        interferents: Vec<Gas>,
        n_train: usize,
        n_test: usize,
    ) -> Result<Self> {
        let t = Self {
            name: name.to_string(),
            id: None,
            rows,
            interferents,
            n_train,
            n_test,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Empty(format!("table {} has no rows", self.name)));
        }
        for r in &self.rows {
            r.validate()?;
            if r.is_clean_air() {
                return Err(Error::InvalidParameter(format!(
                    "table {} contains a clean-air row",
                    self.name
                )));
            }
        }
        if self.interferents.contains(&Gas::Acetone) {
            return Err(Error::InvalidParameter("acetone cannot be an interferent".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidParameter("train and test counts must be > 0".into()));
        }
        Ok(())
    }

    pub fn total_sessions(&self) -> usize {
        self.n_train + self.n_test
    }

    /// Number of mixture variants generated per row: the published mixture
    /// plus one role-swapped counterpart per interferent.
    pub fn variants_per_row(&self) -> usize {
        1 + self.interferents.len()
    }

    /// Variant `v` of a row: `0` is the row as published, `v >= 1` swaps the
    /// acetone and interferent `v - 1` concentrations so that gas dominates.
    pub fn variant(&self, row: usize, v: usize) -> GasMixture {
        let m = self.rows[row];
        match v {
            0 => m,
            _ => m.swapped(Gas::Acetone, self.interferents[(v - 1) % self.interferents.len()]),
        }
    }

    /// Class label of a mixture: its dominant gas, ties to the lower code.
    pub fn label_of(mix: &GasMixture) -> u8 {
        mix.dominant_gas().map_or(0, Gas::label)
    }

    /// Sessions per row so that the total equals `n_train + n_test`; the
    /// remainder goes one each to the leading rows.
    pub fn per_row_counts(&self) -> Vec<usize> {
        let n = self.rows.len();
        let total = self.total_sessions();
        (0..n)
            .map(|i| total / n + usize::from(i < total % n))
            .collect()
    }

    /// Labels present in this experiment, sorted.
    pub fn classes(&self) -> Vec<u8> {
        let mut labels: Vec<u8> = (0..self.rows.len())
            .flat_map(|r| (0..self.variants_per_row()).map(move |v| (r, v)))
            .map(|(r, v)| Self::label_of(&self.variant(r, v)))
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Human-readable remarks about rows that break the table's pattern.
    pub fn notes(&self) -> Vec<String> {
        if self.rows.is_empty() {
            return Vec::new();
        }
        let total = |m: &GasMixture| m.as_array().iter().sum::<f64>();
        let mut notes = Vec::new();
        // rows come in two blocks with a common total each
        let half = self.rows.len() / 2;
        for (block, rows) in [&self.rows[..half], &self.rows[half..]].iter().enumerate() {
            let Some(first) = rows.first() else { continue };
            let expected = total(first);
            for (i, r) in rows.iter().enumerate() {
                if (total(r) - expected).abs() > 1e-9 {
                    let [a, e, m] = r.as_array();
                    notes.push(format!(
                        "row {} ({a}/{e}/{m} ppm) totals {} ppm while its block totals {} ppm; kept as published",
                        block * half + i + 1,
                        total(r),
                        expected
                    ));
                }
            }
        }
        notes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let sizes: Vec<(usize, usize)> = TableId::ALL
            .iter()
            .map(|&id| {
                let t = ExperimentTable::builtin(id);
                (t.n_train, t.n_test)
            })
            .collect();
        assert_eq!(sizes, vec![(600, 80), (700, 100), (550, 50)]);
    }

    #[test]
    fn published_rows_are_acetone_dominant() {
        for id in TableId::ALL {
            let t = ExperimentTable::builtin(id);
            for r in &t.rows {
                assert_eq!(ExperimentTable::label_of(r), 1);
            }
        }
    }

    #[test]
    fn variants_cover_every_class() {
        assert_eq!(ExperimentTable::builtin(TableId::BinaryEthanol).classes(), vec![1, 2]);
        assert_eq!(ExperimentTable::builtin(TableId::BinaryMethanol).classes(), vec![1, 3]);
        assert_eq!(ExperimentTable::builtin(TableId::Ternary).classes(), vec![1, 2, 3]);
    }

    #[test]
    fn equal_split_row_swaps_to_itself() {
        let t = ExperimentTable::builtin(TableId::BinaryEthanol);
        assert_eq!(t.variant(3, 1), t.variant(3, 0));
        assert_eq!(ExperimentTable::label_of(&t.variant(3, 1)), 1);
        assert_eq!(t.variant(1, 1).as_array(), [1.0, 99.0, 0.0]);
    }

    #[test]
    fn per_row_counts_sum_to_total() {
        for id in TableId::ALL {
            let t = ExperimentTable::builtin(id);
            let c = t.per_row_counts();
            assert_eq!(c.iter().sum::<usize>(), t.total_sessions());
            assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn ternary_flags_odd_row() {
        let notes = ExperimentTable::builtin(TableId::Ternary).notes();
        assert_eq!(notes.len(), 1);
        assert!(notes[0].starts_with("row 6 (98/0.5/0.5 ppm)"));
        assert!(ExperimentTable::builtin(TableId::BinaryEthanol).notes().is_empty());
    }

    #[test]
    fn parses_ids() {
        assert_eq!("binary-ethanol".parse::<TableId>().unwrap(), TableId::BinaryEthanol);
        assert_eq!("ternary".parse::<TableId>().unwrap(), TableId::Ternary);
        assert!("quaternary".parse::<TableId>().is_err());
    }
}
