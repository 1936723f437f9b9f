//! Majority-class baseline.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroR {
    pub class_counts: [u64; 2],
}

impl ZeroR {
    pub fn fit(table: &FeatureTable) -> Self {
        let c = table.class_counts();
        Self { class_counts: [c[0] as u64, c[1] as u64] }
    }

    /// Training class frequencies, independent of the row.
    pub fn predict_proba(&self) -> [f64; 2] {
        let n = (self.class_counts[0] + self.class_counts[1]) as f64;
        [self.class_counts[0] as f64 / n, self.class_counts[1] as f64 / n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AggregationMode, Class, Row};

    #[test]
    fn seventy_thirty_prior() {
        let rows = (0..10)
            .map(|i| Row { key: i, features: vec![i as f64], class: if i < 7 { Class::Alive } else { Class::Dead } })
            .collect();
        let t = FeatureTable::new(vec!["a".into()], rows, AggregationMode::Count).unwrap();
        let m = ZeroR::fit(&t);
        assert_eq!(m.predict_proba(), [0.7, 0.3]);
        assert_eq!(Class::argmax(m.predict_proba()), Class::Alive);
    }
}
