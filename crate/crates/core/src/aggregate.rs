//! Per-(patient, item) running aggregates shared by the batch table builder
//! and the live monitor.
//!
//! The numeric sum is kept as a list of non-overlapping partials (Shewchuk's
//! exact summation), so the mean is the correctly rounded value of the true
//! sum divided by the count. That makes the result independent of the order
//! in which events arrive, which is what lets an incremental replay agree
//! bit-for-bit with the batch table.

use crate::dataset::AggregationMode;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        debug_assert!(value.is_finite());
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Correctly rounded value of the accumulated sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way case: the remaining partials decide the rounding direction
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Running (sum, numeric count, total count) for one patient and one item.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemAggregate {
    sum: ExactSum,
    numeric: u64,
    total: u64,
}

impl ItemAggregate {
    /// Records one event. Events without a numeric result only bump the
    /// total count.
    pub fn push(&mut self, value_num: Option<f64>) {
        self.total += 1;
        if let Some(v) = value_num {
            self.sum.add(v);
            self.numeric += 1;
        }
    }

    pub fn numeric_count(&self) -> u64 {
        self.numeric
    }

    pub fn total_count(&self) -> u64 {
        self.total
    }

    pub fn mean(&self) -> f64 {
        if self.numeric == 0 {
            0.0
        } else {
            self.sum.value() / self.numeric as f64
        }
    }

    pub fn feature(&self, mode: AggregationMode) -> f64 {
        match mode {
            AggregationMode::Avg => self.mean(),
            AggregationMode::Count => self.total as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sums_cancel_exactly() {
        let mut s = ExactSum::new();
        s.extend([1e16, 1.0, -1e16]);
        assert_eq!(s.value(), 1.0);
        let mut s = ExactSum::new();
        s.extend([0.1; 10]);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn mean_of_two() {
        let mut a = ItemAggregate::default();
        a.push(Some(0.1));
        a.push(Some(0.3));
        assert_eq!(a.mean(), 0.2);
        assert_eq!(a.total_count(), 2);
        a.push(None);
        assert_eq!(a.mean(), 0.2);
        assert_eq!(a.feature(AggregationMode::Count), 3.0);
    }

    #[test]
    fn text_only_item_has_zero_mean() {
        let mut a = ItemAggregate::default();
        a.push(None);
        assert_eq!(a.mean(), 0.0);
        assert_eq!(a.total_count(), 1);
    }

    proptest! {
        #[test]
        fn order_independent(mut xs in prop::collection::vec(-1e6f64..1e6, 0..60), seed in any::<u64>()) {
            let mut fwd = ExactSum::new();
            fwd.extend(xs.iter().copied());
            // deterministic shuffle
            let n = xs.len();
            let mut state = seed | 1;
            for i in (1..n).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                xs.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let mut shuf = ExactSum::new();
            shuf.extend(xs.iter().copied());
            prop_assert_eq!(fwd.value().to_bits(), shuf.value().to_bits());
        }
    }
}
