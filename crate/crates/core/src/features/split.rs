use chrono::NaiveDate;

use super::{FeatureError, TimeSeriesFrame};

/// Row-indexed data that can be split by date.
pub trait TimeIndexed: Sized {
    fn row_dates(&self) -> Vec<NaiveDate>;

    /// Rows at `indices`, in the given order.
    fn take_rows(&self, indices: &[usize]) -> Self;
}

impl TimeIndexed for TimeSeriesFrame {
    fn row_dates(&self) -> Vec<NaiveDate> {
        self.dates()
    }

    fn take_rows(&self, indices: &[usize]) -> Self {
        let rows = self.rows();
        let picked = indices.iter().map(|&i| rows[i].clone()).collect();
        TimeSeriesFrame::new(picked).expect("subset of a valid frame")
    }
}

/// Rows dated before `split_date` go to train; rows on or after it go to test.
/// Both sides keep the input order.
pub fn time_split<T: TimeIndexed>(data: &T, split_date: NaiveDate) -> Result<(T, T), FeatureError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, date) in data.row_dates().into_iter().enumerate() {
        if date < split_date {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(FeatureError::EmptySplit {
            split_date,
            train: train.len(),
            test: test.len(),
        });
    }
    Ok((data.take_rows(&train), data.take_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Observation;
    use chrono::Days;
    use proptest::prelude::*;

    fn daily(n: u64) -> TimeSeriesFrame {
        let start: NaiveDate = "2015-01-01".parse().unwrap();
        TimeSeriesFrame::new(
            (0..n)
                .map(|i| Observation {
                    date: start + Days::new(i),
                    store: "1".into(),
                    sales: i as f64,
                    promo: false,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn forty_eight_fifty() {
        let frame = daily(98);
        let split = frame.rows()[48].date;
        let (train, test) = time_split(&frame, split).unwrap();
        assert_eq!((train.len(), test.len()), (48, 50));
        assert_eq!(test.rows()[0].date, split);
    }

    #[test]
    fn split_before_all_data_fails() {
        let frame = daily(10);
        let err = time_split(&frame, "2014-01-01".parse().unwrap()).unwrap_err();
        assert!(matches!(err, FeatureError::EmptySplit { train: 0, test: 10, .. }));
    }

    proptest! {
        #[test]
        fn split_partitions_in_order(n in 2u64..80, k in 1u64..79) {
            prop_assume!(k < n);
            let frame = daily(n);
            let split = frame.rows()[k as usize].date;
            let (train, test) = time_split(&frame, split).unwrap();
            let mut joined = train.rows().to_vec();
            joined.extend_from_slice(test.rows());
            prop_assert_eq!(joined.as_slice(), frame.rows());
        }
    }
}
