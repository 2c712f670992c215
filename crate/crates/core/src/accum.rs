//! Compensated (Neumaier) summation in caller-defined order.

#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    values.into_iter().for_each(|v| acc.add(v));
    acc.value()
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values.iter().copied()) / values.len() as f64
}

/// Sample-wise mean of equal-length rows, summed in row order.
pub fn columnwise_mean<'a>(rows: impl IntoIterator<Item = &'a [f64]>, len: usize) -> Vec<f64> {
    let mut acc = vec![CompensatedSum::new(); len];
    let mut count = 0usize;
    for row in rows {
        debug_assert_eq!(row.len(), len);
        for (a, &v) in acc.iter_mut().zip(row) {
            a.add(v);
        }
        count += 1;
    }
    acc.iter().map(|a| a.value() / count as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(xs), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn column_mean() {
        let rows = [vec![0.0, 2.0], vec![2.0, 0.0]];
        assert_eq!(
            columnwise_mean(rows.iter().map(Vec::as_slice), 2),
            vec![1.0, 1.0]
        );
    }
}
