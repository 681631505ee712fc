/// A table `f : S × A → ℝ`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self { num_states, num_actions, values: vec![0.0; num_states * num_actions] }
    }

    /// # Panics
    /// If `values.len() != num_states * num_actions`.
    pub fn from_vec(num_states: usize, num_actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), num_states * num_actions, "QTable shape mismatch");
        Self { num_states, num_actions, values }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `‖self − other‖_∞`.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Lowest-index argmax of row `s`.
    pub fn argmax(&self, s: usize) -> usize {
        argmax(self.row(s))
    }
}

/// Lowest index attaining the maximum.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        let q = QTable::from_vec(1, 3, vec![2.0, 2.0, 1.0]);
        assert_eq!(q.argmax(0), 0);
    }

    #[test]
    fn sup_norm_distance() {
        let a = QTable::from_vec(1, 2, vec![1.0, 2.0]);
        let b = QTable::from_vec(1, 2, vec![1.5, -1.0]);
        assert_eq!(a.max_abs_diff(&b), 3.0);
    }
}
