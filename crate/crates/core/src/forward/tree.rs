/// Binary sum tree over nonnegative weights; parents are recomputed from
/// their children on update, so sums never drift.
pub(crate) struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub(crate) fn new(weights: &[f64]) -> Self {
        let leaves = weights.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + weights.len()].copy_from_slice(weights);
        for k in (1..leaves).rev() {
            nodes[k] = nodes[2 * k] + nodes[2 * k + 1];
        }
        SumTree { leaves, nodes }
    }

    pub(crate) fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub(crate) fn set(&mut self, i: usize, w: f64) {
        let mut k = i + self.leaves;
        self.nodes[k] = w;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u`, and the offset of `u` inside it.
    pub(crate) fn find(&self, mut u: f64) -> (usize, f64) {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        let mut i = k - self.leaves;
        // never land on a zero-weight leaf
        while self.nodes[i + self.leaves] <= 0.0 && i > 0 {
            i -= 1;
        }
        (i, u.min(self.nodes[i + self.leaves]).max(0.0))
    }
}
