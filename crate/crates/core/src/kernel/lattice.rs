//! Integer lattice helpers: the subgroup of Z^d generated by a set of offsets.

/// Row-reduces `vectors` into a triangular basis of the lattice they generate.
///
/// Only unimodular row operations are used, so the returned rows span exactly
/// the same subgroup of Z^d as the input.
pub fn triangular_basis(vectors: &[Vec<i64>], dim: usize) -> Vec<Vec<i64>> {
    let mut rows: Vec<Vec<i64>> = vectors
        .iter()
        .filter(|v| v.iter().any(|&x| x != 0))
        .cloned()
        .collect();
    let mut pivot_row = 0;
    for col in 0..dim {
        loop {
            // smallest nonzero |entry| in this column among the unreduced rows
            let pick = (pivot_row..rows.len())
                .filter(|&r| rows[r][col] != 0)
                .min_by_key(|&r| rows[r][col].unsigned_abs());
            let Some(p) = pick else { break };
            rows.swap(pivot_row, p);
            let pivot = rows[pivot_row].clone();
            let mut done = true;
            for r in (pivot_row + 1)..rows.len() {
                let q = rows[r][col].div_euclid(pivot[col]);
                if q != 0 {
                    for k in 0..dim {
                        rows[r][k] -= q * pivot[k];
                    }
                }
                if rows[r][col] != 0 {
                    done = false;
                }
            }
            if done {
                pivot_row += 1;
                break;
            }
        }
        rows.retain(|v| v.iter().any(|&x| x != 0));
    }
    rows.truncate(pivot_row);
    rows
}

/// Index of the lattice generated by `vectors` in Z^d, or `None` when the
/// generated lattice has rank below `dim`.
pub fn lattice_index(vectors: &[Vec<i64>], dim: usize) -> Option<u64> {
    let basis = triangular_basis(vectors, dim);
    if basis.len() < dim {
        return None;
    }
    let mut index: u64 = 1;
    for (k, row) in basis.iter().enumerate().take(dim) {
        // the basis is echelon; the pivot of row k sits at the first nonzero column
        let lead = row.iter().position(|&x| x != 0)?;
        if lead != k {
            return None;
        }
        index = index.saturating_mul(row[k].unsigned_abs());
    }
    Some(index)
}

/// True when the offsets generate all of Z^d as a group.
pub fn generates_full_lattice(vectors: &[Vec<i64>], dim: usize) -> bool {
    lattice_index(vectors, dim) == Some(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_steps_generate() {
        assert!(generates_full_lattice(&[vec![1], vec![-1]], 1));
        assert!(generates_full_lattice(&[vec![1, 0], vec![0, 1]], 2));
    }

    #[test]
    fn even_steps_do_not() {
        assert_eq!(lattice_index(&[vec![2], vec![-2]], 1), Some(2));
        assert!(!generates_full_lattice(&[vec![2], vec![-2]], 1));
    }

    #[test]
    fn coprime_steps_generate() {
        assert!(generates_full_lattice(&[vec![2], vec![3]], 1));
        assert!(generates_full_lattice(&[vec![1, 1], vec![1, -1], vec![1, 0]], 2));
    }

    #[test]
    fn checkerboard_sublattice() {
        // (1,1) and (1,-1) generate the even-sum sublattice, index 2
        assert_eq!(lattice_index(&[vec![1, 1], vec![1, -1]], 2), Some(2));
    }

    #[test]
    fn rank_deficient() {
        assert_eq!(lattice_index(&[vec![1, 0], vec![-1, 0]], 2), None);
        assert_eq!(lattice_index(&[], 1), None);
    }
}
