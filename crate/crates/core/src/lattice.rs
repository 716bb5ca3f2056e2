//! Integer lattice certificates: rank and index of the subgroup of Z^d
//! generated by a finite set of vectors, via integer row reduction
//! (Hermite normal form). The index is the product of the Smith invariant
//! factors, so index 1 certifies that the vectors generate all of Z^d.

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Returns (rank, index). `index` is `[Z^d : L]` when rank == d, else 0.
pub fn rank_and_index(vectors: &[Vec<i64>], dim: usize) -> (usize, u128) {
    let mut rows: Vec<Vec<i128>> = vectors
        .iter()
        .map(|v| {
            assert_eq!(v.len(), dim);
            v.iter().map(|&x| x as i128).collect()
        })
        .filter(|v: &Vec<i128>| v.iter().any(|&x| x != 0))
        .collect();
    let mut pivot_row = 0;
    let mut diag = Vec::new();
    for col in 0..dim {
        if pivot_row >= rows.len() {
            break;
        }
        // fold every row below pivot into the pivot via gcd steps
        for r in pivot_row + 1..rows.len() {
            let a = rows[pivot_row][col];
            let b = rows[r][col];
            if b == 0 {
                continue;
            }
            let (g, x, y) = ext_gcd(a, b);
            let (ag, bg) = (a / g, b / g);
            let top: Vec<i128> = (0..dim)
                .map(|c| x * rows[pivot_row][c] + y * rows[r][c])
                .collect();
            let bottom: Vec<i128> = (0..dim)
                .map(|c| -bg * rows[pivot_row][c] + ag * rows[r][c])
                .collect();
            rows[pivot_row] = top;
            rows[r] = bottom;
        }
        let p = rows[pivot_row][col];
        // after folding, a zero pivot means the whole column is zero
        if p != 0 {
            diag.push(p.unsigned_abs());
            pivot_row += 1;
        }
        rows.retain(|v| v.iter().any(|&x| x != 0));
    }
    let rank = diag.len();
    if rank == dim {
        (rank, diag.iter().product())
    } else {
        (rank, 0)
    }
}

/// True when the vectors generate Z^d as a group.
pub fn generates_lattice(vectors: &[Vec<i64>], dim: usize) -> bool {
    rank_and_index(vectors, dim) == (dim, 1)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_examples() {
        assert_eq!(rank_and_index(&[vec![2], vec![-2]], 1), (1, 2));
        assert_eq!(rank_and_index(&[vec![2], vec![3]], 1), (1, 1));
        assert_eq!(rank_and_index(&[vec![1, 0], vec![0, 1]], 2), (2, 1));
        assert_eq!(rank_and_index(&[vec![1, 1], vec![1, -1]], 2), (2, 2));
        assert_eq!(rank_and_index(&[vec![1, 1], vec![2, 2]], 2).0, 1);
        assert_eq!(rank_and_index(&[vec![0, 3], vec![2, 0], vec![0, 2]], 2), (2, 2));
        assert!(generates_lattice(
            &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
            3
        ));
        assert_eq!(rank_and_index(&[], 2), (0, 0));
    }

    #[test]
    fn pivot_swap_when_leading_column_is_empty_in_first_row() {
        assert_eq!(rank_and_index(&[vec![0, 1], vec![1, 0]], 2), (2, 1));
        assert_eq!(rank_and_index(&[vec![0, 5], vec![0, 3], vec![4, 0]], 2), (2, 4));
    }
}
