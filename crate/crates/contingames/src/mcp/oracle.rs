//! Brute-force reference solver for small box-constrained LCPs.
//!
//! Enumerates the 3^d assignments of {at-lower, interior, at-upper} per
//! component, solves the induced linear system for the interior block and
//! keeps assignments whose point satisfies every complementarity clause
//! exactly (to 1e-10). Exponential by construction; intended purely as a
//! test oracle for `d <= 12`.

const ORACLE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    AtLower,
    Interior,
    AtUpper,
}

/// All solutions of `G(v) = M v + q` complementary to `[lower, upper]`.
///
/// An empty result means no assignment satisfies the clauses; duplicate
/// points produced by degenerate assignments are collapsed.
pub fn solve_lcp_bruteforce(
    m: &[Vec<f64>],
    q: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Vec<Vec<f64>> {
    let d = q.len();
    assert!(d <= 12, "enumeration is 3^d; refuse d > 12");
    assert!(m.len() == d && m.iter().all(|r| r.len() == d));
    assert!(lower.len() == d && upper.len() == d);

    let mut solutions: Vec<Vec<f64>> = Vec::new();
    let mut statuses = vec![Status::Interior; d];
    enumerate(m, q, lower, upper, 0, &mut statuses, &mut solutions);
    solutions
}

fn enumerate(
    m: &[Vec<f64>],
    q: &[f64],
    lower: &[f64],
    upper: &[f64],
    depth: usize,
    statuses: &mut [Status],
    out: &mut Vec<Vec<f64>>,
) {
    if depth == q.len() {
        if let Some(v) = try_assignment(m, q, lower, upper, statuses) {
            if !out.iter().any(|s| close(s, &v)) {
                out.push(v);
            }
        }
        return;
    }
    let candidates = [
        (Status::AtLower, lower[depth].is_finite()),
        (Status::Interior, true),
        (Status::AtUpper, upper[depth].is_finite()),
    ];
    for (status, feasible) in candidates {
        if feasible {
            statuses[depth] = status;
            enumerate(m, q, lower, upper, depth + 1, statuses, out);
        }
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-8)
}

fn try_assignment(
    m: &[Vec<f64>],
    q: &[f64],
    lower: &[f64],
    upper: &[f64],
    statuses: &[Status],
) -> Option<Vec<f64>> {
    let d = q.len();
    let interior: Vec<usize> = (0..d)
        .filter(|&j| statuses[j] == Status::Interior)
        .collect();

    let mut v: Vec<f64> = (0..d)
        .map(|j| match statuses[j] {
            Status::AtLower => lower[j],
            Status::AtUpper => upper[j],
            Status::Interior => 0.0,
        })
        .collect();

    if !interior.is_empty() {
        // Solve M_II v_I = -q_I - M_IB v_B for the interior block.
        let k = interior.len();
        let mut a = vec![vec![0.0; k + 1]; k];
        for (row, &i) in interior.iter().enumerate() {
            let mut rhs = -q[i];
            for j in 0..d {
                if statuses[j] != Status::Interior {
                    rhs -= m[i][j] * v[j];
                }
            }
            for (col, &j) in interior.iter().enumerate() {
                a[row][col] = m[i][j];
            }
            a[row][k] = rhs;
        }
        let x = gauss_solve(&mut a)?;
        for (col, &j) in interior.iter().enumerate() {
            v[j] = x[col];
        }
    }

    // Verify every clause exactly.
    for j in 0..d {
        let g: f64 = q[j] + m[j].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let ok = match statuses[j] {
            Status::AtLower => g >= -ORACLE_TOL,
            Status::AtUpper => g <= ORACLE_TOL,
            Status::Interior => {
                g.abs() <= ORACLE_TOL
                    && v[j] >= lower[j] - ORACLE_TOL
                    && v[j] <= upper[j] + ORACLE_TOL
            }
        };
        if !ok {
            return None;
        }
    }
    Some(v)
}

/// Gaussian elimination with partial pivoting on an augmented system.
pub(crate) fn gauss_solve(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| {
            a[r1][col]
                .abs()
                .partial_cmp(&a[r2][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..=n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = a[row][n];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
