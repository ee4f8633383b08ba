//! Time-varying linear systems and exact initial-state recovery.
//!
//! Stacking the maps that carry the initial state to each scalar
//! observation gives an observation matrix; the initial state is
//! recoverable exactly when that matrix reaches full column rank, which for
//! non-singular dynamics happens once the observation window covers as many
//! model steps as the state has dimensions.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;

/// A time-varying linear system: state maps `F_k` and scalar observation
/// rows `H_k`.
#[derive(Debug, Clone)]
pub struct LinearTVSystem {
    transitions: Vec<DMatrix<f64>>,
    observers: Vec<RowDVector<f64>>,
}

impl LinearTVSystem {
    /// Validates dimensions and the all-non-zero observer assumption.
    pub fn new(transitions: Vec<DMatrix<f64>>, observers: Vec<RowDVector<f64>>) -> Result<Self> {
        let dim = observers
            .first()
            .map(|h| h.ncols())
            .ok_or_else(|| Error::InvalidConfig("need at least one observer row".into()))?;
        for (k, f) in transitions.iter().enumerate() {
            if f.nrows() != dim || f.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "transition {k} is {}x{}, expected {dim}x{dim}",
                    f.nrows(),
                    f.ncols()
                )));
            }
        }
        for (k, h) in observers.iter().enumerate() {
            if h.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "observer {k} has {} entries, expected {dim}",
                    h.ncols()
                )));
            }
            if h.iter().any(|&e| e == 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "observer {k} has a zero entry"
                )));
            }
        }
        Ok(Self {
            transitions,
            observers,
        })
    }

    pub fn dim(&self) -> usize {
        self.observers[0].ncols()
    }

    /// Steps available: `k` may range over `0..=transitions.len()`.
    pub fn steps(&self) -> usize {
        self.transitions.len()
    }

    /// Ground-truth scalar observation sequence for initial state `x0`,
    /// covering every model step `0..count`.
    pub fn observe_all(&self, x0: &DVector<f64>, count: usize) -> Result<Vec<f64>> {
        if count > self.observers.len() || count > self.transitions.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "asked for {count} observations, system supplies {} observers / {} transitions",
                self.observers.len(),
                self.transitions.len()
            )));
        }
        let mut x = x0.clone();
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            out.push((&self.observers[k] * &x)[0]);
            if k + 1 < count {
                x = &self.transitions[k] * x;
            }
        }
        Ok(out)
    }
}

/// Stacked rows `M_k = H_k F_{k-1} ... F_0` with the step index of each row.
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    pub rows: DMatrix<f64>,
    pub row_indices: Vec<usize>,
}

/// Step indices of the reduced observation matrix: the first observation
/// plus the end-aligned samples `{m-1, 2m-1, ..., mT-1}`, deduplicated.
fn reduced_indices(t_count: usize, m: usize) -> Vec<usize> {
    let mut idx = vec![0usize];
    for j in 1..=t_count {
        let k = j * m - 1;
        if k != 0 {
            idx.push(k);
        }
    }
    idx
}

/// Builds the extended (`k = 0..mT-1`) or reduced observation matrix.
pub fn build_matrix(
    sys: &LinearTVSystem,
    t_count: usize,
    m: usize,
    extended: bool,
) -> Result<ObservationMatrix> {
    if t_count < 1 || m < 1 {
        return Err(Error::InvalidConfig(format!(
            "need T >= 1 and m >= 1, got {t_count}, {m}"
        )));
    }
    let span = t_count * m;
    if sys.observers.len() < span || sys.transitions.len() + 1 < span {
        return Err(Error::DimensionMismatch(format!(
            "window spans {span} steps, system supplies {} observers / {} transitions",
            sys.observers.len(),
            sys.transitions.len()
        )));
    }
    let indices: Vec<usize> = if extended {
        (0..span).collect()
    } else {
        reduced_indices(t_count, m)
    };
    let dim = sys.dim();
    let mut rows = DMatrix::zeros(indices.len(), dim);
    let mut propagator = DMatrix::identity(dim, dim);
    let mut next = indices.iter();
    let mut target = next.next();
    for k in 0..span {
        if target == Some(&k) {
            let row = &sys.observers[k] * &propagator;
            let out_row = indices.iter().position(|&i| i == k).expect("index present");
            rows.row_mut(out_row).copy_from(&row);
            target = next.next();
        }
        if k + 1 < span {
            propagator = &sys.transitions[k] * propagator;
        }
    }
    Ok(ObservationMatrix {
        rows,
        row_indices: indices,
    })
}

/// Minimum-norm least-squares recovery of the initial state.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub x0: DVector<f64>,
    pub rank: usize,
    /// True iff the matrix has full column rank, making the solution the
    /// unique one.
    pub unique: bool,
    /// Norm of `M x0 - y`.
    pub residual: f64,
}

/// Solves `y = M x0` by a rank-revealing orthogonal factorization; rank
/// deficiency is reported, not treated as an error.
pub fn recover(matrix: &ObservationMatrix, y: &[f64]) -> Result<RecoveryResult> {
    if y.len() != matrix.rows.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} observations against {} rows",
            y.len(),
            matrix.rows.nrows()
        )));
    }
    let rhs = DVector::from_column_slice(y);
    let svd = matrix.rows.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let rank = svd.rank(eps);
    let x0 = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    let residual = (&matrix.rows * &x0 - &rhs).norm();
    Ok(RecoveryResult {
        unique: rank == matrix.rows.ncols(),
        x0,
        rank,
        residual,
    })
}

/// One cell of a recovery-error grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCell {
    pub t_count: usize,
    pub m: usize,
    pub median_error: f64,
}

/// Median relative recovery error over random draws for every `(T, m)`
/// combination, solved from the extended window data. The error drops to
/// numerical zero exactly where `T m` reaches the state dimension.
pub fn transition_study<R, F>(
    family: F,
    t_range: &[usize],
    m_range: &[usize],
    draws: usize,
    rng: &mut R,
) -> Result<Vec<TransitionCell>>
where
    R: Rng + ?Sized,
    F: Fn(usize, &mut R) -> LinearTVSystem,
{
    if draws < 1 {
        return Err(Error::InvalidConfig("need at least one draw".into()));
    }
    let mut grid = Vec::with_capacity(t_range.len() * m_range.len());
    for &t_count in t_range {
        for &m in m_range {
            let span = t_count * m;
            let mut errors = Vec::with_capacity(draws);
            for _ in 0..draws {
                let sys = family(span, rng);
                let dim = sys.dim();
                let x0 = DVector::from_fn(dim, |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                });
                let y = sys.observe_all(&x0, span)?;
                let matrix = build_matrix(&sys, t_count, m, true)?;
                let rec = recover(&matrix, &y)?;
                errors.push((&rec.x0 - &x0).norm() / x0.norm());
            }
            grid.push(TransitionCell {
                t_count,
                m,
                median_error: crate::validation::median(&errors),
            });
        }
    }
    Ok(grid)
}

/// Well-conditioned random family: orthogonal transitions with mild
/// diagonal scaling in [0.9, 1.1] and observer entries uniform in
/// [0.5, 1.5].
pub fn random_system<R: Rng + ?Sized>(dim: usize, steps: usize, rng: &mut R) -> LinearTVSystem {
    let transitions = (0..steps.saturating_sub(1))
        .map(|_| {
            let gauss = DMatrix::from_fn(dim, dim, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let q = gauss.qr().q();
            let scale =
                DMatrix::from_diagonal(&DVector::from_fn(dim, |_, _| rng.gen_range(0.9..1.1)));
            q * scale
        })
        .collect();
    let observers = (0..steps)
        .map(|_| RowDVector::from_fn(dim, |_, _| rng.gen_range(0.5..1.5)))
        .collect();
    LinearTVSystem::new(transitions, observers).expect("random family is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn identity_system(dim: usize, steps: usize) -> LinearTVSystem {
        LinearTVSystem::new(
            (0..steps - 1).map(|_| DMatrix::identity(dim, dim)).collect(),
            (0..steps)
                .map(|_| RowDVector::from_element(dim, 1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_dynamics_repeat_the_observer_row() {
        let sys = identity_system(3, 8);
        for extended in [true, false] {
            let m = build_matrix(&sys, 4, 2, extended).unwrap();
            for r in 0..m.rows.nrows() {
                assert_eq!(m.rows.row(r).iter().cloned().collect::<Vec<_>>(), vec![1.0; 3]);
            }
        }
    }

    #[test]
    fn single_observation_is_the_first_observer() {
        let sys = identity_system(4, 2);
        let m = build_matrix(&sys, 1, 1, false).unwrap();
        assert_eq!(m.rows.nrows(), 1);
        assert_eq!(m.row_indices, vec![0]);
    }

    #[test]
    fn rows_match_brute_force_products() {
        // Oracle: multiply the chain H_k F_{k-1} ... F_0 directly.
        let mut rng = ChaCha12Rng::seed_from_u64(211);
        let sys = random_system(4, 4, &mut rng);
        let m = build_matrix(&sys, 2, 2, true).unwrap();
        assert_eq!(m.row_indices, vec![0, 1, 2, 3]);
        for (r, &k) in m.row_indices.iter().enumerate() {
            let mut product = DMatrix::identity(4, 4);
            for j in 0..k {
                product = &sys.transitions[j] * product;
            }
            let want = &sys.observers[k] * product;
            let got = m.rows.row(r);
            for c in 0..4 {
                assert!((got[c] - want[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_rows_are_a_subset_of_extended_rows() {
        let mut rng = ChaCha12Rng::seed_from_u64(223);
        let sys = random_system(4, 6, &mut rng);
        let ext = build_matrix(&sys, 3, 2, true).unwrap();
        let red = build_matrix(&sys, 3, 2, false).unwrap();
        assert_eq!(red.row_indices, vec![0, 1, 3, 5]);
        for (r, &k) in red.row_indices.iter().enumerate() {
            let pos = ext.row_indices.iter().position(|&i| i == k).unwrap();
            assert_eq!(
                red.rows.row(r).iter().cloned().collect::<Vec<_>>(),
                ext.rows.row(pos).iter().cloned().collect::<Vec<_>>()
            );
        }
        // m = 1 collapses to consecutive indices without duplicates
        let red1 = build_matrix(&sys, 4, 1, false).unwrap();
        assert_eq!(red1.row_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn full_rank_window_recovers_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(227);
        let sys = random_system(4, 4, &mut rng);
        let x0 = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let y = sys.observe_all(&x0, 4).unwrap();
        let m = build_matrix(&sys, 4, 1, false).unwrap();
        let rec = recover(&m, &y).unwrap();
        assert!(rec.unique);
        assert_eq!(rec.rank, 4);
        assert!((&rec.x0 - &x0).norm() / x0.norm() <= 1e-8);
        // synthetic data reproduces through every row
        for (r, &k) in m.row_indices.iter().enumerate() {
            let predicted = (m.rows.row(r) * &x0)[0];
            assert!((predicted - y[k]).abs() <= 1e-10 * y[k].abs().max(1.0));
        }
    }

    #[test]
    fn undersampled_window_is_rank_deficient_but_consistent() {
        let mut rng = ChaCha12Rng::seed_from_u64(229);
        let sys = random_system(4, 4, &mut rng);
        let x0 = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let all = sys.observe_all(&x0, 4).unwrap();
        let m = build_matrix(&sys, 2, 2, false).unwrap();
        let y: Vec<f64> = m.row_indices.iter().map(|&k| all[k]).collect();
        let rec = recover(&m, &y).unwrap();
        assert_eq!(rec.rank, 3, "three generic rows");
        assert!(!rec.unique);
        // consistent system: the minimum-norm solution fits the data...
        assert!(rec.residual <= 1e-9);
        // ...but generically misses the truth
        assert!((&rec.x0 - &x0).norm() / x0.norm() > 1e-3);
    }

    #[test]
    fn zero_dynamics_collapse_the_rank() {
        let dim = 3;
        let sys = LinearTVSystem::new(
            (0..3).map(|_| DMatrix::zeros(dim, dim)).collect(),
            (0..4)
                .map(|_| RowDVector::from_element(dim, 1.0))
                .collect(),
        )
        .unwrap();
        let m = build_matrix(&sys, 4, 1, false).unwrap();
        let y = vec![3.0, 0.0, 0.0, 0.0];
        let rec = recover(&m, &y).unwrap();
        assert_eq!(rec.rank, 1);
        assert!(!rec.unique);
    }

    #[test]
    fn observers_must_be_fully_non_zero() {
        let mut h = RowDVector::from_element(3, 1.0);
        h[1] = 0.0;
        assert!(LinearTVSystem::new(vec![DMatrix::identity(3, 3)], vec![h]).is_err());
    }

    #[test]
    fn recovery_transition_sits_at_full_coverage() {
        let mut rng = ChaCha12Rng::seed_from_u64(233);
        let nx = 6;
        let family = |span: usize, rng: &mut ChaCha12Rng| random_system(nx, span.max(1), rng);
        let grid = transition_study(family, &[1, 2, 3, 6], &[1, 2, 3], 5, &mut rng).unwrap();
        for cell in grid {
            let covered = cell.t_count * cell.m >= nx;
            if covered {
                assert!(
                    cell.median_error <= 1e-8,
                    "covered cell T={} m={} err {}",
                    cell.t_count,
                    cell.m,
                    cell.median_error
                );
            } else {
                assert!(
                    cell.median_error > 1e-3,
                    "undersampled cell T={} m={} err {}",
                    cell.t_count,
                    cell.m,
                    cell.median_error
                );
            }
        }
    }
}
