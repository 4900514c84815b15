use entroq::madelung::{ensemble_from_wave, WaveState};
use entroq::variational::{stationarity_residuals, MultiplierSet};
use entroq::wdw::{build_wdw_operator, madelung_split_residual, normalize_zero_mode, solve_wdw, Boundary, Ordering};
use entroq::{build_frw_space, Axis, ConfigSpace, PhysicalConstants};
use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;

fn closed_universe(points: usize) -> ConfigSpace {
    build_frw_space(1, 1.0, &Axis::new("a", 0.5, 3.0, points).unwrap(), PhysicalConstants::default()).unwrap()
}

fn mixed_boundary() -> Boundary {
    Boundary::Values {
        left: Complex64::new(1.0, 0.0),
        right: Complex64::new(0.0, 1.0),
    }
}

/// Null space of the interior rows via SVD, fitted to the boundary values.
fn dense_zero_mode(space: &ConfigSpace, left: f64, right: f64) -> Vec<f64> {
    let op = build_wdw_operator(space, Ordering::Paper).unwrap();
    let full = op.matrix.to_dense();
    let n = full.ncols();
    let rows = DMatrix::from_fn(n - 2, n, |r, c| full[(r + 1, c)]);
    let svd = rows.svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    // The interior rows have rank n - 2, so exactly two right singular
    // vectors are missing from the thin decomposition; recover the null
    // space as the orthogonal complement of the row space.
    let basis = {
        let row_space = vt.transpose();
        let proj = DMatrix::<f64>::identity(n, n) - &row_space * row_space.transpose();
        let svd = proj.svd(true, false);
        let u = svd.u.unwrap();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        (u.column(idx[0]).clone_owned(), u.column(idx[1]).clone_owned())
    };
    let m = Matrix2::new(basis.0[0], basis.1[0], basis.0[n - 1], basis.1[n - 1]);
    let c = m.lu().solve(&Vector2::new(left, right)).unwrap();
    (0..n).map(|i| c[0] * basis.0[i] + c[1] * basis.1[i]).collect()
}

#[test]
fn solver_matches_dense_null_vector() {
    let space = closed_universe(200);
    let op = build_wdw_operator(&space, Ordering::Paper).unwrap();
    let mode = solve_wdw(&op, &mixed_boundary(), 1e-10).unwrap();
    let re = dense_zero_mode(&space, 1.0, 0.0);
    let im = dense_zero_mode(&space, 0.0, 1.0);
    let oracle = WaveState::new(re.iter().zip(&im).map(|(r, i)| Complex64::new(*r, *i)).collect(), 0.0);
    let a = normalize_zero_mode(&mode.wave, &space).unwrap();
    let b = normalize_zero_mode(&oracle, &space).unwrap();
    let worst = a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "max deviation {worst:e}");
}

#[test]
fn split_residuals_converge_at_second_order() {
    let report = |points: usize| {
        let space = closed_universe(points);
        let op = build_wdw_operator(&space, Ordering::Paper).unwrap();
        let mode = solve_wdw(&op, &mixed_boundary(), 1e-10).unwrap();
        let wave = normalize_zero_mode(&mode.wave, &space).unwrap();
        let split = madelung_split_residual(&wave, &space).unwrap();
        assert!(split.masked.is_empty());
        split.report
    };
    let reports: Vec<_> = [101, 201, 401].into_iter().map(report).collect();
    for key in ["wdw_real", "wdw_imag"] {
        let r: Vec<f64> = reports.iter().map(|rep| rep.get(key).unwrap()).collect();
        // Spacing halves (up to one node) at each refinement.
        for w in r.windows(2) {
            assert!(w[0] / w[1] > 3.5, "{key}: {r:?}");
        }
    }
}

#[test]
fn stationarity_residuals_of_zero_mode_converge() {
    let residuals = |points: usize| {
        let space = closed_universe(points);
        let op = build_wdw_operator(&space, Ordering::Paper).unwrap();
        let wave = solve_wdw(&op, &mixed_boundary(), 1e-10).unwrap().wave.normalized(space.grid()).unwrap();
        let state = ensemble_from_wave(&wave, space.grid(), space.constants(), 0).unwrap().state;
        let mut later = state.clone();
        later.time = 1.0;
        stationarity_residuals(&state, &later, &MultiplierSet::default(), &space).unwrap()
    };
    let (coarse, fine) = (residuals(101), residuals(201));
    for key in ["var11", "var12"] {
        let ratio = coarse.get(key).unwrap() / fine.get(key).unwrap();
        assert!(ratio > 3.5, "{key}: {ratio}");
    }
}
