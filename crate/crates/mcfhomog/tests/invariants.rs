use mcfhomog::discrepancy::{discrepancy, discrepancy_brute_force, modified_discrepancy};
use mcfhomog::forcing::ForcingField;
use mcfhomog::levelset::{extract_front, solve, Boundary, Grid, LevelSetField, SchemeParams, Solver};
use mcfhomog::morphology::erode;
use proptest::prelude::*;

fn periodic_grid(cells: usize) -> Grid {
    Grid::new(vec![cells, cells], 1.0 / cells as f64, vec![0.0, 0.0], vec![Boundary::periodic(); 2]).unwrap()
}

fn field(grid: &Grid, values: Vec<f64>) -> LevelSetField {
    LevelSetField { grid: grid.clone(), values, time: 0.0, eps: 1.0 }
}

fn values(cells: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, cells * cells)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn erosion_is_monotone_decreasing_and_commutes_with_constants(
        u in values(12),
        bump in values(12),
        c in -2.0f64..2.0,
        r in 0.0f64..0.3,
    ) {
        let grid = periodic_grid(12);
        let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + b.abs()).collect();
        let shifted: Vec<f64> = u.iter().map(|a| a + c).collect();
        let eu = erode(&field(&grid, u.clone()), r).unwrap();
        let ev = erode(&field(&grid, v), r).unwrap();
        let es = erode(&field(&grid, shifted), r).unwrap();
        for k in 0..u.len() {
            prop_assert!(eu[k] <= u[k]);
            prop_assert!(eu[k] <= ev[k]);
            prop_assert!((es[k] - eu[k] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn discrepancy_brackets(x in 0.0f64..1.0, n in 1usize..300) {
        let (ds, d) = (modified_discrepancy(x, n), discrepancy(x, n));
        prop_assert!(ds <= d + 1e-15 && d <= 2.0 * ds + 1e-15);
        prop_assert!((d - discrepancy_brute_force(x, n)).abs() < 1e-12);
        prop_assert!((discrepancy(x + 1.0, n) - d).abs() < 1e-9);
    }

    #[test]
    fn forcing_is_periodic(x in -3.0f64..3.0, y in -3.0f64..3.0, i in 0usize..2, k in -2i32..3) {
        for g in [
            ForcingField::sin_product(2, 1.0, 0.5).unwrap(),
            ForcingField::sin_sum(2, 1.0, 0.5).unwrap(),
            ForcingField::stripes(2, 1.0, 0.5).unwrap(),
        ] {
            let mut z = [x, y];
            z[i] += k as f64;
            let (a, b) = (g.eval(&[x, y]), g.eval(&z));
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(g.lower - 1e-12 <= a && a <= g.upper + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scheme_preserves_order(u in values(16), bump in values(16), lift in 0.0f64..0.3) {
        let grid = periodic_grid(16);
        let g = ForcingField::sin_product(2, 1.0, 0.5).unwrap();
        let solver = Solver::new(&grid, 1.0, &g, &SchemeParams::default()).unwrap();
        let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + lift + b.max(0.0)).collect();
        let (mut a, mut b) = (field(&grid, u), field(&grid, v));
        solve(&solver, &mut a, 0.05, None, |_| {}).unwrap();
        solve(&solver, &mut b, 0.05, None, |_| {}).unwrap();
        prop_assert!(a.values.iter().zip(&b.values).all(|(p, q)| p <= q));
    }

    #[test]
    fn scheme_commutes_with_constants(u in values(16), c in -1.0f64..1.0) {
        let grid = periodic_grid(16);
        let g = ForcingField::sin_sum(2, 1.0, 0.5).unwrap();
        let solver = Solver::new(&grid, 1.0, &g, &SchemeParams::default()).unwrap();
        let (mut a, mut b) = (field(&grid, u.clone()), field(&grid, u.iter().map(|x| x + c).collect()));
        solve(&solver, &mut a, 0.05, None, |_| {}).unwrap();
        solve(&solver, &mut b, 0.05, None, |_| {}).unwrap();
        prop_assert!(a.values.iter().zip(&b.values).all(|(p, q)| (q - p - c).abs() < 1e-9));
    }
}

#[test]
fn planar_front_moves_at_unit_speed() {
    let grid = Grid::new(vec![16, 96], 1.0 / 16.0, vec![0.0, -1.0], vec![Boundary::periodic(), Boundary::Clamped]).unwrap();
    let g = ForcingField::constant(2, 1.0).unwrap();
    let solver = Solver::new(&grid, 1.0, &g, &SchemeParams::default()).unwrap();
    let mut st = LevelSetField::planar(grid, 1.0, &[0.0, 1.0], 0.0);
    solve(&solver, &mut st, 1.0, None, |_| {}).unwrap();
    let front = extract_front(&st, 0.0);
    let shift = front.iter().map(|x| x[1]).sum::<f64>() / front.len() as f64;
    assert!((shift - 1.0).abs() < 0.01, "shift {shift}");
}
