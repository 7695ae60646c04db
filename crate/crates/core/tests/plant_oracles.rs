use approx::assert_relative_eq;
use cstr_etsmc::plant::{self, Mat2};
use cstr_etsmc::trigger::{self, LIPSCHITZ_BOX, LIPSCHITZ_SAFETY_FACTOR, LIPSCHITZ_SAMPLES};
use cstr_etsmc::{sim, DimlessParams, DimlessState, Disturbance, SimConfig, SlidingParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn fd_jacobian(x: &DimlessState, p: &DimlessParams, step: f64) -> Mat2 {
    let f = |y: DimlessState| plant::drift(&y, p).unwrap();
    let d1 = f(DimlessState::new(x.x1 + step, x.x2)) - f(DimlessState::new(x.x1 - step, x.x2));
    let d2 = f(DimlessState::new(x.x1, x.x2 + step)) - f(DimlessState::new(x.x1, x.x2 - step));
    let s = 2.0 * step;
    Mat2([[d1.x1 / s, d2.x1 / s], [d1.x2 / s, d2.x2 / s]])
}

#[test]
fn jacobian_matches_central_differences() {
    let p = DimlessParams::default();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = DimlessState::new(rng.random_range(0.0..1.0), rng.random_range(0.0..5.0));
        let exact = plant::jacobian(&x, &p).unwrap();
        let approx = fd_jacobian(&x, &p, 1e-6);
        let diff = Mat2([
            [exact.0[0][0] - approx.0[0][0], exact.0[0][1] - approx.0[0][1]],
            [exact.0[1][0] - approx.0[1][0], exact.0[1][1] - approx.0[1][1]],
        ]);
        worst = worst.max(diff.frobenius_norm() / exact.frobenius_norm());
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

/// Reduced residual of the x2 balance once x1 is eliminated with the x1 balance.
fn reduced_residual(x2: f64, p: &DimlessParams, u: f64) -> f64 {
    let x1 = plant::equilibrium_composition(x2, p).unwrap();
    let rate = p.da * (1.0 - x1) * (x2 / (1.0 + x2 / p.gamma)).exp();
    -x2 + p.b_rise * rate - p.beta * (x2 - p.x2c0) + p.beta * u
}

/// Input that makes the reduced residual vanish at `x2`.
fn oracle_input(x2: f64, p: &DimlessParams) -> f64 {
    -reduced_residual(x2, p, 0.0) / p.beta
}

/// Cells of an `n x n` grid over the search box around which the drift field winds.
fn scan_clusters(p: &DimlessParams, u: f64, n: usize) -> Vec<DimlessState> {
    let bx = plant::EQUILIBRIUM_BOX;
    let at = |i: usize, j: usize| {
        let x = bx.point(i as f64 / n as f64, j as f64 / n as f64);
        let f = plant::state_derivative(&x, u, 0.0, p, &Disturbance::NONE).unwrap();
        f.x2.atan2(f.x1)
    };
    let grid: Vec<Vec<f64>> = (0..=n).map(|i| (0..=n).map(|j| at(i, j)).collect()).collect();
    let wrap = |d: f64| {
        let tau = std::f64::consts::TAU;
        d - tau * (d / tau).round()
    };
    let mut cells = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let loop_ = [grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1], grid[i][j]];
            let turn: f64 = loop_.windows(2).map(|w| wrap(w[1] - w[0])).sum();
            if turn.abs() > std::f64::consts::PI {
                cells.push((i, j));
            }
        }
    }
    // merge touching cells
    let mut clusters: Vec<Vec<(usize, usize)>> = Vec::new();
    for c in cells {
        let near = |o: &(usize, usize)| o.0.abs_diff(c.0) <= 1 && o.1.abs_diff(c.1) <= 1;
        match clusters.iter_mut().find(|cl| cl.iter().any(near)) {
            Some(cl) => cl.push(c),
            None => clusters.push(vec![c]),
        }
    }
    clusters
        .iter()
        .map(|cl| {
            let (si, sj) = cl.iter().fold((0.0, 0.0), |(a, b), &(i, j)| (a + i as f64 + 0.5, b + j as f64 + 0.5));
            let m = cl.len() as f64;
            bx.point(si / m / n as f64, sj / m / n as f64)
        })
        .collect()
}

#[test]
fn equilibria_match_grid_scan() {
    let p = DimlessParams::default();
    let cell = (1.0f64 / 400.0).hypot(6.0 / 400.0);
    for u in [0.0, -2.0, 2.0, oracle_input(2.7517, &p)] {
        let roots = plant::find_equilibria(&p, u).unwrap();
        let scan = scan_clusters(&p, u, 400);
        assert_eq!(roots.len(), scan.len(), "u = {u}: roots {roots:?} scan {scan:?}");
        for (r, s) in roots.iter().zip(&scan) {
            assert!(r.distance(s) < 2.0 * cell, "u = {u}: root {r:?} vs scan {s:?}");
            let res = plant::state_derivative(r, u, 0.0, &p, &Disturbance::NONE).unwrap();
            assert!(res.norm() < 1e-10);
        }
    }
}

#[test]
fn equilibria_agree_with_reduced_scan() {
    let p = DimlessParams::default();
    for u in [0.0, 1.0, -1.0] {
        let n = 60_000;
        let x2s: Vec<f64> = (0..=n).map(|i| 6.0 * i as f64 / n as f64).collect();
        let vals: Vec<f64> = x2s.iter().map(|&x2| reduced_residual(x2, &p, u)).collect();
        let crossings: Vec<f64> =
            (0..n).filter(|&i| vals[i] * vals[i + 1] <= 0.0 && vals[i] != vals[i + 1]).map(|i| x2s[i]).collect();
        let roots = plant::find_equilibria(&p, u).unwrap();
        assert_eq!(roots.len(), crossings.len(), "u = {u}");
        for (r, c) in roots.iter().zip(&crossings) {
            assert!((r.x2 - c).abs() < 1e-3);
            assert_relative_eq!(r.x1, plant::equilibrium_composition(r.x2, &p).unwrap(), epsilon = 1e-9);
        }
    }
}

#[test]
fn operating_point_is_an_equilibrium_for_the_oracle_input() {
    let p = DimlessParams::default();
    let u = oracle_input(2.7517, &p);
    let roots = plant::find_equilibria(&p, u).unwrap();
    let target = DimlessState::new(0.4472, 2.7517);
    let nearest = roots.iter().map(|r| r.distance(&target)).fold(f64::INFINITY, f64::min);
    assert!(nearest < 0.05, "nearest root {nearest} away; roots {roots:?}");
}

#[test]
fn lipschitz_estimate_matches_dense_grid() {
    let p = DimlessParams::default();
    let est = trigger::estimate_lipschitz(&p, LIPSCHITZ_BOX, LIPSCHITZ_SAMPLES).unwrap();
    let n = 1000;
    let mut dense: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = LIPSCHITZ_BOX.point(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
            dense = dense.max(plant::jacobian(&x, &p).unwrap().spectral_norm());
        }
    }
    let oracle = LIPSCHITZ_SAFETY_FACTOR * dense;
    assert!((est.l_bar - oracle).abs() / oracle < 0.05, "estimate {} vs dense {oracle}", est.l_bar);
}

fn ln1p_series(z: f64) -> f64 {
    // ln(1 + z) = 2 atanh(w), w = z / (2 + z)
    let w = z / (2.0 + z);
    let w2 = w * w;
    let (mut term, mut sum, mut k) = (w, 0.0, 0u32);
    loop {
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
        term *= w2;
        k += 1;
    }
    2.0 * sum
}

#[test]
fn zeno_bound_matches_series_oracle() {
    let cfg = SimConfig::default();
    let run = sim::run_event_triggered(&cfg).unwrap();
    let eps = run.metrics.max_discretization_error;
    assert!(eps > 0.0);
    let lip = sim::lipschitz_for(&cfg).unwrap();
    let (p, sp) = (DimlessParams::default(), SlidingParams::default());
    let x_k = DimlessState::new(0.4472, 2.7517);
    let got = trigger::zeno_bound(&x_k, eps, &lip, &p, &sp).unwrap();

    let l = lip.l_bar;
    let coupling = 5f64.sqrt() / 2.0;
    let z = l * eps / (l * (1.0 + coupling) * x_k.x1.hypot(x_k.x2) + p.beta * sp.mu);
    let oracle = ln1p_series(z) / l;
    assert!(got > 0.0);
    assert_relative_eq!(got, oracle, max_relative = 1e-12);
}
