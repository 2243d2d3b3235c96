use hbl::sim::{self, init, PeriodicGrid, SimOptions, Transform};
use hbl_core::decay::certify_decay;
use hbl_core::grid::{RadialGrid, SphereGrid};
use hbl_core::linalg::{self, c, RMat};
use hbl_core::model::fixtures::telegraph;
use hbl_core::model::{build_jinxin, linearize, JinXinSpec, LinearSystem};
use hbl_core::poly::{Monomial, PolyMap, Polynomial};
use num_complex::Complex64;
use std::f64::consts::PI;

fn poly1(terms: &[(f64, u32)]) -> PolyMap {
    PolyMap {
        nvars: 1,
        components: vec![Polynomial {
            terms: terms.iter().map(|&(coeff, p)| Monomial { coeff, powers: vec![p] }).collect(),
        }],
    }
}

fn scalar_jinxin(b: f64, terms: &[(f64, u32)]) -> JinXinSpec {
    let poly = poly1(terms);
    let k = poly.jacobian(&[0.0]);
    JinXinSpec::new(vec![RMat::from_element(1, 1, b)], 1.0, vec![k], Some(vec![poly])).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn single_mode_matches_matrix_exponential() {
    let grid = PeriodicGrid::new(1, 64, 10.0).unwrap();
    let sys = telegraph();
    let u0 = init::single_mode(&grid, 2, 1.0, &[3], Some(0));
    let t = 2.7;
    let res = sim::simulate_linear(&sys, &grid, &u0, &[0.0, t], &SimOptions::default()).unwrap();
    let xi = grid.xi(3);
    let e = linalg::expm(&(sys.symbol(&xi) * c(t)));
    let half = grid.len() as f64 / 2.0;
    for i in 0..2 {
        let want = e[(i, 0)] * half;
        let got = res.final_spectrum[i][3];
        assert!((got - want).norm() < 1e-12 * half, "{got} vs {want}");
    }
    for f in 0..grid.len() {
        if f != 3 && f != grid.n - 3 {
            assert!(res.final_spectrum[0][f].norm() < 1e-12 * half);
        }
    }
}

#[test]
fn linear_zero_mode_is_conserved() {
    let grid = PeriodicGrid::new(1, 128, 30.0).unwrap();
    let u0 = init::gaussian(&grid, 2, 1.0, 1.5, None);
    let res = sim::simulate_linear(&telegraph(), &grid, &u0, &sim::geometric_times(40.0, 20, 0.1), &SimOptions::default()).unwrap();
    let m0 = res.mean[0][0];
    assert!(m0 > 0.0);
    for m in &res.mean {
        assert!((m[0] - m0).abs() < 1e-12);
    }
}

#[test]
fn transport_group_property_and_reversibility() {
    let a = RMat::from_row_slice(2, 2, &[0.3, 1.0, 2.0, -0.1]);
    let fwd = LinearSystem { d: 1, n: 2, m: 1, a: vec![a.clone()], source: RMat::zeros(2, 2) };
    let back = LinearSystem { d: 1, n: 2, m: 1, a: vec![-a], source: RMat::zeros(2, 2) };
    let grid = PeriodicGrid::new(1, 64, 12.0).unwrap();
    let u0 = init::band_limited_noise(&grid, 2, 1.0, 10, 3, None);
    let dt = 0.05;
    let opts = SimOptions::default();
    let once = sim::simulate_linear(&fwd, &grid, &u0, &[100.0 * dt], &opts).unwrap().final_field;
    let mut field = u0.clone();
    for _ in 0..100 {
        field = sim::simulate_linear(&fwd, &grid, &field, &[dt], &opts).unwrap().final_field;
    }
    for (x, y) in field.iter().zip(&once) {
        assert!(max_diff(x, y) < 1e-10);
    }
    for _ in 0..100 {
        field = sim::simulate_linear(&back, &grid, &field, &[dt], &opts).unwrap().final_field;
    }
    // the Nyquist mode is removed on the first transform
    let filtered = sim::simulate_linear(&fwd, &grid, &u0, &[0.0], &opts).unwrap().final_field;
    for (x, y) in field.iter().zip(&filtered) {
        assert!(max_diff(x, y) < 1e-10);
    }
}

#[test]
fn telegraph_modes_obey_the_certificate() {
    let grid = PeriodicGrid::new(1, 64, 8.0 * PI).unwrap();
    let u0 = init::band_limited_noise(&grid, 2, 1.0, 20, 5, None);
    let opts = SimOptions { record_modes: true, ..SimOptions::default() };
    let res = sim::simulate_linear(&telegraph(), &grid, &u0, &sim::geometric_times(50.0, 30, 0.05), &opts).unwrap();
    let cert = certify_decay(&telegraph(), &RadialGrid::default(), &SphereGrid::default_for(1).unwrap(), &res.times).unwrap();
    assert!(cert.pass);
    let checks = sim::envelope_check(&res, cert.big_c, cert.c).unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c.ok));
}

#[test]
fn torus_rate_is_the_slowest_mode() {
    let grid = PeriodicGrid::new(1, 64, 8.0 * PI).unwrap();
    let mut u0 = init::band_limited_noise(&grid, 2, 1.0, 6, 9, None);
    for comp in &mut u0 {
        let mean = comp.iter().sum::<f64>() / comp.len() as f64;
        comp.iter_mut().for_each(|x| *x -= mean);
    }
    let times: Vec<f64> = (0..=60).map(|i| i as f64).collect();
    let sys = telegraph();
    let res = sim::simulate_linear(&sys, &grid, &u0, &times, &SimOptions::default()).unwrap();
    let fits = sim::measure_decay(&res, (30.0, 60.0)).unwrap();
    let l2 = fits.fits.iter().find(|f| f.norm == "L2").unwrap();
    let predicted = (1..grid.n / 2)
        .map(|f| -linalg::spectral_abscissa(&sys.symbol(&grid.xi(f))).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((l2.exp_rate / predicted - 1.0).abs() < 0.2, "{} vs {predicted}", l2.exp_rate);
    assert_eq!(l2.preferred, "exponential");
}

#[test]
fn splitting_conserves_the_mean() {
    let jx = scalar_jinxin(2.0, &[(0.5, 1), (0.5, 2)]);
    let grid = PeriodicGrid::new(1, 128, 40.0).unwrap();
    let mut u0 = init::gaussian(&grid, 2, 0.3, 2.0, Some(0));
    u0[1] = init::band_limited_noise(&grid, 1, 0.2, 12, 1, None).remove(0);
    let res = sim::simulate_jinxin(&jx, &grid, &u0, &sim::snap_times(&sim::geometric_times(20.0, 20, 0.05), 0.05), 0.05, &SimOptions::default()).unwrap();
    assert!(res.aborted.is_none());
    let m0 = res.mean[0][0];
    for m in &res.mean {
        assert!((m[0] - m0).abs() < 1e-12);
    }
}

#[test]
fn splitting_is_second_order() {
    let jx = scalar_jinxin(2.0, &[(0.5, 1)]);
    let grid = PeriodicGrid::new(1, 64, 20.0).unwrap();
    let mut u0 = init::gaussian(&grid, 2, 1.0, 1.5, Some(0));
    u0[1] = init::gaussian(&grid, 1, -0.5, 2.0, None).remove(0);
    let t_end = 2.0;
    let sys = linearize(&build_jinxin(&jx).unwrap()).unwrap();
    let exact = sim::simulate_linear(&sys, &grid, &u0, &[t_end], &SimOptions::default()).unwrap().final_field;
    let errors: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let got = sim::simulate_jinxin(&jx, &grid, &u0, &[t_end], dt, &SimOptions::default()).unwrap().final_field;
            got.iter().zip(&exact).map(|(a, b)| max_diff(a, b)).fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "{errors:?}");
    }
}

#[test]
fn dealiasing_is_invisible_at_small_amplitude() {
    let jx = scalar_jinxin(2.0, &[(0.5, 1), (0.5, 2)]);
    let grid = PeriodicGrid::new(1, 128, 40.0).unwrap();
    let u0 = init::band_limited_noise(&grid, 2, 1e-6, 30, 4, None);
    let run = |dealias| {
        let opts = SimOptions { dealias, ..SimOptions::default() };
        sim::simulate_jinxin(&jx, &grid, &u0, &[1.0], 0.05, &opts).unwrap().final_field
    };
    let (on, off) = (run(true), run(false));
    for (a, b) in on.iter().zip(&off) {
        assert!(max_diff(a, b) < 1e-10);
    }
}

#[test]
fn cfl_and_non_finite_states_are_reported() {
    let jx = scalar_jinxin(2.0, &[(0.5, 1), (0.5, 2)]);
    let grid = PeriodicGrid::new(1, 64, 20.0).unwrap();
    let u0 = init::gaussian(&grid, 2, 1.0, 1.0, Some(0));
    let limit = sim::cfl_limit(&jx, &grid);
    assert!(matches!(
        sim::simulate_jinxin(&jx, &grid, &u0, &[1.0], 1.01 * limit, &SimOptions::default()),
        Err(sim::SimError::Cfl { .. })
    ));
    let wild = scalar_jinxin(2.0, &[(1e300, 4)]);
    let big = init::gaussian(&grid, 2, 10.0, 1.0, Some(0));
    let res = sim::simulate_jinxin(&wild, &grid, &big, &[0.0, 1.0], 0.05, &SimOptions::default()).unwrap();
    assert!(res.aborted.is_some());
    assert!(res.final_field.iter().flatten().all(|x| x.is_finite()));
}

#[test]
fn small_data_decays() {
    let jx = scalar_jinxin(2.0, &[(0.5, 1), (0.5, 2)]);
    let grid = PeriodicGrid::new(1, 256, 100.0).unwrap();
    let u0 = init::gaussian(&grid, 2, 1e-3, 1.0, None);
    let res = sim::simulate_jinxin(&jx, &grid, &u0, &[0.0, 5.0, 50.0], 0.05, &SimOptions::default()).unwrap();
    assert!(res.l2[2] < res.l2[1]);
}

/// `(u, v)` of the damped wave `u_tt − b u_xx + u_t = 0` with `u_t(0) = −v_x(0)`,
/// by leapfrog in time on a naive discrete Fourier transform.
fn leapfrog(u0: &[f64], v0: &[f64], b: f64, length: f64, t_end: f64, tau: f64) -> Vec<f64> {
    let n = u0.len();
    let dft = |f: &[f64]| -> Vec<Complex64> {
        (0..n)
            .map(|k| (0..n).map(|j| f[j] * Complex64::from_polar(1.0, -2.0 * PI * (k * j) as f64 / n as f64)).sum())
            .collect()
    };
    let (uh, vh) = (dft(u0), dft(v0));
    let steps = (t_end / tau).round() as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        if 2 * k == n {
            continue;
        }
        let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = 2.0 * PI * kk / length;
        let w2 = b * xi * xi;
        let ut = -Complex64::new(0.0, xi) * vh[k];
        let utt = -w2 * uh[k] - ut;
        let mut prev = uh[k];
        let mut cur = uh[k] + ut * tau + utt * (0.5 * tau * tau);
        for _ in 1..steps {
            let next = (cur * (2.0 - w2 * tau * tau) - prev * (1.0 - 0.5 * tau)) / (1.0 + 0.5 * tau);
            prev = cur;
            cur = next;
        }
        out[k] = cur;
    }
    (0..n)
        .map(|j| {
            let z: Complex64 = (0..n).map(|k| out[k] * Complex64::from_polar(1.0, 2.0 * PI * (k * j) as f64 / n as f64)).sum();
            z.re / n as f64
        })
        .collect()
}

#[test]
fn zero_flux_jinxin_is_a_damped_wave() {
    let b = 2.0;
    let jx = scalar_jinxin(b, &[]);
    let grid = PeriodicGrid::new(1, 64, 20.0).unwrap();
    let mut u0 = init::gaussian(&grid, 2, 1.0, 1.5, Some(0));
    u0[1] = init::gaussian(&grid, 1, 0.4, 2.5, None).remove(0);
    let t_end = 2.0;
    let reference = leapfrog(&u0[0], &u0[1], b, grid.length, t_end, 1e-4);
    let errors: Vec<f64> = [0.04, 0.02]
        .iter()
        .map(|&dt| {
            let res = sim::simulate_jinxin(&jx, &grid, &u0, &[t_end], dt, &SimOptions::default()).unwrap();
            max_diff(&res.final_field[0], &reference)
        })
        .collect();
    assert!(errors[0] < 1e-3, "{errors:?}");
    assert!(errors[0] / errors[1] > 3.5, "{errors:?}");
}

#[test]
fn damped_wave_energy_decreases() {
    let b = 2.0;
    let jx = scalar_jinxin(b, &[]);
    let grid = PeriodicGrid::new(1, 128, 30.0).unwrap();
    let u0 = init::gaussian(&grid, 2, 1.0, 1.0, Some(0));
    let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    let opts = SimOptions { record_fields: true, ..SimOptions::default() };
    let res = sim::simulate_jinxin(&jx, &grid, &u0, &times, 0.025, &opts).unwrap();
    let fft = Transform::new(grid);
    let deriv = |f: &[f64]| {
        let mut h = fft.forward_real(f);
        for (k, z) in h.iter_mut().enumerate() {
            *z *= Complex64::new(0.0, grid.xi(k)[0]);
        }
        fft.inverse_real(&h)
    };
    let energy: Vec<f64> = res
        .fields
        .iter()
        .map(|f| {
            let ut = deriv(&f[1]);
            let ux = deriv(&f[0]);
            ut.iter().zip(&ux).map(|(a, x)| a * a + b * x * x).sum::<f64>() * grid.dx()
        })
        .collect();
    for (i, w) in energy.windows(2).enumerate() {
        if res.times[i] >= 1.0 {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{energy:?}");
        }
    }
    assert!(energy.last().unwrap() < &(0.5 * energy[2]));
}

#[test]
fn snapshots_round_trip_through_disk() {
    let grid = PeriodicGrid::new(1, 32, 5.0).unwrap();
    let u0 = init::gaussian(&grid, 2, 1.0, 0.7, None);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.hbl");
    sim::snapshot::write(&p, &grid, 0.5, &u0).unwrap();
    let (d, n, l, t, f) = sim::snapshot::decode(&std::fs::read(&p).unwrap()).unwrap();
    assert_eq!((d, n, l, t), (1, 32, 5.0, 0.5));
    assert_eq!(f, u0);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]

    #[test]
    fn flat_index_round_trips(d in 1usize..=3, f in 0usize..4096) {
        let grid = PeriodicGrid::new(d, if d == 3 { 16 } else { 32 }, 1.0).unwrap();
        let f = f % grid.len();
        proptest::prop_assert_eq!(grid.flat_index(&grid.multi_index(f)), f);
    }

    #[test]
    fn exact_propagation_is_linear(alpha in -2.0..2.0f64, seed in 0u64..1000, t in 0.0..5.0f64) {
        let grid = PeriodicGrid::new(1, 32, 10.0).unwrap();
        let a = init::band_limited_noise(&grid, 2, 1.0, 8, seed, None);
        let b = init::gaussian(&grid, 2, 1.0, 1.0, Some(1));
        let mix: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| alpha * p + q).collect()).collect();
        let run = |u: &Vec<Vec<f64>>| sim::simulate_linear(&telegraph(), &grid, u, &[t], &SimOptions::default()).unwrap().final_field;
        let (ra, rb, rm) = (run(&a), run(&b), run(&mix));
        for i in 0..2 {
            let want: Vec<f64> = ra[i].iter().zip(&rb[i]).map(|(p, q)| alpha * p + q).collect();
            proptest::prop_assert!(max_diff(&rm[i], &want) < 1e-12);
        }
    }
}
