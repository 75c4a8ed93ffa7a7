use llg_calib::aao;
use llg_calib::config::{add_noise, RunConfig};
use llg_calib::grid::Grid;
use llg_calib::observation::{self, Fourier, Measurements};
use llg_calib::reduced::DomainBall;
use llg_calib::vec3::{add, cross, scale, solve_shifted_cross};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (3usize..9, 3usize..9, 0.5f64..5.0, 0.5f64..5.0).prop_map(|(nx, ny, lx, ly)| Grid::new(nx, ny, lx, ly).unwrap())
}

fn field_for(g: Grid) -> impl Strategy<Value = (Grid, Vec<[f64; 3]>)> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), g.len()).prop_map(move |f| (g, f))
}

fn measurements(n_conc: usize, n_coils: usize, nt: usize) -> impl Strategy<Value = Measurements> {
    prop::collection::vec(-1e3f64..1e3, n_conc * n_coils * (nt + 1)).prop_map(move |v| {
        let mut m = Measurements::zeros(n_conc, n_coils, nt, 1.0 / nt as f64);
        for (ch, tr) in m.channels.iter_mut().enumerate() {
            tr.copy_from_slice(&v[ch * (nt + 1)..(ch + 1) * (nt + 1)]);
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_self_adjoint_and_kills_constants(
        (g, u) in grid_strategy().prop_flat_map(field_for),
        v_seed in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let v: Vec<[f64; 3]> = (0..g.len()).map(|k| {
            let (x, y) = g.point(k);
            [v_seed[0] * x.sin(), v_seed[1] * y * y, v_seed[2] + x * y]
        }).collect();
        let (lu, lv) = (g.laplacian(&u).unwrap(), g.laplacian(&v).unwrap());
        let (a, b) = (g.inner(&lu, &v), g.inner(&u, &lv));
        prop_assert!((a - b).abs() <= 1e-11 * (1.0 + g.norm(&lu) * g.norm(&v)));
        let c = g.laplacian(&vec![v_seed; g.len()]).unwrap();
        prop_assert!(c.iter().flatten().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn index_and_coordinates_are_inverse(g in grid_strategy()) {
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            prop_assert_eq!(g.index(i, j), k);
        }
    }

    #[test]
    fn shifted_cross_system_is_solved(
        c in 0.1f64..5.0, d in -5.0f64..5.0,
        n in prop::array::uniform3(-2.0f64..2.0), r in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let x = solve_shifted_cross(c, d, n, r);
        let back = add(scale(c, x), scale(d, cross(n, x)));
        for k in 0..3 {
            prop_assert!((back[k] - r[k]).abs() <= 1e-10 * (1.0 + r[k].abs()));
        }
    }

    #[test]
    fn i2_vanishes_at_both_ends(w in prop::collection::vec(-100.0f64..100.0, 3..300), dt in 1e-4f64..1.0) {
        let v = aao::i2(&w, dt);
        prop_assert_eq!(v[0], 0.0);
        prop_assert!(v[w.len() - 1].abs() <= 1e-12 * (1.0 + w.iter().map(|x| x.abs()).sum::<f64>() * dt * dt));
    }

    #[test]
    fn noise_hits_the_requested_level_and_is_reproducible(
        clean in measurements(2, 2, 16), delta_rel in 1e-4f64..0.5, seed in any::<u64>(),
    ) {
        prop_assume!(clean.norm() > 0.0);
        let (a, da) = add_noise(&clean, delta_rel, seed);
        let (b, db) = add_noise(&clean, delta_rel, seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(da, db);
        prop_assert!((a.sub(&clean).norm() / clean.norm() - delta_rel).abs() <= 1e-10);
        prop_assert!((da - a.sub(&clean).norm()).abs() <= 1e-12 * da.max(1.0));
        let (z, dz) = add_noise(&clean, 0.0, seed);
        prop_assert_eq!(z, clean);
        prop_assert_eq!(dz, 0.0);
    }

    #[test]
    fn measurement_csv_round_trips(m in measurements(1, 3, 7)) {
        let mut buf = vec![];
        m.write_csv(&mut buf).unwrap();
        prop_assert_eq!(Measurements::read_csv(&buf[..]).unwrap(), m);
    }

    #[test]
    fn ball_projection_is_idempotent_and_inside(
        center in (0.5f64..3.0, -1.0f64..1.0), radius in 0.1f64..0.4, a in prop::array::uniform2(-10.0f64..10.0),
    ) {
        let ball = DomainBall::new([center.0, center.1], radius).unwrap();
        let p = ball.project(a);
        prop_assert!(ball.contains(p));
        let q = ball.project(p);
        prop_assert!((q[0] - p[0]).abs() <= 1e-12 && (q[1] - p[1]).abs() <= 1e-12);
    }

    #[test]
    fn transfer_functions_are_periodic(
        period in 0.1f64..5.0, mean in -1.0f64..1.0,
        cos in prop::collection::vec(-1.0f64..1.0, 0..4), sin in prop::collection::vec(-1.0f64..1.0, 0..4),
        t in -10.0f64..10.0, k in -3i32..4,
    ) {
        let a = Fourier { period, mean, cos, sin };
        prop_assert!((a.value(t + k as f64 * period) - a.value(t)).abs() <= 1e-12 * (1.0 + k.abs() as f64) * 10.0);
    }

    #[test]
    fn voltages_are_linear_in_the_rates(s in -3.0f64..3.0, seed in prop::array::uniform3(-1.0f64..1.0)) {
        let cfg = RunConfig::desk().coarsened(2).unwrap();
        let setup = cfg.coil_setup().unwrap();
        let g = cfg.grid;
        let nt = cfg.time.nt;
        let rates: Vec<Vec<[f64; 3]>> = (0..nt).map(|n| g.sample(|x, y| {
            let t = n as f64;
            [seed[0] * (x + t).sin(), seed[1] * y, seed[2] * (t * 0.1).cos()]
        })).collect();
        let scaled: Vec<Vec<[f64; 3]>> = rates.iter().map(|f| f.iter().map(|v| scale(s, *v)).collect()).collect();
        let a = observation::apply_k(&setup, &rates, cfg.dt()).unwrap().scaled(s);
        let b = observation::apply_k(&setup, &scaled, cfg.dt()).unwrap();
        prop_assert!(a.sub(&b).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn time_windows_cover_every_sample_once(cuts in prop::collection::btree_set(1usize..31, 0..6)) {
        let nt = 32;
        let dt = 1.0 / nt as f64;
        let mut bp = vec![0.0];
        bp.extend(cuts.iter().map(|&c| c as f64 * dt));
        bp.push(1.0);
        let w = observation::time_windows(&bp, nt, dt).unwrap();
        let mut count = vec![0; nt + 1];
        for s in &w {
            if let observation::Selection::Samples { start, end } = s {
                for c in &mut count[*start..*end] {
                    *c += 1;
                }
            }
        }
        prop_assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn config_json_round_trips(nt_mult in 1usize..4, delta in 0.0f64..0.1, seed in any::<u64>(), tau in 1.01f64..3.0) {
        let mut c = RunConfig::desk();
        c.time.nt *= nt_mult;
        c.noise.delta_rel = delta;
        c.noise.seed = seed;
        c.solver.tau = tau;
        let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}
