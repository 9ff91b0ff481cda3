//! Path diagnostics for damped eigenvalue tracks along spin (scratch).

use magrod::branches::{
    branch_point_events, solution_at, switch_primary, trivial_branch, BranchOpts,
};
use magrod::eigen::{eigen_init, refine_mode, track_eigenvalue, EigenOpts};
use magrod::model::RodParams;
use magrod::stationary::PARAM_OMEGA;
use magrod_bvp::{ContinuationOpts, NewtonOpts, StepOpts};

#[test]
#[ignore]
fn rotating_damping_oracle() {
    // Nearly isotropic straight rod below its first critical speed:
    // internal damping splits the whirl pair so that the descending
    // (co-rotating) branch has lambda_r ~= (gamma mu / 2)(omega - mu)
    // and the ascending branch lambda_r ~= -(gamma mu / 2)(omega + mu),
    // with mu the mean bending frequency. Tracks both and compares.
    use magrod::stationary::{trivial_solution, Stationary, PARAM_B};
    use magrod_bvp::Mesh;

    let params = RodParams {
        r: 0.9,
        ..RodParams::electrodynamic_tether()
    };
    let sys = Stationary::new(&params);
    let mesh = Mesh::uniform(20, 4).unwrap();
    let mut loads = Stationary::load_vector(&params);
    loads[PARAM_B] = 0.0;
    let base = trivial_solution(&sys, mesh, loads);

    let eopts = EigenOpts {
        n_grid: 600,
        ..EigenOpts::default()
    };
    let modes = eigen_init(&params, &base, 2, &eopts).unwrap();
    let damped = RodParams {
        damping: 0.01,
        ..params
    };
    let mu_mean = 0.5 * (modes[0].lambda.1 + modes[1].lambda.1);
    for (i, m) in modes.iter().enumerate() {
        let refined = refine_mode(&damped, m.sol.clone(), &eopts.newton).unwrap();
        println!(
            "mode {i}: gamma 0 lambda_i {:.6} -> gamma 0.01 lambda = ({:+.6e}, {:.6})",
            m.lambda.1, refined.lambda.0, refined.lambda.1
        );
        let topts = ContinuationOpts {
            step: StepOpts {
                initial: 0.02,
                min: 1e-9,
                max: 0.05,
                max_steps: 200,
            },
            newton: NewtonOpts::default(),
            range: (0.0, 0.8),
            locate_tol: 1e-8,
            detect_det_dips: false,
            dip_threshold: 1.5,
            stop_on_closure: false,
            null_tol: 1e-5,
        };
        let tr = track_eigenvalue(&damped, &refined, i, PARAM_OMEGA, topts).unwrap();
        let path = tr.lambda_path(PARAM_OMEGA);
        for (k, (w, lr, li)) in path.iter().enumerate() {
            if k % 4 == 0 || k + 1 == path.len() {
                let pred = if i == 0 {
                    0.01 * mu_mean / 2.0 * (w - mu_mean)
                } else {
                    -0.01 * mu_mean / 2.0 * (w + mu_mean)
                };
                println!(
                    "  mode {i} omega {w:6.3}  lr {lr:+.4e}  (classical {pred:+.4e})  li {li:.4}"
                );
            }
        }
    }
}

#[test]
#[ignore]
fn gamma_scaling_of_the_first_hump() {
    let params = RodParams::electrodynamic_tether();
    let opts = BranchOpts {
        mesh_intervals: 16,
        ..BranchOpts::default()
    };
    let trivial = trivial_branch(&params, (0.5, 0.65), &opts).unwrap();
    let bp = branch_point_events(&trivial)[0];
    let germ = switch_primary(&params, bp, 0, &opts).unwrap();
    let b1 = germ.run(&params, (bp.param, 1.25), &opts).unwrap();
    let base = solution_at(&params, &b1, 1.2, &opts).unwrap();

    let eopts = EigenOpts {
        n_grid: 600,
        ..EigenOpts::default()
    };
    let modes = eigen_init(&params, &base, 2, &eopts).unwrap();
    for damping in [0.003, 0.01] {
        let p = RodParams { damping, ..params };
        let mode = refine_mode(&p, modes[0].sol.clone(), &eopts.newton).unwrap();
        let topts = ContinuationOpts {
            step: StepOpts {
                initial: 0.02,
                min: 1e-9,
                max: 0.05,
                max_steps: 300,
            },
            newton: NewtonOpts::default(),
            range: (0.0, 2.2),
            locate_tol: 1e-8,
            detect_det_dips: false,
            dip_threshold: 1.5,
            stop_on_closure: false,
            null_tol: 1e-5,
        };
        let tr = track_eigenvalue(&p, &mode, 0, PARAM_OMEGA, topts).unwrap();
        println!("gamma {damping}: stop {:?}", tr.branch.stop);
        for (k, (w, lr, li)) in tr.lambda_path(PARAM_OMEGA).iter().enumerate() {
            if k % 6 == 0 {
                println!(
                    "  gamma {damping} omega {w:6.3}  lr/gamma {:+.4}  li {li:.4}",
                    lr / damping
                );
            }
        }
        for h in &tr.hopf {
            println!("  gamma {damping} crossing at omega {:.4}", h.param);
        }
    }
}

#[test]
#[ignore]
fn hump_height_versus_field() {
    let params = RodParams::electrodynamic_tether();
    let opts = BranchOpts {
        mesh_intervals: 16,
        ..BranchOpts::default()
    };
    let trivial = trivial_branch(&params, (0.5, 0.65), &opts).unwrap();
    let bp = branch_point_events(&trivial)[0];
    let germ = switch_primary(&params, bp, 0, &opts).unwrap();
    let b1 = germ.run(&params, (bp.param, 1.92), &opts).unwrap();
    let eopts = EigenOpts {
        n_grid: 600,
        ..EigenOpts::default()
    };
    let damped = RodParams {
        damping: 0.01,
        ..params
    };
    for b in [1.5, 1.8] {
        let base = solution_at(&params, &b1, b, &opts).unwrap();
        let modes = eigen_init(&params, &base, 2, &eopts).unwrap();
        for i in 0..2 {
            let mode = refine_mode(&damped, modes[i].sol.clone(), &eopts.newton).unwrap();
            let topts = ContinuationOpts {
                step: StepOpts {
                    initial: 0.02,
                    min: 1e-9,
                    max: 0.05,
                    max_steps: 300,
                },
                newton: NewtonOpts::default(),
                range: (0.0, 3.0),
                locate_tol: 1e-8,
                detect_det_dips: false,
                dip_threshold: 1.5,
                stop_on_closure: false,
                null_tol: 1e-5,
            };
            match track_eigenvalue(&damped, &mode, i, PARAM_OMEGA, topts) {
                Ok(tr) => {
                    let path = tr.lambda_path(PARAM_OMEGA);
                    let peak = path
                        .iter()
                        .cloned()
                        .fold((0.0, f64::NEG_INFINITY, 0.0), |acc, p| {
                            if p.1 > acc.1 {
                                p
                            } else {
                                acc
                            }
                        });
                    println!(
                        "B {b}: mode {i} (li0 {:.4}) stop {:?}, peak lr {:+.4e} at omega {:.3}, \
                         crossings {:?}",
                        modes[i].lambda.1,
                        tr.branch.stop,
                        peak.1,
                        peak.0,
                        tr.hopf.iter().map(|h| h.param).collect::<Vec<_>>()
                    );
                }
                Err(e) => println!("B {b}: mode {i} track failed: {e}"),
            }
        }
    }
}

#[test]
#[ignore]
fn long_range_track_extent() {
    // Where do the long tracks stall? Heavy damping over (0, 4) and the
    // second light mode over (0, 3.2) previously ran out of steps.
    let params = RodParams::electrodynamic_tether();
    let opts = BranchOpts {
        mesh_intervals: 16,
        ..BranchOpts::default()
    };
    let trivial = trivial_branch(&params, (0.5, 0.65), &opts).unwrap();
    let bp = branch_point_events(&trivial)[0];
    let germ = switch_primary(&params, bp, 0, &opts).unwrap();
    let b1 = germ.run(&params, (bp.param, 1.25), &opts).unwrap();
    let base = solution_at(&params, &b1, 1.2, &opts).unwrap();

    let eopts = EigenOpts {
        n_grid: 600,
        ..EigenOpts::default()
    };
    let modes = eigen_init(&params, &base, 2, &eopts).unwrap();
    for (damping, index, hi) in [(0.04375, 0usize, 4.0), (0.01, 1, 3.2)] {
        let p = RodParams { damping, ..params };
        let mode = refine_mode(&p, modes[index].sol.clone(), &eopts.newton).unwrap();
        let topts = ContinuationOpts {
            step: StepOpts {
                initial: 0.02,
                min: 1e-9,
                max: 0.05,
                max_steps: 3000,
            },
            newton: NewtonOpts::default(),
            range: (0.0, hi),
            locate_tol: 1e-8,
            detect_det_dips: false,
            dip_threshold: 1.5,
            stop_on_closure: false,
            null_tol: 1e-5,
        };
        let t0 = std::time::Instant::now();
        match track_eigenvalue(&p, &mode, index, PARAM_OMEGA, topts) {
            Ok(tr) => {
                let path = tr.lambda_path(PARAM_OMEGA);
                println!(
                    "gamma {damping} mode {index}: stop {:?}, {} points, {:.0} s",
                    tr.branch.stop,
                    path.len(),
                    t0.elapsed().as_secs_f64()
                );
                for (k, (w, lr, li)) in path.iter().enumerate() {
                    if k % 25 == 0 || k + 20 >= path.len() {
                        println!("  [{k:4}] omega {w:8.5}  lr {lr:+.6e}  li {li:+.6}");
                    }
                }
                for h in &tr.hopf {
                    println!("  crossing at omega {:.4}", h.param);
                }
            }
            Err(e) => println!("gamma {damping} mode {index}: track failed: {e}"),
        }
    }
}

#[test]
#[ignore]
fn damped_eigen_paths() {
    let params = RodParams::electrodynamic_tether();
    let opts = BranchOpts {
        mesh_intervals: 16,
        ..BranchOpts::default()
    };
    let trivial = trivial_branch(&params, (0.5, 0.65), &opts).unwrap();
    let bp = branch_point_events(&trivial)[0];
    let germ = switch_primary(&params, bp, 0, &opts).unwrap();
    let b1 = germ.run(&params, (bp.param, 1.25), &opts).unwrap();
    let base = solution_at(&params, &b1, 1.2, &opts).unwrap();

    let eopts = EigenOpts {
        n_grid: 600,
        ..EigenOpts::default()
    };
    let modes = eigen_init(&params, &base, 4, &eopts).unwrap();
    for (i, m) in modes.iter().enumerate() {
        println!("mode {i}: lambda_i = {:.6}", m.lambda.1);
    }
    let damped = RodParams {
        damping: 0.01,
        ..params
    };
    for i in 0..4 {
        let mode = refine_mode(&damped, modes[i].sol.clone(), &eopts.newton).unwrap();
        let topts = ContinuationOpts {
            step: StepOpts {
                initial: 0.02,
                min: 1e-9,
                max: 0.05,
                max_steps: 400,
            },
            newton: NewtonOpts::default(),
            range: (0.0, 2.5),
            locate_tol: 1e-8,
            detect_det_dips: false,
            dip_threshold: 1.5,
            stop_on_closure: false,
            null_tol: 1e-5,
        };
        match track_eigenvalue(&damped, &mode, i, PARAM_OMEGA, topts) {
            Ok(tr) => {
                println!(
                    "mode {i}: stop {:?}, {} points",
                    tr.branch.stop,
                    tr.branch.points.len()
                );
                let path = tr.lambda_path(PARAM_OMEGA);
                for (k, (w, lr, li)) in path.iter().enumerate() {
                    if k % 5 == 0 || *lr > -2e-3 || k + 1 == path.len() {
                        println!("  mode {i} [{k:4}] omega {w:8.4}  lr {lr:+.6e}  li {li:+.6}");
                    }
                }
                for e in &tr.branch.events {
                    println!("  mode {i} event {e:?}");
                }
            }
            Err(e) => println!("mode {i}: track failed: {e}"),
        }
    }
}
