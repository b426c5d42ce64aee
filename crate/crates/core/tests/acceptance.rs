//! Acceptance suite. Prints one `criterion N PASS|FAIL` line per criterion and
//! exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nematic_or::boundary::{hexagon_bc, square_scalar_bc, truncated_square_bc};
use nematic_or::cli::perturbed_cross;
use nematic_or::field::ScalarField;
use nematic_or::flow::FlowConfig;
use nematic_or::full_flow::{biaxiality_map, evolve_full, hexagon_initial, ring_separates};
use nematic_or::grid::{hexagon_grid, square_grid, truncated_square_grid, GridDomain};
use nematic_or::scalar_flow::{evolve, layer_pattern, saddle_solve, SaddleFrame, ScalarFlow};
use nematic_or::flow::FlowSystem;
use nematic_or::sharp_interface::{
    j_functional, large_lambda_consistency, phi, surface_tension, Phase, TwoPhaseField,
};
use nematic_or::stability::eigensolve_mu;
use nematic_or::sweep::{
    default_threshold, detect_critical, mu_sign_change, sweep_hexagon, sweep_square, CONSISTENCY_MARGIN,
    DEFAULT_PERTURBATION,
};
use nematic_or::tensor::{MaterialParams, PTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_SQUARE: usize = 65;
const EPS: f64 = 0.0625;
const SQUARE_LADDER: [f64; 14] = [0.05, 1.0, 2.0, 4.0, 6.0, 8.0, 8.5, 9.0, 9.5, 10.0, 11.0, 15.0, 50.0, 200.0];
const SQUARE_WINDOW: (f64, f64) = (8.0, 10.5);

const N_HEX_STATE: usize = 65;
const N_HEX_SWEEP: usize = 33;
const HEX_LADDER: [f64; 7] = [1e-6, 5e-4, 1e-3, 2e-3, 3e-3, 4e-3, 1e-2];
const HEX_WINDOW: (f64, f64) = (0.001, 0.004);

const SEED: u64 = 20240607;

/// Relative energy increase attributed to floating-point summation near a
/// steady state, where successive energies agree to ~15 digits.
const ROUNDOFF: f64 = 1e-12;

/// Comma-separated criterion numbers to run; all when unset.
const ONLY_ENV: &str = "NEMATIC_OR_CRITERIA";

type Criterion = fn(&mut Shared) -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Shared {
    params: MaterialParams,
    square: Arc<GridDomain>,
    cfg: FlowConfig,
    square_estimate: Option<f64>,
}

fn square_bc(s: &Shared) -> nematic_or::boundary::ScalarBc {
    square_scalar_bc(&s.square, EPS, &s.params).unwrap()
}

fn criterion1(s: &mut Shared) -> Outcome {
    let bc = square_bc(s);
    let rec = sweep_square(&SQUARE_LADDER, s.square.clone(), &bc, &s.params, &s.cfg, DEFAULT_PERTURBATION).unwrap();
    let unconverged = rec.iter().filter(|r| !r.converged).count();
    match detect_critical(&rec, default_threshold(&s.params), &[]) {
        Ok(c) => {
            s.square_estimate = Some(c.lambda_bar_sq);
            let pass = c.lambda_bar_sq >= SQUARE_WINDOW.0 && c.lambda_bar_sq <= SQUARE_WINDOW.1;
            verdict(
                pass,
                format!(
                    "critical lambda_bar_sq = {:.4} (bracket {:?}), window [{}, {}], unconverged points {}",
                    c.lambda_bar_sq, c.bracket, SQUARE_WINDOW.0, SQUARE_WINDOW.1, unconverged
                ),
            )
        }
        Err(e) => verdict(false, format!("no estimate: {e}")),
    }
}

fn criterion2(s: &Shared) -> Outcome {
    let bc = square_bc(s);
    let q0 = perturbed_cross(s.square.clone(), &s.params, DEFAULT_PERTURBATION).unwrap();
    let r = evolve(&q0, &bc, 0.05, &s.params, &s.cfg).unwrap();
    let a = s.params.scalar_well();
    let frame = SaddleFrame::for_grid(&s.square).unwrap();
    let g = &s.square;
    let mut diag_max = 0.0f64;
    let mut worst_sign = f64::INFINITY;
    for k in 0..g.len() {
        if !(g.is_interior(k) || g.is_boundary(k)) {
            continue;
        }
        let (x, y) = g.xy(k);
        let q = r.field.value(k);
        if frame.on_nodal_line(x, y) {
            diag_max = diag_max.max(q.abs());
        }
        worst_sign = worst_sign.min(frame.sign(x, y) * q);
    }
    let pass = r.diagnostics.converged() && diag_max < 1e-3 * a && worst_sign >= -1e-6;
    verdict(
        pass,
        format!(
            "max |q| on diagonals = {diag_max:.3e} (< {:.3e}), min (y^2-x^2) q = {worst_sign:.3e} (>= -1e-6), converged {}",
            1e-3 * a,
            r.diagnostics.converged()
        ),
    )
}

fn criterion3(s: &Shared) -> Outcome {
    let bc = square_bc(s);
    let q0 = perturbed_cross(s.square.clone(), &s.params, DEFAULT_PERTURBATION).unwrap();
    let r = evolve(&q0, &bc, 200.0, &s.params, &s.cfg).unwrap();
    let a = s.params.scalar_well();
    let q00 = r.field.at_origin();
    let layers = layer_pattern(&r.field, 0.2);
    let pass = r.diagnostics.converged() && q00.abs() > 0.5 * a && layers.is_some();
    verdict(pass, format!("|q(0,0)| = {:.6} (> {:.6}), layers {:?}", q00.abs(), 0.5 * a, layers))
}

fn criterion4(s: &Shared) -> Outcome {
    let p = &s.params;
    let g = Arc::new(hexagon_grid(N_HEX_STATE, 0.0).unwrap());
    let bc = hexagon_bc(&g, p).unwrap();
    let q0 = hexagon_initial(g.clone(), p).unwrap();
    let r = evolve_full(&q0, &bc, p, 1e-6, &s.cfg).unwrap();
    let o = r.field.at_origin();
    let third = p.b() / (6.0 * p.c());
    let (mut q33, mut q13, mut q23) = (0.0f64, 0.0f64, 0.0f64);
    for (k, v) in r.field.values().iter().enumerate() {
        if g.is_interior(k) || g.is_boundary(k) {
            q33 = q33.max((v.q33() + 2.0 * third).abs());
            q13 = q13.max(v.0[2].abs());
            q23 = q23.max(v.0[4].abs());
        }
    }
    let beta = biaxiality_map(&r.field);
    let max_beta = beta.values().iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(*v));
    let ring = ring_separates(&beta, 0.9);
    let pass = r.diagnostics.converged()
        && o.0[1].abs() < 1e-3
        && (o.0[0] - third).abs() < 1e-3
        && q33 < 1e-8
        && q13 < 1e-8
        && q23 < 1e-8
        && ring;
    verdict(
        pass,
        format!(
            "n = {N_HEX_STATE}: |Q12(0)| = {:.3e}, |Q11(0)-B/6C| = {:.3e}, max|Q33+B/3C| = {q33:.1e}, max|Q13| = {q13:.1e}, max|Q23| = {q23:.1e}, max beta2 = {max_beta:.4}, ring {ring}",
            o.0[1].abs(),
            (o.0[0] - third).abs()
        ),
    )
}

fn criterion5(s: &Shared) -> Outcome {
    let p = &s.params;
    let g = Arc::new(hexagon_grid(N_HEX_SWEEP, 0.0).unwrap());
    let bc = hexagon_bc(&g, p).unwrap();
    let rec = sweep_hexagon(&HEX_LADDER, g, &bc, p, &s.cfg, DEFAULT_PERTURBATION).unwrap();
    let seven_l_over_c = 7.0 / p.c();
    match detect_critical(&rec, default_threshold(p), &[]) {
        Ok(c) => {
            let pass = c.lambda_bar_sq >= HEX_WINDOW.0 && c.lambda_bar_sq <= HEX_WINDOW.1;
            verdict(
                pass,
                format!(
                    "n = {N_HEX_SWEEP}: critical lambda_bar_sq = {:.5} (bracket {:?}), window [{}, {}], 7L/C in these units = {seven_l_over_c:.5}",
                    c.lambda_bar_sq, c.bracket, HEX_WINDOW.0, HEX_WINDOW.1
                ),
            )
        }
        Err(e) => verdict(false, format!("no estimate: {e}")),
    }
}

fn criterion6(s: &Shared) -> Outcome {
    let bc = square_bc(s);
    let mut mu = Vec::new();
    for &l in &SQUARE_LADDER {
        let sad = saddle_solve(l, s.square.clone(), &bc, &s.params, &s.cfg).unwrap();
        let e = eigensolve_mu(&sad.field, l / (2.0 * s.params.c()), &s.params).unwrap();
        mu.push((l, e.mu));
    }
    let decreasing = mu.windows(2).all(|w| w[1].1 < w[0].1);
    let Some((lo, hi, root)) = mu_sign_change(&mu) else {
        return verdict(false, format!("mu never changes sign: {mu:?}"));
    };
    let Some(est) = s.square_estimate else {
        return verdict(false, format!("mu changes sign in [{lo}, {hi}] but criterion 1 produced no estimate"));
    };
    let agree = est >= lo * (1.0 - CONSISTENCY_MARGIN) && est <= hi * (1.0 + CONSISTENCY_MARGIN);
    verdict(
        agree && decreasing,
        format!(
            "mu changes sign in [{lo}, {hi}] (root {root:.4}); probe estimate {est:.4}; strictly decreasing {decreasing}"
        ),
    )
}

fn max_principle(q: &ScalarField, lo: f64, hi: f64) -> bool {
    q.values().iter().all(|v| *v >= lo - 1e-6 && *v <= hi + 1e-6)
}

fn criterion7(s: &Shared) -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let p = &s.params;
    let a = p.scalar_well();

    // energy monotonicity and maximum principle, scalar flow
    let g33 = Arc::new(square_grid(33).unwrap());
    let bc33 = square_scalar_bc(&g33, EPS, p).unwrap();
    for l in [0.05, 9.0, 200.0] {
        let q0 = perturbed_cross(g33.clone(), p, DEFAULT_PERTURBATION).unwrap();
        let cfg = FlowConfig { record_every: 1, ..s.cfg };
        let r = evolve(&q0, &bc33, l, p, &cfg).unwrap();
        if let Some((step, inc)) = r.diagnostics.worst_energy_increase().filter(|(_, inc)| *inc > ROUNDOFF) {
            failures.push(format!("scalar energy rose by {inc:e} at step {step}, lambda {l}"));
        }
        if !max_principle(&r.field, -a, a) {
            failures.push(format!("maximum principle violated at lambda {l}"));
        }
    }

    // energy monotonicity and manifold invariance, tensor flow
    let gh = Arc::new(hexagon_grid(33, 0.0).unwrap());
    let bch = hexagon_bc(&gh, p).unwrap();
    let q0 = hexagon_initial(gh.clone(), p).unwrap();
    let cfg = FlowConfig { record_every: 1, t_max: 2.0, ..s.cfg };
    let r = evolve_full(&q0, &bch, p, 5e-3, &cfg).unwrap();
    if let Some((step, inc)) = r.diagnostics.worst_energy_increase().filter(|(_, inc)| *inc > ROUNDOFF) {
        failures.push(format!("tensor energy rose by {inc:e} at step {step}"));
    }
    let worst_manifold = r.diagnostics.records.iter().flat_map(|d| d.extra.iter().copied()).fold(0.0f64, f64::max);
    if !(worst_manifold <= 1e-10) {
        failures.push(format!("left the planar manifold by {worst_manifold:e}"));
    }

    // 2x2 identity
    let mut worst_id = 0.0f64;
    for _ in 0..1000 {
        let pt = PTensor::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let d = pt.square_defect();
        worst_id = worst_id.max(d[0][0].abs()).max(d[0][1].abs()).max(d[1][1].abs());
    }
    if worst_id > 1e-14 {
        failures.push(format!("PP - |P|^2 I/2 reached {worst_id:e}"));
    }

    // phi and k
    let k = surface_tension(p);
    let k_phi = phi(-a, a, p);
    if ((k - k_phi) / k).abs() > 1e-12 {
        failures.push(format!("phi(-a, a) = {k_phi} vs k = {k}"));
    }

    // lowest Dirichlet eigenvalue
    let zero = ScalarField::zeros(s.square.clone());
    let e0 = eigensolve_mu(&zero, 0.0, p).unwrap();
    let target = std::f64::consts::PI.powi(2) / 2.0;
    if ((e0.mu - target) / target).abs() > 0.02 {
        failures.push(format!("Laplacian ground state {} vs {target}", e0.mu));
    }

    // saddle residual on the full grid, axes included
    let bc = square_bc(s);
    for l in [1.0, 50.0] {
        let sad = saddle_solve(l, s.square.clone(), &bc, p, &s.cfg).unwrap();
        let flow = ScalarFlow::new(s.square.clone(), &bc, l, p).unwrap();
        let st = flow.state(&sad.field);
        let mut out = vec![0.0; st.len()];
        flow.rhs(&st, &mut out);
        let res = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(res < s.cfg.steady_tol) {
            failures.push(format!("saddle residual {res:e} at lambda {l}"));
        }
    }

    // pitchfork branches are mirror images
    let frame = SaddleFrame::for_grid(&g33).unwrap();
    let plus = perturbed_cross(g33.clone(), p, DEFAULT_PERTURBATION).unwrap();
    let minus = perturbed_cross(g33.clone(), p, -DEFAULT_PERTURBATION).unwrap();
    let rp = evolve(&plus, &bc33, 9.0, p, &s.cfg).unwrap();
    let rm = evolve(&minus, &bc33, 9.0, p, &s.cfg).unwrap();
    let mut mirror_err = 0.0f64;
    for kk in 0..g33.len() {
        if g33.is_interior(kk) {
            let m = frame.mirror(&g33, kk);
            mirror_err = mirror_err.max((rm.field.value(kk) + rp.field.value(m)).abs());
        }
    }
    let split = (rp.field.at_origin() - rm.field.at_origin()).abs();
    if !(mirror_err < 1e-6) || split < 0.1 * a {
        failures.push(format!("branches: mirror error {mirror_err:e}, origin split {split:e}"));
    }

    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "all property checks hold (mu_0 = {:.5} vs pi^2/2, mirror error {mirror_err:.1e}, manifold {worst_manifold:.1e})",
                e0.mu
            )
        } else {
            failures.join("; ")
        },
    )
}

fn criterion8(s: &Shared) -> Outcome {
    let p200 = s.params.with_size(nematic_or::tensor::SizeParam::Scalar(200.0)).unwrap();
    let g = Arc::new(truncated_square_grid(N_SQUARE, EPS).unwrap());
    let bc = truncated_square_bc(&g, &p200).unwrap();
    let k = surface_tension(&p200);
    let j_const = j_functional(&TwoPhaseField::constant(g.clone(), Phase::Plus), &bc, &p200).unwrap().total;
    let cross_bound = 4.0 * k * (1.0 - EPS);
    let q0 = perturbed_cross(g.clone(), &p200, DEFAULT_PERTURBATION).unwrap();
    let r = evolve(&q0, &bc, 200.0, &p200, &s.cfg).unwrap();
    let rep = large_lambda_consistency(&r.field, &bc, &p200, 200.0, 1e-3 * p200.scalar_well()).unwrap();
    let zero_tol = 1e-3 * p200.scalar_well();
    let obs = j_functional(&TwoPhaseField::threshold(&r.field, zero_tol), &bc, &p200).unwrap();
    let cross = j_functional(&TwoPhaseField::saddle_cross(g.clone()).unwrap(), &bc, &p200).unwrap();
    let pass = j_const < cross_bound && rep.applicable && rep.holds;
    verdict(
        pass,
        format!(
            "k = {k:.4e}, J(B/2C)/k = {:.4} < 4(1-eps) = {:.4}; J(observed)/k = {:.4} (perimeter {:.4}, boundary/k {:.4}), J(cross)/k = {:.4} (perimeter {:.4}, boundary/k {:.4}), q(0,0) = {:.4}, cross agreement {:.3}, applicable {}",
            j_const / k,
            cross_bound / k,
            obs.total / k,
            obs.perimeter,
            obs.boundary / k,
            cross.total / k,
            cross.perimeter,
            cross.boundary / k,
            r.field.at_origin(),
            rep.cross_agreement,
            rep.applicable
        ),
    )
}

fn main() -> ExitCode {
    let params = MaterialParams::standard();
    let mut shared = Shared {
        params,
        square: Arc::new(square_grid(N_SQUARE).unwrap()),
        cfg: FlowConfig::default(),
        square_estimate: None,
    };
    let mut all = true;
    let criteria: [(usize, Criterion); 8] = [
        (1, criterion1),
        (2, |s| criterion2(s)),
        (3, |s| criterion3(s)),
        (4, |s| criterion4(s)),
        (5, |s| criterion5(s)),
        (6, |s| criterion6(s)),
        (7, |s| criterion7(s)),
        (8, |s| criterion8(s)),
    ];
    let only: Option<Vec<usize>> =
        std::env::var(ONLY_ENV).ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    for (n, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            println!("criterion {n} SKIPPED: not selected by {ONLY_ENV}");
            continue;
        }
        let t = Instant::now();
        let o = f(&mut shared);
        all &= o.pass;
        println!(
            "criterion {n} {}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
