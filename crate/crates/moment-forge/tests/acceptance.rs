//! Acceptance suite: one test per end-to-end guarantee of the library.
//!
//! Each test prints a single `[acceptance] criterion N (...): PASS — ...`
//! line with the measured margins after its assertions hold, so a plain
//! `cargo test --test acceptance -- --nocapture` doubles as a numerical
//! report. All randomness is seeded; reruns are bit-identical.

use moment_forge::assign::{solve_moment, AssignmentProblem};
use moment_forge::himat;
use moment_forge::linalg::{
    solve_sylvester, spectra_disjoint, vec_mat, ComplexMatrix, RealMatrix, Spectrum, Tolerances,
};
use moment_forge::model::ModelParts;
use moment_forge::moment::{
    closed_loop_matrices, closed_loop_moment, k_moment, open_loop_moment, transfer_apply,
    transfer_matrix, Compensator, JordanForm, Plant, SignalGenerator, TransferMethod,
};
use moment_forge::pipeline::{
    run_analyze, run_assign, run_synthesize, SynthOptions, SynthesizeOutcome,
};
use moment_forge::synth::{build_augmented, pbh_detectable, pbh_stabilizable, StabilizerParams};
use nalgebra::DVector;
use num_complex::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

// ---------------------------------------------------------------------------
// Shared random-model helpers
// ---------------------------------------------------------------------------

fn mat(rng: &mut StdRng, rows: usize, cols: usize, scale: f64) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Random dense matrix shifted so its spectral abscissa equals `target`.
fn matrix_with_abscissa(rng: &mut StdRng, n: usize, target: f64) -> RealMatrix {
    let raw = mat(rng, n, n, 1.0);
    let shift = Spectrum::of(&raw).unwrap().abscissa() - target;
    raw - RealMatrix::identity(n, n) * shift
}

/// Random skew-symmetric matrix: every eigenvalue sits on the imaginary
/// axis, the canonical spectrum for persistent reference/disturbance modes.
fn skew(rng: &mut StdRng, nu: usize) -> RealMatrix {
    let raw = mat(rng, nu, nu, 1.5);
    (&raw - raw.transpose()) * 0.5
}

/// Random plant with the prescribed dimensions and spectral abscissa.
fn random_plant(rng: &mut StdRng, n: usize, m: usize, p: usize, q: usize, absc: f64) -> Plant {
    Plant::new(
        matrix_with_abscissa(rng, n, absc),
        mat(rng, n, m, 1.0),
        mat(rng, p, n, 1.0),
        mat(rng, p, m, 0.3),
        mat(rng, n, q, 1.0),
        mat(rng, p, q, 0.3),
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// Criterion 1 — closed-loop moment decomposition
// ---------------------------------------------------------------------------

/// Over ≥200 randomized (plant, generator, compensator) triples with
/// verified spectral disjointness, the closed-loop moment splits exactly
/// into the open-loop moment plus the transferred compensator moment:
/// ‖M_cl − M_open − T_S(M_c)‖ ≤ 1e-8·(1 + ‖M_cl‖).
#[test]
fn criterion_1_closed_loop_moment_decomposition() {
    let tol = Tolerances::default();
    let mut rng = StdRng::seed_from_u64(0x11);
    let mut done = 0usize;
    let mut attempts = 0usize;
    let mut worst = 0.0f64;
    while done < 200 {
        attempts += 1;
        assert!(
            attempts < 4000,
            "random sampling failed to produce 200 admissible triples"
        );
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=2);
        let p = rng.random_range(1..=2);
        let q = rng.random_range(1..=2);
        let nu = rng.random_range(1..=3);
        let rho = rng.random_range(1..=3);
        let plant = random_plant(&mut rng, n, m, p, q, -0.4);
        let gen = SignalGenerator::new(skew(&mut rng, nu), mat(&mut rng, q, nu, 1.0)).unwrap();
        let comp = Compensator::new(
            matrix_with_abscissa(&mut rng, rho, -0.4),
            mat(&mut rng, rho, p, 0.4),
            mat(&mut rng, m, rho, 0.4),
        )
        .unwrap();
        // Admit only triples where both Sylvester problems are comfortably
        // solvable: σ(A) and σ(A_cl) each clearly disjoint from σ(S).
        let cl = closed_loop_matrices(&plant, &comp).unwrap();
        let (open_ok, open_gap) = spectra_disjoint(plant.a(), gen.s(), &tol).unwrap();
        let (cl_ok, cl_gap) = spectra_disjoint(&cl.a_cl, gen.s(), &tol).unwrap();
        if !open_ok || !cl_ok || open_gap < 1e-3 || cl_gap < 1e-3 {
            continue;
        }
        let (m_open, _) = open_loop_moment(&plant, &gen, &tol).unwrap();
        let (m_cl, m_c, _, _) = closed_loop_moment(&plant, &gen, &comp, &tol).unwrap();
        let transferred = transfer_apply(&plant, gen.s(), &m_c.value, &tol).unwrap();
        let defect = (&m_cl.value - &m_open.value - &transferred).norm();
        let bound = 1e-8 * (1.0 + m_cl.value.norm());
        assert!(
            defect <= bound,
            "triple #{done}: decomposition defect {defect:.3e} exceeds {bound:.3e}"
        );
        worst = worst.max(defect / (1.0 + m_cl.value.norm()));
        done += 1;
    }
    println!(
        "[acceptance] criterion 1 (closed-loop moment decomposition): PASS — \
         {done} random triples ({attempts} sampled), worst relative defect {worst:.3e}"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2 — transfer-operator construction routes agree
// ---------------------------------------------------------------------------

/// The basis-probe and eigenstructure constructions of the moment transfer
/// operator agree entrywise to 1e-8, on (a) dense diagonalizable generators
/// with mixed real and complex-pair eigenvalues, and (b) a defective
/// (nilpotent Jordan block) generator, where the declared-structure route
/// must also match the closed-form action M ↦ η₀(0)·M + η₁(0)·M·(−S).
#[test]
fn criterion_2_transfer_operator_routes_agree() {
    let tol = Tolerances::default();
    let mut rng = StdRng::seed_from_u64(0x22);

    let mut worst_diag = 0.0f64;
    for trial in 0..20 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=2);
        let p = rng.random_range(1..=2);
        let plant = random_plant(&mut rng, n, m, p, 1, -1.0);
        // One real mode plus one rotation pair, mixed by a well-conditioned
        // similarity so the generator matrix is dense.
        let lam = rng.random_range(-0.5..0.5);
        let re = rng.random_range(-0.3..0.3);
        let wr = rng.random_range(0.5..2.0);
        let core = RealMatrix::from_row_slice(
            3,
            3,
            &[lam, 0.0, 0.0, 0.0, re, wr, 0.0, -wr, re],
        );
        let v = RealMatrix::identity(3, 3) + mat(&mut rng, 3, 3, 0.25);
        let v_inv = v.clone().try_inverse().expect("similarity is invertible");
        let s = &v * core * v_inv;
        let probe = transfer_matrix(&plant, &s, TransferMethod::BasisProbe, &tol).unwrap();
        let auto = transfer_matrix(&plant, &s, TransferMethod::JordanAuto, &tol).unwrap();
        let diff = (&probe.matrix_form - &auto.matrix_form).amax();
        assert!(
            diff <= 1e-8,
            "trial {trial}: probe vs eigenstructure differ by {diff:.3e}"
        );
        worst_diag = worst_diag.max(diff);
    }

    let mut worst_defective = 0.0f64;
    for trial in 0..8 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=2);
        let p = rng.random_range(1..=2);
        let plant = random_plant(&mut rng, n, m, p, 1, -1.0);
        let s = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let declared = transfer_matrix(
            &plant,
            &s,
            TransferMethod::JordanDeclared(JordanForm {
                blocks: vec![(Complex::new(0.0, 0.0), 2)],
                transform: None,
            }),
            &tol,
        )
        .unwrap();
        let probe = transfer_matrix(&plant, &s, TransferMethod::BasisProbe, &tol).unwrap();
        let diff = (&declared.matrix_form - &probe.matrix_form).amax();
        assert!(
            diff <= 1e-8,
            "defective trial {trial}: declared vs probe differ by {diff:.3e}"
        );
        worst_defective = worst_defective.max(diff);

        // Closed-form action for a single nilpotent block at the origin.
        let eta0 = k_moment(&plant, Complex::new(0.0, 0.0), 0, &tol)
            .unwrap()
            .to_real(&tol)
            .unwrap();
        let eta1 = k_moment(&plant, Complex::new(0.0, 0.0), 1, &tol)
            .unwrap()
            .to_real(&tol)
            .unwrap();
        for _ in 0..3 {
            let m_in = mat(&mut rng, m, 2, 1.0);
            let closed_form = &eta0 * &m_in + &eta1 * &m_in * (-&s);
            let applied = probe.apply(&m_in).unwrap();
            let adiff = (&applied - &closed_form).amax();
            assert!(
                adiff <= 1e-8,
                "defective trial {trial}: closed-form action differs by {adiff:.3e}"
            );
            worst_defective = worst_defective.max(adiff);
        }
    }

    println!(
        "[acceptance] criterion 2 (transfer-operator routes agree): PASS — \
         diagonalizable worst {worst_diag:.3e}, defective-block worst {worst_defective:.3e}"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3 — k-moments match numerical derivatives
// ---------------------------------------------------------------------------

/// Order-6 central finite-difference estimate of η_k(s*) = (−1)^k/k!·W^(k)(s*),
/// evaluated through the library's own frequency response (its k = 0 moment).
/// Step sizes are tuned per order so truncation and rounding balance well
/// below the acceptance tolerance.
fn fd_k_moment(plant: &Plant, s_star: Complex<f64>, k: usize, tol: &Tolerances) -> ComplexMatrix {
    let w = |z: Complex<f64>| k_moment(plant, z, 0, tol).unwrap().value;
    let (h, center, taps): (f64, f64, &[(f64, f64)]) = match k {
        1 => (1e-3, 0.0, &[(1.0, 0.75), (2.0, -0.15), (3.0, 1.0 / 60.0)]),
        2 => (
            1e-2,
            -49.0 / 18.0,
            &[(1.0, 1.5), (2.0, -0.15), (3.0, 1.0 / 90.0)],
        ),
        3 => (
            1e-2,
            0.0,
            &[
                (1.0, -61.0 / 30.0),
                (2.0, 169.0 / 120.0),
                (3.0, -0.3),
                (4.0, 7.0 / 240.0),
            ],
        ),
        _ => unreachable!("only orders 1..=3 are checked"),
    };
    let antisymmetric = k % 2 == 1;
    let mut acc = w(s_star) * Complex::new(center, 0.0);
    for &(off, weight) in taps {
        let dz = Complex::new(off * h, 0.0);
        let plus = w(s_star + dz);
        let minus = w(s_star - dz);
        let signed = if antisymmetric { plus - minus } else { plus + minus };
        acc += signed * Complex::new(weight, 0.0);
    }
    let derivative = acc / Complex::new(h.powi(k as i32), 0.0);
    // (−1)^k / k!
    let scale = (0..k).fold(1.0f64, |f, i| f * -1.0 / (i as f64 + 1.0));
    derivative * Complex::new(scale, 0.0)
}

/// The closed-form k-moments η_k(s*) agree with finite-difference
/// derivatives of the frequency response to 1e-6, for k ≤ 3, at points on
/// and off the imaginary axis, across ≥50 random plants.
#[test]
fn criterion_3_k_moments_match_numerical_derivatives() {
    let tol = Tolerances::default();
    let mut rng = StdRng::seed_from_u64(0x33);
    let points = [
        Complex::new(0.0, 0.0),
        Complex::new(0.0, 0.7),
        Complex::new(0.5, 1.1),
    ];
    let mut worst = [0.0f64; 3];
    let mut plants = 0usize;
    for _ in 0..55 {
        // Abscissa −1.5 keeps every evaluation point at distance ≥ 1.5 from
        // the poles, so the difference stencils stay well inside the domain
        // of analyticity.
        let plant = random_plant(&mut rng, 4, 2, 2, 1, -1.5);
        for &s_star in &points {
            for k in 1..=3usize {
                let closed = k_moment(&plant, s_star, k, &tol).unwrap().value;
                let fd = fd_k_moment(&plant, s_star, k, &tol);
                let diff = (&closed - &fd).map(|z| z.norm()).max();
                assert!(
                    diff <= 1e-6,
                    "order {k} at s* = {s_star}: closed form vs stencil differ by {diff:.3e}"
                );
                worst[k - 1] = worst[k - 1].max(diff);
            }
        }
        plants += 1;
    }
    println!(
        "[acceptance] criterion 3 (k-moments vs numerical derivatives): PASS — \
         {plants} plants × {} points, worst by order: {:.3e} / {:.3e} / {:.3e}",
        points.len(),
        worst[0],
        worst[1],
        worst[2]
    );
}

// ---------------------------------------------------------------------------
// Shared synthesized-instance builder (criteria 4 and 9)
// ---------------------------------------------------------------------------

struct SynthCase {
    label: String,
    parts: ModelParts,
    outcome: SynthesizeOutcome,
    exact: bool,
    m_des: RealMatrix,
}

/// A reproducible batch of synthesized closed loops: randomized square
/// plants (generically exactly assignable), one tall plant (least-squares
/// fallback), and the aircraft demo model.
fn synthesized_cases(seed: u64) -> Vec<SynthCase> {
    let tol = Tolerances::default();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cases = Vec::new();

    let mut produced = 0usize;
    let mut attempts = 0usize;
    while produced < 12 {
        attempts += 1;
        assert!(
            attempts < 400,
            "failed to sample enough synthesizable random plants"
        );
        let n = rng.random_range(2..=4);
        let mp = rng.random_range(1..=2);
        let nu = rng.random_range(1..=2);
        let plant = random_plant(&mut rng, n, mp, mp, nu, -0.5);
        let gen =
            SignalGenerator::new(skew(&mut rng, nu), RealMatrix::identity(nu, nu)).unwrap();
        let m_des = mat(&mut rng, mp, nu, 0.8);
        let g_a = if produced % 2 == 0 {
            None
        } else {
            Some(mat(&mut rng, nu, mp, 0.3))
        };
        let parts = ModelParts {
            plant,
            gen,
            m_des: None,
            weights: None,
        };
        let analyze = match run_analyze(&parts, &tol) {
            Ok(a) => a,
            Err(_) => continue,
        };
        if !analyze.stability.synthesizable() {
            continue;
        }
        let assign = match run_assign(&parts, &analyze.m_open, &m_des, &tol) {
            Ok(a) => a,
            Err(_) => continue,
        };
        if !assign.solution.exact {
            continue;
        }
        let opts = SynthOptions {
            g_a,
            params: StabilizerParams {
                decay: 0.4,
                ..Default::default()
            },
            require_exact: false,
        };
        let outcome = match run_synthesize(&parts, &assign, &opts, &tol) {
            Ok(o) => o,
            Err(_) => continue,
        };
        cases.push(SynthCase {
            label: format!("square-{produced}"),
            parts,
            outcome,
            exact: true,
            m_des,
        });
        produced += 1;
    }

    // Tall plant: two tracked outputs, one input — the assignment falls back
    // to least squares, but the structural guarantees must hold unchanged.
    let plant = random_plant(&mut rng, 3, 1, 2, 2, -0.8);
    let gen = SignalGenerator::new(skew(&mut rng, 2), RealMatrix::identity(2, 2)).unwrap();
    let m_des = mat(&mut rng, 2, 2, 1.0);
    let parts = ModelParts {
        plant,
        gen,
        m_des: None,
        weights: None,
    };
    let analyze = run_analyze(&parts, &tol).unwrap();
    let assign = run_assign(&parts, &analyze.m_open, &m_des, &tol).unwrap();
    assert!(
        !assign.solution.exact,
        "tall instance should not be exactly assignable"
    );
    let opts = SynthOptions {
        g_a: None,
        params: StabilizerParams {
            decay: 0.4,
            ..Default::default()
        },
        require_exact: false,
    };
    let outcome = run_synthesize(&parts, &assign, &opts, &tol).unwrap();
    cases.push(SynthCase {
        label: "tall-least-squares".into(),
        parts,
        outcome,
        exact: false,
        m_des,
    });

    // The aircraft demo model.
    let demo = himat::run_demo(himat::DemoTarget::Track, &tol).unwrap();
    cases.push(SynthCase {
        label: "aircraft-demo".into(),
        parts: himat::model_parts(),
        outcome: demo.synthesize,
        exact: true,
        m_des: himat::m_des_track(),
    });

    cases
}

// ---------------------------------------------------------------------------
// Criterion 4 — synthesized compensators embed the assigned moment
// ---------------------------------------------------------------------------

/// For every synthesized compensator, the joint steady-state solution has
/// the structure the construction promises: the compensator block splits
/// into an exact copy of the generator state (Π_ξa = I) and a vanishing
/// auxiliary block (Π_ξb = 0), both to 1e-8; and when the assignment was
/// exact the closed-loop moment equals the requested one to 1e-7.
#[test]
fn criterion_4_synthesized_compensators_embed_the_moment() {
    let tol = Tolerances::default();
    let cases = synthesized_cases(0x44);
    let mut worst_gate = 0.0f64;
    let mut worst_moment = 0.0f64;
    let mut exact_count = 0usize;
    for case in &cases {
        let plant = &case.parts.plant;
        let gen = &case.parts.gen;
        let nu = gen.nu();
        let rho = case.outcome.flat.rho();
        let (m_cl, _, _, pi_xi) = closed_loop_moment(plant, gen, &case.outcome.flat, &tol).unwrap();
        let gate_identity = (pi_xi.rows(0, nu) - RealMatrix::identity(nu, nu)).norm();
        let gate_auxiliary = pi_xi.rows(nu, rho - nu).norm();
        assert!(
            gate_identity <= 1e-8,
            "{}: generator-copy block deviates from identity by {gate_identity:.3e}",
            case.label
        );
        assert!(
            gate_auxiliary <= 1e-8,
            "{}: auxiliary block has nonzero steady state {gate_auxiliary:.3e}",
            case.label
        );
        worst_gate = worst_gate.max(gate_identity).max(gate_auxiliary);
        if case.exact {
            let deviation = (&m_cl.value - &case.m_des).norm();
            assert!(
                deviation <= 1e-7,
                "{}: closed-loop moment misses the assigned target by {deviation:.3e}",
                case.label
            );
            worst_moment = worst_moment.max(deviation);
            exact_count += 1;
        }
    }
    assert!(exact_count >= 10, "too few exactly-assigned instances");
    println!(
        "[acceptance] criterion 4 (synthesized compensators embed the moment): PASS — \
         {} instances ({exact_count} exact), worst structure gate {worst_gate:.3e}, \
         worst exact-moment deviation {worst_moment:.3e}",
        cases.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 5 — augmented-system tests match the plant-level predicates
// ---------------------------------------------------------------------------

/// PBH stabilizability/detectability of the augmented system coincides with
/// the plant-level predicates: stabilizable(A_aug, B_aug) ⟺ stabilizable(A, B),
/// and detectable(C_aug, A_aug) ⟺ detectable(C, A) ∧ detectable(M_open, S),
/// across randomized instances (stable and unstable, zero and nonzero
/// injection gain) and on constructed failures of each kind.
#[test]
fn criterion_5_augmented_tests_match_plant_predicates() {
    let tol = Tolerances::default();
    let mut rng = StdRng::seed_from_u64(0x55);

    let mut checked = 0usize;
    let mut attempts = 0usize;
    while checked < 50 {
        attempts += 1;
        assert!(attempts < 1000, "failed to sample 50 admissible instances");
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=2);
        let p = rng.random_range(1..=2);
        let nu = rng.random_range(1..=2);
        // Mix comfortably stable and clearly unstable plants so both PBH
        // branches are exercised away from the decision boundary.
        let absc = if rng.random_range(0..2) == 0 { -0.6 } else { 0.4 };
        let plant = random_plant(&mut rng, n, m, p, nu, absc);
        let gen =
            SignalGenerator::new(skew(&mut rng, nu), RealMatrix::identity(nu, nu)).unwrap();
        let (disjoint, gap) = spectra_disjoint(plant.a(), gen.s(), &tol).unwrap();
        if !disjoint || gap < 0.05 {
            continue;
        }
        let (m_open, _) = open_loop_moment(&plant, &gen, &tol).unwrap();
        let m_c = mat(&mut rng, m, nu, 0.8);
        let transferred = transfer_apply(&plant, gen.s(), &m_c, &tol).unwrap();
        let m_eff = &m_open.value + transferred;
        let g_a = if checked % 2 == 0 {
            RealMatrix::zeros(nu, p)
        } else {
            mat(&mut rng, nu, p, 0.4)
        };
        let aug = build_augmented(&plant, &gen, &m_eff, &m_c, &g_a).unwrap();

        let (stab_plant, _) = pbh_stabilizable(plant.a(), plant.b(), &tol).unwrap();
        let (det_plant, _) = pbh_detectable(plant.c(), plant.a(), &tol).unwrap();
        let (det_pair, _) = pbh_detectable(&m_open.value, gen.s(), &tol).unwrap();
        let (stab_aug, _) = pbh_stabilizable(&aug.a_aug, &aug.b_aug, &tol).unwrap();
        let (det_aug, _) = pbh_detectable(&aug.c_aug, &aug.a_aug, &tol).unwrap();

        assert_eq!(
            stab_aug, stab_plant,
            "instance {checked}: augmented stabilizability disagrees with the plant test"
        );
        assert_eq!(
            det_aug,
            det_plant && det_pair,
            "instance {checked}: augmented detectability disagrees with the combined test"
        );
        checked += 1;
    }

    // Constructed failure: uncontrollable unstable mode.
    {
        let plant = Plant::new(
            RealMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, -1.0]),
            RealMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            RealMatrix::identity(2, 2),
            RealMatrix::zeros(2, 1),
            RealMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            RealMatrix::zeros(2, 1),
        )
        .unwrap();
        let gen =
            SignalGenerator::new(RealMatrix::zeros(1, 1), RealMatrix::identity(1, 1)).unwrap();
        let (m_open, _) = open_loop_moment(&plant, &gen, &tol).unwrap();
        let m_c = RealMatrix::from_row_slice(1, 1, &[0.3]);
        let transferred = transfer_apply(&plant, gen.s(), &m_c, &tol).unwrap();
        let m_eff = &m_open.value + transferred;
        let aug =
            build_augmented(&plant, &gen, &m_eff, &m_c, &RealMatrix::zeros(1, 2)).unwrap();
        let (stab_plant, _) = pbh_stabilizable(plant.a(), plant.b(), &tol).unwrap();
        let (stab_aug, _) = pbh_stabilizable(&aug.a_aug, &aug.b_aug, &tol).unwrap();
        let (det_aug, _) = pbh_detectable(&aug.c_aug, &aug.a_aug, &tol).unwrap();
        assert!(!stab_plant, "fixture's unstable mode should be uncontrollable");
        assert!(!stab_aug, "augmented test must flag the uncontrollable mode");
        assert!(det_aug, "fixture is detectable on both counts");
    }

    // Constructed failure: unobserved unstable plant mode.
    {
        let plant = Plant::new(
            RealMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, -1.0]),
            RealMatrix::identity(2, 2),
            RealMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            RealMatrix::zeros(1, 2),
            RealMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            RealMatrix::zeros(1, 1),
        )
        .unwrap();
        let gen =
            SignalGenerator::new(RealMatrix::zeros(1, 1), RealMatrix::identity(1, 1)).unwrap();
        let (m_open, _) = open_loop_moment(&plant, &gen, &tol).unwrap();
        let (det_pair, _) = pbh_detectable(&m_open.value, gen.s(), &tol).unwrap();
        assert!(det_pair, "moment pair of this fixture should be detectable");
        let m_c = RealMatrix::from_row_slice(2, 1, &[0.2, -0.4]);
        let transferred = transfer_apply(&plant, gen.s(), &m_c, &tol).unwrap();
        let m_eff = &m_open.value + transferred;
        let aug =
            build_augmented(&plant, &gen, &m_eff, &m_c, &RealMatrix::zeros(1, 1)).unwrap();
        let (det_plant, _) = pbh_detectable(plant.c(), plant.a(), &tol).unwrap();
        let (det_aug, _) = pbh_detectable(&aug.c_aug, &aug.a_aug, &tol).unwrap();
        let (stab_aug, _) = pbh_stabilizable(&aug.a_aug, &aug.b_aug, &tol).unwrap();
        assert!(!det_plant, "fixture's unstable mode should be unobserved");
        assert!(!det_aug, "augmented test must flag the unobserved mode");
        assert!(stab_aug, "fixture is stabilizable");
    }

    // Constructed failure: transmission zero on a generator eigenvalue.
    // W(s) = s/((s+1)(s+2)) vanishes at the origin, so the open-loop moment
    // for a constant disturbance is zero and the moment pair loses
    // detectability even though the plant itself is stable and minimal.
    {
        let plant = Plant::new(
            RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            RealMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            RealMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            RealMatrix::zeros(1, 1),
            RealMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            RealMatrix::zeros(1, 1),
        )
        .unwrap();
        let gen =
            SignalGenerator::new(RealMatrix::zeros(1, 1), RealMatrix::identity(1, 1)).unwrap();
        let (m_open, _) = open_loop_moment(&plant, &gen, &tol).unwrap();
        assert!(
            m_open.value.amax() <= 1e-12,
            "transmission zero should null the open-loop moment"
        );
        let (det_pair, _) = pbh_detectable(&m_open.value, gen.s(), &tol).unwrap();
        assert!(!det_pair, "moment pair must lose detectability at the zero");
        let m_c = RealMatrix::from_row_slice(1, 1, &[0.5]);
        let transferred = transfer_apply(&plant, gen.s(), &m_c, &tol).unwrap();
        let m_eff = &m_open.value + transferred;
        let aug =
            build_augmented(&plant, &gen, &m_eff, &m_c, &RealMatrix::zeros(1, 1)).unwrap();
        let (det_plant, _) = pbh_detectable(plant.c(), plant.a(), &tol).unwrap();
        let (det_aug, _) = pbh_detectable(&aug.c_aug, &aug.a_aug, &tol).unwrap();
        assert!(det_plant, "the plant itself is detectable");
        assert!(
            !det_aug,
            "augmented test must flag the transmission-zero obstruction"
        );
    }

    println!(
        "[acceptance] criterion 5 (augmented tests match plant predicates): PASS — \
         {checked} random instances agree, all three constructed failures flagged"
    );
}

// ---------------------------------------------------------------------------
// Criterion 6 — aircraft tracking demo
// ---------------------------------------------------------------------------

/// The aircraft demo synthesizes a stabilizing compensator whose closed
/// loop carries the requested tracking moment exactly, and the simulated
/// outputs lock onto the commanded sinusoid-plus-step reference: the
/// steady-state tracking error over the trailing window is ≤ 1e-6.
#[test]
fn criterion_6_aircraft_tracking_demo() {
    let tol = Tolerances::default();
    let started = std::time::Instant::now();
    let demo = himat::run_demo(himat::DemoTarget::Track, &tol).unwrap();
    let elapsed = started.elapsed();
    assert!(demo.hurwitz_ok(), "closed loop must be Hurwitz");
    assert!(demo.exact_ok(), "tracking moment must be exactly assignable");
    let deviation = demo.synthesize.deviation_from_requested;
    assert!(
        deviation <= 1e-7,
        "closed-loop moment deviates from the tracking target by {deviation:.3e}"
    );
    let tail = demo.simulate.max_tail_error;
    assert!(
        tail <= 1e-6,
        "steady-state tracking error {tail:.3e} exceeds 1e-6"
    );
    println!(
        "[acceptance] criterion 6 (aircraft tracking demo): PASS — \
         abscissa {:.4}, moment deviation {deviation:.3e}, tail error {tail:.3e}, \
         elapsed {elapsed:.2?}",
        demo.synthesize.closed_spectrum.abscissa()
    );
}

// ---------------------------------------------------------------------------
// Criterion 7 — aircraft output regulation
// ---------------------------------------------------------------------------

/// With the zero moment assigned, the synthesized loop solves the output
/// regulation problem: the regulation identities hold (checked through the
/// library and re-derived independently here), and the simulated output
/// decays to zero despite the persistent disturbance.
#[test]
fn criterion_7_aircraft_output_regulation() {
    let tol = Tolerances::default();
    let demo = himat::run_demo(himat::DemoTarget::Zero, &tol).unwrap();
    assert_eq!(
        demo.regulation_check,
        Some(true),
        "library regulation check must accept the zero-moment solution"
    );
    let tail = demo.simulate.max_tail_error;
    assert!(tail <= 1e-6, "output fails to vanish: tail {tail:.3e}");

    // Independent residual: recover the compensator moment from the
    // assembled loop, solve the steady-state equation directly, and check
    // the regulation identity C·Π + D·M_c + Q·L = 0.
    let plant = himat::plant();
    let gen = himat::generator();
    let (m_cl, m_c, _, _) =
        closed_loop_moment(&plant, &gen, &demo.synthesize.flat, &tol).unwrap();
    let rhs = plant.b() * &m_c.value + plant.p_mat() * gen.l();
    let pi = solve_sylvester(gen.s(), plant.a(), &rhs, &tol).unwrap();
    let residual =
        (plant.c() * &pi + plant.d() * &m_c.value + plant.q_mat() * gen.l()).norm();
    assert!(
        residual <= 1e-8,
        "regulation identity residual {residual:.3e} exceeds 1e-8"
    );
    let moment_norm = m_cl.value.norm();
    assert!(
        moment_norm <= 1e-7,
        "closed-loop moment should vanish, got ‖M_cl‖ = {moment_norm:.3e}"
    );
    println!(
        "[acceptance] criterion 7 (aircraft output regulation): PASS — \
         identity residual {residual:.3e}, ‖M_cl‖ {moment_norm:.3e}, tail error {tail:.3e}"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8 — least-squares fallback
// ---------------------------------------------------------------------------

/// When the requested moment is unattainable, the solver returns the
/// weighted least-squares best fit: its residual matches an independently
/// assembled dense solve to 1e-8, the reported effective moment is
/// consistent, and the squared objective is first-order stationary at the
/// returned compensator moment under random perturbations.
#[test]
fn criterion_8_least_squares_fallback() {
    let tol = Tolerances::default();
    let mut rng = StdRng::seed_from_u64(0x88);
    let (n, m, p, nu) = (3usize, 1usize, 2usize, 2usize);
    let plant = random_plant(&mut rng, n, m, p, nu, -0.8);
    let gen = SignalGenerator::new(skew(&mut rng, nu), RealMatrix::identity(nu, nu)).unwrap();
    let (m_open, _) = open_loop_moment(&plant, &gen, &tol).unwrap();
    let m_des = mat(&mut rng, p, nu, 1.0);
    let delta = &m_des - &m_open.value;
    let b = vec_mat(&delta);

    let op = transfer_matrix(&plant, gen.s(), TransferMethod::BasisProbe, &tol).unwrap();
    let t_dense = op.matrix_form.clone();

    let variants: [(&str, Option<DVector<f64>>); 2] = [
        ("uniform", None),
        (
            "weighted",
            Some(DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])),
        ),
    ];
    let mut reported = Vec::new();
    for (name, weights) in variants {
        // Independent dense oracle: scale rows by √w and solve the normal
        // equations with a plain LU factorization.
        let w = weights
            .clone()
            .unwrap_or_else(|| DVector::from_element(p * nu, 1.0));
        let w_sqrt = w.map(f64::sqrt);
        let mut tw = t_dense.clone();
        let mut bw = b.clone();
        for i in 0..p * nu {
            tw.row_mut(i).scale_mut(w_sqrt[i]);
            bw[i] *= w_sqrt[i];
        }
        let normal = tw.transpose() * &tw;
        let rhs = tw.transpose() * &bw;
        let x_oracle = normal.lu().solve(&rhs).expect("normal equations solve");
        let oracle_residual = (&tw * &x_oracle - &bw).norm();

        let problem =
            AssignmentProblem::new(plant.clone(), gen.clone(), m_des.clone(), weights).unwrap();
        let solution = solve_moment(&problem, &tol).unwrap();
        assert!(
            !solution.exact,
            "{name}: a tall problem must not report an exact assignment"
        );
        let residual_gap = (solution.residual - oracle_residual).abs();
        assert!(
            residual_gap <= 1e-8,
            "{name}: solver residual {:.6e} vs oracle {:.6e} (gap {residual_gap:.3e})",
            solution.residual,
            oracle_residual
        );

        // The reported effective moment must be the open-loop moment lifted
        // by exactly the returned compensator moment.
        let x_lib = vec_mat(&solution.m_c.value);
        let eff_gap = (vec_mat(&(&solution.m_des_effective - &m_open.value))
            - &t_dense * &x_lib)
            .norm();
        assert!(
            eff_gap <= 1e-8,
            "{name}: effective moment inconsistent with the dense operator ({eff_gap:.3e})"
        );

        // First-order stationarity of f(x) = ‖√W·(T·x − b)‖ at the solution.
        let objective = |x: &DVector<f64>| (&tw * x - &bw).norm();
        let f0 = objective(&x_lib);
        assert!(
            (f0 - solution.residual).abs() <= 1e-8,
            "{name}: reported residual does not match the objective at M_c"
        );
        for trial in 0..20 {
            for eps in [1e-3, 1e-4] {
                let d = DVector::from_fn(m * nu, |_, _| rng.random_range(-1.0..1.0_f64));
                let d = &d / d.norm();
                let f1 = objective(&(&x_lib + d * eps));
                assert!(
                    f1 + 1e-10 >= f0,
                    "{name}: perturbation {trial} at step {eps} lowered the objective \
                     ({f1:.12e} < {f0:.12e})"
                );
            }
        }
        reported.push(format!("{name} residual {:.6e}", solution.residual));
    }
    println!(
        "[acceptance] criterion 8 (least-squares fallback): PASS — {}, \
         oracle agreement ≤ 1e-8, stationary under 40 perturbations each",
        reported.join(", ")
    );
}

// ---------------------------------------------------------------------------
// Criterion 9 — separation of design spectra
// ---------------------------------------------------------------------------

/// Greedy nearest-neighbour multiset matching; returns the largest pairing
/// distance (robust when true pairs are far tighter than inter-eigen gaps).
fn match_multisets(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for &la in a {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, &lb) in b.iter().enumerate() {
            if !used[j] {
                let d = (la - lb).norm();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        used[best] = true;
        worst = worst.max(best_d);
    }
    worst
}

/// The closed-loop spectrum is exactly the union of the two design spectra
/// (state feedback and observer), as multisets, to 1e-6 — the separation
/// property of the construction.
#[test]
fn criterion_9_separation_of_design_spectra() {
    let cases = synthesized_cases(0x99);
    let mut worst = 0.0f64;
    for case in &cases {
        let closed = case.outcome.closed_spectrum.eigenvalues();
        let mut designed: Vec<Complex<f64>> =
            case.outcome.state_spectrum.eigenvalues().to_vec();
        designed.extend_from_slice(case.outcome.observer_spectrum.eigenvalues());
        assert_eq!(
            closed.len(),
            designed.len(),
            "{}: eigenvalue counts differ",
            case.label
        );
        let gap = match_multisets(closed, &designed);
        assert!(
            gap <= 1e-6,
            "{}: closed-loop spectrum differs from the designed union by {gap:.3e}",
            case.label
        );
        worst = worst.max(gap);
    }
    println!(
        "[acceptance] criterion 9 (separation of design spectra): PASS — \
         {} instances, worst multiset mismatch {worst:.3e}",
        cases.len()
    );
}
