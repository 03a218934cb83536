//! Release acceptance: one test per shipping criterion, each at its stated
//! tolerance, so running this target prints one verdict line per criterion.
//!
//! These checks are end-to-end. They drive the public library API and the
//! built binary, never internals, and every randomized draw is seeded, so a
//! rerun reproduces the exact same numbers.

use std::f64::consts::{PI, TAU};
use std::process::Command;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shkit::bounds::{compare_bounds, evaluate_bound, BoundParams};
use shkit::harness::{self, gen_compatible, gen_metric, run_suite, TrialConfig, VerificationReport};
use shkit::matrix::ComplexMatrix;
use shkit::operator::CompatibleOperator;
use shkit::space::{make_space, MetricSpace};
use shkit::C64;

/// Criteria carry wall-clock budgets, so they must not contend with each
/// other when the test harness runs multi-threaded.
fn gate() -> MutexGuard<'static, ()> {
    static GATE: OnceLock<Mutex<()>> = OnceLock::new();
    GATE.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shkit"))
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Standard complex Gaussian via Box–Muller (only the direction matters to
/// the samplers below, so the overall variance is irrelevant).
fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..TAU);
    let r = (-2.0 * u.ln()).sqrt();
    c(r * v.cos(), r * v.sin())
}

/// Uniform draw from the metric's unit sphere (quotient geometry): with
/// `g` isotropic on the range coordinates, `x = V_r Λ^{-1/2} g` has
/// `‖x‖_A = |g|` and a uniformly distributed quotient direction. Sampling
/// plain Gaussians in the ambient space would instead concentrate toward the
/// metric's dominant eigenvectors (the spread is up to four decades) and the
/// sample maximum would stall far below the supremum.
fn a_sphere_sample(space: &MetricSpace, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let basis = space.range_basis();
    let eigs = space.pos_eigs();
    let (n, r) = (space.dim(), space.rank());
    let mut x = vec![c(0.0, 0.0); n];
    for j in 0..r {
        let w = gaussian(rng) / eigs[j].sqrt();
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += basis.get(i, j) * w;
        }
    }
    x
}

fn apply(m: &ComplexMatrix, x: &[C64]) -> Vec<C64> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j) * x[j]).sum())
        .collect()
}

fn random_space(dim: usize, rank: usize, seed: u64) -> Arc<MetricSpace> {
    Arc::new(gen_metric(dim, rank, seed).expect("valid generator configuration"))
}

// ---------------------------------------------------------------------------
// Criterion 1 — identity suite across dimensions and rank deficiencies
// ---------------------------------------------------------------------------

/// Every registered structural identity holds with relative residual ≤ 1e-8
/// over 500 seeded trials for each dimension in {2,3,4,6} and each rank
/// deficiency in {0,1,2} (eleven valid combinations), inside a 60 s budget.
#[test]
fn criterion_1_identity_suite() {
    let _g = gate();
    let started = Instant::now();
    let expected_ids = harness::all_identity_ids();
    let mut configs = 0;
    for &dim in &[2usize, 3, 4, 6] {
        for deficiency in 0usize..=2 {
            if deficiency >= dim {
                continue; // the metric must keep at least rank one
            }
            let rank = dim - deficiency;
            let mut cfg = TrialConfig::new(dim, rank, 500, 0x1D_0000 + (dim * 16 + deficiency) as u64);
            cfg.bound_ids = Vec::new(); // identities only
            let report = run_suite(&cfg).expect("identity suite runs");
            assert!(
                report.trial_failures.is_empty(),
                "dim {dim} rank {rank}: {} trial(s) failed: {:?}",
                report.trial_failures.len(),
                report.trial_failures.first()
            );
            assert_eq!(report.identities.len(), expected_ids.len(), "dim {dim} rank {rank}");
            for (id, stats) in &report.identities {
                assert_eq!(stats.trials, 500, "identity {id} at dim {dim} rank {rank}");
                assert!(
                    stats.max_residual <= 1e-8,
                    "identity {id} at dim {dim} rank {rank}: residual {:.3e} exceeds 1e-8",
                    stats.max_residual
                );
            }
            assert!(report.all_hold, "dim {dim} rank {rank}");
            configs += 1;
        }
    }
    assert_eq!(configs, 11);
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "identity sweep took {elapsed:?}, budget is 60 s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2 — full bound suite through the binary
// ---------------------------------------------------------------------------

/// 500-trial verification runs at dimension 4, ranks 3 and 4, exit 0 with
/// zero violations across the whole registry — including the
/// λ-parameterized bound on its {0, 0.25, 0.5, 0.75, 1} grid plus random
/// draws — inside a 120 s budget.
#[test]
fn criterion_2_bound_suite() {
    let _g = gate();
    let started = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    for rank in [3usize, 4] {
        let out = dir.path().join(format!("report_rank{rank}.json"));
        let status = bin()
            .args(["verify", "--dim", "4", "--rank", &rank.to_string()])
            .args(["--trials", "500", "--seed", "42"])
            .arg("--out")
            .arg(&out)
            .status()
            .expect("binary runs");
        assert_eq!(status.code(), Some(0), "verify exit code at rank {rank}");

        let text = std::fs::read_to_string(&out).expect("report written");
        let report: VerificationReport = serde_json::from_str(&text).expect("report parses");
        assert!(report.all_hold, "rank {rank}");
        assert!(report.counterexamples.is_empty(), "rank {rank}");
        assert!(report.trial_failures.is_empty(), "rank {rank}");
        assert_eq!(
            report.bounds.len(),
            harness::all_bound_ids().len(),
            "every registered bound ran at rank {rank}"
        );
        for (id, stats) in &report.bounds {
            assert_eq!(stats.violations, 0, "bound {id} at rank {rank}");
            assert!(stats.trials >= 500, "bound {id} at rank {rank} ran {} times", stats.trials);
        }
        // λ grid {0, 0.25, 0.5, 0.75, 1} plus three random draws per trial.
        assert_eq!(report.bounds["thm101"].trials, 500 * 8, "λ coverage at rank {rank}");
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(120),
        "bound suite took {elapsed:?}, budget is 120 s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3 — sharpness comparisons
// ---------------------------------------------------------------------------

/// The refined four-block upper bound never exceeds the triangle-inequality
/// one on 500 fuzzed tuples, and the lower-bound corollary's right side never
/// exceeds the earlier catalog entry's when the tuple satisfies R = P, S = Q.
#[test]
fn criterion_3_sharper_comparisons() {
    let _g = gate();
    let shapes = [(2usize, 2usize), (3, 2), (3, 3), (4, 3), (4, 4), (5, 4), (6, 4), (2, 1), (5, 5), (6, 6)];
    for trial in 0..500u64 {
        let (dim, rank) = shapes[(trial as usize) % shapes.len()];
        let space = random_space(dim, rank, 0x30_0000 + trial);
        let gen_op = |salt: u64| {
            gen_compatible(&space, 0x31_0000 + 8 * trial + salt)
                .expect("generator succeeds")
                .matrix()
                .clone()
        };
        let (p, q, r, s) = (gen_op(1), gen_op(2), gen_op(3), gen_op(4));

        let tuple = [p.clone(), q.clone(), r, s];
        let rows = compare_bounds(
            &space,
            &["them100".into(), "them10".into()],
            &tuple,
            None,
            1e-8,
        )
        .expect("comparable tuple");
        let rhs_of = |id: &str| rows.iter().find(|b| b.bound_id == id).expect("row present").rhs;
        let (refined, triangle) = (rhs_of("them100"), rhs_of("them10"));
        assert!(
            refined <= triangle + 1e-10 * (1.0 + triangle.abs()),
            "trial {trial} (dim {dim} rank {rank}): them100 rhs {refined} > them10 rhs {triangle}"
        );

        // Same operand in both off-diagonal roles: R = P, S = Q.
        let constrained = [p.clone(), q.clone(), p, q];
        let rows = compare_bounds(
            &space,
            &["cor100".into(), "kk2020".into()],
            &constrained,
            None,
            1e-8,
        )
        .expect("comparable tuple");
        let rhs_of = |id: &str| rows.iter().find(|b| b.bound_id == id).expect("row present").rhs;
        let (corollary, earlier) = (rhs_of("cor100"), rhs_of("kk2020"));
        assert!(
            corollary <= earlier + 1e-10 * (1.0 + earlier.abs()),
            "trial {trial} (dim {dim} rank {rank}): cor100 rhs {corollary} > kk2020 rhs {earlier}"
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 4 — oracle equivalence
// ---------------------------------------------------------------------------

/// The three headline quantities agree with independent oracles on 100
/// seeded instances each:
///
/// * numerical radius vs. a 10⁵-sample Rayleigh maximum (a lower bound;
///   must land within 1% below the computed value, never above);
/// * numerical radius vs. a literal 1024-point rotation grid of
///   `‖re/im-part(e^{iθ}T)‖_A`, within the grid's own quantization error:
///   the grid lower-bounds the supremum by at most `ω·(1 − cos(π/1024))`
///   (≈ 4.7e-6·ω, peak exactly between adjacent grid points), so the
///   acceptance window is `max(1e-6·(1+ω), that quantization term)` plus a
///   small floating-point allowance;
/// * operator seminorm vs. the same sampling scheme;
/// * spectral radius vs. the Gelfand iterate `‖T^k‖_A^{1/k}`, with `k`
///   doubled (squaring in range coordinates) until two successive iterates
///   agree to 1e-4 — then the converged value must match within 1e-3.
///
/// Instances keep rank ≤ 3 so that 10⁵ random directions reliably land
/// within 1% of the extremal one; relative tolerances then make sense.
#[test]
fn criterion_4_oracle_equivalence() {
    let _g = gate();
    const SAMPLES: usize = 100_000;
    for i in 0..100u64 {
        let dim = [2usize, 3, 4, 5][(i % 4) as usize];
        let rank = (2 + (i % 2) as usize).min(dim);
        let space = random_space(dim, rank, 0x40_0000 + i);
        let t = gen_compatible(&space, 0x41_0000 + i).expect("generator succeeds");
        let radius = t.a_numerical_radius();
        let norm = t.a_norm();

        // Shared sampling pass for the Rayleigh and norm-ratio oracles.
        let mut rng = ChaCha8Rng::seed_from_u64(0x42_0000 + i);
        let mut best_rayleigh = 0.0f64;
        let mut best_ratio = 0.0f64;
        for _ in 0..SAMPLES {
            let x = a_sphere_sample(&space, &mut rng);
            let tx = apply(t.matrix(), &x);
            let denom = space.a_inner(&x, &x).expect("dims agree").re;
            let rayleigh = space.a_inner(&tx, &x).expect("dims agree").norm() / denom;
            let ratio = (space.a_inner(&tx, &tx).expect("dims agree").re.max(0.0) / denom).sqrt();
            best_rayleigh = best_rayleigh.max(rayleigh);
            best_ratio = best_ratio.max(ratio);
        }
        assert!(
            best_rayleigh <= radius * (1.0 + 1e-10) + 1e-12,
            "instance {i}: sampled Rayleigh value {best_rayleigh} exceeds radius {radius}"
        );
        assert!(
            radius - best_rayleigh <= 1e-2 * radius,
            "instance {i}: radius {radius} not reached by sampling ({best_rayleigh})"
        );
        assert!(
            best_ratio <= norm * (1.0 + 1e-10) + 1e-12,
            "instance {i}: sampled ratio {best_ratio} exceeds seminorm {norm}"
        );
        assert!(
            norm - best_ratio <= 1e-2 * norm,
            "instance {i}: seminorm {norm} not reached by sampling ({best_ratio})"
        );

        // Rotation-grid oracle, real and imaginary sweeps.
        let mut grid_re = 0.0f64;
        let mut grid_im = 0.0f64;
        for k in 0..1024 {
            let theta = TAU * (k as f64) / 1024.0;
            let rot = t.scale(C64::from_polar(1.0, theta));
            grid_re = grid_re.max(rot.re_part().a_norm());
            grid_im = grid_im.max(rot.im_part().a_norm());
        }
        let quantization = radius * (1.0 - (PI / 1024.0).cos());
        let window = (1e-6 * (1.0 + radius)).max(quantization + 1e-9 * (1.0 + radius));
        for (label, grid) in [("re", grid_re), ("im", grid_im)] {
            let gap = radius - grid;
            assert!(
                gap >= -1e-9 * (1.0 + radius),
                "instance {i}: {label} grid {grid} exceeds refined radius {radius}"
            );
            assert!(
                gap <= window,
                "instance {i}: refined radius {radius} is {gap:.3e} above the {label} grid ({grid}), window {window:.3e}"
            );
        }

        // Gelfand oracle: repeated squaring in range coordinates (where the
        // seminorm is the Euclidean operator norm), renormalizing each step
        // so powers neither overflow nor underflow.
        let spectral = t.a_spectral_radius();
        let flat = Arc::new(make_space(&ComplexMatrix::identity(rank), 1e-10).expect("identity metric"));
        let mut power = CompatibleOperator::new(&flat, space.compress(t.matrix())).expect("compressed operator");
        let scale = power.a_norm();
        assert!(scale > 0.0, "instance {i}: zero compression");
        power = power.scale(c(1.0 / scale, 0.0));
        let mut log_gelfand = scale.ln(); // log of ‖T^(2^m)‖^(1/2^m), m = 0
        let mut converged = None;
        for m in 1..=30 {
            let squared = power.compose(&power);
            let step = squared.a_norm();
            assert!(step > 1e-280, "instance {i}: power norms collapsed, spectral radius {spectral}");
            power = squared.scale(c(1.0 / step, 0.0));
            let next = log_gelfand + step.ln() / (1u64 << m) as f64;
            let (current, previous) = (next.exp(), log_gelfand.exp());
            log_gelfand = next;
            if (current - previous).abs() <= 1e-4 * (1.0 + current) {
                converged = Some(current);
                break;
            }
        }
        let gelfand = converged.unwrap_or_else(|| panic!("instance {i}: Gelfand iterate did not settle"));
        assert!(
            (spectral - gelfand).abs() <= 1e-3 * (1.0 + spectral),
            "instance {i}: spectral radius {spectral} vs Gelfand iterate {gelfand}"
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 5 — closed-form values
// ---------------------------------------------------------------------------

/// Two hand-checkable instances: the classical 2×2 nilpotent has numerical
/// radius exactly 1/2, and under the rank-one metric diag(1,0) the operator
/// [[2,0],[7,5]] reduces to the scalar 2, so all three quantities equal 2.
#[test]
fn criterion_5_closed_form_values() {
    let _g = gate();
    let euclid = Arc::new(make_space(&ComplexMatrix::identity(2), 1e-10).expect("identity metric"));
    let nilpotent = ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
        .expect("finite entries");
    let op = CompatibleOperator::new(&euclid, nilpotent).expect("compatible");
    assert!(
        (op.a_numerical_radius() - 0.5).abs() <= 1e-10,
        "nilpotent radius {}",
        op.a_numerical_radius()
    );

    let metric = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
    let space = Arc::new(make_space(&metric, 1e-10).expect("PSD metric"));
    let lower = ComplexMatrix::new(2, 2, vec![c(2.0, 0.0), c(0.0, 0.0), c(7.0, 0.0), c(5.0, 0.0)])
        .expect("finite entries");
    let op = CompatibleOperator::new(&space, lower).expect("kernel-invariant");
    for (label, value) in [
        ("radius", op.a_numerical_radius()),
        ("seminorm", op.a_norm()),
        ("spectral radius", op.a_spectral_radius()),
    ] {
        assert!((value - 2.0).abs() <= 1e-10, "{label} = {value}, want 2");
    }
}

// ---------------------------------------------------------------------------
// Criterion 6 — equality saturation
// ---------------------------------------------------------------------------

/// The triangle-inequality block bound is attained — slack vanishes to
/// 1e-10·(1+rhs) — whenever the diagonal blocks are zero and the two
/// off-diagonal blocks coincide, on 100 random operators over mixed
/// dimensions and ranks.
#[test]
fn criterion_6_equality_saturation() {
    let _g = gate();
    for i in 0..100u64 {
        let dim = [2usize, 3, 4, 5][(i % 4) as usize];
        let rank = dim - ((i % 2) as usize).min(dim - 1);
        let space = random_space(dim, rank, 0x60_0000 + i);
        let q = gen_compatible(&space, 0x61_0000 + i).expect("generator succeeds");
        let zero = ComplexMatrix::zeros(dim, dim);
        let tuple = [zero.clone(), q.matrix().clone(), q.matrix().clone(), zero];
        let result = evaluate_bound(&space, "them10", &tuple, &BoundParams::default(), 1e-8)
            .expect("bound evaluates");
        let tol = 1e-10 * (1.0 + result.rhs.abs());
        assert!(
            result.slack.abs() <= tol,
            "instance {i} (dim {dim} rank {rank}): slack {:.3e} off saturation (lhs {}, rhs {})",
            result.slack,
            result.lhs,
            result.rhs
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 7 — determinism
// ---------------------------------------------------------------------------

/// Two identical verification runs write byte-identical reports.
#[test]
fn criterion_7_byte_identical_reports() {
    let _g = gate();
    let dir = tempfile::tempdir().expect("tempdir");
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}.json"));
        let status = bin()
            .args(["verify", "--dim", "4", "--rank", "3", "--trials", "500", "--seed", "42"])
            .arg("--out")
            .arg(&out)
            .status()
            .expect("binary runs");
        assert_eq!(status.code(), Some(0), "run {run}");
        outputs.push(std::fs::read(&out).expect("report written"));
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1], "reports differ between identical runs");
}
