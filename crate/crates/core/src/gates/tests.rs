use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::state::{coherence, l2_norm};

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn st(v: &[Complex]) -> PhasorState {
    PhasorState::new(v.to_vec()).unwrap()
}

fn ph(p: &[f64]) -> PhasorState {
    from_phases(&PhaseVector(p.to_vec())).unwrap()
}

fn assert_state_close(a: &PhasorState, b: &PhasorState, tol: f64) {
    assert_eq!(a.n_threads(), b.n_threads());
    for (k, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
        assert!((x - y).norm() < tol, "thread {k}: {x} vs {y}");
    }
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> PhasorState {
    st(&(0..n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect::<Vec<_>>())
}

fn random_unit_state(rng: &mut ChaCha8Rng, n: usize) -> PhasorState {
    ph(&(0..n).map(|_| rng.random_range(-PI..PI)).collect::<Vec<_>>())
}

/// Textbook DFT with the kernel evaluated directly from `exp(-2πi·k·n/N)`.
fn brute_force_dft(z: &[Complex]) -> Vec<Complex> {
    let n = z.len();
    (0..n)
        .map(|k| {
            let mut acc = c(0.0, 0.0);
            for (m, zm) in z.iter().enumerate() {
                let angle = -2.0 * PI * (k as f64) * (m as f64) / (n as f64);
                acc += zm * Complex::from_polar(1.0, angle);
            }
            acc / (n as f64).sqrt()
        })
        .collect()
}

fn phases(s: &PhasorState) -> Vec<f64> {
    phases_of(s).phases.0
}

// -- unitary gates ----------------------------------------------------------

#[test]
fn shift_examples() {
    let out = apply_shift(&st(&[c(1.0, 0.0), c(1.0, 0.0)]), 0, PI).unwrap();
    assert_state_close(&out, &st(&[c(-1.0, 0.0), c(1.0, 0.0)]), 1e-12);

    let out = apply_shift(&st(&[c(0.0, 1.0)]), 0, FRAC_PI_2).unwrap();
    assert_state_close(&out, &st(&[c(-1.0, 0.0)]), 1e-12);

    let s = ph(&[0.3]);
    assert_eq!(apply_shift(&s, 0, 0.0).unwrap(), s);
    assert!(matches!(
        apply_shift(&s, 1, 0.0),
        Err(PhasorError::IndexOutOfRange { index: 1, n_threads: 1 })
    ));
}

#[test]
fn invert_examples() {
    let out = apply_invert(&st(&[c(1.0, 0.0), c(1.0, 0.0)]), 1).unwrap();
    assert_eq!(out, st(&[c(1.0, 0.0), c(-1.0, 0.0)]));
    let out = apply_invert(&st(&[c(0.0, 1.0)]), 0).unwrap();
    assert_eq!(out, st(&[c(0.0, -1.0)]));
    let s = ph(&[0.4, -1.1]);
    assert_eq!(apply_invert(&apply_invert(&s, 0).unwrap(), 0).unwrap(), s);
    assert_state_close(&apply_invert(&s, 1).unwrap(), &apply_shift(&s, 1, PI).unwrap(), 1e-15);
    assert!(apply_invert(&s, 2).is_err());
}

#[test]
fn mix_examples() {
    let out = apply_mix(&st(&[c(1.0, 0.0), c(1.0, 0.0)]), 0, 1).unwrap();
    let h = FRAC_1_SQRT_2;
    assert_state_close(&out, &st(&[c(h, h), c(h, h)]), 1e-12);
    assert_abs_diff_eq!(out[0].norm(), 1.0, epsilon = 1e-12);

    let out = apply_mix(&st(&[c(1.0, 0.0), c(0.0, 1.0)]), 0, 1).unwrap();
    assert_state_close(&out, &st(&[c(0.0, 0.0), c(0.0, 2f64.sqrt())]), 1e-12);
    assert!(out[0].norm_sqr() < 1e-24);

    let out = apply_mix(&st(&[c(0.0, 1.0), c(1.0, 0.0)]), 0, 1).unwrap();
    assert_abs_diff_eq!(out[0].norm_sqr(), 2.0, epsilon = 1e-12);

    assert!(apply_mix(&ph(&[0.0, 0.0]), 1, 1).is_err());
}

#[test]
fn dft_examples() {
    let out = apply_dft(&PhasorState::ones(4).unwrap());
    assert_state_close(&out, &st(&[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]), 1e-12);

    let s = ph(&[1.234]);
    assert_state_close(&apply_dft(&s), &s, 1e-15);

    // 7^n mod 15 encoded on the circle of the modulus
    let seq = [1.0, 7.0, 4.0, 13.0];
    let s = ph(&seq.map(|v| 2.0 * PI * v / 15.0));
    let out = apply_dft(&s);
    let oracle = brute_force_dft(s.values());
    for (a, b) in out.values().iter().zip(&oracle) {
        assert!((a - b).norm() < 1e-12);
    }
    let mags: Vec<f64> = oracle.iter().map(|z| z.norm()).collect();
    let peak = (1..4).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
    assert!(mags[peak] > 0.5, "nonzero-bin peak {mags:?}");
}

#[test]
fn dft_matches_brute_force_oracle_up_to_64() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=64 {
        let s = random_state(&mut rng, n);
        let fast = apply_dft(&s);
        let oracle = brute_force_dft(s.values());
        for (a, b) in fast.values().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-10, "N={n}");
        }
    }
}

#[test]
fn dft_amplifies_aligned_phases() {
    for n in [2usize, 4, 8, 16] {
        for j in 0..n {
            let s = ph(&(0..n)
                .map(|k| 2.0 * PI * (j * k) as f64 / n as f64)
                .collect::<Vec<_>>());
            let out = apply_dft(&s);
            assert_abs_diff_eq!(out[j].norm(), (n as f64).sqrt(), epsilon = 1e-9);
        }
    }
}

#[test]
fn permute_examples() {
    let (a, b, cc) = (c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.5));
    let s = st(&[a, b, cc]);
    assert_eq!(apply_permute(&s, &[2, 0, 1]).unwrap(), st(&[cc, a, b]));
    assert_eq!(apply_permute(&s, &[0, 1, 2]).unwrap(), s);
    let order = [2, 0, 1];
    let mut inverse = [0usize; 3];
    for (k, &p) in order.iter().enumerate() {
        inverse[p] = k;
    }
    let there = apply_permute(&s, &order).unwrap();
    assert_eq!(apply_permute(&there, &inverse).unwrap(), s);
    assert!(apply_permute(&s, &[0, 0, 1]).is_err());
    assert!(apply_permute(&s, &[0, 1]).is_err());
}

#[test]
fn reverse_examples() {
    assert_eq!(apply_reverse(&st(&[c(0.0, 1.0)])), st(&[c(0.0, -1.0)]));
    let real = st(&[c(2.0, 0.0), c(-1.0, 0.0)]);
    assert_eq!(apply_reverse(&real), real);
    let s = ph(&[0.2, 2.0]);
    assert_eq!(apply_reverse(&apply_reverse(&s)), s);
}

#[test]
fn accumulate_examples() {
    let re = |v: &[f64]| st(&v.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
    assert_eq!(apply_accumulate(&re(&[1.0, 1.0, 0.0, 0.0])), re(&[1.0, 2.0, 2.0, 2.0]));
    assert_eq!(apply_accumulate(&re(&[0.0; 5])), re(&[0.0; 5]));
    assert_eq!(apply_accumulate(&re(&[1.0, -1.0, 1.0, -1.0])), re(&[1.0, 0.0, 1.0, 0.0]));
}

/// Number of monotone lattice paths from (0,0), by dynamic programming.
fn lattice_paths(rows: usize, cols: usize) -> Vec<Vec<u64>> {
    let mut p = vec![vec![0u64; cols]; rows];
    for r in 0..rows {
        for c in 0..cols {
            p[r][c] = if r == 0 || c == 0 {
                1
            } else {
                p[r - 1][c] + p[r][c - 1]
            };
        }
    }
    p
}

#[test]
fn grid_propagate_examples() {
    let shape = GridShape::new(2, 2).unwrap();
    let seed = st(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let out = apply_grid_propagate(&seed, shape).unwrap();
    assert_eq!(out, st(&[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]));

    let zero = st(&[c(0.0, 0.0); 6]);
    assert_eq!(apply_grid_propagate(&zero, GridShape::new(2, 3).unwrap()).unwrap(), zero);
    assert!(apply_grid_propagate(&zero, GridShape::new(2, 2).unwrap()).is_err());
}

#[test]
fn grid_propagate_matches_lattice_path_oracle() {
    for (rows, cols) in [(1, 1), (1, 6), (4, 4), (5, 7), (8, 3)] {
        let shape = GridShape::new(rows, cols).unwrap();
        let mut init = vec![c(0.0, 0.0); rows * cols];
        for r in 0..rows {
            for cc in 0..cols {
                if r == 0 || cc == 0 {
                    init[r * cols + cc] = c(1.0, 0.0);
                }
            }
        }
        let mut s = st(&init);
        let oracle = lattice_paths(rows, cols);
        for sweep in 1..=(rows + cols) {
            s = apply_grid_propagate(&s, shape).unwrap();
            // frontier r + c = sweep + 1 is settled after `sweep` sweeps
            for r in 0..rows {
                for cc in 0..cols {
                    if r + cc <= sweep + 1 {
                        assert_eq!(s[r * cols + cc], c(oracle[r][cc] as f64, 0.0), "({r},{cc})");
                    }
                }
            }
        }
    }
}

// -- non-linear gates ------------------------------------------------------

#[test]
fn threshold_examples() {
    let out = apply_threshold(&st(&[c(2.0, 0.0)]), 1.0).unwrap();
    assert_eq!(out, st(&[c(1.0, 0.0)]));
    let out = apply_threshold(&st(&[c(0.3, 0.0)]), 0.5).unwrap();
    assert_eq!(out, st(&[c(0.0, 0.0)]));
    let z = c(0.6, 0.8);
    let out = apply_threshold(&st(&[z]), 1.0).unwrap();
    assert_state_close(&out, &st(&[z]), 1e-15);
    assert!(apply_threshold(&st(&[z]), -0.1).is_err());
    // τ = 0 keeps zero threads at zero
    assert_eq!(apply_threshold(&st(&[c(0.0, 0.0)]), 0.0).unwrap(), st(&[c(0.0, 0.0)]));
}

#[test]
fn threshold_output_magnitudes_are_exactly_zero_or_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let s = random_state(&mut rng, 16);
        let out = apply_threshold(&s, 0.5).unwrap();
        for z in out.values() {
            let m = z.norm();
            assert!(m == 0.0 || (m - 1.0).abs() <= f64::EPSILON, "{m}");
        }
    }
}

#[test]
fn saturate_examples() {
    let out = apply_saturate(&ph(&[0.3]), 2).unwrap();
    assert_eq!(out, st(&[c(1.0, 0.0)]));
    let out = apply_saturate(&ph(&[2.9]), 2).unwrap();
    assert_eq!(out, st(&[c(-1.0, 0.0)]));
    // exact midpoint rounds to the larger level
    let mid = st(&[c(FRAC_1_SQRT_2, FRAC_1_SQRT_2)]);
    assert_eq!(phases(&mid)[0], FRAC_PI_4);
    let out = apply_saturate(&mid, 4).unwrap();
    assert_state_close(&out, &st(&[c(0.0, 1.0)]), 1e-15);
    assert!(apply_saturate(&mid, 1).is_err());
    for z in apply_saturate(&ph(&[0.1, 1.0, -2.0, 3.0]), 5).unwrap().values() {
        assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-15);
    }
}

#[test]
fn normalize_examples() {
    let out = apply_normalize(&st(&[c(3.0, 4.0)]));
    assert_state_close(&out, &st(&[c(0.6, 0.8)]), 1e-15);
    let u = ph(&[0.3, -2.0]);
    assert_state_close(&apply_normalize(&u), &u, 1e-15);
    let out = apply_normalize(&st(&[c(0.0, 0.0), c(2.0, 0.0)]));
    assert_eq!(out[0], c(0.0, 0.0));
    assert_eq!(out.undefined_threads(), vec![0]);
}

#[test]
fn log_compress_examples() {
    let out = apply_log_compress(&st(&[c(0.0, 0.0), c(0.0, 1.0)]), 255.0).unwrap();
    assert_eq!(out[0], c(0.0, 0.0));
    assert_abs_diff_eq!(out[1].norm(), 1.0, epsilon = 1e-15);
    let out = apply_log_compress(&st(&[Complex::from_polar(0.5, 1.0)]), 255.0).unwrap();
    // ln(128.5)/ln(256), evaluated independently
    assert_abs_diff_eq!(out[0].norm(), 0.875_703_068_649_234_9, epsilon = 1e-12);
    assert_abs_diff_eq!(phases(&out)[0], 1.0, epsilon = 1e-12);
    assert!(apply_log_compress(&out, 0.0).is_err());
}

/// All-lag circular correlation computed straight from the definition.
fn correlation_oracle(z: &[Complex], p: &[Complex]) -> Vec<Complex> {
    let n = z.len();
    (0..n)
        .map(|lag| {
            let mut acc = c(0.0, 0.0);
            for j in 0..p.len() {
                acc += z[(lag + j) % n] * p[j].conj();
            }
            acc / p.len() as f64
        })
        .collect()
}

#[test]
fn cross_correlate_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = random_unit_state(&mut rng, 6);
    let out = apply_cross_correlate(&s, s.values()).unwrap();
    assert_abs_diff_eq!(out[0].re, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(out[0].im, 0.0, epsilon = 1e-12);

    assert_state_close(&apply_cross_correlate(&s, &[c(1.0, 0.0)]).unwrap(), &s, 1e-15);
    assert!(apply_cross_correlate(&s, &[]).is_err());

    // pattern = state rotated by two threads, peak sits at lag 2
    let n = 8;
    let s = random_unit_state(&mut rng, n);
    let pattern: Vec<Complex> = (0..n).map(|j| s[(j + 2) % n]).collect();
    let out = apply_cross_correlate(&s, &pattern).unwrap();
    let oracle = correlation_oracle(s.values(), &pattern);
    for (a, b) in out.values().iter().zip(&oracle) {
        assert!((a - b).norm() < 1e-12);
    }
    assert_abs_diff_eq!(out[2].norm(), 1.0, epsilon = 1e-12);
    for k in (0..n).filter(|&k| k != 2) {
        assert!(out[k].norm() < out[2].norm());
    }
}

#[test]
fn convolve_examples() {
    let s = ph(&[0.1, 0.5, -1.0, 2.0]);
    assert_state_close(&apply_convolve(&s, &[c(1.0, 0.0)]).unwrap(), &s, 1e-15);
    let shifted = apply_convolve(&s, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
    assert_state_close(&shifted, &st(&[s[3], s[0], s[1], s[2]]), 1e-15);
    assert!(apply_convolve(&s, &[]).is_err());
    assert!(apply_convolve(&s, &[c(1.0, 0.0); 5]).is_err());
}

#[test]
fn convolution_theorem_holds_against_brute_force_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in [3usize, 4, 7, 12] {
        let x = random_state(&mut rng, n);
        let p = rng.random_range(1..=n);
        let h: Vec<Complex> = random_state(&mut rng, p).into_values();
        let mut padded = h.clone();
        padded.resize(n, c(0.0, 0.0));
        let lhs = brute_force_dft(apply_convolve(&x, &h).unwrap().values());
        let fx = brute_force_dft(x.values());
        let fh = brute_force_dft(&padded);
        for k in 0..n {
            let rhs = fx[k] * fh[k] * (n as f64).sqrt();
            assert!((lhs[k] - rhs).norm() < 1e-10);
        }
    }
}

// -- neuromorphic ------------------------------------------------------------

#[test]
fn kuramoto_fixed_points() {
    let s = ph(&[0.4; 6]);
    assert_state_close(&apply_kuramoto(&s, 1.0, 0.1).unwrap(), &s, 1e-12);
    let s = ph(&[0.0, PI]);
    assert_state_close(&apply_kuramoto(&s, 1.0, 0.1).unwrap(), &s, 1e-12);
    assert!(apply_kuramoto(&s, 1.0, 0.0).is_err());
}

#[test]
fn kuramoto_equals_all_to_all_pairwise_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 9;
    let s = random_unit_state(&mut rng, n);
    let phi = phases(&s);
    let (k, dt) = (1.3, 0.05);
    let expected: Vec<f64> = (0..n)
        .map(|i| {
            phi[i] + k * dt / n as f64 * (0..n).map(|j| (phi[j] - phi[i]).sin()).sum::<f64>()
        })
        .collect();
    let out = apply_kuramoto(&s, k, dt).unwrap();
    assert_state_close(&out, &ph(&expected), 1e-12);
}

#[test]
fn kuramoto_raises_coherence_statistically() {
    let mut increased = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_unit_state(&mut rng, 20);
        let before = coherence(&s);
        for _ in 0..50 {
            s = apply_kuramoto(&s, 1.0, 0.1).unwrap();
        }
        if coherence(&s) > before {
            increased += 1;
        }
    }
    assert!(increased >= 99, "{increased}/100");
}

#[test]
fn hebbian_pull_examples() {
    let s = ph(&[1.0; 4]);
    assert_state_close(&apply_hebbian_pull(&s, 0.3).unwrap(), &s, 1e-12);

    let out = phases(&apply_hebbian_pull(&ph(&[0.0, 0.2]), 0.1).unwrap());
    assert_abs_diff_eq!(out[0], 0.1 * 0.2f64.sin(), epsilon = 1e-12);
    assert_abs_diff_eq!(out[1], 0.2 - 0.1 * 0.2f64.sin(), epsilon = 1e-12);
    assert!(apply_hebbian_pull(&s, -1.0).is_err());
}

#[test]
fn hebbian_pull_tracks_two_oscillator_oracle() {
    // scalar map for the gap: δ ← δ − 2η·sin δ
    let eta = 0.05;
    let mut s = ph(&[0.0, 0.8]);
    let mut gap = 0.8f64;
    for _ in 0..200 {
        s = apply_hebbian_pull(&s, eta).unwrap();
        gap -= 2.0 * eta * gap.sin();
        let p = phases(&s);
        assert_abs_diff_eq!(p[1] - p[0], gap, epsilon = 1e-10);
    }
    assert!(gap.abs() < 1e-6);

    // alternating perturbations on a longer chain decay
    let mut s = ph(&[0.1, -0.1, 0.1, -0.1, 0.1, -0.1]);
    for _ in 0..500 {
        s = apply_hebbian_pull(&s, 0.1).unwrap();
    }
    assert!(coherence(&s) > 1.0 - 1e-9);
}

#[test]
fn ising_examples() {
    let alt = ph(&[0.0, PI, 0.0, PI]);
    assert_state_close(&apply_ising(&alt, 1.0, 0.1).unwrap(), &alt, 1e-12);
    let uni = ph(&[0.5; 4]);
    assert_state_close(&apply_ising(&uni, 1.0, 0.1).unwrap(), &uni, 1e-12);
}

#[test]
fn ising_converges_to_alternation_like_sign_model() {
    // sign model: near-alternating chain settles on the alternating ±1 pattern
    let start = [0.2, PI - 0.3, -0.25, PI + 0.1];
    let mut s = ph(&start);
    for _ in 0..200 {
        s = apply_ising(&s, 1.0, 0.1).unwrap();
    }
    let snapped = apply_saturate(&s, 2).unwrap();
    let signs: Vec<f64> = snapped.values().iter().map(|z| z.re.signum()).collect();
    let oracle: Vec<f64> = start.iter().map(|p| p.cos().signum()).collect();
    assert_eq!(signs, oracle);
    // anti-aligned neighbors: gaps converge to π
    let p = phases(&s);
    for k in 0..3 {
        assert_abs_diff_eq!(crate::state::wrap_phase(p[k + 1] - p[k]).abs(), PI, epsilon = 1e-6);
    }
}

#[test]
fn synaptic_examples() {
    let s = ph(&[0.7, 0.7]);
    assert_state_close(&apply_synaptic(&s, 0, 1, 1.0).unwrap(), &s, 1e-12);
    let out = phases(&apply_synaptic(&ph(&[0.0, FRAC_PI_2]), 0, 1, 1.0).unwrap());
    assert_abs_diff_eq!(out[0], 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(out[1], FRAC_PI_2 - 1.0, epsilon = 1e-12);
    assert!(apply_synaptic(&s, 1, 1, 1.0).is_err());
}

#[test]
fn synaptic_follows_fixed_point_oracle() {
    // 1-D iteration of the gap g ← g − η·sin g
    let eta = 0.3;
    let mut s = ph(&[0.5, 2.9]);
    let mut gap = 2.4f64;
    let mut last = gap.abs();
    for _ in 0..100 {
        s = apply_synaptic(&s, 0, 1, eta).unwrap();
        gap -= eta * gap.sin();
        let p = phases(&s);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1] - p[0], gap, epsilon = 1e-10);
        assert!(gap.abs() < last);
        last = gap.abs();
    }
}

#[test]
fn asymmetric_couple_examples() {
    let s = ph(&[0.1, 1.0, -2.0]);
    let zero = vec![vec![0.0; 3]; 3];
    assert_state_close(&apply_asymmetric_couple(&s, &zero, 0.1).unwrap(), &s, 1e-12);
    assert!(apply_asymmetric_couple(&s, &zero[..2], 0.1).is_err());

    // node 0 chases node 1; dt·A = η of the synaptic gate
    let a = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
    let start = ph(&[0.0, 1.2]);
    let mut s = start.clone();
    let mut gap = -1.2f64;
    for _ in 0..50 {
        s = apply_asymmetric_couple(&s, &a, 0.2).unwrap();
        gap -= 0.2 * gap.sin();
        let p = phases(&s);
        assert_abs_diff_eq!(p[1], 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0] - p[1], gap, epsilon = 1e-10);
    }
    let via_synaptic = (0..50).fold(start, |s, _| apply_synaptic(&s, 1, 0, 0.2).unwrap());
    assert_state_close(&s, &via_synaptic, 1e-10);
}

#[test]
fn symmetric_coupling_is_reciprocal() {
    let a = vec![vec![0.0, 0.7], vec![0.7, 0.0]];
    let out = phases(&apply_asymmetric_couple(&ph(&[0.0, 1.0]), &a, 0.1).unwrap());
    // equal and opposite steps
    assert_abs_diff_eq!(out[0], 0.07 * 1.0f64.sin(), epsilon = 1e-12);
    assert_abs_diff_eq!(1.0 - out[1], 0.07 * 1.0f64.sin(), epsilon = 1e-12);
}

// -- encoding ---------------------------------------------------------------

#[test]
fn encode_phase_examples() {
    let s = encode_phase(&[0.0, PI], EncodeMode::Direct).unwrap();
    assert_state_close(&s, &st(&[c(1.0, 0.0), c(-1.0, 0.0)]), 1e-12);
    let s = encode_phase(&[0.0], EncodeMode::Tanh).unwrap();
    assert_eq!(phases(&s)[0], 0.0);
    let s = encode_phase(&[50.0], EncodeMode::Tanh).unwrap();
    assert!(PI - phases(&s)[0] < 1e-12);
    let s = encode_phase(&[1.0, 2.0, 3.0, 5.0], EncodeMode::Linear).unwrap();
    let p = phases(&s);
    assert_eq!(p[0], 0.0);
    assert!(crate::state::wrap_phase(p[3]).abs() > 0.1);
    assert!(encode_phase(&[2.0, 2.0], EncodeMode::Linear).is_err());
    assert!(encode_phase(&[f64::NAN], EncodeMode::Direct).is_err());
}

#[test]
fn encode_amplitude_examples() {
    let u = ph(&[0.3, 1.0]);
    assert_state_close(&encode_amplitude(&u, &[1.0, 1.0]).unwrap(), &u, 1e-15);
    let out = encode_amplitude(&u, &[0.0, 1.0]).unwrap();
    assert_eq!(out[0], c(0.0, 0.0));
    let out = encode_amplitude(&ph(&[0.0, FRAC_PI_2]), &[2.0, 3.0]).unwrap();
    assert_state_close(&out, &st(&[c(2.0, 0.0), c(0.0, 3.0)]), 1e-12);
    assert!(encode_amplitude(&u, &[-1.0, 1.0]).is_err());
    assert!(encode_amplitude(&u, &[1.0]).is_err());
}

// -- matrices and invariants -----------------------------------------------

fn max_dev(a: &DMatrix<Complex>, b: &DMatrix<Complex>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn mix_matrix_is_special_unitary() {
    let m = gate_matrix(&GateInstruction::mix(0, 1), 2).unwrap();
    let id = DMatrix::<Complex>::identity(2, 2);
    assert!(max_dev(&(&m * m.adjoint()), &id) < 1e-12);
    assert!((m.determinant() - c(1.0, 0.0)).norm() < 1e-12);
    // embedded in a larger space
    let m = gate_matrix(&GateInstruction::mix(1, 3), 5).unwrap();
    assert!((m.determinant() - c(1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn shift_matrix_determinant() {
    for theta in [0.0, 0.4, -2.5, PI] {
        let m = gate_matrix(&GateInstruction::shift(1, theta), 3).unwrap();
        assert!((m.determinant() - Complex::from_polar(1.0, theta)).norm() < 1e-12);
    }
}

#[test]
fn nonlinear_gates_have_no_matrix() {
    assert!(matches!(
        gate_matrix(&GateInstruction::threshold(0.5), 3),
        Err(PhasorError::NotLinear(_))
    ));
    assert!(gate_matrix(&GateInstruction::reverse(), 3).is_err());
}

#[test]
fn gate_matrices_agree_with_direct_application() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 6;
    let gates = [
        GateInstruction::shift(2, 1.1),
        GateInstruction::invert(4),
        GateInstruction::mix(5, 1),
        GateInstruction::dft(),
        GateInstruction::permute(&[3, 5, 0, 1, 4, 2]),
        GateInstruction::accumulate(),
    ];
    for g in &gates {
        let m = gate_matrix(g, n).unwrap();
        let gate = GateRegistry::builtin().build(g).unwrap();
        for _ in 0..20 {
            let s = random_state(&mut rng, n);
            let direct = gate.apply(&s).unwrap();
            let via = apply_matrix(&m, &s).unwrap();
            assert_state_close(&direct, &via, 1e-12);
        }
    }
}

#[test]
fn unitary_gates_preserve_norm_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(2..12);
        let s = random_state(&mut rng, n);
        let norm = l2_norm(&s);
        let j = rng.random_range(0..n);
        let k = (j + rng.random_range(1..n)) % n;
        let mut order: Vec<usize> = (0..n).collect();
        order.rotate_left(rng.random_range(0..n));
        let outs = [
            apply_shift(&s, j, rng.random_range(-PI..PI)).unwrap(),
            apply_invert(&s, k).unwrap(),
            apply_mix(&s, j, k).unwrap(),
            apply_dft(&s),
            apply_permute(&s, &order).unwrap(),
            apply_reverse(&s),
        ];
        for out in &outs {
            assert!((l2_norm(out) - norm).abs() < 1e-12);
        }
    }
}

#[test]
fn interference_law_over_sweep() {
    for i in 0..1000 {
        let dphi = -PI + 2.0 * PI * i as f64 / 999.0;
        let phi1 = 0.37;
        let out = apply_mix(&ph(&[phi1 + dphi, phi1]), 0, 1).unwrap();
        assert!((out[0].norm_sqr() - (1.0 + dphi.sin())).abs() < 1e-12);
    }
}

#[test]
fn registry_knows_every_gate_name() {
    let r = GateRegistry::builtin();
    for kind in GateKind::ALL {
        assert!(r.contains(kind.name()), "{kind}");
        assert_eq!(GateKind::from_name(kind.name()), Some(kind));
    }
    assert_eq!(r.names().count(), 21);
    assert!(matches!(
        r.build(&GateInstruction::new("nope", vec![], Default::default())),
        Err(PhasorError::UnknownGate(_))
    ));
}

#[test]
fn registry_rejects_missing_or_bad_params() {
    let r = GateRegistry::builtin();
    let bare = |name: &str, targets: Vec<usize>| GateInstruction::new(name, targets, Default::default());
    assert!(r.build(&bare("shift", vec![0])).is_err());
    assert!(r.build(&bare("mix", vec![0])).is_err());
    assert!(r.build(&bare("mix", vec![1, 1])).is_err());
    assert!(r.build(&GateInstruction::saturate(1)).is_err());
    assert!(r.build(&GateInstruction::kuramoto(1.0, -0.1)).is_err());
    assert!(r.build(&GateInstruction::encode_phase(&[1.0, 1.0], EncodeMode::Linear)).is_err());
}

#[test]
fn custom_gates_can_be_registered() {
    #[derive(Debug)]
    struct Conj;
    impl Gate for Conj {
        fn code(&self) -> String {
            "C*".into()
        }
        fn validate(&self, _: usize) -> Result<()> {
            Ok(())
        }
        fn apply(&self, s: &PhasorState) -> Result<PhasorState> {
            Ok(apply_reverse(s))
        }
        fn instruction(&self) -> GateInstruction {
            GateInstruction::new("conj", vec![], Default::default())
        }
    }
    let mut r = GateRegistry::empty();
    r.register("conj", |_| Ok(Box::new(Conj)));
    let g = r.build(&GateInstruction::new("conj", vec![], Default::default())).unwrap();
    assert_eq!(g.apply(&st(&[c(0.0, 1.0)])).unwrap(), st(&[c(0.0, -1.0)]));
    assert_eq!(g.name(), "conj");
    assert!(g.kind().is_none() && !g.is_unitary());
    let mut circuit = crate::Circuit::new(1).unwrap();
    circuit.append_with(&r, GateInstruction::new("conj", vec![], Default::default())).unwrap();
    assert_eq!(circuit.render_text(), "t0: -[C*]-\n");
}

proptest! {
    #[test]
    fn normalize_and_saturate_are_idempotent(
        v in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..12),
        levels in 2u32..9,
    ) {
        let s = st(&v.iter().map(|&(a, b)| c(a, b)).collect::<Vec<_>>());
        let once = apply_normalize(&s);
        prop_assert_eq!(apply_normalize(&once).undefined_threads(), once.undefined_threads());
        for (a, b) in apply_normalize(&once).values().iter().zip(once.values()) {
            prop_assert!((a - b).norm() < 1e-15);
        }
        let sat = apply_saturate(&s, levels).unwrap();
        let twice = apply_saturate(&sat, levels).unwrap();
        for (a, b) in sat.values().iter().zip(twice.values()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
