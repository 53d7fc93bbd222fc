use faer::{Mat, Side};
use proptest::prelude::*;
use starkmbl::model::{build_ising, build_xy_sector, CouplingMatrix, FieldProfile, LinearOperator};
use starkmbl::protocols::{run_deer, ChainModel, DeerConfig, TimeGrid};
use starkmbl::spectrum::dense_eigenvalues;
use starkmbl::spinspace::{product_state, sector_indices, SpinPattern, StateVector, C64};

fn sorted_eigs(dense: Vec<f64>, d: usize) -> Vec<f64> {
    let m = Mat::<f64>::from_fn(d, d, |i, j| dense[i * d + j]);
    let mut e = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
    e.sort_by(f64::total_cmp);
    e
}

fn state(n: usize, re: &[f64], im: &[f64]) -> StateVector {
    let amps = re.iter().zip(im).map(|(a, b)| C64::new(*a, *b)).collect();
    StateVector::from_amplitudes(n, amps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn product_state_has_one_unit_amplitude(bits in prop::collection::vec(any::<bool>(), 1..12)) {
        let p = SpinPattern::from_bits(bits).unwrap();
        let psi = product_state(&p);
        let nonzero: Vec<_> = psi.amplitudes().iter().enumerate().filter(|(_, a)| a.norm() != 0.0).collect();
        prop_assert_eq!(nonzero.len(), 1);
        prop_assert_eq!(nonzero[0].0, p.basis_index());
        prop_assert_eq!(nonzero[0].1.norm(), 1.0);
    }

    #[test]
    fn ising_is_hermitian(
        n in 2usize..=8,
        alpha in 0.5f64..3.0,
        bz0 in -5.0f64..5.0,
        g in -2.0f64..2.0,
        seed in prop::collection::vec(-1.0f64..1.0, 1024),
    ) {
        let d = 1 << n;
        let h = build_ising(&CouplingMatrix::power_law(n, alpha).unwrap(), &FieldProfile::linear(n, bz0, g).unwrap()).unwrap();
        let phi = state(n, &seed[..d], &seed[256..256 + d]);
        let psi = state(n, &seed[512..512 + d], &seed[768..768 + d]);
        let mut hpsi = vec![C64::new(0.0, 0.0); d];
        let mut hphi = vec![C64::new(0.0, 0.0); d];
        h.apply_into(psi.amplitudes(), &mut hpsi);
        h.apply_into(phi.amplitudes(), &mut hphi);
        let a: C64 = phi.amplitudes().iter().zip(&hpsi).map(|(x, y)| x.conj() * y).sum();
        let b: C64 = psi.amplitudes().iter().zip(&hphi).map(|(x, y)| x.conj() * y).sum();
        prop_assert!((a - b.conj()).norm() < 1e-10);
    }

    #[test]
    fn xy_bias_shift_moves_levels_by_magnetization(n in 2usize..=8, shift in -3.0f64..3.0, ups in 0usize..=8) {
        let ups = ups.min(n);
        let mz = 2 * ups as i64 - n as i64;
        let c = CouplingMatrix::power_law(n, 1.3).unwrap();
        let a = build_xy_sector(&c, &FieldProfile::uniform(n, 5.0).unwrap(), mz).unwrap();
        let b = build_xy_sector(&c, &FieldProfile::uniform(n, 5.0 + shift).unwrap(), mz).unwrap();
        let d = a.basis.len();
        let ea = sorted_eigs(a.op.to_dense(), d);
        let eb = sorted_eigs(b.op.to_dense(), d);
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((y - x - shift * mz as f64).abs() < 1e-10);
        }
    }
}

#[test]
fn sectors_cover_basis_once() {
    for n in 1..=10 {
        let mut all: Vec<usize> = (0..=n)
            .flat_map(|ups| sector_indices(n, 2 * ups as i64 - n as i64).unwrap())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..1 << n).collect::<Vec<_>>());
    }
}

/// At large bias the Ising levels split into magnetization bands; each band
/// is the XY sector spectrum with flip-flop amplitude `J` (coupling `2·J/2`),
/// up to second-order shifts of order `J²/bz0`.
#[test]
fn ising_bands_match_xy_sectors() {
    let n = 6;
    let bz0 = 50.0;
    let c = CouplingMatrix::power_law(n, 1.3).unwrap();
    let f = FieldProfile::linear(n, bz0, 0.4).unwrap();
    let ising = dense_eigenvalues(&build_ising(&c, &f).unwrap()).unwrap();
    let bound = 2.0 * c.bonds().map(|(_, _, j)| j * j).sum::<f64>() / bz0;
    let mut offset = 0;
    for ups in 0..=n {
        let mz = 2 * ups as i64 - n as i64;
        let s = build_xy_sector(&c.scaled(2.0), &f, mz).unwrap();
        let d = s.basis.len();
        let xy = sorted_eigs(s.op.to_dense(), d);
        let band = &ising[offset..offset + d];
        offset += d;
        let worst = band
            .iter()
            .zip(&xy)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(
            worst < bound,
            "mz = {mz}: deviation {worst} vs bound {bound}"
        );
        if ups > 0 && ups < n {
            let literal = sorted_eigs(build_xy_sector(&c, &f, mz).unwrap().op.to_dense(), d);
            let off = band
                .iter()
                .zip(&literal)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(
                off > bound,
                "half-amplitude sector unexpectedly matches at mz = {mz}"
            );
        }
    }
}

/// With no couplings the bias only adds phases to product states, so the
/// DEER difference is unchanged by a global bias shift.
#[test]
fn deer_difference_ignores_bias_without_couplings() {
    let n = 8;
    let run = |bias: f64| {
        let m = ChainModel::new(
            CouplingMatrix::zeros(n).unwrap(),
            bias,
            FieldProfile::linear(n, 0.0, 0.9).unwrap(),
        )
        .unwrap();
        let mut cfg = DeerConfig::new(m, 2);
        cfg.grid = TimeGrid {
            t_max: 4.0,
            n_points: 9,
        };
        run_deer(&cfg).unwrap().difference
    };
    let a = run(5.0);
    for shift in [-2.0, 3.5] {
        let b = run(5.0 + shift);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

/// Non-commuting bias and couplings: the bias shift changes the signal.
#[test]
fn deer_difference_moves_with_bias_when_coupled() {
    let n = 8;
    let run = |bias: f64| {
        let m = ChainModel::linear(n, 1.3, bias, 0.7).unwrap();
        let mut cfg = DeerConfig::new(m, 1);
        cfg.grid = TimeGrid {
            t_max: 4.0,
            n_points: 9,
        };
        run_deer(&cfg).unwrap().difference
    };
    let a = run(5.0);
    let b = run(8.0);
    let dev = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(dev > 1e-6);
}
