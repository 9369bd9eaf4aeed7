use nlspike::coefficients::NonlinearitySpec;
use nlspike::distributions::{NoiseKind, NoiseSpec, SeededStream, SignalSpec};
use nlspike::harness::quantile;
use nlspike::matrix::{read_binary, read_text, RectMatrix, SymMatrix};
use nlspike::models::{build_spiked, SpikedModelConfig};
use nlspike::spectral::{overlap, SpectrumHistogram};
use nlspike::theory::{bbp_eigenvalue, bbp_overlap};
use proptest::prelude::*;

fn noise_kind() -> impl Strategy<Value = NoiseKind> {
    prop_oneof![
        Just(NoiseKind::Gaussian),
        Just(NoiseKind::UniformSym),
        Just(NoiseKind::Rademacher),
        Just(NoiseKind::Laplace)
    ]
}

fn nonlinearity() -> impl Strategy<Value = NonlinearitySpec> {
    prop_oneof![
        Just(NonlinearitySpec::Identity),
        Just(NonlinearitySpec::Abs),
        Just(NonlinearitySpec::Tanh),
        Just(NonlinearitySpec::Relu),
        Just(NonlinearitySpec::cubic_hermite()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn built_models_are_symmetric(n in 2usize..25, gamma in -5.0f64..5.0, seed in any::<u64>(), kind in noise_kind(), f in nonlinearity()) {
        let m = build_spiked(&SpikedModelConfig {
            n,
            f,
            noise: NoiseSpec::new(kind),
            signal: SignalSpec::rademacher(),
            gamma,
            seed: SeededStream::new(seed, 1),
            couple_to_null: false,
        }).unwrap();
        prop_assert!(m.y.is_exactly_symmetric());
        prop_assert!(m.y.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn overlap_lies_in_unit_interval(v in prop::collection::vec(-10.0f64..10.0, 1..30), seed in any::<u64>(), k in 1usize..4) {
        prop_assume!(v.iter().any(|t| *t != 0.0));
        let x: Vec<f64> = (0..v.len()).map(|i| NoiseSpec::gaussian().draw(SeededStream::new(seed, 0).slot(i as u64, 0))).collect();
        let o = overlap(&v, &x, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&o));
    }

    #[test]
    fn bbp_is_homogeneous(g in -20.0f64..20.0, s in 0.01f64..5.0, c in 0.01f64..10.0) {
        let l = bbp_eigenvalue(g, s).unwrap();
        let lc = bbp_eigenvalue(c * g, c * s).unwrap();
        prop_assert!((lc - c * l).abs() <= 1e-9 * (1.0 + (c * l).abs()));
        let m = bbp_overlap(g, s).unwrap();
        prop_assert!((bbp_overlap(c * g, c * s).unwrap() - m).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&m));
        // odd in γ̃ above threshold
        if g.abs() > s {
            prop_assert!((bbp_eigenvalue(-g, s).unwrap() + l).abs() <= 1e-12 * l.abs().max(1.0));
        }
    }

    #[test]
    fn bbp_is_monotone_in_strength(a in 0.0f64..10.0, b in 0.0f64..10.0, s in 0.1f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bbp_eigenvalue(lo, s).unwrap() <= bbp_eigenvalue(hi, s).unwrap() + 1e-12);
        prop_assert!(bbp_overlap(lo, s).unwrap() <= bbp_overlap(hi, s).unwrap() + 1e-12);
        prop_assert!(bbp_eigenvalue(lo, s).unwrap() >= 2.0 * s - 1e-12);
    }

    #[test]
    fn histogram_counts_every_value(values in prop::collection::vec(-5.0f64..5.0, 1..200), bins in 1usize..50) {
        let h = SpectrumHistogram::new(&values, -2.0, 2.0, bins).unwrap();
        prop_assert_eq!(h.total(), values.len());
        prop_assert_eq!(h.bins.len(), bins);
    }

    #[test]
    fn quantiles_are_ordered(mut values in prop::collection::vec(-100.0f64..100.0, 1..60)) {
        values.sort_by(f64::total_cmp);
        let q: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&p| quantile(&values, p)).collect();
        prop_assert!(q.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(q[0], values[0]);
        prop_assert_eq!(q[4], *values.last().unwrap());
    }

    #[test]
    fn stream_slots_ignore_read_order(seed in any::<u64>(), id in any::<u64>(), cells in prop::collection::vec((0u64..1000, 0u64..1000), 1..20)) {
        let s = SeededStream::new(seed, id);
        let forward: Vec<_> = cells.iter().map(|&(r, c)| s.slot(r, c)).collect();
        let backward: Vec<_> = cells.iter().rev().map(|&(r, c)| s.slot(r, c)).collect();
        prop_assert!(forward.iter().eq(backward.iter().rev()));
        let mut reader = s.reader(cells[0].0, cells[0].1);
        prop_assert_eq!(reader.next_slot(), forward[0]);
    }

    #[test]
    fn dumps_round_trip(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        let a = RectMatrix::from_fn(rows, cols, |i, j| NoiseSpec::new(NoiseKind::Laplace).draw(SeededStream::new(seed, 2).slot(i as u64, j as u64)));
        let mut bin = Vec::new();
        a.write_binary(&mut bin).unwrap();
        let (r, c, data) = read_binary(bin.as_slice()).unwrap();
        prop_assert_eq!((r, c), (rows, cols));
        prop_assert_eq!(data.as_slice(), a.as_slice());
        let mut txt = Vec::new();
        a.write_text(&mut txt).unwrap();
        let (r, c, data) = read_text(txt.as_slice()).unwrap();
        prop_assert_eq!((r, c), (rows, cols));
        prop_assert_eq!(data.as_slice(), a.as_slice());
        let s = SymMatrix::from_upper_fn(rows, |i, j| a.get(i.min(rows - 1), j.min(cols - 1)));
        let mut sb = Vec::new();
        s.write_binary(&mut sb).unwrap();
        let (r, _, data) = read_binary(sb.as_slice()).unwrap();
        prop_assert_eq!(SymMatrix::from_dense(r, data).unwrap(), s);
    }
}
