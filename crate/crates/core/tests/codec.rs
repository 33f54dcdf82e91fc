mod common;

use common::{mean_se, seed};
use gprs_core::codec::{
    channel_decode, channel_encode, elias_delta_len, encode_index, from_bytes, to_bytes,
    zeta_ideal_codelength, LambdaRule,
};
use gprs_core::harness::global_index_log_bound;
use gprs_core::poisson::stream_location;
use gprs_core::samplers::gprs_global;
use gprs_core::{
    build_stretch, DensityRatioPair, Error, Proposal, ProtocolConfig, RngKey, SampleCode, SplitFn,
    Variant,
};
use proptest::prelude::*;

#[test]
fn byte_layout() {
    assert_eq!(
        to_bytes(&SampleCode::global(1, 0)).unwrap(),
        vec![0, 0b1000_0000]
    );
    // 2 raw thread bits "10" then delta(1) = "1"
    assert_eq!(
        to_bytes(&SampleCode::parallel(3, 1, 4, 0)).unwrap(),
        vec![1, 0b1010_0000]
    );
    assert_eq!(
        encode_index(&SampleCode::parallel(3, 1, 4, 0))
            .unwrap()
            .len_bits(),
        3
    );
    // delta(10) = 00100010
    assert_eq!(
        to_bytes(&SampleCode::bnb(10, 0)).unwrap(),
        vec![2, 0b0010_0010]
    );
    // delta(17) = 001010001, spills into a zero-padded second byte
    assert_eq!(
        to_bytes(&SampleCode::global(17, 0)).unwrap(),
        vec![0, 0b0010_1000, 0b1000_0000]
    );
}

#[test]
fn malformed_inputs() {
    assert!(matches!(from_bytes(&[], 0, None), Err(Error::Truncated(_))));
    assert!(matches!(
        from_bytes(&[0], 0, None),
        Err(Error::Truncated(_))
    ));
    assert!(from_bytes(&[3, 0x80], 0, None).is_err());
    // parallel code without a thread count
    assert!(from_bytes(&[1, 0xa0], 0, None).is_err());
    // all-zero payload never terminates the length prefix
    assert!(from_bytes(&[0, 0, 0], 0, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    #[test]
    fn codes_roundtrip(index in 1u64.., threads in 1u64..64, j in 0u64..64, kind in 0u8..3, seed in any::<u64>()) {
        let code = match kind {
            0 => SampleCode::global(index, seed),
            1 => SampleCode::parallel(j % threads + 1, index, threads, seed),
            _ => SampleCode::bnb(index, seed),
        };
        let bytes = to_bytes(&code).unwrap();
        prop_assert_eq!(from_bytes(&bytes, seed, Some(threads)).unwrap(), code);
        let bits = encode_index(&code).unwrap().len_bits() as u32;
        prop_assert!(bits >= elias_delta_len(index));
    }
}

#[test]
fn identical_target_takes_one_step() {
    let pair = DensityRatioPair::uniform(1.0).unwrap();
    let m = build_stretch(&pair).unwrap();
    for s in 0..50 {
        let cfg = ProtocolConfig::new(s, Proposal::Uniform);
        let (res, bytes) = channel_encode(&m, Variant::Global, &cfg).unwrap();
        assert_eq!(res.steps, 1);
        let dec = channel_decode(&bytes, &cfg).unwrap();
        assert_eq!(
            dec.x,
            stream_location(Proposal::Uniform, RngKey::new(s, 1), 1).unwrap()
        );
    }
}

#[test]
fn decoding_is_pure_and_seed_sensitive() {
    let pair = DensityRatioPair::gaussian(0.7, 0.2).unwrap();
    let m = build_stretch(&pair).unwrap();
    let mut cfg = ProtocolConfig::new(42, Proposal::Normal);
    cfg.threads = 3;
    for variant in [Variant::Global, Variant::Parallel, Variant::Bnb] {
        let (res, bytes) = channel_encode(&m, variant, &cfg).unwrap();
        let a = channel_decode(&bytes, &cfg).unwrap();
        assert_eq!(a, channel_decode(&bytes, &cfg).unwrap());
        assert_eq!(a.x, res.x);
        let mut other = cfg;
        other.seed = 43;
        assert_ne!(channel_decode(&bytes, &other).unwrap().x, res.x);
    }
}

#[test]
fn dyadic_branch_and_bound_roundtrips() {
    let mut cfg = ProtocolConfig::new(0, Proposal::Laplace);
    cfg.split = SplitFn::dyadic(-8.0, 8.0).unwrap();
    for s in 0..500 {
        cfg.seed = seed(11, 0, s);
        let pair = DensityRatioPair::laplace(-1.0 + s as f64 / 250.0, 0.3).unwrap();
        let m = build_stretch(&pair).unwrap();
        let (res, bytes) = channel_encode(&m, Variant::Bnb, &cfg).unwrap();
        let dec = channel_decode(&bytes, &cfg).unwrap();
        assert_eq!(dec.x.to_bits(), res.x.to_bits());
        assert_eq!(dec.regenerated, res.steps);
    }
}

#[test]
fn proposal_mismatch_is_rejected() {
    let m = build_stretch(&DensityRatioPair::uniform(0.5).unwrap()).unwrap();
    let cfg = ProtocolConfig::new(0, Proposal::Normal);
    assert!(matches!(
        channel_encode(&m, Variant::Global, &cfg),
        Err(Error::Config(_))
    ));
}

#[test]
fn global_index_log_within_kl_bound() {
    for (mean, var) in [(1.0, 0.25), (2.0, 0.1), (0.3, 0.02)] {
        let pair = DensityRatioPair::gaussian(mean, var).unwrap();
        let m = build_stretch(&pair).unwrap();
        let logs: Vec<f64> = (0..20_000)
            .map(|i| {
                (gprs_global(&m, RngKey::new(seed(12, 0, i), 1))
                    .unwrap()
                    .code
                    .index as f64)
                    .log2()
            })
            .collect();
        let (avg, se) = mean_se(&logs);
        let bound = global_index_log_bound(pair.divergences().0);
        assert!(avg <= bound + 4.0 * se, "{avg} > {bound}");
    }
}

#[test]
fn zeta_rules() {
    assert!((LambdaRule::Inverse.lambda(4.0) - 1.25).abs() < 1e-15);
    let shifted = 1.0 + 1.0 / (4.0 + 2.0 * std::f64::consts::LOG2_E);
    assert!((LambdaRule::Shifted.lambda(4.0) - shifted).abs() < 1e-15);
    // Zeta(2): -log2(1 / zeta(2)) at n = 1
    let z2 = std::f64::consts::PI.powi(2) / 6.0;
    assert!((zeta_ideal_codelength(1, 2.0).unwrap() - z2.log2()).abs() < 1e-12);
    assert!(zeta_ideal_codelength(0, 2.0).is_err());
}
