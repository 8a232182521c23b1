use mdq::codec::{arith, build, encode, rate, stream, CodecKind, Decoder, EstimatorConfig};
use mdq::exec::ExecMode;
use mdq::harness::source::{Family, SourceSpec};
use mdq::region::{test_channel_params, DistortionTriple, RateTarget};
use proptest::prelude::*;

fn topo(kind: CodecKind, seed: u64) -> mdq::codec::CodecTopology {
    let d = DistortionTriple::new(1.0, 0.1, 0.1, 0.05).unwrap();
    let c = test_channel_params(&d).unwrap().active().unwrap();
    let target = if kind == CodecKind::Successive { RateTarget::Vertex(2) } else { RateTarget::Balanced };
    build(kind, &c, target, seed, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dump_roundtrips(xs in prop::collection::vec(-50.0f64..50.0, 0..400), seed in any::<u64>(), split in any::<bool>(), drop in 0u8..3) {
        let kind = if split { CodecKind::Splitting } else { CodecKind::Successive };
        let t = topo(kind, seed);
        let mut s = encode(&t, &xs, ExecMode::Sequential).unwrap().streams;
        if drop > 0 {
            s = s.lose(drop);
        }
        let bytes = stream::to_bytes(&s);
        let back = stream::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &s);
    }

    #[test]
    fn arithmetic_coder_roundtrips(idx in prop::collection::vec(-40i64..40, 0..2000), nctx in 1usize..5) {
        let ctx: Vec<u32> = (0..idx.len()).map(|i| (i % nctx) as u32).collect();
        let c = arith::encode(&idx, &ctx, nctx).unwrap();
        prop_assert_eq!(arith::decode(&c, &ctx).unwrap(), idx);
    }

    #[test]
    fn truncated_dumps_are_rejected(cut in 1usize..60) {
        let t = topo(CodecKind::Splitting, 1);
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 3.0).collect();
        let bytes = stream::to_bytes(&encode(&t, &xs, ExecMode::Sequential).unwrap().streams);
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(stream::from_bytes(&bytes[..keep]).is_err());
    }
}

#[test]
fn decoding_from_a_dump_matches_direct_decoding() {
    let t = topo(CodecKind::Splitting, 77);
    let x = SourceSpec::new(Family::Gaussian, 5).generate(20_000, ExecMode::Sequential).unwrap().x;
    let enc = encode(&t, &x, ExecMode::Sequential).unwrap();
    let mut buf = Vec::new();
    stream::write_to(&mut buf, &enc.streams).unwrap();
    let back = stream::read_from(&mut buf.as_slice()).unwrap();
    for which in [Decoder::Side1, Decoder::Side2, Decoder::Central] {
        let a = mdq::codec::decode(&t, &enc.streams, which, ExecMode::Sequential).unwrap();
        let b = mdq::codec::decode(&t, &back, which, ExecMode::Sequential).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn streams_from_another_topology_are_refused() {
    let a = topo(CodecKind::Splitting, 1);
    let b = topo(CodecKind::Splitting, 2);
    let s = encode(&a, &[0.5; 100], ExecMode::Sequential).unwrap().streams;
    assert!(mdq::codec::decode(&b, &s, Decoder::Side1, ExecMode::Sequential).is_err());
}

#[test]
fn coded_length_tracks_estimated_rate() {
    let t = topo(CodecKind::Successive, 3);
    let x = SourceSpec::new(Family::Gaussian, 6).generate(200_000, ExecMode::Parallel).unwrap().x;
    let enc = encode(&t, &x, ExecMode::Parallel).unwrap();
    let cfg = EstimatorConfig::default();
    for st in enc.streams.all_streams() {
        let est = rate::stage_rate(&t, st, &cfg).unwrap();
        let q = t.stages[st.stage].quantizer.as_ref().unwrap();
        let mut cur = q.cursor(0);
        let ctx: Vec<u32> = (0..x.len()).map(|_| ((cur.next_unit() * cfg.bins as f64) as u32).min(cfg.bins as u32 - 1)).collect();
        let coded = arith::encode(&st.indices, &ctx, cfg.bins).unwrap();
        let bps = coded.bits_per_sample();
        assert!(bps >= est - 0.02 && bps <= est + 0.1, "stage {}: coded {bps} vs estimate {est}", st.stage);
    }
}

#[test]
fn constant_source_has_near_zero_first_stage_rate() {
    let t = topo(CodecKind::Successive, 4);
    let x = vec![0.0; 200_000];
    let enc = encode(&t, &x, ExecMode::Parallel).unwrap();
    let r = rate::stage_rate(&t, &enc.streams.desc2.as_ref().unwrap()[0], &EstimatorConfig::default()).unwrap();
    let unconditional = rate::empirical_entropy(&enc.streams.desc2.as_ref().unwrap()[0].indices);
    assert!(unconditional <= 1.0 + 1e-3);
    assert!(r < 0.05, "conditional rate {r}");
}
