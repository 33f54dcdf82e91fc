use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use gprs_bench::workloads;
use gprs_core::codec::{channel_decode, channel_encode, from_bytes, to_bytes};
use gprs_core::{ProtocolConfig, SampleCode, SplitFn, Variant};

fn bitstream(c: &mut Criterion) {
    let mut group = c.benchmark_group("bitstream");
    for n in [1u64, 1 << 10, 1 << 40] {
        let code = SampleCode::global(n, 0);
        let bytes = to_bytes(&code).unwrap();
        group.bench_with_input(BenchmarkId::new("encode", n), &code, |b, code| {
            b.iter(|| black_box(to_bytes(code).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("decode", n), &bytes, |b, bytes| {
            b.iter(|| black_box(from_bytes(bytes, 0, None).unwrap()))
        });
    }
    group.finish();
}

fn channel(c: &mut Criterion) {
    let loads = workloads().unwrap();
    let w = loads.iter().find(|w| w.name == "gaussian").unwrap();
    let proposal = w.stretch.pair().proposal();
    let mut group = c.benchmark_group("channel/gaussian");
    let mut dyadic = ProtocolConfig::new(0, proposal);
    dyadic.split = SplitFn::dyadic(-8.0, 8.0).unwrap();
    let mut parallel = ProtocolConfig::new(0, proposal);
    parallel.threads = 4;
    for (label, variant, base) in [
        ("global", Variant::Global, ProtocolConfig::new(0, proposal)),
        ("parallel_j4", Variant::Parallel, parallel),
        (
            "bnb_unimodal",
            Variant::Bnb,
            ProtocolConfig::new(0, proposal),
        ),
        ("bnb_dyadic", Variant::Bnb, dyadic),
    ] {
        let mut cfg = base;
        group.bench_function(BenchmarkId::new("encode", label), |b| {
            b.iter(|| {
                cfg.seed += 1;
                black_box(channel_encode(&w.stretch, variant, &cfg).unwrap())
            })
        });
        let (_, bytes) = channel_encode(&w.stretch, variant, &base).unwrap();
        group.bench_function(BenchmarkId::new("decode", label), |b| {
            b.iter(|| black_box(channel_decode(&bytes, &base).unwrap().x))
        });
    }
    group.finish();
}

criterion_group!(benches, bitstream, channel);
criterion_main!(benches);
