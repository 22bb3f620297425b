use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use malgray_core::clahe::{enhance, ClaheParams};
use malgray_core::classifier::{init_model, ClassifierConfig};
use malgray_core::converter::{convert, ByteStream, WidthTable};
use malgray_core::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bytes(len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..len).map(|_| rng.random()).collect()
}

fn bench_convert(c: &mut Criterion) {
    let table = WidthTable::default();
    let mut group = c.benchmark_group("convert");
    for kb in [50usize, 200, 1000] {
        let stream = ByteStream::new(random_bytes(kb * 1024), "bench").unwrap();
        group.throughput(Throughput::Bytes(stream.bytes.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{kb}KB")), &stream, |b, s| {
            b.iter(|| convert(black_box(s), &table).unwrap())
        });
    }
    group.finish();
}

fn bench_enhance(c: &mut Criterion) {
    let params = ClaheParams::default();
    let table = WidthTable::default();
    let mut group = c.benchmark_group("enhance");
    for kb in [50usize, 200, 1000] {
        let img = convert(&ByteStream::new(random_bytes(kb * 1024), "bench").unwrap(), &table).unwrap();
        group.throughput(Throughput::Elements((img.width() * img.height()) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{kb}KB")), &img, |b, img| {
            b.iter(|| enhance(black_box(img), &params).unwrap())
        });
    }
    group.finish();
}

fn bench_forward(c: &mut Criterion) {
    let model = init_model(&ClassifierConfig::default()).unwrap();
    let img = GrayImage::new(64, 64, random_bytes(64 * 64)).unwrap();
    c.bench_function("forward/default_64x64", |b| b.iter(|| model.predict(black_box(&img)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_convert, bench_enhance, bench_forward
}
criterion_main!(benches);
