use digicopy::EngineConfig;
use digicopy_bench::measure_point;

fn main() {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let threads = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let report = measure_point(n, 6, EngineConfig::default().with_threads(threads));
    println!("{report}");
}
