use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use maxnit_core::assembly::{build_system, Params};
use maxnit_core::linsolve::solve;
use maxnit_core::mesh::{gen_square_crisscross, gen_square_uniform, powell_sabin_refine};
use maxnit_core::problems::square_case;

fn assembly(c: &mut Criterion) {
    let case = square_case(1.0).unwrap();
    let params = Params::stabilised(2.0, 1.0);
    let mut g = c.benchmark_group("assemble");
    for n in [16, 32, 64] {
        let mesh = gen_square_crisscross(n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &mesh, |b, m| {
            b.iter(|| build_system(m, &params, &case).unwrap())
        });
    }
    g.finish();
}

fn direct_solve(c: &mut Criterion) {
    let case = square_case(1.0).unwrap();
    let params = Params::stabilised(2.0, 1.0);
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for n in [16, 32] {
        let system = build_system(&gen_square_crisscross(n).unwrap(), &params, &case).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &system, |b, s| b.iter(|| solve(s).unwrap()));
    }
    g.finish();
}

fn refinement(c: &mut Criterion) {
    let base = gen_square_uniform(64).unwrap();
    c.bench_function("powell_sabin_refine/64", |b| b.iter(|| powell_sabin_refine(&base).unwrap()));
}

criterion_group!(benches, assembly, direct_solve, refinement);
criterion_main!(benches);
