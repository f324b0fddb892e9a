use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use ckcd::icp::{icp_of_formula, CombinatorialProof};
use ckcd::oracle::run_corpus;
use ckcd::par::{check_icp_batch, Mode};
use ckcd::sequent::{Bounds, Sequent};
use ckcd::Logic;

#[path = "../tests/common/mod.rs"]
mod common;

const MODES: [(&str, Mode); 2] = [
    ("parallel", Mode::Parallel),
    ("sequential", Mode::Sequential),
];

fn batch_check(c: &mut Criterion) {
    let proofs: Vec<CombinatorialProof> = common::corpus(3, 400)
        .iter()
        .filter_map(|f| {
            icp_of_formula(f, Logic::CD, Bounds::for_sequent(&Sequent::goal(f.clone())))
                .ok()
                .flatten()
        })
        .collect();
    let mut g = c.benchmark_group("check_icp_batch");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, proofs.len()), &proofs, |b, ps| {
            b.iter(|| check_icp_batch(mode, black_box(ps)))
        });
    }
    g.finish();
}

fn corpus_oracle(c: &mut Criterion) {
    let corpus = common::corpus(3, 200);
    let mut g = c.benchmark_group("run_corpus");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, corpus.len()), &corpus, |b, fs| {
            b.iter(|| run_corpus(mode, black_box(fs), Logic::CK))
        });
    }
    g.finish();
}

criterion_group!(benches, batch_check, corpus_oracle);
criterion_main!(benches);
