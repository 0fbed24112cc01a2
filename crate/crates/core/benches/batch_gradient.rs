use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use marl_core::checks::random_episode;
use marl_core::envsim::EnvSpec;
use marl_core::episode::{EpisodeRecord, EpisodeShape};
use marl_core::nets::loss::{batch_targets, loss_and_grad};
use marl_core::nets::{Execution, Layout, MixerKind, Model};
use marl_core::replay::TrainingBatch;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// One learner step's worth of work on 3m-shaped episodes at default widths.
fn batch_gradient(c: &mut Criterion) {
    let spec = EnvSpec::scenario("3m").unwrap();
    let shape = EpisodeShape::from(&spec);
    let layout = Layout {
        n_agents: spec.n_agents,
        n_actions: spec.n_actions,
        obs_dim: spec.obs_dim,
        state_dim: spec.state_dim,
        hidden: Layout::DEFAULT_HIDDEN,
        mixer: MixerKind::Mono,
        embed: Layout::DEFAULT_EMBED,
    };
    let model = Model::init(layout, 1);
    let target = Model::init(layout, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut group = c.benchmark_group("loss_and_grad");
    group.sample_size(10);
    for batch in [8usize, 32] {
        let episodes: Vec<EpisodeRecord> = (0..batch).map(|i| random_episode(&shape, 20 + i % 20, false, &mut rng)).collect();
        let padded = TrainingBatch::pad(&shape, &episodes);
        let views = padded.views();
        let targets = batch_targets(&target, &views, 0.99, Execution::Sequential);
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, batch), &exec, |b, &exec| {
                b.iter(|| loss_and_grad(&model, &views, &targets, exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, batch_gradient);
criterion_main!(benches);
