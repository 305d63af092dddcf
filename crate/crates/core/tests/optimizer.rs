mod common;

use momtopo::metrics::ObjectiveSpec;
use momtopo::optimizer::ga::{crossover, init_population, mutate};
use momtopo::optimizer::{evaluate_gene, local_descent, memetic_run, LocalStop, MemeticConfig};
use momtopo::reanalysis::LinearSystem;
use momtopo::shapes::{derive_sets, Gene};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::toy;

fn toy_problem() -> (LinearSystem, momtopo::metrics::CompositeObjective, Gene) {
    let ops = toy();
    let sys = LinearSystem::from_operators(&ops);
    let obj = ObjectiveSpec::q_composite(1.0, 0.5).compile(&ops).unwrap();
    let template = Gene::zeros(ops.n_dof(), &ops.gap_dofs).unwrap();
    (sys, obj, template)
}

#[test]
fn random_initial_genes_are_unbiased() {
    let template = Gene::zeros(64, &[10, 20]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let pop = init_population(&template, 2000, &mut rng);
    assert_eq!(pop[0].count_ones(), 0);
    assert_eq!(pop[1].count_ones(), template.n_opt());
    let ones: usize = pop[2..].iter().map(Gene::count_ones).sum();
    let p = ones as f64 / (1998 * template.n_opt()) as f64;
    // 3σ of a fair Bernoulli over ~124k draws is about 0.0043
    assert!((p - 0.5).abs() < 0.005, "bit frequency {p}");
    for bit in 0..template.n_opt() {
        let f = pop[2..].iter().filter(|g| g.get(bit)).count() as f64 / 1998.0;
        assert!((f - 0.5).abs() < 0.06, "bit {bit} frequency {f}");
    }
}

#[test]
fn descent_ends_in_a_true_local_minimum() {
    let (sys, obj, template) = toy_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = MemeticConfig::default();
    for _ in 0..30 {
        let bits: Vec<bool> = (0..template.n_opt()).map(|_| rng.random_bool(0.5)).collect();
        let d = local_descent(&sys, &obj, &template.with_bits(&bits).unwrap(), &cfg);
        assert_eq!(d.stop, LocalStop::LocalMinimum);
        for bit in 0..template.n_opt() {
            let f = evaluate_gene(&sys, &obj, &d.gene.flipped(bit));
            assert!(f >= d.f * (1.0 - 1e-12), "flipping bit {bit} improves {} to {f}", d.f);
        }
    }
}

#[test]
fn descent_only_commits_improvements() {
    let (sys, obj, template) = toy_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..30 {
        let bits: Vec<bool> = (0..template.n_opt()).map(|_| rng.random_bool(0.7)).collect();
        let d = local_descent(&sys, &obj, &template.with_bits(&bits).unwrap(), &MemeticConfig::default());
        assert!(d.trace.windows(2).all(|w| w[1].f < w[0].f), "{:?}", d.trace);
        assert!(d.gene.is_active(template.fixed()[0]));
    }
}

#[test]
fn removal_only_descent_shrinks_monotonically() {
    let (sys, obj, template) = toy_problem();
    let cfg = MemeticConfig { additions: false, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..30 {
        let bits: Vec<bool> = (0..template.n_opt()).map(|_| rng.random_bool(0.8)).collect();
        let d = local_descent(&sys, &obj, &template.with_bits(&bits).unwrap(), &cfg);
        assert!(d.trace.windows(2).all(|w| w[1].active_dofs < w[0].active_dofs), "{:?}", d.trace);
    }
}

#[test]
fn addition_only_descent_grows_monotonically() {
    let (sys, obj, template) = toy_problem();
    let cfg = MemeticConfig { removals: false, ..Default::default() };
    let d = local_descent(&sys, &obj, &template, &cfg);
    assert!(d.trace.windows(2).all(|w| w[1].active_dofs > w[0].active_dofs), "{:?}", d.trace);
}

#[test]
fn every_population_gene_keeps_the_feed() {
    let (sys, obj, template) = toy_problem();
    for seed in 0..5 {
        let cfg = MemeticConfig { n_agents: 5, j_max: 5, seed, ..Default::default() };
        let r = memetic_run(&sys, &obj, &template, &cfg, None).unwrap();
        assert_eq!(r.population.len(), 5);
        for a in &r.population {
            assert!(a.gene.is_active(template.fixed()[0]));
            assert!(a.gene.same_parameterization(&template));
        }
        assert!(r.stats.windows(2).all(|w| w[1].best <= w[0].best));
        assert!(r.population.windows(2).all(|w| w[0].f <= w[1].f));
    }
}

#[test]
fn offspring_scope_is_also_reproducible() {
    let (sys, obj, template) = toy_problem();
    let cfg = MemeticConfig {
        n_agents: 6,
        j_max: 5,
        seed: 9,
        descent_scope: momtopo::optimizer::DescentScope::Offspring,
        ..Default::default()
    };
    let a = memetic_run(&sys, &obj, &template, &cfg, None).unwrap();
    let b = memetic_run(&sys, &obj, &template, &cfg, None).unwrap();
    assert_eq!(a.trace_csv(), b.trace_csv());
}

proptest! {
    #[test]
    fn fixed_dofs_survive_variation(seed in any::<u64>(), n_dof in 8usize..80, n_agents in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fixed: Vec<usize> = (0..n_dof).filter(|_| rng.random_bool(0.1)).collect();
        let template = Gene::zeros(n_dof, &fixed).unwrap();
        prop_assume!(template.n_opt() >= 2);
        let mut pop = init_population(&template, n_agents, &mut rng);
        for _ in 0..10 {
            pop = crossover(&pop, 1.0, &mut rng).iter().map(|g| mutate(g, 1.0, 2, &mut rng)).collect();
            for g in &pop {
                prop_assert!(fixed.iter().all(|&d| g.is_active(d)));
                let sets = derive_sets(g, None).unwrap();
                prop_assert!(sets.removable.iter().all(|d| !fixed.contains(d)));
            }
        }
    }
}
