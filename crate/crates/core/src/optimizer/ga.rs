//! Genetic operators on genes: initialization, binary tournament, single-point
//! crossover, bit-flip mutation and elitist merging.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::shapes::Gene;

/// A gene with its objective value (`+∞` for failed evaluations).
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub gene: Gene,
    pub f: f64,
}

/// All-zeros and all-ones genes followed by `n_agents - 2` uniform random ones.
pub fn init_population<R: Rng>(template: &Gene, n_agents: usize, rng: &mut R) -> Vec<Gene> {
    assert!(n_agents >= 2, "population needs at least two agents");
    let zeros = template.cleared();
    let mut ones = zeros.clone();
    for i in 0..ones.n_opt() {
        ones.set(i, true);
    }
    let mut out = vec![zeros.clone(), ones];
    for _ in 2..n_agents {
        let mut g = zeros.clone();
        for i in 0..g.n_opt() {
            g.set(i, rng.random_bool(0.5));
        }
        out.push(g);
    }
    out
}

/// Index of the better of two agents; ties keep the lower index.
fn better(agents: &[Agent], a: usize, b: usize) -> usize {
    match agents[a].f.total_cmp(&agents[b].f) {
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Equal => a.min(b),
    }
}

/// `N_ags` binary tournaments between distinct random agents.
pub fn tournament_select<R: Rng>(agents: &[Agent], rng: &mut R) -> Vec<Gene> {
    let n = agents.len();
    assert!(n >= 2, "tournament needs at least two agents");
    (0..n)
        .map(|_| {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            agents[better(agents, a, b)].gene.clone()
        })
        .collect()
}

/// Uniform cut position in `[1, N_opt - 1]`.
pub fn cut_point<R: Rng>(n_opt: usize, rng: &mut R) -> usize {
    rng.random_range(1..n_opt)
}

/// Children `a[..cut] ++ b[cut..]` and `b[..cut] ++ a[cut..]`.
pub fn cross(a: &Gene, b: &Gene, cut: usize) -> (Gene, Gene) {
    let (mut c, mut d) = (a.clone(), b.clone());
    for i in cut..a.n_opt() {
        c.set(i, b.get(i));
        d.set(i, a.get(i));
    }
    (c, d)
}

/// Shuffles the pool and crosses adjacent pairs with probability `p_c`,
/// returning as many offspring as parents. An odd last parent is paired with
/// a random partner and keeps only its first child.
pub fn crossover<R: Rng>(pool: &[Gene], p_c: f64, rng: &mut R) -> Vec<Gene> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::with_capacity(pool.len());
    let mut k = 0;
    while k < order.len() {
        let a = &pool[order[k]];
        let b = if k + 1 < order.len() {
            &pool[order[k + 1]]
        } else {
            &pool[order[rng.random_range(0..order.len() - 1)]]
        };
        let n_opt = a.n_opt();
        let (c, d) = if n_opt >= 2 && rng.random_bool(p_c) {
            cross(a, b, cut_point(n_opt, rng))
        } else {
            (a.clone(), b.clone())
        };
        out.push(c);
        if out.len() < pool.len() {
            out.push(d);
        }
        k += 2;
    }
    out
}

/// With probability `p_m`, flips `bits` distinct uniformly chosen positions.
pub fn mutate<R: Rng>(gene: &Gene, p_m: f64, bits: usize, rng: &mut R) -> Gene {
    let mut g = gene.clone();
    if g.n_opt() == 0 || !rng.random_bool(p_m) {
        return g;
    }
    for i in rand::seq::index::sample(rng, g.n_opt(), bits.min(g.n_opt())) {
        g.flip(i);
    }
    g
}

/// Best `n` of `parents ∪ offspring`; the sort is stable with parents first.
pub fn elitist_merge(parents: Vec<Agent>, offspring: Vec<Agent>, n: usize) -> Vec<Agent> {
    let mut all = parents;
    all.extend(offspring);
    all.sort_by(|a, b| a.f.total_cmp(&b.f));
    all.truncate(n);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn template(n: usize) -> Gene {
        Gene::zeros(n + 1, &[0]).unwrap()
    }

    #[test]
    fn two_agents_are_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = init_population(&template(5), 2, &mut rng);
        assert_eq!(p[0].count_ones(), 0);
        assert_eq!(p[1].count_ones(), 5);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = init_population(&template(40), 8, &mut ChaCha8Rng::seed_from_u64(5));
        let b = init_population(&template(40), 8, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn best_beats_worst() {
        let g = template(3);
        let agents = vec![Agent { gene: g.clone(), f: 1.0 }, Agent { gene: g.flipped(0), f: 2.0 }];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let pool = tournament_select(&agents, &mut rng);
            assert_eq!(pool.len(), 2);
            assert!(pool.iter().all(|p| *p == agents[0].gene));
        }
    }

    #[test]
    fn identical_parents_without_mutation() {
        let g = template(9).flipped(3).flipped(7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kids = crossover(&[g.clone(), g.clone(), g.clone()], 1.0, &mut rng);
        assert_eq!(kids.len(), 3);
        assert!(kids.iter().all(|k| *k == g));
        assert_eq!(mutate(&g, 0.0, 1, &mut rng), g);
        let m = mutate(&g, 1.0, 1, &mut rng);
        assert_eq!(crate::shapes::hamming(&g, &m).unwrap(), 1);
    }

    #[test]
    fn merge_is_sort_and_truncate() {
        let g = template(2);
        let mk = |f: f64| Agent { gene: g.clone(), f };
        let parents = vec![mk(3.0), mk(1.0), mk(5.0)];
        let worse = vec![mk(6.0), mk(7.0), mk(f64::INFINITY)];
        let better = vec![mk(0.1), mk(0.2), mk(0.3)];
        let fs = |v: Vec<Agent>| v.into_iter().map(|a| a.f).collect::<Vec<_>>();
        assert_eq!(fs(elitist_merge(parents.clone(), worse, 3)), vec![1.0, 3.0, 5.0]);
        assert_eq!(fs(elitist_merge(parents, better, 3)), vec![0.1, 0.2, 0.3]);
    }
}
