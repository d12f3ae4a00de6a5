mod common;

use common::{oracle_log_likelihood, random_instance, rel_close};
use pwilm::likelihood::log_likelihood;
use pwilm::rng::{stream_rng, Stream};
use pwilm::{
    infection_probability, CompartmentIndex, EventHistory, EventRecord, Framework, KernelSpec, LikelihoodData,
    ModelSpec, Population,
};
use proptest::prelude::*;

#[test]
fn matches_brute_force_on_random_instances() {
    let mut finite = 0;
    for k in 0..60 {
        let inst = random_instance(k);
        let fast = log_likelihood(&inst.history, &inst.population, &inst.model, &inst.theta, inst.window).unwrap();
        let slow = oracle_log_likelihood(&inst.history, &inst.population, &inst.model, &inst.theta, inst.window);
        assert!(rel_close(fast, slow, 1e-10), "instance {k}: {fast} vs {slow}");
        finite += fast.is_finite() as usize;
    }
    assert!(finite >= 45, "only {finite} finite instances");
}

#[test]
fn factorises_over_steps() {
    for k in 0..30 {
        let inst = random_instance(k);
        let (a, b) = inst.window;
        let whole = log_likelihood(&inst.history, &inst.population, &inst.model, &inst.theta, (a, b)).unwrap();
        if !whole.is_finite() {
            continue;
        }
        let parts: f64 = (a..b)
            .map(|t| log_likelihood(&inst.history, &inst.population, &inst.model, &inst.theta, (t, t + 1)).unwrap())
            .sum();
        assert!(rel_close(whole, parts, 1e-10), "instance {k}: {whole} vs {parts}");
    }
}

fn with_far_individual(pop: &Population<f64>, h: &EventHistory) -> (Population<f64>, EventHistory) {
    let mut coords = pop.coords().to_vec();
    coords.push((1e9, 1e9));
    let mut records = h.records().to_vec();
    records.push(EventRecord::default());
    (Population::new(coords).unwrap(), EventHistory::new(h.framework(), records, h.horizon()).unwrap())
}

#[test]
fn far_susceptible_changes_nothing_when_last_bin_is_zero() {
    let mut rng = stream_rng(5, Stream::Population);
    let pop = Population::uniform_square(40, 5.0, &mut rng).unwrap();
    let model = ModelSpec::si(KernelSpec::piecewise_constant(vec![1.5, 3.0]));
    let theta = [0.3, 0.05, 0.0];
    let mut cfg = pwilm::SimulationConfig::new(10, 5);
    cfg.min_final_size = 3;
    let h = pwilm::simulate(&pop, &model, &theta, &cfg).unwrap();
    let (pop2, h2) = with_far_individual(&pop, &h);
    let before = log_likelihood(&h, &pop, &model, &theta, (0, 10)).unwrap();
    let after = log_likelihood(&h2, &pop2, &model, &theta, (0, 10)).unwrap();
    assert!(before.is_finite());
    assert!((before - after).abs() <= 1e-12, "{before} vs {after}");
}

#[test]
fn far_susceptible_adds_only_survival_terms() {
    let mut rng = stream_rng(6, Stream::Population);
    let pop = Population::uniform_square(40, 5.0, &mut rng).unwrap();
    let model = ModelSpec { sparks: true, ..ModelSpec::si(KernelSpec::power_law()) };
    let theta = [0.2, 1.5, 0.003];
    let h = pwilm::simulate(&pop, &model, &theta, &pwilm::SimulationConfig::new(8, 6)).unwrap();
    let (pop2, h2) = with_far_individual(&pop, &h);
    let before = log_likelihood(&h, &pop, &model, &theta, (0, 8)).unwrap();
    let after = log_likelihood(&h2, &pop2, &model, &theta, (0, 8)).unwrap();
    let index = CompartmentIndex::new(&h2);
    let kernel = model.kernel(&theta);
    let survival: f64 = (0..8)
        .map(|t| (1.0 - infection_probability(40, t, &index, &pop2, &kernel, 0.003).unwrap()).ln())
        .sum();
    assert!((after - before - survival).abs() <= 1e-9 * before.abs());
}

#[test]
fn fitted_data_object_agrees_with_free_function() {
    let inst = random_instance(7);
    let data = LikelihoodData::with_window(&inst.history, &inst.population, &inst.model, inst.window).unwrap();
    let free = log_likelihood(&inst.history, &inst.population, &inst.model, &inst.theta, inst.window).unwrap();
    assert_eq!(data.log_likelihood(&inst.theta), free);
}

#[test]
fn compartments_partition_everyone() {
    for k in 0..20 {
        let inst = random_instance(k);
        let h = &inst.history;
        for t in 0..=h.horizon() {
            let sets = h.compartment_sets(t).unwrap();
            let mut all: Vec<usize> = [&sets.susceptible, &sets.exposed, &sets.infectious, &sets.removed]
                .into_iter()
                .flatten()
                .copied()
                .collect();
            all.sort();
            assert_eq!(all, (0..h.len()).collect::<Vec<_>>());
            assert_eq!(h.compartment_sets(t).unwrap(), sets);
        }
    }
}

#[test]
fn distances_are_a_metric() {
    let pop: Population<f64> = Population::uniform_square(60, 7.0, &mut stream_rng(8, Stream::Population)).unwrap();
    for i in 0..60 {
        assert_eq!(pop.distance(i, i), 0.0);
        for j in 0..60 {
            assert!((pop.distance(i, j) - pop.distance(j, i)).abs() <= 1e-9);
            for k in (0..60).step_by(7) {
                assert!(pop.distance(i, k) <= pop.distance(i, j) + pop.distance(j, k) + 1e-9);
            }
        }
    }
}

fn probability(pop: &Population<f64>, infectious: &[usize], theta: &[f64], sparks: f64) -> f64 {
    let model = ModelSpec::si(KernelSpec::piecewise_constant(vec![1.0, 2.5]));
    let mut records = vec![EventRecord::default(); pop.len()];
    for &j in infectious {
        records[j].infectious = Some(0);
    }
    let h = EventHistory::new(Framework::SI, records, 1).unwrap();
    infection_probability(0, 0, &CompartmentIndex::new(&h), pop, &model.kernel(theta), sparks).unwrap()
}

proptest! {
    #[test]
    fn probability_is_monotone(
        a in prop::array::uniform3(0.0f64..1.0),
        bump in 0.0f64..0.5,
        which in 0usize..3,
        eps in 0.0f64..0.1,
        seed in 0u64..1000,
    ) {
        let pop = Population::uniform_square(12, 4.0, &mut stream_rng(seed, Stream::Population)).unwrap();
        let base = probability(&pop, &[1, 2, 3], &a, eps);
        prop_assert!((0.0..=1.0).contains(&base));
        let mut up = a;
        up[which] += bump;
        prop_assert!(probability(&pop, &[1, 2, 3], &up, eps) >= base);
        prop_assert!(probability(&pop, &[1, 2, 3], &a, eps + bump) >= base);
        prop_assert!(probability(&pop, &[1, 2, 3, 4], &a, eps) >= base);
    }
}
