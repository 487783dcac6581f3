mod common;

use haulcharge_core::oracle::{oracle_solve, oracle_solve_without, random_instance, OracleError};
use haulcharge_core::solver::{check_plan, day_instance, solve, solve_day, ChargeInstance, SolveError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, max_k: usize) -> ChargeInstance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), max_k)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_plan_passes_the_checker(seed in any::<u64>(), k in 1usize..60) {
        let inst = instance(seed, k);
        if let Ok(plan) = solve(&inst) {
            let v = check_plan(&inst, &plan);
            prop_assert!(v.is_empty(), "{:?}", v);
        }
    }

    #[test]
    fn price_scaling_keeps_the_plan(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let inst = instance(seed, 10);
        let mut scaled = inst.clone();
        for p in &mut scaled.prices {
            *p *= alpha;
        }
        match (solve(&inst), solve(&scaled)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.x, &b.x);
                for (x, y) in a.e_plus.iter().zip(&b.e_plus) {
                    prop_assert!(close(*x, *y, 1e-9));
                }
                prop_assert!(close(a.total_cost * alpha, b.total_cost, 1e-9));
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "verdicts differ: {:?} / {:?}", a, b),
        }
    }

    #[test]
    fn raising_one_price_never_lowers_cost(seed in any::<u64>(), site in any::<prop::sample::Index>(), bump in 0.0f64..200.0) {
        let inst = instance(seed, 10);
        let Ok(before) = solve(&inst) else { return Ok(()); };
        let k = site.index(inst.prices.len());
        let mut raised = inst.clone();
        raised.prices[k] += bump;
        let after = solve(&raised).unwrap();
        prop_assert!(after.total_cost >= before.total_cost - 1e-9 * before.total_cost.max(1.0));
        // the energy bought where the price rose cannot grow
        prop_assert!(after.e_plus[k] <= before.e_plus[k] + 1e-6 * inst.spec.e_max_kwh);
    }

    #[test]
    fn adding_a_site_never_raises_cost(seed in any::<u64>(), seg in any::<prop::sample::Index>(), split in 0.0f64..=1.0, price in 0.0f64..500.0) {
        let inst = instance(seed, 10);
        let Ok(before) = solve(&inst) else { return Ok(()); };
        if inst.seg_energy.is_empty() {
            return Ok(());
        }
        let j = seg.index(inst.seg_energy.len());
        let mut more = inst.clone();
        let e = more.seg_energy[j];
        more.seg_energy[j] = e * split;
        more.seg_energy.insert(j + 1, e * (1.0 - split));
        more.prices.insert(j + 1, price);
        let after = solve(&more).unwrap();
        prop_assert!(after.total_cost <= before.total_cost + 1e-9 * before.total_cost.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn forbidding_a_used_site_never_helps(seed in any::<u64>()) {
        let inst = instance(seed, 7);
        let Ok(plan) = solve(&inst) else { return Ok(()); };
        for k in (0..plan.x.len()).filter(|&k| plan.x[k]) {
            match oracle_solve_without(&inst, k) {
                Ok(alt) => prop_assert!(alt.total_cost >= plan.total_cost - 1e-9 * plan.total_cost.max(1.0)),
                Err(OracleError::Infeasible) => {}
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }

    #[test]
    fn uniform_prices_cost_is_price_times_energy(seed in any::<u64>(), price in 1.0f64..200.0) {
        let mut inst = instance(seed, 8);
        for p in &mut inst.prices {
            *p = price;
        }
        if let (Ok(a), Ok(b)) = (solve(&inst), oracle_solve(&inst)) {
            prop_assert!(close(a.total_cost, b.total_cost, 1e-6));
            prop_assert!(close(a.total_cost, price * a.energy_kwh() / 1000.0, 1e-9));
            // at least the net energy the day consumes must be bought
            let spec = &inst.spec;
            let net: f64 = inst.seg_energy.iter().map(|e| e / spec.eta_discharge).sum::<f64>()
                + spec.e_terminal() - spec.e0_kwh;
            prop_assert!(a.energy_kwh() * spec.eta_charge >= net - 1e-6);
        }
    }
}

#[test]
fn infeasibility_names_the_first_failing_segment() {
    let mut inst = instance(1, 3);
    inst.seg_energy = vec![10.0, 10.0 * inst.spec.e_max_kwh, 10.0];
    inst.prices = vec![50.0; 4];
    match solve(&inst) {
        Err(SolveError::Infeasible(haulcharge_core::solver::Infeasibility::Depleted { segment, .. })) => {
            assert_eq!(segment, 1)
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(oracle_solve(&inst), Err(OracleError::Infeasible));
}

#[test]
fn fixture_route_plan_equals_oracle() {
    let (_region, scenario) = common::fixture_scenario();
    let routes = &scenario.routes[&("Dallas".to_string(), "Houston".to_string())];
    let spec = &scenario.spec;
    let mut compared = 0;
    for route in routes.iter().filter(|r| r.segments.len() <= 12) {
        let inst = day_instance(route, spec, spec.capacity_tons).unwrap();
        let plan = solve_day(route, spec, spec.capacity_tons).unwrap();
        let oracle = oracle_solve(&inst).unwrap();
        assert!(close(plan.total_cost, oracle.total_cost, 1e-6));
        assert_eq!(plan.x, oracle.x);
        assert!(check_plan(&inst, &plan).is_empty());
        compared += 1;
    }
    assert!(compared >= 1);
}

#[test]
fn zero_load_day_costs_nothing() {
    let (_region, scenario) = common::fixture_scenario();
    let route = &scenario.routes[&("Austin".to_string(), "El Paso".to_string())][0];
    let plan = solve_day(route, &scenario.spec, 0.0).unwrap();
    assert_eq!(plan.total_cost, 0.0);
    assert!(plan.x.iter().all(|x| !x));
}

#[test]
fn scaling_fixture_prices_by_three() {
    let (_region, scenario) = common::fixture_scenario();
    let spec = &scenario.spec;
    for routes in scenario.routes.values() {
        for route in routes {
            let inst = day_instance(route, spec, spec.capacity_tons).unwrap();
            let mut tripled = inst.clone();
            tripled.prices.iter_mut().for_each(|p| *p *= 3.0);
            let a = solve(&inst).unwrap();
            let b = solve(&tripled).unwrap();
            assert_eq!(a.x, b.x);
            assert_eq!(a.e_plus, b.e_plus);
            assert!(close(3.0 * a.total_cost, b.total_cost, 1e-12));
        }
    }
}
