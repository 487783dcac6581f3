use haulcharge_core::oracle::cross_check;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_solver_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let report = cross_check(&mut rng, 250, 8);
    for f in report.failures.iter().take(5) {
        eprintln!("{f}");
    }
    eprintln!(
        "{}/{} matched, {} generated, worst gap {:e}",
        report.matched, report.feasible, report.generated, report.worst_relative_gap
    );
    assert_eq!(report.feasible, 250);
    assert!(report.passed());
}

#[test]
fn tie_break_selects_same_sites() {
    use haulcharge_core::oracle::{oracle_solve, random_instance};
    use haulcharge_core::solver::solve;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    let mut same = 0;
    for _ in 0..300 {
        let inst = random_instance(&mut rng, 7);
        if let (Ok(a), Ok(b)) = (solve(&inst), oracle_solve(&inst)) {
            compared += 1;
            if a.x == b.x {
                same += 1;
            } else {
                eprintln!("{:?} vs {:?}: {} {}", a.x, b.x, a.total_cost, b.total_cost);
            }
        }
    }
    assert!(compared > 200);
    assert_eq!(same, compared);
}
