mod common;

use common::{naive_validate, random_domain, random_plan, random_problem, random_tabletop_problem};
use proptest::prelude::*;
use symwrap::pddl::{ground, tabletop_domain, validate_plan, Domain, Plan, PlanStep, Problem, Provenance, Verdict};

fn compare(domain: &Domain, problem: &Problem, steps: &[(String, Vec<String>)]) -> Result<(), TestCaseError> {
    let g = ground(domain, problem).unwrap();
    let plan = Plan::new(
        steps.iter().map(|(a, args)| PlanStep::new(a.clone(), args.clone())).collect(),
        Provenance::NeuroSymbolic,
    );
    let got = match validate_plan(&g, &plan) {
        Verdict::Valid => Ok(()),
        Verdict::Invalid { step, .. } => Err(step),
    };
    prop_assert_eq!(got, naive_validate(domain, problem, steps), "plan {:?}", steps);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn tabletop_plans_agree_with_naive_interpreter(p in any::<u64>(), s in any::<u64>()) {
        let domain = tabletop_domain();
        let problem = random_tabletop_problem(p);
        compare(&domain, &problem, &random_plan(&domain, &problem, s, 8))?;
    }

    #[test]
    fn generated_domains_agree_with_naive_interpreter(d in any::<u64>(), p in any::<u64>(), s in any::<u64>()) {
        let domain = random_domain(d);
        let problem = random_problem(&domain, p);
        compare(&domain, &problem, &random_plan(&domain, &problem, s, 6))?;
    }
}

#[test]
fn goal_failure_reports_the_plan_length() {
    let domain = tabletop_domain();
    let mut seed = 0;
    loop {
        let problem = random_tabletop_problem(seed);
        seed += 1;
        if naive_validate(&domain, &problem, &[]).is_ok() {
            continue;
        }
        let g = ground(&domain, &problem).unwrap();
        let v = validate_plan(&g, &Plan::new(vec![], Provenance::NeuroSymbolic));
        assert!(matches!(v, Verdict::Invalid { step: 0, .. }));
        break;
    }
}
