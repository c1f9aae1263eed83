//! Every registered primitive must agree with the brute-force reference
//! implementation on randomly constructed small inputs.

use synthqa_core::interp::eval_primitive;
use synthqa_core::reference::ref_eval;
use synthqa_core::registry::registered_primitives;
use synthqa_core::rng::rng_for;
use synthqa_core::testing::random_case;

#[test]
fn production_matches_reference_on_random_inputs() {
    let mut mismatches = 0;
    for primitive in registered_primitives() {
        let mut rng = rng_for(0xABCD, "oracle", primitive as u64);
        for case_idx in 0..1000 {
            let case = random_case(primitive, &mut rng);
            let got = eval_primitive(&case.call, &case.out_ty, &case.trace, &case.store);
            let expected = ref_eval(&case.call, &case.out_ty, &case.trace, &case.store);
            match (&got, &expected) {
                (Ok(a), Ok(b)) if a == b => {}
                (Err(_), Err(_)) => {}
                _ => {
                    mismatches += 1;
                    if mismatches <= 5 {
                        eprintln!(
                            "mismatch: {} case {}:\n  production: {:?}\n  reference:  {:?}",
                            primitive.name(),
                            case_idx,
                            got,
                            expected
                        );
                    }
                }
            }
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn at_least_44_primitives_covered() {
    assert!(registered_primitives().count() >= 44);
}
