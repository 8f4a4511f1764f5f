use iotacap::token::{token_equals, token_parse, token_serialize, Right, Token, TokenStatus};
use proptest::prelude::*;
use serde_json::Value;

fn right_strategy() -> impl Strategy<Value = Right> {
    (
        "[a-z0-9]{1,8}/[a-z0-9]{1,8}",
        prop::collection::vec("[A-Z_]{1,8}", 1..4),
    )
        .prop_map(|(r, a)| Right::new(r, a))
}

fn token_strategy() -> impl Strategy<Value = Token> {
    (
        "[a-f0-9-]{8,36}",
        "[a-z0-9]{1,10}",
        "[a-f0-9]{64}",
        prop::sample::select(vec![
            "Role:Owner",
            "Division:IS AND Role:Student",
            "Division:IS AND Role:Staff",
            "Role:Student OR Role:Staff",
        ]),
        any::<bool>(),
        prop::collection::vec(right_strategy(), 1..5),
    )
        .prop_map(|(id, issuer, address, policy, active, rights)| Token {
            id,
            issuer,
            address,
            policy: policy.to_owned(),
            status: if active {
                TokenStatus::Active
            } else {
                TokenStatus::Inactive
            },
            rights,
        })
}

proptest! {
    #[test]
    fn serialization_is_idempotent(t in token_strategy()) {
        let once = token_serialize(&t).unwrap();
        let back = token_parse(&once).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(token_serialize(&back).unwrap(), once);
        prop_assert!(token_equals(&t, &back));
    }

    #[test]
    fn pretty_printed_input_parses_to_same_token(t in token_strategy()) {
        let v: Value = serde_json::from_slice(&token_serialize(&t).unwrap()).unwrap();
        let pretty = serde_json::to_vec_pretty(&v).unwrap();
        prop_assert_eq!(token_parse(&pretty).unwrap(), t);
    }

    #[test]
    fn any_added_right_breaks_equality(t in token_strategy(), extra in right_strategy()) {
        let mut u = t.clone();
        u.rights.push(extra);
        prop_assert!(!token_equals(&t, &u));
    }

    #[test]
    fn any_changed_action_breaks_equality(t in token_strategy(), which in any::<prop::sample::Index>()) {
        let mut u = t.clone();
        let r = which.index(u.rights.len());
        u.rights[r].actions[0].push('X');
        prop_assert!(!token_equals(&t, &u));
    }

    #[test]
    fn parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = token_parse(&bytes);
    }
}
