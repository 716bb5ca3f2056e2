use proptest::prelude::*;

use walkrange_core::group::{inverse, multiply, word_norm, GroupDescriptor, GroupElement, GroupKind};

fn word() -> impl Strategy<Value = GroupElement> {
    "[aAbB]{0,12}".prop_map(|s| GroupElement::word(&s))
}

fn heis() -> impl Strategy<Value = GroupElement> {
    (-50i64..50, -50i64..50, -500i64..500).prop_map(|(x, y, z)| GroupElement::heis(x, y, z))
}

fn lattice() -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(-1000i64..1000, 3).prop_map(|c| GroupElement::zd(&c))
}

fn axioms(a: &GroupElement, b: &GroupElement, c: &GroupElement) -> Result<(), TestCaseError> {
    let ab_c = multiply(&multiply(a, b).unwrap(), c).unwrap();
    let a_bc = multiply(a, &multiply(b, c).unwrap()).unwrap();
    prop_assert_eq!(ab_c, a_bc);
    prop_assert!(multiply(a, &inverse(a)).unwrap().is_identity());
    prop_assert!(multiply(&inverse(a), a).unwrap().is_identity());
    prop_assert_eq!(word_norm(&inverse(a)), word_norm(a));
    prop_assert!(word_norm(&multiply(a, b).unwrap()) <= word_norm(a) + word_norm(b));
    Ok(())
}

fn roundtrip(kind: GroupKind, a: &GroupElement) -> Result<(), TestCaseError> {
    let parsed = GroupDescriptor::new(kind).parse_element(&a.to_string()).unwrap();
    prop_assert_eq!(&parsed, a);
    Ok(())
}

proptest! {
    #[test]
    fn free_group(a in word(), b in word(), c in word()) {
        axioms(&a, &b, &c)?;
        roundtrip(GroupKind::Free2, &a)?;
    }

    #[test]
    fn heisenberg(a in heis(), b in heis(), c in heis()) {
        axioms(&a, &b, &c)?;
        roundtrip(GroupKind::Heisenberg, &a)?;
    }

    #[test]
    fn lattice_is_abelian(a in lattice(), b in lattice(), c in lattice()) {
        axioms(&a, &b, &c)?;
        prop_assert_eq!(multiply(&a, &b).unwrap(), multiply(&b, &a).unwrap());
        roundtrip(GroupKind::Lattice(3), &a)?;
    }
}

#[test]
fn generators_are_closed_under_inverse() {
    for kind in [GroupKind::Lattice(1), GroupKind::Lattice(2), GroupKind::Lattice(3), GroupKind::Free2, GroupKind::Heisenberg] {
        let gens = GroupDescriptor::new(kind).generators();
        for g in &gens {
            assert_eq!(word_norm(g), 1);
            assert!(gens.contains(&inverse(g)));
        }
    }
}
