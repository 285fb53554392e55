//! Generators for valid design choices and invalidating mutations.

use delf_core::schema::{Attribute, ComponentKind, DesignChoice, Quantification};
use proptest::prelude::*;

pub fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,12}"
}

pub fn quantification() -> impl Strategy<Value = Quantification> {
    let continuous = (-1e6f64..1e6, 1e-3f64..1e6, 1u32..8)
        .prop_map(|(lower, width, dims)| Quantification::Continuous { lower, upper: lower + width, dims });
    let discrete = prop::collection::btree_set(-1000i64..1000, 1..8)
        .prop_map(|set| Quantification::Discrete { values: set.into_iter().collect() });
    prop_oneof![continuous, discrete]
}

pub fn kind() -> impl Strategy<Value = ComponentKind> {
    prop_oneof![Just(ComponentKind::Observation), Just(ComponentKind::Action)]
}

prop_compose! {
    pub fn choice()(kind in kind(), attrs in prop::collection::vec((name(), "[ -~]{0,30}", quantification()), 1..6)) -> DesignChoice {
        let mut seen = std::collections::HashSet::new();
        let attributes = attrs
            .into_iter()
            .filter(|(n, _, _)| seen.insert(n.clone()))
            .map(|(n, d, q)| Attribute::new(n, d, q))
            .collect();
        DesignChoice::new(kind, attributes)
    }
}

#[derive(Debug, Clone)]
pub enum Mutation {
    ClearAttributes,
    BadName(String),
    Duplicate,
    InvertBounds,
    NonFinite,
    ZeroDims,
    EmptyValues,
    Unsorted,
}

pub fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        Just(Mutation::ClearAttributes),
        prop_oneof![Just(String::new()), "[0-9_][A-Za-z0-9_]{0,5}", "[a-z]{1,4}[ .-][a-z]{1,4}"].prop_map(Mutation::BadName),
        Just(Mutation::Duplicate),
        Just(Mutation::InvertBounds),
        Just(Mutation::NonFinite),
        Just(Mutation::ZeroDims),
        Just(Mutation::EmptyValues),
        Just(Mutation::Unsorted),
    ]
}

pub fn mutate(choice: &mut DesignChoice, m: &Mutation) {
    let first = &mut choice.attributes[0];
    match m {
        Mutation::ClearAttributes => choice.attributes.clear(),
        Mutation::BadName(n) => first.name = n.clone(),
        Mutation::Duplicate => {
            let copy = first.clone();
            choice.attributes.push(copy);
        }
        Mutation::InvertBounds => first.quantification = Quantification::Continuous { lower: 1.0, upper: 1.0, dims: 1 },
        Mutation::NonFinite => {
            first.quantification = Quantification::Continuous { lower: f64::NEG_INFINITY, upper: 0.0, dims: 1 }
        }
        Mutation::ZeroDims => first.quantification = Quantification::Continuous { lower: 0.0, upper: 1.0, dims: 0 },
        Mutation::EmptyValues => first.quantification = Quantification::Discrete { values: vec![] },
        Mutation::Unsorted => first.quantification = Quantification::Discrete { values: vec![2, 1] },
    }
}

