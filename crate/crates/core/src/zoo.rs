//! Reference models used by the experiments and the test suites.

use crate::model::{Family, OffspringLaw, ProcessSpec, TableRow};

const GEO1: Family = Family::Geometric { mean: 1.0 };
const POI1: Family = Family::Poisson { mean: 1.0 };

/// Single type with Geometric(1) offspring, pgf `1/(2 - s)`.
pub fn geometric_single() -> ProcessSpec {
    ProcessSpec::new(vec![OffspringLaw::product(0, vec![GEO1])]).expect("valid model")
}

/// Two types: Geometric(1) own-type offspring, Poisson(1) link.
pub fn zoo2() -> ProcessSpec {
    ProcessSpec::new(vec![
        OffspringLaw::product(0, vec![GEO1, POI1]),
        OffspringLaw::product(1, vec![GEO1]),
    ])
    .expect("valid model")
}

/// Three types, each Geometric(1) own-type with a Poisson(1) link to the next.
pub fn zoo3() -> ProcessSpec {
    ProcessSpec::new(vec![
        OffspringLaw::product(0, vec![GEO1, POI1, Family::ZERO]),
        OffspringLaw::product(1, vec![GEO1, POI1]),
        OffspringLaw::product(2, vec![GEO1]),
    ])
    .expect("valid model")
}

/// Two types with bounded finite offspring tables; small enough to enumerate.
pub fn micro_table() -> ProcessSpec {
    let row = |counts: Vec<u32>, prob: f64| TableRow { counts, prob };
    ProcessSpec::new(vec![
        OffspringLaw::table(
            0,
            vec![
                row(vec![0, 0], 0.10),
                row(vec![0, 1], 0.05),
                row(vec![1, 0], 0.60),
                row(vec![1, 1], 0.10),
                row(vec![2, 0], 0.15),
            ],
        ),
        OffspringLaw::table(1, vec![row(vec![0], 0.2), row(vec![1], 0.6), row(vec![2], 0.2)]),
    ])
    .expect("valid model")
}

pub fn by_name(name: &str) -> Option<ProcessSpec> {
    match name {
        "geometric" | "zoo1" => Some(geometric_single()),
        "zoo2" => Some(zoo2()),
        "zoo3" => Some(zoo3()),
        "micro" => Some(micro_table()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_hypothesis_a;

    #[test]
    fn all_zoo_models_are_strongly_critical() {
        for name in ["zoo1", "zoo2", "zoo3", "micro"] {
            let spec = by_name(name).unwrap();
            validate_hypothesis_a(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
