use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{wrong_kind, BenchmarkSpec, GenError, GenSpec, Instance};
use crate::pddl::{Atom, ProblemDef};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogisticsSize {
    pub cities: usize,
    /// Places per city, the first of which is the city's airport.
    pub places_per_city: usize,
    pub packages: usize,
    pub trucks: usize,
    pub airplanes: usize,
}

impl LogisticsSize {
    /// Up to four places and two packages.
    pub const EASY: LogisticsSize =
        LogisticsSize { cities: 2, places_per_city: 2, packages: 2, trucks: 2, airplanes: 1 };
    /// Up to 4 cities, 2 places per city and 8 packages.
    pub const HARD: LogisticsSize =
        LogisticsSize { cities: 4, places_per_city: 2, packages: 8, trucks: 4, airplanes: 1 };

    fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidSpec(m.to_string()));
        if self.cities == 0 || self.places_per_city == 0 {
            return bad("logistics needs at least one city and one place per city");
        }
        if self.trucks < self.cities {
            return bad("logistics needs at least one truck per city");
        }
        if self.cities > 1 && self.airplanes == 0 {
            return bad("logistics with several cities needs an airplane");
        }
        Ok(())
    }
}

fn place(city: usize, j: usize) -> String {
    if j == 0 {
        format!("apt{city}")
    } else {
        format!("l{city}-{}", j + 1)
    }
}

fn one_instance(rng: &mut rand_chacha::ChaCha8Rng, size: &LogisticsSize, id: &str) -> ProblemDef {
    let LogisticsSize { cities, places_per_city, packages, trucks, airplanes } = *size;
    let city_names: Vec<String> = (1..=cities).map(|c| format!("c{c}")).collect();
    let places: Vec<Vec<String>> =
        (1..=cities).map(|c| (0..places_per_city).map(|j| place(c, j)).collect()).collect();
    let all_places: Vec<&String> = places.iter().flatten().collect();
    let airports: Vec<&String> = places.iter().map(|p| &p[0]).collect();
    let truck_names: Vec<String> = (1..=trucks).map(|t| format!("t{t}")).collect();
    let plane_names: Vec<String> = (1..=airplanes).map(|a| format!("a{a}")).collect();
    let package_names: Vec<String> = (1..=packages).map(|p| format!("p{p}")).collect();

    let mut objects = Vec::new();
    objects.extend(city_names.iter().cloned());
    objects.extend(all_places.iter().map(|p| (*p).clone()));
    objects.extend(truck_names.iter().cloned());
    objects.extend(plane_names.iter().cloned());
    objects.extend(package_names.iter().cloned());

    let mut init = Vec::new();
    for (c, name) in city_names.iter().enumerate() {
        init.push(Atom::new("city", [name.as_str()]));
        for (j, p) in places[c].iter().enumerate() {
            init.push(Atom::new("location", [p.as_str()]));
            if j == 0 {
                init.push(Atom::new("airport", [p.as_str()]));
            }
            init.push(Atom::new("in-city", [p.as_str(), name.as_str()]));
        }
    }
    for (i, t) in truck_names.iter().enumerate() {
        let city = i % cities;
        let at = places[city].choose(rng).expect("city has places");
        init.push(Atom::new("truck", [t.as_str()]));
        init.push(Atom::new("at", [t.as_str(), at.as_str()]));
    }
    for a in &plane_names {
        let at = airports.choose(rng).expect("at least one airport");
        init.push(Atom::new("airplane", [a.as_str()]));
        init.push(Atom::new("at", [a.as_str(), at.as_str()]));
    }
    let mut goal = Vec::new();
    for p in &package_names {
        let start = rng.random_range(0..all_places.len());
        init.push(Atom::new("obj", [p.as_str()]));
        init.push(Atom::new("at", [p.as_str(), all_places[start].as_str()]));
        let target = if all_places.len() > 1 {
            let mut t = rng.random_range(0..all_places.len() - 1);
            if t >= start {
                t += 1;
            }
            t
        } else {
            start
        };
        goal.push(Atom::new("at", [p.as_str(), all_places[target].as_str()]));
    }
    ProblemDef { name: id.to_string(), domain: "logistics".into(), objects, init, goal }
}

/// Logistics instances: one airport per city, trucks assigned round-robin
/// to cities, airplanes at random airports, packages at random places with
/// a different random target place.
pub fn gen_logistics(spec: &GenSpec) -> Result<Vec<Instance>, GenError> {
    let BenchmarkSpec::Logistics(size) = spec.benchmark else {
        return Err(wrong_kind(spec, "logistics"));
    };
    size.validate()?;
    Ok((0..spec.count)
        .map(|index| {
            let id = format!(
                "logistics-c{}-p{}-k{}-s{}-{index:04}",
                size.cities, size.places_per_city, size.packages, spec.seed
            );
            let mut rng = seed::rng(&[
                "logistics".into(),
                size.cities.into(),
                size.places_per_city.into(),
                size.packages.into(),
                size.trucks.into(),
                size.airplanes.into(),
                spec.seed.into(),
                index.into(),
            ]);
            let problem = one_instance(&mut rng, &size, &id);
            Instance { id, index, problem }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_problem, print_problem};
    use crate::semantics::validate_plan;

    fn spec(size: LogisticsSize, count: usize) -> GenSpec {
        GenSpec { benchmark: BenchmarkSpec::Logistics(size), seed: 5, count }
    }

    #[test]
    fn hard_preset_has_eight_packages() {
        let d = BenchmarkSpec::Logistics(LogisticsSize::HARD).domain();
        for inst in gen_logistics(&spec(LogisticsSize::HARD, 3)).unwrap() {
            let p = &inst.problem;
            assert_eq!(p.init.iter().filter(|a| a.predicate == "obj").count(), 8);
            assert_eq!(p.goal.len(), 8);
            assert_eq!(parse_problem(&print_problem(p), &d).unwrap(), *p);
        }
    }

    #[test]
    fn goals_name_existing_places() {
        for inst in gen_logistics(&spec(LogisticsSize::EASY, 10)).unwrap() {
            let p = &inst.problem;
            for g in &p.goal {
                assert!(p.init.contains(&Atom::new("location", [g.args[1].as_str()])));
            }
        }
    }

    #[test]
    fn zero_packages_is_vacuous() {
        let size = LogisticsSize { packages: 0, ..LogisticsSize::EASY };
        let d = BenchmarkSpec::Logistics(size).domain();
        let inst = &gen_logistics(&spec(size, 1)).unwrap()[0];
        assert!(inst.problem.goal.is_empty());
        assert!(validate_plan(&inst.problem, &Default::default(), &d).unwrap().verdict.is_correct());
    }

    #[test]
    fn invalid_sizes() {
        let no_truck = LogisticsSize { trucks: 1, ..LogisticsSize::EASY };
        assert!(gen_logistics(&spec(no_truck, 1)).is_err());
        let no_plane = LogisticsSize { airplanes: 0, ..LogisticsSize::EASY };
        assert!(gen_logistics(&spec(no_plane, 1)).is_err());
    }
}
