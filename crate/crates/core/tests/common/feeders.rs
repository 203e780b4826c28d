//! Random radial feeders for pipeline tests.

use std::collections::BTreeMap;

use ise_core::network::{load_feeder, BranchDoc, BusDoc, DgDoc, DgKind, Feeder, FeederDoc, ImpedanceUnits};
use ise_core::truth::Placements;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const PHASES: [char; 3] = ['A', 'B', 'C'];

fn subset(rng: &mut ChaCha8Rng, of: &str) -> String {
    loop {
        let s: String = of.chars().filter(|_| rng.random_bool(0.7)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// Tree of 3..=12 buses under a three-phase slack, with lateral phase
/// subsets, loads on most bus-phases and a few DG units. Placements put a
/// voltage PMU at the slack plus a random current PMU and flow meter.
pub fn random_feeder(rng: &mut ChaCha8Rng) -> (Feeder, Placements) {
    let nb = rng.random_range(3..=12);
    let mut buses = vec![BusDoc {
        id: "b0".into(),
        phases: "ABC".into(),
        load: BTreeMap::new(),
    }];
    let mut branches = Vec::new();
    for k in 1..nb {
        let parent = rng.random_range(0..k);
        let phases = subset(rng, &buses[parent].phases.clone());
        let mut load = BTreeMap::new();
        for c in phases.chars() {
            if rng.random_bool(0.8) {
                load.insert(c.to_string(), [rng.random_range(20.0..200.0), rng.random_range(5.0..100.0)]);
            }
        }
        let (mut r, mut x) = ([[0.0; 3]; 3], [[0.0; 3]; 3]);
        let idx: Vec<usize> = phases.chars().map(|c| PHASES.iter().position(|p| *p == c).unwrap()).collect();
        for &i in &idx {
            for &j in &idx {
                if i == j {
                    r[i][j] = rng.random_range(0.1..0.4);
                    x[i][j] = rng.random_range(0.2..0.6);
                } else if i < j {
                    r[i][j] = rng.random_range(0.0..0.05);
                    x[i][j] = rng.random_range(0.0..0.1);
                    r[j][i] = r[i][j];
                    x[j][i] = x[i][j];
                }
            }
        }
        branches.push(BranchDoc {
            id: format!("b{parent}-b{k}"),
            from: format!("b{parent}"),
            to: format!("b{k}"),
            phases: phases.clone(),
            units: ImpedanceUnits::Ohm,
            r,
            x,
        });
        buses.push(BusDoc {
            id: format!("b{k}"),
            phases,
            load,
        });
    }
    let mut dg = Vec::new();
    for k in 1..nb {
        if rng.random_bool(0.2) {
            let p = rng.random_range(20.0..150.0);
            dg.push(DgDoc {
                id: format!("dg{k}"),
                bus: format!("b{k}"),
                phases: buses[k].phases.clone(),
                kind: if rng.random_bool(0.5) { DgKind::PV } else { DgKind::WTG },
                p: [0.8 * p, 1.1 * p],
                pf: rng.random_range(0.85..1.0),
                lagging: rng.random_bool(0.5),
                metered: rng.random_bool(0.5),
            });
        }
    }
    let doc = FeederDoc {
        name: "random".into(),
        base_kv: 4.16,
        base_mva: 5.0,
        slack: "b0".into(),
        notes: Vec::new(),
        buses,
        branches,
        dg,
    };
    let pick = |rng: &mut ChaCha8Rng| doc.branches[rng.random_range(0..doc.branches.len())].id.clone();
    let placements = Placements {
        pmu_v: vec!["b0".into()],
        pmu_i: vec![pick(rng)],
        scada_flow: vec![pick(rng)],
    };
    let f = load_feeder(&serde_json::to_string(&doc).unwrap()).unwrap();
    (f, placements)
}
