//! Radial unbalanced three-phase feeders.
//!
//! Impedances are stored in per-unit on the feeder base (`Z_base =
//! kV_LL^2 / MVA`, per-phase power base `MVA / 3`). Every branch is oriented
//! away from the slack bus at load time, so `from` is always the upstream
//! end.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::interval::{mul_down, mul_up, Interval};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("feeder document is not valid: {0}")]
    Parse(String),
    #[error("cannot read feeder file {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{location}: {msg}")]
    Schema { location: String, msg: String },
    #[error("{location}: feeder is not radial: {msg}")]
    NonRadial { location: String, msg: String },
    #[error("{location}: phase mismatch: {msg}")]
    Phase { location: String, msg: String },
    #[error("unknown bus {0:?}")]
    UnknownBus(String),
    #[error("line-uncertainty fraction must lie in [0, 1), got {0}")]
    InvalidFraction(f64),
}

fn schema(location: impl Into<String>, msg: impl Into<String>) -> NetworkError {
    NetworkError::Schema {
        location: location.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i]
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "A" | "a" => Some(Phase::A),
            "B" | "b" => Some(Phase::B),
            "C" | "c" => Some(Phase::C),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        })
    }
}

/// Subset of {A, B, C}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn parse(s: &str) -> Option<PhaseSet> {
        let mut bits = 0u8;
        for ch in s.chars() {
            let p = Phase::parse(&ch.to_string())?;
            bits |= 1 << p.index();
        }
        Some(PhaseSet(bits))
    }

    pub fn single(p: Phase) -> PhaseSet {
        PhaseSet(1 << p.index())
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Constant-power load per phase in (kW, kvar).
    pub load: [(f64, f64); 3],
}

/// 3x3 phase-coupled series impedance; entries in per-unit.
pub type PhaseMatrix = [[Interval; 3]; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    /// Upstream bus index.
    pub from: usize,
    /// Downstream bus index.
    pub to: usize,
    pub phases: PhaseSet,
    pub r: PhaseMatrix,
    pub x: PhaseMatrix,
}

impl Branch {
    /// Nominal complex impedance matrix (interval midpoints).
    pub fn z_mid(&self) -> [[Complex64; 3]; 3] {
        let mut z = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (i, row) in z.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = Complex64::new(self.r[i][j].midpoint(), self.x[i][j].midpoint());
            }
        }
        z
    }

    pub fn is_thin(&self) -> bool {
        self.r
            .iter()
            .chain(self.x.iter())
            .flatten()
            .all(Interval::is_thin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DgKind {
    PV,
    WTG,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgUnit {
    pub id: String,
    pub bus: usize,
    pub phases: PhaseSet,
    pub kind: DgKind,
    /// Active power range in kW (total over the unit's phases).
    pub p_kw: Interval,
    pub power_factor: f64,
    pub lagging: bool,
    pub metered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feeder {
    pub name: String,
    pub base_kv: f64,
    pub base_mva: f64,
    pub slack: usize,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub dg: Vec<DgUnit>,
    pub notes: Vec<String>,
    index: HashMap<String, usize>,
    inflow: Vec<Option<usize>>,
    outflows: Vec<Vec<usize>>,
    order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImpedanceUnits {
    #[default]
    Ohm,
    Pu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederDoc {
    #[serde(default)]
    pub name: String,
    #[serde(rename = "base_kV")]
    pub base_kv: f64,
    #[serde(rename = "base_MVA")]
    pub base_mva: f64,
    pub slack: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub buses: Vec<BusDoc>,
    pub branches: Vec<BranchDoc>,
    #[serde(default)]
    pub dg: Vec<DgDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusDoc {
    pub id: String,
    pub phases: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub load: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: String,
    #[serde(default)]
    pub units: ImpedanceUnits,
    pub r: [[f64; 3]; 3],
    pub x: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgDoc {
    pub id: String,
    pub bus: String,
    pub phases: String,
    pub kind: DgKind,
    #[serde(rename = "P")]
    pub p: [f64; 2],
    pub pf: f64,
    pub lagging: bool,
    pub metered: bool,
}

/// Parse and validate a feeder document.
pub fn load_feeder(document: &str) -> Result<Feeder, NetworkError> {
    let doc: FeederDoc =
        serde_json::from_str(document).map_err(|e| NetworkError::Parse(e.to_string()))?;
    Feeder::from_doc(&doc)
}

pub fn load_feeder_file(path: impl AsRef<Path>) -> Result<Feeder, NetworkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| NetworkError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    load_feeder(&text)
}

fn parse_phases(s: &str, location: &str) -> Result<PhaseSet, NetworkError> {
    let p =
        PhaseSet::parse(s).ok_or_else(|| schema(location, format!("bad phase string {s:?}")))?;
    if p.is_empty() {
        return Err(schema(location, "empty phase set"));
    }
    Ok(p)
}

impl Feeder {
    pub fn from_doc(doc: &FeederDoc) -> Result<Feeder, NetworkError> {
        if !(doc.base_kv > 0.0 && doc.base_mva > 0.0) {
            return Err(schema("bases", "base_kV and base_MVA must be positive"));
        }
        let z_base = doc.base_kv * doc.base_kv / doc.base_mva;

        let mut index = HashMap::new();
        let mut buses = Vec::with_capacity(doc.buses.len());
        for (k, b) in doc.buses.iter().enumerate() {
            let loc = format!("buses[{k}] ({})", b.id);
            if index.insert(b.id.clone(), k).is_some() {
                return Err(schema(loc, "duplicate bus id"));
            }
            let phases = parse_phases(&b.phases, &loc)?;
            let mut load = [(0.0, 0.0); 3];
            for (ph, pq) in &b.load {
                let p = Phase::parse(ph)
                    .ok_or_else(|| schema(&loc, format!("bad load phase {ph:?}")))?;
                if !phases.contains(p) {
                    return Err(NetworkError::Phase {
                        location: loc.clone(),
                        msg: format!("load on absent phase {p}"),
                    });
                }
                if !(pq[0].is_finite() && pq[1].is_finite()) {
                    return Err(schema(&loc, "non-finite load"));
                }
                load[p.index()] = (pq[0], pq[1]);
            }
            buses.push(Bus {
                id: b.id.clone(),
                phases,
                load,
            });
        }
        let slack = *index
            .get(&doc.slack)
            .ok_or_else(|| schema("slack", format!("slack bus {:?} not found", doc.slack)))?;

        let mut branches = Vec::with_capacity(doc.branches.len());
        for (k, br) in doc.branches.iter().enumerate() {
            let loc = format!("branches[{k}] ({})", br.id);
            let from = *index
                .get(&br.from)
                .ok_or_else(|| schema(&loc, format!("unknown from-bus {:?}", br.from)))?;
            let to = *index
                .get(&br.to)
                .ok_or_else(|| schema(&loc, format!("unknown to-bus {:?}", br.to)))?;
            if from == to {
                return Err(NetworkError::NonRadial {
                    location: loc,
                    msg: "self loop".into(),
                });
            }
            let phases = parse_phases(&br.phases, &loc)?;
            for end in [from, to] {
                if !phases.is_subset(buses[end].phases) {
                    return Err(NetworkError::Phase {
                        location: loc.clone(),
                        msg: format!(
                            "branch phases {phases} not present at bus {} ({})",
                            buses[end].id, buses[end].phases
                        ),
                    });
                }
            }
            let scale = match br.units {
                ImpedanceUnits::Ohm => 1.0 / z_base,
                ImpedanceUnits::Pu => 1.0,
            };
            let mut r = [[Interval::ZERO; 3]; 3];
            let mut x = [[Interval::ZERO; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let (rv, xv) = (br.r[i][j], br.x[i][j]);
                    if !(rv.is_finite() && xv.is_finite()) {
                        return Err(schema(&loc, format!("non-finite impedance at ({i}, {j})")));
                    }
                    let present = phases.contains(Phase::from_index(i))
                        && phases.contains(Phase::from_index(j));
                    if !present && (rv != 0.0 || xv != 0.0) {
                        return Err(NetworkError::Phase {
                            location: loc.clone(),
                            msg: format!(
                                "nonzero impedance on absent phase pair {}{}",
                                Phase::from_index(i),
                                Phase::from_index(j)
                            ),
                        });
                    }
                    r[i][j] = Interval::point(rv * scale);
                    x[i][j] = Interval::point(xv * scale);
                }
            }
            branches.push(Branch {
                id: br.id.clone(),
                from,
                to,
                phases,
                r,
                x,
            });
        }

        let mut dg = Vec::with_capacity(doc.dg.len());
        for (k, u) in doc.dg.iter().enumerate() {
            let loc = format!("dg[{k}] ({})", u.id);
            let bus = *index
                .get(&u.bus)
                .ok_or_else(|| schema(&loc, format!("unknown bus {:?}", u.bus)))?;
            let phases = parse_phases(&u.phases, &loc)?;
            if !phases.is_subset(buses[bus].phases) {
                return Err(NetworkError::Phase {
                    location: loc,
                    msg: format!("DG phases {phases} not present at bus {}", u.bus),
                });
            }
            let p_kw = Interval::new(u.p[0], u.p[1])
                .map_err(|_| schema(&loc, format!("bad power interval {:?}", u.p)))?;
            if p_kw.lo() < 0.0 {
                return Err(schema(&loc, "power interval must be non-negative"));
            }
            if !(u.pf > 0.0 && u.pf <= 1.0) {
                return Err(schema(
                    &loc,
                    format!("power factor {} outside (0, 1]", u.pf),
                ));
            }
            dg.push(DgUnit {
                id: u.id.clone(),
                bus,
                phases,
                kind: u.kind,
                p_kw,
                power_factor: u.pf,
                lagging: u.lagging,
                metered: u.metered,
            });
        }

        let mut f = Feeder {
            name: doc.name.clone(),
            base_kv: doc.base_kv,
            base_mva: doc.base_mva,
            slack,
            buses,
            branches,
            dg,
            notes: doc.notes.clone(),
            index,
            inflow: Vec::new(),
            outflows: Vec::new(),
            order: Vec::new(),
        };
        f.orient()?;
        Ok(f)
    }

    /// Walk the tree from the slack, orient every branch downstream and fill
    /// the topology tables.
    fn orient(&mut self) -> Result<(), NetworkError> {
        let nb = self.buses.len();
        if self.branches.len() + 1 != nb {
            return Err(NetworkError::NonRadial {
                location: "branches".into(),
                msg: format!(
                    "{} branches for {} buses (a radial feeder has one fewer branch than buses)",
                    self.branches.len(),
                    nb
                ),
            });
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for (k, b) in self.branches.iter().enumerate() {
            adj[b.from].push(k);
            adj[b.to].push(k);
        }
        let mut inflow = vec![None; nb];
        let mut seen = vec![false; nb];
        let mut order = Vec::with_capacity(nb);
        let mut queue = VecDeque::from([self.slack]);
        seen[self.slack] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &k in &adj[u] {
                if inflow[u] == Some(k) {
                    continue;
                }
                let b = &mut self.branches[k];
                let v = if b.from == u { b.to } else { b.from };
                if seen[v] {
                    return Err(NetworkError::NonRadial {
                        location: format!("branch {}", b.id),
                        msg: "closes a cycle".into(),
                    });
                }
                if b.from != u {
                    std::mem::swap(&mut b.from, &mut b.to);
                }
                seen[v] = true;
                inflow[v] = Some(k);
                queue.push_back(v);
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            let missing: Vec<&str> = (k..nb)
                .filter(|&i| !seen[i])
                .map(|i| self.buses[i].id.as_str())
                .collect();
            return Err(NetworkError::NonRadial {
                location: "buses".into(),
                msg: format!("not connected to the slack: {}", missing.join(", ")),
            });
        }
        for (v, k) in inflow.iter().enumerate() {
            if let Some(k) = k {
                let b = &self.branches[*k];
                if b.phases != self.buses[v].phases {
                    return Err(NetworkError::Phase {
                        location: format!("bus {}", self.buses[v].id),
                        msg: format!(
                            "bus phases {} differ from supplying branch {} phases {}",
                            self.buses[v].phases, b.id, b.phases
                        ),
                    });
                }
            }
        }
        let mut outflows = vec![Vec::new(); nb];
        for (k, b) in self.branches.iter().enumerate() {
            outflows[b.from].push(k);
        }
        self.inflow = inflow;
        self.outflows = outflows;
        self.order = order;
        Ok(())
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn branch_index(&self, id: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    /// Branch supplying `bus`; `None` for the slack.
    pub fn inflow(&self, bus: usize) -> Option<usize> {
        self.inflow[bus]
    }

    pub fn outflows(&self, bus: usize) -> &[usize] {
        &self.outflows[bus]
    }

    /// Buses in breadth-first order from the slack (parents first).
    pub fn bfs_order(&self) -> &[usize] {
        &self.order
    }

    pub fn branch_phase_count(&self) -> usize {
        self.branches.iter().map(|b| b.phases.len()).sum()
    }

    pub fn z_base(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    /// Per-phase power base in kVA.
    pub fn s_base_kva(&self) -> f64 {
        self.base_mva * 1000.0 / 3.0
    }

    /// Phase-to-neutral voltage base in volts.
    pub fn v_base_volts(&self) -> f64 {
        self.base_kv * 1000.0 / 3f64.sqrt()
    }

    pub fn has_interval_lines(&self) -> bool {
        !self.branches.iter().all(Branch::is_thin)
    }

    /// Convert back to a document with impedances in the requested units
    /// (interval midpoints).
    pub fn to_doc(&self, units: ImpedanceUnits) -> FeederDoc {
        let scale = match units {
            ImpedanceUnits::Ohm => self.z_base(),
            ImpedanceUnits::Pu => 1.0,
        };
        let buses = self
            .buses
            .iter()
            .map(|b| BusDoc {
                id: b.id.clone(),
                phases: b.phases.to_string(),
                load: b
                    .phases
                    .iter()
                    .filter(|p| b.load[p.index()] != (0.0, 0.0))
                    .map(|p| (p.to_string(), [b.load[p.index()].0, b.load[p.index()].1]))
                    .collect(),
            })
            .collect();
        let branches = self
            .branches
            .iter()
            .map(|br| {
                let m = |z: &PhaseMatrix| {
                    let mut out = [[0.0; 3]; 3];
                    for i in 0..3 {
                        for j in 0..3 {
                            out[i][j] = z[i][j].midpoint() * scale;
                        }
                    }
                    out
                };
                BranchDoc {
                    id: br.id.clone(),
                    from: self.buses[br.from].id.clone(),
                    to: self.buses[br.to].id.clone(),
                    phases: br.phases.to_string(),
                    units,
                    r: m(&br.r),
                    x: m(&br.x),
                }
            })
            .collect();
        let dg = self
            .dg
            .iter()
            .map(|u| DgDoc {
                id: u.id.clone(),
                bus: self.buses[u.bus].id.clone(),
                phases: u.phases.to_string(),
                kind: u.kind,
                p: [u.p_kw.lo(), u.p_kw.hi()],
                pf: u.power_factor,
                lagging: u.lagging,
                metered: u.metered,
            })
            .collect();
        FeederDoc {
            name: self.name.clone(),
            base_kv: self.base_kv,
            base_mva: self.base_mva,
            slack: self.buses[self.slack].id.clone(),
            notes: self.notes.clone(),
            buses,
            branches,
            dg,
        }
    }
}

/// Branches from the slack down to `bus`, in slack-to-bus order.
pub fn path_to_slack(f: &Feeder, bus: &str) -> Result<Vec<usize>, NetworkError> {
    let k = f
        .bus_index(bus)
        .ok_or_else(|| NetworkError::UnknownBus(bus.to_string()))?;
    Ok(path_indices(f, k))
}

pub(crate) fn path_indices(f: &Feeder, bus: usize) -> Vec<usize> {
    let mut path = Vec::new();
    let mut v = bus;
    while let Some(k) = f.inflow(v) {
        path.push(k);
        v = f.branches[k].from;
    }
    path.reverse();
    path
}

fn widen_entry(e: Interval, fraction: f64) -> Interval {
    let c = e.midpoint();
    let (a, b) = (
        (mul_down(c, 1.0 - fraction), mul_up(c, 1.0 - fraction)),
        (mul_down(c, 1.0 + fraction), mul_up(c, 1.0 + fraction)),
    );
    Interval::new(a.0.min(b.0), a.1.max(b.1)).expect("finite impedance")
}

/// Replace every nonzero impedance entry `e` by `[(1-f)e, (1+f)e]`.
pub fn apply_line_uncertainty(f: &Feeder, fraction: f64) -> Result<Feeder, NetworkError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(NetworkError::InvalidFraction(fraction));
    }
    let mut out = f.clone();
    if fraction == 0.0 {
        return Ok(out);
    }
    for b in &mut out.branches {
        for z in [&mut b.r, &mut b.x] {
            for e in z.iter_mut().flatten() {
                if *e != Interval::ZERO {
                    *e = widen_entry(*e, fraction);
                }
            }
        }
    }
    Ok(out)
}

/// Ratio Q/P for a power factor: tan(arccos pf).
pub fn reactive_ratio(pf: f64) -> f64 {
    (1.0 - pf * pf).max(0.0).sqrt() / pf
}

/// (P, Q) output ranges of a DG unit in kW / kvar, injection positive.
/// A lagging unit injects reactive power along with active power.
pub fn dg_power_intervals(u: &DgUnit) -> (Interval, Interval) {
    let t = reactive_ratio(u.power_factor);
    let q = u.p_kw.scale(if u.lagging { t } else { -t });
    (u.p_kw, q)
}

/// Single-phase positive-sequence equivalent of a feeder, used to compare
/// dimensions against a balanced model. All loads and DG move to phase A.
pub fn balanced_reduction(f: &Feeder) -> Feeder {
    let mut out = f.clone();
    let a = PhaseSet::single(Phase::A);
    for b in &mut out.buses {
        let (p, q) = b
            .load
            .iter()
            .fold((0.0, 0.0), |acc, l| (acc.0 + l.0, acc.1 + l.1));
        b.phases = a;
        b.load = [(p, q), (0.0, 0.0), (0.0, 0.0)];
    }
    for br in &mut out.branches {
        let ph: Vec<usize> = br.phases.iter().map(Phase::index).collect();
        let seq = |z: &PhaseMatrix| {
            let n = ph.len() as f64;
            let diag = ph.iter().map(|&i| z[i][i].midpoint()).sum::<f64>() / n;
            let off = if ph.len() > 1 {
                let mut s = 0.0;
                for &i in &ph {
                    for &j in &ph {
                        if i != j {
                            s += z[i][j].midpoint();
                        }
                    }
                }
                s / (n * (n - 1.0))
            } else {
                0.0
            };
            diag - off
        };
        let (r1, x1) = (seq(&br.r), seq(&br.x));
        br.r = [[Interval::ZERO; 3]; 3];
        br.x = [[Interval::ZERO; 3]; 3];
        br.r[0][0] = Interval::point(r1);
        br.x[0][0] = Interval::point(x1);
        br.phases = a;
    }
    for u in &mut out.dg {
        u.phases = a;
    }
    out.name = format!("{} (balanced)", f.name);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn chain3() -> Feeder {
        load_feeder(
            r#"{"base_kV": 1.0, "base_MVA": 1.0, "slack": "s",
                "buses": [{"id": "s", "phases": "A"}, {"id": "m", "phases": "A"},
                          {"id": "l", "phases": "A", "load": {"A": [10, 5]}}],
                "branches": [
                  {"id": "b2", "from": "l", "to": "m", "phases": "A", "units": "pu",
                   "r": [[0.1,0,0],[0,0,0],[0,0,0]], "x": [[0.2,0,0],[0,0,0],[0,0,0]]},
                  {"id": "b1", "from": "s", "to": "m", "phases": "A", "units": "pu",
                   "r": [[-0.02,0,0],[0,0,0],[0,0,0]], "x": [[0.2,0,0],[0,0,0],[0,0,0]]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn chain_paths_and_orientation() {
        let f = chain3();
        assert!(path_to_slack(&f, "s").unwrap().is_empty());
        let p = path_to_slack(&f, "l").unwrap();
        let ids: Vec<&str> = p.iter().map(|&k| f.branches[k].id.as_str()).collect();
        assert_eq!(ids, ["b1", "b2"]);
        // b2 was written leaf-first; it must now point away from the slack.
        assert_eq!(f.buses[f.branches[0].from].id, "m");
        assert!(matches!(
            path_to_slack(&f, "zz"),
            Err(NetworkError::UnknownBus(_))
        ));
    }

    #[test]
    fn cycle_rejected() {
        let err = load_feeder(
            r#"{"base_kV": 1, "base_MVA": 1, "slack": "1",
                "buses": [{"id":"1","phases":"A"},{"id":"2","phases":"A"},{"id":"3","phases":"A"},{"id":"4","phases":"A"}],
                "branches": [
                  {"id":"a","from":"1","to":"2","phases":"A","r":[[1,0,0],[0,0,0],[0,0,0]],"x":[[1,0,0],[0,0,0],[0,0,0]]},
                  {"id":"b","from":"2","to":"3","phases":"A","r":[[1,0,0],[0,0,0],[0,0,0]],"x":[[1,0,0],[0,0,0],[0,0,0]]},
                  {"id":"c","from":"3","to":"2","phases":"A","r":[[1,0,0],[0,0,0],[0,0,0]],"x":[[1,0,0],[0,0,0],[0,0,0]]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::NonRadial { .. }), "{err}");
    }

    #[test]
    fn phase_violations_rejected() {
        let err = load_feeder(
            r#"{"base_kV": 1, "base_MVA": 1, "slack": "1",
                "buses": [{"id":"1","phases":"A"},{"id":"2","phases":"A"}],
                "branches": [{"id":"a","from":"1","to":"2","phases":"AB",
                  "r":[[1,0,0],[0,1,0],[0,0,0]],"x":[[1,0,0],[0,1,0],[0,0,0]]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::Phase { .. }), "{err}");
        let err = load_feeder(
            r#"{"base_kV": 1, "base_MVA": 1, "slack": "1",
                "buses": [{"id":"1","phases":"AB"},{"id":"2","phases":"A"}],
                "branches": [{"id":"a","from":"1","to":"2","phases":"A",
                  "r":[[1,0.5,0],[0.5,0,0],[0,0,0]],"x":[[1,0,0],[0,0,0],[0,0,0]]}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("absent phase"), "{err}");
    }

    #[test]
    fn line_uncertainty() {
        let f = chain3();
        let same = apply_line_uncertainty(&f, 0.0).unwrap();
        assert_eq!(same, f);
        let w = apply_line_uncertainty(&f, 0.05).unwrap();
        let b2 = &w.branches[0];
        assert!((b2.r[0][0].lo() - 0.095).abs() < 1e-15 && (b2.r[0][0].hi() - 0.105).abs() < 1e-15);
        let b1 = &w.branches[1];
        assert!((b1.r[0][0].lo() + 0.021).abs() < 1e-15 && (b1.r[0][0].hi() + 0.019).abs() < 1e-15);
        assert_eq!(b1.r[1][1], Interval::ZERO);
        assert!(apply_line_uncertainty(&f, 1.0).is_err());
    }

    #[test]
    fn dg_reactive_ranges() {
        let u = DgUnit {
            id: "pv".into(),
            bus: 0,
            phases: PhaseSet::single(Phase::A),
            kind: DgKind::PV,
            p_kw: Interval::new(106.72, 149.53).unwrap(),
            power_factor: 0.95,
            lagging: true,
            metered: false,
        };
        let (p, q) = dg_power_intervals(&u);
        assert_eq!(p, u.p_kw);
        assert!(
            (q.lo() - 35.08).abs() < 0.01 && (q.hi() - 49.15).abs() < 0.01,
            "{q:?}"
        );
        let unity = DgUnit {
            power_factor: 1.0,
            ..u
        };
        assert_eq!(dg_power_intervals(&unity).1, Interval::ZERO);
    }
}
