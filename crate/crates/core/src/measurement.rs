//! Measurement documents and their conversion into the interval measurement
//! vectors `[z1]`, `[z2]` and the weight matrix.
//!
//! Every complex channel contributes two rows, real part and imaginary part.
//! Rows are grouped by class (PMU voltages, PMU currents, equivalent
//! currents, DG intervals); within a class all real rows precede all
//! imaginary rows, and channels are ordered by (element index, phase).
//!
//! Power-type readings at one bus and phase (load pseudo-measurement, DG
//! meters, DG output intervals) are combined into a single injection
//! channel, because they all constrain the same KCL row. If any unmetered DG
//! contributes, the channel is a `[z2]` row in injection convention with unit
//! weight; otherwise it is a `[z1]` row in consumption convention.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::interval::{Interval, IntervalVector};
use crate::network::{Feeder, Phase};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasurementError {
    #[error("measurement references unknown {kind} {id:?}")]
    UnknownElement { kind: &'static str, id: String },
    #[error("measurement on {element} phase {phase}, which is not present")]
    AbsentPhase { element: String, phase: Phase },
    #[error("{0}: injection measurements are not allowed at the slack bus")]
    SlackInjection(String),
    #[error("zero sigma on weighted channel {0} (weight would be infinite)")]
    ZeroSigma(String),
    #[error("reference voltage for phase {0} is zero")]
    ZeroReference(Phase),
    #[error("invalid value in {0}")]
    InvalidValue(String),
}

/// One raw measurement. Powers and currents are in per-unit, angles in
/// radians; powers are consumption-positive for loads and flows,
/// injection-positive for DG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Measurement {
    #[serde(rename = "pmuV")]
    PmuV {
        bus: String,
        phase: Phase,
        mag: f64,
        angle: f64,
        sigma_mag: f64,
        sigma_angle: f64,
    },
    #[serde(rename = "pmuI")]
    PmuI {
        branch: String,
        phase: Phase,
        mag: f64,
        angle: f64,
        sigma_mag: f64,
        sigma_angle: f64,
    },
    #[serde(rename = "scadaFlow")]
    ScadaFlow {
        branch: String,
        phase: Phase,
        p: f64,
        q: f64,
        sigma_p: f64,
        sigma_q: f64,
    },
    #[serde(rename = "injPseudo")]
    InjPseudo {
        bus: String,
        phase: Phase,
        p: f64,
        q: f64,
        sigma_p: f64,
        sigma_q: f64,
    },
    /// Bus-phase with neither load nor generation.
    #[serde(rename = "zeroInj")]
    ZeroInjection { bus: String, phase: Phase },
    #[serde(rename = "dgMeter")]
    DgMeter {
        dg: String,
        bus: String,
        phase: Phase,
        p: f64,
        q: f64,
        sigma_p: f64,
        sigma_q: f64,
    },
    #[serde(rename = "dgInterval")]
    DgInterval {
        dg: String,
        bus: String,
        phase: Phase,
        p: Interval,
        q: Interval,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    /// Per-phase reference voltage for equivalent currents.
    pub v_ref: [Complex64; 3],
    /// Sigma (p.u. current) of the virtual zero-injection rows.
    pub zero_injection_sigma: f64,
    pub entries: Vec<Measurement>,
}

/// Interval enclosure of `conj((P + jQ) / v_ref)`.
pub fn power_to_equivalent_current(
    p: Interval,
    q: Interval,
    v_ref: Complex64,
) -> Result<(Interval, Interval), MeasurementError> {
    if v_ref.norm() == 0.0 || !v_ref.re.is_finite() || !v_ref.im.is_finite() {
        return Err(MeasurementError::ZeroReference(Phase::A));
    }
    let (vr, vx) = (Interval::point(v_ref.re), Interval::point(v_ref.im));
    let den = vr.sqr() + vx.sqr();
    let ir = (p * vr + q * vx)
        .checked_div(&den)
        .expect("denominator bounded away from zero");
    let ix = (p * vx - q * vr)
        .checked_div(&den)
        .expect("denominator bounded away from zero");
    Ok((ir, ix))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelClass {
    PmuVoltage,
    PmuCurrent,
    Equivalent,
    DgInterval,
}

/// What a channel's two rows measure, as a linear function of the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Voltage {
        bus: usize,
        phase: Phase,
    },
    Current {
        branch: usize,
        phase: Phase,
    },
    /// Inflow minus outflows when `consumption`, the negation otherwise.
    Injection {
        bus: usize,
        phase: Phase,
        consumption: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelValue {
    /// Rectangular phasor box and the measured point.
    Phasor {
        re: Interval,
        im: Interval,
        point: Complex64,
    },
    /// Complex power converted to a current at a voltage.
    Power {
        p: Interval,
        q: Interval,
        point: Complex64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub class: ChannelClass,
    pub target: Target,
    pub value: ChannelValue,
    /// Sigmas of the real and imaginary rows; `None` for unit-weight rows.
    pub sigma: Option<(f64, f64)>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSpec {
    pub channel: usize,
    pub imag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    pub channels: Vec<Channel>,
    pub rows: Vec<RowSpec>,
    pub m1: usize,
    pub m2: usize,
    pub v_ref: [Complex64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    /// Diagonal of W1 (1/sigma^2).
    pub w1: Vec<f64>,
    pub m2: usize,
}

impl WeightMatrix {
    /// Full diagonal: W1 followed by the identity block.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = self.w1.clone();
        d.extend(std::iter::repeat_n(1.0, self.m2));
        d
    }
}

fn phasor_box(
    mag: f64,
    angle: f64,
    sigma_mag: f64,
    sigma_angle: f64,
    label: &str,
) -> Result<(ChannelValue, (f64, f64)), MeasurementError> {
    let bad = || MeasurementError::InvalidValue(label.to_string());
    if !(mag.is_finite() && angle.is_finite() && sigma_mag >= 0.0 && sigma_angle >= 0.0) {
        return Err(bad());
    }
    let m = Interval::around(mag, 3.0 * sigma_mag).map_err(|_| bad())?;
    let a = Interval::around(angle, 3.0 * sigma_angle).map_err(|_| bad())?;
    let (c, s) = (angle.cos(), angle.sin());
    // Below sigma_mag / sigma_angle the angle error no longer dominates the
    // tangential spread; holding the radius there keeps a near-zero phasor's
    // error isotropic instead of degenerate.
    let r = if sigma_angle > 0.0 {
        mag.abs().max(sigma_mag / sigma_angle)
    } else {
        mag.abs()
    };
    let sr = ((c * sigma_mag).powi(2) + (r * s * sigma_angle).powi(2)).sqrt();
    let sx = ((s * sigma_mag).powi(2) + (r * c * sigma_angle).powi(2)).sqrt();
    Ok((
        ChannelValue::Phasor {
            re: m * a.cos(),
            im: m * a.sin(),
            point: Complex64::from_polar(mag, angle),
        },
        (sr, sx),
    ))
}

#[derive(Default)]
struct InjectionGroup {
    /// Consumption-convention contributions: (label, P, Q, point, variance).
    parts: Vec<(String, Interval, Interval, Complex64, f64)>,
    unmetered: bool,
    zero: bool,
}

impl InjectionGroup {
    fn add(&mut self, p: Interval, q: Interval, point: Complex64, var: f64, part: String) {
        self.parts.push((part, p, q, point, var));
    }

    /// Summed contributions in label order, so the result does not depend
    /// on the order of the input list.
    fn total(&mut self) -> Option<(Interval, Interval, Complex64, f64, String)> {
        self.parts
            .sort_by(|a, b| a.0.cmp(&b.0).then(a.3.re.total_cmp(&b.3.re)));
        let mut it = self.parts.iter();
        let first = it.next()?;
        let mut acc = (first.1, first.2, first.3, first.4, first.0.clone());
        for (label, p, q, point, var) in it {
            acc.0 += *p;
            acc.1 += *q;
            acc.2 += *point;
            acc.3 += *var;
            acc.4 = format!("{}+{label}", acc.4);
        }
        Some(acc)
    }
}

fn power_box(v: f64, sigma: f64, label: &str) -> Result<Interval, MeasurementError> {
    if !(sigma >= 0.0) {
        return Err(MeasurementError::InvalidValue(label.to_string()));
    }
    Interval::around(v, 3.0 * sigma).map_err(|_| MeasurementError::InvalidValue(label.to_string()))
}

impl MeasurementModel {
    pub fn new(f: &Feeder, ms: &MeasurementSet) -> Result<Self, MeasurementError> {
        for p in Phase::ALL {
            if ms.v_ref[p.index()].norm() == 0.0 {
                return Err(MeasurementError::ZeroReference(p));
            }
        }
        let bus_of = |id: &str| {
            f.bus_index(id)
                .ok_or_else(|| MeasurementError::UnknownElement {
                    kind: "bus",
                    id: id.to_string(),
                })
        };
        let branch_of = |id: &str| {
            f.branch_index(id)
                .ok_or_else(|| MeasurementError::UnknownElement {
                    kind: "branch",
                    id: id.to_string(),
                })
        };
        let bus_phase = |id: &str, phase: Phase| -> Result<usize, MeasurementError> {
            let k = bus_of(id)?;
            if !f.buses[k].phases.contains(phase) {
                return Err(MeasurementError::AbsentPhase {
                    element: format!("bus {id}"),
                    phase,
                });
            }
            Ok(k)
        };
        let branch_phase = |id: &str, phase: Phase| -> Result<usize, MeasurementError> {
            let k = branch_of(id)?;
            if !f.branches[k].phases.contains(phase) {
                return Err(MeasurementError::AbsentPhase {
                    element: format!("branch {id}"),
                    phase,
                });
            }
            Ok(k)
        };
        let injection_bus = |id: &str, phase: Phase| -> Result<usize, MeasurementError> {
            let k = bus_phase(id, phase)?;
            if k == f.slack {
                return Err(MeasurementError::SlackInjection(id.to_string()));
            }
            Ok(k)
        };

        let mut channels = Vec::new();
        let mut groups: BTreeMap<(usize, Phase), InjectionGroup> = BTreeMap::new();
        for m in &ms.entries {
            match m {
                Measurement::PmuV {
                    bus,
                    phase,
                    mag,
                    angle,
                    sigma_mag,
                    sigma_angle,
                } => {
                    let k = bus_phase(bus, *phase)?;
                    let label = format!("pmuV {bus}.{phase}");
                    let (value, s) = phasor_box(*mag, *angle, *sigma_mag, *sigma_angle, &label)?;
                    channels.push(Channel {
                        class: ChannelClass::PmuVoltage,
                        target: Target::Voltage {
                            bus: k,
                            phase: *phase,
                        },
                        value,
                        sigma: Some(s),
                        label,
                    });
                }
                Measurement::PmuI {
                    branch,
                    phase,
                    mag,
                    angle,
                    sigma_mag,
                    sigma_angle,
                } => {
                    let k = branch_phase(branch, *phase)?;
                    let label = format!("pmuI {branch}.{phase}");
                    let (value, s) = phasor_box(*mag, *angle, *sigma_mag, *sigma_angle, &label)?;
                    channels.push(Channel {
                        class: ChannelClass::PmuCurrent,
                        target: Target::Current {
                            branch: k,
                            phase: *phase,
                        },
                        value,
                        sigma: Some(s),
                        label,
                    });
                }
                Measurement::ScadaFlow {
                    branch,
                    phase,
                    p,
                    q,
                    sigma_p,
                    sigma_q,
                } => {
                    let k = branch_phase(branch, *phase)?;
                    let label = format!("scadaFlow {branch}.{phase}");
                    let v = ms.v_ref[phase.index()].norm();
                    let s = (sigma_p * sigma_p + sigma_q * sigma_q).sqrt() / v;
                    channels.push(Channel {
                        class: ChannelClass::Equivalent,
                        target: Target::Current {
                            branch: k,
                            phase: *phase,
                        },
                        value: ChannelValue::Power {
                            p: power_box(*p, *sigma_p, &label)?,
                            q: power_box(*q, *sigma_q, &label)?,
                            point: Complex64::new(*p, *q),
                        },
                        sigma: Some((s, s)),
                        label,
                    });
                }
                Measurement::InjPseudo {
                    bus,
                    phase,
                    p,
                    q,
                    sigma_p,
                    sigma_q,
                } => {
                    let k = injection_bus(bus, *phase)?;
                    let label = format!("injPseudo {bus}.{phase}");
                    let (pi, qi) = (
                        power_box(*p, *sigma_p, &label)?,
                        power_box(*q, *sigma_q, &label)?,
                    );
                    groups.entry((k, *phase)).or_default().add(
                        pi,
                        qi,
                        Complex64::new(*p, *q),
                        sigma_p * sigma_p + sigma_q * sigma_q,
                        "load".into(),
                    );
                }
                Measurement::ZeroInjection { bus, phase } => {
                    let k = injection_bus(bus, *phase)?;
                    groups.entry((k, *phase)).or_default().zero = true;
                }
                Measurement::DgMeter {
                    dg,
                    bus,
                    phase,
                    p,
                    q,
                    sigma_p,
                    sigma_q,
                } => {
                    let k = injection_bus(bus, *phase)?;
                    let label = format!("dgMeter {dg}.{phase}");
                    let (pi, qi) = (
                        power_box(*p, *sigma_p, &label)?,
                        power_box(*q, *sigma_q, &label)?,
                    );
                    groups.entry((k, *phase)).or_default().add(
                        -pi,
                        -qi,
                        -Complex64::new(*p, *q),
                        sigma_p * sigma_p + sigma_q * sigma_q,
                        dg.clone(),
                    );
                }
                Measurement::DgInterval {
                    dg,
                    bus,
                    phase,
                    p,
                    q,
                } => {
                    let k = injection_bus(bus, *phase)?;
                    let g = groups.entry((k, *phase)).or_default();
                    g.add(
                        -*p,
                        -*q,
                        -Complex64::new(p.midpoint(), q.midpoint()),
                        0.0,
                        dg.clone(),
                    );
                    g.unmetered = true;
                }
            }
        }

        for ((bus, phase), mut g) in groups {
            let name = &f.buses[bus].id;
            let v = ms.v_ref[phase.index()].norm();
            match g.total() {
                Some((p, q, point, _, parts)) if g.unmetered => channels.push(Channel {
                    class: ChannelClass::DgInterval,
                    target: Target::Injection {
                        bus,
                        phase,
                        consumption: false,
                    },
                    value: ChannelValue::Power {
                        p: -p,
                        q: -q,
                        point: -point,
                    },
                    sigma: None,
                    label: format!("dgInterval {name}.{phase} ({parts})"),
                }),
                Some((p, q, point, var, parts)) => {
                    let s = var.sqrt() / v;
                    channels.push(Channel {
                        class: ChannelClass::Equivalent,
                        target: Target::Injection {
                            bus,
                            phase,
                            consumption: true,
                        },
                        value: ChannelValue::Power { p, q, point },
                        sigma: Some((s, s)),
                        label: format!("injection {name}.{phase} ({parts})"),
                    })
                }
                None if g.zero => {
                    let s = ms.zero_injection_sigma;
                    channels.push(Channel {
                        class: ChannelClass::Equivalent,
                        target: Target::Injection {
                            bus,
                            phase,
                            consumption: true,
                        },
                        value: ChannelValue::Power {
                            p: Interval::ZERO,
                            q: Interval::ZERO,
                            point: Complex64::new(0.0, 0.0),
                        },
                        // Zero-injection sigma is already a current.
                        sigma: Some((s, s)),
                        label: format!("zeroInj {name}.{phase}"),
                    })
                }
                None => {}
            }
        }

        // Flows sort before injections inside the equivalent-current class
        // because `Target::Current` orders before `Target::Injection`.
        channels.sort_by(|a, b| (a.class, a.target).cmp(&(b.class, b.target)));
        let mut rows = Vec::with_capacity(2 * channels.len());
        let mut m1 = 0;
        let mut start = 0;
        while start < channels.len() {
            let class = channels[start].class;
            let end = channels[start..]
                .iter()
                .position(|c| c.class != class)
                .map_or(channels.len(), |k| start + k);
            for imag in [false, true] {
                rows.extend((start..end).map(|channel| RowSpec { channel, imag }));
            }
            if class != ChannelClass::DgInterval {
                m1 += 2 * (end - start);
            }
            start = end;
        }
        let m2 = rows.len() - m1;
        Ok(MeasurementModel {
            channels,
            rows,
            m1,
            m2,
            v_ref: ms.v_ref,
        })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn row_label(&self, r: usize) -> String {
        let spec = self.rows[r];
        format!(
            "{} {}",
            self.channels[spec.channel].label,
            if spec.imag { "im" } else { "re" }
        )
    }

    fn phase_of(target: &Target) -> Phase {
        match *target {
            Target::Voltage { phase, .. }
            | Target::Current { phase, .. }
            | Target::Injection { phase, .. } => phase,
        }
    }

    fn row_interval(&self, spec: RowSpec) -> Interval {
        let ch = &self.channels[spec.channel];
        match &ch.value {
            ChannelValue::Phasor { re, im, .. } => {
                if spec.imag {
                    *im
                } else {
                    *re
                }
            }
            ChannelValue::Power { p, q, .. } => {
                let v = self.v_ref[Self::phase_of(&ch.target).index()];
                let (ir, ix) = power_to_equivalent_current(*p, *q, v).expect("checked reference");
                if spec.imag {
                    ix
                } else {
                    ir
                }
            }
        }
    }

    /// Point measurement vector with power channels converted at `v_ref`.
    pub fn z_point(&self) -> Vec<f64> {
        self.z_point_with(|_, phase| self.v_ref[phase.index()])
    }

    /// Point measurement vector with power channels converted at the given
    /// bus voltages (flows at their sending bus).
    pub fn z_point_at(&self, f: &Feeder, v: &[[Complex64; 3]]) -> Vec<f64> {
        self.z_point_with(|target, phase| match *target {
            Target::Current { branch, .. } => v[f.branches[branch].from][phase.index()],
            Target::Injection { bus, .. } | Target::Voltage { bus, .. } => v[bus][phase.index()],
        })
    }

    fn z_point_with(&self, volt: impl Fn(&Target, Phase) -> Complex64) -> Vec<f64> {
        self.rows
            .iter()
            .map(|spec| {
                let ch = &self.channels[spec.channel];
                let c = match &ch.value {
                    ChannelValue::Phasor { point, .. } => *point,
                    ChannelValue::Power { point, .. } => {
                        (point / volt(&ch.target, Self::phase_of(&ch.target))).conj()
                    }
                };
                if spec.imag {
                    c.im
                } else {
                    c.re
                }
            })
            .collect()
    }
}

/// `[z1]`: every weighted row as its interval.
pub fn build_z1(model: &MeasurementModel) -> IntervalVector {
    model.rows[..model.m1]
        .iter()
        .map(|&s| model.row_interval(s))
        .collect()
}

/// `[z2]`: unit-weight rows carrying unmetered DG output intervals (combined
/// with any load at the same bus and phase), injection positive.
pub fn build_z2(model: &MeasurementModel) -> IntervalVector {
    model.rows[model.m1..]
        .iter()
        .map(|&s| model.row_interval(s))
        .collect()
}

pub fn build_weights(model: &MeasurementModel) -> Result<WeightMatrix, MeasurementError> {
    let mut w1 = Vec::with_capacity(model.m1);
    for (r, spec) in model.rows[..model.m1].iter().enumerate() {
        let (sr, sx) = model.channels[spec.channel]
            .sigma
            .expect("weighted rows carry a sigma");
        let s = if spec.imag { sx } else { sr };
        if !(s > 0.0 && s.is_finite()) {
            return Err(MeasurementError::ZeroSigma(model.row_label(r)));
        }
        w1.push(1.0 / (s * s));
    }
    Ok(WeightMatrix { w1, m2: model.m2 })
}
