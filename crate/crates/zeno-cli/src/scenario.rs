//! Scenario documents: JSON parsing, strict key checking, validation, and
//! resolution into engine objects.
//!
//! The document schema is documented in the repository README. All
//! frequencies and times are unitless (ℏ = 1); the optional `unit_scale`
//! field is echoed into reports but never computed with.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use zeno_core::error::{Result, ZenoError};
use zeno_core::measurement::{
    make_dephasing, make_projective, make_two_level_detector, MeasurementModel,
};
use zeno_core::spectral::{LorentzianComponent, ReservoirSpectrum};
use zeno_core::system::{
    Channel, Envelope, Level, MeasurementSchedule, StateLabel, SystemSpec, TransitionOperator,
};

/// Raw document as written on disk. Every defaulted field is optional here;
/// [`Scenario::to_document`] writes the fully resolved form back out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub system: SystemDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationDoc>,
    pub measurement: MeasurementDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit_scale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub levels: Vec<LevelDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<LevelDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<StateDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_level: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDoc {
    pub label: String,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub level: String,
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDoc {
    pub entries: Vec<EntryDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDoc {
    pub from: StateDoc,
    pub to: StateDoc,
    pub amplitude: AmplitudeDoc,
}

/// A real number or an [re, im] pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AmplitudeDoc {
    Real(f64),
    Complex([f64; 2]),
}

impl AmplitudeDoc {
    fn to_complex(&self) -> Complex64 {
        match self {
            AmplitudeDoc::Real(x) => Complex64::new(*x, 0.0),
            AmplitudeDoc::Complex([re, im]) => Complex64::new(*re, *im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeDoc {
    Constant,
    Gaussian { center: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDoc {
    pub kind: String,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relax_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_level: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub tau: f64,
    pub tau_f: f64,
    pub n_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumDoc {
    Lorentzian {
        center: f64,
        half_width: f64,
        strength: f64,
    },
    DoubleLorentzian {
        components: [LorentzianDoc; 2],
    },
    FlatWindow {
        lo: f64,
        hi: f64,
        height: f64,
    },
    Tabulated {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianDoc {
    pub center: f64,
    pub half_width: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDoc {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
    pub spacing: String,
}

/// Which artifacts a run should write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Rates,
    Profile,
    Components,
    Survival,
}

impl OutputKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutputKind::Rates => "rates",
            OutputKind::Profile => "profile",
            OutputKind::Components => "components",
            OutputKind::Survival => "survival",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(OutputKind::Rates),
            "profile" => Ok(OutputKind::Profile),
            "components" => Ok(OutputKind::Components),
            "survival" => Ok(OutputKind::Survival),
            other => Err(ZenoError::Validation(format!(
                "unknown output `{other}` (expected rates, profile, components or survival)"
            ))),
        }
    }
}

/// Measurement descriptor resolved against the system, with the ability to
/// rebuild the model at any τ (sweeps need a whole model family).
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementRecipe {
    Projective,
    Dephasing {
        gamma: f64,
    },
    TwoLevelDetector {
        lambda: f64,
        relax_rate: f64,
        measured_level: String,
    },
}

/// A fully validated scenario with resolved engine objects.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSpec,
    pub initial: StateLabel,
    pub final_level: usize,
    pub transition: TransitionOperator,
    pub recipe: MeasurementRecipe,
    pub model: MeasurementModel,
    pub schedule: MeasurementSchedule,
    pub spectrum: Option<ReservoirSpectrum>,
    pub sweep: Option<SweepGrid>,
    pub outputs: Vec<OutputKind>,
    pub unit_scale: Option<String>,
    doc: ScenarioDoc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
    pub log_spacing: bool,
}

impl SweepGrid {
    pub fn taus(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                let frac = k as f64 / (n - 1) as f64;
                if self.log_spacing {
                    self.tau_min * (self.tau_max / self.tau_min).powf(frac)
                } else {
                    self.tau_min + frac * (self.tau_max - self.tau_min)
                }
            })
            .collect()
    }
}

/// Parse, optionally strict-check unknown keys, validate, and resolve.
pub fn parse_scenario(text: &str, name: &str, strict: bool) -> Result<Scenario> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ZenoError::Parse(format!("invalid JSON: {e}")))?;
    if strict {
        check_unknown_keys(&value)?;
    }
    let doc: ScenarioDoc = serde_json::from_str(text)
        .map_err(|e| ZenoError::Parse(format!("scenario does not match the schema: {e}")))?;
    resolve(doc, name)
}

/// Allowed keys per object path; rejects anything unknown with its path.
fn check_unknown_keys(value: &serde_json::Value) -> Result<()> {
    fn walk(value: &serde_json::Value, path: &str, allowed: &[(&str, &[&str])]) -> Result<()> {
        let Some(map) = value.as_object() else {
            return Ok(());
        };
        let here: Vec<&str> = allowed
            .iter()
            .find(|(p, _)| *p == path)
            .map(|(_, keys)| keys.to_vec())
            .unwrap_or_default();
        if here.is_empty() {
            return Ok(());
        }
        for (key, child) in map {
            if !here.contains(&key.as_str()) {
                return Err(ZenoError::Parse(format!(
                    "unknown key `{}{key}`",
                    if path.is_empty() {
                        String::new()
                    } else {
                        format!("{path}.")
                    }
                )));
            }
            let child_path = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            // Arrays of objects share their element schema.
            if let Some(items) = child.as_array() {
                for item in items {
                    walk(item, &format!("{child_path}[]"), allowed)?;
                }
            } else {
                walk(child, &child_path, allowed)?;
            }
        }
        Ok(())
    }

    const SCHEMA: &[(&str, &[&str])] = &[
        (
            "",
            &[
                "system",
                "perturbation",
                "measurement",
                "schedule",
                "spectrum",
                "sweep",
                "outputs",
                "unit_scale",
            ],
        ),
        ("system", &["levels", "channels", "initial", "final_level"]),
        ("system.levels[]", &["label", "energy"]),
        ("system.channels[]", &["label", "energy"]),
        ("system.initial", &["level", "channel"]),
        ("perturbation", &["entries", "envelope"]),
        ("perturbation.entries[]", &["from", "to", "amplitude"]),
        ("perturbation.entries[].from", &["level", "channel"]),
        ("perturbation.entries[].to", &["level", "channel"]),
        ("perturbation.envelope", &["kind", "center", "width"]),
        (
            "measurement",
            &[
                "kind",
                "tau",
                "gamma",
                "lambda",
                "relax_rate",
                "measured_level",
            ],
        ),
        ("schedule", &["tau", "tau_f", "n_repeats"]),
        (
            "spectrum",
            &[
                "kind",
                "center",
                "half_width",
                "strength",
                "components",
                "lo",
                "hi",
                "height",
                "points",
            ],
        ),
        (
            "spectrum.components[]",
            &["center", "half_width", "strength"],
        ),
        ("sweep", &["tau_min", "tau_max", "points", "spacing"]),
    ];
    walk(value, "", SCHEMA)
}

fn resolve(doc: ScenarioDoc, name: &str) -> Result<Scenario> {
    // System: default channel list is a single vacuum channel.
    let levels: Vec<Level> = doc
        .system
        .levels
        .iter()
        .map(|l| Level {
            label: l.label.clone(),
            energy: l.energy,
        })
        .collect();
    let channels: Vec<Channel> = doc
        .system
        .channels
        .clone()
        .unwrap_or_else(|| {
            vec![LevelDoc {
                label: "vac".into(),
                energy: 0.0,
            }]
        })
        .iter()
        .map(|c| Channel {
            label: c.label.clone(),
            energy: c.energy,
        })
        .collect();
    let system = SystemSpec::new(levels, channels)?;

    // Initial state: defaults to the highest-energy level in the first
    // channel (a decaying system starts excited).
    let initial = match &doc.system.initial {
        Some(s) => StateLabel {
            level: system.level_index(&s.level)?,
            channel: system.channel_index(&s.channel)?,
        },
        None => {
            let level = system
                .levels()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.energy.partial_cmp(&b.1.energy).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            StateLabel { level, channel: 0 }
        }
    };

    // Final level: defaults to the lowest-energy level other than the
    // initial one.
    let final_level = match &doc.system.final_level {
        Some(label) => system.level_index(label)?,
        None => {
            if system.levels().len() < 2 {
                return Err(ZenoError::Validation(
                    "system needs a second level to decay into".into(),
                ));
            }
            system
                .levels()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != initial.level)
                .min_by(|a, b| a.1.energy.partial_cmp(&b.1.energy).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        }
    };
    if final_level == initial.level {
        return Err(ZenoError::Validation(
            "final level must differ from the initial level".into(),
        ));
    }

    // Perturbation.
    let transition = match &doc.perturbation {
        None => TransitionOperator::empty(),
        Some(p) => {
            let envelope = match &p.envelope {
                None | Some(EnvelopeDoc::Constant) => Envelope::Constant,
                Some(EnvelopeDoc::Gaussian { center, width }) => Envelope::Gaussian {
                    center: *center,
                    width: *width,
                },
            };
            let mut entries = Vec::new();
            for e in &p.entries {
                let from = StateLabel {
                    level: system.level_index(&e.from.level)?,
                    channel: system.channel_index(&e.from.channel)?,
                };
                let to = StateLabel {
                    level: system.level_index(&e.to.level)?,
                    channel: system.channel_index(&e.to.channel)?,
                };
                entries.push((from, to, e.amplitude.to_complex()));
            }
            TransitionOperator::new(&system, entries, envelope)?
        }
    };

    // Measurement recipe + model at the document's τ.
    let m = &doc.measurement;
    let recipe = match m.kind.as_str() {
        "projective" => MeasurementRecipe::Projective,
        "dephasing" => MeasurementRecipe::Dephasing {
            gamma: m.gamma.ok_or_else(|| {
                ZenoError::Parse("missing required key `measurement.gamma`".into())
            })?,
        },
        "two_level_detector" => MeasurementRecipe::TwoLevelDetector {
            lambda: m.lambda.ok_or_else(|| {
                ZenoError::Parse("missing required key `measurement.lambda`".into())
            })?,
            relax_rate: m.relax_rate.ok_or_else(|| {
                ZenoError::Parse("missing required key `measurement.relax_rate`".into())
            })?,
            measured_level: m
                .measured_level
                .clone()
                .ok_or_else(|| {
                    ZenoError::Parse("missing required key `measurement.measured_level`".into())
                })?,
        },
        other => {
            return Err(ZenoError::Parse(format!(
                "unknown `measurement.kind` `{other}` (expected projective, dephasing or two_level_detector)"
            )))
        }
    };
    let model = build_model(&recipe, &system, m.tau)?;

    // Schedule: defaults to one continuous-measurement cycle.
    let schedule = match &doc.schedule {
        Some(s) => MeasurementSchedule::new(s.tau, s.tau_f, s.n_repeats)?,
        None => MeasurementSchedule::new(m.tau, 0.0, 1)?,
    };
    let cycle_mismatch = (schedule.tau_m() - m.tau).abs();
    if cycle_mismatch > 1e-12 * schedule.tau.max(1.0) {
        return Err(ZenoError::Validation(format!(
            "schedule measurement segment {} does not equal measurement.tau {}",
            schedule.tau_m(),
            m.tau
        )));
    }

    // Spectrum.
    let spectrum = match &doc.spectrum {
        None => None,
        Some(SpectrumDoc::Lorentzian {
            center,
            half_width,
            strength,
        }) => Some(ReservoirSpectrum::lorentzian(
            *center,
            *half_width,
            *strength,
        )?),
        Some(SpectrumDoc::DoubleLorentzian { components }) => {
            let comp = |d: &LorentzianDoc| LorentzianComponent {
                center: d.center,
                half_width: d.half_width,
                strength: d.strength,
            };
            Some(ReservoirSpectrum::double_lorentzian(
                comp(&components[0]),
                comp(&components[1]),
            )?)
        }
        Some(SpectrumDoc::FlatWindow { lo, hi, height }) => {
            Some(ReservoirSpectrum::flat_window(*lo, *hi, *height)?)
        }
        Some(SpectrumDoc::Tabulated { points }) => Some(ReservoirSpectrum::tabulated(
            points.iter().map(|p| (p[0], p[1])).collect(),
        )?),
    };

    // Exactly one of discrete couplings / spectrum drives the rate.
    if spectrum.is_some() && !transition.is_zero() {
        return Err(ZenoError::Validation(
            "a scenario may carry either discrete coupling entries or a spectrum, not both".into(),
        ));
    }
    if spectrum.is_some() && schedule.tau_f != 0.0 {
        return Err(ZenoError::Validation(
            "spectral scenarios require a continuous measurement (tau_f = 0)".into(),
        ));
    }

    // Sweep.
    let sweep = match &doc.sweep {
        None => None,
        Some(s) => {
            if !(s.tau_min > 0.0 && s.tau_min < s.tau_max) {
                return Err(ZenoError::Validation(format!(
                    "sweep bounds must satisfy 0 < tau_min < tau_max, got [{}, {}]",
                    s.tau_min, s.tau_max
                )));
            }
            if s.points < 8 {
                return Err(ZenoError::Validation(format!(
                    "sweep needs at least 8 points, got {}",
                    s.points
                )));
            }
            let log_spacing = match s.spacing.as_str() {
                "log" => true,
                "linear" => false,
                other => {
                    return Err(ZenoError::Parse(format!(
                        "unknown `sweep.spacing` `{other}` (expected linear or log)"
                    )))
                }
            };
            if spectrum.is_none() {
                return Err(ZenoError::Validation(
                    "sweeps need a spectrum to integrate against".into(),
                ));
            }
            Some(SweepGrid {
                tau_min: s.tau_min,
                tau_max: s.tau_max,
                points: s.points,
                log_spacing,
            })
        }
    };

    // Outputs: defaults depend on which route drives the run.
    let outputs: Vec<OutputKind> = match &doc.outputs {
        Some(names) => {
            let mut kinds = Vec::new();
            for n in names {
                let kind = OutputKind::parse(n)?;
                if !kinds.contains(&kind) {
                    kinds.push(kind);
                }
            }
            kinds
        }
        None => {
            if spectrum.is_some() {
                let mut v = vec![OutputKind::Profile, OutputKind::Survival];
                if sweep.is_some() {
                    v.push(OutputKind::Rates);
                }
                v
            } else {
                vec![OutputKind::Components, OutputKind::Survival]
            }
        }
    };
    for kind in &outputs {
        match kind {
            OutputKind::Rates if sweep.is_none() => {
                return Err(ZenoError::Validation(
                    "output `rates` requires a sweep section".into(),
                ))
            }
            OutputKind::Profile if spectrum.is_none() => {
                return Err(ZenoError::Validation(
                    "output `profile` requires a spectrum section".into(),
                ))
            }
            OutputKind::Components if spectrum.is_some() => {
                return Err(ZenoError::Validation(
                    "output `components` is only available for discrete-channel scenarios".into(),
                ))
            }
            _ => {}
        }
    }

    Ok(Scenario {
        name: name.to_string(),
        system,
        initial,
        final_level,
        transition,
        recipe,
        model,
        schedule,
        spectrum,
        sweep,
        outputs,
        unit_scale: doc.unit_scale.clone(),
        doc,
    })
}

/// Rebuild the scenario's measurement model at an arbitrary τ.
pub fn build_model(
    recipe: &MeasurementRecipe,
    system: &SystemSpec,
    tau: f64,
) -> Result<MeasurementModel> {
    match recipe {
        MeasurementRecipe::Projective => make_projective(tau),
        MeasurementRecipe::Dephasing { gamma } => make_dephasing(*gamma, tau),
        MeasurementRecipe::TwoLevelDetector {
            lambda,
            relax_rate,
            measured_level,
        } => make_two_level_detector(system, *lambda, *relax_rate, tau, measured_level),
    }
}

impl Scenario {
    /// The document with every default made explicit; parsing it again
    /// yields a structurally identical scenario.
    pub fn to_document(&self) -> ScenarioDoc {
        let mut doc = self.doc.clone();
        doc.system.channels = Some(
            self.system
                .channels()
                .iter()
                .map(|c| LevelDoc {
                    label: c.label.clone(),
                    energy: c.energy,
                })
                .collect(),
        );
        doc.system.initial = Some(StateDoc {
            level: self.system.levels()[self.initial.level].label.clone(),
            channel: self.system.channels()[self.initial.channel].label.clone(),
        });
        doc.system.final_level = Some(self.system.levels()[self.final_level].label.clone());
        doc.schedule = Some(ScheduleDoc {
            tau: self.schedule.tau,
            tau_f: self.schedule.tau_f,
            n_repeats: self.schedule.n_repeats,
        });
        doc.outputs = Some(self.outputs.iter().map(|o| o.name().to_string()).collect());
        doc
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scenario serialization")
    }
}
