//! System description: discrete levels, reservoir channels, the transition
//! operator driving jumps, and measurement schedules.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Result, ZenoError};

/// One measured level of the discrete part of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub label: String,
    /// Energy in angular-frequency units (ℏ = 1).
    pub energy: f64,
}

/// One reservoir channel (the remaining quantum numbers).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: String,
    /// Energy in angular-frequency units (ℏ = 1).
    pub energy: f64,
}

/// Discrete levels plus reservoir channels of the unperturbed Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    levels: Vec<Level>,
    channels: Vec<Channel>,
}

/// Index pair (level, channel) addressing one basis state |n α⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateLabel {
    pub level: usize,
    pub channel: usize,
}

/// Bra/ket state pair indexing a measurement kernel block |n α⟩⟨m α′|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LevelPair {
    pub bra: StateLabel,
    pub ket: StateLabel,
}

impl LevelPair {
    /// Pair with both sides on the same state (the trace-preserving block).
    pub fn diagonal(state: StateLabel) -> Self {
        Self {
            bra: state,
            ket: state,
        }
    }

    /// True when both sides carry the same level index; the channel index
    /// never affects the shipped detector kernels.
    pub fn is_level_diagonal(&self) -> bool {
        self.bra.level == self.ket.level
    }
}

impl SystemSpec {
    pub fn new(levels: Vec<Level>, channels: Vec<Channel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(ZenoError::Validation(
                "system needs at least one level".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &levels {
            if !seen.insert(l.label.as_str()) {
                return Err(ZenoError::Validation(format!(
                    "duplicate level label `{}`",
                    l.label
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &channels {
            if !seen.insert(c.label.as_str()) {
                return Err(ZenoError::Validation(format!(
                    "duplicate channel label `{}`",
                    c.label
                )));
            }
        }
        Ok(Self { levels, channels })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn level_index(&self, label: &str) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.label == label)
            .ok_or_else(|| ZenoError::Config(format!("unknown level label `{label}`")))
    }

    pub fn channel_index(&self, label: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| ZenoError::Config(format!("unknown channel label `{label}`")))
    }

    /// Validated state label from indices.
    pub fn state(&self, level: usize, channel: usize) -> Result<StateLabel> {
        if level >= self.levels.len() {
            return Err(ZenoError::Config(format!(
                "level index {level} out of range ({} levels)",
                self.levels.len()
            )));
        }
        if channel >= self.channels.len() {
            return Err(ZenoError::Config(format!(
                "channel index {channel} out of range ({} channels)",
                self.channels.len()
            )));
        }
        Ok(StateLabel { level, channel })
    }

    pub fn pair(&self, bra: StateLabel, ket: StateLabel) -> Result<LevelPair> {
        self.state(bra.level, bra.channel)?;
        self.state(ket.level, ket.channel)?;
        Ok(LevelPair { bra, ket })
    }

    /// Total energy of a basis state, E_level + E_channel.
    pub fn energy(&self, s: StateLabel) -> f64 {
        self.levels[s.level].energy + self.channels[s.channel].energy
    }

    /// Transition frequency ω between two states: E(a) − E(b). The phase
    /// factor attached to a jump b → a oscillates at this frequency.
    pub fn omega(&self, a: StateLabel, b: StateLabel) -> f64 {
        self.energy(a) - self.energy(b)
    }
}

/// Optional real scalar envelope v(t) multiplying the transition operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Constant,
    /// exp(−(t−center)²/(2 width²))
    Gaussian {
        center: f64,
        width: f64,
    },
}

impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant => 1.0,
            Envelope::Gaussian { center, width } => {
                let x = (t - center) / width;
                (-0.5 * x * x).exp()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Envelope::Constant)
    }
}

/// Hermitian jump operator: entries V_{nα,mα′} with an optional separable
/// time envelope, V(t) = v(t)·V̂.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionOperator {
    entries: BTreeMap<(StateLabel, StateLabel), Complex64>,
    envelope: Envelope,
}

impl TransitionOperator {
    /// Build from one-sided entries; the Hermitian partner of every entry is
    /// filled in automatically. Diagonal entries and conflicting duplicates
    /// are rejected.
    pub fn new(
        sys: &SystemSpec,
        entries: Vec<(StateLabel, StateLabel, Complex64)>,
        envelope: Envelope,
    ) -> Result<Self> {
        let mut map: BTreeMap<(StateLabel, StateLabel), Complex64> = BTreeMap::new();
        for (a, b, v) in entries {
            sys.state(a.level, a.channel)?;
            sys.state(b.level, b.channel)?;
            if a == b {
                return Err(ZenoError::Validation(format!(
                    "transition operator diagonal entry at level {} channel {} must be zero",
                    a.level, a.channel
                )));
            }
            for (key, val) in [((a, b), v), ((b, a), v.conj())] {
                if let Some(prev) = map.insert(key, val) {
                    if (prev - val).norm() > 1e-12 {
                        return Err(ZenoError::Validation(format!(
                            "conflicting transition entries for ({},{}) -> ({},{})",
                            key.0.level, key.0.channel, key.1.level, key.1.channel
                        )));
                    }
                }
            }
        }
        if let Envelope::Gaussian { width, .. } = envelope {
            if width <= 0.0 {
                return Err(ZenoError::Validation(
                    "Gaussian envelope width must be positive".into(),
                ));
            }
        }
        Ok(Self {
            entries: map,
            envelope,
        })
    }

    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
            envelope: Envelope::Constant,
        }
    }

    /// Matrix element V_{a,b} (without the envelope factor).
    pub fn element(&self, a: StateLabel, b: StateLabel) -> Complex64 {
        self.entries
            .get(&(a, b))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn envelope_at(&self, t: f64) -> f64 {
        self.envelope.eval(t)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|v| v.norm() == 0.0)
    }

    /// Iterate one representative per Hermitian pair (a < b in index order).
    pub fn upper_entries(&self) -> impl Iterator<Item = (StateLabel, StateLabel, Complex64)> + '_ {
        self.entries
            .iter()
            .filter(|((a, b), _)| a < b)
            .map(|((a, b), v)| (*a, *b, *v))
    }

    /// Scale every matrix element by a real factor (used in convergence fits).
    pub fn scaled(&self, factor: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(k, v)| (*k, v * Complex64::new(factor, 0.0)))
            .collect();
        Self {
            entries,
            envelope: self.envelope.clone(),
        }
    }
}

/// One repeated cycle: free evolution of duration `tau_f`, then measurement
/// until `tau`, repeated `n_repeats` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSchedule {
    pub tau: f64,
    pub tau_f: f64,
    pub n_repeats: usize,
}

impl MeasurementSchedule {
    pub fn new(tau: f64, tau_f: f64, n_repeats: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(ZenoError::Validation(format!(
                "cycle duration must be positive, got {tau}"
            )));
        }
        if !(0.0..=tau).contains(&tau_f) {
            return Err(ZenoError::Validation(format!(
                "free-evolution duration {tau_f} must lie in [0, {tau}]"
            )));
        }
        if n_repeats == 0 {
            return Err(ZenoError::Validation("n_repeats must be positive".into()));
        }
        Ok(Self {
            tau,
            tau_f,
            n_repeats,
        })
    }

    /// Measurement-segment duration τ − τ_F.
    pub fn tau_m(&self) -> f64 {
        self.tau - self.tau_f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level_system() -> SystemSpec {
        SystemSpec::new(
            vec![
                Level {
                    label: "g".into(),
                    energy: 0.0,
                },
                Level {
                    label: "e".into(),
                    energy: 5.0,
                },
            ],
            vec![
                Channel {
                    label: "vac".into(),
                    energy: 0.0,
                },
                Channel {
                    label: "m1".into(),
                    energy: 4.5,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn omega_matches_energy_differences() {
        let sys = two_level_system();
        let i = sys.state(1, 0).unwrap(); // |e, vac⟩, E = 5
        let f = sys.state(0, 1).unwrap(); // |g, m1⟩, E = 4.5
        assert_eq!(sys.omega(f, i), -0.5);
        assert_eq!(sys.omega(i, f), 0.5);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let r = SystemSpec::new(
            vec![
                Level {
                    label: "a".into(),
                    energy: 0.0,
                },
                Level {
                    label: "a".into(),
                    energy: 1.0,
                },
            ],
            vec![],
        );
        assert!(r.is_err());
    }

    #[test]
    fn transition_operator_fills_hermitian_partner() {
        let sys = two_level_system();
        let a = sys.state(1, 0).unwrap();
        let b = sys.state(0, 1).unwrap();
        let v = TransitionOperator::new(
            &sys,
            vec![(a, b, Complex64::new(0.3, 0.4))],
            Envelope::Constant,
        )
        .unwrap();
        assert_eq!(v.element(a, b), Complex64::new(0.3, 0.4));
        assert_eq!(v.element(b, a), Complex64::new(0.3, -0.4));
        assert_eq!(v.element(a, a), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn transition_operator_rejects_diagonal() {
        let sys = two_level_system();
        let a = sys.state(1, 0).unwrap();
        assert!(TransitionOperator::new(
            &sys,
            vec![(a, a, Complex64::new(1.0, 0.0))],
            Envelope::Constant
        )
        .is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(MeasurementSchedule::new(1.0, 0.5, 3).is_ok());
        assert!(MeasurementSchedule::new(0.0, 0.0, 1).is_err());
        assert!(MeasurementSchedule::new(1.0, 1.5, 1).is_err());
        assert!(MeasurementSchedule::new(1.0, 0.0, 0).is_err());
    }
}
