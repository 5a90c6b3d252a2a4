//! Per-control-step reward shaping used by episode records and the RL
//! environments.

/// How a per-step figure of merit (phonon number or energy) becomes a reward.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RewardShaping {
    /// r = −5(⟨n⟩ − 0.4); cooling from moment inputs.
    CoolingMoments,
    /// r = −2(⟨n⟩ − 1); cooling from wavefunction or measurement inputs.
    CoolingScaled,
    /// r = −0.02·⟨n⟩ per step and −10 on failure.
    Inverted,
    /// r = −2(E − 1).
    QuarticEnergy,
    /// r = −value.
    #[default]
    Negative,
}

impl RewardShaping {
    pub fn reward(&self, value: f64, failed: bool) -> f64 {
        match self {
            RewardShaping::CoolingMoments => -5.0 * (value - 0.4),
            RewardShaping::CoolingScaled => -2.0 * (value - 1.0),
            RewardShaping::Inverted => {
                if failed {
                    -10.0
                } else {
                    -0.02 * value
                }
            }
            RewardShaping::QuarticEnergy => -2.0 * (value - 1.0),
            RewardShaping::Negative => -value,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardShaping::CoolingMoments => "cooling-moments",
            RewardShaping::CoolingScaled => "cooling-scaled",
            RewardShaping::Inverted => "inverted",
            RewardShaping::QuarticEnergy => "quartic",
            RewardShaping::Negative => "negative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cooling-moments" => RewardShaping::CoolingMoments,
            "cooling-scaled" => RewardShaping::CoolingScaled,
            "inverted" => RewardShaping::Inverted,
            "quartic" => RewardShaping::QuarticEnergy,
            "negative" => RewardShaping::Negative,
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shaping_values() {
        assert!((RewardShaping::CoolingMoments.reward(0.4, false)).abs() < 1e-15);
        assert_eq!(RewardShaping::CoolingScaled.reward(2.0, false), -2.0);
        assert_eq!(RewardShaping::Inverted.reward(3.0, true), -10.0);
        assert!((RewardShaping::Inverted.reward(3.0, false) + 0.06).abs() < 1e-15);
        assert_eq!(RewardShaping::QuarticEnergy.reward(1.5, false), -1.0);
    }

    #[test]
    fn names_round_trip() {
        for r in [
            RewardShaping::CoolingMoments,
            RewardShaping::CoolingScaled,
            RewardShaping::Inverted,
            RewardShaping::QuarticEnergy,
            RewardShaping::Negative,
        ] {
            assert_eq!(RewardShaping::parse(r.name()), Some(r));
        }
    }
}
