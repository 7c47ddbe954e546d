//! Logger-side treatment of received readings.

use serde::{Deserialize, Serialize};

use crate::datasets::ButtonEvent;

/// Plug monitors cannot legitimately report more than a 13 A socket delivers.
pub const IAM_MAX_WATTS: u32 = 4000;
pub const WHOLE_HOUSE_MAX_WATTS: u32 = 20_000;
/// A monitor that returns within this many seconds of losing power is
/// assumed to have been switched off by its own button.
pub const POWER_LOSS_BUTTON_WINDOW: i64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Iam,
    WholeHouse,
}

/// `true` if the reading is plausible and should be logged.
pub fn filter_reading(kind: SourceKind, watts: u32) -> bool {
    match kind {
        SourceKind::Iam => watts <= IAM_MAX_WATTS,
        SourceKind::WholeHouse => watts <= WHOLE_HOUSE_MAX_WATTS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IamObservation {
    /// The occupant pressed the monitor's button.
    Press { on: bool },
    PowerLost,
    PowerRestored,
}

/// Tracks one monitor's switch as the logger sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchTracker {
    switch_on: bool,
    lost_at: Option<(i64, bool)>,
}

impl SwitchTracker {
    pub fn new(switch_on: bool) -> Self {
        Self {
            switch_on,
            lost_at: None,
        }
    }

    pub fn switch_on(&self) -> bool {
        self.switch_on
    }

    pub fn powered(&self) -> bool {
        self.lost_at.is_none()
    }

    pub fn observe(&mut self, t: i64, obs: IamObservation) -> Option<ButtonEvent> {
        match obs {
            IamObservation::Press { on } if self.powered() => {
                self.switch_on = on;
                Some(ButtonEvent { timestamp: t, on })
            }
            IamObservation::Press { .. } => None,
            IamObservation::PowerLost => {
                if self.powered() {
                    self.lost_at = Some((t, self.switch_on));
                }
                None
            }
            IamObservation::PowerRestored => {
                let (lost, previous) = self.lost_at.take()?;
                if t - lost <= POWER_LOSS_BUTTON_WINDOW {
                    // The monitor powers up switched off; indistinguishable from a press.
                    self.switch_on = false;
                    Some(ButtonEvent { timestamp: t, on: false })
                } else {
                    self.switch_on = previous;
                    None
                }
            }
        }
    }
}

/// Button-press log for one monitor, starting with its switch on.
pub fn derive_button_events(timeline: &[(i64, IamObservation)]) -> Vec<ButtonEvent> {
    let mut tracker = SwitchTracker::new(true);
    timeline
        .iter()
        .filter_map(|&(t, obs)| tracker.observe(t, obs))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use IamObservation::*;

    #[test]
    fn thresholds() {
        assert!(!filter_reading(SourceKind::Iam, 4500));
        assert!(filter_reading(SourceKind::Iam, 2990));
        assert!(filter_reading(SourceKind::Iam, 4000));
        assert!(filter_reading(SourceKind::WholeHouse, 8765));
        assert!(!filter_reading(SourceKind::WholeHouse, 20_001));
    }

    #[test]
    fn short_power_loss_reads_as_off_press() {
        let ev = derive_button_events(&[(100, PowerLost), (105, PowerRestored)]);
        assert_eq!(ev, vec![ButtonEvent { timestamp: 105, on: false }]);
    }

    #[test]
    fn long_power_loss_restores_switch() {
        let mut t = SwitchTracker::new(true);
        assert_eq!(t.observe(100, PowerLost), None);
        assert!(!t.powered());
        assert_eq!(t.observe(130, PowerRestored), None);
        assert!(t.switch_on());
        let mut t = SwitchTracker::new(false);
        t.observe(100, PowerLost);
        t.observe(130, PowerRestored);
        assert!(!t.switch_on());
    }

    #[test]
    fn presses_are_logged() {
        let ev = derive_button_events(&[(40, Press { on: false }), (50, Press { on: true })]);
        assert_eq!(
            ev,
            vec![
                ButtonEvent { timestamp: 40, on: false },
                ButtonEvent { timestamp: 50, on: true }
            ]
        );
    }

    #[test]
    fn boundary_is_inclusive() {
        let ev = derive_button_events(&[(0, PowerLost), (12, PowerRestored), (20, PowerLost), (33, PowerRestored)]);
        assert_eq!(ev, vec![ButtonEvent { timestamp: 12, on: false }]);
    }
}
