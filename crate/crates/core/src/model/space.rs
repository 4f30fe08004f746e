use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// The two hidden state factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Intensity,
    Orientation,
}

impl Factor {
    pub const ALL: [Factor; 2] = [Factor::Intensity, Factor::Orientation];

    pub fn index(self) -> usize {
        match self {
            Factor::Intensity => 0,
            Factor::Orientation => 1,
        }
    }
}

/// ERD strength levels and lateralization angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub intensity_labels: Vec<String>,
    /// Radius of the ERD vector, in `[0, 1]`.
    pub intensity_values: Vec<f64>,
    pub orientation_labels: Vec<String>,
    /// Angle of the ERD vector in radians, in `[0, pi/2]`.
    pub orientation_angles: Vec<f64>,
    pub rest_intensity: usize,
    pub rest_orientation: usize,
}

impl Default for StateSpace {
    fn default() -> Self {
        Self::standard()
    }
}

impl StateSpace {
    /// Four equispaced intensities (null..high) and five angles (L..R).
    pub fn standard() -> Self {
        Self {
            intensity_labels: ["null", "low", "medium", "high"].map(String::from).to_vec(),
            intensity_values: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            orientation_labels: ["L", "CL", "C", "CR", "R"].map(String::from).to_vec(),
            orientation_angles: (0..5).map(|k| k as f64 * PI / 8.0).collect(),
            rest_intensity: 0,
            rest_orientation: 2,
        }
    }

    pub fn n_intensity(&self) -> usize {
        self.intensity_values.len()
    }

    pub fn n_orientation(&self) -> usize {
        self.orientation_angles.len()
    }

    pub fn n_levels(&self, factor: Factor) -> usize {
        match factor {
            Factor::Intensity => self.n_intensity(),
            Factor::Orientation => self.n_orientation(),
        }
    }

    pub fn rest(&self, factor: Factor) -> usize {
        match factor {
            Factor::Intensity => self.rest_intensity,
            Factor::Orientation => self.rest_orientation,
        }
    }

    pub fn n_joint(&self) -> usize {
        self.n_intensity() * self.n_orientation()
    }

    /// Joint index, intensity-major.
    pub fn joint_index(&self, intensity: usize, orientation: usize) -> usize {
        intensity * self.n_orientation() + orientation
    }

    pub fn split_joint(&self, joint: usize) -> (usize, usize) {
        (joint / self.n_orientation(), joint % self.n_orientation())
    }

    pub fn validate(&self) -> crate::Result<()> {
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        let ok = !self.intensity_values.is_empty()
            && !self.orientation_angles.is_empty()
            && inc(&self.intensity_values)
            && inc(&self.orientation_angles)
            && self.intensity_values[0] >= 0.0
            && *self.intensity_values.last().unwrap() <= 1.0
            && self.orientation_angles[0] >= 0.0
            && *self.orientation_angles.last().unwrap() <= PI / 2.0 + 1e-12
            && self.rest_intensity < self.n_intensity()
            && self.rest_orientation < self.n_orientation()
            && self.intensity_labels.len() == self.n_intensity()
            && self.orientation_labels.len() == self.n_orientation();
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!("invalid state space: {self:?}")))
        }
    }
}

/// Mental actions available for one factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    /// Moves toward the top of the factor (high intensity, right orientation).
    Up,
    /// Moves toward the bottom (null intensity, left orientation).
    Down,
    /// Drifts toward the resting level.
    Neutral,
}

/// Per-factor action set. Indices `0` and `1` are the effective up/down
/// actions, the rest are neutral.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub n_up: usize,
    pub n_down: usize,
    pub n_neutral: usize,
}

impl Default for ActionSpace {
    fn default() -> Self {
        Self {
            n_up: 1,
            n_down: 1,
            n_neutral: 10,
        }
    }
}

impl ActionSpace {
    pub fn per_factor(&self) -> usize {
        self.n_up + self.n_down + self.n_neutral
    }

    pub fn n_joint(&self) -> usize {
        self.per_factor() * self.per_factor()
    }

    pub fn kind(&self, action: usize) -> ActionKind {
        if action < self.n_up {
            ActionKind::Up
        } else if action < self.n_up + self.n_down {
            ActionKind::Down
        } else {
            ActionKind::Neutral
        }
    }

    pub fn up(&self) -> usize {
        0
    }

    pub fn down(&self) -> usize {
        self.n_up
    }

    /// The neutral action the process runs under during rest.
    pub fn rest_action(&self) -> usize {
        self.n_up + self.n_down
    }

    pub fn encode(&self, action: JointAction) -> usize {
        action.intensity * self.per_factor() + action.orientation
    }

    pub fn decode(&self, index: usize) -> JointAction {
        JointAction {
            intensity: index / self.per_factor(),
            orientation: index % self.per_factor(),
        }
    }
}

/// One action per factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction {
    pub intensity: usize,
    pub orientation: usize,
}

impl JointAction {
    pub fn new(intensity: usize, orientation: usize) -> Self {
        Self {
            intensity,
            orientation,
        }
    }

    pub fn get(&self, factor: Factor) -> usize {
        match factor {
            Factor::Intensity => self.intensity,
            Factor::Orientation => self.orientation,
        }
    }
}
