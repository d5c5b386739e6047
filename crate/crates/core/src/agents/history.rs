use crate::arms::{agent_dim, Arm};
use crate::error::{contract, Result};
use crate::numerics::Mat;

/// Pulled arms (as agent-feature rows) and their rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    k: usize,
    x: Mat,
    rewards: Vec<f64>,
    arm_index: Vec<usize>,
}

impl History {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            x: Mat::zeros(0, agent_dim(k)),
            rewards: Vec::new(),
            arm_index: Vec::new(),
        }
    }

    /// Appends one observation and returns the feature row that was added.
    pub fn push(&mut self, arm: &Arm, reward: f64) -> Result<Vec<f64>> {
        if arm.k() != self.k {
            return Err(contract(format!(
                "arm has {} treatments, history expects {}",
                arm.k(),
                self.k
            )));
        }
        if !reward.is_finite() {
            return Err(contract(format!("reward must be finite, got {reward}")));
        }
        let row = arm.agent_features();
        self.x.push_row(&row)?;
        self.rewards.push(reward);
        self.arm_index.push(arm.index());
        Ok(row)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Lexicographic arm index of each row.
    pub fn arm_indices(&self) -> &[usize] {
        &self.arm_index
    }
}
