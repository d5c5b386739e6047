//! The combinatorial arm space.
//!
//! An arm switches each of `K` treatments off (`-1`) or on (`+1`). Agents see
//! an arm through its intercept, main effects and two-way interactions; the
//! environment additionally uses three-way interactions. Both expansions use
//! one canonical column order: intercept, then index tuples of increasing
//! size, each size in lexicographic order. The agent columns are therefore an
//! exact prefix of the true columns.

use crate::error::{contract, Result};
use crate::numerics::Mat;

pub const MAX_TREATMENTS: usize = 20;

/// One treatment combination, each level `-1` or `+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arm(Vec<i8>);

impl Arm {
    pub fn new(levels: Vec<i8>) -> Result<Self> {
        if levels.is_empty() || levels.len() > MAX_TREATMENTS {
            return Err(contract(format!(
                "arm must have 1..={MAX_TREATMENTS} treatments, got {}",
                levels.len()
            )));
        }
        if let Some(bad) = levels.iter().find(|l| **l != -1 && **l != 1) {
            return Err(contract(format!("arm level must be -1 or +1, got {bad}")));
        }
        Ok(Self(levels))
    }

    /// The arm at position `index` of the lexicographic enumeration.
    pub fn from_index(k: usize, index: usize) -> Self {
        let levels = (0..k)
            .map(|j| if index >> (k - 1 - j) & 1 == 1 { 1 } else { -1 })
            .collect();
        Self(levels)
    }

    /// Inverse of [`Arm::from_index`].
    pub fn index(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, &l| (acc << 1) | usize::from(l == 1))
    }

    pub fn levels(&self) -> &[i8] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// Intercept, main effects and two-way interactions.
    pub fn agent_features(&self) -> Vec<f64> {
        expand(&self.0, 2)
    }

    /// Agent features followed by three-way interactions.
    pub fn true_features(&self) -> Vec<f64> {
        expand(&self.0, 3)
    }
}

/// Effect terms up to `max_order` in canonical order; the intercept is the empty tuple.
pub fn terms(k: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for order in 1..=max_order.min(k) {
        let mut idx: Vec<usize> = (0..order).collect();
        loop {
            out.push(idx.clone());
            // next combination in lexicographic order
            let mut i = order;
            while i > 0 && idx[i - 1] == k - order + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..order {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of agent-visible columns, `1 + K + C(K,2)`.
pub fn agent_dim(k: usize) -> usize {
    1 + k + binomial(k, 2)
}

/// Number of true-model columns, `1 + K + C(K,2) + C(K,3)`.
pub fn true_dim(k: usize) -> usize {
    agent_dim(k) + binomial(k, 3)
}

/// Human-readable label of a term, e.g. `x1:x4` (1-based).
pub fn term_label(term: &[usize]) -> String {
    if term.is_empty() {
        return "intercept".to_owned();
    }
    term.iter()
        .map(|i| format!("x{}", i + 1))
        .collect::<Vec<_>>()
        .join(":")
}

fn expand(levels: &[i8], max_order: usize) -> Vec<f64> {
    let k = levels.len();
    let x: Vec<f64> = levels.iter().map(|&l| f64::from(l)).collect();
    let mut out = Vec::with_capacity(if max_order >= 3 { true_dim(k) } else { agent_dim(k) });
    out.push(1.0);
    out.extend_from_slice(&x);
    if max_order >= 2 {
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(x[i] * x[j]);
            }
        }
    }
    if max_order >= 3 {
        for i in 0..k {
            for j in (i + 1)..k {
                for l in (j + 1)..k {
                    out.push(x[i] * x[j] * x[l]);
                }
            }
        }
    }
    out
}

/// All `2^K` arms with both feature matrices materialized.
#[derive(Debug, Clone)]
pub struct ArmSet {
    k: usize,
    arms: Vec<Arm>,
    agent_matrix: Mat,
    true_matrix: Mat,
}

impl ArmSet {
    /// Every arm of a `K`-treatment space, in lexicographic order of levels.
    pub fn enumerate(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_TREATMENTS {
            return Err(contract(format!(
                "number of treatments must be in 1..={MAX_TREATMENTS}, got {k}"
            )));
        }
        let arms: Vec<Arm> = (0..1usize << k).map(|i| Arm::from_index(k, i)).collect();
        let agent_rows: Vec<Vec<f64>> = arms.iter().map(Arm::agent_features).collect();
        let true_rows: Vec<Vec<f64>> = arms.iter().map(Arm::true_features).collect();
        Ok(Self {
            k,
            agent_matrix: Mat::from_rows(agent_dim(k), &agent_rows)?,
            true_matrix: Mat::from_rows(true_dim(k), &true_rows)?,
            arms,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm(&self, index: usize) -> &Arm {
        &self.arms[index]
    }

    pub fn agent_matrix(&self) -> &Mat {
        &self.agent_matrix
    }

    pub fn true_matrix(&self) -> &Mat {
        &self.true_matrix
    }
}

/// `enumerate_arms(K)`
pub fn enumerate_arms(k: usize) -> Result<ArmSet> {
    ArmSet::enumerate(k)
}
