use serde::{Deserialize, Serialize};

/// A query `⟨x, ℓ⟩`. Levels are zero-based; the last level is the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub x: Vec<f64>,
    pub level: usize,
}

impl Action {
    pub fn new(x: Vec<f64>, level: usize) -> Self {
        Action { x, level }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub action: Action,
    pub value: f64,
    pub cost_charged: f64,
}

/// Append-only record of observations and the cost spent on them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    entries: Vec<Observation>,
    cumulative_cost: f64,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: Observation) {
        self.cumulative_cost += obs.cost_charged;
        self.entries.push(obs);
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cumulative_cost
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.entries.iter()
    }

    pub fn count_at_level(&self, level: usize) -> usize {
        self.entries.iter().filter(|o| o.action.level == level).count()
    }
}

impl FromIterator<Observation> for History {
    fn from_iter<I: IntoIterator<Item = Observation>>(iter: I) -> Self {
        let mut h = History::new();
        for o in iter {
            h.push(o);
        }
        h
    }
}

impl<'a> IntoIterator for &'a History {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}
