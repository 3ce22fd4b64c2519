use std::collections::VecDeque;

/// Fixed window of the last `H` (observation, one-hot previous action)
/// pairs of one agent, zero-padded at the start of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    window: usize,
    obs_len: usize,
    n_actions: usize,
    entries: VecDeque<Vec<f64>>,
}

impl History {
    pub fn new(window: usize, obs_len: usize, n_actions: usize) -> Self {
        assert!(window >= 1, "history window must hold at least one entry");
        let mut h = Self {
            window,
            obs_len,
            n_actions,
            entries: VecDeque::with_capacity(window),
        };
        h.clear();
        h
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        for _ in 0..self.window {
            self.entries.push_back(vec![0.0; self.obs_len + self.n_actions]);
        }
    }

    /// Appends an observation together with the action taken just before it
    /// (`None` at the first step of an episode).
    pub fn push(&mut self, observation: &[f64], previous_action: Option<usize>) {
        assert_eq!(observation.len(), self.obs_len, "observation length");
        let mut entry = Vec::with_capacity(self.obs_len + self.n_actions);
        entry.extend_from_slice(observation);
        entry.resize(self.obs_len + self.n_actions, 0.0);
        if let Some(a) = previous_action {
            entry[self.obs_len + a] = 1.0;
        }
        self.entries.pop_front();
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.window * (self.obs_len + self.n_actions)
    }

    /// Oldest entry first.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_len());
        for e in &self.entries {
            out.extend_from_slice(e);
        }
        out
    }
}
