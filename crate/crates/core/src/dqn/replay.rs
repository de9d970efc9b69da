use rand::Rng;

/// One stored interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    /// Raw priority before the `alpha` exponent; always positive.
    pub priority: f64,
}

/// Binary tree of partial sums over leaf weights.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two().max(1);
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, w: f64) {
        let mut n = self.leaves + i;
        self.nodes[n] = w;
        while n > 1 {
            n /= 2;
            self.nodes[n] = self.nodes[2 * n] + self.nodes[2 * n + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`.
    fn find(&self, mut mass: f64, len: usize) -> usize {
        let mut n = 1;
        while n < self.leaves {
            let left = self.nodes[2 * n];
            if mass < left {
                n *= 2;
            } else {
                mass -= left;
                n = 2 * n + 1;
            }
        }
        // Rounding can walk past the populated region; clamp back into it.
        (n - self.leaves).min(len - 1)
    }
}

/// Proportional prioritized replay: `P(i) = p_i^alpha / sum_j p_j^alpha`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
    tree: SumTree,
    pub alpha: f64,
    max_priority: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    /// Importance-sampling weights normalized by their maximum.
    pub weights: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            data: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            tree: SumTree::new(capacity),
            alpha,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Stores `t` with the running maximum priority, overwriting the oldest
    /// entry once full. Returns the slot used.
    pub fn push(&mut self, mut t: Transition) -> usize {
        t.priority = self.max_priority;
        let slot = if self.data.len() < self.capacity {
            self.data.push(t);
            self.data.len() - 1
        } else {
            let s = self.next;
            self.data[s] = t;
            s
        };
        self.next = (slot + 1) % self.capacity;
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        slot
    }

    /// Stores `t` with its own priority (used by tests and tools).
    pub fn push_with_priority(&mut self, t: Transition) -> usize {
        let p = t.priority;
        let slot = self.push(t);
        self.set_priority(slot, p);
        slot
    }

    pub fn set_priority(&mut self, i: usize, priority: f64) {
        assert!(priority > 0.0 && priority.is_finite(), "priority must be positive");
        self.data[i].priority = priority;
        self.tree.set(i, priority.powf(self.alpha));
        self.max_priority = self.max_priority.max(priority);
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mass = rng.gen::<f64>() * self.tree.total();
        self.tree.find(mass, self.data.len())
    }

    /// Draws `batch` indices independently with replacement and returns
    /// importance-sampling weights `(N P(i))^-beta / max`.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> SampledBatch {
        assert!(!self.data.is_empty(), "cannot sample an empty buffer");
        let n = self.data.len() as f64;
        let indices: Vec<usize> = (0..batch).map(|_| self.sample_index(rng)).collect();
        let mut weights: Vec<f64> = indices
            .iter()
            .map(|&i| (n * self.probability(i)).powf(-beta))
            .collect();
        let max = weights.iter().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            weights.iter_mut().for_each(|w| *w /= max);
        }
        SampledBatch { indices, weights }
    }
}
