use crate::error::{check_len, Result};
use crate::numerics::Rng;

/// Minibatch of stored transitions in row-major blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub s_next: Vec<f64>,
    /// 1.0 where the episode terminated (no bootstrap), else 0.0.
    pub done: Vec<f64>,
}

/// Fixed-capacity ring buffer of `(s, a, r, s', done)`.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    len: usize,
    head: usize,
    s: Vec<f64>,
    a: Vec<f64>,
    r: Vec<f64>,
    s_next: Vec<f64>,
    done: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            len: 0,
            head: 0,
            s: Vec::new(),
            a: Vec::new(),
            r: Vec::new(),
            s_next: Vec::new(),
            done: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, s: &[f64], a: &[f64], r: f64, s_next: &[f64], done: bool) -> Result<()> {
        check_len("replay observation", self.obs_dim, s.len())?;
        check_len("replay next observation", self.obs_dim, s_next.len())?;
        check_len("replay action", self.act_dim, a.len())?;
        if self.capacity == 0 {
            return Ok(());
        }
        let d = if done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            // Storage grows lazily up to capacity.
            self.s.extend_from_slice(s);
            self.a.extend_from_slice(a);
            self.r.push(r);
            self.s_next.extend_from_slice(s_next);
            self.done.push(d);
            self.len += 1;
            self.head = self.len % self.capacity;
        } else {
            let i = self.head;
            let (o, k) = (self.obs_dim, self.act_dim);
            self.s[i * o..(i + 1) * o].copy_from_slice(s);
            self.a[i * k..(i + 1) * k].copy_from_slice(a);
            self.r[i] = r;
            self.s_next[i * o..(i + 1) * o].copy_from_slice(s_next);
            self.done[i] = d;
            self.head = (self.head + 1) % self.capacity;
        }
        Ok(())
    }

    /// Returns stored transition `i` as `(s, a, r, s', done)`.
    pub fn get(&self, i: usize) -> (&[f64], &[f64], f64, &[f64], bool) {
        let (o, k) = (self.obs_dim, self.act_dim);
        (
            &self.s[i * o..(i + 1) * o],
            &self.a[i * k..(i + 1) * k],
            self.r[i],
            &self.s_next[i * o..(i + 1) * o],
            self.done[i] != 0.0,
        )
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, size: usize, rng: &mut Rng) -> Batch {
        let (o, k) = (self.obs_dim, self.act_dim);
        let mut b = Batch {
            size,
            s: Vec::with_capacity(size * o),
            a: Vec::with_capacity(size * k),
            r: Vec::with_capacity(size),
            s_next: Vec::with_capacity(size * o),
            done: Vec::with_capacity(size),
        };
        for _ in 0..size {
            let i = rng.below(self.len);
            b.s.extend_from_slice(&self.s[i * o..(i + 1) * o]);
            b.a.extend_from_slice(&self.a[i * k..(i + 1) * k]);
            b.r.push(self.r[i]);
            b.s_next.extend_from_slice(&self.s_next[i * o..(i + 1) * o]);
            b.done.push(self.done[i]);
        }
        b
    }
}
