//! Experience replay with four retention policies.
//!
//! * `fifo` — ring buffer, oldest evicted first.
//! * `gdm` — global distribution matching: each experience gets a standard
//!   normal key at insertion and the buffer keeps the `capacity` largest keys,
//!   so after `t` insertions every experience is present with probability
//!   `capacity / t`.
//! * `gdm-plus-fifo` — a FIFO tail of 10% capacity holds the most recent
//!   experiences; experiences leaving the tail compete for the reservoir.
//! * `task-matching` — per-task FIFO sub-buffers sharing the capacity; the
//!   largest sub-buffer gives up its oldest entry when full.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::envs::Observation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    /// True environment termination; time-limit cut-offs are not terminal.
    pub terminal: bool,
    pub task_index: usize,
    /// Step index within the episode.
    pub time: u32,
    /// Learner-local episode counter; traces never cross episodes.
    pub episode: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayKind {
    Fifo,
    Gdm,
    GdmPlusFifo,
    TaskMatching,
}

#[derive(Clone, Debug)]
struct Entry {
    seq: u64,
    transition: Transition,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Entries ordered by sequence number.
#[derive(Clone, Debug, Default)]
struct Ring {
    entries: VecDeque<Entry>,
}

impl Ring {
    fn get(&self, seq: u64) -> Option<&Entry> {
        self.entries
            .binary_search_by_key(&seq, |e| e.seq)
            .ok()
            .map(|i| &self.entries[i])
    }
}

/// Keeps the entries with the largest keys.
#[derive(Clone, Debug, Default)]
struct Reservoir {
    slots: Vec<(Key, Entry)>,
    heap: BinaryHeap<Reverse<(Key, usize)>>,
    by_seq: HashMap<u64, usize>,
}

impl Reservoir {
    /// Offers an entry; returns whether it was kept.
    fn offer(&mut self, key: Key, entry: Entry, capacity: usize) -> bool {
        if capacity == 0 {
            return false;
        }
        if self.slots.len() < capacity {
            let slot = self.slots.len();
            self.by_seq.insert(entry.seq, slot);
            self.heap.push(Reverse((key, slot)));
            self.slots.push((key, entry));
            return true;
        }
        let Some(&Reverse((min_key, slot))) = self.heap.peek() else {
            return false;
        };
        if key <= min_key {
            return false;
        }
        self.heap.pop();
        let old_seq = self.slots[slot].1.seq;
        self.by_seq.remove(&old_seq);
        self.by_seq.insert(entry.seq, slot);
        self.slots[slot] = (key, entry);
        self.heap.push(Reverse((key, slot)));
        true
    }

    fn get(&self, seq: u64) -> Option<&Entry> {
        self.by_seq.get(&seq).map(|&i| &self.slots[i].1)
    }
}

#[derive(Clone, Debug)]
enum Store {
    Fifo(Ring),
    Gdm(Reservoir),
    GdmPlusFifo {
        tail: Ring,
        tail_capacity: usize,
        reservoir: Reservoir,
        keys: VecDeque<Key>,
    },
    TaskMatching(BTreeMap<usize, Ring>),
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    kind: ReplayKind,
    capacity: usize,
    store: Store,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(kind: ReplayKind, capacity: usize) -> Self {
        let store = match kind {
            ReplayKind::Fifo => Store::Fifo(Ring::default()),
            ReplayKind::Gdm => Store::Gdm(Reservoir::default()),
            ReplayKind::GdmPlusFifo => Store::GdmPlusFifo {
                tail: Ring::default(),
                tail_capacity: (capacity / 10).max(1).min(capacity),
                reservoir: Reservoir::default(),
                keys: VecDeque::new(),
            },
            ReplayKind::TaskMatching => Store::TaskMatching(BTreeMap::new()),
        };
        Self {
            kind,
            capacity,
            store,
            inserted: 0,
        }
    }

    pub fn kind(&self) -> ReplayKind {
        self.kind
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions over the buffer's lifetime.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Fifo(r) => r.entries.len(),
            Store::Gdm(r) => r.slots.len(),
            Store::GdmPlusFifo {
                tail, reservoir, ..
            } => tail.entries.len() + reservoir.slots.len(),
            Store::TaskMatching(m) => m.values().map(|r| r.entries.len()).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn len_for_task(&self, task: usize) -> usize {
        match &self.store {
            Store::TaskMatching(m) => m.get(&task).map_or(0, |r| r.entries.len()),
            _ => self.iter().filter(|t| t.task_index == task).count(),
        }
    }

    pub fn insert<R: Rng + ?Sized>(&mut self, transition: Transition, rng: &mut R) {
        let entry = Entry {
            seq: self.inserted,
            transition,
        };
        self.inserted += 1;
        if self.capacity == 0 {
            return;
        }
        let capacity = self.capacity;
        match &mut self.store {
            Store::Fifo(ring) => {
                ring.entries.push_back(entry);
                if ring.entries.len() > capacity {
                    ring.entries.pop_front();
                }
            }
            Store::Gdm(res) => {
                let key = Key(rng.sample(StandardNormal));
                res.offer(key, entry, capacity);
            }
            Store::GdmPlusFifo {
                tail,
                tail_capacity,
                reservoir,
                keys,
            } => {
                keys.push_back(Key(rng.sample(StandardNormal)));
                tail.entries.push_back(entry);
                if tail.entries.len() > *tail_capacity {
                    let old = tail.entries.pop_front().expect("non-empty tail");
                    let key = keys.pop_front().expect("key per tail entry");
                    reservoir.offer(key, old, capacity - *tail_capacity);
                }
            }
            Store::TaskMatching(map) => {
                map.entry(entry.transition.task_index)
                    .or_default()
                    .entries
                    .push_back(entry);
                let total: usize = map.values().map(|r| r.entries.len()).sum();
                if total > capacity {
                    let largest = map
                        .iter()
                        .max_by_key(|(task, r)| (r.entries.len(), Reverse(**task)))
                        .map(|(&task, _)| task)
                        .expect("non-empty map");
                    map.get_mut(&largest)
                        .expect("present")
                        .entries
                        .pop_front();
                }
            }
        }
    }

    fn entries(&self) -> Box<dyn Iterator<Item = &Entry> + '_> {
        match &self.store {
            Store::Fifo(r) => Box::new(r.entries.iter()),
            Store::Gdm(r) => Box::new(r.slots.iter().map(|(_, e)| e)),
            Store::GdmPlusFifo {
                tail, reservoir, ..
            } => Box::new(
                reservoir
                    .slots
                    .iter()
                    .map(|(_, e)| e)
                    .chain(tail.entries.iter()),
            ),
            Store::TaskMatching(m) => Box::new(m.values().flat_map(|r| r.entries.iter())),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> + '_ {
        self.entries().map(|e| &e.transition)
    }

    fn entry_at(&self, mut i: usize, task: Option<usize>) -> &Entry {
        match (&self.store, task) {
            (Store::Fifo(r), None) => &r.entries[i],
            (Store::Gdm(r), None) => &r.slots[i].1,
            (Store::GdmPlusFifo { tail, reservoir, .. }, None) => {
                if i < reservoir.slots.len() {
                    &reservoir.slots[i].1
                } else {
                    i -= reservoir.slots.len();
                    &tail.entries[i]
                }
            }
            (Store::TaskMatching(m), Some(task)) => &m[&task].entries[i],
            (Store::TaskMatching(m), None) => {
                for r in m.values() {
                    if i < r.entries.len() {
                        return &r.entries[i];
                    }
                    i -= r.entries.len();
                }
                unreachable!("index within buffer length")
            }
            (_, Some(_)) => unreachable!("task routing only for task-matching buffers"),
        }
    }

    fn get(&self, seq: u64) -> Option<&Entry> {
        match &self.store {
            Store::Fifo(r) => r.get(seq),
            Store::Gdm(r) => r.get(seq),
            Store::GdmPlusFifo {
                tail, reservoir, ..
            } => tail.get(seq).or_else(|| reservoir.get(seq)),
            Store::TaskMatching(m) => m.values().find_map(|r| r.get(seq)),
        }
    }

    /// Population sampled from: everything, or for task-matching buffers the
    /// sub-buffer of `task` when given.
    fn population(&self, task: Option<usize>) -> (usize, Option<usize>) {
        match (&self.store, task) {
            (Store::TaskMatching(_), Some(t)) => (self.len_for_task(t), Some(t)),
            _ => (self.len(), None),
        }
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        task: Option<usize>,
        rng: &mut R,
    ) -> Vec<&Transition> {
        let (len, route) = self.population(task);
        if len == 0 {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.entry_at(rng.random_range(0..len), route).transition)
            .collect()
    }

    /// Samples `n` traces ending at uniformly chosen experiences. Each trace
    /// holds up to `prefix + len` consecutive experiences from one episode;
    /// the first element of the pair is how many leading experiences form
    /// the warm-up prefix.
    pub fn sample_traces<R: Rng + ?Sized>(
        &self,
        n: usize,
        len: usize,
        prefix: usize,
        task: Option<usize>,
        rng: &mut R,
    ) -> Vec<(usize, Vec<&Transition>)> {
        let (size, route) = self.population(task);
        if size == 0 || len == 0 {
            return Vec::new();
        }
        (0..n)
            .map(|_| {
                let last = self.entry_at(rng.random_range(0..size), route);
                let mut trace = vec![&last.transition];
                let mut seq = last.seq;
                while trace.len() < len + prefix && seq > 0 {
                    let Some(prev) = self.get(seq - 1) else { break };
                    let cur = trace.last().expect("non-empty");
                    if prev.transition.episode != cur.episode
                        || prev.transition.time + 1 != cur.time
                    {
                        break;
                    }
                    trace.push(&prev.transition);
                    seq -= 1;
                }
                trace.reverse();
                let warm = trace.len().saturating_sub(len);
                (warm, trace)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn tr(id: usize, task: usize, episode: u64, time: u32) -> Transition {
        Transition {
            obs: vec![id as f64],
            action: 0,
            reward: id as f64,
            next_obs: vec![id as f64 + 1.0],
            terminal: false,
            task_index: task,
            time,
            episode,
        }
    }

    fn ids(buf: &ReplayBuffer) -> Vec<usize> {
        let mut v: Vec<usize> = buf.iter().map(|t| t.reward as usize).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn fifo_evicts_oldest() {
        let mut rng = rng_from_seed(0);
        let mut b = ReplayBuffer::new(ReplayKind::Fifo, 3);
        for i in 1..=4 {
            b.insert(tr(i, 0, 0, i as u32), &mut rng);
        }
        assert_eq!(ids(&b), vec![2, 3, 4]);
    }

    #[test]
    fn gdm_keeps_capacity_and_largest_keys() {
        let mut rng = rng_from_seed(1);
        let mut b = ReplayBuffer::new(ReplayKind::Gdm, 50);
        for i in 0..1000 {
            b.insert(tr(i, 0, 0, i as u32), &mut rng);
            assert!(b.len() <= 50);
        }
        assert_eq!(b.len(), 50);
        let Store::Gdm(res) = &b.store else { panic!() };
        let kept_min = res.slots.iter().map(|(k, _)| *k).min().unwrap();
        assert_eq!(res.heap.peek().unwrap().0 .0, kept_min);
    }

    #[test]
    fn gdm_plus_fifo_always_holds_recent() {
        let mut rng = rng_from_seed(2);
        let mut b = ReplayBuffer::new(ReplayKind::GdmPlusFifo, 100);
        for i in 0..5000 {
            b.insert(tr(i, 0, 0, i as u32), &mut rng);
        }
        assert_eq!(b.len(), 100);
        let got = ids(&b);
        for recent in 4990..5000 {
            assert!(got.contains(&recent));
        }
    }

    #[test]
    fn task_matching_routes_samples() {
        let mut rng = rng_from_seed(3);
        let mut b = ReplayBuffer::new(ReplayKind::TaskMatching, 60);
        for i in 0..200 {
            b.insert(tr(i, i % 3, 0, i as u32), &mut rng);
            assert!(b.len() <= 60);
        }
        for task in 0..3 {
            let s = b.sample(100, Some(task), &mut rng);
            assert_eq!(s.len(), 100);
            assert!(s.iter().all(|t| t.task_index == task));
        }
        assert_eq!(b.sample(5, Some(7), &mut rng).len(), 0);
    }

    #[test]
    fn traces_stay_within_episode() {
        let mut rng = rng_from_seed(4);
        let mut b = ReplayBuffer::new(ReplayKind::Fifo, 1000);
        let mut id = 0;
        for episode in 0..20u64 {
            for time in 0..(5 + episode as u32) {
                b.insert(tr(id, 0, episode, time), &mut rng);
                id += 1;
            }
        }
        for (warm, trace) in b.sample_traces(200, 6, 3, None, &mut rng) {
            assert!(trace.len() <= 9 && !trace.is_empty());
            assert!(warm <= 3);
            assert!(trace.windows(2).all(|w| w[0].episode == w[1].episode && w[0].time + 1 == w[1].time));
            if warm > 0 {
                assert_eq!(trace.len(), 6 + warm);
            }
        }
    }

    #[test]
    fn gdm_inclusion_frequency_small() {
        // B = 10, t = 100: each item kept with probability 0.1.
        let trials = 2000;
        let mut counts = vec![0usize; 100];
        for trial in 0..trials {
            let mut rng = rng_from_seed(1000 + trial);
            let mut b = ReplayBuffer::new(ReplayKind::Gdm, 10);
            for i in 0..100 {
                b.insert(tr(i, 0, 0, 0), &mut rng);
            }
            for id in ids(&b) {
                counts[id] += 1;
            }
        }
        let p = 0.1;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() <= 4.0 * sigma);
        }
    }
}
