use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

/// Wake-up signal shared by every queue a consumer reads from.
#[derive(Debug, Default)]
pub struct Notify {
    generation: Mutex<u64>,
    cond: Condvar,
}

impl Notify {
    pub fn new() -> Arc<Self> {
        Arc::new(Notify::default())
    }

    pub fn notify(&self) {
        let mut g = self.generation.lock().unwrap();
        *g = g.wrapping_add(1);
        self.cond.notify_all();
    }

    pub fn generation(&self) -> u64 {
        *self.generation.lock().unwrap()
    }

    /// Blocks until the generation moves past `seen` or `timeout` elapses.
    pub fn wait_past(&self, seen: u64, timeout: Duration) -> u64 {
        let deadline = Instant::now() + timeout;
        let mut g = self.generation.lock().unwrap();
        while *g == seen {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            g = self.cond.wait_timeout(g, deadline - now).unwrap().0;
        }
        *g
    }
}

/// Bounded multi-producer FIFO. A push into a full queue evicts the oldest
/// element, so producers never block.
#[derive(Debug)]
pub struct BoundedQueue<T> {
    items: Mutex<VecDeque<T>>,
    capacity: usize,
    dropped: AtomicU64,
    notify: Arc<Notify>,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize, notify: Arc<Notify>) -> Self {
        let capacity = capacity.max(1);
        BoundedQueue {
            items: Mutex::new(VecDeque::with_capacity(capacity.min(1024))),
            capacity,
            dropped: AtomicU64::new(0),
            notify,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Returns true when an older element was evicted.
    pub fn push(&self, item: T) -> bool {
        let evicted = {
            let mut q = self.items.lock().unwrap();
            let evicted = if q.len() >= self.capacity {
                q.pop_front();
                true
            } else {
                false
            };
            q.push_back(item);
            evicted
        };
        if evicted {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        self.notify.notify();
        evicted
    }

    pub fn pop(&self) -> Option<T> {
        self.items.lock().unwrap().pop_front()
    }

    pub fn drain(&self) -> Vec<T> {
        self.items.lock().unwrap().drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.items.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn notifier(&self) -> &Arc<Notify> {
        &self.notify
    }

    /// Blocking pop with a timeout.
    pub fn pop_timeout(&self, timeout: Duration) -> Option<T> {
        let deadline = Instant::now() + timeout;
        loop {
            let seen = self.notify.generation();
            if let Some(v) = self.pop() {
                return Some(v);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            self.notify.wait_past(seen, deadline - now);
        }
    }
}
