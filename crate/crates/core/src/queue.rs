//! Bounded single-producer/single-consumer hand-off used between pipeline
//! stages.
//!
//! The overflow policy decides what happens when the producer outruns the
//! consumer: block (offline replay), evict the oldest item (live capture), or
//! refuse the newest (live inference).

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overflow {
    Block,
    DropOldest,
    DropNewest,
}

/// Outcome of a [`BoundedQueue::push`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pushed {
    Accepted,
    /// Accepted after evicting the oldest queued item.
    EvictedOldest,
    /// The queue was full and the pushed item was discarded.
    Rejected,
    Closed,
}

#[derive(Debug)]
struct State<T> {
    items: VecDeque<T>,
    closed: bool,
    dropped: u64,
}

#[derive(Debug)]
pub struct BoundedQueue<T> {
    state: Mutex<State<T>>,
    not_empty: Condvar,
    not_full: Condvar,
    capacity: usize,
    overflow: Overflow,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize, overflow: Overflow) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            state: Mutex::new(State {
                items: VecDeque::with_capacity(capacity),
                closed: false,
                dropped: 0,
            }),
            not_empty: Condvar::new(),
            not_full: Condvar::new(),
            capacity,
            overflow,
        }
    }

    fn lock(&self) -> MutexGuard<'_, State<T>> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, item: T) -> Pushed {
        let mut st = self.lock();
        if st.closed {
            return Pushed::Closed;
        }
        let mut outcome = Pushed::Accepted;
        if st.items.len() >= self.capacity {
            match self.overflow {
                Overflow::Block => {
                    while st.items.len() >= self.capacity && !st.closed {
                        st = self.not_full.wait(st).unwrap_or_else(|e| e.into_inner());
                    }
                    if st.closed {
                        return Pushed::Closed;
                    }
                }
                Overflow::DropOldest => {
                    st.items.pop_front();
                    st.dropped += 1;
                    outcome = Pushed::EvictedOldest;
                }
                Overflow::DropNewest => {
                    st.dropped += 1;
                    return Pushed::Rejected;
                }
            }
        }
        st.items.push_back(item);
        drop(st);
        self.not_empty.notify_one();
        outcome
    }

    /// Blocks until an item is available. Returns `None` once the queue is
    /// closed and drained.
    pub fn pop(&self) -> Option<T> {
        let mut st = self.lock();
        loop {
            if let Some(item) = st.items.pop_front() {
                drop(st);
                self.not_full.notify_one();
                return Some(item);
            }
            if st.closed {
                return None;
            }
            st = self.not_empty.wait(st).unwrap_or_else(|e| e.into_inner());
        }
    }

    /// Like [`pop`](Self::pop) but gives up after `timeout`, returning
    /// `Err(())` when nothing arrived in time.
    #[allow(clippy::result_unit_err)]
    pub fn pop_timeout(&self, timeout: Duration) -> Result<Option<T>, ()> {
        let st = self.lock();
        let (mut st, res) = self
            .not_empty
            .wait_timeout_while(st, timeout, |s| s.items.is_empty() && !s.closed)
            .unwrap_or_else(|e| e.into_inner());
        if let Some(item) = st.items.pop_front() {
            drop(st);
            self.not_full.notify_one();
            return Ok(Some(item));
        }
        if st.closed {
            Ok(None)
        } else {
            debug_assert!(res.timed_out());
            Err(())
        }
    }

    pub fn try_pop(&self) -> Option<T> {
        let item = self.lock().items.pop_front();
        if item.is_some() {
            self.not_full.notify_one();
        }
        item
    }

    /// Closes the queue for both sides. Queued items can still be drained.
    pub fn close(&self) {
        self.lock().closed = true;
        self.not_empty.notify_all();
        self.not_full.notify_all();
    }

    /// Closes the queue and discards anything still queued.
    pub fn close_and_clear(&self) -> usize {
        let mut st = self.lock();
        st.closed = true;
        let n = st.items.len();
        st.items.clear();
        drop(st);
        self.not_empty.notify_all();
        self.not_full.notify_all();
        n
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn len(&self) -> usize {
        self.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Items discarded by the overflow policy so far.
    pub fn dropped(&self) -> u64 {
        self.lock().dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;

    #[test]
    fn drop_oldest_keeps_latest() {
        let q = BoundedQueue::new(3, Overflow::DropOldest);
        for i in 0..5 {
            q.push(i);
        }
        assert_eq!(q.dropped(), 2);
        assert_eq!(q.try_pop(), Some(2));
        assert_eq!(q.try_pop(), Some(3));
        assert_eq!(q.try_pop(), Some(4));
        assert_eq!(q.try_pop(), None);
    }

    #[test]
    fn drop_newest_refuses_when_full() {
        let q = BoundedQueue::new(2, Overflow::DropNewest);
        assert_eq!(q.push(1), Pushed::Accepted);
        assert_eq!(q.push(2), Pushed::Accepted);
        assert_eq!(q.push(3), Pushed::Rejected);
        assert_eq!(q.dropped(), 1);
        assert_eq!(q.try_pop(), Some(1));
    }

    #[test]
    fn blocking_queue_delivers_everything_in_order() {
        let q = Arc::new(BoundedQueue::new(2, Overflow::Block));
        let producer = {
            let q = Arc::clone(&q);
            thread::spawn(move || {
                for i in 0..100 {
                    assert_eq!(q.push(i), Pushed::Accepted);
                }
                q.close();
            })
        };
        let got: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        producer.join().unwrap();
        assert_eq!(got, (0..100).collect::<Vec<_>>());
        assert_eq!(q.dropped(), 0);
    }

    #[test]
    fn close_unblocks_waiting_producer() {
        let q = Arc::new(BoundedQueue::new(1, Overflow::Block));
        q.push(0);
        let h = {
            let q = Arc::clone(&q);
            thread::spawn(move || q.push(1))
        };
        thread::sleep(Duration::from_millis(20));
        q.close();
        assert_eq!(h.join().unwrap(), Pushed::Closed);
    }

    #[test]
    fn pop_timeout_times_out() {
        let q: BoundedQueue<u8> = BoundedQueue::new(1, Overflow::Block);
        assert_eq!(q.pop_timeout(Duration::from_millis(5)), Err(()));
        q.close();
        assert_eq!(q.pop_timeout(Duration::from_millis(5)), Ok(None));
    }
}
