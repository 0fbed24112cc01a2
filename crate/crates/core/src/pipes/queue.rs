use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender, TryRecvError};

use super::PipeError;
use crate::episode::EpisodeRecord;

#[derive(Debug)]
struct Shared {
    senders: AtomicUsize,
    closed: AtomicBool,
}

/// Producer handle. Cloning registers another sender; dropping or
/// [`QueueSender::close`] deregisters it.
#[derive(Debug)]
pub struct QueueSender<T = EpisodeRecord> {
    tx: Option<Sender<T>>,
    shared: Arc<Shared>,
}

/// Consumer end of the sample queue.
#[derive(Debug)]
pub struct SampleQueue<T = EpisodeRecord> {
    rx: Receiver<T>,
    capacity: usize,
    shared: Arc<Shared>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pop<T> {
    Item(T),
    /// Empty and every sender closed.
    Exhausted,
}

impl<T> Pop<T> {
    pub fn into_item(self) -> Option<T> {
        match self {
            Pop::Item(t) => Some(t),
            Pop::Exhausted => None,
        }
    }
}

pub fn sample_queue<T>(capacity: usize) -> (QueueSender<T>, SampleQueue<T>) {
    let capacity = capacity.max(1);
    let (tx, rx) = bounded(capacity);
    let shared = Arc::new(Shared { senders: AtomicUsize::new(1), closed: AtomicBool::new(false) });
    (QueueSender { tx: Some(tx), shared: shared.clone() }, SampleQueue { rx, capacity, shared })
}

impl<T> QueueSender<T> {
    /// Blocks while the queue is full.
    pub fn push(&self, item: T) -> Result<(), PipeError> {
        if self.shared.closed.load(Ordering::Acquire) {
            return Err(PipeError::Closed);
        }
        match &self.tx {
            Some(tx) => tx.send(item).map_err(|_| PipeError::Closed),
            None => Err(PipeError::Closed),
        }
    }

    pub fn close(mut self) {
        self.release();
    }

    fn release(&mut self) {
        if self.tx.take().is_some() {
            self.shared.senders.fetch_sub(1, Ordering::AcqRel);
        }
    }
}

impl<T> Clone for QueueSender<T> {
    fn clone(&self) -> Self {
        let tx = self.tx.clone();
        if tx.is_some() {
            self.shared.senders.fetch_add(1, Ordering::AcqRel);
        }
        Self { tx, shared: self.shared.clone() }
    }
}

impl<T> Drop for QueueSender<T> {
    fn drop(&mut self) {
        self.release();
    }
}

impl<T> SampleQueue<T> {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rx.is_empty()
    }

    pub fn open_senders(&self) -> usize {
        self.shared.senders.load(Ordering::Acquire)
    }

    /// Blocks until an item arrives or every sender has gone.
    pub fn pop(&self) -> Pop<T> {
        match self.rx.recv() {
            Ok(item) => Pop::Item(item),
            Err(_) => Pop::Exhausted,
        }
    }

    /// `None` if nothing is available right now but senders remain.
    pub fn try_pop(&self) -> Option<Pop<T>> {
        match self.rx.try_recv() {
            Ok(item) => Some(Pop::Item(item)),
            Err(TryRecvError::Empty) => None,
            Err(TryRecvError::Disconnected) => Some(Pop::Exhausted),
        }
    }

    pub fn pop_timeout(&self, timeout: Duration) -> Option<Pop<T>> {
        match self.rx.recv_timeout(timeout) {
            Ok(item) => Some(Pop::Item(item)),
            Err(RecvTimeoutError::Timeout) => None,
            Err(RecvTimeoutError::Disconnected) => Some(Pop::Exhausted),
        }
    }

    /// Refuses further pushes. Items already queued can still be popped.
    pub fn close(&self) {
        self.shared.closed.store(true, Ordering::Release);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;
    use std::time::Instant;

    #[test]
    fn fifo() {
        let (tx, q) = sample_queue::<u32>(4);
        tx.push(1).unwrap();
        tx.push(2).unwrap();
        assert_eq!(q.pop(), Pop::Item(1));
        assert_eq!(q.pop(), Pop::Item(2));
    }

    #[test]
    fn blocks_until_delayed_push() {
        let (tx, q) = sample_queue::<u32>(4);
        let start = Instant::now();
        let h = thread::spawn(move || {
            thread::sleep(Duration::from_millis(60));
            tx.push(9).unwrap();
        });
        assert_eq!(q.pop(), Pop::Item(9));
        assert!(start.elapsed() >= Duration::from_millis(50));
        h.join().unwrap();
    }

    #[test]
    fn exhausted_only_after_all_senders_close() {
        let (tx, q) = sample_queue::<u32>(4);
        let tx2 = tx.clone();
        assert_eq!(q.open_senders(), 2);
        tx.push(1).unwrap();
        tx.close();
        assert_eq!(q.try_pop(), Some(Pop::Item(1)));
        assert_eq!(q.try_pop(), None);
        tx2.push(2).unwrap();
        drop(tx2);
        assert_eq!(q.open_senders(), 0);
        assert_eq!(q.pop(), Pop::Item(2));
        assert_eq!(q.pop(), Pop::Exhausted);
        assert_eq!(q.pop(), Pop::Exhausted);
        assert_eq!(q.pop_timeout(Duration::from_millis(1)), Some(Pop::Exhausted));
    }

    #[test]
    fn push_after_close_fails() {
        let (tx, q) = sample_queue::<u32>(4);
        tx.push(1).unwrap();
        q.close();
        assert_eq!(tx.push(2), Err(PipeError::Closed));
        assert_eq!(q.pop(), Pop::Item(1));
        drop(q);
        let (tx, q) = sample_queue::<u32>(4);
        drop(q);
        assert_eq!(tx.push(1), Err(PipeError::Closed));
    }

    #[test]
    fn producers_block_at_capacity() {
        let (tx, q) = sample_queue::<u32>(2);
        let h = thread::spawn(move || {
            for i in 0..10 {
                tx.push(i).unwrap();
            }
        });
        let mut got = Vec::new();
        thread::sleep(Duration::from_millis(20));
        while let Pop::Item(i) = q.pop() {
            assert!(q.len() <= q.capacity());
            got.push(i);
        }
        h.join().unwrap();
        assert_eq!(got, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn sequence_audit_many_producers() {
        const PRODUCERS: u64 = 4;
        const PER: u64 = 30_000;
        let (tx, q) = sample_queue::<(u64, u64)>(64);
        let handles: Vec<_> = (0..PRODUCERS)
            .map(|p| {
                let tx = tx.clone();
                thread::spawn(move || {
                    for s in 0..PER {
                        tx.push((p, s)).unwrap();
                    }
                })
            })
            .collect();
        drop(tx);
        let mut next = vec![0u64; PRODUCERS as usize];
        let mut total = 0u64;
        while let Pop::Item((p, s)) = q.pop() {
            assert_eq!(s, next[p as usize], "loss, duplication or reordering");
            next[p as usize] += 1;
            total += 1;
        }
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(total, PRODUCERS * PER);
        assert!(total >= 100_000);
    }
}
