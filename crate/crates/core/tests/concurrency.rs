use std::collections::{HashSet, VecDeque};
use std::time::Duration;

use marl_core::checks::{param_pool_stress, pipe_audit, queue_audit, shutdown_trial};

#[test]
fn pipe_audit_over_many_round_trips() {
    let r = pipe_audit(4, 25_000).unwrap();
    assert_eq!(r.sent, 200_000);
    assert!(r.is_clean(), "{r:?}");
}

#[test]
fn queue_audit_over_many_episodes() {
    let r = queue_audit(4, 25_000, 8).unwrap();
    assert_eq!(r.sent, 100_000);
    assert!(r.is_clean(), "{r:?}");
}

#[test]
fn snapshot_stress_four_readers() {
    let r = param_pool_stress(4, 10_000);
    assert!(r.fetches > 0);
    assert_eq!((r.checksum_failures, r.torn, r.version_regressions), (0, 0, 0), "{r:?}");
}

#[test]
fn randomized_shutdowns_terminate_cleanly() {
    for seed in 0..100 {
        let t = shutdown_trial(seed, Duration::from_secs(10));
        assert!(t.is_clean(), "seed {seed}: {t:?}");
    }
}

// Exhaustive exploration of the actor / worker / consumer protocol as a
// transition system. Actors send an observation, wait for the action, and
// after the last step send a done marker whose acknowledgement precedes the
// episode push. The worker takes every pending request in one poll and
// replies in order; it stops once all pipes are closed and empty. The
// consumer pops until the queue is empty with no open senders.

const PIPE_CAP: usize = 2;
const QUEUE_CAP: usize = 1;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum ActorPc {
    Send { episode: u8, msg: u8 },
    Wait { episode: u8, msg: u8 },
    Push { episode: u8 },
    Closed,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
struct World {
    actors: Vec<ActorPc>,
    obs: Vec<VecDeque<u8>>,
    act: Vec<VecDeque<u8>>,
    /// Requests taken by the last poll and not yet answered, in order.
    pending: VecDeque<(usize, u8)>,
    worker_done: bool,
    queue: VecDeque<(usize, u8)>,
    popped: Vec<(usize, u8)>,
    consumer_done: bool,
}

struct Protocol {
    episodes: u8,
    steps: u8,
}

impl Protocol {
    fn initial(&self, actors: usize) -> World {
        World {
            actors: vec![ActorPc::Send { episode: 0, msg: 0 }; actors],
            obs: vec![VecDeque::new(); actors],
            act: vec![VecDeque::new(); actors],
            pending: VecDeque::new(),
            worker_done: false,
            queue: VecDeque::new(),
            popped: Vec::new(),
            consumer_done: false,
        }
    }

    fn successors(&self, w: &World) -> Vec<World> {
        let mut out = Vec::new();
        for i in 0..w.actors.len() {
            let mut n = w.clone();
            let moved = match w.actors[i].clone() {
                ActorPc::Send { episode, msg } if w.obs[i].len() < PIPE_CAP && !w.worker_done => {
                    n.obs[i].push_back(msg);
                    n.actors[i] = ActorPc::Wait { episode, msg };
                    true
                }
                ActorPc::Wait { episode, msg } if !w.act[i].is_empty() => {
                    let echoed = n.act[i].pop_front().unwrap();
                    assert_eq!(echoed, msg, "reply out of order");
                    n.actors[i] = if msg == self.steps {
                        ActorPc::Push { episode }
                    } else {
                        ActorPc::Send { episode, msg: msg + 1 }
                    };
                    true
                }
                ActorPc::Push { episode } if w.queue.len() < QUEUE_CAP => {
                    n.queue.push_back((i, episode));
                    n.actors[i] = if episode + 1 == self.episodes {
                        ActorPc::Closed
                    } else {
                        ActorPc::Send { episode: episode + 1, msg: 0 }
                    };
                    true
                }
                _ => false,
            };
            if moved {
                out.push(n);
            }
        }
        if !w.worker_done {
            if let Some((i, msg)) = w.pending.front().copied() {
                if w.act[i].len() < PIPE_CAP {
                    let mut n = w.clone();
                    n.pending.pop_front();
                    n.act[i].push_back(msg);
                    out.push(n);
                }
            } else if w.obs.iter().any(|q| !q.is_empty()) {
                let mut n = w.clone();
                for (i, q) in n.obs.iter_mut().enumerate() {
                    if let Some(m) = q.pop_front() {
                        n.pending.push_back((i, m));
                    }
                }
                out.push(n);
            } else if w.actors.iter().all(|a| *a == ActorPc::Closed) {
                let mut n = w.clone();
                n.worker_done = true;
                out.push(n);
            }
        }
        if !w.consumer_done {
            if !w.queue.is_empty() {
                let mut n = w.clone();
                let item = n.queue.pop_front().unwrap();
                n.popped.push(item);
                out.push(n);
            } else if w.actors.iter().all(|a| *a == ActorPc::Closed) {
                let mut n = w.clone();
                n.consumer_done = true;
                out.push(n);
            }
        }
        out
    }

    fn is_final(w: &World) -> bool {
        w.worker_done && w.consumer_done
    }
}

/// Returns (states explored, terminal states reached).
fn explore(p: &Protocol, actors: usize) -> (usize, usize) {
    let start = p.initial(actors);
    let mut seen = HashSet::new();
    let mut stack = vec![start.clone()];
    seen.insert(start);
    let mut finals = 0;
    while let Some(w) = stack.pop() {
        let next = p.successors(&w);
        if next.is_empty() {
            assert!(Protocol::is_final(&w), "deadlock in {w:?}");
            let mut got = w.popped.clone();
            got.sort();
            let want: Vec<(usize, u8)> = (0..actors).flat_map(|i| (0..p.episodes).map(move |e| (i, e))).collect();
            assert_eq!(got, want, "episodes lost or duplicated");
            assert!(w.obs.iter().chain(&w.act).all(|q| q.is_empty()) && w.pending.is_empty());
            finals += 1;
            continue;
        }
        for n in next {
            if seen.insert(n.clone()) {
                stack.push(n);
            }
        }
    }
    (seen.len(), finals)
}

#[test]
fn every_interleaving_of_two_actors_two_steps_terminates() {
    let (states, finals) = explore(&Protocol { episodes: 1, steps: 2 }, 2);
    assert!(states > 100);
    assert!(finals >= 1);
}

#[test]
fn every_interleaving_of_two_actors_two_single_step_episodes_terminates() {
    let (_, finals) = explore(&Protocol { episodes: 2, steps: 1 }, 2);
    assert!(finals >= 1);
}
