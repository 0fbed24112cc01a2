use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Select, Sender, TryRecvError};

use super::PipeError;

/// What an actor hands the worker at every time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsRequest {
    pub actor_id: u32,
    pub env_time_step: u32,
    pub per_agent_obs: Vec<Vec<f64>>,
    pub avail_actions: Vec<Vec<bool>>,
    /// The episode just ended. The worker resets the actor's recurrent state
    /// and acknowledges with an empty action.
    pub episode_done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionReply {
    pub actor_id: u32,
    pub joint_action: Vec<usize>,
}

/// Actor side of an observation/action pipe.
#[derive(Debug)]
pub struct ActorEnd {
    actor_id: u32,
    obs_tx: Sender<ObsRequest>,
    act_rx: Receiver<ActionReply>,
    outstanding: bool,
}

/// Worker side of one actor's pipe.
#[derive(Debug)]
pub struct WorkerEnd {
    actor_id: u32,
    obs_rx: Receiver<ObsRequest>,
    act_tx: Sender<ActionReply>,
}

pub fn obs_act_pipe(actor_id: u32, capacity: usize) -> (ActorEnd, WorkerEnd) {
    let (obs_tx, obs_rx) = bounded(capacity.max(1));
    let (act_tx, act_rx) = bounded(capacity.max(1));
    (
        ActorEnd { actor_id, obs_tx, act_rx, outstanding: false },
        WorkerEnd { actor_id, obs_rx, act_tx },
    )
}

impl ActorEnd {
    pub fn actor_id(&self) -> u32 {
        self.actor_id
    }

    pub fn send_obs(&mut self, req: ObsRequest) -> Result<(), PipeError> {
        if self.outstanding {
            return Err(PipeError::ProtocolViolation(format!(
                "actor {} sent a second observation before receiving its action",
                self.actor_id
            )));
        }
        if req.actor_id != self.actor_id {
            return Err(PipeError::Misrouted { expected: self.actor_id, got: req.actor_id });
        }
        self.obs_tx.send(req).map_err(|_| PipeError::Closed)?;
        self.outstanding = true;
        Ok(())
    }

    pub fn recv_action(&mut self) -> Result<ActionReply, PipeError> {
        if !self.outstanding {
            return Err(PipeError::ProtocolViolation(format!(
                "actor {} waits for an action without a pending observation",
                self.actor_id
            )));
        }
        let reply = self.act_rx.recv().map_err(|_| PipeError::Closed)?;
        self.outstanding = false;
        if reply.actor_id != self.actor_id {
            return Err(PipeError::Misrouted { expected: self.actor_id, got: reply.actor_id });
        }
        Ok(reply)
    }

    /// Round trip: send, then block for the reply.
    pub fn request(&mut self, req: ObsRequest) -> Result<ActionReply, PipeError> {
        self.send_obs(req)?;
        self.recv_action()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Poll {
    /// Pending requests ordered by actor id, possibly empty after a timeout.
    Batch(Vec<ObsRequest>),
    /// Every actor has closed its pipe and all requests were drained.
    AllClosed,
}

/// All pipes a worker serves.
#[derive(Debug)]
pub struct PipeSet {
    ends: Vec<WorkerEnd>,
    open: Vec<bool>,
}

impl PipeSet {
    pub fn new(mut ends: Vec<WorkerEnd>) -> Self {
        ends.sort_by_key(|e| e.actor_id);
        let open = vec![true; ends.len()];
        Self { ends, open }
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn actor_ids(&self) -> Vec<u32> {
        self.ends.iter().map(|e| e.actor_id).collect()
    }

    /// Position of `actor_id` in actor-id order.
    pub fn slot_of(&self, actor_id: u32) -> Option<usize> {
        self.ends.binary_search_by_key(&actor_id, |e| e.actor_id).ok()
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    fn drain_ready(&mut self, batch: &mut Vec<ObsRequest>) {
        for (end, open) in self.ends.iter().zip(self.open.iter_mut()) {
            if !*open {
                continue;
            }
            match end.obs_rx.try_recv() {
                Ok(req) => batch.push(req),
                Err(TryRecvError::Empty) => {}
                Err(TryRecvError::Disconnected) => *open = false,
            }
        }
    }

    /// Collects every pending request, waiting at most `timeout` for the
    /// first one.
    pub fn poll(&mut self, timeout: Duration) -> Poll {
        let mut batch = Vec::new();
        self.drain_ready(&mut batch);
        if !batch.is_empty() {
            return Poll::Batch(batch);
        }
        if self.open_count() == 0 {
            return Poll::AllClosed;
        }
        let ready = {
            let mut sel = Select::new();
            for (end, _) in self.ends.iter().zip(&self.open).filter(|(_, o)| **o) {
                sel.recv(&end.obs_rx);
            }
            sel.ready_timeout(timeout).is_ok()
        };
        if ready {
            self.drain_ready(&mut batch);
            if batch.is_empty() && self.open_count() == 0 {
                return Poll::AllClosed;
            }
        }
        Poll::Batch(batch)
    }

    pub fn reply(&self, reply: ActionReply) -> Result<(), PipeError> {
        let slot = self.slot_of(reply.actor_id).ok_or(PipeError::UnknownActor(reply.actor_id))?;
        self.ends[slot].act_tx.send(reply).map_err(|_| PipeError::Closed)
    }

    /// Drops the worker side of one actor's pipe.
    pub fn close_actor(&mut self, actor_id: u32) {
        if let Some(slot) = self.slot_of(actor_id) {
            let (obs_tx, obs_rx) = bounded(1);
            let (act_tx, _) = bounded(1);
            drop(obs_tx);
            self.ends[slot].obs_rx = obs_rx;
            self.ends[slot].act_tx = act_tx;
            self.open[slot] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    fn req(actor_id: u32, t: u32) -> ObsRequest {
        ObsRequest {
            actor_id,
            env_time_step: t,
            per_agent_obs: vec![vec![t as f64]],
            avail_actions: vec![vec![true, true]],
            episode_done: false,
        }
    }

    #[test]
    fn echo_pairing() {
        let (mut actor, worker) = obs_act_pipe(7, 2);
        let mut set = PipeSet::new(vec![worker]);
        actor.send_obs(req(7, 0)).unwrap();
        let Poll::Batch(batch) = set.poll(Duration::from_millis(100)) else { panic!() };
        assert_eq!(batch.len(), 1);
        set.reply(ActionReply { actor_id: batch[0].actor_id, joint_action: vec![0] }).unwrap();
        assert_eq!(actor.recv_action().unwrap(), ActionReply { actor_id: 7, joint_action: vec![0] });
    }

    #[test]
    fn alternation_enforced() {
        let (mut actor, _worker) = obs_act_pipe(0, 2);
        assert!(matches!(actor.recv_action(), Err(PipeError::ProtocolViolation(_))));
        actor.send_obs(req(0, 0)).unwrap();
        assert!(matches!(actor.send_obs(req(0, 1)), Err(PipeError::ProtocolViolation(_))));
        assert!(matches!(actor.send_obs(req(3, 1)), Err(PipeError::ProtocolViolation(_))));
    }

    #[test]
    fn recv_on_closed_pipe() {
        let (mut actor, worker) = obs_act_pipe(1, 2);
        actor.send_obs(req(1, 0)).unwrap();
        drop(worker);
        assert_eq!(actor.recv_action(), Err(PipeError::Closed));
        let (mut actor, worker) = obs_act_pipe(1, 2);
        drop(worker);
        assert_eq!(actor.send_obs(req(1, 0)), Err(PipeError::Closed));
    }

    #[test]
    fn poll_empty_times_out() {
        let (_actor, worker) = obs_act_pipe(0, 2);
        let mut set = PipeSet::new(vec![worker]);
        assert_eq!(set.poll(Duration::from_millis(5)), Poll::Batch(vec![]));
    }

    #[test]
    fn poll_orders_by_actor_id() {
        let mut actors = Vec::new();
        let mut ends = Vec::new();
        for id in [2u32, 0, 1] {
            let (a, w) = obs_act_pipe(id, 2);
            actors.push(a);
            ends.push(w);
        }
        let mut set = PipeSet::new(ends);
        for a in actors.iter_mut().rev() {
            let id = a.actor_id();
            a.send_obs(req(id, 0)).unwrap();
        }
        let Poll::Batch(batch) = set.poll(Duration::from_millis(10)) else { panic!() };
        assert_eq!(batch.iter().map(|r| r.actor_id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn all_closed_after_drain() {
        let (mut a0, w0) = obs_act_pipe(0, 2);
        let (a1, w1) = obs_act_pipe(1, 2);
        let mut set = PipeSet::new(vec![w0, w1]);
        a0.send_obs(req(0, 3)).unwrap();
        drop(a0);
        drop(a1);
        // pending request is still delivered
        let Poll::Batch(batch) = set.poll(Duration::from_millis(10)) else { panic!() };
        assert_eq!(batch.len(), 1);
        assert_eq!(set.poll(Duration::from_millis(10)), Poll::AllClosed);
        assert_eq!(set.poll(Duration::from_millis(10)), Poll::AllClosed);
    }

    #[test]
    fn stress_round_trips_no_misrouting() {
        const ACTORS: u32 = 4;
        const ROUNDS: u32 = 2_500;
        let mut ends = Vec::new();
        let mut handles = Vec::new();
        for id in 0..ACTORS {
            let (mut a, w) = obs_act_pipe(id, 2);
            ends.push(w);
            handles.push(thread::spawn(move || {
                for seq in 0..ROUNDS {
                    let reply = a.request(req(id, seq)).unwrap();
                    assert_eq!(reply.actor_id, id);
                    assert_eq!(reply.joint_action, vec![seq as usize]);
                }
            }));
        }
        let mut set = PipeSet::new(ends);
        let mut seen = vec![0u32; ACTORS as usize];
        loop {
            match set.poll(Duration::from_millis(50)) {
                Poll::AllClosed => break,
                Poll::Batch(batch) => {
                    for r in batch {
                        assert_eq!(r.env_time_step, seen[r.actor_id as usize]);
                        seen[r.actor_id as usize] += 1;
                        set.reply(ActionReply { actor_id: r.actor_id, joint_action: vec![r.env_time_step as usize] }).unwrap();
                    }
                }
            }
        }
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(seen, vec![ROUNDS; ACTORS as usize]);
    }
}
