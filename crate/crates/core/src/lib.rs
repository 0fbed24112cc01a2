//! Distributed cooperative multi-agent Q-learning: environments, the
//! recurrent value-decomposition network, and the actor / worker / learner
//! runtime that ties them together through pipes, a sample queue and a shared
//! parameter pool.

pub mod checks;
pub mod envsim;
pub mod episode;
pub mod hiddenstore;
pub mod nets;
pub mod paramstore;
pub mod par;
pub mod pipes;
pub mod replay;
pub mod runtime;
