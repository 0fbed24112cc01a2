use super::{check_joint_action, EnvError, EnvSpec, MultiAgentEnv, StepResult};

/// Upper bound on `n_actions ^ n_agents` for exhaustive enumeration.
pub const MAX_ENUMERATION: usize = 1_000_000;

/// A cooperative game repeated `n_steps` times per episode.
///
/// `payoff` is stored row-major with agent 0 as the most significant axis, so
/// for two agents `payoff[i * n_actions + j]` is the reward of joint action
/// `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoopMatrixGameSpec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub payoff: Vec<f64>,
    pub n_steps: usize,
}

impl CoopMatrixGameSpec {
    pub fn new(
        n_agents: usize,
        n_actions: usize,
        payoff: Vec<f64>,
        n_steps: usize,
    ) -> Result<Self, EnvError> {
        let spec = Self {
            n_agents,
            n_actions,
            payoff,
            n_steps,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Two-agent game from a square payoff table.
    pub fn two_player(table: &[Vec<f64>], n_steps: usize) -> Result<Self, EnvError> {
        let n_actions = table.len();
        if table.iter().any(|row| row.len() != n_actions) {
            return Err(EnvError::InvalidSpec("payoff table must be square".into()));
        }
        Self::new(2, n_actions, table.concat(), n_steps)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.env_spec().validate()?;
        let expected = (self.n_actions as f64).powi(self.n_agents as i32);
        if expected != self.payoff.len() as f64 {
            return Err(EnvError::InvalidSpec(format!(
                "payoff has {} entries, expected n_actions^n_agents = {expected}",
                self.payoff.len()
            )));
        }
        if self.payoff.iter().any(|p| !p.is_finite()) {
            return Err(EnvError::InvalidSpec("payoff must be finite".into()));
        }
        Ok(())
    }

    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec::new(self.n_agents, self.n_actions, 1, 1, self.n_steps)
    }

    pub fn flat_index(&self, joint_action: &[usize]) -> usize {
        joint_action
            .iter()
            .fold(0, |acc, &a| acc * self.n_actions + a)
    }

    pub fn payoff_at(&self, joint_action: &[usize]) -> f64 {
        self.payoff[self.flat_index(joint_action)]
    }

    pub fn mean_payoff(&self) -> f64 {
        self.payoff.iter().sum::<f64>() / self.payoff.len() as f64
    }
}

/// Returns `n_steps * max(payoff)` by enumerating every joint action.
pub fn optimal_joint_return(game: &CoopMatrixGameSpec) -> Result<f64, EnvError> {
    let size = (game.n_actions as f64).powi(game.n_agents as i32);
    if size > MAX_ENUMERATION as f64 {
        return Err(EnvError::TooLargeToEnumerate { size });
    }
    let mut joint = vec![0usize; game.n_agents];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(game.payoff_at(&joint));
        // odometer increment, last agent fastest
        let mut k = game.n_agents;
        loop {
            if k == 0 {
                return Ok(best * game.n_steps as f64);
            }
            k -= 1;
            joint[k] += 1;
            if joint[k] < game.n_actions {
                break;
            }
            joint[k] = 0;
        }
    }
}

/// Repeated cooperative matrix game. Observations and state carry only the
/// normalised time step; every action is always available.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    game: CoopMatrixGameSpec,
    spec: EnvSpec,
    t: usize,
    done: bool,
    optimum: Option<f64>,
}

impl MatrixGame {
    pub fn new(game: CoopMatrixGameSpec) -> Result<Self, EnvError> {
        game.validate()?;
        let optimum = optimal_joint_return(&game).ok();
        Ok(Self {
            spec: game.env_spec(),
            game,
            t: 0,
            done: true,
            optimum,
        })
    }

    pub fn game(&self) -> &CoopMatrixGameSpec {
        &self.game
    }

    fn observe(&self, reward: f64) -> StepResult {
        let phase = self.t as f64 / self.game.n_steps as f64;
        StepResult {
            per_agent_obs: vec![vec![phase]; self.spec.n_agents],
            global_state: vec![phase],
            reward,
            done: self.done,
            terminated: self.done,
            avail_actions: vec![vec![true; self.spec.n_actions]; self.spec.n_agents],
        }
    }
}

impl MultiAgentEnv for MatrixGame {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> StepResult {
        self.t = 0;
        self.done = false;
        self.observe(0.0)
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let avail = vec![vec![true; self.spec.n_actions]; self.spec.n_agents];
        check_joint_action(&self.spec, &avail, joint_action)?;
        let reward = self.game.payoff_at(joint_action);
        self.t += 1;
        self.done = self.t >= self.game.n_steps;
        Ok(self.observe(reward))
    }

    fn optimal_return(&self) -> Option<f64> {
        self.optimum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn game_2x2() -> CoopMatrixGameSpec {
        CoopMatrixGameSpec::two_player(&[vec![1.0, 0.0], vec![0.0, 2.0]], 1).unwrap()
    }

    #[test]
    fn reset_shapes() {
        let game = CoopMatrixGameSpec::new(2, 3, vec![0.0; 9], 4).unwrap();
        let mut env = MatrixGame::new(game).unwrap();
        let r = env.reset();
        assert_eq!(r.per_agent_obs.len(), 2);
        assert!(r.per_agent_obs.iter().all(|o| o.len() == env.spec().obs_dim));
        assert!(!r.done);
        assert!(r.conforms_to(env.spec()));
    }

    #[test]
    fn reward_is_table_lookup() {
        let table = vec![vec![1.0, -2.0, 3.0], vec![4.0, 5.0, -6.0], vec![7.0, 8.0, 9.5]];
        let game = CoopMatrixGameSpec::two_player(&table, 9).unwrap();
        let mut env = MatrixGame::new(game).unwrap();
        env.reset();
        for i in 0..3 {
            for j in 0..3 {
                let r = env.step(&[i, j]).unwrap();
                assert_eq!(r.reward, table[i][j]);
            }
        }
    }

    #[test]
    fn done_exactly_on_last_step() {
        let game = CoopMatrixGameSpec::new(2, 2, vec![0.0; 4], 5).unwrap();
        let mut env = MatrixGame::new(game).unwrap();
        env.reset();
        for step in 1..=5 {
            let r = env.step(&[0, 1]).unwrap();
            assert_eq!(r.done, step == 5, "step {step}");
        }
        assert_eq!(env.step(&[0, 0]), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn step_before_reset_is_rejected() {
        let mut env = MatrixGame::new(game_2x2()).unwrap();
        assert_eq!(env.step(&[0, 0]), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn bad_actions() {
        let mut env = MatrixGame::new(game_2x2()).unwrap();
        env.reset();
        assert!(matches!(env.step(&[0]), Err(EnvError::WrongActionCount { .. })));
        assert!(matches!(env.step(&[0, 2]), Err(EnvError::ActionOutOfRange { agent: 1, action: 2 })));
    }

    #[test]
    fn invalid_payoffs() {
        assert!(CoopMatrixGameSpec::new(2, 2, vec![0.0; 3], 1).is_err());
        assert!(CoopMatrixGameSpec::new(2, 2, vec![0.0, f64::NAN, 0.0, 0.0], 1).is_err());
        assert!(CoopMatrixGameSpec::two_player(&[vec![1.0, 2.0], vec![1.0]], 1).is_err());
    }

    #[test]
    fn optimum_zero_payoff() {
        let game = CoopMatrixGameSpec::new(3, 2, vec![0.0; 8], 3).unwrap();
        assert_eq!(optimal_joint_return(&game).unwrap(), 0.0);
    }

    #[test]
    fn optimum_two_by_two() {
        // brute force over the 4 joint actions: max(1, 0, 0, 2) = 2
        assert_eq!(optimal_joint_return(&game_2x2()).unwrap(), 2.0);
    }

    #[test]
    fn optimum_three_agents_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let payoff: Vec<f64> = (0..27).map(|_| rng.random_range(-5.0..5.0)).collect();
        let game = CoopMatrixGameSpec::new(3, 3, payoff.clone(), 4).unwrap();
        let mut best = f64::NEG_INFINITY;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    best = best.max(payoff[a * 9 + b * 3 + c]);
                }
            }
        }
        assert_eq!(optimal_joint_return(&game).unwrap(), 4.0 * best);
    }

    #[test]
    fn optimum_too_large() {
        let game = CoopMatrixGameSpec {
            n_agents: 7,
            n_actions: 8,
            payoff: vec![],
            n_steps: 1,
        };
        assert!(matches!(
            optimal_joint_return(&game),
            Err(EnvError::TooLargeToEnumerate { .. })
        ));
    }

    #[test]
    fn episode_return_matches_action_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let payoff: Vec<f64> = (0..27).map(|_| rng.random_range(-1.0..1.0)).collect();
        let game = CoopMatrixGameSpec::new(3, 3, payoff, 6).unwrap();
        let mut env = MatrixGame::new(game.clone()).unwrap();
        for _ in 0..20 {
            env.reset();
            let mut log = Vec::new();
            let mut ret = 0.0;
            loop {
                let joint: Vec<usize> = (0..3).map(|_| rng.random_range(0..3)).collect();
                let r = env.step(&joint).unwrap();
                ret += r.reward;
                log.push(joint);
                if r.done {
                    break;
                }
            }
            let recomputed: f64 = log
                .iter()
                .map(|j| game.payoff[j[0] * 9 + j[1] * 3 + j[2]])
                .sum();
            assert_eq!(ret, recomputed);
        }
    }
}
