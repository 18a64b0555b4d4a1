//! Gym-style wrapper: world stepping plus camera, encoder and feature history.

use crate::error::Result;
use crate::seeding::{rng_for, stream, Rng};
use crate::sim::observation::{build_observations, Observations, FEATURE_DIM};
use crate::sim::world::{StepOutcome, World, WorldState};
use crate::vision::{render, FeatureHistory, RenderConfig, VisionEncoder};

/// Camera style and encoder shared by every environment instance.
#[derive(Debug, Clone)]
pub struct Perception {
    pub style: RenderConfig,
    /// `None` gives a blind agent whose features are all zero.
    pub encoder: Option<VisionEncoder>,
}

impl Perception {
    pub fn new(encoder: Option<VisionEncoder>) -> Self {
        Self {
            style: RenderConfig::default(),
            encoder,
        }
    }

    pub fn features(&self, world: &World, state: &WorldState, rng: &mut Rng) -> Result<Vec<f64>> {
        match &self.encoder {
            Some(enc) => enc.encode(&render(&world.config, &self.style, state, rng)),
            None => Ok(vec![0.0; FEATURE_DIM]),
        }
    }
}

/// One environment instance with its own episode and render streams.
#[derive(Debug, Clone)]
pub struct Env {
    pub state: WorldState,
    pub history: FeatureHistory,
    env_rng: Rng,
    render_rng: Rng,
    pub episodes: u64,
}

impl Env {
    /// Streams derive from `(seed, index)`, so instance `k` of a batch is
    /// reproducible on its own.
    pub fn new(world: &World, perception: &Perception, seed: u64, index: u64) -> Result<Self> {
        let mut env_rng = rng_for(seed, &[stream::ENV, index]);
        let mut render_rng = rng_for(seed, &[stream::RENDER, index]);
        let state = world.reset(&mut env_rng)?;
        let f = perception.features(world, &state, &mut render_rng)?;
        Ok(Self {
            state,
            history: FeatureHistory::filled(&f),
            env_rng,
            render_rng,
            episodes: 1,
        })
    }

    pub fn reset(&mut self, world: &World, perception: &Perception) -> Result<Observations> {
        self.state = world.reset(&mut self.env_rng)?;
        let f = perception.features(world, &self.state, &mut self.render_rng)?;
        self.history = FeatureHistory::filled(&f);
        self.episodes += 1;
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observations {
        build_observations(&self.state, &self.history.flatten())
    }

    /// Steps the world and refreshes the feature history. Observations are
    /// of the post-step state, even on termination.
    pub fn step(
        &mut self,
        world: &World,
        perception: &Perception,
        throw_action: &[f64],
        catch_action: &[f64],
    ) -> Result<(StepOutcome, Observations)> {
        let outcome = world.step(&mut self.state, throw_action, catch_action)?;
        let f = perception.features(world, &self.state, &mut self.render_rng)?;
        self.history.push(&f);
        Ok((outcome, self.observe()))
    }
}
