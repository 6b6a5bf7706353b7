use crate::error::{contract, Result};
use crate::model::{Dims, LearningRates};

/// Which parts of the method are switched on. All on is the full method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Components {
    /// Adversarial debiasing (T1, T2).
    pub adversarial: bool,
    /// Graph generation: generator and alignment steps plus the pool.
    pub generation: bool,
    /// Structure modification; when off the pool is the unmodified graph.
    pub modification: bool,
    /// Alignment (T5).
    pub alignment: bool,
}

impl Default for Components {
    fn default() -> Self {
        Self { adversarial: true, generation: true, modification: true, alignment: true }
    }
}

/// The full method and its four single-component ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoAdversarial,
    NoGeneration,
    NoModification,
    NoAlignment,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Self::NoAdversarial, Self::NoGeneration, Self::NoModification, Self::NoAlignment, Self::Full];

    pub fn label(self) -> &'static str {
        match self {
            Self::Full => "FatraGNN",
            Self::NoAdversarial => "w/o AD",
            Self::NoGeneration => "w/o GE",
            Self::NoModification => "w/o MD",
            Self::NoAlignment => "w/o AL",
        }
    }

    pub fn components(self) -> Components {
        let mut c = Components::default();
        match self {
            Self::Full => {}
            Self::NoAdversarial => c.adversarial = false,
            Self::NoGeneration => c.generation = false,
            Self::NoModification => c.modification = false,
            Self::NoAlignment => c.alignment = false,
        }
        c
    }
}

/// Schedule, optimiser and pool settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Discriminator steps per epoch.
    pub t1: usize,
    /// Encoder-vs-discriminator steps.
    pub t2: usize,
    /// Encoder + classifier steps.
    pub t3: usize,
    /// Generator steps.
    pub t4: usize,
    /// Alignment steps.
    pub t5: usize,
    pub lr: LearningRates,
    pub tau: f64,
    pub pool_size: usize,
    pub edit_ratio: f64,
    /// Epochs between pool-graph swaps.
    pub swap_period: usize,
    pub hidden: usize,
    pub embed: usize,
    pub classifier_hidden: usize,
    pub discriminator_hidden: usize,
    pub generator_hidden: usize,
    pub seed: u64,
    pub components: Components,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::bail()
    }
}

impl TrainConfig {
    /// Published Bail settings.
    pub fn bail() -> Self {
        Self {
            epochs: 400,
            t1: 5,
            t2: 5,
            t3: 12,
            t4: 8,
            t5: 5,
            lr: LearningRates { encoder: 0.005, discriminator: 0.001, classifier: 0.005, generator: 0.05 },
            tau: 1.0,
            pool_size: 40,
            edit_ratio: 0.5,
            swap_period: 10,
            hidden: 16,
            embed: 16,
            classifier_hidden: 16,
            discriminator_hidden: 16,
            generator_hidden: 16,
            seed: 0,
            components: Components::default(),
        }
    }

    /// Published Credit settings.
    pub fn credit() -> Self {
        Self {
            epochs: 600,
            t4: 5,
            t5: 2,
            lr: LearningRates { encoder: 0.005, discriminator: 0.001, classifier: 0.01, generator: 0.05 },
            ..Self::bail()
        }
    }

    /// Published Pokec settings.
    pub fn pokec() -> Self {
        Self {
            epochs: 400,
            t1: 2,
            t2: 5,
            t3: 10,
            t4: 2,
            t5: 5,
            lr: LearningRates { encoder: 0.01, discriminator: 0.001, classifier: 0.01, generator: 0.05 },
            ..Self::bail()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "bail" => Some(Self::bail()),
            "credit" => Some(Self::credit()),
            "pokec" => Some(Self::pokec()),
            _ => None,
        }
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        self.components = v.components();
        self
    }

    pub fn dims(&self, input: usize) -> Dims {
        Dims {
            input,
            hidden: self.hidden,
            embed: self.embed,
            classifier_hidden: self.classifier_hidden,
            discriminator_hidden: self.discriminator_hidden,
            generator_hidden: self.generator_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lrs = [self.lr.encoder, self.lr.discriminator, self.lr.classifier, self.lr.generator];
        if lrs.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(contract("learning rates must be positive"));
        }
        if !(0.0..=1.0).contains(&self.edit_ratio) {
            return Err(contract("edit ratio must lie in [0, 1]"));
        }
        if self.swap_period == 0 || self.pool_size == 0 {
            return Err(contract("swap period and pool size must be at least 1"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(contract("tau must be non-negative"));
        }
        if [self.hidden, self.embed, self.classifier_hidden, self.discriminator_hidden, self.generator_hidden].contains(&0) {
            return Err(contract("layer widths must be positive"));
        }
        Ok(())
    }

    /// Optimiser step groups executed per epoch under the enabled components.
    pub fn steps_per_epoch(&self) -> usize {
        let c = self.components;
        let adv = if c.adversarial { self.t1 + self.t2 } else { 0 };
        let gen = if c.generation { self.t4 + if c.alignment { self.t5 } else { 0 } } else { 0 };
        adv + self.t3 + gen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let b = TrainConfig::bail();
        assert_eq!((b.epochs, b.t1, b.t2, b.t3, b.t4, b.t5), (400, 5, 5, 12, 8, 5));
        assert_eq!(b.steps_per_epoch(), 35);
        let b = b.with_variant(Variant::NoAdversarial);
        assert_eq!(b.steps_per_epoch(), 25);
        let c = TrainConfig::credit();
        assert_eq!((c.epochs, c.t4, c.t5, c.lr.classifier), (600, 5, 2, 0.01));
        assert!(TrainConfig { swap_period: 0, ..TrainConfig::bail() }.validate().is_err());
    }
}
