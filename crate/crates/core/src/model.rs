//! The full relation extractor: encoder, memory network and coupling head
//! over one shared parameter set, plus the vocabularies it was built with.

use rand::Rng;

use crate::corpus::{featurize, FeatureMatrix, InstanceBag, PairId, RelationSchema, Vocab};
use crate::coupling::{CouplingParams, CouplingVars};
use crate::encoder::{EncoderConfig, EncoderParams, EncoderVars, StaticEmbeddings};
use crate::error::{Error, Result};
use crate::memory::{
    memnet_forward, select_representatives, HeuristicAttention, MemoryConfig, MemoryOutput, MemoryParams,
    MemoryVars, RepresentativeSet,
};
use crate::numerics::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub memory: MemoryConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory.hops == 0 {
            return Err(Error::InvalidArgument("at least one hop is required".into()));
        }
        if self.encoder.output_dim() != self.memory.latent_dim {
            return Err(Error::InvalidArgument(format!(
                "encoder output {} must equal memory latent dimension {}",
                self.encoder.output_dim(),
                self.memory.latent_dim
            )));
        }
        if self.encoder.filter_widths.is_empty() || self.encoder.filter_widths.contains(&0) {
            return Err(Error::InvalidArgument("filter widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub memory: MemoryParams,
    pub coupling: CouplingParams,
}

impl ModelParams {
    /// Parameters in their fixed order, with stable names.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.encoder.named();
        out.extend(self.memory.named());
        out.extend(self.coupling.named());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.memory.tensors_mut());
        out.extend(self.coupling.tensors_mut());
        out
    }

    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        ModelVars {
            encoder: self.encoder.bind(tape),
            memory: self.memory.bind(tape),
            coupling: self.coupling.bind(tape),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }
}

#[derive(Clone, Debug)]
pub struct ModelVars {
    pub encoder: EncoderVars,
    pub memory: MemoryVars,
    pub coupling: CouplingVars,
}

impl ModelVars {
    /// Same order as [`ModelParams::named`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = self.encoder.all();
        out.extend(self.memory.all());
        out.extend(self.coupling.all());
        out
    }
}

/// Everything needed to score a bag.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub words: Vocab,
    pub pos_tags: Vocab,
    pub schema: RelationSchema,
    pub representatives: RepresentativeSet,
}

/// A bag featurized for this model, with its fixed heuristic distribution.
#[derive(Clone, Debug)]
pub struct PreparedBag<'a> {
    pub bag: &'a InstanceBag,
    pub features: Vec<FeatureMatrix>,
    pub initial_attention: Vec<f64>,
}

impl<'a> PreparedBag<'a> {
    pub fn pair_id(&self) -> &PairId {
        &self.bag.pair_id
    }
}

impl Model {
    /// Fresh model over a training corpus: vocabularies, representatives
    /// and randomly initialised parameters.
    pub fn init<R: Rng>(
        config: ModelConfig,
        train: &[InstanceBag],
        schema: RelationSchema,
        pretrained: Option<&StaticEmbeddings>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let words = Vocab::words(train);
        let pos_tags = Vocab::pos_tags(train);
        let representatives = select_representatives(train, &schema);
        let params = ModelParams {
            encoder: EncoderParams::init(&config.encoder, &words, &pos_tags, pretrained, rng),
            memory: MemoryParams::init(&config.memory, schema.len(), rng),
            coupling: CouplingParams::init(config.memory.latent_dim, rng),
        };
        Ok(Model {
            config,
            params,
            words,
            pos_tags,
            schema,
            representatives,
        })
    }

    pub fn heuristic(&self, embeddings: &StaticEmbeddings) -> HeuristicAttention {
        HeuristicAttention::new(&self.representatives, embeddings)
    }

    pub fn prepare<'a>(
        &self,
        bag: &'a InstanceBag,
        heuristic: &HeuristicAttention,
        embeddings: &StaticEmbeddings,
    ) -> Result<PreparedBag<'a>> {
        if bag.instances.is_empty() {
            return Err(Error::Empty("bag"));
        }
        if bag.instances.len() > self.config.memory.memory_capacity {
            return Err(Error::InvalidArgument(format!(
                "bag {} has {} instances, capacity is {}",
                bag.pair_id,
                bag.instances.len(),
                self.config.memory.memory_capacity
            )));
        }
        Ok(PreparedBag {
            bag,
            features: bag
                .instances
                .iter()
                .map(|i| featurize(i, &self.words, &self.pos_tags))
                .collect(),
            initial_attention: heuristic.distribution(bag, embeddings),
        })
    }

    /// Encodes every instance of `bags` in one stacked matrix; returns it with
    /// each bag's row range.
    pub fn encode_bags(&self, tape: &mut Tape, vars: &ModelVars, bags: &[&PreparedBag]) -> Result<(Var, Vec<Vec<usize>>)> {
        let features: Vec<&FeatureMatrix> = bags.iter().flat_map(|b| b.features.iter()).collect();
        let encodings = vars.encoder.encode(tape, &features)?;
        let mut ranges = Vec::with_capacity(bags.len());
        let mut offset = 0;
        for b in bags {
            ranges.push((offset..offset + b.features.len()).collect());
            offset += b.features.len();
        }
        Ok((encodings, ranges))
    }

    pub fn forward_rows(
        &self,
        tape: &mut Tape,
        vars: &ModelVars,
        encodings: Var,
        rows: &[usize],
        bag: &PreparedBag,
    ) -> Result<MemoryOutput> {
        let bag_rows = tape.gather_rows(encodings, rows)?;
        memnet_forward(tape, &vars.memory, bag_rows, &bag.initial_attention, &self.config.memory)
    }

    /// Relation probabilities (schema order) and per-hop attention for one bag.
    pub fn predict(&self, bag: &PreparedBag) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let (enc, ranges) = self.encode_bags(&mut tape, &vars, &[bag])?;
        let out = self.forward_rows(&mut tape, &vars, enc, &ranges[0], bag)?;
        Ok((tape.value(out.scores).data().to_vec(), out.attention))
    }
}
