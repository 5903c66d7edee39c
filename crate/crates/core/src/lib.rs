//! Iterated language learning simulations with neural agents.
//!
//! Languages map binary meanings to binary signals. Agents learn a language
//! from a tutor's sample, become tutors, and the resulting languages are
//! scored for expressivity, compositionality and stability.

pub mod agents;
pub mod engine;
pub mod error;
pub mod io;
pub mod lang;
pub mod metrics;
pub mod neural;

pub use agents::{
    make_auto_set, make_bottleneck, obvert, Agent, AgentKind, AilmAgent, AutoDirection, AutoMode,
    AutoSet, BottleneckSet, Encode, OilmAgent, OneWayAgent, TrainLog, OBVERSION_CAP,
};
pub use engine::{
    baseline_for, derive_seed, linear_fit, mean_corrected_of, run_experiment, run_experiment_with,
    run_replicate, run_until_egood, sweep_bottleneck, AutoScaling, BestBottleneck, EpochLosses,
    ExperimentConfig, ExperimentOutput, GenerationRecord, LinearFit, ReplicateOutcome, SweepPoint,
    SweepResult, UntilOutcome,
};
pub use error::{Error, Result};
pub use lang::{decide, enumerate_space, BitVector, LanguageTable, ProbVector};
pub use metrics::{
    agreement, bias_correct, compositionality, estimate_baseline, expressivity, stability,
    BaselineEstimate, MetricTriple,
};
pub use neural::{Loss, Mlp, TrainConfig};
