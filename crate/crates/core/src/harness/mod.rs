//! Experiments: configuration, receivers as state machines, Monte Carlo runs and CSV output.

pub mod config;
pub mod receiver;
pub mod records;
pub mod run;

pub use config::{AlgorithmKind, AlgorithmParams, AlgorithmSpec, ExperimentConfig, KEYS};
pub use receiver::Receiver;
pub use records::{emit_csv, read_csv, write_channel_stats, write_csv, ChannelStatRecord, MetricsRecord, CSV_HEADER};
pub use run::{
    channel_stats, fading_probes, moments_for, run_analysis_comparison, run_ber_curve, run_sinr_vs_fading,
    simulate_packet, PacketResult, SinrReference,
};
