//! Statistics over a corpus of dialogue logs: interaction features,
//! dialogue-act type distributions, questionnaire summaries, rank tests and
//! correlations, plus a plain-text report writer.

pub mod corpus;
pub mod describe;
pub mod mwu;
pub mod pearson;
pub mod report;

pub use report::{analyze, render, Analysis, Format, ReportOptions};

pub use corpus::{
    correlations, da_frequency, da_type_distribution, interaction_stats, survey_stats, AnalysisError, CorpusStats,
    DaTypeDistribution, DialogueRecord, SurveyStats,
};
pub use describe::{Sd, Summary};
pub use mwu::{mann_whitney_u, mann_whitney_u_with, Alternative, MwuError, MwuMethod, MwuResult};
pub use pearson::{pearson_r, point_biserial_r, CorrelationError};
