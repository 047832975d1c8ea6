//! Contrastive analysis of a target network against a background network.
//!
//! Node features are learned on the target as a base measure followed by
//! neighbor summaries ([`features`]), evaluated on both networks, and
//! projected with contrastive PCA ([`cpca`]) onto the two directions along
//! which the target varies most relative to the background. A [`session`]
//! keeps the result and supports changing the contrast parameter, rotating
//! the axes and inspecting features.
//!
//! ```
//! use std::sync::Arc;
//!
//! use netcontrast::datasets::{karate, RANDOM1};
//! use netcontrast::session::{run_pipeline, CancelToken, PipelineConfig};
//!
//! let config = PipelineConfig { compute_layouts: false, ..PipelineConfig::default() };
//! let mut session = run_pipeline(
//!     "example",
//!     Arc::new(karate()),
//!     Arc::new(RANDOM1.generate()?),
//!     config,
//!     |_| {},
//!     &CancelToken::new(),
//! )?;
//! assert!(session.contrast_ratio() > 1.0);
//! session.update_alpha(0.0)?;
//! assert_eq!(session.model().alpha, 0.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The guide in `book/` covers each stage; its code blocks run as doc-tests
//! of this crate.

pub mod centrality;
pub mod cpca;
pub mod datasets;
pub mod features;
pub mod generators;
pub mod graph;
pub mod layout;
pub mod session;

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    pub mod graphs {}
    #[doc = include_str!("../../../book/src/centrality.md")]
    pub mod centrality {}
    #[doc = include_str!("../../../book/src/features.md")]
    pub mod features {}
    #[doc = include_str!("../../../book/src/cpca.md")]
    pub mod cpca {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    pub mod sessions {}
    #[doc = include_str!("../../../book/src/layout.md")]
    pub mod layout {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    pub mod datasets {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/service.md")]
    pub mod service {}
}
