//! Activity-thresholded social graph analytics.
//!
//! The pipeline reads a tweet corpus and a follower list, counts relevant
//! tweets per user, builds the follower subgraph of users above an activity
//! threshold, measures it, fits heavy-tailed models to activity and degree
//! data and regresses activity on network position.

pub mod graph;
pub mod heavytail;
pub mod ingest;
pub mod metrics;
pub mod numeric;
pub mod par;
pub mod regress;
pub mod synth;
