//! Candidate selection with a switched loss, Student-t confidence bounds on
//! the expected deviation, and the held-out safety test.

mod bound;
mod candidate;
mod safety;

pub use bound::{delta_needed, predicted_bound, samples_needed, upper_bound, BoundParams};
pub use candidate::{
    candidate_loss, estimate_u_loss, initial_model, normalizer_for, select_candidate, Branch, Candidate,
    CandidateEval, CandidateLoss, SeldonianConfig,
};
pub use safety::{run_seldonian, safety_test, Feedback, GuidanceCheck, RunOutcome, Status, Suggestion};
