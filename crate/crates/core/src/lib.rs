//! Similarity analysis for bilateral weighted shift operators on `ℓ²(ℤ)`.
//!
//! A weight sequence `w = (w_k)` of nonzero complex numbers defines the shift
//! `S_w e_k = w_k e_{k+1}`. This crate decides whether `S_w` is similar to a
//! normal operator, and when it is, produces the two certificates that make the
//! answer checkable:
//!
//! * a positive scaling constant `c` such that `c·S_w` is similar to the
//!   unweighted shift `S`, and
//! * the diagonal conjugation `X = diag(d_k)` with `X (c·S_w) X⁻¹ = S`.
//!
//! The decision runs entirely on *window products*
//! `P(k, n) = ∏_{j=1..n} |w_{k+j}|`: similarity holds exactly when some `c`
//! keeps `cⁿ·P(k, n)` bounded above and below away from zero over all windows
//! ([`window`]). Everything else is built around that criterion: finite matrix
//! models that cross-check the exact answers numerically ([`finmodel`]), and
//! the orbit-stability dichotomy that similarity forces ([`stab`]).
//!
//! Supported sequence shapes are periodic, periodic with finitely many
//! overrides, two-sided periodic splices, and finite sample tables
//! ([`weights`]). The first three admit exact, witness-producing analysis; the
//! sampled kind is scanned up to a horizon and never certified.

pub mod finmodel;
pub mod similarity;
pub mod stab;
pub mod weights;
pub mod window;

pub use finmodel::{FiniteModel, Lemma1Report, ModelError, SzNagyReport};
pub use similarity::{
    build_similarity, decide_similarity, verify_similarity, DiagonalSimilarity, SimilarityError,
    SimilarityVerdict,
};
pub use stab::{dichotomy_check, stab_normal_diag, StabReport, StabVerdict};
pub use weights::{parse_sequence, SequenceError, SequenceKind, WeightSequence};
pub use window::{candidate_c, scaled_window_stats, CandidateC, EscapeWitness, WindowStats};
