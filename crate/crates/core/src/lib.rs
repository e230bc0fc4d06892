//! Exact operator inference for polynomial reduced-order models.
//!
//! Given black-box access to a polynomial full-order model `ẋ = Σ_i A_i x^i + B u`
//! and a POD basis `V`, [`exact_opinf`] recovers the intrusive Galerkin operators
//! `V^T A_i (V ⊗ … ⊗ V)` and `V^T B` from a square set of single-step snapshots,
//! without touching the model's matrices.

pub mod benchmarks;
pub mod diagnostics;
pub mod error;
pub mod exact_opinf;
pub mod experiment;
pub mod fom;
pub mod galerkin;
pub mod gappy_interp;
pub mod io;
pub mod linalg;
pub mod pod;
pub mod tensor_poly;

pub use error::{Error, Result};
pub use exact_opinf::{
    estimate_dt, exact_opinf, extend_ensemble, generate_ensemble, infer, rank_ensuring_pairs, rank_ensuring_states,
    solve_ensemble, standard_opinf, Inference, Provenance, RankEnsuringPair, SnapshotEnsemble, StandardInference, TrajectoryData,
};
pub use fom::{
    eval_rhs, explicit_euler_step, homogeneous_part, implicit_euler_step, polarize, simulate, simulate_with, DenseFom,
    FnFom, InputSignal, NewtonOptions, PolynomialFom, Scheme, SnapshotMatrix,
};
pub use galerkin::{reduce, rom_rhs, rom_simulate, AggregatedOperator, ReducedModel};
pub use pod::{pod_basis, PodBasis};
pub use tensor_poly::{
    compress_state, enumerate_monomials, kron_expand, monomial_count, DegreeSet, MonomialBasis, MonomialTuple,
    SelectionMaps,
};
