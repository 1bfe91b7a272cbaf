//! A stochastic language of knowledge and belief over finite models.
//!
//! Formulae compare real-valued processes and wrap them in knowledge, belief,
//! common knowledge and common belief operators. Their meaning is a
//! `[0,1]`-valued process computed from each agent's (possibly blurred)
//! information and subjective probability.

pub mod boolalg;
pub mod cli;
pub mod eval;
pub mod infostruct;
pub mod lang;
pub mod model;
pub mod prob;
