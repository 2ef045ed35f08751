//! The real-or-generated guessing game over HTTP.
//!
//! `GET /api/challenge` serves a matrix drawn from the real or the fake
//! pool with probability 1/2 each, `POST /api/guess` records an answer in
//! an append-only log and reveals the truth, `GET /api/stats` folds the log
//! into accuracy figures.

pub mod api;
pub mod game;

pub use api::{load_game, router, serve, ServiceConfig, ServiceError, SharedGame};
pub use game::{ChallengePayload, Game, GameError, GuessOutcome, GuessRecord, Label, Stats};
