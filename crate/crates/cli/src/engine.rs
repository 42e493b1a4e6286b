//! The stream driver: chunked ingestion, per-chunk diagnostics against the
//! previous accumulation point, state updates, separation-triggered chunk
//! merging, and snapshot persistence.

use std::path::Path;
use std::sync::mpsc;
use std::thread;

use streamstat_core::diag::{
    asymptotic_f_test, gamma_whiten, normal_f_test, outlier_t_test, predictive_residuals,
    DiagnosticReport, ObservationDiagnostic, SubgroupScheme,
};
use streamstat_core::ee::{irls_solve, CeeState, CueeState, EeFamily, IrlsConfig, SubsetFit};
use streamstat_core::lm::{summarize_chunk_with, LmState};
use streamstat_core::numkern::default_rank_tol;

use crate::config::{ModelConfig, ModelKind};
use crate::csvio::{merge_chunks, Chunk, ChunkReader};
use crate::error::CliError;
use crate::snapshot::{EngineSnapshot, StreamSnapshot};

/// Worker-count cap from the environment; `None` means unset.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("STREAMSTAT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
}

enum ChunkSource {
    Inline(ChunkReader),
    /// Reader thread piping chunks through a bounded queue so parsing can run
    /// ahead of computation without unbounded buffering.
    Piped {
        rx: mpsc::Receiver<Result<Option<Chunk>, CliError>>,
        _worker: thread::JoinHandle<()>,
    },
}

impl ChunkSource {
    fn start(reader: ChunkReader, threads: Option<usize>) -> ChunkSource {
        if threads == Some(1) {
            return ChunkSource::Inline(reader);
        }
        let (tx, rx) = mpsc::sync_channel(2);
        let mut reader = reader;
        let worker = thread::spawn(move || loop {
            let item = reader.next_chunk();
            let done = matches!(item, Ok(None) | Err(_));
            if tx.send(item).is_err() || done {
                break;
            }
        });
        ChunkSource::Piped {
            rx,
            _worker: worker,
        }
    }

    fn next(&mut self) -> Result<Option<Chunk>, CliError> {
        match self {
            ChunkSource::Inline(reader) => reader.next_chunk(),
            ChunkSource::Piped { rx, .. } => match rx.recv() {
                Ok(item) => item,
                Err(_) => Ok(None),
            },
        }
    }
}

enum Engine {
    Lm {
        state: LmState,
        ridge_pending: bool,
    },
    Cee {
        state: CeeState,
        family: EeFamily,
        irls: IrlsConfig,
    },
    Cuee {
        state: CueeState,
        family: EeFamily,
        irls: IrlsConfig,
    },
}

impl Engine {
    fn fresh(config: &ModelConfig) -> Result<Engine, CliError> {
        let p = config.p();
        Ok(match config.kind {
            ModelKind::Lm => match config.ridge_lambda {
                Some(lambda) => Engine::Lm {
                    state: LmState::init_ridge(p, lambda)?,
                    ridge_pending: true,
                },
                None => Engine::Lm {
                    state: LmState::new(p),
                    ridge_pending: false,
                },
            },
            ModelKind::Cee => {
                let family = config.resolve_family()?;
                let irls = config.irls_config(&family);
                Engine::Cee {
                    state: CeeState::new(p, irls.variance),
                    family,
                    irls,
                }
            }
            ModelKind::Cuee => {
                let family = config.resolve_family()?;
                let irls = config.irls_config(&family);
                Engine::Cuee {
                    state: CueeState::new(p, irls.variance),
                    family,
                    irls,
                }
            }
        })
    }

    fn from_snapshot(snapshot: &StreamSnapshot, config: &ModelConfig) -> Result<Engine, CliError> {
        match (&snapshot.engine, config.kind) {
            (EngineSnapshot::Lm { state }, ModelKind::Lm) => Ok(Engine::Lm {
                state: state.clone(),
                ridge_pending: state.ridge().map(|r| r.active).unwrap_or(false),
            }),
            (EngineSnapshot::Cee { state }, ModelKind::Cee) => {
                let family = config.resolve_family()?;
                let irls = config.irls_config(&family);
                Ok(Engine::Cee {
                    state: state.clone(),
                    family,
                    irls,
                })
            }
            (EngineSnapshot::Cuee { state }, ModelKind::Cuee) => {
                let family = config.resolve_family()?;
                let irls = config.irls_config(&family);
                Ok(Engine::Cuee {
                    state: state.clone(),
                    family,
                    irls,
                })
            }
            _ => Err(CliError::Schema(
                "snapshot engine kind does not match the model config".into(),
            )),
        }
    }

    fn to_snapshot(&self) -> EngineSnapshot {
        match self {
            Engine::Lm { state, .. } => EngineSnapshot::Lm {
                state: state.clone(),
            },
            Engine::Cee { state, .. } => EngineSnapshot::Cee {
                state: state.clone(),
            },
            Engine::Cuee { state, .. } => EngineSnapshot::Cuee {
                state: state.clone(),
            },
        }
    }

    fn is_singular(&self) -> bool {
        match self {
            Engine::Lm { state, .. } => state.is_deferred(),
            Engine::Cee { state, .. } => state.is_deferred(),
            Engine::Cuee { state, .. } => !state.cumulative_full_rank() && state.chunks_seen() > 0,
        }
    }
}

pub struct StreamOutcome {
    pub snapshot: StreamSnapshot,
    /// Per-chunk diagnostic reports produced during this run.
    pub diagnostics: Vec<DiagnosticReport>,
    /// True when input ended mid-merge with separation unresolved.
    pub unresolved_separation: bool,
}

/// Diagnostics for one incoming chunk evaluated against the previous state.
fn lm_diagnostics(
    config: &ModelConfig,
    state: &LmState,
    chunk: &Chunk,
    chunk_index: usize,
) -> Result<Option<DiagnosticReport>, CliError> {
    let d = &config.diagnostics;
    if !(d.t_test || d.normal_f || d.asymptotic_f) {
        return Ok(None);
    }
    // diagnostics need an invertible history with enough observations
    if state.is_deferred() || state.n_total() <= state.p() {
        return Ok(None);
    }
    let pr = predictive_residuals(state, &chunk.x, &chunk.y)?;
    let observations = if d.t_test {
        let decisions = outlier_t_test(&pr, state, d.fdr_alpha)?;
        pr.e_check
            .iter()
            .zip(&pr.t_check)
            .zip(decisions)
            .enumerate()
            .map(|(index, ((e, t), dec))| ObservationDiagnostic {
                index,
                e_check: *e,
                t_check: *t,
                p_raw: dec.p_raw,
                p_adj: dec.p_adj,
                flagged: dec.flagged,
            })
            .collect()
    } else {
        Vec::new()
    };
    let normal_f = if d.normal_f {
        Some(normal_f_test(&pr, state, &chunk.x)?)
    } else {
        None
    };
    let asymptotic_f = if d.asymptotic_f && chunk.y.len() >= d.m {
        let e_star = gamma_whiten(state, &chunk.x, &pr.e_check)?;
        let scheme = SubgroupScheme::contiguous(chunk.y.len(), d.m)?;
        Some(asymptotic_f_test(&e_star, &scheme, state)?)
    } else {
        None
    };
    Ok(Some(DiagnosticReport {
        chunk_index,
        observations,
        normal_f,
        asymptotic_f,
    }))
}

fn solve_chunk(
    chunk: &Chunk,
    family: &EeFamily,
    irls: &IrlsConfig,
    warm: Option<Vec<f64>>,
    p: usize,
) -> Result<SubsetFit, CliError> {
    let init = match warm {
        Some(b) if irls.warm_start => b,
        _ => vec![0.0; p],
    };
    Ok(irls_solve(&chunk.x, &chunk.y, family, &init, irls)?)
}

/// Run the stream end to end (or until `max_chunks` accumulation points).
pub fn run_stream(
    config: &ModelConfig,
    input: &str,
    snapshot_path: Option<&Path>,
    max_chunks: Option<usize>,
    chunk_size_override: Option<usize>,
) -> Result<StreamOutcome, CliError> {
    let mut reader = ChunkReader::open(input, config)?;
    if let Some(size) = chunk_size_override {
        reader.set_chunk_size(size);
    }

    // resume when a compatible snapshot already exists
    let existing = match snapshot_path {
        Some(p) if p.exists() => Some(StreamSnapshot::load(p)?),
        _ => None,
    };
    let (mut engine, mut chunks_seen, mut rows_consumed, mut merges, mut last_diag) =
        match &existing {
            Some(snap) => {
                if snap.config_hash != config.hash() {
                    return Err(CliError::Schema(
                        "snapshot was produced by a different model config".into(),
                    ));
                }
                if snap.schema_fingerprint != config.schema_fingerprint() {
                    return Err(CliError::Schema(
                        "snapshot schema fingerprint does not match".into(),
                    ));
                }
                reader.skip_rows(snap.rows_consumed)?;
                (
                    Engine::from_snapshot(snap, config)?,
                    snap.chunks_seen,
                    snap.rows_consumed,
                    snap.separation_merges,
                    snap.last_diagnostics.clone(),
                )
            }
            None => (Engine::fresh(config)?, 0, 0, 0, None),
        };

    let p = config.p();
    let rank_tol = default_rank_tol(p);
    let mut source = ChunkSource::start(reader, threads_from_env());
    let mut diagnostics = Vec::new();
    let mut unresolved_separation = false;

    'stream: loop {
        if let Some(limit) = max_chunks {
            if chunks_seen >= limit {
                break;
            }
        }
        let Some(mut chunk) = source.next()? else {
            break;
        };

        match &mut engine {
            Engine::Lm {
                state,
                ridge_pending,
            } => {
                if let Some(report) = lm_diagnostics(config, state, &chunk, chunks_seen)? {
                    last_diag = Some(report.clone());
                    diagnostics.push(report);
                }
                let summary = summarize_chunk_with(&chunk.x, &chunk.y, rank_tol, config.ginv)?;
                if *ridge_pending {
                    match state.debias(&summary) {
                        Ok(()) => *ridge_pending = false,
                        Err(streamstat_core::Error::StillDeficient) => {
                            state.update(&summary)?;
                        }
                        Err(e) => return Err(e.into()),
                    }
                } else {
                    state.update(&summary)?;
                }
            }
            Engine::Cee {
                state,
                family,
                irls,
            } => {
                let warm = state.beta().map(|b| b.to_vec());
                let mut fit = solve_chunk(&chunk, family, irls, warm.clone(), p)?;
                while fit.separated && family.can_separate() {
                    match source.next()? {
                        Some(next) => {
                            chunk = merge_chunks(chunk, next);
                            merges += 1;
                            fit = solve_chunk(&chunk, family, irls, warm.clone(), p)?;
                        }
                        None => {
                            unresolved_separation = true;
                            break;
                        }
                    }
                }
                state.update(&fit, &chunk.x, &chunk.y, family)?;
            }
            Engine::Cuee {
                state,
                family,
                irls,
            } => {
                let warm = state.beta_tilde().map(|b| b.to_vec());
                let mut fit = solve_chunk(&chunk, family, irls, warm.clone(), p)?;
                while fit.separated && family.can_separate() {
                    match source.next()? {
                        Some(next) => {
                            chunk = merge_chunks(chunk, next);
                            merges += 1;
                            fit = solve_chunk(&chunk, family, irls, warm.clone(), p)?;
                        }
                        None => {
                            unresolved_separation = true;
                            break;
                        }
                    }
                }
                state.update_with_fit(fit, &chunk.x, &chunk.y, family, irls)?;
            }
        }

        chunks_seen += 1;
        rows_consumed += chunk.rows;

        if let Some(path) = snapshot_path {
            let snap = StreamSnapshot {
                config_hash: config.hash(),
                schema_fingerprint: config.schema_fingerprint(),
                chunks_seen,
                rows_consumed,
                singular: engine.is_singular(),
                separation_merges: merges,
                unresolved_separation,
                engine: engine.to_snapshot(),
                last_diagnostics: last_diag.clone(),
            };
            snap.save(path)?;
        }
        if unresolved_separation {
            break 'stream;
        }
    }

    let snapshot = StreamSnapshot {
        config_hash: config.hash(),
        schema_fingerprint: config.schema_fingerprint(),
        chunks_seen,
        rows_consumed,
        singular: engine.is_singular(),
        separation_merges: merges,
        unresolved_separation,
        engine: engine.to_snapshot(),
        last_diagnostics: last_diag,
    };
    if let Some(path) = snapshot_path {
        snapshot.save(path)?;
    }
    Ok(StreamOutcome {
        snapshot,
        diagnostics,
        unresolved_separation,
    })
}
