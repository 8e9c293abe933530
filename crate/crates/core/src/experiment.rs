//! Sweeps over drops, antenna counts, users per cell, reuse factors and
//! schemes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::detectors::Scheme;
use crate::detequiv::{det_equiv_sinr, DetEquivOptions};
use crate::error::{Error, Result};
use crate::geometry::{build_layout, drop_users, CellLayout, UserDrop};
use crate::performance::{monte_carlo_se, McSettings, Scenario};
use crate::pilots::{allocate_pilots, channel_inversion_power};
use crate::rng::{substream, tag};

/// One (scheme, M, K, β, drop) result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users_per_cell: usize,
    pub beta: usize,
    pub drop: usize,
    /// Monte Carlo sum SE per cell; absent for deterministic-only rows and
    /// failures.
    pub sum_se: Option<f64>,
    pub sum_se_stderr: Option<f64>,
    /// Deterministic-equivalent sum SE per cell (M-MMSE only).
    pub detequiv_sum_se: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_cell_sum_se: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub version: String,
    pub timestamp: String,
}

impl Metadata {
    pub fn now(seed: u64) -> Self {
        Self {
            seed,
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
}

/// Drop-averaged view of the rows sharing (scheme, M, K, β).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub antennas: usize,
    pub users_per_cell: usize,
    pub beta: usize,
    pub drops: usize,
    pub sum_se: Option<f64>,
    /// `sqrt(Σ stderr²) / drops`.
    pub sum_se_stderr: Option<f64>,
    pub detequiv_sum_se: Option<f64>,
}

impl ResultTable {
    pub fn new(seed: u64) -> Self {
        Self {
            metadata: Metadata::now(seed),
            rows: Vec::new(),
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    /// Average over drops. Means are taken over the drops that succeeded.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(Scheme, usize, usize, usize)> = Vec::new();
        for r in &self.rows {
            let key = (r.scheme, r.antennas, r.users_per_cell, r.beta);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(scheme, antennas, users_per_cell, beta)| {
                let rows: Vec<&ResultRow> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        (r.scheme, r.antennas, r.users_per_cell, r.beta)
                            == (scheme, antennas, users_per_cell, beta)
                    })
                    .collect();
                let mc: Vec<(f64, f64)> = rows
                    .iter()
                    .filter_map(|r| Some((r.sum_se?, r.sum_se_stderr.unwrap_or(0.0))))
                    .collect();
                let de: Vec<f64> = rows.iter().filter_map(|r| r.detequiv_sum_se).collect();
                let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
                let n = mc.len() as f64;
                SummaryRow {
                    scheme,
                    antennas,
                    users_per_cell,
                    beta,
                    drops: rows.len(),
                    sum_se: mean(&mc.iter().map(|x| x.0).collect::<Vec<_>>()),
                    sum_se_stderr: (!mc.is_empty())
                        .then(|| mc.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt() / n),
                    detequiv_sum_se: mean(&de),
                }
            })
            .collect()
    }
}

/// Users and fading of drop `drop_id`; shared by every (M, β) of a sweep.
pub fn make_drop(cfg: &NetworkConfig, layout: &CellLayout, k: usize, drop_id: usize) -> Result<UserDrop> {
    let mut rng = substream(cfg.seed, &[tag::DROP, drop_id as u64, k as u64]);
    drop_users(layout, k, &cfg.propagation(), &mut rng)
}

/// Scenario of one sweep point.
pub fn make_scenario(
    cfg: &NetworkConfig,
    layout: &CellLayout,
    drop: Arc<UserDrop>,
    antennas: usize,
    beta: usize,
) -> Result<Scenario> {
    let alloc = allocate_pilots(layout, beta, drop.users_per_cell())?;
    let powers = channel_inversion_power(&drop, cfg.rho())?;
    Scenario::new(
        drop,
        alloc,
        powers,
        cfg.sigma2,
        antennas,
        cfg.coherence,
        cfg.single_cell_options(),
    )
}

/// Deterministic-equivalent sum SE per cell of a scenario.
pub fn detequiv_sum_se(cfg: &NetworkConfig, sc: &Scenario) -> Result<f64> {
    let rep = det_equiv_sinr(
        sc.drop(),
        sc.allocation(),
        sc.powers(),
        sc.estimator_state(),
        sc.detector_state(),
        sc.sigma2(),
        sc.antennas(),
        DetEquivOptions {
            same_pilot_error: cfg.detequiv_same_pilot_error,
            ..Default::default()
        },
    )?;
    rep.sum_se_per_cell(cfg.coherence, sc.allocation().num_pilots())
}

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn failure_row(scheme: Scheme, m: usize, k: usize, beta: usize, drop: usize, cfg: &NetworkConfig, e: &Error) -> ResultRow {
    ResultRow {
        scheme,
        antennas: m,
        users_per_cell: k,
        beta,
        drop,
        sum_se: None,
        sum_se_stderr: None,
        detequiv_sum_se: None,
        trials: 0,
        seed: cfg.seed,
        per_cell_sum_se: Vec::new(),
        error: Some(format!("{}: {e}", e.kind())),
    }
}

/// Monte Carlo for every sweep point and scheme, plus the deterministic
/// equivalent on M-MMSE rows. Per-point failures become rows with an error.
pub fn run_experiment(cfg: &NetworkConfig) -> Result<ResultTable> {
    sweep(cfg, true)
}

/// Deterministic equivalent only, no channel realizations.
pub fn run_detequiv(cfg: &NetworkConfig) -> Result<ResultTable> {
    sweep(cfg, false)
}

fn sweep(cfg: &NetworkConfig, monte_carlo: bool) -> Result<ResultTable> {
    cfg.validate()?;
    run_in_pool(cfg.threads, || sweep_inner(cfg, monte_carlo))?
}

fn sweep_inner(cfg: &NetworkConfig, monte_carlo: bool) -> Result<ResultTable> {
    let layout = build_layout(cfg.radius_m)?;
    let mut table = ResultTable::new(cfg.seed);
    for drop_id in 0..cfg.drops {
        for &k in &cfg.users_per_cell {
            let drop = Arc::new(make_drop(cfg, &layout, k, drop_id)?);
            for &m in &cfg.antennas {
                for &beta in &cfg.beta {
                    let point = || -> Result<Vec<ResultRow>> {
                        let sc = make_scenario(cfg, &layout, Arc::clone(&drop), m, beta)?;
                        let de = if cfg.schemes.contains(&Scheme::MultiCellMmse) {
                            Some(detequiv_sum_se(cfg, &sc))
                        } else {
                            None
                        };
                        point_rows(cfg, &sc, de, monte_carlo, drop_id)
                    };
                    match point() {
                        Ok(rows) => table.rows.extend(rows),
                        Err(e) => table.rows.extend(
                            cfg.schemes
                                .iter()
                                .map(|&s| failure_row(s, m, k, beta, drop_id, cfg, &e)),
                        ),
                    }
                }
            }
        }
    }
    Ok(table)
}

fn point_rows(
    cfg: &NetworkConfig,
    sc: &Scenario,
    de: Option<Result<f64>>,
    monte_carlo: bool,
    drop_id: usize,
) -> Result<Vec<ResultRow>> {
    let (m, k, beta) = (sc.antennas(), sc.drop().users_per_cell(), sc.allocation().beta());
    let base = |scheme: Scheme| ResultRow {
        scheme,
        antennas: m,
        users_per_cell: k,
        beta,
        drop: drop_id,
        sum_se: None,
        sum_se_stderr: None,
        detequiv_sum_se: None,
        trials: 0,
        seed: cfg.seed,
        per_cell_sum_se: Vec::new(),
        error: None,
    };
    let mut de_value = None;
    let mut de_error = None;
    match de {
        Some(Ok(v)) => de_value = Some(v),
        Some(Err(e)) => de_error = Some(format!("{}: {e}", e.kind())),
        None => {}
    }
    if !monte_carlo {
        let mut row = base(Scheme::MultiCellMmse);
        row.detequiv_sum_se = de_value;
        row.error = de_error;
        return Ok(vec![row]);
    }
    let settings = McSettings {
        trials: cfg.trials,
        seed: cfg.seed,
        drop_id: drop_id as u64,
        sampling: cfg.sampling,
    };
    Ok(monte_carlo_se(sc, &cfg.schemes, &settings)
        .into_iter()
        .map(|(scheme, rep)| {
            let mut row = base(scheme);
            match rep {
                Ok(rep) => {
                    row.sum_se = Some(rep.sum_se_per_cell);
                    row.sum_se_stderr = Some(rep.sum_se_stderr);
                    row.trials = rep.trials;
                    row.per_cell_sum_se = rep.per_cell_sum_se;
                }
                Err(e) => row.error = Some(format!("{}: {e}", e.kind())),
            }
            if scheme == Scheme::MultiCellMmse {
                row.detequiv_sum_se = de_value;
                if row.error.is_none() {
                    row.error.clone_from(&de_error);
                }
            }
            row
        })
        .collect())
}
