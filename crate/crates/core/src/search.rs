//! Constrained evolutionary architecture search: mutate a parent genome,
//! reject children that violate the hardware thresholds before any training,
//! train the survivors, and keep the best candidate as the next parent.
//!
//! Selection is elitist — the incumbent parent competes with its children —
//! so the best-so-far validation accuracy never decreases. Children within a
//! generation are independent and may be evaluated in parallel; every child
//! draws its randomness from a seed derived from `(seed, generation,
//! child_index)`, so serial and parallel runs produce the same log.

use std::fs;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{check_constraints, estimate_cost, CostError, CostReport, Thresholds};
use crate::nn::{multi_start_train, NnError, TrainConfig, TrainOutcome};
use crate::session::Dataset;
use crate::space::{mutate, random_genome, Genome, SpaceBounds, SpaceError, RETRY_CAP};

/// Default parameter-count threshold: the smallest baseline parameter count
/// in the published comparison (223,000).
pub const DEFAULT_D_TH: u64 = 223_000;
/// Default peak-tensor threshold: the smallest baseline activation footprint
/// in the published comparison (25,088 elements).
pub const DEFAULT_R_TH: u64 = 25_088;
/// Default FLOPs threshold: the smallest baseline operation count in the
/// published comparison (39,727,000).
pub const DEFAULT_FLOPS_TH: u64 = 39_727_000;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no feasible child found within {0} mutation attempts")]
    RetryCapExceeded(usize),
    #[error("no constraint-satisfying genome found within {0} attempts")]
    NoFeasibleGenome(usize),
    #[error("malformed search log: {0}")]
    MalformedLog(String),
    #[error("invalid search config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a salt into a base seed so unrelated consumers (weight init,
/// shuffling, per-child mutation, …) get independent streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(salt)))
}

/// A deterministic RNG for the given `(seed, salt)` pair.
pub fn derive_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, salt))
}

const SALT_INIT: u64 = 0x696e_6974; // initial-parent sampling
const SALT_MUTATE_BIT: u64 = 1 << 62; // per-child mutation stream
const SALT_TRAIN_BIT: u64 = 1 << 63; // per-child training seed

/// Generation/child pair packed into a salt; generations are ≥ 1 so these
/// never collide with the small module-level salt constants.
fn child_salt(generation: usize, child_index: usize) -> u64 {
    ((generation as u64) << 32) | child_index as u64
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub generations: usize,
    pub population: usize,
    pub thresholds: Thresholds,
    pub bounds: SpaceBounds,
    pub train_cfg: TrainConfig,
    pub seed: u64,
    /// Mutation attempts per child slot (and initial-parent samples) before
    /// the slot is logged as rejected.
    pub candidate_retry_cap: usize,
    /// Worker threads for child evaluation; 1 keeps everything serial.
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            generations: 100,
            population: 10,
            thresholds: Thresholds {
                d_th: Some(DEFAULT_D_TH),
                r_th: Some(DEFAULT_R_TH),
                flops_th: Some(DEFAULT_FLOPS_TH),
            },
            bounds: SpaceBounds::default(),
            train_cfg: TrainConfig::default(),
            seed: 0,
            candidate_retry_cap: RETRY_CAP,
            jobs: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.generations == 0 {
            return Err(SearchError::BadConfig("generations must be ≥ 1".into()));
        }
        if self.population == 0 {
            return Err(SearchError::BadConfig("population must be ≥ 1".into()));
        }
        if self.candidate_retry_cap == 0 {
            return Err(SearchError::BadConfig("candidate_retry_cap must be ≥ 1".into()));
        }
        if self.jobs == 0 {
            return Err(SearchError::BadConfig("jobs must be ≥ 1".into()));
        }
        self.thresholds.validate()?;
        self.bounds.validate()?;
        self.train_cfg.validate()?;
        Ok(())
    }
}

/// A trained, constraint-satisfying architecture.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub genome: Genome,
    pub cost: CostReport,
    pub outcome: TrainOutcome,
    pub generation: usize,
    pub child_index: usize,
}

/// `a` strictly better than `b`: higher validation accuracy, ties broken by
/// lower FLOPs, then lower parameter count. Full ties keep `b`.
fn better(a: &Candidate, b: &Candidate) -> bool {
    let (aa, ba) = (a.outcome.best_val_accuracy, b.outcome.best_val_accuracy);
    if aa != ba {
        return aa > ba;
    }
    if a.cost.flops != b.cost.flops {
        return a.cost.flops < b.cost.flops;
    }
    a.cost.params < b.cost.params
}

/// One child slot in the log. Rejected slots never reached cost-feasible
/// shape, so their cost fields and accuracy are recorded as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub generation: usize,
    pub child_index: usize,
    pub params: u64,
    pub max_tensor: u64,
    pub flops: u64,
    pub val_acc: f64,
    pub trained: bool,
}

impl LogEntry {
    pub fn line(&self) -> String {
        format!(
            "gen={} child={} params={} tensor={} flops={} val_acc={:.6} status={}",
            self.generation,
            self.child_index,
            self.params,
            self.max_tensor,
            self.flops,
            self.val_acc,
            if self.trained { "trained" } else { "rejected" }
        )
    }

    pub fn parse(line: &str) -> Result<LogEntry, SearchError> {
        let mut gen = None;
        let mut child = None;
        let mut params = None;
        let mut tensor = None;
        let mut flops = None;
        let mut val_acc = None;
        let mut trained = None;
        fn bad(key: &str, value: &str) -> SearchError {
            SearchError::MalformedLog(format!("value `{value}` for `{key}`"))
        }
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| SearchError::MalformedLog(format!("field `{field}`")))?;
            match key {
                "gen" => gen = Some(value.parse::<usize>().map_err(|_| bad(key, value))?),
                "child" => child = Some(value.parse::<usize>().map_err(|_| bad(key, value))?),
                "params" => params = Some(value.parse::<u64>().map_err(|_| bad(key, value))?),
                "tensor" => tensor = Some(value.parse::<u64>().map_err(|_| bad(key, value))?),
                "flops" => flops = Some(value.parse::<u64>().map_err(|_| bad(key, value))?),
                "val_acc" => val_acc = Some(value.parse::<f64>().map_err(|_| bad(key, value))?),
                "status" => {
                    trained = Some(match value {
                        "trained" => true,
                        "rejected" => false,
                        _ => return Err(SearchError::MalformedLog(format!("status `{value}`"))),
                    })
                }
                _ => return Err(SearchError::MalformedLog(format!("unknown key `{key}`"))),
            }
        }
        let missing = |name: &str| SearchError::MalformedLog(format!("missing `{name}`"));
        Ok(LogEntry {
            generation: gen.ok_or_else(|| missing("gen"))?,
            child_index: child.ok_or_else(|| missing("child"))?,
            params: params.ok_or_else(|| missing("params"))?,
            max_tensor: tensor.ok_or_else(|| missing("tensor"))?,
            flops: flops.ok_or_else(|| missing("flops"))?,
            val_acc: val_acc.ok_or_else(|| missing("val_acc"))?,
            trained: trained.ok_or_else(|| missing("status"))?,
        })
    }
}

/// Full audit trail of a search run. `entries` is totally ordered by
/// `(generation, child_index)`; `parents[g-1]` is the genome text of the
/// parent entering generation `g`; `best_trajectory[g-1]` is the best
/// validation accuracy seen up to and including generation `g` (0 until the
/// first child trains).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchLog {
    pub entries: Vec<LogEntry>,
    pub parents: Vec<String>,
    pub best_trajectory: Vec<f64>,
}

impl SearchLog {
    /// The persisted line-oriented form (one line per child slot).
    pub fn lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.line());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.lines())
    }

    /// Parses the persisted form back into child-slot entries.
    pub fn parse_entries(text: &str) -> Result<Vec<LogEntry>, SearchError> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(LogEntry::parse)
            .collect()
    }

    pub fn rejected_in(&self, generation: usize) -> usize {
        self.entries
            .iter()
            .filter(|e| e.generation == generation && !e.trained)
            .count()
    }
}

/// Mutates `parent` until the child validates and its estimated cost passes
/// every threshold, trying at most `cfg.candidate_retry_cap` mutations.
/// Cost estimation runs before any training, so infeasible children are
/// rejected cheaply.
pub fn spawn_child(
    parent: &Genome,
    cfg: &SearchConfig,
    input_len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Genome, CostReport), SearchError> {
    for _ in 0..cfg.candidate_retry_cap {
        let Ok(child) = mutate(parent, &cfg.bounds, input_len, rng) else {
            continue; // no valid mutation found in this attempt's budget
        };
        let cost = estimate_cost(&child, input_len)?;
        if check_constraints(&cost, &cfg.thresholds).is_empty() {
            return Ok((child, cost));
        }
    }
    Err(SearchError::RetryCapExceeded(cfg.candidate_retry_cap))
}

/// Trains one constraint-satisfying genome (multi-start) and wraps the best
/// outcome with its cost report. The test split never enters here.
pub fn evaluate_candidate(
    genome: &Genome,
    input_len: usize,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &SearchConfig,
    generation: usize,
    child_index: usize,
    train_seed: u64,
) -> Result<Candidate, SearchError> {
    let cost = estimate_cost(genome, input_len)?;
    debug_assert!(
        check_constraints(&cost, &cfg.thresholds).is_empty(),
        "evaluate_candidate requires a constraint-satisfying genome"
    );
    let mut train_cfg = cfg.train_cfg.clone();
    train_cfg.seed = train_seed;
    let outcome = multi_start_train(genome, input_len, train_set, val_set, &train_cfg)?;
    Ok(Candidate { genome: genome.clone(), cost, outcome, generation, child_index })
}

/// Samples random genomes until one passes the thresholds.
fn feasible_parent(
    cfg: &SearchConfig,
    input_len: usize,
    num_classes: usize,
) -> Result<(Genome, CostReport), SearchError> {
    let mut rng = derive_rng(cfg.seed, SALT_INIT);
    for _ in 0..cfg.candidate_retry_cap {
        let Ok(g) = random_genome(&cfg.bounds, input_len, num_classes, &mut rng) else {
            continue;
        };
        let cost = estimate_cost(&g, input_len)?;
        if check_constraints(&cost, &cfg.thresholds).is_empty() {
            return Ok((g, cost));
        }
    }
    Err(SearchError::NoFeasibleGenome(cfg.candidate_retry_cap))
}

/// Runs the full search: `generations` rounds of `population` children each,
/// rejection before training, elitist selection by (validation accuracy,
/// lower FLOPs, lower params). Returns the overall best candidate and the
/// audit log.
///
/// The initial parent is a random feasible genome and starts untrained; it
/// earns an outcome the first time it wins a comparison is moot — the first
/// generation's best child always replaces it. Only if every child of every
/// generation is rejected (e.g. a singleton space where no mutation exists)
/// is the initial parent itself trained and returned, keeping the total
/// training budget within `generations × population × multi_start`.
pub fn run_search(
    cfg: &SearchConfig,
    train_set: &Dataset,
    val_set: &Dataset,
) -> Result<(Candidate, SearchLog), SearchError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(SearchError::Nn(NnError::EmptySplit("train")));
    }
    if val_set.is_empty() {
        return Err(SearchError::Nn(NnError::EmptySplit("validation")));
    }
    let input_len = train_set.samples[0].len();
    let num_classes = train_set.num_classes;

    let (mut parent_genome, _) = feasible_parent(cfg, input_len, num_classes)?;
    let mut parent: Option<Candidate> = None;
    let mut log = SearchLog::default();

    let pool = if cfg.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build()
                .map_err(|e| SearchError::BadConfig(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };

    for generation in 1..=cfg.generations {
        log.parents.push(parent_genome.to_string());
        let gen_parent = parent_genome.clone();
        let evaluate_slot = |child_index: usize| -> Result<(LogEntry, Option<Candidate>), SearchError> {
            let mut rng =
                derive_rng(cfg.seed, SALT_MUTATE_BIT | child_salt(generation, child_index));
            match spawn_child(&gen_parent, cfg, input_len, &mut rng) {
                Ok((genome, _)) => {
                    let train_seed =
                        derive_seed(cfg.seed, SALT_TRAIN_BIT | child_salt(generation, child_index));
                    let cand = evaluate_candidate(
                        &genome, input_len, train_set, val_set, cfg, generation, child_index,
                        train_seed,
                    )?;
                    let entry = LogEntry {
                        generation,
                        child_index,
                        params: cand.cost.params,
                        max_tensor: cand.cost.max_tensor,
                        flops: cand.cost.flops,
                        val_acc: cand.outcome.best_val_accuracy,
                        trained: true,
                    };
                    Ok((entry, Some(cand)))
                }
                Err(SearchError::RetryCapExceeded(_)) => {
                    log::info!("gen {generation} child {child_index}: no feasible mutation, slot rejected");
                    let entry = LogEntry {
                        generation,
                        child_index,
                        params: 0,
                        max_tensor: 0,
                        flops: 0,
                        val_acc: 0.0,
                        trained: false,
                    };
                    Ok((entry, None))
                }
                Err(e) => Err(e),
            }
        };

        let slots: Vec<usize> = (1..=cfg.population).collect();
        let results: Vec<(LogEntry, Option<Candidate>)> = match &pool {
            Some(p) => p.install(|| {
                slots
                    .par_iter()
                    .map(|&c| evaluate_slot(c))
                    .collect::<Result<Vec<_>, _>>()
            })?,
            None => slots
                .iter()
                .map(|&c| evaluate_slot(c))
                .collect::<Result<Vec<_>, _>>()?,
        };

        for (entry, cand) in results {
            log.entries.push(entry);
            if let Some(cand) = cand {
                let replaces = match &parent {
                    None => true,
                    Some(incumbent) => better(&cand, incumbent),
                };
                if replaces {
                    parent = Some(cand);
                }
            }
        }
        if let Some(p) = &parent {
            parent_genome = p.genome.clone();
        }
        log.best_trajectory
            .push(parent.as_ref().map_or(0.0, |p| p.outcome.best_val_accuracy));
    }

    let best = match parent {
        Some(p) => p,
        None => {
            // every slot of every generation was rejected; train the initial
            // parent so the search still yields a usable model
            let train_seed = derive_seed(cfg.seed, SALT_TRAIN_BIT);
            evaluate_candidate(
                &parent_genome, input_len, train_set, val_set, cfg, 0, 0, train_seed,
            )?
        }
    };
    Ok((best, log))
}
