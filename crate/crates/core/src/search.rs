//! Gradient-guided global/local search for inputs with high QID.
//!
//! The global phase walks from a dataset seed along loss-gradient
//! directions shared by two counterfactuals of the largest score cluster,
//! trying to split it. Whenever a step finds more clusters (or the same
//! number spread further apart) than the walk has seen so far, a greedy
//! local phase explores the neighbourhood and records individual
//! discrimination instances.

use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{kmeans_partition, to_f64, AttributeSchema, Dataset, ProtectedSpace};
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::qid::{evaluate, qid_max, spread_bonus, ClusterPartition, Evaluation};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Dataset rows sampled to estimate the initial cluster count.
pub const INITIAL_SAMPLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// k-means groups for seeding; `None` uses the number of label classes.
    pub partitions: Option<usize>,
    pub max_global: usize,
    pub max_local: usize,
    pub epsilon: f64,
    pub global_step: i64,
    pub local_step: i64,
    pub timeout_secs: f64,
    /// Stop after this many seeds even if time remains. Makes runs reproducible.
    pub max_seeds: Option<usize>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            partitions: None,
            max_global: 10,
            max_local: 1000,
            epsilon: 0.025,
            global_step: 1,
            local_step: 1,
            timeout_secs: 60.0,
            max_seeds: None,
            seed: 0,
            workers: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(Error::Config("timeout must be positive".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.max_global == 0 || self.max_local == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        if self.global_step <= 0 || self.local_step <= 0 {
            return Err(Error::Config("step sizes must be positive".into()));
        }
        if self.workers == 0 || self.partitions == Some(0) || self.max_seeds == Some(0) {
            return Err(Error::Config("workers, partitions and max_seeds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Global,
    Local,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Global => "global",
            Phase::Local => "local",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    /// Non-protected tuple.
    pub x: Vec<i64>,
    pub k: usize,
    pub q_inf: f64,
    pub q_shannon: f64,
    pub delta: f64,
    pub phase: Phase,
    pub wall_time: f64,
}

impl TestCase {
    fn new(x: &[i64], part: &ClusterPartition, phase: Phase, wall_time: f64) -> Self {
        let m = part.measures();
        Self {
            x: x.to_vec(),
            k: m.k,
            q_inf: m.q_inf,
            q_shannon: m.q_shannon,
            delta: m.delta,
            phase,
            wall_time,
        }
    }
}

/// Individual discrimination instance: `x` gets the unfavorable label under
/// one protected tuple and the favorable label under another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdRecord {
    pub x: Vec<i64>,
    pub unfavorable: Vec<i64>,
    pub favorable: Vec<i64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityLevel {
    pub k: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub format_version: u32,
    pub m: usize,
    /// `Q_I`, the largest attainable `Q_inf` for this `m` and epsilon.
    pub qid_max: f64,
    /// Largest cluster count over sampled dataset rows.
    pub k_initial: usize,
    /// `K_F`.
    pub k_max: usize,
    pub t_k_max: Option<f64>,
    pub q_inf: f64,
    pub q_shannon: f64,
    /// Unique test cases (`#I`).
    pub test_cases: usize,
    /// Unique test cases at the three highest `k` levels, highest first.
    pub severity: Vec<SeverityLevel>,
    pub evaluations: usize,
    pub global_evaluations: usize,
    pub local_evaluations: usize,
    pub local_id_evaluations: usize,
    pub id_instances: usize,
    /// `l_s`.
    pub local_success_rate: f64,
    pub t_first_id: Option<f64>,
    pub t_1000th_id: Option<f64>,
    pub seeds: usize,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub summary: SearchSummary,
    pub test_cases: Vec<TestCase>,
    pub id_instances: Vec<IdRecord>,
}

impl SearchReport {
    /// Same report with every wall-clock field zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.summary.t_k_max = r.summary.t_k_max.map(|_| 0.0);
        r.summary.t_first_id = r.summary.t_first_id.map(|_| 0.0);
        r.summary.t_1000th_id = r.summary.t_1000th_id.map(|_| 0.0);
        r.summary.elapsed = 0.0;
        r.test_cases.iter_mut().for_each(|t| t.wall_time = 0.0);
        r.id_instances.iter_mut().for_each(|t| t.wall_time = 0.0);
        r
    }

    pub fn k_max(&self) -> usize {
        self.summary.k_max
    }
}

fn millis(secs: f64) -> f64 {
    (secs * 1000.0).round() / 1000.0
}

/// Shared accounting for one run. Test cases and IDs are deduplicated on `x`.
struct Recorder {
    start: Instant,
    favorable: usize,
    seen: HashSet<Vec<i64>>,
    test_cases: Vec<TestCase>,
    id_seen: HashSet<Vec<i64>>,
    ids: Vec<IdRecord>,
    global_evals: usize,
    local_evals: usize,
    local_id_evals: usize,
    k_max: usize,
    t_k_max: Option<f64>,
    seeds: usize,
}

impl Recorder {
    fn new(start: Instant, favorable: usize) -> Self {
        Self {
            start,
            favorable,
            seen: HashSet::new(),
            test_cases: Vec::new(),
            id_seen: HashSet::new(),
            ids: Vec::new(),
            global_evals: 0,
            local_evals: 0,
            local_id_evals: 0,
            k_max: 0,
            t_k_max: None,
            seeds: 0,
        }
    }

    fn now(&self) -> f64 {
        millis(self.start.elapsed().as_secs_f64())
    }

    fn record(&mut self, x: &[i64], eval: &Evaluation, phase: Phase, space: &ProtectedSpace) {
        let t = self.now();
        match phase {
            Phase::Global => self.global_evals += 1,
            Phase::Local => self.local_evals += 1,
        }
        let k = eval.partition.k();
        if k > self.k_max {
            self.k_max = k;
            self.t_k_max = Some(t);
        }
        if self.seen.insert(x.to_vec()) {
            self.test_cases.push(TestCase::new(x, &eval.partition, phase, t));
        }
        if phase == Phase::Local {
            if let Some((unfav, fav)) = eval.id_witness(self.favorable) {
                self.local_id_evals += 1;
                if self.id_seen.insert(x.to_vec()) {
                    self.ids.push(IdRecord {
                        x: x.to_vec(),
                        unfavorable: space.tuple(unfav).to_vec(),
                        favorable: space.tuple(fav).to_vec(),
                        wall_time: t,
                    });
                }
            }
        }
    }
}

/// Signed per-feature direction over the full input (zero on protected features).
pub type Direction = Vec<i64>;

/// Features where both gradients agree in sign. When none agree, the sign of
/// `g_a` on its largest non-protected component; zero when that is zero too.
pub fn choose_common_direction(g_a: &[f64], g_b: &[f64], non_protected: &[bool]) -> Direction {
    assert_eq!(g_a.len(), g_b.len());
    let sign = |v: f64| -> i64 {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut d: Direction = g_a
        .iter()
        .zip(g_b)
        .zip(non_protected)
        .map(|((&a, &b), &np)| {
            let s = sign(a);
            if np && s != 0 && s == sign(b) {
                s
            } else {
                0
            }
        })
        .collect();
    if d.iter().all(|&v| v == 0) {
        let best = (0..g_a.len())
            .filter(|&i| non_protected[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if g_a[b].abs() >= g_a[i].abs() => Some(b),
                _ => Some(i),
            });
        if let Some(i) = best {
            d[i] = sign(g_a[i]);
        }
    }
    d
}

/// Local objective (minimized): `-((k - 1) + (1 - exp(-0.1 spread)))`.
pub fn local_value(part: &ClusterPartition) -> f64 {
    -((part.k() as f64 - 1.0) + spread_bonus(part.delta()))
}

#[derive(Debug, Clone)]
pub struct GlobalStep {
    pub evaluation: Evaluation,
    /// `None` when the gradients give no direction.
    pub next: Option<Vec<i64>>,
    pub entered_local: bool,
}

/// Holds everything a search step needs: model, schema, protected space, config.
pub struct Searcher<'a> {
    net: &'a Network,
    schema: &'a AttributeSchema,
    space: ProtectedSpace,
    cfg: SearchConfig,
    mask: Vec<bool>,
}

impl<'a> Searcher<'a> {
    pub fn new(net: &'a Network, schema: &'a AttributeSchema, cfg: SearchConfig) -> Result<Self> {
        cfg.validate()?;
        if net.input_dim() != schema.num_features() {
            return Err(Error::shape("network input vs schema", schema.num_features(), net.input_dim()));
        }
        if net.output_dim() <= schema.favorable_label() {
            return Err(Error::shape("network output", schema.favorable_label() + 1, net.output_dim()));
        }
        Ok(Self {
            net,
            schema,
            space: schema.enumerate_protected()?,
            cfg,
            mask: schema.non_protected_mask(),
        })
    }

    pub fn space(&self) -> &ProtectedSpace {
        &self.space
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn eval(&self, x: &[i64]) -> Result<Evaluation> {
        evaluate(self.net, self.schema, &self.space, x, self.cfg.epsilon, None)
    }

    /// Returns the local objective value together with the evaluation.
    pub fn eval_f(&self, x: &[i64]) -> Result<(f64, Evaluation)> {
        let e = self.eval(x)?;
        Ok((local_value(&e.partition), e))
    }

    /// Loss gradient at counterfactual `z_index` of `x`, taken at its predicted label.
    fn gradient(&self, x: &[i64], z_index: usize) -> Result<Vec<f64>> {
        let row = to_f64(&self.schema.assemble(x, self.space.tuple(z_index)));
        let label = self.net.predict_label(&row, None)?;
        self.net.input_gradient(&row, label)
    }

    fn shift(&self, x: &[i64], d: &Direction, step: i64) -> Vec<i64> {
        let moved: Vec<f64> = self
            .schema
            .non_protected_indices()
            .iter()
            .zip(x)
            .map(|(&f, &v)| (v + step * d[f]) as f64)
            .collect();
        self.schema.clamp(&moved)
    }

    /// One global iteration from `x`, given the best `(k, delta)` seen on this walk.
    pub fn global_step(&self, x: &[i64], prev_k: usize, prev_delta: f64, rng: &mut impl Rng) -> Result<GlobalStep> {
        let evaluation = self.eval(x)?;
        let part = &evaluation.partition;
        let largest = &part.largest().members;
        let (a, b) = if largest.len() >= 2 {
            let pick = sample(rng, largest.len(), 2);
            (largest[pick.index(0)], largest[pick.index(1)])
        } else {
            (largest[0], largest[0])
        };
        let g_a = self.gradient(x, a)?;
        let g_b = if a == b { g_a.clone() } else { self.gradient(x, b)? };
        let d = choose_common_direction(&g_a, &g_b, &self.mask);
        let next = if d.iter().any(|&v| v != 0) {
            Some(self.shift(x, &d, self.cfg.global_step))
        } else {
            None
        };
        let k = part.k();
        let entered_local = k > prev_k || (k == prev_k && part.delta() > prev_delta);
        Ok(GlobalStep {
            evaluation,
            next,
            entered_local,
        })
    }

    /// Local proposal: move one non-protected feature by `local_step`.
    ///
    /// The partner is a random counterfactual outside the cluster of `own`
    /// (any other counterfactual when there is a single cluster). The summed,
    /// L1-normalized gradient picks the feature with the smallest non-zero
    /// magnitude. Zero gradients fall back to a random feature and sign.
    pub fn perturb_local(&self, x: &[i64], own: usize, part: &ClusterPartition, rng: &mut impl Rng) -> Result<Vec<i64>> {
        let m = self.space.m();
        let own_cluster = part.cluster_of(own);
        let others: Vec<usize> = if part.k() > 1 {
            (0..m).filter(|&i| part.cluster_of(i) != own_cluster).collect()
        } else {
            (0..m).filter(|&i| i != own).collect()
        };
        let partner = if others.is_empty() {
            own
        } else {
            others[rng.gen_range(0..others.len())]
        };
        let mut g = self.gradient(x, own)?;
        if partner != own {
            for (gi, pi) in g.iter_mut().zip(self.gradient(x, partner)?) {
                *gi += pi;
            }
        }
        let norm: f64 = self.schema.non_protected_indices().iter().map(|&f| g[f].abs()).sum();
        let mut d = vec![0i64; g.len()];
        if norm > 0.0 {
            let f = self
                .schema
                .non_protected_indices()
                .iter()
                .copied()
                .filter(|&f| g[f] != 0.0)
                .min_by(|&a, &b| (g[a].abs() / norm).total_cmp(&(g[b].abs() / norm)).then(a.cmp(&b)))
                .expect("norm > 0 implies a non-zero component");
            d[f] = if g[f] > 0.0 { 1 } else { -1 };
        } else {
            let np = self.schema.non_protected_indices();
            let f = np[rng.gen_range(0..np.len())];
            d[f] = if rng.gen_bool(0.5) { 1 } else { -1 };
        }
        Ok(self.shift(x, &d, self.cfg.local_step))
    }

    /// Greedy local driver: propose, evaluate, accept strict improvements.
    ///
    /// `on_eval` sees the seed first (with its existing evaluation), then every
    /// evaluated proposal. Proposals equal to the current point (clamped at a
    /// boundary) or rejected by the domain constraint are discarded without
    /// evaluation. Returns the number of evaluations, seed included.
    pub fn local_search(
        &self,
        seed_x: &[i64],
        own: usize,
        seed_eval: &Evaluation,
        rng: &mut impl Rng,
        deadline: Option<Instant>,
        mut on_eval: impl FnMut(&[i64], &Evaluation),
    ) -> Result<usize> {
        on_eval(seed_x, seed_eval);
        let mut cur = seed_x.to_vec();
        let mut cur_part = seed_eval.partition.clone();
        let mut cur_val = local_value(&cur_part);
        let mut evals = 1;
        for _ in 0..self.cfg.max_local {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                break;
            }
            let prop = self.perturb_local(&cur, own, &cur_part, rng)?;
            if prop == cur || !self.schema.admits(&prop) {
                continue;
            }
            let (val, e) = self.eval_f(&prop)?;
            evals += 1;
            on_eval(&prop, &e);
            if val < cur_val {
                cur = prop;
                cur_val = val;
                cur_part = e.partition;
            }
        }
        Ok(evals)
    }
}

/// Individual discrimination check used for reporting: `(x, z_unfavorable, z_favorable)`.
pub fn record_id(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    x: &[i64],
    epsilon: f64,
) -> Result<Option<IdRecord>> {
    let e = evaluate(net, schema, space, x, epsilon, None)?;
    Ok(e.id_witness(schema.favorable_label()).map(|(u, f)| IdRecord {
        x: x.to_vec(),
        unfavorable: space.tuple(u).to_vec(),
        favorable: space.tuple(f).to_vec(),
        wall_time: 0.0,
    }))
}

/// Largest cluster count over up to [`INITIAL_SAMPLE`] dataset rows.
pub fn initial_clusters(
    net: &Network,
    data: &Dataset,
    schema: &AttributeSchema,
    epsilon: f64,
    seed: u64,
) -> Result<usize> {
    let space = schema.enumerate_protected()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b5f_0000_0000_0001);
    let n = data.len().min(INITIAL_SAMPLE);
    let mut k = 1;
    for i in sample(&mut rng, data.len(), n) {
        let (x, _) = schema.split(data.row(i));
        k = k.max(evaluate(net, schema, &space, &x, epsilon, None)?.partition.k());
    }
    Ok(k)
}

fn worker_rng(seed: u64, worker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker as u64);
    rng
}

/// Runs the timed search and aggregates the report.
///
/// Stops at `timeout_secs`, or after `max_seeds` seeds when that is set.
/// With one worker and a seed budget the report is reproducible apart from
/// wall-clock fields.
pub fn run_search(net: &Network, data: &Dataset, schema: &AttributeSchema, cfg: &SearchConfig) -> Result<SearchReport> {
    let searcher = Searcher::new(net, schema, cfg.clone())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = data.labels().iter().collect::<HashSet<_>>().len();
    let p = cfg.partitions.unwrap_or(classes).min(data.len());
    let groups = kmeans_partition(data, schema, p, cfg.seed)?;
    let k_initial = initial_clusters(net, data, schema, cfg.epsilon, cfg.seed)?;

    let start = Instant::now();
    let deadline = start + std::time::Duration::from_secs_f64(cfg.timeout_secs);
    let recorder = Mutex::new(Recorder::new(start, schema.favorable_label()));
    let seeds_left = Mutex::new(cfg.max_seeds);

    let take_seed = || -> bool {
        if Instant::now() >= deadline {
            return false;
        }
        let mut left = seeds_left.lock().unwrap();
        match left.as_mut() {
            Some(0) => false,
            Some(n) => {
                *n -= 1;
                true
            }
            None => true,
        }
    };

    let worker = |w: usize| -> Result<()> {
        let mut rng = worker_rng(cfg.seed, w);
        while take_seed() {
            let row = data.row(groups.pick_seed(&mut rng));
            let (mut x, z) = schema.split(row);
            let own = searcher.space.index_of(&z).expect("dataset rows are in range");
            recorder.lock().unwrap().seeds += 1;
            let (mut best_k, mut best_delta) = (1usize, 0.0f64);
            for _ in 0..cfg.max_global {
                if Instant::now() >= deadline {
                    break;
                }
                let step = searcher.global_step(&x, best_k, best_delta, &mut rng)?;
                recorder
                    .lock()
                    .unwrap()
                    .record(&x, &step.evaluation, Phase::Global, &searcher.space);
                let part = &step.evaluation.partition;
                if step.entered_local {
                    searcher.local_search(&x, own, &step.evaluation, &mut rng, Some(deadline), |xp, e| {
                        recorder.lock().unwrap().record(xp, e, Phase::Local, &searcher.space)
                    })?;
                }
                if part.k() > best_k || (part.k() == best_k && part.delta() > best_delta) {
                    best_k = part.k();
                    best_delta = part.delta();
                }
                match step.next {
                    Some(next) if schema.admits(&next) => x = next,
                    Some(_) => {}
                    None => break,
                }
            }
        }
        Ok(())
    };

    if cfg.workers == 1 {
        worker(0)?;
    } else {
        std::thread::scope(|s| -> Result<()> {
            let handles: Vec<_> = (0..cfg.workers).map(|w| s.spawn(move || worker(w))).collect();
            for h in handles {
                h.join().expect("search worker panicked")?;
            }
            Ok(())
        })?;
    }

    let elapsed = millis(start.elapsed().as_secs_f64());
    let rec = recorder.into_inner().unwrap();
    Ok(aggregate(rec, &searcher, k_initial, elapsed))
}

fn aggregate(rec: Recorder, searcher: &Searcher<'_>, k_initial: usize, elapsed: f64) -> SearchReport {
    let mut levels: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &rec.test_cases {
        *levels.entry(t.k).or_default() += 1;
    }
    let severity = levels
        .iter()
        .rev()
        .take(3)
        .map(|(&k, &count)| SeverityLevel { k, count })
        .collect();
    let q_inf = rec.test_cases.iter().map(|t| t.q_inf).fold(0.0, f64::max);
    let q_shannon = rec.test_cases.iter().map(|t| t.q_shannon).fold(0.0, f64::max);
    let local_success_rate = if rec.local_evals == 0 {
        0.0
    } else {
        rec.local_id_evals as f64 / rec.local_evals as f64
    };
    let summary = SearchSummary {
        format_version: REPORT_FORMAT_VERSION,
        m: searcher.space.m(),
        qid_max: qid_max(searcher.space.m(), searcher.cfg.epsilon),
        k_initial,
        k_max: rec.k_max.max(1),
        t_k_max: rec.t_k_max,
        q_inf,
        q_shannon,
        test_cases: rec.test_cases.len(),
        severity,
        evaluations: rec.global_evals + rec.local_evals,
        global_evaluations: rec.global_evals,
        local_evaluations: rec.local_evals,
        local_id_evaluations: rec.local_id_evals,
        id_instances: rec.ids.len(),
        local_success_rate,
        t_first_id: rec.ids.first().map(|r| r.wall_time),
        t_1000th_id: rec.ids.get(999).map(|r| r.wall_time),
        seeds: rec.seeds,
        elapsed,
    };
    SearchReport {
        summary,
        test_cases: rec.test_cases,
        id_instances: rec.ids,
    }
}
