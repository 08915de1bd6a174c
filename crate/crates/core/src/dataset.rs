//! Integer-coded tabular data with a protected / non-protected split.
//!
//! A full input row lists every attribute in schema order. The
//! non-protected part `x` and the protected part `z` are the same row
//! with the other attributes dropped, also in schema order.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Dense, Network};

pub const SCHEMA_FORMAT_VERSION: u32 = 1;

/// Largest protected space we are willing to enumerate.
pub const MAX_PROTECTED_COMBINATIONS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Ordinal,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    /// Inclusive value range.
    pub range: (i64, i64),
    #[serde(default)]
    pub protected: bool,
}

impl Attribute {
    pub fn new(name: impl Into<String>, lo: i64, hi: i64, protected: bool) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Ordinal,
            range: (lo, hi),
            protected,
        }
    }

    pub fn categorical(mut self) -> Self {
        self.kind = AttributeKind::Categorical;
        self
    }

    pub fn lo(&self) -> i64 {
        self.range.0
    }

    pub fn hi(&self) -> i64 {
        self.range.1
    }

    pub fn domain_size(&self) -> usize {
        (self.range.1 - self.range.0 + 1).max(0) as usize
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.range.0..=self.range.1).contains(&v)
    }
}

/// Extra validity predicate over non-protected tuples.
#[derive(Clone)]
pub struct DomainConstraint(Arc<Predicate>);

type Predicate = dyn Fn(&[i64]) -> bool + Send + Sync;

impl DomainConstraint {
    pub fn new(f: impl Fn(&[i64]) -> bool + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn allows(&self, x: &[i64]) -> bool {
        (self.0)(x)
    }
}

impl fmt::Debug for DomainConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DomainConstraint(..)")
    }
}

#[derive(Debug, Clone)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
    label: String,
    favorable_label: usize,
    protected: Vec<usize>,
    non_protected: Vec<usize>,
    constraint: Option<DomainConstraint>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    format_version: u32,
    label: String,
    favorable_label: usize,
    #[serde(rename = "attribute")]
    attributes: Vec<Attribute>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>, label: impl Into<String>, favorable_label: usize) -> Result<Self> {
        let label = label.into();
        if favorable_label > 1 {
            return Err(Error::Schema("favorable_label must be 0 or 1".into()));
        }
        let mut seen = HashMap::new();
        for (i, a) in attributes.iter().enumerate() {
            if a.lo() > a.hi() {
                return Err(Error::Schema(format!(
                    "attribute `{}` has empty range [{}, {}]",
                    a.name,
                    a.lo(),
                    a.hi()
                )));
            }
            if seen.insert(a.name.as_str(), i).is_some() || a.name == label {
                return Err(Error::Schema(format!("duplicate column name `{}`", a.name)));
            }
        }
        let protected: Vec<usize> = (0..attributes.len()).filter(|&i| attributes[i].protected).collect();
        let non_protected: Vec<usize> = (0..attributes.len()).filter(|&i| !attributes[i].protected).collect();
        if protected.is_empty() || non_protected.is_empty() {
            return Err(Error::Schema(
                "need at least one protected and one non-protected attribute".into(),
            ));
        }
        Ok(Self {
            attributes,
            label,
            favorable_label,
            protected,
            non_protected,
            constraint: None,
        })
    }

    pub fn with_constraint(mut self, constraint: DomainConstraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn constraint(&self) -> Option<&DomainConstraint> {
        self.constraint.as_ref()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| Error::Parse {
            field: "schema".into(),
            message: e.to_string(),
        })?;
        if file.format_version != SCHEMA_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "schema file",
                found: file.format_version,
                expected: SCHEMA_FORMAT_VERSION,
            });
        }
        Self::new(file.attributes, file.label, file.favorable_label)
    }

    pub fn to_toml(&self) -> String {
        let file = SchemaFile {
            format_version: SCHEMA_FORMAT_VERSION,
            label: self.label.clone(),
            favorable_label: self.favorable_label,
            attributes: self.attributes.clone(),
        };
        toml::to_string(&file).expect("schema serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn favorable_label(&self) -> usize {
        self.favorable_label
    }

    pub fn num_features(&self) -> usize {
        self.attributes.len()
    }

    pub fn protected_indices(&self) -> &[usize] {
        &self.protected
    }

    pub fn non_protected_indices(&self) -> &[usize] {
        &self.non_protected
    }

    /// `true` at every non-protected feature position.
    pub fn non_protected_mask(&self) -> Vec<bool> {
        self.attributes.iter().map(|a| !a.protected).collect()
    }

    pub fn non_protected_attributes(&self) -> impl Iterator<Item = &Attribute> {
        self.non_protected.iter().map(|&i| &self.attributes[i])
    }

    /// Splits a full row into its non-protected and protected parts.
    pub fn split(&self, row: &[i64]) -> (Vec<i64>, Vec<i64>) {
        (
            self.non_protected.iter().map(|&i| row[i]).collect(),
            self.protected.iter().map(|&i| row[i]).collect(),
        )
    }

    /// Builds a full row from a non-protected tuple and a protected tuple.
    pub fn assemble(&self, x: &[i64], z: &[i64]) -> Vec<i64> {
        let mut row = vec![0; self.attributes.len()];
        for (&i, &v) in self.non_protected.iter().zip(x) {
            row[i] = v;
        }
        for (&i, &v) in self.protected.iter().zip(z) {
            row[i] = v;
        }
        row
    }

    pub fn check_non_protected(&self, x: &[i64]) -> Result<()> {
        if x.len() != self.non_protected.len() {
            return Err(Error::shape("non-protected tuple", self.non_protected.len(), x.len()));
        }
        for (a, &v) in self.non_protected_attributes().zip(x) {
            if !a.contains(v) {
                return Err(Error::OutOfRange {
                    row: 0,
                    column: a.name.clone(),
                    value: v,
                    lo: a.lo(),
                    hi: a.hi(),
                });
            }
        }
        Ok(())
    }

    /// Rounds each non-protected coordinate to the nearest integer and clamps it into range.
    pub fn clamp(&self, x: &[f64]) -> Vec<i64> {
        self.non_protected_attributes()
            .zip(x)
            .map(|(a, &v)| {
                let r = if v.is_nan() { a.lo() as f64 } else { v.round() };
                r.clamp(a.lo() as f64, a.hi() as f64) as i64
            })
            .collect()
    }

    /// Whether `x` satisfies the optional domain constraint.
    pub fn admits(&self, x: &[i64]) -> bool {
        self.constraint.as_ref().is_none_or(|c| c.allows(x))
    }

    pub fn enumerate_protected(&self) -> Result<ProtectedSpace> {
        ProtectedSpace::enumerate(self)
    }
}

/// All protected-value tuples, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedSpace {
    tuples: Vec<Vec<i64>>,
}

impl ProtectedSpace {
    pub fn enumerate(schema: &AttributeSchema) -> Result<Self> {
        let attrs: Vec<&Attribute> = schema.protected.iter().map(|&i| &schema.attributes[i]).collect();
        let mut m: usize = 1;
        for a in &attrs {
            if a.domain_size() == 0 {
                return Err(Error::Schema(format!("protected attribute `{}` has an empty domain", a.name)));
            }
            m = m
                .checked_mul(a.domain_size())
                .filter(|&m| m <= MAX_PROTECTED_COMBINATIONS)
                .ok_or_else(|| Error::Schema("protected space too large to enumerate".into()))?;
        }
        let mut tuples = Vec::with_capacity(m);
        let mut cur: Vec<i64> = attrs.iter().map(|a| a.lo()).collect();
        loop {
            tuples.push(cur.clone());
            // odometer, last attribute fastest
            let mut pos = attrs.len();
            loop {
                if pos == 0 {
                    return Ok(Self { tuples });
                }
                pos -= 1;
                if cur[pos] < attrs[pos].hi() {
                    cur[pos] += 1;
                    break;
                }
                cur[pos] = attrs[pos].lo();
            }
        }
    }

    pub fn from_tuples(tuples: Vec<Vec<i64>>) -> Self {
        Self { tuples }
    }

    pub fn m(&self) -> usize {
        self.tuples.len()
    }

    pub fn tuples(&self) -> &[Vec<i64>] {
        &self.tuples
    }

    pub fn tuple(&self, i: usize) -> &[i64] {
        &self.tuples[i]
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        self.tuples.binary_search_by(|t| t.as_slice().cmp(z)).ok()
    }

    /// One full row per protected tuple, sharing the non-protected values `x`.
    pub fn counterfactuals(&self, schema: &AttributeSchema, x: &[i64]) -> Result<Vec<Vec<i64>>> {
        schema.check_non_protected(x)?;
        Ok(self.tuples.iter().map(|z| schema.assemble(x, z)).collect())
    }
}

pub fn to_f64(row: &[i64]) -> Vec<f64> {
    row.iter().map(|&v| v as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<i64>>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(schema: &AttributeSchema, rows: Vec<Vec<i64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::shape("label count", rows.len(), labels.len()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.num_features() {
                return Err(Error::shape(format!("row {r} width"), schema.num_features(), row.len()));
            }
            for (a, &v) in schema.attributes.iter().zip(row) {
                if !a.contains(v) {
                    return Err(Error::OutOfRange {
                        row: r,
                        column: a.name.clone(),
                        value: v,
                        lo: a.lo(),
                        hi: a.hi(),
                    });
                }
            }
            if labels[r] > 1 {
                return Err(Error::OutOfRange {
                    row: r,
                    column: schema.label.clone(),
                    value: labels[r] as i64,
                    lo: 0,
                    hi: 1,
                });
            }
        }
        Ok(Self { rows, labels })
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, schema)
    }

    /// Rows are numbered from 1, counting data rows only.
    pub fn from_csv_reader(reader: impl Read, schema: &AttributeSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let mut column_of = vec![None; schema.num_features()];
        let mut label_col = None;
        for (c, name) in header.iter().enumerate() {
            if name == schema.label {
                label_col = Some(c);
            } else if let Some(i) = schema.attributes.iter().position(|a| a.name == name) {
                column_of[i] = Some(c);
            } else {
                return Err(Error::UnknownColumn(name.to_string()));
            }
        }
        let label_col = label_col.ok_or_else(|| Error::MissingColumn(schema.label.clone()))?;
        let column_of: Vec<usize> = column_of
            .into_iter()
            .zip(&schema.attributes)
            .map(|(c, a)| c.ok_or_else(|| Error::MissingColumn(a.name.clone())))
            .collect::<Result<_>>()?;

        let parse = |row: usize, column: &str, cell: &str| -> Result<i64> {
            cell.parse::<i64>().map_err(|_| Error::NonInteger {
                row,
                column: column.to_string(),
                cell: cell.to_string(),
            })
        };
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let rownum = r + 1;
            let mut row = Vec::with_capacity(schema.num_features());
            for (a, &c) in schema.attributes.iter().zip(&column_of) {
                let v = parse(rownum, &a.name, record.get(c).unwrap_or(""))?;
                if !a.contains(v) {
                    return Err(Error::OutOfRange {
                        row: rownum,
                        column: a.name.clone(),
                        value: v,
                        lo: a.lo(),
                        hi: a.hi(),
                    });
                }
                row.push(v);
            }
            let y = parse(rownum, &schema.label, record.get(label_col).unwrap_or(""))?;
            if !(0..=1).contains(&y) {
                return Err(Error::OutOfRange {
                    row: rownum,
                    column: schema.label.clone(),
                    value: y,
                    lo: 0,
                    hi: 1,
                });
            }
            rows.push(row);
            labels.push(y as usize);
        }
        Ok(Self { rows, labels })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = schema.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&schema.label);
        w.write_record(&header)?;
        for (row, y) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(i64::to_string).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.rows[i]
    }

    /// Rows as network inputs, paired with their labels.
    pub fn samples(&self) -> Vec<(Vec<f64>, usize)> {
        self.rows.iter().map(|r| to_f64(r)).zip(self.labels.iter().copied()).collect()
    }
}

/// Z-score on non-protected columns; protected columns pass through.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset, schema: &AttributeSchema) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.len() as f64;
        let d = schema.num_features();
        let mut mean = vec![0.0; d];
        let mut std = vec![1.0; d];
        for &c in &schema.non_protected {
            let mu = data.rows.iter().map(|r| r[c] as f64).sum::<f64>() / n;
            let var = data.rows.iter().map(|r| (r[c] as f64 - mu).powi(2)).sum::<f64>() / n;
            mean[c] = mu;
            std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, row: &[i64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (m, s))| (v as f64 - m) / s)
            .collect()
    }

    /// Rewrites the first layer so the network consumes raw (unstandardized) rows.
    pub fn fold_into(&self, net: &Network) -> Result<Network> {
        let first = net.dense(1);
        if first.cols() != self.mean.len() {
            return Err(Error::shape("standardizer width", first.cols(), self.mean.len()));
        }
        let mut folded = Dense::zeros(first.rows(), first.cols());
        for r in 0..first.rows() {
            let mut b = first.bias()[r];
            for c in 0..first.cols() {
                let w = first.weight(r, c) / self.std[c];
                folded.set_weight(r, c, w);
                b -= w * self.mean[c];
            }
            folded.set_bias(r, b);
        }
        let mut layers = vec![folded];
        layers.extend((2..=net.depth()).map(|l| net.dense(l).clone()));
        Network::new(layers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansPartition {
    /// Row indices per group; a group can be empty only when the data has
    /// fewer distinct points than groups.
    pub groups: Vec<Vec<usize>>,
    /// Centroids in standardized non-protected feature space.
    pub centroids: Vec<Vec<f64>>,
}

impl KMeansPartition {
    /// Uniformly picks a non-empty group, then a row inside it.
    pub fn pick_seed(&self, rng: &mut impl Rng) -> usize {
        let non_empty: Vec<&Vec<usize>> = self.groups.iter().filter(|g| !g.is_empty()).collect();
        assert!(!non_empty.is_empty(), "partition has no rows");
        let group = non_empty[rng.gen_range(0..non_empty.len())];
        group[rng.gen_range(0..group.len())]
    }
}

const KMEANS_MAX_ITERS: usize = 300;

/// Lloyd's iteration over standardized non-protected features.
pub fn kmeans_partition(data: &Dataset, schema: &AttributeSchema, p: usize, seed: u64) -> Result<KMeansPartition> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if p == 0 || p > data.len() {
        return Err(Error::Config(format!(
            "partition count {p} must be in 1..={}",
            data.len()
        )));
    }
    let scaler = Standardizer::fit(data, schema)?;
    let points: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| {
            let z = scaler.transform(r);
            schema.non_protected.iter().map(|&c| z[c]).collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (assign, centroids) = lloyd(&points, p, &mut rng);
    let mut groups = vec![Vec::new(); p];
    for (i, &g) in assign.iter().enumerate() {
        groups[g].push(i);
    }
    Ok(KMeansPartition { groups, centroids })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub(crate) fn lloyd(points: &[Vec<f64>], p: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<Vec<f64>>) {
    let dim = points[0].len();
    let mut centroids: Vec<Vec<f64>> = sample(rng, points.len(), p)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        let mut dist = vec![0.0; points.len()];
        for (i, pt) in points.iter().enumerate() {
            let (c, d) = nearest(pt, &centroids);
            dist[i] = d;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        // re-seed empty clusters from the farthest points
        let mut counts = vec![0usize; p];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..p {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| counts[assign[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[assign[i]] -= 1;
                assign[i] = c;
                counts[c] = 1;
                dist[i] = 0.0;
                centroids[c] = points[i].clone();
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; p];
        for (pt, &a) in points.iter().zip(&assign) {
            for (s, v) in sums[a].iter_mut().zip(pt) {
                *s += v;
            }
        }
        for c in 0..p {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    (assign, centroids)
}
