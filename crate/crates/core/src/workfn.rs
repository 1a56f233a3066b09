//! Work functions as dense exact tables over all canonical k-point
//! configurations: construction, update, support, minimizers, extended cost,
//! duality, and the quasiconvexity machinery.

use crate::metric::{all_configurations, matching_distance, Configuration, MetricSpace, PointId};
use crate::{Dist, Error, Result};
use rand::Rng;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

/// Do not materialize configuration-distance matrices above this many
/// configurations (memory guard); fall back to per-pair matching.
const DIST_MATRIX_LIMIT: usize = 2048;

/// All canonical k-point configurations over a metric space, with ranking
/// and a lazily built configuration-distance matrix. Shared immutable
/// context for every work function on the same `(space, k)`.
pub struct ConfigSpace {
    space: Arc<MetricSpace>,
    k: usize,
    configs: Vec<Configuration>,
    dist_matrix: OnceLock<Option<Vec<Dist>>>,
}

impl ConfigSpace {
    pub fn new(space: Arc<MetricSpace>, k: usize) -> Arc<ConfigSpace> {
        assert!(k >= 1, "k must be positive");
        let configs = all_configurations(space.len(), k);
        Arc::new(ConfigSpace {
            space,
            k,
            configs,
            dist_matrix: OnceLock::new(),
        })
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<MetricSpace> {
        Arc::clone(&self.space)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config(&self, idx: usize) -> &Configuration {
        &self.configs[idx]
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn rank(&self, c: &Configuration) -> usize {
        debug_assert_eq!(c.k(), self.k);
        let r = c.rank();
        debug_assert_eq!(&self.configs[r], c);
        r
    }

    fn matrix(&self) -> Option<&Vec<Dist>> {
        self.dist_matrix
            .get_or_init(|| {
                if self.configs.len() > DIST_MATRIX_LIMIT {
                    return None;
                }
                let n = self.configs.len();
                let mut m = vec![0; n * n];
                for i in 0..n {
                    for j in i + 1..n {
                        let d = matching_distance(&self.configs[i], &self.configs[j], &self.space)
                            .expect("equal sizes");
                        m[i * n + j] = d;
                        m[j * n + i] = d;
                    }
                }
                Some(m)
            })
            .as_ref()
    }

    /// Matching distance between configurations by index.
    pub fn config_dist(&self, i: usize, j: usize) -> Dist {
        match self.matrix() {
            Some(m) => m[i * self.configs.len() + j],
            None => matching_distance(&self.configs[i], &self.configs[j], &self.space)
                .expect("equal sizes"),
        }
    }

    /// Sum of distances from every member of configuration `idx` to `y`,
    /// i.e. the matching distance to the multiset `y^k`.
    pub fn dist_to_point_pow(&self, idx: usize, y: PointId) -> Dist {
        self.configs[idx]
            .members()
            .iter()
            .map(|&x| self.space.d(x, y))
            .sum()
    }

    /// Indices of all configurations containing `p`.
    pub fn containing(&self, p: PointId) -> Vec<usize> {
        self.configs
            .iter()
            .enumerate()
            .filter_map(|(i, c)| if c.contains(p) { Some(i) } else { None })
            .collect()
    }
}

impl std::fmt::Debug for ConfigSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConfigSpace")
            .field("n", &self.space.len())
            .field("k", &self.k)
            .field("configs", &self.configs.len())
            .finish()
    }
}

/// Provenance of a work function table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Generated from a cone by request updates.
    Reachable,
    /// Ingested table of unknown provenance.
    Unverified,
}

/// A dense work function: one exact value per canonical configuration.
/// Immutable; `update` returns a fresh value.
#[derive(Clone)]
pub struct WorkFunction {
    cs: Arc<ConfigSpace>,
    values: Vec<Dist>,
    last_request: Option<PointId>,
    origin: Origin,
    support: OnceLock<Vec<u32>>,
}

/// Support configurations with their values. No member is supported by
/// another member, and the work function is recovered exactly as the min of
/// `value + matching distance` over the entries.
#[derive(Debug, Clone)]
pub struct SupportSet {
    pub entries: Vec<(Configuration, Dist)>,
}

impl SupportSet {
    pub fn configs(&self) -> impl Iterator<Item = &Configuration> {
        self.entries.iter().map(|(c, _)| c)
    }
}

impl WorkFunction {
    /// The cone at `origin_config`: `w(X) = d(C0, X)`, support `{C0}`.
    pub fn cone(cs: &Arc<ConfigSpace>, origin_config: &Configuration) -> Result<WorkFunction> {
        if origin_config.k() != cs.k() {
            return Err(Error::SizeMismatch {
                expected: cs.k(),
                got: origin_config.k(),
            });
        }
        let values = cs
            .configs()
            .iter()
            .map(|c| matching_distance(origin_config, c, cs.space()))
            .collect::<Result<Vec<_>>>()?;
        Ok(WorkFunction {
            cs: Arc::clone(cs),
            values,
            last_request: None,
            origin: Origin::Reachable,
            support: OnceLock::new(),
        })
    }

    /// Wraps an explicit table. The table is validated for shape only; its
    /// origin is flagged `Unverified`.
    pub fn from_table(cs: &Arc<ConfigSpace>, values: Vec<Dist>) -> Result<WorkFunction> {
        if values.len() != cs.len() {
            return Err(Error::SizeMismatch {
                expected: cs.len(),
                got: values.len(),
            });
        }
        Ok(WorkFunction {
            cs: Arc::clone(cs),
            values,
            last_request: None,
            origin: Origin::Unverified,
            support: OnceLock::new(),
        })
    }

    pub(crate) fn from_parts(
        cs: Arc<ConfigSpace>,
        values: Vec<Dist>,
        last_request: Option<PointId>,
        origin: Origin,
    ) -> WorkFunction {
        WorkFunction {
            cs,
            values,
            last_request,
            origin,
            support: OnceLock::new(),
        }
    }

    pub fn config_space(&self) -> &Arc<ConfigSpace> {
        &self.cs
    }

    pub fn space(&self) -> &MetricSpace {
        self.cs.space()
    }

    pub fn k(&self) -> usize {
        self.cs.k()
    }

    pub fn values(&self) -> &[Dist] {
        &self.values
    }

    #[inline]
    pub fn value(&self, idx: usize) -> Dist {
        self.values[idx]
    }

    pub fn value_of(&self, c: &Configuration) -> Dist {
        self.values[self.cs.rank(c)]
    }

    pub fn last_request(&self) -> Option<PointId> {
        self.last_request
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn min_value(&self) -> Dist {
        *self.values.iter().min().expect("nonempty table")
    }

    pub fn argmin(&self) -> Vec<usize> {
        let m = self.min_value();
        (0..self.values.len())
            .filter(|&i| self.values[i] == m)
            .collect()
    }

    /// Serves request `r`: `w'(C) = min over x in C of w(C - x + r) + d(x, r)`,
    /// which equals `min over X containing r of w(X) + d(X, C)` for
    /// 1-Lipschitz tables. The result is pointwise >= the input and agrees
    /// with it on configurations containing `r`.
    pub fn update(&self, r: PointId) -> Result<WorkFunction> {
        if r >= self.space().len() {
            return Err(Error::UnknownPoint(format!("point id {r}")));
        }
        let cs = &self.cs;
        let mut values = Vec::with_capacity(self.values.len());
        for c in cs.configs() {
            let mut best = Dist::MAX;
            for x in c.distinct() {
                let cand = self.values[c.replaced(x, r).rank()] + self.space().d(x, r);
                best = best.min(cand);
            }
            values.push(best);
        }
        Ok(WorkFunction {
            cs: Arc::clone(cs),
            values,
            last_request: Some(r),
            origin: self.origin,
            support: OnceLock::new(),
        })
    }

    /// The defining update rule, scanning all configurations containing `r`.
    /// Slower than `update`; kept as the independent route for the
    /// equivalence check between the two formulas.
    pub fn update_by_definition(&self, r: PointId) -> Result<WorkFunction> {
        if r >= self.space().len() {
            return Err(Error::UnknownPoint(format!("point id {r}")));
        }
        let cs = &self.cs;
        let holders = cs.containing(r);
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..cs.len() {
            let best = holders
                .iter()
                .map(|&h| self.values[h] + cs.config_dist(h, i))
                .min()
                .expect("nonempty");
            values.push(best);
        }
        Ok(WorkFunction {
            cs: Arc::clone(cs),
            values,
            last_request: Some(r),
            origin: self.origin,
            support: OnceLock::new(),
        })
    }

    /// Applies a request sequence in order.
    pub fn update_seq(&self, requests: &[PointId]) -> Result<WorkFunction> {
        let mut w = self.clone();
        for &r in requests {
            w = w.update(r)?;
        }
        Ok(w)
    }

    /// Indices of support configurations: those not supported by any other
    /// configuration at positive distance.
    pub fn support_indices(&self) -> &[u32] {
        self.support.get_or_init(|| {
            let n = self.values.len();
            let mut out = Vec::new();
            'outer: for i in 0..n {
                for j in 0..n {
                    if j != i {
                        let d = self.cs.config_dist(i, j);
                        if d > 0 && self.values[i] == self.values[j] + d {
                            continue 'outer;
                        }
                    }
                }
                out.push(i as u32);
            }
            out
        })
    }

    pub fn support(&self) -> SupportSet {
        SupportSet {
            entries: self
                .support_indices()
                .iter()
                .map(|&i| (self.cs.config(i as usize).clone(), self.values[i as usize]))
                .collect(),
        }
    }

    /// Evaluates the reconstruction `min over support of value + distance`.
    pub fn eval_from_support(&self, idx: usize) -> Dist {
        self.support_indices()
            .iter()
            .map(|&s| self.values[s as usize] + self.cs.config_dist(s as usize, idx))
            .min()
            .expect("nonempty support")
    }

    /// A violating pair `(X, Y)` with `w(X) - w(Y) > d(X, Y)`, if any.
    pub fn lipschitz_witness(&self) -> Option<(Configuration, Configuration)> {
        let n = self.values.len();
        for i in 0..n {
            for j in 0..n {
                if self.values[i] - self.values[j] > self.cs.config_dist(i, j) {
                    return Some((self.cs.config(i).clone(), self.cs.config(j).clone()));
                }
            }
        }
        None
    }

    pub fn is_lipschitz(&self) -> bool {
        self.lipschitz_witness().is_none()
    }

    /// A pair of configurations violating quasiconvexity, if any: for every
    /// `X, Y` some bijection `mu: X -> Y` must satisfy
    /// `w(X) + w(Y) >= w(A + mu(X - A)) + w(mu(A) + (X - A))` for all
    /// `A subset of X`. Bijections fixing the common part of X and Y
    /// pointwise are tried first; a failure report requires exhausting all
    /// bijections.
    pub fn quasiconvex_witness(&self) -> Result<Option<(Configuration, Configuration)>> {
        let k = self.k();
        if k > 5 {
            return Err(Error::UnsupportedK {
                k,
                why: "quasiconvexity certification enumerates k! bijections".into(),
            });
        }
        let n = self.values.len();
        for i in 0..n {
            for j in i + 1..n {
                if !self.pair_quasiconvex(i, j) {
                    return Ok(Some((self.cs.config(i).clone(), self.cs.config(j).clone())));
                }
            }
        }
        Ok(None)
    }

    pub fn is_quasiconvex(&self) -> Result<bool> {
        Ok(self.quasiconvex_witness()?.is_none())
    }

    fn pair_quasiconvex(&self, i: usize, j: usize) -> bool {
        let k = self.k();
        let x = self.cs.config(i).members().to_vec();
        let y = self.cs.config(j).members().to_vec();
        let target = self.values[i] + self.values[j];
        let max_fixed = multiset_overlap(&x, &y);
        let mut perm: Vec<usize> = (0..k).collect();
        for restricted in [true, false] {
            let mut found = false;
            for_each_perm(&mut perm, 0, &mut |p| {
                if found {
                    return;
                }
                if restricted {
                    let fixed = (0..k).filter(|&t| x[t] == y[p[t]]).count();
                    if fixed < max_fixed {
                        return;
                    }
                }
                if self.exchange_ok(&x, &y, p, target) {
                    found = true;
                }
            });
            if found {
                return true;
            }
        }
        false
    }

    fn exchange_ok(&self, x: &[PointId], y: &[PointId], p: &[usize], target: Dist) -> bool {
        let k = x.len();
        let mut left = Vec::with_capacity(k);
        let mut right = Vec::with_capacity(k);
        for mask in 0..(1usize << k) {
            left.clear();
            right.clear();
            for t in 0..k {
                if mask & (1 << t) != 0 {
                    left.push(x[t]);
                    right.push(y[p[t]]);
                } else {
                    left.push(y[p[t]]);
                    right.push(x[t]);
                }
            }
            let l = Configuration::new(left.clone()).rank();
            let r = Configuration::new(right.clone()).rank();
            if target < self.values[l] + self.values[r] {
                return false;
            }
        }
        true
    }

    /// The set of minimizers of `w` with respect to `y`:
    /// `argmin over X of w(X) - d(y^k, X)`.
    pub fn minimizers(&self, y: PointId) -> Vec<Configuration> {
        let scores: Vec<Dist> = (0..self.values.len())
            .map(|i| self.values[i] - self.cs.dist_to_point_pow(i, y))
            .collect();
        let best = *scores.iter().min().expect("nonempty");
        scores
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| {
                if s == best {
                    Some(self.cs.config(i).clone())
                } else {
                    None
                }
            })
            .collect()
    }

    /// Extended cost of request `r`: `max over X of (w ∧ r)(X) - w(X)`.
    pub fn extended_cost(&self, r: PointId) -> Result<Dist> {
        let updated = self.update(r)?;
        Ok(extended_cost_between(self, &updated))
    }

    /// Exact equality test `w(X) = w(X - x + y) + d(x, y)` ("X resolves from
    /// x to y").
    pub fn resolves_from(&self, x_cfg: &Configuration, x: PointId, y: PointId) -> Result<bool> {
        if !x_cfg.contains(x) {
            return Err(Error::UnknownPoint(format!(
                "{} is not a member of the configuration",
                self.space().label(x)
            )));
        }
        let other = x_cfg.replaced(x, y);
        Ok(self.value_of(x_cfg) == self.value_of(&other) + self.space().d(x, y))
    }

    /// Normalized table (minimum subtracted); used for shift-invariant
    /// deduplication of reachable work functions.
    pub fn normalized_values(&self) -> Vec<Dist> {
        let m = self.min_value();
        self.values.iter().map(|&v| v - m).collect()
    }

    /// Serializes as the dump format: header, then one
    /// `<config labels> <scaled value>` line per configuration in canonical
    /// order.
    pub fn dump(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "wf 1")?;
        writeln!(out, "space {:016x}", self.space().fingerprint())?;
        writeln!(out, "k {}", self.k())?;
        writeln!(out, "scale {}", self.space().scale())?;
        match self.last_request {
            Some(r) => writeln!(out, "last {}", self.space().label(r))?,
            None => writeln!(out, "last -")?,
        }
        let origin = match self.origin {
            Origin::Reachable => "reachable",
            Origin::Unverified => "unverified",
        };
        writeln!(out, "origin {origin}")?;
        for (i, c) in self.cs.configs().iter().enumerate() {
            writeln!(out, "{} {}", c.display(self.space()), self.values[i])?;
        }
        Ok(())
    }

    /// Loads a dump produced by [`WorkFunction::dump`], validating the space
    /// fingerprint, the canonical order, and 1-Lipschitzness.
    pub fn load(cs: &Arc<ConfigSpace>, input: &mut impl BufRead) -> Result<WorkFunction> {
        let mut header: HashMap<String, String> = HashMap::new();
        let mut values = Vec::with_capacity(cs.len());
        let mut last: Option<PointId> = None;
        let mut origin = Origin::Unverified;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (key, rest) = t.split_once(' ').unwrap_or((t, ""));
            if header.len() < 6 {
                match key {
                    "wf" | "space" | "k" | "scale" | "last" | "origin" => {
                        header.insert(key.to_string(), rest.trim().to_string());
                        continue;
                    }
                    _ => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            msg: "incomplete header".into(),
                        })
                    }
                }
            }
            if values.is_empty() {
                // validate header once, before the first body line
                let expect = |key: &str| -> Result<String> {
                    header.get(key).cloned().ok_or(Error::Parse {
                        line: 0,
                        msg: format!("missing '{key}'"),
                    })
                };
                let fp = u64::from_str_radix(&expect("space")?, 16).map_err(|_| Error::Parse {
                    line: 0,
                    msg: "bad space fingerprint".into(),
                })?;
                if fp != cs.space().fingerprint() {
                    return Err(Error::Parse {
                        line: 0,
                        msg: "dump was computed on a different space".into(),
                    });
                }
                let k: usize = expect("k")?.parse().map_err(|_| Error::Parse {
                    line: 0,
                    msg: "bad k".into(),
                })?;
                if k != cs.k() {
                    return Err(Error::SizeMismatch {
                        expected: cs.k(),
                        got: k,
                    });
                }
                let last_txt = expect("last")?;
                if last_txt != "-" {
                    last = Some(cs.space().point_by_name(&last_txt)?);
                }
                if expect("origin")? == "reachable" {
                    origin = Origin::Reachable;
                }
            }
            let (cfg_txt, val_txt) = t.split_once(' ').ok_or(Error::Parse {
                line: idx + 1,
                msg: "expected '<config> <value>'".into(),
            })?;
            let members = cfg_txt
                .split(',')
                .map(|name| cs.space().point_by_name(name))
                .collect::<Result<Vec<_>>>()?;
            let cfg = Configuration::new(members);
            if cs.rank(&cfg) != values.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "configurations out of canonical order".into(),
                });
            }
            let v: Dist = val_txt.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: "bad value".into(),
            })?;
            values.push(v);
        }
        if values.len() != cs.len() {
            return Err(Error::SizeMismatch {
                expected: cs.len(),
                got: values.len(),
            });
        }
        let w = WorkFunction {
            cs: Arc::clone(cs),
            values,
            last_request: last,
            origin,
            support: OnceLock::new(),
        };
        if let Some((a, b)) = w.lipschitz_witness() {
            return Err(Error::InvalidMetric(format!(
                "table is not 1-Lipschitz on ({}, {})",
                a.display(w.space()),
                b.display(w.space())
            )));
        }
        Ok(w)
    }
}

impl std::fmt::Debug for WorkFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkFunction")
            .field("k", &self.k())
            .field("n", &self.space().len())
            .field("last_request", &self.last_request)
            .field("min", &self.min_value())
            .finish()
    }
}

/// `max over X of after(X) - before(X)`.
pub fn extended_cost_between(before: &WorkFunction, after: &WorkFunction) -> Dist {
    before
        .values
        .iter()
        .zip(&after.values)
        .map(|(b, a)| a - b)
        .max()
        .expect("nonempty")
}

fn for_each_perm(arr: &mut Vec<usize>, at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == arr.len() {
        visit(arr);
        return;
    }
    for i in at..arr.len() {
        arr.swap(at, i);
        for_each_perm(arr, at + 1, visit);
        arr.swap(at, i);
    }
}

fn multiset_overlap(x: &[PointId], y: &[PointId]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < x.len() && j < y.len() {
        if x[i] == y[j] {
            c += 1;
            i += 1;
            j += 1;
        } else if x[i] < y[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    c
}

/// Duality check for `(w, r)`: the minimizers `argmin w(X) - d(r^k, X)`
/// must coincide exactly with the set of configurations that both maximize
/// `w'(X) - w(X)` and minimize `w'(X) - d(r^k, X)`, where `w' = w ∧ r`.
pub fn check_duality(w: &WorkFunction, r: PointId) -> Result<bool> {
    let updated = w.update(r)?;
    let n = w.values.len();
    let cs = w.config_space();
    let dyk: Vec<Dist> = (0..n).map(|i| cs.dist_to_point_pow(i, r)).collect();

    let min_before = (0..n).map(|i| w.values[i] - dyk[i]).min().unwrap();
    let set_before: Vec<usize> = (0..n)
        .filter(|&i| w.values[i] - dyk[i] == min_before)
        .collect();

    let max_gain = (0..n)
        .map(|i| updated.values[i] - w.values[i])
        .max()
        .unwrap();
    let min_after = (0..n).map(|i| updated.values[i] - dyk[i]).min().unwrap();
    let set_both: Vec<usize> = (0..n)
        .filter(|&i| {
            updated.values[i] - w.values[i] == max_gain && updated.values[i] - dyk[i] == min_after
        })
        .collect();

    Ok(set_before == set_both)
}

/// For every global argmin `X` and every `x` in `X`, some
/// `Y in argmin over configurations avoiding x` must include the members of
/// `X` other than `x`. All copies of `x` are removed from the inclusion
/// requirement, since a configuration avoiding `x` cannot contain one; on
/// sets this is the plain `X - x` subset condition.
/// Returns a violating `(X, x)` if any.
pub fn quasi_min_witness(w: &WorkFunction) -> Option<(Configuration, PointId)> {
    let cs = w.config_space();
    for &xi in &w.argmin() {
        let x_cfg = cs.config(xi).clone();
        let members: Vec<PointId> = x_cfg.distinct().collect();
        for x in members {
            let rest = Configuration::new(
                x_cfg
                    .members()
                    .iter()
                    .copied()
                    .filter(|&p| p != x)
                    .collect(),
            );
            let avoiding: Vec<usize> = (0..cs.len())
                .filter(|&i| !cs.config(i).contains(x))
                .collect();
            if avoiding.is_empty() {
                continue;
            }
            let best = avoiding.iter().map(|&i| w.value(i)).min().unwrap();
            let ok = avoiding
                .iter()
                .any(|&i| w.value(i) == best && cs.config(i).includes(&rest));
            if !ok {
                return Some((x_cfg, x));
            }
        }
    }
    None
}

/// For every global argmin `X` and every multiset `A` with `|A| < k`, some
/// `Y in argmin over configurations including A` must satisfy
/// `Y - A included in X - A` (saturating multiset difference).
pub fn quasi_sub_witness(w: &WorkFunction) -> Option<(Configuration, Configuration)> {
    let cs = w.config_space();
    let n = cs.space().len();
    let k = cs.k();
    for &xi in &w.argmin() {
        let x_cfg = cs.config(xi).clone();
        for a_size in 1..k {
            for a in all_configurations(n, a_size) {
                let holders: Vec<usize> = (0..cs.len())
                    .filter(|&i| cs.config(i).includes(&a))
                    .collect();
                let best = holders.iter().map(|&i| w.value(i)).min().unwrap();
                let x_rest = saturating_minus(&x_cfg, &a);
                let ok = holders.iter().any(|&i| {
                    w.value(i) == best && x_rest.includes(&saturating_minus(cs.config(i), &a))
                });
                if !ok {
                    return Some((x_cfg, a));
                }
            }
        }
    }
    None
}

fn saturating_minus(c: &Configuration, a: &Configuration) -> Configuration {
    let mut rest = c.members().to_vec();
    for &p in a.members() {
        if let Some(i) = rest.iter().position(|&q| q == p) {
            rest.remove(i);
        }
    }
    Configuration::new(rest)
}

/// Single greedy pass from `start`: each slot in turn is replaced by the
/// best alternative. For quasiconvex tables this reaches a global argmin.
pub fn greedy_min(w: &WorkFunction, start: &Configuration) -> Configuration {
    let n = w.space().len();
    let mut cur = start.members().to_vec();
    for slot in 0..cur.len() {
        let mut best_p = cur[slot];
        let mut best_v = Dist::MAX;
        for y in 0..n {
            let mut cand = cur.clone();
            cand[slot] = y;
            let v = w.value_of(&Configuration::new(cand));
            if v < best_v {
                best_v = v;
                best_p = y;
            }
        }
        cur[slot] = best_p;
    }
    Configuration::new(cur)
}

/// If `X` resolves from `x` to the last request, then `X - y + x` also
/// resolves from `x`. Returns a violating `(X, x, y)` if any.
pub fn resolve_monotone_witness(
    w: &WorkFunction,
) -> Result<Option<(Configuration, PointId, PointId)>> {
    let r = w.last_request().ok_or(Error::InvalidMetric(
        "resolve-monotonicity needs a last request".into(),
    ))?;
    let cs = w.config_space();
    for i in 0..cs.len() {
        let x_cfg = cs.config(i);
        for x in x_cfg.distinct() {
            if !w.resolves_from(x_cfg, x, r)? {
                continue;
            }
            for y in x_cfg.distinct() {
                if y == x {
                    continue;
                }
                let swapped = x_cfg.replaced(y, x);
                if !w.resolves_from(&swapped, x, r)? {
                    return Ok(Some((x_cfg.clone(), x, y)));
                }
            }
        }
    }
    Ok(None)
}

/// A reachable work function: a cone over original points followed by a
/// random number of random requests at original points.
pub fn random_reachable(
    cs: &Arc<ConfigSpace>,
    rng: &mut impl Rng,
    steps: std::ops::Range<usize>,
) -> Result<WorkFunction> {
    let originals: Vec<PointId> = cs.space().original_points().collect();
    let members: Vec<PointId> = (0..cs.k())
        .map(|_| originals[rng.random_range(0..originals.len())])
        .collect();
    let mut w = WorkFunction::cone(cs, &Configuration::new(members))?;
    let n_steps = rng.random_range(steps);
    for _ in 0..n_steps {
        let r = originals[rng.random_range(0..originals.len())];
        w = w.update(r)?;
    }
    Ok(w)
}

/// Breadth-first closure of reachable work functions under server requests
/// at original points, deduplicated by shift-normalized table. Seeds are all
/// cones over original points. Fails if more than `limit` classes appear.
pub fn reachable_closure(cs: &Arc<ConfigSpace>, limit: usize) -> Result<Vec<WorkFunction>> {
    let originals: Vec<PointId> = cs.space().original_points().collect();
    let mut seen: HashMap<Vec<Dist>, ()> = HashMap::new();
    let mut out: Vec<WorkFunction> = Vec::new();
    let mut queue: Vec<WorkFunction> = Vec::new();
    for members in all_configurations(cs.space().len(), cs.k()) {
        if !members
            .members()
            .iter()
            .all(|&p| p < cs.space().original_len())
        {
            continue;
        }
        let w = WorkFunction::cone(cs, &members)?;
        if seen.insert(w.normalized_values(), ()).is_none() {
            out.push(w.clone());
            queue.push(w);
        }
    }
    while let Some(w) = queue.pop() {
        for &r in &originals {
            let next = w.update(r)?;
            if seen.insert(next.normalized_values(), ()).is_none() {
                if out.len() >= limit {
                    return Err(Error::BudgetExceeded {
                        bound: limit as u64,
                    });
                }
                out.push(next.clone());
                queue.push(next);
            }
        }
    }
    Ok(out)
}
