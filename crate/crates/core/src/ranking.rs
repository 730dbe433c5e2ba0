//! KTA filtering, per-proxy ranking, and the hybrid best-rank / mid-rank
//! aggregate used to select circuits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::proxies::{ProxyKind, ProxyVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    HigherBetter,
    LowerBetter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// Scored by `ln(r / Z)`: the best rank is preferred.
    Best,
    /// Scored by `ln(r (Z + 1 − r) / Z)`: middle ranks are preferred.
    Mid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    pub keep_fraction: f64,
    pub top_k: usize,
    pub best_group: Vec<ProxyKind>,
    pub mid_group: Vec<ProxyKind>,
    /// Overrides of the default higher-is-better direction.
    pub directions: BTreeMap<ProxyKind, Direction>,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            keep_fraction: 0.2,
            top_k: 5,
            best_group: vec![ProxyKind::Concentration, ProxyKind::HwFidelity],
            mid_group: vec![ProxyKind::ExpressivityKl, ProxyKind::Led, ProxyKind::CnotCount, ProxyKind::ParamCount],
            directions: BTreeMap::new(),
        }
    }
}

impl RankingConfig {
    pub fn direction(&self, proxy: ProxyKind) -> Direction {
        self.directions.get(&proxy).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("ranking: {m}")));
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return fail(format!("keep_fraction {} outside (0, 1]", self.keep_fraction));
        }
        if self.top_k == 0 {
            return fail("top_k must be at least 1".into());
        }
        if self.best_group.is_empty() && self.mid_group.is_empty() {
            return fail("no proxies to aggregate".into());
        }
        for p in &self.best_group {
            if self.mid_group.contains(p) {
                return fail(format!("{p} is in both groups"));
            }
        }
        let mut all: Vec<ProxyKind> = self.best_group.iter().chain(&self.mid_group).copied().collect();
        let total = all.len();
        all.sort();
        all.dedup();
        if all.len() != total {
            return fail("a proxy is listed twice".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankColumn {
    pub proxy: ProxyKind,
    pub group: Group,
    pub direction: Direction,
    /// Rank of each candidate, `Z` being best.
    pub ranks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    z: usize,
    columns: Vec<RankColumn>,
}

impl RankTable {
    /// Checks that every column ranks the same `Z` candidates with a
    /// permutation of `1..=Z` and that no proxy sits in both groups.
    pub fn new(columns: Vec<RankColumn>) -> Result<Self> {
        let z = columns.first().map_or(0, |c| c.ranks.len());
        for col in &columns {
            if col.ranks.len() != z {
                return Err(Error::Ranking(format!("{} ranks {} candidates, expected {z}", col.proxy, col.ranks.len())));
            }
            let mut seen = vec![false; z + 1];
            for &r in &col.ranks {
                if r == 0 || r > z || std::mem::replace(&mut seen[r], true) {
                    return Err(Error::Ranking(format!("{} ranks are not a permutation of 1..={z}", col.proxy)));
                }
            }
        }
        for (i, a) in columns.iter().enumerate() {
            if columns[i + 1..].iter().any(|b| b.proxy == a.proxy) {
                return Err(Error::Ranking(format!("{} appears in more than one column", a.proxy)));
            }
        }
        Ok(RankTable { z, columns })
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn columns(&self) -> &[RankColumn] {
        &self.columns
    }

    pub fn ranks_of(&self, candidate: usize) -> BTreeMap<ProxyKind, usize> {
        self.columns.iter().map(|c| (c.proxy, c.ranks[candidate])).collect()
    }
}

/// Ranks `1..=Z` with the best score under `direction` at `Z`. Among equal
/// scores the lower index receives the higher rank.
pub fn assign_ranks(scores: &[f64], direction: Direction) -> Result<Vec<usize>> {
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Ranking(format!("score {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // worst first; within ties the higher index is placed lower
    order.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        let ord = if direction == Direction::HigherBetter { ord } else { ord.reverse() };
        ord.then(b.cmp(&a))
    });
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    Ok(ranks)
}

pub fn rank_term(group: Group, r: usize, z: usize) -> f64 {
    let (r, zf) = (r as f64, z as f64);
    match group {
        Group::Best => (r / zf).ln(),
        Group::Mid => (r * (zf + 1.0 - r) / zf).ln(),
    }
}

/// `s(j) = Σ_best ln(r/Z) + Σ_mid ln(r(Z+1−r)/Z)`.
pub fn aggregate(table: &RankTable) -> Result<Vec<f64>> {
    let z = table.z;
    if z < 2 {
        return Err(Error::Ranking(format!("aggregation needs at least 2 candidates, got {z}")));
    }
    Ok((0..z).map(|j| table.columns.iter().map(|c| rank_term(c.group, c.ranks[j], z)).sum()).collect())
}

/// Indices of the `k` largest scores, best first; ties favor the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::Ranking(format!("k = {k} outside 1..={}", scores.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Ranking(format!("aggregate score {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Positions of the `⌈keep · Z⌉` highest-KTA circuits, ties to the lower id,
/// returned in ascending position order.
pub fn kta_filter_indices(ids: &[u64], kta: &[f64], keep_fraction: f64) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Err(Error::Ranking("cannot filter an empty population".into()));
    }
    if ids.len() != kta.len() {
        return Err(Error::Ranking(format!("{} circuits but {} KTA scores", ids.len(), kta.len())));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Ranking(format!("keep fraction {keep_fraction} outside (0, 1]")));
    }
    if let Some(i) = kta.iter().position(|s| !s.is_finite()) {
        return Err(Error::Ranking(format!("KTA of circuit {} is not finite", ids[i])));
    }
    let keep = survivors(ids.len(), keep_fraction);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| kta[b].total_cmp(&kta[a]).then(ids[a].cmp(&ids[b])));
    order.truncate(keep);
    order.sort_unstable();
    Ok(order)
}

/// `⌈keep · Z⌉`, guarding against float noise such as `0.2 · 150 = 30.000000000000004`.
pub fn survivors(z: usize, keep_fraction: f64) -> usize {
    let exact = keep_fraction * z as f64;
    let rounded = exact.round();
    let n = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (n as usize).clamp(1, z)
}

pub fn kta_filter(population: &[Circuit], kta: &[f64], keep_fraction: f64) -> Result<Vec<Circuit>> {
    let ids: Vec<u64> = population.iter().map(Circuit::id).collect();
    Ok(kta_filter_indices(&ids, kta, keep_fraction)?.into_iter().map(|i| population[i].clone()).collect())
}

/// Builds the rank table for the configured groups over `proxies`, which
/// must be ordered by circuit id.
pub fn build_rank_table(proxies: &[ProxyVector], cfg: &RankingConfig) -> Result<RankTable> {
    let column = |proxy: ProxyKind, group: Group| -> Result<RankColumn> {
        let scores: Vec<f64> = proxies.iter().map(|p| proxy.value(p)).collect();
        let direction = cfg.direction(proxy);
        Ok(RankColumn { proxy, group, direction, ranks: assign_ranks(&scores, direction)? })
    };
    let mut columns = Vec::new();
    for &p in &cfg.best_group {
        columns.push(column(p, Group::Best)?);
    }
    for &p in &cfg.mid_group {
        columns.push(column(p, Group::Mid)?);
    }
    RankTable::new(columns)
}
