//! Runtime measurements per execution and least-squares scaling slopes.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{align_execution, AlignError, AlignOptions, Aligned};
use crate::model::ProcessExecution;
use crate::petri::AcceptingNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub execution: usize,
    pub num_events: usize,
    pub num_objects: usize,
    pub visible_cost: Option<u64>,
    pub silent_cost: Option<u64>,
    pub status: String,
    pub expanded_states: Option<usize>,
    pub elapsed_secs: f64,
}

/// Aligns one execution `repeats` times and keeps the fastest wall time.
pub fn bench_execution(
    index: usize,
    px: &ProcessExecution,
    an: &AcceptingNet,
    opts: &AlignOptions,
    repeats: usize,
) -> BenchRecord {
    let mut best = f64::INFINITY;
    let mut outcome = None;
    for _ in 0..repeats.max(1) {
        let started = Instant::now();
        let r = align_execution(px, an, opts);
        best = best.min(started.elapsed().as_secs_f64());
        outcome = Some(r);
    }
    record(index, px, &outcome.expect("at least one run"), best)
}

/// The record of one finished alignment attempt.
pub fn record(index: usize, px: &ProcessExecution, outcome: &Result<Aligned, AlignError>, elapsed_secs: f64) -> BenchRecord {
    let mut rec = BenchRecord {
        execution: index,
        num_events: px.num_events(),
        num_objects: px.num_objects(),
        visible_cost: None,
        silent_cost: None,
        status: String::new(),
        expanded_states: None,
        elapsed_secs,
    };
    match outcome {
        Ok(a) => {
            rec.visible_cost = Some(a.cost.visible);
            rec.silent_cost = Some(a.cost.silent);
            rec.expanded_states = Some(a.stats.expanded_states);
            rec.status = "ok".into();
        }
        Err(e) if e.is_unalignable() => rec.status = "unalignable".into(),
        Err(e) if e.is_resource_cap() => rec.status = "cap".into(),
        Err(_) => rec.status = "error".into(),
    }
    rec
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(raw: &[u8]) -> csv::Result<Vec<BenchRecord>> {
    csv::Reader::from_reader(raw).deserialize().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slopes {
    /// Slope of ln(elapsed) against the number of events.
    pub events: Option<f64>,
    /// Slope of ln(elapsed) against the number of objects.
    pub objects: Option<f64>,
    /// Slope of ln(elapsed) against visible cost, pooled within groups of
    /// equal event count.
    pub cost_within_events: Option<f64>,
    pub samples: usize,
}

/// Ordinary least-squares slope; `None` without variance in `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope after removing group means from both coordinates.
pub fn pooled_within_slope(groups: &[Vec<(f64, f64)>]) -> Option<f64> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for g in groups.iter().filter(|g| !g.is_empty()) {
        let n = g.len() as f64;
        let mx = g.iter().map(|p| p.0).sum::<f64>() / n;
        let my = g.iter().map(|p| p.1).sum::<f64>() / n;
        sxx += g.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        sxy += g.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Scaling slopes over the successfully aligned records.
pub fn slopes(records: &[BenchRecord]) -> Slopes {
    let ok: Vec<&BenchRecord> = records
        .iter()
        .filter(|r| r.status == "ok" && r.elapsed_secs > 0.0)
        .collect();
    let pts = |f: &dyn Fn(&BenchRecord) -> f64| -> Vec<(f64, f64)> {
        ok.iter().map(|r| (f(r), r.elapsed_secs.ln())).collect()
    };
    let mut groups: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = Default::default();
    for r in &ok {
        groups
            .entry(r.num_events)
            .or_default()
            .push((r.visible_cost.unwrap_or(0) as f64, r.elapsed_secs.ln()));
    }
    Slopes {
        events: ols_slope(&pts(&|r| r.num_events as f64)),
        objects: ols_slope(&pts(&|r| r.num_objects as f64)),
        cost_within_events: pooled_within_slope(&groups.into_values().collect::<Vec<_>>()),
        samples: ok.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|x| (x as f64, 3.0 * x as f64 - 2.0)).collect();
        assert!((ols_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(ols_slope(&[(1.0, 2.0), (1.0, 5.0)]), None);
        assert_eq!(ols_slope(&[(1.0, 2.0)]), None);
    }

    #[test]
    fn pooled_slope_ignores_group_offsets() {
        // Two groups with slope 2 and very different intercepts; the plain
        // regression over all points would be dominated by the offset.
        let g1: Vec<(f64, f64)> = (0..5).map(|x| (x as f64, 2.0 * x as f64 + 100.0)).collect();
        let g2: Vec<(f64, f64)> = (5..10).map(|x| (x as f64, 2.0 * x as f64 - 100.0)).collect();
        assert!((pooled_within_slope(&[g1.clone(), g2.clone()]).unwrap() - 2.0).abs() < 1e-12);
        let all: Vec<_> = g1.into_iter().chain(g2).collect();
        assert!(ols_slope(&all).unwrap() < 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            BenchRecord {
                execution: 0,
                num_events: 3,
                num_objects: 2,
                visible_cost: Some(1),
                silent_cost: Some(0),
                status: "ok".into(),
                expanded_states: Some(17),
                elapsed_secs: 0.25,
            },
            BenchRecord {
                execution: 1,
                num_events: 1,
                num_objects: 1,
                visible_cost: None,
                silent_cost: None,
                status: "unalignable".into(),
                expanded_states: None,
                elapsed_secs: 0.5,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "execution,num_events,num_objects,visible_cost,silent_cost,status,expanded_states,elapsed_secs\n"
        ));
        assert_eq!(read_csv(&buf).unwrap(), recs);
    }
}
