use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::geometry::Pose;
use crate::parser::{Evaluation, HypothesisSet};
use crate::physics::{simulate_world, SimContext, World};
use crate::{Error, ObjectId, Result};

/// Largest number of combinations the exhaustive search accepts.
pub const ORACLE_GUARD: u128 = 10_000;

fn combination(hyps: &HypothesisSet, mut index: usize) -> BTreeMap<ObjectId, Pose> {
    // Mixed radix with the last object varying fastest.
    let mut out = BTreeMap::new();
    for (id, e) in hyps.objects.iter().rev() {
        let k = e.hypotheses.len();
        out.insert(id.clone(), e.hypotheses[index % k].pose);
        index /= k;
    }
    out
}

/// Simulates and scores every full combination of hypotheses and returns the
/// best one (ties to the lowest combination index).
pub fn exhaustive_oracle(hyps: &HypothesisSet, base_world: &World, ctx: &SimContext, parallel: bool) -> Result<Evaluation> {
    if let Some((id, _)) = hyps.objects.iter().find(|(_, e)| e.hypotheses.is_empty()) {
        return Err(Error::NoHypotheses(id.clone()));
    }
    let size = hyps.search_size();
    if size > ORACLE_GUARD {
        return Err(Error::SearchTooLarge(size, ORACLE_GUARD));
    }
    let run = |i: usize| -> Result<Evaluation> {
        let configuration = combination(hyps, i);
        let mut w = base_world.clone();
        for (id, pose) in &configuration {
            w.add_body(id.clone(), hyps.objects[id].model.clone(), *pose)?;
        }
        let (world, score) = simulate_world(&w, ctx)?;
        Ok(Evaluation { world, score, configuration })
    };
    let n = size as usize;
    let results: Vec<Result<Evaluation>> = if parallel { (0..n).into_par_iter().map(run).collect() } else { (0..n).map(run).collect() };
    let mut best: Option<Evaluation> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.score.log_prob > b.score.log_prob) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one combination"))
}
