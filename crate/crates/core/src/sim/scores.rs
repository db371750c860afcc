//! Matching scores and per-machine completion forecasts.

use crate::cluster::OverbookPolicy;
use crate::resource::{ResourceVector, TOL};

/// Packing alignment of a task with a machine's free resources, scaled by
/// `penalty` (the remote penalty, or 1). Zero when the task does not fit.
pub fn p_score(demand: &ResourceVector, avail: &ResourceVector, penalty: f64) -> f64 {
    if demand.fits_within(avail) {
        avail.dot(demand) * penalty
    } else {
        0.0
    }
}

/// Remaining work of a job: Σ duration × L1(demand) over its pending tasks.
pub fn srpt<'a>(pending: impl IntoIterator<Item = (f64, &'a ResourceVector)>) -> f64 {
    pending.into_iter().map(|(d, r)| d * r.l1()).sum()
}

/// A task already on a machine, as seen by a forecast.
#[derive(Clone, Debug)]
pub struct Occupant {
    /// Work left, in seconds at full rate.
    pub work: f64,
    pub demand: ResourceVector,
}

/// Progress rate of a task with `demand` when the machine's summed nominal
/// demand is `load`.
pub fn rate_for(
    demand: &ResourceVector,
    load: &ResourceVector,
    capacity: &ResourceVector,
    policy: &OverbookPolicy,
) -> f64 {
    let mut rate: f64 = 1.0;
    for d in 0..demand.dims() {
        if demand.get(d) > 0.0 && policy.is_fungible(d) {
            let frac = load.get(d) / capacity.get(d);
            if frac > 1.0 + TOL {
                rate = rate.min(policy.slowdown.rate(frac));
            }
        }
    }
    rate
}

/// Completion time of each occupant (same order) if nothing else arrives.
pub fn forecast(
    now: f64,
    occupants: &[Occupant],
    capacity: &ResourceVector,
    policy: &OverbookPolicy,
) -> Vec<f64> {
    let mut done = vec![f64::INFINITY; occupants.len()];
    let mut work: Vec<f64> = occupants.iter().map(|o| o.work.max(0.0)).collect();
    let mut live: Vec<usize> = (0..occupants.len()).collect();
    let mut t = now;
    while !live.is_empty() {
        let mut load = ResourceVector::zeros(capacity.dims());
        for &i in &live {
            load.add_assign(&occupants[i].demand);
        }
        let rates: Vec<f64> = live
            .iter()
            .map(|&i| rate_for(&occupants[i].demand, &load, capacity, policy))
            .collect();
        let step = live
            .iter()
            .zip(&rates)
            .map(|(&i, r)| work[i] / r)
            .fold(f64::INFINITY, f64::min);
        t += step;
        let mut next = Vec::with_capacity(live.len());
        for (&i, r) in live.iter().zip(&rates) {
            work[i] -= r * step;
            if work[i] <= 1e-12 {
                done[i] = t;
            } else {
                next.push(i);
            }
        }
        live = next;
    }
    done
}

/// Earliest time a task of `demand` fits the machine without overbooking,
/// given its occupants' forecast completions.
pub fn earliest_fit_time(
    now: f64,
    occupants: &[Occupant],
    finish: &[f64],
    demand: &ResourceVector,
    capacity: &ResourceVector,
) -> f64 {
    if !demand.fits_within(capacity) {
        return f64::INFINITY;
    }
    let mut used = ResourceVector::zeros(capacity.dims());
    for o in occupants {
        used.add_assign(&o.demand);
    }
    if demand.plus(&used).fits_within(capacity) {
        return now;
    }
    let mut order: Vec<usize> = (0..occupants.len()).collect();
    order.sort_by(|a, b| finish[*a].total_cmp(&finish[*b]));
    for i in order {
        used.sub_assign(&occupants[i].demand);
        if demand.plus(&used).fits_within(capacity) {
            return finish[i];
        }
    }
    f64::INFINITY
}

/// Benefit minus cost of overbooking a task onto a machine now, or 0 when
/// not worth it.
///
/// `next_opportunity` is when the task could otherwise start without
/// overbooking. The benefit is how much earlier the task finishes; the cost
/// is the total delay inflicted on the machine's current occupants.
pub fn o_score(
    now: f64,
    duration: f64,
    demand: &ResourceVector,
    occupants: &[Occupant],
    next_opportunity: f64,
    capacity: &ResourceVector,
    policy: &OverbookPolicy,
) -> f64 {
    let before = forecast(now, occupants, capacity, policy);
    o_score_given(
        now,
        duration,
        demand,
        occupants,
        &before,
        next_opportunity,
        capacity,
        policy,
    )
}

/// [`o_score`] with the occupants' current forecast supplied.
#[allow(clippy::too_many_arguments)]
pub fn o_score_given(
    now: f64,
    duration: f64,
    demand: &ResourceVector,
    occupants: &[Occupant],
    before: &[f64],
    next_opportunity: f64,
    capacity: &ResourceVector,
    policy: &OverbookPolicy,
) -> f64 {
    if !policy.enabled
        || !next_opportunity.is_finite()
        || !hard_fits(demand, occupants, capacity, policy)
    {
        return 0.0;
    }
    let mut with = occupants.to_vec();
    with.push(Occupant {
        work: duration,
        demand: demand.clone(),
    });
    let after = forecast(now, &with, capacity, policy);
    let benefit = next_opportunity + duration - after[occupants.len()];
    let cost: f64 = before.iter().zip(&after).map(|(b, a)| a - b).sum();
    (benefit - cost).max(0.0)
}

/// Whether the hard dimensions have room for `demand` next to `occupants`.
pub fn hard_fits(
    demand: &ResourceVector,
    occupants: &[Occupant],
    capacity: &ResourceVector,
    policy: &OverbookPolicy,
) -> bool {
    (0..demand.dims())
        .filter(|d| !policy.is_fungible(*d))
        .all(|d| {
            let used: f64 = occupants.iter().map(|o| o.demand.get(d)).sum();
            used + demand.get(d) <= capacity.get(d) + TOL
        })
}
