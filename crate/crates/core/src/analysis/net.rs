use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{closeness_profile, ClosenessProfile, Generator};
use crate::linops::OperatorValue;
use crate::sft::{agreement, bracket, close_orbit, dense_orbit_segment, Point, ShiftMetric, Symbol};

use super::{growth_screen, AnalysisError, PeriodicData, SLACK};

/// Share of ε spent on each of the two error terms `M ε'` and `4 M^2 c δ^β`;
/// the rest is the radius of the final reduction.
const SHARE: f64 = 0.1;

/// Element `P_i ∘ A_z^j` of the net.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetElement {
    pub value: OperatorValue,
    /// Index into [`EpsilonNet::classes`].
    pub class: usize,
    /// Index into the class's `ε'`-net; 0 is the identity.
    pub i: usize,
    pub j: i64,
}

/// `ε'`-net of the periodic values whose periodic point shares the central
/// word `window` (coordinates `|i| < n0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassNet {
    pub window: Vec<Symbol>,
    pub pool_size: usize,
    #[serde(skip)]
    pub elements: Vec<OperatorValue>,
    pub size: usize,
}

/// `min_e d(A_z^n, e) <= ε` over `|n| <= n_test`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    pub tested: usize,
    pub covered: usize,
    /// Largest distance to the nearest element.
    pub worst: f64,
}

impl Coverage {
    pub fn complete(&self) -> bool {
        self.tested > 0 && self.covered == self.tested
    }
}

/// Per-step check `d(A_z^n, P_i ∘ A_z^j) <= M (c' δ^β + ε')` for `|n| > m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Propagation {
    pub checked: usize,
    pub violations: usize,
    /// Largest ratio of distance to bound.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonNet {
    pub eps: f64,
    pub eps_prime: f64,
    /// Largest `|A|`, `|A^-1|` over every value used.
    pub m_bound: f64,
    /// Agreement defining `delta0 = nu^n0`.
    pub n0: u64,
    pub delta0: f64,
    /// Holonomy defect bound at agreement `n0`.
    pub closeness_bound: f64,
    /// `M (4 M bound + ε')`.
    pub propagation_bound: f64,
    /// Greedy reduction radius `ε - propagation_bound`.
    pub reduction_radius: f64,
    pub z: Point,
    pub m: usize,
    pub n_test: usize,
    pub classes: Vec<ClassNet>,
    /// Size of `{P_i ∘ A_z^j}` before reduction.
    pub raw_size: usize,
    pub elements: Vec<NetElement>,
    pub coverage: Coverage,
    pub propagation: Propagation,
}

impl EpsilonNet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Closing of the far orbit point `f^n z` onto the segment: `f^n z` is
/// within `ν^agreement` of `f^j z`, `p` closes the segment of length `k`
/// between them.
struct Closing {
    n: i64,
    j: i64,
    agreement: Option<u64>,
    p: Point,
    /// `A_p^k` for `n > m`, `(A_p^k)^-1` for `n < -m`.
    periodic: OperatorValue,
    /// The same for `x = f^n z` or `f^j z`, whichever starts the segment.
    orbit: OperatorValue,
    /// Largest norm over `A_p^k`, `A_y^k`, `A_x^k`.
    size: f64,
}

fn close(g: &Generator, z: &Point, n: i64, j: i64, agreement: Option<u64>, metric: &ShiftMetric) -> Result<Closing, AnalysisError> {
    let m = g.transition_matrix();
    let (start, k) = if n > j { (j, n - j) } else { (n, j - n) };
    let x = z.shift(start);
    let cert = close_orbit(m, &x, k as usize, metric)?;
    let p = cert.periodic_point;
    let y = bracket(m, &p, &x)?;
    let (a_p, a_y, a_x) = (g.evaluate(&p, k), g.evaluate(&y, k), g.evaluate(&x, k));
    let size = [&a_p, &a_y, &a_x].iter().map(|a| a.max_norm()).fold(0.0, f64::max);
    let (periodic, orbit) = if n > j { (a_p, a_x) } else { (a_p.inverse(), a_x.inverse()) };
    Ok(Closing { n, j, agreement, p, periodic, orbit, size })
}

fn central(p: &Point, n0: u64) -> Vec<Symbol> {
    let r = n0 as i64 - 1;
    p.window(-r, 2 * r as usize + 1)
}

/// Greedy farthest-point `radius`-net of `pool` seeded with the identity;
/// ties go to the earliest element.
fn farthest_point_net(pool: &[OperatorValue], radius: f64, d: usize) -> Vec<OperatorValue> {
    let mut centers = vec![OperatorValue::identity(d)];
    let mut near: Vec<f64> = pool.par_iter().map(|a| a.distance(&centers[0])).collect();
    loop {
        let (idx, far) = near
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if pool.is_empty() || far <= radius {
            return centers;
        }
        let c = pool[idx].clone();
        near.par_iter_mut().zip(pool).for_each(|(nd, a)| *nd = nd.min(a.distance(&c)));
        centers.push(c);
    }
}

/// Smallest `n0` with `4 M^2 bound(n0) <= SHARE ε`.
fn agreement_needed(profile: &ClosenessProfile, m_bound: f64, eps: f64) -> u64 {
    (1..).find(|&n| 4.0 * m_bound * m_bound * profile.bound(n) <= SHARE * eps).expect("bound vanishes beyond the depth")
}

/// Builds `{P_i ∘ A_z^j : |j| <= m}` from the orbit segment `z, m`.
///
/// The `ε'`-nets `P` are taken over the periodic values of `pd` and the
/// periodic values met when closing `f^n z` for `m < |n| <= n_test`
/// (inverses for negative `n`). Each `P_i` is composed only with those
/// `A_z^j` whose base point `f^j z` is `δ0`-close to the periodic points
/// behind `P_i`, the pairs the covering argument uses. The result is reduced
/// greedily at radius `ε - M (4 M c δ0^β + ε')` and checked against every
/// `A_z^n` with `|n| <= n_test`.
pub fn build_epsilon_net(
    g: &Generator,
    eps: f64,
    pd: &PeriodicData,
    z: &Point,
    m: usize,
    n_test: usize,
    metric: &ShiftMetric,
) -> Result<EpsilonNet, AnalysisError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(AnalysisError::BadEpsilon(eps));
    }
    if growth_screen(pd).unbounded {
        return Err(AnalysisError::Unbounded { c_per: pd.c_per, c_prime_per: pd.c_prime_per });
    }
    let d = g.dim();
    let mi = m as i64;
    let reach = n_test.max(m) as i64;
    let products = g.orbit_products(z, -reach, reach);
    let at = |n: i64| &products[(n + reach) as usize];
    let segment: Vec<Point> = (-mi..=mi).map(|j| z.shift(j)).collect();

    let far: Vec<i64> = (-reach..=reach).filter(|n| n.unsigned_abs() as usize > m).collect();
    let closings: Vec<Closing> = far
        .par_iter()
        .map(|&n| {
            let x = z.shift(n);
            let mut best: Option<(i64, Option<u64>)> = None;
            for (j, s) in (-mi..=mi).zip(&segment) {
                let a = agreement(&x, s)?;
                let better = match best {
                    None => true,
                    Some((_, b)) => match (a, b) {
                        (_, None) => false,
                        (None, Some(_)) => true,
                        (Some(a), Some(b)) => a > b,
                    },
                };
                if better {
                    best = Some((j, a));
                }
            }
            let (j, a) = best.expect("nonempty segment");
            if a == Some(0) {
                return Err(AnalysisError::NotDense { len: 1 });
            }
            close(g, z, n, j, a, metric)
        })
        .collect::<Result<_, _>>()?;

    let m_bound = products
        .iter()
        .map(OperatorValue::max_norm)
        .chain(closings.iter().map(|c| c.size))
        .chain(pd.records.iter().map(|r| r.norm.max(r.inv_norm)))
        .fold(1.0, f64::max);
    let profile = closeness_profile(g, metric);
    let n0 = agreement_needed(&profile, m_bound, eps);
    let len = 2 * n0 as usize - 1;
    let mut windows: Vec<Vec<Symbol>> = segment.iter().map(|s| central(s, n0)).collect();
    windows.sort();
    windows.dedup();
    if windows.len() as u128 != g.transition_matrix().count_words(len) {
        return Err(AnalysisError::NotDense { len });
    }
    if closings.iter().any(|c| c.agreement.is_some_and(|a| a < n0)) {
        return Err(AnalysisError::NotDense { len });
    }
    let closeness_bound = profile.bound(n0);
    let eps_prime = SHARE * eps / m_bound;
    let propagation_bound = m_bound * (4.0 * m_bound * closeness_bound + eps_prime);
    let reduction_radius = eps - propagation_bound;

    let mut pools: BTreeMap<Vec<Symbol>, Vec<OperatorValue>> = BTreeMap::new();
    for r in &pd.records {
        let pool = pools.entry(central(&r.point, n0)).or_default();
        pool.push(r.value.clone());
        pool.push(r.value.inverse());
    }
    for c in &closings {
        pools.entry(central(&c.p, n0)).or_default().push(c.periodic.clone());
    }
    let mut classes: Vec<ClassNet> = pools
        .into_par_iter()
        .map(|(window, pool)| {
            let elements = farthest_point_net(&pool, eps_prime, d);
            ClassNet { window, pool_size: pool.len(), size: elements.len(), elements }
        })
        .collect();
    let identity_only = |window: Vec<Symbol>| ClassNet {
        window,
        pool_size: 0,
        elements: vec![OperatorValue::identity(d)],
        size: 1,
    };
    let class_of = |classes: &[ClassNet], w: &[Symbol]| classes.binary_search_by(|c| c.window.as_slice().cmp(w));
    for s in &segment {
        let w = central(s, n0);
        if let Err(pos) = class_of(&classes, &w) {
            classes.insert(pos, identity_only(w));
        }
    }

    let mut raw = Vec::new();
    for (j, s) in (-mi..=mi).zip(&segment) {
        let c = class_of(&classes, &central(s, n0)).expect("every segment class exists");
        for (i, p) in classes[c].elements.iter().enumerate() {
            raw.push(NetElement { value: p.compose(at(j)), class: c, i, j });
        }
    }
    let raw_size = raw.len();
    let mut elements: Vec<NetElement> = Vec::new();
    for e in raw {
        if !elements.par_iter().any(|k| k.value.distance(&e.value) <= reduction_radius) {
            elements.push(e);
        }
    }

    let propagation = closings
        .par_iter()
        .map(|c| {
            let class = &classes[class_of(&classes, &central(&c.p, n0)).expect("closing classes are pooled")];
            let (i, gap) = class
                .elements
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.distance(&c.periodic)))
                .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
            let defect = c.agreement.map_or(0.0, |a| profile.bound(a));
            let bound = m_bound * (4.0 * m_bound * defect + eps_prime);
            let actual = at(c.n).distance(&class.elements[i].compose(at(c.j)));
            let ok = gap <= eps_prime * (1.0 + SLACK)
                && c.orbit.distance(&c.periodic) <= 4.0 * m_bound * defect * (1.0 + SLACK) + SLACK
                && actual <= bound * (1.0 + SLACK) + SLACK;
            (ok, actual / bound)
        })
        .collect::<Vec<_>>();
    let propagation = Propagation {
        checked: propagation.len(),
        violations: propagation.iter().filter(|v| !v.0).count(),
        worst_ratio: propagation.iter().map(|v| v.1).fold(0.0, f64::max),
    };

    let nearest: Vec<f64> = (-(n_test as i64)..=n_test as i64)
        .into_par_iter()
        .map(|n| elements.iter().map(|e| e.value.distance(at(n))).fold(f64::INFINITY, f64::min))
        .collect();
    let coverage = Coverage {
        tested: nearest.len(),
        covered: nearest.iter().filter(|&&v| v <= eps).count(),
        worst: nearest.iter().copied().fold(0.0, f64::max),
    };

    Ok(EpsilonNet {
        eps,
        eps_prime,
        m_bound,
        n0,
        delta0: metric.radius(n0),
        closeness_bound,
        propagation_bound,
        reduction_radius,
        z: z.clone(),
        m,
        n_test,
        classes,
        raw_size,
        elements,
        coverage,
        propagation,
    })
}

/// [`build_epsilon_net`] on the shortest orbit segment from
/// `dense_orbit_segment` that is dense enough, trying word lengths
/// `1, 3, 5, ..` up to one past the generator's depth on each side.
pub fn build_epsilon_net_auto(
    g: &Generator,
    eps: f64,
    pd: &PeriodicData,
    n_test: usize,
    metric: &ShiftMetric,
) -> Result<EpsilonNet, AnalysisError> {
    let last = 2 * g.depth() + 1;
    let mut len = 1;
    loop {
        let (z, m) = dense_orbit_segment(g.transition_matrix(), len);
        match build_epsilon_net(g, eps, pd, &z, m, n_test, metric) {
            Err(AnalysisError::NotDense { .. }) if len < last => len += 2,
            other => return other,
        }
    }
}
