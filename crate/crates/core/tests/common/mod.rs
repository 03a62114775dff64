//! Oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use cascade_core::cascade::{
    Budget, CascadeEnvironment, Expansion, OccupancyState, OccupiedBox,
};
use cascade_core::{BallMode, SplittingLaw};
use rand::Rng;

pub const ROOMY: u64 = 1 << 40;

/// `(x, j, P(X >= j), P(X < j))`, evaluated with mpmath at 50 digits via
/// the regularized lower incomplete gamma function.
pub const POISSON_REFERENCE: [(f64, u64, f64, f64); 12] = [
    (0.001, 2, 4.9966679163334029738e-7, 0.99999950033320836666),
    (0.5, 1, 0.3934693402873665764, 0.6065306597126334236),
    (0.5, 3, 0.014387677966970686644, 0.98561232203302931336),
    (2.0, 2, 0.59399415029016192432, 0.40600584970983807568),
    (3.0, 10, 0.0011024881301154797421, 0.99889751186988452026),
    (10.0, 5, 0.97074731192303892733, 0.029252688076961072673),
    (10.0, 25, 0.000046949381426799706487, 0.99995305061857320029),
    (50.0, 40, 0.93542963107886702424, 0.064570368921132975762),
    (50.0, 80, 0.000056650355286474506288, 0.99994334964471352549),
    (200.0, 150, 0.99990321378005066423, 0.00009678621994933577085),
    (1000.0, 1100, 0.00096263040586655716094, 0.99903736959413344284),
    (1e-6, 2, 4.9999966666679162138e-13, 0.99999999999950000033),
];

/// Every built-in law with a sampler, the lattice one included.
pub fn all_laws() -> Vec<SplittingLaw> {
    vec![
        SplittingLaw::UniformStick,
        SplittingLaw::DiracHalf,
        SplittingLaw::Mix23 { alpha: 0.5 },
        SplittingLaw::Mix23 { alpha: 0.8 },
        SplittingLaw::Law075U,
        SplittingLaw::HeavyTail { samples: 1000, seed: 1 },
    ]
}

/// Largest depth with `b^depth <= 2^log2_boxes`, capped at `cap`.
pub fn table_depth(law: &SplittingLaw, log2_boxes: u32, cap: u32) -> u32 {
    let b = law.support_bound() as f64;
    ((f64::from(log2_boxes) / b.log2()).floor() as u32).min(cap)
}

/// Full per-generation boxes for `k = 0..=depth`, every positive-mass box
/// included.
pub fn full_generations(occ: &OccupancyState, depth: u32) -> Vec<Vec<OccupiedBox>> {
    let mut out = vec![vec![occ.root()]];
    for _ in 0..depth {
        let next: Vec<OccupiedBox> = out
            .last()
            .unwrap()
            .iter()
            .flat_map(|b| occ.children(b))
            .collect();
        out.push(next);
    }
    out
}

/// `(N_k(y), M_k(y))` for `k = 0..=depth`.
pub fn nm_table(gens: &[Vec<OccupiedBox>], y: u64) -> Vec<(usize, usize)> {
    gens.iter()
        .map(|g| {
            let n = g.iter().filter(|b| b.count >= y).count();
            (n, g.len() - n)
        })
        .collect()
}

/// `H = min{k : N_k(j) = 0}` and `G = min{k : M_k(j) >= 1}` read off the
/// table; `None` when the table is too shallow to decide.
pub fn levels_from_table(table: &[(usize, usize)]) -> (Option<u32>, Option<u32>) {
    let h = table.iter().position(|&(n, _)| n == 0).map(|k| k as u32);
    let g = table.iter().position(|&(_, m)| m >= 1).map(|k| k as u32);
    (h, g)
}

#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub law: SplittingLaw,
    pub env_seed: u64,
    pub ball_seed: u64,
    pub n: u64,
    pub j: u64,
    pub mode: BallMode,
}

impl Instance {
    pub fn random<R: Rng>(rng: &mut R, max_n: u64) -> Self {
        let laws = all_laws();
        Instance {
            law: laws[rng.random_range(0..laws.len())],
            env_seed: rng.random(),
            ball_seed: rng.random(),
            n: rng.random_range(0..=max_n),
            j: rng.random_range(2..=6),
            mode: if rng.random_bool(0.5) { BallMode::Exact } else { BallMode::Poissonized },
        }
    }

    pub fn occupancy(&self) -> OccupancyState {
        OccupancyState::throw_balls(CascadeEnvironment::new(self.law, self.env_seed), self.n, self.mode, self.ball_seed)
    }
}

/// Every structural invariant that can be checked on one instance; returns
/// a description of each violation.
pub fn structural_violations(inst: &Instance) -> Vec<String> {
    let mut v = Vec::new();
    let occ = inst.occupancy();
    if inst.mode == BallMode::Exact && occ.realized_total() != inst.n {
        v.push(format!("realized total {} != n {}", occ.realized_total(), inst.n));
    }

    // ball and mass conservation along the occupied tree
    let mut stack = vec![occ.root()];
    let mut visited = 0usize;
    while let Some(b) = stack.pop() {
        visited += 1;
        if visited > 50_000 || b.node.depth > 40 {
            continue;
        }
        let kids = occ.children(&b);
        let count: u64 = kids.iter().map(|c| c.count).sum();
        let mass: f64 = kids.iter().map(|c| c.node.mass).sum();
        if count != b.count {
            v.push(format!("ball conservation at depth {}: {count} != {}", b.node.depth, b.count));
        }
        if (mass - b.node.mass).abs() > 1e-12 {
            v.push(format!("mass conservation at depth {}: {mass} vs {}", b.node.depth, b.node.mass));
        }
        if kids.iter().any(|c| c.count > b.count || !c.node.log_mass.is_finite()) {
            v.push("child count above parent or nonpositive child mass".into());
        }
        stack.extend(kids.into_iter().filter(|c| c.count >= 1));
    }

    // monotonicities of H and G in j, and G <= H
    let js: Vec<u64> = (2..=inst.j + 2).collect();
    let mut budget = Budget::new(ROOMY);
    let hs = occ.heights(&js, &mut budget).unwrap();
    let mut gj: Vec<u64> = vec![1];
    gj.extend(&js);
    let gs = occ.saturation_levels(&gj, &mut budget).unwrap();
    if hs.windows(2).any(|w| w[1] > w[0]) {
        v.push(format!("H not nonincreasing in j: {hs:?}"));
    }
    if gs.windows(2).any(|w| w[1] > w[0]) {
        v.push(format!("G not nonincreasing in j: {gs:?}"));
    }
    for (i, &h) in hs.iter().enumerate() {
        if gs[i + 1] > h {
            v.push(format!("G {} > H {h} at j = {}", gs[i + 1], js[i]));
        }
    }

    // N/M monotonicities and generation mass over a shallow full expansion
    let depth = table_depth(&inst.law, 10, 8);
    let gens = full_generations(&occ, depth);
    for (k, g) in gens.iter().enumerate() {
        let total: f64 = g.iter().map(|b| b.node.mass).sum();
        if (total - 1.0).abs() > 1e-9 {
            v.push(format!("generation {k} mass {total}"));
        }
        let balls: u64 = g.iter().map(|b| b.count).sum();
        if balls != occ.realized_total() {
            v.push(format!("generation {k} holds {balls} balls"));
        }
    }
    let tables: Vec<(u64, Vec<(usize, usize)>)> =
        (1..=inst.j + 1).map(|y| (y, nm_table(&gens, y))).collect();
    for (y, t) in &tables {
        for (k, row) in t.iter().enumerate() {
            if row.0 as u64 * y > occ.realized_total() || row.0 + row.1 != gens[k].len() {
                v.push(format!("N/M table inconsistent at k = {k}, y = {y}"));
            }
        }
        for w in t.windows(2) {
            if w[0].0 == 0 && w[1].0 > 0 {
                v.push("N(y) left zero".into());
            }
            if w[1].1 < w[0].1 {
                v.push("M(y) decreased with k".into());
            }
        }
    }
    for pair in tables.windows(2) {
        if pair[0].1.iter().zip(&pair[1].1).any(|(a, b)| b.0 > a.0) {
            v.push("N(y) increased with y".into());
        }
    }
    // library generation stats agree with the table
    let k = depth.min(4);
    let stats = occ.generation_stats(k, Expansion::Full, &mut Budget::new(ROOMY)).unwrap();
    let (n_tab, m_tab) = nm_table(&gens, inst.j)[k as usize];
    if stats.n_at_least(inst.j).unwrap() != n_tab || stats.m_below(inst.j).unwrap() != m_tab {
        v.push("generation_stats disagrees with the N/M table".into());
    }
    v
}
