//! Brute-force oracles shared by the integration tests. The enumeration
//! oracles use their own backward recursion and never call the evaluation
//! module; the sandwich checks compare learner tables against it.
#![allow(dead_code)]

use mgame::game_model::{CorrelatedPolicy, JointActionSpace, MarkovGame, MarkovPolicy};
use mgame::matrix_equilibrium::PayoffTensors;
use rand::Rng;

/// `V_h(s)` of `player` under the joint distribution `dist(h, s)`, as `[h][s]`.
pub fn value_of<G: MarkovGame>(game: &G, player: usize, dist: impl Fn(usize, usize) -> Vec<f64>) -> Vec<Vec<f64>> {
    let (nh, ns, nj) = (game.horizon(), game.num_states(), game.num_joint());
    let mut v = vec![vec![0.0; ns]; nh + 1];
    for h in (0..nh).rev() {
        for s in 0..ns {
            let d = dist(h, s);
            let mut total = 0.0;
            for j in 0..nj {
                if d[j] == 0.0 {
                    continue;
                }
                let p = game.transition(h, s, j);
                let next: f64 = (0..ns).map(|t| p[t] * v[h + 1][t]).sum();
                total += d[j] * (game.utility(player, h, s, j) + next);
            }
            v[h][s] = total;
        }
    }
    v
}

/// Joint distribution after `player` replaces each recommendation `a` by `map(a)`.
pub fn remap(space: &JointActionSpace, d: &[f64], player: usize, map: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; d.len()];
    for (j, p) in d.iter().enumerate() {
        let mut actions = space.decode(j);
        actions[player] = map[actions[player]];
        out[space.encode(&actions)] += p;
    }
    out
}

/// All maps `{0..n} → {0..n}`.
pub fn all_maps(n: usize) -> Vec<Vec<usize>> {
    let total = n.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let a = code % n;
                    code /= n;
                    a
                })
                .collect()
        })
        .collect()
}

/// Odometer over `len` digits in base `base`.
pub fn for_each_tuple(len: usize, base: usize, mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; len];
    loop {
        f(&digits);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            digits[i] += 1;
            if digits[i] < base {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Best value of `player` over every deterministic Markov deviation against `pi`.
pub fn enumerate_best_response<G: MarkovGame>(game: &G, pi: &CorrelatedPolicy, player: usize) -> f64 {
    let (nh, ns) = (game.horizon(), game.num_states());
    let space = game.joint_space().clone();
    let n = space.count(player);
    let s1 = game.initial_state();
    let mut best = f64::NEG_INFINITY;
    for_each_tuple(nh * ns, n, |choice| {
        let v = value_of(game, player, |h, s| remap(&space, pi.dist(h, s), player, &vec![choice[h * ns + s]; n]));
        best = best.max(v[0][s1]);
    });
    best
}

/// Best value of `player` over every Markov strategy modification of `pi`.
pub fn enumerate_best_modification<G: MarkovGame>(game: &G, pi: &CorrelatedPolicy, player: usize) -> f64 {
    let (nh, ns) = (game.horizon(), game.num_states());
    let space = game.joint_space().clone();
    let maps = all_maps(space.count(player));
    let s1 = game.initial_state();
    let mut best = f64::NEG_INFINITY;
    for_each_tuple(nh * ns, maps.len(), |choice| {
        let v = value_of(game, player, |h, s| remap(&space, pi.dist(h, s), player, &maps[choice[h * ns + s]]));
        best = best.max(v[0][s1]);
    });
    best
}

pub fn own_value<G: MarkovGame>(game: &G, pi: &CorrelatedPolicy, player: usize) -> f64 {
    value_of(game, player, |h, s| pi.dist(h, s).to_vec())[0][game.initial_state()]
}

pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_correlated(rng: &mut impl Rng, nh: usize, ns: usize, space: &JointActionSpace) -> CorrelatedPolicy {
    let table: Vec<f64> = (0..nh * ns).flat_map(|_| random_simplex(rng, space.size())).collect();
    CorrelatedPolicy::new(nh, ns, space.clone(), table).unwrap()
}

pub fn random_markov(rng: &mut impl Rng, player: usize, nh: usize, ns: usize, n: usize) -> MarkovPolicy {
    let table: Vec<f64> = (0..nh * ns).flat_map(|_| random_simplex(rng, n)).collect();
    MarkovPolicy::new(player, nh, ns, n, table).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `Q̲ ≤ Q^{μ,†} ≤ Q^{†,ν} ≤ Q̄` at every `(h, s, a, b)` for the marginals of the
/// learner's current policy, up to `slack`.
pub fn zero_sum_sandwich_holds(game: &mgame::game_model::ZeroSumGame, state: &mgame::nash_vi::LearnerState, slack: f64) -> bool {
    let pi = state.policy();
    let (q_mu, q_nu) = mgame::evaluation::best_response_q_bounds(game, &pi.marginal(0), &pi.marginal(1)).unwrap();
    let (low, up) = (state.q_low(), state.q_up());
    (0..up.len()).all(|c| low[c] <= q_mu[c] + slack && q_mu[c] <= q_nu[c] + slack && q_nu[c] <= up[c] + slack)
}

/// Per player: `Q̲_i ≤ Q^π_i` and `Q^{†,π_{-i}}_i ≤ Q̄_i` at every `(h, s, joint)`.
pub fn multi_sandwich_holds<G: MarkovGame>(game: &G, state: &mgame::multi_nash_vi::MultiLearnerState, slack: f64) -> bool {
    let pi = state.policy();
    let (nh, ns, nj) = (game.horizon(), game.num_states(), game.num_joint());
    (0..game.num_players()).all(|i| {
        let v = value_of(game, i, |h, s| pi.dist(h, s).to_vec());
        let (_, q_dagger) = mgame::evaluation::best_response(game, pi, i).unwrap();
        let (low, up) = (state.q_low(i), state.q_up(i));
        let mut ok = true;
        for h in 0..nh {
            for s in 0..ns {
                for j in 0..nj {
                    let c = (h * ns + s) * nj + j;
                    let p = game.transition(h, s, j);
                    let q_pi = game.utility(i, h, s, j) + (0..ns).map(|t| p[t] * v[h + 1][t]).sum::<f64>();
                    ok &= low[c] <= q_pi + slack && q_dagger[c] <= up[c] + slack;
                }
            }
        }
        ok
    })
}

/// `gain[a][a']` of replacing recommendation `a` by `a'` for `player`.
fn swap_gains(t: &PayoffTensors, dist: &[f64], player: usize) -> Vec<Vec<f64>> {
    let space = t.space();
    let n = space.count(player);
    let u = t.payoff(player);
    let mut gain = vec![vec![0.0; n]; n];
    for (j, p) in dist.iter().enumerate() {
        let actions = space.decode(j);
        for alt in 0..n {
            let mut dev = actions.clone();
            dev[player] = alt;
            gain[actions[player]][alt] += p * (u[space.encode(&dev)] - u[j]);
        }
    }
    gain
}

/// Largest gain over constant deviations.
pub fn cce_by_enumeration(t: &PayoffTensors, dist: &[f64]) -> f64 {
    (0..t.num_players())
        .flat_map(|i| {
            let g = swap_gains(t, dist, i);
            (0..g.len()).map(move |alt| g.iter().map(|row| row[alt]).sum::<f64>()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Largest gain over every map from recommendations to actions.
pub fn ce_by_enumeration(t: &PayoffTensors, dist: &[f64]) -> f64 {
    (0..t.num_players())
        .flat_map(|i| {
            let g = swap_gains(t, dist, i);
            all_maps(g.len()).into_iter().map(move |m| m.iter().enumerate().map(|(a, b)| g[a][*b]).sum::<f64>())
        })
        .fold(0.0, f64::max)
}
