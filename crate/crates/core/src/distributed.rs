//! Consensus problems over undirected networks, the decentralized flow, its
//! forward Euler iteration and a synchronous message-passing simulator.
//!
//! Each agent `i` owns `f_i(x_i) + g_i(z_i)` with the local coupling
//! `C_i x_i = z_i`; consensus `T x = 0` uses the edge incidence matrix `T`.
//! Edges are oriented from the smaller to the larger vertex and incidence rows
//! follow the sorted edge list.

use crate::block::Shape;
use crate::error::{Error, Result};
use crate::flow::{solve, IntegratorConfig, OdeSystem, Recorder, Trajectory};
use crate::linops::{BlockOperator, LinearOperator};
use crate::problem::{NonsmoothBlock, PrimalDualState, SaddleProblem, SmoothBlock};
use crate::prox::ProximableFunction;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::VecDeque;

const PAR_MIN_LEN: usize = 4096;
const DIVERGENCE_NORM: f64 = 1e12;

/// Local data of one agent.
#[derive(Debug, Clone)]
pub struct Agent<T: Real> {
    pub f: SmoothBlock<T>,
    pub g: ProximableFunction<T>,
    /// Local coupling `C_i`, with as many columns as `x_i` has entries.
    pub c: DMatrix<T>,
}

/// Connected undirected network of agents sharing one decision vector.
#[derive(Debug, Clone)]
pub struct Network<T: Real> {
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    agents: Vec<Agent<T>>,
    n: usize,
}

impl<T: Real> Network<T> {
    /// Validates the graph (no self-loops, duplicates or out-of-range vertices,
    /// connected) and the local data shapes.
    pub fn new(edges: Vec<(usize, usize)>, agents: Vec<Agent<T>>) -> Result<Self> {
        let k = agents.len();
        if k == 0 {
            return Err(Error::InvalidGraph("network has no agents".into()));
        }
        let mut es: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if a >= k || b >= k {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) outside 0..{k}")));
            }
            es.push((a.min(b), a.max(b)));
        }
        es.sort_unstable();
        if let Some(w) = es.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge {:?}", w[0])));
        }
        let mut neighbors = vec![Vec::new(); k];
        for &(a, b) in &es {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let mut seen = vec![false; k];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Disconnected);
        }
        let n = agents[0].f.dim();
        for (i, a) in agents.iter().enumerate() {
            if a.f.dim() != n {
                return Err(Error::dims(format!("agent {i} local variable"), n, a.f.dim()));
            }
            if a.c.ncols() != n {
                return Err(Error::dims(format!("agent {i} coupling columns"), n, a.c.ncols()));
            }
            a.g.check_dim(a.c.nrows())?;
        }
        Ok(Self {
            edges: es,
            neighbors,
            agents,
            n,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn agent(&self, i: usize) -> &Agent<T> {
        &self.agents[i]
    }

    /// Dimension of each local copy `x_i`.
    pub fn local_dim(&self) -> usize {
        self.n
    }

    fn z_dims(&self) -> Vec<usize> {
        self.agents.iter().map(|a| a.c.nrows()).collect()
    }

    /// Stacked sizes `(nx, nz, p)` of the decentralized state, where the dual
    /// part is `(lam1, lam2)`.
    pub fn layout(&self) -> (usize, usize, usize) {
        let nx = self.num_agents() * self.n;
        let nz: usize = self.z_dims().iter().sum();
        (nx, nz, nx + nz)
    }

    /// Number of point-to-point messages in one synchronous exchange of `x`.
    pub fn messages_per_round(&self) -> u64 {
        2 * self.edges.len() as u64
    }
}

/// Local slices of the decentralized state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T: Real> {
    pub x: DVector<T>,
    pub z: DVector<T>,
    pub y: DVector<T>,
    /// Local block of `T^T lam_T`.
    pub lam1: DVector<T>,
    /// Local block of `lam_C`.
    pub lam2: DVector<T>,
}

impl<T: Real> AgentState<T> {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            z: DVector::zeros(m),
            y: DVector::zeros(m),
            lam1: DVector::zeros(n),
            lam2: DVector::zeros(m),
        }
    }
}

/// All-zero state of every agent.
pub fn zero_states<T: Real>(net: &Network<T>) -> Vec<AgentState<T>> {
    net.z_dims()
        .into_iter()
        .map(|m| AgentState::zeros(net.local_dim(), m))
        .collect()
}

fn check_states<T: Real>(net: &Network<T>, states: &[AgentState<T>]) -> Result<()> {
    if states.len() != net.num_agents() {
        return Err(Error::dims("agent states", net.num_agents(), states.len()));
    }
    let n = net.local_dim();
    for (i, (s, m)) in states.iter().zip(net.z_dims()).enumerate() {
        let ok = s.x.len() == n && s.lam1.len() == n && s.z.len() == m && s.y.len() == m && s.lam2.len() == m;
        if !ok {
            return Err(Error::InvalidArgument(format!("agent {i} state has wrong local shapes")));
        }
    }
    Ok(())
}

/// Packs agent states as `(x, z, y, lam1, lam2)`, each stacked over agents.
pub fn pack_states<T: Real>(states: &[AgentState<T>]) -> DVector<T> {
    let parts: [fn(&AgentState<T>) -> &DVector<T>; 5] = [|s| &s.x, |s| &s.z, |s| &s.y, |s| &s.lam1, |s| &s.lam2];
    let len: usize = states.iter().map(|s| 2 * s.x.len() + 3 * s.z.len()).sum();
    let mut out = Vec::with_capacity(len);
    for part in parts {
        for s in states {
            out.extend(part(s).iter().copied());
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`pack_states`].
pub fn unpack_states<T: Real>(net: &Network<T>, v: &[T]) -> Result<Vec<AgentState<T>>> {
    let (nx, nz, p) = net.layout();
    if v.len() != nx + 2 * nz + p {
        return Err(Error::dims("packed decentralized state", nx + 2 * nz + p, v.len()));
    }
    let n = net.local_dim();
    let zd = net.z_dims();
    let mut out = zero_states(net);
    let mut off = 0;
    let mut take = |len: usize| {
        let s = DVector::from_column_slice(&v[off..off + len]);
        off += len;
        s
    };
    for s in out.iter_mut() {
        s.x = take(n);
    }
    for (s, &m) in out.iter_mut().zip(&zd) {
        s.z = take(m);
    }
    for (s, &m) in out.iter_mut().zip(&zd) {
        s.y = take(m);
    }
    for s in out.iter_mut() {
        s.lam1 = take(n);
    }
    for (s, &m) in out.iter_mut().zip(&zd) {
        s.lam2 = take(m);
    }
    Ok(out)
}

/// Edge-by-vertex incidence matrix `T`; `T^T T` is the graph Laplacian.
pub fn incidence_matrix<T: Real>(net: &Network<T>) -> DMatrix<T> {
    let mut t = DMatrix::zeros(net.edges.len(), net.num_agents());
    for (r, &(a, b)) in net.edges.iter().enumerate() {
        t[(r, a)] = T::one();
        t[(r, b)] = -T::one();
    }
    t
}

/// [`incidence_matrix`] as a linear operator.
pub fn incidence<T: Real>(net: &Network<T>) -> LinearOperator<T> {
    LinearOperator::from_matrix(incidence_matrix(net))
}

/// Centralized consensus problem with `E = [T (x) I; blkdiag(C_i)]`,
/// `F = [0; -I]` and `q = 0`.
pub fn assemble_consensus<T: Real>(net: &Network<T>, mu: T, alpha: T) -> Result<SaddleProblem<T>> {
    let n = net.local_dim();
    let k = net.num_agents();
    let ne = net.edges.len();
    let zd = net.z_dims();
    let nz: usize = zd.iter().sum();
    let p = ne * n + nz;
    let mut z_off = Vec::with_capacity(k);
    let mut acc = ne * n;
    for &m in &zd {
        z_off.push(acc);
        acc += m;
    }
    let mut e_blocks = Vec::with_capacity(k);
    let mut f_blocks = Vec::with_capacity(k);
    for i in 0..k {
        let mut ei = DMatrix::zeros(p, n);
        for (r, &(a, b)) in net.edges.iter().enumerate() {
            let sign = if a == i {
                T::one()
            } else if b == i {
                -T::one()
            } else {
                continue;
            };
            for d in 0..n {
                ei[(r * n + d, d)] = sign;
            }
        }
        ei.view_mut((z_off[i], 0), (zd[i], n)).copy_from(&net.agents[i].c);
        e_blocks.push(LinearOperator::from_matrix(ei));
        let mut fi = DMatrix::zeros(p, zd[i]);
        for d in 0..zd[i] {
            fi[(z_off[i] + d, d)] = -T::one();
        }
        f_blocks.push(LinearOperator::from_matrix(fi));
    }
    let smooth = net.agents.iter().map(|a| a.f.clone()).collect();
    let nonsmooth = net
        .agents
        .iter()
        .zip(&zd)
        .map(|(a, &m)| NonsmoothBlock::new(Shape::Vector(m), a.g.clone()))
        .collect::<Result<Vec<_>>>()?;
    SaddleProblem::new(
        smooth,
        nonsmooth,
        BlockOperator::new(e_blocks, p)?,
        BlockOperator::new(f_blocks, p)?,
        DVector::zeros(p),
        mu,
        alpha,
    )
}

/// Agent states of a centralized state of [`assemble_consensus`]:
/// `lam1 = (T (x) I)^T lam_T`, `lam2 = lam_C`.
pub fn split_centralized<T: Real>(net: &Network<T>, s: &PrimalDualState<T>) -> Result<Vec<AgentState<T>>> {
    let n = net.local_dim();
    let ne = net.edges.len();
    let (nx, nz, _) = net.layout();
    if s.x.len() != nx || s.z.len() != nz || s.y.len() != nz || s.lam.len() != ne * n + nz {
        return Err(Error::InvalidArgument("state does not match the assembled consensus problem".into()));
    }
    let mut out = zero_states(net);
    let mut off = 0;
    for (i, st) in out.iter_mut().enumerate() {
        let m = st.z.len();
        st.x = s.x.rows(i * n, n).into_owned();
        st.z = s.z.rows(off, m).into_owned();
        st.y = s.y.rows(off, m).into_owned();
        st.lam2 = s.lam.rows(ne * n + off, m).into_owned();
        off += m;
    }
    for (r, &(a, b)) in net.edges.iter().enumerate() {
        let l = s.lam.rows(r * n, n);
        out[a].lam1 += l;
        out[b].lam1 -= l;
    }
    Ok(out)
}

/// Centralized state whose split is `states`, using the minimum-norm `lam_T`
/// with `(T (x) I)^T lam_T = lam1`. Requires `sum_i lam1_i = 0`.
pub fn join_centralized<T: Real>(net: &Network<T>, states: &[AgentState<T>]) -> Result<PrimalDualState<T>> {
    check_states(net, states)?;
    let n = net.local_dim();
    let k = net.num_agents();
    let t = incidence_matrix(net);
    let mut lam_t = DVector::zeros(net.edges.len() * n);
    if !net.edges.is_empty() {
        // lam_T = T w with (L + 11^T / k) w = lam1, L = T^T T, which is the
        // minimum-norm solution whenever lam1 sums to zero.
        let kf = T::from_count(k);
        let shifted = t.tr_mul(&t) + DMatrix::from_element(k, k, T::one() / kf);
        let chol = shifted
            .cholesky()
            .ok_or_else(|| Error::Decomposition("shifted graph Laplacian is not positive definite".into()))?;
        for d in 0..n {
            let l1 = DVector::from_iterator(k, states.iter().map(|s| s.lam1[d]));
            if l1.sum().abs() > T::lit(1e-9).max(T::eps() * T::lit(1e4)) * (T::one() + l1.norm()) {
                return Err(Error::InvalidArgument("lam1 is not in the range of the incidence adjoint".into()));
            }
            let lt = &t * chol.solve(&l1);
            for r in 0..net.edges.len() {
                lam_t[r * n + d] = lt[r];
            }
        }
    }
    let cat = |f: fn(&AgentState<T>) -> &DVector<T>| {
        DVector::from_iterator(states.iter().map(|s| f(s).len()).sum(), states.iter().flat_map(|s| f(s).iter().copied()))
    };
    let lam2 = cat(|s| &s.lam2);
    let mut lam = DVector::zeros(lam_t.len() + lam2.len());
    lam.rows_mut(0, lam_t.len()).copy_from(&lam_t);
    lam.rows_mut(lam_t.len(), lam2.len()).copy_from(&lam2);
    Ok(PrimalDualState::new(cat(|s| &s.x), cat(|s| &s.z), cat(|s| &s.y), lam))
}

/// Derivative of agent `i`, reading only its own state and the `x_j` of its
/// neighbors.
fn agent_field<T: Real>(
    net: &Network<T>,
    i: usize,
    own: &AgentState<T>,
    neighbor_x: &[&DVector<T>],
    alpha: T,
    mu: T,
) -> Result<AgentState<T>> {
    let a = &net.agents[i];
    let am = alpha * mu;
    let mut lap = &own.x * T::from_count(neighbor_x.len());
    for xj in neighbor_x {
        lap -= *xj;
    }
    let dlam1 = lap * alpha;
    let cx = &a.c * &own.x;
    let dlam2 = (&cx - &own.z) * alpha;
    let v = &own.z + &own.y * mu;
    let p = a.g.prox(mu, v.as_slice())?;
    let dy = (&own.z - p) * alpha;
    let dz = -&own.y - &dy / am + &own.lam2 + &dlam2 / am;
    let w = &own.lam2 + &dlam2 / am;
    let dx = -a.f.grad(own.x.as_slice()) - &own.lam1 - &dlam1 / am - a.c.tr_mul(&w);
    Ok(AgentState {
        x: dx,
        z: dz,
        y: dy,
        lam1: dlam1,
        lam2: dlam2,
    })
}

/// Decentralized vector field: one synchronous round in which every agent
/// receives `x_j` from its neighbors, then local derivatives.
pub fn decentralized_field<T: Real>(
    net: &Network<T>,
    states: &[AgentState<T>],
    alpha: T,
    mu: T,
) -> Result<Vec<AgentState<T>>> {
    check_states(net, states)?;
    let one = |i: usize| {
        let nx: Vec<&DVector<T>> = net.neighbors[i].iter().map(|&j| &states[j].x).collect();
        agent_field(net, i, &states[i], &nx, alpha, mu)
    };
    let (nx, nz, _) = net.layout();
    if nx + nz >= PAR_MIN_LEN {
        (0..net.num_agents()).into_par_iter().map(one).collect()
    } else {
        (0..net.num_agents()).map(one).collect()
    }
}

/// Optimality residual of the decentralized state; it equals the centralized
/// residual of any matching state of [`assemble_consensus`].
pub fn decentralized_kkt<T: Real>(net: &Network<T>, states: &[AgentState<T>], mu: T) -> Result<T> {
    check_states(net, states)?;
    let mut acc = T::zero();
    for (i, s) in states.iter().enumerate() {
        let a = &net.agents[i];
        let r1 = a.f.grad(s.x.as_slice()) + &s.lam1 + a.c.tr_mul(&s.lam2);
        let r2 = &s.y - &s.lam2;
        let v = &s.z + &s.y * mu;
        let r3 = &s.z - a.g.prox(mu, v.as_slice())?;
        let r4 = &a.c * &s.x - &s.z;
        acc += r1.norm_squared() + r2.norm_squared() + r3.norm_squared() + r4.norm_squared();
    }
    for &(a, b) in &net.edges {
        acc += (&states[a].x - &states[b].x).norm_squared();
    }
    Ok(acc.sqrt())
}

/// Decentralized flow as an ODE over [`pack_states`] vectors, counting messages.
#[derive(Debug)]
pub struct DecentralizedSystem<'a, T: Real> {
    net: &'a Network<T>,
    pub alpha: T,
    pub mu: T,
    pub messages: u64,
    pub evaluations: usize,
}

impl<'a, T: Real> DecentralizedSystem<'a, T> {
    pub fn new(net: &'a Network<T>, alpha: T, mu: T) -> Self {
        Self {
            net,
            alpha,
            mu,
            messages: 0,
            evaluations: 0,
        }
    }

    pub fn network(&self) -> &Network<T> {
        self.net
    }
}

impl<T: Real> OdeSystem<T> for DecentralizedSystem<'_, T> {
    fn dim(&self) -> usize {
        let (nx, nz, p) = self.net.layout();
        nx + 2 * nz + p
    }

    fn rhs(&mut self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let s = unpack_states(self.net, y)?;
        let d = decentralized_field(self.net, &s, self.alpha, self.mu)?;
        self.messages += self.net.messages_per_round();
        self.evaluations += 1;
        dy.copy_from_slice(pack_states(&d).as_slice());
        Ok(())
    }
}

/// Integrates the decentralized flow. The trajectory stores packed states in
/// the `(x, z, y, (lam1, lam2))` layout and a `messages_total` column.
pub fn simulate<T: Real>(
    net: &Network<T>,
    init: &[AgentState<T>],
    alpha: T,
    mu: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    check_states(net, init)?;
    let mut sys = DecentralizedSystem::new(net, alpha, mu);
    let kkt = |sys: &mut DecentralizedSystem<'_, T>, _t: T, y: &[T]| -> Result<T> {
        decentralized_kkt(sys.net, &unpack_states(sys.net, y)?, sys.mu)
    };
    let msgs = |sys: &mut DecentralizedSystem<'_, T>, _t: T, _y: &[T]| -> Result<Vec<T>> {
        Ok(vec![T::lit(sys.messages as f64)])
    };
    let mut rec = Recorder::new(cfg, net.layout(), kkt).with_columns(vec!["messages_total".into()], msgs);
    let y0 = pack_states(init);
    let out = solve(&mut sys, T::zero(), y0.as_slice(), cfg, &mut rec)?;
    rec.finish(&mut sys, out)
}

/// Iterates of the discrete decentralized algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRun<T: Real> {
    /// Agent states at iterations `0..=iters`.
    pub iterates: Vec<Vec<AgentState<T>>>,
    pub messages: u64,
}

/// Forward Euler iteration of the decentralized flow with step `eta`. Each
/// iteration is one round of `x` exchange followed by the dual updates and
/// then the primal updates, which use the dual increments of the same round.
pub fn run_discrete<T: Real>(
    net: &Network<T>,
    init: &[AgentState<T>],
    eta: T,
    alpha: T,
    mu: T,
    iters: usize,
) -> Result<DiscreteRun<T>> {
    check_states(net, init)?;
    if !(eta > T::zero()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")));
    }
    let am = alpha * mu;
    let ea = eta * alpha;
    let mut iterates = Vec::with_capacity(iters + 1);
    iterates.push(init.to_vec());
    let mut messages = 0;
    for t in 0..iters {
        let cur = &iterates[t];
        messages += net.messages_per_round();
        let step = |i: usize| -> Result<AgentState<T>> {
            let s = &cur[i];
            let a = &net.agents[i];
            let mut lap = &s.x * T::from_count(net.neighbors[i].len());
            for &j in &net.neighbors[i] {
                lap -= &cur[j].x;
            }
            let lam1 = &s.lam1 + lap * ea;
            let lam2 = &s.lam2 + (&a.c * &s.x - &s.z) * ea;
            let v = &s.z + &s.y * mu;
            let y = &s.y + (&s.z - a.g.prox(mu, v.as_slice())?) * ea;
            let z = &s.z - (&s.y - &s.lam2) * eta - ((&y - &s.y) - (&lam2 - &s.lam2)) / am;
            let x = &s.x
                - a.f.grad(s.x.as_slice()) * eta
                - (&s.lam1 + a.c.tr_mul(&s.lam2)) * eta
                - ((&lam1 - &s.lam1) + a.c.tr_mul(&(&lam2 - &s.lam2))) / am;
            Ok(AgentState { x, z, y, lam1, lam2 })
        };
        let next: Vec<AgentState<T>> = (0..net.num_agents()).map(step).collect::<Result<_>>()?;
        let norm = pack_states(&next).norm();
        if !(norm.as_f64() <= DIVERGENCE_NORM) {
            return Err(Error::Divergence {
                iteration: t + 1,
                norm: norm.as_f64(),
            });
        }
        iterates.push(next);
    }
    Ok(DiscreteRun { iterates, messages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, FlowField, Method};
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn agent(c: f64, tau: f64) -> Agent<f64> {
        Agent {
            f: SmoothBlock::isotropic(1.0, DVector::from_vec(vec![c, -c])),
            g: ProximableFunction::l1(tau),
            c: DMatrix::identity(2, 2),
        }
    }

    fn path3() -> Network<f64> {
        Network::new(vec![(1, 0), (1, 2)], vec![agent(1.0, 0.1), agent(2.0, 0.2), agent(-0.5, 0.0)]).unwrap()
    }

    fn random_states(net: &Network<f64>, rng: &mut ChaCha8Rng) -> Vec<AgentState<f64>> {
        let mut s = zero_states(net);
        for st in s.iter_mut() {
            for v in [&mut st.x, &mut st.z, &mut st.y, &mut st.lam2] {
                v.iter_mut().for_each(|e| *e = rng.random_range(-2.0..2.0));
            }
        }
        // lam1 must lie in the range of the incidence adjoint.
        let t = incidence_matrix(net);
        for d in 0..net.local_dim() {
            let lt = DVector::from_iterator(t.nrows(), (0..t.nrows()).map(|_| rng.random_range(-2.0..2.0)));
            let l1 = t.tr_mul(&lt);
            for (i, st) in s.iter_mut().enumerate() {
                st.lam1[d] = l1[i];
            }
        }
        s
    }

    #[test]
    fn two_node_incidence() {
        let net = Network::new(vec![(1, 0)], vec![agent(0.0, 0.1), agent(0.0, 0.1)]).unwrap();
        let t = incidence_matrix(&net);
        assert_eq!(t, dmatrix![1.0, -1.0]);
        assert_eq!(t.tr_mul(&t), dmatrix![1.0, -1.0; -1.0, 1.0]);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let net = path3();
        let t = incidence_matrix(&net);
        let l = t.tr_mul(&t);
        for r in 0..3 {
            assert_eq!(l.row(r).sum(), 0.0);
        }
    }

    #[test]
    fn graph_validation() {
        let a = || vec![agent(0.0, 0.1), agent(0.0, 0.1), agent(0.0, 0.1)];
        assert!(matches!(Network::new(vec![(0, 1)], a()), Err(Error::Disconnected)));
        assert!(matches!(Network::new(vec![(0, 0), (1, 2)], a()), Err(Error::InvalidGraph(_))));
        assert!(matches!(
            Network::new(vec![(0, 1), (1, 0), (1, 2)], a()),
            Err(Error::InvalidGraph(_))
        ));
        assert!(matches!(Network::new(vec![(0, 3)], a()), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn single_agent_has_no_consensus_rows() {
        let net = Network::new(vec![], vec![agent(1.0, 0.1)]).unwrap();
        let p = assemble_consensus(&net, 1.0, 1.0).unwrap();
        assert_eq!(p.p(), 2);
        assert_eq!(net.messages_per_round(), 0);
    }

    #[test]
    fn matches_centralized_field() {
        let net = path3();
        let p = assemble_consensus(&net, 0.7, 1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_states(&net, &mut rng);
            let c = join_centralized(&net, &s).unwrap();
            let back = split_centralized(&net, &c).unwrap();
            for (a, b) in back.iter().zip(&s) {
                assert!((&a.lam1 - &b.lam1).norm() < 1e-12);
            }
            let dc = FlowField::new(&p).vector_field(&c).unwrap();
            let dd = decentralized_field(&net, &s, 1.3, 0.7).unwrap();
            let dcs = split_centralized(&net, &dc).unwrap();
            for (a, b) in dcs.iter().zip(&dd) {
                let err = (pack_states(std::slice::from_ref(a)) - pack_states(std::slice::from_ref(b))).norm();
                assert!(err < 1e-14 * (1.0 + pack_states(std::slice::from_ref(a)).norm()));
            }
            let kc = p.kkt_residual(&c).unwrap();
            let kd = decentralized_kkt(&net, &s, 0.7).unwrap();
            assert!((kc - kd).abs() < 1e-12 * (1.0 + kc));
        }
    }

    #[test]
    fn perturbation_is_local() {
        let net = Network::new(
            vec![(0, 1), (1, 2), (2, 3)],
            vec![agent(1.0, 0.1), agent(2.0, 0.2), agent(-0.5, 0.0), agent(0.3, 0.1)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_states(&net, &mut rng);
        let base = decentralized_field(&net, &s, 1.0, 1.0).unwrap();
        let mut s2 = s.clone();
        s2[0].x[1] += 0.5;
        let pert = decentralized_field(&net, &s2, 1.0, 1.0).unwrap();
        assert_ne!(base[0], pert[0]);
        assert_ne!(base[1], pert[1]);
        assert_eq!(base[2], pert[2]);
        assert_eq!(base[3], pert[3]);
    }

    #[test]
    fn one_discrete_step_is_forward_euler() {
        let net = Network::new(vec![(0, 1)], vec![agent(1.0, 0.1), agent(2.0, 0.2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_states(&net, &mut rng);
        let eta = 0.03;
        let run = run_discrete(&net, &s, eta, 1.5, 0.8, 1).unwrap();
        let d = decentralized_field(&net, &s, 1.5, 0.8).unwrap();
        let expect = pack_states(&s) + pack_states(&d) * eta;
        assert!((pack_states(&run.iterates[1]) - expect).norm() < 1e-13);
        assert_eq!(run.messages, 2);
    }

    #[test]
    fn identical_quadratics_reach_consensus() {
        let agents = (0..4)
            .map(|_| Agent {
                f: SmoothBlock::isotropic(1.0, DVector::from_vec(vec![1.0, 2.0])),
                g: ProximableFunction::zero(),
                c: DMatrix::identity(2, 2),
            })
            .collect();
        let net = Network::new(vec![(0, 1), (1, 2), (2, 3), (3, 0)], agents).unwrap();
        let run = run_discrete(&net, &zero_states(&net), 0.05, 1.0, 1.0, 4000).unwrap();
        let last = run.iterates.last().unwrap();
        for s in last {
            assert!((&s.x - &last[0].x).norm() < 1e-6);
            assert!((&s.x - DVector::from_vec(vec![1.0, 2.0])).norm() < 1e-6);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let net = path3();
        let r = run_discrete(&net, &random_states(&net, &mut ChaCha8Rng::seed_from_u64(1)), 50.0, 1.0, 1.0, 200);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn small_steps_track_the_flow() {
        let net = path3();
        let s0 = random_states(&net, &mut ChaCha8Rng::seed_from_u64(2));
        let run = run_discrete(&net, &s0, 1e-4, 1.0, 1.0, 10_000).unwrap();
        let cfg = IntegratorConfig {
            t_end: 1.0,
            stop_kkt: None,
            ..Default::default()
        };
        let tr = simulate(&net, &s0, 1.0, 1.0, &cfg).unwrap();
        let diff = pack_states(run.iterates.last().unwrap()) - &tr.states[tr.len() - 1];
        assert!(diff.norm() < 1e-3);
    }

    #[test]
    fn simulate_matches_centralized_and_counts_messages() {
        let net = path3();
        let s0 = random_states(&net, &mut ChaCha8Rng::seed_from_u64(4));
        let cfg = IntegratorConfig {
            t_end: 10.0,
            stop_kkt: None,
            ..Default::default()
        };
        let td = simulate(&net, &s0, 1.0, 1.0, &cfg).unwrap();
        let p = assemble_consensus(&net, 1.0, 1.0).unwrap();
        let tc = integrate(&p, &join_centralized(&net, &s0).unwrap(), &cfg).unwrap();
        let sd = unpack_states(&net, td.states.last().unwrap().as_slice()).unwrap();
        let sc = split_centralized(&net, &tc.last_state().unwrap()).unwrap();
        assert!((pack_states(&sd) - pack_states(&sc)).norm() < 1e-7);
        let msgs = td.column("messages_total").unwrap();
        assert_eq!(*msgs.last().unwrap(), (4 * td.evaluations) as f64);
        assert_eq!(Method::Rk45, cfg.method);
    }
}
