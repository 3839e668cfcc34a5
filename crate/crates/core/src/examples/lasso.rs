use super::oracle::fista;
use super::ExampleInstance;
use crate::diagnostics::ReferenceSolution;
use crate::distributed::{assemble_consensus, join_centralized, zero_states, Agent, Network};
use crate::error::{Error, Result};
use crate::linops::singular_extremes_dense;
use crate::problem::SmoothBlock;
use crate::prox::{prox_l1, ProximableFunction};
use crate::rng::{normal_matrix, normal_vector, seeded, uniform};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

/// Generated decentralized lasso instance.
#[derive(Debug, Clone)]
pub struct LassoNetwork<T: Real> {
    pub network: Network<T>,
    pub instance: ExampleInstance<T>,
    /// Minimizer of the equivalent centralized lasso.
    pub x_star: DVector<T>,
    pub taus: Vec<T>,
}

/// Ring with `k / 2` extra random chords (a single edge for two agents).
fn ring_with_chords<R: Rng>(rng: &mut R, k: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = match k {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..k).map(|i| (i.min((i + 1) % k), i.max((i + 1) % k))).collect(),
    };
    let max_edges = k * k.saturating_sub(1) / 2;
    let target = (edges.len() + k / 2).min(max_edges);
    while edges.len() < target {
        let a = rng.random_range(0..k);
        let b = rng.random_range(0..k);
        let e = (a.min(b), a.max(b));
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges
}

/// Each agent holds `f_i = ||G_i x - h_i||^2 / 2` with `||G_i|| = 1` and
/// `g_i = tau_i ||x||_1`, where the `tau_i` sum to 1.15. The reference comes
/// from an accelerated proximal gradient solve of the centralized lasso.
pub fn gen_lasso_network<T: Real>(agents: usize, dim: usize, meas: usize, seed: u64) -> Result<LassoNetwork<T>> {
    if agents == 0 || dim == 0 || meas == 0 {
        return Err(Error::InvalidArgument("lasso network sizes must be positive".into()));
    }
    let mut rng = seeded(seed);
    let mut x_true = DVector::<T>::zeros(dim);
    for i in sample(&mut rng, dim, dim.min(5)) {
        x_true[i] = T::from_count(rng.random_range(1..=5usize));
    }
    let mut gs = Vec::with_capacity(agents);
    let mut hs = Vec::with_capacity(agents);
    for _ in 0..agents {
        let m: DMatrix<T> = normal_matrix(&mut rng, meas, dim);
        let s = singular_extremes_dense(&m, T::lit(1e-12))?.sigma_max;
        let m = m / s;
        let h = &m * &x_true + normal_vector::<T, _>(&mut rng, meas);
        gs.push(m);
        hs.push(h);
    }
    let raw: Vec<T> = (0..agents).map(|_| uniform(&mut rng, 0.1, 1.0)).collect();
    let total = raw.iter().fold(T::zero(), |a, &b| a + b);
    let taus: Vec<T> = raw.iter().map(|&r| T::lit(1.15) * r / total).collect();
    let edges = ring_with_chords(&mut rng, agents);

    let local: Vec<Agent<T>> = gs
        .iter()
        .zip(&hs)
        .zip(&taus)
        .map(|((g, h), &tau)| {
            Ok(Agent {
                f: SmoothBlock::least_squares(g.clone(), h.clone())?,
                g: ProximableFunction::l1(tau),
                c: DMatrix::identity(dim, dim),
            })
        })
        .collect::<Result<_>>()?;
    let network = Network::new(edges, local)?;

    let tau_sum = taus.iter().fold(T::zero(), |a, &b| a + b);
    let gram = gs.iter().fold(DMatrix::<T>::zeros(dim, dim), |acc, g| acc + g.tr_mul(g));
    let gth = gs.iter().zip(&hs).fold(DVector::<T>::zeros(dim), |acc, (g, h)| acc + g.tr_mul(h));
    let lip = singular_extremes_dense(&gram, T::lit(1e-12))?.sigma_max;
    let grad = |x: &DVector<T>| &gram * x - &gth;
    let sol = fista(
        DVector::zeros(dim),
        lip,
        grad,
        |t, v| Ok(prox_l1(t * tau_sum, v.as_slice())),
        T::lit(1e-13),
        2_000_000,
    )?;
    let x_star = sol.x;

    // Dual multipliers: y_i = (tau_i / tau_sum) s with s = -sum grad f_i(x*),
    // lam_C = y and lam1_i = -grad f_i(x*) - y_i.
    let s = -grad(&x_star);
    let mut states = zero_states(&network);
    for (i, st) in states.iter_mut().enumerate() {
        let gi = gs[i].tr_mul(&(&gs[i] * &x_star - &hs[i]));
        st.x = x_star.clone();
        st.z = x_star.clone();
        st.y = &s * (taus[i] / tau_sum);
        st.lam2 = st.y.clone();
        st.lam1 = -gi - &st.y;
    }
    let mu = T::one();
    let alpha = T::one();
    let problem = assemble_consensus(&network, mu, alpha)?;
    let c = join_centralized(&network, &states)?;
    let reference = ReferenceSolution::new(&problem, c.x, c.z, c.y, c.lam, "accelerated proximal gradient on the centralized lasso")?;
    let init = problem.zero_state();
    Ok(LassoNetwork {
        network,
        instance: ExampleInstance {
            name: "lasso_network".into(),
            problem,
            init,
            reference: Some(reference),
        },
        x_star,
        taus,
    })
}
