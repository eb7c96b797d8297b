#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sttv::likelihood::{evaluate, CoefficientBlock, Effect, LikelihoodWorkspace, Order};
use sttv::rng::CounterRng;
use sttv::splines::make_basis;
use sttv::{Observation, SurvivalDataset};

/// Small random dataset with occasional tied times.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> SurvivalDataset {
    let mut rng = CounterRng::new(seed, 41);
    let obs = (0..n)
        .map(|_| {
            let raw = rng.uniform_range(0.05, 2.9);
            let time = if rng.uniform() < 0.2 { (raw * 4.0).round().max(1.0) / 4.0 } else { raw };
            let z = (0..p).map(|_| rng.standard_normal()).collect();
            Observation::new(time, rng.uniform() < 0.7, z)
        })
        .collect();
    SurvivalDataset::new(obs, Some(3.0)).expect("valid dataset")
}

/// Unthresholded spline Cox fit coded directly from the definition: brute
/// force risk sets, full basis vectors and plain Newton with step halving.
/// Maximizes `PL(gamma) - rho sum_j gamma_j' G gamma_j`.
pub fn oracle_spline_cox(ds: &SurvivalDataset, k: usize, degree: usize, rho: f64) -> (usize, DMatrix<f64>) {
    let basis = make_basis(k, degree, ds.tau()).unwrap();
    let q = basis.q();
    let p = ds.p();
    let obs = ds.observations();
    let b: Vec<Vec<f64>> = obs.iter().map(|o| basis.eval(o.time.min(ds.tau())).unwrap()).collect();
    let mut gram = DMatrix::zeros(q, q);
    for bi in &b {
        for a in 0..q {
            for c in 0..q {
                gram[(a, c)] += bi[a] * bi[c];
            }
        }
    }
    let design = |l: usize, i: usize| DVector::from_fn(p * q, |r, _| obs[l].covariates[r / q] * b[i][r % q]);
    let eval = |g: &DVector<f64>| -> (f64, DVector<f64>, DMatrix<f64>) {
        let mut f = 0.0;
        let mut grad = DVector::zeros(p * q);
        let mut hess = DMatrix::zeros(p * q, p * q);
        for i in 0..obs.len() {
            if !obs[i].event {
                continue;
            }
            let risk: Vec<usize> = (0..obs.len()).filter(|&l| obs[l].time >= obs[i].time).collect();
            let xs: Vec<DVector<f64>> = risk.iter().map(|&l| design(l, i)).collect();
            let eta: Vec<f64> = xs.iter().map(|x| x.dot(g)).collect();
            let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = eta.iter().map(|e| (e - m).exp()).collect();
            let s: f64 = w.iter().sum();
            let xi = design(i, i);
            f += xi.dot(g) - m - s.ln();
            let mean = xs.iter().zip(&w).fold(DVector::zeros(p * q), |acc, (x, wl)| acc + x * (*wl / s));
            grad += &xi - &mean;
            for (x, wl) in xs.iter().zip(&w) {
                let d = x - &mean;
                hess -= (&d * d.transpose()) * (*wl / s);
            }
        }
        for j in 0..p {
            let gj = DVector::from_fn(q, |r, _| g[j * q + r]);
            let ggj = &gram * &gj;
            f -= rho * gj.dot(&ggj);
            for a in 0..q {
                grad[j * q + a] -= 2.0 * rho * ggj[a];
                for c in 0..q {
                    hess[(j * q + a, j * q + c)] -= 2.0 * rho * gram[(a, c)];
                }
            }
        }
        (f, grad, hess)
    };
    let mut g = DVector::zeros(p * q);
    let (mut f, mut grad, mut hess) = eval(&g);
    for _ in 0..200 {
        if grad.amax() < 1e-10 {
            break;
        }
        let step = (-&hess).lu().solve(&grad).expect("nonsingular");
        let mut t = 1.0;
        loop {
            let cand = &g + &step * t;
            let next = eval(&cand);
            if next.0 >= f - 1e-12 || t < 1e-8 {
                g = cand;
                (f, grad, hess) = next;
                break;
            }
            t *= 0.5;
        }
    }
    (q, DMatrix::from_fn(p, q, |j, r| g[j * q + r]))
}

fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}

fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}

/// Worst relative gradient and Hessian errors against central differences
/// over `instances` random problems.
pub fn derivative_errors(instances: u64) -> (f64, f64) {
    let (mut worst_g, mut worst_h) = (0.0_f64, 0.0_f64);
    for seed in 0..instances {
        let mut rng = CounterRng::new(seed, 77);
        let n = 10 + rng.below(21);
        let p = 1 + rng.below(3);
        let k = 1 + rng.below(3);
        let ds = random_dataset(seed, n, p);
        let basis = make_basis(k, 3, 3.0).unwrap();
        let q = basis.q();
        let ws = LikelihoodWorkspace::new(&ds, &basis, 0.05).unwrap();
        let gamma = DMatrix::from_fn(p, q, |_, _| rng.standard_normal());
        let alphas = (0..p).map(|_| rng.uniform_range(0.2, 1.0)).collect();
        let effect = if seed % 4 == 3 { Effect::Linear } else { Effect::Thresholded { alphas, eta: 0.01 } };
        let cb = CoefficientBlock::new(gamma, effect).unwrap();
        let ev = evaluate(&cb, &ws, Order::Hessian).unwrap();
        let (g, h) = (ev.gradient.unwrap(), ev.hessian.unwrap());
        let x = cb.stacked();
        let step = 1e-5;
        let at = |v: &DVector<f64>, order| evaluate(&cb.with_stacked(v), &ws, order).unwrap();
        let mut fd_g = DVector::zeros(x.len());
        let mut fd_h = DMatrix::zeros(x.len(), x.len());
        for i in 0..x.len() {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += step;
            dn[i] -= step;
            let (eu, ed) = (at(&up, Order::Gradient), at(&dn, Order::Gradient));
            fd_g[i] = (eu.value - ed.value) / (2.0 * step);
            let col = (eu.gradient.unwrap() - ed.gradient.unwrap()) / (2.0 * step);
            fd_h.set_column(i, &col);
        }
        worst_g = worst_g.max(rel_err_vec(&fd_g, &g));
        worst_h = worst_h.max(rel_err_mat(&fd_h, &h));
    }
    (worst_g, worst_h)
}

