use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::space::{Point, SearchSpace};
use super::{fingerprint, stream, DiverseConfig, ExplainContext, ExplainerKind, Proposal, WachterConfig};
use crate::scalar::Scalar;
use crate::schema::Instance;

/// Settings of one proximal gradient run.
struct Descent<'a, T: Scalar> {
    space: &'a SearchSpace<'a, T>,
    ctx: &'a ExplainContext<'a, T>,
    desired: usize,
    lambda: T,
    step: T,
    steps: usize,
    flip_every: usize,
    /// Points to stay away from, with the penalty weight.
    repel: &'a [Point<T>],
    mu: T,
}

struct Trajectory<T> {
    last: Point<T>,
    /// Iterates classified as the desired class, in step order.
    valid: Vec<Point<T>>,
}

impl<T: Scalar> Descent<'_, T> {
    fn is_desired(&self, prob: T) -> bool {
        let half = T::lit(0.5);
        prob > half || (prob == half && self.desired == 0)
    }

    fn loss(&self, p: &Point<T>) -> T {
        let prob = self.space.proba(self.ctx.model, p, self.desired);
        let miss = prob - T::one();
        self.lambda * miss * miss + self.space.l1(p) + self.penalty(p)
    }

    fn penalty(&self, p: &Point<T>) -> T {
        self.repel
            .iter()
            .map(|q| self.mu / (T::one() + self.space.between(p, q)))
            .sum()
    }

    /// Tries every category of every searchable categorical and keeps the
    /// single best strict improvement per feature.
    fn flip_pass(&self, p: &mut Point<T>) {
        let origin = self.space.origin();
        let mut current = self.loss(p);
        for k in 0..self.space.n_cat() {
            let mut options: Vec<Option<usize>> = (0..self.space.n_categories(k)).map(Some).collect();
            if origin.cats[k].is_none() {
                options.push(None);
            }
            let keep = p.cats[k];
            let mut best = (current, keep);
            for o in options {
                if o == keep {
                    continue;
                }
                p.cats[k] = o;
                let l = self.loss(p);
                if l < best.0 {
                    best = (l, o);
                }
            }
            p.cats[k] = best.1;
            current = best.0;
        }
    }

    fn run(&self, start: Point<T>) -> Trajectory<T> {
        let mut p = start;
        let mut valid = Vec::new();
        let two = T::lit(2.0);
        for t in 0..self.steps {
            let (prob, grad) = self.space.gradient(self.ctx.model, &p, self.desired);
            if self.is_desired(prob) {
                valid.push(p.clone());
            }
            let scale = two * self.lambda * (prob - T::one());
            let mut pen = vec![T::zero(); p.delta.len()];
            for q in self.repel {
                let d = self.space.between(&p, q);
                if d > T::zero() {
                    let w = self.mu / ((T::one() + d) * (T::one() + d) * d);
                    for (g, (a, b)) in pen.iter_mut().zip(p.delta.iter().zip(&q.delta)) {
                        *g = *g - w * (*a - *b);
                    }
                }
            }
            for ((d, g), pg) in p.delta.iter_mut().zip(&grad).zip(&pen) {
                let v = *d - self.step * (scale * *g + *pg);
                // proximal step for the L1 distance term
                *d = if v > self.step {
                    v - self.step
                } else if v < -self.step {
                    v + self.step
                } else {
                    T::zero()
                };
            }
            self.space.clamp(&mut p);
            if (t + 1) % self.flip_every == 0 {
                self.flip_pass(&mut p);
            }
        }
        if self.is_desired(self.space.proba(self.ctx.model, &p, self.desired)) {
            valid.push(p.clone());
        }
        Trajectory { last: p, valid }
    }
}

/// Gradient descent on `lambda * (p_target - 1)^2 + L1 distance` in scaled
/// space, with periodic greedy categorical passes.
///
/// The first proposal is the last valid iterate (or the final iterate if
/// none was valid); up to `k - 1` further proposals are drawn from the other
/// valid iterates of the same trajectory.
pub fn wachter_lite<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    cfg: &WachterConfig,
    seed: u64,
) -> Vec<Proposal<T>> {
    let space = SearchSpace::new(ctx.model, ctx.data.schema(), x, cfg.respect_immutable);
    if space.dims() == 0 {
        return Vec::new();
    }
    let descent = Descent {
        space: &space,
        ctx,
        desired,
        lambda: T::lit(cfg.lambda),
        step: T::lit(cfg.step_size),
        steps: cfg.max_steps,
        flip_every: cfg.flip_every,
        repel: &[],
        mu: T::zero(),
    };
    let mut traj = descent.run(space.origin());
    let head = traj.valid.pop().unwrap_or_else(|| traj.last.clone());
    let mut out = vec![Proposal {
        x_prime: space.decode(&head),
        restart: 0,
    }];
    traj.valid.dedup();
    traj.valid.retain(|p| *p != head);
    let extra = (cfg.k - 1).min(traj.valid.len());
    if extra > 0 {
        let mut rng = stream(seed, ExplainerKind::WachterLite, 0, fingerprint(x));
        let mut picked = sample(&mut rng, traj.valid.len(), extra).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().enumerate().map(|(i, j)| Proposal {
            x_prime: space.decode(&traj.valid[j]),
            restart: i + 1,
        }));
    }
    out
}

/// Repeated gradient runs from randomised starts; each run is pushed away
/// from the results of earlier runs by `diversity_weight * sum 1 / (1 + d)`.
/// Loss weight, step size and step budget come from the gradient explainer.
pub fn diverse_restarts<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    cfg: &DiverseConfig,
    grad: &WachterConfig,
    seed: u64,
) -> Vec<Proposal<T>> {
    let space = SearchSpace::new(ctx.model, ctx.data.schema(), x, cfg.respect_immutable);
    if space.dims() == 0 {
        return Vec::new();
    }
    let noise = Normal::new(0.0, cfg.init_noise.max(0.0)).expect("finite noise scale");
    let fp = fingerprint(x);
    let mut finals: Vec<Point<T>> = Vec::with_capacity(cfg.restarts);
    let mut out = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let mut rng = stream(seed, ExplainerKind::DiverseRestarts, r, fp);
        let mut start = space.origin();
        for d in &mut start.delta {
            *d = T::lit(noise.sample(&mut rng));
        }
        for k in 0..space.n_cat() {
            if rng.gen::<f64>() < cfg.flip_probability {
                start.cats[k] = Some(rng.gen_range(0..space.n_categories(k)));
            }
        }
        space.clamp(&mut start);
        let descent = Descent {
            space: &space,
            ctx,
            desired,
            lambda: T::lit(grad.lambda),
            step: T::lit(grad.step_size),
            steps: grad.max_steps,
            flip_every: grad.flip_every,
            repel: &finals,
            mu: T::lit(cfg.diversity_weight),
        };
        let mut traj = descent.run(start);
        let end = traj.valid.pop().unwrap_or(traj.last);
        out.push(Proposal {
            x_prime: space.decode(&end),
            restart: r,
        });
        finals.push(end);
    }
    out
}
