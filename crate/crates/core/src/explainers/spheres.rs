use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::space::{Point, SearchSpace};
use super::{fingerprint, stream, ExplainContext, ExplainerKind, GrowingSpheresConfig, Proposal};
use crate::scalar::Scalar;
use crate::schema::Instance;

/// One spherical layer `lo <= r < hi` that was sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub lo: f64,
    pub hi: f64,
    /// Samples that the model assigned to the desired class.
    pub enemies: usize,
}

/// Trace of a single restart.
#[derive(Debug, Clone)]
pub struct SpheresRun<T: Scalar> {
    pub x_prime: Option<Instance<T>>,
    /// Layers in the order they were sampled: a shrinking phase followed by
    /// an expanding phase.
    pub layers: Vec<Layer>,
    /// Distance to the query of the best hit each time it improved. Strictly
    /// decreasing.
    pub improvements: Vec<T>,
    pub samples: usize,
}

/// Random search in growing spherical layers around the query, one
/// candidate per restart.
pub fn growing_spheres<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    cfg: &GrowingSpheresConfig,
    seed: u64,
) -> Vec<Proposal<T>> {
    (0..cfg.restarts)
        .filter_map(|r| {
            growing_spheres_restart(x, ctx, desired, cfg, seed, r)
                .x_prime
                .map(|x_prime| Proposal { x_prime, restart: r })
        })
        .collect()
}

pub fn growing_spheres_restart<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    cfg: &GrowingSpheresConfig,
    seed: u64,
    restart: usize,
) -> SpheresRun<T> {
    let space = SearchSpace::new(ctx.model, ctx.data.schema(), x, cfg.respect_immutable);
    let mut rng = stream(seed, ExplainerKind::GrowingSpheres, restart, fingerprint(x));
    let mut run = SpheresRun {
        x_prime: None,
        layers: Vec::new(),
        improvements: Vec::new(),
        samples: 0,
    };
    if space.dims() == 0 {
        return run;
    }
    let origin = space.origin();
    let mut sample_layer = |lo: f64, hi: f64, run: &mut SpheresRun<T>| -> Vec<Point<T>> {
        let n = cfg.samples_per_layer.min(cfg.budget - run.samples);
        run.samples += n;
        let found: Vec<Point<T>> = (0..n)
            .map(|_| sample(&space, &mut rng, lo, hi))
            .filter(|p| space.predict(ctx.model, p) == desired)
            .collect();
        run.layers.push(Layer {
            lo,
            hi,
            enemies: found.len(),
        });
        found
    };

    let nearest = |found: Vec<Point<T>>| {
        found
            .into_iter()
            .map(|p| (space.between(&p, &origin), p))
            .min_by(|a, b| crate::scalar::total_cmp(a.0, b.0))
    };

    // Shrink while the ball still contains enemies, keeping a hit only when
    // it is strictly closer than the best so far.
    let mut radius = cfg.first_radius;
    let mut best: Option<(T, Point<T>)> = None;
    while run.samples < cfg.budget {
        let Some((d, p)) = nearest(sample_layer(0.0, radius, &mut run)) else {
            break;
        };
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            run.improvements.push(d);
            best = Some((d, p));
        }
        radius /= 2.0;
    }
    // Expand outwards from the last empty ball.
    if best.is_none() {
        let mut lo = radius;
        while run.samples < cfg.budget {
            let hi = lo + cfg.layer_width;
            if let Some((d, p)) = nearest(sample_layer(lo, hi, &mut run)) {
                run.improvements.push(d);
                best = Some((d, p));
                break;
            }
            lo = hi;
        }
    }

    let closest = best.map(|(_, p)| p);
    if let Some(mut p) = closest {
        if cfg.sparsify {
            sparsify(&space, ctx, desired, &mut p);
        }
        run.x_prime = Some(space.decode(&p));
    }
    run
}

/// Resets changed coordinates to the query, smallest change first, as long
/// as the desired class holds.
fn sparsify<T: Scalar>(
    space: &SearchSpace<'_, T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    p: &mut Point<T>,
) {
    let origin = space.origin();
    // (size, is_categorical, index)
    let mut changes: Vec<(T, bool, usize)> = p
        .delta
        .iter()
        .enumerate()
        .filter(|(_, d)| **d != T::zero())
        .map(|(k, d)| (d.abs(), false, k))
        .chain(
            (0..space.n_cat())
                .filter(|&k| space.cat_changed(p, k))
                .map(|k| (T::one(), true, k)),
        )
        .collect();
    changes.sort_by(|a, b| crate::scalar::total_cmp(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (_, is_cat, k) in changes {
        let mut trial = p.clone();
        if is_cat {
            trial.cats[k] = origin.cats[k];
        } else {
            trial.delta[k] = T::zero();
        }
        if space.predict(ctx.model, &trial) == desired {
            *p = trial;
        }
    }
}

/// Uniform draw from the shell `lo <= r < hi` of the joint space. Continuous
/// coordinates move by the sampled offset; a categorical coordinate switches
/// to a random other category when its component exceeds one half.
fn sample<T: Scalar>(space: &SearchSpace<'_, T>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point<T> {
    let d = space.dims();
    let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    // radius with density proportional to r^(d-1) on [lo, hi)
    let u: f64 = rng.gen();
    let (a, b) = (lo.powi(d as i32), hi.powi(d as i32));
    let r = (a + u * (b - a)).powf(1.0 / d as f64);
    for v in &mut dir {
        *v *= r / norm;
    }
    let mut p = space.origin();
    for (k, v) in dir[..space.n_cont()].iter().enumerate() {
        p.delta[k] = T::lit(*v);
    }
    for (k, v) in dir[space.n_cont()..].iter().enumerate() {
        if v.abs() > 0.5 {
            let n = space.n_categories(k);
            let current = p.cats[k];
            let mut pick = rng.gen_range(0..n);
            if Some(pick) == current {
                pick = (pick + 1 + rng.gen_range(0..n - 1)) % n;
            }
            p.cats[k] = Some(pick);
        }
    }
    space.clamp(&mut p);
    p
}
