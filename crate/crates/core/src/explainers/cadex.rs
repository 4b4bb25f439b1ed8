use super::space::{Point, SearchSpace};
use super::{CadexConfig, ExplainContext, Proposal};
use crate::scalar::{total_cmp, Scalar};
use crate::schema::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Cont(usize),
    Cat(usize, Option<usize>),
}

/// Saliency-masked gradient steps: for each cap `c`, only the `c` features
/// with the largest finite-difference saliency may change. Caps larger than
/// the number of searchable features are skipped.
pub fn cadex_lite<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    cfg: &CadexConfig,
) -> Vec<Proposal<T>> {
    let space = SearchSpace::new(ctx.model, ctx.data.schema(), x, cfg.respect_immutable);
    let ranked = saliency_ranking(&space, ctx, desired, T::lit(cfg.fd_step));
    cfg.caps
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= 1 && c <= ranked.len())
        .map(|(restart, &c)| Proposal {
            x_prime: space.decode(&masked_search(&space, ctx, desired, cfg, &ranked[..c])),
            restart,
        })
        .collect()
}

/// Searchable dimensions ordered by decreasing saliency. Continuous saliency
/// is the central-difference slope of the desired-class probability per
/// scaled unit; categorical saliency is the largest probability gain from
/// switching category, and the dimension carries that best category.
fn saliency_ranking<T: Scalar>(
    space: &SearchSpace<'_, T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    h: T,
) -> Vec<Dim> {
    let origin = space.origin();
    let base = space.proba(ctx.model, &origin, desired);
    let mut scored: Vec<(T, Dim)> = Vec::with_capacity(space.dims());
    for k in 0..space.n_cont() {
        let mut up = origin.clone();
        up.delta[k] = h;
        let mut down = origin.clone();
        down.delta[k] = -h;
        let slope = (space.proba(ctx.model, &up, desired) - space.proba(ctx.model, &down, desired))
            / (h + h);
        scored.push((slope.abs(), Dim::Cont(k)));
    }
    for k in 0..space.n_cat() {
        let mut best = (T::neg_infinity(), None);
        for i in 0..space.n_categories(k) {
            if Some(i) == origin.cats[k] {
                continue;
            }
            let mut p = origin.clone();
            p.cats[k] = Some(i);
            let gain = space.proba(ctx.model, &p, desired) - base;
            if gain > best.0 {
                best = (gain, Some(i));
            }
        }
        scored.push((best.0.max(T::zero()), Dim::Cat(k, best.1)));
    }
    // stable sort keeps schema order among equal saliencies
    scored.sort_by(|a, b| total_cmp(b.0, a.0));
    scored.into_iter().map(|(_, d)| d).collect()
}

fn masked_search<T: Scalar>(
    space: &SearchSpace<'_, T>,
    ctx: &ExplainContext<'_, T>,
    desired: usize,
    cfg: &CadexConfig,
    mask: &[Dim],
) -> Point<T> {
    let mut p = space.origin();
    let mut cont = Vec::new();
    for d in mask {
        match *d {
            Dim::Cont(k) => cont.push(k),
            Dim::Cat(k, Some(i)) => {
                let mut trial = p.clone();
                trial.cats[k] = Some(i);
                if space.proba(ctx.model, &trial, desired) > space.proba(ctx.model, &p, desired) {
                    p = trial;
                }
            }
            Dim::Cat(_, None) => {}
        }
    }
    let step = T::lit(cfg.step_size);
    for _ in 0..cfg.max_steps {
        if space.predict(ctx.model, &p) == desired || cont.is_empty() {
            break;
        }
        let (_, grad) = space.gradient(ctx.model, &p, desired);
        let before = p.delta.clone();
        for &k in &cont {
            if grad[k] > T::zero() {
                p.delta[k] = p.delta[k] + step;
            } else if grad[k] < T::zero() {
                p.delta[k] = p.delta[k] - step;
            }
        }
        space.clamp(&mut p);
        if p.delta == before {
            break;
        }
    }
    p
}
