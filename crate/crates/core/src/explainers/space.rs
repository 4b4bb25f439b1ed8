use crate::model::{FeatureEncoding, Model};
use crate::scalar::Scalar;
use crate::schema::{FeatureSchema, FeatureValue, Instance};

#[derive(Debug, Clone)]
struct ContDim<T> {
    feature: usize,
    offset: usize,
    /// Scaled query coordinate.
    origin: T,
    inv_width: T,
}

#[derive(Debug, Clone)]
struct CatDim {
    feature: usize,
    offset: usize,
    categories: Vec<String>,
    origin: Option<usize>,
}

/// Coordinates of a candidate relative to the query: scaled offsets of the
/// mutable continuous features and the chosen category of each mutable
/// categorical. Untouched coordinates decode to the query's exact values.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T> {
    pub delta: Vec<T>,
    pub cats: Vec<Option<usize>>,
}

/// The part of feature space an explainer may move in, expressed in the
/// model's scaled input units. Continuous features with a zero-width range
/// are left out since the model cannot see them.
#[derive(Debug, Clone)]
pub struct SearchSpace<'q, T: Scalar> {
    query: &'q Instance<T>,
    /// Encoded query.
    z0: Vec<T>,
    cont: Vec<ContDim<T>>,
    cats: Vec<CatDim>,
}

impl<'q, T: Scalar> SearchSpace<'q, T> {
    pub fn new(
        model: &Model<T>,
        schema: &FeatureSchema<T>,
        query: &'q Instance<T>,
        respect_immutable: bool,
    ) -> Self {
        let enc = model.encoder();
        let mut cont = Vec::new();
        let mut cats = Vec::new();
        for (j, f) in enc.features().iter().enumerate() {
            if respect_immutable && schema.feature(j).immutable {
                continue;
            }
            match (f, &query.values[j]) {
                (FeatureEncoding::Scaled { lo, inv_width }, FeatureValue::Num(v)) => {
                    if *inv_width > T::zero() {
                        cont.push(ContDim {
                            feature: j,
                            offset: enc.offset(j),
                            origin: (*v - *lo) * *inv_width,
                            inv_width: *inv_width,
                        });
                    }
                }
                (FeatureEncoding::OneHot { categories }, FeatureValue::Cat(c)) => {
                    if categories.len() > 1 {
                        cats.push(CatDim {
                            feature: j,
                            offset: enc.offset(j),
                            origin: categories.iter().position(|s| s == c),
                            categories: categories.clone(),
                        });
                    }
                }
                _ => {}
            }
        }
        Self {
            query,
            z0: enc.encode(query),
            cont,
            cats,
        }
    }

    pub fn query(&self) -> &Instance<T> {
        self.query
    }

    pub fn n_cont(&self) -> usize {
        self.cont.len()
    }

    pub fn n_cat(&self) -> usize {
        self.cats.len()
    }

    pub fn dims(&self) -> usize {
        self.cont.len() + self.cats.len()
    }

    /// Schema index of continuous dimension `k`.
    pub fn cont_feature(&self, k: usize) -> usize {
        self.cont[k].feature
    }

    /// Schema index of categorical dimension `k`.
    pub fn cat_feature(&self, k: usize) -> usize {
        self.cats[k].feature
    }

    pub fn n_categories(&self, k: usize) -> usize {
        self.cats[k].categories.len()
    }

    pub fn origin(&self) -> Point<T> {
        Point {
            delta: vec![T::zero(); self.cont.len()],
            cats: self.cats.iter().map(|c| c.origin).collect(),
        }
    }

    pub fn cat_changed(&self, p: &Point<T>, k: usize) -> bool {
        p.cats[k] != self.cats[k].origin
    }

    /// Restricts continuous offsets so that the scaled value stays inside
    /// the training range, or between the range and the query if the query
    /// lies outside it.
    pub fn clamp(&self, p: &mut Point<T>) {
        for (d, c) in p.delta.iter_mut().zip(&self.cont) {
            let lo = T::zero().min(c.origin) - c.origin;
            let hi = T::one().max(c.origin) - c.origin;
            *d = d.max(lo).min(hi);
        }
    }

    pub fn decode(&self, p: &Point<T>) -> Instance<T> {
        let mut x = Instance::new(self.query.values.clone());
        for (d, c) in p.delta.iter().zip(&self.cont) {
            if *d != T::zero() {
                if let FeatureValue::Num(v) = &mut x.values[c.feature] {
                    *v = *v + *d / c.inv_width;
                }
            }
        }
        for (k, c) in self.cats.iter().enumerate() {
            if p.cats[k] != c.origin {
                if let Some(i) = p.cats[k] {
                    x.values[c.feature] = FeatureValue::Cat(c.categories[i].clone());
                }
            }
        }
        x
    }

    /// Model input for `p`, without going through [`Instance`].
    pub fn encode(&self, p: &Point<T>) -> Vec<T> {
        let mut z = self.z0.clone();
        for (d, c) in p.delta.iter().zip(&self.cont) {
            z[c.offset] = c.origin + *d;
        }
        for (k, c) in self.cats.iter().enumerate() {
            if p.cats[k] != c.origin {
                let block = &mut z[c.offset..c.offset + c.categories.len()];
                block.fill(T::zero());
                if let Some(i) = p.cats[k] {
                    block[i] = T::one();
                }
            }
        }
        z
    }

    /// `p(class)` at `p` and its gradient along each continuous dimension.
    pub fn gradient(&self, model: &Model<T>, p: &Point<T>, class: usize) -> (T, Vec<T>) {
        let (prob, dz) = model.proba_gradient_encoded(&self.encode(p), class);
        (prob, self.cont.iter().map(|c| dz[c.offset]).collect())
    }

    pub fn proba(&self, model: &Model<T>, p: &Point<T>, class: usize) -> T {
        model.predict_proba_encoded(&self.encode(p))[class]
    }

    pub fn predict(&self, model: &Model<T>, p: &Point<T>) -> usize {
        model.predict_encoded(&self.encode(p))
    }

    /// L1 size of the move: scaled continuous offsets plus one per changed
    /// category.
    pub fn l1(&self, p: &Point<T>) -> T {
        let cont: T = p.delta.iter().map(|d| d.abs()).sum();
        cont + T::from_usize_lossy(self.changed_cats(p))
    }

    pub fn changed_cats(&self, p: &Point<T>) -> usize {
        (0..self.cats.len()).filter(|&k| self.cat_changed(p, k)).count()
    }

    /// Overlap-plus-Euclidean distance between two points, matching HEOM on
    /// the searchable features.
    pub fn between(&self, a: &Point<T>, b: &Point<T>) -> T {
        let mut s = T::zero();
        for (x, y) in a.delta.iter().zip(&b.delta) {
            let d = (*x - *y).abs().min(T::one());
            s = s + d * d;
        }
        for (x, y) in a.cats.iter().zip(&b.cats) {
            if x != y {
                s = s + T::one();
            }
        }
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dense, Encoder};
    use crate::schema::FeatureSpec;

    fn setup() -> (FeatureSchema<f64>, Model<f64>) {
        let s = FeatureSchema::new(vec![
            FeatureSpec::continuous("a").with_range(0.0, 10.0),
            FeatureSpec::continuous("flat").with_range(3.0, 3.0),
            FeatureSpec::categorical("c", ["u", "v"]),
            FeatureSpec::continuous("age").with_range(18.0, 90.0).immutable(),
        ])
        .unwrap();
        let enc = Encoder::from_schema(&s).unwrap();
        let layers = [Dense::zeros(enc.dim(), 16), Dense::zeros(16, 16), Dense::zeros(16, 2)];
        let m = Model::from_parts(enc, layers, vec!["n".into(), "p".into()], s.hash()).unwrap();
        (s, m)
    }

    fn q() -> Instance<f64> {
        Instance::new(vec![
            FeatureValue::Num(2.5),
            FeatureValue::Num(3.0),
            FeatureValue::Cat("u".into()),
            FeatureValue::Num(40.0),
        ])
    }

    #[test]
    fn dims_skip_flat_and_immutable() {
        let (s, m) = setup();
        let q = q();
        let sp = SearchSpace::new(&m, &s, &q, true);
        assert_eq!((sp.n_cont(), sp.n_cat()), (1, 1));
        let sp = SearchSpace::new(&m, &s, &q, false);
        assert_eq!((sp.n_cont(), sp.n_cat()), (2, 1));
    }

    #[test]
    fn origin_decodes_exactly() {
        let (s, m) = setup();
        let q = q();
        let sp = SearchSpace::new(&m, &s, &q, true);
        assert!(sp.decode(&sp.origin()).same_values(&q));
    }

    #[test]
    fn decode_and_clamp() {
        let (s, m) = setup();
        let q = q();
        let sp = SearchSpace::new(&m, &s, &q, true);
        let mut p = sp.origin();
        p.delta[0] = 5.0;
        p.cats[0] = Some(1);
        sp.clamp(&mut p);
        assert!((p.delta[0] - 0.75).abs() < 1e-12);
        let x = sp.decode(&p);
        assert_eq!(x.num(0), Some(10.0));
        assert_eq!(x.cat(2), Some("v"));
        assert_eq!(sp.encode(&p), m.encoder().encode(&x));
        assert!((sp.l1(&p) - 1.75).abs() < 1e-12);
        assert!((sp.between(&p, &sp.origin()) - (0.75f64 * 0.75 + 1.0).sqrt()).abs() < 1e-12);
    }
}
