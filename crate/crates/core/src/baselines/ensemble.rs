use rayon::prelude::*;

use super::tree::{tree_fit_with, RegressionTree, TreeParams};
use crate::numcore::derive_seed;
use crate::{Error, Matrix, Result, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbrParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbrParams {
    fn default() -> Self {
        Self { n_trees: 100, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RfParams {
    pub n_trees: usize,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self { n_trees: 100, max_features: None, bootstrap: true, max_depth: None, min_samples_leaf: 1, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnsembleKind {
    /// Prediction `initial + learning_rate * sum(tree outputs)`.
    Gbr { learning_rate: f64, initial: f64 },
    /// Prediction is the mean tree output.
    Rf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub trees: Vec<RegressionTree>,
}

impl Ensemble {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::Gbr { learning_rate, initial } => {
                initial + learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
            }
            EnsembleKind::Rf => {
                if self.trees.is_empty() {
                    return 0.0;
                }
                self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
            }
        }
    }

    /// Boosted prediction after 0, 1, ..., all stages (GBR only; for a
    /// forest this is the running mean).
    pub fn staged_predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trees.len() + 1);
        match self.kind {
            EnsembleKind::Gbr { learning_rate, initial } => {
                let mut acc = initial;
                out.push(acc);
                for t in &self.trees {
                    acc += learning_rate * t.predict(x);
                    out.push(acc);
                }
            }
            EnsembleKind::Rf => {
                let mut sum = 0.0;
                out.push(0.0);
                for (i, t) in self.trees.iter().enumerate() {
                    sum += t.predict(x);
                    out.push(sum / (i + 1) as f64);
                }
            }
        }
        out
    }

    /// Text form:
    ///
    /// ```text
    /// ensemble gbr            # or: ensemble rf
    /// learning_rate 0.1       # gbr only
    /// initial 3.25            # gbr only
    /// trees 100
    /// tree 7                  # then 7 preorder node lines, repeated per tree
    /// S 3 0.5
    /// L 1.25
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.kind {
            EnsembleKind::Gbr { learning_rate, initial } => {
                out.push_str(&format!("ensemble gbr\nlearning_rate {learning_rate}\ninitial {initial}\n"));
            }
            EnsembleKind::Rf => out.push_str("ensemble rf\n"),
        }
        out.push_str(&format!("trees {}\n", self.trees.len()));
        for t in &self.trees {
            out.push_str(&t.to_text());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("expected `{name}`")))?;
            line.strip_prefix(name)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected `{name}`, got `{line}`")))
        };
        let number = |s: String| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`"))) };
        let kind = match field("ensemble")?.as_str() {
            "gbr" => {
                let learning_rate = number(field("learning_rate")?)?;
                let initial = number(field("initial")?)?;
                EnsembleKind::Gbr { learning_rate, initial }
            }
            "rf" => EnsembleKind::Rf,
            other => return Err(Error::Parse(format!("unknown ensemble kind `{other}`"))),
        };
        let count: usize = field("trees")?.parse().map_err(|_| Error::Parse("bad tree count".into()))?;
        let trees = (0..count).map(|_| RegressionTree::from_lines(&mut lines)).collect::<Result<Vec<_>>>()?;
        if let Some(extra) = lines.next() {
            return Err(Error::Parse(format!("trailing content `{extra}`")));
        }
        Ok(Self { kind, trees })
    }
}

fn check(x: &Matrix, y: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::shape(format!("{} design rows but {} targets", x.rows(), y.len())));
    }
    if x.rows() < 2 {
        return Err(Error::argument("ensembles need at least two samples"));
    }
    Ok(())
}

/// Least-squares gradient boosting: start from `mean(y)`, then each stage
/// fits a depth-limited tree to the current residuals.
pub fn gbr_fit(x: &Matrix, y: &[f64], params: GbrParams) -> Result<Ensemble> {
    check(x, y)?;
    let n = x.rows();
    let initial = y.iter().sum::<f64>() / n as f64;
    let rows: Vec<usize> = (0..n).collect();
    let tree_params = TreeParams { max_depth: Some(params.max_depth), min_samples_leaf: params.min_samples_leaf, max_features: None };
    let mut current = vec![initial; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let residual: Vec<f64> = y.iter().zip(&current).map(|(t, p)| t - p).collect();
        let tree = tree_fit_with(x, &residual, &rows, tree_params, None)?;
        for (i, c) in current.iter_mut().enumerate() {
            *c += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    Ok(Ensemble { kind: EnsembleKind::Gbr { learning_rate: params.learning_rate, initial }, trees })
}

/// Bagged regression trees. Tree `i` draws its bootstrap sample and feature
/// subsets from a stream seeded by `(seed, i)`, so trees can be grown in
/// parallel and the forest is still reproducible.
pub fn rf_fit(x: &Matrix, y: &[f64], params: RfParams) -> Result<Ensemble> {
    check(x, y)?;
    if params.max_features == Some(0) {
        return Err(Error::argument("max_features must be at least 1"));
    }
    let n = x.rows();
    let tree_params =
        TreeParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf, max_features: params.max_features };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = SeededRng::new(derive_seed(params.seed, i as u64));
            let rows: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.index(n)).collect() } else { (0..n).collect() };
            tree_fit_with(x, y, &rows, tree_params, Some(&mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { kind: EnsembleKind::Rf, trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seed: u64, n: usize, p: usize) -> (Matrix, Vec<f64>) {
        let mut rng = SeededRng::new(seed);
        let x = Matrix::uniform(&mut rng, n, p, 1.0).unwrap();
        let y = (0..n).map(|i| x.get(i, 0).sin() * 3.0 + x.get(i, p - 1) + 0.3 * rng.normal()).collect();
        (x, y)
    }

    fn mse(e: &Ensemble, x: &Matrix, y: &[f64]) -> f64 {
        (0..x.rows()).map(|i| (e.predict(x.row(i)) - y[i]).powi(2)).sum::<f64>() / x.rows() as f64
    }

    #[test]
    fn constant_stage_predicts_mean() {
        let (x, y) = data(1, 30, 2);
        let mean = y.iter().sum::<f64>() / 30.0;
        let e = gbr_fit(&x, &y, GbrParams { n_trees: 1, learning_rate: 1.0, max_depth: 0, min_samples_leaf: 1 }).unwrap();
        for i in 0..30 {
            assert!((e.predict(x.row(i)) - mean).abs() < 1e-12);
        }
        let none = gbr_fit(&x, &y, GbrParams { n_trees: 0, ..Default::default() }).unwrap();
        assert_eq!(none.predict(x.row(0)), mean);
    }

    #[test]
    fn zero_learning_rate_predicts_mean() {
        let (x, y) = data(2, 40, 3);
        let mean = y.iter().sum::<f64>() / 40.0;
        let e = gbr_fit(&x, &y, GbrParams { learning_rate: 0.0, n_trees: 5, ..Default::default() }).unwrap();
        for i in 0..40 {
            assert_eq!(e.predict(x.row(i)), mean);
        }
    }

    #[test]
    fn boosting_never_increases_training_error() {
        let (x, y) = data(3, 80, 3);
        let e = gbr_fit(&x, &y, GbrParams { n_trees: 30, ..Default::default() }).unwrap();
        let staged: Vec<Vec<f64>> = (0..80).map(|i| e.staged_predict(x.row(i))).collect();
        let mut prev = f64::INFINITY;
        for s in 0..=30 {
            let err: f64 = (0..80).map(|i| (staged[i][s] - y[i]).powi(2)).sum();
            assert!(err <= prev + 1e-9, "stage {s}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn step_function_is_learned() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let x = Matrix::from_rows(&xs.iter().map(|&v| [v]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = xs.iter().map(|&v| if v < 0.37 { -1.0 } else { 2.0 }).collect();
        let e = gbr_fit(&x, &y, GbrParams { n_trees: 50, ..Default::default() }).unwrap();
        let mean = y.iter().sum::<f64>() / 100.0;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 100.0;
        assert!(mse(&e, &x, &y) < 0.01 * var);
    }

    #[test]
    fn single_unbootstrapped_tree_memorizes() {
        let (x, y) = data(4, 50, 3);
        let e = rf_fit(&x, &y, RfParams { n_trees: 1, bootstrap: false, ..Default::default() }).unwrap();
        for i in 0..50 {
            assert_eq!(e.predict(x.row(i)), y[i]);
        }
    }

    #[test]
    fn forest_predictions_stay_in_target_range() {
        let (x, y) = data(5, 60, 4);
        let e = rf_fit(&x, &y, RfParams { n_trees: 20, seed: 9, ..Default::default() }).unwrap();
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut rng = SeededRng::new(6);
        for _ in 0..100 {
            let q: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let p = e.predict(&q);
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn forest_is_reproducible_and_beats_its_average_tree() {
        let (x, y) = data(7, 60, 3);
        let params = RfParams { n_trees: 15, seed: 21, max_features: Some(2), ..Default::default() };
        let a = rf_fit(&x, &y, params).unwrap();
        assert_eq!(a, rf_fit(&x, &y, params).unwrap());
        let tree_mse: f64 = a
            .trees
            .iter()
            .map(|t| (0..60).map(|i| (t.predict(x.row(i)) - y[i]).powi(2)).sum::<f64>() / 60.0)
            .sum::<f64>()
            / 15.0;
        assert!(mse(&a, &x, &y) <= tree_mse + 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let (x, y) = data(8, 40, 2);
        for e in [
            gbr_fit(&x, &y, GbrParams { n_trees: 4, ..Default::default() }).unwrap(),
            rf_fit(&x, &y, RfParams { n_trees: 3, ..Default::default() }).unwrap(),
        ] {
            assert_eq!(Ensemble::from_text(&e.to_text()).unwrap(), e);
        }
        assert!(matches!(Ensemble::from_text("ensemble xgb\n"), Err(Error::Parse(_))));
    }
}
