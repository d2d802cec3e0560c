use std::fs::File;
use std::path::Path;

use rand::Rng;

use crate::decision::GroundTruth;
use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::rng::{self, Stream};

/// Conversion of model inputs to and from CSV columns.
pub trait InputCodec: Sized {
    fn to_columns(&self) -> Vec<String>;
    fn from_columns(cols: &[&str]) -> Result<Self>;
}

impl InputCodec for usize {
    fn to_columns(&self) -> Vec<String> {
        vec![self.to_string()]
    }

    fn from_columns(cols: &[&str]) -> Result<Self> {
        match cols {
            [one] => one
                .trim()
                .parse()
                .map_err(|e| Error::invalid(format!("bad input cell {one:?}: {e}"))),
            _ => Err(Error::invalid("categorical inputs take exactly one column")),
        }
    }
}

impl InputCodec for Vec<f64> {
    fn to_columns(&self) -> Vec<String> {
        self.iter().map(|v| v.to_string()).collect()
    }

    fn from_columns(cols: &[&str]) -> Result<Self> {
        cols.iter()
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad feature {c:?}: {e}")))
            })
            .collect()
    }
}

/// Draws `y` from a probability vector.
pub fn sample_class<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left u above the cumulative sum; take the last class with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `n` i.i.d. draws: `x` from the truth's marginal, then `y ~ f(·|x)`.
/// Identical seeds give identical datasets.
pub fn generate_dataset<T: GroundTruth>(
    truth: &T,
    n: usize,
    seed: u64,
) -> Result<Dataset<T::Input>> {
    let mut rng = rng::stream(seed, &[Stream::Data as u64]);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let x = truth.marginal().sample(&mut rng);
        let y = sample_class(&truth.conditional(&x)?, &mut rng);
        records.push((x, y));
    }
    Ok(Dataset::new(records))
}

/// Writes `x_1..x_m, y` with 1-based class labels.
pub fn write_dataset_csv<X: InputCodec>(data: &Dataset<X>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let width = data
        .records
        .first()
        .map_or(1, |(x, _)| x.to_columns().len());
    let mut header: Vec<String> = (1..=width).map(|i| format!("x_{i}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(csv_err)?;
    for (x, y) in &data.records {
        let mut row = x.to_columns();
        row.push((y + 1).to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset_csv<X: InputCodec>(path: &Path) -> Result<Dataset<X>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().next_back() != Some("y") {
        return Err(Error::invalid(format!(
            "{}: last column must be `y`",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        let cols: Vec<&str> = row.iter().collect();
        let (xs, y) = cols.split_at(cols.len() - 1);
        let label: usize = y[0]
            .trim()
            .parse()
            .map_err(|e| Error::invalid(format!("bad class label {:?}: {e}", y[0])))?;
        if label == 0 {
            return Err(Error::invalid("class labels are 1-based"));
        }
        records.push((X::from_columns(xs)?, label - 1));
    }
    Ok(Dataset::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{ModelTruth, TableTruth, XMarginal};
    use crate::models::SoftmaxLinearModel;
    use std::sync::Arc;

    #[test]
    fn empty_and_deterministic() {
        let t = TableTruth::single(vec![0.4, 0.6]).unwrap();
        assert!(generate_dataset(&t, 0, 1).unwrap().is_empty());
        assert_eq!(
            generate_dataset(&t, 50, 9).unwrap(),
            generate_dataset(&t, 50, 9).unwrap()
        );
        assert_ne!(
            generate_dataset(&t, 50, 9).unwrap(),
            generate_dataset(&t, 50, 10).unwrap()
        );
        let sure = TableTruth::single(vec![1.0, 0.0]).unwrap();
        assert!(generate_dataset(&sure, 200, 3)
            .unwrap()
            .records
            .iter()
            .all(|(_, y)| *y == 0));
    }

    #[test]
    fn class_frequencies_concentrate() {
        let t = TableTruth::new(
            vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let n = 10_000;
        let data = generate_dataset(&t, n, 77).unwrap();
        for x in 0..2 {
            let cell: Vec<usize> = data
                .records
                .iter()
                .filter(|(xi, _)| *xi == x)
                .map(|(_, y)| *y)
                .collect();
            let m = cell.len() as f64;
            let f = t.conditional(&x).unwrap();
            for k in 0..3 {
                let freq = cell.iter().filter(|&&y| y == k).count() as f64 / m;
                assert!((freq - f[k]).abs() < 3.0 / m.sqrt());
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let model = SoftmaxLinearModel::new(3, 2).unwrap();
        let marginal = XMarginal::Sampler(Arc::new(|r: &mut crate::rng::StreamRng| {
            vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]
        }));
        let truth = ModelTruth::new(model, vec![0.5, -0.2, 1.0, 0.3], marginal).unwrap();
        let data = generate_dataset(&truth, 25, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_dataset_csv(&data, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x_1,x_2,y\n"));
        let back: Dataset<Vec<f64>> = read_dataset_csv(&path).unwrap();
        assert_eq!(back, data);
        let missing = dir.path().join("nope").join("data.csv");
        let err = write_dataset_csv(&data, &missing).unwrap_err().to_string();
        assert!(err.contains("nope"));
    }
}
