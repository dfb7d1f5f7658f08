//! Model files reuse the WNDR vector format: one record `w:<class_id>` per
//! weight row, one record `b` for the bias, and a `shape` record holding
//! `[dim, n_classes]`. Records are zero-padded to `max(dim, n_classes)`
//! since the format has a single width.

use std::path::Path;

use super::{ClassifierError, LinearClassifier};
use crate::scalar::Scalar;
use crate::store::{read_table, write_table, VectorTable};

fn padded<S: Scalar>(values: &[S], width: usize) -> Vec<f32> {
    let mut v: Vec<f32> = values.iter().map(|x| x.as_f64() as f32).collect();
    v.resize(width, 0.0);
    v
}

pub fn model_table<S: Scalar>(model: &LinearClassifier<S>) -> VectorTable {
    let (c, dim) = (model.n_classes(), model.dim());
    let width = dim.max(c).max(2);
    let mut table = VectorTable::new(width);
    let push = |t: &mut VectorTable, k: String, v: Vec<f32>| t.push(k, &v).expect("model parameters are finite");
    push(&mut table, "shape".into(), padded(&[S::of_usize(dim), S::of_usize(c)], width));
    for class in 0..c {
        push(&mut table, format!("w:{class}"), padded(model.weight_row(class), width));
    }
    push(&mut table, "b".into(), padded(model.bias(), width));
    table
}

pub fn save_model<S: Scalar>(path: impl AsRef<Path>, model: &LinearClassifier<S>) -> Result<(), ClassifierError> {
    Ok(write_table(path, &model_table(model))?)
}

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<LinearClassifier<S>, ClassifierError> {
    model_from_table(&read_table(path)?)
}

pub fn model_from_table<S: Scalar>(table: &VectorTable) -> Result<LinearClassifier<S>, ClassifierError> {
    let missing = |k: &str| ClassifierError::ModelFormat(format!("missing record {k:?}"));
    let n_weight_rows = table.keys().iter().filter(|k| k.starts_with("w:")).count();
    let (dim, c) = match table.get("shape") {
        Some(shape) => (shape[0] as usize, shape[1] as usize),
        None => (table.dim(), n_weight_rows),
    };
    if c != n_weight_rows || dim > table.dim() || c > table.dim() {
        return Err(ClassifierError::ModelFormat(format!("shape {dim}x{c} does not fit the file")));
    }
    let mut weights = Vec::with_capacity(c * dim);
    for class in 0..c {
        let key = format!("w:{class}");
        let row = table.get(&key).ok_or_else(|| missing(&key))?;
        weights.extend(row[..dim].iter().map(|&x| S::of_f32(x)));
    }
    let bias = table.get("b").ok_or_else(|| missing("b"))?[..c].iter().map(|&x| S::of_f32(x)).collect();
    LinearClassifier::from_parts(c, dim, weights, bias, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_more_dims_than_classes() {
        let model = LinearClassifier::from_parts(2, 3, vec![1.0f64, 2.0, 3.0, -1.0, -2.0, -3.0], vec![0.5, -0.5], 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.wndr");
        save_model(&p, &model).unwrap();
        let back: LinearClassifier<f64> = load_model(&p).unwrap();
        assert_eq!(back, model);
        let t = read_table(&p).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("b").unwrap(), &[0.5, -0.5, 0.0]);
        assert_eq!(t.get("w:1").unwrap(), &[-1.0, -2.0, -3.0]);
    }

    #[test]
    fn round_trip_more_classes_than_dims() {
        let model = LinearClassifier::from_parts(4, 1, vec![1.0f32, 2.0, 3.0, 4.0], vec![0.1, 0.2, 0.3, 0.4], 0).unwrap();
        let back: LinearClassifier<f32> = model_from_table(&model_table(&model)).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn missing_records_fail() {
        let mut t = VectorTable::new(2);
        t.push("w:0", &[1.0, 2.0]).unwrap();
        assert!(matches!(model_from_table::<f64>(&t), Err(ClassifierError::ModelFormat(_))));
    }
}
