//! Correlation distances between tree-prediction columns and classical
//! (Torgerson) multidimensional scaling.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::PredictionMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    /// Row-major `B × B`, symmetric with a zero diagonal.
    pub values: Vec<Vec<f64>>,
    /// Columns with zero variance; their correlations were set to 0.
    pub constant_columns: Vec<usize>,
}

/// `D_ij = √((1 − c_ij)/2)` with `c_ij` the Pearson correlation of prediction
/// columns `i` and `j` (population normalisation, which cancels).
pub fn correlation_distance(p: &PredictionMatrix) -> DistanceMatrix {
    let b = p.n_trees();
    let n = p.n_rows() as f64;
    let centred: Vec<Vec<f64>> = (0..b)
        .map(|i| {
            let col = p.column(i);
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|v| v - mean).collect()
        })
        .collect();
    let var: Vec<f64> = centred
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n)
        .collect();
    let constant_columns: Vec<usize> = (0..b).filter(|&i| var[i] <= 0.0).collect();
    let mut values = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in i + 1..b {
            let c = if var[i] > 0.0 && var[j] > 0.0 {
                let cov = centred[i].iter().zip(&centred[j]).map(|(x, y)| x * y).sum::<f64>() / n;
                (cov / (var[i] * var[j]).sqrt()).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let d = ((1.0 - c) / 2.0).sqrt();
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    DistanceMatrix {
        values,
        constant_columns,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsLayout {
    /// `B × dims` coordinates, column-centred.
    pub coordinates: Vec<Vec<f64>>,
    /// Leading eigenvalues of the double-centred matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Kruskal stress-1 of the embedding.
    pub stress: f64,
    /// Some retained eigenvalue was negative and was clamped to zero.
    pub clamped: bool,
}

/// Classical MDS: eigen-decompose `−½ J D² J` and scale the leading
/// eigenvectors by the square roots of their eigenvalues.
#[allow(clippy::needless_range_loop)]
pub fn classical_mds(d: &[Vec<f64>], dims: usize) -> Result<MdsLayout> {
    let b = d.len();
    if b == 0 {
        return Err(Error::invalid("distance matrix is empty"));
    }
    if d.iter().any(|r| r.len() != b) {
        return Err(Error::invalid("distance matrix must be square"));
    }
    for i in 0..b {
        if d[i][i] != 0.0 {
            return Err(Error::invalid(format!(
                "distance matrix diagonal entry {i} is not zero"
            )));
        }
        for j in 0..b {
            let v = d[i][j];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("distance ({i}, {j}) is negative or non-finite")));
            }
            if (v - d[j][i]).abs() > 1e-12 * (1.0 + v.abs()) {
                return Err(Error::invalid(format!(
                    "distance matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if dims == 0 {
        return Err(Error::config("MDS needs at least one dimension"));
    }

    let sq = DMatrix::from_fn(b, b, |i, j| d[i][j] * d[i][j]);
    let row_means: Vec<f64> = (0..b).map(|i| sq.row(i).sum() / b as f64).collect();
    let grand = row_means.iter().sum::<f64>() / b as f64;
    let centred = DMatrix::from_fn(b, b, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(centred);

    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    // Eigenvalues within rounding of zero are zero.
    let tiny = 1e-12 * eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut eigenvalues = Vec::with_capacity(dims);
    let mut clamped = false;
    let mut coordinates = vec![vec![0.0; dims]; b];
    for (k, &idx) in order.iter().take(dims).enumerate() {
        let mut lambda = eig.eigenvalues[idx];
        if lambda <= tiny {
            clamped |= lambda < -tiny;
            lambda = 0.0;
        }
        eigenvalues.push(lambda);
        let v = eig.eigenvectors.column(idx);
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = (0..b).max_by(|&x, &y| v[x].abs().total_cmp(&v[y].abs())).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let s = lambda.sqrt();
        for i in 0..b {
            coordinates[i][k] = sign * v[i] * s;
        }
    }
    eigenvalues.resize(dims.max(eigenvalues.len()), 0.0);

    let stress = kruskal_stress(d, &coordinates);
    Ok(MdsLayout {
        coordinates,
        eigenvalues,
        stress,
        clamped,
    })
}

pub fn pairwise_distances(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let b = points.len();
    let mut out = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in i + 1..b {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    out
}

/// `√(Σ (d_ij − d̂_ij)² / Σ d_ij²)`, with `0/0` read as 0.
pub fn kruskal_stress(d: &[Vec<f64>], coordinates: &[Vec<f64>]) -> f64 {
    let fitted = pairwise_distances(coordinates);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            num += (d[i][j] - fitted[i][j]).powi(2);
            den += d[i][j] * d[i][j];
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Layout CSV: `tree_index, x, y, selected, individual_mspe`.
pub fn write_layout_csv<W: Write>(
    layout: &MdsLayout,
    selected: &[usize],
    individual_mspe: &[f64],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tree_index", "x", "y", "selected", "individual_mspe"])?;
    for (i, c) in layout.coordinates.iter().enumerate() {
        w.write_record([
            i.to_string(),
            c.first().copied().unwrap_or(0.0).to_string(),
            c.get(1).copied().unwrap_or(0.0).to_string(),
            u8::from(selected.contains(&i)).to_string(),
            individual_mspe.get(i).map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
